//! Gradient-boosted regression trees over a single feature, distance.
//!
//! Training uses squared error. The ensemble starts from the mean path loss
//! and each round fits a depth-limited tree to the current residuals with an
//! exhaustive split search. Because the only feature is distance, every tree
//! node covers a contiguous run of the distance-sorted samples, so a node's
//! split search is a single linear sweep.
//!
//! Split rule: a distance `d` goes left when `d <= threshold`. Candidate
//! thresholds are midpoints between consecutive distinct sorted distances.
//! A consequence is flat extrapolation: every distance above the largest
//! training distance (or below the smallest) lands in the same leaves.

use std::fmt::Write as _;
use std::io::Read;
use std::path::Path;

use crate::error::{Error, Result};
use crate::traces::PathLossSample;

pub const MODEL_MAGIC: &str = "mlplmodel v1";

#[derive(Debug, Clone, PartialEq)]
pub enum TreeNode {
    Leaf(f64),
    Split {
        threshold: f64,
        left: Box<TreeNode>,
        right: Box<TreeNode>,
    },
}

impl TreeNode {
    pub fn eval(&self, d: f64) -> f64 {
        let mut node = self;
        loop {
            match node {
                TreeNode::Leaf(v) => return *v,
                TreeNode::Split {
                    threshold,
                    left,
                    right,
                } => node = if d <= *threshold { left } else { right },
            }
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            TreeNode::Leaf(_) => 0,
            TreeNode::Split { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub n_trees: usize,
    pub max_depth: usize,
    pub learning_rate: f64,
    pub min_samples_leaf: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            n_trees: 100,
            max_depth: 3,
            learning_rate: 0.1,
            min_samples_leaf: 5,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_trees < 1 || self.max_depth < 1 || self.min_samples_leaf < 1 {
            return Err(Error::Validation(
                "n_trees, max_depth and min_samples_leaf must all be >= 1".into(),
            ));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return Err(Error::Validation(format!(
                "learning rate must be in (0, 1], got {}",
                self.learning_rate
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathLossModel {
    pub base_score: f64,
    pub trees: Vec<TreeNode>,
    pub learning_rate: f64,
    /// Smallest and largest training distance.
    pub train_range: (f64, f64),
}

impl PathLossModel {
    /// A model without trees that predicts `value` everywhere.
    pub fn constant(value: f64, train_range: (f64, f64)) -> Self {
        Self {
            base_score: value,
            trees: Vec::new(),
            learning_rate: 1.0,
            train_range,
        }
    }

    /// Mean path loss at distance `d`.
    pub fn predict(&self, d: f64) -> Result<f64> {
        if !(d > 0.0) || !d.is_finite() {
            return Err(Error::Domain(format!("distance must be positive, got {d}")));
        }
        Ok(self.predict_unchecked(d))
    }

    pub(crate) fn predict_unchecked(&self, d: f64) -> f64 {
        let boost: f64 = self.trees.iter().map(|t| t.eval(d)).sum();
        self.base_score + self.learning_rate * boost
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{MODEL_MAGIC}");
        let _ = writeln!(s, "base {}", self.base_score);
        let _ = writeln!(s, "lr {}", self.learning_rate);
        let _ = writeln!(s, "range {} {}", self.train_range.0, self.train_range.1);
        let _ = writeln!(s, "trees {}", self.trees.len());
        for (i, tree) in self.trees.iter().enumerate() {
            let _ = writeln!(s, "tree {i}");
            write_preorder(tree, &mut s);
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let bad = |msg: String| Error::ModelFormat(msg);
        let mut lines = text
            .lines()
            .map(str::trim)
            .enumerate()
            .filter(|(_, l)| !l.is_empty());

        match lines.next() {
            Some((_, MODEL_MAGIC)) => {}
            Some((_, other)) if other.starts_with("mlplmodel") => {
                return Err(bad(format!("unsupported version `{other}`")))
            }
            _ => return Err(bad("missing `mlplmodel v1` header".into())),
        }

        let base = one(field(&mut lines, "base")?, "base")?;
        let lr = one(field(&mut lines, "lr")?, "lr")?;
        let range = field(&mut lines, "range")?;
        if range.len() != 2 {
            return Err(bad("`range` needs two values".into()));
        }
        let n_trees = one(field(&mut lines, "trees")?, "trees")?;
        if n_trees < 0.0 || n_trees.fract() != 0.0 {
            return Err(bad(format!("bad tree count {n_trees}")));
        }

        let mut trees = Vec::with_capacity(n_trees as usize);
        for i in 0..n_trees as usize {
            let idx = one(field(&mut lines, "tree")?, "tree")?;
            if idx != i as f64 {
                return Err(bad(format!("expected tree {i}, found tree {idx}")));
            }
            trees.push(read_preorder(&mut lines)?);
        }
        if let Some((no, extra)) = lines.next() {
            return Err(bad(format!("line {}: trailing content `{extra}`", no + 1)));
        }

        let model = Self {
            base_score: base,
            trees,
            learning_rate: lr,
            train_range: (range[0], range[1]),
        };
        model.validate()?;
        Ok(model)
    }

    fn validate(&self) -> Result<()> {
        let (lo, hi) = self.train_range;
        if !self.base_score.is_finite() || !(lo <= hi) {
            return Err(Error::ModelFormat("invalid base score or range".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return Err(Error::ModelFormat(format!(
                "learning rate {} out of (0, 1]",
                self.learning_rate
            )));
        }
        Ok(())
    }
}

fn field<'a>(lines: &mut impl Iterator<Item = (usize, &'a str)>, key: &str) -> Result<Vec<f64>> {
    let bad = |msg: String| Error::ModelFormat(msg);
    let (no, line) = lines
        .next()
        .ok_or_else(|| bad(format!("truncated before `{key}`")))?;
    let mut parts = line.split_whitespace();
    if parts.next() != Some(key) {
        return Err(bad(format!("line {}: expected `{key}`", no + 1)));
    }
    parts
        .map(|p| {
            p.parse::<f64>()
                .map_err(|_| bad(format!("line {}: bad number {p:?}", no + 1)))
        })
        .collect()
}

fn one(v: Vec<f64>, key: &str) -> Result<f64> {
    match v.as_slice() {
        [x] => Ok(*x),
        _ => Err(Error::ModelFormat(format!("`{key}` takes one value"))),
    }
}

fn write_preorder(node: &TreeNode, s: &mut String) {
    match node {
        TreeNode::Leaf(v) => {
            let _ = writeln!(s, "leaf {v}");
        }
        TreeNode::Split {
            threshold,
            left,
            right,
        } => {
            let _ = writeln!(s, "split {threshold}");
            write_preorder(left, s);
            write_preorder(right, s);
        }
    }
}

fn read_preorder<'a>(lines: &mut impl Iterator<Item = (usize, &'a str)>) -> Result<TreeNode> {
    let (no, line) = lines
        .next()
        .ok_or_else(|| Error::ModelFormat("truncated inside a tree".into()))?;
    let (kind, value) = line
        .split_once(' ')
        .ok_or_else(|| Error::ModelFormat(format!("line {}: malformed node", no + 1)))?;
    let value: f64 = value
        .trim()
        .parse()
        .ok()
        .filter(|v: &f64| v.is_finite())
        .ok_or_else(|| Error::ModelFormat(format!("line {}: bad node value", no + 1)))?;
    match kind {
        "leaf" => Ok(TreeNode::Leaf(value)),
        "split" => {
            let left = read_preorder(lines)?;
            let right = read_preorder(lines)?;
            Ok(TreeNode::Split {
                threshold: value,
                left: Box::new(left),
                right: Box::new(right),
            })
        }
        other => Err(Error::ModelFormat(format!(
            "line {}: unknown node kind `{other}`",
            no + 1
        ))),
    }
}

pub fn save_model(model: &PathLossModel, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, model.to_text()).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: impl AsRef<Path>) -> Result<PathLossModel> {
    let path = path.as_ref();
    let mut text = String::new();
    std::fs::File::open(path)
        .and_then(|mut f| f.read_to_string(&mut text))
        .map_err(|e| Error::io(path, e))?;
    PathLossModel::from_text(&text)
}

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

struct Grower<'a> {
    xs: &'a [f64],
    residuals: &'a [f64],
    max_depth: usize,
    min_leaf: usize,
}

struct BestSplit {
    /// Index of the last sample that goes left.
    last_left: usize,
    threshold: f64,
    gain: f64,
}

impl Grower<'_> {
    fn grow(&self, lo: usize, hi: usize, depth: usize) -> TreeNode {
        let n = hi - lo;
        let sum: f64 = self.residuals[lo..hi].iter().sum();
        let mean = sum / n as f64;
        if depth >= self.max_depth || n < 2 * self.min_leaf {
            return TreeNode::Leaf(mean);
        }
        match self.best_split(lo, hi, sum) {
            Some(best) => TreeNode::Split {
                threshold: best.threshold,
                left: Box::new(self.grow(lo, best.last_left + 1, depth + 1)),
                right: Box::new(self.grow(best.last_left + 1, hi, depth + 1)),
            },
            None => TreeNode::Leaf(mean),
        }
    }

    /// Maximises `S_l^2/n_l + S_r^2/n_r - S^2/n`, the drop in squared error.
    fn best_split(&self, lo: usize, hi: usize, total: f64) -> Option<BestSplit> {
        let n = (hi - lo) as f64;
        let parent = total * total / n;
        let mut left_sum = 0.0;
        let mut best: Option<BestSplit> = None;
        for i in lo..hi - 1 {
            left_sum += self.residuals[i];
            let n_left = i - lo + 1;
            let n_right = hi - i - 1;
            if self.xs[i] == self.xs[i + 1] || n_left < self.min_leaf || n_right < self.min_leaf {
                continue;
            }
            let right_sum = total - left_sum;
            let gain = left_sum * left_sum / n_left as f64 + right_sum * right_sum / n_right as f64
                - parent;
            if gain > best.as_ref().map_or(0.0, |b| b.gain) {
                best = Some(BestSplit {
                    last_left: i,
                    threshold: 0.5 * (self.xs[i] + self.xs[i + 1]),
                    gain,
                });
            }
        }
        best
    }
}

/// Fits a boosted ensemble to `samples`.
pub fn train(samples: &[PathLossSample], cfg: &TrainConfig) -> Result<PathLossModel> {
    cfg.validate()?;
    if samples.is_empty() {
        return Err(Error::Degenerate("cannot train on zero samples".into()));
    }
    let mut sorted: Vec<PathLossSample> = samples.to_vec();
    sorted.sort_by(|a, b| a.distance.total_cmp(&b.distance));
    let xs: Vec<f64> = sorted.iter().map(|s| s.distance).collect();
    let ys: Vec<f64> = sorted.iter().map(|s| s.path_loss).collect();
    let range = (xs[0], xs[xs.len() - 1]);
    let base = ys.iter().sum::<f64>() / ys.len() as f64;

    if range.0 == range.1 {
        return Ok(PathLossModel::constant(base, range));
    }

    let mut residuals: Vec<f64> = ys.iter().map(|y| y - base).collect();
    let mut trees = Vec::with_capacity(cfg.n_trees);
    for _ in 0..cfg.n_trees {
        let tree = Grower {
            xs: &xs,
            residuals: &residuals,
            max_depth: cfg.max_depth,
            min_leaf: cfg.min_samples_leaf,
        }
        .grow(0, xs.len(), 0);
        for (r, &x) in residuals.iter_mut().zip(&xs) {
            *r -= cfg.learning_rate * tree.eval(x);
        }
        trees.push(tree);
    }

    Ok(PathLossModel {
        base_score: base,
        trees,
        learning_rate: cfg.learning_rate,
        train_range: range,
    })
}
