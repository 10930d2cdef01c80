//! Derivative-free minimisation (Nelder–Mead simplex).

#[derive(Debug, Clone, Copy)]
pub struct NelderMead {
    pub max_iter: usize,
    /// Converged once every vertex is within `xtol * (1 + |best|)` of the best
    /// vertex in every coordinate.
    pub xtol: f64,
}

impl Default for NelderMead {
    fn default() -> Self {
        Self {
            max_iter: 500,
            xtol: 1e-8,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl NelderMead {
    /// Minimises `f` starting from `x0`; `step` sets the initial simplex edge
    /// along each axis. Non-finite objective values are treated as +inf.
    pub fn minimize(&self, f: impl Fn(&[f64]) -> f64, x0: &[f64], step: &[f64]) -> Minimum {
        let n = x0.len();
        let eval = |x: &[f64]| {
            let v = f(x);
            if v.is_nan() {
                f64::INFINITY
            } else {
                v
            }
        };

        let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
        simplex.push((x0.to_vec(), eval(x0)));
        for i in 0..n {
            let mut x = x0.to_vec();
            x[i] += step[i];
            let v = eval(&x);
            simplex.push((x, v));
        }

        let mut iterations = 0;
        let mut converged = false;
        while iterations < self.max_iter {
            simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
            if self.is_converged(&simplex) {
                converged = true;
                break;
            }
            iterations += 1;

            let centroid: Vec<f64> = (0..n)
                .map(|j| simplex[..n].iter().map(|(x, _)| x[j]).sum::<f64>() / n as f64)
                .collect();
            let along = |t: f64| -> Vec<f64> {
                centroid
                    .iter()
                    .zip(&simplex[n].0)
                    .map(|(c, w)| c + t * (w - c))
                    .collect()
            };

            let best = simplex[0].1;
            let second_worst = simplex[n - 1].1;
            let worst = simplex[n].1;

            let xr = along(-1.0);
            let fr = eval(&xr);
            if fr < best {
                let xe = along(-2.0);
                let fe = eval(&xe);
                simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
                continue;
            }
            if fr < second_worst {
                simplex[n] = (xr, fr);
                continue;
            }
            let (xc, fc) = if fr < worst {
                let xc = along(-0.5);
                let fc = eval(&xc);
                (xc, fc)
            } else {
                let xc = along(0.5);
                let fc = eval(&xc);
                (xc, fc)
            };
            if fc < worst.min(fr) {
                simplex[n] = (xc, fc);
                continue;
            }
            // shrink towards the best vertex
            let x_best = simplex[0].0.clone();
            for (x, v) in simplex.iter_mut().skip(1) {
                for (xi, bi) in x.iter_mut().zip(&x_best) {
                    *xi = bi + 0.5 * (*xi - bi);
                }
                *v = eval(x);
            }
        }
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        if !converged {
            converged = self.is_converged(&simplex);
        }
        let (x, value) = simplex.swap_remove(0);
        Minimum {
            x,
            value,
            iterations,
            converged,
        }
    }

    fn is_converged(&self, simplex: &[(Vec<f64>, f64)]) -> bool {
        let best = &simplex[0].0;
        simplex[1..].iter().all(|(x, _)| {
            x.iter()
                .zip(best)
                .all(|(a, b)| (a - b).abs() <= self.xtol * (1.0 + b.abs()))
        })
    }
}
