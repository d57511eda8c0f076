//! Derivative-free Nelder–Mead with multistart.

use rayon::prelude::*;

#[derive(Clone, Debug)]
pub struct NelderMead {
    pub max_iter: usize,
    pub f_tol: f64,
    pub x_tol: f64,
    pub initial_step: f64,
}

impl Default for NelderMead {
    fn default() -> Self {
        Self { max_iter: 2000, f_tol: 1e-12, x_tol: 1e-9, initial_step: 0.25 }
    }
}

#[derive(Clone, Debug)]
pub struct Optimum {
    pub x: Vec<f64>,
    pub f: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
}

impl NelderMead {
    /// Minimise `f` starting from `x0`.
    pub fn minimize(&self, f: impl Fn(&[f64]) -> f64, x0: &[f64]) -> Optimum {
        let d = x0.len();
        let mut simplex: Vec<Vec<f64>> = vec![x0.to_vec()];
        for i in 0..d {
            let mut v = x0.to_vec();
            v[i] += self.initial_step;
            simplex.push(v);
        }
        let mut vals: Vec<f64> = simplex.iter().map(|v| f(v)).collect();
        let mut evals = d + 1;
        let mut iter = 0;
        let mut converged = false;
        while iter < self.max_iter {
            iter += 1;
            let mut order: Vec<usize> = (0..=d).collect();
            order.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]));
            simplex = order.iter().map(|&i| simplex[i].clone()).collect();
            vals = order.iter().map(|&i| vals[i]).collect();

            let spread_f = (vals[d] - vals[0]).abs();
            let spread_x = simplex[1..]
                .iter()
                .map(|v| v.iter().zip(&simplex[0]).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
                .fold(0.0, f64::max);
            if spread_f <= self.f_tol * (1.0 + vals[0].abs()) && spread_x <= self.x_tol {
                converged = true;
                break;
            }

            let centroid: Vec<f64> =
                (0..d).map(|k| simplex[..d].iter().map(|v| v[k]).sum::<f64>() / d as f64).collect();
            let along = |t: f64| -> Vec<f64> {
                (0..d).map(|k| centroid[k] + t * (simplex[d][k] - centroid[k])).collect()
            };
            let xr = along(-1.0);
            let fr = f(&xr);
            evals += 1;
            if fr < vals[0] {
                let xe = along(-2.0);
                let fe = f(&xe);
                evals += 1;
                if fe < fr {
                    simplex[d] = xe;
                    vals[d] = fe;
                } else {
                    simplex[d] = xr;
                    vals[d] = fr;
                }
            } else if fr < vals[d - 1] {
                simplex[d] = xr;
                vals[d] = fr;
            } else {
                let (xc, fc) = if fr < vals[d] {
                    let xc = along(-0.5);
                    let fc = f(&xc);
                    (xc, fc)
                } else {
                    let xc = along(0.5);
                    let fc = f(&xc);
                    (xc, fc)
                };
                evals += 1;
                if fc < vals[d].min(fr) {
                    simplex[d] = xc;
                    vals[d] = fc;
                } else {
                    for i in 1..=d {
                        for k in 0..d {
                            simplex[i][k] = simplex[0][k] + 0.5 * (simplex[i][k] - simplex[0][k]);
                        }
                        vals[i] = f(&simplex[i]);
                        evals += 1;
                    }
                }
            }
        }
        let best = (0..=d).min_by(|&a, &b| vals[a].total_cmp(&vals[b])).unwrap_or(0);
        Optimum {
            x: simplex[best].clone(),
            f: vals[best],
            iterations: iter,
            evaluations: evals,
            converged,
        }
    }

    /// Independent runs from each start (in parallel); results keep start order.
    pub fn multistart(
        &self,
        f: impl Fn(&[f64]) -> f64 + Sync,
        starts: &[Vec<f64>],
    ) -> Vec<Optimum> {
        starts.par_iter().map(|x0| self.minimize(&f, x0)).collect()
    }
}

/// Golden-section maximisation on [a, b].
pub fn golden_max(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while (b - a).abs() > tol {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    let x = 0.5 * (a + b);
    (x, f(x))
}
