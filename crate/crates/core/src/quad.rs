//! Gauss–Legendre rules and composite panel integration.

use std::f64::consts::PI;

/// Nodes and weights of the m-point Gauss–Legendre rule on [−1, 1].
#[derive(Clone, Debug)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(m: usize) -> Self {
        assert!(m >= 1, "Gauss-Legendre rule needs at least one node");
        let mut nodes = vec![0.0; m];
        let mut weights = vec![0.0; m];
        let mf = m as f64;
        for i in 0..m.div_ceil(2) {
            let mut z = (PI * (i as f64 + 0.75) / (mf + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre(m, z);
                dp = d;
                let dz = p / d;
                z -= dz;
                if dz.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(m, z);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - z * z) * dp * dp);
            nodes[i] = -z;
            nodes[m - 1 - i] = z;
            weights[i] = w;
            weights[m - 1 - i] = w;
        }
        Self { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Nodes and weights mapped to [a, b].
    pub fn mapped(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let c = 0.5 * (a + b);
        let h = 0.5 * (b - a);
        self.nodes.iter().zip(&self.weights).map(move |(&z, &w)| (c + h * z, h * w))
    }

    pub fn integrate(&self, a: f64, b: f64, f: impl Fn(f64) -> f64) -> f64 {
        pairwise_sum(&self.mapped(a, b).map(|(x, w)| w * f(x)).collect::<Vec<_>>())
    }
}

/// P_m(z) and P_m'(z) by the three-term recurrence.
fn legendre(m: usize, z: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = z;
    if m == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=m {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * z * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = m as f64 * (z * p1 - p0) / (z * z - 1.0);
    (p1, d)
}

/// Pairwise (cascade) summation; reproducible for a fixed input order.
pub fn pairwise_sum(v: &[f64]) -> f64 {
    if v.len() <= 8 {
        return v.iter().sum();
    }
    let mid = v.len() / 2;
    pairwise_sum(&v[..mid]) + pairwise_sum(&v[mid..])
}

/// Composite rule over `panels` equal panels of [a, b], vector-valued integrand.
pub fn composite<const K: usize>(
    rule: &GaussLegendre,
    a: f64,
    b: f64,
    panels: usize,
    f: impl Fn(f64) -> [f64; K],
) -> [f64; K] {
    let width = (b - a) / panels as f64;
    let mut acc: Vec<Vec<f64>> = vec![Vec::with_capacity(panels * rule.len()); K];
    for p in 0..panels {
        let lo = a + p as f64 * width;
        for (x, w) in rule.mapped(lo, lo + width) {
            let v = f(x);
            for k in 0..K {
                acc[k].push(w * v[k]);
            }
        }
    }
    std::array::from_fn(|k| pairwise_sum(&acc[k]))
}

/// Composite rule with panel doubling until the first `checked` components settle.
///
/// Returns the value, the last change (error estimate) and the panel count.
#[allow(clippy::too_many_arguments)]
pub fn composite_adaptive<const K: usize>(
    rule: &GaussLegendre,
    a: f64,
    b: f64,
    start_panels: usize,
    max_panels: usize,
    tol_abs: f64,
    tol_rel: f64,
    checked: usize,
    f: impl Fn(f64) -> [f64; K],
) -> ([f64; K], f64, usize) {
    let mut panels = start_panels.max(1);
    let mut prev = composite(rule, a, b, panels, &f);
    loop {
        let next_panels = panels * 2;
        let next = composite(rule, a, b, next_panels, &f);
        let err = (0..checked.min(K)).map(|k| (next[k] - prev[k]).abs()).fold(0.0, f64::max);
        let scale = (0..K).map(|k| next[k].abs()).fold(0.0, f64::max);
        if err <= tol_abs.max(tol_rel * scale) || next_panels >= max_panels {
            return (next, err, next_panels);
        }
        panels = next_panels;
        prev = next;
    }
}
