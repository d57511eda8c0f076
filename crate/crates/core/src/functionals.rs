//! Gaussian-weighted functionals of equivariant connections.
//!
//! Integrals over ℝⁿ of f(r, cosθ) against kernels that are rotationally
//! symmetric about the axis through x₀ = c·e₁ reduce to a radial integral of
//! a sphere average in θ, the angle to e₁.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::equivariant::{EquivariantConnection, RadialProfile};
use crate::error::{Error, Result};
use crate::optimize::NelderMead;
use crate::quad::{composite, composite_adaptive, pairwise_sum, GaussLegendre};
use crate::sphere_area;

/// Spacetime basepoint reduced by rotational symmetry: x₀ = c·e₁.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Basepoint {
    pub c: f64,
    pub t0: f64,
}

impl Basepoint {
    pub fn new(c: f64, t0: f64) -> Result<Self> {
        if !(t0 > 0.0 && t0.is_finite()) {
            return Err(Error::Argument(format!("t0 must be positive, got {t0}")));
        }
        if !(c >= 0.0 && c.is_finite()) {
            return Err(Error::Argument(format!("c = |x0| must be nonnegative, got {c}")));
        }
        Ok(Self { c, t0 })
    }

    pub fn origin() -> Self {
        Self { c: 0.0, t0: 1.0 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum KernelKind {
    Shrinker,
    Translator,
    Expander,
}

/// Normalisations of the shrinker functional.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum NormalizationConvention {
    /// t₀²(4πt₀)^{−n/2} ∫ |F|² e^{−|x−x₀|²/4t₀} dV.
    A,
    /// t₀² ∫ |F|² e^{−|x−x₀|²/4t₀} dV.
    B,
    /// A without the sphere area ω_{n−1}.
    C,
}

impl NormalizationConvention {
    pub const ALL: [Self; 3] = [Self::A, Self::B, Self::C];

    /// Factor relative to the unnormalised integral ∫|F|²e^{…}dV.
    pub fn factor(self, n: usize, t0: f64) -> f64 {
        let heat = (4.0 * std::f64::consts::PI * t0).powf(-(n as f64) / 2.0);
        match self {
            Self::A => t0 * t0 * heat,
            Self::B => t0 * t0,
            Self::C => t0 * t0 * heat / sphere_area(n),
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Self::A => "A",
            Self::B => "B",
            Self::C => "C",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.trim() {
            "A" | "a" => Ok(Self::A),
            "B" | "b" => Ok(Self::B),
            "C" | "c" => Ok(Self::C),
            other => Err(Error::Argument(format!("unknown convention {other:?}"))),
        }
    }
}

/// Radial/angular quadrature settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadratureSpec {
    /// Gauss–Legendre nodes per radial panel.
    pub order: usize,
    /// Initial panel width (panels are doubled from here when adaptive).
    pub panel_width: f64,
    pub max_panels: usize,
    /// Fixed truncation radius; chosen from the kernel when `None`.
    pub r_max: Option<f64>,
    pub tol_abs: f64,
    pub tol_rel: f64,
    /// Gauss–Legendre nodes per angular panel.
    pub angular: usize,
    /// Panel doubling; off gives a fixed rule that is smooth in parameters.
    pub adaptive: bool,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self {
            order: 16,
            panel_width: 0.5,
            max_panels: 8192,
            r_max: None,
            tol_abs: 1e-300,
            tol_rel: 1e-12,
            angular: 20,
            adaptive: true,
        }
    }
}

impl QuadratureSpec {
    pub fn fixed() -> Self {
        Self { adaptive: false, panel_width: 0.125, ..Self::default() }
    }

    pub fn refined(&self) -> Self {
        Self { panel_width: self.panel_width / 2.0, angular: self.angular * 2, ..self.clone() }
    }
}

/// A quadrature value with its provenance.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
    pub panels: usize,
    pub r_max: f64,
    pub angular: usize,
}

fn angular_panels(s: f64) -> usize {
    1 + (s.abs().sqrt() / 3.0).ceil() as usize
}

/// Nodes u = cosθ and weights sin^{n−2}θ / ∫sin^{n−2} of the graded rule with
/// `panels` panels, clustered near θ = 0.
fn angular_base(n: usize, panels: usize, base: &GaussLegendre) -> Vec<(f64, f64)> {
    let denom = sphere_area(n) / sphere_area(n - 1);
    let mut out = Vec::with_capacity(panels * base.len());
    for p in 0..panels {
        let lo = std::f64::consts::PI * (p as f64 / panels as f64).powi(2);
        let hi = std::f64::consts::PI * ((p + 1) as f64 / panels as f64).powi(2);
        for (th, w) in base.mapped(lo, hi) {
            out.push((th.cos(), w * th.sin().powi(n as i32 - 2) / denom));
        }
    }
    out
}

fn weighted(rule: &[(f64, f64)], s: f64, out: &mut Vec<(f64, f64)>) {
    out.clear();
    let sign = if s < 0.0 { -1.0 } else { 1.0 };
    let a = s.abs();
    if a == 0.0 {
        out.extend_from_slice(rule);
    } else {
        out.extend(rule.iter().map(|&(u, w)| (sign * u, w * (a * (u - 1.0)).exp())));
    }
}

/// Sphere-average rule for weight e^{s(u − 1)} (s ≥ 0) or e^{−s(u + 1)} (s < 0),
/// u = cosθ; the returned weights already include sin^{n−2}θ / ∫sin^{n−2}.
pub fn angular_rule(n: usize, s: f64, base: &GaussLegendre) -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    weighted(&angular_base(n, angular_panels(s), base), s, &mut out);
    out
}

/// e^{−|s|} · avg_{Sⁿ⁻¹} cos^kθ e^{s cosθ} for k = 0, 1, 2 and |cosθ|.
pub fn sphere_moments_scaled(n: usize, s: f64, m: usize) -> [f64; 4] {
    let base = GaussLegendre::new(m);
    let mut acc = [0.0; 4];
    for (u, w) in angular_rule(n, s, &base) {
        acc[0] += w;
        acc[1] += w * u;
        acc[2] += w * u * u;
        acc[3] += w * u.abs();
    }
    acc
}

/// A_n(s) = avg_{Sⁿ⁻¹} e^{s cosθ}.
pub fn sphere_average(n: usize, s: f64) -> Result<f64> {
    if n < 2 {
        return Err(Error::Argument("sphere average needs n >= 2".into()));
    }
    let scaled = sphere_moments_scaled(n, s, 24)[0];
    if s.abs() > 700.0 {
        return Err(Error::Argument(format!("A_n({s}) overflows; use sphere_moments_scaled")));
    }
    Ok(scaled * s.abs().exp())
}

/// Kernel in the reduced coordinates: log of the radial part and the
/// angular exponent s(r).
#[derive(Clone, Copy, Debug)]
pub(crate) enum Kernel {
    /// e^{−|x−x₀|²/4τ}
    Shrinker { c: f64, tau: f64 },
    /// e^{⟨x₀,x⟩ − |x₀|²(t−t₀)}
    Translator { c: f64, dt: f64 },
    /// e^{|x−x₀|²/4σ}
    Expander { c: f64, sigma: f64 },
}

impl Kernel {
    fn parts(&self, r: f64) -> (f64, f64) {
        match *self {
            Kernel::Shrinker { c, tau } => (-(r - c) * (r - c) / (4.0 * tau), c * r / (2.0 * tau)),
            Kernel::Translator { c, dt } => (c * r - c * c * dt, c * r),
            Kernel::Expander { c, sigma } => ((r + c) * (r + c) / (4.0 * sigma), -c * r / (2.0 * sigma)),
        }
    }

    fn auto_r_max(&self, n: usize) -> f64 {
        match *self {
            Kernel::Shrinker { c, tau } => {
                let w = 2.0 * tau.sqrt();
                let mut z: f64 = 6.0;
                for _ in 0..50 {
                    let need = (42.0 + (n as f64 - 1.0) * (1.0 + c + w * z).ln()).sqrt();
                    if (need - z).abs() < 1e-3 {
                        break;
                    }
                    z = need;
                }
                c + w * z
            }
            Kernel::Translator { .. } | Kernel::Expander { .. } => 20.0,
        }
    }
}

/// ω_{n−1} ∫₀^{r_max} r^{n−1} avg_θ[f(r, cosθ) · kernel] dr.
pub(crate) fn axial_integral<const K: usize>(
    n: usize,
    kernel: Kernel,
    spec: &QuadratureSpec,
    f: impl Fn(f64, f64) -> [f64; K] + Sync,
) -> Result<([f64; K], Estimate)> {
    axial_integral_checked(n, kernel, spec, K, f)
}

/// [`axial_integral`] where only the first `checked` components drive panel
/// refinement; the rest (typically |integrand| magnitudes) only set the scale.
pub(crate) fn axial_integral_checked<const K: usize>(
    n: usize,
    kernel: Kernel,
    spec: &QuadratureSpec,
    checked: usize,
    f: impl Fn(f64, f64) -> [f64; K] + Sync,
) -> Result<([f64; K], Estimate)> {
    kernel_integral(n, kernel, spec, checked, |r, ang: &[(f64, f64)]| {
        let mut acc = [0.0; K];
        for &(u, wu) in ang {
            let v = f(r, u);
            for k in 0..K {
                acc[k] += wu * v[k];
            }
        }
        acc
    })
}

/// [`axial_integral`] for integrands that depend on r only.
pub(crate) fn radial_integral<const K: usize>(
    n: usize,
    kernel: Kernel,
    spec: &QuadratureSpec,
    f: impl Fn(f64) -> [f64; K] + Sync,
) -> Result<([f64; K], Estimate)> {
    kernel_integral(n, kernel, spec, K, |r, ang: &[(f64, f64)]| {
        let m0: f64 = ang.iter().map(|a| a.1).sum();
        f(r).map(|v| v * m0)
    })
}

fn kernel_integral<const K: usize>(
    n: usize,
    kernel: Kernel,
    spec: &QuadratureSpec,
    checked: usize,
    f: impl Fn(f64, &[(f64, f64)]) -> [f64; K] + Sync,
) -> Result<([f64; K], Estimate)> {
    let r_max = spec.r_max.unwrap_or_else(|| kernel.auto_r_max(n));
    if !(r_max > 0.0) {
        return Err(Error::Argument("r_max must be positive".into()));
    }
    let rule = GaussLegendre::new(spec.order);
    let ang = GaussLegendre::new(spec.angular);
    let area = sphere_area(n);
    let max_panels = angular_panels(kernel.parts(r_max).1);
    let tables: Vec<Vec<(f64, f64)>> = (1..=max_panels).map(|p| angular_base(n, p, &ang)).collect();
    let scratch = std::cell::RefCell::new(Vec::new());
    let radial = |r: f64| -> [f64; K] {
        let (logw, s) = kernel.parts(r);
        let w = area * r.powi(n as i32 - 1) * logw.exp();
        if w == 0.0 {
            return [0.0; K];
        }
        let p = angular_panels(s).min(max_panels);
        let mut rule = scratch.borrow_mut();
        weighted(&tables[p - 1], s, &mut rule);
        f(r, &rule).map(|v| v * w)
    };
    let start = ((r_max / spec.panel_width).ceil() as usize).max(1);
    let (vals, err, panels) = if spec.adaptive {
        composite_adaptive(&rule, 0.0, r_max, start, spec.max_panels, spec.tol_abs, spec.tol_rel, checked, radial)
    } else {
        (composite(&rule, 0.0, r_max, start, radial), 0.0, start)
    };
    if vals.iter().any(|v| !v.is_finite()) {
        return Err(Error::Tolerance { value: vals[0], error: f64::INFINITY });
    }
    let scale = vals.iter().map(|v| v.abs()).fold(0.0, f64::max);
    let tol = spec.tol_abs.max(spec.tol_rel * scale);
    if spec.adaptive && err > tol * 1e3 {
        return Err(Error::Tolerance { value: vals[0], error: err });
    }
    let est = Estimate { value: vals[0], error: err, panels, r_max, angular: spec.angular };
    Ok((vals, est))
}

fn shrinker_kernel(bp: &Basepoint) -> Kernel {
    Kernel::Shrinker { c: bp.c, tau: bp.t0 }
}

/// F_{x₀,t₀}(∇) under the given normalisation.
pub fn f_shrinker<P: RadialProfile>(
    conn: &EquivariantConnection<P>,
    bp: &Basepoint,
    q: &QuadratureSpec,
    conv: NormalizationConvention,
) -> Result<Estimate> {
    let (_, mut est) = radial_integral(conn.n, shrinker_kernel(bp), q, |r| [conn.curvature_norm_sq(r)])?;
    let k = conv.factor(conn.n, bp.t0);
    est.value *= k;
    est.error *= k;
    Ok(est)
}

/// Shrinker functional at time t of a flow: (t − t₀)² ∫|F|² G_{x₀,t₀}(·, t).
pub fn f_shrinker_at_time<P: RadialProfile>(
    conn: &EquivariantConnection<P>,
    c: f64,
    t0: f64,
    t: f64,
    q: &QuadratureSpec,
) -> Result<Estimate> {
    if !(t < t0) {
        return Err(Error::Argument(format!("shrinker kernel needs t < t0 (t = {t}, t0 = {t0})")));
    }
    f_shrinker(conn, &Basepoint::new(c, t0 - t)?, q, NormalizationConvention::A)
}

/// ∫_{B(r_max)} |F|² e^{⟨x₀,x⟩ − |x₀|²(t−t₀)} dV.
pub fn f_translator<P: RadialProfile>(
    conn: &EquivariantConnection<P>,
    c: f64,
    t0: f64,
    t: f64,
    q: &QuadratureSpec,
) -> Result<Estimate> {
    let q = QuadratureSpec { r_max: Some(q.r_max.unwrap_or(20.0)), ..q.clone() };
    let (_, est) = radial_integral(conn.n, Kernel::Translator { c, dt: t - t0 }, &q, |r| {
        [conn.curvature_norm_sq(r)]
    })?;
    Ok(est)
}

/// (t₀ − t)² ∫_{B(r_max)} |F|² (4π(t−t₀))^{−n/2} e^{|x−x₀|²/4(t−t₀)} dV, t > t₀.
pub fn f_expander<P: RadialProfile>(
    conn: &EquivariantConnection<P>,
    bp: &Basepoint,
    t: f64,
    q: &QuadratureSpec,
) -> Result<Estimate> {
    let sigma = t - bp.t0;
    if !(sigma > 0.0) {
        return Err(Error::Argument(format!("expander kernel needs t > t0 (t = {t}, t0 = {})", bp.t0)));
    }
    let q = QuadratureSpec { r_max: Some(q.r_max.unwrap_or(20.0)), ..q.clone() };
    let (_, mut est) = radial_integral(conn.n, Kernel::Expander { c: bp.c, sigma }, &q, |r| {
        [conn.curvature_norm_sq(r)]
    })?;
    let k = sigma * sigma * (4.0 * std::f64::consts::PI * sigma).powf(-(conn.n as f64) / 2.0);
    est.value *= k;
    est.error *= k;
    Ok(est)
}

/// Optimiser settings for the entropy.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EntropySearch {
    /// Starting points (log t₀, c).
    pub starts: Vec<[f64; 2]>,
    pub f_tol: f64,
    pub x_tol: f64,
    pub max_iter: usize,
    /// Box on (log t₀, c); maximisers on its edge are flagged.
    pub log_t0_range: [f64; 2],
    pub c_max: f64,
}

impl Default for EntropySearch {
    fn default() -> Self {
        Self {
            starts: vec![[0.0, 0.0], [-1.0, 0.5], [1.0, 0.5], [0.5, 1.5], [-0.5, 1.0]],
            f_tol: 1e-13,
            x_tol: 1e-8,
            max_iter: 4000,
            log_t0_range: [-6.0, 6.0],
            c_max: 20.0,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EntropyResult {
    pub lambda: f64,
    pub argmax: Basepoint,
    pub converged: bool,
    /// The maximiser sits on the edge of the search box.
    pub boundary_drift: bool,
    pub evaluations: usize,
}

/// λ(∇) = sup over (c, t₀) of the shrinker functional (convention A).
pub fn entropy<P: RadialProfile>(
    conn: &EquivariantConnection<P>,
    search: &EntropySearch,
    q: &QuadratureSpec,
) -> Result<EntropyResult> {
    entropy_scaled(conn, search, q, 1.0)
}

/// Entropy of the connection whose |F|² is multiplied by `weight`.
pub fn entropy_scaled<P: RadialProfile>(
    conn: &EquivariantConnection<P>,
    search: &EntropySearch,
    q: &QuadratureSpec,
    weight: f64,
) -> Result<EntropyResult> {
    if search.starts.is_empty() {
        return Err(Error::Argument("entropy search needs at least one start".into()));
    }
    let [lo, hi] = search.log_t0_range;
    let clamp = |x: &[f64]| (x[0].clamp(lo, hi), x[1].abs().min(search.c_max));
    let objective = |x: &[f64]| -> f64 {
        let (lt, c) = clamp(x);
        let bp = Basepoint { c, t0: lt.exp() };
        match f_shrinker(conn, &bp, q, NormalizationConvention::A) {
            Ok(e) => -weight * e.value,
            Err(_) => f64::INFINITY,
        }
    };
    let nm = NelderMead { max_iter: search.max_iter, f_tol: search.f_tol, x_tol: search.x_tol, initial_step: 0.3 };
    let starts: Vec<Vec<f64>> = search.starts.iter().map(|s| s.to_vec()).collect();
    let runs = nm.multistart(objective, &starts);
    let evaluations = runs.iter().map(|r| r.evaluations).sum();
    let best = runs
        .into_iter()
        .min_by(|a, b| a.f.total_cmp(&b.f))
        .ok_or_else(|| Error::Argument("no optimiser runs".into()))?;
    let (lt, c) = clamp(&best.x);
    let edge = |v: f64, a: f64, b: f64| (v - a).abs() < 1e-6 || (v - b).abs() < 1e-6;
    Ok(EntropyResult {
        lambda: -best.f,
        argmax: Basepoint { c, t0: lt.exp() },
        converged: best.converged,
        boundary_drift: edge(lt, lo, hi) || c >= search.c_max - 1e-9,
        evaluations,
    })
}

/// Published entropy values λ(∇_n) of the Gastel shrinkers, n = 5..9.
pub const REFERENCE_LAMBDA: [(usize, f64); 5] =
    [(5, 638.121), (6, 716.109), (7, 929.899), (8, 1292.44), (9, 1865.98)];

pub fn reference_lambda(n: usize) -> Option<f64> {
    REFERENCE_LAMBDA.iter().find(|(m, _)| *m == n).map(|(_, v)| *v)
}

/// One entry of the entropy table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub n: usize,
    pub convention: NormalizationConvention,
    pub value: f64,
    pub error: f64,
    /// Maximiser of the convention-A functional, where every convention is evaluated.
    pub argmax: Basepoint,
    pub reference: Option<f64>,
    pub rel_dev: Option<f64>,
}

/// λ under each convention for each Gastel dimension. B and C have no finite
/// supremum in t₀ of their own, so all conventions are read off at the
/// convention-A maximiser.
pub fn entropy_table(
    dims: &[usize],
    conventions: &[NormalizationConvention],
    search: &EntropySearch,
    q: &QuadratureSpec,
) -> Result<Vec<TableRow>> {
    let mut rows = Vec::new();
    for &n in dims {
        let conn = EquivariantConnection::gastel(n)?;
        let e = entropy(&conn, search, q)?;
        if !e.converged {
            return Err(Error::NonConvergence(format!("entropy search for n = {n} did not converge")));
        }
        for &conv in conventions {
            let est = f_shrinker(&conn, &e.argmax, q, conv)?;
            let reference = reference_lambda(n);
            rows.push(TableRow {
                n,
                convention: conv,
                value: est.value,
                error: est.error,
                argmax: e.argmax,
                reference,
                rel_dev: reference.map(|r| (est.value - r) / r),
            });
        }
    }
    Ok(rows)
}

/// Conventions under which every row with a reference value is within `tol`.
pub fn matching_conventions(rows: &[TableRow], tol: f64) -> Vec<NormalizationConvention> {
    NormalizationConvention::ALL
        .into_iter()
        .filter(|&c| {
            let mine: Vec<&TableRow> = rows.iter().filter(|r| r.convention == c && r.rel_dev.is_some()).collect();
            !mine.is_empty() && mine.iter().all(|r| r.rel_dev.is_some_and(|d| d.abs() <= tol))
        })
        .collect()
}

/// Ξ(x₀, t₀, s) = F_{x₀,t₀}(∇_s) for a one-parameter family.
pub fn xi<P: RadialProfile>(
    family: impl Fn(f64) -> EquivariantConnection<P>,
    bp: &Basepoint,
    s: f64,
    q: &QuadratureSpec,
) -> Result<f64> {
    Ok(f_shrinker(&family(s), bp, q, NormalizationConvention::A)?.value)
}

/// Ξ on the grid cs × log_t0s (row-major in c), computed in parallel.
pub fn xi_grid<P: RadialProfile>(
    conn: &EquivariantConnection<P>,
    cs: &[f64],
    log_t0s: &[f64],
    q: &QuadratureSpec,
) -> Result<Vec<Vec<f64>>> {
    cs.par_iter()
        .map(|&c| {
            log_t0s
                .iter()
                .map(|&lt| Ok(f_shrinker(conn, &Basepoint::new(c, lt.exp())?, q, NormalizationConvention::A)?.value))
                .collect()
        })
        .collect()
}

/// ∫_{B(R)} |F|² dV.
pub fn energy_ball<P: RadialProfile>(conn: &EquivariantConnection<P>, radius: f64) -> Result<f64> {
    if !(radius >= 0.0) {
        return Err(Error::Argument("radius must be nonnegative".into()));
    }
    if radius == 0.0 {
        return Ok(0.0);
    }
    let rule = GaussLegendre::new(16);
    let n = conn.n;
    let panels = ((radius / 0.5).ceil() as usize).max(1);
    let (v, _, _) = composite_adaptive(&rule, 0.0, radius, panels, 1 << 16, 0.0, 1e-12, 1, |r| {
        [conn.curvature_norm_sq(r) * r.powi(n as i32 - 1)]
    });
    Ok(sphere_area(n) * v[0])
}

/// I_θ = ∫ |x − x₀|^θ |F|² e^{−|x−x₀|²/4t₀} dV.
pub fn moment_i_theta<P: RadialProfile>(
    conn: &EquivariantConnection<P>,
    theta: f64,
    bp: &Basepoint,
    q: &QuadratureSpec,
) -> Result<Estimate> {
    if !(theta >= 0.0) {
        return Err(Error::Argument("theta must be nonnegative".into()));
    }
    let c = bp.c;
    let (_, est) = axial_integral(conn.n, shrinker_kernel(bp), q, |r, u| {
        let d2 = (r * r - 2.0 * c * r * u + c * c).max(0.0);
        [d2.powf(theta / 2.0) * conn.curvature_norm_sq(r)]
    })?;
    Ok(est)
}

/// Log-log slope of sup |F|² over dyadic shells of [r_lo, r_hi].
pub fn curvature_growth_exponent<P: RadialProfile>(conn: &EquivariantConnection<P>, r_lo: f64, r_hi: f64) -> f64 {
    let shell_max = |a: f64| (0..=64).map(|k| conn.curvature_norm_sq(a * (1.0 + k as f64 / 64.0))).fold(0.0, f64::max);
    let (a, b) = (shell_max(r_lo).max(1e-300), shell_max(r_hi / 2.0).max(1e-300));
    (b.ln() - a.ln()) / ((r_hi / 2.0).ln() - r_lo.ln())
}

/// Soliton identities, integrated with the unnormalised kernel G₀.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolitonIdentity {
    /// ∫((4−n) + |x−x₀|²/2t₀)|F|²G₀ = 0
    FiveA,
    /// ∫(x−x₀)^γ |F|²G₀ = 0
    FiveB,
    /// ∫|x−x₀|⁴|F|²G₀ = 4(n−2)(n−4)t₀²∫|F|²G₀ − 64t₀³∫|D*F|²G₀
    FiveC,
    /// ∫|x−x₀|²⟨V,x−x₀⟩|F|²G₀ = ∫⟨V⌟F, D*F⟩G₀ = 0
    FiveD,
    /// ∫⟨V,x−x₀⟩²|F|²G₀ = 2t₀∫|V|²|F|²G₀ − 8t₀∫|V⌟F|²G₀
    FiveE,
    /// (0,1)-soliton at basepoint (x₀,t₀):
    /// ∫(|x−x₀|²/4 + t₀(4−n)/2)|F|²G₀ = −∫⟨(x(t₀−1)+x₀)⌟F, (x−x₀)⌟F⟩G₀
    SolitonA,
    /// ∫⟨x−x₀,V⟩/2 |F|²G₀ = −2∫⟨(x(t₀−1)+x₀)⌟F, V⌟F⟩G₀
    SolitonB,
}

impl SolitonIdentity {
    pub const ALL: [Self; 7] =
        [Self::FiveA, Self::FiveB, Self::FiveC, Self::FiveD, Self::FiveE, Self::SolitonA, Self::SolitonB];

    pub fn id(self) -> &'static str {
        match self {
            Self::FiveA => "5pl-a",
            Self::FiveB => "5pl-b",
            Self::FiveC => "5pl-c",
            Self::FiveD => "5pl-d",
            Self::FiveE => "5pl-e",
            Self::SolitonA => "sid-a",
            Self::SolitonB => "sid-b",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|i| i.id() == s)
            .ok_or_else(|| Error::Argument(format!("unknown identity {s:?}")))
    }

    fn needs_v(self) -> bool {
        matches!(self, Self::FiveB | Self::FiveD | Self::FiveE | Self::SolitonB)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IdentityResult {
    pub lhs: f64,
    pub rhs: f64,
    /// ∫|lhs integrand| + ∫|rhs integrand| (upper bound).
    pub scale: f64,
    pub residual: f64,
}

/// Relative residual |LHS − RHS| / (∫|lhs| + ∫|rhs| + ε).
pub fn soliton_identity_residual<P: RadialProfile>(
    conn: &EquivariantConnection<P>,
    id: SolitonIdentity,
    v: Option<&[f64]>,
    bp: &Basepoint,
    q: &QuadratureSpec,
) -> Result<IdentityResult> {
    let n = conn.n;
    let nf = n as f64;
    let (c, t0) = (bp.c, bp.t0);
    // V is placed on the axis: V = vm·e₁.
    let vm = match (id.needs_v(), v) {
        (true, None) => return Err(Error::Argument(format!("identity {} needs a vector V", id.id()))),
        (_, Some(v)) => {
            if v.len() != n {
                return Err(Error::Argument("V has the wrong dimension".into()));
            }
            let along = v[0];
            let perp: f64 = v[1..].iter().map(|a| a * a).sum::<f64>().sqrt();
            if c > 0.0 && perp > 1e-12 * (1.0 + along.abs()) {
                return Err(Error::Argument("V must be parallel to x0 when x0 != 0".into()));
            }
            if c > 0.0 {
                along
            } else {
                crate::equivariant::norm(v)
            }
        }
        (false, None) => 0.0,
    };
    // Each closure returns [lhs, rhs, |lhs|, |rhs|] at (r, u = cosθ).
    let integrand = |r: f64, u: f64| -> [f64; 4] {
        let f2 = conn.curvature_norm_sq(r);
        let xu = r * u; // ⟨x, e₁⟩
        let d2 = r * r - 2.0 * c * xu + c * c; // |x − x₀|²
        let (l, rr) = match id {
            SolitonIdentity::FiveA => (((4.0 - nf) + d2 / (2.0 * t0)) * f2, 0.0),
            SolitonIdentity::FiveB => ((xu - c) * vm * f2, 0.0),
            SolitonIdentity::FiveC => (
                d2 * d2 * f2,
                4.0 * (nf - 2.0) * (nf - 4.0) * t0 * t0 * f2 - 64.0 * t0 * t0 * t0 * conn.dstar_norm_sq(r),
            ),
            SolitonIdentity::FiveD => (d2 * vm * (xu - c) * f2, 0.0),
            SolitonIdentity::FiveE => {
                let vx = vm * (xu - c);
                let vv = conn.hook_pair(r, vm * vm, vm * xu, vm * xu);
                (vx * vx * f2, 2.0 * t0 * vm * vm * f2 - 8.0 * t0 * vv)
            }
            SolitonIdentity::SolitonA => {
                // P = (t₀−1)x + c e₁, Q = x − c e₁
                let pq = (t0 - 1.0) * (r * r - c * xu) + c * xu - c * c;
                let xp = (t0 - 1.0) * r * r + c * xu;
                let xq = r * r - c * xu;
                ((d2 / 4.0 + t0 * (4.0 - nf) / 2.0) * f2, -conn.hook_pair(r, pq, xp, xq))
            }
            SolitonIdentity::SolitonB => {
                let pv = vm * ((t0 - 1.0) * xu + c);
                let xp = (t0 - 1.0) * r * r + c * xu;
                ((xu - c) * vm / 2.0 * f2, -2.0 * conn.hook_pair(r, pv, xp, vm * xu))
            }
        };
        [l, rr, l.abs(), rr.abs()]
    };
    let (vals, _) = axial_integral_checked(n, shrinker_kernel(bp), q, 2, integrand)?;
    let [lhs, rhs, al, ar] = vals;
    let scale = al + ar;
    let residual = (lhs - rhs).abs() / (scale + 1e-300);
    Ok(IdentityResult { lhs, rhs, scale, residual })
}

/// Monte Carlo estimate of the convention-A shrinker functional over ℝⁿ.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonteCarlo {
    pub mean: f64,
    pub std_err: f64,
    pub samples: usize,
}

/// Defensive-mixture importance sampling: with probability `narrow_weight`
/// x ~ N(0, s²I), otherwise x ~ N(x₀, 2t₀I). Deterministic for a given seed.
pub fn monte_carlo_shrinker<P: RadialProfile>(
    conn: &EquivariantConnection<P>,
    x0: &[f64],
    t0: f64,
    samples: usize,
    seed: u64,
) -> Result<MonteCarlo> {
    let n = conn.n;
    if x0.len() != n {
        return Err(Error::Argument("x0 has the wrong dimension".into()));
    }
    if !(t0 > 0.0) {
        return Err(Error::Argument("t0 must be positive".into()));
    }
    let narrow_weight = 0.6;
    let s2: f64 = 0.3;
    let wide = 2.0 * t0;
    let nf = n as f64;
    let log_norm = |var: f64| -0.5 * nf * (2.0 * std::f64::consts::PI * var).ln();
    let (ln_narrow, ln_wide) = (log_norm(s2), log_norm(wide));
    let ln_g = -0.5 * nf * (4.0 * std::f64::consts::PI * t0).ln();
    let chunk = 1 << 15;
    let chunks = samples.div_ceil(chunk);
    let partial: Vec<(f64, f64, usize)> = (0..chunks)
        .into_par_iter()
        .map(|k| {
            let mut rng = ChaCha20Rng::seed_from_u64(seed);
            rng.set_stream(k as u64);
            let m = chunk.min(samples - k * chunk);
            let mut vals = Vec::with_capacity(m);
            let mut x = vec![0.0; n];
            for _ in 0..m {
                let pick: f64 = rand::Rng::gen(&mut rng);
                let narrow = pick < narrow_weight;
                for (i, xi) in x.iter_mut().enumerate() {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    *xi = if narrow { s2.sqrt() * z } else { x0[i] + wide.sqrt() * z };
                }
                let r2: f64 = x.iter().map(|v| v * v).sum();
                let d2: f64 = x.iter().zip(x0).map(|(a, b)| (a - b) * (a - b)).sum();
                let qn = narrow_weight * (ln_narrow - r2 / (2.0 * s2)).exp();
                let qw = (1.0 - narrow_weight) * (ln_wide - d2 / (2.0 * wide)).exp();
                let g = (ln_g - d2 / (4.0 * t0)).exp();
                vals.push(t0 * t0 * conn.curvature_norm_sq(r2.sqrt()) * g / (qn + qw));
            }
            let s = pairwise_sum(&vals);
            let sq: Vec<f64> = vals.iter().map(|v| v * v).collect();
            (s, pairwise_sum(&sq), m)
        })
        .collect();
    let total: usize = partial.iter().map(|p| p.2).sum();
    let sum = pairwise_sum(&partial.iter().map(|p| p.0).collect::<Vec<_>>());
    let sumsq = pairwise_sum(&partial.iter().map(|p| p.1).collect::<Vec<_>>());
    let mean = sum / total as f64;
    let var = (sumsq / total as f64 - mean * mean).max(0.0);
    Ok(MonteCarlo { mean, std_err: (var / total as f64).sqrt(), samples: total })
}

/// Monte Carlo sphere average of e^{s cosθ} (directions uniform on Sⁿ⁻¹).
pub fn monte_carlo_sphere_average(n: usize, s: f64, samples: usize, seed: u64) -> MonteCarlo {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut vals = Vec::with_capacity(samples);
    let mut z = vec![0.0; n];
    for _ in 0..samples {
        for zi in z.iter_mut() {
            *zi = StandardNormal.sample(&mut rng);
        }
        let norm: f64 = z.iter().map(|v| v * v).sum::<f64>().sqrt();
        vals.push((s * z[0] / norm).exp());
    }
    let mean = pairwise_sum(&vals) / samples as f64;
    let var = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (samples as f64 - 1.0);
    MonteCarlo { mean, std_err: (var / samples as f64).sqrt(), samples }
}
