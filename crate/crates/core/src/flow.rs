//! Method-of-lines solver for the reduced equivariant flow
//! η_t = η_rr + (n−3)η_r/r − (n−2)η(η−1)(η−2)/r²
//! on a uniform grid, with harnesses for self-similarity and monotonicity.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::equivariant::{flow_rhs_uniform, uniform_step, EquivariantConnection, GastelParams, OuterGhost, SampledProfile};
use crate::error::{Error, Result};
use crate::functionals::{entropy, f_shrinker_at_time, EntropySearch, QuadratureSpec};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlowState {
    pub rho: Vec<f64>,
    pub eta: Vec<f64>,
    pub t: f64,
}

impl FlowState {
    pub fn new(rho: Vec<f64>, eta: Vec<f64>, t: f64) -> Result<Self> {
        uniform_step(&rho)?;
        if rho.len() != eta.len() {
            return Err(Error::Argument("rho and eta lengths differ".into()));
        }
        if eta.iter().any(|v| !v.is_finite()) || !t.is_finite() {
            return Err(Error::Argument("flow state must be finite".into()));
        }
        Ok(Self { rho, eta, t })
    }

    pub fn grid(dr: f64, rho_max: f64) -> Result<Vec<f64>> {
        if !(dr > 0.0 && rho_max > dr) {
            return Err(Error::Argument(format!("bad grid: dr = {dr}, rho_max = {rho_max}")));
        }
        let m = (rho_max / dr).round() as usize;
        Ok((0..=m).map(|k| k as f64 * dr).collect())
    }

    /// Samples η(ρ) = f(ρ) at time t.
    pub fn from_fn(dr: f64, rho_max: f64, t: f64, f: impl Fn(f64) -> f64) -> Result<Self> {
        let rho = Self::grid(dr, rho_max)?;
        let eta = rho.iter().map(|&r| f(r)).collect();
        Self::new(rho, eta, t)
    }

    /// Resamples a profile onto the grid with η₀ = 0.
    pub fn from_profile(p: &SampledProfile, dr: f64, t: f64) -> Result<Self> {
        use crate::equivariant::RadialProfile;
        Self::from_fn(dr, p.r_max(), t, |r| if r == 0.0 { 0.0 } else { p.eta(r) })
    }

    /// The self-similar Gastel solution at time t < 0.
    pub fn gastel(n: usize, dr: f64, rho_max: f64, t: f64) -> Result<Self> {
        let p = GastelParams::new(n)?;
        if !(t < 0.0) {
            return Err(Error::Argument(format!("the self-similar solution needs t < 0, got {t}")));
        }
        Self::from_fn(dr, rho_max, t, |r| gastel_eta(&p, r, t))
    }

    pub fn dr(&self) -> f64 {
        self.rho[1]
    }

    pub fn profile(&self) -> Result<SampledProfile> {
        SampledProfile::new(self.rho.clone(), self.eta.clone())
    }

    /// max_ρ |F| on the grid, using the closed form of |F|² in η.
    pub fn sup_f(&self, n: usize) -> f64 {
        curvature_norm_sq_grid(self, n).into_iter().fold(0.0, f64::max).sqrt()
    }
}

/// η(ρ, t) = ρ²/(aρ² − bt).
pub fn gastel_eta(p: &GastelParams, rho: f64, t: f64) -> f64 {
    rho * rho / (p.a * rho * rho - p.b * t)
}

/// |F|² at every node: 2(n−1)[(n−2)A² + 2(η_r/r)²], A = η²/r² − 2η/r².
pub fn curvature_norm_sq_grid(state: &FlowState, n: usize) -> Vec<f64> {
    let nf = n as f64;
    let dr = state.dr();
    let eta = &state.eta;
    let last = eta.len() - 1;
    let c2 = even_c2(dr, eta);
    (0..=last)
        .map(|k| {
            let (g, er) = if k == 0 {
                (c2, 2.0 * c2)
            } else {
                let r = k as f64 * dr;
                let d1 = if k == last { (eta[k] - eta[k - 1]) / dr } else { (eta[k + 1] - eta[k - 1]) / (2.0 * dr) };
                (eta[k] / (r * r), d1 / r)
            };
            let r2 = (k as f64 * dr).powi(2);
            let a = r2 * g * g - 2.0 * g;
            2.0 * (nf - 1.0) * ((nf - 2.0) * a * a + 2.0 * er * er)
        })
        .collect()
}

fn even_c2(dr: f64, eta: &[f64]) -> f64 {
    // least squares of c₂ρ² + c₄ρ⁴ on nodes 1..3
    let (mut a11, mut a12, mut a22, mut b1, mut b2) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for k in 1..=3 {
        let s = (k as f64 * dr).powi(2);
        let (p, q) = (s, s * s);
        a11 += p * p;
        a12 += p * q;
        a22 += q * q;
        b1 += p * eta[k];
        b2 += q * eta[k];
    }
    (b1 * a22 - b2 * a12) / (a11 * a22 - a12 * a12)
}

/// Outer boundary condition at ρ_max.
#[derive(Clone)]
pub enum Boundary {
    /// Hold the initial far-field value.
    ClampInitial,
    /// Zero-flux mirror about the last node.
    Mirror,
    /// Prescribed value η(ρ_max, t).
    Dirichlet(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl std::fmt::Debug for Boundary {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Boundary::ClampInitial => write!(f, "ClampInitial"),
            Boundary::Mirror => write!(f, "Mirror"),
            Boundary::Dirichlet(_) => write!(f, "Dirichlet(..)"),
        }
    }
}

#[derive(Clone, Debug)]
pub struct SolverCfg {
    pub n: usize,
    /// Δt = cfl·Δρ².
    pub cfl: f64,
    /// Spatial order, 2 or 4.
    pub order: u32,
    pub boundary: Boundary,
    /// Pin η₀ = 0 after every step.
    pub pin_origin: bool,
    pub blowup_threshold: f64,
}

impl SolverCfg {
    pub fn new(n: usize) -> Self {
        Self { n, cfl: 0.2, order: 2, boundary: Boundary::ClampInitial, pin_origin: true, blowup_threshold: 1e4 }
    }

    pub fn validate(&self) -> Result<()> {
        if !(2..=9).contains(&self.n) {
            return Err(Error::UnsupportedDimension(self.n));
        }
        if self.order != 2 && self.order != 4 {
            return Err(Error::Argument(format!("spatial order must be 2 or 4, got {}", self.order)));
        }
        if !(self.cfl > 0.0 && self.cfl <= 0.25) {
            return Err(Error::Argument(format!("cfl must lie in (0, 0.25], got {}", self.cfl)));
        }
        if !(self.blowup_threshold > 0.0) {
            return Err(Error::Argument("blowup threshold must be positive".into()));
        }
        Ok(())
    }

    pub fn dt(&self, dr: f64) -> f64 {
        self.cfl * dr * dr
    }
}

fn rhs(cfg: &SolverCfg, dr: f64, eta: &[f64]) -> Vec<f64> {
    let ghost = match cfg.boundary {
        Boundary::Mirror => OuterGhost::Mirror,
        _ => OuterGhost::None,
    };
    flow_rhs_uniform(dr, eta, cfg.n, cfg.order, ghost)
}

fn apply_boundary(cfg: &SolverCfg, eta: &mut [f64], far: f64, t: f64) {
    if cfg.pin_origin {
        eta[0] = 0.0;
    }
    let last = eta.len() - 1;
    match &cfg.boundary {
        Boundary::ClampInitial => eta[last] = far,
        Boundary::Mirror => {}
        Boundary::Dirichlet(g) => eta[last] = g(t),
    }
}

fn max_gradient(state: &FlowState) -> (f64, f64) {
    let dr = state.dr();
    state
        .eta
        .windows(2)
        .enumerate()
        .map(|(k, w)| (((w[1] - w[0]) / dr).abs(), (k as f64 + 0.5) * dr))
        .fold((0.0, 0.0), |a, b| if b.0 > a.0 { b } else { a })
}

/// One classical RK4 step of size dt. `far` is the clamped outer value.
pub fn step_with(state: &FlowState, cfg: &SolverCfg, dt: f64, far: f64) -> Result<FlowState> {
    let dr = state.dr();
    if dt > cfg.cfl * dr * dr * (1.0 + 1e-12) {
        return Err(Error::Argument(format!("dt = {dt} violates the stability bound {}", cfg.cfl * dr * dr)));
    }
    let t = state.t;
    let y0 = &state.eta;
    let stage = |base: &[f64], k: &[f64], h: f64, ts: f64| -> Vec<f64> {
        let mut y: Vec<f64> = base.iter().zip(k).map(|(a, b)| a + h * b).collect();
        apply_boundary(cfg, &mut y, far, ts);
        y
    };
    let k1 = rhs(cfg, dr, y0);
    let k2 = rhs(cfg, dr, &stage(y0, &k1, dt / 2.0, t + dt / 2.0));
    let k3 = rhs(cfg, dr, &stage(y0, &k2, dt / 2.0, t + dt / 2.0));
    let k4 = rhs(cfg, dr, &stage(y0, &k3, dt, t + dt));
    let mut eta: Vec<f64> =
        (0..y0.len()).map(|i| y0[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])).collect();
    apply_boundary(cfg, &mut eta, far, t + dt);
    let next = FlowState { rho: state.rho.clone(), eta, t: t + dt };
    let (grad, at) = max_gradient(&next);
    if !(grad <= cfg.blowup_threshold) {
        return Err(Error::Blowup { t: next.t, rho: at });
    }
    Ok(next)
}

/// One step with Δt = cfl·Δρ², clamping to the current far-field value.
pub fn step(state: &FlowState, cfg: &SolverCfg) -> Result<FlowState> {
    cfg.validate()?;
    let far = *state.eta.last().unwrap_or(&0.0);
    step_with(state, cfg, cfg.dt(state.dr()), far)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum FlowEvent {
    Blowup { t: f64, rho: f64 },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Trajectory {
    pub n: usize,
    pub states: Vec<FlowState>,
    pub events: Vec<FlowEvent>,
    /// max over samples of |η(ρ_max/2, t) − η(ρ_max/2, t_start)|.
    pub midpoint_change: f64,
    pub steps: usize,
}

impl Trajectory {
    pub fn completed(&self) -> bool {
        self.events.is_empty()
    }

    pub fn times(&self) -> Vec<f64> {
        self.states.iter().map(|s| s.t).collect()
    }
}

/// `count` times from t_start to t_end, geometrically spaced in −t
/// (both must be negative), or uniformly spaced otherwise.
pub fn sample_times(t_start: f64, t_end: f64, count: usize) -> Vec<f64> {
    let count = count.max(2);
    (0..count)
        .map(|k| {
            let s = k as f64 / (count - 1) as f64;
            if t_start < 0.0 && t_end < 0.0 {
                -((-t_start).ln() + s * ((-t_end).ln() - (-t_start).ln())).exp()
            } else {
                t_start + s * (t_end - t_start)
            }
        })
        .collect()
}

/// Integrates to each sample time in turn, calling `observer` on every
/// sample (including the initial state). A blowup ends the run early and is
/// recorded as an event.
pub fn run(
    state: FlowState,
    cfg: &SolverCfg,
    samples: &[f64],
    mut observer: impl FnMut(&FlowState),
) -> Result<Trajectory> {
    cfg.validate()?;
    if samples.windows(2).any(|w| w[1] <= w[0]) || samples.first().is_some_and(|&t| t < state.t) {
        return Err(Error::Argument("sample times must increase from the initial time".into()));
    }
    let dr = state.dr();
    let far = *state.eta.last().unwrap_or(&0.0);
    let mid = state.eta.len() / 2;
    let eta_mid0 = state.eta[mid];
    let dt_max = cfg.dt(dr);
    let mut cur = state;
    let mut out = Trajectory { n: cfg.n, states: Vec::new(), events: Vec::new(), midpoint_change: 0.0, steps: 0 };
    for &ts in samples {
        while cur.t < ts {
            let remaining = ts - cur.t;
            let nsteps = (remaining / dt_max).ceil().max(1.0);
            let dt = remaining / nsteps;
            let next = match step_with(&cur, cfg, dt.min(dt_max), far) {
                Ok(s) => s,
                Err(Error::Blowup { t, rho }) => {
                    out.events.push(FlowEvent::Blowup { t, rho });
                    return Ok(out);
                }
                Err(e) => return Err(e),
            };
            cur = next;
            out.steps += 1;
            if (ts - cur.t).abs() <= 1e-12 * ts.abs().max(1.0) {
                cur.t = ts;
            }
        }
        out.midpoint_change = out.midpoint_change.max((cur.eta[mid] - eta_mid0).abs());
        observer(&cur);
        out.states.push(cur.clone());
    }
    Ok(out)
}

/// max over nodes with ρ ≤ ρ_cut of |η − η_exact(ρ, t)|.
pub fn tracking_error(state: &FlowState, rho_cut: f64, exact: impl Fn(f64, f64) -> f64) -> f64 {
    state
        .rho
        .iter()
        .zip(&state.eta)
        .filter(|(r, _)| **r <= rho_cut)
        .map(|(&r, &e)| (e - exact(r, state.t)).abs())
        .fold(0.0, f64::max)
}

/// Basepoints (c, T₀) for the fixed-basepoint functionals and the
/// quadrature for the harness.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct HarnessCfg {
    pub basepoints: Vec<(f64, f64)>,
    pub rel_slack: f64,
    pub with_entropy: bool,
    pub search: EntropySearch,
    pub quad: Option<QuadratureSpec>,
}

impl Default for HarnessCfg {
    fn default() -> Self {
        let mut basepoints = Vec::new();
        for &t0 in &[0.0, 0.25, 1.0] {
            for &c in &[0.0, 0.5] {
                basepoints.push((c, t0));
            }
        }
        let search = EntropySearch { x_tol: 1e-6, ..EntropySearch::default() };
        Self { basepoints, rel_slack: 1e-6, with_entropy: true, search, quad: None }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MonotoneSeries {
    pub label: String,
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub slack: Vec<f64>,
    /// Sample intervals (k, k+1) where the value rose beyond the slack.
    pub violations: Vec<(usize, usize)>,
    /// max_k |v_k − v_0|
    pub drift: f64,
}

impl MonotoneSeries {
    fn new(label: String, times: Vec<f64>, values: Vec<f64>, slack: Vec<f64>) -> Self {
        let violations = (0..values.len().saturating_sub(1))
            .filter(|&k| values[k + 1] > values[k] + slack[k] + slack[k + 1])
            .map(|k| (k, k + 1))
            .collect();
        let drift = values.iter().map(|v| (v - values[0]).abs()).fold(0.0, f64::max);
        Self { label, times, values, slack, violations, drift }
    }

    pub fn monotone(&self) -> bool {
        self.violations.is_empty()
    }

    /// Constant within slack.
    pub fn constant(&self) -> bool {
        self.values.iter().zip(&self.slack).all(|(v, s)| (v - self.values[0]).abs() <= s + self.slack[0])
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct HarnessReport {
    pub entropy: Option<MonotoneSeries>,
    pub fixed: Vec<MonotoneSeries>,
}

impl HarnessReport {
    pub fn passed(&self) -> bool {
        self.entropy.iter().chain(&self.fixed).all(|s| s.monotone())
    }
}

/// Quadrature whose panels are aligned with the sampling grid.
fn harness_quadrature(dr: f64, rho_max: f64) -> QuadratureSpec {
    let r_max = (rho_max + 12.0).max(30.0);
    let r_max = dr * (r_max / dr).ceil();
    QuadratureSpec {
        order: 8,
        panel_width: dr,
        max_panels: usize::MAX,
        r_max: Some(r_max),
        adaptive: false,
        ..QuadratureSpec::default()
    }
}

struct Sample {
    entropy: Option<(f64, f64)>,
    fixed: Vec<f64>,
}

fn evaluate(state: &FlowState, n: usize, cfg: &HarnessCfg, warm: Option<(f64, f64)>) -> Result<Sample> {
    let prof = state.profile()?;
    let conn = EquivariantConnection::new(n, prof)?;
    let q = cfg.quad.clone().unwrap_or_else(|| harness_quadrature(state.dr(), *state.rho.last().unwrap_or(&1.0)));
    let fixed = cfg
        .basepoints
        .iter()
        .map(|&(c, t0)| {
            if state.t < t0 {
                Ok(f_shrinker_at_time(&conn, c, t0, state.t, &q)?.value)
            } else {
                Ok(f64::NAN)
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let entropy = if cfg.with_entropy {
        let mut search = cfg.search.clone();
        if let Some((lt, c)) = warm {
            search.starts = vec![[lt, c], [lt + 0.2, c + 0.1]];
        } else if state.t < 0.0 {
            search.starts.insert(0, [(-state.t).ln(), 0.0]);
        }
        let e = entropy(&conn, &search, &q)?;
        Some((e.lambda, e.argmax.t0.ln()))
    } else {
        None
    };
    Ok(Sample { entropy, fixed })
}

fn sample_all(traj: &Trajectory, cfg: &HarnessCfg) -> Result<Vec<Sample>> {
    let mut out: Vec<Sample> = Vec::with_capacity(traj.states.len());
    let mut warm = None;
    for s in &traj.states {
        let v = evaluate(s, traj.n, cfg, warm)?;
        warm = v.entropy.map(|(_, lt)| (lt, 0.0));
        out.push(v);
    }
    Ok(out)
}

/// Evaluates λ(∇_t) and F_{x₀,T₀}(∇_t, t) along a trajectory and checks that
/// each sequence is non-increasing within 1e−6·|value| plus a solver error
/// estimate |v − v_shadow|/3 from a run on a grid twice as coarse.
pub fn entropy_monotonicity_harness(
    traj: &Trajectory,
    shadow: Option<&Trajectory>,
    cfg: &HarnessCfg,
) -> Result<HarnessReport> {
    if traj.states.len() < 10 {
        return Err(Error::Argument(format!("harness needs at least 10 samples, got {}", traj.states.len())));
    }
    if let Some(sh) = shadow {
        let same = sh.states.len() == traj.states.len()
            && sh.states.iter().zip(&traj.states).all(|(a, b)| (a.t - b.t).abs() <= 1e-12 * b.t.abs().max(1.0));
        if !same {
            return Err(Error::Argument("shadow trajectory must share the sample times".into()));
        }
    }
    let times = traj.times();
    let fine = sample_all(traj, cfg)?;
    let coarse = match shadow {
        Some(sh) => Some(sample_all(sh, cfg)?),
        None => None,
    };
    let slack_of = |vals: &[f64], sh: Option<Vec<f64>>| -> Vec<f64> {
        vals.iter()
            .enumerate()
            .map(|(k, v)| {
                let solver = sh.as_ref().map(|s| (v - s[k]).abs() / 3.0).unwrap_or(0.0);
                cfg.rel_slack * v.abs() + solver
            })
            .collect()
    };
    let entropy = if cfg.with_entropy {
        let vals: Vec<f64> = fine.iter().map(|s| s.entropy.map(|e| e.0).unwrap_or(f64::NAN)).collect();
        let sh = coarse.as_ref().map(|c| c.iter().map(|s| s.entropy.map(|e| e.0).unwrap_or(f64::NAN)).collect());
        let slack = slack_of(&vals, sh);
        Some(MonotoneSeries::new("entropy".into(), times.clone(), vals, slack))
    } else {
        None
    };
    let mut fixed = Vec::new();
    for (b, &(c, t0)) in cfg.basepoints.iter().enumerate() {
        let keep: Vec<usize> = (0..times.len()).filter(|&k| fine[k].fixed[b].is_finite()).collect();
        if keep.len() < 2 {
            continue;
        }
        let vals: Vec<f64> = keep.iter().map(|&k| fine[k].fixed[b]).collect();
        let sh = coarse.as_ref().map(|cs| keep.iter().map(|&k| cs[k].fixed[b]).collect());
        let slack = slack_of(&vals, sh);
        let ts = keep.iter().map(|&k| times[k]).collect();
        fixed.push(MonotoneSeries::new(format!("F(c={c},T0={t0})"), ts, vals, slack));
    }
    Ok(HarnessReport { entropy, fixed })
}
