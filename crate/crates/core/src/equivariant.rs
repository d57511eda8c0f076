//! SO(n)-equivariant connections Γ_i = −(η(r)/r²) ζ_i on ℝⁿ × ℝⁿ.
//!
//! ζ_i(x) = x e_iᵀ − e_i xᵀ. With g = η/r² and γ = g'/r the curvature is
//! F(u, v) = A·W(u, v) + B·W(x, ⟨x,u⟩v − ⟨x,v⟩u), W(u, v) = uvᵀ − vuᵀ, where
//! A = r²g² − 2g and B = −γ − g². Everything is written in terms of g and γ
//! so that it stays finite at the origin.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optimize::golden_max;
use crate::tensor_core::{ConnectionField, Mat, OneFormEnd, TwoFormEnd};

/// Below this radius closed forms switch to the Taylor expansion at 0.
pub const R_TAYLOR: f64 = 1e-3;

/// Scalar profile η(r) with η(0) = 0, η = O(r²).
pub trait RadialProfile: Sync + Send {
    /// [η, η', η'', η'''] at r ≥ 0.
    fn jet(&self, r: f64) -> [f64; 4];
    /// (g, γ) = (η/r², g'/r), finite at r = 0.
    fn reduced(&self, r: f64) -> (f64, f64);
    /// Taylor coefficients (c₂, c₄, c₆) of η at the origin.
    fn taylor(&self) -> [f64; 3];

    fn eta(&self, r: f64) -> f64 {
        self.jet(r)[0]
    }
}

impl<P: RadialProfile + ?Sized> RadialProfile for &P {
    fn jet(&self, r: f64) -> [f64; 4] {
        (**self).jet(r)
    }
    fn reduced(&self, r: f64) -> (f64, f64) {
        (**self).reduced(r)
    }
    fn taylor(&self) -> [f64; 3] {
        (**self).taylor()
    }
}

impl<P: RadialProfile + ?Sized> RadialProfile for Box<P> {
    fn jet(&self, r: f64) -> [f64; 4] {
        (**self).jet(r)
    }
    fn reduced(&self, r: f64) -> (f64, f64) {
        (**self).reduced(r)
    }
    fn taylor(&self) -> [f64; 3] {
        (**self).taylor()
    }
}

/// η ≡ 0, the flat connection.
#[derive(Clone, Copy, Debug, Default)]
pub struct ZeroProfile;

impl RadialProfile for ZeroProfile {
    fn jet(&self, _r: f64) -> [f64; 4] {
        [0.0; 4]
    }
    fn reduced(&self, _r: f64) -> (f64, f64) {
        (0.0, 0.0)
    }
    fn taylor(&self) -> [f64; 3] {
        [0.0; 3]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum BBranch {
    Minus,
    Plus,
}

/// a_n = √((n−2)/8), b_n = 3(n−2) ∓ (n+2)√(n−2)/√2.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GastelParams {
    pub n: usize,
    pub a: f64,
    pub b: f64,
    pub branch: BBranch,
}

impl GastelParams {
    pub fn new(n: usize) -> Result<Self> {
        Self::with_branch(n, BBranch::Minus)
    }

    pub fn with_branch(n: usize, branch: BBranch) -> Result<Self> {
        if !(5..=9).contains(&n) {
            return Err(Error::UnsupportedDimension(n));
        }
        let m = (n - 2) as f64;
        let a = (m / 8.0).sqrt();
        let root = (n + 2) as f64 * m.sqrt() / std::f64::consts::SQRT_2;
        let b = match branch {
            BBranch::Minus => 3.0 * m - root,
            BBranch::Plus => 3.0 * m + root,
        };
        Ok(Self { n, a, b, branch })
    }

    /// Picks the branch whose profile solves the soliton ODE; returns the
    /// winner and the max residual of each branch over ρ ∈ [0.01, 20].
    pub fn select_branch(n: usize) -> Result<(Self, [f64; 2])> {
        let mut res = [0.0; 2];
        for (k, br) in [BBranch::Minus, BBranch::Plus].into_iter().enumerate() {
            let p = GastelProfile::new(Self::with_branch(n, br)?);
            res[k] = max_soliton_ode_residual(&p, n, 0.01, 20.0, 2000);
        }
        let branch = if res[0] <= res[1] { BBranch::Minus } else { BBranch::Plus };
        Ok((Self::with_branch(n, branch)?, res))
    }
}

/// η(r) = r²/(a r² + b).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GastelProfile {
    pub params: GastelParams,
}

impl GastelProfile {
    pub fn new(params: GastelParams) -> Self {
        Self { params }
    }

    pub fn for_dim(n: usize) -> Result<Self> {
        Ok(Self::new(GastelParams::new(n)?))
    }
}

impl RadialProfile for GastelProfile {
    fn jet(&self, r: f64) -> [f64; 4] {
        let (a, b) = (self.params.a, self.params.b);
        let u = a * r * r + b;
        [
            r * r / u,
            2.0 * r * b / (u * u),
            2.0 * b * (b - 3.0 * a * r * r) / (u * u * u),
            -24.0 * a * b * r * (b - a * r * r) / (u * u * u * u),
        ]
    }
    fn reduced(&self, r: f64) -> (f64, f64) {
        let (a, b) = (self.params.a, self.params.b);
        let u = a * r * r + b;
        (1.0 / u, -2.0 * a / (u * u))
    }
    fn taylor(&self) -> [f64; 3] {
        let (a, b) = (self.params.a, self.params.b);
        [1.0 / b, -a / (b * b), a * a / (b * b * b)]
    }
}

/// η = A r² e^{−r²/w²}.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BumpProfile {
    pub amp: f64,
    pub width: f64,
}

impl BumpProfile {
    pub fn new(amp: f64, width: f64) -> Self {
        Self { amp, width }
    }
}

fn poly_eval(c: &[f64], r: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &v| acc * r + v)
}

impl RadialProfile for BumpProfile {
    fn jet(&self, r: f64) -> [f64; 4] {
        // η^{(k)} = P_k(r) e^{−r²/w²} with P_{k+1} = P_k' − (2/w²) r P_k.
        let k2 = 2.0 / (self.width * self.width);
        let e = (-r * r / (self.width * self.width)).exp();
        let mut p = vec![0.0, 0.0, self.amp];
        let mut out = [0.0; 4];
        for slot in out.iter_mut() {
            *slot = poly_eval(&p, r) * e;
            let mut next = vec![0.0; p.len() + 1];
            for (i, &c) in p.iter().enumerate() {
                if i > 0 {
                    next[i - 1] += i as f64 * c;
                }
                next[i + 1] -= k2 * c;
            }
            p = next;
        }
        out
    }
    fn reduced(&self, r: f64) -> (f64, f64) {
        let w2 = self.width * self.width;
        let g = self.amp * (-r * r / w2).exp();
        (g, -2.0 * g / w2)
    }
    fn taylor(&self) -> [f64; 3] {
        let w2 = self.width * self.width;
        [self.amp, -self.amp / w2, self.amp / (2.0 * w2 * w2)]
    }
}

/// η = η_a + η_b.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SumProfile<A, B> {
    pub a: A,
    pub b: B,
}

impl<A: RadialProfile, B: RadialProfile> RadialProfile for SumProfile<A, B> {
    fn jet(&self, r: f64) -> [f64; 4] {
        let (x, y) = (self.a.jet(r), self.b.jet(r));
        std::array::from_fn(|k| x[k] + y[k])
    }
    fn reduced(&self, r: f64) -> (f64, f64) {
        let (x, y) = (self.a.reduced(r), self.b.reduced(r));
        (x.0 + y.0, x.1 + y.1)
    }
    fn taylor(&self) -> [f64; 3] {
        let (x, y) = (self.a.taylor(), self.b.taylor());
        std::array::from_fn(|k| x[k] + y[k])
    }
}

/// η = s·η_inner.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScaledProfile<P> {
    pub inner: P,
    pub factor: f64,
}

impl<P: RadialProfile> RadialProfile for ScaledProfile<P> {
    fn jet(&self, r: f64) -> [f64; 4] {
        self.inner.jet(r).map(|v| v * self.factor)
    }
    fn reduced(&self, r: f64) -> (f64, f64) {
        let (g, h) = self.inner.reduced(r);
        (g * self.factor, h * self.factor)
    }
    fn taylor(&self) -> [f64; 3] {
        self.inner.taylor().map(|v| v * self.factor)
    }
}

/// Cubic spline through (r_k, η_k), clamped with η'(0) = 0 at the origin and
/// natural at the far end. On [0, r₁) the even polynomial c₂r² + c₄r⁴ + c₆r⁶
/// through the first three interior nodes is used instead, and past the last
/// node the profile is continued as a constant.
#[derive(Clone, Debug)]
pub struct SampledProfile {
    r: Vec<f64>,
    eta: Vec<f64>,
    m: Vec<f64>,
    taylor: [f64; 3],
}

impl SampledProfile {
    pub fn new(r: Vec<f64>, eta: Vec<f64>) -> Result<Self> {
        if r.len() != eta.len() {
            return Err(Error::Argument("r and eta lengths differ".into()));
        }
        if r.len() < 5 {
            return Err(Error::Argument("a sampled profile needs at least 5 nodes".into()));
        }
        if r.iter().chain(&eta).any(|v| !v.is_finite()) {
            return Err(Error::Argument("profile samples must be finite".into()));
        }
        if r.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Argument("radii must be strictly increasing".into()));
        }
        if r[0] != 0.0 {
            return Err(Error::Argument("the grid must start at r = 0".into()));
        }
        if eta[0].abs() > 1e-12 {
            return Err(Error::Argument(format!("eta(0) must vanish, got {}", eta[0])));
        }
        let m = spline_second_derivatives(&r, &eta);
        let taylor = even_fit(&r[1..4], &eta[1..4]);
        Ok(Self { r, eta, m, taylor })
    }

    pub fn radii(&self) -> &[f64] {
        &self.r
    }

    pub fn values(&self) -> &[f64] {
        &self.eta
    }

    pub fn r_max(&self) -> f64 {
        *self.r.last().unwrap_or(&0.0)
    }

    fn spline(&self, x: f64) -> [f64; 4] {
        let k = match self.r.binary_search_by(|v| v.total_cmp(&x)) {
            Ok(i) => i.min(self.r.len() - 2),
            Err(i) => i.saturating_sub(1).min(self.r.len() - 2),
        };
        let (x0, x1) = (self.r[k], self.r[k + 1]);
        let h = x1 - x0;
        let (y0, y1) = (self.eta[k], self.eta[k + 1]);
        let (m0, m1) = (self.m[k], self.m[k + 1]);
        let a = (x1 - x) / h;
        let b = (x - x0) / h;
        let y = a * y0 + b * y1 + ((a * a * a - a) * m0 + (b * b * b - b) * m1) * h * h / 6.0;
        let dy = (y1 - y0) / h - (3.0 * a * a - 1.0) / 6.0 * h * m0 + (3.0 * b * b - 1.0) / 6.0 * h * m1;
        let d2 = a * m0 + b * m1;
        let d3 = (m1 - m0) / h;
        [y, dy, d2, d3]
    }

    fn in_taylor_zone(&self, r: f64) -> bool {
        r < self.r[1]
    }
}

fn even_fit(r: &[f64], y: &[f64]) -> [f64; 3] {
    // Solve Σ c_k r_i^{2k+2} = y_i for three nodes.
    let mut a = nalgebra::Matrix3::zeros();
    let mut rhs = nalgebra::Vector3::zeros();
    for i in 0..3 {
        let s = r[i] * r[i];
        a[(i, 0)] = s;
        a[(i, 1)] = s * s;
        a[(i, 2)] = s * s * s;
        rhs[i] = y[i];
    }
    match a.lu().solve(&rhs) {
        Some(c) => [c[0], c[1], c[2]],
        None => [y[0] / (r[0] * r[0]), 0.0, 0.0],
    }
}

fn spline_second_derivatives(x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = x.len();
    let mut sub = vec![0.0; n];
    let mut diag = vec![0.0; n];
    let mut sup = vec![0.0; n];
    let mut rhs = vec![0.0; n];
    let h0 = x[1] - x[0];
    diag[0] = h0 / 3.0;
    sup[0] = h0 / 6.0;
    rhs[0] = (y[1] - y[0]) / h0;
    for i in 1..n - 1 {
        let (hl, hr) = (x[i] - x[i - 1], x[i + 1] - x[i]);
        sub[i] = hl / 6.0;
        diag[i] = (hl + hr) / 3.0;
        sup[i] = hr / 6.0;
        rhs[i] = (y[i + 1] - y[i]) / hr - (y[i] - y[i - 1]) / hl;
    }
    diag[n - 1] = 1.0;
    rhs[n - 1] = 0.0;
    for i in 1..n {
        let w = sub[i] / diag[i - 1];
        diag[i] -= w * sup[i - 1];
        rhs[i] -= w * rhs[i - 1];
    }
    let mut m = vec![0.0; n];
    m[n - 1] = rhs[n - 1] / diag[n - 1];
    for i in (0..n - 1).rev() {
        m[i] = (rhs[i] - sup[i] * m[i + 1]) / diag[i];
    }
    m
}

impl RadialProfile for SampledProfile {
    fn jet(&self, r: f64) -> [f64; 4] {
        if r >= self.r_max() {
            return [*self.eta.last().unwrap_or(&0.0), 0.0, 0.0, 0.0];
        }
        if self.in_taylor_zone(r) {
            let [c2, c4, c6] = self.taylor;
            let s = r * r;
            return [
                s * (c2 + s * (c4 + s * c6)),
                r * (2.0 * c2 + s * (4.0 * c4 + 6.0 * c6 * s)),
                2.0 * c2 + s * (12.0 * c4 + 30.0 * c6 * s),
                r * (24.0 * c4 + 120.0 * c6 * s),
            ];
        }
        self.spline(r)
    }
    fn reduced(&self, r: f64) -> (f64, f64) {
        if self.in_taylor_zone(r) {
            let [c2, c4, c6] = self.taylor;
            let s = r * r;
            return (c2 + s * (c4 + s * c6), 2.0 * c4 + 4.0 * c6 * s);
        }
        let [e, d, ..] = self.jet(r);
        (e / (r * r), (d * r - 2.0 * e) / (r * r * r * r))
    }
    fn taylor(&self) -> [f64; 3] {
        self.taylor
    }
}

/// Writes a profile as CSV with header `r,eta`.
pub fn write_profile_csv(path: &Path, r: &[f64], eta: &[f64]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["r", "eta"])?;
    for (a, b) in r.iter().zip(eta) {
        w.write_record([format!("{a}"), format!("{b}")])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_profile_csv(path: &Path) -> Result<SampledProfile> {
    let mut rd = csv::Reader::from_path(path)?;
    let headers = rd.headers()?.clone();
    if headers.iter().collect::<Vec<_>>() != ["r", "eta"] {
        return Err(Error::Argument(format!("expected header r,eta, got {headers:?}")));
    }
    let (mut r, mut eta) = (Vec::new(), Vec::new());
    for rec in rd.records() {
        let rec = rec?;
        let parse = |s: &str| s.trim().parse::<f64>().map_err(|e| Error::Argument(format!("bad number {s:?}: {e}")));
        r.push(parse(&rec[0])?);
        eta.push(parse(&rec[1])?);
    }
    SampledProfile::new(r, eta)
}

/// Γ_i = −(η(r)/r²) ζ_i on ℝⁿ with fiber rank n.
#[derive(Clone, Debug)]
pub struct EquivariantConnection<P> {
    pub n: usize,
    pub profile: P,
}

impl<P: RadialProfile> EquivariantConnection<P> {
    pub fn new(n: usize, profile: P) -> Result<Self> {
        if !(2..=9).contains(&n) {
            return Err(Error::UnsupportedDimension(n));
        }
        Ok(Self { n, profile })
    }
}

impl EquivariantConnection<GastelProfile> {
    pub fn gastel(n: usize) -> Result<Self> {
        Self::new(n, GastelProfile::for_dim(n)?)
    }
}

impl EquivariantConnection<ZeroProfile> {
    pub fn flat(n: usize) -> Result<Self> {
        Self::new(n, ZeroProfile)
    }
}

pub fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// ζ_i(x) = x e_iᵀ − e_i xᵀ.
pub fn zeta(x: &[f64], i: usize) -> Mat {
    let n = x.len();
    let mut m = Mat::zeros(n, n);
    for a in 0..n {
        m[(a, i)] += x[a];
        m[(i, a)] -= x[a];
    }
    m
}

/// W(u, v) = uvᵀ − vuᵀ.
pub fn wedge(u: &[f64], v: &[f64]) -> Mat {
    let n = u.len();
    Mat::from_fn(n, n, |a, b| u[a] * v[b] - v[a] * u[b])
}

fn unit(n: usize, i: usize) -> Vec<f64> {
    let mut e = vec![0.0; n];
    e[i] = 1.0;
    e
}

/// The one-form c·ζ at x.
pub fn zeta_form(x: &[f64], c: f64) -> OneFormEnd {
    OneFormEnd::from_components((0..x.len()).map(|i| zeta(x, i) * c).collect()).expect("square components")
}

impl<P: RadialProfile> ConnectionField for EquivariantConnection<P> {
    fn dim(&self) -> usize {
        self.n
    }
    fn fiber_rank(&self) -> usize {
        self.n
    }
    fn coefficients(&self, x: &[f64]) -> Result<OneFormEnd> {
        let (g, _) = self.profile.reduced(norm(x));
        Ok(zeta_form(x, -g))
    }
    fn coefficient_derivatives(&self, x: &[f64]) -> Option<Result<Vec<OneFormEnd>>> {
        let n = self.n;
        let (g, gam) = self.profile.reduced(norm(x));
        let out = (0..n)
            .map(|k| {
                let ek = unit(n, k);
                let comps = (0..n)
                    .map(|i| zeta(x, i) * (-gam * x[k]) - wedge(&ek, &unit(n, i)) * g)
                    .collect();
                OneFormEnd::from_components(comps).expect("square components")
            })
            .collect();
        Some(Ok(out))
    }
}

/// Radial data of the curvature at radius r.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RadialCurvature {
    /// Coefficient of W(u, v).
    pub a: f64,
    /// Coefficient of W(x, ⟨x,u⟩v − ⟨x,v⟩u).
    pub b: f64,
    /// η_r / r.
    pub eta_r_over_r: f64,
    /// D*F = (E/r²) ζ with E = η_rr + (n−3)η_r/r − (n−2)η(η−1)(η−2)/r².
    pub dstar: f64,
}

impl<P: RadialProfile> EquivariantConnection<P> {
    pub fn radial(&self, r: f64) -> RadialCurvature {
        let (g, gam) = self.profile.reduced(r);
        let r2 = r * r;
        RadialCurvature {
            a: r2 * g * g - 2.0 * g,
            b: -gam - g * g,
            eta_r_over_r: 2.0 * g + r2 * gam,
            dstar: dstar_coefficient(&self.profile, self.n, r),
        }
    }

    /// |F|²(r) = 2(n−1)[(n−2)A² + 2(η_r/r)²].
    pub fn curvature_norm_sq(&self, r: f64) -> f64 {
        let rc = self.radial(r);
        let n = self.n as f64;
        2.0 * (n - 1.0) * ((n - 2.0) * rc.a * rc.a + 2.0 * rc.eta_r_over_r * rc.eta_r_over_r)
    }

    /// |D*F|²(r) = 2(n−1) r² (E/r²)².
    pub fn dstar_norm_sq(&self, r: f64) -> f64 {
        let d = self.radial(r).dstar;
        2.0 * (self.n as f64 - 1.0) * r * r * d * d
    }

    /// ⟨P ⌟ F, Q ⌟ F⟩ at a point of radius r, given ⟨P,Q⟩, ⟨x,P⟩ and ⟨x,Q⟩.
    pub fn hook_pair(&self, r: f64, pq: f64, xp: f64, xq: f64) -> f64 {
        let rc = self.radial(r);
        let n = self.n as f64;
        let r2 = r * r;
        2.0 * (n - 1.0) * rc.a * rc.a * pq
            + (4.0 * rc.a * rc.b + 2.0 * rc.b * rc.b * r2) * ((n - 2.0) * xp * xq + r2 * pq)
    }

    /// ⟨ζ, V ⌟ F⟩ = −2(n−1)⟨x,V⟩ η_r/r.
    pub fn zeta_hook_pair(&self, r: f64, xv: f64) -> f64 {
        -2.0 * (self.n as f64 - 1.0) * xv * self.radial(r).eta_r_over_r
    }

    /// sup_r |F|(r): grid bracketing on [0, r_hi] then golden section.
    pub fn sup_curvature(&self, r_hi: f64) -> (f64, f64) {
        let m = 4000;
        let f = |r: f64| self.curvature_norm_sq(r).max(0.0).sqrt();
        let (mut best, mut arg) = (f(0.0), 0.0);
        for k in 1..=m {
            let r = r_hi * k as f64 / m as f64;
            let v = f(r);
            if v > best {
                best = v;
                arg = r;
            }
        }
        let step = r_hi / m as f64;
        let (x, v) = golden_max(f, (arg - step).max(0.0), arg + step, 1e-12);
        if v >= best {
            (x, v)
        } else {
            (arg, best)
        }
    }
}

/// Closed-form curvature at x (including x = 0).
pub fn curvature_closed_form<P: RadialProfile>(conn: &EquivariantConnection<P>, x: &[f64]) -> TwoFormEnd {
    let n = conn.n;
    let rc = conn.radial(norm(x));
    let mut f = TwoFormEnd::zeros(n, n);
    for j in 0..n {
        for k in (j + 1)..n {
            let ej = unit(n, j);
            let ek = unit(n, k);
            let d: Vec<f64> = (0..n).map(|a| x[j] * ek[a] - x[k] * ej[a]).collect();
            f.set(j, k, wedge(&ej, &ek) * rc.a + wedge(x, &d) * rc.b);
        }
    }
    f
}

/// Closed-form D*F = (E/r²) ζ.
pub fn dstar_f_closed_form<P: RadialProfile>(conn: &EquivariantConnection<P>, x: &[f64]) -> OneFormEnd {
    zeta_form(x, conn.radial(norm(x)).dstar)
}

/// E(η)/r², with the Taylor expansion below [`R_TAYLOR`].
pub fn dstar_coefficient(p: &impl RadialProfile, n: usize, r: f64) -> f64 {
    let nf = n as f64;
    if r < R_TAYLOR {
        let [c2, c4, c6] = p.taylor();
        let c0 = (2.0 * nf + 4.0) * c4 + 3.0 * (nf - 2.0) * c2 * c2;
        let c1 = (4.0 * nf + 16.0) * c6 + (nf - 2.0) * (6.0 * c2 * c4 - c2 * c2 * c2);
        return c0 + c1 * r * r;
    }
    flow_rhs_at(p, n, r) / (r * r)
}

/// E(η)(r) = η_rr + (n−3)η_r/r − (n−2)η(η−1)(η−2)/r².
pub fn flow_rhs_at(p: &impl RadialProfile, n: usize, r: f64) -> f64 {
    let nf = n as f64;
    let [e, _, d2, _] = p.jet(r);
    let (g, gam) = p.reduced(r);
    let er = 2.0 * g + r * r * gam;
    d2 + (nf - 3.0) * er - (nf - 2.0) * g * (e - 1.0) * (e - 2.0)
}

/// Soliton ODE residual f'' + (n−3)f'/ρ − (ρ/2)f' − (n−2)f(f−1)(f−2)/ρ².
pub fn soliton_ode_residual(p: &impl RadialProfile, rho: f64, n: usize) -> f64 {
    flow_rhs_at(p, n, rho) - 0.5 * rho * p.jet(rho)[1]
}

/// max over a uniform ρ-grid of |residual| / (1 + |f''|).
pub fn max_soliton_ode_residual(p: &impl RadialProfile, n: usize, lo: f64, hi: f64, m: usize) -> f64 {
    (0..=m)
        .map(|k| {
            let rho = lo + (hi - lo) * k as f64 / m as f64;
            soliton_ode_residual(p, rho, n).abs() / (1.0 + p.jet(rho)[2].abs())
        })
        .fold(0.0, f64::max)
}

/// Where the outer ghost value of the reduced PDE comes from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum OuterGhost {
    /// No ghost; the last node is left to the caller (Dirichlet-type data).
    None,
    /// Mirror about the last node, η_{N} = η_{N−2} (zero flux).
    Mirror,
}

/// Reduced flow right-hand side on a uniform grid ρ_k = k·dr.
///
/// Node 0 is the origin and gets 0. At node 1 (when η₀ = 0) the singular terms use the
/// even fit η ≈ c₂ρ² + c₄ρ⁴ through nodes 1..3. Derivatives use central
/// differences of the given order with the even reflection η(−ρ) = η(ρ).
pub fn flow_rhs_uniform(dr: f64, eta: &[f64], n: usize, order: u32, ghost: OuterGhost) -> Vec<f64> {
    let len = eta.len();
    let nf = n as f64;
    let last = len - 1;
    let at = |k: isize| -> f64 {
        if k < 0 {
            eta[(-k) as usize]
        } else if k as usize > last {
            eta[2 * last - k as usize]
        } else {
            eta[k as usize]
        }
    };
    let mut out = vec![0.0; len];
    let upto = match ghost {
        OuterGhost::None => last.saturating_sub(1),
        OuterGhost::Mirror => last,
    };
    let fit = {
        let r: Vec<f64> = (1..=3).map(|k| k as f64 * dr).collect();
        let s: Vec<f64> = r.iter().map(|v| v * v).collect();
        // least squares for c2, c4 on three nodes
        let (mut a11, mut a12, mut a22, mut b1, mut b2) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for i in 0..3 {
            let (p, q) = (s[i], s[i] * s[i]);
            a11 += p * p;
            a12 += p * q;
            a22 += q * q;
            b1 += p * eta[i + 1];
            b2 += q * eta[i + 1];
        }
        let det = a11 * a22 - a12 * a12;
        ((b1 * a22 - b2 * a12) / det, (a11 * b2 - a12 * b1) / det)
    };
    for k in 1..=upto {
        let ki = k as isize;
        let rho = k as f64 * dr;
        let near_edge = ghost == OuterGhost::None && k + 2 > last;
        let (d1, d2) = if order == 4 && !near_edge {
            (
                (-at(ki + 2) + 8.0 * at(ki + 1) - 8.0 * at(ki - 1) + at(ki - 2)) / (12.0 * dr),
                (-at(ki + 2) + 16.0 * at(ki + 1) - 30.0 * at(ki) + 16.0 * at(ki - 1) - at(ki - 2))
                    / (12.0 * dr * dr),
            )
        } else {
            ((at(ki + 1) - at(ki - 1)) / (2.0 * dr), (at(ki + 1) - 2.0 * at(ki) + at(ki - 1)) / (dr * dr))
        };
        let e = eta[k];
        let (er, g) = if k == 1 && eta[0] == 0.0 {
            let (c2, c4) = fit;
            (2.0 * c2 + 4.0 * c4 * rho * rho, c2 + c4 * rho * rho)
        } else {
            (d1 / rho, e / (rho * rho))
        };
        out[k] = d2 + (nf - 3.0) * er - (nf - 2.0) * g * (e - 1.0) * (e - 2.0);
    }
    out
}

/// Reduced flow right-hand side for a sampled profile on a uniform grid
/// starting at 0 (second-order differences, zero at both ends).
pub fn flow_rhs(rho: &[f64], eta: &[f64], n: usize) -> Result<Vec<f64>> {
    let dr = uniform_step(rho)?;
    if eta.len() != rho.len() {
        return Err(Error::Argument("rho and eta lengths differ".into()));
    }
    Ok(flow_rhs_uniform(dr, eta, n, 2, OuterGhost::None))
}

/// Spacing of a uniform grid starting at 0 with at least 8 nodes.
pub fn uniform_step(rho: &[f64]) -> Result<f64> {
    if rho.len() < 8 {
        return Err(Error::Argument(format!("grid too coarse: {} nodes (need 8)", rho.len())));
    }
    if rho[0] != 0.0 {
        return Err(Error::Argument("grid must start at 0".into()));
    }
    let dr = rho[1];
    let uniform = rho.iter().enumerate().all(|(k, &v)| (v - k as f64 * dr).abs() <= 1e-9 * dr.max(v));
    if !(dr > 0.0) || !uniform {
        return Err(Error::Argument("grid must be uniform".into()));
    }
    Ok(dr)
}

/// Γ(x, t) of the self-similar family built from η(r/√−t).
pub fn self_similar_gamma(p: &impl RadialProfile, x: &[f64], t: f64) -> OneFormEnd {
    let s = (-t).sqrt();
    let (g, _) = p.reduced(norm(x) / s);
    zeta_form(x, -g / (-t))
}

/// max-norm of λΓ(λx, λ²t) − Γ(x, t) for the self-similar Gastel family.
pub fn scaling_law_check(n: usize, lambda: f64, x: &[f64], t: f64) -> Result<f64> {
    if !(t < 0.0) {
        return Err(Error::Argument(format!("time must be negative, got {t}")));
    }
    if lambda == 0.0 || !lambda.is_finite() {
        return Err(Error::Argument("lambda must be a nonzero real".into()));
    }
    if x.len() != n {
        return Err(Error::Argument("x has the wrong dimension".into()));
    }
    let p = GastelProfile::for_dim(n)?;
    let lx: Vec<f64> = x.iter().map(|v| lambda * v).collect();
    let lhs = self_similar_gamma(&p, &lx, lambda * lambda * t);
    let rhs = self_similar_gamma(&p, x, t);
    Ok(lhs
        .components()
        .iter()
        .zip(rhs.components())
        .map(|(a, b)| (a * lambda - b).iter().fold(0.0f64, |m, v| m.max(v.abs())))
        .fold(0.0, f64::max))
}
