//! Pointwise gauge-tensor calculus on flat ℝⁿ.
//!
//! Fiber matrices use (MN)_α^β = M_α^δ N_δ^β with α the row index. The
//! conventions are
//!
//! * F_ij = ∂_iΓ_j − ∂_jΓ_i − [Γ_i, Γ_j]
//! * ∇_i B = ∂_i B − [Γ_i, B] on End-valued forms
//! * (DB)_ij = ∇_iB_j − ∇_jB_i, (D*ω)_j = −Σ_i ∇_iω_ij
//! * (A # B)_{JK} = Σ_i A_{iJ} B_{iK}
//! * ⟨A, B⟩ = −Σ tr(A B) over all ordered form slots
//!
//! Derivatives are central finite differences with optional Richardson
//! extrapolation, except where a [`ConnectionField`] supplies analytic
//! derivatives of its coefficients.

use nalgebra::DMatrix;

use crate::error::{domain, Error, Result};

pub type Mat = DMatrix<f64>;

fn commutator(a: &Mat, b: &Mat) -> Mat {
    a * b - b * a
}

/// −tr(AB), the fiber inner product.
pub fn fiber_inner(a: &Mat, b: &Mat) -> f64 {
    let n = a.nrows();
    let mut s = 0.0;
    for i in 0..n {
        for k in 0..n {
            s += a[(i, k)] * b[(k, i)];
        }
    }
    -s
}

fn max_abs(m: &Mat) -> f64 {
    m.iter().fold(0.0, |acc, v| acc.max(v.abs()))
}

/// Values that finite differences can combine linearly.
pub trait Linear: Clone {
    fn scaled(&self, a: f64) -> Self;
    fn add_scaled(&mut self, a: f64, other: &Self);
}

impl Linear for f64 {
    fn scaled(&self, a: f64) -> Self {
        a * self
    }
    fn add_scaled(&mut self, a: f64, other: &Self) {
        *self += a * other;
    }
}

impl Linear for Mat {
    fn scaled(&self, a: f64) -> Self {
        self * a
    }
    fn add_scaled(&mut self, a: f64, other: &Self) {
        *self += other * a;
    }
}

impl<T: Linear> Linear for Vec<T> {
    fn scaled(&self, a: f64) -> Self {
        self.iter().map(|v| v.scaled(a)).collect()
    }
    fn add_scaled(&mut self, a: f64, other: &Self) {
        for (s, o) in self.iter_mut().zip(other) {
            s.add_scaled(a, o);
        }
    }
}

/// Λ¹(End E) value at a point: B_i for i < n.
#[derive(Clone, Debug, PartialEq)]
pub struct OneFormEnd {
    comps: Vec<Mat>,
}

impl OneFormEnd {
    pub fn zeros(n: usize, rank: usize) -> Self {
        Self { comps: vec![Mat::zeros(rank, rank); n] }
    }

    pub fn from_components(comps: Vec<Mat>) -> Result<Self> {
        let rank = comps.first().map_or(0, |m| m.nrows());
        if comps.iter().any(|m| m.nrows() != rank || m.ncols() != rank) {
            return Err(Error::Argument("one-form components must share a square shape".into()));
        }
        Ok(Self { comps })
    }

    pub fn dim(&self) -> usize {
        self.comps.len()
    }

    pub fn rank(&self) -> usize {
        self.comps.first().map_or(0, |m| m.nrows())
    }

    pub fn get(&self, i: usize) -> &Mat {
        &self.comps[i]
    }

    pub fn get_mut(&mut self, i: usize) -> &mut Mat {
        &mut self.comps[i]
    }

    pub fn components(&self) -> &[Mat] {
        &self.comps
    }

    pub fn inner(&self, other: &Self) -> f64 {
        self.comps.iter().zip(&other.comps).map(|(a, b)| fiber_inner(a, b)).sum()
    }

    pub fn norm_sq(&self) -> f64 {
        self.inner(self)
    }

    /// Entrywise max-norm.
    pub fn max_abs(&self) -> f64 {
        self.comps.iter().map(max_abs).fold(0.0, f64::max)
    }

    /// Largest |M + Mᵀ| entry over components.
    pub fn skew_defect(&self) -> f64 {
        self.comps.iter().map(|m| max_abs(&(m + m.transpose()))).fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.comps.iter().all(|m| m.iter().all(|v| v.is_finite()))
    }

    pub fn sub(&self, other: &Self) -> Self {
        let mut out = self.clone();
        out.add_scaled(-1.0, other);
        out
    }
}

impl Linear for OneFormEnd {
    fn scaled(&self, a: f64) -> Self {
        Self { comps: self.comps.scaled(a) }
    }
    fn add_scaled(&mut self, a: f64, other: &Self) {
        self.comps.add_scaled(a, &other.comps);
    }
}

/// Λ²(End E) value at a point. Only i < j is stored, so F_ij = −F_ji exactly.
#[derive(Clone, Debug, PartialEq)]
pub struct TwoFormEnd {
    n: usize,
    upper: Vec<Mat>,
}

impl TwoFormEnd {
    pub fn zeros(n: usize, rank: usize) -> Self {
        Self { n, upper: vec![Mat::zeros(rank, rank); n * n.saturating_sub(1) / 2] }
    }

    fn idx(&self, i: usize, j: usize) -> usize {
        debug_assert!(i < j && j < self.n);
        i * self.n - i * (i + 1) / 2 + (j - i - 1)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn rank(&self) -> usize {
        self.upper.first().map_or(0, |m| m.nrows())
    }

    /// F_ij for any ordered pair (zero on the diagonal).
    pub fn get(&self, i: usize, j: usize) -> Mat {
        match i.cmp(&j) {
            std::cmp::Ordering::Less => self.upper[self.idx(i, j)].clone(),
            std::cmp::Ordering::Greater => -&self.upper[self.idx(j, i)],
            std::cmp::Ordering::Equal => Mat::zeros(self.rank(), self.rank()),
        }
    }

    /// Stores F_ij (and hence F_ji = −F_ij).
    pub fn set(&mut self, i: usize, j: usize, m: Mat) {
        match i.cmp(&j) {
            std::cmp::Ordering::Less => {
                let k = self.idx(i, j);
                self.upper[k] = m;
            }
            std::cmp::Ordering::Greater => {
                let k = self.idx(j, i);
                self.upper[k] = -m;
            }
            std::cmp::Ordering::Equal => panic!("diagonal component of a two-form is zero"),
        }
    }

    /// Σ over ordered pairs (i, j), i.e. twice the sum over i < j.
    pub fn inner(&self, other: &Self) -> f64 {
        2.0 * self.upper.iter().zip(&other.upper).map(|(a, b)| fiber_inner(a, b)).sum::<f64>()
    }

    pub fn norm_sq(&self) -> f64 {
        self.inner(self)
    }

    pub fn max_abs(&self) -> f64 {
        self.upper.iter().map(max_abs).fold(0.0, f64::max)
    }

    pub fn skew_defect(&self) -> f64 {
        self.upper.iter().map(|m| max_abs(&(m + m.transpose()))).fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.upper.iter().all(|m| m.iter().all(|v| v.is_finite()))
    }

    pub fn sub(&self, other: &Self) -> Self {
        let mut out = self.clone();
        out.add_scaled(-1.0, other);
        out
    }
}

impl Linear for TwoFormEnd {
    fn scaled(&self, a: f64) -> Self {
        Self { n: self.n, upper: self.upper.scaled(a) }
    }
    fn add_scaled(&mut self, a: f64, other: &Self) {
        self.upper.add_scaled(a, &other.upper);
    }
}

/// Dense End-valued tensor with `degree` form slots, row-major slot order.
#[derive(Clone, Debug, PartialEq)]
pub struct FormEnd {
    n: usize,
    degree: usize,
    rank: usize,
    data: Vec<Mat>,
}

impl FormEnd {
    pub fn zeros(n: usize, degree: usize, rank: usize) -> Self {
        Self { n, degree, rank, data: vec![Mat::zeros(rank, rank); n.pow(degree as u32)] }
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    fn flat(&self, idx: &[usize]) -> usize {
        idx.iter().fold(0, |acc, &i| acc * self.n + i)
    }

    pub fn get(&self, idx: &[usize]) -> &Mat {
        &self.data[self.flat(idx)]
    }

    pub fn get_mut(&mut self, idx: &[usize]) -> &mut Mat {
        let k = self.flat(idx);
        &mut self.data[k]
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(max_abs).fold(0.0, f64::max)
    }

    /// The fiber matrix of a degree-0 tensor.
    pub fn into_matrix(self) -> Result<Mat> {
        if self.degree != 0 {
            return Err(Error::Argument(format!("expected degree 0, got {}", self.degree)));
        }
        Ok(self.data.into_iter().next().unwrap_or_else(|| Mat::zeros(self.rank, self.rank)))
    }

    pub fn into_one_form(self) -> Result<OneFormEnd> {
        if self.degree != 1 {
            return Err(Error::Argument(format!("expected degree 1, got {}", self.degree)));
        }
        OneFormEnd::from_components(self.data)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        if self.n != other.n || self.degree != other.degree || self.rank != other.rank {
            return Err(Error::Argument("shape mismatch".into()));
        }
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect();
        Ok(Self { data, ..*self })
    }
}

/// Read access to the slots of an End-valued form.
pub trait FormSlots {
    fn dim(&self) -> usize;
    fn degree(&self) -> usize;
    fn rank(&self) -> usize;
    fn slot(&self, idx: &[usize]) -> Mat;
}

impl FormSlots for OneFormEnd {
    fn dim(&self) -> usize {
        self.comps.len()
    }
    fn degree(&self) -> usize {
        1
    }
    fn rank(&self) -> usize {
        OneFormEnd::rank(self)
    }
    fn slot(&self, idx: &[usize]) -> Mat {
        self.comps[idx[0]].clone()
    }
}

impl FormSlots for TwoFormEnd {
    fn dim(&self) -> usize {
        self.n
    }
    fn degree(&self) -> usize {
        2
    }
    fn rank(&self) -> usize {
        TwoFormEnd::rank(self)
    }
    fn slot(&self, idx: &[usize]) -> Mat {
        self.get(idx[0], idx[1])
    }
}

impl FormSlots for FormEnd {
    fn dim(&self) -> usize {
        self.n
    }
    fn degree(&self) -> usize {
        self.degree
    }
    fn rank(&self) -> usize {
        self.rank
    }
    fn slot(&self, idx: &[usize]) -> Mat {
        self.get(idx).clone()
    }
}

fn multi_indices(n: usize, degree: usize) -> Vec<Vec<usize>> {
    let mut out = vec![vec![]];
    for _ in 0..degree {
        out = out
            .into_iter()
            .flat_map(|v| {
                (0..n).map(move |i| {
                    let mut w = v.clone();
                    w.push(i);
                    w
                })
            })
            .collect();
    }
    out
}

/// (A # B)_{JK} = Σ_i A_{iJ} · B_{iK}.
pub fn pound(a: &impl FormSlots, b: &impl FormSlots) -> Result<FormEnd> {
    if a.degree() == 0 || b.degree() == 0 {
        return Err(Error::Argument("pound needs a form slot on each side".into()));
    }
    if a.dim() != b.dim() || a.rank() != b.rank() {
        return Err(Error::Argument(format!(
            "pound shape mismatch: (n={}, N={}) vs (n={}, N={})",
            a.dim(),
            a.rank(),
            b.dim(),
            b.rank()
        )));
    }
    let n = a.dim();
    let (p, q) = (a.degree() - 1, b.degree() - 1);
    let mut out = FormEnd::zeros(n, p + q, a.rank());
    for big_j in multi_indices(n, p) {
        for big_k in multi_indices(n, q) {
            let mut acc = Mat::zeros(a.rank(), a.rank());
            for i in 0..n {
                let mut ia = vec![i];
                ia.extend(&big_j);
                let mut ib = vec![i];
                ib.extend(&big_k);
                acc += a.slot(&ia) * b.slot(&ib);
            }
            let mut idx = big_j.clone();
            idx.extend(&big_k);
            *out.get_mut(&idx) = acc;
        }
    }
    Ok(out)
}

/// [A, B]^# = A # B − B # A.
pub fn pound_bracket(a: &impl FormSlots, b: &impl FormSlots) -> Result<FormEnd> {
    pound(a, b)?.sub(&pound(b, a)?)
}

/// (V ⌟ F)_j = Σ_i V^i F_ij.
pub fn hook(v: &[f64], f: &TwoFormEnd) -> OneFormEnd {
    let n = f.dim();
    let mut out = OneFormEnd::zeros(n, f.rank());
    for j in 0..n {
        for (i, &vi) in v.iter().enumerate() {
            if i != j && vi != 0.0 {
                out.comps[j] += f.get(i, j) * vi;
            }
        }
    }
    out
}

/// Finite-difference scheme: central stencil of order 2 or 4 with step `h`,
/// plus up to two Richardson levels (each raises the order by 2).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FdScheme {
    pub h: f64,
    pub order: u32,
    pub richardson: u32,
    /// Use analytic coefficient derivatives when a connection provides them.
    pub analytic: bool,
}

impl Default for FdScheme {
    fn default() -> Self {
        Self { h: 1e-3, order: 4, richardson: 1, analytic: true }
    }
}

impl FdScheme {
    pub fn new(h: f64, order: u32, richardson: u32) -> Result<Self> {
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::Argument(format!("step must be positive, got {h}")));
        }
        if order != 2 && order != 4 {
            return Err(Error::Argument(format!("stencil order must be 2 or 4, got {order}")));
        }
        if richardson > 2 {
            return Err(Error::Argument("at most two Richardson levels".into()));
        }
        Ok(Self { h, order, richardson, analytic: true })
    }

    pub fn fd_only(mut self) -> Self {
        self.analytic = false;
        self
    }

    /// Nominal truncation order in h.
    pub fn truncation_order(&self) -> u32 {
        self.order + 2 * self.richardson
    }

    /// Scheme for the next nesting level out (step ×3).
    pub fn coarser(&self) -> Self {
        Self { h: 3.0 * self.h, ..*self }
    }

    fn stencil<T: Linear>(&self, f: &impl Fn(&[f64]) -> Result<T>, x: &[f64], k: usize, h: f64) -> Result<T> {
        let at = |s: f64| {
            let mut y = x.to_vec();
            y[k] += s;
            f(&y)
        };
        if self.order == 2 {
            let mut d = at(h)?;
            d.add_scaled(-1.0, &at(-h)?);
            Ok(d.scaled(0.5 / h))
        } else {
            let mut d = at(h)?.scaled(8.0);
            d.add_scaled(-8.0, &at(-h)?);
            d.add_scaled(-1.0, &at(2.0 * h)?);
            d.add_scaled(1.0, &at(-2.0 * h)?);
            Ok(d.scaled(1.0 / (12.0 * h)))
        }
    }

    /// ∂_k f at x.
    pub fn partial<T: Linear>(&self, f: &impl Fn(&[f64]) -> Result<T>, x: &[f64], k: usize) -> Result<T> {
        let levels = self.richardson as usize;
        let mut table: Vec<T> = (0..=levels)
            .map(|l| self.stencil(f, x, k, self.h / 2f64.powi(l as i32)))
            .collect::<Result<_>>()?;
        let mut p = self.order as i32;
        for m in 1..=levels {
            let c = 2f64.powi(p);
            for l in 0..=(levels - m) {
                let mut v = table[l + 1].scaled(c);
                v.add_scaled(-1.0, &table[l]);
                table[l] = v.scaled(1.0 / (c - 1.0));
            }
            p += 2;
        }
        Ok(table.swap_remove(0))
    }

    /// All partials ∂_0 f, …, ∂_{n−1} f.
    pub fn gradient<T: Linear>(&self, f: &impl Fn(&[f64]) -> Result<T>, x: &[f64]) -> Result<Vec<T>> {
        (0..x.len()).map(|k| self.partial(f, x, k)).collect()
    }
}

/// Connection coefficients Γ_i(x) on the trivial bundle ℝⁿ × ℝᴺ.
pub trait ConnectionField: Sync {
    fn dim(&self) -> usize;
    fn fiber_rank(&self) -> usize;
    fn coefficients(&self, x: &[f64]) -> Result<OneFormEnd>;
    /// ∂_kΓ (entry k is the one-form of ∂_kΓ_i), when known in closed form.
    fn coefficient_derivatives(&self, _x: &[f64]) -> Option<Result<Vec<OneFormEnd>>> {
        None
    }
}

impl<C: ConnectionField + ?Sized> ConnectionField for &C {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn fiber_rank(&self) -> usize {
        (**self).fiber_rank()
    }
    fn coefficients(&self, x: &[f64]) -> Result<OneFormEnd> {
        (**self).coefficients(x)
    }
    fn coefficient_derivatives(&self, x: &[f64]) -> Option<Result<Vec<OneFormEnd>>> {
        (**self).coefficient_derivatives(x)
    }
}

/// Γ ≡ 0.
#[derive(Clone, Copy, Debug)]
pub struct FlatConnection {
    pub n: usize,
    pub rank: usize,
}

impl ConnectionField for FlatConnection {
    fn dim(&self) -> usize {
        self.n
    }
    fn fiber_rank(&self) -> usize {
        self.rank
    }
    fn coefficients(&self, _x: &[f64]) -> Result<OneFormEnd> {
        Ok(OneFormEnd::zeros(self.n, self.rank))
    }
    fn coefficient_derivatives(&self, _x: &[f64]) -> Option<Result<Vec<OneFormEnd>>> {
        Some(Ok(vec![OneFormEnd::zeros(self.n, self.rank); self.n]))
    }
}

/// Connection given by a closure, differentiated numerically.
pub struct FnConnection<F> {
    pub n: usize,
    pub rank: usize,
    pub f: F,
}

impl<F: Fn(&[f64]) -> Result<OneFormEnd> + Sync> ConnectionField for FnConnection<F> {
    fn dim(&self) -> usize {
        self.n
    }
    fn fiber_rank(&self) -> usize {
        self.rank
    }
    fn coefficients(&self, x: &[f64]) -> Result<OneFormEnd> {
        (self.f)(x)
    }
}

fn check_point(conn: &impl ConnectionField, x: &[f64]) -> Result<()> {
    if x.len() != conn.dim() {
        return Err(Error::Argument(format!("point has {} coordinates, connection lives on R^{}", x.len(), conn.dim())));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(domain("non-finite point", x));
    }
    Ok(())
}

fn coefficient_partials(conn: &impl ConnectionField, x: &[f64], s: &FdScheme) -> Result<Vec<OneFormEnd>> {
    if s.analytic {
        if let Some(d) = conn.coefficient_derivatives(x) {
            return d;
        }
    }
    s.gradient(&|y: &[f64]| conn.coefficients(y), x)
}

/// F_ij = ∂_iΓ_j − ∂_jΓ_i − [Γ_i, Γ_j].
pub fn curvature_at(conn: &impl ConnectionField, x: &[f64], s: &FdScheme) -> Result<TwoFormEnd> {
    check_point(conn, x)?;
    let gamma = conn.coefficients(x)?;
    let dg = coefficient_partials(conn, x, s)?;
    let n = conn.dim();
    let mut f = TwoFormEnd::zeros(n, conn.fiber_rank());
    for i in 0..n {
        for j in (i + 1)..n {
            let m = dg[i].get(j) - dg[j].get(i) - commutator(gamma.get(i), gamma.get(j));
            f.set(i, j, m);
        }
    }
    if !f.is_finite() {
        return Err(domain("curvature is not finite", x));
    }
    Ok(f)
}

/// (DB)_ij = ∇_iB_j − ∇_jB_i for a one-form field B.
pub fn exterior_d_at(
    conn: &impl ConnectionField,
    b: &impl Fn(&[f64]) -> Result<OneFormEnd>,
    x: &[f64],
    s: &FdScheme,
) -> Result<TwoFormEnd> {
    check_point(conn, x)?;
    let gamma = conn.coefficients(x)?;
    let bx = b(x)?;
    let db = s.gradient(b, x)?;
    let n = conn.dim();
    let mut out = TwoFormEnd::zeros(n, conn.fiber_rank());
    for i in 0..n {
        for j in (i + 1)..n {
            let m = db[i].get(j) - db[j].get(i) - commutator(gamma.get(i), bx.get(j))
                + commutator(gamma.get(j), bx.get(i));
            out.set(i, j, m);
        }
    }
    if !out.is_finite() {
        return Err(domain("DB is not finite", x));
    }
    Ok(out)
}

/// ∇_k B_j, returned as a vector over k of one-forms.
pub fn covariant_derivative_one_form(
    conn: &impl ConnectionField,
    b: &impl Fn(&[f64]) -> Result<OneFormEnd>,
    x: &[f64],
    s: &FdScheme,
) -> Result<Vec<OneFormEnd>> {
    check_point(conn, x)?;
    let gamma = conn.coefficients(x)?;
    let bx = b(x)?;
    let mut db = s.gradient(b, x)?;
    for (k, dk) in db.iter_mut().enumerate() {
        for j in 0..bx.dim() {
            *dk.get_mut(j) -= commutator(gamma.get(k), bx.get(j));
        }
    }
    Ok(db)
}

/// ∇_k ω, returned as a vector over k of two-forms.
pub fn covariant_derivative_two_form(
    conn: &impl ConnectionField,
    w: &impl Fn(&[f64]) -> Result<TwoFormEnd>,
    x: &[f64],
    s: &FdScheme,
) -> Result<Vec<TwoFormEnd>> {
    check_point(conn, x)?;
    let gamma = conn.coefficients(x)?;
    let wx = w(x)?;
    let mut dw = s.gradient(w, x)?;
    let n = conn.dim();
    for (k, dk) in dw.iter_mut().enumerate() {
        for i in 0..n {
            for j in (i + 1)..n {
                let m = dk.get(i, j) - commutator(gamma.get(k), &wx.get(i, j));
                dk.set(i, j, m);
            }
        }
    }
    Ok(dw)
}

/// (D*ω)_j = −Σ_i ∇_iω_ij.
pub fn dstar_at(
    conn: &impl ConnectionField,
    w: &impl Fn(&[f64]) -> Result<TwoFormEnd>,
    x: &[f64],
    s: &FdScheme,
) -> Result<OneFormEnd> {
    let dw = covariant_derivative_two_form(conn, w, x, s)?;
    let n = conn.dim();
    let mut out = OneFormEnd::zeros(n, conn.fiber_rank());
    for j in 0..n {
        for (i, di) in dw.iter().enumerate() {
            if i != j {
                out.comps[j] -= di.get(i, j);
            }
        }
    }
    if !out.is_finite() {
        return Err(domain("D*ω is not finite", x));
    }
    Ok(out)
}

/// D*D*ω = ½ Σ_ij [F_ij, ω_ij] as a fiber matrix (no derivatives of ω needed).
pub fn dstar_dstar_algebraic(f: &TwoFormEnd, w: &TwoFormEnd) -> Mat {
    let n = f.dim();
    let mut out = Mat::zeros(f.rank(), f.rank());
    for i in 0..n {
        for j in (i + 1)..n {
            out += commutator(&f.get(i, j), &w.get(i, j));
        }
    }
    out
}

/// (D*B) = −Σ_i ∇_iB_i for a one-form field, a fiber matrix.
pub fn dstar_one_form_at(
    conn: &impl ConnectionField,
    b: &impl Fn(&[f64]) -> Result<OneFormEnd>,
    x: &[f64],
    s: &FdScheme,
) -> Result<Mat> {
    let db = covariant_derivative_one_form(conn, b, x, s)?;
    let mut out = Mat::zeros(conn.fiber_rank(), conn.fiber_rank());
    for (i, d) in db.iter().enumerate() {
        out -= d.get(i);
    }
    Ok(out)
}

/// Curvature field of `conn` evaluated with scheme `s`.
pub fn curvature_field<'a, C: ConnectionField>(
    conn: &'a C,
    s: FdScheme,
) -> impl Fn(&[f64]) -> Result<TwoFormEnd> + 'a {
    move |y: &[f64]| curvature_at(conn, y, &s)
}

fn check_t0(t0: f64) -> Result<()> {
    if !(t0 > 0.0 && t0.is_finite()) {
        return Err(Error::Argument(format!("t0 must be positive, got {t0}")));
    }
    Ok(())
}

fn shifted_half(x: &[f64], x0: &[f64], t0: f64) -> Vec<f64> {
    x.iter().zip(x0).map(|(a, b)| (a - b) / (2.0 * t0)).collect()
}

/// S_{x0,t0}(∇) = D*F + ((x − x0)/2t0) ⌟ F.
pub fn soliton_residual_at(
    conn: &impl ConnectionField,
    x: &[f64],
    x0: &[f64],
    t0: f64,
    s: &FdScheme,
) -> Result<OneFormEnd> {
    check_t0(t0)?;
    let field = curvature_field(conn, *s);
    let f = field(x)?;
    let mut r = dstar_at(conn, &field, x, &s.coarser())?;
    r.add_scaled(1.0, &hook(&shifted_half(x, x0, t0), &f));
    Ok(r)
}

/// x ↦ (1/√t0) Γ((x − x0)/√t0).
#[derive(Clone, Debug)]
pub struct TranslatedScaled<C> {
    pub inner: C,
    pub x0: Vec<f64>,
    pub t0: f64,
}

pub fn translate_scale_connection<C: ConnectionField>(conn: C, x0: &[f64], t0: f64) -> Result<TranslatedScaled<C>> {
    check_t0(t0)?;
    if x0.len() != conn.dim() {
        return Err(Error::Argument("x0 has the wrong dimension".into()));
    }
    Ok(TranslatedScaled { inner: conn, x0: x0.to_vec(), t0 })
}

impl<C: ConnectionField> TranslatedScaled<C> {
    fn pull(&self, x: &[f64]) -> Vec<f64> {
        let s = self.t0.sqrt();
        x.iter().zip(&self.x0).map(|(a, b)| (a - b) / s).collect()
    }
}

impl<C: ConnectionField> ConnectionField for TranslatedScaled<C> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }
    fn fiber_rank(&self) -> usize {
        self.inner.fiber_rank()
    }
    fn coefficients(&self, x: &[f64]) -> Result<OneFormEnd> {
        Ok(self.inner.coefficients(&self.pull(x))?.scaled(1.0 / self.t0.sqrt()))
    }
    fn coefficient_derivatives(&self, x: &[f64]) -> Option<Result<Vec<OneFormEnd>>> {
        self.inner
            .coefficient_derivatives(&self.pull(x))
            .map(|r| r.map(|d| d.into_iter().map(|v| v.scaled(1.0 / self.t0)).collect()))
    }
}

/// [B, F]^# for a one-form B and two-form F, as a one-form.
pub fn bracket_one_two(b: &OneFormEnd, f: &TwoFormEnd) -> Result<OneFormEnd> {
    pound_bracket(b, f)?.into_one_form()
}

/// L B = D*DB + ((x − x0)/2t0) ⌟ DB + [B, F]^#.
pub fn l_at(
    conn: &impl ConnectionField,
    b: &impl Fn(&[f64]) -> Result<OneFormEnd>,
    x: &[f64],
    x0: &[f64],
    t0: f64,
    s: &FdScheme,
) -> Result<OneFormEnd> {
    check_t0(t0)?;
    let db_field = |y: &[f64]| exterior_d_at(conn, b, y, s);
    let dbx = db_field(x)?;
    let mut out = dstar_at(conn, &db_field, x, &s.coarser())?;
    out.add_scaled(1.0, &hook(&shifted_half(x, x0, t0), &dbx));
    let f = curvature_at(conn, x, s)?;
    out.add_scaled(1.0, &bracket_one_two(&b(x)?, &f)?);
    Ok(out)
}

/// max_{i,j,k} |∇_iF_jk + ∇_jF_ki + ∇_kF_ij|.
pub fn bianchi2_residual_at(conn: &impl ConnectionField, x: &[f64], s: &FdScheme) -> Result<f64> {
    let field = curvature_field(conn, *s);
    let df = covariant_derivative_two_form(conn, &field, x, &s.coarser())?;
    Ok(bianchi_cyclic_max(&df))
}

/// Like [`bianchi2_residual_at`] but with F taken from a closed form, so the
/// residual is pure truncation error of the outer stencil.
pub fn bianchi2_residual_with(
    conn: &impl ConnectionField,
    f: &impl Fn(&[f64]) -> Result<TwoFormEnd>,
    x: &[f64],
    s: &FdScheme,
) -> Result<(f64, f64)> {
    let df = covariant_derivative_two_form(conn, f, x, s)?;
    let scale = df.iter().map(|d| d.max_abs()).fold(0.0, f64::max);
    Ok((bianchi_cyclic_max(&df), scale))
}

fn bianchi_cyclic_max(df: &[TwoFormEnd]) -> f64 {
    let n = df.len();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            for k in (j + 1)..n {
                let m = df[i].get(j, k) + df[j].get(k, i) + df[k].get(i, j);
                worst = worst.max(max_abs(&m));
            }
        }
    }
    worst
}
