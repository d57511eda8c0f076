//! First and second variations of the shrinker functional, eigenforms of the
//! stability operator L and the gap-theorem integral identity.
//!
//! Perturbations of the connection are equivariant: Γ̇ = B = (ψ/r²)ζ, which
//! moves the profile by η ↦ η − sψ. For such B (with x₀ = 0)
//! L B = [rψ_r/(2t₀) − E'(η)ψ] r⁻² ζ where
//! E'(η)ψ = ψ_rr + (n−3)ψ_r/r − (n−2)(3η² − 6η + 2)ψ/r².

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::equivariant::{
    curvature_closed_form, dstar_f_closed_form, norm, EquivariantConnection, RadialProfile, ScaledProfile,
    SumProfile,
};
use crate::error::{Error, Result};
use crate::functionals::{angular_rule, axial_integral, axial_integral_checked, f_shrinker, Basepoint, Kernel, NormalizationConvention, QuadratureSpec};
use crate::quad::{pairwise_sum, GaussLegendre};
use crate::sphere_area;
use crate::tensor_core::{
    bracket_one_two, covariant_derivative_one_form, hook, l_at, pound_bracket, FdScheme, Linear, OneFormEnd,
};

/// Rates (ṫ, ẋ, Γ̇) of a one-parameter variation.
#[derive(Clone, Debug)]
pub struct VariationTriple<Q> {
    pub tdot: f64,
    pub xdot: Vec<f64>,
    /// Profile ψ of Γ̇ = (ψ/r²)ζ, if the connection varies.
    pub psi: Option<Q>,
}

impl<Q: RadialProfile> VariationTriple<Q> {
    pub fn basepoint_only(n: usize, tdot: f64, xdot_axis: f64) -> Self {
        let mut xdot = vec![0.0; n];
        xdot[0] = xdot_axis;
        Self { tdot, xdot, psi: None }
    }
}

/// Path families through basepoint space.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum PathSpec {
    /// (s·y, 1 + s·h)
    Linear { y: f64, h: f64 },
    /// (s·y, 1 + a·s²)
    Parabolic { y: f64, a: f64 },
}

impl PathSpec {
    /// (c, t) at parameter s, x₀ on the e₁ axis.
    pub fn at(&self, s: f64) -> Result<Basepoint> {
        match *self {
            PathSpec::Linear { y, h } => Basepoint::new((s * y).abs(), 1.0 + s * h),
            PathSpec::Parabolic { y, a } => Basepoint::new((s * y).abs(), 1.0 + a * s * s),
        }
    }
}

fn heat(n: usize, t0: f64) -> f64 {
    (4.0 * std::f64::consts::PI * t0).powf(-(n as f64) / 2.0)
}

/// Component of ẋ along the axis of x₀ = c·e₁ (any axis when c = 0).
fn axis_component(xdot: &[f64], c: f64) -> Result<f64> {
    if c == 0.0 {
        return Ok(if xdot[0] < 0.0 { -norm(xdot) } else { norm(xdot) });
    }
    let perp: f64 = xdot[1..].iter().map(|v| v * v).sum::<f64>().sqrt();
    if perp > 1e-12 * (1.0 + xdot[0].abs()) {
        return Err(Error::Argument("xdot must be parallel to x0 when x0 != 0".into()));
    }
    Ok(xdot[0])
}

/// dF/ds at s = 0 by the first-variation formula.
pub fn first_variation_formula<P: RadialProfile, Q: RadialProfile>(
    conn: &EquivariantConnection<P>,
    v: &VariationTriple<Q>,
    bp: &Basepoint,
    q: &QuadratureSpec,
) -> Result<f64> {
    let n = conn.n;
    let nf = n as f64;
    let (c, t0) = (bp.c, bp.t0);
    if v.xdot.len() != n {
        return Err(Error::Argument("xdot has the wrong dimension".into()));
    }
    // Only the axial part of ẋ survives the angular average.
    let xd = if c == 0.0 { 0.0 } else { v.xdot[0] };
    let (vals, _) = axial_integral_checked(n, Kernel::Shrinker { c, tau: t0 }, q, 1, |r, u| {
        let f2 = conn.curvature_norm_sq(r);
        let xu = r * u;
        let d2 = r * r - 2.0 * c * xu + c * c;
        let t1 = v.tdot * (t0 * (4.0 - nf) / 2.0 + d2 / 4.0) * f2;
        let t2 = t0 * xd * (xu - c) / 2.0 * f2;
        let t3 = match &v.psi {
            Some(psi) => {
                let (gp, _) = psi.reduced(r);
                let rc = conn.radial(r);
                let dstar = 2.0 * (nf - 1.0) * r * r * gp * rc.dstar;
                let hooked = gp * conn.zeta_hook_pair(r, (r * r - c * xu) / (2.0 * t0));
                4.0 * t0 * t0 * (dstar + hooked)
            }
            None => 0.0,
        };
        [t1 + t2 + t3, t1.abs() + t2.abs() + t3.abs()]
    })?;
    Ok(vals[0] * heat(n, t0))
}

/// F along the straight path s ↦ (η − sψ, x₀ + sẋ, t₀ + sṫ).
pub fn functional_along<P: RadialProfile, Q: RadialProfile>(
    conn: &EquivariantConnection<P>,
    v: &VariationTriple<Q>,
    bp: &Basepoint,
    q: &QuadratureSpec,
    s: f64,
) -> Result<f64> {
    let n = conn.n;
    let mut x0 = vec![0.0; n];
    x0[0] = bp.c;
    let xs: Vec<f64> = x0.iter().zip(&v.xdot).map(|(a, b)| a + s * b).collect();
    let bps = Basepoint::new(norm(&xs), bp.t0 + s * v.tdot)?;
    match &v.psi {
        Some(psi) => {
            let prof = SumProfile { a: &conn.profile, b: ScaledProfile { inner: psi, factor: -s } };
            let cs = EquivariantConnection { n, profile: prof };
            Ok(f_shrinker(&cs, &bps, q, NormalizationConvention::A)?.value)
        }
        None => Ok(f_shrinker(conn, &bps, q, NormalizationConvention::A)?.value),
    }
}

/// Centered first and second differences of F along the path with step h.
pub fn path_differences<P: RadialProfile, Q: RadialProfile>(
    conn: &EquivariantConnection<P>,
    v: &VariationTriple<Q>,
    bp: &Basepoint,
    q: &QuadratureSpec,
    h: f64,
) -> Result<(f64, f64)> {
    let f = |s| functional_along(conn, v, bp, q, s);
    let (fp, f0, fm) = (f(h)?, f(0.0)?, f(-h)?);
    Ok(((fp - fm) / (2.0 * h), (fp - 2.0 * f0 + fm) / (h * h)))
}

/// max over r of |E(η) − rη_r/(2t₀)| / (1 + |η_rr|): the radial soliton defect
/// of an origin-centred equivariant connection at (0, t₀).
pub fn radial_soliton_defect<P: RadialProfile>(conn: &EquivariantConnection<P>, t0: f64) -> f64 {
    (1..=2000)
        .map(|k| {
            let r = 0.01 * k as f64;
            let [_, d1, d2, _] = conn.profile.jet(r);
            let e = crate::equivariant::flow_rhs_at(&conn.profile, conn.n, r);
            (e - r * d1 / (2.0 * t0)).abs() / (1.0 + d2.abs())
        })
        .fold(0.0, f64::max)
}

/// E'(η)ψ = ψ_rr + (n−3)ψ_r/r − (n−2)(3η² − 6η + 2)ψ/r².
pub fn linearized_flow_rhs<P: RadialProfile, Q: RadialProfile>(
    conn: &EquivariantConnection<P>,
    psi: &Q,
    r: f64,
) -> f64 {
    let nf = conn.n as f64;
    let e = conn.profile.eta(r);
    let [_, _, p2, _] = psi.jet(r);
    let (g, gam) = psi.reduced(r);
    p2 + (nf - 3.0) * (2.0 * g + r * r * gam) - (nf - 2.0) * (3.0 * e * e - 6.0 * e + 2.0) * g
}

/// Coefficient ℓ with L B = ℓ ζ for B = (ψ/r²)ζ, x₀ = 0.
pub fn l_equivariant_coefficient<P: RadialProfile, Q: RadialProfile>(
    conn: &EquivariantConnection<P>,
    psi: &Q,
    t0: f64,
    r: f64,
) -> f64 {
    let (g, gam) = psi.reduced(r);
    let psi_r_over_r = 2.0 * g + r * r * gam;
    (r * r * psi_r_over_r / (2.0 * t0) - linearized_flow_rhs(conn, psi, r)) / (r * r)
}

/// Second variation of F at a soliton centred at (0, t₀).
pub fn second_variation_shrinker<P: RadialProfile, Q: RadialProfile>(
    conn: &EquivariantConnection<P>,
    v: &VariationTriple<Q>,
    bp: &Basepoint,
    q: &QuadratureSpec,
) -> Result<f64> {
    let n = conn.n;
    let nf = n as f64;
    if bp.c != 0.0 {
        return Err(Error::Argument("second variation is implemented for x0 = 0".into()));
    }
    let t0 = bp.t0;
    let defect = radial_soliton_defect(conn, t0);
    if defect > 1e-6 {
        return Err(Error::NotSoliton(defect));
    }
    if v.xdot.len() != n {
        return Err(Error::Argument("xdot has the wrong dimension".into()));
    }
    let xm = axis_component(&v.xdot, 0.0)?;
    let (vals, _) = axial_integral_checked(n, Kernel::Shrinker { c: 0.0, tau: t0 }, q, 1, |r, u| {
        let xu = r * u;
        let mut acc = -4.0 * t0 * v.tdot * v.tdot * conn.dstar_norm_sq(r)
            - 2.0 * t0 * conn.hook_pair(r, xm * xm, xm * xu, xm * xu);
        if let Some(psi) = &v.psi {
            let (gp, _) = psi.reduced(r);
            let bb = 2.0 * (nf - 1.0) * r * r * gp * l_equivariant_coefficient(conn, psi, t0, r);
            let cross = gp * conn.zeta_hook_pair(r, v.tdot * r * r + xm * xu);
            acc += 4.0 * t0 * t0 * bb - 4.0 * t0 * cross;
        }
        [acc, acc.abs()]
    })?;
    Ok(vals[0] * heat(n, t0))
}

/// ∂_s Ξ(s·y, 1 + a s²) = −2s ∫ |(a s x + y) ⌟ F|² G_s dV.
pub fn xi_path_derivative<P: RadialProfile>(
    conn: &EquivariantConnection<P>,
    y: &[f64],
    a: f64,
    s: f64,
    q: &QuadratureSpec,
) -> Result<f64> {
    let n = conn.n;
    let ts = 1.0 + a * s * s;
    if !(ts > 0.0) {
        return Err(Error::Argument(format!("t_s = 1 + a s^2 = {ts} is not positive")));
    }
    if y.len() != n {
        return Err(Error::Argument("y has the wrong dimension".into()));
    }
    let ym = norm(y) * if s < 0.0 { -1.0 } else { 1.0 };
    let c = (s * norm(y)).abs();
    let (vals, _) = axial_integral(n, Kernel::Shrinker { c, tau: ts }, q, |r, u| {
        let xu = r * u;
        let pp = a * a * s * s * r * r + 2.0 * a * s * ym * xu + ym * ym;
        let xp = a * s * r * r + ym * xu;
        [conn.hook_pair(r, pp, xp, xp)]
    })?;
    Ok(-2.0 * s * vals[0] * heat(n, ts))
}

/// Ξ(s·y, 1 + a s²) for the same path.
pub fn xi_on_path<P: RadialProfile>(
    conn: &EquivariantConnection<P>,
    y: &[f64],
    a: f64,
    s: f64,
    q: &QuadratureSpec,
) -> Result<f64> {
    let bp = Basepoint::new((s * norm(y)).abs(), 1.0 + a * s * s)?;
    Ok(f_shrinker(conn, &bp, q, NormalizationConvention::A)?.value)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Eigenform {
    /// B = D*F, eigenvalue −1.
    DstarF,
    /// B = V ⌟ F, eigenvalue −½.
    VhookF,
}

impl Eigenform {
    pub fn eigenvalue(self) -> f64 {
        match self {
            Eigenform::DstarF => -1.0,
            Eigenform::VhookF => -0.5,
        }
    }
}

/// max over points of |L B − μ B|_∞ / (|B|_∞ + ε) at the shrinker basepoint (0, 1).
pub fn eigenform_residual<P: RadialProfile>(
    conn: &EquivariantConnection<P>,
    which: Eigenform,
    v: Option<&[f64]>,
    pts: &[Vec<f64>],
    s: &FdScheme,
) -> Result<f64> {
    let n = conn.n;
    let v = match (which, v) {
        (Eigenform::VhookF, None) => return Err(Error::Argument("V hook F needs a vector V".into())),
        (_, v) => v.map(|v| v.to_vec()).unwrap_or_default(),
    };
    let field = |y: &[f64]| -> Result<OneFormEnd> {
        Ok(match which {
            Eigenform::DstarF => dstar_f_closed_form(conn, y),
            Eigenform::VhookF => hook(&v, &curvature_closed_form(conn, y)),
        })
    };
    let origin = vec![0.0; n];
    let mu = which.eigenvalue();
    let worst = pts
        .par_iter()
        .map(|x| -> Result<f64> {
            let b = field(x)?;
            let mut lb = l_at(conn, &field, x, &origin, 1.0, s)?;
            lb.add_scaled(-mu, &b);
            Ok(lb.max_abs() / (b.max_abs() + 1e-300))
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(worst.into_iter().fold(0.0, f64::max))
}

/// ∫⟨B, LB⟩G / ∫|B|²G for B = (ψ/r²)ζ at (0, t₀).
pub fn rayleigh_quotient<P: RadialProfile, Q: RadialProfile>(
    conn: &EquivariantConnection<P>,
    psi: &Q,
    t0: f64,
    q: &QuadratureSpec,
) -> Result<f64> {
    let nf = conn.n as f64;
    let (vals, _) = axial_integral(conn.n, Kernel::Shrinker { c: 0.0, tau: t0 }, q, |r, _| {
        let (g, _) = psi.reduced(r);
        let w = 2.0 * (nf - 1.0) * r * r * g;
        [w * l_equivariant_coefficient(conn, psi, t0, r), w * g]
    })?;
    if vals[1].abs() < 1e-300 {
        return Err(Error::Argument("perturbation has zero weighted norm".into()));
    }
    Ok(vals[0] / vals[1])
}

/// Rayleigh quotient of an eigenform at (0, 1) with L B evaluated pointwise by
/// nested finite differences. D*F is radial and is sampled on the ray r·e₁;
/// V⌟F (V = |V|e₁) uses an axial (r, θ) product rule.
pub fn rayleigh_quotient_pointwise<P: RadialProfile>(
    conn: &EquivariantConnection<P>,
    which: Eigenform,
    r_max: f64,
    radial_panels: usize,
    nodes: usize,
    s: &FdScheme,
) -> Result<f64> {
    let n = conn.n;
    let mut v = vec![0.0; n];
    v[0] = 1.0;
    let field = |y: &[f64]| -> Result<OneFormEnd> {
        Ok(match which {
            Eigenform::DstarF => dstar_f_closed_form(conn, y),
            Eigenform::VhookF => hook(&v, &curvature_closed_form(conn, y)),
        })
    };
    let rule = GaussLegendre::new(nodes);
    let ang = match which {
        Eigenform::DstarF => vec![(1.0, 1.0)],
        Eigenform::VhookF => angular_rule(n, 0.0, &rule),
    };
    let width = r_max / radial_panels as f64;
    let mut pts = Vec::new();
    for p in 0..radial_panels {
        for (r, wr) in rule.mapped(p as f64 * width, (p + 1) as f64 * width) {
            for &(u, wu) in &ang {
                pts.push((r, u, wr * wu * r.powi(n as i32 - 1) * (-r * r / 4.0).exp()));
            }
        }
    }
    let origin = vec![0.0; n];
    let terms = pts
        .par_iter()
        .map(|&(r, u, w)| -> Result<(f64, f64)> {
            let mut x = vec![0.0; n];
            x[0] = r * u;
            x[1] = r * (1.0 - u * u).max(0.0).sqrt();
            let b = field(&x)?;
            let lb = l_at(conn, &field, &x, &origin, 1.0, s)?;
            Ok((w * b.inner(&lb), w * b.norm_sq()))
        })
        .collect::<Result<Vec<_>>>()?;
    let num = pairwise_sum(&terms.iter().map(|t| t.0).collect::<Vec<_>>());
    let den = pairwise_sum(&terms.iter().map(|t| t.1).collect::<Vec<_>>());
    if den.abs() < 1e-300 {
        return Err(Error::Argument("eigenform vanishes".into()));
    }
    Ok(num / den)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GapReport {
    /// ∫|∇D*F|²G
    pub lhs: f64,
    /// −(3/2)∫|D*F|²G + 2∫⟨D*F, [F, D*F]^#⟩G
    pub rhs: f64,
    pub residual: f64,
    /// ∫|D*F|²G
    pub dstar_sq: f64,
    /// ∫⟨D*F, [F, D*F]^#⟩G
    pub bracket: f64,
    pub sup_f: f64,
    /// (4 sup|F| − 3/2)∫|D*F|²G
    pub bound: f64,
    pub bound_holds: bool,
}

/// Gap-theorem identity at (0, t₀), with ∇D*F and the pound bracket evaluated
/// pointwise on the ray x = r e₁ (the integrands are radial).
pub fn gap_identity_residual<P: RadialProfile>(
    conn: &EquivariantConnection<P>,
    t0: f64,
    r_max: f64,
    panels: usize,
    s: &FdScheme,
) -> Result<GapReport> {
    let n = conn.n;
    let field = |y: &[f64]| -> Result<OneFormEnd> { Ok(dstar_f_closed_form(conn, y)) };
    let rule = GaussLegendre::new(16);
    let width = r_max / panels as f64;
    let nodes: Vec<(f64, f64)> =
        (0..panels).flat_map(|p| rule.mapped(p as f64 * width, (p + 1) as f64 * width).collect::<Vec<_>>()).collect();
    let vals = nodes
        .par_iter()
        .map(|&(r, w)| -> Result<[f64; 4]> {
            let mut x = vec![0.0; n];
            x[0] = r;
            let b = field(&x)?;
            let nb = covariant_derivative_one_form(conn, &field, &x, s)?;
            let grad_sq: f64 = nb.iter().map(|d| d.norm_sq()).sum();
            let f = curvature_closed_form(conn, &x);
            let fb = pound_bracket(&f, &b)?.into_one_form()?;
            let wt = w * r.powi(n as i32 - 1) * (-r * r / (4.0 * t0)).exp();
            Ok([wt * grad_sq, wt * b.norm_sq(), wt * b.inner(&fb), wt * b.inner(&bracket_one_two(&b, &f)?)])
        })
        .collect::<Result<Vec<_>>>()?;
    let k = sphere_area(n) * heat(n, t0);
    let sum = |i: usize| k * pairwise_sum(&vals.iter().map(|v| v[i]).collect::<Vec<_>>());
    let (lhs, dstar_sq, bracket) = (sum(0), sum(1), sum(2));
    let rhs = -1.5 * dstar_sq + 2.0 * bracket;
    let residual = (lhs - rhs).abs() / (lhs.abs() + 1.5 * dstar_sq.abs() + 2.0 * bracket.abs() + 1e-300);
    let (_, sup_f) = conn.sup_curvature(50.0);
    let bound = (4.0 * sup_f - 1.5) * dstar_sq;
    Ok(GapReport { lhs, rhs, residual, dstar_sq, bracket, sup_f, bound, bound_holds: lhs <= bound })
}
