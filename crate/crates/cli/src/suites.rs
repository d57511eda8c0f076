//! Verification suites. Each returns one row per check.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use ymlab::equivariant::{curvature_closed_form, dstar_f_closed_form, scaling_law_check, BumpProfile, SumProfile};
use ymlab::functionals::{f_shrinker, soliton_identity_residual, SolitonIdentity};
use ymlab::tensor_core::{bianchi2_residual_with, curvature_field, dstar_at, dstar_one_form_at};
use ymlab::variation::*;
use ymlab::{Basepoint, EquivariantConnection, Error, FdScheme, NormalizationConvention, QuadratureSpec};

use crate::config::{Settings, Suite};
use crate::profile::{connection, AnyProfile, Kind};
use crate::CliError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckRow {
    pub check_id: String,
    /// The statement being checked.
    pub statement: String,
    pub n: usize,
    pub residual: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl CheckRow {
    fn new(check_id: impl Into<String>, statement: &str, n: usize, residual: f64, tolerance: f64) -> Self {
        Self {
            check_id: check_id.into(),
            statement: statement.to_string(),
            n,
            residual,
            tolerance,
            pass: residual <= tolerance,
        }
    }
}

/// Seeded points with radii log-uniform in [lo, hi] and uniform directions.
pub fn sample_points(n: usize, count: usize, lo: f64, hi: f64, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let dir: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
            let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
            let r = (lo.ln() + rng.gen::<f64>() * (hi.ln() - lo.ln())).exp();
            dir.iter().map(|v| v * r / norm).collect()
        })
        .collect()
}

fn numeric(e: Error) -> CliError {
    CliError::from(e)
}

pub fn run(suite: Suite, settings: &Settings) -> Result<Vec<CheckRow>, CliError> {
    let mut rows = Vec::new();
    for &n in &settings.dims {
        let conn = connection(settings, n)?;
        let seed = settings.seed.wrapping_mul(1000).wrapping_add(n as u64);
        rows.extend(match suite {
            Suite::Identities => identities(&conn, settings)?,
            Suite::Eigenforms => eigenforms(&conn, settings, seed)?,
            Suite::Bianchi => bianchi(&conn, settings, seed)?,
            Suite::Gap => gap(&conn, settings)?,
            Suite::Variation => variation(&conn, settings, seed)?,
            Suite::Scaling => scaling(&conn, settings, seed)?,
        });
    }
    Ok(rows)
}

fn axis(n: usize, c: f64) -> Vec<f64> {
    let mut v = vec![0.0; n];
    v[0] = c;
    v
}

fn identities(conn: &EquivariantConnection<AnyProfile>, s: &Settings) -> Result<Vec<CheckRow>, CliError> {
    let q = s.quadrature();
    let v = axis(conn.n, 1.0);
    SolitonIdentity::ALL
        .iter()
        .map(|&id| {
            let r = soliton_identity_residual(conn, id, Some(&v), &Basepoint::origin(), &q).map_err(numeric)?;
            let (tol, text) = match id {
                SolitonIdentity::FiveA => (1e-6, "integral identity (a) of a shrinker at (0, 1)"),
                SolitonIdentity::FiveB => (1e-6, "integral identity (b) of a shrinker at (0, 1)"),
                SolitonIdentity::FiveC => (1e-3, "integral identity (c) of a shrinker at (0, 1)"),
                SolitonIdentity::FiveD => (1e-3, "integral identity (d) of a shrinker at (0, 1)"),
                SolitonIdentity::FiveE => (1e-3, "integral identity (e) of a shrinker at (0, 1)"),
                SolitonIdentity::SolitonA => (1e-6, "soliton identity for the time direction"),
                SolitonIdentity::SolitonB => (1e-6, "soliton identity for a translation V"),
            };
            Ok(CheckRow::new(format!("identities.{}", id.id()), text, conn.n, r.residual, s.tol(tol)))
        })
        .collect()
}

fn eigenforms(conn: &EquivariantConnection<AnyProfile>, s: &Settings, seed: u64) -> Result<Vec<CheckRow>, CliError> {
    let n = conn.n;
    let pts = sample_points(n, s.points, 0.1, 5.0, seed);
    let mut v = axis(n, 1.0);
    v[1] = -0.5;
    let fd = FdScheme::default();
    let a = eigenform_residual(conn, Eigenform::DstarF, None, &pts, &fd).map_err(numeric)?;
    let b = eigenform_residual(conn, Eigenform::VhookF, Some(&v), &pts, &fd).map_err(numeric)?;
    Ok(vec![
        CheckRow::new("eigenforms.dstar_f", "L(D*F) = -D*F pointwise", n, a, s.tol(1e-4)),
        CheckRow::new("eigenforms.v_hook_f", "L(V hook F) = -(V hook F)/2 pointwise", n, b, s.tol(1e-4)),
    ])
}

fn bianchi(conn: &EquivariantConnection<AnyProfile>, s: &Settings, seed: u64) -> Result<Vec<CheckRow>, CliError> {
    let n = conn.n;
    let fd = FdScheme::default();
    let field = |y: &[f64]| dstar_at(conn, &curvature_field(conn, fd), y, &fd.coarser());
    let fcf = |y: &[f64]| Ok(curvature_closed_form(conn, y));
    let pts = sample_points(n, s.points, 0.1, 5.0, seed);
    let vals = pts
        .par_iter()
        .map(|x| -> ymlab::Result<(f64, f64)> {
            let m = dstar_one_form_at(conn, &field, x, &fd.coarser().coarser())?;
            let scale = dstar_f_closed_form(conn, x).max_abs().max(1.0);
            let dd = m.iter().fold(0.0f64, |a, v| a.max(v.abs())) / scale;
            let (res, sc) = bianchi2_residual_with(conn, &fcf, x, &fd)?;
            Ok((dd, res / sc.max(1e-300)))
        })
        .collect::<ymlab::Result<Vec<_>>>()
        .map_err(numeric)?;
    let dd = vals.iter().map(|v| v.0).fold(0.0, f64::max);
    let bi = vals.iter().map(|v| v.1).fold(0.0, f64::max);
    Ok(vec![
        CheckRow::new("bianchi.dstar_dstar_f", "D*D*F = 0", n, dd, s.tol(1e-5)),
        CheckRow::new("bianchi.second", "second Bianchi identity", n, bi, s.tol(1e-6)),
    ])
}

fn gap(conn: &EquivariantConnection<AnyProfile>, s: &Settings) -> Result<Vec<CheckRow>, CliError> {
    let n = conn.n;
    let g = gap_identity_residual(conn, 1.0, 14.0, 28, &FdScheme::default()).map_err(numeric)?;
    let mut rows =
        vec![CheckRow::new("gap.identity", "gap-theorem integral identity for D*F", n, g.residual, s.tol(1e-3))];
    if conn.profile.kind() == Kind::Flat {
        rows.push(CheckRow::new("gap.flat", "flat connection: sup|F| = 0", n, g.sup_f, 0.0));
    } else {
        rows.push(CheckRow {
            pass: g.sup_f > 0.375,
            ..CheckRow::new("gap.sup_curvature", "(3/8) / sup|F| below 1 (sup|F| exceeds 3/8)", n, 0.375 / g.sup_f, 1.0)
        });
        let ratio = if g.bound > 0.0 { g.lhs / g.bound } else { f64::INFINITY };
        rows.push(CheckRow::new(
            "gap.bound_chain",
            "int|grad D*F|^2 G over (4 sup|F| - 3/2) int|D*F|^2 G at most 1",
            n,
            ratio,
            1.0,
        ));
    }
    Ok(rows)
}

fn variation(conn: &EquivariantConnection<AnyProfile>, s: &Settings, seed: u64) -> Result<Vec<CheckRow>, CliError> {
    let n = conn.n;
    let q = QuadratureSpec::fixed();
    let qa = s.quadrature();
    let origin = Basepoint::origin();
    let mut rows = Vec::new();
    let f0 = f_shrinker(conn, &origin, &qa, NormalizationConvention::A).map_err(numeric)?.value;
    let defect = radial_soliton_defect(conn, 1.0);
    let is_soliton = defect <= 1e-6;
    if is_soliton {
        let v = VariationTriple { tdot: 0.7, xdot: axis(n, 0.4), psi: Some(BumpProfile::new(0.2, 1.2)) };
        let d = first_variation_formula(conn, &v, &origin, &qa).map_err(numeric)?;
        rows.push(CheckRow::new(
            "variation.critical",
            "first variation vanishes at a shrinker (relative to F)",
            n,
            d.abs() / f0.max(1e-300),
            s.tol(1e-8),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let hs: [f64; 3] = [1e-2, 5e-3, 2.5e-3];
    let order = |errs: &[f64]| {
        let xs: Vec<f64> = hs.iter().map(|h| h.ln()).collect();
        let ys: Vec<f64> = errs.iter().map(|e| e.max(1e-300).ln()).collect();
        let (mx, my) = (xs.iter().sum::<f64>() / 3.0, ys.iter().sum::<f64>() / 3.0);
        let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
        let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
        sxy / sxx
    };
    for k in 0..s.paths {
        let bump = BumpProfile::new(rng.gen_range(-0.1..0.1), rng.gen_range(0.8..1.6));
        let moved = EquivariantConnection::new(n, SumProfile { a: &conn.profile, b: bump }).map_err(numeric)?;
        let bp = Basepoint::new(rng.gen_range(0.0..1.0), rng.gen_range(0.6..1.6)).map_err(numeric)?;
        let v = VariationTriple {
            tdot: rng.gen_range(-1.0..1.0),
            xdot: axis(n, rng.gen_range(-1.0..1.0)),
            psi: Some(BumpProfile::new(rng.gen_range(-0.3..0.3), rng.gen_range(0.7..1.8))),
        };
        let formula = first_variation_formula(&moved, &v, &bp, &q).map_err(numeric)?;
        let errs = hs
            .iter()
            .map(|&h| Ok((path_differences(&moved, &v, &bp, &q, h)?.0 - formula).abs()))
            .collect::<ymlab::Result<Vec<f64>>>()
            .map_err(numeric)?;
        let scale = formula.abs().max(1e-12 * f0.abs()).max(1e-300);
        rows.push(CheckRow::new(
            format!("variation.first.{k}"),
            "first-variation formula vs centred differences (relative)",
            n,
            errs[2] / scale,
            s.tol(1e-3),
        ));
        if errs[0] > 1e-13 * scale.max(1.0) {
            let p = order(&errs);
            rows.push(CheckRow { pass: p >= 1.7, ..CheckRow::new(format!("variation.first_order.{k}"), "observed difference order at least 1.7 (residual = 1.7/order)", n, 1.7 / p, 1.0) });
        }
        if is_soliton {
            let v = VariationTriple {
                tdot: rng.gen_range(-1.0..1.0),
                xdot: axis(n, rng.gen_range(-1.0..1.0)),
                psi: Some(BumpProfile::new(rng.gen_range(-0.3..0.3), rng.gen_range(0.7..1.8))),
            };
            let formula = second_variation_shrinker(conn, &v, &origin, &q).map_err(numeric)?;
            let errs = hs
                .iter()
                .map(|&h| Ok((path_differences(conn, &v, &origin, &q, h)?.1 - formula).abs()))
                .collect::<ymlab::Result<Vec<f64>>>()
                .map_err(numeric)?;
            let scale = formula.abs().max(1e-300);
            rows.push(CheckRow::new(
                format!("variation.second.{k}"),
                "second-variation formula vs centred second differences (relative)",
                n,
                errs[2] / scale,
                s.tol(1e-3),
            ));
            if errs[0] <= 1e-13 * scale.max(1.0) {
                continue;
            }
            let p = order(&errs);
            rows.push(CheckRow { pass: p >= 1.7, ..CheckRow::new(format!("variation.second_order.{k}"), "observed difference order at least 1.7 (residual = 1.7/order)", n, 1.7 / p, 1.0) });
        }
    }
    Ok(rows)
}

fn scaling(conn: &EquivariantConnection<AnyProfile>, s: &Settings, seed: u64) -> Result<Vec<CheckRow>, CliError> {
    let n = conn.n;
    if conn.profile.kind() == Kind::Flat {
        return Ok(vec![CheckRow::new("scaling.law", "flat family: Gamma = 0 is scale invariant", n, 0.0, s.tol(1e-12))]);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let lambda = rng.gen_range(0.1..5.0) * if rng.gen::<bool>() { 1.0 } else { -1.0 };
        let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let t = -rng.gen_range(0.01..5.0);
        worst = worst.max(scaling_law_check(n, lambda, &x, t).map_err(numeric)?);
    }
    Ok(vec![CheckRow::new(
        "scaling.law",
        "lambda Gamma(lambda x, lambda^2 t) = Gamma(x, t) for the self-similar Gastel family",
        n,
        worst,
        s.tol(1e-12),
    )])
}
