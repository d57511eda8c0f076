//! Acceptance run: every criterion prints one PASS/FAIL line; the process
//! exits nonzero if any criterion fails.

use std::sync::Arc;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use ymlab::equivariant::*;
use ymlab::flow::*;
use ymlab::functionals::*;
use ymlab::tensor_core::*;
use ymlab::variation::*;
use ymlab::{Basepoint, FdScheme, NormalizationConvention, QuadratureSpec};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn sample_points(n: usize, count: usize, lo: f64, hi: f64, seed: u64) -> Vec<Vec<f64>> {
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

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn err(e: ymlab::Error) -> String {
    e.to_string()
}

/// Least-squares slope of log(err) against log(h).
fn slope(hs: &[f64], errs: &[f64]) -> f64 {
    let xs: Vec<f64> = hs.iter().map(|h| h.ln()).collect();
    let ys: Vec<f64> = errs.iter().map(|e| e.max(1e-300).ln()).collect();
    let m = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / m, ys.iter().sum::<f64>() / m);
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

fn c1_soliton_ode() -> Outcome {
    let t = Instant::now();
    let mut worst: f64 = 0.0;
    for n in 5..=9 {
        let p = GastelProfile::for_dim(n).map_err(err)?;
        worst = worst.max(max_soliton_ode_residual(&p, n, 0.01, 20.0, 20_000));
    }
    let dt = t.elapsed().as_secs_f64();
    check(worst <= 1e-8 && dt < 1.0, format!("max residual {worst:.2e} (tol 1e-8), {dt:.3} s"))
}

fn c2_tensor_oracle() -> Outcome {
    let mut worst: f64 = 0.0;
    for n in 5..=7 {
        let conn = EquivariantConnection::gastel(n).map_err(err)?;
        for x in sample_points(n, 50, 0.1, 5.0, 200 + n as u64) {
            let exact = curvature_closed_form(&conn, &x);
            let fd = curvature_at(&conn, &x, &FdScheme::default()).map_err(err)?;
            worst = worst.max(fd.sub(&exact).max_abs() / exact.max_abs());
        }
    }
    check(worst <= 1e-8, format!("max relative deviation {worst:.2e} over 150 points (tol 1e-8)"))
}

fn c3_soliton_pointwise() -> Outcome {
    let mut worst: f64 = 0.0;
    for n in 5..=9 {
        let conn = EquivariantConnection::gastel(n).map_err(err)?;
        let origin = vec![0.0; n];
        for x in sample_points(n, 20, 0.1, 5.0, 300 + n as u64) {
            let f = curvature_closed_form(&conn, &x).norm_sq().sqrt();
            let r = soliton_residual_at(&conn, &x, &origin, 1.0, &FdScheme::default()).map_err(err)?;
            worst = worst.max(r.norm_sq().sqrt() / f);
        }
    }
    check(worst <= 1e-6, format!("max |D*F + x/2 hook F| / |F| = {worst:.2e} over 100 points (tol 1e-6)"))
}

fn c4_dstar_dstar_and_bianchi() -> Outcome {
    let s = FdScheme::default();
    let (mut dd, mut bi): (f64, f64) = (0.0, 0.0);
    for n in 5..=7 {
        let conn = EquivariantConnection::gastel(n).map_err(err)?;
        let field = |y: &[f64]| dstar_at(&conn, &curvature_field(&conn, s), y, &s.coarser());
        let fcf = |y: &[f64]| Ok(curvature_closed_form(&conn, y));
        for x in sample_points(n, 10, 0.1, 5.0, 400 + n as u64) {
            let m = dstar_one_form_at(&conn, &field, &x, &s.coarser().coarser()).map_err(err)?;
            let scale = dstar_f_closed_form(&conn, &x).max_abs().max(1.0);
            dd = dd.max(m.iter().fold(0.0f64, |a, v| a.max(v.abs())) / scale);
            let (res, sc) = bianchi2_residual_with(&conn, &fcf, &x, &s).map_err(err)?;
            bi = bi.max(res / sc);
        }
    }
    let conn = EquivariantConnection::gastel(5).map_err(err)?;
    let fcf = |y: &[f64]| Ok(curvature_closed_form(&conn, y));
    let x = vec![0.5, 0.4, -0.3, 0.2, 0.1];
    let hs = [0.04, 0.02, 0.01];
    let res = hs
        .iter()
        .map(|&h| Ok(bianchi2_residual_with(&conn, &fcf, &x, &FdScheme::new(h, 2, 0)?)?.0))
        .collect::<ymlab::Result<Vec<f64>>>()
        .map_err(err)?;
    let order = slope(&hs, &res);
    check(
        dd <= 1e-5 && bi <= 1e-6 && (1.7..2.3).contains(&order),
        format!("D*D*F {dd:.2e} (tol 1e-5), Bianchi {bi:.2e} (tol 1e-6), refinement order {order:.2} (scheme order 2)"),
    )
}

fn c5_eigenforms() -> Outcome {
    let s = FdScheme::default();
    let (mut a, mut b): (f64, f64) = (0.0, 0.0);
    for n in 5..=7 {
        let conn = EquivariantConnection::gastel(n).map_err(err)?;
        let pts = sample_points(n, 20, 0.1, 5.0, 500 + n as u64);
        let mut v = vec![0.0; n];
        v[0] = 1.0;
        v[1] = -0.5;
        v[n - 1] = 0.3;
        a = a.max(eigenform_residual(&conn, Eigenform::DstarF, None, &pts, &s).map_err(err)?);
        b = b.max(eigenform_residual(&conn, Eigenform::VhookF, Some(&v), &pts, &s).map_err(err)?);
    }
    check(a <= 1e-4 && b <= 1e-4, format!("L(D*F)+D*F {a:.2e}, L(V hook F)+(V hook F)/2 {b:.2e} (tol 1e-4)"))
}

fn c6_identities() -> Outcome {
    let q = QuadratureSpec::default();
    let mut lines = Vec::new();
    let mut ok = true;
    for n in 5..=9 {
        let conn = EquivariantConnection::gastel(n).map_err(err)?;
        let mut v = vec![0.0; n];
        v[0] = 1.0;
        for id in SolitonIdentity::ALL {
            let r = soliton_identity_residual(&conn, id, Some(&v), &Basepoint::origin(), &q).map_err(err)?;
            let tol = match id {
                SolitonIdentity::FiveC | SolitonIdentity::FiveD | SolitonIdentity::FiveE => 1e-3,
                _ => 1e-6,
            };
            ok &= r.residual <= tol;
            if n == 5 {
                lines.push(format!("{} {:.1e}", id.id(), r.residual));
            }
        }
    }
    check(ok, format!("n = 5..9; n = 5 residuals: {}", lines.join(", ")))
}

fn c7_variations() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(700);
    let hs = [1e-2, 5e-3, 2.5e-3];
    let q = QuadratureSpec::fixed();
    let (mut worst_rel, mut worst_order) = (0.0f64, f64::INFINITY);
    for k in 0..10 {
        let n = 5 + k % 5;
        // first variation on a perturbed connection at a generic basepoint
        let conn = EquivariantConnection::new(
            n,
            SumProfile {
                a: GastelProfile::for_dim(n).map_err(err)?,
                b: BumpProfile::new(rng.gen_range(-0.1..0.1), rng.gen_range(0.8..1.6)),
            },
        )
        .map_err(err)?;
        let bp = Basepoint::new(rng.gen_range(0.0..1.0), rng.gen_range(0.6..1.6)).map_err(err)?;
        let mut xdot = vec![0.0; n];
        xdot[0] = rng.gen_range(-1.0..1.0);
        let v = VariationTriple {
            tdot: rng.gen_range(-1.0..1.0),
            xdot,
            psi: Some(BumpProfile::new(rng.gen_range(-0.3..0.3), rng.gen_range(0.7..1.8))),
        };
        let formula = first_variation_formula(&conn, &v, &bp, &q).map_err(err)?;
        let errs = hs
            .iter()
            .map(|&h| Ok((path_differences(&conn, &v, &bp, &q, h)?.0 - formula).abs()))
            .collect::<ymlab::Result<Vec<f64>>>()
            .map_err(err)?;
        worst_rel = worst_rel.max(errs[2] / formula.abs());
        worst_order = worst_order.min(slope(&hs, &errs));

        // second variation at the soliton
        let sol = EquivariantConnection::gastel(n).map_err(err)?;
        let mut xdot = vec![0.0; n];
        xdot[0] = rng.gen_range(-1.0..1.0);
        let v = VariationTriple {
            tdot: rng.gen_range(-1.0..1.0),
            xdot,
            psi: Some(BumpProfile::new(rng.gen_range(-0.3..0.3), rng.gen_range(0.7..1.8))),
        };
        let bp = Basepoint::origin();
        let formula = second_variation_shrinker(&sol, &v, &bp, &q).map_err(err)?;
        let errs = hs
            .iter()
            .map(|&h| Ok((path_differences(&sol, &v, &bp, &q, h)?.1 - formula).abs()))
            .collect::<ymlab::Result<Vec<f64>>>()
            .map_err(err)?;
        worst_rel = worst_rel.max(errs[2] / formula.abs());
        worst_order = worst_order.min(slope(&hs, &errs));
    }
    check(
        worst_rel <= 1e-3 && worst_order >= 1.7,
        format!("10 first- and 10 second-variation paths: max rel {worst_rel:.2e} (tol 1e-3), min order {worst_order:.2} (>= 1.7)"),
    )
}

fn c8_xi_landscape() -> Outcome {
    let conn = EquivariantConnection::gastel(5).map_err(err)?;
    let q = QuadratureSpec::default();
    let cs: Vec<f64> = (0..41).map(|k| 0.05 * k as f64).collect();
    let lts: Vec<f64> = (0..41).map(|k| -2.0 + 0.1 * k as f64).collect();
    let grid = xi_grid(&conn, &cs, &lts, &q).map_err(err)?;
    let top = grid[0][20];
    let mut argmax = (0, 20);
    let mut unique = true;
    let mut gap = f64::INFINITY;
    for (i, row) in grid.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            if (i, j) != (0, 20) {
                if v >= top {
                    unique = false;
                    argmax = (i, j);
                }
                if cs[i] + lts[j].abs() >= 0.1 - 1e-12 {
                    gap = gap.min(top - v);
                }
            }
        }
    }
    let qf = QuadratureSpec::fixed();
    let mut rng = ChaCha8Rng::seed_from_u64(800);
    let mut bad = 0;
    let mut tested = 0;
    while tested < 100 {
        let a = rng.gen_range(-1.0..1.0);
        let s = rng.gen_range(-1.5..1.5);
        if 1.0 + a * s * s <= 0.05 {
            continue;
        }
        let y: Vec<f64> = (0..5).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let d = xi_path_derivative(&conn, &y, a, s, &qf).map_err(err)?;
        if d * s > 0.0 {
            bad += 1;
        }
        tested += 1;
    }
    check(
        unique && gap > 0.0 && bad == 0,
        format!(
            "41x41 grid: max at (c, log t0) = ({}, {}), min margin {gap:.3e} off the 0.1-neighbourhood; {bad}/100 path-sign violations",
            cs[argmax.0], lts[argmax.1]
        ),
    )
}

fn c9_entropy_table() -> Outcome {
    let q = QuadratureSpec::default();
    let rows = entropy_table(&[5, 6, 7, 8, 9], &NormalizationConvention::ALL, &EntropySearch::default(), &q)
        .map_err(err)?;
    println!("    entropy table discrepancy report (value, reference, relative deviation):");
    for conv in NormalizationConvention::ALL {
        let cells: Vec<String> = rows
            .iter()
            .filter(|r| r.convention == conv)
            .map(|r| format!("n={} {:.6} vs {} ({:+.3e})", r.n, r.value, r.reference.unwrap_or(f64::NAN), r.rel_dev.unwrap_or(f64::NAN)))
            .collect();
        println!("    [{}] {}", conv.label(), cells.join("; "));
    }
    let matches = matching_conventions(&rows, 5e-3);
    if let Some(c) = matches.first() {
        return Ok(format!("convention {} matches all five reference values within 0.5%", c.label()));
    }
    let mut worst = 0.0f64;
    for (k, n) in (5..=9).enumerate() {
        let conn = EquivariantConnection::gastel(n).map_err(err)?;
        let quad = rows
            .iter()
            .find(|r| r.n == n && r.convention == NormalizationConvention::A)
            .map(|r| (r.value, r.argmax))
            .ok_or("missing row")?;
        let mut x0 = vec![0.0; n];
        x0[0] = quad.1.c;
        let mc = monte_carlo_shrinker(&conn, &x0, quad.1.t0, 24_000_000, 900 + k as u64).map_err(err)?;
        let rel = (mc.mean - quad.0).abs() / quad.0;
        println!("    n={n}: quadrature {:.7} Monte Carlo {:.7} +- {:.1e} (rel {rel:.2e})", quad.0, mc.mean, mc.std_err);
        worst = worst.max(rel);
    }
    check(
        worst <= 1e-3,
        format!("no convention matches the reference column within 0.5%; fallback quadrature vs Monte Carlo max rel {worst:.2e} (tol 1e-3)"),
    )
}

fn c10_flow() -> Outcome {
    let p = GastelParams::new(5).map_err(err)?;
    let rho_max = 20.0;
    let mut cfg = SolverCfg::new(5);
    cfg.boundary = Boundary::Dirichlet(Arc::new(move |t| gastel_eta(&p, rho_max, t)));
    let hs = [0.04, 0.02, 0.01];
    let errs = hs
        .iter()
        .map(|&dr| {
            let s = FlowState::gastel(5, dr, rho_max, -1.0)?;
            let tr = run(s, &cfg, &[-0.5, -0.25], |_| {})?;
            Ok(tracking_error(tr.states.last().expect("samples"), rho_max / 2.0, |r, t| gastel_eta(&p, r, t)))
        })
        .collect::<ymlab::Result<Vec<f64>>>()
        .map_err(err)?;
    let order = slope(&hs, &errs);

    let clamp = SolverCfg::new(5);
    let ts = sample_times(-1.0, -0.25, 10);
    let tr = run(FlowState::gastel(5, 0.02, rho_max, -1.0).map_err(err)?, &clamp, &ts, |_| {}).map_err(err)?;
    let sh = run(FlowState::gastel(5, 0.04, rho_max, -1.0).map_err(err)?, &clamp, &ts, |_| {}).map_err(err)?;
    let rep = entropy_monotonicity_harness(&tr, Some(&sh), &HarnessCfg::default()).map_err(err)?;
    let ent = rep.entropy.as_ref().ok_or("entropy series missing")?;
    check(
        (1.8..2.2).contains(&order) && rep.passed(),
        format!(
            "tracking errors {:.2e}/{:.2e}/{:.2e}, order {order:.2}; entropy {:.7}..{:.7} monotone {}; {} fixed-basepoint series monotone {}",
            errs[0],
            errs[1],
            errs[2],
            ent.values[0],
            ent.values[ent.values.len() - 1],
            ent.monotone(),
            rep.fixed.len(),
            rep.fixed.iter().all(|f| f.monotone())
        ),
    )
}

fn c11_gap() -> Outcome {
    let mut ok = true;
    let mut lines = Vec::new();
    for n in 5..=9 {
        let conn = EquivariantConnection::gastel(n).map_err(err)?;
        let (_, sup) = conn.sup_curvature(50.0);
        let g = gap_identity_residual(&conn, 1.0, 14.0, 28, &FdScheme::default()).map_err(err)?;
        ok &= sup > 3.0 / 8.0 && g.residual <= 1e-3 && g.bound_holds;
        if n == 5 {
            ok &= (sup - 29.64).abs() < 0.01;
        }
        lines.push(format!("n={n} sup|F| {sup:.3} residual {:.1e}", g.residual));
    }
    check(ok, lines.join(", "))
}

fn c12_scaling() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1200);
    let mut worst: f64 = 0.0;
    for n in 5..=9 {
        for _ in 0..100 {
            let lambda = rng.gen_range(0.1..5.0) * if rng.gen::<bool>() { 1.0 } else { -1.0 };
            let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-3.0..3.0)).collect();
            let t = -rng.gen_range(0.01..5.0);
            worst = worst.max(scaling_law_check(n, lambda, &x, t).map_err(err)?);
        }
    }
    check(worst <= 1e-12, format!("max defect {worst:.2e} over 500 samples (tol 1e-12)"))
}

fn main() {
    let criteria: [Criterion; 12] = [
        ("soliton ODE residual", c1_soliton_ode),
        ("tensor oracle agreement", c2_tensor_oracle),
        ("pointwise soliton equation", c3_soliton_pointwise),
        ("D*D*F and second Bianchi", c4_dstar_dstar_and_bianchi),
        ("eigenforms of L", c5_eigenforms),
        ("soliton integral identities", c6_identities),
        ("first and second variation", c7_variations),
        ("Xi landscape", c8_xi_landscape),
        ("entropy table", c9_entropy_table),
        ("flow and monotonicity", c10_flow),
        ("gap-theorem consistency", c11_gap),
        ("scaling law", c12_scaling),
    ];
    let mut failed = 0;
    for (k, (name, f)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let out = f();
        let secs = t.elapsed().as_secs_f64();
        match out {
            Ok(d) => println!("criterion {:>2} PASS  {name}: {d} [{secs:.1} s]", k + 1),
            Err(d) => {
                failed += 1;
                println!("criterion {:>2} FAIL  {name}: {d} [{secs:.1} s]", k + 1);
            }
        }
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
