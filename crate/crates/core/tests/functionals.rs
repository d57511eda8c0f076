mod common;

use common::rel;
use proptest::prelude::*;
use ymlab::equivariant::{BumpProfile, GastelProfile};
use ymlab::functionals::*;
use ymlab::{Basepoint, EquivariantConnection, GastelParams, NormalizationConvention, QuadratureSpec};

fn q() -> QuadratureSpec {
    QuadratureSpec::default()
}

fn f_a<P: ymlab::RadialProfile>(conn: &EquivariantConnection<P>, c: f64, t0: f64) -> f64 {
    f_shrinker(conn, &Basepoint::new(c, t0).unwrap(), &q(), NormalizationConvention::A).unwrap().value
}

#[test]
fn sphere_average_basics() {
    for n in 2..=9 {
        assert!((sphere_average(n, 0.0).unwrap() - 1.0).abs() < 1e-14);
        for s in [0.5, 3.0, 40.0] {
            assert!(rel(sphere_average(n, s).unwrap(), sphere_average(n, -s).unwrap()) < 1e-13);
        }
    }
    // n = 3: A(s) = sinh(s)/s
    assert!(rel(sphere_average(3, 2.0).unwrap(), 2f64.sinh() / 2.0) < 1e-13);
    assert!(sphere_average(5, 800.0).is_err());
    assert!(sphere_moments_scaled(5, 800.0, 24)[0].is_finite());
    assert!(sphere_average(1, 1.0).is_err());
}

#[test]
fn sphere_average_matches_monte_carlo() {
    let mc = monte_carlo_sphere_average(5, 1.0, 1_000_000, 42);
    let quad = sphere_average(5, 1.0).unwrap();
    assert!((mc.mean - quad).abs() <= 3.0 * mc.std_err, "{} ± {} vs {quad}", mc.mean, mc.std_err);
}

#[test]
fn flat_functionals_vanish() {
    let flat = EquivariantConnection::flat(5).unwrap();
    assert_eq!(f_a(&flat, 0.3, 2.0), 0.0);
    assert_eq!(f_translator(&flat, 0.5, 0.0, 1.0, &q()).unwrap().value, 0.0);
    assert_eq!(f_expander(&flat, &Basepoint::origin(), 2.0, &q()).unwrap().value, 0.0);
    let e = entropy(&flat, &EntropySearch::default(), &q()).unwrap();
    assert_eq!(e.lambda, 0.0);
    assert_eq!(energy_ball(&flat, 3.0).unwrap(), 0.0);
    assert_eq!(moment_i_theta(&flat, 2.0, &Basepoint::origin(), &q()).unwrap().value, 0.0);
}

#[test]
fn shrinker_matches_monte_carlo_at_origin() {
    let conn = EquivariantConnection::gastel(5).unwrap();
    let quad = f_a(&conn, 0.0, 1.0);
    assert!((quad - 1.6541).abs() < 1e-4);
    let mc = monte_carlo_shrinker(&conn, &[0.0; 5], 1.0, 4_000_000, 7).unwrap();
    assert!(rel(mc.mean, quad) <= 1e-3, "{} vs {quad}", mc.mean);
    assert!((mc.mean - quad).abs() <= 4.0 * mc.std_err);
}

#[test]
fn shrinker_matches_monte_carlo_off_centre() {
    let conn = EquivariantConnection::gastel(5).unwrap();
    for (k, (c, t0)) in [(0.3, 0.8), (1.0, 1.5), (0.7, 0.4), (1.8, 2.2), (0.1, 1.1)].into_iter().enumerate() {
        let quad = f_a(&conn, c, t0);
        let mut x0 = vec![0.0; 5];
        x0[0] = c;
        let mc = monte_carlo_shrinker(&conn, &x0, t0, 500_000, 100 + k as u64).unwrap();
        assert!((mc.mean - quad).abs() <= 3.0 * mc.std_err, "({c}, {t0}): {} ± {} vs {quad}", mc.mean, mc.std_err);
    }
}

#[test]
fn monte_carlo_depends_only_on_offset_magnitude() {
    let conn = EquivariantConnection::gastel(5).unwrap();
    let quad = f_a(&conn, 0.5, 1.0);
    let x0 = [0.3, -0.4, 0.0, 0.0, 0.0];
    let mc = monte_carlo_shrinker(&conn, &x0, 1.0, 500_000, 3).unwrap();
    assert!((mc.mean - quad).abs() <= 3.0 * mc.std_err);
    let again = monte_carlo_shrinker(&conn, &x0, 1.0, 500_000, 3).unwrap();
    assert_eq!(mc, again);
}

#[test]
fn normalisation_conventions_are_related() {
    let conn = EquivariantConnection::gastel(6).unwrap();
    let bp = Basepoint::new(0.2, 1.7).unwrap();
    let v = |c| f_shrinker(&conn, &bp, &q(), c).unwrap().value;
    let (a, b, c) = (v(NormalizationConvention::A), v(NormalizationConvention::B), v(NormalizationConvention::C));
    let heat = (4.0 * std::f64::consts::PI * 1.7f64).powf(-3.0);
    assert!(rel(b * heat, a) < 1e-13);
    assert!(rel(c * ymlab::sphere_area(6), a) < 1e-13);
    for conv in NormalizationConvention::ALL {
        assert_eq!(NormalizationConvention::parse(conv.label()).unwrap(), conv);
    }
    assert!(NormalizationConvention::parse("D").is_err());
}

#[test]
fn entropy_under_unnormalised_kernel_increases_with_dimension() {
    let mut last = 0.0;
    for n in 5..=9 {
        let conn = EquivariantConnection::gastel(n).unwrap();
        let v = f_shrinker(&conn, &Basepoint::origin(), &q(), NormalizationConvention::B).unwrap().value;
        assert!(v > last);
        last = v;
    }
}

#[test]
fn quadrature_refinement_is_self_consistent() {
    let conn = EquivariantConnection::gastel(7).unwrap();
    for (c, t0) in [(0.0, 1.0), (1.5, 0.5), (3.0, 4.0)] {
        let bp = Basepoint::new(c, t0).unwrap();
        let a = f_shrinker(&conn, &bp, &q(), NormalizationConvention::A).unwrap();
        let b = f_shrinker(&conn, &bp, &q().refined(), NormalizationConvention::A).unwrap();
        assert!((a.value - b.value).abs() <= a.error.max(1e-11 * a.value));
    }
}

#[test]
fn translator_at_zero_offset_is_truncated_energy() {
    let conn = EquivariantConnection::gastel(5).unwrap();
    let spec = QuadratureSpec { r_max: Some(6.0), ..q() };
    let t = f_translator(&conn, 0.0, 0.0, 1.0, &spec).unwrap().value;
    assert!(rel(t, energy_ball(&conn, 6.0).unwrap()) < 1e-10);
}

#[test]
fn expander_needs_later_time() {
    let conn = EquivariantConnection::gastel(5).unwrap();
    assert!(f_expander(&conn, &Basepoint::origin(), 0.5, &q()).is_err());
    assert!(f_expander(&conn, &Basepoint::origin(), 1.5, &q()).unwrap().value > 0.0);
    assert!(f_shrinker_at_time(&conn, 0.0, 1.0, 1.0, &q()).is_err());
}

#[test]
fn entropy_argmax_is_the_soliton_basepoint() {
    let conn = EquivariantConnection::gastel(5).unwrap();
    let e = entropy(&conn, &EntropySearch::default(), &q()).unwrap();
    assert!(e.converged);
    assert!(!e.boundary_drift);
    assert!(e.argmax.c <= 1e-4 && (e.argmax.t0 - 1.0).abs() <= 1e-4, "{:?}", e.argmax);
    assert!(rel(e.lambda, f_a(&conn, 0.0, 1.0)) <= 1e-10);
}

#[test]
fn entropy_argmax_is_invariant_under_scaling() {
    let conn = EquivariantConnection::gastel(6).unwrap();
    let search = EntropySearch::default();
    let a = entropy(&conn, &search, &q()).unwrap();
    let b = entropy_scaled(&conn, &search, &q(), 3.0).unwrap();
    assert!(rel(b.lambda, 3.0 * a.lambda) < 1e-9);
    assert!((a.argmax.t0 - b.argmax.t0).abs() < 1e-4 && (a.argmax.c - b.argmax.c).abs() < 1e-4);
}

#[test]
fn basepoint_rescaling_correspondence() {
    // F_{0,t₀}(∇) = F_{0,1}(∇̃) with η̃(r) = η(√t₀ r), a Gastel profile with b/t₀.
    let conn = EquivariantConnection::gastel(5).unwrap();
    for t0 in [0.3, 2.0, 5.0] {
        let p = conn.profile.params;
        let scaled = GastelProfile::new(GastelParams { b: p.b / t0, ..p });
        let moved = EquivariantConnection::new(5, scaled).unwrap();
        assert!(rel(f_a(&conn, 0.0, t0), f_a(&moved, 0.0, 1.0)) <= 1e-8);
    }
}

#[test]
fn identities_on_flat_connection() {
    let flat = EquivariantConnection::flat(5).unwrap();
    let v = [1.0, 0.0, 0.0, 0.0, 0.0];
    for id in SolitonIdentity::ALL {
        let r = soliton_identity_residual(&flat, id, Some(&v), &Basepoint::origin(), &q()).unwrap();
        assert_eq!((r.lhs, r.rhs, r.residual), (0.0, 0.0, 0.0));
    }
}

#[test]
fn identities_on_gastel() {
    let conn = EquivariantConnection::gastel(5).unwrap();
    let v = [1.0, 0.0, 0.0, 0.0, 0.0];
    let res = |id| soliton_identity_residual(&conn, id, Some(&v), &Basepoint::origin(), &q()).unwrap().residual;
    assert!(res(SolitonIdentity::FiveA) <= 1e-6);
    assert!(res(SolitonIdentity::FiveB) <= 1e-10);
    for id in [SolitonIdentity::FiveC, SolitonIdentity::FiveD, SolitonIdentity::FiveE] {
        assert!(res(id) <= 1e-3);
    }
    assert!(res(SolitonIdentity::SolitonA) <= 1e-6);
    assert!(res(SolitonIdentity::SolitonB) <= 1e-6);
}

#[test]
fn soliton_identities_at_moved_basepoint() {
    // A (0,1)-soliton tested at another basepoint still satisfies the sid family.
    let conn = EquivariantConnection::gastel(6).unwrap();
    let v = [0.7, 0.0, 0.0, 0.0, 0.0, 0.0];
    let bp = Basepoint::new(0.6, 1.4).unwrap();
    for id in [SolitonIdentity::SolitonA, SolitonIdentity::SolitonB] {
        let r = soliton_identity_residual(&conn, id, Some(&v), &bp, &q()).unwrap();
        assert!(r.residual <= 1e-6, "{id:?}: {r:?}");
    }
}

#[test]
fn identities_needing_v_reject_missing_v() {
    let conn = EquivariantConnection::gastel(5).unwrap();
    for id in [SolitonIdentity::FiveD, SolitonIdentity::FiveE, SolitonIdentity::SolitonB] {
        assert!(soliton_identity_residual(&conn, id, None, &Basepoint::origin(), &q()).is_err());
    }
    for id in SolitonIdentity::ALL {
        assert_eq!(SolitonIdentity::parse(id.id()).unwrap(), id);
    }
}

#[test]
fn identity_a_in_dimension_four_forces_flatness() {
    let conn = EquivariantConnection::new(4, BumpProfile::new(0.5, 1.0)).unwrap();
    let r = soliton_identity_residual(&conn, SolitonIdentity::FiveA, None, &Basepoint::origin(), &q()).unwrap();
    assert!(r.lhs > 0.0);
    assert!(r.residual > 0.99);
}

#[test]
fn polynomial_energy_growth() {
    let conn = EquivariantConnection::gastel(5).unwrap();
    let ratios: Vec<f64> = [1.0, 5.0, 10.0, 25.0, 50.0].iter().map(|&r| energy_ball(&conn, r).unwrap() / r).collect();
    let max = ratios.iter().cloned().fold(0.0, f64::max);
    assert!(max < 1e4 && ratios.iter().all(|v| v.is_finite() && *v > 0.0));
    assert!(curvature_growth_exponent(&conn, 5.0, 200.0) < 0.0);
    for theta in [0.0, 1.0, 2.0, 4.0] {
        let m = moment_i_theta(&conn, theta, &Basepoint::origin(), &q()).unwrap();
        assert!(m.value.is_finite() && m.value > 0.0);
    }
    let i0 = moment_i_theta(&conn, 0.0, &Basepoint::origin(), &q()).unwrap().value;
    let factor = NormalizationConvention::A.factor(5, 1.0);
    assert!(rel(i0 * factor, f_a(&conn, 0.0, 1.0)) < 1e-12);
}

#[test]
fn xi_maximum_and_small_scale_limit() {
    let conn = EquivariantConnection::gastel(5).unwrap();
    let lambda = entropy(&conn, &EntropySearch::default(), &q()).unwrap().lambda;
    let family = |_s: f64| EquivariantConnection::gastel(5).unwrap();
    let top = xi(family, &Basepoint::origin(), 0.0, &q()).unwrap();
    assert!(rel(top, lambda) < 1e-10);
    let cs: Vec<f64> = (0..=8).map(|k| 0.25 * k as f64).collect();
    let lts: Vec<f64> = (0..=8).map(|k| -2.0 + 0.5 * k as f64).collect();
    let grid = xi_grid(&conn, &cs, &lts, &q()).unwrap();
    for (i, row) in grid.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            let d = cs[i] + lts[j].abs();
            if (0.1..=2.0).contains(&d) {
                assert!(*v < top);
            }
        }
    }
    // Ξ(0, t₀) ≈ t₀²|F|²(0) as t₀ → 0
    let f0 = conn.curvature_norm_sq(0.0);
    let small = |t0: f64| f_a(&conn, 0.0, t0) / (t0 * t0 * f0);
    assert!((small(1e-4) - 1.0).abs() < 1e-2, "{} {}", small(1e-4), small(1e-6));
    assert!((small(1e-6) - 1.0).abs() < (small(1e-4) - 1.0).abs());
    assert!(f_a(&conn, 0.0, 1e-4) < 1e-5);
}

#[test]
fn basepoint_validation() {
    assert!(Basepoint::new(0.0, 0.0).is_err());
    assert!(Basepoint::new(-1.0, 1.0).is_err());
    assert!(Basepoint::new(f64::NAN, 1.0).is_err());
    assert!(Basepoint::new(1.0, 2.0).is_ok());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn xi_is_below_the_soliton_value(c in 0.0f64..2.0, lt in -2.0f64..2.0) {
        prop_assume!(c + lt.abs() >= 0.1);
        let conn = EquivariantConnection::gastel(5).unwrap();
        prop_assert!(f_a(&conn, c, lt.exp()) < f_a(&conn, 0.0, 1.0));
    }

    #[test]
    fn sphere_average_is_even_and_at_least_one(n in 2usize..=9, s in -50.0f64..50.0) {
        let a = sphere_average(n, s).unwrap();
        prop_assert!(a >= 1.0 - 1e-14);
        prop_assert!(rel(a, sphere_average(n, -s).unwrap()) < 1e-12);
    }
}
