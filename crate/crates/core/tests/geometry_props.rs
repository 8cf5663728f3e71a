use std::f64::consts::PI;

use approx::assert_abs_diff_eq;
use levolve_core::geometry::{FlowModel, Geometry, ScalarField, TangentVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn builtin() -> Vec<Geometry> {
    [
        FlowModel::StaticFlatCircle { circumference: 2.0 * PI },
        FlowModel::RicciRoundSphere { initial_radius: 1.0 },
        FlowModel::DilatonCircle { phi0_sq: 10.0, coupling: 1.0, winding: 1.0 },
    ]
    .into_iter()
    .map(|m| Geometry::build(m, 64, (0.5, 4.0)).unwrap())
    .collect()
}

#[test]
fn ricci_sphere_d_vanishes_on_random_samples() {
    let g = Geometry::build(FlowModel::RicciRoundSphere { initial_radius: 1.0 }, 64, (0.5, 4.0)).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..100 {
        let node = rng.gen_range(0..64);
        let tau = rng.gen_range(0.5..4.0);
        let x = TangentVector::new(rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0));
        assert!(g.d_quantity(node, tau, &x).unwrap().abs() < 1e-8);
    }
}

#[test]
fn d_is_nonnegative_on_builtin_models() {
    let taus = [0.5, 1.0, 2.0, 3.0, 4.0];
    for g in builtin() {
        let r = g.verify_d_nonneg(&taus, 1e-8).unwrap();
        assert!(r.passed && r.min >= -1e-8, "{}: {}", g.model().name(), r.min);
    }
}

#[test]
fn d_and_h_are_quadratic_in_x() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for g in builtin() {
        for _ in 0..10 {
            let node = rng.gen_range(0..64);
            let tau = rng.gen_range(0.5..4.0);
            let x = TangentVector::new(rng.gen_range(-2.0..2.0), if g.dim() == 2 { rng.gen_range(-2.0..2.0) } else { 0.0 });
            for q in [
                |g: &Geometry, n, t, x: &TangentVector| g.d_quantity(n, t, x).unwrap(),
                |g: &Geometry, n, t, x: &TangentVector| g.h_quantity(n, t, x).unwrap(),
            ] {
                let f0 = q(&g, node, tau, &TangentVector::new(0.0, 0.0));
                let f1 = q(&g, node, tau, &x);
                let f2 = q(&g, node, tau, &x.scaled(2.0));
                let f3 = q(&g, node, tau, &x.scaled(3.0));
                // A quadratic has vanishing third difference.
                let third = f3 - 3.0 * f2 + 3.0 * f1 - f0;
                assert!(third.abs() < 1e-12 * (1.0 + f3.abs()), "{third}");
            }
        }
    }
}

#[test]
fn trace_matches_contraction() {
    for g in builtin() {
        for &tau in &[0.5, 1.3, 4.0] {
            let m = g.metric_at(5, tau).unwrap();
            let f = g.flow_sample(5, tau).unwrap();
            let inv = m.inverse();
            let mut tr = 0.0;
            for i in 0..g.dim() {
                for j in 0..g.dim() {
                    tr += inv[i][j] * f.s[i][j];
                }
            }
            assert!((tr - f.trace).abs() < 1e-12);
        }
    }
}

#[test]
fn total_volumes() {
    let gs = builtin();
    assert_abs_diff_eq!(gs[0].volume_weights(1.0).unwrap().sum(), 2.0 * PI, epsilon = 1e-12);
    assert_abs_diff_eq!(gs[1].volume_weights(1.0).unwrap().sum(), 12.0 * PI, epsilon = 1e-10);
    assert_abs_diff_eq!(gs[2].volume_weights(1.0).unwrap().sum(), 8f64.sqrt() * 2.0 * PI, epsilon = 1e-12);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn laplacian_is_self_adjoint(
        model in 0usize..3,
        tau in 0.5f64..4.0,
        u in prop::collection::vec(-1.0f64..1.0, 64),
        v in prop::collection::vec(-1.0f64..1.0, 64),
    ) {
        let g = &builtin()[model];
        let (mut u, mut v) = (u, v);
        if g.dim() == 2 {
            // Zonal fields are mirror-symmetric about the poles.
            for i in 0..32 {
                u[63 - i] = u[i];
                v[63 - i] = v[i];
            }
        }
        let w = g.volume_weights(tau).unwrap();
        let lu = g.laplace_beltrami(&ScalarField::new(u.clone(), tau), tau).unwrap();
        let lv = g.laplace_beltrami(&ScalarField::new(v.clone(), tau), tau).unwrap();
        let a: f64 = (0..64).map(|i| lu.values[i] * v[i] * w.values[i]).sum();
        let b: f64 = (0..64).map(|i| u[i] * lv.values[i] * w.values[i]).sum();
        prop_assert!((a - b).abs() < 1e-10);
    }

    #[test]
    fn laplacian_annihilates_constants(model in 0usize..3, c in -5.0f64..5.0, tau in 0.5f64..4.0) {
        let g = &builtin()[model];
        let l = g.laplace_beltrami(&ScalarField::new(vec![c; 64], tau), tau).unwrap();
        prop_assert!(l.values.iter().all(|v| *v == 0.0));
    }
}
