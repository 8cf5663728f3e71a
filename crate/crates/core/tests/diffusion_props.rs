use std::f64::consts::PI;

use levolve_core::diffusion::{evolve_density, DiffusionState};
use levolve_core::geometry::{FlowModel, Geometry};
use levolve_core::monitors::entropy;
use proptest::prelude::*;

fn builtin(n: usize) -> Vec<Geometry> {
    [
        FlowModel::StaticFlatCircle { circumference: 2.0 * PI },
        FlowModel::RicciRoundSphere { initial_radius: 1.0 },
        FlowModel::DilatonCircle { phi0_sq: 10.0, coupling: 1.0, winding: 1.0 },
    ]
    .into_iter()
    .map(|m| Geometry::build(m, n, (0.5, 4.0)).unwrap())
    .collect()
}

#[test]
fn mass_is_conserved_on_builtin_models() {
    for g in builtin(64) {
        let mut s = DiffusionState::bump(&g, 1.0, 0.4, 0.05, 1.0).unwrap();
        for k in 1..=6 {
            s = evolve_density(&g, &s, 1.0 + 0.5 * k as f64).unwrap();
            assert!((s.mass(&g) - 1.0).abs() < 1e-8, "{}: {}", g.model().name(), s.mass(&g));
        }
    }
}

#[test]
fn uniform_sphere_matches_closed_form() {
    let g = &builtin(64)[1];
    let s = evolve_density(g, &DiffusionState::uniform(g, 1.0).unwrap(), 4.0).unwrap();
    let exact = 1.0 / (4.0 * PI * 9.0);
    for v in &s.u {
        assert!((v - exact).abs() / exact < 1e-4);
    }
}

/// Zonal first harmonic on the shrinking sphere:
/// `u = (1 + a0 (ρ0/ρ) cos ψ) / (4πρ)` with `ρ = r0² + 2τ`.
fn p1_error(n: usize) -> f64 {
    let g = Geometry::build(FlowModel::RicciRoundSphere { initial_radius: 1.0 }, n, (0.5, 4.0)).unwrap();
    let exact = |theta: f64, tau: f64| {
        let rho = 1.0 + 2.0 * tau;
        (1.0 + 0.5 * (3.0 / rho) * theta.cos()) / (4.0 * PI * rho)
    };
    let u0: Vec<f64> = g.coords().iter().map(|&t| exact(t, 1.0)).collect();
    let s = evolve_density(&g, &DiffusionState::new(&g, u0, 1.0).unwrap(), 3.0).unwrap();
    g.coords()
        .iter()
        .zip(&s.u)
        .map(|(&t, v)| (v - exact(t, 3.0)).abs() / exact(t, 3.0))
        .fold(0.0, f64::max)
}

#[test]
fn sphere_first_harmonic_converges_at_second_order() {
    let (coarse, fine) = (p1_error(32), p1_error(64));
    assert!(fine < 2e-3, "{fine}");
    let order = (coarse / fine).log2();
    assert!(order > 1.7, "observed order {order} ({coarse} -> {fine})");
}

#[test]
fn entropy_decreases_along_heat_flow() {
    for g in builtin(64) {
        let mut s = DiffusionState::bump(&g, 2.0, 0.3, 0.0, 1.0).unwrap();
        let mut last = entropy(&g, &s.u, 1.0).unwrap();
        for k in 1..=4 {
            let tau = 1.0 + 0.5 * k as f64;
            s = evolve_density(&g, &s, tau).unwrap();
            let e = entropy(&g, &s.u, tau).unwrap();
            // On shrinking or growing manifolds E also absorbs the volume
            // change, so only the static model is strictly dissipative.
            if g.model().name() == "static_flat_circle" {
                assert!(e < last);
            }
            last = e;
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn random_profiles_stay_nonnegative_and_conserve_mass(
        raw in prop::collection::vec(0.0f64..1.0, 32),
        model in 0usize..3,
    ) {
        let g = &builtin(32)[model];
        let mut raw = raw;
        if g.dim() == 2 {
            for i in 0..16 {
                raw[31 - i] = raw[i];
            }
        }
        let w = g.volume_weights(1.0).unwrap();
        let mass: f64 = raw.iter().zip(&w.values).map(|(u, w)| u * w).sum();
        prop_assume!(mass > 1e-6);
        let u: Vec<f64> = raw.iter().map(|v| v / mass).collect();
        let s = evolve_density(g, &DiffusionState::new(g, u, 1.0).unwrap(), 2.0).unwrap();
        prop_assert!(s.u.iter().all(|v| *v >= -1e-10));
        prop_assert!((s.mass(g) - 1.0).abs() < 1e-8);
    }
}
