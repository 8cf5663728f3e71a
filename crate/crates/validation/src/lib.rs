//! Independent reference values for the acceptance suite in
//! `tests/acceptance.rs`. Nothing here calls into the solver crates: each
//! oracle is a closed form or a plain quadrature.
//!
//! The suite lives in its own crate so that `cargo test --workspace` runs
//! it after every unit and integration test.

use std::f64::consts::PI;

/// Adaptive Simpson quadrature with Richardson correction.
pub fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    #[allow(clippy::too_many_arguments)]
    fn step(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (flm, frm) = (f(0.5 * (a + m)), f(0.5 * (m + b)));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
            return left + right + (left + right - whole) / 15.0;
        }
        step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) + step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
    }
    let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
    step(f, a, b, fa, fm, fb, (b - a) / 6.0 * (fa + 4.0 * fm + fb), tol, 48)
}

/// Distance on the unit-speed circle of length 2π.
pub fn circle_distance(x: f64, y: f64) -> f64 {
    let d = (x - y).rem_euclid(2.0 * PI);
    d.min(2.0 * PI - d)
}

/// `Q` on the static flat circle: `d²/(2(√τ2 − √τ1))`.
pub fn flat_q(x: f64, tau1: f64, y: f64, tau2: f64) -> f64 {
    let d = circle_distance(x, y);
    d * d / (2.0 * (tau2.sqrt() - tau1.sqrt()))
}

/// `𝒦` along the constant path on the shrinking unit sphere from `tau1` to
/// `tau2`, where `H = 4/ρ² − 2/(τρ)` with `ρ = 1 + 2τ`.
pub fn sphere_constant_kappa(tau1: f64, tau2: f64) -> f64 {
    let f = |t: f64| {
        let rho = 1.0 + 2.0 * t;
        t.powf(1.5) * (4.0 / (rho * rho) - 2.0 / (t * rho))
    };
    simpson(&f, tau1, tau2, 1e-13)
}

/// `W` of the uniform density on the flat circle of length 2π at time `tau`:
/// `f` is constant, so `W = f − 1` with `f = ln 2π − ½ ln 4πτ`.
pub fn flat_uniform_w(tau: f64) -> f64 {
    (2.0 * PI).ln() - 0.5 * (4.0 * PI * tau).ln() - 1.0
}

/// Reduced volume on the flat circle from a base point at time `eps`:
/// `∫_{−π}^{π} (4πτ)^{-1/2} exp(−d²/(4√τ(√τ − √eps))) dd`.
pub fn flat_reduced_volume(tau: f64, eps: f64) -> f64 {
    let k = 4.0 * tau.sqrt() * (tau.sqrt() - eps.sqrt());
    let f = |d: f64| (4.0 * PI * tau).powf(-0.5) * (-d * d / k).exp();
    simpson(&f, -PI, PI, 1e-14)
}

/// `Θ(s)` for two uniform densities on the flat circle.
pub fn flat_uniform_theta(tau_bar1: f64, tau_bar2: f64, s: f64) -> f64 {
    let g = tau_bar2.sqrt() - tau_bar1.sqrt();
    -2.0 * g * g * s.exp()
}

/// Uniform density on the shrinking unit sphere: `1/(4π(1 + 2τ))`.
pub fn sphere_uniform_density(tau: f64) -> f64 {
    1.0 / (4.0 * PI * (1.0 + 2.0 * tau))
}

/// Negative-cycle search on the residual graph of a transportation plan,
/// which exists iff the plan is not optimal.
pub fn has_negative_cycle(pi: &[Vec<f64>], cost: &[Vec<f64>], tol: f64) -> bool {
    let (m, n) = (cost.len(), cost[0].len());
    let mut edges = Vec::new();
    for i in 0..m {
        for j in 0..n {
            edges.push((i, m + j, cost[i][j]));
            if pi[i][j] > 1e-12 {
                edges.push((m + j, i, -cost[i][j]));
            }
        }
    }
    let mut dist = vec![0.0f64; m + n];
    for _ in 0..m + n {
        let mut changed = false;
        for &(a, b, c) in &edges {
            if dist[a] + c < dist[b] - tol {
                dist[b] = dist[a] + c;
                changed = true;
            }
        }
        if !changed {
            return false;
        }
    }
    true
}
