//! The L-exponential map, its volume Jacobian and the `α` profile.
//!
//! `l_exp` marches the discrete Euler–Lagrange equations of the same σ-action
//! that `q_distance` minimizes (a variational integrator), so a minimizer
//! returned by `q_distance` is reproduced exactly from its initial momentum.
//! A classical RK4 integration of the continuous equations serves as an
//! independent check.

use super::{h_along, GeodesicOptions};
use crate::error::{Error, Result};
use crate::geometry::{Geometry, TangentVector};

fn initial_component(geom: &Geometry, z: &TangentVector) -> Result<f64> {
    if geom.dim() == 2 && z.components[1] != 0.0 {
        return Err(Error::Config(
            "initial velocity must point along the reference great circle".into(),
        ));
    }
    Ok(z.components[0])
}

fn check_times(geom: &Geometry, tau1: f64, tau2: f64) -> Result<()> {
    geom.check_tau(tau1)?;
    geom.check_tau(tau2)?;
    if tau2 < tau1 {
        return Err(Error::Domain(format!("need tau1 <= tau2, got {tau1} > {tau2}")));
    }
    Ok(())
}

/// Marches from `(x, τ1)` with `√τ1·γ'(τ1) = z` to `τ2` on `samples` σ-nodes.
/// Returns the end position (unwrapped) and `γ'(τ2)`.
fn march(geom: &Geometry, x: f64, tau1: f64, z: f64, tau2: f64, samples: usize) -> Result<(f64, f64)> {
    let (s1, s2) = (tau1.sqrt(), tau2.sqrt());
    let h = (s2 - s1) / (samples - 1) as f64;
    let mut pos = x;
    let mut cur = geom.line_sample(x, tau1);
    // dγ/dσ = 2σ·γ'(τ) = 2z at σ1
    let mut p = cur.metric * 2.0 * z;
    for k in 0..samples - 1 {
        let sk = s1 + h * k as f64;
        let sn = if k + 2 == samples { s2 } else { s1 + h * (k + 1) as f64 };
        let force = h * sk * sk * cur.trace_dx;
        let mut d = h * (p + force) / cur.metric;
        let mut converged = false;
        for _ in 0..60 {
            let next = geom.line_sample(pos + d, sn * sn);
            let gbar = 0.5 * (cur.metric + next.metric);
            let f = gbar * d / h - 0.25 * cur.metric_dx * d * d / h - force - p;
            let fp = (gbar + 0.5 * (next.metric_dx - cur.metric_dx) * d) / h;
            let step = f / fp;
            if !step.is_finite() {
                break;
            }
            d -= step;
            if step.abs() <= 1e-15 * (1.0 + d.abs()) {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(Error::NoConvergence(format!(
                "Euler-Lagrange step {k} from ({x}, {tau1}) did not converge"
            )));
        }
        let next = geom.line_sample(pos + d, sn * sn);
        let gbar = 0.5 * (cur.metric + next.metric);
        p = gbar * d / h + 0.25 * next.metric_dx * d * d / h + h * sn * sn * next.trace_dx;
        pos += d;
        cur = next;
    }
    Ok((pos, p / cur.metric / (2.0 * s2)))
}

/// `γ(τ2)` for the L-geodesic leaving `x` at `τ1` with `√τ1·γ'(τ1) = z`.
///
/// The coordinate is not reduced modulo 2π, so winding is visible to the
/// caller; use [`Geometry::wrap`] for a mesh position.
pub fn l_exp(
    geom: &Geometry,
    x: f64,
    tau1: f64,
    z: &TangentVector,
    tau2: f64,
    opts: &GeodesicOptions,
) -> Result<f64> {
    l_exp_state(geom, x, tau1, z, tau2, opts).map(|(p, _)| p)
}

/// End position and end velocity `γ'(τ2)` of the L-geodesic.
pub fn l_exp_state(
    geom: &Geometry,
    x: f64,
    tau1: f64,
    z: &TangentVector,
    tau2: f64,
    opts: &GeodesicOptions,
) -> Result<(f64, f64)> {
    check_times(geom, tau1, tau2)?;
    let z = initial_component(geom, z)?;
    if tau2 == tau1 {
        return Ok((x, z / tau1.sqrt()));
    }
    march(geom, x, tau1, z, tau2, opts.samples.max(2))
}

/// RK4 on `dγ/dσ = p/a`, `dp/dσ = 2σ²∂ₓS + ½∂ₓa·(p/a)²`.
pub fn l_exp_rk4(
    geom: &Geometry,
    x: f64,
    tau1: f64,
    z: &TangentVector,
    tau2: f64,
    steps: usize,
) -> Result<f64> {
    check_times(geom, tau1, tau2)?;
    let z = initial_component(geom, z)?;
    if tau2 == tau1 {
        return Ok(x);
    }
    let rhs = |sigma: f64, g: f64, p: f64| -> (f64, f64) {
        let ls = geom.line_sample(g, sigma * sigma);
        let v = p / ls.metric;
        (v, 2.0 * sigma * sigma * ls.trace_dx + 0.5 * ls.metric_dx * v * v)
    };
    let (s1, s2) = (tau1.sqrt(), tau2.sqrt());
    let h = (s2 - s1) / steps as f64;
    let mut g = x;
    let mut p = geom.line_sample(x, tau1).metric * 2.0 * z;
    for k in 0..steps {
        let s = s1 + h * k as f64;
        let (a1, b1) = rhs(s, g, p);
        let (a2, b2) = rhs(s + 0.5 * h, g + 0.5 * h * a1, p + 0.5 * h * b1);
        let (a3, b3) = rhs(s + 0.5 * h, g + 0.5 * h * a2, p + 0.5 * h * b2);
        let (a4, b4) = rhs(s + h, g + h * a3, p + h * b3);
        g += h / 6.0 * (a1 + 2.0 * a2 + 2.0 * a3 + a4);
        p += h / 6.0 * (b1 + 2.0 * b2 + 2.0 * b3 + b4);
    }
    Ok(g)
}

/// Central difference of `f` at `x`, halving the step from `1e-3` until two
/// successive estimates agree to one part in `1e4`.
pub fn fd_derivative<F>(f: F, x: f64) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
{
    let central = |h: f64| -> Result<f64> { Ok((f(x + h)? - f(x - h)?) / (2.0 * h)) };
    let mut h = 1e-3;
    let mut prev = central(h)?;
    for _ in 0..16 {
        h *= 0.5;
        let next = central(h)?;
        if (next - prev).abs() <= 1e-4 * next.abs().max(1e-12) {
            return Ok(next);
        }
        prev = next;
    }
    Err(Error::NoConvergence(format!("finite-difference derivative at {x} is not stable")))
}

/// Volume Jacobian of `F_τ(u) = l_exp(u, τ1, Z(u), τ)` at `x`, relating
/// `dvol_{g(τ)}` at `F_τ(x)` to `dvol_{g(τ1)}` at `x`. On spheres the zonal
/// map is extended by rotation about the polar axis.
pub fn volume_jacobian(
    geom: &Geometry,
    x: f64,
    tau1: f64,
    field: &dyn Fn(f64) -> f64,
    tau: f64,
    opts: &GeodesicOptions,
) -> Result<f64> {
    if tau == tau1 {
        return Ok(1.0);
    }
    let map = |u: f64| l_exp(geom, u, tau1, &TangentVector::along(field(u)), tau, opts);
    let fx = map(x)?;
    let slope = fd_derivative(map, x)?;
    if !(slope > 0.0) {
        return Err(Error::ConjugatePoint(format!("dF/dx = {slope:e} at x = {x}, tau = {tau}")));
    }
    let a0 = geom.line_sample(x, tau1).metric;
    let a1 = geom.line_sample(fx, tau).metric;
    if geom.dim() == 1 {
        Ok(slope * (a1 / a0).sqrt())
    } else {
        let ratio = fx.sin() / x.sin();
        if !(ratio > 0.0) {
            return Err(Error::ConjugatePoint(format!("trajectory from {x} crossed a pole by tau = {tau}")));
        }
        Ok(slope * ratio * a1 / a0)
    }
}

/// `α(τ) = −ln J(τ)` on `tau_grid` for a spatially constant initial velocity.
pub fn jacobian_alpha(
    geom: &Geometry,
    x: f64,
    tau1: f64,
    z: &TangentVector,
    tau_grid: &[f64],
    opts: &GeodesicOptions,
) -> Result<Vec<f64>> {
    let z = initial_component(geom, z)?;
    jacobian_alpha_with(geom, x, tau1, &move |_| z, tau_grid, opts)
}

/// As [`jacobian_alpha`] with a position-dependent initial velocity field.
pub fn jacobian_alpha_with(
    geom: &Geometry,
    x: f64,
    tau1: f64,
    field: &dyn Fn(f64) -> f64,
    tau_grid: &[f64],
    opts: &GeodesicOptions,
) -> Result<Vec<f64>> {
    tau_grid
        .iter()
        .map(|&tau| {
            check_times(geom, tau1, tau)?;
            volume_jacobian(geom, x, tau1, field, tau, opts).map(|j| -j.ln())
        })
        .collect()
}

/// One interior point of the `σα` convexity check.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AlphaMargin {
    pub tau: f64,
    /// `4·d/dτ(τ^{3/2}·dα/dτ)` by finite differences on the grid.
    pub lhs: f64,
    /// `2τ^{3/2}(H + D) − n/√τ` along the trajectory.
    pub rhs: f64,
}

impl AlphaMargin {
    pub fn margin(&self) -> f64 {
        self.lhs - self.rhs
    }
}

/// Evaluates both sides of `4·d/dτ(τ^{3/2}α') ≥ 2τ^{3/2}(H + D) − n/√τ` at
/// the interior points of `tau_grid` (increasing, starting above `τ1`).
pub fn sigma_alpha_margins(
    geom: &Geometry,
    x: f64,
    tau1: f64,
    z: &TangentVector,
    tau_grid: &[f64],
    opts: &GeodesicOptions,
) -> Result<Vec<AlphaMargin>> {
    if tau_grid.len() < 3 || tau_grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Config("need an increasing grid of at least three times".into()));
    }
    let alpha = jacobian_alpha(geom, x, tau1, z, tau_grid, opts)?;
    let flux: Vec<(f64, f64)> = tau_grid
        .windows(2)
        .zip(alpha.windows(2))
        .map(|(t, a)| {
            let mid = 0.5 * (t[0] + t[1]);
            (mid, mid.powf(1.5) * (a[1] - a[0]) / (t[1] - t[0]))
        })
        .collect();
    let n = geom.dim() as f64;
    (1..tau_grid.len() - 1)
        .map(|i| {
            let tau = tau_grid[i];
            let lhs = 4.0 * (flux[i].1 - flux[i - 1].1) / (flux[i].0 - flux[i - 1].0);
            let (pos, vel) = l_exp_state(geom, x, tau1, z, tau, opts)?;
            let ls = geom.line_sample(pos, tau);
            let h = h_along(&ls, tau, vel);
            let d = geom.d_quantity(geom.nearest_node(pos), tau, &TangentVector::along(vel))?;
            let rhs = 2.0 * tau.powf(1.5) * (h + d) - n / tau.sqrt();
            Ok(AlphaMargin { tau, lhs, rhs })
        })
        .collect()
}
