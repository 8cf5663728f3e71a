//! L-lengths, minimizing L-geodesics and the L-distance `Q`.
//!
//! Curves are parametrized by `σ = √τ`, in which the L-length becomes the
//! regular action
//!
//! ```text
//! ∫ ( 2σ²·S(γ, σ²) + ½·|dγ/dσ|² ) dσ .
//! ```
//!
//! The discrete action uses a uniform σ-grid, trapezoidal weights for the
//! potential term and, on each segment, the trapezoidal average of the metric
//! coefficient for the kinetic term. Minimization is gradient descent with
//! backtracking line search, preconditioned by the kinetic-energy Hessian
//! (a Sobolev gradient); on homogeneous models the first step is exact.

mod exp;
mod field;

pub use exp::{
    fd_derivative, jacobian_alpha, jacobian_alpha_with, l_exp, l_exp_rk4, l_exp_state, sigma_alpha_margins,
    volume_jacobian, AlphaMargin,
};
pub use field::{l_distance_field, LDistanceField};

use std::collections::HashMap;
use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{Geometry, LineSample, TangentVector};

#[derive(Clone, Debug, PartialEq)]
pub struct GeodesicOptions {
    /// Number of σ-samples `M` (at least 32).
    pub samples: usize,
    /// Termination threshold on the Euclidean norm of the action gradient.
    pub grad_tol: f64,
    pub max_iter: usize,
    /// Relative length gap below which two distinct minimizers tie.
    pub tie_tol: f64,
    /// Drives the perturbed multistart initialization.
    pub seed: u64,
}

impl Default for GeodesicOptions {
    fn default() -> Self {
        GeodesicOptions { samples: 64, grad_tol: 1e-10, max_iter: 10_000, tie_tol: 1e-7, seed: 7 }
    }
}

impl GeodesicOptions {
    pub fn with_samples(mut self, samples: usize) -> Self {
        self.samples = samples;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }
}

/// Positions of a curve on a uniform σ-grid. Coordinates are unwrapped (not
/// reduced modulo 2π) so that winding is preserved.
#[derive(Clone, Debug, PartialEq)]
pub struct DiscreteCurve {
    sigma_start: f64,
    sigma_end: f64,
    step: f64,
    positions: Vec<f64>,
}

impl DiscreteCurve {
    pub fn new(sigma_start: f64, sigma_end: f64, positions: Vec<f64>) -> Result<Self> {
        if positions.len() < 2 || !(sigma_end > sigma_start) || !(sigma_start >= 0.0) {
            return Err(Error::Config(format!(
                "curve needs >= 2 samples on an increasing sigma interval, got {} on [{sigma_start}, {sigma_end}]",
                positions.len()
            )));
        }
        let step = (sigma_end - sigma_start) / (positions.len() - 1) as f64;
        Ok(DiscreteCurve { sigma_start, sigma_end, step, positions })
    }

    /// Straight line in σ between two (unwrapped) coordinates.
    pub fn straight(sigma_start: f64, sigma_end: f64, from: f64, to: f64, samples: usize) -> Result<Self> {
        let m = samples.max(2);
        let positions =
            (0..m).map(|k| from + (to - from) * k as f64 / (m - 1) as f64).collect();
        DiscreteCurve::new(sigma_start, sigma_end, positions)
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn sigma(&self, k: usize) -> f64 {
        if k + 1 == self.positions.len() {
            self.sigma_end
        } else {
            self.sigma_start + self.step * k as f64
        }
    }

    pub fn tau(&self, k: usize) -> f64 {
        let s = self.sigma(k);
        s * s
    }

    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    pub fn start(&self) -> f64 {
        self.positions[0]
    }

    pub fn end(&self) -> f64 {
        *self.positions.last().unwrap()
    }

    /// Position at an arbitrary σ by cubic Hermite interpolation with
    /// finite-difference slopes.
    pub fn position_at_sigma(&self, sigma: f64) -> f64 {
        let m = self.positions.len();
        let u = ((sigma - self.sigma_start) / self.step).clamp(0.0, (m - 1) as f64);
        let k = (u.floor() as usize).min(m - 2);
        let t = u - k as f64;
        let p = &self.positions;
        let slope = |i: usize| -> f64 {
            if i == 0 {
                p[1] - p[0]
            } else if i == m - 1 {
                p[m - 1] - p[m - 2]
            } else {
                0.5 * (p[i + 1] - p[i - 1])
            }
        };
        let (m0, m1) = (slope(k), slope(k + 1));
        let t2 = t * t;
        let t3 = t2 * t;
        (2.0 * t3 - 3.0 * t2 + 1.0) * p[k]
            + (t3 - 2.0 * t2 + t) * m0
            + (-2.0 * t3 + 3.0 * t2) * p[k + 1]
            + (t3 - t2) * m1
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GeodesicResult {
    pub curve: DiscreteCurve,
    /// L-length of the winning curve; this is the value of `Q`.
    pub length: f64,
    /// Two distinct curves reached lengths within the tie tolerance.
    pub near_cut: bool,
    /// Best length among the other converged starts, if any.
    pub runner_up: Option<f64>,
    /// The competing minimizer when `near_cut` is set.
    pub tied_curve: Option<DiscreteCurve>,
    pub grad_norm: f64,
    pub iterations: usize,
    /// `X(τ1) = γ'(τ1)` and `X(τ2) = γ'(τ2)` along the mesh direction.
    pub start_velocity: TangentVector,
    pub end_velocity: TangentVector,
}

impl GeodesicResult {
    pub fn tau1(&self) -> f64 {
        self.curve.tau(0)
    }

    pub fn tau2(&self) -> f64 {
        self.curve.tau(self.curve.len() - 1)
    }

    /// Velocity `γ'(τ)` at every sample, from the discrete momenta.
    pub fn velocities(&self, geom: &Geometry) -> Vec<f64> {
        node_velocities(geom, &self.curve)
    }
}

/// Discrete L-length of a curve.
pub fn l_length(geom: &Geometry, curve: &DiscreteCurve) -> Result<f64> {
    geom.check_tau(curve.tau(0))?;
    geom.check_tau(curve.tau(curve.len() - 1))?;
    Ok(Action::new(geom, curve).value(&curve.positions))
}

/// Discrete action on a fixed σ-grid.
struct Action<'g> {
    geom: &'g Geometry,
    sigma: Vec<f64>,
    taus: Vec<f64>,
    step: f64,
    /// Line samples per σ-node, cached when the model is homogeneous.
    fixed: Option<Vec<LineSample>>,
}

impl<'g> Action<'g> {
    fn new(geom: &'g Geometry, curve: &DiscreteCurve) -> Self {
        let sigma: Vec<f64> = (0..curve.len()).map(|k| curve.sigma(k)).collect();
        let taus: Vec<f64> = sigma.iter().map(|s| s * s).collect();
        let fixed = geom
            .is_homogeneous()
            .then(|| taus.iter().map(|&t| geom.line_sample(0.0, t)).collect());
        Action { geom, sigma, taus, step: curve.step, fixed }
    }

    fn samples(&self, x: &[f64]) -> Vec<LineSample> {
        match &self.fixed {
            Some(v) => v.clone(),
            None => x.iter().zip(&self.taus).map(|(&p, &t)| self.geom.line_sample(p, t)).collect(),
        }
    }

    fn weight(&self, k: usize) -> f64 {
        if k == 0 || k + 1 == self.sigma.len() {
            0.5 * self.step
        } else {
            self.step
        }
    }

    fn value_with(&self, x: &[f64], ls: &[LineSample]) -> f64 {
        let h = self.step;
        let mut acc = 0.0;
        for k in 0..x.len() {
            acc += self.weight(k) * 2.0 * self.taus[k] * ls[k].trace;
        }
        for k in 0..x.len() - 1 {
            let gbar = 0.5 * (ls[k].metric + ls[k + 1].metric);
            let d = x[k + 1] - x[k];
            acc += 0.5 * gbar * d * d / h;
        }
        acc
    }

    fn value(&self, x: &[f64]) -> f64 {
        let ls = self.samples(x);
        self.value_with(x, &ls)
    }

    /// Gradient with respect to every sample (endpoints included).
    fn gradient_with(&self, x: &[f64], ls: &[LineSample], grad: &mut [f64]) {
        let h = self.step;
        let m = x.len();
        for k in 0..m {
            grad[k] = self.weight(k) * 2.0 * self.taus[k] * ls[k].trace_dx;
        }
        for k in 0..m - 1 {
            let gbar = 0.5 * (ls[k].metric + ls[k + 1].metric);
            let d = x[k + 1] - x[k];
            let flux = gbar * d / h;
            grad[k] += 0.25 * ls[k].metric_dx * d * d / h - flux;
            grad[k + 1] += 0.25 * ls[k + 1].metric_dx * d * d / h + flux;
        }
    }
}

/// Momentum leaving node `k` into segment `k` (left discrete Legendre
/// transform) and arriving at node `k + 1` from it (right transform).
fn segment_momenta(
    h: f64,
    sigma: (f64, f64),
    x: (f64, f64),
    ls: (&LineSample, &LineSample),
) -> (f64, f64) {
    let gbar = 0.5 * (ls.0.metric + ls.1.metric);
    let d = x.1 - x.0;
    let left = gbar * d / h - 0.25 * ls.0.metric_dx * d * d / h - h * sigma.0 * sigma.0 * ls.0.trace_dx;
    let right =
        gbar * d / h + 0.25 * ls.1.metric_dx * d * d / h + h * sigma.1 * sigma.1 * ls.1.trace_dx;
    (left, right)
}

fn node_velocities(geom: &Geometry, curve: &DiscreteCurve) -> Vec<f64> {
    let action = Action::new(geom, curve);
    let x = curve.positions();
    let ls = action.samples(x);
    let m = x.len();
    let h = curve.step;
    let mut p_left = vec![0.0; m];
    let mut p_right = vec![0.0; m];
    for k in 0..m - 1 {
        let (l, r) = segment_momenta(
            h,
            (action.sigma[k], action.sigma[k + 1]),
            (x[k], x[k + 1]),
            (&ls[k], &ls[k + 1]),
        );
        p_left[k] = l;
        p_right[k + 1] = r;
    }
    (0..m)
        .map(|k| {
            let p = if k == 0 {
                p_left[0]
            } else if k == m - 1 {
                p_right[m - 1]
            } else {
                0.5 * (p_left[k] + p_right[k])
            };
            // dγ/dσ = p / a,  γ'(τ) = (dγ/dσ) / (2σ)
            p / ls[k].metric / (2.0 * action.sigma[k])
        })
        .collect()
}

/// Outcome of one descent run.
struct Descent {
    positions: Vec<f64>,
    value: f64,
    grad_norm: f64,
    iterations: usize,
    converged: bool,
}

fn descend(action: &Action, mut x: Vec<f64>, opts: &GeodesicOptions) -> Descent {
    let m = x.len();
    let h = action.step;
    let mut grad = vec![0.0; m];
    let mut trial_grad = vec![0.0; m];
    let mut ls = action.samples(&x);
    let mut value = action.value_with(&x, &ls);
    let mut iterations = 0;
    let mut grad_norm;
    loop {
        action.gradient_with(&x, &ls, &mut grad);
        grad_norm = grad[1..m - 1].iter().map(|g| g * g).sum::<f64>().sqrt();
        if grad_norm < opts.grad_tol.max(roundoff_floor(action, &x, &ls)) || m <= 2 {
            return Descent { positions: x, value, grad_norm, iterations, converged: true };
        }
        if iterations >= opts.max_iter {
            return Descent { positions: x, value, grad_norm, iterations, converged: false };
        }
        iterations += 1;

        let rhs: Vec<f64> = grad[1..m - 1].iter().map(|g| -g).collect();
        let dir = match action.fixed {
            None => {
                let (d, o) = full_hessian(action, &x);
                solve_spd_tridiagonal(&o, &d, &rhs)
            },
            Some(_) => None,
        }
        .unwrap_or_else(|| {
            // Kinetic Hessian: tridiagonal, symmetric positive definite.
            let gbar: Vec<f64> = (0..m - 1).map(|k| 0.5 * (ls[k].metric + ls[k + 1].metric)).collect();
            let diag: Vec<f64> = (1..m - 1).map(|k| (gbar[k - 1] + gbar[k]) / h).collect();
            let off: Vec<f64> = (1..m - 2).map(|k| -gbar[k] / h).collect();
            solve_tridiagonal(&off, &diag, &off, &rhs)
        });
        let n = m - 2;
        let slope: f64 = dir.iter().zip(&grad[1..m - 1]).map(|(d, g)| d * g).sum();

        let mut t = 1.0;
        let mut accepted = false;
        let mut trial = x.clone();
        while t > 1e-12 {
            for k in 0..n {
                trial[k + 1] = x[k + 1] + t * dir[k];
            }
            let tls = action.samples(&trial);
            let tv = action.value_with(&trial, &tls);
            let sufficient = tv <= value + 1e-4 * t * slope && tv < value;
            // Below round-off the action cannot rank steps; the gradient can.
            let flat = (tv - value).abs() <= 64.0 * f64::EPSILON * value.abs().max(1.0);
            let improves = flat && {
                action.gradient_with(&trial, &tls, &mut trial_grad);
                trial_grad[1..m - 1].iter().map(|g| g * g).sum::<f64>().sqrt() < grad_norm
            };
            if sufficient || improves {
                x.copy_from_slice(&trial);
                ls = tls;
                value = tv;
                accepted = true;
                break;
            }
            if flat {
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            // Round-off floor: no representable decrease remains.
            action.gradient_with(&x, &ls, &mut grad);
            grad_norm = grad[1..m - 1].iter().map(|g| g * g).sum::<f64>().sqrt();
            let converged = grad_norm < opts.grad_tol.max(roundoff_floor(action, &x, &ls));
            return Descent { positions: x, value, grad_norm, iterations, converged };
        }
    }
}

/// Size of the gradient noise from rounding the positions: the flux terms
/// divide position differences by the σ-step, so on fine grids the exact
/// minimizer can have a gradient norm above the absolute tolerance.
fn roundoff_floor(action: &Action, x: &[f64], ls: &[LineSample]) -> f64 {
    let m = x.len();
    let mut acc = 0.0;
    for k in 1..m - 1 {
        let left = 0.5 * (ls[k - 1].metric + ls[k].metric) * (x[k - 1].abs() + x[k].abs());
        let right = 0.5 * (ls[k].metric + ls[k + 1].metric) * (x[k].abs() + x[k + 1].abs());
        let e = (left + right) / action.step;
        acc += e * e;
    }
    8.0 * f64::EPSILON * acc.sqrt()
}

/// Interior Hessian of the action by central differences of the gradient.
/// Nodes three apart do not interact, so three colored perturbations
/// recover the whole tridiagonal.
fn full_hessian(action: &Action, x: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let m = x.len();
    let n = m - 2;
    let scale = x.iter().fold(1.0f64, |a, v| a.max(v.abs()));
    let delta = 1e-5 * scale;
    let mut diag = vec![0.0; n];
    let mut lower = vec![0.0; n.saturating_sub(1)];
    let mut upper = vec![0.0; n.saturating_sub(1)];
    let mut gp = vec![0.0; m];
    let mut gm = vec![0.0; m];
    for color in 0..3 {
        let mut xp = x.to_vec();
        let mut xm = x.to_vec();
        for k in (1 + color..m - 1).step_by(3) {
            xp[k] += delta;
            xm[k] -= delta;
        }
        action.gradient_with(&xp, &action.samples(&xp), &mut gp);
        action.gradient_with(&xm, &action.samples(&xm), &mut gm);
        for k in (1 + color..m - 1).step_by(3) {
            let col = |j: usize| (gp[j] - gm[j]) / (2.0 * delta);
            diag[k - 1] = col(k);
            if k >= 2 {
                upper[k - 2] = col(k - 1);
            }
            if k + 1 < m - 1 {
                lower[k - 1] = col(k + 1);
            }
        }
    }
    let off: Vec<f64> = lower.iter().zip(&upper).map(|(a, b)| 0.5 * (a + b)).collect();
    (diag, off)
}

/// Symmetric tridiagonal solve that returns `None` unless every pivot is
/// positive (the matrix is positive definite).
fn solve_spd_tridiagonal(off: &[f64], diag: &[f64], rhs: &[f64]) -> Option<Vec<f64>> {
    let n = diag.len();
    let mut d = diag[0];
    if !(d > 0.0) {
        return None;
    }
    for i in 1..n {
        d = diag[i] - off[i - 1] * off[i - 1] / d;
        if !(d > 0.0) {
            return None;
        }
    }
    let x = solve_tridiagonal(off, diag, off, rhs);
    x.iter().all(|v| v.is_finite()).then_some(x)
}

/// Thomas algorithm; `lower[i]` couples row `i + 1` to row `i`.
pub(crate) fn solve_tridiagonal(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &[f64]) -> Vec<f64> {
    let n = diag.len();
    if n == 0 {
        return Vec::new();
    }
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    c[0] = if n > 1 { upper[0] / diag[0] } else { 0.0 };
    d[0] = rhs[0] / diag[0];
    for i in 1..n {
        let denom = diag[i] - lower[i - 1] * c[i - 1];
        c[i] = if i + 1 < n { upper[i] / denom } else { 0.0 };
        d[i] = (rhs[i] - lower[i - 1] * d[i - 1]) / denom;
    }
    let mut x = vec![0.0; n];
    x[n - 1] = d[n - 1];
    for i in (0..n - 1).rev() {
        x[i] = d[i] - c[i] * x[i + 1];
    }
    x
}

fn mix_seed(seed: u64, parts: &[f64]) -> u64 {
    // splitmix64 over the bit patterns
    let mut z = seed ^ 0x9E37_79B9_7F4A_7C15;
    for p in parts {
        z ^= p.to_bits();
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^= z >> 31;
    }
    z
}

/// L-distance `Q(x, τ1; y, τ2)` by multistart minimization of the discrete
/// action. Starts: the short way around, the long way around, and the short
/// way with a seeded midpoint perturbation.
pub fn q_distance(
    geom: &Geometry,
    x: f64,
    tau1: f64,
    y: f64,
    tau2: f64,
    opts: &GeodesicOptions,
) -> Result<GeodesicResult> {
    if !(tau1 < tau2) {
        return Err(Error::Domain(format!("need tau1 < tau2, got {tau1} >= {tau2}")));
    }
    geom.check_tau(tau1)?;
    geom.check_tau(tau2)?;
    if opts.samples < 32 {
        return Err(Error::Config(format!("at least 32 sigma samples required, got {}", opts.samples)));
    }
    let (s1, s2) = (tau1.sqrt(), tau2.sqrt());
    let m = opts.samples;

    let mut delta = (y - x).rem_euclid(2.0 * PI);
    if delta > PI {
        delta -= 2.0 * PI;
    }
    let short = x + delta;
    let long = if delta >= 0.0 { short - 2.0 * PI } else { short + 2.0 * PI };

    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(opts.seed, &[x, tau1, y, tau2]));
    let amplitude = rng.gen_range(-0.5..0.5);
    let mut perturbed = DiscreteCurve::straight(s1, s2, x, short, m)?;
    for k in 1..m - 1 {
        let t = k as f64 / (m - 1) as f64;
        perturbed.positions[k] += amplitude * (PI * t).sin();
    }
    let starts = [
        DiscreteCurve::straight(s1, s2, x, short, m)?,
        DiscreteCurve::straight(s1, s2, x, long, m)?,
        perturbed,
    ];

    let action = Action::new(geom, &starts[0]);
    let runs: Vec<Descent> =
        starts.iter().map(|c| descend(&action, c.positions.clone(), opts)).collect();

    let converged: Vec<&Descent> = runs.iter().filter(|r| r.converged).collect();
    let best = converged
        .iter()
        .copied()
        .min_by(|a, b| a.value.total_cmp(&b.value))
        .ok_or_else(|| {
            Error::NoConvergence(format!(
                "no start reached the gradient tolerance within {} iterations for ({x}, {tau1}) -> ({y}, {tau2})",
                opts.max_iter
            ))
        })?;

    let scale = best.value.abs().max(1.0);
    let mut runner_up: Option<f64> = None;
    let mut near_cut = false;
    let mut tied: Option<&Descent> = None;
    for r in &converged {
        let distinct = r
            .positions
            .iter()
            .zip(&best.positions)
            .any(|(a, b)| (a - b).abs() > 1e-3);
        if !distinct {
            continue;
        }
        runner_up = Some(runner_up.map_or(r.value, |v: f64| v.min(r.value)));
        if (r.value - best.value).abs() < opts.tie_tol * scale {
            near_cut = true;
            tied.get_or_insert(r);
        }
    }

    let curve = DiscreteCurve { positions: best.positions.clone(), ..starts[0].clone() };
    let vel = node_velocities(geom, &curve);
    Ok(GeodesicResult {
        length: best.value,
        near_cut,
        runner_up,
        tied_curve: tied.map(|r| DiscreteCurve { positions: r.positions.clone(), ..curve.clone() }),
        grad_norm: best.grad_norm,
        iterations: best.iterations,
        start_velocity: TangentVector::along(vel[0]),
        end_velocity: TangentVector::along(*vel.last().unwrap()),
        curve,
    })
}

/// First variations of `Q` at the endpoints of a minimizing geodesic.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QPartials {
    pub d_tau1: f64,
    pub d_tau2: f64,
    /// Gradient in the first point, with respect to `g(τ1)`.
    pub grad1: TangentVector,
    /// Gradient in the second point, with respect to `g(τ2)`.
    pub grad2: TangentVector,
}

/// `∂Q/∂τ1 = √τ1(|X(τ1)|² − S)`, `∇1Q = −2√τ1·X(τ1)`,
/// `∂Q/∂τ2 = √τ2(S − |X(τ2)|²)`, `∇2Q = 2√τ2·X(τ2)`.
pub fn q_partials(geom: &Geometry, result: &GeodesicResult) -> Result<QPartials> {
    if result.near_cut {
        return Err(Error::NearCutLocus(result.length, result.runner_up.unwrap_or(f64::NAN)));
    }
    let (t1, t2) = (result.tau1(), result.tau2());
    let a = geom.line_sample(result.curve.start(), t1);
    let b = geom.line_sample(result.curve.end(), t2);
    let x1 = result.start_velocity.components[0];
    let x2 = result.end_velocity.components[0];
    Ok(QPartials {
        d_tau1: t1.sqrt() * (a.metric * x1 * x1 - a.trace),
        d_tau2: t2.sqrt() * (b.trace - b.metric * x2 * x2),
        grad1: TangentVector::along(-2.0 * t1.sqrt() * x1),
        grad2: TangentVector::along(2.0 * t2.sqrt() * x2),
    })
}

/// `H(S, X)` at a continuous position with `X` along the mesh direction.
pub fn h_along(ls: &LineSample, tau: f64, x: f64) -> f64 {
    -ls.dtau_trace - ls.trace / tau - 2.0 * ls.trace_dx * x + 2.0 * ls.s_along * x * x
}

/// `𝒦 = ∫ τ^{3/2} H(S, X(τ)) dτ` along the curve, by the trapezoidal rule in
/// σ (`dτ = 2σ dσ`).
pub fn kappa_integral(geom: &Geometry, result: &GeodesicResult) -> Result<f64> {
    let c = &result.curve;
    geom.check_tau(c.tau(0))?;
    geom.check_tau(c.tau(c.len() - 1))?;
    let vel = node_velocities(geom, c);
    let m = c.len();
    let mut acc = 0.0;
    for k in 0..m {
        let s = c.sigma(k);
        let tau = s * s;
        let ls = geom.line_sample(c.positions[k], tau);
        let f = 2.0 * s.powi(4) * h_along(&ls, tau, vel[k]);
        let w = if k == 0 || k == m - 1 { 0.5 } else { 1.0 };
        acc += w * f;
    }
    Ok(acc * c.step)
}

/// One `Q` evaluation request.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QQuery {
    pub x: f64,
    pub tau1: f64,
    pub y: f64,
    pub tau2: f64,
}

/// Evaluates many `Q` values in parallel. On homogeneous models `Q` depends
/// only on the coordinate distance, so equal distances are solved once.
pub fn q_batch(geom: &Geometry, queries: &[QQuery], opts: &GeodesicOptions) -> Vec<Result<f64>> {
    if !geom.is_homogeneous() {
        return queries
            .par_iter()
            .map(|q| q_distance(geom, q.x, q.tau1, q.y, q.tau2, opts).map(|r| r.length))
            .collect();
    }
    let key = |q: &QQuery| {
        let d = geom.coord_distance(q.x, q.y);
        (q.tau1.to_bits(), q.tau2.to_bits(), (d * 1e12).round() as i64)
    };
    let mut unique: Vec<(u64, u64, i64)> = queries.iter().map(key).collect();
    unique.sort_unstable();
    unique.dedup();
    let solved: Vec<Result<f64>> = unique
        .par_iter()
        .map(|&(t1, t2, d)| {
            let dist = d as f64 * 1e-12;
            q_distance(geom, 0.0, f64::from_bits(t1), dist, f64::from_bits(t2), opts)
                .map(|r| r.length)
        })
        .collect();
    let table: HashMap<(u64, u64, i64), &Result<f64>> = unique.iter().copied().zip(&solved).collect();
    queries.iter().map(|q| table[&key(q)].clone()).collect()
}
