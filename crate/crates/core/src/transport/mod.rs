//! Discrete L-optimal transport between probability measures at two times.
//!
//! Costs are `Q(x, τ1; y, τ2)`; the exact solver is a transportation simplex
//! with a verified dual certificate, and the entropic solver is log-domain
//! Sinkhorn rounded onto the feasible polytope. Costs may be negative.

mod simplex;
mod sinkhorn;

use rayon::prelude::*;

use crate::diffusion::DiffusionPath;
use crate::error::{Error, Result};
use crate::geometry::{periodic_cubic, Geometry};
use crate::io::fmt_g17;
use crate::lgeodesic::{l_exp, q_batch, volume_jacobian, GeodesicOptions, QQuery};

/// Row-major cost matrix.
pub type CostMatrix = Vec<Vec<f64>>;

const MASS_TOL: f64 = 1e-12;
const CERTIFICATE_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub struct DiscreteMeasure {
    /// Support coordinates on the mesh circle.
    pub points: Vec<f64>,
    pub weights: Vec<f64>,
    pub tau: f64,
    /// Density with respect to `μ(τ)` when the measure lives on mesh nodes.
    pub density: Option<Vec<f64>>,
}

impl DiscreteMeasure {
    pub fn new(points: Vec<f64>, weights: Vec<f64>, tau: f64) -> Result<Self> {
        if points.len() != weights.len() || points.is_empty() {
            return Err(Error::Config(format!(
                "{} support points but {} weights",
                points.len(),
                weights.len()
            )));
        }
        if let Some(i) = weights.iter().position(|w| !(*w >= 0.0) || !w.is_finite()) {
            return Err(Error::Config(format!("weight {i} is {} (must be finite, >= 0)", weights[i])));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > MASS_TOL {
            return Err(Error::Config(format!("weights sum to {total}, not 1")));
        }
        Ok(DiscreteMeasure { points, weights, tau, density: None })
    }

    pub fn dirac(point: f64, tau: f64) -> Self {
        DiscreteMeasure { points: vec![point], weights: vec![1.0], tau, density: None }
    }

    /// Node-supported measure with weights `u_i·w_i(τ)`. The weights are
    /// normalized to unit total so that round-off in `u` does not make the
    /// transport problem infeasible.
    pub fn from_density(geom: &Geometry, u: &[f64], tau: f64) -> Result<Self> {
        let w = geom.volume_weights(tau)?;
        if u.len() != w.len() {
            return Err(Error::Config(format!("density has {} values, mesh has {}", u.len(), w.len())));
        }
        let raw: Vec<f64> = u.iter().zip(&w.values).map(|(u, w)| u * w).collect();
        let total: f64 = raw.iter().sum();
        if !(total > 0.0) {
            return Err(Error::Config("density has no mass".into()));
        }
        let weights: Vec<f64> = raw.iter().map(|m| m / total).collect();
        let density = weights.iter().zip(&w.values).map(|(m, w)| m / w).collect();
        let mut m = DiscreteMeasure::new(geom.coords().to_vec(), weights, tau)?;
        m.density = Some(density);
        Ok(m)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SolverMode {
    Exact,
    Entropic(f64),
}

impl std::fmt::Display for SolverMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SolverMode::Exact => write!(f, "exact"),
            SolverMode::Entropic(e) => write!(f, "entropic(eps={e})"),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TransportPlan {
    pub pi: Vec<Vec<f64>>,
    pub cost_matrix: CostMatrix,
    pub total_cost: f64,
    pub mode: SolverMode,
    /// Dual potentials of the exact solver.
    pub duals: Option<(Vec<f64>, Vec<f64>)>,
    /// Simplex pivots or Sinkhorn sweeps.
    pub iterations: usize,
    /// Row-marginal error of the unrounded Sinkhorn iterate (0 for exact).
    pub sinkhorn_error: f64,
}

impl TransportPlan {
    pub fn row_marginal(&self) -> Vec<f64> {
        self.pi.iter().map(|r| r.iter().sum()).collect()
    }

    pub fn col_marginal(&self) -> Vec<f64> {
        let n = self.pi.first().map_or(0, Vec::len);
        (0..n).map(|j| self.pi.iter().map(|r| r[j]).sum()).collect()
    }

    /// Largest violation of dual feasibility or complementary slackness.
    pub fn certificate_violation(&self) -> Option<f64> {
        let (u, v) = self.duals.as_ref()?;
        let mut worst = 0.0f64;
        for (i, row) in self.cost_matrix.iter().enumerate() {
            for (j, &c) in row.iter().enumerate() {
                let red = c - u[i] - v[j];
                worst = worst.max(-red);
                if self.pi[i][j] > 0.0 {
                    worst = worst.max(red.abs());
                }
            }
        }
        Some(worst)
    }

    /// CSV `i,j,pi_ij,cost_ij` over the nonzero entries, preceded by a
    /// `#` summary line with the total cost and solver mode.
    pub fn to_csv(&self) -> String {
        let mut out = format!("# total_cost={} mode={}\ni,j,pi_ij,cost_ij\n", fmt_g17(self.total_cost), self.mode);
        for (i, row) in self.pi.iter().enumerate() {
            for (j, &p) in row.iter().enumerate() {
                if p > 0.0 {
                    out.push_str(&format!("{i},{j},{},{}\n", fmt_g17(p), fmt_g17(self.cost_matrix[i][j])));
                }
            }
        }
        out
    }
}

/// `Q(x_i, τ1; y_j, τ2)` for all support pairs, computed in parallel.
pub fn cost_matrix(
    geom: &Geometry,
    supp1: &[f64],
    tau1: f64,
    supp2: &[f64],
    tau2: f64,
    opts: &GeodesicOptions,
) -> Result<CostMatrix> {
    if !(tau1 < tau2) {
        return Err(Error::Domain(format!("need tau1 < tau2, got {tau1} >= {tau2}")));
    }
    geom.check_tau(tau1)?;
    geom.check_tau(tau2)?;
    let queries: Vec<QQuery> = supp1
        .iter()
        .flat_map(|&x| supp2.iter().map(move |&y| QQuery { x, tau1, y, tau2 }))
        .collect();
    let values = q_batch(geom, &queries, opts);
    let n = supp2.len();
    let mut out = vec![vec![0.0; n]; supp1.len()];
    for (k, v) in values.into_iter().enumerate() {
        let (i, j) = (k / n, k % n);
        out[i][j] = v.map_err(|e| match e {
            Error::NoConvergence(msg) => Error::NoConvergence(format!("cost entry ({i}, {j}): {msg}")),
            other => other,
        })?;
    }
    Ok(out)
}

/// Optimal coupling of `mu` and `nu` for `cost`.
pub fn ot_solve(mu: &DiscreteMeasure, nu: &DiscreteMeasure, cost: &CostMatrix, mode: SolverMode) -> Result<TransportPlan> {
    let (m, n) = (mu.len(), nu.len());
    if cost.len() != m || cost.iter().any(|r| r.len() != n) {
        return Err(Error::Config(format!("cost matrix shape does not match {m} x {n}")));
    }
    for (i, row) in cost.iter().enumerate() {
        if let Some(j) = row.iter().position(|c| !c.is_finite()) {
            return Err(Error::NonFinite(i, j));
        }
    }
    let (sa, sb): (f64, f64) = (mu.weights.iter().sum(), nu.weights.iter().sum());
    if (sa - sb).abs() > 1e-9 {
        return Err(Error::Infeasible(format!("total masses differ: {sa} vs {sb}")));
    }
    if let SolverMode::Entropic(eps) = mode {
        if !(eps > 0.0) {
            return Err(Error::Config(format!("entropic epsilon must be positive, got {eps}")));
        }
    }

    // Zero-weight atoms carry no flow; solve on the active sub-problem.
    let rows: Vec<usize> = (0..m).filter(|&i| mu.weights[i] > 0.0).collect();
    let cols: Vec<usize> = (0..n).filter(|&j| nu.weights[j] > 0.0).collect();
    let a: Vec<f64> = rows.iter().map(|&i| mu.weights[i]).collect();
    let b: Vec<f64> = cols.iter().map(|&j| nu.weights[j]).collect();
    let sub: CostMatrix = rows.iter().map(|&i| cols.iter().map(|&j| cost[i][j]).collect()).collect();

    let mut pi = vec![vec![0.0; n]; m];
    let scatter = |pi: &mut Vec<Vec<f64>>, flow: &[Vec<f64>]| {
        for (r, &i) in rows.iter().enumerate() {
            for (c, &j) in cols.iter().enumerate() {
                pi[i][j] = flow[r][c];
            }
        }
    };
    let plan = match mode {
        SolverMode::Exact => {
            let sol = simplex::solve(&a, &b, &sub)?;
            scatter(&mut pi, &sol.flow);
            let mut u = vec![f64::NAN; m];
            let mut v = vec![f64::NAN; n];
            for (r, &i) in rows.iter().enumerate() {
                u[i] = sol.u[r];
            }
            for (c, &j) in cols.iter().enumerate() {
                v[j] = sol.v[c];
            }
            for i in 0..m {
                if u[i].is_nan() {
                    u[i] = cols.iter().map(|&j| cost[i][j] - v[j]).fold(f64::INFINITY, f64::min);
                }
            }
            for j in 0..n {
                if v[j].is_nan() {
                    v[j] = (0..m).map(|i| cost[i][j] - u[i]).fold(f64::INFINITY, f64::min);
                }
            }
            TransportPlan {
                total_cost: 0.0,
                pi,
                cost_matrix: cost.clone(),
                mode,
                duals: Some((u, v)),
                iterations: sol.pivots,
                sinkhorn_error: 0.0,
            }
        }
        SolverMode::Entropic(eps) => {
            let sol = sinkhorn::solve(&a, &b, &sub, eps);
            scatter(&mut pi, &sol.plan);
            TransportPlan {
                total_cost: 0.0,
                pi,
                cost_matrix: cost.clone(),
                mode,
                duals: None,
                iterations: sol.iterations,
                sinkhorn_error: sol.marginal_error,
            }
        }
    };
    let total_cost = plan
        .pi
        .iter()
        .flatten()
        .zip(cost.iter().flatten())
        .map(|(p, c)| p * c)
        .sum();
    let plan = TransportPlan { total_cost, ..plan };
    if let Some(gap) = plan.certificate_violation() {
        let scale = cost.iter().flatten().fold(1.0f64, |s, c| s.max(c.abs()));
        if gap > CERTIFICATE_TOL * scale {
            return Err(Error::NoConvergence(format!("optimality certificate violated by {gap:e}")));
        }
    }
    Ok(plan)
}

/// Optimal plan between two measures carrying their own times.
pub fn wasserstein_plan(
    geom: &Geometry,
    nu1: &DiscreteMeasure,
    nu2: &DiscreteMeasure,
    mode: SolverMode,
    opts: &GeodesicOptions,
) -> Result<TransportPlan> {
    let cost = cost_matrix(geom, &nu1.points, nu1.tau, &nu2.points, nu2.tau, opts)?;
    ot_solve(nu1, nu2, &cost, mode)
}

/// `V(ν1, τ1; ν2, τ2)`.
pub fn wasserstein_v(
    geom: &Geometry,
    nu1: &DiscreteMeasure,
    nu2: &DiscreteMeasure,
    mode: SolverMode,
    opts: &GeodesicOptions,
) -> Result<f64> {
    wasserstein_plan(geom, nu1, nu2, mode, opts).map(|p| p.total_cost)
}

/// `Θ(s) = 2(√τ2 − √τ1)·V − 2n(√τ2 − √τ1)²` with `τi = τ̄i·e^s`.
#[allow(clippy::too_many_arguments)]
pub fn renormalized_theta(
    geom: &Geometry,
    diffusion1: &DiffusionPath,
    diffusion2: &DiffusionPath,
    tau_bar1: f64,
    tau_bar2: f64,
    s: f64,
    mode: SolverMode,
    opts: &GeodesicOptions,
) -> Result<f64> {
    if !(tau_bar1 < tau_bar2) {
        return Err(Error::Domain(format!("need tau_bar1 < tau_bar2, got {tau_bar1} >= {tau_bar2}")));
    }
    let (t1, t2) = (tau_bar1 * s.exp(), tau_bar2 * s.exp());
    geom.check_tau(t1)?;
    geom.check_tau(t2)?;
    let nu1 = DiscreteMeasure::from_density(geom, &diffusion1.at(t1)?, t1)?;
    let nu2 = DiscreteMeasure::from_density(geom, &diffusion2.at(t2)?, t2)?;
    let v = wasserstein_v(geom, &nu1, &nu2, mode, opts)?;
    let gap = t2.sqrt() - t1.sqrt();
    Ok(2.0 * gap * v - 2.0 * geom.dim() as f64 * gap * gap)
}

/// Potential given by its values on the mesh nodes.
#[derive(Clone, Debug, PartialEq)]
pub struct Potential {
    pub values: Vec<f64>,
}

impl Potential {
    pub fn from_fn(geom: &Geometry, f: impl Fn(f64) -> f64) -> Self {
        Potential { values: geom.coords().iter().map(|&x| f(x)).collect() }
    }

    /// `φ` at a continuous coordinate by periodic cubic interpolation.
    pub fn value(&self, geom: &Geometry, x: f64) -> f64 {
        periodic_cubic(&self.values, geom.spacing(), x - geom.coord(0)).0
    }

    /// `∂φ/∂θ` at a continuous coordinate: centered differences at the nodes,
    /// interpolated by periodic cubics.
    pub fn derivative(&self, geom: &Geometry, x: f64) -> f64 {
        let n = self.values.len();
        let h = geom.spacing();
        let d: Vec<f64> = (0..n)
            .map(|i| (self.values[(i + 1) % n] - self.values[(i + n - 1) % n]) / (2.0 * h))
            .collect();
        periodic_cubic(&d, h, x - geom.coord(0)).0
    }

    /// Coordinate component of `Z = −∇φ/2` under `g(τ)`.
    pub fn initial_velocity(&self, geom: &Geometry, x: f64, tau: f64) -> f64 {
        -0.5 * self.derivative(geom, x) / geom.line_sample(x, tau).metric
    }
}

/// Image of a node-supported measure under `F_τ(x) = l_exp(x, −∇φ(x)/2)`.
#[derive(Clone, Debug, PartialEq)]
pub struct PotentialPushforward {
    pub tau1: f64,
    pub tau: f64,
    pub sources: Vec<f64>,
    pub weights: Vec<f64>,
    /// `F_τ(x)` per source, not reduced modulo 2π.
    pub targets: Vec<f64>,
    /// Volume Jacobian `det(dF_τ)` per source.
    pub jacobians: Vec<f64>,
    /// `f_τ(F_τ(x)) = f_{τ1}(x) / det(dF_τ)_x`.
    pub densities: Vec<f64>,
}

impl PotentialPushforward {
    pub fn total_mass(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Pushed weights deposited linearly onto the two nearest mesh nodes.
    pub fn deposit(&self, geom: &Geometry) -> Vec<f64> {
        let n = geom.nodes();
        let h = geom.spacing();
        let mut out = vec![0.0; n];
        for (&y, &m) in self.targets.iter().zip(&self.weights) {
            let u = (geom.wrap(y) - geom.coord(0)) / h;
            let k = u.floor();
            let t = u - k;
            let k = (k as i64).rem_euclid(n as i64) as usize;
            out[k] += (1.0 - t) * m;
            out[(k + 1) % n] += t * m;
        }
        out
    }

    pub fn to_measure(&self, geom: &Geometry) -> Result<DiscreteMeasure> {
        let total = self.total_mass();
        DiscreteMeasure::new(
            self.targets.iter().map(|&y| geom.wrap(y)).collect(),
            self.weights.iter().map(|w| w / total).collect(),
            self.tau,
        )
    }
}

pub fn push_forward_geodesic(
    geom: &Geometry,
    nu1: &DiscreteMeasure,
    phi: &Potential,
    tau: f64,
    opts: &GeodesicOptions,
) -> Result<PotentialPushforward> {
    let density = nu1
        .density
        .as_ref()
        .ok_or_else(|| Error::Config("push-forward needs a measure with a density".into()))?;
    if phi.values.len() != geom.nodes() {
        return Err(Error::Config(format!("potential has {} values, mesh has {}", phi.values.len(), geom.nodes())));
    }
    let tau1 = nu1.tau;
    let field = |u: f64| phi.initial_velocity(geom, u, tau1);
    let mapped: Vec<(f64, f64)> = nu1
        .points
        .par_iter()
        .map(|&x| {
            let y = l_exp(geom, x, tau1, &crate::geometry::TangentVector::along(field(x)), tau, opts)?;
            let j = volume_jacobian(geom, x, tau1, &field, tau, opts)?;
            Ok((y, j))
        })
        .collect::<Result<_>>()?;
    Ok(PotentialPushforward {
        tau1,
        tau,
        sources: nu1.points.clone(),
        weights: nu1.weights.clone(),
        targets: mapped.iter().map(|p| p.0).collect(),
        jacobians: mapped.iter().map(|p| p.1).collect(),
        densities: density.iter().zip(&mapped).map(|(f, p)| f / p.1).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffusion::DiffusionState;
    use crate::geometry::FlowModel;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    fn flat(n: usize) -> Geometry {
        Geometry::build(FlowModel::StaticFlatCircle { circumference: 2.0 * PI }, n, (0.5, 4.0)).unwrap()
    }

    #[test]
    fn cost_matrix_examples() {
        let o = GeodesicOptions::default();
        let c = cost_matrix(&flat(16), &[0.0], 1.0, &[PI / 2.0], 4.0, &o).unwrap();
        assert_abs_diff_eq!(c[0][0], PI * PI / 8.0, epsilon = 1e-12);
        let g = Geometry::build(FlowModel::RicciRoundSphere { initial_radius: 1.0 }, 16, (1.0, 4.0)).unwrap();
        let pts = &g.coords()[..4];
        let c = cost_matrix(&g, pts, 1.0, pts, 4.0, &o).unwrap();
        for i in 0..4 {
            assert_abs_diff_eq!(c[i][i], 1.6101, epsilon = 1e-3);
        }
    }

    #[test]
    fn two_point_identity_pairing() {
        let g = flat(16);
        let o = GeodesicOptions::default();
        let mu = DiscreteMeasure::new(vec![0.0, PI], vec![0.5, 0.5], 1.0).unwrap();
        let nu = DiscreteMeasure::new(vec![0.0, PI], vec![0.5, 0.5], 4.0).unwrap();
        let c = cost_matrix(&g, &mu.points, 1.0, &nu.points, 4.0, &o).unwrap();
        assert_abs_diff_eq!(c[0][1], PI * PI / 2.0, epsilon = 1e-12);
        let p = ot_solve(&mu, &nu, &c, SolverMode::Exact).unwrap();
        assert!(p.total_cost.abs() < 1e-15);
        assert!(p.certificate_violation().unwrap() < 1e-12);
        let e = ot_solve(&mu, &nu, &c, SolverMode::Entropic(1e-3)).unwrap();
        assert!(e.total_cost < 1e-3 && e.total_cost >= p.total_cost);
        assert!(p.to_csv().starts_with("# total_cost=0 mode=exact\ni,j,pi_ij,cost_ij\n0,0,0.5,0\n"));
    }

    #[test]
    fn rejects_bad_inputs() {
        let mu = DiscreteMeasure::dirac(0.0, 1.0);
        assert!(matches!(ot_solve(&mu, &mu, &vec![vec![f64::NAN]], SolverMode::Exact), Err(Error::NonFinite(0, 0))));
        assert!(DiscreteMeasure::new(vec![0.0, 1.0], vec![0.5, 0.6], 1.0).is_err());
        let nu = DiscreteMeasure { weights: vec![0.5], ..mu.clone() };
        assert!(matches!(ot_solve(&mu, &nu, &vec![vec![0.0]], SolverMode::Exact), Err(Error::Infeasible(_))));
    }

    #[test]
    fn theta_on_uniform_flat_circle() {
        let g = Geometry::build(FlowModel::StaticFlatCircle { circumference: 2.0 * PI }, 16, (0.5, 10.0)).unwrap();
        let o = GeodesicOptions::default();
        let s = DiffusionState::uniform(&g, 0.5).unwrap();
        let path = DiffusionPath::compute(&g, &s, &[0.5, 1.0, 2.0, 4.0, 8.0]).unwrap();
        let t0 = renormalized_theta(&g, &path, &path, 1.0, 4.0, 0.0, SolverMode::Exact, &o).unwrap();
        assert_abs_diff_eq!(t0, -2.0, epsilon = 1e-12);
        let t1 = renormalized_theta(&g, &path, &path, 1.0, 4.0, 2f64.ln(), SolverMode::Exact, &o).unwrap();
        assert_abs_diff_eq!(t1, -4.0, epsilon = 1e-12);
        assert!(renormalized_theta(&g, &path, &path, 4.0, 4.0, 0.0, SolverMode::Exact, &o).is_err());
    }

    #[test]
    fn constant_potential_is_identity() {
        let g = flat(32);
        let o = GeodesicOptions::default();
        let u = DiffusionState::bump(&g, 1.0, 0.5, 0.1, 1.0).unwrap();
        let nu = DiscreteMeasure::from_density(&g, &u.u, 1.0).unwrap();
        let phi = Potential::from_fn(&g, |_| 3.0);
        let p = push_forward_geodesic(&g, &nu, &phi, 2.0, &o).unwrap();
        assert_eq!(p.targets, nu.points);
        assert!(p.jacobians.iter().all(|j| (j - 1.0).abs() < 1e-9));
    }
}
