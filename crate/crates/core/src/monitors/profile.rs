use rayon::prelude::*;

use super::{AbscissaKind, MonitorSeries, Property};
use crate::diffusion::DiffusionPath;
use crate::error::{Error, Result};
use crate::geometry::Geometry;
use crate::lgeodesic::{q_batch, q_distance, GeodesicOptions, QQuery};
use crate::transport::{push_forward_geodesic, renormalized_theta, DiscreteMeasure, Potential, SolverMode};

/// `Θ(s)` over `s_grid`, expected weakly decreasing.
#[allow(clippy::too_many_arguments)]
pub fn theta_series(
    geom: &Geometry,
    diffusion1: &DiffusionPath,
    diffusion2: &DiffusionPath,
    tau_bar1: f64,
    tau_bar2: f64,
    s_grid: &[f64],
    mode: SolverMode,
    opts: &GeodesicOptions,
    slack: f64,
) -> Result<MonitorSeries> {
    let values = s_grid
        .iter()
        .map(|&s| renormalized_theta(geom, diffusion1, diffusion2, tau_bar1, tau_bar2, s, mode, opts))
        .collect::<Result<Vec<f64>>>()?;
    Ok(MonitorSeries::new("theta", AbscissaKind::S, s_grid.to_vec(), values, Property::WeaklyDecreasing, slack))
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConvexityProfile {
    pub series: MonitorSeries,
    pub taus: Vec<f64>,
    /// `E(V_τ)` per grid time.
    pub entropy: Vec<f64>,
    /// `∫ φ(·, τ) dV_τ` per grid time.
    pub potential_term: Vec<f64>,
}

const GOLDEN_STEPS: usize = 40;

/// `φ(y, τ) = inf_x [Q(x, τ1; y, τ) − φ(x)] / (2√τ)`: brute force over the
/// mesh, then golden-section refinement around the best node.
fn hopf_lax(
    geom: &Geometry,
    phi: &Potential,
    tau1: f64,
    targets: &[f64],
    tau: f64,
    opts: &GeodesicOptions,
) -> Result<Vec<f64>> {
    let n = geom.nodes();
    let queries: Vec<QQuery> = targets
        .iter()
        .flat_map(|&y| geom.coords().iter().map(move |&x| QQuery { x, tau1, y, tau2: tau }))
        .collect();
    let q = q_batch(geom, &queries, opts);
    targets
        .par_iter()
        .enumerate()
        .map(|(t, &y)| {
            let mut best = (f64::INFINITY, 0usize);
            for k in 0..n {
                let v = q[t * n + k].clone()? - phi.values[k];
                if v < best.0 {
                    best = (v, k);
                }
            }
            let objective = |x: f64| -> Result<f64> {
                Ok(q_distance(geom, x, tau1, y, tau, opts)?.length - phi.value(geom, x))
            };
            let x0 = geom.coord(best.1);
            let h = geom.spacing();
            let (mut a, mut b) = (x0 - h, x0 + h);
            let r = 0.5 * (5f64.sqrt() - 1.0);
            let mut c = b - r * (b - a);
            let mut d = a + r * (b - a);
            let (mut fc, mut fd) = (objective(c)?, objective(d)?);
            for _ in 0..GOLDEN_STEPS {
                if fc < fd {
                    b = d;
                    d = c;
                    fd = fc;
                    c = b - r * (b - a);
                    fc = objective(c)?;
                } else {
                    a = c;
                    c = d;
                    fc = fd;
                    d = a + r * (b - a);
                    fd = objective(d)?;
                }
            }
            Ok(best.0.min(fc).min(fd) / (2.0 * tau.sqrt()))
        })
        .collect()
}

/// `E(V_τ) + ∫ φ(·, τ) dV_τ + (n/2) ln τ` on `points` times uniform in
/// `w = τ^{-1/2}` from `τ1` (the time of `nu1`) to `tau2`, expected convex
/// in `w`.
pub fn convexity_profile(
    geom: &Geometry,
    nu1: &DiscreteMeasure,
    phi: &Potential,
    tau2: f64,
    points: usize,
    opts: &GeodesicOptions,
    slack: f64,
) -> Result<ConvexityProfile> {
    let tau1 = nu1.tau;
    if !(tau1 < tau2) {
        return Err(Error::Domain(format!("need tau1 < tau2, got {tau1} >= {tau2}")));
    }
    if points < 2 {
        return Err(Error::Config("convexity profile needs at least two times".into()));
    }
    let density = nu1
        .density
        .as_ref()
        .ok_or_else(|| Error::Config("convexity profile needs a measure with a density".into()))?;
    let (w1, w2) = (tau1.powf(-0.5), tau2.powf(-0.5));
    let ws: Vec<f64> = (0..points).map(|k| w1 + (w2 - w1) * k as f64 / (points - 1) as f64).collect();
    let taus: Vec<f64> = ws.iter().enumerate().map(|(k, w)| if k == 0 { tau1 } else { w.powi(-2) }).collect();
    let dim = geom.dim() as f64;

    let mut entropy = Vec::with_capacity(points);
    let mut potential_term = Vec::with_capacity(points);
    for (k, &tau) in taus.iter().enumerate() {
        let (targets, jacobians, pot) = if k == 0 {
            // F_{τ1} is the identity and the infimum collapses onto x = y.
            let pot: Vec<f64> = nu1.points.iter().map(|&x| -phi.value(geom, x) / (2.0 * tau1.sqrt())).collect();
            (nu1.points.clone(), vec![1.0; nu1.len()], pot)
        } else {
            let pf = push_forward_geodesic(geom, nu1, phi, tau, opts)?;
            let pot = hopf_lax(geom, phi, tau1, &pf.targets, tau, opts)?;
            (pf.targets, pf.jacobians, pot)
        };
        debug_assert_eq!(targets.len(), jacobians.len());
        let mut e = 0.0;
        let mut p = 0.0;
        for i in 0..nu1.len() {
            let m = nu1.weights[i];
            if m > 0.0 {
                e += m * (density[i] / jacobians[i]).ln();
                p += m * pot[i];
            }
        }
        entropy.push(e);
        potential_term.push(p);
    }
    let values: Vec<f64> = (0..points)
        .map(|k| entropy[k] + potential_term[k] + 0.5 * dim * taus[k].ln())
        .collect();
    Ok(ConvexityProfile {
        series: MonitorSeries::new("convexity_profile", AbscissaKind::InvSqrtTau, ws, values, Property::Convex, slack),
        taus,
        entropy,
        potential_term,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffusion::DiffusionState;
    use crate::geometry::FlowModel;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    #[test]
    fn zero_potential_on_flat_circle_is_minus_log_w() {
        let g = Geometry::build(FlowModel::StaticFlatCircle { circumference: 2.0 * PI }, 32, (1.0, 4.0)).unwrap();
        let u = DiffusionState::bump(&g, 1.0, 0.6, 0.2, 1.0).unwrap();
        let nu = DiscreteMeasure::from_density(&g, &u.u, 1.0).unwrap();
        let phi = Potential::from_fn(&g, |_| 0.0);
        let p = convexity_profile(&g, &nu, &phi, 4.0, 5, &GeodesicOptions::default(), 1e-3).unwrap();
        let e0 = p.entropy[0];
        for (w, v) in p.series.abscissa.iter().zip(&p.series.values) {
            assert_abs_diff_eq!(*v, e0 - w.ln(), epsilon = 1e-9);
        }
        assert!(p.series.passed);
        assert!(p.series.worst_violation < 0.0);
    }
}
