use rayon::prelude::*;

use super::{AbscissaKind, MonitorSeries, Property};
use crate::error::{Error, Result};
use crate::geometry::Geometry;
use crate::lgeodesic::{kappa_integral, q_distance, q_partials, GeodesicOptions};
use crate::transport::{wasserstein_plan, DiscreteMeasure, SolverMode};

/// Endpoints of one minimizing geodesic.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PairSample {
    pub x: f64,
    pub tau1: f64,
    pub y: f64,
    pub tau2: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct IdentityCheck {
    /// `|residual|` per evaluated pair, bounded above by 0.
    pub series: MonitorSeries,
    /// Indices of input pairs that sit near the cut locus.
    pub skipped: Vec<usize>,
}

fn identity_series(
    name: &str,
    geom: &Geometry,
    pairs: &[PairSample],
    opts: &GeodesicOptions,
    slack: f64,
    residual: impl Fn(&PairSample, &crate::lgeodesic::GeodesicResult) -> Result<f64> + Sync,
) -> Result<IdentityCheck> {
    let results: Vec<Option<f64>> = pairs
        .par_iter()
        .map(|p| {
            let r = q_distance(geom, p.x, p.tau1, p.y, p.tau2, opts)?;
            if r.near_cut {
                return Ok(None);
            }
            residual(p, &r).map(|v| Some(v.abs()))
        })
        .collect::<Result<_>>()?;
    let mut skipped = Vec::new();
    let mut abscissa = Vec::new();
    let mut values = Vec::new();
    for (k, r) in results.into_iter().enumerate() {
        match r {
            Some(v) => {
                abscissa.push(k as f64);
                values.push(v);
            }
            None => skipped.push(k),
        }
    }
    Ok(IdentityCheck {
        series: MonitorSeries::new(name, AbscissaKind::Index, abscissa, values, Property::LeBound(0.0), slack),
        skipped,
    })
}

/// Residual of `τ2 ∂Q/∂τ2 + τ1 ∂Q/∂τ1 = 2τ2^{3/2}S(y) − 2τ1^{3/2}S(x) + 𝒦 − Q/2`.
pub fn lemma26_check(geom: &Geometry, pairs: &[PairSample], opts: &GeodesicOptions, slack: f64) -> Result<IdentityCheck> {
    identity_series("lemma26_residual", geom, pairs, opts, slack, |p, r| {
        let d = q_partials(geom, r)?;
        let k = kappa_integral(geom, r)?;
        let s1 = geom.line_sample(p.x, p.tau1).trace;
        let s2 = geom.line_sample(p.y, p.tau2).trace;
        let lhs = p.tau2 * d.d_tau2 + p.tau1 * d.d_tau1;
        let rhs = 2.0 * p.tau2.powf(1.5) * s2 - 2.0 * p.tau1.powf(1.5) * s1 + k - 0.5 * r.length;
        Ok(lhs - rhs)
    })
}

/// Residual of `τ^{3/2}(S + |X|²)` between the endpoints against `−𝒦 + Q/2`.
pub fn energy_identity_check(
    geom: &Geometry,
    pairs: &[PairSample],
    opts: &GeodesicOptions,
    slack: f64,
) -> Result<IdentityCheck> {
    identity_series("energy_identity_residual", geom, pairs, opts, slack, |p, r| {
        let k = kappa_integral(geom, r)?;
        let end = |x: f64, tau: f64, v: f64| {
            let ls = geom.line_sample(x, tau);
            tau.powf(1.5) * (ls.trace + ls.metric * v * v)
        };
        let lhs = end(p.y, p.tau2, r.end_velocity.components[0]) - end(p.x, p.tau1, r.start_velocity.components[0]);
        Ok(lhs - (-k + 0.5 * r.length))
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct Corollary25Report {
    /// Plan integral of the boundary and `𝒦` terms.
    pub lhs: f64,
    /// `n(√τ2 − √τ1)`.
    pub bound: f64,
    pub slack: f64,
    pub passed: bool,
    /// Plan mass on near-cut pairs, left out of `lhs`.
    pub skipped_mass: f64,
    pub pairs: usize,
}

/// `∂θ ln f` at node `i` by centered differences.
fn log_gradient(geom: &Geometry, f: &[f64], i: usize) -> f64 {
    let n = f.len();
    let (ip, im) = ((i + 1) % n, (i + n - 1) % n);
    (f[ip].ln() - f[im].ln()) / (2.0 * geom.spacing())
}

fn node_density(geom: &Geometry, m: &DiscreteMeasure) -> Result<Vec<f64>> {
    let f = m
        .density
        .clone()
        .ok_or_else(|| Error::Config("measure has no density on the mesh".into()))?;
    if f.len() != geom.nodes() {
        return Err(Error::Config(format!("density has {} values, mesh has {}", f.len(), geom.nodes())));
    }
    if let Some((node, &value)) = f.iter().enumerate().find(|(_, v)| !(**v > 0.0)) {
        return Err(Error::NonPositiveDensity { node, value });
    }
    Ok(f)
}

/// Plan integral of
/// `𝒦 − 2τ1^{3/2}S(x) − τ1⟨∇1Q, ∇ln f1⟩ + 2τ2^{3/2}S(y) − τ2⟨∇2Q, ∇ln f2⟩`
/// over the exact optimal plan, compared against `n(√τ2 − √τ1)`.
pub fn corollary25_check(
    geom: &Geometry,
    nu1: &DiscreteMeasure,
    nu2: &DiscreteMeasure,
    opts: &GeodesicOptions,
    slack: f64,
) -> Result<Corollary25Report> {
    let (tau1, tau2) = (nu1.tau, nu2.tau);
    let f1 = node_density(geom, nu1)?;
    let f2 = node_density(geom, nu2)?;
    let plan = wasserstein_plan(geom, nu1, nu2, SolverMode::Exact, opts)?;
    let entries: Vec<(usize, usize, f64)> = plan
        .pi
        .iter()
        .enumerate()
        .flat_map(|(i, row)| row.iter().enumerate().filter(|(_, p)| **p > 0.0).map(move |(j, p)| (i, j, *p)))
        .collect();
    let terms: Vec<(f64, Option<f64>)> = entries
        .par_iter()
        .map(|&(i, j, p)| {
            let (x, y) = (nu1.points[i], nu2.points[j]);
            let r = q_distance(geom, x, tau1, y, tau2, opts)?;
            if r.near_cut {
                return Ok((p, None));
            }
            let d = q_partials(geom, &r)?;
            let k = kappa_integral(geom, &r)?;
            let s1 = geom.line_sample(x, tau1).trace;
            let s2 = geom.line_sample(y, tau2).trace;
            let t = k - 2.0 * tau1.powf(1.5) * s1 - tau1 * d.grad1.components[0] * log_gradient(geom, &f1, i)
                + 2.0 * tau2.powf(1.5) * s2
                - tau2 * d.grad2.components[0] * log_gradient(geom, &f2, j);
            Ok((p, Some(t)))
        })
        .collect::<Result<_>>()?;
    let mut lhs = 0.0;
    let mut skipped_mass = 0.0;
    for (p, t) in &terms {
        match t {
            Some(t) => lhs += p * t,
            None => skipped_mass += p,
        }
    }
    let bound = geom.dim() as f64 * (tau2.sqrt() - tau1.sqrt());
    Ok(Corollary25Report { lhs, bound, slack, passed: lhs <= bound + slack, skipped_mass, pairs: entries.len() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffusion::DiffusionState;
    use crate::geometry::FlowModel;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    #[test]
    fn flat_quarter_turn_identity() {
        let g = Geometry::build(FlowModel::StaticFlatCircle { circumference: 2.0 * PI }, 32, (0.5, 5.0)).unwrap();
        let pairs = [PairSample { x: 0.0, tau1: 1.0, y: PI / 2.0, tau2: 4.0 }, PairSample { x: 1.0, tau1: 1.0, y: 1.0, tau2: 4.0 }];
        let l = lemma26_check(&g, &pairs, &GeodesicOptions::default(), 1e-4).unwrap();
        assert!(l.series.passed, "{:?}", l.series.values);
        assert!(l.skipped.is_empty());
        let e = energy_identity_check(&g, &pairs, &GeodesicOptions::default(), 1e-4).unwrap();
        assert!(e.series.passed, "{:?}", e.series.values);
    }

    #[test]
    fn antipodal_pair_is_skipped() {
        let g = Geometry::build(FlowModel::StaticFlatCircle { circumference: 2.0 * PI }, 32, (0.5, 5.0)).unwrap();
        let pairs = [PairSample { x: 0.0, tau1: 1.0, y: PI, tau2: 4.0 }];
        let l = lemma26_check(&g, &pairs, &GeodesicOptions::default(), 1e-4).unwrap();
        assert_eq!(l.skipped, vec![0]);
        assert!(l.series.values.is_empty());
    }

    #[test]
    fn uniform_flat_corollary_is_zero() {
        let g = Geometry::build(FlowModel::StaticFlatCircle { circumference: 2.0 * PI }, 16, (0.5, 5.0)).unwrap();
        let u1 = DiffusionState::uniform(&g, 1.0).unwrap();
        let u2 = DiffusionState::uniform(&g, 4.0).unwrap();
        let nu1 = DiscreteMeasure::from_density(&g, &u1.u, 1.0).unwrap();
        let nu2 = DiscreteMeasure::from_density(&g, &u2.u, 4.0).unwrap();
        let r = corollary25_check(&g, &nu1, &nu2, &GeodesicOptions::default(), 1e-3).unwrap();
        assert_abs_diff_eq!(r.lhs, 0.0, epsilon = 1e-9);
        assert!(r.passed);
    }
}
