use std::f64::consts::PI;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::Geometry;
use crate::lgeodesic::{q_distance, DiscreteCurve, GeodesicOptions};

/// `τ̄` with `1/√τ̄ = (1−λ)/√τ1 + λ/√τ2`.
pub fn pl_tau_bar(tau1: f64, tau2: f64, lambda: f64) -> f64 {
    let inv = (1.0 - lambda) / tau1.sqrt() + lambda / tau2.sqrt();
    1.0 / (inv * inv)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PlOptions {
    /// Relative azimuths sampled per pair of polar bands on spheres.
    pub azimuth_samples: usize,
    /// Relative slack on the integral inequality.
    pub slack: f64,
}

impl Default for PlOptions {
    fn default() -> Self {
        PlOptions { azimuth_samples: 16, slack: 1e-3 }
    }
}

/// The constraint that fixed a node value of `v`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PlConstraint {
    pub x: f64,
    pub y: f64,
    /// `γ(τ̄)` on the mesh line (polar angle on spheres).
    pub z: f64,
    pub required: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PlReport {
    pub lambda: f64,
    pub tau_bar: f64,
    pub v: Vec<f64>,
    /// Binding constraint of each node, `None` where `v` is 0.
    pub binding: Vec<Option<PlConstraint>>,
    /// `∫ v dμ(τ̄)`.
    pub lhs: f64,
    /// `(∫ u1 dμ(τ1))^{1−λ} (∫ u2 dμ(τ2))^λ`.
    pub rhs: f64,
    /// `lhs / rhs`, infinite when `rhs = 0`.
    pub margin: f64,
    pub slack: f64,
    pub passed: bool,
    pub geodesics: usize,
}

struct Hit {
    nodes: [usize; 2],
    constraint: PlConstraint,
}

/// Required value of `v(γ(τ̄))` for one geodesic, before the prefactor.
fn required(
    geom: &Geometry,
    curve: &DiscreteCurve,
    (tau1, tau_bar, tau2, lambda): (f64, f64, f64, f64),
    (u1, u2): (f64, f64),
    opts: &GeodesicOptions,
) -> Result<(f64, f64)> {
    let (x, y) = (curve.start(), curve.end());
    let z = curve.position_at_sigma(tau_bar.sqrt());
    let q1 = q_distance(geom, x, tau1, z, tau_bar, opts)?.length;
    let q2 = q_distance(geom, z, tau_bar, y, tau2, opts)?.length;
    let value = (-(1.0 - lambda) * q1 / (2.0 * tau1.sqrt())).exp()
        * u1.powf(1.0 - lambda)
        * (lambda * q2 / (2.0 * tau2.sqrt())).exp()
        * u2.powf(lambda);
    Ok((z, value))
}

/// Fractional cell offsets this close to a node count as the node itself.
const ON_NODE: f64 = 1e-9;

/// Lower cell index of fractional position `s`, and whether `s` sits on it.
fn cell(s: f64) -> (usize, bool) {
    let r = s.round();
    if (s - r).abs() <= ON_NODE {
        (r.max(0.0) as usize, true)
    } else {
        (s.floor().max(0.0) as usize, false)
    }
}

/// Both mesh nodes around `z` on a circle, or just one when `z` is a node.
fn circle_bracket(geom: &Geometry, z: f64) -> [usize; 2] {
    let n = geom.nodes();
    let (k, on) = cell(geom.wrap(z - geom.coord(0)) / geom.spacing());
    let k = k % n;
    if on {
        [k, k]
    } else {
        [k, (k + 1) % n]
    }
}

/// Both polar bands around the polar angle `psi` (upper-half node indices).
fn sphere_bracket(geom: &Geometry, psi: f64) -> [usize; 2] {
    let half = geom.nodes() / 2;
    let (k, on) = cell((psi / geom.spacing() - 0.5).max(0.0));
    let k = k.min(half - 1);
    if on {
        [k, k]
    } else {
        [k, (k + 1).min(half - 1)]
    }
}

/// Builds the smallest `v` satisfying the pointwise hypothesis along every
/// sampled minimizing geodesic, then compares the integrals.
///
/// Each required value is deposited onto both mesh nodes that bracket
/// `γ(τ̄)` (or onto the node itself when `γ(τ̄)` hits one), so `v` errs
/// upward. On spheres, densities are zonal and pairs of polar bands are
/// joined at `azimuth_samples` relative azimuths.
#[allow(clippy::too_many_arguments)]
pub fn pl_check(
    geom: &Geometry,
    u1: &[f64],
    u2: &[f64],
    lambda: f64,
    tau1: f64,
    tau2: f64,
    opts: &GeodesicOptions,
    pl: &PlOptions,
) -> Result<PlReport> {
    if !(lambda > 0.0 && lambda < 1.0) {
        return Err(Error::Config(format!("lambda must lie in (0, 1), got {lambda}")));
    }
    if !(tau1 < tau2) {
        return Err(Error::Domain(format!("need tau1 < tau2, got {tau1} >= {tau2}")));
    }
    let n = geom.nodes();
    for u in [u1, u2] {
        if u.len() != n {
            return Err(Error::Config(format!("density has {} values, mesh has {n}", u.len())));
        }
        if let Some((node, &value)) = u.iter().enumerate().find(|(_, v)| !(**v >= 0.0)) {
            return Err(Error::NegativeDensity { node, value });
        }
    }
    let sphere = geom.model().is_sphere();
    if sphere && pl.azimuth_samples == 0 {
        return Err(Error::Config("azimuth_samples must be positive".into()));
    }
    let tau_bar = pl_tau_bar(tau1, tau2, lambda);
    let times = (tau1, tau_bar, tau2, lambda);
    let dim = geom.dim() as f64;
    let prefactor = (tau_bar / (tau1.powf(1.0 - lambda) * tau2.powf(lambda))).powf(0.5 * dim);

    let rows = if sphere { n / 2 } else { n };
    let pairs: Vec<(usize, usize, usize)> = (0..rows)
        .filter(|&i| u1[i] > 0.0)
        .flat_map(|i| (0..rows).filter(|&j| u2[j] > 0.0).map(move |j| (i, j)))
        .flat_map(|(i, j)| (0..if sphere { pl.azimuth_samples } else { 1 }).map(move |k| (i, j, k)))
        .collect();

    let hits: Vec<Vec<Hit>> = pairs
        .par_iter()
        .map(|&(i, j, k)| -> Result<Vec<Hit>> {
            let us = (u1[i], u2[j]);
            let mut out = Vec::with_capacity(2);
            if !sphere {
                let (x, y) = (geom.coord(i), geom.coord(j));
                let r = q_distance(geom, x, tau1, y, tau2, opts)?;
                for curve in std::iter::once(&r.curve).chain(r.tied_curve.as_ref()) {
                    let (z, value) = required(geom, curve, times, us, opts)?;
                    let required = value / prefactor;
                    out.push(Hit { nodes: circle_bracket(geom, z), constraint: PlConstraint { x, y, z, required } });
                }
                return Ok(out);
            }
            let (p1, p2) = (geom.coord(i), geom.coord(j));
            let beta = (k as f64 + 0.5) * PI / pl.azimuth_samples as f64;
            let a = [p1.sin(), 0.0, p1.cos()];
            let b = [p2.sin() * beta.cos(), p2.sin() * beta.sin(), p2.cos()];
            let dot = (a[0] * b[0] + a[1] * b[1] + a[2] * b[2]).clamp(-1.0, 1.0);
            let d = dot.acos();
            let r = q_distance(geom, 0.0, tau1, d, tau2, opts)?;
            for curve in std::iter::once(&r.curve).chain(r.tied_curve.as_ref()) {
                let (s, value) = required(geom, curve, times, us, opts)?;
                // Point at arc length `s` from `a` along the great circle through `b`.
                let zc = if d > 1e-12 {
                    let t = d.sin();
                    let (ca, cb) = (((d - s).sin()) / t, s.sin() / t);
                    ca * a[2] + cb * b[2]
                } else {
                    a[2]
                };
                let psi = zc.clamp(-1.0, 1.0).acos();
                let required = value / prefactor;
                out.push(Hit { nodes: sphere_bracket(geom, psi), constraint: PlConstraint { x: p1, y: p2, z: psi, required } });
            }
            Ok(out)
        })
        .collect::<Result<Vec<_>>>()?;

    let mut v = vec![0.0; n];
    let mut binding: Vec<Option<PlConstraint>> = vec![None; n];
    let mut geodesics = 0;
    for hit in hits.iter().flatten() {
        geodesics += 1;
        for &node in &hit.nodes {
            let targets: &[usize] = if sphere { &[node, n - 1 - node] } else { &[node] };
            for &t in targets {
                if hit.constraint.required > v[t] {
                    v[t] = hit.constraint.required;
                    binding[t] = Some(hit.constraint);
                }
            }
        }
    }

    let integral = |u: &[f64], tau: f64| -> Result<f64> {
        Ok(u.iter().zip(&geom.volume_weights(tau)?.values).map(|(u, w)| u * w).sum())
    };
    let lhs = integral(&v, tau_bar)?;
    let rhs = integral(u1, tau1)?.powf(1.0 - lambda) * integral(u2, tau2)?.powf(lambda);
    let margin = if rhs > 0.0 { lhs / rhs } else { f64::INFINITY };
    Ok(PlReport {
        lambda,
        tau_bar,
        v,
        binding,
        lhs,
        rhs,
        margin,
        slack: pl.slack,
        passed: lhs >= rhs * (1.0 - pl.slack),
        geodesics,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::FlowModel;
    use approx::assert_abs_diff_eq;

    #[test]
    fn tau_bar_example() {
        assert_abs_diff_eq!(pl_tau_bar(1.0, 4.0, 0.5), 16.0 / 9.0, epsilon = 1e-15);
    }

    #[test]
    fn constant_profiles_on_flat_circle() {
        let g = Geometry::build(FlowModel::StaticFlatCircle { circumference: 2.0 * PI }, 16, (0.5, 5.0)).unwrap();
        let one = vec![1.0; 16];
        let r = pl_check(&g, &one, &one, 0.5, 1.0, 4.0, &GeodesicOptions::default(), &PlOptions::default()).unwrap();
        for v in &r.v {
            assert_abs_diff_eq!(*v, (9.0f64 / 8.0).sqrt(), epsilon = 1e-6);
        }
        assert_abs_diff_eq!(r.margin, (9.0f64 / 8.0).sqrt(), epsilon = 1e-6);
        assert!(r.passed);
    }

    #[test]
    fn zero_profile_is_trivial() {
        let g = Geometry::build(FlowModel::StaticFlatCircle { circumference: 2.0 * PI }, 16, (0.5, 5.0)).unwrap();
        let r = pl_check(&g, &[0.0; 16], &[1.0; 16], 0.5, 1.0, 4.0, &GeodesicOptions::default(), &PlOptions::default())
            .unwrap();
        assert!(r.v.iter().all(|v| *v == 0.0));
        assert_eq!(r.rhs, 0.0);
        assert!(r.passed);
        assert!(pl_check(&g, &[1.0; 16], &[1.0; 16], 1.0, 1.0, 4.0, &GeodesicOptions::default(), &PlOptions::default())
            .is_err());
    }
}
