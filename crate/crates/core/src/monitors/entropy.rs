use std::f64::consts::PI;

use super::{AbscissaKind, MonitorSeries, Property};
use crate::diffusion::DiffusionPath;
use crate::error::{Error, Result};
use crate::geometry::Geometry;
use crate::lgeodesic::LDistanceField;

/// Boltzmann–Shannon entropy `∫ f ln f dμ(τ)`, with `0·ln 0 = 0`.
pub fn entropy(geom: &Geometry, density: &[f64], tau: f64) -> Result<f64> {
    let w = geom.volume_weights(tau)?;
    if density.len() != w.len() {
        return Err(Error::Config(format!("density has {} values, mesh has {}", density.len(), w.len())));
    }
    if let Some((node, &value)) = density.iter().enumerate().find(|(_, v)| !(**v >= 0.0)) {
        return Err(Error::NegativeDensity { node, value });
    }
    Ok(density
        .iter()
        .zip(&w.values)
        .map(|(&f, &w)| if f > 0.0 { f * f.ln() * w } else { 0.0 })
        .sum())
}

/// `W = ∫ [τ(S + |∇f|²) + f − n]·u dμ` with `u = (4πτ)^{-n/2} e^{-f}`.
///
/// The gradient term uses the edge form `Σ c_e (Δf)² ū_e` of the same
/// conductances as the Laplacian, so `∫|∇f|² u` is the discrete Dirichlet
/// energy of `f` weighted by `u`.
pub fn w_entropy(geom: &Geometry, u: &[f64], tau: f64) -> Result<f64> {
    let w = geom.volume_weights(tau)?;
    let n = geom.nodes();
    if u.len() != n {
        return Err(Error::Config(format!("density has {} values, mesh has {n}", u.len())));
    }
    if let Some((node, &value)) = u.iter().enumerate().find(|(_, v)| !(**v > 0.0)) {
        return Err(Error::NonPositiveDensity { node, value });
    }
    let dim = geom.dim() as f64;
    let shift = 0.5 * dim * (4.0 * PI * tau).ln();
    let f: Vec<f64> = u.iter().map(|u| -u.ln() - shift).collect();
    let mut acc = 0.0;
    for i in 0..n {
        let s = geom.flow_sample(i, tau)?.trace;
        acc += (tau * s + f[i] - dim) * u[i] * w.values[i];
    }
    let c = geom.conductances_unchecked(tau);
    for i in 0..n {
        let j = (i + 1) % n;
        let df = f[j] - f[i];
        acc += tau * c[i] * df * df * 0.5 * (u[i] + u[j]);
    }
    Ok(acc)
}

pub fn w_entropy_series(geom: &Geometry, path: &DiffusionPath, taus: &[f64], slack: f64) -> Result<MonitorSeries> {
    let values = taus
        .iter()
        .map(|&t| w_entropy(geom, &path.at(t)?, t))
        .collect::<Result<Vec<f64>>>()?;
    Ok(MonitorSeries::new("w_entropy", AbscissaKind::Tau, taus.to_vec(), values, Property::WeaklyDecreasing, slack))
}

fn field_time_index(field: &LDistanceField, tau: f64) -> Result<usize> {
    field
        .taus
        .iter()
        .position(|&t| (t - tau).abs() <= 1e-12 * tau.abs().max(1.0))
        .ok_or_else(|| Error::Domain(format!("tau = {tau} is not on the distance-field grid")))
}

/// `Ṽ(τ) = ∫ (4πτ)^{-n/2} exp(−L(y, τ)/(2√τ)) dμ(τ)` over a field that
/// covers every mesh node.
pub fn reduced_volume(geom: &Geometry, field: &LDistanceField, tau: f64) -> Result<f64> {
    let t = field_time_index(field, tau)?;
    if field.nodes.len() != geom.nodes() {
        return Err(Error::Config("reduced volume needs the field on every mesh node".into()));
    }
    let w = geom.volume_weights(tau)?;
    let norm = (4.0 * PI * tau).powf(-0.5 * geom.dim() as f64);
    let mut acc = 0.0;
    for (j, &node) in field.nodes.iter().enumerate() {
        let l = field.l(t, j)?;
        acc += norm * (-l / (2.0 * tau.sqrt())).exp() * w.values[node];
    }
    Ok(acc)
}

pub fn reduced_volume_series(geom: &Geometry, field: &LDistanceField, slack: f64) -> Result<MonitorSeries> {
    let values = field
        .taus
        .iter()
        .map(|&t| reduced_volume(geom, field, t))
        .collect::<Result<Vec<f64>>>()?;
    Ok(MonitorSeries::new("reduced_volume", AbscissaKind::Tau, field.taus.clone(), values, Property::WeaklyDecreasing, slack))
}

/// `min_y L̄(y, τ) − 2nτ` over the field's times.
pub fn min_lbar_gap(geom: &Geometry, field: &LDistanceField, slack: f64) -> Result<MonitorSeries> {
    let n = geom.dim() as f64;
    let values = (0..field.taus.len())
        .map(|t| {
            let row = field.lbar_row(t)?;
            Ok(row.into_iter().fold(f64::INFINITY, f64::min) - 2.0 * n * field.taus[t])
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(MonitorSeries::new("min_lbar_gap", AbscissaKind::Tau, field.taus.clone(), values, Property::WeaklyDecreasing, slack))
}
