//! Densities evolving by `∂τ u = Δu − S·u` on the evolving metric.
//!
//! Since `∂τ dμ = S dμ`, the cell masses `m_i = u_i·w_i(τ)` obey the pure
//! flux law `dm_i/dτ = Σ c_e (u_nbr − u_i)`, which is what gets integrated
//! (explicit Heun). The `−S u` sink and the volume growth cancel identically,
//! so total mass is conserved to round-off without any renormalization.

use crate::error::{Error, Result};
use crate::geometry::Geometry;
use crate::io::fmt_g17;

/// Smallest time step accepted before the stability bound is declared
/// unusable.
pub const MIN_STEP: f64 = 1e-9;

/// Fraction of the explicit stability limit actually used.
const CFL: f64 = 0.9;

#[derive(Clone, Debug, PartialEq)]
pub struct DiffusionState {
    /// Density relative to `μ(τ)` at each node.
    pub u: Vec<f64>,
    pub tau: f64,
    pub steps_taken: usize,
    pub last_step: f64,
}

impl DiffusionState {
    pub fn new(geom: &Geometry, u: Vec<f64>, tau: f64) -> Result<Self> {
        geom.check_tau(tau)?;
        if u.len() != geom.nodes() {
            return Err(Error::Config(format!("density has {} values, mesh has {}", u.len(), geom.nodes())));
        }
        if let Some((node, &value)) = u.iter().enumerate().find(|(_, v)| !(**v >= 0.0)) {
            return Err(Error::NegativeDensity { node, value });
        }
        Ok(DiffusionState { u, tau, steps_taken: 0, last_step: 0.0 })
    }

    /// Uniform probability density.
    pub fn uniform(geom: &Geometry, tau: f64) -> Result<Self> {
        let total: f64 = geom.volume_weights(tau)?.sum();
        DiffusionState::new(geom, vec![1.0 / total; geom.nodes()], tau)
    }

    /// `floor + exp(−d²/(2·width²))`, normalized to unit mass. On spheres
    /// `d` is measured in the polar angle, which makes the profile a zonal
    /// ring (a cap when `center = 0`).
    pub fn bump(geom: &Geometry, center: f64, width: f64, floor: f64, tau: f64) -> Result<Self> {
        if !(width > 0.0) || !(floor >= 0.0) {
            return Err(Error::Config("bump width must be positive and floor nonnegative".into()));
        }
        let raw = bump_values(geom, center, width, floor);
        let w = geom.volume_weights(tau)?;
        let mass: f64 = raw.iter().zip(&w.values).map(|(u, w)| u * w).sum();
        DiffusionState::new(geom, raw.into_iter().map(|v| v / mass).collect(), tau)
    }

    /// `∫ u dμ(τ)`.
    pub fn mass(&self, geom: &Geometry) -> f64 {
        let w = geom.weights_unchecked(self.tau);
        self.u.iter().zip(&w).map(|(u, w)| u * w).sum()
    }
}

pub(crate) fn polar_angle(theta: f64) -> f64 {
    let t = theta.rem_euclid(2.0 * std::f64::consts::PI);
    t.min(2.0 * std::f64::consts::PI - t)
}

fn bump_values(geom: &Geometry, center: f64, width: f64, floor: f64) -> Vec<f64> {
    geom.coords()
        .iter()
        .map(|&x| {
            let d = if geom.model().is_sphere() {
                polar_angle(x) - polar_angle(center)
            } else {
                geom.coord_distance(center, x)
            };
            floor + (-d * d / (2.0 * width * width)).exp()
        })
        .collect()
}

fn flux(u: &[f64], cond: &[f64]) -> Vec<f64> {
    let n = u.len();
    (0..n)
        .map(|i| {
            let ip = (i + 1) % n;
            let im = (i + n - 1) % n;
            cond[i] * (u[ip] - u[i]) + cond[im] * (u[im] - u[i])
        })
        .collect()
}

/// Largest stable Heun step at `tau`.
fn stable_step(geom: &Geometry, tau: f64) -> f64 {
    let w = geom.weights_unchecked(tau);
    let c = geom.conductances_unchecked(tau);
    let n = w.len();
    let rate = (0..n).map(|i| (c[i] + c[(i + n - 1) % n]) / w[i]).fold(0.0, f64::max);
    CFL / rate
}

/// Advances `state` to `tau_target` with uniform explicit Heun steps below
/// the stability limit on the whole interval.
pub fn evolve_density(geom: &Geometry, state: &DiffusionState, tau_target: f64) -> Result<DiffusionState> {
    geom.check_tau(state.tau)?;
    geom.check_tau(tau_target)?;
    if tau_target < state.tau {
        return Err(Error::Domain(format!(
            "cannot evolve backwards from {} to {tau_target}",
            state.tau
        )));
    }
    let span = tau_target - state.tau;
    if span == 0.0 {
        return Ok(state.clone());
    }
    let bound = stable_step(geom, state.tau).min(stable_step(geom, tau_target));
    if bound < MIN_STEP {
        return Err(Error::Stability(bound));
    }
    let steps = (span / bound).ceil().max(1.0) as usize;
    let dt = span / steps as f64;

    let mut tau = state.tau;
    let mut u = state.u.clone();
    let w = geom.weights_unchecked(tau);
    let mut m: Vec<f64> = u.iter().zip(&w).map(|(u, w)| u * w).collect();
    for k in 0..steps {
        let next_tau = if k + 1 == steps { tau_target } else { state.tau + dt * (k + 1) as f64 };
        let h = next_tau - tau;
        let f0 = flux(&u, &geom.conductances_unchecked(tau));
        let w1 = geom.weights_unchecked(next_tau);
        let u_pred: Vec<f64> = (0..u.len()).map(|i| (m[i] + h * f0[i]) / w1[i]).collect();
        let f1 = flux(&u_pred, &geom.conductances_unchecked(next_tau));
        for i in 0..u.len() {
            m[i] += 0.5 * h * (f0[i] + f1[i]);
            u[i] = m[i] / w1[i];
        }
        if let Some((node, &value)) = u.iter().enumerate().find(|(_, v)| !(**v >= -1e-10)) {
            return Err(Error::NegativeDensity { node, value });
        }
        tau = next_tau;
    }
    Ok(DiffusionState { u, tau, steps_taken: state.steps_taken + steps, last_step: dt })
}

/// Snapshots of one diffusion on an increasing grid of times, linearly
/// interpolated in between.
#[derive(Clone, Debug, PartialEq)]
pub struct DiffusionPath {
    pub taus: Vec<f64>,
    pub densities: Vec<Vec<f64>>,
}

impl DiffusionPath {
    /// Evolves `initial` through every time of `taus` (which must start at or
    /// after the initial time and increase).
    pub fn compute(geom: &Geometry, initial: &DiffusionState, taus: &[f64]) -> Result<Self> {
        if taus.is_empty() || taus.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Config("snapshot times must be nonempty and increasing".into()));
        }
        let mut state = initial.clone();
        let mut densities = Vec::with_capacity(taus.len());
        for &t in taus {
            state = evolve_density(geom, &state, t)?;
            densities.push(state.u.clone());
        }
        Ok(DiffusionPath { taus: taus.to_vec(), densities })
    }

    pub fn tau_range(&self) -> (f64, f64) {
        (self.taus[0], *self.taus.last().unwrap())
    }

    pub fn at(&self, tau: f64) -> Result<Vec<f64>> {
        let (lo, hi) = self.tau_range();
        if !(tau >= lo && tau <= hi) {
            return Err(Error::Domain(format!("tau = {tau} outside the computed range [{lo}, {hi}]")));
        }
        let k = match self.taus.partition_point(|&t| t <= tau) {
            0 => 0,
            p => (p - 1).min(self.taus.len().saturating_sub(2)),
        };
        if self.taus.len() == 1 || self.taus[k] == tau {
            return Ok(self.densities[k].clone());
        }
        let w = (tau - self.taus[k]) / (self.taus[k + 1] - self.taus[k]);
        Ok(self.densities[k]
            .iter()
            .zip(&self.densities[k + 1])
            .map(|(a, b)| (1.0 - w) * a + w * b)
            .collect())
    }

    /// CSV with columns `tau,node_index,u`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("tau,node_index,u\n");
        for (t, u) in self.taus.iter().zip(&self.densities) {
            for (i, v) in u.iter().enumerate() {
                out.push_str(&format!("{},{i},{}\n", fmt_g17(*t), fmt_g17(*v)));
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::FlowModel;
    use crate::monitors::entropy;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    fn flat() -> Geometry {
        Geometry::build(FlowModel::StaticFlatCircle { circumference: 2.0 * PI }, 64, (1.0, 4.0)).unwrap()
    }

    #[test]
    fn uniform_is_stationary_on_flat_circle() {
        let g = flat();
        let s = DiffusionState::uniform(&g, 1.0).unwrap();
        let e = evolve_density(&g, &s, 3.0).unwrap();
        for v in &e.u {
            assert_abs_diff_eq!(*v, 1.0 / (2.0 * PI), epsilon = 1e-15);
        }
    }

    #[test]
    fn bump_conserves_mass_and_dissipates_entropy() {
        let g = flat();
        let s = DiffusionState::bump(&g, 1.0, 0.4, 0.0, 1.0).unwrap();
        let e = evolve_density(&g, &s, 2.0).unwrap();
        assert!((e.mass(&g) - 1.0).abs() < 1e-12);
        assert!(entropy(&g, &e.u, 2.0).unwrap() < entropy(&g, &s.u, 1.0).unwrap());
        assert!(e.last_step <= 0.9 * (2.0 * PI / 64.0f64).powi(2) / 2.0 + 1e-15);
    }

    #[test]
    fn uniform_sphere_density_tracks_shrinking_volume() {
        let g = Geometry::build(FlowModel::RicciRoundSphere { initial_radius: 1.0 }, 32, (1.0, 4.0)).unwrap();
        let s = DiffusionState::uniform(&g, 1.0).unwrap();
        let e = evolve_density(&g, &s, 2.5).unwrap();
        for v in &e.u {
            assert_abs_diff_eq!(*v, 1.0 / (4.0 * PI * 6.0), epsilon = 1e-14);
        }
    }

    #[test]
    fn rejects_backwards_and_negative() {
        let g = flat();
        let s = DiffusionState::uniform(&g, 2.0).unwrap();
        assert!(matches!(evolve_density(&g, &s, 1.0), Err(Error::Domain(_))));
        let mut u = vec![0.1; 64];
        u[3] = -0.5;
        assert!(matches!(DiffusionState::new(&g, u, 1.0), Err(Error::NegativeDensity { node: 3, .. })));
    }

    #[test]
    fn path_interpolates_linearly() {
        let g = flat();
        let s = DiffusionState::bump(&g, 0.0, 0.5, 0.1, 1.0).unwrap();
        let p = DiffusionPath::compute(&g, &s, &[1.0, 1.5, 2.0]).unwrap();
        let mid = p.at(1.25).unwrap();
        for i in 0..64 {
            assert_abs_diff_eq!(mid[i], 0.5 * (p.densities[0][i] + p.densities[1][i]), epsilon = 1e-15);
        }
        assert_eq!(p.at(2.0).unwrap(), p.densities[2]);
        assert!(p.at(2.5).is_err());
        assert!(p.to_csv().starts_with("tau,node_index,u\n1,0,"));
    }
}
