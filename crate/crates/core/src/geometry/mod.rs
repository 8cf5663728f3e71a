//! Evolving closed manifolds `∂τ g = 2S` and the pointwise quantities built
//! from them.
//!
//! Every built-in model is spatially homogeneous, so the metric and the flow
//! tensor only depend on `τ` and are evaluated in closed form. The mesh is a
//! uniform periodic grid on a reference circle:
//!
//! * circle models: the angle `θ ∈ [0, 2π)` with nodes `θ_i = i·h`;
//! * sphere models: the arc coordinate of a great circle through both poles,
//!   nodes `θ_i = (i + ½)·h` so that no node sits on a pole. Scalar fields on
//!   this mesh represent zonal functions (functions of the polar angle), and
//!   their volume weights integrate over the full 2-sphere.
//!
//! Tangent vectors are expressed in a local frame in which the metric is a
//! multiple of the identity; on the sphere the first frame axis points along
//! the reference great circle.

mod tabulated;

pub use tabulated::TabulatedFlow;

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Minimum mesh size accepted by [`Geometry::build`].
pub const MIN_NODES: usize = 16;

const TWO_PI: f64 = 2.0 * PI;

#[derive(Clone, Debug, PartialEq)]
pub enum FlowModel {
    /// Flat circle of fixed circumference; `S = 0`.
    StaticFlatCircle { circumference: f64 },
    /// Round 2-sphere of fixed radius; `S = 0`, `Ric = g / r²`.
    StaticRoundSphere { radius: f64 },
    /// Shrinking sphere of Ricci flow, `g(τ) = (r0² + 2τ)·g_unit`, `S = Ric`.
    RicciRoundSphere { initial_radius: f64 },
    /// Circle coupled to a harmonic circle-valued map of winding speed `c`:
    /// `g(τ) = (φ0² − 2αc²τ)·dθ²`, `S = −αc²·dθ²`.
    DilatonCircle { phi0_sq: f64, coupling: f64, winding: f64 },
    /// One-dimensional metric and flow tensor given per node and per table
    /// time.
    CustomTabulated(TabulatedFlow),
}

impl FlowModel {
    pub fn name(&self) -> &'static str {
        match self {
            FlowModel::StaticFlatCircle { .. } => "static_flat_circle",
            FlowModel::StaticRoundSphere { .. } => "static_round_sphere",
            FlowModel::RicciRoundSphere { .. } => "ricci_round_sphere",
            FlowModel::DilatonCircle { .. } => "dilaton_circle",
            FlowModel::CustomTabulated(_) => "custom_tabulated",
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            FlowModel::StaticRoundSphere { .. } | FlowModel::RicciRoundSphere { .. } => 2,
            _ => 1,
        }
    }

    pub fn is_sphere(&self) -> bool {
        self.dim() == 2
    }

    pub fn is_homogeneous(&self) -> bool {
        !matches!(self, FlowModel::CustomTabulated(_))
    }

    /// Checks parameter signs and metric positivity on `(0, tau_max]`.
    fn validate(&self, tau_max: f64) -> Result<()> {
        match *self {
            FlowModel::StaticFlatCircle { circumference } => {
                if !(circumference > 0.0) {
                    return Err(Error::Config("circumference must be positive".into()));
                }
            }
            FlowModel::StaticRoundSphere { radius } => {
                if !(radius > 0.0) {
                    return Err(Error::Config("radius must be positive".into()));
                }
            }
            FlowModel::RicciRoundSphere { initial_radius } => {
                if !(initial_radius > 0.0) {
                    return Err(Error::Config("initial radius must be positive".into()));
                }
            }
            FlowModel::DilatonCircle { phi0_sq, coupling, winding } => {
                if !(coupling > 0.0) {
                    return Err(Error::Config("dilaton coupling must be positive".into()));
                }
                if !(phi0_sq > 0.0) || !winding.is_finite() {
                    return Err(Error::Config("phi0_sq must be positive".into()));
                }
                let end = phi0_sq - 2.0 * coupling * winding * winding * tau_max;
                if !(end > 0.0) {
                    return Err(Error::Domain(format!(
                        "metric degenerates: phi0^2 - 2 alpha c^2 tau_max = {end} <= 0"
                    )));
                }
            }
            FlowModel::CustomTabulated(ref table) => table.validate()?,
        }
        Ok(())
    }
}

/// Metric components at a node in the local frame, with `√det g`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MetricSample {
    pub dim: usize,
    pub g: [[f64; 2]; 2],
    pub sqrt_det: f64,
}

impl MetricSample {
    pub fn norm_sq(&self, x: &TangentVector) -> f64 {
        quad(&self.g, &x.components, self.dim)
    }

    pub fn inverse(&self) -> [[f64; 2]; 2] {
        if self.dim == 1 {
            [[1.0 / self.g[0][0], 0.0], [0.0, 0.0]]
        } else {
            let det = self.g[0][0] * self.g[1][1] - self.g[0][1] * self.g[1][0];
            [
                [self.g[1][1] / det, -self.g[0][1] / det],
                [-self.g[1][0] / det, self.g[0][0] / det],
            ]
        }
    }
}

/// Everything the `D` and `H` displays consume at one `(node, τ)`.
///
/// `trace` is the metric trace of `S`; `dtau_trace`, `grad_trace` and
/// `lap_trace` differentiate that trace. `grad_trace` and `div_s` are
/// covectors.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FlowSample {
    pub s: [[f64; 2]; 2],
    pub trace: f64,
    pub dtau_trace: f64,
    pub grad_trace: [f64; 2],
    pub div_s: [f64; 2],
    pub s_norm_sq: f64,
    pub ricci: [[f64; 2]; 2],
    pub lap_trace: f64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct TangentVector {
    pub components: [f64; 2],
}

impl TangentVector {
    pub const ZERO: TangentVector = TangentVector { components: [0.0, 0.0] };

    pub fn new(x: f64, y: f64) -> Self {
        TangentVector { components: [x, y] }
    }

    /// A vector along the mesh direction.
    pub fn along(x: f64) -> Self {
        TangentVector { components: [x, 0.0] }
    }

    pub fn scaled(&self, k: f64) -> Self {
        TangentVector { components: [k * self.components[0], k * self.components[1]] }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField {
    pub values: Vec<f64>,
    pub tau: f64,
}

impl ScalarField {
    pub fn new(values: Vec<f64>, tau: f64) -> Self {
        ScalarField { values, tau }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }
}

/// Coefficients of the one-dimensional reduction along the mesh circle at a
/// continuous position: `|γ'|² = metric·(dγ)²`, `S(γ', γ') = s_along·(dγ)²`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LineSample {
    pub metric: f64,
    pub metric_dx: f64,
    pub trace: f64,
    pub trace_dx: f64,
    pub dtau_trace: f64,
    pub s_along: f64,
}

/// Minimum of `D(S, X)` over `X` on a set of times.
#[derive(Clone, Debug, PartialEq)]
pub struct DNonnegReport {
    pub min: f64,
    pub node: usize,
    pub tau: f64,
    pub argmin: TangentVector,
    pub tolerance: f64,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Geometry {
    model: FlowModel,
    nodes: usize,
    tau_min: f64,
    tau_max: f64,
    spacing: f64,
    coords: Vec<f64>,
}

impl Geometry {
    /// Builds an immutable geometry on a uniform periodic mesh.
    ///
    /// Closed-form models evaluate on `(0, tau_max]`; `tau_min` bounds the
    /// experiment grids and sets the default base offset of distance fields.
    /// Tabulated models evaluate on their table range only.
    pub fn build(model: FlowModel, nodes: usize, tau_domain: (f64, f64)) -> Result<Self> {
        let (tau_min, tau_max) = tau_domain;
        if nodes < MIN_NODES {
            return Err(Error::Config(format!("node count {nodes} < {MIN_NODES}")));
        }
        if !(tau_min > 0.0) || !(tau_max > tau_min) || !tau_max.is_finite() {
            return Err(Error::Domain(format!(
                "tau domain [{tau_min}, {tau_max}] must satisfy 0 < tau_min < tau_max"
            )));
        }
        model.validate(tau_max)?;
        if let FlowModel::CustomTabulated(ref table) = model {
            if table.nodes() != nodes {
                return Err(Error::Config(format!(
                    "table has {} nodes but the mesh has {nodes}",
                    table.nodes()
                )));
            }
            let (lo, hi) = table.tau_range();
            if tau_min < lo || tau_max > hi {
                return Err(Error::Domain(format!(
                    "tau domain [{tau_min}, {tau_max}] exceeds table range [{lo}, {hi}]"
                )));
            }
        }
        let spacing = TWO_PI / nodes as f64;
        let offset = if model.is_sphere() { 0.5 } else { 0.0 };
        let coords = (0..nodes).map(|i| (i as f64 + offset) * spacing).collect();
        Ok(Geometry { model, nodes, tau_min, tau_max, spacing, coords })
    }

    pub fn model(&self) -> &FlowModel {
        &self.model
    }

    pub fn dim(&self) -> usize {
        self.model.dim()
    }

    pub fn nodes(&self) -> usize {
        self.nodes
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn coord(&self, node: usize) -> f64 {
        self.coords[node]
    }

    pub fn tau_domain(&self) -> (f64, f64) {
        (self.tau_min, self.tau_max)
    }

    pub fn is_homogeneous(&self) -> bool {
        self.model.is_homogeneous()
    }

    /// Interval on which the flow can be evaluated.
    pub fn evaluable_range(&self) -> (f64, f64) {
        match self.model {
            FlowModel::CustomTabulated(ref t) => t.tau_range(),
            _ => (0.0, self.tau_max),
        }
    }

    pub fn check_tau(&self, tau: f64) -> Result<()> {
        let ok = match self.model {
            FlowModel::CustomTabulated(ref t) => {
                let (lo, hi) = t.tau_range();
                tau >= lo && tau <= hi
            }
            _ => tau > 0.0 && tau <= self.tau_max,
        };
        if ok && tau.is_finite() {
            Ok(())
        } else {
            let (lo, hi) = self.evaluable_range();
            Err(Error::Domain(format!("tau = {tau} outside ({lo}, {hi}]")))
        }
    }

    fn check_node(&self, node: usize) -> Result<()> {
        if node < self.nodes {
            Ok(())
        } else {
            Err(Error::Domain(format!("node {node} out of range 0..{}", self.nodes)))
        }
    }

    /// Wraps a coordinate into `[0, 2π)`.
    pub fn wrap(&self, x: f64) -> f64 {
        x.rem_euclid(TWO_PI)
    }

    /// Coordinate distance on the mesh circle, in `[0, π]`.
    pub fn coord_distance(&self, x: f64, y: f64) -> f64 {
        let d = (y - x).rem_euclid(TWO_PI);
        d.min(TWO_PI - d)
    }

    /// Index of the mesh node nearest to `x`.
    pub fn nearest_node(&self, x: f64) -> usize {
        let offset = if self.model.is_sphere() { 0.5 } else { 0.0 };
        let k = (self.wrap(x) / self.spacing - offset).round() as i64;
        k.rem_euclid(self.nodes as i64) as usize
    }

    /// Homogeneous scale: `g_θθ` for circles, `r²` (with `g = r²·g_unit`) for
    /// spheres. Only meaningful for closed-form models.
    fn scale(&self, tau: f64) -> f64 {
        match self.model {
            FlowModel::StaticFlatCircle { circumference } => {
                let r = circumference / TWO_PI;
                r * r
            }
            FlowModel::StaticRoundSphere { radius } => radius * radius,
            FlowModel::RicciRoundSphere { initial_radius } => {
                initial_radius * initial_radius + 2.0 * tau
            }
            FlowModel::DilatonCircle { phi0_sq, coupling, winding } => {
                phi0_sq - 2.0 * coupling * winding * winding * tau
            }
            FlowModel::CustomTabulated(_) => unreachable!("tabulated flows are not homogeneous"),
        }
    }

    pub fn metric_at(&self, node: usize, tau: f64) -> Result<MetricSample> {
        self.check_node(node)?;
        self.check_tau(tau)?;
        let a = match self.model {
            FlowModel::CustomTabulated(ref t) => t.g_node(node, tau),
            _ => self.scale(tau),
        };
        Ok(if self.dim() == 1 {
            MetricSample { dim: 1, g: [[a, 0.0], [0.0, 0.0]], sqrt_det: a.sqrt() }
        } else {
            MetricSample { dim: 2, g: [[a, 0.0], [0.0, a]], sqrt_det: a }
        })
    }

    pub fn flow_sample(&self, node: usize, tau: f64) -> Result<FlowSample> {
        self.check_node(node)?;
        self.check_tau(tau)?;
        let zero2 = [[0.0; 2]; 2];
        let sample = match self.model {
            FlowModel::StaticFlatCircle { .. } => FlowSample {
                s: zero2,
                trace: 0.0,
                dtau_trace: 0.0,
                grad_trace: [0.0; 2],
                div_s: [0.0; 2],
                s_norm_sq: 0.0,
                ricci: zero2,
                lap_trace: 0.0,
            },
            FlowModel::StaticRoundSphere { .. } => FlowSample {
                s: zero2,
                trace: 0.0,
                dtau_trace: 0.0,
                grad_trace: [0.0; 2],
                div_s: [0.0; 2],
                s_norm_sq: 0.0,
                ricci: [[1.0, 0.0], [0.0, 1.0]],
                lap_trace: 0.0,
            },
            FlowModel::RicciRoundSphere { .. } => {
                // g = ρ·δ in the frame, Ric = δ, so trace = 2/ρ.
                let rho = self.scale(tau);
                FlowSample {
                    s: [[1.0, 0.0], [0.0, 1.0]],
                    trace: 2.0 / rho,
                    dtau_trace: -4.0 / (rho * rho),
                    grad_trace: [0.0; 2],
                    div_s: [0.0; 2],
                    s_norm_sq: 2.0 / (rho * rho),
                    ricci: [[1.0, 0.0], [0.0, 1.0]],
                    lap_trace: 0.0,
                }
            }
            FlowModel::DilatonCircle { coupling, winding, .. } => {
                let k = coupling * winding * winding;
                let phi2 = self.scale(tau);
                FlowSample {
                    s: [[-k, 0.0], [0.0, 0.0]],
                    trace: -k / phi2,
                    dtau_trace: -2.0 * k * k / (phi2 * phi2),
                    grad_trace: [0.0; 2],
                    div_s: [0.0; 2],
                    s_norm_sq: k * k / (phi2 * phi2),
                    ricci: zero2,
                    lap_trace: 0.0,
                }
            }
            FlowModel::CustomTabulated(ref t) => self.tabulated_flow_sample(t, node, tau),
        };
        Ok(sample)
    }

    fn tabulated_flow_sample(&self, t: &TabulatedFlow, node: usize, tau: f64) -> FlowSample {
        let n = self.nodes;
        let h = self.spacing;
        let ip = (node + 1) % n;
        let im = (node + n - 1) % n;
        let g = t.g_node(node, tau);
        let s = t.s_node(node, tau);
        let trace = s / g;
        let grad = (t.trace_node(ip, tau) - t.trace_node(im, tau)) / (2.0 * h);
        let ds = (t.s_node(ip, tau) - t.s_node(im, tau)) / (2.0 * h);
        let dg = (t.g_node(ip, tau) - t.g_node(im, tau)) / (2.0 * h);
        // ∇_θ S_θθ = ∂θ S − 2Γ S with Γ = ∂θ g / (2g); raise the first index.
        let div = (ds - dg / g * s) / g;
        let traces: Vec<f64> = (0..n).map(|i| t.trace_node(i, tau)).collect();
        let lap = self.laplacian_at(&traces, node, tau);
        FlowSample {
            s: [[s, 0.0], [0.0, 0.0]],
            trace,
            dtau_trace: t.dtau_trace_node(node, tau),
            grad_trace: [grad, 0.0],
            div_s: [div, 0.0],
            s_norm_sq: trace * trace,
            ricci: [[0.0; 2]; 2],
            lap_trace: lap,
        }
    }

    /// Coefficients of the one-dimensional reduction at a continuous
    /// coordinate `x` on the mesh circle.
    pub fn line_sample(&self, x: f64, tau: f64) -> LineSample {
        match self.model {
            FlowModel::CustomTabulated(ref t) => t.line_sample(self.wrap(x), self.spacing, tau),
            _ => {
                let a = self.scale(tau);
                let (trace, dtau_trace, s_along) = match self.model {
                    FlowModel::RicciRoundSphere { .. } => (2.0 / a, -4.0 / (a * a), 1.0),
                    FlowModel::DilatonCircle { coupling, winding, .. } => {
                        let k = coupling * winding * winding;
                        (-k / a, -2.0 * k * k / (a * a), -k)
                    }
                    _ => (0.0, 0.0, 0.0),
                };
                LineSample { metric: a, metric_dx: 0.0, trace, trace_dx: 0.0, dtau_trace, s_along }
            }
        }
    }

    /// Volume of each mesh cell under `g(τ)`; sums to the total volume.
    pub fn volume_weights(&self, tau: f64) -> Result<ScalarField> {
        self.check_tau(tau)?;
        Ok(ScalarField::new(self.weights_unchecked(tau), tau))
    }

    pub(crate) fn weights_unchecked(&self, tau: f64) -> Vec<f64> {
        let h = self.spacing;
        match self.model {
            FlowModel::CustomTabulated(ref t) => {
                (0..self.nodes).map(|i| t.g_node(i, tau).sqrt() * h).collect()
            }
            _ if self.model.is_sphere() => {
                // Each polar band appears twice on the great circle, hence π
                // rather than 2π for the azimuthal factor.
                let rho = self.scale(tau);
                (0..self.nodes)
                    .map(|i| {
                        let a = i as f64 * h;
                        rho * PI * (a.cos() - (a + h).cos()).abs()
                    })
                    .collect()
            }
            _ => vec![self.scale(tau).sqrt() * h; self.nodes],
        }
    }

    /// Conductance of the edge between node `i` and node `i + 1`.
    pub(crate) fn conductances_unchecked(&self, tau: f64) -> Vec<f64> {
        let h = self.spacing;
        match self.model {
            FlowModel::CustomTabulated(ref t) => (0..self.nodes)
                .map(|i| {
                    let j = (i + 1) % self.nodes;
                    let root = 0.5 * (t.g_node(i, tau).sqrt() + t.g_node(j, tau).sqrt());
                    1.0 / (root * h)
                })
                .collect(),
            _ if self.model.is_sphere() => (0..self.nodes)
                .map(|i| PI * ((i + 1) as f64 * h).sin().abs() / h)
                .collect(),
            _ => vec![1.0 / (self.scale(tau).sqrt() * h); self.nodes],
        }
    }

    fn laplacian_at(&self, values: &[f64], node: usize, tau: f64) -> f64 {
        let w = self.weights_unchecked(tau);
        let c = self.conductances_unchecked(tau);
        let n = self.nodes;
        let im = (node + n - 1) % n;
        let ip = (node + 1) % n;
        (c[node] * (values[ip] - values[node]) + c[im] * (values[im] - values[node])) / w[node]
    }

    /// Conservative second-order Laplace–Beltrami operator of `g(τ)`,
    /// self-adjoint with respect to [`Geometry::volume_weights`].
    pub fn laplace_beltrami(&self, field: &ScalarField, tau: f64) -> Result<ScalarField> {
        self.check_tau(tau)?;
        if field.len() != self.nodes {
            return Err(Error::Config(format!(
                "field has {} values, mesh has {} nodes",
                field.len(),
                self.nodes
            )));
        }
        let w = self.weights_unchecked(tau);
        let c = self.conductances_unchecked(tau);
        Ok(ScalarField::new(apply_laplacian(&field.values, &w, &c), tau))
    }

    /// `D(S, X) = −∂τS − ΔS − 2|S|² + 4(div S)(X) − 2dS(X) + 2Ric(X,X) − 2S(X,X)`,
    /// with every displayed index pair contracted through `g(τ)`.
    pub fn d_quantity(&self, node: usize, tau: f64, x: &TangentVector) -> Result<f64> {
        let f = self.flow_sample(node, tau)?;
        let dim = self.dim();
        let v = &x.components;
        Ok(-f.dtau_trace - f.lap_trace - 2.0 * f.s_norm_sq + 4.0 * dot(&f.div_s, v, dim)
            - 2.0 * dot(&f.grad_trace, v, dim)
            + 2.0 * quad(&f.ricci, v, dim)
            - 2.0 * quad(&f.s, v, dim))
    }

    /// `H(S, X) = −∂τS − S/τ − 2X(S) + 2S(X,X)`.
    pub fn h_quantity(&self, node: usize, tau: f64, x: &TangentVector) -> Result<f64> {
        let f = self.flow_sample(node, tau)?;
        let dim = self.dim();
        let v = &x.components;
        Ok(-f.dtau_trace - f.trace / tau - 2.0 * dot(&f.grad_trace, v, dim)
            + 2.0 * quad(&f.s, v, dim))
    }

    /// Minimizes `D(S, X)` over `X` at every node and time of `tau_grid`.
    ///
    /// `D` is quadratic in `X` with Hessian `2(Ric − S)`. When that form is
    /// positive definite the minimum is taken in closed form, otherwise over a
    /// grid of directions and magnitudes up to `|X|_g = 10`.
    pub fn verify_d_nonneg(&self, tau_grid: &[f64], tolerance: f64) -> Result<DNonnegReport> {
        let dim = self.dim();
        let mut best = DNonnegReport {
            min: f64::INFINITY,
            node: 0,
            tau: f64::NAN,
            argmin: TangentVector::ZERO,
            tolerance,
            passed: false,
        };
        for &tau in tau_grid {
            for node in 0..self.nodes {
                let f = self.flow_sample(node, tau)?;
                let m = self.metric_at(node, tau)?;
                let c = self.d_quantity(node, tau, &TangentVector::ZERO)?;
                let b = [
                    4.0 * f.div_s[0] - 2.0 * f.grad_trace[0],
                    4.0 * f.div_s[1] - 2.0 * f.grad_trace[1],
                ];
                let a = [
                    [f.ricci[0][0] - f.s[0][0], f.ricci[0][1] - f.s[0][1]],
                    [f.ricci[1][0] - f.s[1][0], f.ricci[1][1] - f.s[1][1]],
                ];
                let (value, x) = match solve_quadratic_min(&a, &b, dim) {
                    Some(x) => (c + 0.5 * dot(&b, &x.components, dim), x),
                    None => sample_quadratic_min(c, &a, &b, &m, dim),
                };
                if value < best.min {
                    best.min = value;
                    best.node = node;
                    best.tau = tau;
                    best.argmin = x;
                }
            }
        }
        best.passed = best.min >= -tolerance;
        Ok(best)
    }

    /// Largest residual of `∂τ g = 2S` over the nodes at `tau`, with `∂τ g`
    /// from a centered difference of step `dtau`.
    pub fn flow_consistency_residual(&self, tau: f64, dtau: f64) -> Result<f64> {
        self.check_tau(tau - dtau)?;
        self.check_tau(tau + dtau)?;
        let mut worst = 0.0f64;
        for node in 0..self.nodes {
            let gp = self.metric_at(node, tau + dtau)?.g[0][0];
            let gm = self.metric_at(node, tau - dtau)?.g[0][0];
            let s = self.flow_sample(node, tau)?.s[0][0];
            worst = worst.max(((gp - gm) / (2.0 * dtau) - 2.0 * s).abs());
        }
        Ok(worst)
    }
}

pub(crate) fn apply_laplacian(values: &[f64], weights: &[f64], cond: &[f64]) -> Vec<f64> {
    let n = values.len();
    (0..n)
        .map(|i| {
            let ip = (i + 1) % n;
            let im = (i + n - 1) % n;
            (cond[i] * (values[ip] - values[i]) + cond[im] * (values[im] - values[i])) / weights[i]
        })
        .collect()
}

fn dot(a: &[f64; 2], b: &[f64; 2], dim: usize) -> f64 {
    (0..dim).map(|i| a[i] * b[i]).sum()
}

fn quad(m: &[[f64; 2]; 2], v: &[f64; 2], dim: usize) -> f64 {
    let mut acc = 0.0;
    for i in 0..dim {
        for j in 0..dim {
            acc += m[i][j] * v[i] * v[j];
        }
    }
    acc
}

/// Minimizer of `b·X + 2 XᵀAX` when `A` is positive definite.
fn solve_quadratic_min(a: &[[f64; 2]; 2], b: &[f64; 2], dim: usize) -> Option<TangentVector> {
    const EPS: f64 = 1e-14;
    if dim == 1 {
        if a[0][0] > EPS {
            return Some(TangentVector::along(-b[0] / (4.0 * a[0][0])));
        }
        return None;
    }
    let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
    if a[0][0] > EPS && det > EPS {
        // X = −¼ A⁻¹ b
        let x0 = (a[1][1] * b[0] - a[0][1] * b[1]) / det;
        let x1 = (-a[1][0] * b[0] + a[0][0] * b[1]) / det;
        return Some(TangentVector::new(-0.25 * x0, -0.25 * x1));
    }
    None
}

fn sample_quadratic_min(
    c: f64,
    a: &[[f64; 2]; 2],
    b: &[f64; 2],
    m: &MetricSample,
    dim: usize,
) -> (f64, TangentVector) {
    let directions: Vec<[f64; 2]> = if dim == 1 {
        vec![[1.0, 0.0], [-1.0, 0.0]]
    } else {
        (0..32)
            .map(|k| {
                let t = k as f64 * PI / 16.0;
                [t.cos(), t.sin()]
            })
            .collect()
    };
    let mut best = (c, TangentVector::ZERO);
    for d in &directions {
        let unit = m.norm_sq(&TangentVector { components: *d }).sqrt();
        for j in 0..=40 {
            let magnitude = 1e-3 * 10f64.powf(j as f64 / 10.0);
            let k = magnitude / unit;
            let v = [d[0] * k, d[1] * k];
            let value = c + dot(b, &v, dim) + 2.0 * quad(a, &v, dim);
            if value < best.0 {
                best = (value, TangentVector { components: v });
            }
        }
    }
    best
}

/// Periodic Catmull–Rom interpolation of node values on a uniform mesh with
/// nodes at `i·h`; returns the value and its derivative at `x`.
pub(crate) fn periodic_cubic(values: &[f64], h: f64, x: f64) -> (f64, f64) {
    let n = values.len() as i64;
    let u = x / h;
    let i = u.floor();
    let t = u - i;
    let i = i as i64;
    let at = |k: i64| values[k.rem_euclid(n) as usize];
    let (p0, p1, p2, p3) = (at(i - 1), at(i), at(i + 1), at(i + 2));
    let a = -0.5 * p0 + 1.5 * p1 - 1.5 * p2 + 0.5 * p3;
    let b = p0 - 2.5 * p1 + 2.0 * p2 - 0.5 * p3;
    let c = -0.5 * p0 + 0.5 * p2;
    let value = ((a * t + b) * t + c) * t + p1;
    let deriv = ((3.0 * a * t + 2.0 * b) * t + c) / h;
    (value, deriv)
}
