//! Numerical laboratory for L-optimal transportation on closed manifolds
//! whose metric evolves backwards in time by `∂τ g = 2S`.
//!
//! The crate is organised bottom-up:
//!
//! * [`geometry`]: closed-form (and tabulated) evolving metrics, the flow
//!   tensor `S`, discrete Laplace–Beltrami operators and the pointwise
//!   quantities `D(S, X)` and `H(S, X)`.
//! * [`lgeodesic`]: L-length, minimizing L-geodesics, the L-distance `Q`,
//!   its first variations, the L-exponential map and its Jacobian.
//! * [`transport`]: cost assembly, exact (transportation simplex) and
//!   entropic (Sinkhorn) solvers, the renormalized distance `Θ(s)` and
//!   push-forward geodesics.
//! * [`diffusion`]: densities evolving by `∂τ u = Δu − S u`.
//! * [`monitors`]: every monotone / convex quantity assembled into
//!   [`monitors::MonitorSeries`] with deterministic verdicts.

pub mod diffusion;
pub mod error;
pub mod geometry;
pub mod io;
pub mod lgeodesic;
pub mod monitors;
pub mod transport;

pub use error::{Error, Result};
pub use geometry::{FlowModel, Geometry, ScalarField, TangentVector};
