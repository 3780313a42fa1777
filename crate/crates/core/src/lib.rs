//! Adaptive simplicial meshes on implicit curves and surfaces.
//!
//! A mesh on a curve in `ℝ²` (segments) or a surface in `ℝ³` (triangles) is
//! evolved by the gradient flow of a meshing energy that combines an
//! equidistribution term (all elements share the same size in a prescribed
//! Riemannian metric) with an alignment term (all elements are similar to an
//! equilateral reference element in that metric). Nodal velocities are
//! projected onto the tangent plane of the underlying implicit surface
//! `Φ(x) = 0`, so vertices move along the surface; connectivity never changes.
//!
//! The crate is organized around the pipeline:
//!
//! - [`geometry`]: mesh storage, reference element, per-element frames
//!   (edge matrices, metric Gram matrices, areas, altitudes);
//! - [`metric`]: metric tensor fields `M(x)`, mean-curvature formulas, and
//!   per-element averages;
//! - [`energy`]: the meshing energy, its per-frame derivatives, mesh quality
//!   measures, and the nonsingularity bound calculators;
//! - [`gradient`]: analytic derivatives of the energy with respect to vertex
//!   coordinates, assembled over element patches;
//! - [`mover`]: tangent-projected nodal velocities, boundary sliding,
//!   adaptive Runge-Kutta time integration, and trajectory audits;
//! - [`surfaces`]: a catalog of implicit curves/surfaces with analytic
//!   derivatives and seeded initial-mesh generators;
//! - [`io`]: mesh, trace, and summary file formats;
//! - [`cli`]: the batch front end used by the `surfmm` binary.
//!
//! Kernels are generic over the ambient dimension `D ∈ {2, 3}` and the
//! element dimension `E = D - 1`.

pub mod cli;
pub mod energy;
pub mod error;
pub mod geometry;
pub mod gradient;
pub mod io;
pub mod linalg;
pub mod metric;
pub mod mover;
pub mod surfaces;

pub use error::{Error, Result};
