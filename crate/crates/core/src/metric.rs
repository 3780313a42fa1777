//! Metric tensor fields, mean-curvature formulas, and element averages.
//!
//! A metric field assigns an SPD matrix `M(x)` to every point near the
//! surface; the mesh adapts so that elements become uniform with respect to
//! it. All stock fields are scalar matrices `s(x)·I`, with `s` bounded below
//! by machine epsilon so that the field stays uniformly positive definite.

use std::sync::Arc;

use nalgebra::SMatrix;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{Point, SurfaceMesh};
use crate::surfaces::ImplicitSurface;

/// Regularization floor added to curvature-based fields.
pub const METRIC_EPSILON: f64 = f64::EPSILON;

/// A metric tensor field `M(x)`.
#[derive(Clone)]
pub enum MetricField<const D: usize> {
    /// `M = I`: adapt toward Euclidean uniformity.
    Identity,
    /// `M = (k(x) + ε)I` with `k` the mean curvature of the level set.
    Curvature,
    /// Curvature metric augmented with weights that concentrate elements near
    /// the poles `z = ±2` (used for the stretched ellipsoid):
    /// `M = (k + ε)I + (1/√((z−2)² + ε) + 1/√((z+2)² + ε))·I`.
    CurvatureTips,
    /// `M = s(x)·I` for a user-supplied positive scalar.
    UserScalar(Arc<dyn Fn(&Point<D>) -> f64 + Send + Sync>),
}

impl<const D: usize> std::fmt::Debug for MetricField<D> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            MetricField::Identity => "identity",
            MetricField::Curvature => "curvature",
            MetricField::CurvatureTips => "tips",
            MetricField::UserScalar(_) => "user-scalar",
        };
        f.write_str(name)
    }
}

impl<const D: usize> MetricField<D> {
    /// Parses the CLI metric names.
    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "identity" => Ok(MetricField::Identity),
            "curvature" => Ok(MetricField::Curvature),
            "tips" => Ok(MetricField::CurvatureTips),
            _ => Err(Error::InvalidArgument(format!(
                "unknown metric {name:?}; available: identity, curvature, tips"
            ))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            MetricField::Identity => "identity",
            MetricField::Curvature => "curvature",
            MetricField::CurvatureTips => "tips",
            MetricField::UserScalar(_) => "user-scalar",
        }
    }
}

/// Mean curvature of the level set `Φ = 0` at `x`, from the implicit-function
/// formulas (absolute value; curves use the 2D formula, surfaces the 3D one).
pub fn mean_curvature<const D: usize>(surface: &ImplicitSurface<D>, x: &Point<D>) -> Result<f64> {
    let g = surface.gradient(x);
    let gn = g.norm();
    if gn <= 1e-12 {
        return Err(Error::VanishingGradient { vertex: None });
    }
    let h = surface.hessian(x);
    let k = match D {
        2 => {
            let num = h[(0, 0)] * g[1] * g[1] - 2.0 * h[(0, 1)] * g[0] * g[1]
                + g[0] * g[0] * h[(1, 1)];
            num.abs() / gn.powi(3)
        }
        3 => {
            let d1 = g[0] * (g[0] * h[(0, 0)] + g[1] * h[(0, 1)] + g[2] * h[(0, 2)]);
            let d2 = g[1] * (g[0] * h[(0, 1)] + g[1] * h[(1, 1)] + g[2] * h[(1, 2)]);
            let d3 = g[2] * (g[0] * h[(0, 2)] + g[1] * h[(1, 2)] + g[2] * h[(2, 2)]);
            let d4 = gn * gn * (h[(0, 0)] + h[(1, 1)] + h[(2, 2)]);
            (d1 + d2 + d3 - d4).abs() / (2.0 * gn.powi(3))
        }
        _ => unreachable!("ambient dimension is 2 or 3"),
    };
    Ok(k)
}

/// Evaluates the metric field at a point.
pub fn metric_at<const D: usize>(
    field: &MetricField<D>,
    surface: &ImplicitSurface<D>,
    x: &Point<D>,
) -> Result<SMatrix<f64, D, D>> {
    let s = match field {
        MetricField::Identity => 1.0,
        MetricField::Curvature => mean_curvature(surface, x)? + METRIC_EPSILON,
        MetricField::CurvatureTips => {
            let k = mean_curvature(surface, x)? + METRIC_EPSILON;
            let z = x[D - 1];
            let tips = 1.0 / ((z - 2.0) * (z - 2.0) + METRIC_EPSILON).sqrt()
                + 1.0 / ((z + 2.0) * (z + 2.0) + METRIC_EPSILON).sqrt();
            k + tips
        }
        MetricField::UserScalar(f) => f(x),
    };
    if !(s >= METRIC_EPSILON) || !s.is_finite() {
        return Err(Error::NonSpdMetric);
    }
    Ok(SMatrix::<f64, D, D>::identity() * s)
}

/// Metric samples at every vertex and their per-element averages
/// `M_K = (1/d)·Σ_j M(x_j^K)` (the exact average of the piecewise-linear
/// interpolant over a simplex).
#[derive(Debug, Clone)]
pub struct VertexMetrics<const D: usize> {
    pub vertex: Vec<SMatrix<f64, D, D>>,
    pub element: Vec<SMatrix<f64, D, D>>,
}

impl<const D: usize> VertexMetrics<D> {
    /// Constant field shortcut, mostly for tests and identity runs.
    pub fn constant(mesh: &SurfaceMesh<D>, m: SMatrix<f64, D, D>) -> Self {
        Self {
            vertex: vec![m; mesh.num_vertices()],
            element: vec![m; mesh.num_elements()],
        }
    }

    /// Metric samples of the given element's vertices, in element order.
    pub fn of_element(&self, mesh: &SurfaceMesh<D>, k: usize) -> [SMatrix<f64, D, D>; D] {
        let elem = mesh.element(k);
        std::array::from_fn(|j| self.vertex[elem[j]])
    }
}

/// Samples the field at every vertex and averages per element.
pub fn element_average<const D: usize>(
    field: &MetricField<D>,
    surface: &ImplicitSurface<D>,
    mesh: &SurfaceMesh<D>,
) -> Result<VertexMetrics<D>> {
    let vertex: Vec<SMatrix<f64, D, D>> = mesh
        .vertices()
        .par_iter()
        .enumerate()
        .map(|(i, x)| {
            metric_at(field, surface, x).map_err(|e| Error::MetricAtVertex {
                vertex: i,
                source: Box::new(e),
            })
        })
        .collect::<Result<_>>()?;
    let element = mesh
        .elements()
        .iter()
        .map(|elem| {
            let mut m = SMatrix::<f64, D, D>::zeros();
            for &v in elem.iter() {
                m += vertex[v];
            }
            m / D as f64
        })
        .collect();
    Ok(VertexMetrics { vertex, element })
}
