//! Analytic derivatives of the meshing energy with respect to vertex
//! coordinates, and their assembly over element patches.
//!
//! Per element the chain rule splits into an edge-matrix term and a metric
//! term. The metric term treats `M` as the piecewise-linear interpolant of
//! its vertex samples, evaluated at the element barycenter, so the metric's
//! dependence on vertex positions enters through the (tangential) basis
//! function gradients. Row `j` of an [`ElementGradient`] is the derivative
//! with respect to vertex `j` of the element; vertex 1 closes the telescoping
//! sum so that constant metrics make the rows sum to zero exactly.

use nalgebra::{RowSVector, SMatrix, SVector};
use rayon::prelude::*;

use crate::energy::{d_energy_d_ratio, d_energy_d_shape, EnergyParams};
use crate::error::{Error, Result};
use crate::geometry::{ElementFrame, ReferenceElement, SurfaceMesh};
use crate::linalg;
use crate::metric::VertexMetrics;

/// Rows of `∂G_K/∂x_j^K`, one per element vertex.
pub type ElementGradient<const D: usize> = SMatrix<f64, D, D>;

/// Assembled `∂I_h/∂x_i`, stored per vertex as column vectors.
#[derive(Debug, Clone)]
pub struct MeshGradient<const D: usize> {
    pub per_vertex: Vec<SVector<f64, D>>,
}

/// `∂G/∂E_K`, an `(d−1)×d` matrix whose row `j−1` differentiates with
/// respect to vertex `j` (with the metric held fixed).
pub fn d_energy_d_edges<const D: usize, const E: usize>(
    frame: &ElementFrame<D, E>,
    eref: &ReferenceElement<E>,
    d_shape: &SMatrix<f64, E, E>,
    d_ratio: f64,
) -> SMatrix<f64, E, D> {
    let ehat = &eref.edge_matrix;
    let etm = frame.edges.transpose() * frame.metric;
    let inner = frame.gram_inv * ehat.transpose() * d_shape * ehat * frame.gram_inv;
    // det(Ê)²/det(EᵀME) is exactly the frame's ratio.
    -2.0 * inner * etm - 2.0 * frame.ratio * d_ratio * frame.gram_inv * etm
}

/// `∂G/∂M_K`, symmetric `d×d`.
pub fn d_energy_d_metric<const D: usize, const E: usize>(
    frame: &ElementFrame<D, E>,
    eref: &ReferenceElement<E>,
    d_shape: &SMatrix<f64, E, E>,
    d_ratio: f64,
) -> SMatrix<f64, D, D> {
    let ehat = &eref.edge_matrix;
    let e_gi = frame.edges * frame.gram_inv;
    let first = e_gi * ehat.transpose() * d_shape * ehat * e_gi.transpose();
    let second = frame.ratio * d_ratio * (e_gi * frame.edges.transpose());
    -first - second
}

/// Gradients of the linear basis functions, one row per element vertex.
///
/// Rows `2..d` solve `(EᵀE)·X = Eᵀ`; row 1 is minus their sum, so the rows
/// always sum to zero. The gradients lie in the element's tangent plane.
pub fn basis_gradients<const D: usize, const E: usize>(
    element: usize,
    edges: &SMatrix<f64, D, E>,
) -> Result<SMatrix<f64, D, D>> {
    let gram = edges.transpose() * edges;
    let gram_inv = linalg::spd_inverse(&gram).ok_or(Error::DegenerateElement { element })?;
    let x = gram_inv * edges.transpose();
    let mut rows = SMatrix::<f64, D, D>::zeros();
    let mut first = RowSVector::<f64, D>::zeros();
    for j in 0..E {
        rows.set_row(j + 1, &x.row(j));
        first -= x.row(j);
    }
    rows.set_row(0, &first);
    Ok(rows)
}

/// Full per-vertex derivative rows of one element's energy, including the
/// metric's dependence on vertex positions.
pub fn element_vertex_gradients<const D: usize, const E: usize>(
    frame: &ElementFrame<D, E>,
    eref: &ReferenceElement<E>,
    vertex_metrics: &[SMatrix<f64, D, D>; D],
    params: &EnergyParams,
) -> Result<ElementGradient<D>> {
    let d_shape = d_energy_d_shape(frame, eref, params);
    let d_ratio = d_energy_d_ratio(frame, eref, params);
    let d_edges = d_energy_d_edges(frame, eref, &d_shape, d_ratio);
    let d_metric = d_energy_d_metric(frame, eref, &d_shape, d_ratio);
    let phi = basis_gradients(frame.element, &frame.edges)?;

    // s = Σ_j tr(∂G/∂M · M_j) ∂φ_j/∂x
    let mut s = RowSVector::<f64, D>::zeros();
    for j in 0..D {
        let w = (d_metric * vertex_metrics[j]).trace();
        s += phi.row(j) * w;
    }

    let mut rows = SMatrix::<f64, D, D>::zeros();
    let mut first = s;
    for j in 0..E {
        let row = d_edges.row(j) + s / D as f64;
        rows.set_row(j + 1, &row);
        first -= row;
    }
    rows.set_row(0, &first);
    Ok(rows)
}

/// Patch-sums per-element gradient rows into `∂I_h/∂x_i`.
pub fn assemble<const D: usize>(
    mesh: &SurfaceMesh<D>,
    element_gradients: &[ElementGradient<D>],
) -> MeshGradient<D> {
    let per_vertex = (0..mesh.num_vertices())
        .into_par_iter()
        .map(|i| {
            let mut g = SVector::<f64, D>::zeros();
            for pr in mesh.patch(i) {
                g += element_gradients[pr.element].row(pr.local).transpose();
            }
            g
        })
        .collect();
    MeshGradient { per_vertex }
}

/// Per-element gradient rows for the whole mesh, in element order.
pub fn element_gradients<const D: usize, const E: usize>(
    mesh: &SurfaceMesh<D>,
    metrics: &VertexMetrics<D>,
    params: &EnergyParams,
    eref: &ReferenceElement<E>,
) -> Result<Vec<ElementGradient<D>>> {
    let rows: Vec<Result<ElementGradient<D>>> = (0..mesh.num_elements())
        .into_par_iter()
        .map(|k| {
            let frame = ElementFrame::new(k, mesh.edge_matrix(k), metrics.element[k], eref)?;
            element_vertex_gradients(&frame, eref, &metrics.of_element(mesh, k), params)
        })
        .collect();
    rows.into_iter().collect()
}

/// Assembled energy gradient of the whole mesh.
pub fn mesh_gradient<const D: usize, const E: usize>(
    mesh: &SurfaceMesh<D>,
    metrics: &VertexMetrics<D>,
    params: &EnergyParams,
) -> Result<MeshGradient<D>> {
    let eref = ReferenceElement::<E>::unit();
    let grads = element_gradients(mesh, metrics, params, &eref)?;
    Ok(assemble(mesh, &grads))
}
