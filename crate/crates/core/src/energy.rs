//! The meshing energy, its derivatives with respect to per-frame quantities,
//! mesh quality measures, and the nonsingularity bound calculators.
//!
//! Per element the energy is
//!
//! ```text
//! G = |K̂| · r^{-1/2} · [ θ·tr(J)^{pE/2} + (1−2θ)·E^{pE/2}·r^{p/2} ]
//! ```
//!
//! where `J` is the frame's shape matrix, `r` its squared reference-to-
//! physical metric-area ratio, and `E = d−1`. The first term penalizes
//! misalignment with the reference shape, the second deviation from
//! equidistribution; `θ` balances the two. The total energy is the sum over
//! elements, evaluated with the unit-area reference element.

use nalgebra::SMatrix;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{
    element_area, element_area_metric, ElementFrame, ReferenceElement, SurfaceMesh,
};
use crate::linalg;
use crate::metric::VertexMetrics;

/// Dimensionless energy parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyParams {
    /// Adaptation exponent, > 1. Larger values push the mesh toward
    /// uniformity faster.
    pub p: f64,
    /// Balance between alignment (θ = 1) and equidistribution (θ = 0).
    /// The nonsingularity guarantees need θ ∈ (0, 1/2].
    pub theta: f64,
}

impl Default for EnergyParams {
    fn default() -> Self {
        Self {
            p: 1.5,
            theta: 1.0 / 3.0,
        }
    }
}

impl EnergyParams {
    pub fn new(p: f64, theta: f64) -> Self {
        let params = Self { p, theta };
        if !params.in_coercive_range() {
            log::warn!(
                "energy parameters p = {p}, theta = {theta} are outside the range \
                 (p > 1, 0 < theta <= 1/2) covered by the nonsingularity guarantees"
            );
        }
        params
    }

    pub fn in_coercive_range(&self) -> bool {
        self.p > 1.0 && self.theta > 0.0 && self.theta <= 0.5
    }
}

/// `G(J, r)` for one element frame.
pub fn element_energy<const D: usize, const E: usize>(
    frame: &ElementFrame<D, E>,
    eref: &ReferenceElement<E>,
    params: &EnergyParams,
) -> f64 {
    let e = E as f64;
    let pe2 = params.p * e / 2.0;
    let tr = frame.shape.trace();
    let align = params.theta * tr.powf(pe2);
    let equi = (1.0 - 2.0 * params.theta) * e.powf(pe2) * frame.ratio.powf(params.p / 2.0);
    eref.area * frame.ratio.powf(-0.5) * (align + equi)
}

/// `∂G/∂J`: a scalar multiple of the identity.
pub fn d_energy_d_shape<const D: usize, const E: usize>(
    frame: &ElementFrame<D, E>,
    eref: &ReferenceElement<E>,
    params: &EnergyParams,
) -> SMatrix<f64, E, E> {
    let e = E as f64;
    let pe2 = params.p * e / 2.0;
    let tr = frame.shape.trace();
    let coeff =
        params.theta * pe2 * eref.area * frame.ratio.powf(-0.5) * tr.powf((params.p * e - 2.0) / 2.0);
    SMatrix::<f64, E, E>::identity() * coeff
}

/// `∂G/∂r`.
pub fn d_energy_d_ratio<const D: usize, const E: usize>(
    frame: &ElementFrame<D, E>,
    eref: &ReferenceElement<E>,
    params: &EnergyParams,
) -> f64 {
    let e = E as f64;
    let pe2 = params.p * e / 2.0;
    let tr = frame.shape.trace();
    -0.5 * params.theta * eref.area * frame.ratio.powf(-1.5) * tr.powf(pe2)
        + 0.5
            * (params.p - 1.0)
            * (1.0 - 2.0 * params.theta)
            * e.powf(pe2)
            * eref.area
            * frame.ratio.powf((params.p - 3.0) / 2.0)
}

/// Mesh-level energy evaluation.
#[derive(Debug, Clone)]
pub struct EnergyReport {
    /// Total energy `I_h = Σ_K G`.
    pub total: f64,
    /// Per-element energies, in element order.
    pub per_element: Vec<f64>,
    /// `σ_h = Σ_K |K|_{M_K}`.
    pub sigma: f64,
    /// `max_K |K|_{M_K} / (σ_h/N)`; 1 means equidistributed.
    pub q_eq: f64,
    /// `max_K tr(J)/(E·det(J)^{1/E})`; 1 means aligned. Identically 1 in 2D.
    pub q_ali: f64,
    /// Smallest Euclidean element area.
    pub min_area: f64,
}

/// Sums the energy over all elements with the unit reference element;
/// see [`total_energy_with_ref`] for the general version.
pub fn total_energy<const D: usize, const E: usize>(
    mesh: &SurfaceMesh<D>,
    metrics: &VertexMetrics<D>,
    params: &EnergyParams,
) -> Result<EnergyReport> {
    total_energy_with_ref(mesh, metrics, params, &ReferenceElement::unit())
}

pub fn total_energy_with_ref<const D: usize, const E: usize>(
    mesh: &SurfaceMesh<D>,
    metrics: &VertexMetrics<D>,
    params: &EnergyParams,
    eref: &ReferenceElement<E>,
) -> Result<EnergyReport> {
    struct PerElement {
        energy: f64,
        metric_area: f64,
        euclid_area: f64,
        alignment: f64,
    }

    let rows: Vec<Result<PerElement>> = (0..mesh.num_elements())
        .into_par_iter()
        .map(|k| {
            let frame = ElementFrame::new(k, mesh.edge_matrix(k), metrics.element[k], eref)?;
            let alignment = match E {
                1 => 1.0,
                _ => {
                    let det = linalg::spd_det(&frame.shape)
                        .ok_or(Error::DegenerateElement { element: k })?;
                    frame.shape.trace() / (E as f64 * det.powf(1.0 / E as f64))
                }
            };
            Ok(PerElement {
                energy: element_energy(&frame, eref, params),
                metric_area: element_area_metric(&frame),
                euclid_area: element_area(&mesh.edge_matrix::<E>(k)),
                alignment,
            })
        })
        .collect();

    // Deterministic reduction in element order; the first failure wins.
    let mut per_element = Vec::with_capacity(rows.len());
    let mut sigma = 0.0;
    let mut total = 0.0;
    let mut max_metric_area = 0.0_f64;
    let mut q_ali = 1.0_f64;
    let mut min_area = f64::INFINITY;
    for row in rows {
        let row = row?;
        total += row.energy;
        sigma += row.metric_area;
        max_metric_area = max_metric_area.max(row.metric_area);
        q_ali = q_ali.max(row.alignment);
        min_area = min_area.min(row.euclid_area);
        per_element.push(row.energy);
    }
    let n = mesh.num_elements() as f64;
    Ok(EnergyReport {
        total,
        per_element,
        sigma,
        q_eq: max_metric_area / (sigma / n),
        q_ali: if E == 1 { 1.0 } else { q_ali },
        min_area,
    })
}

/// Coercivity constants of the energy for the nonsingularity analysis.
#[derive(Debug, Clone, Copy)]
pub struct Coercivity {
    pub coercive: bool,
    pub alpha: f64,
    pub beta: f64,
    pub q: f64,
}

/// `G̃ ≥ α·tr(J)^q − β` holds with `α = θ`, `β = 0`, `q = (d−1)p/2` exactly
/// when `0 < θ ≤ 1/2` and `p > 1`.
pub fn coercivity_check(params: &EnergyParams, dim: usize) -> Coercivity {
    Coercivity {
        coercive: params.in_coercive_range(),
        alpha: params.theta,
        beta: 0.0,
        q: (dim as f64 - 1.0) * params.p / 2.0,
    }
}

/// Lower bounds guaranteed along the whole mesh trajectory.
#[derive(Debug, Clone, Copy)]
pub struct NonsingularityBounds {
    /// Floor for the metric altitude of every element.
    pub a_min: f64,
    /// Floor for the Euclidean area of every element.
    pub k_min: f64,
    pub c1: f64,
    pub c2: f64,
    /// Initial energy under the `|K̂| = 1/N` convention.
    pub initial_energy: f64,
    /// Largest metric eigenvalue seen over the mesh vertices.
    pub m_bar: f64,
}

/// Evaluates the trajectory lower bounds from the initial mesh.
///
/// The energy is re-evaluated with the reference element scaled to area
/// `1/N`; `m̄` is estimated by vertex sampling and `|S|` by the total mesh
/// area (it only enters through the β-term, which is zero here).
pub fn theoretical_bounds<const D: usize, const E: usize>(
    mesh: &SurfaceMesh<D>,
    metrics: &VertexMetrics<D>,
    params: &EnergyParams,
    surface_area: f64,
) -> Result<NonsingularityBounds> {
    let coer = coercivity_check(params, D);
    if !coer.coercive {
        return Err(Error::UnsupportedCoercivity {
            theta: params.theta,
            p: params.p,
        });
    }
    let n = mesh.num_elements() as f64;
    let d = D as f64;
    let q = coer.q;
    let (alpha, beta) = (coer.alpha, coer.beta);

    let eref = ReferenceElement::<E>::with_area(1.0 / n);
    let report = total_energy_with_ref(mesh, metrics, params, &eref)?;
    let initial_energy = report.total;

    let m_bar = metrics
        .vertex
        .iter()
        .map(linalg::sym_max_eigenvalue)
        .fold(0.0_f64, f64::max);

    let fact = |k: f64| -> f64 {
        // (d-1)! for d in {2, 3}
        if k <= 1.0 {
            1.0
        } else {
            2.0
        }
    };
    let dm1_fact = fact(d - 1.0);
    let s = 2.0 * q - d + 1.0;
    let c1 = (alpha * d.powf(q * (d - 2.0) / (d - 1.0)) * dm1_fact.powf(s / (d - 1.0))
        / (d - 1.0).powf((d - 1.0 + 2.0 * q) / 2.0))
    .powf(1.0 / s);
    let c2 = c1.powf(d - 1.0) / ((d - 1.0).powf((d - 1.0) / 2.0) * dm1_fact);

    let budget = initial_energy + beta * m_bar.powf(d / 2.0) * surface_area;
    let a_min = c1 * budget.powf(-1.0 / s) * n.powf(-2.0 * q / ((d - 1.0) * s));
    let k_min = c2 * budget.powf(-(d - 1.0) / s) * n.powf(-2.0 * q / s) * m_bar.powf(-d / 2.0);

    Ok(NonsingularityBounds {
        a_min,
        k_min,
        c1,
        c2,
        initial_energy,
        m_bar,
    })
}
