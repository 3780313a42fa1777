//! Mesh representation, reference-element data, and per-element frames.
//!
//! Elements are surface simplices: segments of a curve in `ℝ²` or triangles
//! of a surface in `ℝ³`, i.e. `(D-1)`-simplices embedded in `ℝ^D`. The edge
//! matrix of an element is the `D×E` matrix of edge vectors from its first
//! vertex (`E = D - 1`), and the affine map from the reference element has
//! the non-square Jacobian `F' = E_K Ê⁻¹`. Areas, metric areas, and metric
//! altitudes are all computed from Gram matrices of the edge matrix, which
//! keeps every formula valid despite `F'` being non-square.

use nalgebra::{SMatrix, SVector};

use crate::error::{Error, Result};
use crate::linalg;

/// Vertex position in the ambient space.
pub type Point<const D: usize> = SVector<f64, D>;

/// Scale-relative degeneracy threshold: an element is degenerate when
/// `det(EᵀE)^{1/2} < DEGENERACY_RTOL · (max edge length)^E`.
pub const DEGENERACY_RTOL: f64 = 1e-14;

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// The equilateral reference element `K̂`, stored through its edge matrix.
///
/// `unit()` is the computational convention (`|K̂| = 1`); `with_area` rescales
/// it, which the nonsingularity bound calculator uses with area `1/N`.
#[derive(Debug, Clone, Copy)]
pub struct ReferenceElement<const E: usize> {
    /// Edge matrix `Ê` (vertex 1 sits at the origin).
    pub edge_matrix: SMatrix<f64, E, E>,
    /// `det(Ê) = E! · |K̂|`.
    pub det: f64,
    /// Area `|K̂|`.
    pub area: f64,
    /// Altitude of `K̂` (all altitudes of an equilateral simplex are equal).
    pub altitude: f64,
}

impl<const E: usize> ReferenceElement<E> {
    /// Equilateral reference element with unit area.
    pub fn unit() -> Self {
        let mut edge = SMatrix::<f64, E, E>::zeros();
        match E {
            // Segment [0, 1].
            1 => edge[(0, 0)] = 1.0,
            // Equilateral triangle with side 2/3^(1/4), which has area 1.
            2 => {
                let c = 2.0 / 3.0_f64.powf(0.25);
                edge[(0, 0)] = c;
                edge[(0, 1)] = 0.5 * c;
                edge[(1, 1)] = 0.5 * c * 3.0_f64.sqrt();
            }
            _ => panic!("supported element dimensions are 1 (curves) and 2 (surfaces)"),
        }
        let det = match E {
            1 => edge[(0, 0)],
            2 => edge[(0, 0)] * edge[(1, 1)] - edge[(0, 1)] * edge[(1, 0)],
            _ => unreachable!(),
        };
        let area = det / factorial(E);
        let altitude = match E {
            1 => edge[(0, 0)],
            2 => edge[(1, 1)], // height over the base edge
            _ => unreachable!(),
        };
        Self {
            edge_matrix: edge,
            det,
            area,
            altitude,
        }
    }

    /// Same shape, rescaled so that `|K̂|` equals `area`.
    pub fn with_area(area: f64) -> Self {
        assert!(area > 0.0, "reference element area must be positive");
        let base = Self::unit();
        let s = area.powf(1.0 / E as f64);
        Self {
            edge_matrix: base.edge_matrix * s,
            det: base.det * s.powi(E as i32),
            area,
            altitude: base.altitude * s,
        }
    }
}

/// One entry of a vertex's element patch.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PatchRef {
    /// Element index.
    pub element: usize,
    /// Local index of the vertex inside that element (0-based).
    pub local: usize,
}

/// A simplicial mesh on a curve or surface.
///
/// Vertex coordinates are the only mutable state; connectivity, fixed flags,
/// and boundary assignments are set up once. `patches` is maintained as the
/// exact inverse of `elements`.
#[derive(Debug, Clone)]
pub struct SurfaceMesh<const D: usize> {
    vertices: Vec<Point<D>>,
    elements: Vec<[usize; D]>,
    fixed: Vec<bool>,
    /// Sliding-boundary constraint id per vertex (index into the surface's
    /// constraint list), `None` for interior vertices.
    boundary: Vec<Option<usize>>,
    patches: Vec<Vec<PatchRef>>,
}

impl<const D: usize> SurfaceMesh<D> {
    pub fn new(vertices: Vec<Point<D>>, elements: Vec<[usize; D]>) -> Result<Self> {
        let nv = vertices.len();
        let mut patches = vec![Vec::new(); nv];
        for (k, elem) in elements.iter().enumerate() {
            for (local, &v) in elem.iter().enumerate() {
                if v >= nv {
                    return Err(Error::InvalidMesh(format!(
                        "element {k} references vertex {v} but the mesh has {nv} vertices"
                    )));
                }
                if elem[..local].contains(&v) {
                    return Err(Error::InvalidMesh(format!(
                        "element {k} repeats vertex {v}"
                    )));
                }
                patches[v].push(PatchRef { element: k, local });
            }
        }
        let mesh = Self {
            fixed: vec![false; nv],
            boundary: vec![None; nv],
            vertices,
            elements,
            patches,
        };
        for k in 0..mesh.num_elements() {
            let edges = mesh.edge_matrix(k);
            if is_degenerate(&edges) {
                return Err(Error::InvalidMesh(format!(
                    "element {k} has zero area"
                )));
            }
        }
        Ok(mesh)
    }

    pub fn dim(&self) -> usize {
        D
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_elements(&self) -> usize {
        self.elements.len()
    }

    pub fn vertex(&self, i: usize) -> &Point<D> {
        &self.vertices[i]
    }

    pub fn vertices(&self) -> &[Point<D>] {
        &self.vertices
    }

    pub fn element(&self, k: usize) -> &[usize; D] {
        &self.elements[k]
    }

    pub fn elements(&self) -> &[[usize; D]] {
        &self.elements
    }

    pub fn patch(&self, vertex: usize) -> &[PatchRef] {
        &self.patches[vertex]
    }

    pub fn is_fixed(&self, vertex: usize) -> bool {
        self.fixed[vertex]
    }

    pub fn set_fixed(&mut self, vertex: usize, fixed: bool) {
        self.fixed[vertex] = fixed;
    }

    pub fn fixed_vertices(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.num_vertices()).filter(|&i| self.fixed[i])
    }

    pub fn boundary_constraint(&self, vertex: usize) -> Option<usize> {
        self.boundary[vertex]
    }

    pub fn set_boundary_constraint(&mut self, vertex: usize, constraint: Option<usize>) {
        self.boundary[vertex] = constraint;
    }

    pub fn boundary_vertices(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.boundary
            .iter()
            .enumerate()
            .filter_map(|(i, c)| c.map(|id| (i, id)))
    }

    /// Overwrite all vertex positions (connectivity is untouched).
    pub fn set_positions(&mut self, positions: &[Point<D>]) {
        assert_eq!(positions.len(), self.vertices.len());
        self.vertices.copy_from_slice(positions);
    }

    pub fn set_vertex(&mut self, i: usize, p: Point<D>) {
        self.vertices[i] = p;
    }

    /// Edge matrix `E_K = [x_2 - x_1, …, x_D - x_1]` of element `k`.
    pub fn edge_matrix<const E: usize>(&self, k: usize) -> SMatrix<f64, D, E> {
        let elem = &self.elements[k];
        let x1 = &self.vertices[elem[0]];
        SMatrix::<f64, D, E>::from_fn(|i, j| self.vertices[elem[j + 1]][i] - x1[i])
    }

    /// Total Euclidean area of the mesh.
    pub fn total_area<const E: usize>(&self) -> f64 {
        (0..self.num_elements())
            .map(|k| element_area(&self.edge_matrix::<E>(k)))
            .sum()
    }

    /// Smallest Euclidean element area.
    pub fn min_area<const E: usize>(&self) -> f64 {
        (0..self.num_elements())
            .map(|k| element_area(&self.edge_matrix::<E>(k)))
            .fold(f64::INFINITY, f64::min)
    }
}

/// Euclidean area `|K| = det(EᵀE)^{1/2} / E!` of an element with edge matrix
/// `edges`. Degenerate elements report area 0.
pub fn element_area<const D: usize, const E: usize>(edges: &SMatrix<f64, D, E>) -> f64 {
    let gram = edges.transpose() * edges;
    match linalg::spd_det(&gram) {
        Some(det) => det.sqrt() / factorial(E),
        None => 0.0,
    }
}

/// Scale-relative degeneracy test on an edge matrix.
pub fn is_degenerate<const D: usize, const E: usize>(edges: &SMatrix<f64, D, E>) -> bool {
    let gram = edges.transpose() * edges;
    let sqrt_det = match linalg::spd_det(&gram) {
        Some(det) => det.sqrt(),
        None => return true,
    };
    let max_len = max_edge_length(edges);
    sqrt_det < DEGENERACY_RTOL * max_len.powi(E as i32)
}

/// Longest edge of the simplex spanned by the columns of `edges`, including
/// the edges between column endpoints.
fn max_edge_length<const D: usize, const E: usize>(edges: &SMatrix<f64, D, E>) -> f64 {
    let mut max = 0.0_f64;
    for j in 0..E {
        max = max.max(edges.column(j).norm());
        for l in (j + 1)..E {
            max = max.max((edges.column(j) - edges.column(l)).norm());
        }
    }
    max
}

/// Cached per-element quantities consumed by the energy and gradient kernels.
#[derive(Debug, Clone)]
pub struct ElementFrame<const D: usize, const E: usize> {
    /// Element index (for error reporting).
    pub element: usize,
    /// Edge matrix `E_K`.
    pub edges: SMatrix<f64, D, E>,
    /// Element metric `M_K`.
    pub metric: SMatrix<f64, D, D>,
    /// Metric Gram matrix `EᵀME`.
    pub gram: SMatrix<f64, E, E>,
    pub gram_inv: SMatrix<f64, E, E>,
    pub gram_det: f64,
    /// `Ê (EᵀME)⁻¹ Êᵀ`: a scalar matrix exactly when the element is similar
    /// to the reference element under the metric.
    pub shape: SMatrix<f64, E, E>,
    /// `det(Ê)² / det(EᵀME) = (|K̂| / |K|_M)²`.
    pub ratio: f64,
}

impl<const D: usize, const E: usize> ElementFrame<D, E> {
    /// Build the frame for an element with the given edge matrix and metric.
    ///
    /// Fails with [`Error::NonSpdMetric`] when the metric is not SPD and with
    /// [`Error::DegenerateElement`] when the metric Gram matrix is singular.
    pub fn new(
        element: usize,
        edges: SMatrix<f64, D, E>,
        metric: SMatrix<f64, D, D>,
        eref: &ReferenceElement<E>,
    ) -> Result<Self> {
        let gram = edges.transpose() * metric * edges;
        let (gram_inv, gram_det) = match (linalg::spd_inverse(&gram), linalg::spd_det(&gram)) {
            (Some(inv), Some(det)) => (inv, det),
            _ => {
                if linalg::spd_cholesky(&metric).is_none() {
                    return Err(Error::NonSpdMetric);
                }
                return Err(Error::DegenerateElement { element });
            }
        };
        let shape = eref.edge_matrix * gram_inv * eref.edge_matrix.transpose();
        let ratio = eref.det * eref.det / gram_det;
        Ok(Self {
            element,
            edges,
            metric,
            gram,
            gram_inv,
            gram_det,
            shape,
            ratio,
        })
    }
}

/// Builds the [`ElementFrame`] for element `k` of a mesh.
pub fn build_frame<const D: usize, const E: usize>(
    mesh: &SurfaceMesh<D>,
    k: usize,
    metric: SMatrix<f64, D, D>,
    eref: &ReferenceElement<E>,
) -> Result<ElementFrame<D, E>> {
    ElementFrame::new(k, mesh.edge_matrix(k), metric, eref)
}

/// Metric area `|K|_{M_K} = det(EᵀME)^{1/2} / E!`.
pub fn element_area_metric<const D: usize, const E: usize>(frame: &ElementFrame<D, E>) -> f64 {
    frame.gram_det.sqrt() / factorial(E)
}

/// Minimum altitude of the element with respect to its metric.
///
/// Computed from the R factor of the Householder QR of `M^{1/2} E_K`: the
/// simplex spanned by the columns of R is congruent to the metric-mapped
/// element, so its altitudes are the metric altitudes.
pub fn min_altitude_metric<const D: usize, const E: usize>(
    frame: &ElementFrame<D, E>,
) -> Result<f64> {
    let mapped = linalg::spd_sqrt(&frame.metric) * frame.edges;
    let r = linalg::householder_r(&mapped);
    let alt = match E {
        1 => r[(0, 0)].abs(),
        2 => {
            let c1 = SVector::<f64, 2>::new(r[(0, 0)], 0.0);
            let c2 = SVector::<f64, 2>::new(r[(0, 1)], r[(1, 1)]);
            let area2 = (r[(0, 0)] * r[(1, 1)]).abs();
            let longest = c1.norm().max(c2.norm()).max((c2 - c1).norm());
            area2 / longest
        }
        _ => unreachable!("element dimension is 1 or 2"),
    };
    if !(alt > 0.0) || !alt.is_finite() {
        return Err(Error::DegenerateElement {
            element: frame.element,
        });
    }
    Ok(alt)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::{Matrix2, Matrix3, Vector2, Vector3};
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn random_triangle(rng: &mut ChaCha8Rng) -> [Vector3<f64>; 3] {
        loop {
            let pts = [
                Vector3::from_fn(|_, _| rng.random_range(-1.0..1.0)),
                Vector3::from_fn(|_, _| rng.random_range(-1.0..1.0)),
                Vector3::from_fn(|_, _| rng.random_range(-1.0..1.0)),
            ];
            let area = 0.5 * (pts[1] - pts[0]).cross(&(pts[2] - pts[0])).norm();
            if area > 1e-2 {
                return pts;
            }
        }
    }

    fn edges_of(pts: &[Vector3<f64>; 3]) -> SMatrix<f64, 3, 2> {
        SMatrix::<f64, 3, 2>::from_columns(&[pts[1] - pts[0], pts[2] - pts[0]])
    }

    pub(crate) fn random_spd3(rng: &mut ChaCha8Rng) -> Matrix3<f64> {
        let a = Matrix3::from_fn(|_, _| rng.random_range(-1.0..1.0));
        a * a.transpose() + Matrix3::identity() * rng.random_range(0.3..1.0)
    }

    fn random_rotation3(rng: &mut ChaCha8Rng) -> Matrix3<f64> {
        // QR of a random matrix; normalize column signs for det +1.
        let a = Matrix3::from_fn(|_, _| rng.random_range(-1.0..1.0));
        let qr = a.qr();
        let mut q = qr.q();
        if q.determinant() < 0.0 {
            let col = -q.column(0);
            q.set_column(0, &col);
        }
        q
    }

    #[test]
    fn reference_element_is_unit_equilateral() {
        let r1 = ReferenceElement::<1>::unit();
        assert_relative_eq!(r1.area, 1.0);
        assert_relative_eq!(r1.altitude, 1.0);

        let r2 = ReferenceElement::<2>::unit();
        assert_relative_eq!(r2.area, 1.0, epsilon = 1e-15);
        assert_relative_eq!(r2.det, 2.0, epsilon = 1e-15);
        // All three edges have the same length.
        let e = r2.edge_matrix;
        let l1 = e.column(0).norm();
        let l2 = e.column(1).norm();
        let l3 = (e.column(1) - e.column(0)).norm();
        assert_relative_eq!(l1, l2, epsilon = 1e-14);
        assert_relative_eq!(l1, l3, epsilon = 1e-14);
        // Altitude of the unit-area equilateral triangle is 3^(1/4).
        assert_relative_eq!(r2.altitude, 3.0_f64.powf(0.25), epsilon = 1e-14);
    }

    #[test]
    fn reference_element_scaling() {
        let n = 80.0;
        let r = ReferenceElement::<2>::with_area(1.0 / n);
        assert_relative_eq!(r.area, 1.0 / n, epsilon = 1e-15);
        // Altitude formula for the equilateral simplex of area 1/N (d = 3).
        let d = 3.0_f64;
        let expected = d.sqrt() * factorial(2).powf(1.0 / (d - 1.0))
            / ((d - 1.0).sqrt() * d.powf(1.0 / (2.0 * (d - 1.0))))
            * n.powf(-1.0 / (d - 1.0));
        assert_relative_eq!(r.altitude, expected, epsilon = 1e-14);
    }

    #[test]
    fn edge_matrix_definition() {
        // d = 2 segment.
        let mesh = SurfaceMesh::<2>::new(
            vec![Vector2::new(0.0, 0.0), Vector2::new(1.0, 0.0)],
            vec![[0, 1]],
        )
        .unwrap();
        let e = mesh.edge_matrix::<1>(0);
        assert_eq!(e, SMatrix::<f64, 2, 1>::new(1.0, 0.0));

        // d = 3 triangle.
        let mesh = SurfaceMesh::<3>::new(
            vec![
                Vector3::zeros(),
                Vector3::new(1.0, 0.0, 0.0),
                Vector3::new(0.0, 1.0, 0.0),
            ],
            vec![[0, 1, 2]],
        )
        .unwrap();
        let e = mesh.edge_matrix::<2>(0);
        assert_eq!(e.column(0), Vector3::new(1.0, 0.0, 0.0));
        assert_eq!(e.column(1), Vector3::new(0.0, 1.0, 0.0));
    }

    #[test]
    fn edge_matrix_matches_direct_subtraction() {
        let mut rng = rng(11);
        for _ in 0..100 {
            let pts = random_triangle(&mut rng);
            let mesh = SurfaceMesh::<3>::new(pts.to_vec(), vec![[0, 1, 2]]).unwrap();
            let e = mesh.edge_matrix::<2>(0);
            for j in 0..2 {
                for i in 0..3 {
                    assert_eq!(e[(i, j)], pts[j + 1][i] - pts[0][i]);
                }
            }
        }
    }

    #[test]
    fn area_of_simple_elements() {
        let seg = SMatrix::<f64, 2, 1>::new(1.0, 0.0);
        assert_relative_eq!(element_area(&seg), 1.0);

        let tri = SMatrix::<f64, 3, 2>::from_columns(&[
            Vector3::new(1.0, 0.0, 0.0),
            Vector3::new(0.0, 1.0, 0.0),
        ]);
        assert_relative_eq!(element_area(&tri), 0.5);
    }

    #[test]
    fn area_matches_cross_product() {
        let mut rng = rng(12);
        for _ in 0..200 {
            let pts = random_triangle(&mut rng);
            let e = edges_of(&pts);
            let expect = 0.5 * (pts[1] - pts[0]).cross(&(pts[2] - pts[0])).norm();
            let got = element_area(&e);
            assert!((got - expect).abs() <= 1e-12 * expect);
        }
    }

    #[test]
    fn degenerate_element_has_zero_area() {
        let flat = SMatrix::<f64, 3, 2>::from_columns(&[
            Vector3::new(1.0, 0.0, 0.0),
            Vector3::new(2.0, 0.0, 0.0),
        ]);
        assert_eq!(element_area(&flat), 0.0);
        assert!(is_degenerate(&flat));
    }

    #[test]
    fn metric_area_reduces_to_euclidean() {
        let mut rng = rng(13);
        let eref = ReferenceElement::<2>::unit();
        for _ in 0..50 {
            let pts = random_triangle(&mut rng);
            let e = edges_of(&pts);
            let frame = ElementFrame::new(0, e, Matrix3::identity(), &eref).unwrap();
            assert_relative_eq!(
                element_area_metric(&frame),
                element_area(&e),
                max_relative = 1e-12
            );
        }
    }

    #[test]
    fn metric_area_scalar_metric_scaling() {
        let mut rng = rng(14);
        let eref = ReferenceElement::<2>::unit();
        for _ in 0..20 {
            let pts = random_triangle(&mut rng);
            let e = edges_of(&pts);
            let frame = ElementFrame::new(0, e, Matrix3::identity() * 4.0, &eref).unwrap();
            // c^{ (d-1)/2 } = 4 for c = 4, d = 3.
            assert_relative_eq!(
                element_area_metric(&frame),
                4.0 * element_area(&e),
                max_relative = 1e-12
            );
        }
    }

    #[test]
    fn metric_area_matches_mapped_euclidean_area() {
        let mut rng = rng(15);
        let eref = ReferenceElement::<2>::unit();
        for _ in 0..200 {
            let pts = random_triangle(&mut rng);
            let e = edges_of(&pts);
            let m = random_spd3(&mut rng);
            let frame = ElementFrame::new(0, e, m, &eref).unwrap();
            let mapped = crate::linalg::spd_sqrt(&m) * e;
            let expect = element_area(&mapped);
            let got = element_area_metric(&frame);
            assert!((got - expect).abs() <= 1e-10 * expect.max(1e-30));
        }
    }

    #[test]
    fn altitude_simple_cases() {
        let eref1 = ReferenceElement::<1>::unit();
        let seg = SMatrix::<f64, 2, 1>::new(3.0, 4.0);
        let frame = ElementFrame::new(0, seg, Matrix2::identity(), &eref1).unwrap();
        assert_relative_eq!(min_altitude_metric(&frame).unwrap(), 5.0, epsilon = 1e-12);

        // Equilateral triangle with side 1 has altitude sqrt(3)/2.
        let eref2 = ReferenceElement::<2>::unit();
        let tri = SMatrix::<f64, 3, 2>::from_columns(&[
            Vector3::new(1.0, 0.0, 0.0),
            Vector3::new(0.5, 3.0_f64.sqrt() / 2.0, 0.0),
        ]);
        let frame = ElementFrame::new(0, tri, Matrix3::identity(), &eref2).unwrap();
        assert_relative_eq!(
            min_altitude_metric(&frame).unwrap(),
            3.0_f64.sqrt() / 2.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn altitude_matches_area_over_edge() {
        let mut rng = rng(16);
        let eref = ReferenceElement::<2>::unit();
        for _ in 0..200 {
            let pts = random_triangle(&mut rng);
            let e = edges_of(&pts);
            let frame = ElementFrame::new(0, e, Matrix3::identity(), &eref).unwrap();
            let area = element_area(&e);
            // Min altitude = 2·area / longest edge.
            let l01 = (pts[1] - pts[0]).norm();
            let l02 = (pts[2] - pts[0]).norm();
            let l12 = (pts[2] - pts[1]).norm();
            let expect = 2.0 * area / l01.max(l02).max(l12);
            let got = min_altitude_metric(&frame).unwrap();
            assert!((got - expect).abs() <= 1e-12 * expect);
        }
    }

    #[test]
    fn frame_identity_for_reference_congruent_element() {
        let eref = ReferenceElement::<2>::unit();
        // Embed K̂ in the z = 0 plane.
        let e = SMatrix::<f64, 3, 2>::from_fn(|i, j| {
            if i < 2 {
                eref.edge_matrix[(i, j)]
            } else {
                0.0
            }
        });
        let frame = ElementFrame::new(0, e, Matrix3::identity(), &eref).unwrap();
        assert!((frame.shape - Matrix2::identity()).norm() < 1e-13);
        assert_relative_eq!(frame.ratio, 1.0, epsilon = 1e-13);
    }

    #[test]
    fn frame_scalar_metric_scaling() {
        let mut rng = rng(17);
        let eref = ReferenceElement::<2>::unit();
        let c = 2.5;
        for _ in 0..20 {
            let pts = random_triangle(&mut rng);
            let e = edges_of(&pts);
            let f1 = ElementFrame::new(0, e, Matrix3::identity(), &eref).unwrap();
            let fc = ElementFrame::new(0, e, Matrix3::identity() * c, &eref).unwrap();
            // ratio scales by c^{-(d-1)}, shape by c^{-1}.
            assert_relative_eq!(fc.ratio, f1.ratio / (c * c), max_relative = 1e-12);
            assert!((fc.shape - f1.shape / c).norm() <= 1e-12 * f1.shape.norm());
        }
    }

    #[test]
    fn frame_matches_direct_formula() {
        let mut rng = rng(18);
        let eref = ReferenceElement::<2>::unit();
        let ehat_inv = eref.edge_matrix.try_inverse().unwrap();
        for _ in 0..200 {
            let pts = random_triangle(&mut rng);
            let e = edges_of(&pts);
            let m = random_spd3(&mut rng);
            let frame = ElementFrame::new(0, e, m, &eref).unwrap();
            // J via F' = E Ê⁻¹ explicitly.
            let fp = e * ehat_inv;
            let fmf = fp.transpose() * m * fp;
            let j_direct = fmf.try_inverse().unwrap();
            for i in 0..2 {
                for jj in 0..2 {
                    assert!(
                        (frame.shape[(i, jj)] - j_direct[(i, jj)]).abs()
                            <= 1e-12 * j_direct.norm().max(1.0)
                    );
                }
            }
            let r_direct = 1.0 / fmf.determinant();
            assert_relative_eq!(frame.ratio, r_direct, max_relative = 1e-11);
        }
    }

    #[test]
    fn lemma_area_identity_1000_random() {
        // |K̂|·det((F')ᵀF')^{1/2} equals the direct area formula.
        let mut rng = rng(19);
        let eref = ReferenceElement::<2>::unit();
        let ehat_inv = eref.edge_matrix.try_inverse().unwrap();
        for _ in 0..1000 {
            let pts = random_triangle(&mut rng);
            let e = edges_of(&pts);
            let fp = e * ehat_inv;
            let via_jacobian = eref.area * (fp.transpose() * fp).determinant().sqrt();
            let direct = element_area(&e);
            assert!((via_jacobian - direct).abs() <= 1e-12 * direct);
        }
    }

    #[test]
    fn metric_area_bounds_altitude_power() {
        // |K|_M ≥ a^{d-1} / ((d-1)^{(d-1)/2} (d-1)!) with equality for d = 2.
        let mut rng = rng(20);
        let eref2 = ReferenceElement::<2>::unit();
        for _ in 0..1000 {
            let pts = random_triangle(&mut rng);
            let e = edges_of(&pts);
            let m = random_spd3(&mut rng);
            let frame = ElementFrame::new(0, e, m, &eref2).unwrap();
            let area = element_area_metric(&frame);
            let alt = min_altitude_metric(&frame).unwrap();
            // (d-1)^{(d-1)/2} (d-1)! = 2·2 = 4 for d = 3.
            assert!(area >= alt * alt / 4.0 - 1e-12 * area.max(1.0));
        }

        let eref1 = ReferenceElement::<1>::unit();
        let mut rng = rng(21);
        for _ in 0..1000 {
            let e = SMatrix::<f64, 2, 1>::from_fn(|_, _| rng.random_range(-2.0..2.0));
            if e.norm() < 1e-3 {
                continue;
            }
            let s = rng.random_range(0.2..3.0);
            let frame = ElementFrame::new(0, e, Matrix2::identity() * s, &eref1).unwrap();
            let area = element_area_metric(&frame);
            let alt = min_altitude_metric(&frame).unwrap();
            // Both are the metric length of the segment.
            assert_relative_eq!(area, alt, max_relative = 1e-12);
        }
    }

    #[test]
    fn rotation_invariance() {
        let mut rng = rng(22);
        let eref = ReferenceElement::<2>::unit();
        for _ in 0..100 {
            let pts = random_triangle(&mut rng);
            let e = edges_of(&pts);
            let m = random_spd3(&mut rng);
            let rot = random_rotation3(&mut rng);
            let e_rot = rot * e;
            let m_rot = rot * m * rot.transpose();
            let f = ElementFrame::new(0, e, m, &eref).unwrap();
            let f_rot = ElementFrame::new(0, e_rot, m_rot, &eref).unwrap();
            assert!((element_area(&e) - element_area(&e_rot)).abs() <= 1e-12);
            assert!(
                (element_area_metric(&f) - element_area_metric(&f_rot)).abs()
                    <= 1e-12 * element_area_metric(&f)
            );
            let a1 = min_altitude_metric(&f).unwrap();
            let a2 = min_altitude_metric(&f_rot).unwrap();
            assert!((a1 - a2).abs() <= 1e-12 * a1);
        }
    }

    #[test]
    fn shape_norm_sandwich() {
        // â²/a² ≤ ‖shape‖₂ ≤ (d-1)²·â²/a² for the unit reference element.
        let mut rng = rng(23);
        let eref = ReferenceElement::<2>::unit();
        for _ in 0..1000 {
            let pts = random_triangle(&mut rng);
            let e = edges_of(&pts);
            let m = random_spd3(&mut rng);
            let frame = ElementFrame::new(0, e, m, &eref).unwrap();
            let norm = crate::linalg::sym_max_eigenvalue(&frame.shape);
            let alt = min_altitude_metric(&frame).unwrap();
            let low = eref.altitude * eref.altitude / (alt * alt);
            let high = 4.0 * low;
            assert!(norm >= low * (1.0 - 1e-10), "norm {norm} < low {low}");
            assert!(norm <= high * (1.0 + 1e-10), "norm {norm} > high {high}");
        }
    }

    #[test]
    fn mesh_validation_rejects_bad_connectivity() {
        let verts = vec![Vector2::new(0.0, 0.0), Vector2::new(1.0, 0.0)];
        assert!(matches!(
            SurfaceMesh::<2>::new(verts.clone(), vec![[0, 2]]),
            Err(Error::InvalidMesh(_))
        ));
        assert!(matches!(
            SurfaceMesh::<2>::new(verts.clone(), vec![[1, 1]]),
            Err(Error::InvalidMesh(_))
        ));
        // Coincident vertices give a zero-area element.
        let verts = vec![Vector2::new(0.5, 0.5), Vector2::new(0.5, 0.5)];
        assert!(matches!(
            SurfaceMesh::<2>::new(verts, vec![[0, 1]]),
            Err(Error::InvalidMesh(_))
        ));
    }

    #[test]
    fn patches_invert_elements() {
        let mesh = SurfaceMesh::<3>::new(
            vec![
                Vector3::new(0.0, 0.0, 0.0),
                Vector3::new(1.0, 0.0, 0.0),
                Vector3::new(0.0, 1.0, 0.0),
                Vector3::new(1.0, 1.0, 0.5),
            ],
            vec![[0, 1, 2], [1, 3, 2]],
        )
        .unwrap();
        for v in 0..mesh.num_vertices() {
            for pr in mesh.patch(v) {
                assert_eq!(mesh.element(pr.element)[pr.local], v);
            }
        }
        // Vertex 1 belongs to both elements.
        assert_eq!(mesh.patch(1).len(), 2);
        assert_eq!(mesh.patch(0).len(), 1);
    }
}
