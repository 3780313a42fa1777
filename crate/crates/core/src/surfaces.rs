//! Implicit curves and surfaces with analytic derivatives, plus seeded
//! initial-mesh generators for the stock examples.

use std::sync::Arc;

use nalgebra::{SMatrix, SVector};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::geometry::{Point, SurfaceMesh};
use crate::metric::MetricField;

type ScalarFn<const D: usize> = Arc<dyn Fn(&Point<D>) -> f64 + Send + Sync>;
type GradFn<const D: usize> = Arc<dyn Fn(&Point<D>) -> SVector<f64, D> + Send + Sync>;
type HessFn<const D: usize> = Arc<dyn Fn(&Point<D>) -> SMatrix<f64, D, D> + Send + Sync>;

/// The constraint manifold `Φ(x) = 0` with its first two derivatives.
///
/// Only normals (from `∇Φ`) and curvature (from the Hessian) are ever used,
/// so a numerical `Φ` works as well as an analytic one.
#[derive(Clone)]
pub struct ImplicitSurface<const D: usize> {
    phi: ScalarFn<D>,
    grad: GradFn<D>,
    hess: HessFn<D>,
    boundaries: Vec<BoundaryConstraint<D>>,
}

impl<const D: usize> std::fmt::Debug for ImplicitSurface<D> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ImplicitSurface")
            .field("dim", &D)
            .field("boundaries", &self.boundaries.len())
            .finish()
    }
}

impl<const D: usize> ImplicitSurface<D> {
    pub fn new(
        phi: impl Fn(&Point<D>) -> f64 + Send + Sync + 'static,
        grad: impl Fn(&Point<D>) -> SVector<f64, D> + Send + Sync + 'static,
        hess: impl Fn(&Point<D>) -> SMatrix<f64, D, D> + Send + Sync + 'static,
    ) -> Self {
        Self {
            phi: Arc::new(phi),
            grad: Arc::new(grad),
            hess: Arc::new(hess),
            boundaries: Vec::new(),
        }
    }

    /// Builds a surface from `Φ` alone, with central-difference derivatives
    /// (step `1e-6·(1+‖x‖)`).
    pub fn from_phi(phi: impl Fn(&Point<D>) -> f64 + Send + Sync + 'static) -> Self {
        let phi: ScalarFn<D> = Arc::new(phi);
        let g = {
            let phi = phi.clone();
            move |x: &Point<D>| {
                let h = 1e-6 * (1.0 + x.norm());
                SVector::<f64, D>::from_fn(|i, _| {
                    let mut xp = *x;
                    let mut xm = *x;
                    xp[i] += h;
                    xm[i] -= h;
                    (phi(&xp) - phi(&xm)) / (2.0 * h)
                })
            }
        };
        let h = {
            let phi = phi.clone();
            move |x: &Point<D>| {
                let h = 1e-6 * (1.0 + x.norm());
                SMatrix::<f64, D, D>::from_fn(|i, j| {
                    if i == j {
                        let mut xp = *x;
                        let mut xm = *x;
                        xp[i] += h;
                        xm[i] -= h;
                        (phi(&xp) - 2.0 * phi(x) + phi(&xm)) / (h * h)
                    } else {
                        let mut xpp = *x;
                        let mut xpm = *x;
                        let mut xmp = *x;
                        let mut xmm = *x;
                        xpp[i] += h;
                        xpp[j] += h;
                        xpm[i] += h;
                        xpm[j] -= h;
                        xmp[i] -= h;
                        xmp[j] += h;
                        xmm[i] -= h;
                        xmm[j] -= h;
                        (phi(&xpp) - phi(&xpm) - phi(&xmp) + phi(&xmm)) / (4.0 * h * h)
                    }
                })
            }
        };
        Self {
            phi,
            grad: Arc::new(g),
            hess: Arc::new(h),
            boundaries: Vec::new(),
        }
    }

    pub fn with_boundaries(mut self, boundaries: Vec<BoundaryConstraint<D>>) -> Self {
        self.boundaries = boundaries;
        self
    }

    pub fn phi(&self, x: &Point<D>) -> f64 {
        (self.phi)(x)
    }

    pub fn gradient(&self, x: &Point<D>) -> SVector<f64, D> {
        (self.grad)(x)
    }

    pub fn hessian(&self, x: &Point<D>) -> SMatrix<f64, D, D> {
        (self.hess)(x)
    }

    pub fn boundaries(&self) -> &[BoundaryConstraint<D>] {
        &self.boundaries
    }

    /// Unit normal `∇Φ/‖∇Φ‖`.
    pub fn unit_normal(&self, x: &Point<D>, vertex: Option<usize>) -> Result<SVector<f64, D>> {
        let g = self.gradient(x);
        let n = g.norm();
        if n <= 1e-12 {
            return Err(Error::VanishingGradient { vertex });
        }
        Ok(g / n)
    }

    /// Newton projection onto `Φ = 0` along the normal direction:
    /// `x ← x − Φ(x) ∇Φ(x)/‖∇Φ(x)‖²`. Returns the best iterate.
    pub fn project(&self, x: &Point<D>, tol: f64, max_iter: usize) -> Point<D> {
        let mut y = *x;
        for _ in 0..max_iter {
            let r = self.phi(&y);
            if r.abs() <= tol {
                break;
            }
            let g = self.gradient(&y);
            let g2 = g.norm_squared();
            if g2 <= 1e-24 {
                break;
            }
            y -= g * (r / g2);
        }
        y
    }
}

/// A sliding-boundary constraint `Ψ(x) = 0` restricting some vertices to a
/// boundary curve of the surface.
#[derive(Clone)]
pub struct BoundaryConstraint<const D: usize> {
    psi: ScalarFn<D>,
    grad: GradFn<D>,
}

impl<const D: usize> std::fmt::Debug for BoundaryConstraint<D> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("BoundaryConstraint").finish()
    }
}

impl<const D: usize> BoundaryConstraint<D> {
    pub fn new(
        psi: impl Fn(&Point<D>) -> f64 + Send + Sync + 'static,
        grad: impl Fn(&Point<D>) -> SVector<f64, D> + Send + Sync + 'static,
    ) -> Self {
        Self {
            psi: Arc::new(psi),
            grad: Arc::new(grad),
        }
    }

    pub fn psi(&self, x: &Point<D>) -> f64 {
        (self.psi)(x)
    }

    pub fn gradient(&self, x: &Point<D>) -> SVector<f64, D> {
        (self.grad)(x)
    }
}

/// How to build an initial mesh for a catalog entry.
#[derive(Clone)]
enum Initializer<const D: usize> {
    /// Curve parameterization on `[t0, t1]`; fixed vertices are pinned at the
    /// listed parameter values.
    Curve {
        map: Arc<dyn Fn(f64) -> Point<D> + Send + Sync>,
        t0: f64,
        t1: f64,
        closed: bool,
        fixed_params: Vec<f64>,
    },
    /// Tensor-product parameter grid mapped to the surface; interior nodes
    /// are jittered by up to `perturb` of a cell.
    Grid {
        map: Arc<dyn Fn(f64, f64) -> Point<D> + Send + Sync>,
        u_range: (f64, f64),
        v_range: (f64, f64),
        wrap_u: bool,
        wrap_v: bool,
        /// Rim handling for non-wrapped v edges: constraint ids for v = v0 and
        /// v = v1 (sliding), or fix them outright.
        v_edges: EdgeSpec,
        u_edges: EdgeSpec,
        fixed_points: Vec<(f64, f64)>,
    },
    /// Icosahedral sphere subdivision, optionally scaled along z.
    Icosahedral { z_scale: f64 },
}

#[derive(Clone, Copy, PartialEq)]
enum EdgeSpec {
    Interior,
    Fixed,
    /// Slide along boundary constraints (low edge id, high edge id).
    Slide(usize, usize),
}

/// A stock example: surface, default adaptation setup, and mesh generator.
#[derive(Clone)]
pub struct CatalogEntry<const D: usize> {
    pub name: &'static str,
    pub surface: ImplicitSurface<D>,
    pub default_n: usize,
    pub default_metric: MetricField<D>,
    initializer: Initializer<D>,
}

impl<const D: usize> std::fmt::Debug for CatalogEntry<D> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CatalogEntry")
            .field("name", &self.name)
            .field("dim", &D)
            .field("default_n", &self.default_n)
            .finish()
    }
}

/// Catalog entry of either dimension.
#[derive(Debug, Clone)]
pub enum AnyCatalogEntry {
    Curve(CatalogEntry<2>),
    Surface(CatalogEntry<3>),
}

impl AnyCatalogEntry {
    pub fn dim(&self) -> usize {
        match self {
            AnyCatalogEntry::Curve(_) => 2,
            AnyCatalogEntry::Surface(_) => 3,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            AnyCatalogEntry::Curve(e) => e.name,
            AnyCatalogEntry::Surface(e) => e.name,
        }
    }

    pub fn default_n(&self) -> usize {
        match self {
            AnyCatalogEntry::Curve(e) => e.default_n,
            AnyCatalogEntry::Surface(e) => e.default_n,
        }
    }
}

pub const CATALOG_NAMES: [&str; 10] = [
    "circle",
    "ellipse",
    "sine2d",
    "lemniscate",
    "torus",
    "cylinder",
    "sine3d",
    "sphere",
    "ellipsoid",
    "ellipsoid-tips",
];

/// Looks up a stock surface by name.
pub fn surface_by_name(name: &str) -> Result<AnyCatalogEntry> {
    let entry = match name {
        "circle" => AnyCatalogEntry::Curve(circle()),
        "ellipse" => AnyCatalogEntry::Curve(ellipse()),
        "sine2d" => AnyCatalogEntry::Curve(sine2d()),
        "lemniscate" => AnyCatalogEntry::Curve(lemniscate()),
        "torus" => AnyCatalogEntry::Surface(torus()),
        "cylinder" => AnyCatalogEntry::Surface(cylinder()),
        "sine3d" => AnyCatalogEntry::Surface(sine3d()),
        "sphere" => AnyCatalogEntry::Surface(sphere()),
        "ellipsoid" => AnyCatalogEntry::Surface(ellipsoid(MetricField::Identity)),
        "ellipsoid-tips" => AnyCatalogEntry::Surface(ellipsoid(MetricField::CurvatureTips)),
        _ => {
            return Err(Error::UnknownSurface {
                name: name.to_string(),
                available: CATALOG_NAMES.join(", "),
            })
        }
    };
    Ok(entry)
}

/// Unit circle `x² + y² − 1 = 0`, node at `(1, 0)` pinned.
pub fn circle() -> CatalogEntry<2> {
    CatalogEntry {
        name: "circle",
        surface: ImplicitSurface::new(
            |x| x[0] * x[0] + x[1] * x[1] - 1.0,
            |x| SVector::<f64, 2>::new(2.0 * x[0], 2.0 * x[1]),
            |_| SMatrix::<f64, 2, 2>::identity() * 2.0,
        ),
        default_n: 80,
        default_metric: MetricField::Identity,
        initializer: Initializer::Curve {
            map: Arc::new(|t| Point::<2>::new(t.cos(), t.sin())),
            t0: 0.0,
            t1: std::f64::consts::TAU,
            closed: true,
            fixed_params: vec![0.0],
        },
    }
}

/// Ellipse `x²/64 + y² − 1 = 0`, node at `(8, 0)` pinned.
pub fn ellipse() -> CatalogEntry<2> {
    CatalogEntry {
        name: "ellipse",
        surface: ImplicitSurface::new(
            |x| x[0] * x[0] / 64.0 + x[1] * x[1] - 1.0,
            |x| SVector::<f64, 2>::new(x[0] / 32.0, 2.0 * x[1]),
            |_| SMatrix::<f64, 2, 2>::new(1.0 / 32.0, 0.0, 0.0, 2.0),
        ),
        default_n: 60,
        default_metric: MetricField::Identity,
        initializer: Initializer::Curve {
            map: Arc::new(|t| Point::<2>::new(8.0 * t.cos(), t.sin())),
            t0: 0.0,
            t1: std::f64::consts::TAU,
            closed: true,
            fixed_params: vec![0.0],
        },
    }
}

/// Sine curve `4 sin(x) − y = 0` over `x ∈ [0, 2π]`, both endpoints pinned.
pub fn sine2d() -> CatalogEntry<2> {
    CatalogEntry {
        name: "sine2d",
        surface: ImplicitSurface::new(
            |x| 4.0 * x[0].sin() - x[1],
            |x| SVector::<f64, 2>::new(4.0 * x[0].cos(), -1.0),
            |x| SMatrix::<f64, 2, 2>::new(-4.0 * x[0].sin(), 0.0, 0.0, 0.0),
        ),
        default_n: 60,
        default_metric: MetricField::Identity,
        initializer: Initializer::Curve {
            map: Arc::new(|t| Point::<2>::new(t, 4.0 * t.sin())),
            t0: 0.0,
            t1: std::f64::consts::TAU,
            closed: false,
            fixed_params: vec![0.0, std::f64::consts::TAU],
        },
    }
}

/// Lemniscate `(x² + y²)² − 4(x² − y²) = 0`, node at `(2, 0)` pinned.
pub fn lemniscate() -> CatalogEntry<2> {
    CatalogEntry {
        name: "lemniscate",
        surface: ImplicitSurface::new(
            |x| {
                let r2 = x[0] * x[0] + x[1] * x[1];
                r2 * r2 - 4.0 * (x[0] * x[0] - x[1] * x[1])
            },
            |x| {
                let r2 = x[0] * x[0] + x[1] * x[1];
                SVector::<f64, 2>::new(4.0 * x[0] * (r2 - 2.0), 4.0 * x[1] * (r2 + 2.0))
            },
            |x| {
                let (xx, yy) = (x[0] * x[0], x[1] * x[1]);
                SMatrix::<f64, 2, 2>::new(
                    12.0 * xx + 4.0 * yy - 8.0,
                    8.0 * x[0] * x[1],
                    8.0 * x[0] * x[1],
                    4.0 * xx + 12.0 * yy + 8.0,
                )
            },
        ),
        default_n: 60,
        default_metric: MetricField::Identity,
        initializer: Initializer::Curve {
            // Figure-eight traced once: x = 2 cos t/(1+sin²t), y = x sin t.
            map: Arc::new(|t| {
                let den = 1.0 + t.sin() * t.sin();
                let x = 2.0 * t.cos() / den;
                Point::<2>::new(x, x * t.sin())
            }),
            t0: 0.0,
            t1: std::f64::consts::TAU,
            closed: true,
            fixed_params: vec![0.0],
        },
    }
}

/// Torus `(2 − √(x² + y²))² + z² − 1 = 0`.
pub fn torus() -> CatalogEntry<3> {
    CatalogEntry {
        name: "torus",
        surface: ImplicitSurface::new(
            |x| {
                let rho = (x[0] * x[0] + x[1] * x[1]).sqrt();
                (2.0 - rho) * (2.0 - rho) + x[2] * x[2] - 1.0
            },
            |x| {
                let rho = (x[0] * x[0] + x[1] * x[1]).sqrt();
                SVector::<f64, 3>::new(
                    2.0 * x[0] - 4.0 * x[0] / rho,
                    2.0 * x[1] - 4.0 * x[1] / rho,
                    2.0 * x[2],
                )
            },
            |x| {
                let rho2 = x[0] * x[0] + x[1] * x[1];
                let rho3 = rho2.powf(1.5);
                SMatrix::<f64, 3, 3>::new(
                    2.0 - 4.0 * x[1] * x[1] / rho3,
                    4.0 * x[0] * x[1] / rho3,
                    0.0,
                    4.0 * x[0] * x[1] / rho3,
                    2.0 - 4.0 * x[0] * x[0] / rho3,
                    0.0,
                    0.0,
                    0.0,
                    2.0,
                )
            },
        ),
        default_n: 3200,
        default_metric: MetricField::Identity,
        initializer: Initializer::Grid {
            map: Arc::new(|u, v| {
                let rho = 2.0 + v.cos();
                Point::<3>::new(rho * u.cos(), rho * u.sin(), v.sin())
            }),
            u_range: (0.0, std::f64::consts::TAU),
            v_range: (0.0, std::f64::consts::TAU),
            wrap_u: true,
            wrap_v: true,
            u_edges: EdgeSpec::Interior,
            v_edges: EdgeSpec::Interior,
            fixed_points: vec![],
        },
    }
}

/// Cylinder `x² + y² − 1 = 0` for `z ∈ [−2, 2]`; rim vertices slide on the
/// rim circles, with one vertex pinned on each rim.
pub fn cylinder() -> CatalogEntry<3> {
    CatalogEntry {
        name: "cylinder",
        surface: ImplicitSurface::new(
            |x| x[0] * x[0] + x[1] * x[1] - 1.0,
            |x| SVector::<f64, 3>::new(2.0 * x[0], 2.0 * x[1], 0.0),
            |_| {
                SMatrix::<f64, 3, 3>::new(2.0, 0.0, 0.0, 0.0, 2.0, 0.0, 0.0, 0.0, 0.0)
            },
        )
        .with_boundaries(vec![
            BoundaryConstraint::new(
                |x: &Point<3>| x[2] + 2.0,
                |_| SVector::<f64, 3>::new(0.0, 0.0, 1.0),
            ),
            BoundaryConstraint::new(
                |x: &Point<3>| x[2] - 2.0,
                |_| SVector::<f64, 3>::new(0.0, 0.0, 1.0),
            ),
        ]),
        default_n: 3200,
        default_metric: MetricField::Identity,
        initializer: Initializer::Grid {
            map: Arc::new(|u, v| Point::<3>::new(u.sin(), u.cos(), v)),
            u_range: (0.0, std::f64::consts::TAU),
            v_range: (-2.0, 2.0),
            wrap_u: true,
            wrap_v: false,
            u_edges: EdgeSpec::Interior,
            v_edges: EdgeSpec::Slide(0, 1),
            // (0, 1, -2) and (0, 1, 2): u = 0 maps to (sin 0, cos 0, v) = (0, 1, v).
            fixed_points: vec![(0.0, -2.0), (0.0, 2.0)],
        },
    }
}

/// Sine surface `sin(x + y) − z = 0` over `(x, y) ∈ [0, π]²`, boundary fixed.
pub fn sine3d() -> CatalogEntry<3> {
    CatalogEntry {
        name: "sine3d",
        surface: ImplicitSurface::new(
            |x| (x[0] + x[1]).sin() - x[2],
            |x| {
                let c = (x[0] + x[1]).cos();
                SVector::<f64, 3>::new(c, c, -1.0)
            },
            |x| {
                let s = -(x[0] + x[1]).sin();
                SMatrix::<f64, 3, 3>::new(s, s, 0.0, s, s, 0.0, 0.0, 0.0, 0.0)
            },
        ),
        default_n: 3200,
        default_metric: MetricField::Identity,
        initializer: Initializer::Grid {
            map: Arc::new(|u, v| Point::<3>::new(u, v, (u + v).sin())),
            u_range: (0.0, std::f64::consts::PI),
            v_range: (0.0, std::f64::consts::PI),
            wrap_u: false,
            wrap_v: false,
            u_edges: EdgeSpec::Fixed,
            v_edges: EdgeSpec::Fixed,
            fixed_points: vec![],
        },
    }
}

/// Unit sphere with an icosahedral initial mesh.
pub fn sphere() -> CatalogEntry<3> {
    CatalogEntry {
        name: "sphere",
        surface: ImplicitSurface::new(
            |x| x.norm_squared() - 1.0,
            |x| 2.0 * x,
            |_| SMatrix::<f64, 3, 3>::identity() * 2.0,
        ),
        default_n: 1280,
        default_metric: MetricField::Identity,
        initializer: Initializer::Icosahedral { z_scale: 1.0 },
    }
}

/// Ellipsoid `x² + y² + z²/4 − 1 = 0` (z-stretched icosahedral mesh).
pub fn ellipsoid(metric: MetricField<3>) -> CatalogEntry<3> {
    CatalogEntry {
        name: if matches!(metric, MetricField::CurvatureTips) {
            "ellipsoid-tips"
        } else {
            "ellipsoid"
        },
        surface: ImplicitSurface::new(
            |x| x[0] * x[0] + x[1] * x[1] + x[2] * x[2] / 4.0 - 1.0,
            |x| SVector::<f64, 3>::new(2.0 * x[0], 2.0 * x[1], x[2] / 2.0),
            |_| {
                SMatrix::<f64, 3, 3>::new(2.0, 0.0, 0.0, 0.0, 2.0, 0.0, 0.0, 0.0, 0.5)
            },
        ),
        default_n: 1280,
        default_metric: metric,
        initializer: Initializer::Icosahedral { z_scale: 2.0 },
    }
}

/// Default interior jitter for grid initializers, as a fraction of a cell.
pub const DEFAULT_GRID_PERTURBATION: f64 = 0.3;

/// Generates a seeded initial mesh with `n` elements for a catalog entry.
///
/// Curves get sorted random parameter values (endpoints respected); grids get
/// a structured triangulation with interior parameter jitter up to `perturb`
/// of a cell; icosahedral entries ignore both randomness knobs.
pub fn make_initial_mesh<const D: usize>(
    entry: &CatalogEntry<D>,
    n: usize,
    seed: u64,
    perturb: f64,
) -> Result<SurfaceMesh<D>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    match &entry.initializer {
        Initializer::Curve {
            map,
            t0,
            t1,
            closed,
            fixed_params,
        } => curve_mesh(entry, map.as_ref(), *t0, *t1, *closed, fixed_params, n, &mut rng),
        Initializer::Grid {
            map,
            u_range,
            v_range,
            wrap_u,
            wrap_v,
            u_edges,
            v_edges,
            fixed_points,
        } => grid_mesh(
            entry,
            map.as_ref(),
            *u_range,
            *v_range,
            *wrap_u,
            *wrap_v,
            *u_edges,
            *v_edges,
            fixed_points,
            n,
            perturb,
            &mut rng,
        ),
        Initializer::Icosahedral { z_scale } => icosahedral_mesh(entry, n, *z_scale),
    }
}

#[allow(clippy::too_many_arguments)]
fn curve_mesh<const D: usize>(
    entry: &CatalogEntry<D>,
    map: &(dyn Fn(f64) -> Point<D> + Send + Sync),
    t0: f64,
    t1: f64,
    closed: bool,
    fixed_params: &[f64],
    n: usize,
    rng: &mut ChaCha8Rng,
) -> Result<SurfaceMesh<D>> {
    if n < 3 {
        return Err(Error::IncompatibleMeshSize {
            surface: entry.name.to_string(),
            n,
            expected: "at least 3 elements".to_string(),
        });
    }
    // Pinned parameters come first, then sorted random fill.
    let mut params: Vec<f64> = fixed_params.to_vec();
    let nv = if closed { n } else { n + 1 };
    let n_random = nv - params.len();
    for _ in 0..n_random {
        params.push(rng.random_range(t0..t1));
    }
    params.sort_by(|a, b| a.partial_cmp(b).unwrap());
    params.dedup();
    while params.len() < nv {
        params.push(rng.random_range(t0..t1));
        params.sort_by(|a, b| a.partial_cmp(b).unwrap());
        params.dedup();
    }

    let vertices: Vec<Point<D>> = params.iter().map(|&t| map(t)).collect();
    let mut elements = Vec::with_capacity(n);
    for i in 0..nv - 1 {
        elements.push(seg_to_elem([i, i + 1]));
    }
    if closed {
        elements.push(seg_to_elem([nv - 1, 0]));
    }
    let mut mesh = SurfaceMesh::new(vertices, elements)?;
    for fp in fixed_params {
        let idx = params
            .iter()
            .position(|t| (t - fp).abs() < 1e-14)
            .expect("pinned parameter survives sorting");
        mesh.set_fixed(idx, true);
    }
    Ok(mesh)
}

/// Segments are stored as `[usize; D]` with D = 2.
fn seg_to_elem<const D: usize>(pair: [usize; 2]) -> [usize; D] {
    let mut e = [0usize; D];
    e[0] = pair[0];
    e[1] = pair[1];
    e
}

#[allow(clippy::too_many_arguments)]
fn grid_mesh<const D: usize>(
    entry: &CatalogEntry<D>,
    map: &(dyn Fn(f64, f64) -> Point<D> + Send + Sync),
    u_range: (f64, f64),
    v_range: (f64, f64),
    wrap_u: bool,
    wrap_v: bool,
    u_edges: EdgeSpec,
    v_edges: EdgeSpec,
    fixed_points: &[(f64, f64)],
    n: usize,
    perturb: f64,
    rng: &mut ChaCha8Rng,
) -> Result<SurfaceMesh<D>> {
    // Square cell grid: n = 2·m².
    let m = ((n as f64) / 2.0).sqrt().round() as usize;
    if m < 2 || 2 * m * m != n {
        return Err(Error::IncompatibleMeshSize {
            surface: entry.name.to_string(),
            n,
            expected: "2·m² for integer m ≥ 2 (e.g. 800, 1800, 3200, 5000)".to_string(),
        });
    }
    let (nu, nv_cells) = (m, m);
    let nu_verts = if wrap_u { nu } else { nu + 1 };
    let nv_verts = if wrap_v { nv_cells } else { nv_cells + 1 };
    let du = (u_range.1 - u_range.0) / nu as f64;
    let dv = (v_range.1 - v_range.0) / nv_cells as f64;

    let vid = |iu: usize, iv: usize| -> usize { (iv % nv_verts) * nu_verts + (iu % nu_verts) };

    let mut params = vec![(0.0_f64, 0.0_f64); nu_verts * nv_verts];
    for iv in 0..nv_verts {
        for iu in 0..nu_verts {
            let mut u = u_range.0 + iu as f64 * du;
            let mut v = v_range.0 + iv as f64 * dv;
            let u_interior = wrap_u || (iu > 0 && iu < nu_verts - 1);
            let v_interior = wrap_v || (iv > 0 && iv < nv_verts - 1);
            if u_interior {
                u += rng.random_range(-perturb..=perturb) * du;
            }
            if v_interior {
                v += rng.random_range(-perturb..=perturb) * dv;
            }
            params[vid(iu, iv)] = (u, v);
        }
    }
    // Pin requested parameter points exactly onto the nearest grid node.
    let mut fixed_ids = Vec::new();
    for &(fu, fv) in fixed_points {
        let iu = (((fu - u_range.0) / du).round() as usize) % nu_verts;
        let iv = (((fv - v_range.0) / dv).round() as usize).min(nv_verts - 1);
        params[vid(iu, iv)] = (fu, fv);
        fixed_ids.push(vid(iu, iv));
    }

    let vertices: Vec<Point<D>> = params.iter().map(|&(u, v)| map(u, v)).collect();
    let mut elements = Vec::with_capacity(n);
    for iv in 0..nv_cells {
        for iu in 0..nu {
            let a = vid(iu, iv);
            let b = vid(iu + 1, iv);
            let c = vid(iu + 1, iv + 1);
            let d = vid(iu, iv + 1);
            elements.push(tri_to_elem([a, b, c]));
            elements.push(tri_to_elem([a, c, d]));
        }
    }
    let mut mesh = SurfaceMesh::new(vertices, elements)?;

    // Edge handling: fixed or sliding rims.
    if !wrap_v {
        for iu in 0..nu_verts {
            for (iv, end) in [(0usize, 0usize), (nv_verts - 1, 1usize)] {
                let id = vid(iu, iv);
                match v_edges {
                    EdgeSpec::Interior => {}
                    EdgeSpec::Fixed => mesh.set_fixed(id, true),
                    EdgeSpec::Slide(lo, hi) => {
                        mesh.set_boundary_constraint(id, Some(if end == 0 { lo } else { hi }))
                    }
                }
            }
        }
    }
    if !wrap_u {
        for iv in 0..nv_verts {
            for (iu, end) in [(0usize, 0usize), (nu_verts - 1, 1usize)] {
                let id = vid(iu, iv);
                match u_edges {
                    EdgeSpec::Interior => {}
                    EdgeSpec::Fixed => mesh.set_fixed(id, true),
                    EdgeSpec::Slide(lo, hi) => {
                        mesh.set_boundary_constraint(id, Some(if end == 0 { lo } else { hi }))
                    }
                }
            }
        }
    }
    for id in fixed_ids {
        mesh.set_boundary_constraint(id, None);
        mesh.set_fixed(id, true);
    }
    Ok(mesh)
}

fn tri_to_elem<const D: usize>(tri: [usize; 3]) -> [usize; D] {
    let mut e = [0usize; D];
    e[0] = tri[0];
    e[1] = tri[1];
    e[2] = tri[2];
    e
}

/// Icosahedral subdivision mesh with `n = 20·4^k` triangles, projected onto
/// the unit sphere and then stretched along z.
fn icosahedral_mesh<const D: usize>(
    entry: &CatalogEntry<D>,
    n: usize,
    z_scale: f64,
) -> Result<SurfaceMesh<D>> {
    let mut k = 0u32;
    let mut count = 20usize;
    while count < n {
        count *= 4;
        k += 1;
    }
    if count != n || k > 8 {
        return Err(Error::IncompatibleMeshSize {
            surface: entry.name.to_string(),
            n,
            expected: "20·4^k (20, 80, 320, 1280, 5120, ...)".to_string(),
        });
    }

    // Icosahedron vertices.
    let phi = (1.0 + 5.0_f64.sqrt()) / 2.0;
    let raw = [
        [-1.0, phi, 0.0],
        [1.0, phi, 0.0],
        [-1.0, -phi, 0.0],
        [1.0, -phi, 0.0],
        [0.0, -1.0, phi],
        [0.0, 1.0, phi],
        [0.0, -1.0, -phi],
        [0.0, 1.0, -phi],
        [phi, 0.0, -1.0],
        [phi, 0.0, 1.0],
        [-phi, 0.0, -1.0],
        [-phi, 0.0, 1.0],
    ];
    let mut verts: Vec<SVector<f64, 3>> = raw
        .iter()
        .map(|p| SVector::<f64, 3>::new(p[0], p[1], p[2]).normalize())
        .collect();
    let mut faces: Vec<[usize; 3]> = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 3],
    ];

    for _ in 0..k {
        let mut midpoint = std::collections::HashMap::new();
        let mut new_faces = Vec::with_capacity(faces.len() * 4);
        for f in &faces {
            let mid = |a: usize, b: usize, verts: &mut Vec<SVector<f64, 3>>,
                       midpoint: &mut std::collections::HashMap<(usize, usize), usize>|
             -> usize {
                let key = (a.min(b), a.max(b));
                *midpoint.entry(key).or_insert_with(|| {
                    let p = ((verts[a] + verts[b]) * 0.5).normalize();
                    verts.push(p);
                    verts.len() - 1
                })
            };
            let ab = mid(f[0], f[1], &mut verts, &mut midpoint);
            let bc = mid(f[1], f[2], &mut verts, &mut midpoint);
            let ca = mid(f[2], f[0], &mut verts, &mut midpoint);
            new_faces.push([f[0], ab, ca]);
            new_faces.push([f[1], bc, ab]);
            new_faces.push([f[2], ca, bc]);
            new_faces.push([ab, bc, ca]);
        }
        faces = new_faces;
    }

    let vertices: Vec<Point<D>> = verts
        .iter()
        .map(|p| {
            let mut v = Point::<D>::zeros();
            v[0] = p[0];
            v[1] = p[1];
            v[2] = p[2] * z_scale;
            v
        })
        .collect();
    let elements: Vec<[usize; D]> = faces.iter().map(|f| tri_to_elem(*f)).collect();
    SurfaceMesh::new(vertices, elements)
}
