//! Small dense-matrix kernels for the geometry and energy modules.
//!
//! Everything here targets matrices of side 1..3. nalgebra's decompositions
//! are not callable with generic const dimensions (they need `ToTypenum`
//! bounds), so the few factorizations we need are written out directly:
//! Householder QR (R factor only), cyclic Jacobi for symmetric
//! eigendecompositions, and Cholesky-backed determinants/inverses for SPD
//! matrices.

use nalgebra::{SMatrix, SVector};

/// Cholesky determinant of a symmetric positive definite matrix.
///
/// Returns `None` when the factorization fails, which doubles as the SPD /
/// nondegeneracy test throughout the crate.
pub fn spd_det<const N: usize>(m: &SMatrix<f64, N, N>) -> Option<f64> {
    spd_cholesky(m).map(|l| {
        let mut d = 1.0;
        for i in 0..N {
            d *= l[(i, i)] * l[(i, i)];
        }
        d
    })
}

/// Inverse of a symmetric positive definite matrix via its Cholesky factor.
pub fn spd_inverse<const N: usize>(m: &SMatrix<f64, N, N>) -> Option<SMatrix<f64, N, N>> {
    let l = spd_cholesky(m)?;
    // Invert L forward, then M^{-1} = L^{-T} L^{-1}.
    let mut linv = SMatrix::<f64, N, N>::zeros();
    for j in 0..N {
        linv[(j, j)] = 1.0 / l[(j, j)];
        for i in (j + 1)..N {
            let mut s = 0.0;
            for k in j..i {
                s += l[(i, k)] * linv[(k, j)];
            }
            linv[(i, j)] = -s / l[(i, i)];
        }
    }
    Some(linv.transpose() * linv)
}

/// Lower Cholesky factor of a symmetric positive definite matrix.
pub fn spd_cholesky<const N: usize>(m: &SMatrix<f64, N, N>) -> Option<SMatrix<f64, N, N>> {
    let mut l = SMatrix::<f64, N, N>::zeros();
    for j in 0..N {
        let mut d = m[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if !(d > 0.0) || !d.is_finite() {
            return None;
        }
        let dj = d.sqrt();
        l[(j, j)] = dj;
        for i in (j + 1)..N {
            let mut s = m[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / dj;
        }
    }
    Some(l)
}

/// R factor of the Householder QR factorization of a tall matrix.
///
/// For `a` of size R×C with R ≥ C, returns the C×C upper-triangular block.
/// Column signs are not normalized; callers use R only through the simplex it
/// spans, which is rotation-invariant.
pub fn householder_r<const R: usize, const C: usize>(
    a: &SMatrix<f64, R, C>,
) -> SMatrix<f64, C, C> {
    let mut w = *a;
    for k in 0..C.min(R.saturating_sub(1)) {
        // Householder vector for column k, rows k..R.
        let mut norm = 0.0;
        for i in k..R {
            norm += w[(i, k)] * w[(i, k)];
        }
        let norm = norm.sqrt();
        if norm == 0.0 {
            continue;
        }
        let alpha = if w[(k, k)] >= 0.0 { -norm } else { norm };
        let mut v = [0.0; R];
        v[k] = w[(k, k)] - alpha;
        for i in (k + 1)..R {
            v[i] = w[(i, k)];
        }
        let vtv: f64 = v.iter().map(|x| x * x).sum();
        if vtv == 0.0 {
            continue;
        }
        for j in k..C {
            let mut dot = 0.0;
            for i in k..R {
                dot += v[i] * w[(i, j)];
            }
            let f = 2.0 * dot / vtv;
            for i in k..R {
                w[(i, j)] -= f * v[i];
            }
        }
    }
    let mut r = SMatrix::<f64, C, C>::zeros();
    for i in 0..C {
        for j in i..C {
            r[(i, j)] = w[(i, j)];
        }
    }
    r
}

/// Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.
///
/// Returns `(eigenvalues, eigenvectors)` with eigenvectors as columns, in no
/// particular order.
pub fn sym_eigen<const N: usize>(
    m: &SMatrix<f64, N, N>,
) -> (SVector<f64, N>, SMatrix<f64, N, N>) {
    let mut a = *m;
    let mut v = SMatrix::<f64, N, N>::identity();
    let scale = (0..N)
        .flat_map(|i| (0..N).map(move |j| (i, j)))
        .map(|(i, j)| a[(i, j)].abs())
        .fold(0.0_f64, f64::max)
        .max(1.0);
    for _sweep in 0..64 {
        let mut off = 0.0;
        for p in 0..N {
            for q in (p + 1)..N {
                off += a[(p, q)].abs();
            }
        }
        if off <= 1e-15 * scale {
            break;
        }
        for p in 0..N {
            for q in (p + 1)..N {
                let apq = a[(p, q)];
                if apq.abs() <= 1e-300 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..N {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..N {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
                for k in 0..N {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut evals = SVector::<f64, N>::zeros();
    for i in 0..N {
        evals[i] = a[(i, i)];
    }
    (evals, v)
}

/// Symmetric square root of an SPD matrix via its eigendecomposition.
///
/// Negative rounding noise in the eigenvalues is clamped at zero.
pub fn spd_sqrt<const N: usize>(m: &SMatrix<f64, N, N>) -> SMatrix<f64, N, N> {
    let (evals, vecs) = sym_eigen(m);
    let mut d = SMatrix::<f64, N, N>::zeros();
    for i in 0..N {
        d[(i, i)] = evals[i].max(0.0).sqrt();
    }
    vecs * d * vecs.transpose()
}

/// Largest eigenvalue of a symmetric matrix (its spectral norm when SPD).
pub fn sym_max_eigenvalue<const N: usize>(m: &SMatrix<f64, N, N>) -> f64 {
    let (evals, _) = sym_eigen(m);
    evals.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn sym_min_eigenvalue<const N: usize>(m: &SMatrix<f64, N, N>) -> f64 {
    let (evals, _) = sym_eigen(m);
    evals.iter().copied().fold(f64::INFINITY, f64::min)
}
