//! Small dense linear algebra over `Complex<R>`: Hermitian eigensolver,
//! matrix products and Hermiticity checks.
//!
//! The eigensolver is a cyclic Jacobi iteration with complex rotations. It is
//! quadratically convergent and accurate to a few ulps for the matrix sizes
//! used here (d <= a few hundred), and it keeps the crate generic over the
//! scalar type, which a LAPACK binding would not.

use ndarray::{Array1, Array2};
use num_complex::Complex;

use crate::error::{Error, Result};
use crate::real::Real;

/// Maximum absolute deviation from Hermiticity, max_ij |A_ij - conj(A_ji)|.
pub fn hermiticity_deviation<R: Real>(a: &Array2<Complex<R>>) -> R {
    let n = a.nrows();
    let mut worst = R::zero();
    for i in 0..n {
        for j in i..n {
            let d = (a[(i, j)] - a[(j, i)].conj()).norm_sqr().sqrt();
            if d > worst {
                worst = d;
            }
        }
    }
    worst
}

/// Checks squareness and Hermiticity within `tol`.
pub fn require_hermitian<R: Real>(a: &Array2<Complex<R>>, tol: R) -> Result<()> {
    if a.nrows() != a.ncols() {
        return Err(Error::DimensionMismatch {
            left: a.nrows(),
            right: a.ncols(),
        });
    }
    let dev = hermiticity_deviation(a);
    if dev > tol {
        return Err(Error::NotHermitian {
            deviation: dev.as_f64(),
        });
    }
    Ok(())
}

pub fn trace<R: Real>(a: &Array2<Complex<R>>) -> Complex<R> {
    a.diag().iter().copied().sum()
}

/// Eigendecomposition of a Hermitian matrix.
///
/// Returns eigenvalues in ascending order and the unitary matrix whose
/// columns are the matching eigenvectors, so `a = V diag(w) V^H`.
pub fn hermitian_eigen<R: Real>(a: &Array2<Complex<R>>) -> Result<(Array1<R>, Array2<Complex<R>>)> {
    require_hermitian(a, R::of(1e-10).max(R::strict_tol()))?;
    let n = a.nrows();
    let mut m = a.clone();
    // Symmetrize exactly so rounding in the input cannot bias the iteration.
    for i in 0..n {
        for j in 0..i {
            let avg = (m[(i, j)] + m[(j, i)].conj()) * Complex::new(R::of(0.5), R::zero());
            m[(i, j)] = avg;
            m[(j, i)] = avg.conj();
        }
        m[(i, i)] = Complex::new(m[(i, i)].re, R::zero());
    }
    let mut vecs = Array2::<Complex<R>>::eye(n);

    let scale: R = m.iter().map(|z| z.norm_sqr()).sum::<R>().sqrt();
    let stop = scale * R::epsilon() * R::of(n as f64);

    for _sweep in 0..60 {
        let mut off = R::zero();
        for i in 0..n {
            for j in (i + 1)..n {
                off = off + m[(i, j)].norm_sqr();
            }
        }
        if off.sqrt() <= stop || off == R::zero() {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[(p, q)];
                let b = apq.norm_sqr().sqrt();
                if b <= scale * R::epsilon() {
                    continue;
                }
                // Phase of the pivot and the classic stable rotation angle.
                let phase = apq / Complex::new(b, R::zero());
                let app = m[(p, p)].re;
                let aqq = m[(q, q)].re;
                let tau = (aqq - app) / (b + b);
                let t = if tau >= R::zero() {
                    R::one() / (tau + (R::one() + tau * tau).sqrt())
                } else {
                    -R::one() / (-tau + (R::one() + tau * tau).sqrt())
                };
                let c = R::one() / (R::one() + t * t).sqrt();
                let s = t * c;
                let cs = Complex::new(c, R::zero());
                let sp = phase * Complex::new(s, R::zero());

                // A <- J^H A J with J acting on the (p, q) plane:
                // J[p,p] = c, J[p,q] = s*phase, J[q,p] = -s*conj(phase), J[q,q] = c.
                for k in 0..n {
                    let akp = m[(k, p)];
                    let akq = m[(k, q)];
                    m[(k, p)] = akp * cs - akq * sp.conj();
                    m[(k, q)] = akp * sp + akq * cs;
                }
                for k in 0..n {
                    let apk = m[(p, k)];
                    let aqk = m[(q, k)];
                    m[(p, k)] = apk * cs - aqk * sp;
                    m[(q, k)] = apk * sp.conj() + aqk * cs;
                }
                for k in 0..n {
                    let vkp = vecs[(k, p)];
                    let vkq = vecs[(k, q)];
                    vecs[(k, p)] = vkp * cs - vkq * sp.conj();
                    vecs[(k, q)] = vkp * sp + vkq * cs;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    let diag: Vec<R> = (0..n).map(|i| m[(i, i)].re).collect();
    order.sort_by(|&i, &j| diag[i].partial_cmp(&diag[j]).unwrap());
    let values = Array1::from_iter(order.iter().map(|&i| diag[i]));
    let mut sorted = Array2::<Complex<R>>::zeros((n, n));
    for (col, &src) in order.iter().enumerate() {
        for row in 0..n {
            sorted[(row, col)] = vecs[(row, src)];
        }
    }
    Ok((values, sorted))
}

/// Smallest eigenvalue of a Hermitian matrix.
pub fn min_eigenvalue<R: Real>(a: &Array2<Complex<R>>) -> Result<R> {
    let (w, _) = hermitian_eigen(a)?;
    Ok(w[0])
}
