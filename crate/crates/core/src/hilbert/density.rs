//! Statistical operators, mixtures, and partial traces.

use ndarray::Array2;
use num_complex::Complex;

use crate::error::{Error, Result};
use crate::linalg;
use crate::real::Real;

use super::finite::FiniteKet;

/// Hard cap on the dimension of dense statistical operators.
pub const DENSITY_DIM_CAP: usize = 256;

/// A trace-one positive Hermitian operator.
#[derive(Debug, Clone)]
pub struct DensityOperator<R: Real> {
    matrix: Array2<Complex<R>>,
}

impl<R: Real> DensityOperator<R> {
    /// Validates Hermiticity, unit trace and positive semi-definiteness.
    pub fn new(matrix: Array2<Complex<R>>) -> Result<Self> {
        let rho = Self::new_unvalidated(matrix)?;
        rho.validate()?;
        Ok(rho)
    }

    /// Structural checks only (shape, cap, finiteness). Used internally by
    /// steppers that re-validate at the contract boundary.
    pub(crate) fn new_unvalidated(matrix: Array2<Complex<R>>) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() {
            return Err(Error::DimensionMismatch {
                left: matrix.nrows(),
                right: matrix.ncols(),
            });
        }
        if matrix.nrows() == 0 || matrix.nrows() > DENSITY_DIM_CAP {
            return Err(Error::SizeCap {
                requested: matrix.nrows(),
                cap: DENSITY_DIM_CAP,
            });
        }
        if matrix.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(Error::InvalidParameter {
                name: "matrix",
                reason: "non-finite entry".into(),
            });
        }
        Ok(Self { matrix })
    }

    /// Checks the type invariants: Hermitian within strict tolerance, trace
    /// one, eigenvalues >= -1e-10.
    pub fn validate(&self) -> Result<()> {
        linalg::require_hermitian(&self.matrix, R::strict_tol())?;
        let tr = linalg::trace(&self.matrix);
        if (tr.re - R::one()).abs() > R::strict_tol() || tr.im.abs() > R::strict_tol() {
            return Err(Error::InvalidTrace {
                trace: tr.re.as_f64(),
            });
        }
        let floor = R::of(-1e-10).min(-R::strict_tol());
        let min = linalg::min_eigenvalue(&self.matrix)?;
        if min < floor {
            return Err(Error::NotPositive {
                min_eigenvalue: min.as_f64(),
            });
        }
        Ok(())
    }

    /// Projector |psi><psi| onto a unit vector.
    pub fn from_pure(psi: &FiniteKet<R>) -> Result<Self> {
        psi.require_unit()?;
        let d = psi.dim();
        let amps = psi.amplitudes();
        let mut matrix = Array2::<Complex<R>>::zeros((d, d));
        for i in 0..d {
            for j in 0..d {
                matrix[(i, j)] = amps[i] * amps[j].conj();
            }
        }
        Self::new_unvalidated(matrix)
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &Array2<Complex<R>> {
        &self.matrix
    }

    pub fn element(&self, i: usize, j: usize) -> Complex<R> {
        self.matrix[(i, j)]
    }

    pub fn trace(&self) -> Complex<R> {
        linalg::trace(&self.matrix)
    }

    /// Tr(rho^2); 1 for pure states.
    pub fn purity(&self) -> R {
        let mut acc = R::zero();
        for i in 0..self.dim() {
            for j in 0..self.dim() {
                acc = acc + (self.matrix[(i, j)] * self.matrix[(j, i)]).re;
            }
        }
        acc
    }

    /// Kronecker product of two operators.
    pub fn tensor(&self, other: &Self) -> Result<Self> {
        let d = self.dim() * other.dim();
        if d > DENSITY_DIM_CAP {
            return Err(Error::SizeCap {
                requested: d,
                cap: DENSITY_DIM_CAP,
            });
        }
        let mut matrix = Array2::<Complex<R>>::zeros((d, d));
        let (da, db) = (self.dim(), other.dim());
        for i in 0..da {
            for j in 0..da {
                for k in 0..db {
                    for l in 0..db {
                        matrix[(i * db + k, j * db + l)] =
                            self.matrix[(i, j)] * other.matrix[(k, l)];
                    }
                }
            }
        }
        Self::new_unvalidated(matrix)
    }

    /// Partial trace over the factors *not* listed in `keep`.
    ///
    /// `dims` are the tensor-factor dimensions (product must equal the
    /// operator dimension); `keep` lists the factor indices to retain, in
    /// ascending order.
    pub fn partial_trace(&self, dims: &[usize], keep: &[usize]) -> Result<Self> {
        let reduced = partial_trace_matrix(&self.matrix, dims, keep)?;
        Self::new_unvalidated(reduced)
    }

    /// Trace distance (1/2)||rho - sigma||_1, in [0, 1].
    pub fn distance(&self, other: &Self) -> Result<R> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch {
                left: self.dim(),
                right: other.dim(),
            });
        }
        let diff = &self.matrix - &other.matrix;
        let (w, _) = linalg::hermitian_eigen(&diff)?;
        Ok(w.iter().map(|&x| x.abs()).sum::<R>() * R::of(0.5))
    }
}

/// Shared partial-trace kernel for dense operators.
pub(crate) fn partial_trace_matrix<R: Real>(
    matrix: &Array2<Complex<R>>,
    dims: &[usize],
    keep: &[usize],
) -> Result<Array2<Complex<R>>> {
    let dim = matrix.nrows();
    check_partition(dims, keep, dim)?;
    let (kept_offsets, traced_offsets) = partition_offsets(dims, keep);
    let dk = kept_offsets.len();
    let mut out = Array2::<Complex<R>>::zeros((dk, dk));
    for (i, &oi) in kept_offsets.iter().enumerate() {
        for (j, &oj) in kept_offsets.iter().enumerate() {
            let mut acc = Complex::new(R::zero(), R::zero());
            for &ot in &traced_offsets {
                acc = acc + matrix[(oi + ot, oj + ot)];
            }
            out[(i, j)] = acc;
        }
    }
    Ok(out)
}

/// Reduced operator of a pure state: traces out the factors not in `keep`
/// without materializing the joint operator.
pub fn reduced_from_ket<R: Real>(
    psi: &FiniteKet<R>,
    dims: &[usize],
    keep: &[usize],
) -> Result<DensityOperator<R>> {
    check_partition(dims, keep, psi.dim())?;
    let (kept_offsets, traced_offsets) = partition_offsets(dims, keep);
    let dk = kept_offsets.len();
    if dk > DENSITY_DIM_CAP {
        return Err(Error::SizeCap {
            requested: dk,
            cap: DENSITY_DIM_CAP,
        });
    }
    let amps = psi.amplitudes();
    let mut out = Array2::<Complex<R>>::zeros((dk, dk));
    for (i, &oi) in kept_offsets.iter().enumerate() {
        for (j, &oj) in kept_offsets.iter().enumerate() {
            let mut acc = Complex::new(R::zero(), R::zero());
            for &ot in &traced_offsets {
                acc = acc + amps[oi + ot] * amps[oj + ot].conj();
            }
            out[(i, j)] = acc;
        }
    }
    DensityOperator::new_unvalidated(out)
}

fn check_partition(dims: &[usize], keep: &[usize], dim: usize) -> Result<()> {
    let product: usize = dims.iter().product();
    if dims.is_empty() || product != dim {
        return Err(Error::BadPartition {
            dims: dims.to_vec(),
            dim,
        });
    }
    if keep.is_empty()
        || keep.windows(2).any(|w| w[0] >= w[1])
        || keep.iter().any(|&k| k >= dims.len())
    {
        return Err(Error::BadPartition {
            dims: dims.to_vec(),
            dim,
        });
    }
    Ok(())
}

/// Flat-index offsets of the kept and traced multi-indices.
fn partition_offsets(dims: &[usize], keep: &[usize]) -> (Vec<usize>, Vec<usize>) {
    let strides: Vec<usize> = {
        let mut s = vec![1usize; dims.len()];
        for a in (0..dims.len().saturating_sub(1)).rev() {
            s[a] = s[a + 1] * dims[a + 1];
        }
        s
    };
    let traced: Vec<usize> = (0..dims.len()).filter(|a| !keep.contains(a)).collect();
    let expand = |axes: &[usize]| -> Vec<usize> {
        let mut offsets = vec![0usize];
        for &a in axes {
            let mut next = Vec::with_capacity(offsets.len() * dims[a]);
            for &base in &offsets {
                for v in 0..dims[a] {
                    next.push(base + v * strides[a]);
                }
            }
            offsets = next;
        }
        offsets
    };
    (expand(keep), expand(&traced))
}

/// A statistical mixture of normalized pure states.
#[derive(Debug, Clone)]
pub struct WeightedEnsemble<R: Real> {
    members: Vec<(FiniteKet<R>, R)>,
}

impl<R: Real> WeightedEnsemble<R> {
    pub fn new(members: Vec<(FiniteKet<R>, R)>) -> Result<Self> {
        if members.is_empty() {
            return Err(Error::InvalidParameter {
                name: "members",
                reason: "ensemble is empty".into(),
            });
        }
        let dim = members[0].0.dim();
        let mut total = R::zero();
        for (ket, w) in &members {
            if ket.dim() != dim {
                return Err(Error::DimensionMismatch {
                    left: ket.dim(),
                    right: dim,
                });
            }
            ket.require_unit()?;
            if *w < R::zero() {
                return Err(Error::InvalidParameter {
                    name: "weights",
                    reason: format!("negative weight {}", w.as_f64()),
                });
            }
            total = total + *w;
        }
        if (total - R::one()).abs() > R::strict_tol() {
            return Err(Error::InvalidParameter {
                name: "weights",
                reason: format!("weights sum to {}, expected 1", total.as_f64()),
            });
        }
        Ok(Self { members })
    }

    pub fn members(&self) -> &[(FiniteKet<R>, R)] {
        &self.members
    }

    /// The statistical operator sum_k w_k |psi_k><psi_k|.
    pub fn to_operator(&self) -> Result<DensityOperator<R>> {
        let dim = self.members[0].0.dim();
        let mut matrix = Array2::<Complex<R>>::zeros((dim, dim));
        for (ket, w) in &self.members {
            let amps = ket.amplitudes();
            let wr = Complex::new(*w, R::zero());
            for i in 0..dim {
                for j in 0..dim {
                    matrix[(i, j)] = matrix[(i, j)] + wr * amps[i] * amps[j].conj();
                }
            }
        }
        DensityOperator::new_unvalidated(matrix)
    }
}

/// Diagonal operator from classical probabilities (testing convenience).
pub fn diagonal_operator<R: Real>(probs: &[R]) -> Result<DensityOperator<R>> {
    let mut matrix = Array2::<Complex<R>>::zeros((probs.len(), probs.len()));
    for (i, &p) in probs.iter().enumerate() {
        matrix[(i, i)] = Complex::new(p, R::zero());
    }
    DensityOperator::new(matrix)
}
