//! Unitary evolution: split-operator Fourier propagation for grid states,
//! exact eigendecomposition evolution for finite models, and the
//! imperfect-apparatus measurement unitary family.

use std::sync::Arc;

use ndarray::{Array2, ArrayD, IxDyn};
use num_complex::Complex;
use rand::Rng;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::hilbert::{FiniteKet, GridSpec, GridWavefunction};
use crate::linalg;
use crate::real::Real;
use crate::rng::{self, StreamTag};

/// External potential on the configuration grid, in internal units.
///
/// Multi-particle grids apply the same single-particle potential per axis.
#[derive(Debug, Clone, PartialEq)]
pub enum PotentialSpec<R: Real> {
    Free,
    Harmonic { omega: R },
    DoubleWell { barrier: R, separation: R },
    /// Tabulated values over the full configuration grid.
    Tabulated { values: ArrayD<R> },
}

impl<R: Real> PotentialSpec<R> {
    /// Potential values over the full configuration grid.
    pub fn on_grid(&self, spec: &GridSpec<R>) -> Result<ArrayD<R>> {
        match self {
            PotentialSpec::Free => Ok(ArrayD::zeros(IxDyn(&spec.shape()))),
            PotentialSpec::Harmonic { omega } => {
                if !(omega.is_finite() && *omega > R::zero()) {
                    return Err(Error::InvalidParameter {
                        name: "omega",
                        reason: "harmonic frequency must be positive".into(),
                    });
                }
                Ok(self.per_axis(spec, |a, x| {
                    let m = spec.masses()[a];
                    R::of(0.5) * m * *omega * *omega * x * x
                }))
            }
            PotentialSpec::DoubleWell {
                barrier,
                separation,
            } => {
                if !(barrier.is_finite() && *barrier > R::zero())
                    || !(separation.is_finite() && *separation > R::zero())
                {
                    return Err(Error::InvalidParameter {
                        name: "double_well",
                        reason: "barrier and separation must be positive".into(),
                    });
                }
                let b2 = *separation * *separation;
                Ok(self.per_axis(spec, |_a, x| {
                    let d = x * x - b2;
                    *barrier * d * d / (b2 * b2)
                }))
            }
            PotentialSpec::Tabulated { values } => {
                if values.shape() != spec.shape().as_slice() {
                    return Err(Error::DimensionMismatch {
                        left: values.len(),
                        right: spec.total_points(),
                    });
                }
                if values.iter().any(|v| !v.is_finite()) {
                    return Err(Error::InvalidParameter {
                        name: "values",
                        reason: "tabulated potential has non-finite entries".into(),
                    });
                }
                Ok(values.clone())
            }
        }
    }

    fn per_axis<F: Fn(usize, R) -> R>(&self, spec: &GridSpec<R>, f: F) -> ArrayD<R> {
        let coords: Vec<Vec<R>> = (0..spec.n_axes()).map(|a| spec.coords(a)).collect();
        let mut values = ArrayD::<R>::zeros(IxDyn(&spec.shape()));
        for (idx, v) in values.indexed_iter_mut() {
            let mut acc = R::zero();
            for a in 0..spec.n_axes() {
                acc = acc + f(a, coords[a][idx[a]]);
            }
            *v = acc;
        }
        values
    }
}

/// Precomputed one-step split propagator: kinetic half step in momentum
/// space, full potential step, kinetic half step.
pub struct SplitOperator<R: Real> {
    kinetic_half: Vec<Vec<Complex<R>>>,
    potential_full: ArrayD<Complex<R>>,
    forward: Arc<dyn Fft<R>>,
    inverse: Arc<dyn Fft<R>>,
}

impl<R: Real> SplitOperator<R> {
    pub fn new(
        planner: &mut FftPlanner<R>,
        spec: &GridSpec<R>,
        potential: &PotentialSpec<R>,
        dt: R,
    ) -> Result<Self> {
        if !(dt.is_finite() && dt != R::zero()) {
            return Err(Error::InvalidParameter {
                name: "dt",
                reason: "time step must be finite and nonzero".into(),
            });
        }
        let v = potential.on_grid(spec)?;
        let max_v = v.iter().fold(R::zero(), |m, &x| m.max(x.abs()));
        let max_phase = max_v * dt.abs();
        if max_phase > R::PI() {
            return Err(Error::StepTooLarge {
                max_phase: max_phase.as_f64(),
            });
        }
        let half = R::of(0.5);
        let kinetic_half = (0..spec.n_axes())
            .map(|a| {
                let m = spec.masses()[a];
                (0..spec.points())
                    .map(|j| {
                        let k = spec.wavenumber(a, j);
                        Complex::from_polar(R::one(), -half * dt * k * k / (R::of(2.0) * m))
                    })
                    .collect()
            })
            .collect();
        let potential_full = v.mapv(|x| Complex::from_polar(R::one(), -dt * x));
        Ok(Self {
            kinetic_half,
            potential_full,
            forward: planner.plan_fft_forward(spec.points()),
            inverse: planner.plan_fft_inverse(spec.points()),
        })
    }

    /// One second-order step.
    pub fn step(&self, amplitudes: &mut ArrayD<Complex<R>>) {
        self.kinetic_half_step(amplitudes);
        for (a, p) in amplitudes.iter_mut().zip(self.potential_full.iter()) {
            *a = *a * *p;
        }
        self.kinetic_half_step(amplitudes);
    }

    fn kinetic_half_step(&self, amplitudes: &mut ArrayD<Complex<R>>) {
        forward_fft_all_axes(&self.forward, amplitudes);
        let shape: Vec<usize> = amplitudes.shape().to_vec();
        for (idx, a) in amplitudes.indexed_iter_mut() {
            let mut factor = Complex::new(R::one(), R::zero());
            for axis in 0..shape.len() {
                factor = factor * self.kinetic_half[axis][idx[axis]];
            }
            *a = *a * factor;
        }
        inverse_fft_all_axes(&self.inverse, amplitudes);
    }
}

/// In-place forward FFT along every axis (unnormalized).
pub(crate) fn forward_fft_all_axes<R: Real>(fft: &Arc<dyn Fft<R>>, data: &mut ArrayD<Complex<R>>) {
    fft_all_axes(fft, data, false)
}

/// In-place inverse FFT along every axis, including the 1/N-per-axis factor.
pub(crate) fn inverse_fft_all_axes<R: Real>(fft: &Arc<dyn Fft<R>>, data: &mut ArrayD<Complex<R>>) {
    fft_all_axes(fft, data, true)
}

fn fft_all_axes<R: Real>(fft: &Arc<dyn Fft<R>>, data: &mut ArrayD<Complex<R>>, normalize: bool) {
    for axis in 0..data.ndim() {
        fft_axis(fft, data, axis, normalize);
    }
}

/// In-place FFT along one axis; inverse transforms pass `normalize = true`
/// to apply the 1/N factor.
pub(crate) fn fft_axis<R: Real>(
    fft: &Arc<dyn Fft<R>>,
    data: &mut ArrayD<Complex<R>>,
    axis: usize,
    normalize: bool,
) {
    let n = fft.len();
    let inv_n = Complex::new(R::one() / R::of(n as f64), R::zero());
    let mut lane = vec![Complex::new(R::zero(), R::zero()); n];
    for mut view in data.lanes_mut(ndarray::Axis(axis)) {
        for (dst, src) in lane.iter_mut().zip(view.iter()) {
            *dst = *src;
        }
        fft.process(&mut lane);
        if normalize {
            for (dst, src) in view.iter_mut().zip(lane.iter()) {
                *dst = *src * inv_n;
            }
        } else {
            for (dst, src) in view.iter_mut().zip(lane.iter()) {
                *dst = *src;
            }
        }
    }
}

/// Propagates a normalized grid state for `steps` steps of length `dt`.
pub fn evolve_grid<R: Real>(
    psi: &GridWavefunction<R>,
    potential: &PotentialSpec<R>,
    dt: R,
    steps: usize,
) -> Result<GridWavefunction<R>> {
    psi.require_unit()?;
    let mut planner = FftPlanner::new();
    let op = SplitOperator::new(&mut planner, psi.spec(), potential, dt)?;
    let mut amplitudes = psi.amplitudes().clone();
    for _ in 0..steps {
        op.step(&mut amplitudes);
    }
    GridWavefunction::from_amplitudes(psi.spec().clone(), amplitudes)
}

/// Exact evolution exp(-i H t) |ket> via eigendecomposition of Hermitian H.
pub fn evolve_finite<R: Real>(
    ket: &FiniteKet<R>,
    hamiltonian: &Array2<Complex<R>>,
    t: R,
) -> Result<FiniteKet<R>> {
    linalg::require_hermitian(hamiltonian, R::of(1e-10))?;
    if hamiltonian.nrows() != ket.dim() {
        return Err(Error::DimensionMismatch {
            left: hamiltonian.nrows(),
            right: ket.dim(),
        });
    }
    let (w, v) = linalg::hermitian_eigen(hamiltonian)?;
    let d = ket.dim();
    let amps = ket.amplitudes();
    // coefficients in the eigenbasis: c = V^H psi
    let mut coeffs = vec![Complex::new(R::zero(), R::zero()); d];
    for (k, c) in coeffs.iter_mut().enumerate() {
        for i in 0..d {
            *c = *c + v[(i, k)].conj() * amps[i];
        }
    }
    for (k, c) in coeffs.iter_mut().enumerate() {
        *c = *c * Complex::from_polar(R::one(), -w[k] * t);
    }
    let mut out = ndarray::Array1::<Complex<R>>::zeros(d);
    for i in 0..d {
        let mut acc = Complex::new(R::zero(), R::zero());
        for (k, c) in coeffs.iter().enumerate() {
            acc = acc + v[(i, k)] * *c;
        }
        out[i] = acc;
    }
    FiniteKet::new(out)
}

/// Dense Hamiltonian matrix for a 1D grid: spectral kinetic term plus
/// diagonal potential. Used by master-equation evolutions on small grids.
pub fn grid_hamiltonian<R: Real>(
    spec: &GridSpec<R>,
    potential: &PotentialSpec<R>,
) -> Result<Array2<Complex<R>>> {
    if spec.n_axes() != 1 {
        return Err(Error::InvalidParameter {
            name: "spec",
            reason: "dense grid Hamiltonians are built for single-axis grids".into(),
        });
    }
    let n = spec.points();
    let v = potential.on_grid(spec)?;
    let v_flat = v.as_slice().unwrap().to_vec();
    let m = spec.masses()[0];
    let mut h = Array2::<Complex<R>>::zeros((n, n));
    // Kinetic operator in the position basis: F^H diag(k^2/2m) F, written out
    // with explicit DFT phases.
    let two_pi = R::of(2.0) * R::PI();
    for i in 0..n {
        for j in 0..n {
            let mut acc = Complex::new(R::zero(), R::zero());
            for q in 0..n {
                let k = spec.wavenumber(0, q);
                let phase = two_pi * R::of(((i as i64 - j as i64) * q as i64) as f64)
                    / R::of(n as f64);
                acc = acc
                    + Complex::from_polar(k * k / (R::of(2.0) * m), phase)
                        * Complex::new(R::one() / R::of(n as f64), R::zero());
            }
            h[(i, j)] = acc;
        }
    }
    for i in 0..n {
        h[(i, i)] = h[(i, i)] + Complex::new(v_flat[i], R::zero());
    }
    // Clean rounding so downstream Hermiticity checks see an exact matrix.
    for i in 0..n {
        for j in 0..i {
            let avg = (h[(i, j)] + h[(j, i)].conj()) * Complex::new(R::of(0.5), R::zero());
            h[(i, j)] = avg;
            h[(j, i)] = avg.conj();
        }
        h[(i, i)] = Complex::new(h[(i, i)].re, R::zero());
    }
    Ok(h)
}

/// Family parameters for the measurement unitary: a two-level system coupled
/// to a pointer with `pointer_positions` slots and a hidden sector of
/// uncontrollable degrees of freedom indexed by a 64-bit seed.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementUnitarySpec<R: Real> {
    pub pointer_positions: usize,
    pub hidden_dim: usize,
    /// Probability that a triggered run lands outside its pointer sector.
    pub error_rate: R,
    /// Master seed of the apparatus family.
    pub seed: u64,
}

pub const SYSTEM_DIM: usize = 2;

/// Pointer slot for the ready state.
pub const POINTER_READY: usize = 0;
/// Pointer slot registering the first basis state ("up").
pub const POINTER_UP: usize = 1;
/// Pointer slot registering the second basis state ("down").
pub const POINTER_DOWN: usize = 2;

impl<R: Real> MeasurementUnitarySpec<R> {
    pub fn validate(&self) -> Result<()> {
        if self.pointer_positions < 3 {
            return Err(Error::InvalidParameter {
                name: "pointer_positions",
                reason: "need at least ready/up/down pointer slots".into(),
            });
        }
        if self.hidden_dim == 0 {
            return Err(Error::InvalidParameter {
                name: "hidden_dim",
                reason: "hidden sector must be at least one-dimensional".into(),
            });
        }
        if !(self.error_rate >= R::zero() && self.error_rate < R::of(0.5)) {
            return Err(Error::InvalidParameter {
                name: "error_rate",
                reason: "error rate must lie in [0, 0.5)".into(),
            });
        }
        let dim = SYSTEM_DIM * self.pointer_positions * self.hidden_dim;
        if dim > crate::hilbert::DENSITY_DIM_CAP {
            return Err(Error::SizeCap {
                requested: dim,
                cap: crate::hilbert::DENSITY_DIM_CAP,
            });
        }
        Ok(())
    }

    pub fn total_dim(&self) -> usize {
        SYSTEM_DIM * self.pointer_positions * self.hidden_dim
    }

    /// Pointer slot the apparatus actually drives to for the given system
    /// branch (0 = "up" branch, 1 = "down" branch) and hidden index. Equals
    /// the correct slot unless the seeded error coin fires.
    pub fn branch_target(&self, alpha: u64, branch: usize) -> usize {
        let correct = if branch == 0 { POINTER_UP } else { POINTER_DOWN };
        let mut rng = rng::stream(alpha, StreamTag::PointerKick, branch as u64);
        let coin: f64 = rng.random();
        if R::of(coin) >= self.error_rate {
            return correct;
        }
        // Kick to a uniformly chosen wrong slot (never the ready slot, never
        // the correct one).
        let wrong: Vec<usize> = (1..self.pointer_positions).filter(|&p| p != correct).collect();
        wrong[rng.random_range(0..wrong.len())]
    }

    /// Hidden-sector unitary for the given hidden index, built from seeded
    /// Givens rotations (unitary by construction).
    pub fn hidden_unitary(&self, alpha: u64) -> Array2<Complex<R>> {
        let h = self.hidden_dim;
        let mut u = Array2::<Complex<R>>::eye(h);
        let mut rng = rng::stream(alpha, StreamTag::HiddenUnitary, 0);
        for _sweep in 0..2 {
            for p in 0..h {
                for q in (p + 1)..h {
                    let theta = R::of(rng.random::<f64>()) * R::PI();
                    let phi = R::of(rng.random::<f64>()) * R::of(2.0) * R::PI();
                    let chi = R::of(rng.random::<f64>()) * R::of(2.0) * R::PI();
                    let c = theta.cos();
                    let s = theta.sin();
                    // u <- G u with G the complex Givens rotation in (p, q).
                    for col in 0..h {
                        let up = u[(p, col)];
                        let uq = u[(q, col)];
                        u[(p, col)] = Complex::from_polar(c, phi) * up
                            + Complex::from_polar(s, chi) * uq;
                        u[(q, col)] = -Complex::from_polar(s, -chi) * up
                            + Complex::from_polar(c, -phi) * uq;
                    }
                }
            }
        }
        u
    }

    /// Seeded normalized hidden-sector ready ket.
    pub fn hidden_ready(&self, alpha: u64) -> FiniteKet<R> {
        let mut rng = rng::stream(alpha, StreamTag::HiddenState, 0);
        let amps: Vec<Complex<R>> = (0..self.hidden_dim)
            .map(|_| rng::complex_gaussian::<R>(&mut rng))
            .collect();
        FiniteKet::from_slice(&amps)
            .and_then(|k| k.normalized())
            .expect("hidden ready state construction cannot fail for hidden_dim >= 1")
    }
}

/// Builds the full measurement unitary for hidden index `alpha`.
///
/// The operator is block-diagonal in the system basis: each system branch
/// applies a pointer transposition from the ready slot to its target slot,
/// followed by the hidden-sector unitary. Superposed system inputs therefore
/// evolve into the matching superposition of branch outputs.
pub fn build_measurement_unitary<R: Real>(
    spec: &MeasurementUnitarySpec<R>,
    alpha: u64,
) -> Result<Array2<Complex<R>>> {
    spec.validate()?;
    let k = spec.pointer_positions;
    let h = spec.hidden_dim;
    let dim = spec.total_dim();
    let v = spec.hidden_unitary(alpha);
    let mut u = Array2::<Complex<R>>::zeros((dim, dim));
    for branch in 0..SYSTEM_DIM {
        let target = spec.branch_target(alpha, branch);
        // Pointer permutation: swap ready slot and target slot.
        let perm = |p: usize| -> usize {
            if p == POINTER_READY {
                target
            } else if p == target {
                POINTER_READY
            } else {
                p
            }
        };
        for p in 0..k {
            let pp = perm(p);
            for hi in 0..h {
                for hj in 0..h {
                    let row = (branch * k + pp) * h + hi;
                    let col = (branch * k + p) * h + hj;
                    u[(row, col)] = v[(hi, hj)];
                }
            }
        }
    }
    Ok(u)
}

/// Applies a dense operator to a ket.
pub fn apply_operator<R: Real>(
    op: &Array2<Complex<R>>,
    ket: &FiniteKet<R>,
) -> Result<FiniteKet<R>> {
    if op.ncols() != ket.dim() {
        return Err(Error::DimensionMismatch {
            left: op.ncols(),
            right: ket.dim(),
        });
    }
    let amps = ket.amplitudes();
    let mut out = ndarray::Array1::<Complex<R>>::zeros(op.nrows());
    for i in 0..op.nrows() {
        let mut acc = Complex::new(R::zero(), R::zero());
        for j in 0..op.ncols() {
            acc = acc + op[(i, j)] * amps[j];
        }
        out[i] = acc;
    }
    FiniteKet::new(out)
}

/// Max deviation of U^H U from the identity.
pub fn unitarity_deviation<R: Real>(u: &Array2<Complex<R>>) -> R {
    let n = u.nrows();
    let mut worst = R::zero();
    for i in 0..n {
        for j in 0..n {
            let mut acc = Complex::new(R::zero(), R::zero());
            for k in 0..n {
                acc = acc + u[(k, i)].conj() * u[(k, j)];
            }
            let target = if i == j { R::one() } else { R::zero() };
            let dev = (acc - Complex::new(target, R::zero())).norm_sqr().sqrt();
            worst = worst.max(dev);
        }
    }
    worst
}
