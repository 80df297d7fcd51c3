//! Environment-induced decoherence: branching of a macroscopic superposition
//! into entangled system+environment states, reduced statistical operators,
//! and the ensemble-ambiguity construction showing that one statistical
//! operator corresponds to infinitely many mixtures.
//!
//! The environment is a register of identical unentangled qubits, each
//! rotated by `theta` conditional on the second branch. The branch overlap
//! is then exactly cos(theta)^n_env, so every claim about "de facto
//! orthogonality" becomes a quantified statement checkable against the
//! explicit state up to the memory cap and in closed form beyond it.

use ndarray::Array2;
use num_complex::Complex;

use crate::error::{Error, Result};
use crate::hilbert::{reduced_from_ket, DensityOperator, FiniteKet, WeightedEnsemble};
use crate::real::Real;

/// Explicit joint states are capped at this many environment qubits
/// (2 * 2^20 amplitudes); larger registers use the closed-form reduced
/// operator.
pub const EXPLICIT_ENV_CAP: usize = 20;

/// A two-branch macroscopic superposition coupled to an environment of
/// identical qubits.
#[derive(Debug, Clone)]
pub struct BranchingModel<R: Real> {
    pub system_m: FiniteKet<R>,
    pub system_n: FiniteKet<R>,
    pub n_env: usize,
    /// Rotation applied to each environment qubit on the N branch.
    pub theta: R,
    pub alpha: Complex<R>,
    pub beta: Complex<R>,
}

impl<R: Real> BranchingModel<R> {
    /// Standard two-level system states |M> = e0, |N> = e1.
    pub fn two_level(alpha: Complex<R>, beta: Complex<R>, theta: R, n_env: usize) -> Result<Self> {
        let model = Self {
            system_m: FiniteKet::basis_state(2, 0)?,
            system_n: FiniteKet::basis_state(2, 1)?,
            n_env,
            theta,
            alpha,
            beta,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<()> {
        self.system_m.require_unit()?;
        self.system_n.require_unit()?;
        let overlap = self.system_m.inner(&self.system_n)?.norm_sqr().sqrt();
        if overlap > R::strict_tol() {
            return Err(Error::InvalidParameter {
                name: "system_states",
                reason: format!("branch states overlap by {}", overlap.as_f64()),
            });
        }
        let total = self.alpha.norm_sqr() + self.beta.norm_sqr();
        if (total - R::one()).abs() > R::strict_tol() {
            return Err(Error::InvalidParameter {
                name: "amplitudes",
                reason: format!("|alpha|^2 + |beta|^2 = {}, expected 1", total.as_f64()),
            });
        }
        if !self.theta.is_finite() {
            return Err(Error::InvalidParameter {
                name: "theta",
                reason: "rotation angle must be finite".into(),
            });
        }
        Ok(())
    }

    pub fn system_dim(&self) -> usize {
        self.system_m.dim()
    }

    pub fn env_dim(&self) -> Result<usize> {
        if self.n_env > EXPLICIT_ENV_CAP {
            return Err(Error::SizeCap {
                requested: self.n_env,
                cap: EXPLICIT_ENV_CAP,
            });
        }
        Ok(1usize << self.n_env)
    }
}

/// Amplitudes of the N-branch environment state, tensor product of
/// cos(theta)|0> + sin(theta)|1> per qubit: amplitude of basis index `e`
/// is cos^(n - popcount(e)) sin^(popcount(e)).
fn env_branch_amplitude<R: Real>(theta: R, n_env: usize, e: usize) -> R {
    let ones = e.count_ones() as i32;
    theta.cos().powi(n_env as i32 - ones) * theta.sin().powi(ones)
}

/// Builds the joint system+environment state
/// alpha |M>|E_M> + beta |N>|E_N>, with |E_M> = |0...0>.
pub fn environment_branching<R: Real>(model: &BranchingModel<R>) -> Result<FiniteKet<R>> {
    model.validate()?;
    let env_dim = model.env_dim()?;
    let d_s = model.system_dim();
    let mut amps = ndarray::Array1::<Complex<R>>::zeros(d_s * env_dim);
    let m = model.system_m.amplitudes();
    let n = model.system_n.amplitudes();
    for s in 0..d_s {
        // E_M contribution only at environment index 0.
        amps[s * env_dim] = amps[s * env_dim] + model.alpha * m[s];
        for e in 0..env_dim {
            let w = env_branch_amplitude(model.theta, model.n_env, e);
            amps[s * env_dim + e] =
                amps[s * env_dim + e] + model.beta * n[s] * Complex::new(w, R::zero());
        }
    }
    FiniteKet::new(amps)
}

/// <E_M|E_N> by the closed-form product, cross-checked against the explicit
/// inner product whenever the register fits in memory.
pub fn env_overlap<R: Real>(model: &BranchingModel<R>) -> Result<R> {
    model.validate()?;
    let formula = model.theta.cos().powi(model.n_env as i32);
    if model.n_env <= EXPLICIT_ENV_CAP {
        let explicit = env_overlap_explicit(model)?;
        if (explicit - formula).abs() > R::strict_tol() {
            return Err(Error::InvalidParameter {
                name: "env_overlap",
                reason: format!(
                    "explicit overlap {} disagrees with closed form {}",
                    explicit.as_f64(),
                    formula.as_f64()
                ),
            });
        }
    }
    Ok(formula)
}

/// Explicit <E_M|E_N> from the materialized product states.
pub fn env_overlap_explicit<R: Real>(model: &BranchingModel<R>) -> Result<R> {
    let env_dim = model.env_dim()?;
    let mut e_n = ndarray::Array1::<Complex<R>>::zeros(env_dim);
    for e in 0..env_dim {
        e_n[e] = Complex::new(env_branch_amplitude(model.theta, model.n_env, e), R::zero());
    }
    let e_m = FiniteKet::basis_state(env_dim, 0)?;
    let e_n = FiniteKet::new(e_n)?;
    Ok(e_m.inner(&e_n)?.re)
}

/// Partial trace of the joint pure state over the environment register.
pub fn reduced_system_operator<R: Real>(
    joint: &FiniteKet<R>,
    n_env: usize,
) -> Result<DensityOperator<R>> {
    let env_dim = 1usize
        .checked_shl(n_env as u32)
        .ok_or(Error::SizeCap {
            requested: n_env,
            cap: EXPLICIT_ENV_CAP,
        })?;
    if joint.dim() % env_dim != 0 {
        return Err(Error::BadPartition {
            dims: vec![joint.dim() / env_dim.max(1), env_dim],
            dim: joint.dim(),
        });
    }
    let d_s = joint.dim() / env_dim;
    reduced_from_ket(joint, &[d_s, env_dim], &[0])
}

/// Closed-form reduced operator in the {M, N} basis, valid for any register
/// size: diag(|alpha|^2, |beta|^2) with off-diagonal
/// alpha conj(beta) cos(theta)^n_env.
pub fn reduced_closed_form<R: Real>(model: &BranchingModel<R>) -> Result<DensityOperator<R>> {
    model.validate()?;
    let c = model.theta.cos().powi(model.n_env as i32);
    let mut matrix = Array2::<Complex<R>>::zeros((2, 2));
    matrix[(0, 0)] = Complex::new(model.alpha.norm_sqr(), R::zero());
    matrix[(1, 1)] = Complex::new(model.beta.norm_sqr(), R::zero());
    matrix[(0, 1)] = model.alpha * model.beta.conj() * Complex::new(c, R::zero());
    matrix[(1, 0)] = matrix[(0, 1)].conj();
    DensityOperator::new(matrix)
}

/// Purity Tr(rho^2) of the closed-form reduced operator.
pub fn reduced_purity<R: Real>(model: &BranchingModel<R>) -> Result<R> {
    let rho = reduced_closed_form(model)?;
    Ok(rho.purity())
}

/// The ensemble-ambiguity construction: two different mixtures with the same
/// statistical operator.
///
/// Returns the operator of the orthogonal mixture {M, N; |alpha|^2,
/// |beta|^2}, the operator of the three-member mixture
/// {(M+N)/sqrt2, (M-N)/sqrt2, M; |beta|^2, |beta|^2, |alpha|^2 - |beta|^2},
/// and their trace distance (zero up to rounding).
///
/// Requires |alpha|^2 >= |beta|^2: otherwise the third weight would be
/// negative and the second family is not a statistical ensemble.
pub fn ambiguity_demo<R: Real>(
    alpha: Complex<R>,
    beta: Complex<R>,
) -> Result<(DensityOperator<R>, DensityOperator<R>, R)> {
    let wa = alpha.norm_sqr();
    let wb = beta.norm_sqr();
    if ((wa + wb) - R::one()).abs() > R::strict_tol() {
        return Err(Error::InvalidParameter {
            name: "amplitudes",
            reason: format!("|alpha|^2 + |beta|^2 = {}, expected 1", (wa + wb).as_f64()),
        });
    }
    if wa < wb {
        return Err(Error::InvalidParameter {
            name: "amplitudes",
            reason: format!(
                "|alpha|^2 = {} < |beta|^2 = {}: the third mixture weight \
                 |alpha|^2 - |beta|^2 must be nonnegative",
                wa.as_f64(),
                wb.as_f64()
            ),
        });
    }
    let m = FiniteKet::<R>::basis_state(2, 0)?;
    let n = FiniteKet::<R>::basis_state(2, 1)?;
    let inv_sqrt2 = Complex::new(R::one() / R::of(2.0).sqrt(), R::zero());
    let plus = FiniteKet::superpose(&[(inv_sqrt2, &m), (inv_sqrt2, &n)])?;
    let minus = FiniteKet::superpose(&[(inv_sqrt2, &m), (-inv_sqrt2, &n)])?;

    let direct = WeightedEnsemble::new(vec![(m.clone(), wa), (n, wb)])?.to_operator()?;
    let alternative =
        WeightedEnsemble::new(vec![(plus, wb), (minus, wb), (m, wa - wb)])?.to_operator()?;
    let distance = direct.distance(&alternative)?;
    Ok((direct, alternative, distance))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use num_complex::Complex64;

    fn amp(x: f64) -> Complex64 {
        Complex64::new(x, 0.0)
    }

    fn model(theta: f64, n_env: usize) -> BranchingModel<f64> {
        BranchingModel::two_level(amp(0.7f64.sqrt()), amp(0.3f64.sqrt()), theta, n_env).unwrap()
    }

    #[test]
    fn no_environment_reduces_to_the_bare_superposition() {
        let m = model(0.3, 0);
        let joint = environment_branching(&m).unwrap();
        assert_eq!(joint.dim(), 2);
        assert_abs_diff_eq!(joint.amplitudes()[0].re, 0.7f64.sqrt(), epsilon = 1e-12);
        assert_abs_diff_eq!(joint.amplitudes()[1].re, 0.3f64.sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn zero_angle_gives_a_product_state_with_no_decoherence() {
        let m = model(0.0, 6);
        let joint = environment_branching(&m).unwrap();
        assert_abs_diff_eq!(joint.norm(), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(env_overlap(&m).unwrap(), 1.0, epsilon = 1e-15);
        let rho = reduced_system_operator(&joint, 6).unwrap();
        // Off-diagonal fully intact: the reduced state is still pure.
        let expected = (0.7f64 * 0.3).sqrt();
        assert_abs_diff_eq!(rho.element(0, 1).re, expected, epsilon = 1e-12);
        assert_abs_diff_eq!(rho.purity(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn joint_state_is_normalized_for_random_models() {
        for (theta, n_env) in [(0.3, 1), (0.7, 5), (1.1, 10), (0.2, 14)] {
            let m = model(theta, n_env);
            let joint = environment_branching(&m).unwrap();
            assert_abs_diff_eq!(joint.norm(), 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn overlap_formula_examples() {
        assert_abs_diff_eq!(
            env_overlap(&model(0.3, 20)).unwrap(),
            0.3f64.cos().powi(20),
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(env_overlap(&model(0.3, 20)).unwrap(), 0.401, epsilon = 5e-4);
        // Desk-scale stand-in for a macroscopic register: closed form only.
        let huge = model(0.3, 1000);
        let overlap = env_overlap(&huge).unwrap();
        assert!(overlap < 1e-19, "overlap {overlap}");
        assert!(environment_branching(&huge).is_err());
    }

    #[test]
    fn reduced_off_diagonal_follows_the_exact_law() {
        for (theta, n_env) in [(0.3f64, 1usize), (0.3, 8), (0.9, 12), (1.2, 16)] {
            let m = model(theta, n_env);
            let joint = environment_branching(&m).unwrap();
            let rho = reduced_system_operator(&joint, n_env).unwrap();
            assert_abs_diff_eq!(rho.trace().re, 1.0, epsilon = 1e-12);
            let expected = (0.7f64 * 0.3).sqrt() * theta.cos().powi(n_env as i32);
            assert_abs_diff_eq!(rho.element(0, 1).norm(), expected.abs(), epsilon = 1e-12);
            // Explicit trace agrees with the closed form elementwise.
            let closed = reduced_closed_form(&m).unwrap();
            assert!(rho.distance(&closed).unwrap() < 1e-12);
        }
    }

    #[test]
    fn large_registers_give_a_practically_diagonal_operator() {
        let theta = 0.5f64;
        let n_env = 18;
        let m = model(theta, n_env);
        let joint = environment_branching(&m).unwrap();
        let rho = reduced_system_operator(&joint, n_env).unwrap();
        let bound = theta.cos().abs().powi(n_env as i32);
        assert!(rho.element(0, 1).norm() <= bound * (0.7f64 * 0.3).sqrt() + 1e-15);
        assert_abs_diff_eq!(rho.element(0, 0).re, 0.7, epsilon = 1e-12);
        assert_abs_diff_eq!(rho.element(1, 1).re, 0.3, epsilon = 1e-12);
    }

    #[test]
    fn purity_is_non_increasing_in_register_size() {
        let theta = 0.4;
        let mut last = f64::INFINITY;
        for n_env in 0..32 {
            let p = reduced_purity(&model(theta, n_env)).unwrap();
            assert!(p <= last + 1e-15, "purity rose at n_env = {n_env}");
            last = p;
        }
    }

    #[test]
    fn ambiguity_demo_examples() {
        // |alpha|^2 = 0.7: the two mixtures share one operator.
        let (direct, alternative, distance) =
            ambiguity_demo(amp(0.7f64.sqrt()), amp(0.3f64.sqrt())).unwrap();
        assert!(distance < 1e-12);
        assert_abs_diff_eq!(direct.element(0, 0).re, 0.7, epsilon = 1e-12);
        assert_abs_diff_eq!(alternative.element(0, 0).re, 0.7, epsilon = 1e-12);
        assert_abs_diff_eq!(alternative.element(0, 1).norm(), 0.0, epsilon = 1e-12);

        // Equal weights: the degenerate third member drops out.
        let (_, _, d_eq) = ambiguity_demo(amp(0.5f64.sqrt()), amp(0.5f64.sqrt())).unwrap();
        assert!(d_eq < 1e-12);

        // beta = 0: both mixtures are |M><M|.
        let (a, b, d0) = ambiguity_demo(amp(1.0), amp(0.0)).unwrap();
        assert!(d0 < 1e-12);
        assert_abs_diff_eq!(a.element(0, 0).re, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(b.element(0, 0).re, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn ambiguity_demo_rejects_dominant_beta() {
        let err = ambiguity_demo(amp(0.3f64.sqrt()), amp(0.7f64.sqrt()));
        match err {
            Err(Error::InvalidParameter { reason, .. }) => {
                assert!(reason.contains("nonnegative"), "reason: {reason}");
            }
            other => panic!("expected weight-positivity rejection, got {other:?}"),
        }
    }

    #[test]
    fn ambiguity_demo_holds_with_complex_phases() {
        let alpha = Complex64::from_polar(0.8f64.sqrt(), 0.9);
        let beta = Complex64::from_polar(0.2f64.sqrt(), -2.2);
        let (_, _, distance) = ambiguity_demo(alpha, beta).unwrap();
        assert!(distance < 1e-12);
    }
}
