//! The general measurement scheme made executable: statistical ensembles of
//! imperfect apparatuses, pointer-sector geometry, reliability measures over
//! the hidden parameter, and the no-go verdict for superposed inputs.
//!
//! The hidden parameter alpha is realized as a 64-bit seed indexing the
//! hidden-sector state and unitary; the ensemble measure p(alpha) is uniform
//! over sampled seeds. Pointer sectors are materialized per alpha: the
//! reference states of a sector are the ideal apparatus states with the
//! pointer at that slot and that apparatus's own hidden configuration.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::evolver::{
    apply_operator, build_measurement_unitary, MeasurementUnitarySpec, POINTER_DOWN,
    POINTER_READY, POINTER_UP, SYSTEM_DIM,
};
use crate::hilbert::FiniteKet;
use crate::real::Real;
use crate::rng::{self, StreamTag};
use crate::stats::binomial_se;
use rand::Rng;

/// Labels and pointer slots of the macroscopically distinct outcomes, plus
/// the separation tolerance eta of the sector geometry.
#[derive(Debug, Clone, PartialEq)]
pub struct SectorLayout<R: Real> {
    pub eta: R,
    pub sectors: Vec<(String, usize)>,
}

impl<R: Real> SectorLayout<R> {
    /// Ready/up/down layout with the given eta.
    pub fn standard(eta: R) -> Self {
        Self {
            eta,
            sectors: vec![
                ("R".into(), POINTER_READY),
                ("U".into(), POINTER_UP),
                ("D".into(), POINTER_DOWN),
            ],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eta > R::zero() && self.eta < R::of(0.5)) {
            return Err(Error::InvalidParameter {
                name: "eta",
                reason: "sector tolerance must lie in (0, 0.5)".into(),
            });
        }
        if self.sectors.is_empty() {
            return Err(Error::InvalidParameter {
                name: "sectors",
                reason: "need at least one sector".into(),
            });
        }
        Ok(())
    }

    /// Membership radius: half the guaranteed sector separation, the unique
    /// symmetric choice that makes membership unambiguous.
    pub fn membership_radius(&self) -> R {
        (R::of(2.0).sqrt() - self.eta) / R::of(2.0)
    }
}

/// One pointer sector: a macroscopic label and representative states.
#[derive(Debug, Clone)]
pub struct PointerSector<R: Real> {
    pub label: String,
    pub reference_states: Vec<FiniteKet<R>>,
    pub eta: R,
}

impl<R: Real> PointerSector<R> {
    /// Distance from `state` to the nearest reference.
    pub fn distance_to(&self, state: &FiniteKet<R>) -> Result<R> {
        let mut best = R::infinity();
        for r in &self.reference_states {
            best = best.min(state.distance(r)?);
        }
        Ok(best)
    }
}

/// A family of apparatuses sharing macroscopic construction but differing in
/// uncontrollable degrees of freedom.
#[derive(Debug, Clone)]
pub struct ApparatusEnsemble<R: Real> {
    spec: MeasurementUnitarySpec<R>,
}

impl<R: Real> ApparatusEnsemble<R> {
    pub fn new(spec: MeasurementUnitarySpec<R>) -> Result<Self> {
        spec.validate()?;
        Ok(Self { spec })
    }

    pub fn spec(&self) -> &MeasurementUnitarySpec<R> {
        &self.spec
    }

    /// Draws `n` hidden indices from the ensemble measure.
    pub fn sample_alphas(&self, n: usize, seed: u64) -> Vec<u64> {
        let mut rng = rng::stream(seed, StreamTag::AlphaSampler, 0);
        (0..n).map(|_| rng.random::<u64>()).collect()
    }

    /// Ready state of apparatus `alpha` (pointer at the ready slot, hidden
    /// sector in its seeded configuration).
    pub fn ready_state(&self, alpha: u64) -> FiniteKet<R> {
        let pointer = FiniteKet::basis_state(self.spec.pointer_positions, POINTER_READY)
            .expect("ready slot exists");
        pointer
            .tensor(&self.spec.hidden_ready(alpha))
            .expect("apparatus dimension is under the cap")
    }

    /// Composite system (x) apparatus input.
    pub fn composite(&self, system: &FiniteKet<R>, alpha: u64) -> Result<FiniteKet<R>> {
        if system.dim() != SYSTEM_DIM {
            return Err(Error::DimensionMismatch {
                left: system.dim(),
                right: SYSTEM_DIM,
            });
        }
        system.tensor(&self.ready_state(alpha))
    }

    /// Final state when apparatus `alpha` is triggered by the given system
    /// input.
    pub fn trigger(&self, system: &FiniteKet<R>, alpha: u64) -> Result<FiniteKet<R>> {
        let u = build_measurement_unitary(&self.spec, alpha)?;
        apply_operator(&u, &self.composite(system, alpha)?)
    }

    /// Pointer sectors for apparatus `alpha`. References are the ideal
    /// composite states with the pointer at the sector slot, for both system
    /// basis branches; the ready sector keeps the unevolved hidden state.
    ///
    /// Cross-sector separation is enforced before returning.
    pub fn sectors(&self, alpha: u64, layout: &SectorLayout<R>) -> Result<Vec<PointerSector<R>>> {
        layout.validate()?;
        let hidden_ready = self.spec.hidden_ready(alpha);
        let hidden_final = apply_operator(&self.spec.hidden_unitary(alpha), &hidden_ready)?;
        let mut sectors = Vec::with_capacity(layout.sectors.len());
        for (label, slot) in &layout.sectors {
            if *slot >= self.spec.pointer_positions {
                return Err(Error::InvalidParameter {
                    name: "sectors",
                    reason: format!("pointer slot {slot} out of range"),
                });
            }
            let pointer = FiniteKet::basis_state(self.spec.pointer_positions, *slot)?;
            let hidden = if *slot == POINTER_READY {
                &hidden_ready
            } else {
                &hidden_final
            };
            let mut reference_states = Vec::with_capacity(SYSTEM_DIM);
            for branch in 0..SYSTEM_DIM {
                let system = FiniteKet::basis_state(SYSTEM_DIM, branch)?;
                reference_states.push(system.tensor(&pointer)?.tensor(hidden)?);
            }
            sectors.push(PointerSector {
                label: label.clone(),
                reference_states,
                eta: layout.eta,
            });
        }
        check_sector_separation(&sectors, layout)?;
        Ok(sectors)
    }
}

/// Verifies that representatives of distinct sectors are at least
/// sqrt(2) - eta apart.
fn check_sector_separation<R: Real>(
    sectors: &[PointerSector<R>],
    layout: &SectorLayout<R>,
) -> Result<()> {
    let min_separation = R::of(2.0).sqrt() - layout.eta;
    for (i, a) in sectors.iter().enumerate() {
        for b in sectors.iter().skip(i + 1) {
            for ra in &a.reference_states {
                for rb in &b.reference_states {
                    if ra.distance(rb)? < min_separation {
                        return Err(Error::InvalidParameter {
                            name: "sectors",
                            reason: format!(
                                "sectors `{}` and `{}` are closer than sqrt(2) - eta",
                                a.label, b.label
                            ),
                        });
                    }
                }
            }
        }
    }
    Ok(())
}

/// Returns the unique sector whose reference set comes within the membership
/// radius of the state, `None` if no sector matches, or an error if two do.
pub fn classify_pointer<R: Real>(
    state: &FiniteKet<R>,
    sectors: &[PointerSector<R>],
) -> Result<Option<String>> {
    state.require_unit()?;
    let mut hit: Option<&PointerSector<R>> = None;
    for sector in sectors {
        let radius = (R::of(2.0).sqrt() - sector.eta) / R::of(2.0);
        if sector.distance_to(state)? < radius {
            if let Some(prev) = hit {
                return Err(Error::AmbiguousSector {
                    first: prev.label.clone(),
                    second: sector.label.clone(),
                });
            }
            hit = Some(sector);
        }
    }
    Ok(hit.map(|s| s.label.clone()))
}

/// Monte Carlo estimates of the reliability measures over the apparatus
/// ensemble.
#[derive(Debug, Clone)]
pub struct ReliabilityReport<R: Real> {
    /// mu(J_U^-): triggered by "up" but not registering in the up sector.
    pub mu_u_minus: R,
    /// mu(J_D^-).
    pub mu_d_minus: R,
    /// mu(J_U^+ intersect J_D^+): apparatuses correct on both inputs.
    pub mu_joint_plus: R,
    /// Binomial standard errors of the three estimates.
    pub se: [R; 3],
    pub n_samples: usize,
    pub seed: u64,
}

/// Estimates mu(J_U^-), mu(J_D^-) and mu(J_U^+ intersect J_D^+) by sampling
/// hidden indices and classifying the definite-input finals.
pub fn reliability_measures<R: Real>(
    ens: &ApparatusEnsemble<R>,
    layout: &SectorLayout<R>,
    n_samples: usize,
    seed: u64,
) -> Result<ReliabilityReport<R>> {
    if n_samples < 1000 {
        return Err(Error::InvalidParameter {
            name: "n_samples",
            reason: "reliability estimates need at least 1000 samples".into(),
        });
    }
    let alphas = ens.sample_alphas(n_samples, seed);
    let up = FiniteKet::basis_state(SYSTEM_DIM, 0)?;
    let down = FiniteKet::basis_state(SYSTEM_DIM, 1)?;
    let counts = alphas
        .par_iter()
        .map(|&alpha| -> Result<(u32, u32, u32)> {
            let sectors = ens.sectors(alpha, layout)?;
            let fu = ens.trigger(&up, alpha)?;
            let fd = ens.trigger(&down, alpha)?;
            let u_ok = classify_pointer(&fu, &sectors)? == Some("U".to_string());
            let d_ok = classify_pointer(&fd, &sectors)? == Some("D".to_string());
            Ok((
                u32::from(!u_ok),
                u32::from(!d_ok),
                u32::from(u_ok && d_ok),
            ))
        })
        .try_reduce(
            || (0u32, 0u32, 0u32),
            |a, b| Ok((a.0 + b.0, a.1 + b.1, a.2 + b.2)),
        )?;
    let n = R::of(n_samples as f64);
    let mu_u_minus = R::of(counts.0 as f64) / n;
    let mu_d_minus = R::of(counts.1 as f64) / n;
    let mu_joint_plus = R::of(counts.2 as f64) / n;
    Ok(ReliabilityReport {
        mu_u_minus,
        mu_d_minus,
        mu_joint_plus,
        se: [
            binomial_se(mu_u_minus, n_samples),
            binomial_se(mu_d_minus, n_samples),
            binomial_se(mu_joint_plus, n_samples),
        ],
        n_samples,
        seed,
    })
}

/// Outcome of the superposition no-go check over the reliable subensemble.
#[derive(Debug, Clone)]
pub struct NogoReport<R: Real> {
    /// Fraction of reliable apparatuses whose superposed-input final state
    /// stays within the unit-distance bound of the down branch and
    /// classifies into no sector. The argument requires exactly 1.
    pub pass_fraction: R,
    /// Apparatuses sampled.
    pub n_samples: usize,
    /// Apparatuses in J_U^+ intersect J_D^+ (the tested subensemble).
    pub n_reliable: usize,
    /// max over alpha of || |F,u+d,alpha> - |F,d,alpha> ||; bounded by 1.
    pub worst_distance_to_branch: R,
    /// max over alpha of the linearity residual (must be rounding-level).
    pub max_linearity_residual: R,
    /// Fraction of the reliable subensemble classifying definite inputs
    /// correctly (control arm; 1 by construction).
    pub control_pass_fraction: R,
    pub seed: u64,
}

/// For every sampled alpha in J_U^+ intersect J_D^+, feeds the equal-weight
/// superposition through the apparatus and verifies that (a) the output is
/// the superposition of the branch outputs (linearity witness), (b) its
/// distance to the down branch is at most 1 + 1e-9, and (c) it belongs to no
/// pointer sector.
pub fn nogo_check<R: Real>(
    ens: &ApparatusEnsemble<R>,
    layout: &SectorLayout<R>,
    n_samples: usize,
    seed: u64,
) -> Result<NogoReport<R>> {
    let alphas = ens.sample_alphas(n_samples, seed);
    let up = FiniteKet::basis_state(SYSTEM_DIM, 0)?;
    let down = FiniteKet::basis_state(SYSTEM_DIM, 1)?;
    let inv_sqrt2 = num_complex::Complex::new(R::one() / R::of(2.0).sqrt(), R::zero());
    let superposed = FiniteKet::superpose(&[(inv_sqrt2, &up), (inv_sqrt2, &down)])?
        .normalized()?;

    struct Acc<R> {
        reliable: usize,
        passed: usize,
        control: usize,
        worst_distance: R,
        worst_residual: R,
    }
    let acc = alphas
        .par_iter()
        .map(|&alpha| -> Result<Acc<R>> {
            let sectors = ens.sectors(alpha, layout)?;
            let fu = ens.trigger(&up, alpha)?;
            let fd = ens.trigger(&down, alpha)?;
            let u_ok = classify_pointer(&fu, &sectors)? == Some("U".to_string());
            let d_ok = classify_pointer(&fd, &sectors)? == Some("D".to_string());
            if !(u_ok && d_ok) {
                return Ok(Acc {
                    reliable: 0,
                    passed: 0,
                    control: 0,
                    worst_distance: R::zero(),
                    worst_residual: R::zero(),
                });
            }
            let final_state = ens.trigger(&superposed, alpha)?;
            // (a) Linearity witness.
            let expected = FiniteKet::superpose(&[(inv_sqrt2, &fu), (inv_sqrt2, &fd)])?;
            let residual = final_state.distance(&expected)?;
            if residual > R::of(1e-12).max(R::strict_tol()) {
                return Err(Error::LinearityViolation {
                    residual: residual.as_f64(),
                });
            }
            // (b) Distance to the down branch obeys the unit bound.
            let dist = final_state.distance(&fd)?;
            let bound_ok = dist <= R::one() + R::of(1e-9);
            // (c) No sector claims the superposed final.
            let unclassified = classify_pointer(&final_state, &sectors)?.is_none();
            Ok(Acc {
                reliable: 1,
                passed: usize::from(bound_ok && unclassified),
                control: 1,
                worst_distance: dist,
                worst_residual: residual,
            })
        })
        .try_reduce(
            || Acc {
                reliable: 0,
                passed: 0,
                control: 0,
                worst_distance: R::zero(),
                worst_residual: R::zero(),
            },
            |a, b| {
                Ok(Acc {
                    reliable: a.reliable + b.reliable,
                    passed: a.passed + b.passed,
                    control: a.control + b.control,
                    worst_distance: a.worst_distance.max(b.worst_distance),
                    worst_residual: a.worst_residual.max(b.worst_residual),
                })
            },
        )?;

    let reliable = acc.reliable.max(1);
    Ok(NogoReport {
        pass_fraction: R::of(acc.passed as f64) / R::of(reliable as f64),
        n_samples,
        n_reliable: acc.reliable,
        worst_distance_to_branch: acc.worst_distance,
        max_linearity_residual: acc.worst_residual,
        control_pass_fraction: R::of(acc.control as f64) / R::of(reliable as f64),
        seed,
    })
}
