//! Repeater primitives as maps on [`PatternState`]: generation, connection,
//! purification, parallel-pair post-selection and final readout.

pub mod appendix;
pub mod circuits;
pub mod tables;

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{FockDensityOperator, Ket};
use crate::noise::{phase_error_prob, phase_flip_channel, NoiseParams};
use crate::pattern::{ModeMap, PatternState, SchemeKind};

use tables::{state_to_vector, table, vector_to_state};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EnpKind {
    Bit,
    Phase,
}

impl fmt::Display for EnpKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EnpKind::Bit => "bit",
            EnpKind::Phase => "phase",
        })
    }
}

impl FromStr for EnpKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bit" => Ok(EnpKind::Bit),
            "phase" => Ok(EnpKind::Phase),
            other => Err(Error::Parse(format!("unknown purification kind `{other}`"))),
        }
    }
}

/// Protocol step with its own oracle circuit.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum Stage {
    /// Connection of freshly generated pairs (with the 45° stage for the
    /// two-cell scheme).
    EncFirst,
    EncHigher,
    Enp(EnpKind),
    /// Parallel-pair post-selection ending the single-rail protocol.
    Pme,
    /// One-photon-per-node readout of a final two-cell pair.
    Readout,
}

/// Unnormalized output and its trace.
#[derive(Clone, Debug, PartialEq)]
pub struct StepOutcome {
    pub out: PatternState,
    pub success_prob: f64,
}

impl StepOutcome {
    fn from_vector(scheme: SchemeKind, v: &[f64]) -> Self {
        let out = vector_to_state(scheme, v);
        let success_prob = out.total();
        StepOutcome { out, success_prob }
    }

    /// Output rescaled to unit trace.
    pub fn normalized(&self) -> Result<PatternState> {
        self.out.normalize()
    }
}

/// Multi-excitation content of a heralded single-rail pair.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EngModel {
    /// Double-excitation weight relative to the logical weight, per unit `p_c`.
    pub multi_ratio: f64,
    /// Share of the double-excitation weight with one excitation per cell;
    /// the rest has both in one cell.
    pub split_share: f64,
}

impl Default for EngModel {
    fn default() -> Self {
        EngModel {
            multi_ratio: 0.5,
            split_share: 0.5,
        }
    }
}

/// Heralded single-rail pair `[ξ+ + r(s|11⟩ + (1−s)(|20⟩+|02⟩)/2)]/(1+r)`
/// with `r = multi_ratio · p_c`, as kets over (x, y).
fn single_rail_pair(p_c: f64, model: &EngModel) -> Vec<(f64, Ket)> {
    let r = model.multi_ratio * p_c;
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let c = |x: f64| Complex64::new(x, 0.0);
    let norm = 1.0 + r;
    vec![
        (1.0 / norm, vec![(vec![1, 0], c(s)), (vec![0, 1], c(s))]),
        (r * model.split_share / norm, vec![(vec![1, 1], c(1.0))]),
        (r * (1.0 - model.split_share) / (2.0 * norm), vec![(vec![2, 0], c(1.0))]),
        (r * (1.0 - model.split_share) / (2.0 * norm), vec![(vec![0, 2], c(1.0))]),
    ]
}

pub fn eng(scheme: SchemeKind, p_c: f64, noise: &NoiseParams, l0: f64) -> Result<StepOutcome> {
    eng_with(scheme, p_c, noise, l0, &EngModel::default())
}

/// Elementary pair after heralding, with phase diffusion over `l0` folded
/// into the logical block. Always normalized.
pub fn eng_with(scheme: SchemeKind, p_c: f64, noise: &NoiseParams, l0: f64, model: &EngModel) -> Result<StepOutcome> {
    if !(p_c > 0.0 && p_c < 1.0) {
        return Err(Error::ProbabilityOutOfRange { name: "p_c", value: p_c });
    }
    if !(model.multi_ratio >= 0.0) || !(0.0..=1.0).contains(&model.split_share) {
        return Err(Error::InvalidArgument("generation model parameters out of range".into()));
    }
    let q = phase_error_prob(noise.d, l0)?;
    let single = single_rail_pair(p_c, model);
    let state = match scheme {
        SchemeKind::Dlcz => {
            let map = ModeMap::Dlcz {
                x: "x".into(),
                y: "y".into(),
            };
            let rho = FockDensityOperator::from_mixture(map.modes(), 4, &single)?;
            PatternState::project_from_fock(&rho, &map)?.state
        }
        SchemeKind::NewScheme => {
            // Independent H-cell and V-cell pairs; register is (aH, aV, bH, bV).
            let mut ens: Vec<(f64, Ket)> = Vec::new();
            for (wh, kh) in &single {
                for (wv, kv) in &single {
                    let mut ket = Vec::new();
                    for (oh, ah) in kh {
                        for (ov, av) in kv {
                            ket.push((vec![oh[0], ov[0], oh[1], ov[1]], ah * av));
                        }
                    }
                    ens.push((wh * wv, ket));
                }
            }
            let map = ModeMap::NewScheme {
                a: crate::fock::PolarizationPair::new("a"),
                b: crate::fock::PolarizationPair::new("b"),
            };
            let rho = FockDensityOperator::from_mixture(map.modes(), 4, &ens)?;
            PatternState::project_from_fock(&rho, &map)?.state
        }
    };
    let state = state.normalize()?.apply_bell_channel(&phase_flip_channel(q));
    Ok(StepOutcome {
        success_prob: 1.0,
        out: state,
    })
}

fn check_scheme(expected: SchemeKind, states: &[&PatternState]) -> Result<()> {
    for s in states {
        if s.scheme != expected {
            return Err(Error::SchemeMismatch(format!(
                "expected {expected} input, got {}",
                s.scheme
            )));
        }
    }
    Ok(())
}

/// Connection of two pairs at nesting level `level` (1 for elementary inputs).
pub fn enc(scheme: SchemeKind, left: &PatternState, right: &PatternState, eta: f64, level: u32) -> Result<StepOutcome> {
    check_scheme(scheme, &[left, right])?;
    if level < 1 {
        return Err(Error::InvalidArgument("connection level starts at 1".into()));
    }
    let stage = if level == 1 { Stage::EncFirst } else { Stage::EncHigher };
    let t = table(scheme, stage, eta)?;
    Ok(StepOutcome::from_vector(scheme, &t.apply2(&state_to_vector(left), &state_to_vector(right))))
}

pub fn enp(kind: EnpKind, pair1: &PatternState, pair2: &PatternState, eta: f64) -> Result<StepOutcome> {
    check_scheme(SchemeKind::NewScheme, &[pair1, pair2])?;
    let t = table(SchemeKind::NewScheme, Stage::Enp(kind), eta)?;
    Ok(StepOutcome::from_vector(
        SchemeKind::NewScheme,
        &t.apply2(&state_to_vector(pair1), &state_to_vector(pair2)),
    ))
}

/// Two parallel single-rail pairs to one effective polarization pair; the
/// output is expressed in the two-cell representation.
pub fn postselect_pme(pair1: &PatternState, pair2: &PatternState, eta: f64) -> Result<StepOutcome> {
    check_scheme(SchemeKind::Dlcz, &[pair1, pair2])?;
    let t = table(SchemeKind::Dlcz, Stage::Pme, eta)?;
    Ok(StepOutcome::from_vector(
        SchemeKind::NewScheme,
        &t.apply2(&state_to_vector(pair1), &state_to_vector(pair2)),
    ))
}

/// Post-selects one detected photon per node on a final two-cell pair.
pub fn readout(pair: &PatternState, eta: f64) -> Result<StepOutcome> {
    check_scheme(SchemeKind::NewScheme, &[pair])?;
    let t = table(SchemeKind::NewScheme, Stage::Readout, eta)?;
    Ok(StepOutcome::from_vector(SchemeKind::NewScheme, &t.apply1(&state_to_vector(pair))))
}

/// `(2^m − 1)(1 − η) p_c`.
pub fn predicted_logical_error(m: u32, eta: f64, p_c: f64) -> f64 {
    ((1u64 << m.min(62)) as f64 - 1.0) * (1.0 - eta) * p_c
}
