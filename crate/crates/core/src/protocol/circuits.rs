//! Linear-optical circuits for every protocol stage, run on the Fock oracle.
//!
//! Each stage takes one or two pair states over fixed mode labels and returns
//! the accepted, corrected, unnormalized output pair summed over all accepted
//! detection outcomes.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::Result;
use crate::fock::{
    beamsplitter, pauli_x, pauli_z, rotation_45, run_circuit, run_circuit_pure, CircuitStep, DetectionPattern,
    FockDensityOperator, FockKet, ModeLabel, PolarizationPair,
};
use crate::pattern::{ModeMap, SchemeKind};

use super::{EnpKind, Stage};

fn pair(p: &PolarizationPair) -> Vec<ModeLabel> {
    vec![p.h.clone(), p.v.clone()]
}

fn loss(modes: &[ModeLabel], eta: f64) -> Vec<CircuitStep> {
    modes
        .iter()
        .map(|m| CircuitStep::Loss { mode: m.clone(), eta })
        .collect()
}

fn rotate(p: &PolarizationPair) -> CircuitStep {
    CircuitStep::Unitary {
        modes: pair(p),
        u: rotation_45(),
    }
}

fn sign_flip() -> DMatrix<Complex64> {
    DMatrix::from_element(1, 1, Complex64::new(-1.0, 0.0))
}

/// Input labels of each stage.
pub fn input_maps(scheme: SchemeKind, stage: Stage) -> Vec<ModeMap> {
    let ns = |a: &str, b: &str| ModeMap::NewScheme {
        a: PolarizationPair::new(a),
        b: PolarizationPair::new(b),
    };
    let dl = |x: &str, y: &str| ModeMap::Dlcz {
        x: x.into(),
        y: y.into(),
    };
    match (scheme, stage) {
        (SchemeKind::NewScheme, Stage::EncFirst | Stage::EncHigher) => vec![ns("aL", "bC"), ns("aC", "bR")],
        (SchemeKind::NewScheme, Stage::Enp(_)) => vec![ns("a1", "b1"), ns("a2", "b2")],
        (SchemeKind::NewScheme, Stage::Readout) => vec![ns("a", "b")],
        (SchemeKind::Dlcz, Stage::EncFirst | Stage::EncHigher) => vec![dl("xL", "yL"), dl("xR", "yR")],
        (SchemeKind::Dlcz, Stage::Pme) => vec![dl("x1", "y1"), dl("x2", "y2")],
        (SchemeKind::NewScheme, Stage::Pme) | (SchemeKind::Dlcz, Stage::Enp(_) | Stage::Readout) => Vec::new(),
    }
}

/// Output labels of each stage.
pub fn output_map(scheme: SchemeKind, stage: Stage) -> ModeMap {
    match (scheme, stage) {
        (SchemeKind::NewScheme, Stage::EncFirst | Stage::EncHigher) => ModeMap::NewScheme {
            a: PolarizationPair::new("aL"),
            b: PolarizationPair::new("bR"),
        },
        (SchemeKind::NewScheme, Stage::Enp(_)) => ModeMap::NewScheme {
            a: PolarizationPair::new("a3"),
            b: PolarizationPair::new("b3"),
        },
        (SchemeKind::Dlcz, Stage::Pme) => ModeMap::NewScheme {
            a: PolarizationPair {
                h: "x1".into(),
                v: "x2".into(),
            },
            b: PolarizationPair {
                h: "y2".into(),
                v: "y1".into(),
            },
        },
        (SchemeKind::Dlcz, _) => ModeMap::Dlcz {
            x: "xL".into(),
            y: "yR".into(),
        },
        (SchemeKind::NewScheme, _) => ModeMap::NewScheme {
            a: PolarizationPair::new("a"),
            b: PolarizationPair::new("b"),
        },
    }
}

/// Heralding rule applied to a detection pattern.
#[derive(Clone, Debug)]
enum Accept {
    /// Exactly one photon in each of two detector pairs; odd parity of the
    /// two `−` outcomes calls for the correction.
    OnePerOutput(PolarizationPair, PolarizationPair),
    /// One photon in total over two detectors; a click on the first calls
    /// for the correction.
    SingleClick(ModeLabel, ModeLabel),
}

impl Accept {
    fn decide(&self, pattern: &DetectionPattern) -> Option<bool> {
        match self {
            Accept::OnePerOutput(o1, o2) => one_per_output(pattern, o1, o2),
            Accept::SingleClick(first, second) => {
                (pattern.count(first) + pattern.count(second) == 1).then(|| pattern.count(first) == 1)
            }
        }
    }
}

/// Everything one stage does to the joint input register.
#[derive(Clone, Debug)]
pub struct StageCircuit {
    /// Loss and optics; ends in a measurement whenever `accept` is set.
    steps: Vec<CircuitStep>,
    accept: Option<Accept>,
    correction: Option<(Vec<ModeLabel>, DMatrix<Complex64>)>,
    /// Unitaries on the surviving register after correction.
    after: Vec<CircuitStep>,
    /// Post-selection: the summed count over each group equals the target.
    keep: Vec<(Vec<ModeLabel>, u8)>,
}

fn group_indices(modes: &[ModeLabel], keep: &[(Vec<ModeLabel>, u8)]) -> Result<Vec<(Vec<usize>, u8)>> {
    keep.iter()
        .map(|(group, n)| {
            let idx = group
                .iter()
                .map(|m| {
                    modes
                        .iter()
                        .position(|x| x == m)
                        .ok_or_else(|| crate::Error::UnknownMode(m.to_string()))
                })
                .collect::<Result<Vec<_>>>()?;
            Ok((idx, *n))
        })
        .collect()
}

fn passes(occ: &[u8], groups: &[(Vec<usize>, u8)]) -> bool {
    groups.iter().all(|(idx, n)| idx.iter().map(|&i| occ[i]).sum::<u8>() == *n)
}

impl StageCircuit {
    /// Reference path on density operators.
    pub fn run_density(&self, joint: &FockDensityOperator) -> Result<FockDensityOperator> {
        let outcomes = run_circuit(joint, &self.steps)?;
        let remaining: Vec<ModeLabel> = outcomes
            .values()
            .next()
            .map(|(s, _)| s.modes().to_vec())
            .unwrap_or_default();
        let mut total: Option<FockDensityOperator> = None;
        for (pattern, (cond, p)) in outcomes {
            let flip = match &self.accept {
                None => false,
                Some(a) => match a.decide(&pattern) {
                    Some(f) => f,
                    None => continue,
                },
            };
            if p <= 0.0 {
                continue;
            }
            let cond = match (&self.correction, flip) {
                (Some((modes, u)), true) => cond.apply_mode_unitary(modes, u)?,
                _ => cond,
            };
            total = Some(match total {
                None => cond,
                Some(t) => t.add(&cond)?,
            });
        }
        let mut out = match total {
            Some(t) => t,
            None => FockDensityOperator::from_mixture(remaining, joint.cutoff(), &[])?,
        };
        for step in &self.after {
            if let CircuitStep::Unitary { modes, u } = step {
                out = out.apply_mode_unitary(modes, u)?;
            }
        }
        if self.keep.is_empty() {
            return Ok(out);
        }
        let groups = group_indices(out.modes(), &self.keep)?;
        Ok(out.project(|occ| passes(occ, &groups)))
    }

    /// Fast path on a pure joint input: accepted, corrected output kets,
    /// still carrying their environment record.
    pub fn run_pure(&self, joint: &FockKet) -> Result<Vec<FockKet>> {
        let mut out = Vec::new();
        for (pattern, ket) in run_circuit_pure(joint, &self.steps)? {
            let flip = match &self.accept {
                None => false,
                Some(a) => match a.decide(&pattern) {
                    Some(f) => f,
                    None => continue,
                },
            };
            let mut ket = match (&self.correction, flip) {
                (Some((modes, u)), true) => ket.apply_mode_unitary(modes, u)?,
                _ => ket,
            };
            for step in &self.after {
                if let CircuitStep::Unitary { modes, u } = step {
                    ket = ket.apply_mode_unitary(modes, u)?;
                }
            }
            if !self.keep.is_empty() {
                let groups = group_indices(ket.modes(), &self.keep)?;
                ket = ket.project(|occ| passes(occ, &groups));
            }
            if ket.norm_sqr() > 0.0 {
                out.push(ket);
            }
        }
        Ok(out)
    }
}

/// Exactly one photon in each of two detector pairs; returns the parity of
/// the two `−` outcomes.
fn one_per_output(pattern: &DetectionPattern, o1: &PolarizationPair, o2: &PolarizationPair) -> Option<bool> {
    let n1 = pattern.count(&o1.h) + pattern.count(&o1.v);
    let n2 = pattern.count(&o2.h) + pattern.count(&o2.v);
    if n1 != 1 || n2 != 1 {
        return None;
    }
    Some((pattern.count(&o1.v) == 1) != (pattern.count(&o2.v) == 1))
}

/// Circuit of one stage.
pub fn stage_circuit(scheme: SchemeKind, stage: Stage, eta: f64) -> Result<StageCircuit> {
    match (scheme, stage) {
        (SchemeKind::NewScheme, Stage::EncFirst | Stage::EncHigher) => Ok(ns_enc(eta, stage == Stage::EncFirst)),
        (SchemeKind::NewScheme, Stage::Enp(kind)) => Ok(ns_enp(eta, kind)),
        (SchemeKind::NewScheme, Stage::Readout) => Ok(readout(eta)),
        (SchemeKind::Dlcz, Stage::EncFirst | Stage::EncHigher) => Ok(dlcz_enc(eta)),
        (SchemeKind::Dlcz, Stage::Pme) => Ok(pme(eta)),
        _ => Err(crate::Error::SchemeMismatch(format!("stage {stage:?} is not defined for {scheme}"))),
    }
}

/// Runs one stage on input states whose registers match [`input_maps`].
pub fn run_stage(
    scheme: SchemeKind,
    stage: Stage,
    inputs: &[FockDensityOperator],
    eta: f64,
) -> Result<FockDensityOperator> {
    let joint = match inputs {
        [one] => one.clone(),
        [l, r] => l.tensor(r)?,
        _ => {
            return Err(crate::Error::InvalidArgument(format!(
                "stage takes one or two inputs, got {}",
                inputs.len()
            )))
        }
    };
    stage_circuit(scheme, stage, eta)?.run_density(&joint)
}

fn ns_enc(eta: f64, first: bool) -> StageCircuit {
    let (al, bc, ac) = (PolarizationPair::new("aL"), PolarizationPair::new("bC"), PolarizationPair::new("aC"));
    let (o1, o2) = (PolarizationPair::new("o1"), PolarizationPair::new("o2"));
    let mut steps = loss(&[pair(&bc), pair(&ac)].concat(), eta);
    if first {
        steps.push(rotate(&bc));
        steps.push(rotate(&ac));
    }
    steps.push(CircuitStep::Pbs {
        in_a: bc,
        in_b: ac,
        out_1: o1.clone(),
        out_2: o2.clone(),
    });
    steps.push(rotate(&o1));
    steps.push(rotate(&o2));
    steps.push(CircuitStep::Measure {
        modes: [pair(&o1), pair(&o2)].concat(),
    });
    let fix = if first { pauli_x() } else { pauli_z() };
    StageCircuit {
        steps,
        accept: Some(Accept::OnePerOutput(o1, o2)),
        correction: Some((pair(&al), fix)),
        after: Vec::new(),
        keep: Vec::new(),
    }
}

fn ns_enp(eta: f64, kind: EnpKind) -> StageCircuit {
    let [a1, b1, a2, b2, a3, a4, b3, b4] = ["a1", "b1", "a2", "b2", "a3", "a4", "b3", "b4"].map(PolarizationPair::new);
    let mut steps = loss(&[pair(&a1), pair(&b1), pair(&a2), pair(&b2)].concat(), eta);
    if kind == EnpKind::Phase {
        for q in [&a1, &b1, &a2, &b2] {
            steps.push(rotate(q));
        }
    }
    steps.push(CircuitStep::Pbs {
        in_a: a1,
        in_b: a2,
        out_1: a3.clone(),
        out_2: a4.clone(),
    });
    steps.push(CircuitStep::Pbs {
        in_a: b1,
        in_b: b2,
        out_1: b3.clone(),
        out_2: b4.clone(),
    });
    steps.push(rotate(&a4));
    steps.push(rotate(&b4));
    steps.push(CircuitStep::Measure {
        modes: [pair(&a4), pair(&b4)].concat(),
    });
    let after = if kind == EnpKind::Phase { vec![rotate(&a3), rotate(&b3)] } else { Vec::new() };
    StageCircuit {
        steps,
        accept: Some(Accept::OnePerOutput(a4, b4)),
        correction: Some((pair(&a3), pauli_z())),
        after,
        keep: Vec::new(),
    }
}

fn dlcz_enc(eta: f64) -> StageCircuit {
    let (xl, yl, xr) = (ModeLabel::from("xL"), ModeLabel::from("yL"), ModeLabel::from("xR"));
    let mut steps = loss(&[yl.clone(), xr.clone()], eta);
    steps.push(CircuitStep::Unitary {
        modes: vec![yl.clone(), xr.clone()],
        u: beamsplitter(std::f64::consts::FRAC_PI_4),
    });
    steps.push(CircuitStep::Measure {
        modes: vec![yl.clone(), xr.clone()],
    });
    StageCircuit {
        steps,
        accept: Some(Accept::SingleClick(yl, xr)),
        correction: Some((vec![xl], sign_flip())),
        after: Vec::new(),
        keep: Vec::new(),
    }
}

fn labels(names: &[&str]) -> Vec<ModeLabel> {
    names.iter().map(|m| ModeLabel::from(*m)).collect()
}

fn pme(eta: f64) -> StageCircuit {
    StageCircuit {
        steps: loss(&labels(&["x1", "y1", "x2", "y2"]), eta),
        accept: None,
        correction: None,
        after: Vec::new(),
        keep: vec![(labels(&["x1", "x2"]), 1), (labels(&["y1", "y2"]), 1)],
    }
}

fn readout(eta: f64) -> StageCircuit {
    StageCircuit {
        steps: loss(&labels(&["a.H", "a.V", "b.H", "b.V"]), eta),
        accept: None,
        correction: None,
        after: Vec::new(),
        keep: vec![(labels(&["a.H", "a.V"]), 1), (labels(&["b.H", "b.V"]), 1)],
    }
}
