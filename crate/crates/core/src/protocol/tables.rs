//! Bilinear coefficient tables built from the Fock oracle.
//!
//! A pair state is a vector over [`Component`]s: one entry per non-logical
//! pattern and one per Bell label of the logical pattern. Each component has
//! a fixed representative density operator; a two-input stage is then the
//! tensor `out_k = Σ_ij a_i b_j T[i][j][k]`.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fock::{FockDensityOperator, FockKet, Ket};
use crate::pattern::{BellLabel, ExcitationPattern, LogicalBlock, ModeMap, PatternState, Projection, SchemeKind};

use super::circuits::{input_maps, output_map, stage_circuit};
use super::Stage;

/// Photon-number ceiling for table circuits; two double-excitation inputs
/// carry six photons and every step conserves or lowers the count.
pub const DEFAULT_CUTOFF: usize = 6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum Component {
    Pattern(ExcitationPattern),
    Logical(BellLabel),
}

impl Component {
    pub fn name(self) -> String {
        match self {
            Component::Pattern(p) => p.name().to_string(),
            Component::Logical(l) => format!("L[{}]", l.symbol()),
        }
    }
}

pub fn components(scheme: SchemeKind) -> &'static [Component] {
    use BellLabel::*;
    use Component::*;
    use ExcitationPattern::*;
    match scheme {
        SchemeKind::Dlcz => &[Pattern(P00), Logical(PhiPlus), Logical(PhiMinus), Pattern(P11), Pattern(P20)],
        SchemeKind::NewScheme => &[
            Pattern(P00),
            Pattern(P10),
            Logical(PhiPlus),
            Logical(PhiMinus),
            Logical(PsiPlus),
            Logical(PsiMinus),
            Pattern(P20Par),
            Pattern(P20Perp),
            Pattern(P21Par),
            Pattern(P21Perp),
        ],
    }
}

fn ket(terms: &[(&[u8], f64)]) -> Ket {
    terms.iter().map(|(o, a)| (o.to_vec(), Complex64::new(*a, 0.0))).collect()
}

fn uniform(states: &[&[u8]]) -> Vec<(f64, Ket)> {
    let w = 1.0 / states.len() as f64;
    states.iter().map(|s| (w, ket(&[(s, 1.0)]))).collect()
}

/// Pure-state decomposition of a component's representative, with
/// occupations in [`ModeMap::modes`] order.
pub fn representative(scheme: SchemeKind, c: Component) -> Result<Vec<(f64, Ket)>> {
    use ExcitationPattern::*;
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let rep = match (scheme, c) {
        (SchemeKind::Dlcz, Component::Pattern(P00)) => uniform(&[&[0, 0]]),
        (SchemeKind::Dlcz, Component::Logical(l @ (BellLabel::PhiPlus | BellLabel::PhiMinus))) => {
            let sign = if l == BellLabel::PhiPlus { 1.0 } else { -1.0 };
            vec![(1.0, ket(&[(&[1, 0], s), (&[0, 1], sign * s)]))]
        }
        (SchemeKind::Dlcz, Component::Pattern(P11)) => uniform(&[&[1, 1]]),
        (SchemeKind::Dlcz, Component::Pattern(P20)) => uniform(&[&[2, 0], &[0, 2]]),
        (SchemeKind::NewScheme, Component::Pattern(P00)) => uniform(&[&[0, 0, 0, 0]]),
        (SchemeKind::NewScheme, Component::Pattern(P10)) => {
            uniform(&[&[1, 0, 0, 0], &[0, 1, 0, 0], &[0, 0, 1, 0], &[0, 0, 0, 1]])
        }
        (SchemeKind::NewScheme, Component::Logical(l)) => {
            let a = l.amplitudes();
            let basis: [&[u8]; 4] = [&[1, 0, 1, 0], &[1, 0, 0, 1], &[0, 1, 1, 0], &[0, 1, 0, 1]];
            let terms: Vec<(&[u8], f64)> = basis.iter().zip(a).filter(|(_, x)| *x != 0.0).map(|(b, x)| (*b, x)).collect();
            vec![(1.0, ket(&terms))]
        }
        (SchemeKind::NewScheme, Component::Pattern(P20Par)) => {
            uniform(&[&[2, 0, 0, 0], &[0, 2, 0, 0], &[0, 0, 2, 0], &[0, 0, 0, 2]])
        }
        (SchemeKind::NewScheme, Component::Pattern(P20Perp)) => uniform(&[&[1, 1, 0, 0], &[0, 0, 1, 1]]),
        (SchemeKind::NewScheme, Component::Pattern(P21Par)) => uniform(&[
            &[2, 0, 1, 0],
            &[2, 0, 0, 1],
            &[0, 2, 1, 0],
            &[0, 2, 0, 1],
            &[1, 0, 2, 0],
            &[0, 1, 2, 0],
            &[1, 0, 0, 2],
            &[0, 1, 0, 2],
        ]),
        (SchemeKind::NewScheme, Component::Pattern(P21Perp)) => {
            uniform(&[&[1, 1, 1, 0], &[1, 1, 0, 1], &[1, 0, 1, 1], &[0, 1, 1, 1]])
        }
        _ => {
            return Err(Error::SchemeMismatch(format!(
                "component {} does not exist for {scheme}",
                c.name()
            )))
        }
    };
    Ok(rep)
}

/// Density operator of a component representative over `map`.
pub fn representative_state(map: &ModeMap, c: Component, cutoff: usize) -> Result<FockDensityOperator> {
    FockDensityOperator::from_mixture(map.modes(), cutoff, &representative(map.scheme(), c)?)
}

/// Component weights of a pattern state.
pub fn state_to_vector(state: &PatternState) -> Vec<f64> {
    let logical = state.scheme.logical_pattern();
    components(state.scheme)
        .iter()
        .map(|c| match c {
            Component::Pattern(p) => state.prob(*p),
            Component::Logical(l) => state.prob(logical) * state.logical.weight(*l),
        })
        .collect()
}

/// Inverse of [`state_to_vector`]; the result is unnormalized.
pub fn vector_to_state(scheme: SchemeKind, v: &[f64]) -> PatternState {
    let mut probs = std::collections::BTreeMap::new();
    let mut weights = [0.0; 4];
    for (c, &x) in components(scheme).iter().zip(v) {
        match c {
            Component::Pattern(p) => {
                if x != 0.0 {
                    probs.insert(*p, x);
                }
            }
            Component::Logical(l) => weights[l.index()] += x,
        }
    }
    let p_logic: f64 = weights.iter().sum();
    if p_logic != 0.0 {
        probs.insert(scheme.logical_pattern(), p_logic);
    }
    PatternState {
        scheme,
        probs,
        logical: LogicalBlock { weights }.normalized(scheme),
        normalized: false,
    }
}

fn projection_to_vector(proj: &Projection) -> Vec<f64> {
    state_to_vector(&proj.state)
}

/// Output components of `stage` applied to representative inputs.
pub fn oracle_cell(
    scheme: SchemeKind,
    stage: Stage,
    inputs: &[Component],
    eta: f64,
    cutoff: usize,
) -> Result<(Vec<f64>, f64)> {
    let maps = input_maps(scheme, stage);
    if maps.len() != inputs.len() {
        return Err(Error::InvalidArgument(format!(
            "stage {stage:?} takes {} inputs",
            maps.len()
        )));
    }
    let reps: Vec<Vec<(f64, Ket)>> = inputs
        .iter()
        .map(|c| representative(scheme, *c))
        .collect::<Result<_>>()?;
    let out_map = output_map(scheme, stage);
    let n_out = components(out_map.scheme()).len();
    let mut acc = vec![0.0; n_out];
    let mut residue = 0.0f64;

    let circuit = stage_circuit(scheme, stage, eta)?;
    let mut run = |weight: f64, kets: &[&Ket]| -> Result<()> {
        let mut joint: Option<FockKet> = None;
        for (m, k) in maps.iter().zip(kets) {
            let part = FockKet::new(m.modes(), k)?;
            joint = Some(match joint {
                None => part,
                Some(j) => j.tensor(&part)?,
            });
        }
        let joint = joint.expect("stages take at least one input");
        let outputs = circuit.run_pure(&joint)?;
        let modes = match outputs.first() {
            Some(k) => k.modes().to_vec(),
            None => return Ok(()),
        };
        let ens: Vec<(f64, Ket)> = outputs.iter().flat_map(|k| k.branches()).map(|b| (1.0, b)).collect();
        let out = FockDensityOperator::from_mixture(modes, cutoff, &ens)?;
        let proj = PatternState::project_from_fock(&out, &out_map)?;
        residue = residue.max(proj.bell_residue);
        for (a, x) in acc.iter_mut().zip(projection_to_vector(&proj)) {
            *a += weight * x;
        }
        Ok(())
    };
    match reps.as_slice() {
        [r] => {
            for (w, k) in r {
                run(*w, &[k])?;
            }
        }
        [r1, r2] => {
            for (w1, k1) in r1 {
                for (w2, k2) in r2 {
                    run(w1 * w2, &[k1, k2])?;
                }
            }
        }
        _ => unreachable!("stages take one or two inputs"),
    }
    Ok((acc, residue))
}

#[derive(Clone, Debug, Serialize)]
pub struct CoefficientTable {
    pub scheme: SchemeKind,
    pub out_scheme: SchemeKind,
    pub stage: Stage,
    pub eta: f64,
    pub cutoff: usize,
    pub arity: usize,
    pub inputs: Vec<Component>,
    pub outputs: Vec<Component>,
    data: Vec<f64>,
    /// Largest discarded Bell-basis coherence over all cells.
    pub max_bell_residue: f64,
}

impl CoefficientTable {
    pub fn compute(scheme: SchemeKind, stage: Stage, eta: f64, cutoff: usize) -> Result<Self> {
        crate::noise::check_prob("eta", eta)?;
        let arity = input_maps(scheme, stage).len();
        if arity == 0 {
            return Err(Error::SchemeMismatch(format!("stage {stage:?} is not defined for {scheme}")));
        }
        let inputs = components(scheme).to_vec();
        let out_scheme = output_map(scheme, stage).scheme();
        let outputs = components(out_scheme).to_vec();
        let n = inputs.len();
        let cells: Vec<Vec<Component>> = if arity == 1 {
            inputs.iter().map(|c| vec![*c]).collect()
        } else {
            (0..n * n).map(|ij| vec![inputs[ij / n], inputs[ij % n]]).collect()
        };
        let results: Vec<(Vec<f64>, f64)> = cells
            .par_iter()
            .map(|cell| oracle_cell(scheme, stage, cell, eta, cutoff))
            .collect::<Result<_>>()?;
        let mut data = Vec::with_capacity(results.len() * outputs.len());
        let mut max_bell_residue = 0.0f64;
        for (v, r) in results {
            data.extend(v);
            max_bell_residue = max_bell_residue.max(r);
        }
        Ok(CoefficientTable {
            scheme,
            out_scheme,
            stage,
            eta,
            cutoff,
            arity,
            inputs,
            outputs,
            data,
            max_bell_residue,
        })
    }

    fn offset(&self, cell: &[usize]) -> usize {
        let n = self.inputs.len();
        let m = self.outputs.len();
        match cell {
            [i] => i * m,
            [i, j] => (i * n + j) * m,
            _ => panic!("cell arity mismatch"),
        }
    }

    /// Output components for one input cell.
    pub fn cell(&self, cell: &[usize]) -> &[f64] {
        let o = self.offset(cell);
        &self.data[o..o + self.outputs.len()]
    }

    /// `½(T[i][j] + T[j][i])`.
    pub fn symmetric_cell(&self, i: usize, j: usize) -> Vec<f64> {
        self.cell(&[i, j])
            .iter()
            .zip(self.cell(&[j, i]))
            .map(|(a, b)| 0.5 * (a + b))
            .collect()
    }

    pub fn index_of(&self, c: Component) -> Option<usize> {
        self.inputs.iter().position(|x| *x == c)
    }

    pub fn output_index_of(&self, c: Component) -> Option<usize> {
        self.outputs.iter().position(|x| *x == c)
    }

    pub fn apply1(&self, a: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.outputs.len()];
        for (i, &ai) in a.iter().enumerate() {
            if ai == 0.0 {
                continue;
            }
            for (o, &t) in out.iter_mut().zip(self.cell(&[i])) {
                *o += ai * t;
            }
        }
        out
    }

    pub fn apply2(&self, a: &[f64], b: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.outputs.len()];
        for (i, &ai) in a.iter().enumerate() {
            if ai == 0.0 {
                continue;
            }
            for (j, &bj) in b.iter().enumerate() {
                let w = ai * bj;
                if w == 0.0 {
                    continue;
                }
                for (o, &t) in out.iter_mut().zip(self.cell(&[i, j])) {
                    *o += w * t;
                }
            }
        }
        out
    }

    /// Adds `delta` to one coefficient; used to check that verification
    /// notices a corrupted table.
    pub fn perturb(&mut self, cell: &[usize], output: usize, delta: f64) {
        let o = self.offset(cell) + output;
        self.data[o] += delta;
    }

    /// One line per nonzero coefficient: `inputs -> output: value`.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "# scheme={} stage={:?} eta={} cutoff={}",
            self.scheme, self.stage, self.eta, self.cutoff
        );
        let n = self.inputs.len();
        let cells: Vec<Vec<usize>> = if self.arity == 1 {
            (0..n).map(|i| vec![i]).collect()
        } else {
            (0..n * n).map(|ij| vec![ij / n, ij % n]).collect()
        };
        for cell in cells {
            let names: Vec<String> = cell.iter().map(|&i| self.inputs[i].name()).collect();
            for (k, v) in self.cell(&cell).iter().enumerate() {
                if v.abs() > 1e-15 {
                    let _ = writeln!(s, "{} -> {}: {:.15e}", names.join(" x "), self.outputs[k].name(), v);
                }
            }
        }
        s
    }
}

type Key = (SchemeKind, Stage, u64, usize);

fn cache() -> &'static Mutex<HashMap<Key, Arc<CoefficientTable>>> {
    static CACHE: OnceLock<Mutex<HashMap<Key, Arc<CoefficientTable>>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// Memoized table at the default cutoff.
pub fn table(scheme: SchemeKind, stage: Stage, eta: f64) -> Result<Arc<CoefficientTable>> {
    table_with_cutoff(scheme, stage, eta, DEFAULT_CUTOFF)
}

pub fn table_with_cutoff(scheme: SchemeKind, stage: Stage, eta: f64, cutoff: usize) -> Result<Arc<CoefficientTable>> {
    let stage = match (scheme, stage) {
        (SchemeKind::Dlcz, Stage::EncHigher) => Stage::EncFirst,
        _ => stage,
    };
    let key = (scheme, stage, eta.to_bits(), cutoff);
    if let Some(t) = cache().lock().expect("table cache poisoned").get(&key) {
        return Ok(Arc::clone(t));
    }
    // Built outside the lock so concurrent callers for other keys proceed.
    let t = Arc::new(CoefficientTable::compute(scheme, stage, eta, cutoff)?);
    let mut guard = cache().lock().expect("table cache poisoned");
    Ok(Arc::clone(guard.entry(key).or_insert(t)))
}
