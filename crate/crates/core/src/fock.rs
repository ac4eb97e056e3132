//! Exact few-mode bosonic simulator: linear optics, loss and photon counting
//! on density operators over a truncated Fock basis.
//!
//! States are stored densely over the set of occupation vectors actually
//! reachable from the input, which keeps the oracle circuits (at most eight
//! modes, a handful of photons) small. All operations are photon-number
//! conserving except loss, so the cutoff only bounds the input.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const UNITARY_TOL: f64 = 1e-12;
const ZERO_AMP: f64 = 1e-15;

/// Opaque identifier of one bosonic mode, e.g. `aL.H` or `bC.V`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ModeLabel(String);

impl ModeLabel {
    pub fn new(name: impl Into<String>) -> Self {
        ModeLabel(name.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for ModeLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for ModeLabel {
    fn from(s: &str) -> Self {
        ModeLabel(s.to_owned())
    }
}

/// Horizontal/vertical mode pair of one polarization qubit (or one memory
/// node with an H-cell and a V-cell).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PolarizationPair {
    pub h: ModeLabel,
    pub v: ModeLabel,
}

impl PolarizationPair {
    pub fn new(prefix: &str) -> Self {
        PolarizationPair {
            h: ModeLabel::new(format!("{prefix}.H")),
            v: ModeLabel::new(format!("{prefix}.V")),
        }
    }
}

/// Photon numbers per mode, aligned with the register of the owning state.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FockBasisVector {
    pub occupations: Vec<u8>,
}

impl FockBasisVector {
    pub fn total(&self) -> usize {
        self.occupations.iter().map(|&n| n as usize).sum()
    }
}

/// Observed photon count per measured mode.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct DetectionPattern {
    pub counts: BTreeMap<ModeLabel, u32>,
}

impl DetectionPattern {
    pub fn new<I, L>(counts: I) -> Self
    where
        I: IntoIterator<Item = (L, u32)>,
        L: Into<ModeLabel>,
    {
        DetectionPattern {
            counts: counts.into_iter().map(|(l, n)| (l.into(), n)).collect(),
        }
    }

    pub fn count(&self, mode: &ModeLabel) -> u32 {
        self.counts.get(mode).copied().unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }
}

impl fmt::Display for DetectionPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.counts.iter().map(|(m, n)| format!("{m}={n}")).collect();
        write!(f, "{{{}}}", parts.join(","))
    }
}

/// Sparse ket used to build inputs: occupation vector -> amplitude.
pub type Ket = Vec<(Vec<u8>, Complex64)>;

/// Possibly sub-normalized density operator over a set of labeled modes.
#[derive(Clone, Debug)]
pub struct FockDensityOperator {
    modes: Vec<ModeLabel>,
    cutoff: usize,
    basis: Vec<FockBasisVector>,
    matrix: DMatrix<Complex64>,
}

/// Accumulates `|i><j|` entries over a growing basis.
struct Accumulator {
    index: HashMap<Vec<u8>, usize>,
    basis: Vec<Vec<u8>>,
    entries: HashMap<(usize, usize), Complex64>,
}

impl Accumulator {
    fn new() -> Self {
        Accumulator {
            index: HashMap::new(),
            basis: Vec::new(),
            entries: HashMap::new(),
        }
    }

    fn idx(&mut self, occ: &[u8]) -> usize {
        if let Some(&i) = self.index.get(occ) {
            return i;
        }
        let i = self.basis.len();
        self.basis.push(occ.to_vec());
        self.index.insert(occ.to_vec(), i);
        i
    }

    fn add(&mut self, bra_ket: (&[u8], &[u8]), value: Complex64) {
        if value.norm() == 0.0 {
            return;
        }
        let i = self.idx(bra_ket.0);
        let j = self.idx(bra_ket.1);
        *self.entries.entry((i, j)).or_insert(Complex64::new(0.0, 0.0)) += value;
    }

    fn finish(self, modes: Vec<ModeLabel>, cutoff: usize) -> FockDensityOperator {
        // Sorted basis keeps outputs deterministic regardless of hash order.
        let mut order: Vec<usize> = (0..self.basis.len()).collect();
        order.sort_by(|&a, &b| self.basis[a].cmp(&self.basis[b]));
        let mut rank = vec![0; order.len()];
        for (r, &o) in order.iter().enumerate() {
            rank[o] = r;
        }
        let n = order.len();
        let mut matrix = DMatrix::from_element(n, n, Complex64::new(0.0, 0.0));
        for ((i, j), v) in self.entries {
            matrix[(rank[i], rank[j])] += v;
        }
        let basis = order
            .iter()
            .map(|&o| FockBasisVector {
                occupations: self.basis[o].clone(),
            })
            .collect();
        FockDensityOperator {
            modes,
            cutoff,
            basis,
            matrix,
        }
    }
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

fn binomial(n: usize, k: usize) -> f64 {
    factorial(n) / (factorial(k) * factorial(n - k))
}

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

/// 45° polarization rotation: H† -> (H† + V†)/√2, V† -> (H† − V†)/√2.
pub fn rotation_45() -> DMatrix<Complex64> {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    DMatrix::from_row_slice(2, 2, &[c(s), c(s), c(s), c(-s)])
}

/// Real beamsplitter rotation `[[cos θ, −sin θ], [sin θ, cos θ]]` acting on
/// creation operators (column k is the image of mode k).
pub fn beamsplitter(theta: f64) -> DMatrix<Complex64> {
    let (s, co) = theta.sin_cos();
    DMatrix::from_row_slice(2, 2, &[c(co), c(-s), c(s), c(co)])
}

pub fn pauli_x() -> DMatrix<Complex64> {
    DMatrix::from_row_slice(2, 2, &[c(0.0), c(1.0), c(1.0), c(0.0)])
}

pub fn pauli_z() -> DMatrix<Complex64> {
    DMatrix::from_row_slice(2, 2, &[c(1.0), c(0.0), c(0.0), c(-1.0)])
}

impl FockDensityOperator {
    /// Vacuum over the given modes.
    pub fn vacuum(modes: Vec<ModeLabel>, cutoff: usize) -> Result<Self> {
        let n = modes.len();
        Self::from_pure(modes, cutoff, &[(vec![0; n], c(1.0))])
    }

    /// `|ψ><ψ|` for an explicitly listed (not necessarily normalized) ket.
    pub fn from_pure(modes: Vec<ModeLabel>, cutoff: usize, ket: &[(Vec<u8>, Complex64)]) -> Result<Self> {
        Self::from_mixture(modes, cutoff, &[(1.0, ket.to_vec())])
    }

    /// `Σ_k w_k |ψ_k><ψ_k|`.
    pub fn from_mixture(modes: Vec<ModeLabel>, cutoff: usize, ensemble: &[(f64, Ket)]) -> Result<Self> {
        check_distinct(&modes)?;
        let mut acc = Accumulator::new();
        for (w, ket) in ensemble {
            if *w < 0.0 {
                return Err(Error::InvalidArgument(format!("negative mixture weight {w}")));
            }
            for (occ, _) in ket {
                if occ.len() != modes.len() {
                    return Err(Error::InvalidArgument(format!(
                        "occupation vector of length {} for {} modes",
                        occ.len(),
                        modes.len()
                    )));
                }
                let total: usize = occ.iter().map(|&n| n as usize).sum();
                if total > cutoff {
                    return Err(Error::CutoffExceeded { total, cutoff });
                }
            }
            for (oi, ai) in ket {
                for (oj, aj) in ket {
                    acc.add((oi, oj), ai * aj.conj() * *w);
                }
            }
        }
        Ok(acc.finish(modes, cutoff))
    }

    pub fn modes(&self) -> &[ModeLabel] {
        &self.modes
    }

    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    pub fn basis(&self) -> &[FockBasisVector] {
        &self.basis
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.matrix
    }

    pub fn trace(&self) -> f64 {
        (0..self.basis.len()).map(|i| self.matrix[(i, i)].re).sum()
    }

    pub fn mode_index(&self, mode: &ModeLabel) -> Result<usize> {
        self.modes
            .iter()
            .position(|m| m == mode)
            .ok_or_else(|| Error::UnknownMode(mode.to_string()))
    }

    /// Matrix element `<bra|ρ|ket>` for occupation vectors in register order.
    pub fn element(&self, bra: &[u8], ket: &[u8]) -> Complex64 {
        let i = self.basis.iter().position(|b| b.occupations == bra);
        let j = self.basis.iter().position(|b| b.occupations == ket);
        match (i, j) {
            (Some(i), Some(j)) => self.matrix[(i, j)],
            _ => c(0.0),
        }
    }

    /// Probability of a basis state.
    pub fn population(&self, occ: &[u8]) -> f64 {
        self.element(occ, occ).re
    }

    /// Largest deviation from Hermiticity.
    pub fn hermiticity_error(&self) -> f64 {
        let n = self.basis.len();
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                worst = worst.max((self.matrix[(i, j)] - self.matrix[(j, i)].conj()).norm());
            }
        }
        worst
    }

    pub fn min_eigenvalue(&self) -> f64 {
        if self.basis.is_empty() {
            return 0.0;
        }
        let herm = (&self.matrix + self.matrix.adjoint()) * c(0.5);
        herm.symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// `Tr(ρ N)` for the total photon number.
    pub fn mean_photon_number(&self) -> f64 {
        self.basis
            .iter()
            .enumerate()
            .map(|(i, b)| self.matrix[(i, i)].re * b.total() as f64)
            .sum()
    }

    /// Returns the operator scaled so that its trace is one.
    pub fn normalized(&self) -> Result<Self> {
        let t = self.trace();
        if t <= 0.0 {
            return Err(Error::ZeroTrace);
        }
        let mut out = self.clone();
        out.matrix /= c(t);
        Ok(out)
    }

    pub fn scaled(&self, factor: f64) -> Self {
        let mut out = self.clone();
        out.matrix *= c(factor);
        out
    }

    /// Sum of two operators over the same register.
    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.modes != other.modes {
            return Err(Error::InvalidArgument("register mismatch in sum".into()));
        }
        let mut acc = Accumulator::new();
        for s in [self, other] {
            s.for_each_entry(|bi, bj, v| acc.add((bi, bj), v));
        }
        Ok(acc.finish(self.modes.clone(), self.cutoff.max(other.cutoff)))
    }

    /// Product state over the union of two disjoint registers.
    pub fn tensor(&self, other: &Self) -> Result<Self> {
        let mut modes = self.modes.clone();
        modes.extend(other.modes.iter().cloned());
        check_distinct(&modes)?;
        let mut acc = Accumulator::new();
        let mut bra = Vec::with_capacity(modes.len());
        let mut ket = Vec::with_capacity(modes.len());
        self.for_each_entry(|ai, aj, va| {
            other.for_each_entry(|bi, bj, vb| {
                bra.clear();
                bra.extend_from_slice(ai);
                bra.extend_from_slice(bi);
                ket.clear();
                ket.extend_from_slice(aj);
                ket.extend_from_slice(bj);
                acc.add((&bra, &ket), va * vb);
            })
        });
        Ok(acc.finish(modes, self.cutoff + other.cutoff))
    }

    fn for_each_entry(&self, mut f: impl FnMut(&[u8], &[u8], Complex64)) {
        let n = self.basis.len();
        for i in 0..n {
            for j in 0..n {
                let v = self.matrix[(i, j)];
                if v.norm() > 0.0 {
                    f(&self.basis[i].occupations, &self.basis[j].occupations, v);
                }
            }
        }
    }

    /// `Σ_k K_k ρ K_k†` where `kraus(occ)` lists, per Kraus index, the sparse
    /// image of basis ket `occ`.
    fn map_kraus(&self, kraus: impl Fn(&[u8]) -> Vec<Ket>) -> Self {
        let images: Vec<Vec<Ket>> = self.basis.iter().map(|b| kraus(&b.occupations)).collect();
        let mut acc = Accumulator::new();
        let n = self.basis.len();
        for i in 0..n {
            for j in 0..n {
                let v = self.matrix[(i, j)];
                if v.norm() == 0.0 {
                    continue;
                }
                for (ki, kj) in images[i].iter().zip(images[j].iter()) {
                    for (oi, ai) in ki {
                        for (oj, aj) in kj {
                            acc.add((oi, oj), ai * v * aj.conj());
                        }
                    }
                }
            }
        }
        acc.finish(self.modes.clone(), self.cutoff)
    }

    /// Linear-optical unitary on the listed modes; creation operators map as
    /// `S_k† -> Σ_j u_jk S_j†`.
    pub fn apply_mode_unitary(&self, modes: &[ModeLabel], u: &DMatrix<Complex64>) -> Result<Self> {
        let k = modes.len();
        if u.nrows() != k || u.ncols() != k {
            return Err(Error::InvalidArgument(format!(
                "{}x{} matrix for {} modes",
                u.nrows(),
                u.ncols(),
                k
            )));
        }
        let dev = (u.adjoint() * u - DMatrix::<Complex64>::identity(k, k))
            .iter()
            .fold(0.0f64, |m, z| m.max(z.norm()));
        if dev > UNITARY_TOL {
            return Err(Error::NotUnitary(dev));
        }
        check_distinct(modes)?;
        let idx: Vec<usize> = modes.iter().map(|m| self.mode_index(m)).collect::<Result<_>>()?;

        let mut cache: HashMap<Vec<u8>, Vec<(Vec<u8>, Complex64)>> = HashMap::new();
        let mut expand = |local: &[u8]| -> Vec<(Vec<u8>, Complex64)> {
            cache
                .entry(local.to_vec())
                .or_insert_with(|| expand_creation_product(local, u))
                .clone()
        };
        let mut images: HashMap<Vec<u8>, Ket> = HashMap::new();
        for b in &self.basis {
            let local: Vec<u8> = idx.iter().map(|&t| b.occupations[t]).collect();
            let terms = expand(&local);
            let ket = terms
                .into_iter()
                .map(|(lo, amp)| {
                    let mut occ = b.occupations.clone();
                    for (&t, &n) in idx.iter().zip(lo.iter()) {
                        occ[t] = n;
                    }
                    (occ, amp)
                })
                .collect();
            images.insert(b.occupations.clone(), ket);
        }
        Ok(self.map_kraus(|occ| vec![images[occ].clone()]))
    }

    /// Transmission `eta` into a fresh environment mode that is then traced
    /// out, written in its Kraus form `K_l |n> = sqrt(C(n,l) η^(n−l) (1−η)^l) |n−l>`.
    pub fn apply_loss(&self, mode: &ModeLabel, eta: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&eta) || eta.is_nan() {
            return Err(Error::ProbabilityOutOfRange { name: "eta", value: eta });
        }
        let t = self.mode_index(mode)?;
        if eta == 1.0 {
            return Ok(self.clone());
        }
        let max_n = self.basis.iter().map(|b| b.occupations[t] as usize).max().unwrap_or(0);
        Ok(self.map_kraus(|occ| {
            let n = occ[t] as usize;
            (0..=max_n)
                .map(|lost| {
                    if lost > n {
                        return Vec::new();
                    }
                    let amp = (binomial(n, lost) * eta.powi((n - lost) as i32) * (1.0 - eta).powi(lost as i32)).sqrt();
                    if amp < ZERO_AMP {
                        return Vec::new();
                    }
                    let mut o = occ.to_vec();
                    o[t] = (n - lost) as u8;
                    vec![(o, c(amp))]
                })
                .collect()
        }))
    }

    /// Polarizing beamsplitter: H photons are transmitted and V photons
    /// reflected, so `in_a.H -> out_1.H`, `in_b.V -> out_1.V`,
    /// `in_b.H -> out_2.H`, `in_a.V -> out_2.V`. Output modes replace the
    /// input modes in the register.
    pub fn apply_pbs(
        &self,
        in_a: &PolarizationPair,
        in_b: &PolarizationPair,
        out_1: &PolarizationPair,
        out_2: &PolarizationPair,
    ) -> Result<Self> {
        let inputs = [&in_a.h, &in_a.v, &in_b.h, &in_b.v];
        let outputs = [&out_1.h, &out_2.v, &out_2.h, &out_1.v];
        let all: Vec<ModeLabel> = inputs.iter().chain(outputs.iter()).map(|m| (*m).clone()).collect();
        check_distinct(&all[..4])?;
        check_distinct(&all[4..])?;
        for o in outputs {
            if !inputs.contains(&o) && self.modes.contains(o) {
                return Err(Error::DuplicateMode(o.to_string()));
            }
        }
        let mut renamed = self.modes.clone();
        for (i, o) in inputs.iter().zip(outputs.iter()) {
            let t = self.mode_index(i)?;
            renamed[t] = (*o).clone();
        }
        let mut out = self.clone();
        out.modes = renamed;
        Ok(out)
    }

    /// Projects onto the basis states accepted by `keep` (an orthogonal
    /// projector diagonal in the Fock basis); the result is sub-normalized.
    pub fn project(&self, keep: impl Fn(&[u8]) -> bool) -> Self {
        let mut acc = Accumulator::new();
        self.for_each_entry(|bi, bj, v| {
            if keep(bi) && keep(bj) {
                acc.add((bi, bj), v);
            }
        });
        acc.finish(self.modes.clone(), self.cutoff)
    }

    /// Photon-counting projection on `measured` modes followed by tracing
    /// them out. Returns the unnormalized conditional state and its trace.
    pub fn measure_and_postselect(
        &self,
        measured: &[ModeLabel],
        pattern: &DetectionPattern,
    ) -> Result<(Self, f64)> {
        for m in pattern.counts.keys() {
            if !measured.contains(m) {
                return Err(Error::UnmeasuredMode(m.to_string()));
            }
        }
        check_distinct(measured)?;
        let idx: Vec<usize> = measured.iter().map(|m| self.mode_index(m)).collect::<Result<_>>()?;
        let want: Vec<u8> = measured.iter().map(|m| pattern.count(m) as u8).collect();
        let keep_modes: Vec<usize> = (0..self.modes.len()).filter(|t| !idx.contains(t)).collect();
        let mut acc = Accumulator::new();
        self.for_each_entry(|bi, bj, v| {
            let hit = idx.iter().zip(want.iter()).all(|(&t, &w)| bi[t] == w && bj[t] == w);
            if hit {
                let ri: Vec<u8> = keep_modes.iter().map(|&t| bi[t]).collect();
                let rj: Vec<u8> = keep_modes.iter().map(|&t| bj[t]).collect();
                acc.add((&ri, &rj), v);
            }
        });
        let modes = keep_modes.iter().map(|&t| self.modes[t].clone()).collect();
        let out = acc.finish(modes, self.cutoff);
        let p = out.trace();
        Ok((out, p))
    }

    /// Every detection pattern with nonzero support on `measured`, with its
    /// conditional state; probabilities sum to the input trace.
    pub fn measure_all(&self, measured: &[ModeLabel]) -> Result<BTreeMap<DetectionPattern, (Self, f64)>> {
        let idx: Vec<usize> = measured.iter().map(|m| self.mode_index(m)).collect::<Result<_>>()?;
        let mut patterns: Vec<Vec<u8>> = self
            .basis
            .iter()
            .map(|b| idx.iter().map(|&t| b.occupations[t]).collect())
            .collect();
        patterns.sort();
        patterns.dedup();
        let mut out = BTreeMap::new();
        for p in patterns {
            let pattern = DetectionPattern::new(measured.iter().cloned().zip(p.iter().map(|&n| n as u32)));
            let (state, prob) = self.measure_and_postselect(measured, &pattern)?;
            out.insert(pattern, (state, prob));
        }
        Ok(out)
    }

    /// Partial trace over `modes`.
    pub fn trace_out(&self, modes: &[ModeLabel]) -> Result<Self> {
        let idx: Vec<usize> = modes.iter().map(|m| self.mode_index(m)).collect::<Result<_>>()?;
        let keep_modes: Vec<usize> = (0..self.modes.len()).filter(|t| !idx.contains(t)).collect();
        let mut acc = Accumulator::new();
        self.for_each_entry(|bi, bj, v| {
            if idx.iter().all(|&t| bi[t] == bj[t]) {
                let ri: Vec<u8> = keep_modes.iter().map(|&t| bi[t]).collect();
                let rj: Vec<u8> = keep_modes.iter().map(|&t| bj[t]).collect();
                acc.add((&ri, &rj), v);
            }
        });
        Ok(acc.finish(keep_modes.iter().map(|&t| self.modes[t].clone()).collect(), self.cutoff))
    }

    /// Reorders the register; `order` must be a permutation of the modes.
    pub fn reorder(&self, order: &[ModeLabel]) -> Result<Self> {
        if order.len() != self.modes.len() {
            return Err(Error::InvalidArgument("reorder must list every mode".into()));
        }
        check_distinct(order)?;
        let idx: Vec<usize> = order.iter().map(|m| self.mode_index(m)).collect::<Result<_>>()?;
        let mut acc = Accumulator::new();
        self.for_each_entry(|bi, bj, v| {
            let ri: Vec<u8> = idx.iter().map(|&t| bi[t]).collect();
            let rj: Vec<u8> = idx.iter().map(|&t| bj[t]).collect();
            acc.add((&ri, &rj), v);
        });
        Ok(acc.finish(order.to_vec(), self.cutoff))
    }

    /// Renames one mode in place.
    pub fn relabel(&self, from: &ModeLabel, to: ModeLabel) -> Result<Self> {
        let t = self.mode_index(from)?;
        if self.modes.contains(&to) && &to != from {
            return Err(Error::DuplicateMode(to.to_string()));
        }
        let mut out = self.clone();
        out.modes[t] = to;
        Ok(out)
    }

    /// Maximum absolute entrywise difference after aligning both bases.
    pub fn distance(&self, other: &Self) -> Result<f64> {
        if self.modes != other.modes {
            return Err(Error::InvalidArgument("register mismatch".into()));
        }
        let diff = self.add(&other.scaled(-1.0))?;
        Ok(diff.matrix.iter().fold(0.0f64, |m, z| m.max(z.norm())))
    }
}

/// Expands `Π_j (Σ_i u_ij a_i†)^{n_j} / sqrt(n_j!) |0>` into normalized
/// number states.
fn expand_creation_product(local: &[u8], u: &DMatrix<Complex64>) -> Vec<(Vec<u8>, Complex64)> {
    let k = local.len();
    let mut poly: HashMap<Vec<u8>, Complex64> = HashMap::new();
    poly.insert(vec![0; k], c(1.0));
    for (j, &n) in local.iter().enumerate() {
        for _ in 0..n {
            let mut next: HashMap<Vec<u8>, Complex64> = HashMap::new();
            for (mono, coef) in &poly {
                for i in 0..k {
                    let uij = u[(i, j)];
                    if uij.norm() < ZERO_AMP {
                        continue;
                    }
                    let mut m = mono.clone();
                    m[i] += 1;
                    *next.entry(m).or_insert(c(0.0)) += coef * uij;
                }
            }
            poly = next;
        }
    }
    let norm_in: f64 = local.iter().map(|&n| factorial(n as usize)).product::<f64>().sqrt();
    let mut out: Vec<(Vec<u8>, Complex64)> = poly
        .into_iter()
        .filter_map(|(m, coef)| {
            let amp = coef * m.iter().map(|&n| factorial(n as usize)).product::<f64>().sqrt() / norm_in;
            (amp.norm() > ZERO_AMP).then_some((m, amp))
        })
        .collect();
    out.sort_by(|a, b| a.0.cmp(&b.0));
    out
}

fn check_distinct(modes: &[ModeLabel]) -> Result<()> {
    for (i, m) in modes.iter().enumerate() {
        if modes[..i].contains(m) {
            return Err(Error::DuplicateMode(m.to_string()));
        }
    }
    Ok(())
}

/// One step of an oracle circuit.
#[derive(Clone, Debug)]
pub enum CircuitStep {
    Unitary { modes: Vec<ModeLabel>, u: DMatrix<Complex64> },
    Pbs {
        in_a: PolarizationPair,
        in_b: PolarizationPair,
        out_1: PolarizationPair,
        out_2: PolarizationPair,
    },
    Loss { mode: ModeLabel, eta: f64 },
    Measure { modes: Vec<ModeLabel> },
}

/// Runs the steps in order. A measurement may only appear as the final step;
/// without one the map holds the single empty pattern.
pub fn run_circuit(
    initial: &FockDensityOperator,
    steps: &[CircuitStep],
) -> Result<BTreeMap<DetectionPattern, (FockDensityOperator, f64)>> {
    let mut state = initial.clone();
    for (i, step) in steps.iter().enumerate() {
        match step {
            CircuitStep::Unitary { modes, u } => state = state.apply_mode_unitary(modes, u)?,
            CircuitStep::Pbs { in_a, in_b, out_1, out_2 } => state = state.apply_pbs(in_a, in_b, out_1, out_2)?,
            CircuitStep::Loss { mode, eta } => state = state.apply_loss(mode, *eta)?,
            CircuitStep::Measure { modes } => {
                if i + 1 != steps.len() {
                    return Err(Error::MalformedCircuit("measurement must be the last step".into()));
                }
                return state.measure_all(modes);
            }
        }
    }
    let t = state.trace();
    let mut out = BTreeMap::new();
    out.insert(DetectionPattern::default(), (state, t));
    Ok(out)
}

/// Pure state with loss purified into environment modes.
///
/// Occupation vectors list the register modes followed by one environment
/// mode per loss step; environment modes are never acted on again, so
/// tracing them out splits the state into orthogonal branches.
#[derive(Clone, Debug, PartialEq)]
pub struct FockKet {
    modes: Vec<ModeLabel>,
    env: usize,
    terms: BTreeMap<Vec<u8>, Complex64>,
}

impl FockKet {
    pub fn new(modes: Vec<ModeLabel>, ket: &[(Vec<u8>, Complex64)]) -> Result<Self> {
        check_distinct(&modes)?;
        let mut terms = BTreeMap::new();
        for (occ, a) in ket {
            if occ.len() != modes.len() {
                return Err(Error::InvalidArgument("occupation vector length mismatch".into()));
            }
            *terms.entry(occ.clone()).or_insert(c(0.0)) += *a;
        }
        Ok(FockKet { modes, env: 0, terms })
    }

    pub fn modes(&self) -> &[ModeLabel] {
        &self.modes
    }

    pub fn norm_sqr(&self) -> f64 {
        self.terms.values().map(|a| a.norm_sqr()).sum()
    }

    /// Concatenation of two environment-free kets.
    pub fn tensor(&self, other: &Self) -> Result<Self> {
        if self.env != 0 || other.env != 0 {
            return Err(Error::InvalidArgument("tensor of kets with environment".into()));
        }
        let mut modes = self.modes.clone();
        modes.extend(other.modes.iter().cloned());
        check_distinct(&modes)?;
        let mut terms = BTreeMap::new();
        for (o1, a1) in &self.terms {
            for (o2, a2) in &other.terms {
                let mut o = o1.clone();
                o.extend_from_slice(o2);
                terms.insert(o, a1 * a2);
            }
        }
        Ok(FockKet { modes, env: 0, terms })
    }

    fn idx(&self, mode: &ModeLabel) -> Result<usize> {
        self.modes
            .iter()
            .position(|m| m == mode)
            .ok_or_else(|| Error::UnknownMode(mode.to_string()))
    }

    fn transform(&self, idx: &[usize], u: &DMatrix<Complex64>, extra_env: usize) -> Self {
        let mut cache: HashMap<Vec<u8>, Vec<(Vec<u8>, Complex64)>> = HashMap::new();
        let mut terms: BTreeMap<Vec<u8>, Complex64> = BTreeMap::new();
        for (occ, a) in &self.terms {
            let mut base = occ.clone();
            base.extend(std::iter::repeat_n(0, extra_env));
            let local: Vec<u8> = idx.iter().map(|&t| base[t]).collect();
            let expansion = cache
                .entry(local.clone())
                .or_insert_with(|| expand_creation_product(&local, u));
            for (lo, amp) in expansion.iter() {
                let mut o = base.clone();
                for (&t, &n) in idx.iter().zip(lo.iter()) {
                    o[t] = n;
                }
                *terms.entry(o).or_insert(c(0.0)) += a * amp;
            }
        }
        terms.retain(|_, a| a.norm() > ZERO_AMP);
        FockKet {
            modes: self.modes.clone(),
            env: self.env + extra_env,
            terms,
        }
    }

    pub fn apply_mode_unitary(&self, modes: &[ModeLabel], u: &DMatrix<Complex64>) -> Result<Self> {
        let probe = FockDensityOperator::vacuum(self.modes.clone(), 0)?;
        probe.apply_mode_unitary(modes, u)?;
        let idx: Vec<usize> = modes.iter().map(|m| self.idx(m)).collect::<Result<_>>()?;
        Ok(self.transform(&idx, u, 0))
    }

    /// Beamsplitter of transmissivity `eta` into a fresh environment mode.
    pub fn apply_loss(&self, mode: &ModeLabel, eta: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&eta) || eta.is_nan() {
            return Err(Error::ProbabilityOutOfRange { name: "eta", value: eta });
        }
        let t = self.idx(mode)?;
        if eta == 1.0 {
            return Ok(self.clone());
        }
        let (st, sr) = (eta.sqrt(), (1.0 - eta).sqrt());
        let u = DMatrix::from_row_slice(2, 2, &[c(st), c(-sr), c(sr), c(st)]);
        let env_slot = self.modes.len() + self.env;
        Ok(self.transform(&[t, env_slot], &u, 1))
    }

    pub fn apply_pbs(
        &self,
        in_a: &PolarizationPair,
        in_b: &PolarizationPair,
        out_1: &PolarizationPair,
        out_2: &PolarizationPair,
    ) -> Result<Self> {
        let probe = FockDensityOperator::vacuum(self.modes.clone(), 0)?.apply_pbs(in_a, in_b, out_1, out_2)?;
        let mut out = self.clone();
        out.modes = probe.modes().to_vec();
        Ok(out)
    }

    /// Keeps the terms accepted by `keep`, which sees register occupations only.
    pub fn project(&self, keep: impl Fn(&[u8]) -> bool) -> Self {
        let n = self.modes.len();
        let mut out = self.clone();
        out.terms.retain(|o, _| keep(&o[..n]));
        out
    }

    /// Splits into branches by the counts on `measured`; measured modes are
    /// removed from each branch.
    pub fn measure(&self, measured: &[ModeLabel]) -> Result<BTreeMap<DetectionPattern, FockKet>> {
        check_distinct(measured)?;
        let idx: Vec<usize> = measured.iter().map(|m| self.idx(m)).collect::<Result<_>>()?;
        let keep: Vec<usize> = (0..self.modes.len() + self.env).filter(|t| !idx.contains(t)).collect();
        let modes: Vec<ModeLabel> = (0..self.modes.len())
            .filter(|t| !idx.contains(t))
            .map(|t| self.modes[t].clone())
            .collect();
        let mut out: BTreeMap<DetectionPattern, FockKet> = BTreeMap::new();
        for (occ, a) in &self.terms {
            let pattern = DetectionPattern::new(measured.iter().cloned().zip(idx.iter().map(|&t| occ[t] as u32)));
            let reduced: Vec<u8> = keep.iter().map(|&t| occ[t]).collect();
            out.entry(pattern)
                .or_insert_with(|| FockKet {
                    modes: modes.clone(),
                    env: self.env,
                    terms: BTreeMap::new(),
                })
                .terms
                .insert(reduced, *a);
        }
        Ok(out)
    }

    /// Environment-free pure branches whose mixture is the reduced state.
    pub fn branches(&self) -> Vec<Ket> {
        let n = self.modes.len();
        let mut by_env: BTreeMap<&[u8], Ket> = BTreeMap::new();
        for (occ, a) in &self.terms {
            by_env.entry(&occ[n..]).or_default().push((occ[..n].to_vec(), *a));
        }
        by_env.into_values().collect()
    }

    /// Reduced density operator over the register.
    pub fn to_density(&self, cutoff: usize) -> Result<FockDensityOperator> {
        let ens: Vec<(f64, Ket)> = self.branches().into_iter().map(|k| (1.0, k)).collect();
        FockDensityOperator::from_mixture(self.modes.clone(), cutoff, &ens)
    }
}

/// Pure-state counterpart of [`run_circuit`].
pub fn run_circuit_pure(initial: &FockKet, steps: &[CircuitStep]) -> Result<BTreeMap<DetectionPattern, FockKet>> {
    let mut state = initial.clone();
    for (i, step) in steps.iter().enumerate() {
        match step {
            CircuitStep::Unitary { modes, u } => state = state.apply_mode_unitary(modes, u)?,
            CircuitStep::Pbs { in_a, in_b, out_1, out_2 } => state = state.apply_pbs(in_a, in_b, out_1, out_2)?,
            CircuitStep::Loss { mode, eta } => state = state.apply_loss(mode, *eta)?,
            CircuitStep::Measure { modes } => {
                if i + 1 != steps.len() {
                    return Err(Error::MalformedCircuit("measurement must be the last step".into()));
                }
                return state.measure(modes);
            }
        }
    }
    let mut out = BTreeMap::new();
    out.insert(DetectionPattern::default(), state);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labels(names: &[&str]) -> Vec<ModeLabel> {
        names.iter().map(|n| ModeLabel::from(*n)).collect()
    }

    #[test]
    fn identity_unitary_is_noop() {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let rho = FockDensityOperator::from_pure(labels(&["a", "b"]), 4, &[(vec![1, 1], c(s)), (vec![2, 0], c(s))]).unwrap();
        let out = rho.apply_mode_unitary(&labels(&["a", "b"]), &DMatrix::identity(2, 2)).unwrap();
        assert!(out.distance(&rho).unwrap() < 1e-14);
    }

    #[test]
    fn balanced_beamsplitter_on_single_photon() {
        let rho = FockDensityOperator::from_pure(labels(&["a", "b"]), 2, &[(vec![1, 0], c(1.0))]).unwrap();
        let out = rho
            .apply_mode_unitary(&labels(&["a", "b"]), &beamsplitter(std::f64::consts::FRAC_PI_4))
            .unwrap();
        assert!((out.population(&[1, 0]) - 0.5).abs() < 1e-14);
        assert!((out.population(&[0, 1]) - 0.5).abs() < 1e-14);
        assert!((out.element(&[1, 0], &[0, 1]).re - 0.5).abs() < 1e-14);
    }

    #[test]
    fn rotation_turns_hv_into_hh_minus_vv() {
        let rho = FockDensityOperator::from_pure(labels(&["H", "V"]), 2, &[(vec![1, 1], c(1.0))]).unwrap();
        let out = rho.apply_mode_unitary(&labels(&["H", "V"]), &rotation_45()).unwrap();
        assert!(out.population(&[1, 1]).abs() < 1e-15);
        assert!((out.population(&[2, 0]) - 0.5).abs() < 1e-14);
        assert!((out.element(&[2, 0], &[0, 2]).re + 0.5).abs() < 1e-14);
    }

    #[test]
    fn rejects_non_unitary() {
        let rho = FockDensityOperator::vacuum(labels(&["a", "b"]), 2).unwrap();
        let mut u = DMatrix::identity(2, 2);
        u[(0, 1)] = c(0.1);
        assert!(matches!(rho.apply_mode_unitary(&labels(&["a", "b"]), &u), Err(Error::NotUnitary(_))));
        assert!(matches!(
            rho.apply_mode_unitary(&labels(&["a", "zz"]), &DMatrix::identity(2, 2)),
            Err(Error::UnknownMode(_))
        ));
    }

    #[test]
    fn loss_limits() {
        let rho = FockDensityOperator::from_pure(labels(&["a"]), 2, &[(vec![1], c(1.0))]).unwrap();
        assert!(rho.apply_loss(&"a".into(), 1.0).unwrap().distance(&rho).unwrap() < 1e-15);
        let dead = rho.apply_loss(&"a".into(), 0.0).unwrap();
        assert!((dead.population(&[0]) - 1.0).abs() < 1e-15);
        let part = rho.apply_loss(&"a".into(), 0.9).unwrap();
        assert!((part.population(&[1]) - 0.9).abs() < 1e-14);
        assert!((part.population(&[0]) - 0.1).abs() < 1e-14);
        assert!(matches!(rho.apply_loss(&"a".into(), 1.2), Err(Error::ProbabilityOutOfRange { .. })));
    }

    #[test]
    fn pbs_routes_by_polarization() {
        let modes = labels(&["a.H", "a.V", "b.H", "b.V"]);
        let (a, b) = (PolarizationPair::new("a"), PolarizationPair::new("b"));
        let (o1, o2) = (PolarizationPair::new("o1"), PolarizationPair::new("o2"));
        let h = FockDensityOperator::from_pure(modes.clone(), 2, &[(vec![1, 0, 0, 0], c(1.0))]).unwrap();
        let out = h.apply_pbs(&a, &b, &o1, &o2).unwrap();
        let (_, p) = out
            .measure_and_postselect(&[o1.h.clone()], &DetectionPattern::new([(o1.h.clone(), 1)]))
            .unwrap();
        assert!((p - 1.0).abs() < 1e-15);
        let v = FockDensityOperator::from_pure(modes, 2, &[(vec![0, 1, 0, 0], c(1.0))]).unwrap();
        let out = v.apply_pbs(&a, &b, &o1, &o2).unwrap();
        let (_, p) = out
            .measure_and_postselect(&[o2.v.clone()], &DetectionPattern::new([(o2.v.clone(), 1)]))
            .unwrap();
        assert!((p - 1.0).abs() < 1e-15);
        assert!(matches!(h.apply_pbs(&a, &a, &o1, &o2), Err(Error::DuplicateMode(_))));
    }

    #[test]
    fn born_rule_projection() {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let rho = FockDensityOperator::from_pure(labels(&["a", "b"]), 1, &[(vec![1, 0], c(s)), (vec![0, 1], c(s))]).unwrap();
        let pattern = DetectionPattern::new([("a", 1), ("b", 0)]);
        let (_, p) = rho.measure_and_postselect(&labels(&["a", "b"]), &pattern).unwrap();
        assert!((p - 0.5).abs() < 1e-15);
        let bad = DetectionPattern::new([("c", 1)]);
        assert!(matches!(
            rho.measure_and_postselect(&labels(&["a", "b"]), &bad),
            Err(Error::UnmeasuredMode(_))
        ));
    }

    #[test]
    fn empty_circuit_returns_input() {
        let rho = FockDensityOperator::from_pure(labels(&["a"]), 1, &[(vec![1], c(1.0))]).unwrap();
        let out = run_circuit(&rho, &[]).unwrap();
        assert_eq!(out.len(), 1);
        let (state, p) = &out[&DetectionPattern::default()];
        assert!((p - 1.0).abs() < 1e-15);
        assert!(state.distance(&rho).unwrap() < 1e-15);
    }

    #[test]
    fn measurement_must_be_last() {
        let rho = FockDensityOperator::vacuum(labels(&["a"]), 1).unwrap();
        let steps = [
            CircuitStep::Measure { modes: labels(&["a"]) },
            CircuitStep::Loss { mode: "a".into(), eta: 0.5 },
        ];
        assert!(matches!(run_circuit(&rho, &steps), Err(Error::MalformedCircuit(_))));
    }
}

#[cfg(test)]
mod props {
    use super::*;
    use proptest::prelude::*;

    fn labels() -> Vec<ModeLabel> {
        ["a", "b", "c"].iter().map(|n| ModeLabel::from(*n)).collect()
    }

    /// Random mixture of random kets with at most three photons over three modes.
    fn arb_state() -> impl Strategy<Value = FockDensityOperator> {
        let term = (prop::collection::vec(0u8..=1, 3), -1.0f64..1.0, -1.0f64..1.0);
        let ket = prop::collection::vec(term, 1..5);
        prop::collection::vec((0.05f64..1.0, ket), 1..3).prop_map(|ens| {
            let ens: Vec<(f64, Ket)> = ens
                .into_iter()
                .map(|(w, k)| (w, k.into_iter().map(|(o, re, im)| (o, Complex64::new(re, im))).collect()))
                .collect();
            FockDensityOperator::from_mixture(labels(), 3, &ens).unwrap()
        })
    }

    fn arb_unitary() -> impl Strategy<Value = DMatrix<Complex64>> {
        (0.0f64..6.3, 0.0f64..6.3, 0.0f64..6.3).prop_map(|(t, p1, p2)| {
            let bs = beamsplitter(t);
            let phase = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![
                Complex64::from_polar(1.0, p1),
                Complex64::from_polar(1.0, p2),
            ]));
            phase * bs
        })
    }

    proptest! {
        #[test]
        fn loss_composes(rho in arb_state(), e1 in 0.0f64..=1.0, e2 in 0.0f64..=1.0) {
            let m = ModeLabel::from("b");
            let twice = rho.apply_loss(&m, e1).unwrap().apply_loss(&m, e2).unwrap();
            let once = rho.apply_loss(&m, e1 * e2).unwrap();
            prop_assert!(twice.distance(&once).unwrap() < 1e-12);
        }

        #[test]
        fn unitary_conserves_number_and_positivity(rho in arb_state(), u in arb_unitary()) {
            let modes = [ModeLabel::from("a"), ModeLabel::from("c")];
            let out = rho.apply_mode_unitary(&modes, &u).unwrap();
            prop_assert!((out.trace() - rho.trace()).abs() < 1e-12);
            prop_assert!((out.mean_photon_number() - rho.mean_photon_number()).abs() < 1e-12);
            prop_assert!(out.hermiticity_error() < 1e-12);
            prop_assert!(out.min_eigenvalue() > -1e-10);
        }

        #[test]
        fn loss_keeps_state_physical(rho in arb_state(), eta in 0.0f64..=1.0) {
            let out = rho.apply_loss(&ModeLabel::from("a"), eta).unwrap();
            prop_assert!((out.trace() - rho.trace()).abs() < 1e-12);
            prop_assert!(out.hermiticity_error() < 1e-12);
            prop_assert!(out.min_eigenvalue() > -1e-10);
        }

        #[test]
        fn measurement_is_complete(rho in arb_state(), u in arb_unitary()) {
            let steps = [
                CircuitStep::Unitary { modes: vec!["a".into(), "b".into()], u },
                CircuitStep::Loss { mode: "c".into(), eta: 0.7 },
                CircuitStep::Measure { modes: vec!["a".into(), "b".into()] },
            ];
            let out = run_circuit(&rho, &steps).unwrap();
            let total: f64 = out.values().map(|(_, p)| p).sum();
            prop_assert!((total - rho.trace()).abs() < 1e-10);
            for (state, p) in out.values() {
                prop_assert!((state.trace() - p).abs() < 1e-12);
                prop_assert!(state.min_eigenvalue() > -1e-10);
            }
        }

        #[test]
        fn pure_path_matches_density_path(
            terms in prop::collection::vec((prop::collection::vec(0u8..=1, 3), -1.0f64..1.0), 1..5),
            u in arb_unitary(),
            eta in 0.0f64..=1.0,
        ) {
            let ket: Ket = terms.into_iter().map(|(o, a)| (o, Complex64::new(a, 0.5 * a))).collect();
            let steps = [
                CircuitStep::Loss { mode: "a".into(), eta },
                CircuitStep::Unitary { modes: vec!["a".into(), "b".into()], u },
                CircuitStep::Loss { mode: "b".into(), eta: eta.sqrt() },
                CircuitStep::Measure { modes: vec!["b".into()] },
            ];
            let dense = run_circuit(&FockDensityOperator::from_pure(labels(), 3, &ket).unwrap(), &steps).unwrap();
            let pure = run_circuit_pure(&FockKet::new(labels(), &ket).unwrap(), &steps).unwrap();
            for (pattern, (rho, _)) in &dense {
                match pure.get(pattern) {
                    Some(k) => prop_assert!(k.to_density(3).unwrap().distance(rho).unwrap() < 1e-12),
                    None => prop_assert!(rho.trace() < 1e-12),
                }
            }
        }

        #[test]
        fn rotation_never_leaves_one_photon_per_cell(re in -1.0f64..1.0, im in -1.0f64..1.0) {
            let hv = FockDensityOperator::from_pure(
                vec!["H".into(), "V".into()],
                2,
                &[(vec![1, 1], Complex64::new(re, im))],
            ).unwrap();
            let out = hv.apply_mode_unitary(&["H".into(), "V".into()], &rotation_45()).unwrap();
            prop_assert!(out.population(&[1, 1]).abs() < 1e-15);
        }
    }
}
