//! Pattern-decomposed repeater pair: probabilities over excitation patterns
//! plus a Bell-diagonal block for the logical pattern.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{FockDensityOperator, ModeLabel, PolarizationPair};

const NORM_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SchemeKind {
    Dlcz,
    #[serde(rename = "new")]
    NewScheme,
}

impl SchemeKind {
    pub fn name(self) -> &'static str {
        match self {
            SchemeKind::Dlcz => "dlcz",
            SchemeKind::NewScheme => "new",
        }
    }

    pub fn logical_pattern(self) -> ExcitationPattern {
        match self {
            SchemeKind::Dlcz => ExcitationPattern::P10,
            SchemeKind::NewScheme => ExcitationPattern::P11,
        }
    }

    pub fn patterns(self) -> &'static [ExcitationPattern] {
        use ExcitationPattern::*;
        match self {
            SchemeKind::Dlcz => &[P00, P10, P11, P20],
            SchemeKind::NewScheme => &[P00, P10, P11, P20Par, P20Perp, P21Par, P21Perp],
        }
    }

    /// Bell labels the logical block may carry; the single-rail pair has
    /// only the two `ξ±` states, stored in the Φ± slots.
    pub fn bell_labels(self) -> &'static [BellLabel] {
        match self {
            SchemeKind::Dlcz => &[BellLabel::PhiPlus, BellLabel::PhiMinus],
            SchemeKind::NewScheme => &BellLabel::ALL,
        }
    }
}

impl fmt::Display for SchemeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SchemeKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "dlcz" => Ok(SchemeKind::Dlcz),
            "new" | "newscheme" | "ns" => Ok(SchemeKind::NewScheme),
            other => Err(Error::Parse(format!("unknown scheme `{other}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ExcitationPattern {
    P00,
    P10,
    P11,
    P20,
    P20Par,
    P20Perp,
    P21Par,
    P21Perp,
}

impl ExcitationPattern {
    pub const ALL: [ExcitationPattern; 8] = [
        ExcitationPattern::P00,
        ExcitationPattern::P10,
        ExcitationPattern::P11,
        ExcitationPattern::P20,
        ExcitationPattern::P20Par,
        ExcitationPattern::P20Perp,
        ExcitationPattern::P21Par,
        ExcitationPattern::P21Perp,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExcitationPattern::P00 => "P00",
            ExcitationPattern::P10 => "P10",
            ExcitationPattern::P11 => "P11",
            ExcitationPattern::P20 => "P20",
            ExcitationPattern::P20Par => "P20Par",
            ExcitationPattern::P20Perp => "P20Perp",
            ExcitationPattern::P21Par => "P21Par",
            ExcitationPattern::P21Perp => "P21Perp",
        }
    }
}

impl fmt::Display for ExcitationPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Bell states on polarization qubits, `Φ± = (HH ± VV)/√2`,
/// `Ψ± = (HV ± VH)/√2`; index order is (Φ+, Φ−, Ψ+, Ψ−).
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum BellLabel {
    PhiPlus,
    PhiMinus,
    PsiPlus,
    PsiMinus,
}

impl BellLabel {
    pub const ALL: [BellLabel; 4] = [
        BellLabel::PhiPlus,
        BellLabel::PhiMinus,
        BellLabel::PsiPlus,
        BellLabel::PsiMinus,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    /// (bit, phase): bit set for Ψ, phase set for the minus sign.
    pub fn bits(self) -> (u8, u8) {
        let i = self.index() as u8;
        (i >> 1, i & 1)
    }

    pub fn from_bits(bit: u8, phase: u8) -> Self {
        BellLabel::ALL[(((bit & 1) << 1) | (phase & 1)) as usize]
    }

    pub fn symbol(self) -> &'static str {
        match self {
            BellLabel::PhiPlus => "Φ+",
            BellLabel::PhiMinus => "Φ−",
            BellLabel::PsiPlus => "Ψ+",
            BellLabel::PsiMinus => "Ψ−",
        }
    }

    /// Amplitudes over (HH, HV, VH, VV).
    pub fn amplitudes(self) -> [f64; 4] {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        match self {
            BellLabel::PhiPlus => [s, 0.0, 0.0, s],
            BellLabel::PhiMinus => [s, 0.0, 0.0, -s],
            BellLabel::PsiPlus => [0.0, s, s, 0.0],
            BellLabel::PsiMinus => [0.0, s, -s, 0.0],
        }
    }
}

impl fmt::Display for BellLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogicalBlock {
    pub weights: [f64; 4],
}

impl LogicalBlock {
    pub fn pure(label: BellLabel) -> Self {
        let mut weights = [0.0; 4];
        weights[label.index()] = 1.0;
        LogicalBlock { weights }
    }

    pub fn uniform(scheme: SchemeKind) -> Self {
        let labels = scheme.bell_labels();
        let mut weights = [0.0; 4];
        for l in labels {
            weights[l.index()] = 1.0 / labels.len() as f64;
        }
        LogicalBlock { weights }
    }

    pub fn weight(&self, label: BellLabel) -> f64 {
        self.weights[label.index()]
    }

    pub fn total(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Rescales to unit sum; an all-zero block becomes uniform over the
    /// scheme's labels.
    pub fn normalized(&self, scheme: SchemeKind) -> Self {
        let t = self.total();
        if t <= 0.0 {
            return LogicalBlock::uniform(scheme);
        }
        LogicalBlock {
            weights: self.weights.map(|w| w / t),
        }
    }
}

/// Column-stochastic map on Bell weights: `out[i] = Σ_j m[i][j] w[j]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BellChannel {
    pub m: [[f64; 4]; 4],
}

impl BellChannel {
    pub fn identity() -> Self {
        let mut m = [[0.0; 4]; 4];
        for (i, row) in m.iter_mut().enumerate() {
            row[i] = 1.0;
        }
        BellChannel { m }
    }

    pub fn new(m: [[f64; 4]; 4]) -> Result<Self> {
        for j in 0..4 {
            let col: f64 = (0..4).map(|i| m[i][j]).sum();
            if (col - 1.0).abs() > 1e-12 || (0..4).any(|i| m[i][j] < 0.0 || !m[i][j].is_finite()) {
                return Err(Error::InvalidArgument(format!("channel column {j} is not a distribution")));
            }
        }
        Ok(BellChannel { m })
    }

    pub fn apply(&self, block: &LogicalBlock) -> LogicalBlock {
        let mut weights = [0.0; 4];
        for (i, w) in weights.iter_mut().enumerate() {
            *w = (0..4).map(|j| self.m[i][j] * block.weights[j]).sum();
        }
        LogicalBlock { weights }
    }

    pub fn then(&self, next: &BellChannel) -> BellChannel {
        let mut m = [[0.0; 4]; 4];
        for (i, row) in m.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = (0..4).map(|k| next.m[i][k] * self.m[k][j]).sum();
            }
        }
        BellChannel { m }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PatternState {
    pub scheme: SchemeKind,
    pub probs: BTreeMap<ExcitationPattern, f64>,
    pub logical: LogicalBlock,
    pub normalized: bool,
}

/// Memory modes of one repeater pair.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ModeMap {
    Dlcz { x: ModeLabel, y: ModeLabel },
    NewScheme { a: PolarizationPair, b: PolarizationPair },
}

impl ModeMap {
    pub fn scheme(&self) -> SchemeKind {
        match self {
            ModeMap::Dlcz { .. } => SchemeKind::Dlcz,
            ModeMap::NewScheme { .. } => SchemeKind::NewScheme,
        }
    }

    pub fn modes(&self) -> Vec<ModeLabel> {
        match self {
            ModeMap::Dlcz { x, y } => vec![x.clone(), y.clone()],
            ModeMap::NewScheme { a, b } => vec![a.h.clone(), a.v.clone(), b.h.clone(), b.v.clone()],
        }
    }
}

/// Pattern of one occupation vector (register order as in [`ModeMap::modes`]).
pub fn classify(scheme: SchemeKind, occ: &[u8]) -> ExcitationPattern {
    use ExcitationPattern::*;
    match scheme {
        SchemeKind::Dlcz => {
            let (hi, lo) = (occ[0].max(occ[1]), occ[0].min(occ[1]));
            match (hi, lo) {
                (0, 0) => P00,
                (1, 0) => P10,
                (_, 0) => P20,
                _ => P11,
            }
        }
        SchemeKind::NewScheme => {
            let (na, nb) = (occ[0] + occ[1], occ[2] + occ[3]);
            let split = |h: u8, v: u8| h + v >= 2 && h > 0 && v > 0;
            match (na.max(nb), na.min(nb)) {
                (0, 0) => P00,
                (1, 0) => P10,
                (1, 1) => P11,
                (_, 0) => {
                    if split(occ[0], occ[1]) || split(occ[2], occ[3]) {
                        P20Perp
                    } else {
                        P20Par
                    }
                }
                _ => {
                    if split(occ[0], occ[1]) || split(occ[2], occ[3]) {
                        P21Perp
                    } else {
                        P21Par
                    }
                }
            }
        }
    }
}

/// Result of projecting an oracle state.
#[derive(Clone, Debug)]
pub struct Projection {
    pub state: PatternState,
    /// Largest Bell-basis off-diagonal magnitude discarded from the logical block.
    pub bell_residue: f64,
    /// Largest inter-pattern coherence magnitude discarded.
    pub pattern_residue: f64,
}

impl PatternState {
    pub fn new(scheme: SchemeKind, probs: BTreeMap<ExcitationPattern, f64>, logical: LogicalBlock) -> Result<Self> {
        let mut s = PatternState {
            scheme,
            probs,
            logical,
            normalized: false,
        };
        s.validate()?;
        s.normalized = (s.total() - 1.0).abs() <= NORM_TOL;
        Ok(s)
    }

    /// Pure logical pair in the given Bell state.
    pub fn logical(scheme: SchemeKind, label: BellLabel) -> Self {
        let mut probs = BTreeMap::new();
        probs.insert(scheme.logical_pattern(), 1.0);
        PatternState {
            scheme,
            probs,
            logical: LogicalBlock::pure(label),
            normalized: true,
        }
    }

    pub fn single(scheme: SchemeKind, pattern: ExcitationPattern) -> Self {
        let mut probs = BTreeMap::new();
        probs.insert(pattern, 1.0);
        PatternState {
            scheme,
            probs,
            logical: LogicalBlock::pure(BellLabel::PhiPlus),
            normalized: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let allowed = self.scheme.patterns();
        for (p, v) in &self.probs {
            if !allowed.contains(p) {
                return Err(Error::SchemeMismatch(format!("pattern {p} not used by scheme {}", self.scheme)));
            }
            if !v.is_finite() || *v < 0.0 {
                return Err(Error::InvalidArgument(format!("probability of {p} is {v}")));
            }
        }
        for (i, w) in self.logical.weights.iter().enumerate() {
            if !w.is_finite() || *w < 0.0 {
                return Err(Error::InvalidArgument(format!("logical weight {i} is {w}")));
            }
        }
        if (self.logical.total() - 1.0).abs() > NORM_TOL {
            return Err(Error::InvalidArgument(format!(
                "logical weights sum to {}",
                self.logical.total()
            )));
        }
        if self.scheme == SchemeKind::Dlcz
            && self.logical.weight(BellLabel::PsiPlus) + self.logical.weight(BellLabel::PsiMinus) > NORM_TOL
        {
            return Err(Error::SchemeMismatch("single-rail pair has no Ψ component".into()));
        }
        if self.normalized && (self.total() - 1.0).abs() > NORM_TOL {
            return Err(Error::NotNormalized(self.total()));
        }
        Ok(())
    }

    pub fn prob(&self, p: ExcitationPattern) -> f64 {
        self.probs.get(&p).copied().unwrap_or(0.0)
    }

    pub fn total(&self) -> f64 {
        self.probs.values().sum()
    }

    /// `(p_logic, p_vac, p_multi)`.
    pub fn aggregate(&self) -> (f64, f64, f64) {
        use ExcitationPattern::*;
        let g = |ps: &[ExcitationPattern]| ps.iter().map(|&p| self.prob(p)).sum::<f64>();
        match self.scheme {
            SchemeKind::Dlcz => (g(&[P10]), g(&[P00]), g(&[P11, P20])),
            SchemeKind::NewScheme => (g(&[P11]), g(&[P00, P10]), g(&[P20Par, P20Perp, P21Par, P21Perp])),
        }
    }

    /// `p_logic × w_target`.
    pub fn fidelity(&self, target: BellLabel) -> Result<f64> {
        if !self.normalized || (self.total() - 1.0).abs() > NORM_TOL {
            return Err(Error::NotNormalized(self.total()));
        }
        Ok(self.aggregate().0 * self.logical.weight(target))
    }

    /// Weight of `target` inside the logical block alone.
    pub fn logical_fidelity(&self, target: BellLabel) -> f64 {
        self.logical.weight(target)
    }

    pub fn normalize(&self) -> Result<Self> {
        let t = self.total();
        if !(t > 0.0) {
            return Err(Error::ZeroTrace);
        }
        Ok(PatternState {
            scheme: self.scheme,
            probs: self.probs.iter().map(|(&p, &v)| (p, v / t)).collect(),
            logical: self.logical,
            normalized: true,
        })
    }

    pub fn apply_bell_channel(&self, channel: &BellChannel) -> Self {
        let mut out = self.clone();
        out.logical = channel.apply(&self.logical);
        out
    }

    /// Decomposes an oracle state over the given memory modes; modes outside
    /// the map are traced out first.
    pub fn project_from_fock(rho: &FockDensityOperator, map: &ModeMap) -> Result<Projection> {
        let scheme = map.scheme();
        let wanted = map.modes();
        for m in &wanted {
            rho.mode_index(m)
                .map_err(|_| Error::IncompleteModeMap(format!("mode `{m}` missing from state")))?;
        }
        let extra: Vec<ModeLabel> = rho.modes().iter().filter(|m| !wanted.contains(m)).cloned().collect();
        let reduced = rho.trace_out(&extra)?.reorder(&wanted)?;

        let basis = reduced.basis();
        let mat = reduced.matrix();
        let classes: Vec<ExcitationPattern> = basis.iter().map(|b| classify(scheme, &b.occupations)).collect();
        let mut probs: BTreeMap<ExcitationPattern, f64> = BTreeMap::new();
        let mut pattern_residue = 0.0f64;
        for i in 0..basis.len() {
            *probs.entry(classes[i]).or_insert(0.0) += mat[(i, i)].re;
            for j in 0..basis.len() {
                if classes[i] != classes[j] {
                    pattern_residue = pattern_residue.max(mat[(i, j)].norm());
                }
            }
        }
        probs.retain(|_, v| *v != 0.0);
        for v in probs.values_mut() {
            if *v < 0.0 && *v > -1e-14 {
                *v = 0.0;
            }
        }

        let amp = |label: BellLabel, occ: &[u8]| bell_amplitude(scheme, label, occ);
        let mut bell = [[Complex64::new(0.0, 0.0); 4]; 4];
        for (i, bi) in basis.iter().enumerate() {
            for (j, bj) in basis.iter().enumerate() {
                let v = mat[(i, j)];
                if v.norm() == 0.0 {
                    continue;
                }
                for (k, lk) in BellLabel::ALL.iter().enumerate() {
                    let ak = amp(*lk, &bi.occupations);
                    if ak == 0.0 {
                        continue;
                    }
                    for (l, ll) in BellLabel::ALL.iter().enumerate() {
                        bell[k][l] += v * ak * amp(*ll, &bj.occupations);
                    }
                }
            }
        }
        let mut weights = [0.0; 4];
        let mut bell_residue = 0.0f64;
        for k in 0..4 {
            weights[k] = bell[k][k].re.max(0.0);
            for l in 0..4 {
                if k != l {
                    bell_residue = bell_residue.max(bell[k][l].norm());
                }
            }
        }
        let state = PatternState {
            scheme,
            probs,
            logical: LogicalBlock { weights }.normalized(scheme),
            normalized: false,
        };
        Ok(Projection {
            state,
            bell_residue,
            pattern_residue,
        })
    }

    /// Structured-text record of this state.
    pub fn to_record(&self) -> String {
        toml::to_string(self).expect("pattern state serializes")
    }

    /// Parses and validates a record produced by [`PatternState::to_record`].
    pub fn from_record(text: &str) -> Result<Self> {
        let s: PatternState = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        s.validate()?;
        Ok(s)
    }
}

/// `⟨occ|B⟩` for Bell state `B`. The single-rail pair carries
/// `ξ± = (|10⟩ ± |01⟩)/√2` in the Φ± slots.
fn bell_amplitude(scheme: SchemeKind, label: BellLabel, occ: &[u8]) -> f64 {
    let a = label.amplitudes();
    match (scheme, occ) {
        (SchemeKind::Dlcz, [1, 0]) => a[0],
        (SchemeKind::Dlcz, [0, 1]) => a[3],
        (SchemeKind::NewScheme, [1, 0, 1, 0]) => a[0],
        (SchemeKind::NewScheme, [1, 0, 0, 1]) => a[1],
        (SchemeKind::NewScheme, [0, 1, 1, 0]) => a[2],
        (SchemeKind::NewScheme, [0, 1, 0, 1]) => a[3],
        _ => 0.0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::Ket;

    fn c(x: f64) -> Complex64 {
        Complex64::new(x, 0.0)
    }

    fn ns_map() -> ModeMap {
        ModeMap::NewScheme {
            a: PolarizationPair::new("a"),
            b: PolarizationPair::new("b"),
        }
    }

    #[test]
    fn aggregate_groups() {
        let dl = PatternState::single(SchemeKind::Dlcz, ExcitationPattern::P10);
        assert_eq!(dl.aggregate(), (1.0, 0.0, 0.0));
        let mut probs = BTreeMap::new();
        probs.insert(ExcitationPattern::P11, 0.8);
        probs.insert(ExcitationPattern::P00, 0.1);
        probs.insert(ExcitationPattern::P10, 0.05);
        probs.insert(ExcitationPattern::P21Perp, 0.05);
        let ns = PatternState::new(SchemeKind::NewScheme, probs, LogicalBlock::pure(BellLabel::PhiPlus)).unwrap();
        let (l, v, m) = ns.aggregate();
        assert!((l - 0.8).abs() < 1e-15 && (v - 0.15).abs() < 1e-15 && (m - 0.05).abs() < 1e-15);
    }

    #[test]
    fn fidelity_examples() {
        let s = PatternState::logical(SchemeKind::NewScheme, BellLabel::PhiPlus);
        assert_eq!(s.fidelity(BellLabel::PhiPlus).unwrap(), 1.0);
        let mut probs = BTreeMap::new();
        probs.insert(ExcitationPattern::P11, 0.9);
        probs.insert(ExcitationPattern::P00, 0.1);
        let s = PatternState::new(SchemeKind::NewScheme, probs, LogicalBlock::pure(BellLabel::PhiPlus)).unwrap();
        assert!((s.fidelity(BellLabel::PhiPlus).unwrap() - 0.9).abs() < 1e-15);
        let q = 0.3f64.sin().powi(2);
        let mixed = PatternState {
            logical: LogicalBlock { weights: [1.0 - q, 0.0, q, 0.0] },
            ..s.clone()
        };
        assert!((mixed.fidelity(BellLabel::PhiPlus).unwrap() - 0.9 * (1.0 - q)).abs() < 1e-15);
        let half = PatternState::new(
            SchemeKind::NewScheme,
            [(ExcitationPattern::P11, 0.5)].into_iter().collect(),
            LogicalBlock::pure(BellLabel::PhiPlus),
        )
        .unwrap();
        assert!(matches!(half.fidelity(BellLabel::PhiPlus), Err(Error::NotNormalized(_))));
        let n = half.normalize().unwrap();
        assert_eq!(n.prob(ExcitationPattern::P11), 1.0);
    }

    #[test]
    fn channels() {
        let s = PatternState::logical(SchemeKind::NewScheme, BellLabel::PhiPlus);
        assert_eq!(s.apply_bell_channel(&BellChannel::identity()), s);
        let full = BellChannel::new([[0.25; 4]; 4]).unwrap();
        assert_eq!(s.apply_bell_channel(&full).logical.weights, [0.25; 4]);
        assert!(BellChannel::new([[0.5; 4]; 4]).is_err());
        let empty = PatternState::new(SchemeKind::Dlcz, BTreeMap::new(), LogicalBlock::pure(BellLabel::PhiPlus)).unwrap();
        assert!(matches!(empty.normalize(), Err(Error::ZeroTrace)));
    }

    #[test]
    fn projection_of_bell_and_vacuum() {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let modes = ns_map().modes();
        let phi: Ket = vec![(vec![1, 0, 1, 0], c(s)), (vec![0, 1, 0, 1], c(s))];
        let rho = FockDensityOperator::from_pure(modes.clone(), 4, &phi).unwrap();
        let p = PatternState::project_from_fock(&rho, &ns_map()).unwrap();
        assert!((p.state.prob(ExcitationPattern::P11) - 1.0).abs() < 1e-14);
        assert!((p.state.logical.weight(BellLabel::PhiPlus) - 1.0).abs() < 1e-14);
        let vac = FockDensityOperator::vacuum(modes, 4).unwrap();
        let p = PatternState::project_from_fock(&vac, &ns_map()).unwrap();
        assert_eq!(p.state.prob(ExcitationPattern::P00), 1.0);
        let bad = ModeMap::Dlcz {
            x: "x".into(),
            y: "y".into(),
        };
        assert!(matches!(
            PatternState::project_from_fock(&vac, &bad),
            Err(Error::IncompleteModeMap(_))
        ));
    }

    #[test]
    fn dlcz_projection_reads_xi_sign() {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let map = ModeMap::Dlcz {
            x: "x".into(),
            y: "y".into(),
        };
        let ket: Ket = vec![(vec![1, 0], c(s)), (vec![0, 1], c(-s))];
        let rho = FockDensityOperator::from_pure(map.modes(), 2, &ket).unwrap();
        let p = PatternState::project_from_fock(&rho, &map).unwrap();
        assert!((p.state.logical.weight(BellLabel::PhiMinus) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn classification_rules() {
        use ExcitationPattern::*;
        let ns = |o: [u8; 4]| classify(SchemeKind::NewScheme, &o);
        assert_eq!(ns([2, 0, 0, 0]), P20Par);
        assert_eq!(ns([1, 1, 0, 0]), P20Perp);
        assert_eq!(ns([2, 0, 1, 0]), P21Par);
        assert_eq!(ns([1, 1, 0, 1]), P21Perp);
        assert_eq!(ns([0, 0, 0, 1]), P10);
        assert_eq!(classify(SchemeKind::Dlcz, &[0, 2]), P20);
        assert_eq!(classify(SchemeKind::Dlcz, &[1, 1]), P11);
    }

    #[test]
    fn record_roundtrip() {
        let mut probs = BTreeMap::new();
        probs.insert(ExcitationPattern::P11, 0.7);
        probs.insert(ExcitationPattern::P10, 0.3);
        let s = PatternState::new(SchemeKind::NewScheme, probs, LogicalBlock { weights: [0.9, 0.05, 0.03, 0.02] }).unwrap();
        let back = PatternState::from_record(&s.to_record()).unwrap();
        assert_eq!(back, s);
        assert!(PatternState::from_record("scheme = \"dlcz\"\nnormalized = false\n[probs]\nP21Par = 1.0\n[logical]\nweights = [1.0, 0.0, 0.0, 0.0]\n").is_err());
    }
}
