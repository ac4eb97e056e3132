//! Self-checks of the coefficient tables against the Fock oracle and the
//! hand-written closed forms. Every check reports its largest deviation.

use std::fmt::Write as _;

use num_complex::Complex64;
use serde::Serialize;

use crate::error::Result;
use crate::fock::{FockDensityOperator, FockKet, PolarizationPair};
use crate::pattern::{BellLabel, ExcitationPattern, ModeMap, PatternState, SchemeKind};
use crate::protocol::appendix::{self, ClosedForm, Mixture};
use crate::protocol::circuits::{output_map, stage_circuit};
use crate::protocol::tables::{components, oracle_cell, table, table_with_cutoff, CoefficientTable, Component, DEFAULT_CUTOFF};
use crate::protocol::{EnpKind, Stage};

/// Default pass threshold.
pub const TOLERANCE: f64 = 1e-10;

/// Efficiencies at which closed forms are compared.
pub const CLOSED_FORM_ETAS: [f64; 3] = [1.0, 0.9, 0.5];

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub deviation: f64,
    pub tolerance: f64,
}

impl Check {
    pub fn new(name: impl Into<String>, deviation: f64) -> Self {
        Check {
            name: name.into(),
            deviation,
            tolerance: TOLERANCE,
        }
    }

    pub fn passed(&self) -> bool {
        self.deviation.is_finite() && self.deviation <= self.tolerance
    }
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct Report {
    pub checks: Vec<Check>,
    /// Tabulated closed forms that the code replaces with exact ones; shown
    /// for reference, never gating.
    pub reference: Vec<Check>,
}

impl Report {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(Check::passed)
    }

    pub fn failures(&self) -> Vec<&Check> {
        self.checks.iter().filter(|c| !c.passed()).collect()
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for c in &self.checks {
            let tag = if c.passed() { "PASS" } else { "FAIL" };
            let _ = writeln!(s, "{tag} {:<48} max_dev={:.3e}", c.name, c.deviation);
        }
        for c in &self.reference {
            let _ = writeln!(s, "REF  {:<48} max_dev={:.3e}", c.name, c.deviation);
        }
        let failed = self.failures().len();
        let _ = writeln!(s, "{} checks, {} failed", self.checks.len(), failed);
        s
    }
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn unit(scheme: SchemeKind, c: Component, w: f64) -> Vec<f64> {
    components(scheme).iter().map(|x| if *x == c { w } else { 0.0 }).collect()
}

/// Photons carried by a component's representative.
pub fn photon_count(scheme: SchemeKind, c: Component) -> usize {
    use ExcitationPattern::*;
    match (scheme, c) {
        (SchemeKind::Dlcz, Component::Logical(_)) => 1,
        (SchemeKind::NewScheme, Component::Logical(_)) => 2,
        (_, Component::Pattern(p)) => match p {
            P00 => 0,
            P10 => 1,
            P11 | P20 | P20Par | P20Perp => 2,
            P21Par | P21Perp => 3,
        },
    }
}

/// Connection output label for `a ⊗ b` at η = 1: bit and phase add mod 2.
fn enc_label(a: BellLabel, b: BellLabel) -> BellLabel {
    let (ab, ap) = a.bits();
    let (bb, bp) = b.bits();
    BellLabel::from_bits(ab ^ bb, ap ^ bp)
}

/// Phase purification truth table; `None` where nothing is accepted.
pub fn phase_enp_label(a: BellLabel, b: BellLabel) -> Option<BellLabel> {
    use BellLabel::*;
    match (a, b) {
        (PhiPlus, PhiPlus) | (PsiPlus, PsiPlus) => Some(PhiPlus),
        (PhiPlus, PsiPlus) | (PsiPlus, PhiPlus) => Some(PsiPlus),
        (PhiMinus, PhiMinus) | (PsiMinus, PsiMinus) => Some(PhiMinus),
        (PhiMinus, PsiMinus) | (PsiMinus, PhiMinus) => Some(PsiMinus),
        _ => None,
    }
}

fn logical_cell(scheme: SchemeKind, stage: Stage, a: BellLabel, b: BellLabel) -> Result<Vec<f64>> {
    Ok(oracle_cell(
        scheme,
        stage,
        &[Component::Logical(a), Component::Logical(b)],
        1.0,
        DEFAULT_CUTOFF,
    )?
    .0)
}

const PHI: [BellLabel; 2] = [BellLabel::PhiPlus, BellLabel::PhiMinus];

/// Lossless connection of Φ± pairs, bit purification of Φ+ ⊗ Ψ+ and the full
/// phase purification table, straight from the oracle.
pub fn truth_tables() -> Result<Vec<Check>> {
    let ns = SchemeKind::NewScheme;
    let mut out = Vec::new();
    for a in PHI {
        for b in PHI {
            let got = logical_cell(ns, Stage::EncHigher, a, b)?;
            let want = unit(ns, Component::Logical(enc_label(a, b)), 0.5);
            out.push(Check::new(
                format!("enc {}x{} -> {}", a.symbol(), b.symbol(), enc_label(a, b).symbol()),
                max_abs_diff(&got, &want),
            ));
        }
    }
    let got = logical_cell(ns, Stage::Enp(EnpKind::Bit), BellLabel::PhiPlus, BellLabel::PsiPlus)?;
    out.push(Check::new("bit-enp Phi+xPsi+ accepts nothing", got.iter().map(|x| x.abs()).sum()));
    for a in BellLabel::ALL {
        for b in BellLabel::ALL {
            let got = logical_cell(ns, Stage::Enp(EnpKind::Phase), a, b)?;
            let (want, tag) = match phase_enp_label(a, b) {
                Some(l) => (unit(ns, Component::Logical(l), 0.5), l.symbol()),
                None => (vec![0.0; got.len()], "-"),
            };
            out.push(Check::new(
                format!("phase-enp {}x{} -> {tag}", a.symbol(), b.symbol()),
                max_abs_diff(&got, &want),
            ));
        }
    }
    Ok(out)
}

/// Freshly generated two-cell pair at vanishing `p_c`: one excitation in the
/// H cells and one in the V cells, each shared between the two nodes.
pub fn generated_pair_ket(a: &str, b: &str) -> Result<FockKet> {
    let map = ModeMap::NewScheme {
        a: PolarizationPair::new(a),
        b: PolarizationPair::new(b),
    };
    let h = Complex64::new(0.5, 0.0);
    let terms: Vec<(Vec<u8>, Complex64)> = [[1, 1, 0, 0], [1, 0, 0, 1], [0, 1, 1, 0], [0, 0, 1, 1]]
        .iter()
        .map(|o| (o.to_vec(), h))
        .collect();
    FockKet::new(map.modes(), &terms)
}

/// First-level connection of two generated pairs at η = 1: success
/// probability and Φ+ fidelity of the accepted output.
pub fn first_level_connection() -> Result<(f64, f64)> {
    let joint = generated_pair_ket("aL", "bC")?.tensor(&generated_pair_ket("aC", "bR")?)?;
    let circuit = stage_circuit(SchemeKind::NewScheme, Stage::EncFirst, 1.0)?;
    let outs = circuit.run_pure(&joint)?;
    let p: f64 = outs.iter().map(FockKet::norm_sqr).sum();
    let Some(first) = outs.first() else { return Ok((0.0, 0.0)) };
    let ens: Vec<_> = outs.iter().flat_map(|k| k.branches()).map(|b| (1.0, b)).collect();
    let rho = FockDensityOperator::from_mixture(first.modes().to_vec(), DEFAULT_CUTOFF, &ens)?;
    let proj = PatternState::project_from_fock(&rho, &output_map(SchemeKind::NewScheme, Stage::EncFirst))?;
    let f = proj.state.normalize()?.fidelity(BellLabel::PhiPlus)?;
    Ok((p, f))
}

/// Lossless success probabilities of every stage on matching ideal inputs.
pub fn success_probabilities() -> Result<Vec<Check>> {
    let ns = SchemeKind::NewScheme;
    let total = |v: Vec<f64>| v.iter().sum::<f64>();
    let (p1, f1) = first_level_connection()?;
    let phi = BellLabel::PhiPlus;
    let pme = oracle_cell(
        SchemeKind::Dlcz,
        Stage::Pme,
        &[Component::Logical(phi), Component::Logical(phi)],
        1.0,
        DEFAULT_CUTOFF,
    )?
    .0;
    Ok(vec![
        Check::new("first-level enc success = 1/8", (p1 - 0.125).abs()),
        Check::new("first-level enc output is Phi+", (f1 - 1.0).abs()),
        Check::new(
            "higher-level enc success = 1/2",
            (total(logical_cell(ns, Stage::EncHigher, phi, phi)?) - 0.5).abs(),
        ),
        Check::new(
            "bit-enp success = 1/2",
            (total(logical_cell(ns, Stage::Enp(EnpKind::Bit), phi, phi)?) - 0.5).abs(),
        ),
        Check::new(
            "phase-enp success = 1/2",
            (total(logical_cell(ns, Stage::Enp(EnpKind::Phase), phi, phi)?) - 0.5).abs(),
        ),
        Check::new("single-rail post-selection success = 1/2", (total(pme) - 0.5).abs()),
    ])
}

fn mixture_vector(scheme: SchemeKind, m: &Mixture) -> Vec<f64> {
    let mut v = vec![0.0; components(scheme).len()];
    for (c, w) in m {
        if let Some(i) = components(scheme).iter().position(|x| x == c) {
            v[i] += w;
        }
    }
    v
}

/// Largest deviation between `weights` (plus the form's logical entry) and
/// the symmetrized table output.
pub fn closed_form_deviation(form: &ClosedForm, weights: &[(ExcitationPattern, f64)], t: &CoefficientTable) -> f64 {
    let a = mixture_vector(form.scheme, &form.left);
    let b = mixture_vector(form.scheme, &form.right);
    let ab = t.apply2(&a, &b);
    let ba = t.apply2(&b, &a);
    let got: Vec<f64> = ab.iter().zip(&ba).map(|(x, y)| 0.5 * (x + y)).collect();
    let logical_pattern = t.out_scheme.logical_pattern();
    let want = |p: ExcitationPattern| weights.iter().filter(|(q, _)| *q == p).map(|(_, w)| w).sum::<f64>();

    let mut dev = 0.0f64;
    let mut logical_total = 0.0;
    for (c, g) in t.outputs.iter().zip(&got) {
        match c {
            Component::Pattern(p) => dev = dev.max((g - want(*p)).abs()),
            Component::Logical(_) => logical_total += g,
        }
    }
    dev = dev.max((logical_total - want(logical_pattern)).abs());
    if let Some((label, w)) = form.logical {
        let g = t.output_index_of(Component::Logical(label)).map_or(0.0, |i| got[i]);
        dev = dev.max((g - w).abs());
    }
    dev
}

fn closed_form_stage(scheme: SchemeKind) -> Stage {
    match scheme {
        SchemeKind::Dlcz => Stage::EncFirst,
        SchemeKind::NewScheme => Stage::EncHigher,
    }
}

/// Closed forms of `scheme` at `eta` against `t`, using the exact weights.
pub fn check_closed_forms(t: &CoefficientTable, forms: &[ClosedForm]) -> Vec<Check> {
    forms
        .iter()
        .filter(|f| f.scheme == t.scheme)
        .map(|f| {
            Check::new(
                format!("{} {} eta={}", f.scheme, f.name, t.eta),
                closed_form_deviation(f, f.exact_patterns(), t),
            )
        })
        .collect()
}

/// Exact closed forms, plus the tabulated weights where they differ.
pub fn closed_forms(eta: f64) -> Result<(Vec<Check>, Vec<Check>)> {
    let forms = appendix::all(eta);
    let mut checks = Vec::new();
    let mut reference = Vec::new();
    for scheme in [SchemeKind::Dlcz, SchemeKind::NewScheme] {
        let t = table(scheme, closed_form_stage(scheme), eta)?;
        checks.extend(check_closed_forms(&t, &forms));
        for f in forms.iter().filter(|f| f.scheme == scheme && f.exact.is_some()) {
            reference.push(Check::new(
                format!("{} {} eta={} tabulated", f.scheme, f.name, eta),
                closed_form_deviation(f, &f.patterns, &t),
            ));
        }
    }
    Ok((checks, reference))
}

/// Tabulated weights for every closed form, as written.
pub fn tabulated_closed_forms(eta: f64) -> Result<Vec<Check>> {
    let forms = appendix::all(eta);
    let mut out = Vec::new();
    for scheme in [SchemeKind::Dlcz, SchemeKind::NewScheme] {
        let t = table(scheme, closed_form_stage(scheme), eta)?;
        for f in forms.iter().filter(|f| f.scheme == scheme) {
            out.push(Check::new(
                format!("{} {} eta={}", f.scheme, f.name, eta),
                closed_form_deviation(f, &f.patterns, &t),
            ));
        }
    }
    Ok(out)
}

const STAGES: [(SchemeKind, Stage); 6] = [
    (SchemeKind::NewScheme, Stage::EncFirst),
    (SchemeKind::NewScheme, Stage::EncHigher),
    (SchemeKind::NewScheme, Stage::Enp(EnpKind::Bit)),
    (SchemeKind::NewScheme, Stage::Enp(EnpKind::Phase)),
    (SchemeKind::Dlcz, Stage::EncFirst),
    (SchemeKind::Dlcz, Stage::Pme),
];

/// Raising the cutoff must not move any coefficient: 4 → 5 on every cell
/// that fits in four photons, 6 → 7 on whole tables.
pub fn truncation(eta: f64) -> Result<Vec<Check>> {
    let mut out = Vec::new();
    for (scheme, stage) in STAGES {
        let comps = components(scheme);
        let mut dev = 0.0f64;
        for &a in comps {
            for &b in comps {
                if photon_count(scheme, a) + photon_count(scheme, b) > 4 {
                    continue;
                }
                let lo = oracle_cell(scheme, stage, &[a, b], eta, 4)?.0;
                let hi = oracle_cell(scheme, stage, &[a, b], eta, 5)?.0;
                dev = dev.max(max_abs_diff(&lo, &hi));
            }
        }
        out.push(Check::new(format!("cutoff 4->5 {scheme} {stage:?}"), dev));

        let lo = table_with_cutoff(scheme, stage, eta, DEFAULT_CUTOFF)?;
        let hi = table_with_cutoff(scheme, stage, eta, DEFAULT_CUTOFF + 1)?;
        let n = comps.len();
        let mut dev = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                dev = dev.max(max_abs_diff(lo.cell(&[i, j]), hi.cell(&[i, j])));
            }
        }
        out.push(Check::new(
            format!("cutoff {}->{} {scheme} {stage:?}", DEFAULT_CUTOFF, DEFAULT_CUTOFF + 1),
            dev,
        ));
    }
    Ok(out)
}

/// Every check run by the `oracle-verify` command.
pub fn run_all() -> Result<Report> {
    let mut report = Report::default();
    report.checks.extend(truth_tables()?);
    report.checks.extend(success_probabilities()?);
    for eta in CLOSED_FORM_ETAS {
        let (checks, reference) = closed_forms(eta)?;
        report.checks.extend(checks);
        report.reference.extend(reference);
    }
    report.checks.extend(truncation(0.9)?);
    Ok(report)
}

/// Coefficient tables at `eta` as audit text.
pub fn dump_tables(eta: f64) -> Result<String> {
    let mut s = String::new();
    for (scheme, stage) in STAGES {
        s.push_str(&table(scheme, stage, eta)?.to_text());
    }
    s.push_str(&table(SchemeKind::NewScheme, Stage::Readout, eta)?.to_text());
    Ok(s)
}
