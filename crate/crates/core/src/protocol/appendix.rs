//! Closed-form symmetrized connection coefficients for selected pattern
//! pairs, written out by hand as functions of η. They serve as an
//! independent cross-check of the oracle-built tables.

use crate::pattern::{BellLabel, ExcitationPattern, SchemeKind};

use super::tables::Component;

/// Input mixture over components.
pub type Mixture = Vec<(Component, f64)>;

#[derive(Clone, Debug)]
pub struct ClosedForm {
    pub scheme: SchemeKind,
    pub name: &'static str,
    pub left: Mixture,
    pub right: Mixture,
    /// Output pattern weights; every pattern not listed is zero.
    pub patterns: Vec<(ExcitationPattern, f64)>,
    /// Output weight of a logical Bell component, where coherence survives.
    pub logical: Option<(BellLabel, f64)>,
    /// Exact weights where the tabulated form gives ∥ and ⊥ inputs one value
    /// but they differ: a split pair at the connecting node can also herald
    /// after losing the other pair's photon.
    pub exact: Option<Vec<(ExcitationPattern, f64)>>,
}

impl ClosedForm {
    /// Weights believed exact: `exact` when present, else `patterns`.
    pub fn exact_patterns(&self) -> &[(ExcitationPattern, f64)] {
        self.exact.as_deref().unwrap_or(&self.patterns)
    }
}

fn pat(p: ExcitationPattern) -> Mixture {
    vec![(Component::Pattern(p), 1.0)]
}

fn coherent(label: BellLabel) -> Mixture {
    vec![(Component::Logical(label), 1.0)]
}

/// Single-rail `π10` without coherence: equal mix of `ξ+` and `ξ−`.
fn incoherent_single_rail() -> Mixture {
    vec![
        (Component::Logical(BellLabel::PhiPlus), 0.5),
        (Component::Logical(BellLabel::PhiMinus), 0.5),
    ]
}

pub fn dlcz(eta: f64) -> Vec<ClosedForm> {
    use ExcitationPattern::*;
    let e = eta;
    let l = || coherent(BellLabel::PhiPlus);
    let mk = |name, left, right, patterns, logical| ClosedForm {
        scheme: SchemeKind::Dlcz,
        name,
        left,
        right,
        patterns,
        logical,
        exact: None,
    };
    vec![
        mk(
            "[10,10]",
            l(),
            l(),
            vec![(P10, e / 2.0), (P00, e * (1.0 - e) / 2.0)],
            Some((BellLabel::PhiPlus, e / 2.0)),
        ),
        mk("[10,00]", l(), pat(P00), vec![(P00, e / 2.0)], None),
        mk("[10,11]", l(), pat(P11), vec![(P11, e / 2.0), (P10, e * (1.0 - e))], None),
        mk(
            "[10,20]",
            l(),
            pat(P20),
            vec![
                (P20, e / 4.0),
                (P10, e * (1.0 - e) / 2.0),
                (P00, 3.0 * e * (1.0 - e).powi(2) / 4.0),
            ],
            None,
        ),
        mk("[00,00]", pat(P00), pat(P00), vec![], None),
        mk("[00,11]", pat(P00), pat(P11), vec![(P10, e)], None),
        mk("[00,20]", pat(P00), pat(P20), vec![(P00, e * (1.0 - e))], None),
        mk(
            "[10,10] incoherent",
            incoherent_single_rail(),
            incoherent_single_rail(),
            vec![(P10, e / 2.0), (P00, e * (1.0 - e) / 2.0)],
            None,
        ),
    ]
}

/// Connection above the first level.
pub fn new_scheme(eta: f64) -> Vec<ClosedForm> {
    use ExcitationPattern::*;
    let e2 = eta * eta;
    let d = 1.0 - eta;
    let l = || coherent(BellLabel::PhiPlus);
    let mk = |name, left, right, patterns, logical| ClosedForm {
        scheme: SchemeKind::NewScheme,
        name,
        left,
        right,
        patterns,
        logical,
        exact: None,
    };
    vec![
        mk("[11,11]", l(), l(), vec![(P11, e2 / 2.0)], Some((BellLabel::PhiPlus, e2 / 2.0))),
        mk("[11,10]", l(), pat(P10), vec![(P10, e2 / 4.0)], None),
        mk("[11,00]", l(), pat(P00), vec![], None),
        ClosedForm {
            exact: Some(vec![(P10, e2 * d / 2.0)]),
            ..mk("[11,20par]", l(), pat(P20Par), vec![(P10, e2 * d)], None)
        },
        mk("[11,20perp]", l(), pat(P20Perp), vec![(P10, e2 * d)], None),
        mk("[11,21par]", l(), pat(P21Par), vec![(P21Par, e2 / 4.0), (P11, e2 * d / 2.0)], None),
        ClosedForm {
            exact: Some(vec![(P21Perp, e2 / 4.0), (P11, e2 * d)]),
            ..mk("[11,21perp]", l(), pat(P21Perp), vec![(P21Perp, e2 / 4.0), (P11, e2 * d / 2.0)], None)
        },
        mk("[10,10]", pat(P10), pat(P10), vec![(P00, e2 / 8.0)], None),
        mk("[10,00]", pat(P10), pat(P00), vec![], None),
        mk(
            "[10,21par]",
            pat(P10),
            pat(P21Par),
            vec![(P10, e2 * d / 4.0), (P20Par, e2 / 8.0)],
            None,
        ),
        ClosedForm {
            exact: Some(vec![(P11, e2 / 4.0), (P10, e2 * d / 2.0), (P20Perp, e2 / 8.0)]),
            ..mk(
                "[10,21perp]",
                pat(P10),
                pat(P21Perp),
                vec![(P11, e2 / 4.0), (P10, e2 * d / 4.0), (P20Perp, e2 / 8.0)],
                None,
            )
        },
        mk("[00,21par]", pat(P00), pat(P21Par), vec![], None),
        mk("[00,21perp]", pat(P00), pat(P21Perp), vec![(P10, e2 / 2.0)], None),
    ]
}

pub fn all(eta: f64) -> Vec<ClosedForm> {
    let mut v = dlcz(eta);
    v.extend(new_scheme(eta));
    v
}
