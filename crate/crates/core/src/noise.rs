//! Imperfection models: efficiency, phase diffusion, misalignment, dark counts.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pattern::{BellChannel, BellLabel, SchemeKind};

pub const DEFAULT_L_ATT_KM: f64 = 20.0;
pub const DEFAULT_C_FIBER_KM_S: f64 = 2.0e5;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseParams {
    /// Combined retrieval and detection efficiency.
    pub eta: f64,
    /// Phase diffusion coefficient, rad²/km.
    #[serde(rename = "D")]
    pub d: f64,
    /// Depolarizing probability per connection or purification step.
    pub p_misalign: f64,
    /// Dark-count probability per detection window.
    pub p_dark: f64,
    /// Signal detection efficiency in the dark-count error term.
    pub eta_s: f64,
}

impl Default for NoiseParams {
    fn default() -> Self {
        NoiseParams {
            eta: 0.9,
            d: 0.0,
            p_misalign: 0.0,
            p_dark: 0.0,
            eta_s: 0.9,
        }
    }
}

impl NoiseParams {
    pub fn ideal() -> Self {
        NoiseParams {
            eta: 1.0,
            eta_s: 1.0,
            ..Self::default()
        }
    }

    pub fn with_eta(eta: f64) -> Self {
        NoiseParams { eta, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, value) in [
            ("eta", self.eta),
            ("p_misalign", self.p_misalign),
            ("p_dark", self.p_dark),
            ("eta_s", self.eta_s),
        ] {
            check_prob(name, value)?;
        }
        if self.eta == 0.0 {
            return Err(Error::InvalidArgument("eta must be positive".into()));
        }
        if !(self.d >= 0.0) || !self.d.is_finite() {
            return Err(Error::InvalidArgument(format!("D = {} must be a non-negative number", self.d)));
        }
        Ok(())
    }
}

pub fn check_prob(name: &'static str, value: f64) -> Result<()> {
    if (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(Error::ProbabilityOutOfRange { name, value })
    }
}

/// `⟨sin²(δ/2)⟩` for Gaussian `δ` with variance `2 D L0`.
pub fn phase_error_prob(d: f64, l0: f64) -> Result<f64> {
    if !(d >= 0.0) {
        return Err(Error::InvalidArgument(format!("negative diffusion coefficient {d}")));
    }
    if !(l0 > 0.0) {
        return Err(Error::InvalidArgument(format!("L0 = {l0} must be positive")));
    }
    Ok(0.5 * (-(d * l0)).exp_m1().abs())
}

/// Sample mean and standard error of `sin²(δ/2)` over Gaussian draws.
pub fn phase_error_monte_carlo<R: Rng>(d: f64, l0: f64, samples: usize, rng: &mut R) -> Result<(f64, f64)> {
    if samples < 2 {
        return Err(Error::InvalidArgument("need at least two samples".into()));
    }
    let normal = Normal::new(0.0, (2.0 * d * l0).sqrt()).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let (mut sum, mut sq) = (0.0, 0.0);
    for _ in 0..samples {
        let v = (normal.sample(rng) / 2.0).sin().powi(2);
        sum += v;
        sq += v * v;
    }
    let n = samples as f64;
    let mean = sum / n;
    let var = (sq / n - mean * mean) * n / (n - 1.0);
    Ok((mean, (var.max(0.0) / n).sqrt()))
}

/// `(1 − p)·id + p·uniform` over the scheme's logical labels.
pub fn depolarizing_channel(scheme: SchemeKind, p: f64) -> BellChannel {
    let labels = scheme.bell_labels();
    let share = p / labels.len() as f64;
    let mut m = [[0.0; 4]; 4];
    for j in BellLabel::ALL {
        if !labels.contains(&j) {
            m[j.index()][j.index()] = 1.0;
            continue;
        }
        for i in labels {
            m[i.index()][j.index()] = share;
        }
        m[j.index()][j.index()] += 1.0 - p;
    }
    BellChannel { m }
}

/// Depolarizing misalignment on the four Bell labels.
pub fn misalignment_channel(p_misalign: f64) -> BellChannel {
    depolarizing_channel(SchemeKind::NewScheme, p_misalign)
}

/// Flips the relative phase with probability `q`: Φ+↔Φ−, Ψ+↔Ψ−.
pub fn phase_flip_channel(q: f64) -> BellChannel {
    let mut m = [[0.0; 4]; 4];
    for l in BellLabel::ALL {
        let (b, x) = l.bits();
        let flipped = BellLabel::from_bits(b, x ^ 1);
        m[l.index()][l.index()] += 1.0 - q;
        m[flipped.index()][l.index()] += q;
    }
    BellChannel { m }
}

pub fn dark_count_error(p_dark: f64, eta_s: f64) -> f64 {
    p_dark * (1.0 - eta_s)
}


#[cfg(test)]
mod props {
    use super::*;
    use crate::pattern::LogicalBlock;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn phase_error_monotone_and_bounded(d in 0.0f64..1.0, l in 0.1f64..200.0, k in 1.0f64..3.0) {
            let q = phase_error_prob(d, l).unwrap();
            prop_assert!((0.0..0.5).contains(&q) || q == 0.5);
            prop_assert!(phase_error_prob(d * k, l).unwrap() >= q);
            prop_assert!(phase_error_prob(d, l * k).unwrap() >= q);
        }

        #[test]
        fn channels_preserve_blocks(w in prop::array::uniform4(0.0f64..1.0), p in 0.0f64..=1.0) {
            let b = LogicalBlock { weights: w }.normalized(SchemeKind::NewScheme);
            for ch in [misalignment_channel(p), phase_flip_channel(p), depolarizing_channel(SchemeKind::Dlcz, p)] {
                let out = ch.apply(&b);
                prop_assert!((out.total() - 1.0).abs() < 1e-12);
                prop_assert!(out.weights.iter().all(|&x| x >= 0.0));
            }
        }
    }
}
