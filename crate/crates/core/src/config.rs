//! Run configuration: a TOML document with `[run]`, `[sweep]`, `[repeater]`
//! and `[repeater.noise]` sections, plus the compact purification schedule
//! syntax accepted on the command line.

use serde::{Deserialize, Deserializer, Serialize};

use crate::error::{Error, Result};
use crate::performance::{EnpStep, RepeaterConfig};
use crate::protocol::EnpKind;

/// Seed used when none is given.
pub const DEFAULT_SEED: u64 = 0x5eed_2007;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Csv,
    Json,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    pub seed: u64,
    /// Worker threads for sweeps; 0 uses every core.
    pub workers: usize,
    pub format: OutputFormat,
}

impl Default for RunSection {
    fn default() -> Self {
        RunSection {
            seed: DEFAULT_SEED,
            workers: 0,
            format: OutputFormat::Csv,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    /// Fidelity floor for `optimize` and `table`.
    pub f_target: f64,
    /// Final distances for `table` and `scaling`, km.
    pub distances_km: Vec<f64>,
    /// Efficiencies for `curve`.
    pub curve_etas: Vec<f64>,
    /// Reference point of `scaling`: `p_c = p_ref · L_ref / L`.
    pub p_ref: f64,
    pub l_ref_km: f64,
    /// Monte-Carlo waiting-time samples for `simulate`; 0 skips it.
    pub mc_samples: usize,
}

impl Default for SweepSection {
    fn default() -> Self {
        SweepSection {
            f_target: 0.9,
            distances_km: vec![20.0, 40.0, 80.0, 160.0, 320.0, 640.0, 1280.0, 2560.0, 5120.0, 10240.0],
            curve_etas: vec![0.90, 0.95],
            p_ref: 8.1e-3,
            l_ref_km: 1280.0,
            mc_samples: 0,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub run: RunSection,
    pub sweep: SweepSection,
    #[serde(deserialize_with = "repeater_section")]
    pub repeater: RepeaterConfig,
}

/// `[repeater]` with `enp_schedule` given either as tables or as a string.
fn repeater_section<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<RepeaterConfig, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Schedule {
        Text(String),
        Steps(Vec<EnpStep>),
    }
    let mut table = toml::Table::deserialize(d)?;
    let schedule = table.remove("enp_schedule");
    let mut cfg = RepeaterConfig::deserialize(toml::Value::Table(table)).map_err(serde::de::Error::custom)?;
    if let Some(v) = schedule {
        cfg.enp_schedule = match Schedule::deserialize(v).map_err(serde::de::Error::custom)? {
            Schedule::Text(s) => parse_enp_schedule(&s).map_err(serde::de::Error::custom)?,
            Schedule::Steps(s) => s,
        };
    }
    Ok(cfg)
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::InvalidArgument(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    /// Everything but the nesting of `L / L0`, which sweeps choose per point.
    pub fn validate(&self) -> Result<()> {
        let s = &self.sweep;
        if !(s.f_target > 0.0 && s.f_target < 1.0) {
            return Err(Error::InvalidArgument(format!("f_target = {} outside (0, 1)", s.f_target)));
        }
        if s.distances_km.iter().any(|l| !(*l > 0.0 && l.is_finite())) {
            return Err(Error::InvalidArgument("distances must be positive".into()));
        }
        if s.curve_etas.iter().any(|e| !(*e > 0.0 && *e <= 1.0)) {
            return Err(Error::InvalidArgument("curve efficiencies must lie in (0, 1]".into()));
        }
        if !(s.p_ref > 0.0 && s.p_ref < 1.0) || !(s.l_ref_km > 0.0 && s.l_ref_km.is_finite()) {
            return Err(Error::InvalidArgument("p_ref must lie in (0, 1) and l_ref_km be positive".into()));
        }
        let r = &self.repeater;
        r.noise.validate()?;
        if !(r.p_c > 0.0 && r.p_c < 1.0) {
            return Err(Error::ProbabilityOutOfRange { name: "p_c", value: r.p_c });
        }
        if !(r.l_km > 0.0 && r.l_km.is_finite()) || !(r.l0_km > 0.0 && r.l0_km.is_finite()) {
            return Err(Error::InvalidArgument("L and L0 must be positive".into()));
        }
        Ok(())
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("run configuration serializes")
    }
}

/// Parses `none`, or a comma-separated list of `kind@level` or
/// `kind-after-level` items such as `phase-after-2` or `bit@1,phase@2`.
pub fn parse_enp_schedule(text: &str) -> Result<Vec<EnpStep>> {
    let text = text.trim();
    if text.eq_ignore_ascii_case("none") {
        return Ok(Vec::new());
    }
    let mut steps = Vec::new();
    for item in text.split(',') {
        let item = item.trim();
        let (kind, level) = item
            .split_once('@')
            .or_else(|| item.split_once("-after-"))
            .ok_or_else(|| Error::Parse(format!("purification step `{item}` is not `kind@level`")))?;
        let kind: EnpKind = kind.trim().to_ascii_lowercase().parse()?;
        let after_level: u32 = level
            .trim()
            .parse()
            .map_err(|_| Error::Parse(format!("bad level in `{item}`")))?;
        if after_level == 0 {
            return Err(Error::Parse(format!("levels start at 1 in `{item}`")));
        }
        steps.push(EnpStep { after_level, kind });
    }
    Ok(steps)
}

/// Inverse of [`parse_enp_schedule`].
pub fn format_enp_schedule(steps: &[EnpStep]) -> String {
    if steps.is_empty() {
        return "none".into();
    }
    steps
        .iter()
        .map(|s| format!("{}@{}", s.kind, s.after_level))
        .collect::<Vec<_>>()
        .join(",")
}
