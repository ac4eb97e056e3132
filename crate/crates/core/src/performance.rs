//! Time accounting and the nested repeater chain.
//!
//! A chain over `L = 2^n L0` starts from elementary pairs and applies `n`
//! connection levels, with purification steps inserted per the schedule.
//! Every two-pair step costs `t ← 1.5 t / P`. The deliverable is the
//! polarization pair obtained by post-selection at use time: two parallel
//! single-rail chains, or one photon per node of a two-cell pair. That last
//! step fixes the reported fidelity and costs no time.

use rand::Rng;
use rand_distr::{Distribution, Geometric};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::noise::{
    check_prob, dark_count_error, depolarizing_channel, NoiseParams, DEFAULT_C_FIBER_KM_S, DEFAULT_L_ATT_KM,
};
use crate::pattern::{BellLabel, PatternState, SchemeKind};
use crate::protocol::{eng_with, enc, enp, postselect_pme, readout, EngModel, EnpKind};

/// Two-pair waiting overhead per step.
pub const WAIT_FACTOR: f64 = 1.5;

/// Station half-spacings searched by [`optimize`].
pub const L0_GRID_KM: [f64; 6] = [5.0, 10.0, 20.0, 40.0, 80.0, 160.0];

/// Purification inserted after connection level `after_level`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnpStep {
    pub after_level: u32,
    pub kind: EnpKind,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RepeaterConfig {
    pub scheme: SchemeKind,
    /// Final distance, km.
    #[serde(rename = "L")]
    pub l_km: f64,
    /// Half-spacing between stations, km.
    #[serde(rename = "L0")]
    pub l0_km: f64,
    pub p_c: f64,
    pub noise: NoiseParams,
    #[serde(rename = "L_att")]
    pub l_att_km: f64,
    /// Signal speed in fiber, km/s.
    pub c_fiber: f64,
    pub enp_schedule: Vec<EnpStep>,
    pub eng_model: EngModel,
}

impl Default for RepeaterConfig {
    fn default() -> Self {
        RepeaterConfig {
            scheme: SchemeKind::NewScheme,
            l_km: 1280.0,
            l0_km: 40.0,
            p_c: 8.1e-3,
            noise: NoiseParams::default(),
            l_att_km: DEFAULT_L_ATT_KM,
            c_fiber: DEFAULT_C_FIBER_KM_S,
            enp_schedule: Vec::new(),
            eng_model: EngModel::default(),
        }
    }
}

impl RepeaterConfig {
    /// Number of connection levels, `log2(L / L0)`.
    pub fn levels(&self) -> Result<u32> {
        nesting_levels(self.l_km, self.l0_km)
    }

    pub fn validate(&self) -> Result<()> {
        self.noise.validate()?;
        if !(self.p_c > 0.0 && self.p_c < 1.0) {
            return Err(Error::ProbabilityOutOfRange { name: "p_c", value: self.p_c });
        }
        if !(self.l_att_km > 0.0) || !(self.c_fiber > 0.0) {
            return Err(Error::InvalidArgument("L_att and c_fiber must be positive".into()));
        }
        let n = self.levels()?;
        if self.scheme == SchemeKind::NewScheme && n == 0 {
            return Err(Error::InvalidNesting(
                "the two-cell scheme needs at least one connection level (L > L0)".into(),
            ));
        }
        for step in &self.enp_schedule {
            if self.scheme != SchemeKind::NewScheme {
                return Err(Error::SchemeMismatch("purification needs the two-cell scheme".into()));
            }
            if step.after_level == 0 || step.after_level > n {
                return Err(Error::InvalidNesting(format!(
                    "purification after level {} outside 1..={n}",
                    step.after_level
                )));
            }
        }
        Ok(())
    }
}

/// `log2(L / L0)` when it is a non-negative integer.
pub fn nesting_levels(l_km: f64, l0_km: f64) -> Result<u32> {
    if !(l0_km > 0.0) || !(l_km > 0.0) || !l_km.is_finite() {
        return Err(Error::InvalidNesting(format!("L = {l_km}, L0 = {l0_km}")));
    }
    let r = l_km / l0_km;
    let n = r.log2().round();
    if !(0.0..=62.0).contains(&n) || ((n.exp2() - r) / r).abs() > 1e-9 {
        return Err(Error::InvalidNesting(format!("L / L0 = {r} is not a power of two")));
    }
    Ok(n as u32)
}

/// `(L0 / c) e^{L0/L_att} / (p_c η)`.
pub fn elementary_time(p_c: f64, eta: f64, l0_km: f64, l_att_km: f64, c_fiber: f64) -> f64 {
    l0_km / c_fiber * (l0_km / l_att_km).exp() / (p_c * eta)
}

/// `η²(3 − 2η) / (2(2 − η)⁴)`.
pub fn enc_success_estimate(eta: f64) -> Result<f64> {
    if !(eta > 0.0 && eta <= 1.0) {
        return Err(Error::ProbabilityOutOfRange { name: "eta", value: eta });
    }
    Ok(eta * eta * (3.0 - 2.0 * eta) / (2.0 * (2.0 - eta).powi(4)))
}

/// Exponent of `t ∝ L^α` when `p_c ∝ L0/L`.
pub fn scaling_exponent(eta: f64) -> Result<f64> {
    Ok(1.0 + WAIT_FACTOR.log2() - enc_success_estimate(eta)?.log2())
}

/// Closed-form time estimate from a stable connection success rate.
pub fn empirical_time(cfg: &RepeaterConfig) -> Result<f64> {
    cfg.validate()?;
    let eta = cfg.noise.eta;
    let t0 = elementary_time(cfg.p_c, eta, cfg.l0_km, cfg.l_att_km, cfg.c_fiber);
    let exponent = (WAIT_FACTOR / enc_success_estimate(eta)?).log2();
    Ok(t0 * (cfg.l_km / cfg.l0_km).powf(exponent))
}

/// Which operation produced a [`LevelRecord`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StepKind {
    Generation,
    Connection,
    Purification(EnpKind),
}

impl StepKind {
    pub fn name(self) -> String {
        match self {
            StepKind::Generation => "eng".into(),
            StepKind::Connection => "enc".into(),
            StepKind::Purification(k) => format!("enp_{k}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LevelRecord {
    pub level: u32,
    pub step: StepKind,
    pub p_logic: f64,
    pub p_vac: f64,
    pub p_multi: f64,
    /// Logical Bell weights in `Φ+, Φ−, Ψ+, Ψ−` order.
    pub bell: [f64; 4],
    /// Fidelity of the polarization pair this state would yield now.
    pub fidelity: f64,
    pub success_prob: f64,
    /// Cumulative average time, s.
    pub t_avg_s: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunResult {
    pub per_level: Vec<LevelRecord>,
    pub t_avg_s: f64,
    pub fidelity: f64,
}

impl RunResult {
    /// Success probabilities of the timed two-pair steps, in order.
    pub fn step_probabilities(&self) -> Vec<f64> {
        self.per_level
            .iter()
            .filter(|r| r.step != StepKind::Generation)
            .map(|r| r.success_prob)
            .collect()
    }
}

/// Target Bell label of a stored pair at a given level.
fn target_label(scheme: SchemeKind, level: u32) -> BellLabel {
    // Fresh two-cell pairs carry the opposite-polarization correlation; the
    // first connection maps it onto Φ+.
    if scheme == SchemeKind::NewScheme && level == 0 {
        BellLabel::PsiPlus
    } else {
        BellLabel::PhiPlus
    }
}

/// Post-selected fidelity of the polarization pair derived from `state`, or
/// zero when nothing survives.
pub fn final_fidelity(state: &PatternState, eta: f64, target: BellLabel) -> Result<f64> {
    let out = match state.scheme {
        SchemeKind::Dlcz => postselect_pme(state, state, eta)?,
        SchemeKind::NewScheme => readout(state, eta)?,
    };
    if !(out.success_prob > 0.0) {
        return Ok(0.0);
    }
    out.normalized()?.fidelity(target)
}

struct Chain<'a> {
    cfg: &'a RepeaterConfig,
    records: Vec<LevelRecord>,
    t: f64,
}

impl Chain<'_> {
    fn record(&mut self, level: u32, step: StepKind, state: &PatternState, success_prob: f64) -> Result<()> {
        let (p_logic, p_vac, p_multi) = state.aggregate();
        let fidelity = final_fidelity(state, self.cfg.noise.eta, target_label(state.scheme, level))?;
        self.records.push(LevelRecord {
            level,
            step,
            p_logic,
            p_vac,
            p_multi,
            bell: state.logical.weights,
            fidelity,
            success_prob,
            t_avg_s: self.t,
        });
        Ok(())
    }

    /// Applies one timed two-pair step; `None` once the chain diverges.
    fn advance(&mut self, p: f64) -> bool {
        if p > 0.0 {
            self.t *= WAIT_FACTOR / p;
            true
        } else {
            self.t = f64::INFINITY;
            false
        }
    }
}

fn diverged(chain: Chain<'_>) -> RunResult {
    RunResult {
        per_level: chain.records,
        t_avg_s: f64::INFINITY,
        fidelity: 0.0,
    }
}

/// Deterministic chain with the `1.5 t / P` waiting recursion.
pub fn simulate_chain(cfg: &RepeaterConfig) -> Result<RunResult> {
    cfg.validate()?;
    let n = cfg.levels()?;
    let noise = &cfg.noise;
    let eta = noise.eta;
    let scheme = cfg.scheme;
    let per_step_error = depolarizing_channel(scheme, noise.p_misalign)
        .then(&depolarizing_channel(scheme, dark_count_error(noise.p_dark, noise.eta_s)));
    let mut chain = Chain {
        cfg,
        records: Vec::new(),
        t: elementary_time(cfg.p_c, eta, cfg.l0_km, cfg.l_att_km, cfg.c_fiber),
    };
    let mut state = eng_with(scheme, cfg.p_c, noise, cfg.l0_km, &cfg.eng_model)?.out;
    chain.record(0, StepKind::Generation, &state, 1.0)?;

    for level in 1..=n {
        let out = enc(scheme, &state, &state, eta, level)?;
        if !chain.advance(out.success_prob) {
            return Ok(diverged(chain));
        }
        state = out.normalized()?.apply_bell_channel(&per_step_error);
        chain.record(level, StepKind::Connection, &state, out.success_prob)?;

        for step in cfg.enp_schedule.iter().filter(|s| s.after_level == level) {
            let out = enp(step.kind, &state, &state, eta)?;
            if !chain.advance(out.success_prob) {
                return Ok(diverged(chain));
            }
            state = out.normalized()?.apply_bell_channel(&per_step_error);
            chain.record(level, StepKind::Purification(step.kind), &state, out.success_prob)?;
        }
    }

    let fidelity = final_fidelity(&state, eta, BellLabel::PhiPlus)?;
    Ok(RunResult {
        t_avg_s: chain.t,
        fidelity,
        per_level: chain.records,
    })
}

/// Monte-Carlo waiting time: geometric attempt counts for elementary pairs
/// and the later of two independent sub-chains before every two-pair step.
/// Step success probabilities come from [`simulate_chain`]. Returns the
/// sample mean and its standard error.
pub fn monte_carlo_time<R: Rng>(cfg: &RepeaterConfig, samples: usize, rng: &mut R) -> Result<(f64, f64)> {
    if samples < 2 {
        return Err(Error::InvalidArgument("need at least two samples".into()));
    }
    let run = simulate_chain(cfg)?;
    if !run.t_avg_s.is_finite() {
        return Ok((f64::INFINITY, 0.0));
    }
    let eta = cfg.noise.eta;
    let attempt = cfg.l0_km / cfg.c_fiber;
    let p_attempt = (cfg.p_c * eta * (-cfg.l0_km / cfg.l_att_km).exp()).min(1.0);
    let geo = Geometric::new(p_attempt).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let probs = run.step_probabilities();

    fn sample<R: Rng>(k: usize, probs: &[f64], attempt: f64, geo: &Geometric, rng: &mut R) -> f64 {
        if k == 0 {
            return (geo.sample(rng) as f64 + 1.0) * attempt;
        }
        let mut t = 0.0;
        loop {
            let a = sample(k - 1, probs, attempt, geo, rng);
            let b = sample(k - 1, probs, attempt, geo, rng);
            t += a.max(b);
            if rng.gen::<f64>() < probs[k - 1] {
                return t;
            }
        }
    }

    let (mut sum, mut sq) = (0.0, 0.0);
    for _ in 0..samples {
        let t = sample(probs.len(), &probs, attempt, &geo, rng);
        sum += t;
        sq += t * t;
    }
    let n = samples as f64;
    let mean = sum / n;
    let var = (sq / n - mean * mean) * n / (n - 1.0);
    Ok((mean, (var.max(0.0) / n).sqrt()))
}

/// Logarithmic `p_c` grid with `per_decade` points over `[lo, hi]`.
pub fn log_grid(lo: f64, hi: f64, per_decade: usize) -> Vec<f64> {
    let steps = ((hi / lo).log10() * per_decade as f64 + 1e-9).floor() as usize;
    (0..=steps)
        .map(|k| lo * 10f64.powf(k as f64 / per_decade as f64))
        .collect()
}

/// Default optimizer grid: 64 points per decade over `[1e-5, 0.5]`.
pub fn default_pc_grid() -> Vec<f64> {
    log_grid(1e-5, 0.5, 64)
}

/// Search space and fixed parameters for [`optimize_with`].
#[derive(Clone, Debug, PartialEq)]
pub struct SearchSpace {
    pub l0_km: Vec<f64>,
    pub p_c: Vec<f64>,
    /// Template for everything that is not searched.
    pub base: RepeaterConfig,
}

impl SearchSpace {
    pub fn new(scheme: SchemeKind, l_km: f64, noise: NoiseParams) -> Self {
        SearchSpace {
            l0_km: L0_GRID_KM.to_vec(),
            p_c: default_pc_grid(),
            base: RepeaterConfig {
                scheme,
                l_km,
                noise,
                ..RepeaterConfig::default()
            },
        }
    }

    /// Grid points with valid nesting, in `(L0, p_c)` order.
    fn configs(&self) -> Vec<RepeaterConfig> {
        let mut out = Vec::new();
        for &l0 in &self.l0_km {
            let cfg = RepeaterConfig {
                l0_km: l0,
                ..self.base.clone()
            };
            if cfg.validate().is_err() && cfg.clone().with_pc(0.5).validate().is_err() {
                continue;
            }
            for &p_c in &self.p_c {
                out.push(cfg.clone().with_pc(p_c));
            }
        }
        out
    }
}

impl RepeaterConfig {
    fn with_pc(mut self, p_c: f64) -> Self {
        self.p_c = p_c;
        self
    }
}

/// One evaluated grid point.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GridPoint {
    #[serde(rename = "L0")]
    pub l0_km: f64,
    pub p_c: f64,
    pub t_avg_s: f64,
    pub fidelity: f64,
}

/// Evaluates every valid grid point in parallel; output order is grid order.
pub fn evaluate_grid(space: &SearchSpace) -> Result<Vec<GridPoint>> {
    space
        .configs()
        .par_iter()
        .map(|cfg| {
            let run = simulate_chain(cfg)?;
            Ok(GridPoint {
                l0_km: cfg.l0_km,
                p_c: cfg.p_c,
                t_avg_s: run.t_avg_s,
                fidelity: run.fidelity,
            })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Optimum {
    pub config: RepeaterConfig,
    pub result: RunResult,
}

/// Fastest grid point with `F ≥ f_target`; `None` when infeasible.
pub fn optimize(scheme: SchemeKind, l_km: f64, f_target: f64, noise: &NoiseParams) -> Result<Option<Optimum>> {
    optimize_with(&SearchSpace::new(scheme, l_km, *noise), f_target)
}

pub fn optimize_with(space: &SearchSpace, f_target: f64) -> Result<Option<Optimum>> {
    if !(f_target > 0.0 && f_target < 1.0) {
        return Err(Error::InvalidArgument(format!("target fidelity {f_target} outside (0, 1)")));
    }
    let points = evaluate_grid(space)?;
    // Grid order is (L0, p_c) ascending, so the first strict minimum wins ties.
    let best = points
        .iter()
        .filter(|p| p.fidelity >= f_target && p.t_avg_s.is_finite())
        .fold(None::<&GridPoint>, |acc, p| match acc {
            Some(b) if b.t_avg_s <= p.t_avg_s => Some(b),
            _ => Some(p),
        });
    let Some(best) = best else { return Ok(None) };
    let config = RepeaterConfig {
        l0_km: best.l0_km,
        p_c: best.p_c,
        ..space.base.clone()
    };
    let result = simulate_chain(&config)?;
    Ok(Some(Optimum { config, result }))
}

/// One point of a time-fidelity curve.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TfPoint {
    pub p_c: f64,
    #[serde(rename = "L0")]
    pub l0_km: f64,
    pub t_avg_s: f64,
    pub fidelity: f64,
}

/// For each `p_c`, the `L0` giving the shortest time, then the Pareto
/// frontier of those points: no kept point is both slower and less faithful
/// than another. Sorted by increasing fidelity.
pub fn tf_curve(space: &SearchSpace) -> Result<Vec<TfPoint>> {
    if space.p_c.is_empty() {
        return Err(Error::InvalidArgument("empty p_c sweep".into()));
    }
    let points = evaluate_grid(space)?;
    let mut per_pc: Vec<TfPoint> = Vec::new();
    for &p_c in &space.p_c {
        let best = points
            .iter()
            .filter(|g| g.p_c == p_c && g.t_avg_s.is_finite() && g.fidelity > 0.0)
            .fold(None::<&GridPoint>, |acc, g| match acc {
                Some(b) if b.t_avg_s <= g.t_avg_s => Some(b),
                _ => Some(g),
            });
        if let Some(g) = best {
            per_pc.push(TfPoint {
                p_c,
                l0_km: g.l0_km,
                t_avg_s: g.t_avg_s,
                fidelity: g.fidelity,
            });
        }
    }
    Ok(pareto_frontier(per_pc))
}

/// Points not dominated in (lower time, higher fidelity), by increasing fidelity.
pub fn pareto_frontier(mut points: Vec<TfPoint>) -> Vec<TfPoint> {
    points.sort_by(|a, b| {
        b.fidelity
            .total_cmp(&a.fidelity)
            .then(a.t_avg_s.total_cmp(&b.t_avg_s))
    });
    let mut out: Vec<TfPoint> = Vec::new();
    let mut fastest = f64::INFINITY;
    for p in points {
        if p.t_avg_s < fastest {
            fastest = p.t_avg_s;
            out.push(p);
        }
    }
    out.reverse();
    out
}

/// Least-squares slope of `y` against `x`.
pub fn fit_slope(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(Error::InvalidArgument("slope fit needs two or more paired points".into()));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidArgument("degenerate abscissae".into()));
    }
    Ok(sxy / sxx)
}

/// One row of a distance sweep with `p_c ∝ L0/L`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScalingRow {
    #[serde(rename = "L")]
    pub l_km: f64,
    pub p_c: f64,
    pub t_sim_s: f64,
    pub t_empirical_s: f64,
    pub fidelity: f64,
}

/// Simulated and closed-form times over `distances`, with
/// `p_c = p_ref · L_ref / L` at fixed `L0`.
pub fn scaling_sweep(base: &RepeaterConfig, distances: &[f64], p_ref: f64, l_ref: f64) -> Result<Vec<ScalingRow>> {
    check_prob("p_ref", p_ref)?;
    distances
        .par_iter()
        .map(|&l| {
            let cfg = RepeaterConfig {
                l_km: l,
                p_c: (p_ref * l_ref / l).min(0.5),
                ..base.clone()
            };
            let run = simulate_chain(&cfg)?;
            Ok(ScalingRow {
                l_km: l,
                p_c: cfg.p_c,
                t_sim_s: run.t_avg_s,
                t_empirical_s: empirical_time(&cfg)?,
                fidelity: run.fidelity,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, rel: f64) -> bool {
        (a - b).abs() <= rel * b.abs()
    }

    #[test]
    fn elementary_time_examples() {
        assert!(close(elementary_time(1.0, 1.0, 1.0, f64::INFINITY, 1.0), 1.0, 1e-15));
        assert!(close(elementary_time(0.0081, 0.9, 40.0, 20.0, 2e5), 0.2027, 1e-3));
        let t = elementary_time(0.01, 0.9, 40.0, 20.0, 2e5);
        assert!(close(elementary_time(0.005, 0.9, 40.0, 20.0, 2e5), 2.0 * t, 1e-14));
    }

    #[test]
    fn enc_estimate_examples() {
        assert!(close(enc_success_estimate(1.0).unwrap(), 0.5, 1e-15));
        assert!((enc_success_estimate(0.9).unwrap() - 0.3319).abs() < 1e-4);
        assert!((enc_success_estimate(0.5).unwrap() - 0.049_383).abs() < 1e-6);
        assert!(enc_success_estimate(0.0).is_err());
        assert!((scaling_exponent(0.9).unwrap() - 3.18).abs() < 5e-3);
    }

    #[test]
    fn empirical_time_collapses_at_one_link() {
        let cfg = RepeaterConfig {
            l_km: 40.0,
            l0_km: 20.0,
            ..RepeaterConfig::default()
        };
        let t0 = elementary_time(cfg.p_c, 0.9, 20.0, 20.0, 2e5);
        let exp = (WAIT_FACTOR / enc_success_estimate(0.9).unwrap()).log2();
        assert!(close(empirical_time(&cfg).unwrap(), t0 * 2f64.powf(exp), 1e-12));
        let at_table = empirical_time(&RepeaterConfig::default()).unwrap();
        assert!(close(at_table, 381.8, 2e-3), "{at_table}");
    }

    #[test]
    fn nesting() {
        assert_eq!(nesting_levels(1280.0, 40.0).unwrap(), 5);
        assert_eq!(nesting_levels(20.0, 20.0).unwrap(), 0);
        assert!(nesting_levels(100.0, 40.0).is_err());
        assert!(nesting_levels(10.0, 20.0).is_err());
        let bad = RepeaterConfig {
            l_km: 40.0,
            l0_km: 40.0,
            ..RepeaterConfig::default()
        };
        assert!(matches!(bad.validate(), Err(Error::InvalidNesting(_))));
    }

    #[test]
    fn noiseless_chain_is_perfect() {
        for scheme in [SchemeKind::NewScheme, SchemeKind::Dlcz] {
            let cfg = RepeaterConfig {
                scheme,
                l_km: 320.0,
                l0_km: 20.0,
                p_c: 1e-9,
                noise: NoiseParams::ideal(),
                ..RepeaterConfig::default()
            };
            let run = simulate_chain(&cfg).unwrap();
            assert!((run.fidelity - 1.0).abs() < 1e-6, "{scheme}: {}", run.fidelity);
            for r in &run.per_level {
                assert!((r.fidelity - 1.0).abs() < 1e-6, "{scheme} level {}", r.level);
            }
            if scheme == SchemeKind::NewScheme {
                for r in run.per_level.iter().filter(|r| r.level >= 2) {
                    assert!((r.success_prob - 0.5).abs() < 1e-6);
                }
            }
        }
    }

    #[test]
    fn times_increase_along_the_chain() {
        let run = simulate_chain(&RepeaterConfig::default()).unwrap();
        for w in run.per_level.windows(2) {
            assert!(w[1].t_avg_s > w[0].t_avg_s);
        }
        assert!(run.per_level.iter().all(|r| (0.0..=1.0).contains(&r.fidelity)));
    }

    #[test]
    fn purification_schedule_checks() {
        let cfg = RepeaterConfig {
            enp_schedule: vec![EnpStep {
                after_level: 9,
                kind: EnpKind::Phase,
            }],
            ..RepeaterConfig::default()
        };
        assert!(cfg.validate().is_err());
        let dl = RepeaterConfig {
            scheme: SchemeKind::Dlcz,
            enp_schedule: vec![EnpStep {
                after_level: 1,
                kind: EnpKind::Bit,
            }],
            ..RepeaterConfig::default()
        };
        assert!(matches!(dl.validate(), Err(Error::SchemeMismatch(_))));
    }

    #[test]
    fn grid_shape() {
        let g = default_pc_grid();
        assert_eq!(g.len(), 301);
        assert!(close(g[0], 1e-5, 1e-12));
        assert!(*g.last().unwrap() <= 0.5);
        assert!(close(g[64], 1e-4, 1e-12));
    }

    #[test]
    fn frontier_drops_dominated_points() {
        let p = |t: f64, f: f64| TfPoint {
            p_c: 0.0,
            l0_km: 0.0,
            t_avg_s: t,
            fidelity: f,
        };
        let out = pareto_frontier(vec![p(1.0, 0.5), p(2.0, 0.4), p(3.0, 0.9), p(0.5, 0.6)]);
        let ts: Vec<f64> = out.iter().map(|x| x.t_avg_s).collect();
        assert_eq!(ts, vec![0.5, 3.0]);
    }

    #[test]
    fn slope_fit() {
        let xs = [0.0, 1.0, 2.0, 3.0];
        let ys: Vec<f64> = xs.iter().map(|x| 2.5 * x - 1.0).collect();
        assert!((fit_slope(&xs, &ys).unwrap() - 2.5).abs() < 1e-12);
    }

    #[test]
    fn monte_carlo_brackets_recursion() {
        use rand::SeedableRng;
        let cfg = RepeaterConfig {
            l_km: 160.0,
            ..RepeaterConfig::default()
        };
        let det = simulate_chain(&cfg).unwrap().t_avg_s;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let (mc, se) = monte_carlo_time(&cfg, 400, &mut rng).unwrap();
        assert!(se < 0.2 * mc);
        assert!(mc > 0.25 * det && mc < 4.0 * det, "mc {mc} det {det}");
    }
}
