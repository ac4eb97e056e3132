//! Command execution behind the `repeater` binary. Every command writes its
//! tables into the output directory and a short summary to the given writer.
//! Outputs depend only on the manifest, so reruns are byte-identical.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::json;

use crate::config::{format_enp_schedule, parse_enp_schedule, OutputFormat, RunConfig};
use crate::error::{Error, Result};
use crate::pattern::SchemeKind;
use crate::performance::{
    empirical_time, fit_slope, monte_carlo_time, nesting_levels, optimize_with, scaling_exponent, scaling_sweep,
    simulate_chain, tf_curve, EnpStep, Optimum, RepeaterConfig, RunResult, SearchSpace,
};
use crate::protocol::EnpKind;
use crate::verify;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    OracleVerify,
    Simulate,
    Optimize,
    Table,
    Curve,
    Scaling,
    /// Prints the default configuration.
    Defaults,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::OracleVerify => "oracle_verify",
            Command::Simulate => "simulate",
            Command::Optimize => "optimize",
            Command::Table => "table",
            Command::Curve => "curve",
            Command::Scaling => "scaling",
            Command::Defaults => "defaults",
        }
    }
}

#[derive(Clone, Debug)]
pub struct Manifest {
    pub command: Command,
    pub config: RunConfig,
    pub out: PathBuf,
}

/// Command-line overrides applied on top of the configuration file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub scheme: Option<SchemeKind>,
    pub enp: Option<String>,
    pub format: Option<OutputFormat>,
}

impl Manifest {
    pub fn new(command: Command, config: Option<&Path>, out: PathBuf, over: &Overrides) -> Result<Self> {
        let mut config = match config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        if let Some(s) = over.seed {
            config.run.seed = s;
        }
        if let Some(w) = over.workers {
            config.run.workers = w;
        }
        if let Some(f) = over.format {
            config.run.format = f;
        }
        if let Some(s) = over.scheme {
            config.repeater.scheme = s;
        }
        if let Some(e) = &over.enp {
            config.repeater.enp_schedule = parse_enp_schedule(e)?;
        }
        config.validate()?;
        Ok(Manifest { command, config, out })
    }
}

/// Result of a command that ran to completion.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Outcome {
    Success,
    VerificationFailed,
    Infeasible,
}

impl Outcome {
    pub fn exit_code(self) -> u8 {
        match self {
            Outcome::Success => 0,
            Outcome::VerificationFailed => 1,
            Outcome::Infeasible => 2,
        }
    }
}

/// Exit status for configuration and input errors.
pub const EXIT_BAD_CONFIG: u8 = 3;

/// Per-level CSV row.
#[derive(Clone, Debug, Serialize)]
pub struct LevelRow {
    pub scheme: SchemeKind,
    #[serde(rename = "L_km")]
    pub l_km: f64,
    #[serde(rename = "L0_km")]
    pub l0_km: f64,
    pub p_c: f64,
    pub eta: f64,
    #[serde(rename = "D")]
    pub d: f64,
    pub level: u32,
    pub step: String,
    pub p_logic: f64,
    pub p_vac: f64,
    pub p_multi: f64,
    #[serde(rename = "F")]
    pub fidelity: f64,
    #[serde(rename = "P_success")]
    pub success_prob: f64,
    pub t_avg_s: f64,
}

/// A CSV row type with its header.
pub trait Columns: Serialize {
    const COLUMNS: &'static [&'static str];
}

impl Columns for LevelRow {
    const COLUMNS: &'static [&'static str] = &[
        "scheme", "L_km", "L0_km", "p_c", "eta", "D", "level", "step", "p_logic", "p_vac", "p_multi", "F",
        "P_success", "t_avg_s",
    ];
}

pub fn level_rows(cfg: &RepeaterConfig, run: &RunResult) -> Vec<LevelRow> {
    run.per_level
        .iter()
        .map(|r| LevelRow {
            scheme: cfg.scheme,
            l_km: cfg.l_km,
            l0_km: cfg.l0_km,
            p_c: cfg.p_c,
            eta: cfg.noise.eta,
            d: cfg.noise.d,
            level: r.level,
            step: r.step.name(),
            p_logic: r.p_logic,
            p_vac: r.p_vac,
            p_multi: r.p_multi,
            fidelity: r.fidelity,
            success_prob: r.success_prob,
            t_avg_s: r.t_avg_s,
        })
        .collect()
}

/// One optimized distance; unset fields mark an infeasible row.
#[derive(Clone, Debug, Serialize)]
pub struct TableRow {
    pub scheme: SchemeKind,
    #[serde(rename = "L_km")]
    pub l_km: f64,
    #[serde(rename = "L0_km")]
    pub l0_km: Option<f64>,
    pub p_c: Option<f64>,
    pub eta: f64,
    #[serde(rename = "D")]
    pub d: f64,
    pub levels: Option<u32>,
    #[serde(rename = "F")]
    pub fidelity: Option<f64>,
    pub t_avg_s: Option<f64>,
    pub status: &'static str,
}

impl Columns for TableRow {
    const COLUMNS: &'static [&'static str] =
        &["scheme", "L_km", "L0_km", "p_c", "eta", "D", "levels", "F", "t_avg_s", "status"];
}

#[derive(Clone, Debug, Serialize)]
pub struct CurveRow {
    pub scheme: SchemeKind,
    pub enp: String,
    #[serde(rename = "L_km")]
    pub l_km: f64,
    #[serde(rename = "L0_km")]
    pub l0_km: f64,
    pub p_c: f64,
    pub eta: f64,
    #[serde(rename = "D")]
    pub d: f64,
    #[serde(rename = "F")]
    pub fidelity: f64,
    pub t_avg_s: f64,
}

impl Columns for CurveRow {
    const COLUMNS: &'static [&'static str] = &["scheme", "enp", "L_km", "L0_km", "p_c", "eta", "D", "F", "t_avg_s"];
}

#[derive(Clone, Debug, Serialize)]
pub struct ScalingCsvRow {
    pub scheme: SchemeKind,
    #[serde(rename = "L_km")]
    pub l_km: f64,
    #[serde(rename = "L0_km")]
    pub l0_km: f64,
    pub p_c: f64,
    pub eta: f64,
    #[serde(rename = "F")]
    pub fidelity: f64,
    pub t_avg_s: f64,
    pub t_empirical_s: f64,
}

impl Columns for ScalingCsvRow {
    const COLUMNS: &'static [&'static str] =
        &["scheme", "L_km", "L0_km", "p_c", "eta", "F", "t_avg_s", "t_empirical_s"];
}

/// Header comment of the generated defaults file.
const DEFAULTS_HEADER: &str = "# Default run configuration, generated by `repeater defaults`.\n\
# Every key is optional; omitted keys take the values below.\n\n";

pub fn defaults_reference() -> String {
    format!("{DEFAULTS_HEADER}{}", RunConfig::default().to_toml_string())
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::InvalidArgument(format!("{}: {e}", path.display()))
}

struct Sink<'a> {
    dir: &'a Path,
    name: &'static str,
    format: OutputFormat,
}

impl Sink<'_> {
    /// Writes rows and summary: `name.csv` plus `name.summary.json`, or a
    /// single `name.json`.
    fn emit<R: Columns>(&self, rows: &[R], summary: serde_json::Value) -> Result<()> {
        fs::create_dir_all(self.dir).map_err(|e| io_err(self.dir, e))?;
        match self.format {
            OutputFormat::Csv => {
                let path = self.dir.join(format!("{}.csv", self.name));
                let mut w = csv::WriterBuilder::new()
                    .has_headers(false)
                    .from_path(&path)
                    .map_err(|e| io_err(&path, e))?;
                w.write_record(R::COLUMNS).map_err(|e| io_err(&path, e))?;
                for r in rows {
                    w.serialize(r).map_err(|e| io_err(&path, e))?;
                }
                w.flush().map_err(|e| io_err(&path, e))?;
                self.json(&format!("{}.summary.json", self.name), &summary)
            }
            OutputFormat::Json => self.json(
                &format!("{}.json", self.name),
                &json!({ "rows": rows, "summary": summary }),
            ),
        }
    }

    fn json(&self, file: &str, value: &serde_json::Value) -> Result<()> {
        let path = self.dir.join(file);
        let text = serde_json::to_string_pretty(value).map_err(|e| io_err(&path, e))?;
        fs::write(&path, text + "\n").map_err(|e| io_err(&path, e))
    }

    fn text(&self, file: &str, text: &str) -> Result<()> {
        fs::create_dir_all(self.dir).map_err(|e| io_err(self.dir, e))?;
        let path = self.dir.join(file);
        fs::write(&path, text).map_err(|e| io_err(&path, e))
    }
}

/// Runs the manifest on a pool of `run.workers` threads.
pub fn execute(m: &Manifest, log: &mut (dyn Write + Send)) -> Result<Outcome> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(m.config.run.workers)
        .build()
        .map_err(|e| Error::InvalidArgument(e.to_string()))?;
    pool.install(|| run(m, log))
}

fn run(m: &Manifest, log: &mut (dyn Write + Send)) -> Result<Outcome> {
    let sink = Sink {
        dir: &m.out,
        name: m.command.name(),
        format: m.config.run.format,
    };
    let cfg = &m.config;
    let mut say = |s: String| {
        let _ = writeln!(log, "{s}");
    };
    match m.command {
        Command::Defaults => {
            say(defaults_reference().trim_end().to_string());
            Ok(Outcome::Success)
        }
        Command::OracleVerify => {
            let report = verify::run_all()?;
            let text = report.to_text();
            say(text.trim_end().to_string());
            sink.text("oracle_verify.txt", &text)?;
            sink.text("coefficient_tables.txt", &verify::dump_tables(cfg.repeater.noise.eta)?)?;
            sink.json("oracle_verify.json", &serde_json::to_value(&report).map_err(|e| Error::Parse(e.to_string()))?)?;
            Ok(if report.passed() {
                Outcome::Success
            } else {
                Outcome::VerificationFailed
            })
        }
        Command::Simulate => {
            let rc = &cfg.repeater;
            let run = simulate_chain(rc)?;
            let mut summary = json!({
                "scheme": rc.scheme,
                "L_km": rc.l_km,
                "L0_km": rc.l0_km,
                "p_c": rc.p_c,
                "enp": format_enp_schedule(&rc.enp_schedule),
                "F": run.fidelity,
                "t_avg_s": finite(run.t_avg_s),
                "t_empirical_s": finite(empirical_time(rc)?),
            });
            if cfg.sweep.mc_samples > 0 {
                let mut rng = ChaCha8Rng::seed_from_u64(cfg.run.seed);
                let (mean, stderr) = monte_carlo_time(rc, cfg.sweep.mc_samples, &mut rng)?;
                summary["monte_carlo"] = json!({
                    "samples": cfg.sweep.mc_samples,
                    "seed": cfg.run.seed,
                    "t_mean_s": finite(mean),
                    "t_stderr_s": stderr,
                });
            }
            say(format!(
                "{} L={} L0={} p_c={}: F={:.4} t_avg={:.4e} s",
                rc.scheme, rc.l_km, rc.l0_km, rc.p_c, run.fidelity, run.t_avg_s
            ));
            sink.emit(&level_rows(rc, &run), summary)?;
            Ok(Outcome::Success)
        }
        Command::Optimize => {
            let space = search_space(&cfg.repeater, cfg.repeater.l_km);
            match optimize_with(&space, cfg.sweep.f_target)? {
                Some(Optimum { config, result }) => {
                    say(format!(
                        "{} L={}: L0={} p_c={:.3e} F={:.4} t_avg={:.4e} s",
                        config.scheme, config.l_km, config.l0_km, config.p_c, result.fidelity, result.t_avg_s
                    ));
                    let summary = json!({
                        "feasible": true,
                        "scheme": config.scheme,
                        "L_km": config.l_km,
                        "L0_km": config.l0_km,
                        "p_c": config.p_c,
                        "F_target": cfg.sweep.f_target,
                        "F": result.fidelity,
                        "t_avg_s": result.t_avg_s,
                    });
                    sink.emit(&level_rows(&config, &result), summary)?;
                    Ok(Outcome::Success)
                }
                None => {
                    say(format!(
                        "{} L={}: no configuration reaches F >= {}",
                        cfg.repeater.scheme, cfg.repeater.l_km, cfg.sweep.f_target
                    ));
                    let summary = json!({ "feasible": false, "F_target": cfg.sweep.f_target });
                    sink.emit::<LevelRow>(&[], summary)?;
                    Ok(Outcome::Infeasible)
                }
            }
        }
        Command::Table => {
            let rc = &cfg.repeater;
            let mut rows = Vec::new();
            for &l in &cfg.sweep.distances_km {
                let row = match optimize_with(&search_space(rc, l), cfg.sweep.f_target)? {
                    Some(Optimum { config, result }) => TableRow {
                        scheme: rc.scheme,
                        l_km: l,
                        l0_km: Some(config.l0_km),
                        p_c: Some(config.p_c),
                        eta: rc.noise.eta,
                        d: rc.noise.d,
                        levels: Some(config.levels()?),
                        fidelity: Some(result.fidelity),
                        t_avg_s: Some(result.t_avg_s),
                        status: "ok",
                    },
                    None => TableRow {
                        scheme: rc.scheme,
                        l_km: l,
                        l0_km: None,
                        p_c: None,
                        eta: rc.noise.eta,
                        d: rc.noise.d,
                        levels: None,
                        fidelity: None,
                        t_avg_s: None,
                        status: "infeasible",
                    },
                };
                say(match (row.t_avg_s, row.l0_km, row.p_c, row.fidelity) {
                    (Some(t), Some(l0), Some(p), Some(f)) => {
                        format!("L={l:>7}  t_avg={t:.3e} s  L0={l0}  p_c={p:.2e}  F={:.1}%", f * 100.0)
                    }
                    _ => format!("L={l:>7}  infeasible"),
                });
                rows.push(row);
            }
            let infeasible = rows.iter().filter(|r| r.status != "ok").count();
            sink.emit(
                &rows,
                json!({ "scheme": rc.scheme, "F_target": cfg.sweep.f_target, "infeasible_rows": infeasible }),
            )?;
            Ok(Outcome::Success)
        }
        Command::Curve => {
            let phase2 = vec![EnpStep {
                after_level: 2,
                kind: EnpKind::Phase,
            }];
            let variants = [
                (SchemeKind::Dlcz, Vec::new()),
                (SchemeKind::NewScheme, Vec::new()),
                (SchemeKind::NewScheme, phase2),
            ];
            let mut rows = Vec::new();
            let mut summary = Vec::new();
            for &eta in &cfg.sweep.curve_etas {
                for (scheme, schedule) in &variants {
                    let base = RepeaterConfig {
                        scheme: *scheme,
                        enp_schedule: schedule.clone(),
                        noise: crate::noise::NoiseParams {
                            eta,
                            ..cfg.repeater.noise
                        },
                        ..cfg.repeater.clone()
                    };
                    let enp = format_enp_schedule(schedule);
                    let points = tf_curve(&search_space(&base, base.l_km))?;
                    let max_f = points.iter().map(|p| p.fidelity).fold(0.0, f64::max);
                    let hi: Vec<_> = points.iter().filter(|p| p.fidelity > 0.9 && p.fidelity < 0.99).collect();
                    let slope = fit_slope(
                        &hi.iter().map(|p| (1.0 - p.fidelity).ln()).collect::<Vec<_>>(),
                        &hi.iter().map(|p| p.t_avg_s.ln()).collect::<Vec<_>>(),
                    )
                    .ok();
                    say(format!("eta={eta} {scheme} enp={enp}: {} points, max F={max_f:.4}", points.len()));
                    summary.push(json!({
                        "scheme": scheme, "enp": enp, "eta": eta, "points": points.len(),
                        "max_F": max_f, "high_F_slope": slope,
                    }));
                    rows.extend(points.into_iter().map(|p| CurveRow {
                        scheme: *scheme,
                        enp: enp.clone(),
                        l_km: base.l_km,
                        l0_km: p.l0_km,
                        p_c: p.p_c,
                        eta,
                        d: base.noise.d,
                        fidelity: p.fidelity,
                        t_avg_s: p.t_avg_s,
                    }));
                }
            }
            sink.emit(&rows, json!({ "L_km": cfg.repeater.l_km, "curves": summary }))?;
            Ok(Outcome::Success)
        }
        Command::Scaling => {
            let rc = &cfg.repeater;
            let min_levels = if rc.scheme == SchemeKind::NewScheme { 1 } else { 0 };
            let distances: Vec<f64> = cfg
                .sweep
                .distances_km
                .iter()
                .copied()
                .filter(|&l| nesting_levels(l, rc.l0_km).is_ok_and(|n| n >= min_levels))
                .collect();
            let rows = scaling_sweep(rc, &distances, cfg.sweep.p_ref, cfg.sweep.l_ref_km)?;
            let ln = |xs: Vec<f64>| xs.into_iter().map(f64::ln).collect::<Vec<_>>();
            let slope = fit_slope(
                &ln(rows.iter().map(|r| r.l_km).collect()),
                &ln(rows.iter().map(|r| r.t_sim_s).collect()),
            )
            .ok();
            let alpha = scaling_exponent(rc.noise.eta)?;
            say(format!("{} L0={}: fitted slope {slope:?}, closed-form exponent {alpha:.4}", rc.scheme, rc.l0_km));
            let csv_rows: Vec<ScalingCsvRow> = rows
                .iter()
                .map(|r| ScalingCsvRow {
                    scheme: rc.scheme,
                    l_km: r.l_km,
                    l0_km: rc.l0_km,
                    p_c: r.p_c,
                    eta: rc.noise.eta,
                    fidelity: r.fidelity,
                    t_avg_s: r.t_sim_s,
                    t_empirical_s: r.t_empirical_s,
                })
                .collect();
            sink.emit(&csv_rows, json!({ "fitted_slope": slope, "alpha": alpha, "L0_km": rc.l0_km }))?;
            Ok(Outcome::Success)
        }
    }
}

/// Search over `L0` and `p_c` at distance `l_km`, everything else from `base`.
fn search_space(base: &RepeaterConfig, l_km: f64) -> SearchSpace {
    let mut space = SearchSpace::new(base.scheme, l_km, base.noise);
    space.base = RepeaterConfig { l_km, ..base.clone() };
    space
}

/// JSON has no infinity; divergent times become null.
fn finite(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}
