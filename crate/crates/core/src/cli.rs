//! The `sqsum` command line.
//!
//! Settings resolve per key as: command-line flag, then `--config` TOML file,
//! then (for the seed only) the `SQSUM_SEED` environment variable, then the
//! built-in default. The resolved configuration is embedded in every report.
//!
//! Exit codes: 0 success, 1 usage or tool error, 2 protocol abort in
//! single-run mode.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};
use thiserror::Error;

use crate::adversary::{AdversaryStrategy, User};
use crate::analysis::{
    dfs_amplitude_deviation, dfs_statistics, identity_checks, qubit_efficiency_for,
    ref20_efficiency, run_experiment, verify_table1, wilson_interval, ExperimentSpec,
    IdentityCheck, Inputs, IDENTITY_TOLERANCE, Z_95,
};
use crate::channel::{ChannelConfig, ChannelMode, PhaseDistribution};
use crate::protocol::{CheckPolicy, Protocol, ProtocolParams, RunOutcome, Verdict};
use crate::Bits;

pub const SEED_ENV: &str = "SQSUM_SEED";

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_ABORT: i32 = 2;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid value for `{key}`: {message}")]
    Usage { key: String, message: String },
    #[error("{0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Simulation(#[from] crate::Error),
}

fn usage(key: &str, message: impl ToString) -> CliError {
    CliError::Usage {
        key: key.to_string(),
        message: message.to_string(),
    }
}

#[derive(Debug, Parser)]
#[command(name = "sqsum", version, about = "Semiquantum summation simulator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
#[allow(clippy::large_enum_variant)]
pub enum Command {
    /// Run the protocol once, or a seeded batch of trials.
    Run(RunArgs),
    /// Check the algebraic identities, the key table and channel invariance.
    Verify(VerifyArgs),
    /// Print qubit efficiency against the earlier three-party protocol.
    Efficiency(EfficiencyArgs),
    /// Quick end-to-end sanity checks.
    Selftest,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum, Default)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Json,
    Csv,
    Human,
}

/// Run settings as they appear on the command line or in a config file.
#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSettings {
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub r: Option<usize>,
    #[arg(long)]
    pub d: Option<usize>,
    #[arg(long)]
    pub delta: Option<f64>,
    /// Alice's input, most significant bit first, or `random`.
    #[arg(long)]
    pub x: Option<String>,
    /// Bob's input, most significant bit first, or `random`.
    #[arg(long)]
    pub y: Option<String>,
    /// `noiseless` or `dephasing`.
    #[arg(long)]
    pub channel: Option<String>,
    /// Fixed dephasing phase in [0, 2π) instead of a uniform draw.
    #[arg(long)]
    pub phase: Option<f64>,
    #[arg(long)]
    pub adversary: Option<String>,
    /// User attacked by an outside eavesdropper.
    #[arg(long)]
    pub target: Option<String>,
    #[arg(long)]
    pub trials: Option<u64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Eve-check error rate above which the users abort.
    #[arg(long)]
    pub threshold: Option<f64>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// Report destination; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Line-delimited transcript destination (single runs only).
    #[arg(long)]
    pub transcript: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub settings: RunSettings,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// Run only the named check (e.g. `eq5`, `table1`, `dfs-amplitude`).
    #[arg(long)]
    pub only: Option<String>,
    /// Seed for the statistical channel check.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct EfficiencyArgs {
    #[arg(long, value_delimiter = ',', default_values_t = [1.0, 2.0])]
    pub r: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_values_t = [1.0, 2.0])]
    pub d: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_values_t = [1.0, 2.0])]
    pub delta: Vec<f64>,
    /// Pair the lists element-wise instead of taking every combination.
    #[arg(long)]
    pub zip: bool,
    #[arg(long, value_enum, default_value_t = Format::Human)]
    pub format: Format,
}

/// Fully resolved `run` configuration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub params: ProtocolParams,
    pub channel: ChannelConfig,
    pub adversary: AdversaryStrategy,
    pub trials: u64,
    pub seed: u64,
    /// `None` draws fresh random inputs (per trial in batch mode).
    pub x: Option<Bits>,
    pub y: Option<Bits>,
    pub threshold: f64,
    pub format: Format,
    pub out: Option<PathBuf>,
    pub transcript: Option<PathBuf>,
}

impl RunSettings {
    /// Fills every key unset here from `lower`.
    pub fn or(self, lower: RunSettings) -> RunSettings {
        RunSettings {
            n: self.n.or(lower.n),
            r: self.r.or(lower.r),
            d: self.d.or(lower.d),
            delta: self.delta.or(lower.delta),
            x: self.x.or(lower.x),
            y: self.y.or(lower.y),
            channel: self.channel.or(lower.channel),
            phase: self.phase.or(lower.phase),
            adversary: self.adversary.or(lower.adversary),
            target: self.target.or(lower.target),
            trials: self.trials.or(lower.trials),
            seed: self.seed.or(lower.seed),
            threshold: self.threshold.or(lower.threshold),
            format: self.format.or(lower.format),
            out: self.out.or(lower.out),
            transcript: self.transcript.or(lower.transcript),
        }
    }

    pub fn from_toml(text: &str) -> Result<RunSettings, CliError> {
        toml::from_str(text).map_err(|e| usage("config", e.message()))
    }

    pub fn from_env(value: Option<&str>) -> Result<RunSettings, CliError> {
        let seed = value
            .map(|v| v.trim().parse().map_err(|e| usage(SEED_ENV, e)))
            .transpose()?;
        Ok(RunSettings {
            seed,
            ..RunSettings::default()
        })
    }

    pub fn resolve(self) -> Result<RunConfig, CliError> {
        let params = ProtocolParams::new(
            self.n.unwrap_or(8),
            self.r.unwrap_or(1),
            self.d.unwrap_or(1),
            self.delta.unwrap_or(1.0),
        )
        .map_err(|e| usage("n/r/d/delta", e))?;
        let bits = |key: &str, v: Option<String>| -> Result<Option<Bits>, CliError> {
            match v.as_deref() {
                None | Some("random") => Ok(None),
                Some(s) => {
                    let b: Bits = s.parse().map_err(|e| usage(key, e))?;
                    if b.len() != params.n {
                        return Err(usage(
                            key,
                            format!("length {} but n = {}", b.len(), params.n),
                        ));
                    }
                    Ok(Some(b))
                }
            }
        };
        let x = bits("x", self.x)?;
        let y = bits("y", self.y)?;
        if x.is_some() != y.is_some() {
            return Err(usage("x/y", "give both inputs or neither"));
        }
        let mode = match self.channel.as_deref().unwrap_or("noiseless") {
            "noiseless" => ChannelMode::Noiseless,
            "dephasing" | "collective-dephasing" => ChannelMode::CollectiveDephasing,
            other => return Err(usage("channel", format!("unknown mode `{other}`"))),
        };
        let channel = match (mode, self.phase) {
            (ChannelMode::Noiseless, Some(_)) => {
                return Err(usage("phase", "requires the dephasing channel"))
            }
            (ChannelMode::Noiseless, None) => ChannelConfig::noiseless(),
            (ChannelMode::CollectiveDephasing, None) => ChannelConfig::dephasing(),
            (ChannelMode::CollectiveDephasing, Some(p)) => {
                ChannelConfig::fixed_phase(p).map_err(|e| usage("phase", e))?
            }
        };
        let target: User = self
            .target
            .as_deref()
            .unwrap_or("alice")
            .parse()
            .map_err(|e| usage("target", e))?;
        let adversary =
            AdversaryStrategy::from_name(self.adversary.as_deref().unwrap_or("passive"), target)
                .map_err(|e| usage("adversary", e))?;
        let trials = self.trials.unwrap_or(1);
        if trials == 0 {
            return Err(usage("trials", "must be at least 1"));
        }
        let threshold = self.threshold.unwrap_or(0.0);
        if !(0.0..=1.0).contains(&threshold) {
            return Err(usage("threshold", "must lie in [0, 1]"));
        }
        Ok(RunConfig {
            params,
            channel,
            adversary,
            trials,
            seed: self.seed.unwrap_or(0),
            x,
            y,
            threshold,
            format: self.format.unwrap_or_default(),
            out: self.out,
            transcript: self.transcript,
        })
    }
}

impl RunConfig {
    pub fn policy(&self) -> CheckPolicy {
        CheckPolicy {
            eve_error_threshold: self.threshold,
        }
    }

    pub fn experiment(&self) -> ExperimentSpec {
        let inputs = match (&self.x, &self.y) {
            (Some(x), Some(y)) => Inputs::Fixed {
                x: x.clone(),
                y: y.clone(),
            },
            _ => Inputs::Random,
        };
        ExperimentSpec {
            params: self.params,
            adversary: self.adversary,
            channel: self.channel,
            trials: self.trials,
            seed: self.seed,
            inputs,
            policy: self.policy(),
        }
    }
}

/// Resolves `run` settings with the documented precedence.
pub fn resolve_run(args: RunArgs, env_seed: Option<&str>) -> Result<RunConfig, CliError> {
    let file = match &args.config {
        Some(path) => RunSettings::from_toml(
            &fs::read_to_string(path)
                .map_err(|e| usage("config", format!("{}: {e}", path.display())))?,
        )?,
        None => RunSettings::default(),
    };
    args.settings
        .or(file)
        .or(RunSettings::from_env(env_seed)?)
        .resolve()
}

/// One transcript record per line.
pub fn write_transcript(path: &Path, outcome: &RunOutcome) -> Result<(), CliError> {
    let mut out = std::io::BufWriter::new(fs::File::create(path)?);
    for g in &outcome.transcript {
        serde_json::to_writer(&mut out, g).map_err(std::io::Error::from)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

fn single_run(cfg: &RunConfig) -> Result<(Value, i32), CliError> {
    let mut rng = crate::analysis::trial_rng(cfg.seed, 0);
    let (x, y) = match (&cfg.x, &cfg.y) {
        (Some(x), Some(y)) => (x.clone(), y.clone()),
        _ => (
            Bits::random(cfg.params.n, &mut rng),
            Bits::random(cfg.params.n, &mut rng),
        ),
    };
    let protocol = Protocol::new(cfg.params)
        .map_err(crate::Error::from)?
        .with_channel(cfg.channel)
        .with_policy(cfg.policy());
    let mut adversary = cfg.adversary.build();
    let outcome = protocol.run(&x, &y, adversary.as_mut(), &mut rng)?;
    if let Some(path) = &cfg.transcript {
        write_transcript(path, &outcome)?;
    }
    let detected = outcome
        .verdict
        .abort_reason()
        .is_some_and(|r| r.is_detection()) as u64;
    let mut breakdown = Map::new();
    breakdown.insert(
        match outcome.verdict.abort_reason() {
            None => "success".to_string(),
            Some(r) => serde_json::to_value(r)
                .ok()
                .and_then(|v| v.as_str().map(str::to_string))
                .unwrap_or_default(),
        },
        json!(1),
    );
    let nd = (cfg.params.n * cfg.params.d) as u64;
    let report = json!({
        "config": cfg,
        "inputs": { "x": x, "y": y },
        "verdict": outcome.verdict,
        "result_bits": outcome.verdict.result(),
        "correct": outcome.verdict.result().map(|r| *r == &x ^ &y),
        "detection_rate": detected as f64,
        "ci95": wilson_interval(detected, 1, Z_95),
        "analytic_prediction": crate::analysis::analytic_detection(&cfg.adversary, nd).ok(),
        "abort_breakdown": breakdown,
        "transcript_path": cfg.transcript,
        "eve_check": outcome.eve_check,
        "resources": outcome.resources,
    });
    let code = match outcome.verdict {
        Verdict::Success { .. } => EXIT_OK,
        Verdict::Abort { .. } => EXIT_ABORT,
    };
    Ok((report, code))
}

fn batch_run(cfg: &RunConfig) -> Result<Value, CliError> {
    if cfg.transcript.is_some() {
        return Err(usage(
            "transcript",
            "only available for single runs (trials = 1)",
        ));
    }
    let r = run_experiment(&cfg.experiment())?;
    Ok(json!({
        "config": cfg,
        "verdict": Value::Null,
        "result_bits": Value::Null,
        "detection_rate": r.detection_rate,
        "ci95": r.ci95,
        "analytic_prediction": r.analytic_prediction,
        "abort_breakdown": r.abort_breakdown,
        "transcript_path": Value::Null,
        "trials": r.trials,
        "detections": r.detections,
        "check_aborts": r.check_aborts,
        "correctness_failures": r.correctness_failures,
        "key_leakage": r.key_leakage,
        "eve_check": r.eve_check,
        "eve": r.eve,
        "mean_both_sift": r.mean_both_sift,
        "wall_time_s": r.wall_time_s,
    }))
}

/// Executes `run`; returns the report and the exit code.
pub fn cmd_run(cfg: &RunConfig) -> Result<(Value, i32), CliError> {
    if cfg.trials == 1 {
        single_run(cfg)
    } else {
        Ok((batch_run(cfg)?, EXIT_OK))
    }
}

/// Dotted-path view of a JSON document, in document order.
pub fn flatten(value: &Value) -> Vec<(String, String)> {
    fn walk(prefix: &str, v: &Value, out: &mut Vec<(String, String)>) {
        match v {
            Value::Object(m) => {
                for (k, v) in m {
                    let key = if prefix.is_empty() {
                        k.clone()
                    } else {
                        format!("{prefix}.{k}")
                    };
                    walk(&key, v, out);
                }
            }
            Value::Array(a) => {
                for (i, v) in a.iter().enumerate() {
                    walk(&format!("{prefix}.{i}"), v, out);
                }
            }
            Value::Null => out.push((prefix.to_string(), String::new())),
            Value::String(s) => out.push((prefix.to_string(), s.clone())),
            other => out.push((prefix.to_string(), other.to_string())),
        }
    }
    let mut out = Vec::new();
    walk("", value, &mut out);
    out
}

/// Renders a report; CSV and human output are both derived from [`flatten`].
pub fn render(report: &Value, format: Format) -> Result<String, CliError> {
    match format {
        Format::Json => {
            let mut s = serde_json::to_string_pretty(report).map_err(std::io::Error::from)?;
            s.push('\n');
            Ok(s)
        }
        Format::Csv => {
            let flat = flatten(report);
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(flat.iter().map(|(k, _)| k))
                .and_then(|_| w.write_record(flat.iter().map(|(_, v)| v)))
                .map_err(|e| std::io::Error::other(e.to_string()))?;
            let bytes = w
                .into_inner()
                .map_err(|e| std::io::Error::other(e.to_string()))?;
            Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
        }
        Format::Human => {
            let flat = flatten(report);
            let width = flat.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
            Ok(flat
                .iter()
                .map(|(k, v)| format!("{k:<width$}  {}\n", if v.is_empty() { "-" } else { v }))
                .collect())
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Status {
    Pass,
    Warn,
    Fail,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckLine {
    pub name: String,
    pub status: Status,
    pub detail: String,
}

impl std::fmt::Display for CheckLine {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let tag = match self.status {
            Status::Pass => "PASS",
            Status::Warn => "WARN",
            Status::Fail => "FAIL",
        };
        write!(f, "{tag} {}: {}", self.name, self.detail)
    }
}

/// Names accepted by `verify --only`.
pub fn verify_check_names() -> Vec<String> {
    let mut names: Vec<String> = (1..=9).map(|i| format!("eq{i}")).collect();
    names.extend(["table1", "dfs-amplitude", "dfs-statistical"].map(String::from));
    names
}

/// Runs the verification suite over the given identity checks.
pub fn verify_checks(
    identities: &[IdentityCheck],
    only: Option<&str>,
    seed: u64,
) -> Result<Vec<CheckLine>, CliError> {
    if let Some(name) = only {
        if !verify_check_names().iter().any(|n| n == name) {
            return Err(usage("only", format!("unknown check `{name}`")));
        }
    }
    let wanted = |name: &str| only.is_none_or(|o| o == name);
    let mut lines = Vec::new();
    for check in identities.iter().filter(|c| wanted(&c.name)) {
        let dev = check.max_deviation();
        let status = if dev < IDENTITY_TOLERANCE {
            Status::Pass
        } else {
            Status::Fail
        };
        let detail = match status {
            Status::Pass => format!("{} forms agree, max deviation {dev:.1e}", check.forms.len()),
            _ => format!(
                "form `{}` deviates by {dev:.3e}",
                check.worst_form().unwrap_or("?")
            ),
        };
        lines.push(CheckLine {
            name: check.name.clone(),
            status,
            detail,
        });
    }
    if wanted("table1") {
        let report = verify_table1();
        let (status, detail) = if !report.passed() {
            (
                Status::Fail,
                format!(
                    "r != x xor y in rows {:?}, mixed announcement classes in rows {:?}",
                    report.sum_failures, report.class_failures
                ),
            )
        } else if report.mismatches.is_empty() {
            (Status::Pass, "16 rows reproduced".to_string())
        } else {
            let cells: Vec<String> = report
                .mismatches
                .iter()
                .map(|m| {
                    let row = &report.rows[m.row];
                    format!(
                        "row (x={}, y={}, {:?}, {:?}) {} printed {} derived {}",
                        row.x, row.y, row.alice, row.bob, m.column, m.printed, m.derived
                    )
                })
                .collect();
            (
                Status::Warn,
                format!(
                    "16 rows, r = x xor y everywhere; printed typo: {}",
                    cells.join("; ")
                ),
            )
        };
        lines.push(CheckLine {
            name: "table1".into(),
            status,
            detail,
        });
    }
    if wanted("dfs-amplitude") {
        let phases: Vec<f64> = (0..64)
            .map(|k| k as f64 * std::f64::consts::TAU / 64.0 + 0.01)
            .collect();
        let dev = dfs_amplitude_deviation(&phases);
        lines.push(CheckLine {
            name: "dfs-amplitude".into(),
            status: if dev < 1e-12 {
                Status::Pass
            } else {
                Status::Fail
            },
            detail: format!("max deviation up to global phase {dev:.1e}"),
        });
    }
    if wanted("dfs-statistical") {
        let params = ProtocolParams::new(8, 1, 1, 1.0).expect("valid parameters");
        let stats = dfs_statistics(&params, 10_000, seed)?;
        let ok = stats.tvd <= 0.02 && stats.check_aborts == 0;
        lines.push(CheckLine {
            name: "dfs-statistical".into(),
            status: if ok { Status::Pass } else { Status::Fail },
            detail: format!(
                "TVD {:.4} over {} group samples, {} check aborts",
                stats.tvd, stats.samples, stats.check_aborts
            ),
        });
    }
    Ok(lines)
}

fn exit_for(lines: &[CheckLine]) -> i32 {
    if lines.iter().any(|l| l.status == Status::Fail) {
        EXIT_USAGE
    } else {
        EXIT_OK
    }
}

pub fn cmd_verify(args: &VerifyArgs, out: &mut dyn Write) -> Result<i32, CliError> {
    let lines = verify_checks(
        &identity_checks(),
        args.only.as_deref(),
        args.seed.unwrap_or(0),
    )?;
    for l in &lines {
        writeln!(out, "{l}")?;
    }
    Ok(exit_for(&lines))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EfficiencyRow {
    pub r: f64,
    pub d: f64,
    pub delta: f64,
    pub this: f64,
    pub three_party: f64,
    pub ratio: f64,
}

/// `1/(6q+6)` and `2/(9(32+r+d+δ)+6)` as unreduced fractions when the
/// parameters are integers.
fn fractions(r: f64, d: f64, delta: f64) -> Option<(String, String)> {
    let s = r + d + delta;
    (s.fract() == 0.0).then(|| {
        let s = s as u64;
        let this = 6 * (4 + s) + 6;
        let den = 9 * (32 + s) + 6;
        (format!("1/{this}"), format!("2/{den}"))
    })
}

pub fn efficiency_rows(args: &EfficiencyArgs) -> Result<Vec<EfficiencyRow>, CliError> {
    for (key, list) in [("r", &args.r), ("d", &args.d), ("delta", &args.delta)] {
        if let Some(v) = list.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
            return Err(usage(key, format!("{v} is not positive")));
        }
    }
    let mut triples = Vec::new();
    if args.zip {
        if args.r.len() != args.d.len() || args.r.len() != args.delta.len() {
            return Err(usage("zip", "lists must have equal length"));
        }
        for i in 0..args.r.len() {
            triples.push((args.r[i], args.d[i], args.delta[i]));
        }
    } else {
        for &r in &args.r {
            for &d in &args.d {
                for &delta in &args.delta {
                    triples.push((r, d, delta));
                }
            }
        }
    }
    Ok(triples
        .into_iter()
        .map(|(r, d, delta)| {
            let this = qubit_efficiency_for(r, d, delta);
            let three_party = ref20_efficiency(r, d, delta);
            EfficiencyRow {
                r,
                d,
                delta,
                this,
                three_party,
                ratio: this / three_party,
            }
        })
        .collect())
}

pub fn cmd_efficiency(args: &EfficiencyArgs, out: &mut dyn Write) -> Result<i32, CliError> {
    let rows = efficiency_rows(args)?;
    match args.format {
        Format::Json => {
            serde_json::to_writer_pretty(&mut *out, &rows).map_err(std::io::Error::from)?;
            writeln!(out)?;
        }
        Format::Csv => {
            let mut w = csv::Writer::from_writer(&mut *out);
            for row in &rows {
                w.serialize(row)
                    .map_err(|e| std::io::Error::other(e.to_string()))?;
            }
            w.flush()?;
        }
        Format::Human => {
            writeln!(
                out,
                "{:>5} {:>5} {:>5}  {:>18}  {:>18}  {:>7}",
                "r", "d", "delta", "this protocol", "three-party", "ratio"
            )?;
            for row in &rows {
                let (a, b) = fractions(row.r, row.d, row.delta)
                    .map(|(a, b)| (format!("{a} = "), format!("{b} = ")))
                    .unwrap_or_default();
                writeln!(
                    out,
                    "{:>5} {:>5} {:>5}  {:>18}  {:>18}  {:>7.3}",
                    row.r,
                    row.d,
                    row.delta,
                    format!("{a}{:.5}", row.this),
                    format!("{b}{:.5}", row.three_party),
                    row.ratio
                )?;
            }
        }
    }
    Ok(EXIT_OK)
}

/// Small, fast end-to-end checks; exit 0 iff all pass.
pub fn cmd_selftest(out: &mut dyn Write) -> Result<i32, CliError> {
    let mut lines = verify_checks(&identity_checks(), None, 0)?
        .into_iter()
        .filter(|l| l.name != "dfs-statistical")
        .collect::<Vec<_>>();
    let params = ProtocolParams::new(8, 1, 1, 1.0).expect("valid parameters");
    for channel in [ChannelConfig::noiseless(), ChannelConfig::dephasing()] {
        let spec =
            ExperimentSpec::new(params, AdversaryStrategy::Passive, 200, 1).with_channel(channel);
        let r = run_experiment(&spec)?;
        let ok = r.check_aborts == 0 && r.correctness_failures == 0;
        let mode = match channel.phase_distribution {
            PhaseDistribution::FixedPhase(_) => "fixed",
            PhaseDistribution::UniformOnCircle => match channel.mode {
                ChannelMode::Noiseless => "noiseless",
                ChannelMode::CollectiveDephasing => "dephasing",
            },
        };
        lines.push(CheckLine {
            name: format!("honest-{mode}"),
            status: if ok { Status::Pass } else { Status::Fail },
            detail: format!(
                "{} runs, {} check aborts, {} wrong results",
                r.trials, r.check_aborts, r.correctness_failures
            ),
        });
    }
    let attack = ProtocolParams::new(1, 1, 16, 1.0).expect("valid parameters");
    let r = run_experiment(&ExperimentSpec::new(
        attack,
        AdversaryStrategy::TpAttack1,
        2000,
        1,
    ))?;
    let predicted = r.analytic_prediction.unwrap_or(f64::NAN);
    lines.push(CheckLine {
        name: "tp-attack-1".into(),
        status: if (r.detection_rate - predicted).abs() < 0.05 {
            Status::Pass
        } else {
            Status::Fail
        },
        detail: format!(
            "detection {:.4} vs predicted {predicted:.4}",
            r.detection_rate
        ),
    });
    for l in &lines {
        writeln!(out, "{l}")?;
    }
    Ok(exit_for(&lines))
}

fn dispatch(cli: Cli, out: &mut dyn Write, env_seed: Option<&str>) -> Result<i32, CliError> {
    match cli.command {
        Command::Run(args) => {
            let cfg = resolve_run(args, env_seed)?;
            let (report, code) = cmd_run(&cfg)?;
            let text = render(&report, cfg.format)?;
            match &cfg.out {
                Some(path) => fs::write(path, text)?,
                None => out.write_all(text.as_bytes())?,
            }
            Ok(code)
        }
        Command::Verify(args) => cmd_verify(&args, out),
        Command::Efficiency(args) => cmd_efficiency(&args, out),
        Command::Selftest => cmd_selftest(out),
    }
}

/// Parses `args` (including the program name) and runs the command, writing
/// results to `out` and diagnostics to `err`. Returns the exit code.
pub fn run_cli<I, T>(
    args: I,
    out: &mut dyn Write,
    err: &mut dyn Write,
    env_seed: Option<&str>,
) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = if e.use_stderr() {
                write!(err, "{}", e.render())
            } else {
                write!(out, "{}", e.render())
            };
            return code;
        }
    };
    match dispatch(cli, out, env_seed) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            EXIT_USAGE
        }
    }
}
