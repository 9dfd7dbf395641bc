//! The `experiment` runner: flat JSON config with flag overrides, parallel
//! trial fan-out with per-trial derived seeds, fixed-schema row output, and a
//! summary that pits the measured statistics against the protocol ceilings
//! and the lower bounds.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use sidelink_core::bounds::{bound_consistency_report, ConsistencyReport};
use sidelink_core::dist::JointDistribution;
use sidelink_core::engine::{RunStats, TrialRecord};
use sidelink_core::protocols::{
    const_round_bits_bound, monte_carlo_trial, staged_bits_bound, tuned_bits_bound,
    JointProtocol, ProtocolKind,
};
use sidelink_core::{HashBackend, SharedSeed};

use crate::presets;
use crate::seed::resolve_seed;

/// Fixed row schema, version 1.
pub const ROWS_HEADER: &str = "trial,x,y,bits_ab,bits_ba,rounds,correct";
/// Schema tag carried by every summary document.
pub const SUMMARY_SCHEMA: &str = "sidelink.summary.v1";
/// Empirical ceiling on mean rounds asserted for the constant-round protocol.
pub const MEAN_ROUNDS_CEILING: f64 = 4.05;

/// Flat experiment configuration. Every field is optional so a config file
/// and command-line flags can be overlaid; flags win.
#[derive(Clone, Default, Serialize, Deserialize, Debug)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Preset name (see `sidelink presets`) ...
    pub preset: Option<String>,
    /// ... or a path to a distribution JSON file.
    pub dist: Option<PathBuf>,
    pub n: Option<f64>,
    pub delta: Option<f64>,
    pub preset_eps: Option<f64>,
    pub nx: Option<f64>,
    pub ny: Option<f64>,
    /// `staged`, `tuned`, or `const-round`.
    pub protocol: Option<String>,
    /// Fresh hash values per stage; `staged` only.
    pub stage_width: Option<u32>,
    pub eps: Option<f64>,
    pub trials: Option<u64>,
    pub seed: Option<String>,
    /// `true-random` or `keyed-prf`.
    pub backend: Option<String>,
    /// Per-trial row output path; stdout when absent.
    pub out: Option<PathBuf>,
    /// Summary JSON path; stdout when absent.
    pub summary: Option<PathBuf>,
    /// Row format: `csv` or `json-lines`.
    pub format: Option<String>,
    /// Optional one-row CSV emission of the aggregate statistics.
    pub stats_csv: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        serde_json::from_str(&text).context("parsing experiment config")
    }

    /// Field-wise overlay; values present in `flags` replace `self`'s.
    pub fn overlay(mut self, flags: ExperimentConfig) -> Self {
        macro_rules! take {
            ($($field:ident),*) => {
                $(if flags.$field.is_some() { self.$field = flags.$field; })*
            };
        }
        take!(
            preset, dist, n, delta, preset_eps, nx, ny, protocol, stage_width, eps, trials,
            seed, backend, out, summary, format, stats_csv
        );
        self
    }
}

/// Row output format.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum RowFormat {
    Csv,
    JsonLines,
}

/// A fully validated experiment ready to run.
pub struct ResolvedExperiment {
    pub joint: JointDistribution,
    pub dist_label: String,
    /// `(n, delta)` when the distribution is the delta-noise preset, enabling
    /// the one-way and two-way bound comparisons.
    pub delta_noise: Option<(u32, f64)>,
    pub kind: ProtocolKind,
    pub protocol_label: String,
    pub eps: f64,
    pub trials: u64,
    pub master: SharedSeed,
    pub backend: HashBackend,
    pub out: Option<PathBuf>,
    pub summary: Option<PathBuf>,
    pub format: RowFormat,
    pub stats_csv: Option<PathBuf>,
}

pub fn parse_backend(text: &str) -> Result<HashBackend> {
    match text {
        "true-random" => Ok(HashBackend::TrueRandomCached),
        "keyed-prf" => Ok(HashBackend::KeyedPrf),
        other => bail!("unknown backend {other:?}; use true-random or keyed-prf"),
    }
}

/// A resolved joint law with its display label and, for the delta-noise
/// preset, the `(n, delta)` parameters that unlock the one-way and two-way
/// bound comparisons.
pub type ResolvedDistribution = (JointDistribution, String, Option<(u32, f64)>);

/// Builds the joint law named by a config's distribution fields.
pub fn resolve_distribution(cfg: &ExperimentConfig) -> Result<ResolvedDistribution> {
    match (&cfg.preset, &cfg.dist) {
        (Some(_), Some(_)) => bail!("give either a preset or a distribution file, not both"),
        (None, Some(path)) => {
            let joint = crate::formats::load_joint(path)?;
            Ok((joint, format!("file:{}", path.display()), None))
        }
        (preset, None) => {
            let name = preset.as_deref().unwrap_or("delta-noise");
            let mut params = BTreeMap::new();
            for (key, value) in [
                ("n", cfg.n),
                ("delta", cfg.delta),
                ("preset_eps", cfg.preset_eps),
                ("nx", cfg.nx),
                ("ny", cfg.ny),
            ] {
                if let Some(v) = value {
                    params.insert(key.to_string(), v);
                }
            }
            let joint = presets::instantiate(name, &params)?;
            let delta_noise = if name == "delta-noise" {
                let n = cfg.n.unwrap_or(256.0) as u32;
                Some((n, cfg.delta.unwrap_or(0.25)))
            } else {
                None
            };
            let label = if params.is_empty() {
                name.to_string()
            } else {
                let args: Vec<String> =
                    params.iter().map(|(k, v)| format!("{k}={v}")).collect();
                format!("{name}({})", args.join(","))
            };
            Ok((joint, label, delta_noise))
        }
    }
}

pub fn parse_protocol(name: &str, stage_width: Option<u32>) -> Result<(ProtocolKind, String)> {
    match name {
        "staged" => {
            let width = stage_width.unwrap_or(1);
            Ok((
                ProtocolKind::Staged { stage_width: width },
                format!("staged(width={width})"),
            ))
        }
        "tuned" => Ok((ProtocolKind::Tuned, "tuned".into())),
        "const-round" => Ok((ProtocolKind::ConstRound, "const-round".into())),
        other => bail!("unknown protocol {other:?}; use staged, tuned, or const-round"),
    }
}

pub fn resolve(cfg: ExperimentConfig) -> Result<ResolvedExperiment> {
    let (joint, dist_label, delta_noise) = resolve_distribution(&cfg)?;
    let (kind, protocol_label) =
        parse_protocol(cfg.protocol.as_deref().unwrap_or("tuned"), cfg.stage_width)?;
    let eps = cfg.eps.unwrap_or(0.125);
    let trials = cfg.trials.unwrap_or(1000);
    if trials == 0 {
        bail!("trials must be at least 1");
    }
    let master = resolve_seed(cfg.seed.as_deref())?;
    let backend = parse_backend(cfg.backend.as_deref().unwrap_or("true-random"))?;
    let format = match cfg.format.as_deref().unwrap_or("csv") {
        "csv" => RowFormat::Csv,
        "json-lines" => RowFormat::JsonLines,
        other => bail!("unknown row format {other:?}; use csv or json-lines"),
    };
    Ok(ResolvedExperiment {
        joint,
        dist_label,
        delta_noise,
        kind,
        protocol_label,
        eps,
        trials,
        master,
        backend,
        out: cfg.out,
        summary: cfg.summary,
        format,
        stats_csv: cfg.stats_csv,
    })
}

/// Ceiling comparisons carried in the summary.
#[derive(Serialize, Deserialize, Debug)]
pub struct CeilingChecks {
    /// Upper bound on expected total bits for the configured protocol.
    pub mean_total_bits_bound: f64,
    pub mean_total_bits_ok: bool,
    /// Present for the constant-round protocol only.
    pub mean_rounds_bound: Option<f64>,
    pub mean_rounds_ok: Option<bool>,
}

#[derive(Serialize, Deserialize, Debug)]
pub struct Summary {
    pub schema: String,
    pub distribution: String,
    pub protocol: String,
    pub eps: f64,
    pub trials: u64,
    pub seed: String,
    pub backend: String,
    pub cond_entropy: f64,
    pub stats: RunStats,
    pub ceilings: CeilingChecks,
    pub bounds: ConsistencyReport,
    pub all_checks_passed: bool,
}

/// Runs all trials (in parallel, merged in trial order) and assembles the
/// summary. Deterministic given the resolved config.
pub fn run_experiment(exp: &ResolvedExperiment) -> Result<(Summary, Vec<TrialRecord>)> {
    let protocol = JointProtocol::new(&exp.joint, exp.kind, exp.eps)?;
    let records: Vec<TrialRecord> = (0..exp.trials)
        .into_par_iter()
        .map(|t| monte_carlo_trial(&protocol, &exp.joint, exp.master, exp.backend, t))
        .collect::<sidelink_core::Result<Vec<_>>>()?;
    let stats = RunStats::from_records(&records)?;
    let h = protocol.cond_entropy();
    let (bits_bound, rounds_bound) = match exp.kind {
        ProtocolKind::Staged { stage_width } => {
            (staged_bits_bound(h, stage_width, exp.eps), None)
        }
        ProtocolKind::Tuned => (tuned_bits_bound(h, exp.eps), None),
        ProtocolKind::ConstRound => (
            const_round_bits_bound(h, exp.eps),
            Some(MEAN_ROUNDS_CEILING),
        ),
    };
    let mean_total_bits_ok = stats.mean_total_bits <= bits_bound;
    let mean_rounds_ok = rounds_bound.map(|b| stats.mean_rounds <= b);
    let bounds = bound_consistency_report(
        &stats,
        &exp.joint,
        exp.eps,
        &exp.protocol_label,
        exp.delta_noise,
    );
    let all_checks_passed = mean_total_bits_ok
        && mean_rounds_ok.unwrap_or(true)
        && bounds.precondition_ok
        && bounds.all_satisfied;
    let summary = Summary {
        schema: SUMMARY_SCHEMA.into(),
        distribution: exp.dist_label.clone(),
        protocol: exp.protocol_label.clone(),
        eps: exp.eps,
        trials: exp.trials,
        seed: exp.master.to_hex(),
        backend: match exp.backend {
            HashBackend::TrueRandomCached => "true-random".into(),
            HashBackend::KeyedPrf => "keyed-prf".into(),
        },
        cond_entropy: h,
        stats,
        ceilings: CeilingChecks {
            mean_total_bits_bound: bits_bound,
            mean_total_bits_ok,
            mean_rounds_bound: rounds_bound,
            mean_rounds_ok,
        },
        bounds,
        all_checks_passed,
    };
    Ok((summary, records))
}

/// Streams rows in the fixed schema; booleans are written as 0/1.
pub fn write_rows<W: Write>(records: &[TrialRecord], format: RowFormat, mut out: W) -> Result<()> {
    match format {
        RowFormat::Csv => {
            writeln!(out, "{ROWS_HEADER}")?;
            for r in records {
                writeln!(
                    out,
                    "{},{},{},{},{},{},{}",
                    r.trial, r.x, r.y, r.bits_a_to_b, r.bits_b_to_a, r.rounds, r.correct as u8
                )?;
            }
        }
        RowFormat::JsonLines => {
            #[derive(Serialize)]
            struct Row {
                trial: u64,
                x: u32,
                y: u32,
                bits_ab: u32,
                bits_ba: u32,
                rounds: u32,
                correct: bool,
            }
            for r in records {
                let row = Row {
                    trial: r.trial,
                    x: r.x.0,
                    y: r.y.0,
                    bits_ab: r.bits_a_to_b,
                    bits_ba: r.bits_b_to_a,
                    rounds: r.rounds,
                    correct: r.correct,
                };
                writeln!(out, "{}", serde_json::to_string(&row)?)?;
            }
        }
    }
    Ok(())
}

/// Fixed one-row CSV schema for the aggregate statistics, version 1.
pub const STATS_HEADER: &str = "trials,mean_total_bits,mean_bits_a_to_b,mean_bits_b_to_a,\
mean_rounds,error_rate,max_bits_per_input,se_bits_a_to_b";

/// The aggregate statistics as a header plus one CSV row.
pub fn write_stats_csv<W: Write>(stats: &RunStats, mut out: W) -> Result<()> {
    writeln!(out, "{STATS_HEADER}")?;
    writeln!(
        out,
        "{},{},{},{},{},{},{},{}",
        stats.trials,
        stats.mean_total_bits,
        stats.mean_bits_a_to_b,
        stats.mean_bits_b_to_a,
        stats.mean_rounds,
        stats.error_rate,
        stats.max_bits_per_input,
        stats.se_bits_a_to_b
    )?;
    Ok(())
}

/// Writes rows and summary to their configured destinations and returns the
/// summary.
pub fn execute(exp: &ResolvedExperiment) -> Result<Summary> {
    let (summary, records) = run_experiment(exp)?;
    match &exp.out {
        Some(path) => {
            let mut file = fs::File::create(path)
                .with_context(|| format!("creating row output {}", path.display()))?;
            write_rows(&records, exp.format, &mut file)?;
        }
        None => write_rows(&records, exp.format, std::io::stdout().lock())?,
    }
    let text = serde_json::to_string_pretty(&summary)?;
    match &exp.summary {
        Some(path) => fs::write(path, text + "\n")
            .with_context(|| format!("writing summary {}", path.display()))?,
        None => println!("{text}"),
    }
    if let Some(path) = &exp.stats_csv {
        let mut file = fs::File::create(path)
            .with_context(|| format!("creating stats output {}", path.display()))?;
        write_stats_csv(&summary.stats, &mut file)?;
    }
    Ok(summary)
}
