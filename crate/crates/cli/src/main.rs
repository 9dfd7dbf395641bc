use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde_json::json;

use sidelink::experiment::{self, ExperimentConfig};
use sidelink::formats::{self, OutcomeView};
use sidelink::presets;
use sidelink::seed::resolve_seed;

use sidelink_core::bounds::{
    cartesian_zero_error_bound, entropy_bound_check, fano_lower_bound, one_way_lower_bound,
    two_way_lower_bound,
};
use sidelink_core::compress::{compression_report, CompressionSession, OneRoundProtocol};
use sidelink_core::dist::{
    conditional_entropy, conditional_entropy_y_averaged, renyi_entropy, shannon_entropy, SymbolId,
};
use sidelink_core::hashing::{derive_seed, TAG_CANDIDATE, TAG_TRIAL_INPUT};
use sidelink_core::protocols::{derandomize, JointProtocol};
use sidelink_core::HashOracle;

/// Interactive transmission of a source to a receiver with correlated side
/// information: protocol simulation, compression, and bound evaluation.
#[derive(Parser)]
#[command(name = "sidelink", version, about)]
struct Cli {
    /// Master seed: decimal u64 or 64 hex chars (falls back to SIDELINK_SEED,
    /// then 0).
    #[arg(long, global = true)]
    seed: Option<String>,
    /// Hash backend: true-random or keyed-prf.
    #[arg(long, global = true, default_value = "true-random")]
    backend: String,
    /// Row output format where applicable: csv or json-lines.
    #[arg(long, global = true)]
    format: Option<String>,
    #[command(subcommand)]
    command: Command,
}

/// Distribution selection shared by most subcommands.
#[derive(Args, Clone)]
struct DistArgs {
    /// Distribution JSON file ({"x_support": ..., "y_support": ..., "entries": ...}).
    #[arg(long)]
    dist: Option<PathBuf>,
    /// Preset name; see `sidelink presets`.
    #[arg(long)]
    preset: Option<String>,
    #[arg(long)]
    n: Option<f64>,
    #[arg(long)]
    delta: Option<f64>,
    /// Mass parameter of the fano-tight preset.
    #[arg(long)]
    preset_eps: Option<f64>,
    #[arg(long)]
    nx: Option<f64>,
    #[arg(long)]
    ny: Option<f64>,
}

impl DistArgs {
    fn into_config(self) -> ExperimentConfig {
        ExperimentConfig {
            preset: self.preset,
            dist: self.dist,
            n: self.n,
            delta: self.delta,
            preset_eps: self.preset_eps,
            nx: self.nx,
            ny: self.ny,
            ..Default::default()
        }
    }

    fn resolve(self) -> Result<experiment::ResolvedDistribution> {
        experiment::resolve_distribution(&self.into_config())
    }
}

#[derive(Subcommand)]
enum Command {
    /// Entropy functionals of a distribution; optional CSV dump of every
    /// conditional row.
    Entropy {
        #[command(flatten)]
        dist: DistArgs,
        /// Write conditional rows as CSV (y,x,p) to this path.
        #[arg(long)]
        conditionals: Option<PathBuf>,
    },
    /// One protocol run on a single input pair, printed as JSON with the
    /// full transcript.
    Transmit {
        #[command(flatten)]
        dist: DistArgs,
        /// staged, tuned, or const-round.
        #[arg(long, default_value = "tuned")]
        protocol: String,
        /// Fresh hash values per stage (staged protocol only).
        #[arg(long)]
        stage_width: Option<u32>,
        #[arg(long, default_value_t = 0.125)]
        eps: f64,
        /// Sender's input; sampled from the joint law when absent.
        #[arg(long)]
        x: Option<u32>,
        /// Receiver's input; sampled when absent.
        #[arg(long)]
        y: Option<u32>,
    },
    /// Monte-Carlo experiment: per-trial rows plus a summary with ceiling and
    /// bound checks. Exits nonzero if any check fails.
    Experiment {
        /// Flat JSON config; command-line flags override its fields.
        #[arg(long)]
        config: Option<PathBuf>,
        #[command(flatten)]
        dist: DistArgs,
        #[arg(long)]
        protocol: Option<String>,
        #[arg(long)]
        stage_width: Option<u32>,
        #[arg(long)]
        eps: Option<f64>,
        #[arg(long)]
        trials: Option<u64>,
        /// Row output path (stdout when absent).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Summary JSON path (stdout when absent).
        #[arg(long)]
        summary: Option<PathBuf>,
        /// Aggregate statistics as one CSV row to this path.
        #[arg(long)]
        stats_csv: Option<PathBuf>,
    },
    /// Compress a public-coin one-round protocol and report information
    /// complexity, mean bits, and per-pair statistical distance.
    Compress {
        /// One-round protocol JSON ({"r_dist": ..., "messages": ...}) ...
        #[arg(long)]
        protocol: Option<PathBuf>,
        /// ... or a builtin: `verbatim` or `xor<bits>` (e.g. xor2).
        #[arg(long)]
        builtin: Option<String>,
        #[command(flatten)]
        dist: DistArgs,
        #[arg(long, default_value_t = 0.125)]
        eps: f64,
        /// Conditional trials per support pair.
        #[arg(long, default_value_t = 1000)]
        trials: u32,
    },
    /// Evaluate every applicable lower bound for a distribution.
    Bounds {
        #[command(flatten)]
        dist: DistArgs,
        #[arg(long, default_value_t = 0.125)]
        eps: f64,
    },
    /// Randomized check of the dominated-entropy inequality
    /// (sum p log2(1/p) >= sum q log2(1/q) - 2 for q <= p componentwise).
    CheckLemma {
        #[arg(long, default_value_t = 10_000)]
        trials: u64,
        /// Largest vector length to draw.
        #[arg(long, default_value_t = 1000)]
        max_len: u32,
    },
    /// Fix the shared randomness: scan derived candidate seeds for one whose
    /// exact support-weighted error meets the budget.
    Derandomize {
        #[command(flatten)]
        dist: DistArgs,
        #[arg(long, default_value = "tuned")]
        protocol: String,
        #[arg(long)]
        stage_width: Option<u32>,
        #[arg(long, default_value_t = 0.125)]
        eps: f64,
        /// Number of candidate seeds derived from the master seed.
        #[arg(long, default_value_t = 16)]
        candidates: u64,
    },
    /// List the preset distribution catalog as JSON.
    Presets,
}

fn print_json<T: serde::Serialize>(value: &T) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn run(cli: Cli) -> Result<bool> {
    let master = resolve_seed(cli.seed.as_deref())?;
    let backend = experiment::parse_backend(&cli.backend)?;
    match cli.command {
        Command::Entropy { dist, conditionals } => {
            let (joint, label, delta_noise) = dist.resolve()?;
            if let Some(path) = &conditionals {
                let file = fs::File::create(path)
                    .with_context(|| format!("creating {}", path.display()))?;
                formats::export_conditionals_csv(&joint, file)?;
            }
            let mut doc = json!({
                "distribution": label,
                "x_size": joint.x_size(),
                "y_size": joint.y_size(),
                "support_pairs": joint.support_len(),
                "shannon_x": shannon_entropy(&joint.marginal_x()),
                "shannon_y": shannon_entropy(&joint.marginal_y()),
                "renyi_x": renyi_entropy(&joint.marginal_x()),
                "cond_entropy": conditional_entropy(&joint),
                "cond_entropy_y_averaged": conditional_entropy_y_averaged(&joint),
            });
            if let Some((n, delta)) = delta_noise {
                doc["cond_entropy_closed_form"] =
                    json!(sidelink_core::dist::presets::delta_noise_cond_entropy(n, delta));
            }
            print_json(&doc)?;
            Ok(true)
        }
        Command::Transmit {
            dist,
            protocol,
            stage_width,
            eps,
            x,
            y,
        } => {
            let (joint, label, _) = dist.resolve()?;
            let (kind, kind_label) = experiment::parse_protocol(&protocol, stage_width)?;
            let prepared = JointProtocol::new(&joint, kind, eps)?;
            let (x, y) = match (x, y) {
                (Some(x), Some(y)) => (SymbolId(x), SymbolId(y)),
                (None, None) => {
                    let mut rng =
                        ChaCha20Rng::from_seed(derive_seed(master, TAG_TRIAL_INPUT, 0).0);
                    joint.sample(&mut rng)
                }
                _ => bail!("give both --x and --y, or neither"),
            };
            let oracle = HashOracle::with_tables(
                master,
                prepared.x_size(),
                backend,
                prepared.tables_needed(),
            )?;
            let outcome = prepared.run(x, y, &oracle)?;
            let mut doc = serde_json::to_value(OutcomeView::from_outcome(&outcome))?;
            doc["distribution"] = json!(label);
            doc["protocol"] = json!(kind_label);
            doc["x"] = json!(x.0);
            doc["y"] = json!(y.0);
            print_json(&doc)?;
            Ok(outcome.correct)
        }
        Command::Experiment {
            config,
            dist,
            protocol,
            stage_width,
            eps,
            trials,
            out,
            summary,
            stats_csv,
        } => {
            let mut file_cfg = match &config {
                Some(path) => ExperimentConfig::load(path)?,
                None => ExperimentConfig::default(),
            };
            let mut flag_cfg = dist.into_config();
            flag_cfg.protocol = protocol;
            flag_cfg.stage_width = stage_width;
            flag_cfg.eps = eps;
            flag_cfg.trials = trials;
            flag_cfg.seed = cli.seed.clone();
            flag_cfg.backend = Some(cli.backend.clone());
            flag_cfg.out = out;
            flag_cfg.summary = summary;
            flag_cfg.format = cli.format.clone();
            flag_cfg.stats_csv = stats_csv;
            file_cfg = file_cfg.overlay(flag_cfg);
            let resolved = experiment::resolve(file_cfg)?;
            let summary = experiment::execute(&resolved)?;
            Ok(summary.all_checks_passed)
        }
        Command::Compress {
            protocol,
            builtin,
            dist,
            eps,
            trials,
        } => {
            let (joint, _, _) = dist.resolve()?;
            let one_round = match (&protocol, &builtin) {
                (Some(path), None) => formats::load_protocol(path)?,
                (None, Some(name)) => match name.as_str() {
                    "verbatim" => OneRoundProtocol::verbatim(joint.x_size())?,
                    other => match other.strip_prefix("xor") {
                        Some(bits) => OneRoundProtocol::xor_uniform(
                            bits.parse().context("parsing xor bit width")?,
                        )?,
                        None => bail!("unknown builtin protocol {other:?}"),
                    },
                },
                _ => bail!("give exactly one of --protocol or --builtin"),
            };
            let session = CompressionSession::new(one_round, &joint, eps)?;
            let report = compression_report(&session, &joint, trials, master, backend)?;
            let worst = report
                .per_pair_stat_distance
                .iter()
                .map(|&(_, d)| d)
                .fold(0.0f64, f64::max);
            let mut doc = serde_json::to_value(&report)?;
            doc["stage_width"] = json!(session.stage_width());
            doc["max_stat_distance"] = json!(worst);
            print_json(&doc)?;
            Ok(true)
        }
        Command::Bounds { dist, eps } => {
            let (joint, label, delta_noise) = dist.resolve()?;
            let fano = fano_lower_bound(&joint, eps);
            let cartesian = cartesian_zero_error_bound(&joint);
            let mut doc = json!({
                "distribution": label,
                "eps": eps,
                "fano": {"value": fano, "vacuous": fano <= 0.0},
                "cartesian_zero_error": {
                    "applicable": cartesian.applicable,
                    "value": cartesian.bound,
                },
            });
            if let Some((n, delta)) = delta_noise {
                doc["one_way"] = json!(one_way_lower_bound(n, delta, eps)?);
                doc["two_way"] = json!(two_way_lower_bound(n, delta, eps)?);
            }
            print_json(&doc)?;
            Ok(true)
        }
        Command::CheckLemma { trials, max_len } => {
            let mut rng = ChaCha20Rng::from_seed(master.0);
            let mut violations = 0u64;
            let mut min_slack = f64::INFINITY;
            for _ in 0..trials {
                let len = 1 + (next_u64(&mut rng) % max_len.max(1) as u64) as usize;
                let mut p: Vec<f64> = (0..len)
                    .map(|_| -unit(&mut rng).max(1e-12).ln())
                    .collect();
                let total: f64 = p.iter().sum();
                p.iter_mut().for_each(|v| *v /= total);
                let q: Vec<f64> = p.iter().map(|&v| v * unit(&mut rng).max(1e-12)).collect();
                let check = entropy_bound_check(&p, &q)?;
                if !check.holds {
                    violations += 1;
                }
                min_slack = min_slack.min(check.lhs - check.rhs);
            }
            print_json(&json!({
                "trials": trials,
                "max_len": max_len,
                "violations": violations,
                "min_slack_bits": min_slack,
            }))?;
            Ok(violations == 0)
        }
        Command::Derandomize {
            dist,
            protocol,
            stage_width,
            eps,
            candidates,
        } => {
            let (joint, label, _) = dist.resolve()?;
            let (kind, kind_label) = experiment::parse_protocol(&protocol, stage_width)?;
            let prepared = JointProtocol::new(&joint, kind, eps)?;
            let seeds: Vec<_> = (0..candidates)
                .map(|i| derive_seed(master, TAG_CANDIDATE, i))
                .collect();
            let report = derandomize(&prepared, &seeds, backend)?;
            let fano = fano_lower_bound(&joint, eps);
            print_json(&json!({
                "distribution": label,
                "protocol": kind_label,
                "eps": eps,
                "seed": report.seed.to_hex(),
                "exact_error": report.exact_error,
                "mean_total_bits": report.mean_total_bits,
                "mean_bits_a_to_b": report.mean_bits_a_to_b,
                "fano_lower_bound": fano,
                "meets_fano": report.mean_bits_a_to_b >= fano,
            }))?;
            Ok(true)
        }
        Command::Presets => {
            print_json(&presets::list_presets())?;
            Ok(true)
        }
    }
}

fn next_u64(rng: &mut ChaCha20Rng) -> u64 {
    use rand_chacha::rand_core::RngCore;
    rng.next_u64()
}

fn unit(rng: &mut ChaCha20Rng) -> f64 {
    (next_u64(rng) >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(err) => {
            let mut stderr = std::io::stderr().lock();
            let _ = writeln!(stderr, "error: {err:#}");
            ExitCode::from(2)
        }
    }
}
