//! Command-line front end.
//!
//! Exit codes: 0 success, 1 metric or judgement mismatch, 2 input validation
//! failure, 3 nothing to do. Failures print one JSON object to stderr:
//! `{"error": <kind>, "message": <text>, "exit_code": <n>}` plus
//! kind-specific fields.

use std::collections::BTreeSet;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::figures::{fixture, fixtures, FigureCheck};
use crate::io::{self, ItemSide};
use crate::judgement::{
    estimate_quality_from_judgements, ingest_verdicts, parse_verdicts, sample_pairs,
    JudgementSet,
};
use crate::metrics::{evaluate, EvalOptions};
use crate::model::{ClusterId, Snapshot};
use crate::report::{render_estimate_table, render_table, to_json};
use crate::schemes::{assign_by_majority_vote, assign_fresh_ids};
use crate::transform::{EvalInputs, DEFAULT_K};

pub const EXIT_OK: i32 = 0;
pub const EXIT_MISMATCH: i32 = 1;
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_NOTHING_TO_DO: i32 = 3;

/// Environment variable capping the worker thread count.
pub const THREADS_ENV: &str = "IDEVAL_THREADS";

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, ValueEnum)]
pub enum Render {
    Json,
    Table,
    #[default]
    Both,
}

#[derive(Debug, Parser)]
#[command(
    name = "ideval",
    version,
    about = "Evaluate cluster id assignment schemes against historical clusterings"
)]
pub struct Cli {
    /// JSON run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output file (or directory for `transform`).
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Render::Both)]
    pub render: Render,
    /// Include per-element records in metric reports.
    #[arg(long, global = true)]
    pub per_element: bool,
    /// Random seed for pair sampling.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Compute impact (and, with an ideal, quality) metrics.
    Evaluate {
        /// Evaluate files written by `transform` instead of raw inputs.
        #[arg(long)]
        materialized: Option<PathBuf>,
    },
    /// Write the expanded Base/Exp/weight (and ideal) files.
    Transform,
    /// Label a membership-only clustering with ids.
    Assign {
        /// `item <TAB> cluster_key [<TAB> weight]` file.
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum, default_value_t = Scheme::Majority)]
        scheme: Scheme,
        /// Historical labeled clustering.
        #[arg(long)]
        hist: Option<PathBuf>,
        /// Epoch label of the historical clustering.
        #[arg(long, default_value = "H")]
        epoch: String,
        #[arg(long, default_value = "id_")]
        prefix: String,
        /// First counter value for fresh ids (the `fresh` scheme).
        #[arg(long, default_value_t = 1)]
        start: u64,
    },
    /// Sample element pairs for human judgement.
    SamplePairs {
        #[arg(short = 'n', long = "count")]
        count: usize,
    },
    /// Merge a verdict file and estimate quality from the judged pairs.
    IngestVerdicts {
        #[arg(long)]
        verdicts: PathBuf,
        /// Pair file from `sample-pairs`; verdicts must refer to its pairs.
        /// Without it the verdict file itself defines the pair set.
        #[arg(long)]
        pairs: Option<PathBuf>,
    },
    /// Recompute the embedded worked examples and compare every cell.
    Figures {
        /// Figure number, or `all`.
        #[arg(default_value = "all")]
        which: String,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Scheme {
    Fresh,
    Majority,
}

/// A command failure with its exit code.
struct Failure {
    code: i32,
    diagnostic: serde_json::Value,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::NothingToSample => EXIT_NOTHING_TO_DO,
            Error::InconsistentJudgements(_) => EXIT_MISMATCH,
            _ => EXIT_INVALID,
        };
        let mut diagnostic = json!({
            "error": e.kind(),
            "message": e.to_string(),
            "exit_code": code,
        });
        match &e {
            Error::InconsistentJudgements(report) => {
                diagnostic["conflicts"] = json!(report.conflicts);
            }
            Error::Parse { path, line, .. } => {
                diagnostic["path"] = json!(path);
                diagnostic["line"] = json!(line);
            }
            Error::Io { path, .. } => {
                diagnostic["path"] = json!(path.display().to_string());
            }
            Error::MissingWeight(el) | Error::UnknownElement(el) | Error::MissingIdealClass(el) => {
                diagnostic["element"] = json!(el.to_string());
            }
            _ => {}
        }
        Failure { code, diagnostic }
    }
}

/// Parses arguments, runs the command and returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INVALID } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    if let Err(message) = configure_threads() {
        return report_failure(Failure {
            code: EXIT_INVALID,
            diagnostic: json!({"error": "InvalidConfig", "message": message, "exit_code": EXIT_INVALID}),
        });
    }
    match run(&cli) {
        Ok(code) => code,
        Err(f) => report_failure(f),
    }
}

fn report_failure(f: Failure) -> i32 {
    eprintln!("{}", f.diagnostic);
    f.code
}

fn configure_threads() -> std::result::Result<(), String> {
    let Ok(value) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| format!("{THREADS_ENV} must be a positive integer, got `{value}`"))?;
    // A second initialization (e.g. in tests) keeps the first pool.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

fn run(cli: &Cli) -> std::result::Result<i32, Failure> {
    match &cli.command {
        Command::Evaluate { materialized } => cmd_evaluate(cli, materialized.as_deref()),
        Command::Transform => cmd_transform(cli),
        Command::Assign {
            input,
            scheme,
            hist,
            epoch,
            prefix,
            start,
        } => cmd_assign(cli, input, *scheme, hist.as_deref(), epoch, prefix, *start),
        Command::SamplePairs { count } => cmd_sample_pairs(cli, *count),
        Command::IngestVerdicts { verdicts, pairs } => {
            cmd_ingest_verdicts(cli, verdicts, pairs.as_deref())
        }
        Command::Figures { which } => cmd_figures(cli, which),
    }
}

fn require_config(cli: &Cli) -> Result<RunConfig> {
    let path = cli
        .config
        .as_deref()
        .ok_or_else(|| Error::InvalidConfig("--config is required for this command".into()))?;
    RunConfig::from_path(path)
}

fn stdout_write(text: &str) -> Result<()> {
    let mut out = std::io::stdout().lock();
    out.write_all(text.as_bytes())
        .and_then(|_| out.flush())
        .map_err(|e| Error::io("<stdout>", e))
}

/// Emits a report according to `--render`. With an output path, JSON goes
/// to the file (or the table, for `--render table`); tables go to stdout.
fn emit(render: Render, output: Option<&Path>, json: &str, table: &str) -> Result<()> {
    match (render, output) {
        (Render::Json, Some(p)) => io::write_string(p, json),
        (Render::Json, None) => stdout_write(json),
        (Render::Table, Some(p)) => io::write_string(p, table),
        (Render::Table, None) => stdout_write(table),
        (Render::Both, Some(p)) => {
            io::write_string(p, json)?;
            stdout_write(table)
        }
        (Render::Both, None) => {
            stdout_write(table)?;
            stdout_write("\n")?;
            stdout_write(json)
        }
    }
}

fn cmd_evaluate(cli: &Cli, materialized: Option<&Path>) -> std::result::Result<i32, Failure> {
    let (inputs, config_output) = match materialized {
        Some(dir) => {
            let k = match &cli.config {
                Some(p) => RunConfig::from_path(p)?.k,
                None => DEFAULT_K,
            };
            (load_materialized(dir, k)?, None)
        }
        None => {
            let cfg = require_config(cli)?;
            (cfg.load_inputs()?, cfg.output.clone())
        }
    };
    let report = evaluate(
        &inputs,
        &EvalOptions {
            per_element: cli.per_element,
        },
    )?;
    let output = cli.output.clone().or(config_output);
    emit(cli.render, output.as_deref(), &to_json(&report), &render_table(&report))?;
    Ok(EXIT_OK)
}

/// File names written by `transform` and read by `evaluate --materialized`.
pub const MATERIALIZED_BASE: &str = "base.tsv";
pub const MATERIALIZED_EXP: &str = "exp.tsv";
pub const MATERIALIZED_WEIGHTS: &str = "weights.tsv";
pub const MATERIALIZED_IDEAL: &str = "ideal.tsv";

pub fn load_materialized(dir: &Path, k: f64) -> Result<EvalInputs> {
    let read = |name: &str| {
        let p = dir.join(name);
        io::read_to_string(&p).map(|t| (t, p.display().to_string()))
    };
    let (base, bp) = read(MATERIALIZED_BASE)?;
    let (exp, ep) = read(MATERIALIZED_EXP)?;
    let (weights, wp) = read(MATERIALIZED_WEIGHTS)?;
    let inputs = EvalInputs::from_materialized(
        io::parse_element_clustering(&base, &bp, "Base")?,
        io::parse_element_clustering(&exp, &ep, "Exp")?,
        io::parse_element_weights(&weights, &wp)?,
        k,
    )?;
    if dir.join(MATERIALIZED_IDEAL).exists() {
        let (ideal, ip) = read(MATERIALIZED_IDEAL)?;
        inputs.with_ideal(io::parse_element_clustering(&ideal, &ip, "ideal")?)
    } else {
        Ok(inputs)
    }
}

fn cmd_transform(cli: &Cli) -> std::result::Result<i32, Failure> {
    let cfg = require_config(cli)?;
    let dir = cli
        .output
        .clone()
        .ok_or_else(|| Error::InvalidConfig("transform needs --output <directory>".into()))?;
    let inputs = cfg.load_inputs()?;
    std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    io::write_string(
        &dir.join(MATERIALIZED_BASE),
        &io::format_element_clustering(&inputs.base),
    )?;
    io::write_string(
        &dir.join(MATERIALIZED_EXP),
        &io::format_element_clustering(&inputs.exp),
    )?;
    io::write_string(
        &dir.join(MATERIALIZED_WEIGHTS),
        &io::format_element_weights(&inputs.weights),
    )?;
    if let Some(ideal) = &inputs.ideal {
        io::write_string(
            &dir.join(MATERIALIZED_IDEAL),
            &io::format_element_clustering(ideal),
        )?;
    }
    let summary = json!({
        "directory": dir.display().to_string(),
        "elements": inputs.element_count(),
        "base_clusters": inputs.base.len(),
        "exp_clusters": inputs.exp.len(),
        "ids_hist": inputs.census.ids_hist.len(),
        "non_hist_ids": inputs.census.non_hist_ids.len(),
        "ideal": inputs.ideal.is_some(),
    });
    stdout_write(&to_json(&summary))?;
    Ok(EXIT_OK)
}

fn cmd_assign(
    cli: &Cli,
    input: &Path,
    scheme: Scheme,
    hist: Option<&Path>,
    epoch: &str,
    prefix: &str,
    start: u64,
) -> std::result::Result<i32, Failure> {
    let members = io::read_clustering_tsv(input, &ItemSide::Current)?;
    let hist = match hist {
        Some(p) => io::read_clustering_tsv(
            p,
            &ItemSide::Historical {
                epoch: epoch.to_string(),
            },
        )?,
        None => Snapshot::empty(epoch),
    };
    let result = match scheme {
        Scheme::Fresh => {
            let reserved: BTreeSet<ClusterId> = hist.clustering.id_set();
            assign_fresh_ids(&members.clustering, prefix, start, &reserved)?
        }
        Scheme::Majority => {
            assign_by_majority_vote(&members.clustering, &hist.clustering, &hist.weights, prefix)?
        }
    };
    let labeled = io::format_clustering_tsv(&Snapshot::new(result.labels, members.weights))?;
    match &cli.output {
        Some(p) => io::write_string(p, &labeled)?,
        None => stdout_write(&labeled)?,
    }
    Ok(EXIT_OK)
}

fn cmd_sample_pairs(cli: &Cli, count: usize) -> std::result::Result<i32, Failure> {
    let cfg = require_config(cli)?;
    let inputs = cfg.load_inputs()?;
    let set = sample_pairs(&inputs, count, cli.seed)?;
    let text = set.to_tsv();
    match &cli.output {
        Some(p) => io::write_string(p, &text)?,
        None => stdout_write(&text)?,
    }
    Ok(EXIT_OK)
}

/// Seed recorded in a pair file header (`# seed=<n>`).
fn header_seed(text: &str) -> Option<u64> {
    text.lines()
        .take_while(|l| l.starts_with('#'))
        .find_map(|l| l.strip_prefix("# seed=")?.trim().parse().ok())
}

fn cmd_ingest_verdicts(
    cli: &Cli,
    verdicts: &Path,
    pairs: Option<&Path>,
) -> std::result::Result<i32, Failure> {
    let cfg = require_config(cli)?;
    let inputs = cfg.load_inputs()?;
    let verdict_text = io::read_to_string(verdicts)?;
    let verdict_pairs = parse_verdicts(&verdict_text, &verdicts.display().to_string())?;
    let set = match pairs {
        Some(p) => {
            let text = io::read_to_string(p)?;
            let seed = header_seed(&text).unwrap_or(cli.seed);
            let sampled = JudgementSet::from_pairs(
                &inputs,
                parse_verdicts(&text, &p.display().to_string())?,
                seed,
            )?;
            ingest_verdicts(&inputs, &sampled, verdict_pairs)?
        }
        None => {
            let seed = header_seed(&verdict_text).unwrap_or(cli.seed);
            JudgementSet::from_pairs(&inputs, verdict_pairs, seed)?
        }
    };
    let estimate = estimate_quality_from_judgements(&inputs, &set)?;
    emit(
        cli.render,
        cli.output.as_deref(),
        &to_json(&estimate),
        &render_estimate_table(&estimate),
    )?;
    Ok(EXIT_OK)
}

fn figure_table(checks: &[FigureCheck]) -> String {
    let mut out = String::new();
    for c in checks {
        let ok = c.cells.iter().filter(|x| x.matches).count();
        out.push_str(&format!(
            "figure {:>2}: {}/{} cells match{}\n",
            c.id,
            ok,
            c.cells.len(),
            if c.passed() { "" } else { "  MISMATCH" }
        ));
        for m in c.mismatches() {
            out.push_str(&format!(
                "    {:<16} expected {:>8.2}  got {:>8}\n",
                m.metric, m.expected_percent, m.rendered
            ));
        }
    }
    let passed = checks.iter().filter(|c| c.passed()).count();
    out.push_str(&format!("{passed}/{} figures pass\n", checks.len()));
    out
}

fn cmd_figures(cli: &Cli, which: &str) -> std::result::Result<i32, Failure> {
    let selected: Vec<_> = if which.eq_ignore_ascii_case("all") {
        fixtures().iter().collect()
    } else {
        let id: u8 = which
            .trim_start_matches(|c: char| !c.is_ascii_digit())
            .parse()
            .map_err(|_| Error::InvalidConfig(format!("unknown figure `{which}`")))?;
        vec![fixture(id).ok_or_else(|| Error::InvalidConfig(format!("no figure {id}")))?]
    };
    let checks = selected
        .into_iter()
        .map(|f| f.check())
        .collect::<Result<Vec<_>>>()?;
    let all_pass = checks.iter().all(FigureCheck::passed);
    let json = to_json(&json!({
        "passed": all_pass,
        "figures": checks.iter().map(|c| json!({
            "id": c.id,
            "caption": c.caption,
            "passed": c.passed(),
            "cells": c.cells,
        })).collect::<Vec<_>>(),
    }));
    emit(cli.render, cli.output.as_deref(), &json, &figure_table(&checks))?;
    if all_pass {
        Ok(EXIT_OK)
    } else {
        let mismatched: Vec<_> = checks
            .iter()
            .flat_map(|c| {
                c.mismatches().map(move |m| {
                    json!({"figure": c.id, "metric": m.metric,
                           "expected": m.expected_percent, "rendered": m.rendered})
                })
            })
            .collect();
        Err(Failure {
            code: EXIT_MISMATCH,
            diagnostic: json!({
                "error": "FigureMismatch",
                "message": format!("{} cell(s) differ", mismatched.len()),
                "exit_code": EXIT_MISMATCH,
                "mismatches": mismatched,
            }),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn seed_header_is_read() {
        assert_eq!(header_seed("# seed=42\n# left\tright\n"), Some(42));
        assert_eq!(header_seed("cur:a\tcur:b\tequiv\n"), None);
    }

    #[test]
    fn error_kinds_map_to_exit_codes() {
        assert_eq!(Failure::from(Error::NothingToSample).code, EXIT_NOTHING_TO_DO);
        assert_eq!(Failure::from(Error::EmptyIntersection).code, EXIT_INVALID);
        assert_eq!(
            Failure::from(Error::InconsistentJudgements(Default::default())).code,
            EXIT_MISMATCH
        );
    }
}
