//! `qsep` command line: generators, verifiers and the see-saw search.
//!
//! Exit codes: 0 success, 1 usage or input error, 2 verification failure.
//! JSON goes through `serde_json::Value`, whose maps are ordered by key, and
//! floats use the shortest round-trip representation.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use crate::analysis::{
    check_bijections, descent_chain, schmidt, schmidt_partition, strategy_block_decompose, verify_y4_relations,
    ZERO_CUTOFF,
};
use crate::correlation::{Correlation, Metric};
use crate::error::{Error, Result};
use crate::seesaw::{self, Rounding, SeesawConfig};
use crate::separating::{
    exact_pstar, ideal_truncated_strategy, printed_pairs, printed_table, pstar_layout, TruncationSpec,
};
use crate::strategy::Strategy;
use crate::tilted_chsh::{ideal_strategy, params_from_alpha};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_VERIFY: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "qsep", version, about = "Separating correlation toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum MetricArg {
    MaxTv,
    L2,
}

impl From<MetricArg> for Metric {
    fn from(m: MetricArg) -> Metric {
        match m {
            MetricArg::MaxTv => Metric::MaxTv,
            MetricArg::L2 => Metric::L2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum TargetArg {
    /// Tilted CHSH tables padded to 3 answers.
    Chsh,
    /// The exact separating correlation.
    Pstar,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum RoundingArg {
    None,
    Projective,
}

#[derive(Debug, Args)]
struct Common {
    /// Schmidt ratio of the construction, in (0, 1).
    #[arg(long, default_value_t = 0.5)]
    alpha: f64,
    /// Output file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
}

#[derive(Debug, Args)]
struct StrategySource {
    /// Strategy JSON file; the truncated construction when absent.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Number of blocks M of the truncation (dimension 2M).
    #[arg(long, default_value_t = 8)]
    m: usize,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Printed closed-form tables next to the exact correlation.
    Tables {
        #[command(flatten)]
        common: Common,
        /// Single question pair `X Y`.
        #[arg(long, num_args = 2, value_names = ["X", "Y"])]
        pair: Option<Vec<usize>>,
    },
    /// Truncated ideal strategy.
    Truncate {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 8)]
        m: usize,
    },
    /// Correlation induced by a strategy.
    Induce {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        source: StrategySource,
    },
    /// Distance between two correlations (default: exact vs truncated).
    Distance {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 8)]
        m: usize,
        #[arg(long, value_enum, default_value_t = MetricArg::MaxTv)]
        metric: MetricArg,
        /// Correlation JSON files to compare.
        #[arg(long, num_args = 2, value_names = ["P", "Q"])]
        inputs: Option<Vec<PathBuf>>,
    },
    /// Schmidt spectrum of a strategy's state.
    Schmidt {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        source: StrategySource,
        #[arg(long, default_value_t = ZERO_CUTOFF)]
        tol: f64,
    },
    /// Direct-sum decomposition of the strategy restricted to questions {2,3}².
    Blocks {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        source: StrategySource,
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
    },
    /// Relations tied to Bob's question 4.
    Y4 {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        source: StrategySource,
        #[arg(long, default_value_t = 1e-12)]
        tol: f64,
    },
    /// Longest descent chain of the truncations for a range of M.
    Chain {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 2)]
        m_min: usize,
        #[arg(long, default_value_t = 8)]
        m_max: usize,
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
    },
    /// See-saw search at local dimension `--dim`.
    Seesaw {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 2)]
        dim: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 20)]
        restarts: usize,
        #[arg(long, default_value_t = 200)]
        iters: usize,
        #[arg(long, value_enum, default_value_t = TargetArg::Pstar)]
        target: TargetArg,
        /// Target correlation JSON; overrides `--target`.
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = RoundingArg::None)]
        rounding: RoundingArg,
        #[arg(long, default_value_t = 1e-12)]
        tol: f64,
        #[arg(long, value_enum, default_value_t = MetricArg::L2)]
        metric: MetricArg,
    },
    /// Full invariant suite; exit 2 names the first failing residual.
    Verify {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        source: StrategySource,
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
    },
}

/// Failure of a named check, mapped to exit code 2.
struct Failure {
    check: String,
    residual: f64,
    tol: f64,
}

enum Outcome {
    Done,
    Failed(Failure),
}

/// Parses `argv` (including the program name) and runs the subcommand.
pub fn run<S: AsRef<str>>(argv: &[S], out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let cli = match Cli::try_parse_from(argv.iter().map(|s| s.as_ref())) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let text = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{text}");
                    EXIT_OK
                }
                _ => {
                    let _ = write!(err, "{text}");
                    EXIT_USAGE
                }
            };
        }
    };
    match dispatch(cli.command, out) {
        Ok(Outcome::Done) => EXIT_OK,
        Ok(Outcome::Failed(f)) => {
            let _ = writeln!(err, "verification failed: {} residual {:e} exceeds {:e}", f.check, f.residual, f.tol);
            EXIT_VERIFY
        }
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            match e {
                Error::Residual { .. } | Error::Multiset(_) | Error::InvalidStrategy(_) => EXIT_VERIFY,
                _ => EXIT_USAGE,
            }
        }
    }
}

fn emit(common: &Common, out: &mut dyn Write, bytes: &[u8]) -> Result<()> {
    let io = |e: std::io::Error| Error::Serialization(e.to_string());
    match &common.out {
        Some(path) => fs::write(path, bytes).map_err(io),
        None => out.write_all(bytes).map_err(io),
    }
}

fn emit_json<T: Serialize>(common: &Common, out: &mut dyn Write, value: &T) -> Result<()> {
    let value: Value = serde_json::to_value(value).map_err(|e| Error::Serialization(e.to_string()))?;
    let mut text = serde_json::to_string_pretty(&value).map_err(|e| Error::Serialization(e.to_string()))?;
    text.push('\n');
    emit(common, out, text.as_bytes())
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::Serialization(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Error::Serialization(format!("{}: {e}", path.display())))
}

fn load_strategy(common: &Common, source: &StrategySource) -> Result<Strategy> {
    match &source.input {
        Some(path) => read_json(path),
        None => ideal_truncated_strategy(&TruncationSpec::new(common.alpha, source.m)?),
    }
}

fn csv_rows(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let ser = |e: csv::Error| Error::Serialization(e.to_string());
    w.write_record(header).map_err(ser)?;
    for row in rows {
        w.write_record(&row).map_err(ser)?;
    }
    w.into_inner().map_err(|e| Error::Serialization(e.to_string()))
}

fn correlation_csv(p: &Correlation) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    p.write_csv(&mut buf)?;
    Ok(buf)
}

fn dispatch(cmd: Command, out: &mut dyn Write) -> Result<Outcome> {
    match cmd {
        Command::Tables { common, pair } => tables(&common, pair, out)?,
        Command::Truncate { common, m } => {
            let s = ideal_truncated_strategy(&TruncationSpec::new(common.alpha, m)?)?;
            emit_json(&common, out, &s)?;
        }
        Command::Induce { common, source } => {
            let p = load_strategy(&common, &source)?.induce()?;
            match common.format {
                Some(Format::Csv) => emit(&common, out, &correlation_csv(&p)?)?,
                _ => emit_json(&common, out, &p)?,
            }
        }
        Command::Distance { common, m, metric, inputs } => {
            let metric = Metric::from(metric);
            let (p, q, label) = match inputs {
                Some(paths) => (read_json::<Correlation>(&paths[0])?, read_json::<Correlation>(&paths[1])?, "inputs"),
                None => (
                    exact_pstar(common.alpha, 1e-12)?,
                    ideal_truncated_strategy(&TruncationSpec::new(common.alpha, m)?)?.induce()?,
                    "exact_vs_truncated",
                ),
            };
            let d = p.distance(&q, metric)?;
            emit_json(&common, out, &json!({ "compared": label, "metric": metric, "distance": d, "alpha": common.alpha, "m": m }))?;
        }
        Command::Schmidt { common, source, tol } => {
            let s = load_strategy(&common, &source)?;
            let (d_a, d_b) = s.dims();
            let spec = schmidt(s.state(), d_a, d_b, tol)?.spectrum;
            match common.format {
                Some(Format::Csv) => {
                    let rows = spec.coefficients.iter().enumerate().map(|(i, c)| vec![i.to_string(), c.to_string()]);
                    emit(&common, out, &csv_rows(&["index", "coefficient"], rows)?)?;
                }
                _ => emit_json(&common, out, &spec)?,
            }
        }
        Command::Blocks { common, source, tol } => {
            let s = load_strategy(&common, &source)?.restrict_questions(&[2, 3], &[2, 3])?;
            let d = strategy_block_decompose(&s, &pstar_layout(), tol)?;
            emit_json(&common, out, &d)?;
        }
        Command::Y4 { common, source, tol } => {
            let r = verify_y4_relations(&load_strategy(&common, &source)?, tol)?;
            emit_json(&common, out, &r)?;
            if !r.passed {
                let (name, residual) = r.worst();
                return Ok(Outcome::Failed(Failure { check: format!("y4 {name}"), residual, tol }));
            }
        }
        Command::Chain { common, m_min, m_max, tol } => chain(&common, m_min, m_max, tol, out)?,
        Command::Seesaw { common, dim, seed, restarts, iters, target, input, rounding, tol, metric } => {
            let target = match input {
                Some(path) => read_json::<Correlation>(&path)?,
                None => match target {
                    TargetArg::Pstar => exact_pstar(common.alpha, 1e-12)?,
                    TargetArg::Chsh => ideal_strategy(&params_from_alpha(common.alpha)?)?.induce()?.pad_answers(3, 3)?,
                },
            };
            let cfg = SeesawConfig {
                dim,
                seed,
                restarts,
                max_outer_iters: iters,
                convergence_tol: tol,
                metric: metric.into(),
                rounding: match rounding {
                    RoundingArg::None => Rounding::None,
                    RoundingArg::Projective => Rounding::Projective,
                },
                ..SeesawConfig::default()
            };
            let res = seesaw::optimize(&target, &cfg)?;
            match common.format {
                Some(Format::Csv) => {
                    let mut buf = Vec::new();
                    res.write_trace_csv(&mut buf)?;
                    emit(&common, out, &buf)?;
                }
                _ => emit_json(&common, out, &json!({ "config": cfg, "result": res }))?,
            }
        }
        Command::Verify { common, source, tol } => return verify(&common, &source, tol, out),
    }
    Ok(Outcome::Done)
}

fn tables(common: &Common, pair: Option<Vec<usize>>, out: &mut dyn Write) -> Result<()> {
    let pairs = match pair {
        Some(p) => vec![(p[0], p[1])],
        None => printed_pairs(),
    };
    let exact = exact_pstar(common.alpha, 1e-12)?;
    let mut entries = Vec::new();
    for (x, y) in pairs {
        let printed = printed_table(common.alpha, x, y)?;
        let ex = exact.table(x, y);
        entries.push((x, y, printed.max_abs_diff(&ex), printed, ex));
    }
    if common.format == Some(Format::Csv) {
        let mut rows = Vec::new();
        for (x, y, _, printed, ex) in &entries {
            for a in 0..printed.rows() {
                for b in 0..printed.cols() {
                    rows.push(vec![
                        x.to_string(),
                        y.to_string(),
                        a.to_string(),
                        b.to_string(),
                        printed.get(a, b).to_string(),
                        ex.get(a, b).to_string(),
                    ]);
                }
            }
        }
        return emit(common, out, &csv_rows(&["x", "y", "a", "b", "printed", "exact"], rows)?);
    }
    let list: Vec<Value> = entries
        .into_iter()
        .map(|(x, y, diff, printed, ex)| {
            json!({ "x": x, "y": y, "printed": printed.entries, "exact": ex.entries, "max_abs_diff": diff })
        })
        .collect();
    let body = if list.len() == 1 {
        let mut v = list.into_iter().next().expect("one entry");
        v["alpha"] = json!(common.alpha);
        v
    } else {
        json!({ "alpha": common.alpha, "tables": list })
    };
    emit_json(common, out, &body)
}

fn chain_length(alpha: f64, m: usize, tol: f64) -> Result<usize> {
    let s = ideal_truncated_strategy(&TruncationSpec::new(alpha, m)?)?;
    let (d_a, d_b) = s.dims();
    let spec = schmidt(s.state(), d_a, d_b, ZERO_CUTOFF)?.spectrum;
    Ok(descent_chain(&spec, alpha, tol)?.max_length)
}

fn chain(common: &Common, m_min: usize, m_max: usize, tol: f64, out: &mut dyn Write) -> Result<()> {
    if m_min < 2 || m_max < m_min {
        return Err(Error::param("m_min", format!("need 2 <= m_min <= m_max, got {m_min}..{m_max}")));
    }
    let mut rows = Vec::new();
    for m in m_min..=m_max {
        rows.push((m, chain_length(common.alpha, m, tol)?));
    }
    match common.format {
        Some(Format::Json) => {
            let list: Vec<Value> = rows.iter().map(|(m, l)| json!({ "m": m, "max_chain_length": l })).collect();
            emit_json(common, out, &json!({ "alpha": common.alpha, "rows": list }))
        }
        _ => {
            let rows = rows.iter().map(|(m, l)| vec![m.to_string(), l.to_string()]);
            emit(common, out, &csv_rows(&["M", "max_chain_length"], rows)?)
        }
    }
}

#[derive(Serialize)]
struct Check {
    name: String,
    residual: f64,
    tol: f64,
    passed: bool,
}

impl Check {
    fn new(name: impl Into<String>, residual: f64, tol: f64) -> Check {
        Check { name: name.into(), residual, tol, passed: residual <= tol }
    }
}

/// Runs every check applicable to the strategy and reports all residuals.
/// The construction-specific checks run only for the 4×5-question,
/// 3-answer shape.
fn verify(common: &Common, source: &StrategySource, tol: f64, out: &mut dyn Write) -> Result<Outcome> {
    let s = load_strategy(common, source)?;
    let mut checks = Vec::new();
    let report = s.validate();
    for v in &report.violations {
        let name = format!("validate {:?} side {:?} question {:?} answers {:?}", v.kind, v.side, v.question, v.answers);
        checks.push(Check::new(name, v.residual, v.tolerance));
    }
    if report.is_valid() {
        checks.push(Check::new("validate", 0.0, tol));
    }
    let shaped = s.questions() == (4, 5) && s.answers() == (3, 3);
    if report.is_valid() && shaped {
        let p = s.induce()?;
        let exact = exact_pstar(common.alpha, 1e-12)?;
        // truncation error max_tv <= 4 α^{2D}, with D the smaller local dimension
        let d = s.dims().0.min(s.dims().1) as i32;
        let bound = 4.0 * common.alpha.powi(2 * d);
        checks.push(Check::new("distance to exact correlation (max_tv)", p.distance(&exact, Metric::MaxTv)?, bound.max(tol)));
        let y4 = verify_y4_relations(&s, tol)?;
        for (name, r) in y4.residuals() {
            checks.push(Check::new(format!("y4 {name}"), r, tol));
        }
        if y4.passed {
            match schmidt_partition(&s, tol) {
                Ok(part) => {
                    checks.push(Check::new("schmidt S = S0 ⊔ S1", part.union_match.max_abs_diff, tol));
                    let b = check_bijections(&part, common.alpha, tol)?;
                    let unmatched = if b.passed { 0.0 } else { f64::INFINITY };
                    checks.push(Check::new("schmidt bijections", b.max_abs_diff.max(unmatched), tol));
                    let chain = descent_chain(&part.whole, common.alpha, 1e-6)?;
                    let gap = (chain.max_length as f64 - part.whole.len() as f64).abs();
                    checks.push(Check::new("descent chain covers spectrum", gap, 0.0));
                }
                Err(e) => checks.push(Check::new(format!("schmidt partition: {e}"), f64::INFINITY, tol)),
            }
        }
        let restricted = s.restrict_questions(&[2, 3], &[2, 3])?;
        match strategy_block_decompose(&restricted, &pstar_layout(), tol.max(1e-8)) {
            Ok(d) => {
                let c = 1.0 - common.alpha * common.alpha;
                let w = (d.weights[0] - (1.0 - c)).abs().max((d.weights[1] - c).abs());
                checks.push(Check::new("block weights", w, tol.max(1e-8)));
                checks.push(Check::new("block idempotence", d.diagnostics.idempotence, tol));
            }
            Err(e) => checks.push(Check::new(format!("block decomposition: {e}"), f64::INFINITY, tol)),
        }
    }
    let passed = checks.iter().all(|c| c.passed);
    emit_json(common, out, &json!({ "passed": passed, "checks": checks, "dims": s.dims() }))?;
    Ok(match checks.into_iter().find(|c| !c.passed) {
        Some(c) => Outcome::Failed(Failure { check: c.name, residual: c.residual, tol: c.tol }),
        None => Outcome::Done,
    })
}
