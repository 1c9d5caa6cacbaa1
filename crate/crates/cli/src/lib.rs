//! Command-line front end: CSV ingestion, solver dispatch and run artifacts.
//!
//! Every solver run writes, under `--out DIR`:
//!
//! - `factors/*.csv`, one file per factor;
//! - `trace.jsonl`, one `{"iter","loss","elapsed_s"}` object per iteration,
//!   starting with the initial loss at `iter = 0`;
//! - `manifest.json`, the flags, the traced loss quantity and the stop reason.

mod csv_io;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use lowrank_core::adapters::{audit_capped, AdapterShape};
use lowrank_core::hadamard::{self, HadamardFactors, ResidualMode};
use lowrank_core::matops::DEFAULT_SIZE_CAP;
use lowrank_core::{
    als, khatri_rao, kronecker, AdapterKind, AdapterSpec, AlsFactors, BlockingScheme, ConvergenceTrace, DenseMatrix,
    FitConfig, KrFactors, KronFactors, LowRankError, StopReason,
};

pub use csv_io::{load_matrix_csv, save_matrix_csv};

/// Env var overriding the Kronecker materialization cap.
pub const SIZE_CAP_ENV: &str = "LOWRANK_SIZE_CAP";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("io: {0}")]
    Io(String),
    #[error("ragged CSV: row {row} has {got} cells, expected {expected}")]
    RaggedRows { row: usize, expected: usize, got: usize },
    #[error("unparsable CSV cell at row {row}, column {col}: '{text}'")]
    UnparsableCell { row: usize, col: usize, text: String },
    #[error("usage: {0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] LowRankError),
}

#[derive(Debug, Parser)]
#[command(name = "lowrank", version, about = "Structured low-rank matrix decompositions")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// ALS `A ≈ WZ`: plain when λ = 0, regularized otherwise, masked when the CSV has missing cells.
    Als(FitArgs),
    /// Masked ALS (matrix completion).
    AlsMasked(FitArgs),
    /// Hadamard decomposition `A ≈ (C1 D1) ∘ (C2 D2)`.
    Hadamard(HadamardArgs),
    /// Kronecker decomposition `A ≈ B ⊗ C`.
    Kron(KronArgs),
    /// Two-factor Khatri-Rao decomposition `A ≈ B ⊙ C`.
    Khatri(KrArgs),
    /// Khatri-Rao cascade `A ≈ A1 ⊙ … ⊙ Ak`.
    Cascade(KrArgs),
    /// Parameter and rank accounting for a LoRA-family adapter.
    AdapterAudit(AuditArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Clock {
    /// Write `elapsed_s = 0`, keeping outputs byte-identical across runs.
    None,
    Wall,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Residual {
    Fresh,
    Stale,
}

#[derive(Debug, Clone, Args)]
pub struct FitArgs {
    /// Input matrix CSV; empty or NaN cells are missing.
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 2)]
    pub rank: usize,
    #[arg(long, default_value_t = 0.0)]
    pub lambda_w: f64,
    #[arg(long, default_value_t = 0.0)]
    pub lambda_z: f64,
    #[arg(long, default_value_t = 1e-2)]
    pub step: f64,
    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,
    #[arg(long, default_value_t = 500)]
    pub max_iters: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1)]
    pub threads: usize,
    #[arg(long, value_enum, default_value_t = Clock::None)]
    pub clock: Clock,
}

impl FitArgs {
    fn config(&self) -> FitConfig {
        FitConfig {
            rank: self.rank,
            lambda_w: self.lambda_w,
            lambda_z: self.lambda_z,
            step: self.step,
            tol: self.tol,
            max_iters: self.max_iters,
            seed: self.seed,
            threads: self.threads.max(1),
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct HadamardArgs {
    #[command(flatten)]
    pub fit: FitArgs,
    /// `stale` reuses one residual for all four factor steps of an iteration.
    #[arg(long, value_enum, default_value_t = Residual::Fresh)]
    pub residual: Residual,
}

#[derive(Debug, Clone, Args)]
pub struct KronArgs {
    #[command(flatten)]
    pub fit: FitArgs,
    /// `m1xm2,n1xn2`.
    #[arg(long)]
    pub blocking: String,
}

#[derive(Debug, Clone, Args)]
pub struct KrArgs {
    #[command(flatten)]
    pub fit: FitArgs,
    /// Row counts of the factors, e.g. `2,3,2`.
    #[arg(long, value_delimiter = ',', required = true)]
    pub factor_rows: Vec<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct AuditArgs {
    #[arg(long)]
    pub adapter_kind: AdapterKind,
    /// Base weight CSV; its shape fixes `m x n`. Without it, `--rows`/`--cols` and a zero base.
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub rows: Option<usize>,
    #[arg(long)]
    pub cols: Option<usize>,
    /// `r` for LoRA, `r̄` for LoHA and LoKH, inner `k` for factored LoKr.
    #[arg(long, default_value_t = 2)]
    pub rank: usize,
    /// LoKr blocking `m1xm2,n1xn2`.
    #[arg(long)]
    pub blocking: Option<String>,
    #[arg(long, default_value_t = 1.0)]
    pub alpha: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Zero the leftmost factor so `ΔW = 0`.
    #[arg(long)]
    pub zero_init: bool,
    /// Also write `report.json` and `manifest.json` here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Echo of a run, written as `manifest.json`.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub subcommand: &'static str,
    pub input: Option<String>,
    pub out: Option<String>,
    pub config: Option<FitConfig>,
    pub clock: Option<Clock>,
    pub residual: Option<Residual>,
    pub blocking: Option<String>,
    pub factor_rows: Option<Vec<usize>>,
    pub adapter_kind: Option<AdapterKind>,
    pub alpha: Option<f64>,
    pub zero_init: Option<bool>,
    pub masked: bool,
    pub loss_quantity: &'static str,
    pub stop_reason: Option<StopReason>,
    pub iterations: usize,
    pub final_loss: Option<f64>,
}

impl RunManifest {
    fn new(subcommand: &'static str) -> Self {
        Self {
            subcommand,
            input: None,
            out: None,
            config: None,
            clock: None,
            residual: None,
            blocking: None,
            factor_rows: None,
            adapter_kind: None,
            alpha: None,
            zero_init: None,
            masked: false,
            loss_quantity: "none",
            stop_reason: None,
            iterations: 0,
            final_loss: None,
        }
    }

    fn for_fit(subcommand: &'static str, args: &FitArgs) -> Self {
        Self {
            input: Some(args.input.display().to_string()),
            out: Some(args.out.display().to_string()),
            config: Some(args.config()),
            clock: Some(args.clock),
            ..Self::new(subcommand)
        }
    }
}

/// Exit code for a finished solver run: 0 on tolerance, 2 at the iteration cap.
pub fn exit_code(stop: Option<StopReason>) -> i32 {
    match stop {
        Some(StopReason::IterationCap) => 2,
        _ => 0,
    }
}

/// `m1xm2,n1xn2` → blocking scheme.
pub fn parse_blocking(s: &str) -> Result<BlockingScheme, CliError> {
    let bad = || CliError::Usage(format!("--blocking expects m1xm2,n1xn2, got '{s}'"));
    let pair = |p: &str| -> Result<(usize, usize), CliError> {
        let (a, b) = p.trim().split_once(['x', 'X']).ok_or_else(bad)?;
        Ok((
            a.trim().parse().map_err(|_| bad())?,
            b.trim().parse().map_err(|_| bad())?,
        ))
    };
    let (rows, cols) = s.split_once(',').ok_or_else(bad)?;
    let ((m1, m2), (n1, n2)) = (pair(rows)?, pair(cols)?);
    Ok(BlockingScheme::new(m1, m2, n1, n2)?)
}

/// Reads the `LOWRANK_SIZE_CAP` override.
pub fn size_cap() -> Result<usize, CliError> {
    match std::env::var(SIZE_CAP_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| CliError::Usage(format!("{SIZE_CAP_ENV} must be a positive integer, got '{v}'"))),
        Err(_) => Ok(DEFAULT_SIZE_CAP),
    }
}

/// Executes one invocation and returns the process exit code.
pub fn run(cli: &Cli) -> Result<i32, CliError> {
    let manifest = match &cli.command {
        Command::Als(a) => run_als(a, false)?,
        Command::AlsMasked(a) => run_als(a, true)?,
        Command::Hadamard(a) => run_hadamard(a)?,
        Command::Kron(a) => run_kron(a)?,
        Command::Khatri(a) => run_kr(a, "khatri")?,
        Command::Cascade(a) => run_kr(a, "cascade")?,
        Command::AdapterAudit(a) => run_audit(a)?,
    };
    Ok(exit_code(manifest.stop_reason))
}

fn run_als(args: &FitArgs, force_masked: bool) -> Result<RunManifest, CliError> {
    let (a, mask) = load_matrix_csv(&args.input)?;
    let cfg = args.config();
    let (m, n) = a.shape();
    let mut rng = cfg.rng();
    let masked = force_masked || !mask.is_all_ones();
    let sub = if force_masked { "als-masked" } else { "als" };
    let (f, trace, quantity) = if masked {
        let init = AlsFactors::random(m, n, cfg.rank, &mut rng);
        let (f, t) = als::fit_masked(&a, &mask, &cfg, init)?;
        (f, t, "masked_squared_frobenius")
    } else if cfg.lambda_w == 0.0 && cfg.lambda_z == 0.0 {
        let init = AlsFactors::random_full_rank(m, n, cfg.rank, &mut rng)?;
        let (f, t) = als::fit_plain(&a, &cfg, init)?;
        (f, t, "frobenius_norm")
    } else {
        let init = AlsFactors::random(m, n, cfg.rank, &mut rng);
        let (f, t) = als::fit_regularized(&a, &cfg, init)?;
        (f, t, "regularized_objective")
    };
    let mut manifest = RunManifest {
        masked,
        loss_quantity: quantity,
        ..RunManifest::for_fit(sub, args)
    };
    write_run(args, &mut manifest, &trace, &[("W", &f.w), ("Z", &f.z)])?;
    Ok(manifest)
}

fn run_hadamard(args: &HadamardArgs) -> Result<RunManifest, CliError> {
    let fit = &args.fit;
    let (a, mask) = load_matrix_csv(&fit.input)?;
    let cfg = fit.config();
    let init = HadamardFactors::random(a.rows(), a.cols(), cfg.rank, &mut cfg.rng());
    let masked = !mask.is_all_ones();
    let (f, trace) = if masked {
        hadamard::fit_masked(&a, &mask, &cfg, init)?
    } else {
        let mode = match args.residual {
            Residual::Fresh => ResidualMode::Fresh,
            Residual::Stale => ResidualMode::Stale,
        };
        hadamard::fit_with(&a, &cfg, init, mode)?
    };
    let mut manifest = RunManifest {
        masked,
        residual: Some(args.residual),
        loss_quantity: loss_name(masked),
        ..RunManifest::for_fit("hadamard", fit)
    };
    write_run(
        fit,
        &mut manifest,
        &trace,
        &[("C1", &f.c1), ("D1", &f.d1), ("C2", &f.c2), ("D2", &f.d2)],
    )?;
    Ok(manifest)
}

fn run_kron(args: &KronArgs) -> Result<RunManifest, CliError> {
    let fit = &args.fit;
    let s = parse_blocking(&args.blocking)?;
    let (a, mask) = load_matrix_csv(&fit.input)?;
    s.check(a.shape())?;
    let cfg = fit.config();
    let init = KronFactors::random(&s, &mut cfg.rng());
    let masked = !mask.is_all_ones();
    let (f, trace) = kronecker::fit(&a, &s, &cfg, init, masked.then_some(&mask))?;
    let mut manifest = RunManifest {
        masked,
        blocking: Some(args.blocking.clone()),
        loss_quantity: loss_name(masked),
        ..RunManifest::for_fit("kron", fit)
    };
    write_run(fit, &mut manifest, &trace, &[("B", &f.b), ("C", &f.c)])?;
    Ok(manifest)
}

fn run_kr(args: &KrArgs, sub: &'static str) -> Result<RunManifest, CliError> {
    let fit = &args.fit;
    let rows = &args.factor_rows;
    if sub == "khatri" && rows.len() != 2 {
        return Err(CliError::Usage(format!(
            "khatri needs exactly 2 --factor-rows, got {}",
            rows.len()
        )));
    }
    let (a, mask) = load_matrix_csv(&fit.input)?;
    let cfg = fit.config();
    let init = KrFactors::random(rows, a.cols(), &mut cfg.rng());
    let masked = !mask.is_all_ones();
    let (f, trace) = if masked {
        khatri_rao::fit_cascade_masked(&a, &mask, &cfg, init)?
    } else if sub == "khatri" {
        khatri_rao::fit_pair(&a, &cfg, init)?
    } else {
        khatri_rao::fit_cascade(&a, &cfg, init)?
    };
    let names: Vec<String> = if sub == "khatri" {
        vec!["B".into(), "C".into()]
    } else {
        (1..=f.len()).map(|t| format!("A{t}")).collect()
    };
    let named: Vec<(&str, &DenseMatrix)> = names.iter().map(String::as_str).zip(&f.factors).collect();
    let mut manifest = RunManifest {
        masked,
        factor_rows: Some(rows.clone()),
        loss_quantity: loss_name(masked),
        ..RunManifest::for_fit(sub, fit)
    };
    write_run(fit, &mut manifest, &trace, &named)?;
    Ok(manifest)
}

fn loss_name(masked: bool) -> &'static str {
    if masked {
        "masked_squared_frobenius"
    } else {
        "squared_frobenius"
    }
}

fn run_audit(args: &AuditArgs) -> Result<RunManifest, CliError> {
    let base = match (&args.input, args.rows, args.cols) {
        (Some(p), _, _) => load_matrix_csv(p)?.0,
        (None, Some(r), Some(c)) => DenseMatrix::zeros(r, c),
        _ => {
            return Err(CliError::Usage(
                "adapter-audit needs --input or both --rows and --cols".into(),
            ))
        }
    };
    let (m, n) = base.shape();
    let blocking = || -> Result<BlockingScheme, CliError> {
        let s = args
            .blocking
            .as_deref()
            .ok_or_else(|| CliError::Usage(format!("{} needs --blocking m1xm2,n1xn2", args.adapter_kind)))?;
        parse_blocking(s)
    };
    let shape = match args.adapter_kind {
        AdapterKind::Lora => AdapterShape::Lora { m, n, r: args.rank },
        AdapterKind::Loha => AdapterShape::Loha { m, n, r: args.rank },
        AdapterKind::Lokr => {
            let s = blocking()?;
            AdapterShape::Lokr {
                m1: s.m1,
                m2: s.m2,
                n1: s.n1,
                n2: s.n2,
            }
        }
        AdapterKind::LokrFactored => {
            let s = blocking()?;
            AdapterShape::LokrFactored {
                m1: s.m1,
                m2: s.m2,
                n1: s.n1,
                n2: s.n2,
                k: args.rank,
            }
        }
        AdapterKind::Lokh => AdapterShape::lokh_for(m, n, args.rank)?,
    };
    let mut rng = FitConfig {
        seed: args.seed,
        ..FitConfig::default()
    }
    .rng();
    let factors = shape.random_factors(args.zero_init, &mut rng)?;
    let spec = AdapterSpec::new(base, vec![0.0; m], args.alpha, factors)?;
    let report = audit_capped(&spec, size_cap()?);
    let json = serde_json::to_string(&report).map_err(|e| CliError::Io(e.to_string()))?;
    println!("{json}");

    let manifest = RunManifest {
        input: args.input.as_ref().map(|p| p.display().to_string()),
        out: args.out.as_ref().map(|p| p.display().to_string()),
        blocking: args.blocking.clone(),
        adapter_kind: Some(args.adapter_kind),
        alpha: Some(args.alpha),
        zero_init: Some(args.zero_init),
        ..RunManifest::new("adapter-audit")
    };
    if let Some(out) = &args.out {
        fs::create_dir_all(out).map_err(|e| io_err(out, e))?;
        write_file(&out.join("report.json"), format!("{json}\n").as_bytes())?;
        write_json(&out.join("manifest.json"), &manifest)?;
    }
    Ok(manifest)
}

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    fs::write(path, bytes).map_err(|e| io_err(path, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| CliError::Io(e.to_string()))?;
    s.push('\n');
    write_file(path, s.as_bytes())
}

#[derive(Serialize)]
struct TraceLine {
    iter: usize,
    loss: f64,
    elapsed_s: f64,
}

/// One JSON line per iteration, beginning with the initial loss at `iter = 0`.
pub fn trace_jsonl(trace: &ConvergenceTrace, clock: Clock) -> String {
    let first = TraceLine {
        iter: 0,
        loss: trace.initial_loss,
        elapsed_s: 0.0,
    };
    let rest = trace.records.iter().map(|r| TraceLine {
        iter: r.iter,
        loss: r.loss,
        elapsed_s: if clock == Clock::Wall { r.elapsed_s } else { 0.0 },
    });
    let mut out = String::new();
    for line in std::iter::once(first).chain(rest) {
        out.push_str(&serde_json::to_string(&line).expect("plain struct"));
        out.push('\n');
    }
    out
}

fn write_run(
    args: &FitArgs,
    manifest: &mut RunManifest,
    trace: &ConvergenceTrace,
    factors: &[(&str, &DenseMatrix)],
) -> Result<(), CliError> {
    manifest.stop_reason = Some(trace.stop);
    manifest.iterations = trace.iterations();
    manifest.final_loss = Some(trace.final_loss());

    let dir = args.out.join("factors");
    fs::create_dir_all(&dir).map_err(|e| io_err(&dir, e))?;
    for (name, m) in factors {
        save_matrix_csv(&dir.join(format!("{name}.csv")), m, None)?;
    }
    let trace_path = args.out.join("trace.jsonl");
    let mut file = fs::File::create(&trace_path).map_err(|e| io_err(&trace_path, e))?;
    file.write_all(trace_jsonl(trace, args.clock).as_bytes())
        .map_err(|e| io_err(&trace_path, e))?;
    write_json(&args.out.join("manifest.json"), manifest)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn blocking_parsing() {
        assert_eq!(
            parse_blocking("2x3,4x1").unwrap(),
            BlockingScheme::new(2, 3, 4, 1).unwrap()
        );
        assert_eq!(
            parse_blocking(" 2 X 3 , 4x1 ").unwrap(),
            BlockingScheme::new(2, 3, 4, 1).unwrap()
        );
        for bad in ["2x3", "2x3,4", "ax3,4x1", "0x3,4x1"] {
            assert!(parse_blocking(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn exit_codes() {
        assert_eq!(exit_code(Some(StopReason::Tolerance)), 0);
        assert_eq!(exit_code(Some(StopReason::IterationCap)), 2);
        assert_eq!(exit_code(None), 0);
    }

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
