//! The `gpwave` command line: argument parsing and the five subcommands.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::config::{study_config, Command, ConfigError, LoadedConfig, Overrides, RunConfig};
use crate::corrector::{postprocess, Scheme};
use crate::error::{Error, Result};
use crate::estimator::estimate;
use crate::model::{GroundState, GroundStateRecord, Problem};
use crate::oracle::DenseOracle;
use crate::solver::{solve_ground_state, solve_with_trace, Method};
use crate::spectral::{make_basis, GridField};
use crate::study::{cache_dir_from_env, run_study, write_outputs};

pub const EXIT_OK: i32 = 0;
pub const EXIT_OTHER: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NONCONVERGENCE: i32 = 3;
pub const EXIT_PRECONDITION: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "gpwave", version, about = "Planewave ground states of periodic Gross-Pitaevskii problems")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Sub,
}

#[derive(Debug, Subcommand)]
pub enum Sub {
    /// Discrete ground state on X_M; writes ground_state.json, field.csv and trace.csv.
    Solve(CommonArgs),
    /// Post-processing corrections; writes correction_<scheme>.json per scheme.
    Postprocess(CommonArgs),
    /// A posteriori bounds and the certificate; writes estimate.json and estimate.txt.
    Estimate(CommonArgs),
    /// Convergence study; writes study.csv, report.json and plot_study.py.
    Study(CommonArgs),
    /// Dense brute-force solve for small bases; writes oracle_ground_state.json.
    Oracle(CommonArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum SchemeArg {
    Newton,
    Tg1,
    Tg2a,
    Tg2b,
    Pert,
}

impl From<SchemeArg> for Scheme {
    fn from(s: SchemeArg) -> Self {
        match s {
            SchemeArg::Newton => Scheme::Newton,
            SchemeArg::Tg1 => Scheme::Tg1,
            SchemeArg::Tg2a => Scheme::Tg2a,
            SchemeArg::Tg2b => Scheme::Tg2b,
            SchemeArg::Pert => Scheme::Pert,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum MethodArg {
    Scf,
    GradientFlow,
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// TOML run configuration.
    pub config: PathBuf,
    /// Planewave cutoff M (overrides [basis] cutoff).
    #[arg(long = "cutoff", short = 'M')]
    pub cutoff: Option<usize>,
    #[arg(long)]
    pub fine_factor: Option<usize>,
    /// Post-processing scheme; repeat for several.
    #[arg(long = "scheme", value_enum)]
    pub schemes: Vec<SchemeArg>,
    #[arg(long, value_enum)]
    pub method: Option<MethodArg>,
    /// Outer residual tolerance of the ground-state solver.
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Skip the Newton–Kantorovich check.
    #[arg(long)]
    pub no_certificate: bool,
    /// Study cutoffs, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub cutoffs: Option<Vec<usize>>,
    #[arg(long)]
    pub reference_cutoff: Option<usize>,
    /// Output directory (overrides [output] dir).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Reuse a ground_state.json instead of solving (postprocess, estimate).
    #[arg(long)]
    pub ground_state: Option<PathBuf>,
}

impl CommonArgs {
    fn overrides(&self) -> Overrides {
        Overrides {
            cutoff: self.cutoff,
            fine_factor: self.fine_factor,
            schemes: self.schemes.iter().map(|&s| s.into()).collect(),
            method: self.method.map(|m| match m {
                MethodArg::Scf => Method::Scf,
                MethodArg::GradientFlow => Method::GradientFlow,
            }),
            tol: self.tol,
            seed: self.seed,
            certificate: self.no_certificate.then_some(false),
            cutoffs: self.cutoffs.clone(),
            reference_cutoff: self.reference_cutoff,
            out: self.out.clone(),
        }
    }
}

/// Exit code for a library error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::NonConvergence { .. } | Error::Stagnation { .. } | Error::DegenerateGroundState { .. } => EXIT_NONCONVERGENCE,
        Error::CertificateUnsupported(_)
        | Error::FineSpaceTooSmall { .. }
        | Error::OracleTooLarge { .. }
        | Error::DiagonalNotInvertible { .. }
        | Error::NearSingularBvp { .. }
        | Error::CoercivityViolated { .. }
        | Error::IndefiniteOperator { .. }
        | Error::CorrectionTooLarge { .. }
        | Error::BasisMismatch(_) => EXIT_PRECONDITION,
        Error::UnsupportedDimension(_) | Error::BasisTooLarge { .. } | Error::InvalidInput(_) => EXIT_CONFIG,
        _ => EXIT_OTHER,
    }
}

/// Failure of a subcommand: a configuration problem or a library error.
#[derive(Debug)]
pub enum CliError {
    Config(ConfigError),
    Run(Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Run(e) => exit_code(e),
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(e) => e.fmt(f),
            CliError::Run(e) => e.fmt(f),
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e)
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Run(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Run(e.into())
    }
}

/// Everything a subcommand needs after validation.
struct Context {
    cfg: RunConfig,
    problem: Problem,
    out: PathBuf,
}

impl Context {
    fn new(args: &CommonArgs, cmd: Command) -> std::result::Result<Self, ConfigError> {
        let cfg = LoadedConfig::load(&args.config)?.resolve(cmd, &args.overrides())?;
        let problem = cfg
            .problem
            .as_ref()
            .expect("validated")
            .build()
            .map_err(|e| ConfigError {
                file: args.config.display().to_string(),
                line: None,
                message: e.to_string(),
            })?;
        let out = cfg.output.dir.clone();
        Ok(Self { cfg, problem, out })
    }

    fn cutoff(&self) -> usize {
        self.cfg.basis.as_ref().expect("validated").cutoff
    }

    /// Fine basis for a coarse state, which may come from a file with its own cutoff.
    fn fine_basis(&self, gs: &GroundState) -> Result<crate::spectral::BasisSpec> {
        let factor = self.cfg.basis.as_ref().expect("validated").fine_factor;
        make_basis(self.problem.dim(), gs.basis.cutoff() * factor)
    }

    fn ground_state(&self, from: Option<&Path>) -> Result<GroundState> {
        if let Some(path) = from {
            let record: GroundStateRecord = serde_json::from_str(&fs::read_to_string(path)?)?;
            let gs = GroundState::from_record(&record)?;
            if gs.basis.dim() != self.problem.dim() {
                return Err(Error::BasisMismatch(format!(
                    "ground state is {}-dimensional, problem is {}-dimensional",
                    gs.basis.dim(),
                    self.problem.dim()
                )));
            }
            return Ok(gs);
        }
        let m = self.cutoff();
        solve_ground_state(&self.problem, &make_basis(self.problem.dim(), m)?, &self.cfg.solver)
    }
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

fn field_csv(gs: &GroundState) -> String {
    let d = gs.basis.dim();
    let mut out = ["x", "y", "z"][..d].join(",");
    out.push_str(",u\n");
    let values = gs.u.grid_real();
    for (node, v) in GridField::nodes(&gs.basis).iter().zip(values) {
        for x in &node[..d] {
            out.push_str(&format!("{x:?},"));
        }
        out.push_str(&format!("{v:?}\n"));
    }
    out
}

pub fn cmd_solve(args: &CommonArgs) -> std::result::Result<(), CliError> {
    let ctx = Context::new(args, Command::Solve)?;
    let m = ctx.cutoff();
    let (gs, trace) = solve_with_trace(&ctx.problem, &make_basis(ctx.problem.dim(), m)?, &ctx.cfg.solver)?;
    fs::create_dir_all(&ctx.out)?;
    write_json(&ctx.out.join("ground_state.json"), &gs.to_record())?;
    fs::write(ctx.out.join("field.csv"), field_csv(&gs))?;
    fs::write(ctx.out.join("trace.csv"), trace.to_csv())?;
    println!(
        "M={} lambda={:.15} energy={:.15} residual={:.3e} iterations={}",
        m, gs.lambda, gs.energy, gs.residual_dual_norm, gs.iterations
    );
    Ok(())
}

pub fn cmd_postprocess(args: &CommonArgs) -> std::result::Result<(), CliError> {
    let ctx = Context::new(args, Command::Postprocess)?;
    let gs = ctx.ground_state(args.ground_state.as_deref())?;
    let fine = ctx.fine_basis(&gs)?;
    fs::create_dir_all(&ctx.out)?;
    for &scheme in &ctx.cfg.schemes.selected {
        let corr = postprocess(&ctx.problem, &gs, &fine, scheme, &ctx.cfg.linear)?;
        write_json(&ctx.out.join(format!("correction_{}.json", scheme.name())), &corr.to_record())?;
        println!(
            "{:<6} lambda_hat={:.15} energy_hat={:.15} |w|_H1={:.3e}",
            scheme.name(),
            corr.lambda_hat,
            corr.energy_hat,
            corr.w_hat.norm_h1()
        );
    }
    Ok(())
}

pub fn cmd_estimate(args: &CommonArgs) -> std::result::Result<(), CliError> {
    let ctx = Context::new(args, Command::Estimate)?;
    let gs = ctx.ground_state(args.ground_state.as_deref())?;
    let fine = ctx.fine_basis(&gs)?;
    let report = estimate(&ctx.problem, &gs, &fine, &ctx.cfg.linear, ctx.cfg.estimator.certificate)?;
    fs::create_dir_all(&ctx.out)?;
    write_json(&ctx.out.join("estimate.json"), &report)?;
    let table = report.to_table();
    fs::write(ctx.out.join("estimate.txt"), &table)?;
    print!("{table}");
    Ok(())
}

pub fn cmd_study(args: &CommonArgs) -> std::result::Result<(), CliError> {
    let ctx = Context::new(args, Command::Study)?;
    let spec = ctx.cfg.problem.clone().expect("validated");
    let report = run_study(&spec, &study_config(&ctx.cfg), cache_dir_from_env().as_deref())?;
    write_outputs(&report, &ctx.out)?;
    for r in &report.relations {
        let slope = r.fit.map_or("-".to_string(), |f| format!("{:.3}", f.slope));
        println!("{} {:<36} slope {slope} in [{}, {}]", pass(r.pass), r.name, r.window[0], r.window[1]);
    }
    for c in &report.properties {
        println!("{} {}", pass(c.pass), c.name);
    }
    Ok(())
}

fn pass(ok: bool) -> &'static str {
    if ok {
        "PASS"
    } else {
        "FAIL"
    }
}

pub fn cmd_oracle(args: &CommonArgs) -> std::result::Result<(), CliError> {
    let ctx = Context::new(args, Command::Oracle)?;
    let m = ctx.cutoff();
    let oracle = DenseOracle::new(&ctx.problem, &make_basis(ctx.problem.dim(), m)?)?;
    let gs = oracle.solve()?;
    fs::create_dir_all(&ctx.out)?;
    write_json(&ctx.out.join("oracle_ground_state.json"), &gs.to_record())?;
    println!("M={} lambda={:.15} energy={:.15}", m, gs.lambda, gs.energy);
    Ok(())
}

/// Parses `args` (program name first), runs the subcommand and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    let outcome = match &cli.command {
        Sub::Solve(a) => cmd_solve(a),
        Sub::Postprocess(a) => cmd_postprocess(a),
        Sub::Estimate(a) => cmd_estimate(a),
        Sub::Study(a) => cmd_study(a),
        Sub::Oracle(a) => cmd_oracle(a),
    };
    match outcome {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
