//! `vstate` command-line driver.
//!
//! Every subcommand prints a JSON report on stdout. Exit codes: 0 success,
//! 2 no real eigenvalue or no bifurcation, 3 solver failure or a trace that
//! neither closed nor returned to the annulus, 4 unreadable or malformed
//! input, 5 invalid parameters or state.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use vstate::continuation::{
    newton_correct, trace_loop, velocity_check, Branch, Constraint, Metric, NewtonOptions, TraceOptions,
};
use vstate::io::{branch_paths, load_state, save_state, write_branch, StateFile};
use vstate::linear::{eigenvalues, find_bstar, kernel_data, spectral_condition};
use vstate::reduction::{ellipse_prediction, quadratic_coeffs};
use vstate::{PatchState, ResidualOperator, Sign, SpectralGrid, VStateError};

#[derive(Parser)]
#[command(name = "vstate", version, about = "Doubly connected rotating vortex patches")]
struct Cli {
    /// JSON object whose keys override the command-line flags
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Eigenvalues of the linearized operator at the annulus
    Spectrum(SpectrumArgs),
    /// Degenerate radius b_m^* where the two eigenvalues coincide
    Bstar(BstarArgs),
    /// Quadratic coefficients of the reduced equation and the predicted loop
    Coeffs(CoeffsArgs),
    /// Newton solve at fixed lambda from the annulus plus a kernel perturbation
    Solve(SolveArgs),
    /// Trace the branch bifurcating from lambda_m^sign
    Trace(TraceArgs),
    /// Residual and velocity check of a stored state
    Verify(VerifyArgs),
    /// Independent traces over several b, one output pair per b
    Sweep(SweepArgs),
}

#[derive(Args, Serialize, Deserialize)]
struct SpectrumArgs {
    #[arg(long)]
    m: usize,
    #[arg(long)]
    b: f64,
}

#[derive(Args, Serialize, Deserialize)]
struct BstarArgs {
    #[arg(long)]
    m: usize,
}

#[derive(Args, Serialize, Deserialize)]
struct CoeffsArgs {
    #[arg(long)]
    m: usize,
    #[arg(long)]
    b: f64,
    #[arg(long, default_value = "plus")]
    sign: Sign,
}

#[derive(Args, Clone, Serialize, Deserialize)]
struct GridArgs {
    /// Fourier modes N per boundary
    #[arg(long, default_value_t = 64)]
    modes: usize,
    /// collocation nodes M, default 4Nm
    #[arg(long)]
    nodes: Option<usize>,
    #[arg(long, default_value_t = 1e-12)]
    newton_tol: f64,
}

impl GridArgs {
    fn grid(&self, m: usize) -> vstate::Result<SpectralGrid> {
        match self.nodes {
            Some(nodes) => SpectralGrid::with_nodes(self.modes, m, nodes),
            None => SpectralGrid::new(self.modes, m),
        }
    }

    fn newton(&self) -> NewtonOptions {
        NewtonOptions { tol: self.newton_tol, ..NewtonOptions::default() }
    }
}

#[derive(Args, Serialize, Deserialize)]
struct SolveArgs {
    #[arg(long)]
    m: usize,
    #[arg(long)]
    b: f64,
    #[arg(long, default_value = "plus")]
    sign: Sign,
    #[arg(long, allow_hyphen_values = true)]
    lambda: f64,
    /// multiple of the kernel vector added to the annulus
    #[arg(long, default_value_t = 1e-2, allow_hyphen_values = true)]
    amplitude: f64,
    #[command(flatten)]
    #[serde(flatten)]
    grid: GridArgs,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args, Clone, Serialize, Deserialize)]
struct TraceParams {
    #[arg(long, default_value = "plus")]
    sign: Sign,
    #[arg(long, default_value_t = 1e-3)]
    ds0: f64,
    #[arg(long, default_value_t = 5000)]
    max_steps: usize,
    #[arg(long)]
    max_arclength: Option<f64>,
    #[command(flatten)]
    #[serde(flatten)]
    grid: GridArgs,
}

impl TraceParams {
    fn options(&self) -> TraceOptions {
        TraceOptions {
            max_steps: self.max_steps,
            max_arclength: self.max_arclength.unwrap_or(f64::INFINITY),
            newton: self.grid.newton(),
            ..TraceOptions::with_ds0(self.ds0)
        }
    }
}

#[derive(Args, Serialize, Deserialize)]
struct TraceArgs {
    #[arg(long)]
    m: usize,
    #[arg(long)]
    b: f64,
    #[command(flatten)]
    #[serde(flatten)]
    params: TraceParams,
    /// output stem; `.csv` and `.json` are appended
    #[arg(long, default_value = "branch")]
    output: PathBuf,
}

#[derive(Args, Serialize, Deserialize)]
struct VerifyArgs {
    state: PathBuf,
    /// area cells per direction for the velocity check
    #[arg(long, default_value_t = 400)]
    density: usize,
}

#[derive(Args, Serialize, Deserialize)]
struct SweepArgs {
    #[arg(long)]
    m: usize,
    /// comma-separated radii
    #[arg(long, value_delimiter = ',', required = true)]
    b: Vec<f64>,
    #[command(flatten)]
    #[serde(flatten)]
    params: TraceParams,
    #[arg(long, default_value = ".")]
    output_dir: PathBuf,
    /// worker threads
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

/// Unreadable or malformed configuration.
#[derive(Debug)]
struct ConfigError(String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

fn read_config(path: &Path) -> anyhow::Result<Map<String, Value>> {
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError(format!("{}: {e}", path.display())))?;
    match serde_json::from_str(&text) {
        Ok(Value::Object(map)) => Ok(map),
        Ok(_) => Err(ConfigError(format!("{}: expected a JSON object", path.display())).into()),
        Err(e) => Err(ConfigError(format!("{}: {e}", path.display())).into()),
    }
}

/// Replaces flag values by the config entries of the same name.
fn overlay<T: Serialize + DeserializeOwned>(flags: T, config: Option<&Map<String, Value>>) -> anyhow::Result<T> {
    let Some(config) = config else { return Ok(flags) };
    let mut value = serde_json::to_value(&flags)?;
    let fields = value.as_object_mut().expect("arguments serialize to an object");
    for (key, v) in config {
        if !fields.contains_key(key) {
            return Err(ConfigError(format!("unknown config key {key:?}")).into());
        }
        fields.insert(key.clone(), v.clone());
    }
    serde_json::from_value(value).map_err(|e| ConfigError(format!("config: {e}")).into())
}

fn print(value: &Value) {
    use std::io::Write;
    // a closed pipe downstream is not an error of the command
    let _ = writeln!(std::io::stdout().lock(), "{}", serde_json::to_string_pretty(value).expect("report serializes"));
}

fn spectrum(args: SpectrumArgs) -> anyhow::Result<u8> {
    let eig = eigenvalues(args.m, args.b)?;
    let (omega_minus, omega_plus) = eig.omegas();
    print(&json!({
        "m": args.m,
        "b": args.b,
        "delta": eig.delta,
        "degenerate": eig.delta == 0.0,
        "lambda_minus": eig.minus,
        "lambda_plus": eig.plus,
        "omega_minus": omega_minus,
        "omega_plus": omega_plus,
        "bstar": find_bstar(args.m)?,
        "spectral_condition": spectral_condition(args.m, args.b)?,
    }));
    Ok(0)
}

fn bstar(args: BstarArgs) -> anyhow::Result<u8> {
    print(&json!({ "m": args.m, "bstar": find_bstar(args.m)? }));
    Ok(0)
}

fn coeffs(args: CoeffsArgs) -> anyhow::Result<u8> {
    let q = quadratic_coeffs(args.m, args.b, args.sign)?;
    let ellipse = match ellipse_prediction(&q) {
        Ok(e) => serde_json::to_value(e)?,
        Err(VStateError::NoLoopPredicted { .. }) => Value::Null,
        Err(e) => return Err(e.into()),
    };
    let degenerate = q.a.abs() < 1e-10;
    if degenerate {
        eprintln!("warning: a_m = {:e} vanishes; b is at the degenerate radius and no loop is predicted", q.a);
    }
    print(&json!({ "coefficients": q, "degenerate": degenerate, "ellipse": ellipse }));
    Ok(0)
}

fn solve(args: SolveArgs) -> anyhow::Result<u8> {
    let grid = args.grid.grid(args.m)?;
    let kernel = kernel_data(args.m, args.b, args.sign)?;
    let mut guess = PatchState::annulus(args.m, args.b, args.lambda, args.grid.modes)?;
    guess.outer.coeffs_mut()[0] = args.amplitude * kernel.v1;
    guess.inner.coeffs_mut()[0] = args.amplitude * kernel.v2;
    let op = ResidualOperator::new(grid)?;
    let rep = newton_correct(&guess, &Constraint::FixedLambda, &op, Metric::new(kernel.v_norm()), &args.grid.newton())?;
    if let Some(path) = &args.output {
        save_state(path, &rep.state)?;
    }
    print(&json!({
        "iterations": rep.iterations,
        "residual": rep.residual,
        "residual_sup": rep.residual_sup,
        "t": rep.state.inner.coeffs()[0],
        "state": StateFile::from_state(&rep.state),
    }));
    Ok(0)
}

fn run_trace(m: usize, b: f64, params: &TraceParams, stem: &Path) -> anyhow::Result<(Branch, bool)> {
    let grid = params.grid.grid(m)?;
    let branch = trace_loop(m, b, params.sign, &grid, &params.options())?;
    write_branch(stem, &branch).with_context(|| format!("writing {}", stem.display()))?;
    let success = branch.closed || branch.trivial_hits.len() > 1;
    Ok((branch, success))
}

fn summary(branch: &Branch, stem: &Path) -> Value {
    let (lo, hi) = branch.lambda_range();
    let (csv, sidecar) = branch_paths(stem);
    json!({
        "m": branch.m,
        "b": branch.b,
        "closed": branch.closed,
        "termination": branch.termination,
        "points": branch.points.len(),
        "trivial_hits": branch.trivial_hits,
        "lambda_range": [lo, hi],
        "max_abs_t": branch.max_abs_t(),
        "reflection_distance": branch.reflection_distance(),
        "csv": csv,
        "json": sidecar,
    })
}

fn trace(args: TraceArgs) -> anyhow::Result<u8> {
    let (branch, success) = run_trace(args.m, args.b, &args.params, &args.output)?;
    print(&summary(&branch, &args.output));
    if !success {
        eprintln!("trace ended without closing ({:?}); partial branch written", branch.termination);
        return Ok(3);
    }
    Ok(0)
}

fn verify(args: VerifyArgs) -> anyhow::Result<u8> {
    let state = load_state(&args.state)?;
    let grid = SpectralGrid::new(state.modes().max(1), state.fold())?;
    let residual = ResidualOperator::new(grid)?.residual(&state)?;
    let refined = ResidualOperator::new(grid.refined())?.residual(&state)?;
    let velocity = velocity_check(&state, args.density)?;
    print(&json!({
        "m": state.fold(),
        "b": state.b(),
        "lambda": state.lambda,
        "omega": state.omega(),
        "residual_max_coeff": residual.max_coeff(),
        "residual_sup": residual.sup_norm,
        "residual_sup_refined": refined.sup_norm,
        "velocity_density": args.density,
        "velocity_normal_max": velocity,
    }));
    Ok(0)
}

fn sweep(args: SweepArgs) -> anyhow::Result<u8> {
    if args.jobs == 0 {
        bail!(VStateError::Domain("jobs must be positive".into()));
    }
    std::fs::create_dir_all(&args.output_dir).map_err(|e| ConfigError(format!("{}: {e}", args.output_dir.display())))?;
    let stems: Vec<PathBuf> = args
        .b
        .iter()
        .map(|b| args.output_dir.join(format!("m{}_b{b}_{}", args.m, args.params.sign)))
        .collect();
    let mut results: Vec<Option<anyhow::Result<(Branch, bool)>>> = (0..args.b.len()).map(|_| None).collect();
    for chunk in (0..args.b.len()).collect::<Vec<_>>().chunks(args.jobs) {
        std::thread::scope(|scope| {
            let handles: Vec<_> = chunk
                .iter()
                .map(|&i| {
                    let (args, stems) = (&args, &stems);
                    (i, scope.spawn(move || run_trace(args.m, args.b[i], &args.params, &stems[i])))
                })
                .collect();
            for (i, h) in handles {
                results[i] = Some(h.join().unwrap_or_else(|_| Err(anyhow!("worker panicked"))));
            }
        });
    }
    let mut all_ok = true;
    let mut reports = Vec::new();
    for (i, r) in results.into_iter().enumerate() {
        match r.expect("every radius is traced") {
            Ok((branch, success)) => {
                all_ok &= success;
                reports.push(summary(&branch, &stems[i]));
            }
            Err(e) => {
                all_ok = false;
                reports.push(json!({ "b": args.b[i], "error": format!("{e:#}") }));
            }
        }
    }
    print(&Value::Array(reports));
    Ok(if all_ok { 0 } else { 3 })
}

fn exit_code(err: &anyhow::Error) -> u8 {
    if err.chain().any(|e| e.is::<ConfigError>()) {
        return 4;
    }
    match err.chain().find_map(|e| e.downcast_ref::<VStateError>()) {
        Some(VStateError::NoRealEigenvalue { .. } | VStateError::NoBifurcation { .. }) => 2,
        Some(
            VStateError::NewtonFailure { .. }
            | VStateError::SingularJacobian { .. }
            | VStateError::ReductionSolve { .. }
            | VStateError::NoLoopPredicted { .. },
        ) => 3,
        Some(VStateError::Malformed(_) | VStateError::Io(_)) => 4,
        _ => 5,
    }
}

fn dispatch(cli: Cli) -> anyhow::Result<u8> {
    let config = cli.config.as_deref().map(read_config).transpose()?;
    let config = config.as_ref();
    match cli.command {
        Command::Spectrum(a) => spectrum(overlay(a, config)?),
        Command::Bstar(a) => bstar(overlay(a, config)?),
        Command::Coeffs(a) => coeffs(overlay(a, config)?),
        Command::Solve(a) => solve(overlay(a, config)?),
        Command::Trace(a) => trace(overlay(a, config)?),
        Command::Verify(a) => verify(overlay(a, config)?),
        Command::Sweep(a) => sweep(overlay(a, config)?),
    }
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
