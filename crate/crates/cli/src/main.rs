//! Command-line front end: every operation of the toolkit behind
//! reproducible, machine-readable commands.
//!
//! Exit codes: 0 success, 2 invalid input, 3 numerical failure,
//! 4 acceptance failure.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use emdencap::branch;
use emdencap::integrate::{self, IntegratorConfig};
use emdencap::io as eio;
use emdencap::model::{self, Params};
use emdencap::phase;
use emdencap::singular;
use emdencap::spectral;
use emdencap::verify;
use emdencap::Error as CoreError;

#[derive(Parser)]
#[command(name = "emdencap", version, about = "Shooting-method toolkit for the Emden-Fowler equation on spherical caps")]
struct Cli {
    /// JSON config file with defaults; explicit flags override its values
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Relative integration tolerance
    #[arg(long, global = true)]
    rel_tol: Option<f64>,

    /// Absolute integration tolerance
    #[arg(long, global = true)]
    abs_tol: Option<f64>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct ParamArgs {
    /// Sphere dimension N >= 3
    #[arg(long = "N")]
    n: Option<u32>,

    /// Nonlinearity exponent p > 1
    #[arg(long)]
    p: Option<f64>,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum FrameArg {
    /// Cap equation in the polar angle
    Sphere,
    /// Stereographic frame
    Stereo,
    /// Flat limit equation
    Flat,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum OrbitKind {
    Flat,
    Cap,
}

#[derive(Subcommand)]
enum Command {
    /// Print derived exponents and the regime classification as JSON
    Exponents {
        #[command(flatten)]
        params: ParamArgs,
    },
    /// One shooting integration up to the first zero; writes a profile CSV
    Shoot {
        #[command(flatten)]
        params: ParamArgs,
        /// Center value: U(0) = Gamma (sphere), u(0) = gamma (stereo), or
        /// gamma_bar (flat)
        #[arg(long)]
        gamma: f64,
        #[arg(long, value_enum, default_value = "sphere")]
        frame: FrameArg,
        /// Integration range for the flat frame
        #[arg(long, default_value_t = 50.0)]
        rho_max: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Trace the bifurcation branch Gamma -> Theta(Gamma); CSV + JSON sidecar
    Branch {
        #[command(flatten)]
        params: ParamArgs,
        #[arg(long, default_value_t = 1e-2)]
        gamma_min: f64,
        #[arg(long, default_value_t = 1e4)]
        gamma_max: f64,
        /// Points on the initial log grid
        #[arg(long, default_value_t = 121)]
        points: usize,
        /// Count oscillations around this reference angle (e.g. Theta*)
        #[arg(long)]
        theta_star: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Construct the singular solution and Theta*; CSV + JSON sidecar
    Singular {
        #[command(flatten)]
        params: ParamArgs,
        /// Start offset for the asymptotic construction
        #[arg(long, default_value_t = singular::DEFAULT_SINGULAR_START)]
        theta0: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Phase-plane orbit with Lyapunov/energy traces and equilibrium report
    Phase {
        #[command(flatten)]
        params: ParamArgs,
        #[arg(long, value_enum, default_value = "flat")]
        kind: OrbitKind,
        /// Center value: gamma_bar (flat) or stereographic gamma (cap)
        #[arg(long, default_value_t = 1.0)]
        gamma: f64,
        #[arg(long, default_value_t = -20.0)]
        t_start: f64,
        #[arg(long, default_value_t = 40.0)]
        t_end: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// First cap eigenvalue lambda1(Theta) by shooting, or a Bessel-limit scan
    Eigen {
        #[command(flatten)]
        params: ParamArgs,
        #[arg(long)]
        theta: Option<f64>,
        /// Scan 2 sqrt(lambda) r1(lambda) against the Bessel limit
        #[arg(long, value_delimiter = ',')]
        bessel_lambdas: Option<Vec<f64>>,
    },
    /// Nonexistence bound and certificate; optional (Theta, p) region scan
    Bounds {
        #[command(flatten)]
        params: ParamArgs,
        /// Certify nonexistence on the cap of this radius
        #[arg(long)]
        theta: Option<f64>,
        /// Emit a CSV grid of certificates over (Theta, p)
        #[arg(long)]
        scan: bool,
        #[arg(long, default_value_t = 0.3)]
        theta_min: f64,
        #[arg(long, default_value_t = 3.1)]
        theta_max: f64,
        #[arg(long, default_value_t = 24)]
        theta_points: usize,
        #[arg(long, default_value_t = 6.0)]
        p_min: f64,
        #[arg(long, default_value_t = 40.0)]
        p_max: f64,
        #[arg(long, default_value_t = 12)]
        p_points: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// p -> 1 limit objects: Theta_dagger, Gamma_dagger, and the Gamma(p) trend
    LimitP1 {
        #[command(flatten)]
        params: ParamArgs,
        /// Cap radius for the Gamma(p) trend (defaults to Theta_dagger)
        #[arg(long)]
        theta: Option<f64>,
        #[arg(long, value_delimiter = ',', default_value = "1.5,1.2,1.1,1.05")]
        p_list: Vec<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the acceptance suite and print a pass/fail table
    Verify {
        /// all, critical-n3, supercritical-n3, identities, bounds,
        /// limits-p1, bessel, or variational
        #[arg(long, default_value = "all")]
        suite: String,
        /// Write the full report as JSON
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// On-disk defaults; every field optional, flags win.
#[derive(Debug, Default, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    n: Option<u32>,
    p: Option<f64>,
    rel_tol: Option<f64>,
    abs_tol: Option<f64>,
    theta_start: Option<f64>,
    max_steps: Option<usize>,
}

/// Fully resolved run configuration, echoed (hashed) into outputs.
#[derive(Debug, Clone, Serialize)]
struct RunConfig {
    command: String,
    n: u32,
    p: f64,
    integrator: IntegratorConfig,
}

impl RunConfig {
    fn hash(&self) -> String {
        eio::config_hash(&serde_json::to_string(self).expect("config serializes"))
    }
}

fn load_file_config(path: Option<&Path>) -> Result<FileConfig, CliError> {
    match path {
        None => Ok(FileConfig::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| CliError::Input(format!("cannot read config {}: {e}", p.display())))?;
            serde_json::from_str(&text).map_err(|e| CliError::Input(format!("bad config {}: {e}", p.display())))
        }
    }
}

enum CliError {
    Input(String),
    Numerical(String),
    AcceptanceFailed,
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::InvalidParams(_) | CoreError::InvalidConfig(_) | CoreError::OutOfRange(_) => {
                CliError::Input(e.to_string())
            }
            other => CliError::Numerical(other.to_string()),
        }
    }
}

struct Ctx {
    file: FileConfig,
    rel_tol: Option<f64>,
    abs_tol: Option<f64>,
}

impl Ctx {
    fn integrator(&self) -> IntegratorConfig {
        let mut cfg = IntegratorConfig::default();
        if let Some(v) = self.file.rel_tol {
            cfg.rel_tol = v;
        }
        if let Some(v) = self.file.abs_tol {
            cfg.abs_tol = v;
        }
        if let Some(v) = self.file.theta_start {
            cfg.theta_start = v;
        }
        if let Some(v) = self.file.max_steps {
            cfg.max_steps = v;
        }
        if let Some(v) = self.rel_tol {
            cfg.rel_tol = v;
        }
        if let Some(v) = self.abs_tol {
            cfg.abs_tol = v;
        }
        cfg
    }

    fn params(&self, args: &ParamArgs) -> Result<Params, CliError> {
        let n = args
            .n
            .or(self.file.n)
            .ok_or_else(|| CliError::Input("missing --N (and no config default)".into()))?;
        let p = args
            .p
            .or(self.file.p)
            .ok_or_else(|| CliError::Input("missing --p (and no config default)".into()))?;
        Ok(Params::new(n, p)?)
    }

    /// N-only commands still accept --p for config symmetry.
    fn dimension(&self, args: &ParamArgs) -> Result<u32, CliError> {
        args.n
            .or(self.file.n)
            .ok_or_else(|| CliError::Input("missing --N (and no config default)".into()))
    }
}

fn write_or_print(out: Option<&Path>, contents: &str, label: &str) -> Result<(), CliError> {
    match out {
        Some(path) => {
            eio::write_file(path, contents).map_err(|e| CliError::Numerical(e.to_string()))?;
            println!("wrote {label} to {}", path.display());
            Ok(())
        }
        None => {
            print!("{contents}");
            Ok(())
        }
    }
}

fn sidecar_path(out: &Path) -> PathBuf {
    out.with_extension("json")
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let file = match load_file_config(cli.config.as_deref()) {
        Ok(f) => f,
        Err(CliError::Input(msg)) => {
            eprintln!("error: {msg}");
            return ExitCode::from(2);
        }
        _ => unreachable!(),
    };
    let ctx = Ctx { file, rel_tol: cli.rel_tol, abs_tol: cli.abs_tol };
    match dispatch(&ctx, cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Input(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Numerical(msg)) => {
            eprintln!("numerical failure: {msg}");
            ExitCode::from(3)
        }
        Err(CliError::AcceptanceFailed) => ExitCode::from(4),
    }
}

fn dispatch(ctx: &Ctx, command: Command) -> Result<(), CliError> {
    match command {
        Command::Exponents { params } => cmd_exponents(ctx, &params),
        Command::Shoot { params, gamma, frame, rho_max, out } => cmd_shoot(ctx, &params, gamma, frame, rho_max, out.as_deref()),
        Command::Branch { params, gamma_min, gamma_max, points, theta_star, out } => {
            cmd_branch(ctx, &params, gamma_min, gamma_max, points, theta_star, out.as_deref())
        }
        Command::Singular { params, theta0, out } => cmd_singular(ctx, &params, theta0, out.as_deref()),
        Command::Phase { params, kind, gamma, t_start, t_end, out } => {
            cmd_phase(ctx, &params, kind, gamma, (t_start, t_end), out.as_deref())
        }
        Command::Eigen { params, theta, bessel_lambdas } => cmd_eigen(ctx, &params, theta, bessel_lambdas),
        Command::Bounds {
            params,
            theta,
            scan,
            theta_min,
            theta_max,
            theta_points,
            p_min,
            p_max,
            p_points,
            out,
        } => cmd_bounds(ctx, &params, theta, scan, (theta_min, theta_max, theta_points), (p_min, p_max, p_points), out.as_deref()),
        Command::LimitP1 { params, theta, p_list, out } => cmd_limit_p1(ctx, &params, theta, &p_list, out.as_deref()),
        Command::Verify { suite, out } => cmd_verify(&suite, out.as_deref()),
    }
}

fn cmd_exponents(ctx: &Ctx, args: &ParamArgs) -> Result<(), CliError> {
    let params = ctx.params(args)?;
    let exps = model::compute_exponents(&params);
    let regime = model::classify(&params);
    let doc = serde_json::json!({
        "params": params,
        "exponents": exps,
        "regime": regime,
    });
    println!("{}", serde_json::to_string_pretty(&doc).expect("json"));
    Ok(())
}

fn cmd_shoot(ctx: &Ctx, args: &ParamArgs, gamma: f64, frame: FrameArg, rho_max: f64, out: Option<&Path>) -> Result<(), CliError> {
    let params = ctx.params(args)?;
    let cfg = ctx.integrator();
    let run = RunConfig { command: format!("shoot gamma={gamma}"), n: params.n, p: params.p, integrator: cfg };
    let profile = match frame {
        FrameArg::Sphere => integrate::integrate_sphere_regular(&params, gamma, &cfg)?,
        FrameArg::Stereo => integrate::integrate_stereo_regular(&params, gamma, 1.0, &cfg)?,
        FrameArg::Flat => integrate::integrate_flat_regular(&params, gamma, rho_max, &cfg)?,
    };
    match (profile.first_zero, profile.end_derivative) {
        (Some(z), Some(d)) => println!("first_zero = {z:.6}, end_derivative = {d:.6}, nodes = {}", profile.len()),
        _ => println!("no zero on the integrated range; nodes = {}", profile.len()),
    }
    let csv = eio::profile_csv(&profile, &params, &cfg, &run.hash());
    write_or_print(out, &csv, "profile CSV")
}

fn cmd_branch(
    ctx: &Ctx,
    args: &ParamArgs,
    gamma_min: f64,
    gamma_max: f64,
    points: usize,
    theta_star: Option<f64>,
    out: Option<&Path>,
) -> Result<(), CliError> {
    let params = ctx.params(args)?;
    let cfg = ctx.integrator();
    let run = RunConfig {
        command: format!("branch gamma_min={gamma_min} gamma_max={gamma_max} points={points}"),
        n: params.n,
        p: params.p,
        integrator: cfg,
    };
    let mut br = branch::trace_branch(&params, gamma_min, gamma_max, points, &cfg)?;
    if let Some(ts) = theta_star {
        br = branch::with_oscillation_count(br, ts);
    }
    println!(
        "points = {}, theta_min = {:.6} at Gamma = {:.6e}, turning brackets = {}, failures = {}",
        br.points.len(),
        br.theta_min,
        br.theta_min_gamma,
        br.turning_points.len(),
        br.failures.len()
    );
    if let Some(osc) = br.oscillation_count {
        println!("oscillations around theta_star = {osc}");
    }
    let hash = run.hash();
    let csv = eio::branch_csv(&br, &hash);
    if let Some(path) = out {
        eio::write_file(path, &csv).map_err(|e| CliError::Numerical(e.to_string()))?;
        let sidecar = serde_json::json!({
            "run": run,
            "config_hash": hash,
            "exponents": model::compute_exponents(&params),
            "turning_points": br.turning_points,
            "theta_min": br.theta_min,
            "theta_min_gamma": br.theta_min_gamma,
            "oscillation_count": br.oscillation_count,
            "failures": br.failures,
        });
        let spath = sidecar_path(path);
        eio::write_file(&spath, &serde_json::to_string_pretty(&sidecar).expect("json"))
            .map_err(|e| CliError::Numerical(e.to_string()))?;
        println!("wrote branch CSV to {} and sidecar to {}", path.display(), spath.display());
    } else {
        print!("{csv}");
    }
    if !br.failures.is_empty() {
        return Err(CliError::Numerical(format!("{} branch points failed to evaluate", br.failures.len())));
    }
    Ok(())
}

fn cmd_singular(ctx: &Ctx, args: &ParamArgs, theta0: f64, out: Option<&Path>) -> Result<(), CliError> {
    let params = ctx.params(args)?;
    let cfg = ctx.integrator();
    let run = RunConfig { command: format!("singular theta0={theta0}"), n: params.n, p: params.p, integrator: cfg };
    let sing = singular::compute_theta_star_from(&params, &cfg, theta0, singular::DEFAULT_REFINE_TOL)?;
    println!(
        "Theta* = {:.6}, R* = {:.6}, refinement estimate = {:.3e}",
        sing.theta_star, sing.r_star, sing.refinement_estimate
    );
    let hash = run.hash();
    let csv = eio::profile_csv(&sing.profile, &params, &cfg, &hash);
    if let Some(path) = out {
        eio::write_file(path, &csv).map_err(|e| CliError::Numerical(e.to_string()))?;
        let sidecar = serde_json::json!({
            "run": run,
            "config_hash": hash,
            "theta_star": sing.theta_star,
            "r_star": sing.r_star,
            "refinement_estimate": sing.refinement_estimate,
            "runs": sing.runs,
        });
        let spath = sidecar_path(path);
        eio::write_file(&spath, &serde_json::to_string_pretty(&sidecar).expect("json"))
            .map_err(|e| CliError::Numerical(e.to_string()))?;
        println!("wrote singular profile CSV to {} and sidecar to {}", path.display(), spath.display());
    } else {
        print!("{csv}");
    }
    Ok(())
}

fn cmd_phase(
    ctx: &Ctx,
    args: &ParamArgs,
    kind: OrbitKind,
    gamma: f64,
    t_span: (f64, f64),
    out: Option<&Path>,
) -> Result<(), CliError> {
    let params = ctx.params(args)?;
    let cfg = ctx.integrator();
    let run = RunConfig {
        command: format!("phase gamma={gamma} t=[{},{}]", t_span.0, t_span.1),
        n: params.n,
        p: params.p,
        integrator: cfg,
    };
    let orbit = match kind {
        OrbitKind::Flat => phase::flat_orbit(&params, gamma, t_span, &cfg)?,
        OrbitKind::Cap => phase::cap_orbit(&params, gamma, t_span, &cfg)?,
    };
    let exps = model::compute_exponents(&params);
    let report = phase::equilibrium_report(&exps, params.p)?;
    let (y, z) = orbit.endpoint();
    println!("endpoint = ({y:.6}, {z:.6})");
    println!("{}", serde_json::to_string_pretty(&report).expect("json"));
    let csv = eio::orbit_csv(&orbit, &params, &run.hash());
    write_or_print(out, &csv, "orbit CSV")
}

fn cmd_eigen(ctx: &Ctx, args: &ParamArgs, theta: Option<f64>, bessel_lambdas: Option<Vec<f64>>) -> Result<(), CliError> {
    let n = ctx.dimension(args)?;
    let cfg = ctx.integrator();
    if let Some(lams) = bessel_lambdas {
        let reference = spectral::bessel_limit_reference(n, &cfg)?;
        let rows = spectral::bessel_limit_check(n, &lams, &cfg)?;
        println!("bessel first zero (limit): {reference:.9}");
        println!("lambda,two_sqrt_lambda_r1,gap");
        for (lam, v) in rows {
            println!("{},{},{}", eio::fmt17(lam), eio::fmt17(v), eio::fmt17(v - reference));
        }
        return Ok(());
    }
    let theta = theta.ok_or_else(|| CliError::Input("eigen needs --theta or --bessel-lambdas".into()))?;
    let res = spectral::lambda1(n, theta, &cfg)?;
    let doc = serde_json::json!({
        "n": n,
        "theta": theta,
        "lambda1": res.lambda1,
        "bracket": res.bracket,
        "eigenfunction_nodes": res.phi_profile.len(),
    });
    println!("{}", serde_json::to_string_pretty(&doc).expect("json"));
    Ok(())
}

fn cmd_bounds(
    ctx: &Ctx,
    args: &ParamArgs,
    theta: Option<f64>,
    scan: bool,
    theta_grid: (f64, f64, usize),
    p_grid: (f64, f64, usize),
    out: Option<&Path>,
) -> Result<(), CliError> {
    let params = ctx.params(args)?;
    let n = params.n;
    if n == 3 && params.p >= 5.0 {
        let bound = std::f64::consts::PI - (4.0 / (params.p - 1.0)).asin();
        println!("nonexistence threshold lower bound (N=3): pi - arcsin(4/(p-1)) = {bound:.6}");
    }
    if let Some(th) = theta {
        let cert = spectral::nonexistence_certificate(n, params.p, th)?;
        let sup_f = spectral::sup_pohozaev_f(n, th);
        println!(
            "certificate(N={n}, p={}, Theta={th}): {} ((p+3)/(4N-4) = {:.6} vs sup F = {:.6})",
            params.p,
            cert,
            (params.p + 3.0) / (4.0 * f64::from(n) - 4.0),
            sup_f
        );
    }
    if scan {
        let (tlo, thi, tn) = theta_grid;
        let (plo, phi, pn) = p_grid;
        if !(tlo > 0.0 && tlo < thi && thi < std::f64::consts::PI) || tn < 2 || pn < 2 || !(plo > 1.0 && plo < phi) {
            return Err(CliError::Input("bad scan ranges".into()));
        }
        let mut csv = String::from("theta,p,nonexistence\n");
        for i in 0..tn {
            let th = tlo + (thi - tlo) * i as f64 / (tn - 1) as f64;
            for j in 0..pn {
                let pp = plo + (phi - plo) * j as f64 / (pn - 1) as f64;
                let cert = spectral::nonexistence_certificate(n, pp, th)?;
                csv.push_str(&format!("{},{},{}\n", eio::fmt17(th), eio::fmt17(pp), u8::from(cert)));
            }
        }
        write_or_print(out, &csv, "nonexistence scan CSV")?;
    }
    Ok(())
}

fn cmd_limit_p1(ctx: &Ctx, args: &ParamArgs, theta: Option<f64>, p_list: &[f64], out: Option<&Path>) -> Result<(), CliError> {
    let n = ctx.dimension(args)?;
    let cfg = ctx.integrator();
    let theta_dagger = spectral::theta_dagger(n, &cfg)?;
    let gamma_dagger = spectral::gamma_dagger(n, &cfg)?;
    println!("Theta_dagger = {theta_dagger:.9}");
    println!("Gamma_dagger = {gamma_dagger:.9}");
    let theta_probe = theta.unwrap_or(theta_dagger);
    let rows = spectral::gamma_p_trend(n, theta_probe, p_list, &cfg)?;
    let mut csv = format!("# theta = {}\np,Gamma\n", eio::fmt17(theta_probe));
    println!("Gamma(p) at Theta = {theta_probe:.6}:");
    for (p, g) in &rows {
        println!("  p = {p:<6} Gamma = {g:.6e}");
        csv.push_str(&format!("{},{}\n", eio::fmt17(*p), eio::fmt17(*g)));
    }
    if let Some(path) = out {
        eio::write_file(path, &csv).map_err(|e| CliError::Numerical(e.to_string()))?;
        println!("wrote trend CSV to {}", path.display());
    }
    Ok(())
}

fn cmd_verify(suite: &str, out: Option<&Path>) -> Result<(), CliError> {
    let ids = verify::suite_ids(suite).ok_or_else(|| CliError::Input(format!("unknown suite '{suite}'")))?;
    let mut reports = Vec::with_capacity(ids.len());
    let mut all_passed = true;
    for id in ids {
        let report = verify::run_criterion(id);
        println!("{}", report.summary_line());
        for line in &report.checks {
            println!("    {line}");
        }
        all_passed &= report.passed;
        reports.push(report);
    }
    let passed = reports.iter().filter(|r| r.passed).count();
    println!("{} of {} criteria passed", passed, reports.len());
    if let Some(path) = out {
        eio::write_file(path, &serde_json::to_string_pretty(&reports).expect("json"))
            .map_err(|e| CliError::Numerical(e.to_string()))?;
        println!("wrote report to {}", path.display());
    }
    if all_passed {
        Ok(())
    } else {
        Err(CliError::AcceptanceFailed)
    }
}
