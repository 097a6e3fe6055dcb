//! Batch front end: theory curves and points, Monte Carlo sweeps, and
//! figure rendering. Output on standard out is `key=value` lines so shell
//! pipelines can consume point queries directly.
//!
//! Exit codes: 0 success, 1 runtime failure (no solution, no convergence,
//! I/O), 2 bad flags or flag values.

use clap::{Args, Parser, Subcommand, ValueEnum};
use phaselab::ensembles::{MatrixEnsemble, NonzeroLaw, SignalPrior, SupportMode};
use phaselab::experiment::{
    estimate_critical_alpha, extrapolate_to_infinite_n, read_estimates_csv, run_trials_resumable,
    write_estimates_csv, CriticalPointEstimate, SweepConfig,
};
use phaselab::numerics::fit_polynomial;
use phaselab::plot::{
    finite_size_figure, phase_diagram_figure, read_curve_csv, PlotSpec, Series,
};
use phaselab::replica::{critical_alpha, threshold_curve, worst_case_l1_alpha, CurveMethod, PNorm};
use std::fs::File;
use std::io::{BufReader, BufWriter, Write as _};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "phaselab",
    about = "Phase boundaries of sparse-signal reconstruction: theory, Monte Carlo experiments, and figures",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute theoretical critical compression rates.
    Theory(TheoryArgs),
    /// Run a Monte Carlo reconstruction sweep and extrapolate the transition.
    Experiment(ExperimentArgs),
    /// Render figures from previously written CSV files.
    Plot(PlotArgs),
}

#[derive(Args)]
struct TheoryArgs {
    /// Which norm: 0, 1 or 2.
    #[arg(long = "p")]
    p: u8,
    /// Single density to query.
    #[arg(long, conflicts_with = "rho_grid")]
    rho: Option<f64>,
    /// Density grid as start:stop:count (inclusive endpoints).
    #[arg(long = "rho-grid")]
    rho_grid: Option<String>,
    /// Also compute the worst-case sufficient bound (L1 only).
    #[arg(long = "worst-case")]
    worst_case: bool,
    /// Output file for grid queries.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Output format for grid queries.
    #[arg(long, value_enum, default_value = "csv")]
    format: OutputFormat,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum OutputFormat {
    Csv,
    Svg,
}

#[derive(Args)]
struct ExperimentArgs {
    /// Signal density.
    #[arg(long)]
    rho: f64,
    /// System sizes: comma list, with `a,b,...,z` arithmetic shorthand.
    #[arg(long = "n-list")]
    n_list: String,
    /// Trials per (N, P) point.
    #[arg(long, default_value_t = 10_000)]
    trials: usize,
    #[arg(long, value_enum, default_value = "gaussian")]
    ensemble: EnsembleArg,
    #[arg(long, value_enum, default_value = "gauss")]
    prior: PriorArg,
    #[arg(long, value_enum, default_value = "bernoulli")]
    support: SupportArg,
    /// Master seed; every trial seed derives from it.
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Directory for trials.csv, estimates.csv and sweep.conf.
    #[arg(long = "out-dir")]
    out_dir: PathBuf,
    /// Reuse records already present in the trials file.
    #[arg(long)]
    resume: bool,
    /// Worker threads (default: PHASELAB_WORKERS or all cores).
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
enum EnsembleArg {
    Gaussian,
    Orthogonal,
}

#[derive(Clone, Copy, ValueEnum)]
enum PriorArg {
    Gauss,
    Pm1,
}

#[derive(Clone, Copy, ValueEnum)]
enum SupportArg {
    Bernoulli,
    Fixed,
}

#[derive(Args)]
struct PlotArgs {
    /// Which figure: the phase diagram (2a) or the finite-size plot (2b).
    #[arg(long)]
    figure: String,
    /// Threshold-curve CSV for the hard-threshold norm (figure 2a).
    #[arg(long)]
    l0: Option<PathBuf>,
    /// Threshold-curve CSV for the soft-threshold norm (figure 2a).
    #[arg(long)]
    l1: Option<PathBuf>,
    /// Threshold-curve CSV for the ridge norm (figure 2a).
    #[arg(long)]
    l2: Option<PathBuf>,
    /// Worst-case bound CSV for the inset (figure 2a, optional).
    #[arg(long = "worst-case")]
    worst_case: Option<PathBuf>,
    /// Estimates CSV of the primary ensemble (figure 2b).
    #[arg(long)]
    estimates: Option<PathBuf>,
    /// Estimates CSV of a second ensemble (figure 2b, optional).
    #[arg(long = "estimates-b")]
    estimates_b: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Theory(args) => cmd_theory(args),
        Command::Experiment(args) => cmd_experiment(args),
        Command::Plot(args) => cmd_plot(args),
    };
    match result {
        Ok(code) => code,
        Err(message) => {
            eprintln!("error: {message}");
            ExitCode::from(1)
        }
    }
}

fn usage_error(message: &str) -> Result<ExitCode, String> {
    eprintln!("error: {message}");
    Ok(ExitCode::from(2))
}

fn parse_norm(p: u8) -> Option<PNorm> {
    match p {
        0 => Some(PNorm::L0),
        1 => Some(PNorm::L1),
        2 => Some(PNorm::L2),
        _ => None,
    }
}

fn parse_rho_grid(spec: &str) -> Option<Vec<f64>> {
    let parts: Vec<&str> = spec.split(':').collect();
    if parts.len() != 3 {
        return None;
    }
    let start: f64 = parts[0].parse().ok()?;
    let stop: f64 = parts[1].parse().ok()?;
    let count: usize = parts[2].parse().ok()?;
    if count < 1 || !(start < stop) {
        return None;
    }
    if count == 1 {
        return Some(vec![start]);
    }
    Some(
        (0..count)
            .map(|i| start + (stop - start) * i as f64 / (count - 1) as f64)
            .collect(),
    )
}

/// Expand `10,12,...,30` arithmetic shorthand or a plain comma list.
fn parse_n_list(spec: &str) -> Option<Vec<usize>> {
    let parts: Vec<&str> = spec.split(',').map(str::trim).collect();
    if let Some(pos) = parts.iter().position(|&s| s == "...") {
        if pos < 2 || pos + 1 != parts.len() - 1 {
            return None;
        }
        let known: Vec<usize> = parts[..pos]
            .iter()
            .map(|s| s.parse().ok())
            .collect::<Option<_>>()?;
        let last: usize = parts[parts.len() - 1].parse().ok()?;
        let step = known[1].checked_sub(known[0])?;
        if step == 0 || known.windows(2).any(|w| w[1] - w[0] != step) {
            return None;
        }
        let mut values = known;
        let mut next = values[values.len() - 1] + step;
        while next <= last {
            values.push(next);
            next += step;
        }
        Some(values)
    } else {
        parts.iter().map(|s| s.parse().ok()).collect()
    }
}

fn write_output(path: &Path, content: &str) -> Result<(), String> {
    std::fs::write(path, content).map_err(|e| format!("writing {}: {e}", path.display()))
}

fn cmd_theory(args: TheoryArgs) -> Result<ExitCode, String> {
    let Some(p) = parse_norm(args.p) else {
        return usage_error(&format!("--p must be 0, 1 or 2 (got {})", args.p));
    };

    if let Some(rho) = args.rho {
        if !(rho > 0.0 && rho < 1.0) {
            return usage_error(&format!("--rho must lie in (0,1), got {rho}"));
        }
        let alpha = critical_alpha(p, rho).map_err(|e| e.to_string())?;
        println!("rho={rho}");
        println!("alpha_c={alpha}");
        if args.worst_case {
            let bound = worst_case_l1_alpha(rho).map_err(|e| e.to_string())?;
            println!("worst_case_alpha={bound}");
        }
        return Ok(ExitCode::SUCCESS);
    }

    let Some(grid_spec) = args.rho_grid else {
        return usage_error("theory needs either --rho or --rho-grid");
    };
    let Some(grid) = parse_rho_grid(&grid_spec) else {
        return usage_error(&format!("bad --rho-grid {grid_spec:?}, expected start:stop:count"));
    };
    if grid.iter().any(|&r| !(r > 0.0 && r < 1.0)) {
        return usage_error("--rho-grid values must lie strictly inside (0,1)");
    }
    let Some(out) = args.out else {
        return usage_error("grid queries need --out");
    };

    let curve = threshold_curve(p, &grid, CurveMethod::Replica);
    if curve.points.is_empty() {
        return Err("no grid point produced a value".to_string());
    }
    let worst = if args.worst_case {
        Some(threshold_curve(PNorm::L1, &grid, CurveMethod::WorstCase))
    } else {
        None
    };

    match args.format {
        OutputFormat::Csv => {
            write_output(&out, &curve_csv(&curve.points, &curve.gaps))?;
            println!("curve_csv={}", out.display());
            if let Some(worst) = worst {
                let path = sibling_path(&out, ".worst_case.csv");
                write_output(&path, &curve_csv(&worst.points, &worst.gaps))?;
                println!("worst_case_csv={}", path.display());
            }
        }
        OutputFormat::Svg => {
            let spec = single_curve_figure(p, curve.points, worst.map(|w| w.points));
            write_output(&out, &spec.to_svg().map_err(|e| e.to_string())?)?;
            println!("svg={}", out.display());
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn sibling_path(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("out");
    path.with_file_name(format!("{stem}{suffix}"))
}

fn curve_csv(points: &[(f64, f64)], gaps: &[(f64, String)]) -> String {
    let mut out = String::from("rho,alpha_c\n");
    for (rho, alpha) in points {
        out.push_str(&format!("{rho},{alpha}\n"));
    }
    for (rho, reason) in gaps {
        out.push_str(&format!("# gap rho={rho} {reason}\n"));
    }
    out
}

fn single_curve_figure(
    p: PNorm,
    points: Vec<(f64, f64)>,
    worst: Option<Vec<(f64, f64)>>,
) -> PlotSpec {
    let y_hi = points.iter().map(|q| q.1).fold(0.0f64, f64::max).max(1.0) * 1.05;
    let mut spec = PlotSpec {
        title: format!("{p} reconstruction limit"),
        x_label: "density rho".to_string(),
        y_label: "compression rate alpha".to_string(),
        x_range: (0.0, 1.0),
        y_range: (0.0, y_hi),
        series: vec![Series::line(&format!("{p}"), points, "#c43c1a")],
        inset: None,
    };
    if let Some(worst_points) = worst {
        if !worst_points.is_empty() {
            let x_hi = worst_points.iter().map(|q| q.0).fold(0.0f64, f64::max) * 1.05;
            let y_hi = worst_points.iter().map(|q| q.1).fold(0.0f64, f64::max) * 1.05;
            spec.inset = Some(Box::new(PlotSpec {
                title: String::new(),
                x_label: String::new(),
                y_label: String::new(),
                x_range: (0.0, x_hi),
                y_range: (0.0, y_hi),
                series: vec![Series::line("worst case", worst_points, "#7a1fa2")],
                inset: None,
            }));
        }
    }
    spec
}

fn cmd_experiment(args: ExperimentArgs) -> Result<ExitCode, String> {
    if !(args.rho > 0.0 && args.rho < 1.0) {
        return usage_error(&format!("--rho must lie in (0,1), got {}", args.rho));
    }
    let Some(n_values) = parse_n_list(&args.n_list) else {
        return usage_error(&format!("bad --n-list {:?}", args.n_list));
    };
    if n_values.is_empty() {
        return usage_error("--n-list is empty");
    }
    if args.trials == 0 {
        return usage_error("--trials must be positive");
    }

    let ensemble = match args.ensemble {
        EnsembleArg::Gaussian => MatrixEnsemble::IidGaussian,
        EnsembleArg::Orthogonal => MatrixEnsemble::RowOrthogonal,
    };
    let law = match args.prior {
        PriorArg::Gauss => NonzeroLaw::StandardGaussian,
        PriorArg::Pm1 => NonzeroLaw::PlusMinusOne,
    };
    let support = match args.support {
        SupportArg::Bernoulli => SupportMode::Bernoulli,
        SupportArg::Fixed => SupportMode::FixedCount,
    };
    let prior = SignalPrior::new(args.rho, law, support).map_err(|e| e.to_string())?;
    let config = SweepConfig::around_l1_transition(
        args.rho,
        n_values,
        args.trials,
        ensemble,
        prior,
        args.seed,
    )
    .map_err(|e| e.to_string())?;

    std::fs::create_dir_all(&args.out_dir)
        .map_err(|e| format!("creating {}: {e}", args.out_dir.display()))?;
    let trials_path = args.out_dir.join("trials.csv");
    if !args.resume && trials_path.exists() {
        std::fs::remove_file(&trials_path)
            .map_err(|e| format!("removing stale {}: {e}", trials_path.display()))?;
    }
    write_output(&args.out_dir.join("sweep.conf"), &config.to_kv())?;

    let workers = args.workers.or_else(|| {
        std::env::var("PHASELAB_WORKERS").ok().and_then(|v| v.parse().ok())
    });
    let records = match workers {
        Some(w) if w > 0 => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(w)
                .build()
                .map_err(|e| e.to_string())?;
            pool.install(|| run_trials_resumable(&config, &trials_path))
        }
        _ => run_trials_resumable(&config, &trials_path),
    }
    .map_err(|e| e.to_string())?;
    println!("trials_csv={}", trials_path.display());

    let mut estimates: Vec<CriticalPointEstimate> = Vec::new();
    for &n in &config.n_values {
        match estimate_critical_alpha(&records, config.rho, n) {
            Ok(est) => {
                println!("alpha_c_n.{n}={}", est.alpha_c_n);
                println!("stderr.{n}={}", est.stderr);
                estimates.push(est);
            }
            Err(e) => eprintln!("warning: no estimate at n = {n}: {e}"),
        }
    }
    let estimates_path = args.out_dir.join("estimates.csv");
    {
        let file = File::create(&estimates_path).map_err(|e| e.to_string())?;
        let mut w = BufWriter::new(file);
        write_estimates_csv(&mut w, &estimates).map_err(|e| e.to_string())?;
        w.flush().map_err(|e| e.to_string())?;
    }
    println!("estimates_csv={}", estimates_path.display());

    let intercept = extrapolate_to_infinite_n(&estimates).map_err(|e| e.to_string())?;
    println!("alpha_c_extrapolated={intercept}");
    Ok(ExitCode::SUCCESS)
}

fn cmd_plot(args: PlotArgs) -> Result<ExitCode, String> {
    let spec = match args.figure.as_str() {
        "2a" => {
            let (Some(l0), Some(l1), Some(l2)) = (&args.l0, &args.l1, &args.l2) else {
                return usage_error("figure 2a needs --l0, --l1 and --l2 curve files");
            };
            let worst = match &args.worst_case {
                Some(path) => Some(load_curve(path)?),
                None => None,
            };
            phase_diagram_figure(load_curve(l0)?, load_curve(l1)?, load_curve(l2)?, worst)
        }
        "2b" => {
            let Some(estimates) = &args.estimates else {
                return usage_error("figure 2b needs --estimates");
            };
            let rows_a = load_estimates(estimates)?;
            if rows_a.is_empty() {
                return Err(format!("{}: no estimate rows", estimates.display()));
            }
            let rows_b = match &args.estimates_b {
                Some(path) => Some(load_estimates(path)?),
                None => None,
            };
            let xs: Vec<f64> = rows_a.iter().map(|&(n, _, _)| 1.0 / n as f64).collect();
            let ys: Vec<f64> = rows_a.iter().map(|&(_, a, _)| a).collect();
            if xs.len() < 3 {
                return Err("figure 2b needs at least 3 sizes for the quadratic fit".to_string());
            }
            let coeffs = fit_polynomial(&xs, &ys, 2).map_err(|e| e.to_string())?;
            let intercept = coeffs[0];
            println!("alpha_c_extrapolated={intercept}");
            finite_size_figure(rows_a, rows_b, &coeffs, intercept)
        }
        other => return usage_error(&format!("unknown figure {other:?}, expected 2a or 2b")),
    };
    let svg = spec.to_svg().map_err(|e| e.to_string())?;
    write_output(&args.out, &svg)?;
    println!("svg={}", args.out.display());
    Ok(ExitCode::SUCCESS)
}

fn load_curve(path: &Path) -> Result<Vec<(f64, f64)>, String> {
    let file = File::open(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let points = read_curve_csv(&mut BufReader::new(file))
        .map_err(|e| format!("{}: {e}", path.display()))?;
    if points.is_empty() {
        return Err(format!("{}: no curve points", path.display()));
    }
    Ok(points)
}

fn load_estimates(path: &Path) -> Result<Vec<(usize, f64, f64)>, String> {
    let file = File::open(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let rows = read_estimates_csv(&mut BufReader::new(file))
        .map_err(|e| format!("{}: {e}", path.display()))?;
    Ok(rows.into_iter().map(|(_, n, alpha, stderr, _)| (n, alpha, stderr)).collect())
}
