//! Command-line interface for the branching-process toolkit: boundary
//! classification, generator evaluation, path simulation with passage
//! estimates, the (beta, theta) phase-diagram sweep, and the built-in
//! analytic-bound verification scenarios.

mod config;

use std::io::Write;
use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use neveu_core::{
    classify, default_abs_tol, default_sweep_grid, estimate_passage, eval_generator_grid,
    parse_tag, run_path_traced, sweep_phase_diagram, sweep_scheme, verify_case, BoundCase,
    CaseOverrides, CdiHeuristics, ModelParams, PassageDirection, SimScheme,
};

use config::{parse_f64, resolve_seed, ConfigFile};

#[derive(Parser)]
#[command(name = "neveu", version, about = "Nonlinear branching-process toolkit")]
struct Cli {
    /// Key-value config file; CLI flags override file values, and the
    /// NEVEU_SEED environment variable overrides every seed source.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Boundary classification of (beta, theta) as JSON.
    Classify(ClassifyArgs),
    /// Evaluate the generator Lg on a grid; CSV to stdout.
    #[command(name = "generator-eval")]
    GeneratorEval(GeneratorArgs),
    /// Simulate paths and report a passage estimate as JSON.
    #[command(visible_alias = "passage")]
    Simulate(SimulateArgs),
    /// Phase-diagram sweep over (beta, theta) cells.
    Sweep(SweepArgs),
    /// Run a built-in bound-verification scenario.
    #[command(name = "verify-bounds")]
    VerifyBounds(VerifyArgs),
}

#[derive(Args)]
struct ClassifyArgs {
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    theta: Option<f64>,
    /// Jump-size threshold; irrelevant to the classification itself.
    #[arg(long)]
    r: Option<f64>,
}

#[derive(Args)]
struct GeneratorArgs {
    /// Test-function tag, e.g. "exp_neg:lambda=2" or "loglog_zero:n=3".
    #[arg(long = "fn")]
    function: Option<String>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    theta: Option<f64>,
    #[arg(long)]
    r: Option<f64>,
    /// Evaluation grid LO:HI:N or LO:HI:N:log.
    #[arg(long)]
    grid: Option<String>,
    /// Absolute tolerance; defaults to 1e-10 * (1 + |g(u)|) per point.
    #[arg(long = "abs-tol")]
    abs_tol: Option<f64>,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    theta: Option<f64>,
    #[arg(long)]
    r: Option<f64>,
    #[arg(long)]
    x0: Option<f64>,
    /// Lower target; 0 disables it (extinction proxy only).
    #[arg(long)]
    a: Option<String>,
    /// Upper target; "inf" disables it (explosion proxy only).
    #[arg(long)]
    b: Option<String>,
    #[arg(long)]
    paths: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Which crossing counts as success: down or up.
    #[arg(long)]
    direction: Option<String>,
    /// Write the first path's trajectory as CSV (t, X_t), decimated to at
    /// most 10^4 rows.
    #[arg(long = "dump-traj")]
    dump_traj: Option<PathBuf>,
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long = "dt-max")]
    dt_max: Option<f64>,
    #[arg(long = "t-max")]
    t_max: Option<f64>,
    #[arg(long = "x-min")]
    x_min: Option<f64>,
    #[arg(long = "x-max")]
    x_max: Option<f64>,
    #[arg(long = "max-jumps")]
    max_jumps: Option<f64>,
    /// Disable the Gaussian small-jump correction.
    #[arg(long = "no-gauss")]
    no_gauss: bool,
    /// State-adaptive truncation: eps follows FRAC * state.
    #[arg(long = "adaptive-eps")]
    adaptive_eps: Option<f64>,
    #[arg(long = "max-steps")]
    max_steps: Option<u64>,
}

#[derive(Args)]
struct SweepArgs {
    /// CSV of beta,theta cells (header optional); defaults to the 49-cell
    /// grid over {0, 0.5, ..., 3}^2.
    #[arg(long = "grid-file")]
    grid_file: Option<PathBuf>,
    #[arg(long)]
    paths: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory for results.jsonl, summary.csv, meta.json.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long = "t-max")]
    t_max: Option<f64>,
    #[arg(long = "adaptive-eps")]
    adaptive_eps: Option<f64>,
    #[arg(long = "cdi-a")]
    cdi_a: Option<f64>,
    #[arg(long = "cdi-t")]
    cdi_t: Option<f64>,
    #[arg(long = "cdi-high")]
    cdi_high: Option<f64>,
    #[arg(long = "cdi-low")]
    cdi_low: Option<f64>,
    #[arg(long = "null-freq")]
    null_freq: Option<f64>,
}

#[derive(Args)]
struct VerifyArgs {
    /// One of eq4.43, eq4.44, eq4.45, eq4.46.
    #[arg(long)]
    case: Option<String>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    theta: Option<f64>,
    #[arg(long)]
    r: Option<f64>,
    #[arg(long)]
    x0: Option<f64>,
    #[arg(long)]
    a: Option<f64>,
    #[arg(long)]
    b: Option<f64>,
    #[arg(long)]
    rho: Option<f64>,
    #[arg(long)]
    paths: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    /// human, json, or both.
    #[arg(long, default_value = "both")]
    format: String,
    /// Also write the JSON report to a file.
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Machine-format float: 17 significant digits.
fn fmt_full(v: f64) -> String {
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    format!("{v:.16e}")
}

/// Human-format float: 6 significant digits.
fn fmt_human(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let mag = v.abs().log10().floor();
    if (-3.0..6.0).contains(&mag) {
        let decimals = (5 - mag as i32).max(0) as usize;
        format!("{v:.decimals$}")
    } else {
        format!("{v:.5e}")
    }
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    let cfg = match &cli.config {
        Some(path) => ConfigFile::load(path)?,
        None => ConfigFile::default(),
    };
    match cli.command {
        Command::Classify(args) => cmd_classify(args, &cfg),
        Command::GeneratorEval(args) => cmd_generator(args, &cfg),
        Command::Simulate(args) => cmd_simulate(args, &cfg),
        Command::Sweep(args) => cmd_sweep(args, &cfg),
        Command::VerifyBounds(args) => cmd_verify(args, &cfg),
    }
}

fn cmd_classify(args: ClassifyArgs, cfg: &ConfigFile) -> Result<()> {
    const S: &str = "classify";
    let beta = args.beta.or(cfg.get_f64(S, "beta")?).context("--beta required")?;
    let theta = args.theta.or(cfg.get_f64(S, "theta")?).context("--theta required")?;
    let r = args.r.or(cfg.get_f64(S, "r")?).unwrap_or(1.0);
    let params = ModelParams::new(beta, theta, r)?;
    let cl = classify(&params);

    #[derive(Serialize)]
    struct Out {
        beta: f64,
        theta: f64,
        r: f64,
        extinct: bool,
        explodes: bool,
        comes_down: bool,
    }
    let out = Out {
        beta,
        theta,
        r,
        extinct: cl.extinct,
        explodes: cl.explodes,
        comes_down: cl.comes_down,
    };
    println!("{}", serde_json::to_string_pretty(&out)?);
    Ok(())
}

fn parse_grid_spec(spec: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = spec.split(':').collect();
    anyhow::ensure!(
        parts.len() == 3 || (parts.len() == 4 && parts[3] == "log"),
        "grid must be LO:HI:N or LO:HI:N:log, got {spec}"
    );
    let lo = parse_f64(parts[0])?;
    let hi = parse_f64(parts[1])?;
    let n: usize = parts[2].parse().context("grid point count")?;
    anyhow::ensure!(n >= 2 && hi > lo, "grid needs n >= 2 and hi > lo");
    Ok(if parts.len() == 4 {
        anyhow::ensure!(lo > 0.0, "log grid needs lo > 0");
        neveu_core::gridding::log_spaced(lo, hi, n)
    } else {
        neveu_core::gridding::lin_spaced(lo, hi, n)
    })
}

fn cmd_generator(args: GeneratorArgs, cfg: &ConfigFile) -> Result<()> {
    const S: &str = "generator-eval";
    let tag = args
        .function
        .or(cfg.get(S, "fn").map(String::from))
        .context("--fn required")?;
    let beta = args.beta.or(cfg.get_f64(S, "beta")?).context("--beta required")?;
    let theta = args.theta.or(cfg.get_f64(S, "theta")?).context("--theta required")?;
    let r = args.r.or(cfg.get_f64(S, "r")?).unwrap_or(1.0);
    let grid_spec = args
        .grid
        .or(cfg.get(S, "grid").map(String::from))
        .context("--grid required")?;
    let abs_tol = args.abs_tol.or(cfg.get_f64(S, "abs-tol")?);

    let f = parse_tag(&tag)?;
    let params = ModelParams::new(beta, theta, r)?;
    let grid = parse_grid_spec(&grid_spec)?;
    let rows = eval_generator_grid(&f, &grid, &params, |u| {
        abs_tol.unwrap_or_else(|| default_abs_tol(&f, u))
    })?;

    let stdout = std::io::stdout();
    let mut w = stdout.lock();
    writeln!(w, "u,small_term,big_term,total,err_estimate")?;
    for ev in rows {
        writeln!(
            w,
            "{},{},{},{},{}",
            fmt_full(ev.u),
            fmt_full(ev.small_term),
            fmt_full(ev.big_term),
            fmt_full(ev.total),
            fmt_full(ev.err_estimate)
        )?;
    }
    Ok(())
}

fn cmd_simulate(args: SimulateArgs, cfg: &ConfigFile) -> Result<()> {
    const S: &str = "simulate";
    let beta = args.beta.or(cfg.get_f64(S, "beta")?).context("--beta required")?;
    let theta = args.theta.or(cfg.get_f64(S, "theta")?).context("--theta required")?;
    let r = args.r.or(cfg.get_f64(S, "r")?).unwrap_or(1.0);
    let x0 = args.x0.or(cfg.get_f64(S, "x0")?).context("--x0 required")?;
    let a = match args.a {
        Some(s) => parse_f64(&s)?,
        None => cfg.get_f64(S, "a")?.unwrap_or(0.0),
    };
    let b = match args.b {
        Some(s) => parse_f64(&s)?,
        None => cfg.get_f64(S, "b")?.unwrap_or(f64::INFINITY),
    };
    let paths = args.paths.or(cfg.get_u64(S, "paths")?).unwrap_or(10_000);
    let seed = resolve_seed(args.seed, cfg.get_u64(S, "seed")?, 1)?;
    let direction: PassageDirection = args
        .direction
        .or(cfg.get(S, "direction").map(String::from))
        .unwrap_or_else(|| "down".into())
        .parse()?;

    let params = ModelParams::new(beta, theta, r)?;
    let mut scheme = SimScheme::defaults(r);
    if let Some(v) = args.eps.or(cfg.get_f64(S, "eps")?) {
        scheme.eps = v;
    }
    if let Some(v) = args.dt_max.or(cfg.get_f64(S, "dt-max")?) {
        scheme.dt_max = v;
    }
    if let Some(v) = args.t_max.or(cfg.get_f64(S, "t-max")?) {
        scheme.t_max = v;
    }
    if let Some(v) = args.x_min.or(cfg.get_f64(S, "x-min")?) {
        scheme.x_min = v;
    }
    if let Some(v) = args.x_max.or(cfg.get_f64(S, "x-max")?) {
        scheme.x_max = v;
    }
    if let Some(v) = args.max_jumps.or(cfg.get_f64(S, "max-jumps")?) {
        scheme.max_jumps_per_step = v;
    }
    if args.no_gauss || cfg.get_bool(S, "no-gauss")?.unwrap_or(false) {
        scheme.gauss_correction = false;
    }
    if let Some(v) = args.adaptive_eps.or(cfg.get_f64(S, "adaptive-eps")?) {
        scheme.eps_state_frac = Some(v);
    }
    if let Some(v) = args.max_steps.or(cfg.get_u64(S, "max-steps")?) {
        scheme.max_steps = v;
    }
    scheme.validate(&params)?;

    if let Some(traj_path) = &args.dump_traj {
        let mut trace = Vec::new();
        run_path_traced(x0, a, b, &params, &scheme, seed, 0, &mut trace)?;
        let stride = trace.len().div_ceil(10_000).max(1);
        let mut out = String::from("t,X_t\n");
        for (i, (t, x)) in trace.iter().enumerate() {
            if i % stride == 0 || i + 1 == trace.len() {
                out.push_str(&format!("{},{}\n", fmt_full(*t), fmt_full(*x)));
            }
        }
        std::fs::write(traj_path, out)
            .with_context(|| format!("writing trajectory {}", traj_path.display()))?;
    }

    let est = estimate_passage(&params, &scheme, x0, a, b, direction, paths, seed)?;
    println!("{}", serde_json::to_string_pretty(&est)?);
    Ok(())
}

fn load_grid_file(path: &PathBuf) -> Result<Vec<(f64, f64)>> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading grid file {}", path.display()))?;
    let mut grid = Vec::new();
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with("beta") {
            continue;
        }
        let parts: Vec<&str> = line.split([',', ' ', '\t']).filter(|s| !s.is_empty()).collect();
        anyhow::ensure!(parts.len() == 2, "grid line needs two values: {line}");
        grid.push((parse_f64(parts[0])?, parse_f64(parts[1])?));
    }
    anyhow::ensure!(!grid.is_empty(), "grid file {} has no cells", path.display());
    Ok(grid)
}

fn cmd_sweep(args: SweepArgs, cfg: &ConfigFile) -> Result<()> {
    const S: &str = "sweep";
    let grid = match args.grid_file.or(cfg.get(S, "grid-file").map(PathBuf::from)) {
        Some(path) => load_grid_file(&path)?,
        None => default_sweep_grid(),
    };
    let paths = args.paths.or(cfg.get_u64(S, "paths")?).unwrap_or(2000);
    let seed = resolve_seed(args.seed, cfg.get_u64(S, "seed")?, 1)?;
    let out_dir = args
        .out
        .or(cfg.get(S, "out").map(PathBuf::from))
        .context("--out DIR required")?;

    let mut scheme = sweep_scheme(1.0);
    if let Some(v) = args.t_max.or(cfg.get_f64(S, "t-max")?) {
        scheme.t_max = v;
    }
    if let Some(v) = args.adaptive_eps.or(cfg.get_f64(S, "adaptive-eps")?) {
        scheme.eps_state_frac = Some(v);
    }
    let mut heur = CdiHeuristics::default();
    if let Some(v) = args.cdi_a.or(cfg.get_f64(S, "cdi-a")?) {
        heur.a = v;
    }
    if let Some(v) = args.cdi_t.or(cfg.get_f64(S, "cdi-t")?) {
        heur.t = v;
    }
    if let Some(v) = args.cdi_high.or(cfg.get_f64(S, "cdi-high")?) {
        heur.high_threshold = v;
    }
    if let Some(v) = args.cdi_low.or(cfg.get_f64(S, "cdi-low")?) {
        heur.low_threshold = v;
    }
    if let Some(v) = args.null_freq.or(cfg.get_f64(S, "null-freq")?) {
        heur.null_freq = v;
    }

    let cells = sweep_phase_diagram(&grid, &scheme, paths, seed, &heur);

    std::fs::create_dir_all(&out_dir)?;
    let mut jsonl = String::new();
    for cell in &cells {
        jsonl.push_str(&serde_json::to_string(cell)?);
        jsonl.push('\n');
    }
    std::fs::write(out_dir.join("results.jsonl"), jsonl)?;

    let mut csv = String::from(
        "beta,theta,pred_extinct,pred_explodes,pred_comes_down,extinct_freq,explode_freq,\
         comedown_mid,comedown_high,verdict\n",
    );
    for c in &cells {
        csv.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{}\n",
            fmt_full(c.beta),
            fmt_full(c.theta),
            c.predicted.extinct,
            c.predicted.explodes,
            c.predicted.comes_down,
            fmt_full(c.observed_extinct_freq),
            fmt_full(c.observed_explode_freq),
            fmt_full(c.comedown_mid.p_hat),
            fmt_full(c.comedown_high.p_hat),
            serde_json::to_value(c.verdict)?.as_str().unwrap_or("?"),
        ));
    }
    std::fs::write(out_dir.join("summary.csv"), csv)?;

    // Timestamps live only here, so the jsonl/csv outputs stay byte-stable.
    #[derive(Serialize)]
    struct Meta {
        unix_time: u64,
        master_seed: u64,
        n_paths: u64,
        cells: usize,
        scheme: SimScheme,
        heuristics: CdiHeuristics,
    }
    let meta = Meta {
        unix_time: std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0),
        master_seed: seed,
        n_paths: paths,
        cells: cells.len(),
        scheme,
        heuristics: heur,
    };
    std::fs::write(out_dir.join("meta.json"), serde_json::to_string_pretty(&meta)?)?;

    let consistent = cells
        .iter()
        .filter(|c| matches!(c.verdict, neveu_core::Verdict::Consistent))
        .count();
    eprintln!(
        "sweep: {} cells, {consistent} consistent, outputs in {}",
        cells.len(),
        out_dir.display()
    );
    Ok(())
}

fn cmd_verify(args: VerifyArgs, cfg: &ConfigFile) -> Result<()> {
    const S: &str = "verify-bounds";
    let case: BoundCase = args
        .case
        .or(cfg.get(S, "case").map(String::from))
        .context("--case required")?
        .parse()?;
    let paths = args.paths.or(cfg.get_u64(S, "paths")?).unwrap_or(10_000);
    let seed = resolve_seed(args.seed, cfg.get_u64(S, "seed")?, 1)?;
    let overrides = CaseOverrides {
        beta: args.beta.or(cfg.get_f64(S, "beta")?),
        theta: args.theta.or(cfg.get_f64(S, "theta")?),
        r: args.r.or(cfg.get_f64(S, "r")?),
        x0: args.x0.or(cfg.get_f64(S, "x0")?),
        a: args.a.or(cfg.get_f64(S, "a")?),
        b: args.b.or(cfg.get_f64(S, "b")?),
        rho: args.rho.or(cfg.get_f64(S, "rho")?),
    };

    let report = verify_case(case, &overrides, paths, seed)?;

    if args.format == "human" || args.format == "both" {
        let c = &report.config;
        println!("case {}: {}", case.token(), c.bound_label);
        println!(
            "  params: beta={} theta={} r={}  x0={}  interval ({}, {})",
            fmt_human(c.params.beta()),
            fmt_human(c.params.theta()),
            fmt_human(c.params.r()),
            fmt_human(c.x0),
            fmt_human(c.a),
            fmt_human(c.b),
        );
        println!(
            "  certificate: d={}  margin={}  grid {} pts on [{}, {}]",
            fmt_human(report.certificate.d),
            fmt_human(report.certificate.margin),
            report.certificate.grid_spec.points,
            fmt_human(report.certificate.grid_spec.lo),
            fmt_human(report.certificate.grid_spec.hi),
        );
        let row = &report.comparison.rows[0];
        println!(
            "  bound={}  p_hat={}  ci=[{}, {}]  slack={}  {}",
            fmt_human(row.bound),
            fmt_human(row.p_hat),
            fmt_human(row.ci_lo),
            fmt_human(row.ci_hi),
            fmt_human(row.slack),
            if row.pass { "PASS" } else { "FAIL" }
        );
    }
    if args.format == "json" || args.format == "both" {
        println!("{}", serde_json::to_string_pretty(&report)?);
    }
    if let Some(path) = &args.out {
        std::fs::write(path, serde_json::to_string_pretty(&report)?)
            .with_context(|| format!("writing report {}", path.display()))?;
    }
    if !report.comparison.all_pass {
        std::process::exit(1);
    }
    Ok(())
}
