//! Batch front end behind the `skt` binary.
//!
//! Exit codes: `0` success, `2` invalid configuration or input file, `3` no
//! result, `4` time integration not converged under `--strict`.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use log::{error, info, warn};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::{InitialData, RunConfig};
use crate::continuation::{compute_diagram, sweep, Diagram};
use crate::discretization::{ActiveParam, Grid, StateVector};
use crate::error::{Error, Result};
use crate::evolve::{integrate_to_steady, write_trajectory_csv};
use crate::linear_analysis::{
    d21_disappearance_threshold, d_bif_limit, mode_table, mode_table_csv, render_mode_table, self_diffusion_mode_bound,
    theorem_large_cross, EigenFamily, Varied,
};
use crate::model::{classify_regime, coexistence_state, CaseTag, Coexistence, Scalar};
use crate::output::{
    branch_rows, diagram_svg, overlay_svg, profile_svg, read_branch_csv, write_diagram, Series, BRANCH_HEADER,
};

#[derive(Parser, Debug)]
#[command(name = "skt", version, about = "Steady states and bifurcations of the 1D SKT competition model")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// key = value configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory (overrides `out` in the config).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Bundled parameter set; file keys override its coefficients.
    #[arg(long, global = true, value_parser = clap::value_parser!(u8).range(1..=4))]
    pub preset: Option<u8>,
    /// Allow continuation into d <= 0 where the operator stays elliptic.
    #[arg(long, global = true)]
    pub allow_negative_d: bool,
    /// Treat a non-converged time integration as an error.
    #[arg(long, global = true)]
    pub strict: bool,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Regime, mode table, thresholds and the large cross-diffusion check.
    Analyze,
    /// Bifurcation diagram in the configured parameter.
    Continue,
    /// One diagram per `sweep_values` entry plus an overlay.
    Sweep,
    /// Backward Euler from the configured initial data to a steady state.
    Simulate,
    /// Render branch CSVs to a diagram and profile CSVs to profile plots.
    Plot {
        files: Vec<PathBuf>,
        /// Add the product uv to profile plots.
        #[arg(long)]
        uv: bool,
        /// Horizontal axis label of the diagram.
        #[arg(long, default_value = "d")]
        xlabel: String,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Exit {
    Ok = 0,
    Failure = 1,
    Config = 2,
    NoResult = 3,
    NotConverged = 4,
}

fn exit_for(e: &Error) -> Exit {
    match e {
        Error::Config { .. } | Error::Csv { .. } | Error::Domain(_) | Error::Grid(_) => Exit::Config,
        Error::Io(_) => Exit::Failure,
        _ => Exit::NoResult,
    }
}

/// Runs one command and returns the process exit code.
pub fn run(cli: &Cli) -> Exit {
    let result = match &cli.command {
        Command::Plot { files, uv, xlabel } => plot(files, *uv, xlabel, cli.out.as_deref()),
        command => load_config(cli).and_then(|cfg| match command {
            Command::Analyze => analyze(&cfg),
            Command::Continue => continue_cmd(&cfg),
            Command::Sweep => sweep_cmd(&cfg),
            Command::Simulate => simulate(&cfg),
            Command::Plot { .. } => unreachable!(),
        }),
    };
    result.unwrap_or_else(|e| {
        error!("{e}");
        eprintln!("error: {e}");
        exit_for(&e)
    })
}

/// Config from `--config` and/or `--preset` with the command-line overrides
/// applied.
pub fn load_config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::from_file(path, cli.preset).map_err(|e| match e {
            Error::Io(io) => Error::Config {
                line: 0,
                message: format!("cannot read {}: {io}", path.display()),
            },
            e => e,
        })?,
        None => RunConfig::parse("", cli.preset)?,
    };
    if let Some(out) = &cli.out {
        cfg.out = out.clone();
    }
    if cli.allow_negative_d {
        cfg.diagram.continuation.allow_negative_d = true;
    }
    cfg.strict |= cli.strict;
    Ok(cfg)
}

fn check_inputs(cfg: &RunConfig) -> Result<()> {
    cfg.model().validate(cfg.allow_negative_d())?;
    if cfg.param == ActiveParam::D && cfg.range.0 <= 0.0 && !cfg.allow_negative_d() {
        return Err(Error::Config {
            line: 0,
            message: "the d range reaches zero; pass --allow-negative-d to continue there".into(),
        });
    }
    Grid::new(cfg.nodes)?;
    Ok(())
}

pub fn analyze(cfg: &RunConfig) -> Result<Exit> {
    let p = cfg.model();
    p.validate(cfg.allow_negative_d())?;
    fs::create_dir_all(&cfg.out)?;
    let mut report = String::new();
    let _ = writeln!(report, "parameters: {}", describe(cfg));
    let eq = coexistence_state(&cfg.params);
    match &eq.coexistence {
        Coexistence::Undefined => {
            let _ = writeln!(report, "coexistence state: undefined (a1 a2 = b1 b2)");
        }
        Coexistence::Defined { state, admissible } => {
            let _ = writeln!(
                report,
                "coexistence state: u* = {}, v* = {} ({})",
                state.u,
                state.v,
                if *admissible { "admissible" } else { "not admissible" }
            );
        }
    }
    let regime = classify_regime(&cfg.params);
    let _ = writeln!(report, "regime: {}, case {}", regime.regime, regime.case);
    let show = |x: &Option<num::rational::BigRational>| x.as_ref().map_or("-".to_string(), |x| format!("{x} ({:.6})", x.to_f64()));
    let _ = writeln!(report, "alpha: {}", show(&regime.alpha));
    let _ = writeln!(report, "beta: {}", show(&regime.beta));
    let _ = writeln!(report, "det J*: {}", show(&regime.det_j));
    let _ = writeln!(report, "tr J*: {}", show(&regime.tr_j));
    if eq.admissible().is_none() {
        let _ = writeln!(report, "no admissible coexistence state: nothing to bifurcate from");
        fs::write(cfg.out.join("report.txt"), &report)?;
        print!("{report}");
        return Ok(Exit::Ok);
    }

    let (k_min, k_max) = cfg.modes;
    let continuous = mode_table(&p, k_min, k_max, EigenFamily::Continuous)?;
    let discrete = mode_table(&p, k_min, k_max.min(cfg.nodes - 1), EigenFamily::Discrete { nodes: cfg.nodes })?;
    fs::write(cfg.out.join("modes.csv"), mode_table_csv(&continuous))?;
    fs::write(cfg.out.join("modes_discrete.csv"), mode_table_csv(&discrete))?;
    let _ = writeln!(report, "\nmode table (continuous eigenvalues):\n{}", render_mode_table(&continuous));
    let bifurcating: Vec<usize> = continuous.iter().filter(|r| r.bifurcates).map(|r| r.k).collect();
    if regime.case == CaseTag::W2 {
        let _ = writeln!(report, "case 2w: no bifurcation for any d > 0");
    } else if bifurcating.is_empty() {
        let _ = writeln!(report, "no mode in {k_min}..={k_max} bifurcates for d > 0");
    } else {
        let _ = writeln!(report, "bifurcating modes: {bifurcating:?}");
    }

    let mut thresholds = String::from("k,d21_threshold,d21_global_cutoff,limit_d12_to_inf,limit_d21_to_inf\n");
    let opt = |x: Option<f64>| x.map_or(String::new(), |x| x.to_string());
    for k in k_min.max(1)..=k_max {
        let t = d21_disappearance_threshold(&p, k, EigenFamily::Continuous).ok();
        let lim = |v| d_bif_limit(&p, k, EigenFamily::Continuous, v).ok().map(|l| l.value);
        let _ = writeln!(
            thresholds,
            "{k},{},{},{},{}",
            opt(t.as_ref().map(|t| t.threshold)),
            opt(t.as_ref().map(|t| t.global_cutoff)),
            opt(lim(Varied::D12)),
            opt(lim(Varied::D21))
        );
    }
    fs::write(cfg.out.join("thresholds.csv"), &thresholds)?;

    if let Some(bound) = self_diffusion_mode_bound(&p)? {
        let _ = writeln!(report, "self-diffusion: no bifurcation for lambda_k > {bound:.6}");
    }
    match theorem_large_cross(&cfg.params, 5) {
        Ok(check) => {
            let _ = writeln!(report, "\nlarge equal cross-diffusion check:");
            let _ = writeln!(report, "  b1 b2 < a1 a2: {}", check.cond_det_j);
            let _ = writeln!(report, "  (b1 + b2)^2 > 4 a1 a2: {}", check.cond_disc);
            let _ = writeln!(report, "  r*: {}", show(&check.r_star));
            let _ = writeln!(report, "  alpha + beta at r1 = r* r2: {}", show(&check.alpha_plus_beta));
            let passes = check.cond_det_j && check.cond_disc && !check.d_cross_threshold.is_empty();
            let _ = writeln!(report, "  passes: {passes}");
            for (k, t) in check.d_cross_threshold.iter().enumerate() {
                let _ = writeln!(report, "  k = {}: threshold {t:.6}", k + 1);
            }
        }
        Err(e) => {
            let _ = writeln!(report, "\nlarge equal cross-diffusion check not applicable: {e}");
        }
    }
    fs::write(cfg.out.join("report.txt"), &report)?;
    print!("{report}");
    Ok(Exit::Ok)
}

fn describe(cfg: &RunConfig) -> String {
    let p = &cfg.params;
    format!(
        "r = ({}, {}), a = ({}, {}), b = ({}, {}), d = ({}, {}), d11 = {}, d22 = {}, d12 = {}, d21 = {}",
        p.r1, p.r2, p.a1, p.a2, p.b1, p.b2, p.d1, p.d2, p.d11, p.d22, p.d12, p.d21
    )
}

fn summarize(d: &Diagram) -> String {
    let mut s = String::new();
    for b in d.all_branches() {
        let (lo, hi) = b.param_range();
        let _ = writeln!(
            s,
            "branch {:>3}: {:?}, {} points, {} = {lo:.6}..{hi:.6}, {} stable, {} events, stop {:?}",
            b.id,
            b.provenance,
            b.points.len(),
            d.param,
            b.stable_points().count(),
            b.events.len(),
            b.stop
        );
    }
    for f in &d.failures {
        let _ = writeln!(s, "failed: {f}");
    }
    s
}

pub fn continue_cmd(cfg: &RunConfig) -> Result<Exit> {
    check_inputs(cfg)?;
    let diagram = match compute_diagram(&cfg.model(), &cfg.diagram) {
        Ok(d) => d,
        Err(e) => {
            error!("{e}");
            eprintln!("no diagram: {e}");
            return Ok(Exit::NoResult);
        }
    };
    let files = write_diagram(&diagram, &cfg.out)?;
    print!("{}", summarize(&diagram));
    info!("wrote {} files to {}", files.len(), cfg.out.display());
    if diagram.branches.is_empty() {
        warn!("no nontrivial branch in the range");
        return Ok(Exit::NoResult);
    }
    Ok(Exit::Ok)
}

pub fn sweep_cmd(cfg: &RunConfig) -> Result<Exit> {
    check_inputs(cfg)?;
    if cfg.sweep_values.is_empty() {
        return Err(Error::Config {
            line: 0,
            message: "sweep needs sweep_values".into(),
        });
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| Error::domain(format!("worker pool: {e}")))?;
    let results = pool.install(|| sweep(&cfg.model(), cfg.sweep_param, &cfg.sweep_values, &cfg.diagram));
    fs::create_dir_all(&cfg.out)?;
    let mut layers = Vec::new();
    let mut produced = 0;
    for (i, r) in results.iter().enumerate() {
        let label = format!("{} = {}", cfg.sweep_param, r.value);
        match &r.diagram {
            Ok(d) => {
                let dir = cfg.out.join(format!("{}_{i:02}", cfg.sweep_param));
                write_diagram(d, &dir)?;
                println!("{label} -> {}", dir.display());
                print!("{}", summarize(d));
                if !d.branches.is_empty() {
                    produced += 1;
                }
                let series = d.all_branches().map(|b| Series { id: b.id, rows: branch_rows(b) }).collect();
                layers.push((label, series));
            }
            Err(e) => println!("{label}: {e}"),
        }
    }
    fs::write(cfg.out.join("overlay.svg"), overlay_svg(&layers, cfg.param.name()))?;
    Ok(if produced == 0 { Exit::NoResult } else { Exit::Ok })
}

/// Initial data for `simulate` on the configured grid.
pub fn initial_state(cfg: &RunConfig) -> Result<StateVector> {
    let p = cfg.model();
    let value = cfg.param.value_of(&p);
    if let InitialData::File(path) = &cfg.initial {
        let mut s = StateVector::read_csv(path, cfg.param, value)?;
        s.value = value;
        return Ok(s);
    }
    let eq = coexistence_state(&p);
    let star = eq
        .admissible()
        .ok_or_else(|| Error::domain("no admissible coexistence state to perturb; use initial = file"))?
        .clone();
    let grid = Grid::new(cfg.nodes)?;
    Ok(match cfg.initial {
        InitialData::Mode { k, amplitude } => StateVector::from_fn(grid, cfg.param, value, |x| {
            let c = amplitude * (k as f64 * PI * x).cos();
            (star.u * (1.0 + c), star.v * (1.0 - c))
        }),
        InitialData::Random { amplitude } => {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            StateVector::from_fn(grid, cfg.param, value, |_| {
                let (a, b): (f64, f64) = (rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
                (star.u * (1.0 + amplitude * a), star.v * (1.0 + amplitude * b))
            })
        }
        InitialData::File(_) => unreachable!(),
    })
}

pub fn simulate(cfg: &RunConfig) -> Result<Exit> {
    let p = cfg.model();
    p.validate(cfg.allow_negative_d())?;
    let s0 = initial_state(cfg)?;
    let outcome = integrate_to_steady(&p, &s0, &cfg.evolve);
    fs::create_dir_all(&cfg.out)?;
    s0.write_csv(&cfg.out.join("initial_state.csv"))?;
    outcome.state.write_csv(&cfg.out.join("final_state.csv"))?;
    write_trajectory_csv(&outcome.trajectory, &cfg.out.join("trajectory.csv"))?;
    let (nu, nv) = outcome.state.l2_norms();
    let caption = format!("t = {:.6e}, |u| = {nu:.6}, |v| = {nv:.6}, converged = {}", outcome.time, outcome.converged);
    fs::write(cfg.out.join("final_state.svg"), profile_svg(&outcome.state, true, &caption))?;
    println!(
        "t = {:.6e} after {} steps ({} rejected); converged = {}; |u| = {nu:.8}, |v| = {nv:.8}; min u = {:.3e}, min v = {:.3e}",
        outcome.time,
        outcome.steps,
        outcome.rejected,
        outcome.converged,
        outcome.state.min_u(),
        outcome.state.min_v()
    );
    if !outcome.converged {
        warn!("time integration did not reach a steady state");
        if cfg.strict {
            return Ok(Exit::NotConverged);
        }
    }
    Ok(Exit::Ok)
}

fn header_of(path: &Path) -> Result<String> {
    let text = fs::read_to_string(path)?;
    Ok(text.lines().next().unwrap_or("").trim().to_string())
}

/// Id from a `branch_<id>.csv` name, if it has one.
fn branch_id(path: &Path) -> Option<usize> {
    path.file_stem()?.to_str()?.strip_prefix("branch_")?.parse().ok()
}

pub fn plot(files: &[PathBuf], show_uv: bool, xlabel: &str, out: Option<&Path>) -> Result<Exit> {
    if files.is_empty() {
        return Err(Error::Config {
            line: 0,
            message: "plot needs at least one CSV file".into(),
        });
    }
    let mut series = Vec::new();
    let mut first_branch_dir = None;
    for (i, path) in files.iter().enumerate() {
        let header = header_of(path)?;
        let dir = out.map(Path::to_path_buf).unwrap_or_else(|| path.parent().unwrap_or(Path::new(".")).to_path_buf());
        if header == BRANCH_HEADER.join(",") {
            let rows = read_branch_csv(path)?;
            series.push(Series {
                id: branch_id(path).unwrap_or(i + 1),
                rows,
            });
            first_branch_dir.get_or_insert(dir);
        } else if header == "x,u,v" {
            let s = StateVector::read_csv(path, ActiveParam::D, 0.0)?;
            let name = path.file_stem().and_then(|s| s.to_str()).unwrap_or("profile");
            fs::create_dir_all(&dir)?;
            let target = dir.join(format!("{name}.svg"));
            fs::write(&target, profile_svg(&s, show_uv, name))?;
            println!("{}", target.display());
        } else if header == crate::output::EVENT_HEADER.join(",") {
            crate::output::read_events_csv(path)?;
            info!("{}: events are drawn from the branch files", path.display());
        } else {
            return Err(Error::Csv {
                path: path.display().to_string(),
                line: 1,
                message: format!("unrecognised header {header:?}"),
            });
        }
    }
    if let Some(dir) = first_branch_dir {
        series.sort_by_key(|s| s.id);
        fs::create_dir_all(&dir)?;
        let target = dir.join("diagram.svg");
        fs::write(&target, diagram_svg(&series, xlabel))?;
        println!("{}", target.display());
    }
    Ok(Exit::Ok)
}
