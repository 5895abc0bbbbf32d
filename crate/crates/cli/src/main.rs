//! `sfring` command-line driver.
//!
//! Exit codes: 0 success, 1 validation failure, 2 config error, 3 runtime failure.

mod csv;

use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use log::{info, warn};
use serde_json::json;

use sfring::basis::enumerate_sector;
use sfring::config::{schema, RunConfig};
use sfring::dynamics::StateVector;
use sfring::ensemble::{run_ensemble, EnsembleStats};
use sfring::hamiltonian::{build_exciton_free, build_h_int, ModelParams};
use sfring::observables::ObservableSeries;
use sfring::optimize::{run_optimization, EvalRecord};
use sfring::perturbative::{fgr_rate, EigenDistribution, Weighting};
use sfring::validate::{run_validation, Corruption};

use crate::csv::{num, Table};

const WORKERS_ENV: &str = "SFRING_WORKERS";

#[derive(Parser)]
#[command(name = "sfring", version, about = "Singlet fission on molecular rings")]
struct Cli {
    /// Worker threads for ensembles and trajectories (default: all cores).
    #[arg(long, global = true, env = WORKERS_ENV)]
    workers: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Single realization; writes timeseries.csv.
    Simulate(RunArgs),
    /// Disorder ensemble; writes ensemble_stats.csv and realizations.csv.
    Ensemble {
        #[command(flatten)]
        run: RunArgs,
        /// Also write every realization's time series.
        #[arg(long)]
        dump_realizations: bool,
    },
    /// Two-stage parameter search; writes best_params.json and eval_log.jsonl.
    Optimize {
        #[command(flatten)]
        run: RunArgs,
        /// Replay a previous eval_log.jsonl before continuing.
        #[arg(long)]
        resume: Option<PathBuf>,
    },
    /// Golden-rule rate tables and transition-element dumps.
    Rates(RunArgs),
    /// Built-in oracle suite; exit 1 on any failure.
    Validate {
        /// Directory for validation_report.json.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Deliberately corrupt the Hamiltonian (negative control).
        #[arg(long, value_enum, hide = true, default_value = "none")]
        corrupt: CorruptArg,
    },
    /// Print the configuration schema with units.
    Schema,
}

#[derive(clap::Args)]
struct RunArgs {
    /// JSON run configuration.
    config: PathBuf,
    /// Output directory; overrides `output.dir`.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum CorruptArg {
    None,
    FlipUpperSign,
}

enum Failure {
    Validation,
    Config(String),
    Runtime(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Validation => 1,
            Failure::Config(_) => 2,
            Failure::Runtime(_) => 3,
        }
    }
}

type CliResult<T> = Result<T, Failure>;

fn runtime(e: impl std::fmt::Display) -> Failure {
    Failure::Runtime(e.to_string())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Some(w) = cli.workers {
        if w == 0 {
            eprintln!("error: --workers must be positive");
            return ExitCode::from(2);
        }
        // read by the rayon global pool on first use
        std::env::set_var("RAYON_NUM_THREADS", w.to_string());
    }
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            match &f {
                Failure::Validation => eprintln!("validation failed"),
                Failure::Config(m) => eprintln!("config error: {m}"),
                Failure::Runtime(m) => eprintln!("error: {m}"),
            }
            ExitCode::from(f.code())
        }
    }
}

fn dispatch(cli: &Cli) -> CliResult<()> {
    match &cli.command {
        Command::Simulate(run) => {
            let (cfg, out) = load(run)?;
            cmd_simulate(&cfg, &out)
        }
        Command::Ensemble {
            run,
            dump_realizations,
        } => {
            let (mut cfg, out) = load(run)?;
            cfg.output.dump_realizations |= *dump_realizations;
            cmd_ensemble(&cfg, &out, cli.workers)
        }
        Command::Optimize { run, resume } => {
            let (cfg, out) = load(run)?;
            cmd_optimize(&cfg, &out, resume.as_deref())
        }
        Command::Rates(run) => {
            let (cfg, out) = load(run)?;
            cmd_rates(&cfg, &out)
        }
        Command::Validate { out, corrupt } => cmd_validate(out.as_deref(), *corrupt),
        Command::Schema => {
            println!(
                "{}",
                serde_json::to_string_pretty(&schema()).map_err(runtime)?
            );
            Ok(())
        }
    }
}

fn load(run: &RunArgs) -> CliResult<(RunConfig, PathBuf)> {
    let text = fs::read_to_string(&run.config)
        .map_err(|e| Failure::Config(format!("{}: {e}", run.config.display())))?;
    let cfg = RunConfig::from_json(&text).map_err(|e| Failure::Config(e.to_string()))?;
    let out = run
        .out
        .clone()
        .or_else(|| cfg.output.dir.clone())
        .unwrap_or_else(|| PathBuf::from("sfring_out"));
    fs::create_dir_all(&out).map_err(|e| runtime(format!("{}: {e}", out.display())))?;
    Ok((cfg, out))
}

fn write_meta(
    out: &Path,
    command: &str,
    cfg: &RunConfig,
    extra: serde_json::Value,
) -> CliResult<()> {
    let meta = json!({
        "command": command,
        "version": env!("CARGO_PKG_VERSION"),
        "config": cfg,
        "extra": extra,
    });
    write_json(&out.join("run_meta.json"), &meta)
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> CliResult<()> {
    let text = serde_json::to_string_pretty(value).map_err(runtime)?;
    fs::write(path, text + "\n").map_err(|e| runtime(format!("{}: {e}", path.display())))
}

fn write_table(path: &Path, table: &Table) -> CliResult<()> {
    table
        .write(path)
        .map_err(|e| runtime(format!("{}: {e}", path.display())))
}

fn series_table(s: &ObservableSeries) -> Table {
    let mut header = vec!["t", "n_singlet", "n_triplet", "cqn", "eta"];
    if s.stderr.is_some() {
        header.extend([
            "stderr_n_singlet",
            "stderr_n_triplet",
            "stderr_cqn",
            "stderr_eta",
        ]);
    }
    let mut table = Table::new(&header);
    for k in 0..s.times.len() {
        let mut row = vec![
            num(s.times[k]),
            num(s.n_s[k]),
            num(s.n_t[k]),
            num(s.cqn[k]),
            num(s.eta[k]),
        ];
        if let Some(se) = &s.stderr {
            row.extend(se.iter().map(|col| num(col[k])));
        }
        table.row(&row);
    }
    table
}

fn cmd_simulate(cfg: &RunConfig, out: &Path) -> CliResult<()> {
    let start = Instant::now();
    let spec = cfg
        .simulation_spec()
        .map_err(|e| Failure::Config(e.to_string()))?;
    let dis = spec.sample_disorder(cfg.seed).map_err(runtime)?;
    let series = sfring::simulate::simulate(&spec, &dis).map_err(runtime)?;
    write_table(&out.join("timeseries.csv"), &series_table(&series))?;
    let drift = series.charge_drift();
    if drift > 1e-10 {
        warn!("charge drift {drift:e} exceeds 1e-10");
    }
    info!("simulate finished in {:.3}s", start.elapsed().as_secs_f64());
    write_meta(
        out,
        "simulate",
        cfg,
        json!({"charge_drift": drift, "open": spec.is_open()}),
    )
}

fn cmd_ensemble(cfg: &RunConfig, out: &Path, workers: Option<usize>) -> CliResult<()> {
    let mut ens = cfg
        .ensemble
        .ok_or_else(|| Failure::Config("ensemble section missing".into()))?;
    ens.keep_series |= cfg.output.dump_realizations;
    if workers.is_some() {
        ens.worker_count = workers;
    }
    let spec = cfg
        .simulation_spec()
        .map_err(|e| Failure::Config(e.to_string()))?;
    let start = Instant::now();
    let stats = run_ensemble(&spec, &ens).map_err(runtime)?;
    info!(
        "{} realizations in {:.2}s",
        ens.n_realizations,
        start.elapsed().as_secs_f64()
    );
    write_ensemble(out, &stats)?;
    write_meta(out, "ensemble", cfg, json!({"tau": stats.tau}))
}

fn write_ensemble(out: &Path, stats: &EnsembleStats) -> CliResult<()> {
    let mut table = Table::new(&[
        "t",
        "n_singlet_mean",
        "n_singlet_std",
        "n_triplet_mean",
        "n_triplet_std",
        "eta_mean",
        "eta_std",
    ]);
    for (k, t) in stats.times.iter().enumerate() {
        table.row(&[
            num(*t),
            num(stats.n_s.mean[k]),
            num(stats.n_s.std[k]),
            num(stats.n_t.mean[k]),
            num(stats.n_t.std[k]),
            num(stats.eta.mean[k]),
            num(stats.eta.std[k]),
        ]);
    }
    write_table(&out.join("ensemble_stats.csv"), &table)?;

    let mut table = Table::new(&["realization", "seed", "eta_bar", "eta_final"]);
    for (r, seed) in stats.seeds.iter().enumerate() {
        table.row(&[
            r.to_string(),
            seed.to_string(),
            num(stats.eta_bar[r]),
            num(stats.eta_final[r]),
        ]);
    }
    write_table(&out.join("realizations.csv"), &table)?;

    write_json(
        &out.join("ensemble_summary.json"),
        &json!({
            "n_realizations": stats.seeds.len(),
            "tau": stats.tau,
            "eta_bar_mean": stats.eta_bar_mean,
            "eta_bar_std": stats.eta_bar_std,
            "eta_final_mean": stats.eta_final_mean,
            "eta_final_std": stats.eta_final_std,
            "mean_eta_fluctuation": stats.mean_eta_fluctuation,
        }),
    )?;

    if let Some(series) = &stats.series {
        let dir = out.join("realizations");
        fs::create_dir_all(&dir).map_err(runtime)?;
        for (r, s) in series.iter().enumerate() {
            write_table(
                &dir.join(format!("realization_{r:05}.csv")),
                &series_table(s),
            )?;
        }
    }
    Ok(())
}

/// Reads complete records; a torn final line from an interrupted run is dropped.
fn read_log(path: &Path) -> CliResult<Vec<EvalRecord>> {
    let file =
        fs::File::open(path).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
    let lines: Vec<String> = BufReader::new(file)
        .lines()
        .collect::<Result<_, _>>()
        .map_err(|e| Failure::Config(e.to_string()))?;
    let mut records = Vec::new();
    for (k, line) in lines.iter().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str(line) {
            Ok(r) => records.push(r),
            Err(e) if k + 1 == lines.len() => warn!("dropping torn last log line: {e}"),
            Err(e) => {
                return Err(Failure::Config(format!(
                    "{}:{}: {e}",
                    path.display(),
                    k + 1
                )))
            }
        }
    }
    Ok(records)
}

fn cmd_optimize(cfg: &RunConfig, out: &Path, resume: Option<&Path>) -> CliResult<()> {
    let section = cfg
        .optimize
        .as_ref()
        .ok_or_else(|| Failure::Config("optimize section missing".into()))?;
    let space = cfg
        .parameter_space(section)
        .map_err(|e| Failure::Config(e.to_string()))?;
    let prior = match resume {
        Some(p) => read_log(p)?,
        None => Vec::new(),
    };
    info!("replaying {} logged evaluations", prior.len());

    let log_path = out.join("eval_log.jsonl");
    let mut log = fs::File::create(&log_path).map_err(runtime)?;
    let mut sink = |r: &EvalRecord| -> sfring::error::Result<()> {
        writeln!(log, "{}", serde_json::to_string(r)?)?;
        log.flush()?;
        Ok(())
    };
    let result = run_optimization(&space, &section.stages, prior, &mut sink).map_err(runtime)?;
    if result.budget_exhausted {
        warn!(
            "evaluation budget of {} exhausted; best point is provisional",
            section.stages.max_evals
        );
    }
    write_json(
        &out.join("best_params.json"),
        &json!({
            "params": result.best_params,
            "objective": result.best_objective,
            "model": result.best_model,
            "phonons": result.best_phonons,
            "total_evaluations": result.total_evaluations,
            "budget_exhausted": result.budget_exhausted,
        }),
    )?;
    write_meta(
        out,
        "optimize",
        cfg,
        json!({"resume": resume.map(|p| p.display().to_string())}),
    )
}

fn cmd_rates(cfg: &RunConfig, out: &Path) -> CliResult<()> {
    let section = cfg
        .perturbative
        .as_ref()
        .ok_or_else(|| Failure::Config("perturbative section missing".into()))?;
    let spec = cfg
        .simulation_spec()
        .map_err(|e| Failure::Config(e.to_string()))?;
    let n = cfg.n_sites;
    let n0 = cfg.initial.n0;
    let basis = enumerate_sector(n, 2 * n0, cfg.spin_mode).map_err(runtime)?;
    let dis = spec.sample_disorder(cfg.seed).map_err(runtime)?;

    // channels S -> TT between populated blocks of the sector
    let channels: Vec<((usize, usize), (usize, usize))> = (1..=n0)
        .map(|n_s| ((n_s, 2 * (n0 - n_s)), (n_s - 1, 2 * (n0 - n_s) + 2)))
        .filter(|&((a, b), (c, d))| a + b <= n && c + d <= n)
        .collect();

    let h0 = build_exciton_free(&basis, &cfg.model, cfg.spinful.as_ref(), &dis).map_err(runtime)?;
    let rate_at =
        |gamma: f64, from: &EigenDistribution, to: &EigenDistribution| -> CliResult<f64> {
            let p = ModelParams { gamma, ..cfg.model };
            let h1 = build_h_int(&basis, &p, &dis).map_err(runtime)?;
            fgr_rate(from, to, &h1, &section.broadening).map_err(runtime)
        };

    let mut rates = Table::new(&[
        "gamma",
        "from_n_s",
        "from_n_t",
        "to_n_s",
        "to_n_t",
        "rate",
        "rate_2g_over_g",
    ]);
    let mut elements = Table::new(&[
        "gamma",
        "from_n_s",
        "from_n_t",
        "to_n_s",
        "to_n_t",
        "final_index",
        "initial_energy",
        "final_energy",
        "re",
        "im",
    ]);
    for &((a, b), (c, d)) in &channels {
        let from =
            EigenDistribution::from_block(&h0, &basis.block_indices(a, b), Weighting::Ground)
                .map_err(runtime)?;
        let to = EigenDistribution::from_block(&h0, &basis.block_indices(c, d), Weighting::Uniform)
            .map_err(runtime)?;
        for &gamma in &section.gammas {
            let rate = rate_at(gamma, &from, &to)?;
            let ratio = rate_at(2.0 * gamma, &from, &to)? / rate;
            rates.row(&[
                num(gamma),
                a.to_string(),
                b.to_string(),
                c.to_string(),
                d.to_string(),
                num(rate),
                num(ratio),
            ]);

            let p = ModelParams { gamma, ..cfg.model };
            let h1 = build_h_int(&basis, &p, &dis).map_err(runtime)?;
            let h_psi = StateVector::new(h1.tag(), h1.mul_vec(from.states[0].amps()));
            for (k, (e, phi)) in to.energies.iter().zip(&to.states).enumerate() {
                let m = phi.inner(&h_psi).map_err(runtime)?;
                elements.row(&[
                    num(gamma),
                    a.to_string(),
                    b.to_string(),
                    c.to_string(),
                    d.to_string(),
                    k.to_string(),
                    num(from.energies[0]),
                    num(*e),
                    num(m.re),
                    num(m.im),
                ]);
            }
        }
    }
    write_table(&out.join("rates.csv"), &rates)?;
    write_table(&out.join("elements.csv"), &elements)?;
    write_meta(
        out,
        "rates",
        cfg,
        json!({"initial_weighting": "ground", "final_weighting": "uniform"}),
    )
}

fn cmd_validate(out: Option<&Path>, corrupt: CorruptArg) -> CliResult<()> {
    let corruption = match corrupt {
        CorruptArg::None => Corruption::None,
        CorruptArg::FlipUpperSign => Corruption::FlipUpperSign,
    };
    let report = run_validation(corruption);
    for c in &report.checks {
        println!(
            "{:<24} {}  max error {:.3e} (tol {:.1e})  {:.3}s  {}",
            c.name,
            if c.passed { "PASS" } else { "FAIL" },
            c.max_error,
            c.tolerance,
            c.wall_time_s,
            c.detail
        );
    }
    if let Some(dir) = out {
        fs::create_dir_all(dir).map_err(runtime)?;
        write_json(&dir.join("validation_report.json"), &report)?;
        write_json(
            &dir.join("run_meta.json"),
            &json!({"command": "validate", "version": env!("CARGO_PKG_VERSION"), "corrupt": matches!(corrupt, CorruptArg::FlipUpperSign)}),
        )?;
    }
    if report.passed() {
        Ok(())
    } else {
        Err(Failure::Validation)
    }
}
