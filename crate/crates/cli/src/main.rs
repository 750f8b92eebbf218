use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use qdgrasp::metrics::{self, build_reference_set, coverage_curve, nu_mass_below};
use qdgrasp::runner::{self, compare_runs, load_run, run_experiment, RunConfig};
use qdgrasp::Error;

const EXIT_CONFIG: u8 = 2;
const EXIT_IO: u8 = 3;

#[derive(Parser)]
#[command(name = "qdgrasp", version, about = "Quality-Diversity grasp sampling experiments")]
struct Cli {
    /// Worker threads for evaluation (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment from a TOML config and write its run directory.
    Run {
        config: PathBuf,
        /// Override any config key, e.g. `--set qd.budget=20000`. Repeatable.
        #[arg(long = "set", value_name = "SECTION.KEY=VALUE")]
        overrides: Vec<String>,
        /// Same as `--set qd.budget=N`.
        #[arg(long)]
        budget: Option<usize>,
        /// Same as `--set run.seeds=[..]`, comma separated.
        #[arg(long, value_delimiter = ',')]
        seeds: Option<Vec<u64>>,
        /// Same as `--set run.prior=..`.
        #[arg(long)]
        prior: Option<String>,
        /// Same as `--set run.algorithm=..`.
        #[arg(long)]
        algorithm: Option<String>,
        /// Same as `--set run.output_dir=..`.
        #[arg(long)]
        output: Option<PathBuf>,
        /// Validate and print the resolved config without running.
        #[arg(long)]
        dry_run: bool,
    },
    /// Coverage of several runs against the union of their successful grasps.
    Compare {
        #[arg(required = true, num_args = 2..)]
        runs: Vec<PathBuf>,
        #[arg(long, default_value_t = metrics::DEFAULT_STEP)]
        step: f64,
        /// Also write the full report (curves included) as JSON.
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Recompute per-seed metrics of one run at a chosen resolution.
    Metrics {
        run: PathBuf,
        #[arg(long, default_value_t = metrics::DEFAULT_STEP)]
        step: f64,
        #[arg(long, default_value_t = 18)]
        bins: usize,
    },
    /// Summarize a run directory.
    Inspect { run: PathBuf },
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config { .. } | Error::Incompatible(_) => EXIT_CONFIG,
        _ => EXIT_IO,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot start {n} worker threads: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    }
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn dispatch(cmd: Command) -> qdgrasp::Result<()> {
    match cmd {
        Command::Run {
            config,
            mut overrides,
            budget,
            seeds,
            prior,
            algorithm,
            output,
            dry_run,
        } => {
            if let Some(b) = budget {
                overrides.push(format!("qd.budget={b}"));
            }
            if let Some(s) = seeds {
                let list: Vec<String> = s.iter().map(u64::to_string).collect();
                overrides.push(format!("run.seeds=[{}]", list.join(",")));
            }
            if let Some(p) = prior {
                overrides.push(format!("run.prior=\"{p}\""));
            }
            if let Some(a) = algorithm {
                overrides.push(format!("run.algorithm=\"{a}\""));
            }
            if let Some(o) = output {
                overrides.push(format!("run.output_dir={}", toml_string(&o.to_string_lossy())));
            }
            let cfg = RunConfig::load(&config, &overrides)?;
            if dry_run {
                print!("{}", cfg.to_toml());
                return Ok(());
            }
            let dir = run_experiment(&cfg)?;
            let meta = runner::read_metadata(&dir)?;
            println!("{}", dir.display());
            for s in &meta.seeds {
                println!(
                    "seed {:>3}  evaluations {:>7}  successes {:>7}  coverage {:.4}",
                    s.seed, s.evaluations, s.successes, s.final_coverage
                );
            }
            Ok(())
        }
        Command::Compare { runs, step, json } => {
            let report = compare_runs(&runs, step)?;
            println!(
                "reference set: {} voxels at step {}",
                report.reference_size, report.step
            );
            println!("{:<40} {:>8}  per-seed final coverage", "run", "median");
            for row in &report.rows {
                let seeds: Vec<String> = row.per_seed.iter().map(|(s, c)| format!("{s}:{c:.4}")).collect();
                println!("{:<40} {:>8.4}  {}", row.run, row.median, seeds.join(" "));
            }
            if let Some(path) = json {
                let text = serde_json::to_string_pretty(&report).expect("report serializes");
                std::fs::write(&path, text).map_err(|e| Error::Io { path, source: e })?;
            }
            Ok(())
        }
        Command::Metrics { run, step, bins } => {
            let loaded = load_run(&run)?;
            let reference = build_reference_set(loaded.archives.iter().map(|(_, a)| a), step)?;
            let mut out = Vec::new();
            for (seed, a) in &loaded.archives {
                let coverage = if reference.is_empty() {
                    0.0
                } else {
                    coverage_curve(a, &reference, step)?.final_value()
                };
                out.push(serde_json::json!({
                    "seed": seed,
                    "successes": a.len(),
                    "voxels": build_reference_set([a], step)?.len(),
                    "coverage": coverage,
                    "nu_mass_below_quarter_pi": nu_mass_below(a, std::f64::consts::FRAC_PI_4).ok(),
                    "nu_histogram": metrics::nu_histogram(a, bins).ok(),
                }));
            }
            let doc = serde_json::json!({ "step": step, "reference_size": reference.len(), "seeds": out });
            println!("{}", serde_json::to_string_pretty(&doc).expect("json"));
            Ok(())
        }
        Command::Inspect { run } => {
            let meta = runner::read_metadata(&run)?;
            let c = &meta.config;
            println!("run        {}", run.display());
            println!("version    {}", meta.code_version);
            println!(
                "mesh       {} (scale {}, sha256 {})",
                c.mesh.path.display(),
                c.mesh.scale,
                meta.mesh_hash
            );
            println!(
                "gripper    {} ({:?}, {} fingers)",
                meta.gripper.name, meta.gripper.family, meta.gripper.n_fingers
            );
            println!(
                "search     {} / {} / {:?}, genome length {}",
                c.run.prior, c.run.algorithm, c.run.fitness, meta.genome_len
            );
            println!("budget     {}", c.qd.budget);
            for s in &meta.seeds {
                println!(
                    "seed {:>3}  valid {:>7}  successes {:>7}  elites {:>6}  restarts {:>4}  coverage {:.4}",
                    s.seed, s.valid, s.successes, s.grid_elites, s.restarts, s.final_coverage
                );
            }
            Ok(())
        }
    }
}

fn toml_string(s: &str) -> String {
    format!("\"{}\"", s.replace('\\', "\\\\").replace('"', "\\\""))
}
