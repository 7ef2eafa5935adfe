use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use mmfld::harness::compare::compare_runs;
use mmfld::harness::config::{preset, preset_names, RunConfig};
use mmfld::harness::run::{read_summary, run_experiment, write_json};
use mmfld::harness::selfcheck;
use mmfld::oracle::{fixed_point_solve, OracleExport, SimplexGrid};
use mmfld::theory::BoundInputs;
use mmfld::{Domain, Error, Result, SamplerKind};

#[derive(Parser)]
#[command(name = "mmfld", version, about = "Mirror mean-field Langevin samplers on constrained domains")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a sampler from a config file or preset name.
    Run {
        config: String,
        #[command(flatten)]
        overrides: Overrides,
        /// Also write the final particles.
        #[arg(long)]
        dump_particles: bool,
    },
    /// Solve the grid fixed point for a simplex config and export it.
    Oracle {
        config: String,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Evaluate the theory calculators for a TOML file of inputs.
    Bounds { inputs: PathBuf },
    /// Compare run summaries (files or run directories); the first is the baseline.
    Compare {
        #[arg(required = true, num_args = 2..)]
        summaries: Vec<PathBuf>,
    },
    /// Run the fast invariant suites.
    Selfcheck {
        #[arg(long, default_value_t = 1000)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Print the names of the built-in presets, or one preset's TOML.
    Presets { name: Option<String> },
}

#[derive(Args)]
struct Overrides {
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    particles: Option<usize>,
    #[arg(long)]
    steps: Option<u64>,
    /// Use the full particle count instead of the desk-scale one.
    #[arg(long)]
    paper_scale: bool,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// mmfld, projected-mfld or mfld.
    #[arg(long)]
    sampler: Option<String>,
    /// Worker threads; 0 uses every core.
    #[arg(long)]
    workers: Option<usize>,
}

impl Overrides {
    fn apply(&self, cfg: &mut RunConfig) -> Result<()> {
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if self.paper_scale {
            cfg.paper_scale();
        }
        if let Some(n) = self.particles {
            cfg.sampler.particles = n;
            cfg.sampler.desk_particles = None;
        }
        if let Some(t) = self.steps {
            cfg.sampler.steps = t;
        }
        if let Some(dir) = &self.out_dir {
            cfg.output.dir = dir.clone();
        }
        if let Some(w) = self.workers {
            cfg.sampler.workers = w;
        }
        if let Some(name) = &self.sampler {
            cfg.sampler.kind = parse_sampler(name)?;
        }
        cfg.validate()
    }
}

fn parse_sampler(name: &str) -> Result<SamplerKind> {
    serde_json::from_value(serde_json::Value::String(name.to_string())).map_err(|_| {
        Error::Config(vec![mmfld::error::ConfigIssue {
            key: "sampler.kind".into(),
            message: format!("unknown sampler {name:?}; expected mmfld, projected-mfld or mfld"),
        }])
    })
}

fn load_config(arg: &str) -> Result<RunConfig> {
    let path = Path::new(arg);
    if path.exists() {
        return RunConfig::from_file(path);
    }
    if preset_names().any(|n| n == arg) {
        return preset(arg);
    }
    Err(Error::Io {
        path: path.to_path_buf(),
        source: std::io::Error::new(
            std::io::ErrorKind::NotFound,
            format!("no such file or preset (presets: {})", preset_names().collect::<Vec<_>>().join(", ")),
        ),
    })
}

fn print_json(value: &impl serde::Serialize) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run {
            config,
            overrides,
            dump_particles,
        } => {
            let mut cfg = load_config(&config)?;
            overrides.apply(&mut cfg)?;
            cfg.output.dump_particles |= dump_particles;
            let summary = run_experiment(&cfg)?;
            eprintln!(
                "{} finished {} steps with N={}: F={:.6e}, boundary fraction {:.4}, {:.0} ms; wrote {}",
                summary.sampler,
                summary.steps,
                summary.particles,
                summary.final_state.f_value,
                summary.final_state.boundary_fraction,
                summary.runtime_ms,
                cfg.output.dir.display()
            );
            Ok(())
        }
        Command::Oracle { config, overrides } => {
            let mut cfg = load_config(&config)?;
            overrides.apply(&mut cfg)?;
            if !matches!(cfg.domain, Domain::Simplex { dim: 3 }) {
                return Err(Error::Config(vec![mmfld::error::ConfigIssue {
                    key: "domain".into(),
                    message: "the grid oracle covers the 3-coordinate simplex only".into(),
                }]));
            }
            let obj = cfg.objective()?;
            let grid = SimplexGrid::new(cfg.oracle.resolution, cfg.oracle.margin)?;
            let solution = fixed_point_solve(&grid, &obj, cfg.sampler.lambda, cfg.oracle.settings())?;
            let export = OracleExport::new(&grid, &obj, cfg.sampler.lambda, &solution);
            let dir = &cfg.output.dir;
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
            let path = dir.join("oracle.json");
            write_json(&path, &export)?;
            eprintln!(
                "fixed point after {} iterations (residual {:.2e}): F={:.6e}, mean {:?}; wrote {}",
                export.iterations,
                export.residual,
                export.functionals.f_value,
                export.functionals.mean,
                path.display()
            );
            Ok(())
        }
        Command::Bounds { inputs } => {
            let text = std::fs::read_to_string(&inputs).map_err(|e| Error::io(&inputs, e))?;
            let parsed: BoundInputs = toml::from_str(&text).map_err(|e| {
                Error::Config(vec![mmfld::error::ConfigIssue {
                    key: "bounds".into(),
                    message: e.message().to_string(),
                }])
            })?;
            print_json(&parsed.evaluate()?)
        }
        Command::Compare { summaries } => {
            let runs = summaries
                .iter()
                .map(|p| Ok((p.display().to_string(), read_summary(p)?)))
                .collect::<Result<Vec<_>>>()?;
            print_json(&compare_runs(&runs)?)
        }
        Command::Selfcheck { samples, seed } => {
            let outcomes = selfcheck::run_all(samples, seed)?;
            let mut failed = 0;
            for c in &outcomes {
                println!(
                    "{} {:<26} worst {:.3e} (tol {:.0e})",
                    if c.pass { "PASS" } else { "FAIL" },
                    c.name,
                    c.worst,
                    c.tolerance
                );
                failed += usize::from(!c.pass);
            }
            if failed > 0 {
                return Err(Error::InvalidInput(format!("{failed} selfcheck suite(s) failed")));
            }
            Ok(())
        }
        Command::Presets { name } => {
            match name {
                Some(n) => match mmfld::harness::config::preset_text(&n) {
                    Some(text) => print!("{text}"),
                    None => return preset(&n).map(|_| ()),
                },
                None => preset_names().for_each(|n| println!("{n}")),
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_config() { 2 } else { 3 })
        }
    }
}
