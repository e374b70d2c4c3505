//! Command-line front end. Results go to files under `--out`; logs and
//! diagnostics go to standard error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use stackgame::{
    export_poa, export_report, export_study, generate_synthetic, load_problem, poa_row, read_problem, run_study,
    save_problem, Error, Overrides, PoARow, PoAScenario, Result, SeriesLayout, StudyCaches, StudyResult,
    SyntheticSpec,
};
use stackgame_core::{
    feasibility_probe, EquilibriumReport, FollowerBehavior, LeaderBehavior, StackelbergClass,
};

#[derive(Debug, Parser)]
#[command(name = "stackgame", version, about = "Two-layer Stackelberg co-design solver")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check a problem file and print its validation report.
    Validate {
        #[arg(long, env = "STACKGAME_PROBLEM")]
        problem: PathBuf,
        /// Also solve the cooperative follower problem at the smallest and
        /// largest leader profiles.
        #[arg(long)]
        probe: bool,
        #[command(flatten)]
        tuning: Tuning,
    },
    /// Write a synthetic problem bundle (`problem.json` plus CSV series).
    Generate {
        #[arg(long, value_enum, default_value_t = Preset::Small)]
        preset: Preset,
        /// JSON generator settings; replaces the preset.
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long)]
        tanks: Option<usize>,
        #[arg(long)]
        followers: Option<usize>,
        #[arg(long)]
        leaders: Option<usize>,
        #[arg(long)]
        horizon: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// Keep demand and prices inside `problem.json`.
        #[arg(long)]
        inline: bool,
        #[arg(long, env = "STACKGAME_OUT")]
        out: PathBuf,
    },
    /// Solve one class and write its report.
    Solve {
        #[arg(long, env = "STACKGAME_PROBLEM")]
        problem: PathBuf,
        #[arg(long, value_parser = parse_class)]
        class: StackelbergClass,
        #[command(flatten)]
        tuning: Tuning,
        #[arg(long, env = "STACKGAME_OUT")]
        out: PathBuf,
    },
    /// Solve all four classes and the price-of-anarchy table.
    Study {
        #[arg(long, env = "STACKGAME_PROBLEM")]
        problem: PathBuf,
        #[command(flatten)]
        tuning: Tuning,
        /// Reuse follower responses spilled to `--out` by an earlier run.
        #[arg(long)]
        resume: bool,
        #[arg(long, env = "STACKGAME_OUT")]
        out: PathBuf,
    },
    /// Price of anarchy of one layer with the other layer's behavior fixed.
    Poa {
        #[arg(long, env = "STACKGAME_PROBLEM")]
        problem: PathBuf,
        #[arg(long, value_enum)]
        layer: Layer,
        /// Behavior of the other layer.
        #[arg(long, value_enum)]
        behavior: Behavior,
        #[command(flatten)]
        tuning: Tuning,
        #[arg(long, env = "STACKGAME_OUT")]
        out: PathBuf,
    },
    /// Rewrite the report files of a saved `study.json`, `report.json` or
    /// `poa.json`.
    Report {
        #[arg(long, env = "STACKGAME_PROBLEM")]
        problem: PathBuf,
        /// Saved JSON file, or a directory holding one.
        #[arg(long)]
        input: PathBuf,
        #[arg(long, env = "STACKGAME_OUT")]
        out: PathBuf,
    },
}

/// Solver settings. Flags override environment variables, which override
/// the `--config` file.
#[derive(Debug, Args)]
struct Tuning {
    /// JSON file with any of the settings below (snake_case keys).
    #[arg(long, env = "STACKGAME_CONFIG")]
    config: Option<PathBuf>,
    #[arg(long, env = "STACKGAME_EPS_FOLLOWER")]
    eps_follower: Option<f64>,
    #[arg(long, env = "STACKGAME_EPS_LEADER")]
    eps_leader: Option<f64>,
    #[arg(long, env = "STACKGAME_MAX_SWEEPS")]
    max_sweeps: Option<usize>,
    #[arg(long, env = "STACKGAME_MAX_ROUNDS")]
    max_rounds: Option<usize>,
    #[arg(long, env = "STACKGAME_ENUMERATION_CAP")]
    enumeration_cap: Option<usize>,
    #[arg(long, env = "STACKGAME_QP_TOLERANCE")]
    qp_tolerance: Option<f64>,
    #[arg(long, env = "STACKGAME_QP_MAX_ITER")]
    qp_max_iter: Option<usize>,
    #[arg(long, env = "STACKGAME_JOBS")]
    jobs: Option<usize>,
    /// Random starts for the follower price of anarchy.
    #[arg(long, env = "STACKGAME_STARTS")]
    starts: Option<usize>,
    /// Seed of the random follower starts.
    #[arg(long, env = "STACKGAME_SEED")]
    seed: Option<u64>,
}

impl Tuning {
    fn overrides(&self) -> Result<Overrides> {
        let file = match &self.config {
            Some(path) => Overrides::from_file(path)?,
            None => Overrides::default(),
        };
        Ok(file.then(&Overrides {
            eps_follower: self.eps_follower,
            eps_leader: self.eps_leader,
            max_sweeps: self.max_sweeps,
            max_rounds: self.max_rounds,
            enumeration_cap: self.enumeration_cap,
            qp_tolerance: self.qp_tolerance,
            qp_max_iter: self.qp_max_iter,
            jobs: self.jobs,
            starts: self.starts,
            seed: self.seed,
        }))
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Preset {
    /// Three tanks, two followers, two leaders, 24 steps.
    Small,
    /// 17 tanks, four followers, four leaders, 72 steps.
    Barcelona,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Layer {
    Leader,
    Follower,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Behavior {
    Cooperative,
    NonCooperative,
}

fn parse_class(s: &str) -> std::result::Result<StackelbergClass, String> {
    s.parse().map_err(|_| format!("unknown class `{s}` (expected I, II, III or IV)"))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("STACKGAME_LOG", "info"))
        .format_timestamp(None)
        .format_target(false)
        .init();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if let Error::Validation(report) = &e {
                eprint!("{report}");
            }
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Validate { problem, probe, tuning } => {
            let p = read_problem(&problem)?;
            let report = p.validate();
            if !report.is_ok() {
                return Err(Error::Validation(report));
            }
            println!(
                "{}: {} states, {} followers, {} leaders, horizon {}, {} leader profiles",
                problem.display(),
                p.network.n_x,
                p.network.n_followers(),
                p.design.n_leaders(),
                p.scenario.horizon,
                p.design.lattice_size()
            );
            if probe {
                let cfg = tuning.overrides()?.game_config()?;
                feasibility_probe(&p, &cfg)?;
                println!("feasible at the smallest and largest leader profiles");
            }
            Ok(())
        }
        Command::Generate {
            preset,
            spec,
            tanks,
            followers,
            leaders,
            horizon,
            seed,
            inline,
            out,
        } => {
            let mut s = match (&spec, preset) {
                (Some(path), _) => read_spec(path)?,
                (None, Preset::Small) => SyntheticSpec::default(),
                (None, Preset::Barcelona) => SyntheticSpec::barcelona(SyntheticSpec::default().seed),
            };
            if let Some(v) = tanks {
                s.n_tanks = v;
                s.tanks_per_follower = None;
            }
            if let Some(v) = followers {
                s.n_followers = v;
                s.tanks_per_follower = None;
            }
            if let Some(v) = leaders {
                s.n_leaders = v;
            }
            if let Some(v) = horizon {
                s.horizon = v;
            }
            if let Some(v) = seed {
                s.seed = v;
            }
            let problem = generate_synthetic(&s)?;
            let layout = if inline { SeriesLayout::Inline } else { SeriesLayout::Csv };
            let written = save_problem(&problem, &out.join("problem.json"), layout)?;
            log::info!("wrote {} files to {}", written.len(), out.display());
            Ok(())
        }
        Command::Solve {
            problem,
            class,
            tuning,
            out,
        } => {
            let p = load_problem(&problem)?;
            let o = tuning.overrides()?;
            let cfg = o.game_config()?;
            let caches = StudyCaches::new(&p, &cfg);
            if class.leader_behavior() == LeaderBehavior::Cooperative {
                caches.fill(&[class.follower_behavior()], &o.study_options())?;
            }
            let report = stackgame::study::solve_class_shared(class, &caches, &cfg)?;
            log::info!(
                "class {class}: profile {:?}, total J {}, {} follower solves",
                report.profile,
                report.total_leader_cost,
                caches.get(class.follower_behavior()).evaluations()
            );
            let written = export_report(&p, &report, &out)?;
            log::info!("wrote {} files to {}", written.len(), out.display());
            Ok(())
        }
        Command::Study {
            problem,
            tuning,
            resume,
            out,
        } => {
            let p = load_problem(&problem)?;
            let o = tuning.overrides()?;
            let cfg = o.game_config()?;
            let mut opts = o.study_options();
            opts.spill_dir = Some(out.clone());
            opts.resume = resume;
            let study = run_study(&p, &cfg, &opts)?;
            let written = export_study(&p, &study, &out)?;
            log::info!("wrote {} files to {}", written.len(), out.display());
            Ok(())
        }
        Command::Poa {
            problem,
            layer,
            behavior,
            tuning,
            out,
        } => {
            let p = load_problem(&problem)?;
            let o = tuning.overrides()?;
            let cfg = o.game_config()?;
            let opts = o.study_options();
            let cooperative = matches!(behavior, Behavior::Cooperative);
            let (scenario, fill) = match layer {
                Layer::Leader => {
                    let followers = if cooperative {
                        FollowerBehavior::Cooperative
                    } else {
                        FollowerBehavior::NonCooperative
                    };
                    (PoAScenario::Leaders { followers }, vec![followers])
                }
                Layer::Follower => {
                    let leaders = if cooperative {
                        LeaderBehavior::Cooperative
                    } else {
                        LeaderBehavior::NonCooperative
                    };
                    let fill = if cooperative {
                        vec![FollowerBehavior::Cooperative, FollowerBehavior::NonCooperative]
                    } else {
                        Vec::new()
                    };
                    (PoAScenario::Followers { leaders }, fill)
                }
            };
            let caches = StudyCaches::new(&p, &cfg);
            caches.fill(&fill, &opts)?;
            let row = poa_row(&p, &cfg, &caches, scenario, &opts)?;
            log::info!("{}: price of anarchy {}", row.poa.context, row.poa.ratio);
            let written = export_poa(&[row], &out)?;
            log::info!("wrote {} files to {}", written.len(), out.display());
            Ok(())
        }
        Command::Report { problem, input, out } => {
            let p = load_problem(&problem)?;
            let written = rewrite(&p, &input, &out)?;
            log::info!("wrote {} files to {}", written, out.display());
            Ok(())
        }
    }
}

fn read_spec(path: &Path) -> Result<SyntheticSpec> {
    read_json(path)
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let de = &mut serde_json::Deserializer::from_str(&text);
    serde_path_to_error::deserialize(de).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        message: format!("at `{}`: {}", e.path(), e.inner()),
    })
}

/// Re-exports a saved result; directories are searched for `study.json`,
/// `report.json` and `poa.json` in that order.
fn rewrite(problem: &stackgame_core::Problem, input: &Path, out: &Path) -> Result<usize> {
    let file = if input.is_dir() {
        ["study.json", "report.json", "poa.json"]
            .iter()
            .map(|n| input.join(n))
            .find(|p| p.is_file())
            .ok_or_else(|| Error::Io {
                path: input.to_path_buf(),
                source: std::io::Error::new(std::io::ErrorKind::NotFound, "no study.json, report.json or poa.json"),
            })?
    } else {
        input.to_path_buf()
    };
    let name = file.file_name().and_then(|n| n.to_str()).unwrap_or_default();
    let written = match name {
        "study.json" => export_study(problem, &read_json::<StudyResult>(&file)?, out)?,
        "poa.json" => export_poa(&read_json::<Vec<PoARow>>(&file)?, out)?,
        _ => export_report(problem, &read_json::<EquilibriumReport>(&file)?, out)?,
    };
    Ok(written.len())
}
