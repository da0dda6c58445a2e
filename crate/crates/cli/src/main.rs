//! `dualsys` command-line driver.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 configuration error (bad
//! flags, bad config file, missing input artifact, invalid policy).

mod config;
mod plot;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use config::{ConfigError, RunConfig};
use dualsys::harness::{collect_deaths, export_results, export_sweep, sweep, ExportKind, SweepFamily};
use dualsys::*;

#[derive(Parser)]
#[command(name = "dualsys", version, about = "Fast/slow agent simulator on a pursuit maze")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train the lookup agent and write its Q-table.
    Train(Common),
    /// Record where single-system agents die and build the preference map.
    Stats(Common),
    /// Benchmark one switching policy.
    Bench(Common),
    /// Benchmark a policy family over a list of parameter values.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// random-p, prox-s1-r, prox-s2-r, food-F or food-F:r=R
        family: String,
        #[arg(required = true, allow_negative_numbers = true)]
        values: Vec<f64>,
    },
    /// Render a harness CSV as an SVG line chart.
    Plot {
        csv: PathBuf,
        /// Sweep column to draw.
        #[arg(long, default_value = "win_rate")]
        y: String,
        /// Summary CSV drawn as a dashed reference line; repeatable.
        #[arg(long)]
        baseline: Vec<PathBuf>,
        /// Directory for the SVG; defaults to the CSV's directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Flags override the config file.
#[derive(Args)]
struct Common {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    layout: Option<PathBuf>,
    #[arg(long)]
    policy: Option<String>,
    #[arg(long)]
    games: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Common {
    fn resolve(&self) -> Result<RunConfig, ConfigError> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        if let Some(v) = &self.layout {
            cfg.layout = Some(v.clone());
        }
        if let Some(v) = &self.policy {
            cfg.policy = v.clone();
        }
        if let Some(v) = self.games {
            cfg.games = v;
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = self.workers {
            cfg.workers = v;
        }
        if let Some(v) = &self.out {
            cfg.out = v.clone();
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

/// A resolved run: configuration, game, and output directory ready.
struct Run {
    cfg: RunConfig,
    game: Game,
}

impl Run {
    fn open(common: &Common) -> Result<Self> {
        let cfg = common.resolve()?;
        let layout = match &cfg.layout {
            None => Layout::default_layout(),
            Some(p) => {
                let text = fs::read_to_string(p).map_err(|source| ConfigError::Io { path: p.clone(), source })?;
                Layout::parse(&text).map_err(|e| ConfigError::Invalid(format!("{}: {e}", p.display())))?
            }
        };
        fs::create_dir_all(&cfg.out).with_context(|| format!("creating {}", cfg.out.display()))?;
        write(&cfg.out.join("config.txt"), &cfg.canonical())?;
        Ok(Run {
            game: Game::new(layout, cfg.rewards),
            cfg,
        })
    }

    fn qtable(&self, required: bool) -> Result<Arc<QTable>> {
        let path = self.cfg.qtable_path();
        if !path.exists() && !required {
            return Ok(Arc::new(QTable::new()));
        }
        let text = fs::read_to_string(&path).map_err(|source| ConfigError::Io { path: path.clone(), source })?;
        let table = QTable::load(&text).map_err(|e| ConfigError::Invalid(format!("{}: {e}", path.display())))?;
        Ok(Arc::new(table))
    }

    fn spec(&self, policy: SwitchPolicy) -> Result<AgentSpec> {
        let needs_s1 = policy != SwitchPolicy::AlwaysS2;
        if let SwitchPolicy::LocationDifficulty { prefs, .. } = &policy {
            if !prefs.covers(&self.game.layout) {
                return Err(ConfigError::Invalid("preference map does not match the layout".into()).into());
            }
        }
        let mut spec = AgentSpec::new(policy, self.qtable(needs_s1)?, self.cfg.mcts);
        spec.max_steps = self.cfg.max_steps;
        Ok(spec)
    }

    fn path(&self, name: &str) -> PathBuf {
        self.cfg.out.join(name)
    }
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn train_cmd(common: &Common) -> Result<()> {
    let run = Run::open(common)?;
    let table = train(&run.game, &run.cfg.learn, run.cfg.seed);
    let path = run.cfg.qtable_path();
    write(&path, &table.save())?;
    println!(
        "trained {} episodes, {} entries -> {}",
        run.cfg.learn.training_episodes,
        table.len(),
        path.display()
    );
    Ok(())
}

fn stats_cmd(common: &Common) -> Result<()> {
    let run = Run::open(common)?;
    let spec = run.spec(SwitchPolicy::AlwaysS1)?;
    let mut maps = Vec::new();
    for (system, name) in [(SystemChoice::S1, "deaths_s1.txt"), (SystemChoice::S2, "deaths_s2.txt")] {
        let (map, _) = collect_deaths(&run.game, &spec, system, run.cfg.games, run.cfg.seed, run.cfg.workers)?;
        write(&run.path(name), &map.save())?;
        println!("{name}: {} deaths in {} games", map.total_deaths(), map.games_observed());
        maps.push(map);
    }
    let prefs = build_preference(&maps[0], &maps[1])?;
    write(&run.path("preference.txt"), &prefs.save())?;
    println!("preference.txt written");
    Ok(())
}

fn bench_cmd(common: &Common) -> Result<()> {
    let run = Run::open(common)?;
    let policy = run.cfg.switch_policy()?;
    let label = policy.to_string();
    let spec = run.spec(policy)?;
    let (summary, results) = run_benchmark(&run.game, &spec, run.cfg.games, run.cfg.seed, run.cfg.workers)?;
    for (kind, name) in [
        (ExportKind::Summary, "summary.csv"),
        (ExportKind::SortedScores, "scores_sorted.csv"),
        (ExportKind::SortedTimes, "times_sorted.csv"),
    ] {
        write(&run.path(name), &export_results(&label, &results, kind)?)?;
    }
    println!(
        "{label}: win rate {:.4}, mean score {:.1}, mean compute {:.1}, S1 share {:.3}",
        summary.win_rate, summary.mean_score, summary.mean_compute_units, summary.s1_usage_fraction
    );
    Ok(())
}

fn sweep_cmd(common: &Common, family: &str, values: &[f64]) -> Result<()> {
    let family: SweepFamily = family
        .parse()
        .map_err(|e: harness::HarnessError| ConfigError::Invalid(e.to_string()))?;
    for &v in values {
        family.policy(v).map_err(|e| ConfigError::Invalid(e.to_string()))?;
    }
    let run = Run::open(common)?;
    let spec = run.spec(SwitchPolicy::AlwaysS1)?;
    let rows = sweep(&run.game, &spec, family, values, run.cfg.games, run.cfg.seed, run.cfg.workers)?;
    let name = format!("sweep_{}.csv", family.name());
    write(&run.path(&name), &export_sweep(&rows)?)?;
    for (v, s) in &rows {
        println!("{family} {v}: win rate {:.4}, mean compute {:.1}", s.win_rate, s.mean_compute_units);
    }
    Ok(())
}

fn plot_cmd(csv: &Path, y: &str, baselines: &[PathBuf], out: Option<&Path>) -> Result<()> {
    let read = |p: &Path| -> Result<plot::Table> {
        let text = fs::read_to_string(p).map_err(|source| ConfigError::Io { path: p.to_path_buf(), source })?;
        plot::Table::parse(&text).with_context(|| format!("reading {}", p.display()))
    };
    let table = read(csv)?;
    let refs = baselines.iter().map(|p| read(p)).collect::<Result<Vec<_>>>()?;
    let svg = plot::render(&table, y, &refs)?;
    let dir = out.map(Path::to_path_buf).unwrap_or_else(|| {
        csv.parent().map(Path::to_path_buf).unwrap_or_default()
    });
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    let stem = csv.file_stem().map_or_else(|| "plot".into(), |s| s.to_string_lossy().into_owned());
    let path = dir.join(format!("{stem}.svg"));
    write(&path, &svg)?;
    println!("{}", path.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Train(c) => train_cmd(c),
        Command::Stats(c) => stats_cmd(c),
        Command::Bench(c) => bench_cmd(c),
        Command::Sweep { common, family, values } => sweep_cmd(common, family, values),
        Command::Plot { csv, y, baseline, out } => plot_cmd(csv, y, baseline, out.as_deref()),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<ConfigError>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
