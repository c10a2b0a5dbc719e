//! `oja-sparse`: desk-scale experiments and verification suites for streaming sparse PCA.
//!
//! Exit codes: 0 ok, 2 config error, 3 bound violation, 4 runtime error.

mod commands;
mod config;

use anyhow::Context;
use clap::{Parser, Subcommand, ValueEnum};
use config::RawConfig;
use oja_sparse::report::{csv_string, svg_line_plot, Series};
use serde::Serialize;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser, Debug)]
#[command(name = "oja-sparse", version, about = "Streaming sparse PCA with Oja's algorithm")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// TOML or JSON config file; unset keys take the documented defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Write tables, plots and the resolved config into this directory instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for trial parallelism.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Base seed; overrides the config file.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// Also write SVG plots (needs --out).
    #[arg(long, global = true, requires = "out")]
    plot: bool,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Run every pipeline on shared streams and tabulate sin² and support recovery.
    Compare {
        /// Record median wall time per (pipeline, n). Makes output nondeterministic.
        #[arg(long)]
        timing: bool,
    },
    /// Entrywise log magnitudes and dense-product growth against the bounds.
    Concentration,
    /// Monte Carlo checks of the moment envelopes and tail bounds.
    VerifyBounds,
    /// Boosted exact support recovery with top-k as the constant-success oracle.
    BoostDemo,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
enum Format {
    Csv,
    Json,
}

pub enum Failure {
    Config(anyhow::Error),
    Violation(Vec<String>),
    Runtime(anyhow::Error),
}

impl From<oja_sparse::Error> for Failure {
    fn from(e: oja_sparse::Error) -> Self {
        use oja_sparse::Error::*;
        match e {
            EmptyInput
            | NoValidTheta(_)
            | InvalidParameter(_)
            | InvalidK { .. }
            | InvalidGap(_)
            | InvalidSpike(_)
            | InvalidDims(_)
            | NotDescending
            | NotOrthonormal(_)
            | InvalidMinEntry(_) => Failure::Config(e.into()),
            _ => Failure::Runtime(e.into()),
        }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Runtime(e)
    }
}

struct Table {
    name: String,
    csv: String,
    json: serde_json::Value,
}

/// Collects tables and writes them to stdout or into `--out`.
struct Emitter {
    out: Option<PathBuf>,
    format: Format,
    plot: bool,
    header: String,
    settings: serde_json::Value,
    tables: Vec<Table>,
    plots: Vec<(String, String)>,
}

impl Emitter {
    fn new<T: Serialize>(cli: &Cli, command: &str, settings: &T) -> Self {
        Emitter {
            out: cli.out.clone(),
            format: cli.format,
            plot: cli.plot,
            header: config::header(command, settings),
            settings: serde_json::to_value(settings).unwrap_or_default(),
            tables: Vec::new(),
            plots: Vec::new(),
        }
    }

    fn table<T: Serialize>(&mut self, name: &str, rows: &[T]) {
        self.tables.push(Table {
            name: name.into(),
            csv: csv_string(rows),
            json: serde_json::to_value(rows).unwrap_or_default(),
        });
    }

    fn plot(&mut self, name: &str, title: &str, x: &str, y: &str, series: &[Series]) {
        if self.plot {
            self.plots.push((name.into(), svg_line_plot(title, x, y, series)));
        }
    }

    fn finish(self) -> anyhow::Result<()> {
        let json_doc = || {
            let tables: serde_json::Map<_, _> = self.tables.iter().map(|t| (t.name.clone(), t.json.clone())).collect();
            serde_json::json!({ "settings": self.settings, "tables": tables })
        };
        let Some(dir) = &self.out else {
            match self.format {
                Format::Csv => {
                    print!("{}", self.header);
                    for t in &self.tables {
                        println!("# table: {}", t.name);
                        print!("{}", t.csv);
                    }
                }
                Format::Json => {
                    eprint!("{}", self.header);
                    println!("{}", serde_json::to_string_pretty(&json_doc())?);
                }
            }
            return Ok(());
        };
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        let write = |name: &str, body: &str| -> anyhow::Result<()> {
            let p = dir.join(name);
            std::fs::write(&p, body).with_context(|| format!("writing {}", p.display()))?;
            println!("wrote {}", p.display());
            Ok(())
        };
        print!("{}", self.header);
        write("resolved_config.toml", &self.header)?;
        for t in &self.tables {
            match self.format {
                Format::Csv => write(&format!("{}.csv", t.name), &t.csv)?,
                Format::Json => write(&format!("{}.json", t.name), &serde_json::to_string_pretty(&t.json)?)?,
            }
        }
        for (name, svg) in &self.plots {
            write(&format!("{name}.svg"), svg)?;
        }
        Ok(())
    }
}

fn run(cli: &Cli) -> Result<(), Failure> {
    let mut raw = match &cli.config {
        Some(p) => config::load(p).map_err(Failure::Config)?,
        None => RawConfig::default(),
    };
    if cli.seed.is_some() {
        raw.seed = cli.seed;
    }
    match cli.command {
        Command::Compare { timing } => {
            let s = config::CompareSettings::resolve(&raw).map_err(Failure::Config)?;
            let out = commands::cmd_compare(&s, timing)?;
            let mut em = Emitter::new(cli, "compare", &s);
            em.table("compare", &out.rows);
            em.plot("compare", &s.experiment_id, "n", "median sin²", &out.series);
            em.finish()?;
        }
        Command::Concentration => {
            let s = config::ConcentrationSettings::resolve(&raw).map_err(Failure::Config)?;
            let out = commands::cmd_concentration(&s)?;
            for note in &out.notes {
                eprintln!("note: {note}");
            }
            let mut em = Emitter::new(cli, "concentration", &s);
            em.table("entrywise", &out.entrywise);
            em.table("dense_norm", &out.norm);
            em.table("dense_v1", &out.v1);
            let col =
                |f: fn(&commands::EntrywiseRow) -> f64| out.entrywise.iter().map(|r| (r.n as f64, f(r))).collect();
            em.plot(
                "entrywise",
                "log|eᵢᵀBₙu₀|",
                "n",
                "log magnitude",
                &[
                    Series { name: "in-support median".into(), points: col(|r| r.in_support_median) },
                    Series { name: "out-of-support median".into(), points: col(|r| r.out_support_median) },
                    Series { name: "out-of-support q90".into(), points: col(|r| r.out_support_q90) },
                ],
            );
            let pts =
                |f: fn(&oja_sparse::report::BoundRow) -> f64| out.norm.iter().map(|r| (r.n as f64, f(r))).collect();
            em.plot(
                "dense_norm",
                "log‖E[BₙBₙᵀ]‖",
                "n",
                "log",
                &[
                    Series { name: "Monte Carlo".into(), points: pts(|r| r.empirical_log_moment) },
                    Series { name: "envelope".into(), points: pts(|r| r.bound_log.unwrap_or(f64::NAN)) },
                    Series { name: "naive".into(), points: pts(|r| r.naive_bound_log) },
                ],
            );
            em.finish()?;
        }
        Command::VerifyBounds => {
            let s = config::VerifySettings::resolve(&raw).map_err(Failure::Config)?;
            let (rows, violations) = commands::cmd_verify_bounds(&s)?;
            let mut em = Emitter::new(cli, "verify-bounds", &s);
            em.table("verify_bounds", &rows);
            em.finish()?;
            if !violations.is_empty() {
                return Err(Failure::Violation(violations));
            }
            eprintln!("all {} checks hold", rows.len());
        }
        Command::BoostDemo => {
            let s = config::BoostSettings::resolve(&raw).map_err(Failure::Config)?;
            let row = commands::cmd_boost_demo(&s)?;
            let mut em = Emitter::new(cli, "boost-demo", &s);
            em.table("boost_demo", &[row]);
            em.finish()?;
        }
    }
    Ok(())
}

fn with_threads(cli: &Cli) -> Result<(), Failure> {
    #[cfg(feature = "parallel")]
    if let Some(t) = cli.threads {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build()
            .map_err(|e| Failure::Config(anyhow::anyhow!("--threads {t}: {e}")))?;
        return pool.install(|| run(cli));
    }
    #[cfg(not(feature = "parallel"))]
    if cli.threads.is_some() {
        eprintln!("warning: built without the `parallel` feature; --threads is ignored");
    }
    run(cli)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match with_threads(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(e)) => {
            eprintln!("config error: {e:#}");
            ExitCode::from(2)
        }
        Err(Failure::Violation(v)) => {
            for line in &v {
                eprintln!("bound violated: {line}");
            }
            ExitCode::from(3)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(4)
        }
    }
}
