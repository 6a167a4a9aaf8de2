use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use xroute::decomposition::{build_hierarchy, validate_hierarchy, write_hierarchy};
use xroute::graph::write_graph;
use xroute::harness::{bench_suite, generate, run_experiment, ExperimentConfig, Task};
use xroute::shuffler::build_shufflers;

#[derive(Parser)]
#[command(name = "xroute", about = "Deterministic expander routing and sorting experiments")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args, Clone)]
struct Common {
    /// Flat key = value config file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Keep per-round simulator records.
    #[arg(long)]
    trace: bool,
    /// Extra `key=value` overrides, applied after the file.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate a graph and print its edge list.
    Gen(Common),
    /// Build and validate the hierarchical decomposition.
    Decompose(Common),
    /// Build shufflers for every good node and print their potential traces.
    Shuffle(Common),
    /// Expander sorting queries.
    Sort(Common),
    /// Task 1 routing queries (task1-general in the config routes through the expander split).
    Route(Common),
    /// The sorting/routing reductions.
    Equiv(Common),
    /// Run a profile of experiments and print a summary table.
    Bench {
        #[arg(long, default_value = "smoke")]
        profile: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn load(c: &Common) -> Result<ExperimentConfig> {
    let mut cfg = match &c.config {
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            ExperimentConfig::parse(&text)?
        }
        None => ExperimentConfig::default(),
    };
    for kv in &c.set {
        let Some((k, v)) = kv.split_once('=') else { bail!("--set expects KEY=VALUE, got {kv:?}") };
        cfg.set(k.trim(), v.trim())?;
    }
    if let Some(s) = c.seed {
        cfg.seed = s;
    }
    if let Some(o) = &c.out {
        cfg.out = Some(o.display().to_string());
    }
    cfg.trace |= c.trace;
    Ok(cfg)
}

fn emit(out: Option<&str>, file: &str, text: &str) -> Result<()> {
    match out {
        Some(d) => {
            std::fs::create_dir_all(d)?;
            std::fs::write(Path::new(d).join(file), text)?;
        }
        None => {
            let _ = std::io::stdout().write_all(text.as_bytes());
        }
    }
    Ok(())
}

fn experiment(mut cfg: ExperimentConfig, allowed: &[Task], default: Task) -> Result<bool> {
    if !allowed.contains(&cfg.task) {
        cfg.task = default;
    }
    let rec = match run_experiment(&cfg) {
        Ok(r) => r,
        Err(e) => {
            print!("{}", e.partial.render());
            if let Some(d) = &cfg.out {
                e.partial.write_outputs(Path::new(d))?;
            }
            bail!("{e}");
        }
    };
    print!("{}", rec.render());
    println!("{}", rec.summary());
    if let Some(d) = &cfg.out {
        rec.write_outputs(Path::new(d))?;
    }
    eprintln!("wall_ms={}", rec.wall_ms);
    Ok(rec.passed())
}

fn run(cli: Cli) -> Result<bool> {
    match cli.cmd {
        Cmd::Gen(c) => {
            let cfg = load(&c)?;
            let g = generate(&cfg.family, cfg.n, cfg.seed)?;
            emit(cfg.out.as_deref(), "graph.txt", &write_graph(&g))?;
            Ok(true)
        }
        Cmd::Decompose(c) => {
            let cfg = load(&c)?;
            let g = generate(&cfg.family, cfg.n, cfg.seed)?;
            let h = build_hierarchy(&g, &cfg.build_params())?;
            let v = validate_hierarchy(&h, &g);
            eprintln!("{}", h.summary());
            for x in &v.violations {
                eprintln!("violation {} node={:?} {}", x.label, x.node, x.detail);
            }
            emit(cfg.out.as_deref(), "hierarchy.txt", &write_hierarchy(&h, &g))?;
            Ok(v.is_clean())
        }
        Cmd::Shuffle(c) => {
            let cfg = load(&c)?;
            let g = generate(&cfg.family, cfg.n, cfg.seed)?;
            let h = build_hierarchy(&g, &cfg.build_params())?;
            let sh = build_shufflers(&h, &cfg.shuffler_params())?;
            let mut s = String::new();
            for x in sh.values() {
                s.push_str(&format!("node={} t={} lambda={} lambda_max={}\n", x.node, x.t, x.lambda(), x.lambda_max));
                s.push_str(&x.trace_text());
            }
            emit(cfg.out.as_deref(), "shufflers.txt", &s)?;
            Ok(true)
        }
        Cmd::Sort(c) => experiment(load(&c)?, &[Task::Sort], Task::Sort),
        Cmd::Route(c) => experiment(load(&c)?, &[Task::Task1, Task::Task1General], Task::Task1),
        Cmd::Equiv(c) => experiment(load(&c)?, &[Task::SortViaRoute, Task::RouteViaSort, Task::RouteViaSortBlackBox], Task::SortViaRoute),
        Cmd::Bench { profile, out } => {
            let (table, ok) = bench_suite(&profile, out.as_deref())?;
            print!("{table}");
            Ok(ok)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
