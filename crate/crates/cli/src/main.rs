//! `pdmp`: run the verification experiments from flags or a JSON config.

use std::collections::BTreeMap;
use std::fs;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use pdmp_core::harness::{
    run, to_csv, to_json, Config, ExperimentKind, ExperimentSection, HSection, ModelSection,
    OutputFormat, RngSection,
};

#[derive(Parser)]
#[command(name = "pdmp", version, about = "Simulate PDMPs and check exponential changes of measure")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Averages of the model's test functions at time t.
    Simulate(Flags),
    /// Check E M^h_t = 1.
    MartingaleCheck(Flags),
    /// Check E U^f_t = f(x0).
    DynkinCheck(Flags),
    /// Compare tilted simulation with likelihood-ratio reweighting.
    IsConsistency(Flags),
    /// Check the pathwise reverse identity.
    ReverseCheck(Flags),
    /// Compare the three forms of the tilted generator.
    GeneratorForms(Flags),
}

#[derive(Args)]
struct Flags {
    /// JSON config with sections model, h, experiment, rng. Flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// ctmc3, ctmc2, cramer-lundberg, boundary-reset, aimd or epoch-chain.
    #[arg(long)]
    model: Option<String>,
    /// Model parameter override, repeatable.
    #[arg(long = "param", value_name = "KEY=VALUE")]
    params: Vec<String>,
    /// Name of the change-of-measure function (default: the model's h).
    #[arg(long)]
    h: Option<String>,
    /// Test function for Dynkin and generator checks.
    #[arg(long)]
    f: Option<String>,
    /// Observable for the change-of-measure check (a function or a path event).
    #[arg(long)]
    g: Option<String>,
    #[arg(long)]
    t: Option<f64>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads, 0 for one per core.
    #[arg(long)]
    workers: Option<usize>,
    /// Require a smaller standard error for importance sampling than crude.
    #[arg(long)]
    require_variance_reduction: bool,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value = "json")]
    format: String,
    /// Print the resolved config as JSON and exit.
    #[arg(long)]
    dump_config: bool,
}

fn parse_param(s: &str) -> Result<(String, f64)> {
    let (k, v) = s.split_once('=').with_context(|| format!("--param {s:?} is not KEY=VALUE"))?;
    let v: f64 = v.trim().parse().with_context(|| format!("--param {k}: {v:?} is not a number"))?;
    Ok((k.trim().to_string(), v))
}

fn resolve(kind: ExperimentKind, flags: &Flags) -> Result<Config> {
    let mut config = match &flags.config {
        Some(path) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            let c = Config::from_json(&text)?;
            if c.experiment.kind != kind {
                bail!("config is for {}, not {kind}", c.experiment.kind);
            }
            c
        }
        None => Config {
            model: ModelSection {
                name: "ctmc3".into(),
                params: BTreeMap::new(),
            },
            h: HSection::default(),
            experiment: ExperimentSection {
                kind,
                t: 1.0,
                n: 10_000,
                f: "f".into(),
                g: "g".into(),
                workers: 0,
                require_variance_reduction: false,
            },
            rng: RngSection { seed: 1 },
        },
    };
    if let Some(m) = &flags.model {
        if *m != config.model.name {
            config.model.params.clear();
        }
        config.model.name = m.clone();
    }
    for p in &flags.params {
        let (k, v) = parse_param(p)?;
        config.model.params.insert(k, v);
    }
    let e = &mut config.experiment;
    if let Some(h) = &flags.h {
        config.h.name = h.clone();
    }
    if let Some(f) = &flags.f {
        e.f = f.clone();
    }
    if let Some(g) = &flags.g {
        e.g = g.clone();
    }
    if let Some(t) = flags.t {
        e.t = t;
    }
    if let Some(n) = flags.n {
        e.n = n;
    }
    if let Some(w) = flags.workers {
        e.workers = w;
    }
    if flags.require_variance_reduction {
        e.require_variance_reduction = true;
    }
    if let Some(seed) = flags.seed {
        config.rng.seed = seed;
    }
    Ok(config)
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    let (kind, flags) = match &cli.command {
        Command::Simulate(f) => (ExperimentKind::Simulate, f),
        Command::MartingaleCheck(f) => (ExperimentKind::MartingaleCheck, f),
        Command::DynkinCheck(f) => (ExperimentKind::DynkinCheck, f),
        Command::IsConsistency(f) => (ExperimentKind::IsConsistency, f),
        Command::ReverseCheck(f) => (ExperimentKind::ReverseCheck, f),
        Command::GeneratorForms(f) => (ExperimentKind::GeneratorForms, f),
    };
    let config = resolve(kind, flags)?;
    if flags.dump_config {
        println!("{}", config.to_json());
        return Ok(());
    }
    let format: OutputFormat = flags.format.parse()?;
    let report = run(&config)?;
    let reports = [report];
    let text = match format {
        OutputFormat::Json => to_json(&reports)?,
        OutputFormat::Csv => to_csv(&reports)?,
    };
    match &flags.out {
        Some(path) => fs::write(path, &text).with_context(|| format!("writing {}", path.display()))?,
        None => print!("{text}"),
    }
    for v in &reports[0].verdicts {
        eprintln!(
            "{} {}: {:.3e} {} {:.3e}",
            if v.passed { "PASS" } else { "FAIL" },
            v.criterion,
            v.value,
            if v.strict { "<" } else { "<=" },
            v.threshold
        );
    }
    if !reports[0].passed {
        std::process::exit(2);
    }
    Ok(())
}
