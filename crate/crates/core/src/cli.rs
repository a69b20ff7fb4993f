//! Command-line front end.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::error::{Error, Result};
use crate::lab::experiments::{self, Group};
use crate::lab::report::{self, ExperimentReport, Verdict};
use crate::lab::{Config, Format};
use crate::ledger;

#[derive(Debug, Parser)]
#[command(name = "paraboloid-lab", version, about = "Numerical audit lab for paraboloid decoupling estimates")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Exponent ledger: scenarios and derivation checkpoints.
    Ledger,
    /// Normals, wedges, Gram determinants and Broad₃.
    GeometryAudit,
    /// Cap lattices, coloring, annuli and separated subsets.
    Caps,
    /// Tube volumes, overlaps, L² sums and multiplicity.
    Tubes,
    /// Polynomial shells and the anisotropic rescaling.
    Shell,
    /// Phase baskets and sextuple dichotomies.
    Phase,
    /// Observational L⁶ decoupling-ratio probe.
    Probe,
    /// One experiment over a λ ladder, with a log-log slope fit.
    Ladder {
        #[arg(long)]
        experiment: Option<String>,
    },
    /// List registered experiments.
    List,
}

#[derive(Debug, Args, Default)]
pub struct Common {
    /// Comma-separated λ values (overrides each experiment's default ladder).
    #[arg(long, global = true, value_delimiter = ',')]
    pub lambda: Option<Vec<f64>>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub samples: Option<usize>,
    #[arg(long, global = true)]
    pub c0: Option<f64>,
    /// Directory for `<subcommand>.<format>`; stdout when absent.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    /// JSON file with the same flat keys as the flags.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Omit wall-clock times so reports are byte-identical across runs.
    #[arg(long, global = true)]
    pub no_timing: bool,
}

impl Common {
    fn to_config(&self) -> Config {
        Config {
            lambda: self.lambda.clone(),
            seed: self.seed,
            samples: self.samples,
            c0: self.c0,
            out: self.out.clone(),
            format: self.format,
            threads: self.threads,
            timing: self.no_timing.then_some(false),
            ..Default::default()
        }
    }
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Ledger => "ledger",
            Command::GeometryAudit => "geometry-audit",
            Command::Caps => "caps",
            Command::Tubes => "tubes",
            Command::Shell => "shell",
            Command::Phase => "phase",
            Command::Probe => "probe",
            Command::Ladder { .. } => "ladder",
            Command::List => "list",
        }
    }

    fn group(&self) -> Option<Group> {
        Some(match self {
            Command::Ledger => Group::Ledger,
            Command::GeometryAudit => Group::Geometry,
            Command::Caps => Group::Caps,
            Command::Tubes => Group::Tubes,
            Command::Shell => Group::Shell,
            Command::Phase => Group::Phase,
            Command::Probe => Group::Probe,
            _ => return None,
        })
    }
}

/// Rendered output of one invocation.
#[derive(Debug)]
pub struct Outcome {
    pub reports: Vec<ExperimentReport>,
    pub rendered: String,
    pub file: Option<PathBuf>,
}

impl Outcome {
    pub fn exit_code(&self) -> i32 {
        if self.reports.iter().any(|r| r.verdict == Verdict::Fail) { 1 } else { 0 }
    }
}

pub fn execute(cli: &Cli) -> Result<Outcome> {
    let flags = cli.common.to_config();
    let cfg = match &cli.common.config {
        Some(path) => Config::load(path)?.overlay(flags),
        None => flags,
    };
    match cfg.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::Config(e.to_string()))?
            .install(|| run(&cli.command, &cfg)),
        None => run(&cli.command, &cfg),
    }
}

fn run(cmd: &Command, cfg: &Config) -> Result<Outcome> {
    let format = cfg.format.unwrap_or(Format::Text);
    if let Command::List = cmd {
        let rendered = experiments::registry()
            .iter()
            .map(|e| format!("{:<24} {:?}  {}\n", e.id, e.group, e.citation))
            .collect();
        return Ok(Outcome { reports: vec![], rendered, file: None });
    }
    let exps = match cmd {
        Command::Ladder { experiment } => {
            let id = experiment.as_deref().or(cfg.experiment.as_deref()).ok_or_else(|| Error::Config("ladder needs --experiment".into()))?;
            vec![experiments::find(id)?]
        }
        other => experiments::group(other.group().expect("group subcommand")),
    };
    let mut reports = Vec::new();
    for e in &exps {
        reports.extend(experiments::run_ladder(e, cfg.lambda.as_deref(), cfg)?.0);
    }
    let rendered = match (cmd, format) {
        (Command::Ledger, Format::Text) => ledger::render_text(&ledger::checkpoint_table()?)?,
        (Command::Ledger, Format::Csv) => ledger::render_csv(&ledger::checkpoint_table()?)?,
        (_, Format::Json) => report::to_json(&reports)?,
        (_, Format::Csv) => report::to_csv(&reports)?,
        (_, Format::Text) => report::to_text(&reports),
    };
    let file = match &cfg.out {
        Some(dir) => {
            std::fs::create_dir_all(dir)?;
            let ext = match format {
                Format::Json => "json",
                Format::Csv => "csv",
                Format::Text => "txt",
            };
            let path = dir.join(format!("{}.{ext}", cmd.name()));
            std::fs::write(&path, &rendered)?;
            Some(path)
        }
        None => None,
    };
    Ok(Outcome { reports, rendered, file })
}
