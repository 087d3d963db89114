//! `hypflow` command-line front end.
//!
//! Exit codes: 0 ok, 2 configuration error, 3 numerical failure,
//! 4 breakdown during an instability experiment.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::{HadamardSection, QuantizeSection, RawConfig, SimulateSection, FlowSection};
use hypflow_core::registry::ExampleParams;

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Numerical(String),
    Io(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(_) | CliError::Io(_) => 3,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Numerical(m) => write!(f, "numerical failure: {m}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
        }
    }
}

#[derive(Parser)]
#[command(name = "hypflow", version, about = "Hyperbolic-to-elliptic transitions: classification, symbolic flows, Airy checks and Hadamard experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Classify the transition type of an example's linearization.
    Classify(Common),
    /// Branching data (τ⋆, μ, e₀, f₀) and growth rates at the witness.
    Branch(Common),
    /// Integrate the symbolic flow and check the growth envelopes per ε.
    Flow(Common),
    /// Wronskian, asymptotic and envelope checks of the Airy functions.
    Airy(Common),
    /// Semiclassical calculus residuals on wave packets.
    QuantizeCheck(Common),
    /// Hadamard instability experiment over an ε ladder.
    Simulate(Common),
    /// List the built-in examples and their states.
    ListExamples,
}

#[derive(Args, Default)]
struct Common {
    /// Example name (see list-examples).
    #[arg(long)]
    example: Option<String>,
    /// Reference state of the example.
    #[arg(long)]
    state: Option<String>,
    /// TOML or JSON configuration file; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Comma-separated ε values.
    #[arg(long, value_delimiter = ',')]
    eps_ladder: Option<Vec<f64>>,
    /// Output directory (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Equality tolerance of the classifier.
    #[arg(long)]
    tol: Option<f64>,

    // example parameters
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    c: Option<f64>,
    #[arg(long = "F2")]
    f2: Option<f64>,
    #[arg(long)]
    a: Option<f64>,
    #[arg(long)]
    sign: Option<f64>,
    #[arg(long)]
    miss: Option<f64>,

    // instability experiment
    #[arg(long = "K")]
    k: Option<f64>,
    /// Hölder exponent α of the instability estimate.
    #[arg(long)]
    holder_alpha: Option<f64>,
    /// Sobolev index m of the data.
    #[arg(long)]
    m: Option<f64>,
    #[arg(long)]
    delta: Option<f64>,
    /// T⋆ (flow: T(ε)^{ℓ+1} = T⋆|log ε|; simulate: the experiment's T⋆).
    #[arg(long)]
    t_star: Option<f64>,
    #[arg(long)]
    gamma_minus: Option<f64>,
    #[arg(long)]
    gamma_plus: Option<f64>,
    #[arg(long)]
    length: Option<f64>,
    #[arg(long)]
    dt_scale: Option<f64>,
    #[arg(long)]
    filter: Option<f64>,
    /// Semiclassical exponent h (quantize-check; simulate on examples without a transition).
    #[arg(long)]
    h: Option<f64>,
    /// Packet center for simulate (default: the classification witness).
    #[arg(long)]
    x0: Option<f64>,
}

impl Common {
    fn overrides(&self, command: &str) -> RawConfig {
        let simulate = command == "simulate";
        RawConfig {
            command: Some(command.into()),
            example: self.example.clone(),
            state: self.state.clone(),
            params: ExampleParams {
                alpha: self.alpha,
                c: self.c,
                f2: self.f2,
                a: self.a,
                sign: self.sign,
                miss: self.miss,
            },
            eps_ladder: self.eps_ladder.clone(),
            tol: self.tol,
            seed: self.seed,
            out: self.out.clone(),
            hadamard: HadamardSection {
                k: self.k,
                alpha: self.holder_alpha,
                m: if simulate { self.m } else { None },
                delta: self.delta,
                t_star: if simulate { self.t_star } else { None },
                gamma_minus: if simulate { self.gamma_minus } else { None },
            },
            flow: FlowSection {
                t_star: if simulate { None } else { self.t_star },
                gamma_minus: if simulate { None } else { self.gamma_minus },
                gamma_plus: self.gamma_plus,
                samples: None,
            },
            simulate: SimulateSection {
                h: if simulate { self.h } else { None },
                x0: self.x0,
                length: if simulate { self.length } else { None },
                dt_scale: self.dt_scale,
                filter: self.filter,
                ..Default::default()
            },
            quantize: QuantizeSection {
                h: if simulate { None } else { self.h },
                m: if simulate { None } else { self.m },
                length: if simulate { None } else { self.length },
            },
        }
    }

    fn resolve(&self, command: &str) -> Result<config::RunConfig, CliError> {
        let base = match &self.config {
            Some(p) => config::read_file(p)?,
            None => RawConfig::default(),
        };
        base.overlay(self.overrides(command)).resolve()
    }
}

fn run(cli: Cli) -> Result<u8, CliError> {
    let (name, common) = match &cli.command {
        Command::Classify(c) => ("classify", c),
        Command::Branch(c) => ("branch", c),
        Command::Flow(c) => ("flow", c),
        Command::Airy(c) => ("airy", c),
        Command::QuantizeCheck(c) => ("quantize-check", c),
        Command::Simulate(c) => ("simulate", c),
        Command::ListExamples => return commands::list_examples().map(|_| 0),
    };
    let cfg = common.resolve(name)?;
    match name {
        "classify" => commands::classify_cmd(&cfg)?,
        "branch" => commands::branch_cmd(&cfg)?,
        "flow" => commands::flow_cmd(&cfg)?,
        "airy" => commands::airy_cmd(&cfg)?,
        "quantize-check" => commands::quantize_cmd(&cfg)?,
        "simulate" => {
            if commands::simulate_cmd(&cfg)? {
                eprintln!("breakdown detected; results written");
                return Ok(4);
            }
        }
        _ => unreachable!(),
    }
    Ok(0)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("hypflow: {e}");
            ExitCode::from(e.code())
        }
    }
}
