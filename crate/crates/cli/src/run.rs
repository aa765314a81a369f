//! Argument parsing and dispatch.

use clap::{Args, Parser, Subcommand};
use metriq::prover::ProverConfig;

use crate::commands::{self, CliError, ProveArgs, Report, EXIT_OK, EXIT_USAGE};

pub const DEPTH_ENV: &str = "METRIQ_DEPTH";

#[derive(Debug, Parser)]
#[command(name = "metriq", version, about = "Metric equational theories: proofs, distances, models")]
pub struct Cli {
    /// Emit machine-readable JSON on stdout, including errors.
    #[arg(long, global = true)]
    pub json: bool,
    #[command(flatten)]
    pub caps: Caps,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Caps {
    /// Maximum term depth [default: 3, or $METRIQ_DEPTH]
    #[arg(long, global = true)]
    pub depth: Option<usize>,
    /// Maximum saturation rounds [default: 1000]
    #[arg(long, global = true)]
    pub iterations: Option<usize>,
    /// Longest stream prefix generated [default: 2]
    #[arg(long, global = true)]
    pub k_max: Option<usize>,
    /// Cap on interned terms [default: 5000]
    #[arg(long, global = true)]
    pub max_terms: Option<usize>,
    /// Search nodes per countermodel query [default: 200000]
    #[arg(long, global = true)]
    pub budget: Option<usize>,
    /// Largest countermodel carrier [default: 4]
    #[arg(long, global = true)]
    pub size: Option<usize>,
    /// Comma-separated countermodel distances [default: 0,1/4,1/2,1,2,inf]
    #[arg(long, global = true)]
    pub grid: Option<String>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check that both sides of every axiom are derivably well-formed.
    Check { file: String },
    /// Search for a kernel proof of a sequent.
    Prove {
        file: String,
        /// Extra hypotheses, e.g. "x =[1] y, y =[1/2] z".
        #[arg(long)]
        ctx: Option<String>,
        /// A sequent such as "|- f(x) =[1] f(y)", or the name of one in the file.
        #[arg(long)]
        goal: String,
        /// Generator space: a name from the file, an inline block or a JSON file.
        #[arg(long)]
        gens: Option<String>,
        /// Write the proof JSON here.
        #[arg(long)]
        out: Option<String>,
    },
    /// Re-check a serialized proof with the kernel.
    CheckProof {
        file: String,
        /// Proof JSON written by `prove --out`.
        proof: String,
        /// Generator space the proof was produced over.
        #[arg(long)]
        gens: Option<String>,
    },
    /// Least derivable distance between two closed terms, with an exactness check.
    Dist {
        file: String,
        /// Generator space whose points may appear as constants ('x).
        #[arg(long)]
        gens: Option<String>,
        /// First term, inline or the name of a `term` in the file.
        #[arg(long)]
        t1: String,
        /// Second term, inline or by name.
        #[arg(long)]
        t2: String,
    },
    /// Depth-bounded free model over a generator space (initial model without one).
    Free {
        file: String,
        /// Generator space: a name from the file, an inline block or a JSON file.
        #[arg(long)]
        gens: Option<String>,
        /// Write the model JSON here.
        #[arg(long)]
        out: Option<String>,
    },
    /// Check a finite model against each axiom.
    Satisfy {
        file: String,
        /// Model JSON: `{"carrier": .., "ops": ..}`.
        #[arg(long)]
        model: String,
    },
    /// Search for a finite model violating a sequent.
    Countermodel {
        file: String,
        /// Extra hypotheses.
        #[arg(long)]
        ctx: Option<String>,
        /// The sequent to refute.
        #[arg(long)]
        goal: String,
    },
    /// Run a worked example and compare against the expected values.
    Demo {
        #[arg(value_parser = clap::builder::PossibleValuesParser::new(commands::DEMOS))]
        name: String,
    },
}

/// Resolves the caps; `env_depth` is the value of `METRIQ_DEPTH`, if set.
pub fn config(caps: &Caps, env_depth: Option<&str>) -> Result<ProverConfig, CliError> {
    let mut cfg = ProverConfig::default();
    if let Some(d) = env_depth {
        cfg.depth = d.trim().parse().map_err(|_| CliError::Usage(format!("{DEPTH_ENV}: `{d}` is not a depth")))?;
    }
    if let Some(d) = caps.depth {
        cfg.depth = d;
    }
    let pairs = [
        (&mut cfg.iterations, caps.iterations),
        (&mut cfg.k_max, caps.k_max),
        (&mut cfg.max_terms, caps.max_terms),
        (&mut cfg.budget, caps.budget),
        (&mut cfg.size, caps.size),
    ];
    for (slot, v) in pairs {
        if let Some(v) = v {
            *slot = v;
        }
    }
    if let Some(g) = &caps.grid {
        cfg.grid = commands::parse_grid(g)?;
    }
    cfg.validate().map_err(CliError::Usage)?;
    Ok(cfg)
}

fn dispatch(cli: &Cli, cfg: &ProverConfig) -> Result<Report, CliError> {
    use Command::*;
    match &cli.command {
        Check { file } => Ok(commands::check(&commands::load(file)?, cfg)),
        Prove { file, ctx, goal, gens, out } => {
            let args = ProveArgs { ctx: ctx.as_deref(), goal, gens: gens.as_deref(), out: out.as_deref() };
            commands::prove_cmd(&commands::load(file)?, &args, cfg)
        }
        CheckProof { file, proof, gens } => commands::check_proof_cmd(&commands::load(file)?, proof, gens.as_deref()),
        Dist { file, gens, t1, t2 } => commands::dist(&commands::load(file)?, gens.as_deref(), t1, t2, cfg),
        Free { file, gens, out } => commands::free(&commands::load(file)?, gens.as_deref(), out.as_deref(), cfg),
        Satisfy { file, model } => commands::satisfy(&commands::load(file)?, model),
        Countermodel { file, ctx, goal } => commands::countermodel(&commands::load(file)?, ctx.as_deref(), goal, cfg),
        Demo { name } => commands::demo(name, cfg),
    }
}

/// What to print and the exit code.
pub struct Output {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

fn render_json(v: &serde_json::Value) -> String {
    serde_json::to_string_pretty(v).expect("json values serialize") + "\n"
}

/// Runs one invocation. `args` includes the program name.
pub fn run<I, T>(args: I, env_depth: Option<&str>) -> Output
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let args: Vec<std::ffi::OsString> = args.into_iter().map(Into::into).collect();
    let json = args.iter().any(|a| a == "--json");
    let cli = match Cli::try_parse_from(&args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                return Output { code: EXIT_OK, stdout: e.to_string(), stderr: String::new() };
            }
            let err = CliError::Usage(e.to_string().trim_end().to_string());
            return failure(&err, json);
        }
    };
    let result = config(&cli.caps, env_depth).and_then(|cfg| dispatch(&cli, &cfg));
    match result {
        Ok(r) if cli.json => Output { code: r.code, stdout: render_json(&r.json), stderr: String::new() },
        Ok(r) => Output { code: r.code, stdout: r.text + "\n", stderr: String::new() },
        Err(e) => failure(&e, cli.json),
    }
}

fn failure(e: &CliError, json: bool) -> Output {
    let code = e.exit_code();
    debug_assert!(code != EXIT_OK && code <= EXIT_USAGE);
    if json {
        Output { code, stdout: render_json(&e.to_json()), stderr: String::new() }
    } else {
        Output { code, stdout: String::new(), stderr: format!("error: {e}\n") }
    }
}
