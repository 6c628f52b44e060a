use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use fracevo::cli::{self, RunConfig, Sweep, Task};
use fracevo::Error;

#[derive(Parser)]
#[command(name = "fracevo", version, about = "Semilinear time-fractional evolution equations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct RunArgs {
    /// Run configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides the config's `output`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed of the sampled Lipschitz check.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Parameter sweep `path=start:end:count` or `path=v1,v2,...`.
    #[arg(long)]
    sweep: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the problem (linear, semilinear, integral-initial or derivative task).
    Solve(RunArgs),
    /// Continue a locally Lipschitz problem and detect blow-up.
    Blowup(RunArgs),
    /// Solve and check nonnegativity and the discrete maximum principle.
    Maxprinciple(RunArgs),
    /// Tabulate special functions.
    Specfun(RunArgs),
    /// Solve and report weighted Hölder norms.
    Holder(RunArgs),
    /// Report configuration violations.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
}

fn fail(e: &Error) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(cli::exit_code(e) as u8)
}

fn execute(args: &RunArgs, fixed: Option<Task>) -> Result<u8, Error> {
    let text = fs::read_to_string(&args.config)?;
    let mut config = RunConfig::from_toml(&text)?;
    match (fixed, config.task) {
        (Some(t), Some(c)) if t != c => {
            return Err(Error::Config(format!("config task '{c}' does not match subcommand task '{t}'")));
        }
        (Some(t), _) => config.task = Some(t),
        (None, Some(c)) if !c.is_solve() => {
            return Err(Error::Config(format!("task '{c}' is not a solve task; use its own subcommand")));
        }
        _ => {}
    }
    let out = args.out.clone().or(config.output.clone()).unwrap_or_else(|| PathBuf::from("out"));
    if let Some(spec) = &args.sweep {
        let sweep = Sweep::parse(spec)?;
        let entries = cli::run_sweep(&text, &sweep, &out, args.seed, config.task)?;
        let failed = entries.iter().filter(|e| e.exit_code != 0).count();
        println!("sweep: {} runs, {} failed, results in {}", entries.len(), failed, out.display());
        for e in entries.iter().filter(|e| e.exit_code != 0) {
            eprintln!("run {} ({}): {}", e.index, e.value, e.error.as_deref().unwrap_or(""));
        }
        return Ok(entries.iter().map(|e| e.exit_code).max().unwrap_or(0) as u8);
    }
    let outcome = cli::run(&config, &out, args.seed)?;
    println!("{}: wrote {} to {}", outcome.metadata.task, outcome.metadata.artifacts.join(", "), out.display());
    if let Some(c) = &outcome.continuation {
        println!("{}", serde_json::to_string(&c.status).unwrap_or_default());
    }
    if let Some(m) = &outcome.max_principle {
        println!("nonnegative: {}, luchko: {}, min: {:e}", m.nonnegative, m.luchko_holds, m.min_value);
    }
    Ok(0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Solve(a) => execute(a, None),
        Command::Blowup(a) => execute(a, Some(Task::Blowup)),
        Command::Maxprinciple(a) => execute(a, Some(Task::Maxprinciple)),
        Command::Specfun(a) => execute(a, Some(Task::SpecfunTable)),
        Command::Holder(a) => execute(a, Some(Task::HolderFit)),
        Command::Validate { config } => {
            let config = match fs::read_to_string(config).map_err(Error::from).and_then(|t| RunConfig::from_toml(&t)) {
                Ok(c) => c,
                Err(e) => return fail(&e),
            };
            let v = cli::validate(&config);
            if v.is_empty() {
                println!("ok");
                return ExitCode::SUCCESS;
            }
            for x in &v {
                println!("{x}");
            }
            return ExitCode::from(cli::EXIT_VALIDATION as u8);
        }
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => fail(&e),
    }
}
