use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use topeq::experiment::{
    run_certify, run_conjugate, run_stability, to_json, write_output, ExperimentConfig, Outcome,
};

/// Certify dichotomy hypotheses, build the conjugacy maps and check the
/// stability results for a system described in a TOML config.
#[derive(Parser)]
#[command(name = "topeq", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check every hypothesis and report the constants p, q.
    Certify(Common),
    /// Verify the conjugacy relations and identities on seeded samples.
    Conjugate(Common),
    /// Locate the equilibrium and check the rate majorants.
    Stability(Common),
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    /// Overrides the evaluation horizon of the config.
    #[arg(long)]
    horizon: Option<usize>,
    /// Overrides the seed of the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; defaults to the one named in the config.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn init_logging() {
    env_logger::Builder::new()
        .filter_level(log::LevelFilter::Warn)
        .parse_env("TOPEQ_LOG")
        .format_timestamp(None)
        .init();
}

fn main() -> ExitCode {
    init_logging();
    let cli = Cli::parse();
    let outcome = match run(cli.command) {
        Ok(o) => o,
        Err((outcome, msg)) => {
            eprintln!("error: {msg}");
            outcome
        }
    };
    ExitCode::from(outcome.code() as u8)
}

type Failure = (Outcome, String);

fn fail(e: topeq::Error) -> Failure {
    (Outcome::of_error(&e), e.to_string())
}

fn save(dir: &std::path::Path, name: &str, contents: &str) -> Result<(), Failure> {
    let path = write_output(dir, name, contents)
        .map_err(|e| (Outcome::NumericFailure, format!("cannot write {name}: {e}")))?;
    log::info!("wrote {}", path.display());
    Ok(())
}

fn run(command: Command) -> Result<Outcome, Failure> {
    let (common, kind) = match &command {
        Command::Certify(c) => (c, "certify"),
        Command::Conjugate(c) => (c, "conjugate"),
        Command::Stability(c) => (c, "stability"),
    };
    let cfg = ExperimentConfig::load(&common.config)
        .and_then(|c| c.with_overrides(common.horizon, common.seed))
        .map_err(fail)?;
    let dir = common.out.clone().unwrap_or_else(|| cfg.output.dir.clone());
    let stem = format!("{}_{kind}", cfg.name);
    log::info!("{kind}: {} (horizon {}, seed {})", cfg.name, cfg.horizon, cfg.seed);

    match command {
        Command::Certify(_) => {
            let run = run_certify(&cfg).map_err(fail)?;
            let text = run.text();
            print!("{text}");
            save(&dir, &format!("{stem}.txt"), &text)?;
            save(&dir, &format!("{stem}.json"), &to_json(&run))?;
            Ok(run.outcome())
        }
        Command::Conjugate(_) => {
            let run = run_conjugate(&cfg).map_err(fail)?;
            let c = &run.verification.conjugacy;
            let i = &run.verification.identities;
            println!("{}: {} rows, p = {:.6e}, q = {:.6e}", run.name, run.table.len(), run.p, run.q);
            println!(
                "max residuals: conj {:.3e} / {:.3e}, HG {:.3e}, GH {:.3e}, wz {:.3e}, zw {:.3e}, fixed {:.3e}, flow {:.3e}",
                c.max_res_h, c.max_res_g, c.max_res_hg, c.max_res_gh, i.max_res_wz, i.max_res_zw,
                i.max_res_fixed, i.max_res_flow
            );
            println!("within budget: {}", run.passed);
            save(&dir, &format!("{stem}.csv"), &run.csv().map_err(fail)?)?;
            save(&dir, &format!("{stem}.json"), &to_json(&run))?;
            Ok(run.outcome())
        }
        Command::Stability(_) => {
            let run = run_stability(&cfg).map_err(fail)?;
            println!(
                "{}: y* = {:?} (residual {:.3e}, unique {})",
                run.name, run.equilibrium.y_star, run.equilibrium.residual, run.equilibrium.unique_flag
            );
            println!(
                "majorants respected: {}, decomposition holds: {}, decay index {:?}",
                run.preservation.all_within_bounds, run.probe.split_holds, run.probe.decay_index
            );
            save(&dir, &format!("{stem}.csv"), &run.csv().map_err(fail)?)?;
            save(&dir, &format!("{stem}.json"), &to_json(&run))?;
            Ok(run.outcome())
        }
    }
}
