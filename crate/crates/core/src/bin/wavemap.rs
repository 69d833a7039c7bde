use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use wavemap::cli_io::{output_dir, run, Command, Config, ExitKind};

/// Critical collapse of equivariant wave maps: evolutions, threshold
/// searches, self-similar and static solutions.
#[derive(Parser, Debug)]
#[command(name = "wavemap", version)]
struct Cli {
    /// evolve, bisect, ab-solve, lambda-spec, static-solve, omega-spec,
    /// sign-test, regime-scan, ss-compare, convergence or figure
    command: String,
    /// Flat `key = value` configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override one key; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Worker threads for concurrent evolutions.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Output directory (WAVEMAP_OUT takes precedence).
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = (|| {
        let command = Command::parse(&cli.command)?;
        let mut cfg = match &cli.config {
            Some(p) => Config::load(p)?,
            None => Config::default(),
        };
        for pair in &cli.set {
            cfg.set_pair(pair)?;
        }
        let dir = output_dir(cli.out.as_deref());
        run(command, &cfg, &dir, cli.jobs.max(1)).map(|s| (s, dir))
    })();
    match result {
        Ok((summary, dir)) => {
            eprintln!(
                "{}: wrote {} files and {}_summary.json to {}",
                summary.command.name(),
                summary.files.len(),
                summary.run_id,
                dir.display()
            );
            ExitCode::from(summary.exit.code() as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(ExitKind::of_error(&e).code() as u8)
        }
    }
}
