use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;
use tomolab::experiments::{report, run_config, EXPERIMENTS};

/// Batch front end: run experiment configs, summarize their manifests.
#[derive(Parser)]
#[command(name = "tomolab", version)]
struct Cli {
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true, env = "TOMOLAB_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment config and write its manifest.
    Run { config: PathBuf },
    /// Summarize every manifest under a directory.
    Report { dir: PathBuf },
    /// Print the experiment names.
    List,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    match cli.command {
        Command::List => {
            for name in EXPERIMENTS {
                println!("{name}");
            }
            ExitCode::SUCCESS
        }
        Command::Run { config } => match run_config(&config) {
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(2)
            }
            Ok(m) => {
                for a in &m.assertions {
                    let v = a.value.map(|v| format!("{v:.3e}")).unwrap_or_else(|| "nan".into());
                    let mark = if a.passed { "pass" } else { "FAIL" };
                    println!("{mark} {} = {v} ({:?} {:e})", a.name, a.relation, a.bound);
                }
                for c in &m.children {
                    println!("{} {}", if c.passed { "pass" } else { "FAIL" }, c.experiment);
                }
                if let Some(e) = &m.error {
                    eprintln!("error: {e}");
                }
                println!("{}: {}", m.experiment, if m.passed { "passed" } else { "failed" });
                if m.passed {
                    ExitCode::SUCCESS
                } else {
                    ExitCode::from(1)
                }
            }
        },
        Command::Report { dir } => match report(&dir) {
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(2)
            }
            Ok(out) => {
                println!("{} experiments, {} plots -> {}", out.rows.len(), out.plots.len(), out.summary.display());
                ExitCode::SUCCESS
            }
        },
    }
}
