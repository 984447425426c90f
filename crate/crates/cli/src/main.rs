use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use tb_cli::commands::{self, resolve_out_dir, Artifacts, Overrides, OUT_ENV};
use tb_cli::config::RunConfig;
use tb_cli::error::{CliError, CliResult};
use tb_core::policies::PolicyKind;

#[derive(Debug, Parser)]
#[command(
    name = "tb",
    version,
    about = "Plan-ahead Bayesian optimization testbed"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run every replication of a config and write traces, summaries and plots.
    Run {
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Comma-separated seeds, replacing the config's list.
        #[arg(long, value_delimiter = ',')]
        seeds: Option<Vec<u64>>,
        #[arg(long)]
        parallel: Option<usize>,
    },
    /// Run several policies on shared seeds and tabulate paired differences.
    Compare {
        config: PathBuf,
        /// Comma-separated policy names (tts, tucb, bpe, ts, ucb).
        #[arg(long, value_delimiter = ',', required = true)]
        policies: Vec<String>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_delimiter = ',')]
        seeds: Option<Vec<u64>>,
        #[arg(long)]
        parallel: Option<usize>,
    },
    /// Route lengths through uniform points and their log-log slope.
    Scaling {
        #[arg(long, default_value_t = 2)]
        dim: usize,
        #[arg(long, value_delimiter = ',', default_value = "64,256,1024,4096")]
        n: Vec<usize>,
        /// Number of seeds, `0..seeds`.
        #[arg(long, default_value_t = 10)]
        seeds: u64,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        parallel: usize,
    },
}

fn load(path: &Path) -> CliResult<RunConfig> {
    RunConfig::from_file(path)
}

fn commit(
    art: &Artifacts,
    cli_out: Option<&Path>,
    config: Option<(&Path, &RunConfig)>,
) -> CliResult<PathBuf> {
    let env = std::env::var(OUT_ENV).ok();
    let out = resolve_out_dir(
        cli_out,
        env.as_deref(),
        config.map(|(p, _)| p),
        config.and_then(|(_, c)| c.output_dir.as_deref()),
    );
    art.commit(&out)?;
    Ok(out)
}

fn execute(cli: Cli) -> CliResult<PathBuf> {
    match cli.command {
        Command::Run {
            config,
            out,
            seeds,
            parallel,
        } => {
            let cfg = load(&config)?;
            let art = commands::run(&cfg, &Overrides { seeds, parallel })?;
            commit(&art, out.as_deref(), Some((&config, &cfg)))
        }
        Command::Compare {
            config,
            policies,
            out,
            seeds,
            parallel,
        } => {
            let cfg = load(&config)?;
            let kinds = policies
                .iter()
                .map(|p| {
                    PolicyKind::from_name(p).ok_or_else(|| {
                        let names: Vec<&str> = PolicyKind::ALL.iter().map(|k| k.name()).collect();
                        CliError::Config(format!(
                            "`--policies`: unknown policy `{p}`; expected one of {}",
                            names.join(", ")
                        ))
                    })
                })
                .collect::<CliResult<Vec<_>>>()?;
            let art = commands::compare(&cfg, &kinds, &Overrides { seeds, parallel })?;
            commit(&art, out.as_deref(), Some((&config, &cfg)))
        }
        Command::Scaling {
            dim,
            n,
            seeds,
            out,
            parallel,
        } => {
            if dim == 0 || parallel == 0 || seeds == 0 {
                return Err(CliError::Config(
                    "`--dim`, `--seeds` and `--parallel` must be positive".into(),
                ));
            }
            let mut distinct = n.clone();
            distinct.sort_unstable();
            distinct.dedup();
            if distinct.len() < 2 || distinct[0] == 0 {
                return Err(CliError::Config(
                    "`--n` needs at least two distinct positive sizes".into(),
                ));
            }
            let seed_list: Vec<u64> = (0..seeds).collect();
            let mut art = Artifacts::default();
            let slope = commands::scaling_artifacts(dim, &n, &seed_list, parallel, &mut art)?;
            println!("slope {slope:.4}");
            commit(&art, out.as_deref(), None)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(cli) {
        Ok(out) => {
            println!("wrote {}", out.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("tb: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
