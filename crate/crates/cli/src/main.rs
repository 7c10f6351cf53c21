use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use optsel_cli::config::{load_config, ConfigError, OUTPUT_DIR_ENV};
use optsel_cli::oracle_report::{constants_outcome, gradcheck_outcome, lemma_outcome};
use optsel_cli::plot::{parse_summary, render_svg};
use optsel_cli::suite::{run_suite, write_suite_outputs};

const EXIT_RUNTIME: u8 = 1;
const EXIT_USAGE: u8 = 2;

#[derive(Parser)]
#[command(
    name = "optsel",
    about = "Batch harness for validation-based hyperparameter selection experiments",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum OracleKind {
    Constants,
    Gradcheck,
    Lemma,
}

#[derive(Subcommand)]
enum Command {
    /// Run a full experiment suite from a config file.
    Run {
        /// Path to the TOML config file.
        config: PathBuf,
    },
    /// Render a two-panel convergence chart from a summary CSV.
    Plot {
        /// summary.csv produced by `run`.
        summary: PathBuf,
        /// Output SVG path.
        out: PathBuf,
    },
    /// Run a verification oracle suite and write its report.
    Oracle {
        /// Which suite to run.
        kind: OracleKind,
        /// Directory for the report files (overridden by the
        /// output-directory environment variable).
        #[arg(long, default_value = "reports")]
        out_dir: PathBuf,
    },
}

fn cmd_run(config_path: &PathBuf) -> u8 {
    let cfg = match load_config(config_path) {
        Ok(c) => c,
        Err(e @ (ConfigError::Parse(_) | ConfigError::Invalid(_))) => {
            eprintln!("{e}");
            return EXIT_USAGE;
        }
    };
    let results = match run_suite(&cfg) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("{{\"error\":\"suite\",\"detail\":\"{e}\"}}");
            return EXIT_RUNTIME;
        }
    };
    if let Err(e) = write_suite_outputs(&cfg, &results) {
        eprintln!("{{\"error\":\"output\",\"detail\":\"{e}\"}}");
        return EXIT_RUNTIME;
    }
    for s in &results.summaries {
        println!(
            "n={} ratio_a={:.6} ratio_b={:.6} (reps {}, excluded {})",
            s.n, s.ratio_a, s.ratio_b, s.replications, s.excluded_count
        );
    }
    println!("wrote {}", cfg.output_dir.display());
    0
}

fn cmd_plot(summary: &PathBuf, out: &PathBuf) -> u8 {
    let text = match std::fs::read_to_string(summary) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("{}: {e}", summary.display());
            return EXIT_RUNTIME;
        }
    };
    let rows = match parse_summary(&text) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("{e}");
            return EXIT_USAGE;
        }
    };
    let svg = match render_svg(&rows) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("{e}");
            return EXIT_USAGE;
        }
    };
    if let Err(e) = std::fs::write(out, svg) {
        eprintln!("{}: {e}", out.display());
        return EXIT_RUNTIME;
    }
    println!("wrote {}", out.display());
    0
}

fn cmd_oracle(kind: OracleKind, out_dir: &PathBuf) -> u8 {
    let (name, outcome) = match kind {
        OracleKind::Constants => ("constants", constants_outcome()),
        OracleKind::Gradcheck => ("gradcheck", gradcheck_outcome()),
        OracleKind::Lemma => ("lemma", lemma_outcome()),
    };
    let dir = std::env::var(OUTPUT_DIR_ENV)
        .ok()
        .filter(|v| !v.is_empty())
        .map(PathBuf::from)
        .unwrap_or_else(|| out_dir.clone());
    if let Err(e) = std::fs::create_dir_all(&dir) {
        eprintln!("{}: {e}", dir.display());
        return EXIT_RUNTIME;
    }
    let txt_path = dir.join(format!("oracle_{name}.txt"));
    let json_path = dir.join(format!("oracle_{name}.json"));
    if let Err(e) = std::fs::write(&txt_path, &outcome.text) {
        eprintln!("{}: {e}", txt_path.display());
        return EXIT_RUNTIME;
    }
    if let Err(e) = std::fs::write(&json_path, &outcome.json) {
        eprintln!("{}: {e}", json_path.display());
        return EXIT_RUNTIME;
    }
    print!("{}", outcome.text);
    println!("reports: {} {}", txt_path.display(), json_path.display());
    if outcome.passed {
        0
    } else {
        EXIT_RUNTIME
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match &cli.command {
        Command::Run { config } => cmd_run(config),
        Command::Plot { summary, out } => cmd_plot(summary, out),
        Command::Oracle { kind, out_dir } => cmd_oracle(*kind, out_dir),
    };
    ExitCode::from(code)
}
