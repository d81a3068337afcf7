//! Experiment runner CLI. One experiment per invocation; all configuration
//! comes from a strict TOML file, with a few override flags.

use std::path::PathBuf;
use std::process::ExitCode;

use pensemble::error::Error;
use pensemble::experiment::{compare_report, parse_config, run_experiment, ExperimentKind};

const USAGE: &str = "\
pensemble: equilibrium ensembles of pure system-bath states

USAGE:
  pensemble <sample|marginal|landauer|theta> --config PATH [FLAGS]
  pensemble compare SAMPLED.csv ANALYTIC.csv [--tv-threshold X] [--out DIR]

FLAGS:
  --config PATH             Experiment configuration (TOML); a manifest.toml
                            from an earlier run is accepted and reproduces it
  --seed U64                Override chain.seed
  --out DIR                 Output directory (default: out)
  --chains K                Override chain.chains
  --override-beta-prime X   Use the explicit statistical inverse temperature X
                            (1/eV) instead of solving for it
  --tv-threshold X          compare: total-variation pass threshold (default 0.05)
  --help                    Show this help

EXIT CODES:
  0  success (compare: thresholds met)
  1  configuration or usage error
  2  numerical diagnostic failure (solver, quadrature, or compare threshold)

OUTPUTS (per run, under --out):
  data.csv        experiment table, schema fixed per subcommand
  manifest.toml   config echo + resolved beta', seeds, checksums
  chain.csv       raw chain (sample runs with output.raw_chain = true)
";

struct Args {
    command: String,
    config: Option<PathBuf>,
    positional: Vec<PathBuf>,
    seed: Option<u64>,
    out: PathBuf,
    chains: Option<usize>,
    override_beta_prime: Option<f64>,
    tv_threshold: f64,
}

fn parse_args() -> Result<Args, String> {
    let mut argv = std::env::args().skip(1);
    let command = match argv.next() {
        Some(c) => c,
        None => return Err("missing subcommand".into()),
    };
    if command == "--help" || command == "-h" || command == "help" {
        return Err(String::new());
    }
    let mut args = Args {
        command,
        config: None,
        positional: Vec::new(),
        seed: None,
        out: PathBuf::from("out"),
        chains: None,
        override_beta_prime: None,
        tv_threshold: 0.05,
    };
    while let Some(flag) = argv.next() {
        let mut value = |name: &str| {
            argv.next()
                .ok_or_else(|| format!("{name} expects a value"))
        };
        match flag.as_str() {
            "--config" => args.config = Some(PathBuf::from(value("--config")?)),
            "--seed" => {
                args.seed = Some(
                    value("--seed")?
                        .parse()
                        .map_err(|e| format!("--seed: {e}"))?,
                )
            }
            "--out" => args.out = PathBuf::from(value("--out")?),
            "--chains" => {
                args.chains = Some(
                    value("--chains")?
                        .parse()
                        .map_err(|e| format!("--chains: {e}"))?,
                )
            }
            "--override-beta-prime" => {
                args.override_beta_prime = Some(
                    value("--override-beta-prime")?
                        .parse()
                        .map_err(|e| format!("--override-beta-prime: {e}"))?,
                )
            }
            "--tv-threshold" => {
                args.tv_threshold = value("--tv-threshold")?
                    .parse()
                    .map_err(|e| format!("--tv-threshold: {e}"))?
            }
            "--help" | "-h" => return Err(String::new()),
            other if !other.starts_with('-') => args.positional.push(PathBuf::from(other)),
            other => return Err(format!("unknown flag {other}")),
        }
    }
    Ok(args)
}

fn main() -> ExitCode {
    let args = match parse_args() {
        Ok(a) => a,
        Err(msg) => {
            if msg.is_empty() {
                print!("{USAGE}");
                return ExitCode::SUCCESS;
            }
            eprintln!("error: {msg}\n");
            eprint!("{USAGE}");
            return ExitCode::from(1);
        }
    };

    match args.command.as_str() {
        "compare" => run_compare(&args),
        "sample" | "marginal" | "landauer" | "theta" => run_configured(&args),
        other => {
            eprintln!("error: unknown subcommand {other}\n");
            eprint!("{USAGE}");
            ExitCode::from(1)
        }
    }
}

fn exit_code_for(err: &Error) -> ExitCode {
    match err {
        Error::Config(_) | Error::InvalidInput(_) | Error::DimensionMismatch(_) => ExitCode::from(1),
        _ => ExitCode::from(2),
    }
}

fn run_configured(args: &Args) -> ExitCode {
    let config_path = match &args.config {
        Some(p) => p.clone(),
        None => {
            eprintln!("error: --config PATH is required for {}", args.command);
            return ExitCode::from(1);
        }
    };
    let text = match std::fs::read_to_string(&config_path) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: {}: {e}", config_path.display());
            return ExitCode::from(1);
        }
    };
    let mut config = match parse_config(&text) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };

    let expected = match args.command.as_str() {
        "sample" => ExperimentKind::Sample,
        "marginal" => ExperimentKind::Marginal,
        "landauer" => ExperimentKind::Landauer,
        _ => ExperimentKind::Theta,
    };
    if config.experiment.kind != expected {
        eprintln!(
            "error: subcommand {} does not match experiment.kind = {:?} in the config",
            args.command, config.experiment.kind
        );
        return ExitCode::from(1);
    }
    if let Some(seed) = args.seed {
        if let Some(chain) = config.chain.as_mut() {
            chain.seed = seed;
        }
    }
    if let Some(chains) = args.chains {
        if let Some(chain) = config.chain.as_mut() {
            chain.chains = Some(chains);
        }
    }
    if let Some(bp) = args.override_beta_prime {
        config.thermal.beta_prime = Some(bp);
        config.thermal.beta_prime_policy = None;
    }

    match run_experiment(&config, &args.out) {
        Ok(summary) => {
            for f in &summary.files {
                println!("wrote {}", f.display());
            }
            if let Some(bp) = summary.beta_prime {
                println!("beta_prime = {bp:.12e}");
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            exit_code_for(&e)
        }
    }
}

fn run_compare(args: &Args) -> ExitCode {
    if args.positional.len() != 2 {
        eprintln!("error: compare needs exactly two CSV paths\n");
        eprint!("{USAGE}");
        return ExitCode::from(1);
    }
    match compare_report(&args.positional[0], &args.positional[1], args.tv_threshold) {
        Ok(report) => {
            let summary = format!(
                "tv_distance = {:.6e}\nvariance_ratio = {:.6e}\ntv_threshold = {:.6e}\npass = {}\n",
                report.tv_distance, report.variance_ratio, report.tv_threshold, report.pass
            );
            print!("{summary}");
            let path = args.out.join("compare.toml");
            if std::fs::create_dir_all(&args.out).is_ok() && std::fs::write(&path, &summary).is_ok()
            {
                println!("wrote {}", path.display());
            }
            if report.pass {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(2)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            exit_code_for(&e)
        }
    }
}
