use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use gap_core::experiment::{
    output_dir, result_document, run_experiment, write_result, ExperimentConfig, ExperimentResult, Problem, OUTPUT_ENV,
};
use serde_json::Value;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser, Debug)]
#[command(name = "gap-kit", version, about = "Generalized alternating projection experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args, Debug)]
struct OutputArgs {
    /// Directory for result files.
    #[arg(long, env = OUTPUT_ENV)]
    out: Option<PathBuf>,
    /// Print the result document to standard output.
    #[arg(long)]
    json: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run one experiment described by a JSON config file.
    Run {
        config: PathBuf,
        /// Override the seed in the config.
        #[arg(long)]
        seed: Option<u64>,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Check closed-form spectra against numerical ones on a seeded batch.
    Spectrum {
        /// A spectrum_check config, or an array of them.
        #[arg(long)]
        batch: PathBuf,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Sweep relaxation parameters around the optimum.
    Sweep {
        config: PathBuf,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Reproduce the cone/line counter-example in exact arithmetic.
    Counterexample {
        #[arg(long, default_value_t = 50)]
        iters: usize,
        #[command(flatten)]
        output: OutputArgs,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn read_json(path: &Path) -> Result<Value> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn parse_config(value: Value, path: &Path) -> Result<ExperimentConfig> {
    ExperimentConfig::from_json(&value.to_string()).with_context(|| format!("invalid config {}", path.display()))
}

fn file_stem(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "result".into())
}

/// Returns whether every verdict passed.
fn execute(command: Command) -> Result<bool> {
    match command {
        Command::Run { config, seed, output } => {
            let mut cfg = parse_config(read_json(&config)?, &config)?;
            if let Some(s) = seed {
                cfg = cfg.with_seed(s);
            }
            let result = run_experiment(&cfg)?;
            emit(&[(file_stem(&config), result)], &output)
        }
        Command::Spectrum { batch, output } => {
            let doc = read_json(&batch)?;
            let entries = match doc {
                Value::Array(items) => items,
                other => vec![other],
            };
            if entries.is_empty() {
                bail!("{} holds no configs", batch.display());
            }
            let stem = file_stem(&batch);
            let single = entries.len() == 1;
            let mut configs = Vec::with_capacity(entries.len());
            for (i, mut entry) in entries.into_iter().enumerate() {
                if let Value::Object(map) = &mut entry {
                    map.entry("kind").or_insert_with(|| Value::from("spectrum_check"));
                }
                let cfg = parse_config(entry, &batch)?;
                if !matches!(cfg.problem, Problem::SpectrumCheck { .. }) {
                    bail!("entry {i} of {} is a {} config, not spectrum_check", batch.display(), cfg.kind());
                }
                let name = if single { stem.clone() } else { format!("{stem}_{i}") };
                configs.push((name, cfg));
            }
            let results = run_parallel(configs)?;
            emit(&results, &output)
        }
        Command::Sweep { config, output } => {
            let cfg = parse_config(read_json(&config)?, &config)?;
            if !matches!(cfg.problem, Problem::ParamSweep { .. }) {
                bail!("{} is a {} config, not param_sweep", config.display(), cfg.kind());
            }
            let result = run_experiment(&cfg)?;
            emit(&[(file_stem(&config), result)], &output)
        }
        Command::Counterexample { iters, output } => {
            let mut value = serde_json::json!({ "kind": "counterexample" });
            value["iterations"] = iters.into();
            let cfg = ExperimentConfig::from_json(&value.to_string())?;
            let result = run_experiment(&cfg)?;
            emit(&[("counterexample".into(), result)], &output)
        }
    }
}

/// Independent experiments run on separate threads; each is sequential.
fn run_parallel(configs: Vec<(String, ExperimentConfig)>) -> Result<Vec<(String, ExperimentResult)>> {
    std::thread::scope(|scope| {
        let handles: Vec<_> = configs
            .iter()
            .map(|(name, cfg)| scope.spawn(move || run_experiment(cfg).map(|r| (name.clone(), r))))
            .collect();
        handles
            .into_iter()
            .map(|h| match h.join() {
                Ok(r) => r.map_err(anyhow::Error::from),
                Err(_) => bail!("experiment thread panicked"),
            })
            .collect()
    })
}

fn emit(results: &[(String, ExperimentResult)], output: &OutputArgs) -> Result<bool> {
    let dir = output_dir(output.out.as_deref());
    let mut all_pass = true;
    for (stem, result) in results {
        let files = write_result(&dir, stem, result)?;
        if output.json {
            println!("{}", serde_json::to_string_pretty(&result_document(result))?);
        } else {
            summarize(stem, result, &files.json);
        }
        all_pass &= result.passed();
    }
    Ok(all_pass)
}

fn summarize(stem: &str, result: &ExperimentResult, json: &Path) {
    let verdict = if result.passed() { "PASS" } else { "FAIL" };
    println!("{verdict} {stem} ({})", result.kind);
    for c in &result.checks {
        println!("  [{}] {}: {}", if c.passed { "ok" } else { "FAIL" }, c.name, c.detail);
    }
    println!("  wrote {}", json.display());
}
