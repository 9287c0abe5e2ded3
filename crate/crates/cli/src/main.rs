use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use sacg_core::config::{EvalConfig, ExperimentConfig};
use sacg_core::experiment::{
    evaluate_run, gen_data, probe_run, train_classifier_run, train_sacg_run, transfer_file, EvaluateArgs,
};
use sacg_core::io::write_json;
use sacg_core::AblationKind;

#[derive(Parser)]
#[command(name = "sacg", version, about = "Syntax-aware controllable generation for text style transfer")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic two-style corpus split 80/10/10.
    GenData {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 2500)]
        count: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Pretrain and freeze the dependency-aware style classifier.
    TrainClassifier {
        #[arg(long)]
        config: PathBuf,
    },
    /// Train the generator against a frozen classifier.
    TrainSacg {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        classifier: PathBuf,
        /// full, no_syntax_encoder or no_syntax_both.
        #[arg(long)]
        ablation: Option<String>,
    },
    /// Transfer every sentence of a corpus toward one style.
    Transfer {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_parser = clap::value_parser!(u8).range(0..=1))]
        target_style: u8,
        #[arg(long)]
        out: PathBuf,
    },
    /// Transfer the test split and compute every metric.
    Evaluate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        classifier: PathBuf,
        #[arg(long)]
        test: PathBuf,
        #[arg(long)]
        refs: Option<PathBuf>,
        #[arg(long)]
        trees: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Corpus for the n-gram language model; defaults to the generator's training split.
        #[arg(long)]
        lm_train: Option<PathBuf>,
        /// Experiment config whose [eval] section is used.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Compare accuracy on original and word-shuffled sentences.
    Probe {
        #[arg(long)]
        classifier: PathBuf,
        #[arg(long)]
        test: PathBuf,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Also write the report as JSON here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn load_config(path: &Path) -> Result<ExperimentConfig> {
    ExperimentConfig::load(path).with_context(|| format!("loading {}", path.display()))
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::GenData { out, count, seed } => {
            let files = gen_data(&out, count, seed)?;
            println!("{}", serde_json::to_string_pretty(&files)?);
        }
        Command::TrainClassifier { config } => {
            let cfg = load_config(&config)?;
            let run = train_classifier_run(&cfg)?;
            println!(
                "classifier: best validation accuracy {:.4} at epoch {} -> {}",
                run.log.best_val_accuracy,
                run.log.best_epoch,
                run.checkpoint.display()
            );
        }
        Command::TrainSacg {
            config,
            classifier,
            ablation,
        } => {
            let cfg = load_config(&config)?;
            let kind = ablation.map(|a| a.parse::<AblationKind>()).transpose()?;
            let run = train_sacg_run(&cfg, &classifier, kind)?;
            if let Some(last) = run.log.epochs.last() {
                println!(
                    "{}: epoch {} loss {:.4} (rec {:.4}, cla {:.4}) val acc {:.3} self-BLEU {:.2}",
                    run.model.kind(),
                    last.epoch,
                    last.loss,
                    last.loss_rec,
                    last.loss_cla,
                    last.val_accuracy,
                    last.val_self_bleu
                );
            }
            println!("generator -> {}", run.checkpoint.display());
        }
        Command::Transfer {
            model,
            input,
            target_style,
            out,
        } => {
            let n = transfer_file(&model, &input, target_style as usize, &out)?;
            println!("transferred {n} sentences -> {}", out.display());
        }
        Command::Evaluate {
            model,
            classifier,
            test,
            refs,
            trees,
            out,
            lm_train,
            config,
        } => {
            let eval = match config {
                Some(p) => load_config(&p)?.eval,
                None => EvalConfig::default(),
            };
            let report = evaluate_run(&EvaluateArgs {
                model: &model,
                classifier: &classifier,
                test: &test,
                refs: refs.as_deref(),
                trees: trees.as_deref(),
                out_dir: &out,
                lm_train: lm_train.as_deref(),
                eval: &eval,
            })?;
            print!("{}", report.to_table("sacg"));
        }
        Command::Probe {
            classifier,
            test,
            seed,
            out,
        } => {
            let report = probe_run(&classifier, &test, seed)?;
            if let Some(path) = out {
                write_json(&path, &report)?;
            }
            println!("{}", serde_json::to_string_pretty(&report)?);
        }
    }
    Ok(())
}

fn exit_code(err: &anyhow::Error) -> u8 {
    err.chain()
        .find_map(|e| e.downcast_ref::<sacg_core::Error>())
        .map_or(1, |e| e.exit_code() as u8)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
