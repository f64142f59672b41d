//! `reasonconf`: sample, score, pair, train, evaluate and tabulate.

mod commands;
mod config;
mod error;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use reasonconf_core::dpo::Scorer;
use reasonconf_core::{LossForm, PairRule, ReasoningMethod, Selector};

use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(name = "reasonconf", version, about = "Confidence-guided self-training pipeline")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// TOML config file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Model endpoint: an OpenAI-compatible base URL or `mock://<fixtures.jsonl>`.
    #[arg(long, global = true)]
    pub endpoint: Option<String>,
    #[arg(long, global = true)]
    pub model: Option<String>,
    #[arg(long, global = true)]
    pub api_key: Option<String>,
    /// Endpoint for reasoning judgments; defaults to `--endpoint`.
    #[arg(long, global = true)]
    pub judge_endpoint: Option<String>,
    #[arg(long, global = true)]
    pub judge_model: Option<String>,
    /// Maximum concurrent gateway calls.
    #[arg(long, global = true)]
    pub parallelism: Option<usize>,
    #[arg(long, global = true)]
    pub timeout_secs: Option<u64>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Monolithic,
    Statementwise,
}

impl From<MethodArg> for ReasoningMethod {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Monolithic => ReasoningMethod::Monolithic,
            MethodArg::Statementwise => ReasoningMethod::StatementWise,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RuleArg {
    CorePo,
    ScPo,
}

impl From<RuleArg> for PairRule {
    fn from(r: RuleArg) -> Self {
        match r {
            RuleArg::CorePo => PairRule::CorePo,
            RuleArg::ScPo => PairRule::ScPo,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SelectorArg {
    Greedy,
    Sc,
    Ptrue,
    BestAnswer,
    BestReasoning,
}

impl From<SelectorArg> for Selector {
    fn from(s: SelectorArg) -> Self {
        match s {
            SelectorArg::Greedy => Selector::Greedy,
            SelectorArg::Sc => Selector::Sc,
            SelectorArg::Ptrue => Selector::Ptrue,
            SelectorArg::BestAnswer => Selector::BestAnswer,
            SelectorArg::BestReasoning => Selector::BestReasoning,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MetricArg {
    Answer,
    Reasoning,
    Combined,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LossFormArg {
    Canonical,
    AsPrinted,
}

impl From<LossFormArg> for LossForm {
    fn from(l: LossFormArg) -> Self {
        match l {
            LossFormArg::Canonical => LossForm::Canonical,
            LossFormArg::AsPrinted => LossForm::AsPrinted,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ScorerArg {
    Oracle,
    AnswerOnly,
}

impl From<ScorerArg> for Scorer {
    fn from(s: ScorerArg) -> Self {
        match s {
            ScorerArg::Oracle => Scorer::Oracle,
            ScorerArg::AnswerOnly => Scorer::AnswerOnly,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample outputs for each question.
    Generate {
        #[arg(long)]
        questions: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Sampling preset: train, scale or greedy.
        #[arg(long, default_value = "train")]
        preset: String,
        /// Override the preset's sample count.
        #[arg(long)]
        n: Option<usize>,
    },
    /// Attach confidence reports to parsed samples.
    Score {
        #[arg(long)]
        samples: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value = "monolithic")]
        method: MethodArg,
    },
    /// Label reasoning correctness with the judge model.
    Judge {
        #[arg(long)]
        samples: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Build one preference pair per question.
    Pairs {
        #[arg(long)]
        scored: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value = "core-po")]
        rule: RuleArg,
    },
    /// Preference training on the tabular toy policy.
    TrainToy {
        /// Training log (JSONL).
        #[arg(long)]
        out: PathBuf,
        /// Final policy (JSON).
        #[arg(long)]
        policy_out: PathBuf,
        /// Train offline on an exported preference file instead of the
        /// synthetic online task.
        #[arg(long)]
        pairs: Option<PathBuf>,
        #[arg(long, default_value_t = 200)]
        steps: u64,
        #[arg(long, default_value_t = 2.0)]
        learning_rate: f64,
        #[arg(long, default_value_t = 0.1)]
        beta: f64,
        #[arg(long, value_enum, default_value = "canonical")]
        loss_form: LossFormArg,
        #[arg(long, value_enum, default_value = "oracle")]
        scorer: ScorerArg,
        #[arg(long, default_value_t = 8)]
        samples_per_step: usize,
        /// Passes over the preference file.
        #[arg(long, default_value_t = 1)]
        epochs: u64,
    },
    /// Select one sample per question and report accuracy.
    Eval {
        #[arg(long)]
        samples: PathBuf,
        #[arg(long, value_enum)]
        selector: SelectorArg,
        #[arg(long, default_value_t = reasonconf_core::selection::DEFAULT_BEST_OF)]
        best_of: usize,
        /// Write the report here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Confidence-binned answer and reasoning accuracy (CSV).
    Curves {
        #[arg(long)]
        samples: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = reasonconf_core::selection::DEFAULT_BINS)]
        bins: usize,
        /// Confidence to bin by.
        #[arg(long, value_enum, default_value = "answer")]
        by: MetricArg,
    },
    /// Re-run the command recorded in a manifest and check its outputs.
    Replay {
        #[arg(long)]
        manifest: PathBuf,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let argv: Vec<String> = std::env::args().skip(1).collect();
    let cli = Cli::parse();
    match commands::run(cli, &argv) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            log::error!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

/// Parses a stored argument vector, as for replay.
pub fn parse_argv(argv: &[String]) -> Result<Cli, CliError> {
    Cli::try_parse_from(std::iter::once("reasonconf".to_string()).chain(argv.iter().cloned()))
        .map_err(|e| CliError::Usage(e.to_string()))
}
