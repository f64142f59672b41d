use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use reasonconf_core::confidence::ConfidenceOptions;
use reasonconf_core::dpo::{
    pair_step, run_synthetic, StepStatus, SyntheticRunConfig, ToyPolicy,
};
use reasonconf_core::gateway::{
    BoundedGateway, HttpConfig, HttpGateway, MockFallback, MockGateway,
};
use reasonconf_core::pipeline::{
    build_pairs, curve_points, evaluate, generate_samples, judge_samples, read_jsonl,
    score_samples, to_jsonl,
};
use reasonconf_core::selection::{confidence_accuracy_curve, curve_csv};
use reasonconf_core::{
    DpoConfig, Gateway, Metric, PreferenceRecord, Question, SampleRecord, StepReport,
};

use crate::config::{FileConfig, FlagConfig, Settings};
use crate::error::CliError;
use crate::manifest::{manifest_path, Manifest};
use crate::{Cli, Command, MetricArg};

const MOCK_SCHEME: &str = "mock://";

/// Model access plus the fixture file behind it, if any.
struct Backend {
    gateway: BoundedGateway<Box<dyn Gateway>>,
    fixture: Option<PathBuf>,
}

fn connect(settings: &Settings, endpoint: Option<&str>, model: &str) -> Result<Backend, CliError> {
    let endpoint = endpoint.ok_or_else(|| {
        CliError::Usage("no endpoint: pass --endpoint, set REASONCONF_ENDPOINT or the config key".into())
    })?;
    let (inner, fixture): (Box<dyn Gateway>, _) = match endpoint.strip_prefix(MOCK_SCHEME) {
        Some(path) => {
            let path = PathBuf::from(path);
            let mock = MockGateway::load(&path, MockFallback::Seeded(settings.seed))
                .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
            (Box::new(mock), Some(path))
        }
        None => {
            let mut cfg = HttpConfig::new(endpoint, model);
            cfg.api_key = settings.api_key.clone();
            cfg.timeout = std::time::Duration::from_secs(settings.timeout_secs);
            let http = HttpGateway::new(cfg).map_err(|e| CliError::Gateway(e.to_string()))?;
            (Box::new(http), None)
        }
    };
    Ok(Backend {
        gateway: BoundedGateway::new(inner, settings.parallelism),
        fixture,
    })
}

fn read_text(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path)
        .map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))
}

fn read_records<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<T>, CliError> {
    read_jsonl(&read_text(path)?)
        .map_err(|e| CliError::pipeline(&path.display().to_string(), e))
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)
            .map_err(|e| CliError::Invariant(format!("cannot create {}: {e}", dir.display())))?;
    }
    std::fs::write(path, text)
        .map_err(|e| CliError::Invariant(format!("cannot write {}: {e}", path.display())))
}

#[derive(Serialize)]
struct RunSettings<'a, T: Serialize> {
    settings: &'a Settings,
    command: T,
}

struct Run<'a> {
    settings: Settings,
    argv: &'a [String],
}

impl Run<'_> {
    fn finish<T: Serialize>(
        &self,
        command: &str,
        inputs: &[&Path],
        outputs: &[&Path],
        extra: T,
    ) -> Result<(), CliError> {
        let settings = serde_json::to_value(RunSettings {
            settings: &self.settings,
            command: extra,
        })
        .expect("settings serialize");
        Manifest::new(command, self.argv, inputs, outputs, settings, self.settings.seed)?.write()
    }
}

pub fn run(cli: Cli, argv: &[String]) -> Result<(), CliError> {
    let file = match &cli.global.config {
        Some(p) => FileConfig::load(p)?,
        None => FileConfig::default(),
    };
    let g = cli.global;
    let flags = FlagConfig {
        endpoint: g.endpoint,
        model: g.model,
        api_key: g.api_key,
        judge_endpoint: g.judge_endpoint,
        judge_model: g.judge_model,
        parallelism: g.parallelism,
        timeout_secs: g.timeout_secs,
        seed: g.seed,
    };
    let settings = Settings::resolve(file, |k| std::env::var(k).ok(), flags);
    let run = Run { settings, argv };
    let s = &run.settings;
    match cli.command {
        Command::Generate {
            questions,
            out,
            preset,
            n,
        } => {
            let mut cfg = s.preset(&preset)?;
            if let Some(n) = n {
                cfg.n = n;
            }
            cfg.seed = Some(s.seed);
            cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
            let qs: Vec<Question> = read_records(&questions)?;
            let records = if qs.is_empty() {
                log::warn!("{} holds no questions; writing an empty sample file", questions.display());
                Vec::new()
            } else {
                let backend = connect(s, s.endpoint.as_deref(), &s.model)?;
                generate_samples(&qs, &backend.gateway, &cfg, s.parallelism)
                    .map_err(|e| CliError::pipeline(&questions.display().to_string(), e))?
            };
            let parse_failures = records.iter().filter(|r| !r.is_parsed()).count();
            if parse_failures > 0 {
                log::warn!("{parse_failures} of {} samples did not parse", records.len());
            }
            write_text(&out, &to_jsonl(&records))?;
            log::info!("wrote {} samples to {}", records.len(), out.display());
            let fixture = mock_fixture(s);
            let mut inputs = vec![questions.as_path()];
            inputs.extend(fixture.as_deref());
            run.finish("generate", &inputs, &[&out], &cfg)
        }
        Command::Score {
            samples,
            out,
            method,
        } => {
            let records: Vec<SampleRecord> = read_records(&samples)?;
            let opts = ConfidenceOptions {
                top_k: s.top_k,
                max_distractors: s.max_distractors,
            };
            let method = method.into();
            let needs_calls = records
                .iter()
                .any(|r| r.is_parsed() && r.confidence.as_ref().is_none_or(|c| c.method != method));
            let (scored, stats) = if needs_calls {
                let backend = connect(s, s.endpoint.as_deref(), &s.model)?;
                score_samples(&records, &backend.gateway, method, &opts, s.parallelism)
                    .map_err(|e| CliError::pipeline(&samples.display().to_string(), e))?
            } else {
                let none = NoGateway;
                score_samples(&records, &none, method, &opts, 1)
                    .map_err(|e| CliError::pipeline(&samples.display().to_string(), e))?
            };
            if stats.skipped_already_scored > 0 {
                log::warn!(
                    "{} samples already scored with this method; left unchanged",
                    stats.skipped_already_scored
                );
            }
            log::info!(
                "scored {} samples: {} reasoning calls, {} answer calls",
                stats.scored,
                stats.reasoning_calls,
                stats.answer_calls
            );
            write_text(&out, &to_jsonl(&scored))?;
            let fixture = mock_fixture(s);
            let mut inputs = vec![samples.as_path()];
            inputs.extend(fixture.as_deref());
            run.finish("score", &inputs, &[&out], serde_json::json!({"method": method, "stats": stats}))
        }
        Command::Judge { samples, out } => {
            let records: Vec<SampleRecord> = read_records(&samples)?;
            let endpoint = s.judge_endpoint.as_deref().or(s.endpoint.as_deref());
            let model = s.judge_model.clone().unwrap_or_else(|| s.model.clone());
            let backend = connect(s, endpoint, &model)?;
            let judged = judge_samples(&records, &backend.gateway, s.parallelism)
                .map_err(|e| CliError::pipeline(&samples.display().to_string(), e))?;
            write_text(&out, &to_jsonl(&judged))?;
            let mut inputs = vec![samples.as_path()];
            inputs.extend(backend.fixture.as_deref());
            run.finish("judge", &inputs, &[&out], serde_json::json!({"judge_model": model}))
        }
        Command::Pairs { scored, out, rule } => {
            let records: Vec<SampleRecord> = read_records(&scored)?;
            let rule = rule.into();
            let (pairs, stats) = build_pairs(&records, rule)
                .map_err(|e| CliError::pipeline(&scored.display().to_string(), e))?;
            log::info!(
                "{} pairs from {} questions ({} without a pair)",
                stats.pairs,
                stats.questions,
                stats.no_pair
            );
            write_text(&out, &to_jsonl(&pairs))?;
            run.finish("pairs", &[&scored], &[&out], serde_json::json!({"rule": rule, "stats": stats}))
        }
        Command::TrainToy {
            out,
            policy_out,
            pairs,
            steps,
            learning_rate,
            beta,
            loss_form,
            scorer,
            samples_per_step,
            epochs,
        } => {
            let dpo = DpoConfig {
                beta,
                loss_form: loss_form.into(),
                learning_rate,
                seed: s.seed,
            };
            dpo.validate().map_err(|e| CliError::Usage(e.to_string()))?;
            let (reports, policy, summary) = match &pairs {
                Some(path) => {
                    let records: Vec<PreferenceRecord> = read_records(path)?;
                    train_on_pairs(&records, &dpo, epochs)?
                }
                None => {
                    if samples_per_step < 2 {
                        return Err(CliError::Usage("--samples-per-step must be at least 2".into()));
                    }
                    let cfg = SyntheticRunConfig {
                        dpo,
                        steps,
                        samples_per_step,
                        scorer: scorer.into(),
                        ..SyntheticRunConfig::default()
                    };
                    let r = run_synthetic(&cfg).map_err(|e| CliError::Invariant(e.to_string()))?;
                    let summary = serde_json::json!({
                        "p_correct_initial": r.p_correct_initial,
                        "p_correct_final": r.p_correct_final,
                        "greedy_score_initial": r.greedy_score_initial,
                        "greedy_score_final": r.greedy_score_final,
                    });
                    (r.reports, r.policy, summary)
                }
            };
            write_text(&out, &to_jsonl(&reports))?;
            let mut policy_text = serde_json::to_string_pretty(&policy).expect("policy serializes");
            policy_text.push('\n');
            write_text(&policy_out, &policy_text)?;
            log::info!("training summary: {summary}");
            let inputs: Vec<&Path> = pairs.as_deref().into_iter().collect();
            run.finish(
                "train-toy",
                &inputs,
                &[&out, &policy_out],
                serde_json::json!({"dpo": dpo, "summary": summary}),
            )
        }
        Command::Eval {
            samples,
            selector,
            best_of,
            out,
        } => {
            let records: Vec<SampleRecord> = read_records(&samples)?;
            let report = evaluate(&records, selector.into(), best_of)
                .map_err(|e| CliError::pipeline(&samples.display().to_string(), e))?;
            let mut text = serde_json::to_string_pretty(&report).expect("report serializes");
            text.push('\n');
            match &out {
                Some(path) => {
                    write_text(path, &text)?;
                    run.finish("eval", &[&samples], &[path], serde_json::json!({}))?;
                }
                None => print!("{text}"),
            }
            Ok(())
        }
        Command::Curves {
            samples,
            out,
            bins,
            by,
        } => {
            if bins == 0 {
                return Err(CliError::Usage("--bins must be positive".into()));
            }
            let records: Vec<SampleRecord> = read_records(&samples)?;
            let metric = match by {
                MetricArg::Answer => Metric::AnswerLevel,
                MetricArg::Reasoning => Metric::ReasoningLevel,
                MetricArg::Combined => Metric::Combined,
            };
            let (points, skipped) = curve_points(&records, metric);
            if skipped > 0 {
                log::warn!("{skipped} samples lack a score, correctness or verdict; left out");
            }
            let rows = confidence_accuracy_curve(&points, bins)
                .map_err(|e| CliError::Input(e.to_string()))?;
            write_text(&out, &curve_csv(&rows))?;
            run.finish("curves", &[&samples], &[&out], serde_json::json!({"bins": bins, "by": metric}))
        }
        Command::Replay { manifest } => replay(&manifest),
    }
}

fn mock_fixture(s: &Settings) -> Option<PathBuf> {
    s.endpoint
        .as_deref()
        .and_then(|e| e.strip_prefix(MOCK_SCHEME))
        .map(PathBuf::from)
}

/// Stands in when every record is already scored, so no endpoint is needed.
struct NoGateway;

impl Gateway for NoGateway {
    fn generate(
        &self,
        _: &str,
        _: &reasonconf_core::SamplingConfig,
    ) -> Result<Vec<reasonconf_core::Completion>, reasonconf_core::GatewayError> {
        Err(reasonconf_core::GatewayError::InvalidRequest("no endpoint configured".into()))
    }

    fn next_token_logprobs(
        &self,
        _: &reasonconf_core::LogprobRequest,
    ) -> Result<Vec<reasonconf_core::TokenLogprob>, reasonconf_core::GatewayError> {
        Err(reasonconf_core::GatewayError::InvalidRequest("no endpoint configured".into()))
    }
}

/// Symbols of the toy tokenizer: 16 hash buckets.
const TOY_VOCAB: [&str; 16] = [
    "0", "1", "2", "3", "4", "5", "6", "7", "8", "9", "a", "b", "c", "d", "e", "f",
];
const TOY_MAX_TOKENS: usize = 16;

/// Maps each whitespace-separated word to one of 16 buckets.
fn toy_tokens(text: &str) -> Vec<usize> {
    text.split_whitespace()
        .take(TOY_MAX_TOKENS)
        .map(|w| (Sha256::digest(w.as_bytes())[0] % 16) as usize)
        .collect()
}

fn train_on_pairs(
    records: &[PreferenceRecord],
    dpo: &DpoConfig,
    epochs: u64,
) -> Result<(Vec<StepReport>, ToyPolicy, serde_json::Value), CliError> {
    let reference = ToyPolicy::uniform(&TOY_VOCAB, 1).map_err(|e| CliError::Invariant(e.to_string()))?;
    let mut policy = reference.clone();
    if records.is_empty() {
        log::warn!("no preference pairs; nothing to train, policy left at initialization");
        return Ok((Vec::new(), policy, serde_json::json!({"pairs": 0})));
    }
    let mut reports = Vec::new();
    let mut step = 0;
    for _ in 0..epochs {
        for rec in records {
            let w = toy_tokens(&rec.chosen);
            let l = toy_tokens(&rec.rejected);
            let outcome = pair_step(&mut policy, &reference, &w, &l, dpo)
                .map_err(|e| CliError::Invariant(e.to_string()))?;
            reports.push(StepReport {
                step,
                question_id: rec.meta.question_id.clone(),
                status: if outcome.step_size.is_some() {
                    StepStatus::Updated
                } else {
                    StepStatus::NoDescent
                },
                loss_before: Some(outcome.loss_before),
                loss_after: Some(outcome.loss_after),
                margin_before: Some(outcome.margin_before),
                margin_after: Some(outcome.margin_after),
                pair_scores: Some([rec.meta.scores.chosen, rec.meta.scores.rejected]),
                step_size: outcome.step_size,
            });
            step += 1;
        }
    }
    Ok((reports, policy, serde_json::json!({"pairs": records.len(), "epochs": epochs})))
}

fn replay(path: &Path) -> Result<(), CliError> {
    let manifest = Manifest::load(path)?;
    let changed = manifest.changed_inputs();
    if !changed.is_empty() {
        return Err(CliError::Input(format!(
            "inputs changed since the recorded run: {}",
            changed.join(", ")
        )));
    }
    let cli = crate::parse_argv(&manifest.argv)?;
    if matches!(cli.command, Command::Replay { .. }) {
        return Err(CliError::Input("manifest records a replay".into()));
    }
    run(cli, &manifest.argv)?;
    let differing = manifest.changed_outputs();
    if !differing.is_empty() {
        return Err(CliError::Invariant(format!(
            "replay produced different outputs: {}",
            differing.join(", ")
        )));
    }
    log::info!(
        "replay of {} reproduced {} output(s)",
        manifest_path(Path::new(&manifest.outputs[0].path)).display(),
        manifest.outputs.len()
    );
    Ok(())
}
