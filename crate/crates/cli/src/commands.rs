//! The four subcommands.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;

use kge::checks::{analysis_suite, gradcheck_suite, AnalysisConfig, GradSuiteConfig};
use kge::eval::{evaluate_filtered, Side};
use kge::kg::{augment, build_filter_index, KnowledgeGraph, Split};
use kge::model::Model;
use kge::numerics::checkpoint;

use crate::config::{RunConfig, UsageError};
use crate::{AnalyzeArgs, EvalArgs, GradcheckArgs, Outcome, TrainArgs};

pub const CONFIG_FILE: &str = "config.txt";
pub const CHECKPOINT_FILE: &str = "model.kge";
pub const EPOCH_LOG_FILE: &str = "epochs.jsonl";

fn load_data(dir: Option<&Path>) -> Result<KnowledgeGraph> {
    let dir =
        dir.ok_or_else(|| UsageError("no dataset directory given (--data or `data =`)".into()))?;
    Ok(KnowledgeGraph::load_dir(dir)?)
}

fn emit<T: Serialize>(value: &T, out: Option<&PathBuf>) -> Result<()> {
    let json = serde_json::to_string_pretty(value)?;
    println!("{json}");
    if let Some(path) = out {
        fs::write(path, format!("{json}\n"))
            .with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}

pub fn train(args: TrainArgs) -> Result<Outcome> {
    let mut cfg = RunConfig::default();
    if let Some(path) = &args.config {
        let text =
            fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        cfg.apply_text(&text, path)?;
    }
    for (key, value) in args.overrides()? {
        cfg.set(&key, &value)?;
    }
    cfg.train.validate()?;
    for note in cfg.train.off_grid_settings() {
        eprintln!("warning: {note} is outside the standard search grid");
    }

    let kg = load_data(cfg.data.as_deref())?;
    let model = Model::new(
        cfg.model.clone(),
        kg.num_entities(),
        kg.num_relations(),
        cfg.train.seed,
    )?;
    let store = model.init_params(cfg.train.seed)?;

    fs::create_dir_all(&cfg.out).with_context(|| format!("creating {}", cfg.out.display()))?;
    fs::write(cfg.out.join(CONFIG_FILE), cfg.to_text())?;
    let log_path = cfg.out.join(EPOCH_LOG_FILE);
    let mut log =
        fs::File::create(&log_path).with_context(|| format!("creating {}", log_path.display()))?;
    let mut write_err = None;
    let outcome = kge::train::train(&model, &kg, store, &cfg.train, |entry| {
        let line = serde_json::to_string(entry).expect("epoch log serializes");
        if let Err(e) = writeln!(log, "{line}") {
            write_err.get_or_insert(e);
        }
        match entry.valid_mrr {
            Some(mrr) => eprintln!(
                "epoch {:>4}  loss {:.6}  valid mrr {:.4}",
                entry.epoch, entry.loss, mrr
            ),
            None => eprintln!("epoch {:>4}  loss {:.6}", entry.epoch, entry.loss),
        }
    })?;
    if let Some(e) = write_err {
        return Err(e).with_context(|| format!("writing {}", log_path.display()));
    }
    checkpoint::save(&outcome.best, &cfg.out.join(CHECKPOINT_FILE))?;
    eprintln!(
        "saved epoch {} to {}",
        outcome.best_epoch,
        cfg.out.join(CHECKPOINT_FILE).display()
    );
    Ok(Outcome::Ok)
}

fn parse_split(s: &str) -> Result<Split, UsageError> {
    match s {
        "train" => Ok(Split::Train),
        "valid" => Ok(Split::Valid),
        "test" => Ok(Split::Test),
        other => Err(UsageError(format!(
            "unknown split '{other}' (train, valid, test)"
        ))),
    }
}

pub fn eval(args: EvalArgs) -> Result<Outcome> {
    let split = parse_split(&args.split)?;
    let side: Side = args
        .side
        .parse()
        .map_err(|e| UsageError(format!("bad --side '{}': {e}", args.side)))?;
    let config_path = args.run.join(CONFIG_FILE);
    let text = fs::read_to_string(&config_path)
        .with_context(|| format!("reading {}", config_path.display()))?;
    let mut cfg = RunConfig::default();
    cfg.apply_text(&text, &config_path)?;
    let kg = load_data(args.data.as_deref().or(cfg.data.as_deref()))?;

    let model = Model::new(
        cfg.model.clone(),
        kg.num_entities(),
        kg.num_relations(),
        cfg.train.seed,
    )?;
    let mut store = model.init_params(cfg.train.seed)?;
    store.load_values_from(&checkpoint::load(&args.run.join(CHECKPOINT_FILE))?)?;
    let graph = augment(&kg);
    let frozen = model.freeze(&store, &graph)?;
    let filter = build_filter_index(&kg);
    let report = evaluate_filtered(&frozen, &kg, split, &filter, side, args.category_threshold)?;
    emit(&report, args.out.as_ref())?;
    Ok(Outcome::Ok)
}

fn parse_points(items: &[String]) -> Result<Vec<(usize, usize)>, UsageError> {
    items
        .iter()
        .map(|s| {
            let bad = || UsageError(format!("expected n:k, got '{s}'"));
            let (n, k) = s.split_once(':').ok_or_else(bad)?;
            Ok((
                n.trim().parse().map_err(|_| bad())?,
                k.trim().parse().map_err(|_| bad())?,
            ))
        })
        .collect()
}

pub fn analyze(args: AnalyzeArgs) -> Result<Outcome> {
    let cfg = AnalysisConfig {
        prop1_max_n: args.max_n,
        prop2: parse_points(&args.chains)?,
        prop3: parse_points(&args.points)?,
        samples: args.samples,
        seed: args.seed,
        ..AnalysisConfig::default()
    };
    let report = analysis_suite(&cfg)?;
    emit(&report, args.out.as_ref())?;
    Ok(if report.passed {
        Outcome::Ok
    } else {
        Outcome::CheckFailed
    })
}

#[derive(Serialize)]
struct GradSummary {
    tolerance: f64,
    passed: bool,
    cases: Vec<kge::checks::GradCase>,
}

pub fn gradcheck(args: GradcheckArgs) -> Result<Outcome> {
    if args.dim == 0 || args.step <= 0.0 || args.tolerance <= 0.0 {
        return Err(UsageError("--dim, --step and --tolerance must be positive".into()).into());
    }
    let cfg = GradSuiteConfig {
        dim: args.dim,
        seed: args.seed,
        h: args.step,
        tolerance: args.tolerance,
    };
    let cases = gradcheck_suite(&cfg)?;
    let passed = cases.iter().all(|c| c.report.passed);
    emit(
        &GradSummary {
            tolerance: args.tolerance,
            passed,
            cases,
        },
        args.out.as_ref(),
    )?;
    Ok(if passed {
        Outcome::Ok
    } else {
        Outcome::CheckFailed
    })
}
