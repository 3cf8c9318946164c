use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use ersn_core::classical::Family;
use ersn_core::classifier::save_bundle;
use ersn_core::corpus::{balance_classes, load_dataset, split, write_dataset, Dataset};
use ersn_core::eval::MetricsReport;
use ersn_core::experiment::{evaluate_classifier, grid_scores_csv, tokenize_dataset, train_classical, train_textcnn};
use ersn_core::textcnn::{EmbeddingMode, TrainHistory};
use serde::Serialize;

use crate::config::{file_sha256, EmbeddingSpec, RunConfig, RunDir, VERSION};
use crate::exit;

#[derive(clap::Args)]
pub struct Args {
    /// svm, logreg (lr), nb, dt, knn or textcnn.
    #[arg(long)]
    family: String,
    /// Configured embedding name, name=path, or a vector file.
    #[arg(long)]
    embedding: Option<String>,
    /// TextCNN only: learned_from_vocab or pretrained_frozen.
    #[arg(long)]
    embedding_mode: Option<String>,
    /// Labeled JSONL dataset (overrides `data` in the config).
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Reuse an existing run directory.
    #[arg(long)]
    force: bool,
}

#[derive(Serialize)]
struct RunInfo<'a> {
    command: &'a str,
    version: &'a str,
    family: &'a str,
    data: &'a Path,
    data_sha256: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    embedding: Option<&'a EmbeddingSpec>,
}

#[derive(Serialize)]
struct Resolved<'a> {
    run: RunInfo<'a>,
    config: &'a RunConfig,
}

#[derive(Serialize)]
struct Summary {
    family: String,
    variant: String,
    train: usize,
    val: usize,
    test: usize,
    validation: MetricsReport,
    test_metrics: MetricsReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    selected: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    best_epoch: Option<usize>,
}

enum Target {
    Classical(Family),
    TextCnn,
}

pub fn run(args: Args, config: Option<&Path>) -> Result<()> {
    let mut cfg = RunConfig::load(config)?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(d) = &args.data {
        cfg.data = Some(d.clone());
    }
    if let Some(o) = &args.out_dir {
        cfg.out_dir = o.clone();
    }
    let target = match args.family.as_str() {
        "textcnn" => Target::TextCnn,
        f => Target::Classical(f.parse().map_err(|_| exit::usage(format!("unknown family {f:?}")))?),
    };
    match (&target, &args.embedding_mode) {
        (Target::TextCnn, Some(m)) => {
            cfg.textcnn.embedding_mode = serde_json::from_value(serde_json::Value::String(m.clone()))
                .map_err(|_| exit::usage(format!("unknown embedding mode {m:?}")))?;
        }
        (Target::Classical(_), Some(_)) => return Err(exit::usage("--embedding-mode applies to textcnn only")),
        _ => {}
    }
    cfg.textcnn.seed = cfg.seed;
    let needs_table = match target {
        Target::Classical(_) => true,
        Target::TextCnn => cfg.textcnn.embedding_mode == EmbeddingMode::PretrainedFrozen,
    };
    let embedding = match (&args.embedding, needs_table) {
        (Some(e), true) => Some(cfg.embedding_spec(e)?),
        (None, true) => return Err(exit::usage(format!("{} needs --embedding", args.family))),
        (Some(_), false) => {
            log::warn!("--embedding ignored: learned_from_vocab trains its own embeddings");
            None
        }
        (None, false) => None,
    };
    let data_path = cfg
        .data
        .clone()
        .ok_or_else(|| exit::usage("no dataset: pass --data or set `data` in the config"))?;

    let dataset = load_dataset(&data_path)?;
    let dataset = Dataset::new(dataset.name(), cfg.seed, dataset.items().to_vec())?;
    let pp = cfg.preprocess_config()?;
    let table = match &embedding {
        Some(spec) => {
            let vocab: HashSet<String> = tokenize_dataset(&dataset, &pp).into_iter().flat_map(|(t, _)| t).collect();
            Some(spec.load(Some(&vocab))?)
        }
        None => None,
    };
    if let (Some(t), Target::TextCnn) = (&table, &target) {
        cfg.textcnn.emb_dim = t.dim();
    }

    let resolved = Resolved {
        run: RunInfo {
            command: "train",
            version: VERSION,
            family: &args.family,
            data: &data_path,
            data_sha256: file_sha256(&data_path)?,
            embedding: embedding.as_ref(),
        },
        config: &cfg,
    };
    let run_dir = RunDir::create(&cfg.out_dir, &resolved, args.force)?;

    let working = if cfg.balance {
        balance_classes(&dataset, cfg.seed)?
    } else {
        dataset
    };
    let parts = split(&working, &cfg.split_spec()?)?;
    write_dataset(&parts.test, run_dir.file("test.jsonl"))?;
    let train_docs = tokenize_dataset(&parts.train, &pp);
    let val_docs = tokenize_dataset(&parts.val, &pp);
    let test_docs = tokenize_dataset(&parts.test, &pp);

    let (classifier, scores, validation, selected, best_epoch) = match target {
        Target::Classical(family) => {
            let grid = cfg.grid(family)?;
            let t = table.as_deref().expect("classical families load a table");
            let (c, result) = train_classical(&grid, &train_docs, &val_docs, t, cfg.seed)
                .with_context(|| format!("training {}", family.display()))?;
            let validation = result.scores[result.best_index].validation;
            (c, grid_scores_csv(&result)?, validation, Some(result.best_point.to_string()), None)
        }
        Target::TextCnn => {
            let (c, history) = train_textcnn(&cfg.textcnn, &train_docs, &val_docs, table.as_deref())
                .context("training TextCNN")?;
            let validation = evaluate_classifier(&c, &val_docs, table.as_deref())?;
            (c, history_csv(&history)?, validation, None, Some(history.best_epoch))
        }
    };
    let test_metrics = evaluate_classifier(&classifier, &test_docs, table.as_deref())?;

    save_bundle(&classifier, run_dir.file("model.json"))?;
    fs::write(run_dir.file("scores.csv"), scores)?;
    let summary = Summary {
        family: classifier.meta.family.clone(),
        variant: variant_name(&classifier),
        train: train_docs.len(),
        val: val_docs.len(),
        test: test_docs.len(),
        validation,
        test_metrics,
        selected,
        best_epoch,
    };
    fs::write(run_dir.file("summary.json"), serde_json::to_string_pretty(&summary)? + "\n")?;
    eprintln!(
        "{}: test F1 {:.3}, accuracy {:.3}",
        summary.variant, test_metrics.f1, test_metrics.accuracy
    );
    println!("{}", run_dir.path.display());
    Ok(())
}

/// `SVM_w2v`, `TextCNN_voc`, `TextCNN_glove`, ...
pub fn variant_name(c: &ersn_core::classifier::TrainedClassifier) -> String {
    let family = match c.meta.family.parse::<Family>() {
        Ok(f) => f.display().to_string(),
        Err(_) => "TextCNN".to_string(),
    };
    match &c.meta.embedding {
        Some(e) => format!("{family}_{}", e.name),
        None => format!("{family}_voc"),
    }
}

fn history_csv(h: &TrainHistory) -> Result<String> {
    let mut out = String::from("epoch,train_loss,val_loss,val_f1,best\n");
    for e in &h.epochs {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            e.epoch,
            e.train_loss,
            e.val_loss,
            e.val_f1,
            e.epoch == h.best_epoch
        ));
    }
    Ok(out)
}
