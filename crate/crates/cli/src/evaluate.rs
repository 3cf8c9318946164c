use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{Context, Result};
use ersn_core::classical::{train_point, Family};
use ersn_core::classifier::{load_bundle, Model, TrainedClassifier};
use ersn_core::corpus::{balance_classes, kfold, load_dataset, Label};
use ersn_core::embeddings::EmbeddingTable;
use ersn_core::ensemble::{tally, TieRule};
use ersn_core::eval::report::{render_table, EnsembleRow, ResultGrid, TableBody, TableRequest};
use ersn_core::eval::{evaluate, CvReport, MetricsReport};
use ersn_core::experiment::{doc_features, tokenize_dataset, train_textcnn, Doc};
use serde::Serialize;

use crate::config::{file_sha256, EmbeddingSpec, RunConfig, RunDir, VERSION};
use crate::exit;
use crate::train::variant_name;

#[derive(Clone, Copy, PartialEq, Eq, clap::ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Score the bundles as trained on a held-out test file.
    Split,
    /// Refit each bundle's selected configuration on k folds.
    Cv,
}

#[derive(clap::Args)]
pub struct Args {
    /// 2: classifiers × embeddings, 3: TextCNN variants, 4: dimensions,
    /// 5: one classifier across embeddings, 6: classifiers on one embedding.
    #[arg(long, value_parser = clap::value_parser!(u8).range(2..=6))]
    table: u8,
    /// model.json files or train run directories.
    #[arg(long = "bundle", required = true, num_args = 1..)]
    bundles: Vec<PathBuf>,
    /// Labeled JSONL: the test split (split mode) or the full dataset (cv).
    #[arg(long)]
    data: PathBuf,
    /// Tables the bundles refer to: configured name, name=path, or a file.
    #[arg(long = "embedding", num_args = 1..)]
    embeddings: Vec<String>,
    #[arg(long, value_enum, default_value = "split")]
    mode: Mode,
    #[arg(long, default_value_t = 10)]
    k: usize,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    #[arg(long)]
    force: bool,
}

struct Member {
    path: PathBuf,
    variant: String,
    family: String,
    classifier: TrainedClassifier,
}

impl Member {
    fn display_family(&self) -> String {
        match self.family.parse::<Family>() {
            Ok(f) => f.display().to_string(),
            Err(_) => "TextCNN".into(),
        }
    }

    fn embedding(&self) -> Option<&str> {
        self.classifier.meta.embedding.as_ref().map(|e| e.name.as_str())
    }
}

#[derive(Serialize)]
struct BundleInfo {
    path: PathBuf,
    sha256: String,
}

#[derive(Serialize)]
struct RunInfo<'a> {
    command: &'a str,
    version: &'a str,
    table: u8,
    mode: Mode,
    #[serde(skip_serializing_if = "Option::is_none")]
    k: Option<usize>,
    data: &'a Path,
    data_sha256: String,
    bundles: Vec<BundleInfo>,
    embeddings: Vec<&'a EmbeddingSpec>,
}

#[derive(Serialize)]
struct Resolved<'a> {
    run: RunInfo<'a>,
    config: &'a RunConfig,
}

#[derive(Serialize)]
struct MemberResult<'a> {
    variant: &'a str,
    bundle: &'a Path,
    report: MetricsReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    cv: Option<CvReport>,
}

/// Held-out folds: training docs (empty in split mode) and test docs.
struct Fold {
    train: Vec<Doc>,
    test: Vec<Doc>,
}

pub fn run(args: Args, config: Option<&Path>) -> Result<()> {
    let mut cfg = RunConfig::load(config)?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(o) = &args.out_dir {
        cfg.out_dir = o.clone();
    }
    if args.mode == Mode::Cv && args.k < 2 {
        return Err(exit::usage("--k must be at least 2"));
    }

    let mut members = Vec::new();
    for p in &args.bundles {
        let path = if p.is_dir() { p.join("model.json") } else { p.clone() };
        let classifier = load_bundle(&path)?;
        members.push(Member {
            variant: variant_name(&classifier),
            family: classifier.meta.family.clone(),
            path,
            classifier,
        });
    }

    let mut specs: BTreeMap<String, EmbeddingSpec> = BTreeMap::new();
    for arg in &args.embeddings {
        let s = cfg.embedding_spec(arg)?;
        specs.insert(s.name.clone(), s);
    }
    for m in &members {
        if let Some(name) = m.embedding() {
            if !specs.contains_key(name) {
                if !cfg.embeddings.contains_key(name) {
                    return Err(exit::usage(format!(
                        "{} needs embedding {name:?}; pass --embedding {name}=PATH",
                        m.path.display()
                    )));
                }
                specs.insert(name.to_string(), cfg.embedding_spec(name)?);
            }
        }
    }

    let dataset = load_dataset(&args.data)?;
    let resolved = Resolved {
        run: RunInfo {
            command: "evaluate",
            version: VERSION,
            table: args.table,
            mode: args.mode,
            k: (args.mode == Mode::Cv).then_some(args.k),
            data: &args.data,
            data_sha256: file_sha256(&args.data)?,
            bundles: members
                .iter()
                .map(|m| Ok(BundleInfo { path: m.path.clone(), sha256: file_sha256(&m.path)? }))
                .collect::<Result<_>>()?,
            embeddings: specs.values().collect(),
        },
        config: &cfg,
    };

    let pp = cfg.preprocess_config()?;
    let (folds, mode_text) = match args.mode {
        Mode::Split => {
            let text = format!("held-out test set {} ({} comments)", args.data.display(), dataset.len());
            (vec![Fold { train: Vec::new(), test: tokenize_dataset(&dataset, &pp) }], text)
        }
        Mode::Cv => {
            let d = if cfg.balance { balance_classes(&dataset, cfg.seed)? } else { dataset.clone() };
            let folds = kfold(&d, args.k, cfg.seed)?
                .into_iter()
                .map(|f| Fold { train: tokenize_dataset(&f.train, &pp), test: tokenize_dataset(&f.test, &pp) })
                .collect();
            let text = format!(
                "{}-fold cross-validation, seed {}, {} comments; each bundle refit with its selected settings",
                args.k,
                cfg.seed,
                d.len()
            );
            (folds, text)
        }
    };

    let vocab: HashSet<String> = tokenize_dataset(&dataset, &pp).into_iter().flat_map(|(t, _)| t).collect();
    let mut tables: HashMap<String, Arc<EmbeddingTable>> = HashMap::new();
    for (name, spec) in &specs {
        if members.iter().any(|m| m.embedding() == Some(name.as_str())) {
            tables.insert(name.clone(), spec.load(Some(&vocab))?);
        }
    }

    check_members(args.table, &members)?;
    let run_dir = RunDir::create(&cfg.out_dir, &resolved, args.force)?;

    // predictions[member][fold]
    let mut predictions = Vec::with_capacity(members.len());
    for m in &members {
        let table = m.embedding().map(|n| tables[n].clone());
        let preds = predict_folds(m, &folds, table.as_deref(), cfg.seed)
            .with_context(|| format!("evaluating {}", m.path.display()))?;
        predictions.push(preds);
    }
    let truths: Vec<Vec<Label>> = folds.iter().map(|f| f.test.iter().map(|(_, l)| *l).collect()).collect();
    let k = folds.len();
    let score = |preds: &[Vec<Label>]| -> Result<(MetricsReport, Option<CvReport>)> {
        let per_fold = preds
            .iter()
            .zip(&truths)
            .map(|(p, t)| evaluate(p, t))
            .collect::<ersn_core::Result<Vec<_>>>()?;
        if args.mode == Mode::Split {
            Ok((per_fold[0], None))
        } else {
            let cv = CvReport::from_folds(k, cfg.seed, per_fold);
            Ok((cv.mean_report(), Some(cv)))
        }
    };

    let mut results = Vec::new();
    let mut reports = Vec::new();
    for (m, p) in members.iter().zip(&predictions) {
        let (report, cv) = score(p)?;
        reports.push(report);
        results.push(MemberResult { variant: &m.variant, bundle: &m.path, report, cv });
    }

    let (title, body) = match args.table {
        2 => {
            let rows = ordered(members.iter().map(Member::display_family));
            let cols = ordered(members.iter().filter_map(|m| m.embedding().map(str::to_string)));
            let mut grid = ResultGrid::new(rows, cols);
            for (m, r) in members.iter().zip(&reports) {
                grid.insert(&m.display_family(), m.embedding().unwrap_or_default(), *r);
            }
            ("Classifiers with each word embedding", TableBody::Embeddings(grid))
        }
        3 => {
            let rows = ordered(members.iter().map(|m| m.variant.clone()));
            let mut grid = ResultGrid::new(rows, ["TextCNN"]);
            for (m, r) in members.iter().zip(&reports) {
                grid.insert(&m.variant, "TextCNN", *r);
            }
            ("TextCNN variants", TableBody::Variants(grid))
        }
        4 => {
            let rows = ordered(members.iter().map(Member::display_family));
            let mut dims: Vec<usize> = members
                .iter()
                .filter_map(|m| m.classifier.meta.embedding.as_ref().map(|e| e.dim))
                .collect();
            dims.sort_unstable();
            dims.dedup();
            let mut grid = ResultGrid::new(rows, dims.iter().map(|d| d.to_string()));
            for (m, r) in members.iter().zip(&reports) {
                let dim = m.classifier.meta.embedding.as_ref().map(|e| e.dim).unwrap_or_default();
                grid.insert(&m.display_family(), &dim.to_string(), *r);
            }
            ("Embedding dimensions", TableBody::Dimensions(grid))
        }
        n => {
            // 5: group by family across embeddings; 6: by embedding across families
            let key = |m: &Member| {
                if n == 5 {
                    m.display_family()
                } else {
                    format!("ML_{}", m.embedding().unwrap_or_default())
                }
            };
            let mut rows = Vec::new();
            for name in ordered(members.iter().map(key)) {
                let idx: Vec<usize> = (0..members.len()).filter(|&i| key(&members[i]) == name).collect();
                if idx.len() < 2 {
                    return Err(exit::usage(format!("ensemble {name} needs at least 2 bundles, got {}", idx.len())));
                }
                let voted: Vec<Vec<Label>> = (0..k)
                    .map(|f| {
                        (0..truths[f].len())
                            .map(|item| {
                                let votes: Vec<Label> = idx.iter().map(|&i| predictions[i][f][item]).collect();
                                tally(&votes, TieRule::PreferViolation)
                            })
                            .collect()
                    })
                    .collect();
                rows.push(EnsembleRow {
                    name,
                    individual: idx.iter().map(|&i| reports[i]).collect(),
                    voting: Some(score(&voted)?.0),
                });
            }
            let title = if n == 5 {
                "Voting ensembles of one classifier across embeddings"
            } else {
                "Voting ensembles of classifiers on one embedding"
            };
            (title, TableBody::Ensembles(rows))
        }
    };

    let rendered = render_table(&TableRequest {
        number: args.table,
        title: title.to_string(),
        mode: mode_text,
        body,
    })?;
    let (md, _) = rendered.write(&run_dir.path, &run_dir.id)?;
    fs::write(
        run_dir.file(&format!("members_{}.json", run_dir.id)),
        serde_json::to_string_pretty(&results)? + "\n",
    )?;
    print!("{}", rendered.markdown);
    eprintln!("wrote {}", md.display());
    println!("{}", run_dir.path.display());
    Ok(())
}

/// Distinct values in first-seen order.
fn ordered(items: impl Iterator<Item = String>) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for s in items {
        if !out.contains(&s) {
            out.push(s);
        }
    }
    out
}

/// Checks that the bundles fit the requested table shape.
fn check_members(table: u8, members: &[Member]) -> Result<()> {
    let mut seen = HashSet::new();
    for m in members {
        let textcnn = m.family == "textcnn";
        let ok = match table {
            2 => !textcnn,
            3 => textcnn,
            _ => m.embedding().is_some(),
        };
        if !ok {
            return Err(exit::usage(format!("table {table} cannot use {} ({})", m.variant, m.path.display())));
        }
        let cell = match table {
            3 => m.variant.clone(),
            4 => format!("{} {}", m.display_family(), m.classifier.meta.embedding.as_ref().map_or(0, |e| e.dim)),
            _ => format!("{} {}", m.display_family(), m.embedding().unwrap_or_default()),
        };
        if !seen.insert(cell.clone()) {
            return Err(exit::usage(format!("two bundles for the same cell ({cell})")));
        }
    }
    Ok(())
}

fn predict_folds(m: &Member, folds: &[Fold], table: Option<&EmbeddingTable>, seed: u64) -> Result<Vec<Vec<Label>>> {
    folds
        .iter()
        .enumerate()
        .map(|(i, fold)| {
            let classifier = if fold.train.is_empty() {
                m.classifier.clone()
            } else {
                refit(&m.classifier, &fold.train, table, seed).with_context(|| format!("fold {i}"))?
            };
            fold.test
                .iter()
                .map(|(tokens, _)| Ok(classifier.predict_tokens(tokens, table)?.label))
                .collect()
        })
        .collect()
}

/// Retrains `c`'s family with its stored settings on `train`.
fn refit(c: &TrainedClassifier, train: &[Doc], table: Option<&EmbeddingTable>, seed: u64) -> Result<TrainedClassifier> {
    let model = match &c.model {
        Model::Classical(m) => {
            let point = c.meta.grid_point.clone().unwrap_or_default();
            let table = table.context("classical bundle without embedding table")?;
            let set = doc_features(train, table)?;
            Model::Classical(train_point(m.family(), &point, &set, seed)?)
        }
        Model::Textcnn(m) => {
            // every tenth training document monitors early stopping
            let (val, tr): (Vec<_>, Vec<_>) =
                train.iter().cloned().enumerate().partition(|(i, _)| i % 10 == 9);
            let strip = |v: Vec<(usize, Doc)>| v.into_iter().map(|(_, d)| d).collect::<Vec<_>>();
            let mut config = m.config.clone();
            config.seed = seed;
            return Ok(train_textcnn(&config, &strip(tr), &strip(val), table)?.0);
        }
    };
    Ok(TrainedClassifier {
        meta: c.meta.clone(),
        model,
    })
}
