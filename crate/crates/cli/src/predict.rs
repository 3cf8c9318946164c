use std::collections::{HashMap, HashSet};
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{Context, Result};
use ersn_core::classifier::{load_bundle, Pipeline, TrainedClassifier};
use ersn_core::ensemble::{TieRule, VotingEnsemble};
use ersn_core::experiment::pipeline;
use ersn_core::textprep::preprocess;
use serde::Serialize;

use crate::config::RunConfig;
use crate::exit;
use crate::train::variant_name;

#[derive(clap::Args)]
#[command(group(clap::ArgGroup::new("model").required(true).args(["bundle", "ensemble"])))]
#[command(group(clap::ArgGroup::new("source").required(true).args(["text", "input"])))]
pub struct Args {
    /// A model.json file or train run directory.
    #[arg(long)]
    bundle: Option<PathBuf>,
    /// Two or more bundles combined by majority vote.
    #[arg(long, num_args = 2..)]
    ensemble: Vec<PathBuf>,
    /// Tables the bundles refer to: configured name, name=path, or a file.
    #[arg(long = "embedding", num_args = 1..)]
    embeddings: Vec<String>,
    /// Classify a single comment and print its label.
    #[arg(long)]
    text: Option<String>,
    /// JSONL with a `message` field (and optionally `id`) per line.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Output JSONL; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    force: bool,
}

#[derive(Serialize)]
struct Row<'a> {
    id: &'a str,
    label: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    score: Option<f64>,
}

fn read_inputs(path: &Path) -> Result<Vec<(String, String)>> {
    let file = fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let v: serde_json::Value =
            serde_json::from_str(&line).with_context(|| format!("{} line {}", path.display(), i + 1))?;
        let message = v
            .get("message")
            .and_then(|m| m.as_str())
            .ok_or_else(|| ersn_core::Error::Validation(format!("line {}: no message", i + 1)))?;
        let id = match v.get("id") {
            Some(serde_json::Value::String(s)) => s.clone(),
            Some(other) => other.to_string(),
            None => (i + 1).to_string(),
        };
        out.push((id, message.to_string()));
    }
    Ok(out)
}

pub fn run(args: Args, config: Option<&Path>) -> Result<()> {
    if let Some(out) = &args.out {
        if out.exists() && !args.force {
            return Err(exit::refusal(format!("{} already exists; pass --force to overwrite", out.display())));
        }
    }
    let cfg = RunConfig::load(config)?;
    let pp = Arc::new(cfg.preprocess_config()?);
    let items = match (&args.text, &args.input) {
        (Some(t), _) => vec![("text".to_string(), t.clone())],
        (None, Some(p)) => read_inputs(p)?,
        (None, None) => unreachable!("clap requires a source"),
    };
    let tokens: Vec<Vec<String>> = items.iter().map(|(_, m)| preprocess(m, &pp)).collect();
    let vocab: HashSet<String> = tokens.iter().flatten().cloned().collect();

    let paths: Vec<PathBuf> = args.bundle.iter().chain(&args.ensemble).cloned().collect();
    let mut classifiers: Vec<TrainedClassifier> = Vec::new();
    for p in &paths {
        let path = if p.is_dir() { p.join("model.json") } else { p.clone() };
        classifiers.push(load_bundle(&path)?);
    }
    let mut tables = HashMap::new();
    for arg in &args.embeddings {
        let spec = cfg.embedding_spec(arg)?;
        tables.insert(spec.name.clone(), spec.load(Some(&vocab))?);
    }
    let mut pipelines = Vec::new();
    for c in classifiers {
        let table = match &c.meta.embedding {
            Some(e) => match tables.get(&e.name) {
                Some(t) => Some(t.clone()),
                None if cfg.embeddings.contains_key(&e.name) => {
                    let t = cfg.embedding_spec(&e.name)?.load(Some(&vocab))?;
                    tables.insert(e.name.clone(), t.clone());
                    Some(t)
                }
                None => {
                    return Err(exit::usage(format!(
                        "bundle needs embedding {:?}; pass --embedding {}=PATH",
                        e.name, e.name
                    )))
                }
            },
            None => None,
        };
        pipelines.push(Arc::new(pipeline(variant_name(&c), c, table, pp.clone())?));
    }

    let mut rows = Vec::with_capacity(items.len());
    if pipelines.len() == 1 {
        let p: &Pipeline = &pipelines[0];
        for ((id, _), t) in items.iter().zip(&tokens) {
            let pred = p.predict_tokens(t).with_context(|| format!("item {id}"))?;
            rows.push((id.as_str(), pred.label, Some(pred.score)));
        }
    } else {
        let ensemble = VotingEnsemble::new("ensemble", pipelines, TieRule::PreferViolation)?;
        let refs: Vec<&[String]> = tokens.iter().map(Vec::as_slice).collect();
        let labels = ensemble.hard_vote_refs(&refs)?;
        rows.extend(items.iter().zip(labels).map(|((id, _), l)| (id.as_str(), l, None)));
    }

    if args.text.is_some() {
        let (_, label, score) = rows[0];
        match score {
            Some(s) => println!("{label}\t{s}"),
            None => println!("{label}"),
        }
        return Ok(());
    }
    let mut out = Vec::new();
    for (id, label, score) in rows {
        serde_json::to_writer(&mut out, &Row { id, label: label.as_str(), score })?;
        out.push(b'\n');
    }
    match &args.out {
        Some(p) => fs::write(p, out).with_context(|| format!("writing {}", p.display()))?,
        None => std::io::stdout().write_all(&out)?,
    }
    Ok(())
}
