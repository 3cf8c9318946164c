use std::collections::HashSet;
use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use ersn_core::corpus::load_dataset;
use ersn_core::experiment::tokenize_dataset;

use crate::config::RunConfig;
use crate::exit;

#[derive(clap::Args)]
pub struct Args {
    /// Configured embedding name, name=path, or a vector file.
    #[arg(long)]
    embedding: String,
    /// Target dimension of the PCA reduction; omit to only filter.
    #[arg(long)]
    dim: Option<usize>,
    /// Keep only tokens occurring in this labeled dataset (before PCA).
    #[arg(long)]
    vocab_data: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    force: bool,
}

pub fn run(args: Args, config: Option<&Path>) -> Result<()> {
    if args.dim.is_none() && args.vocab_data.is_none() {
        return Err(exit::usage("nothing to do: give --dim and/or --vocab-data"));
    }
    if args.out.exists() && !args.force {
        return Err(exit::refusal(format!(
            "{} already exists; pass --force to overwrite",
            args.out.display()
        )));
    }
    let cfg = RunConfig::load(config)?;
    let spec = cfg.embedding_spec(&args.embedding)?;
    let vocab: Option<HashSet<String>> = match &args.vocab_data {
        Some(p) => {
            let d = load_dataset(p)?;
            let pp = cfg.preprocess_config()?;
            Some(tokenize_dataset(&d, &pp).into_iter().flat_map(|(t, _)| t).collect())
        }
        None => None,
    };
    let table = spec.load(vocab.as_ref())?;
    let table = match args.dim {
        Some(dim) => {
            let (reduced, t) = table.reduce(dim)?;
            eprintln!(
                "{}: {} -> {} dimensions, explained variance {:.6}",
                spec.name,
                table.dim(),
                dim,
                t.explained_variance_ratio
            );
            reduced
        }
        None => (*table).clone(),
    };
    let file = fs::File::create(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    table
        .write_text(BufWriter::new(file))
        .with_context(|| format!("writing {}", args.out.display()))?;
    eprintln!("{} vectors -> {}", table.len(), args.out.display());
    Ok(())
}
