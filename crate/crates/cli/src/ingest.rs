use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::time::Duration;

use anyhow::{Context, Result};
use ersn_gerrit::{
    filter_by_keywords, ChangeQuery, ChangeStatus, GerritClient, GerritEndpoint, KeywordSet, RetryPolicy, UreqTransport,
};

use crate::exit;

#[derive(clap::Args)]
pub struct Args {
    /// Gerrit server, e.g. https://review.opendev.org
    #[arg(long)]
    base_url: String,
    #[arg(long)]
    project: String,
    /// First day, YYYY-MM-DD.
    #[arg(long)]
    after: String,
    /// Last day, YYYY-MM-DD.
    #[arg(long)]
    before: String,
    /// merged, abandoned, open or any.
    #[arg(long, default_value = "merged")]
    status: String,
    /// Keep only comments containing one of these terms (one per line).
    #[arg(long)]
    keywords_file: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    /// Overwrite an existing output file.
    #[arg(long)]
    force: bool,
    /// Username for basic token auth; the token is read from --token-env.
    #[arg(long)]
    user: Option<String>,
    #[arg(long, default_value = "GERRIT_TOKEN")]
    token_env: String,
    #[arg(long, default_value_t = 100)]
    page_size: usize,
    #[arg(long, default_value_t = 30)]
    timeout_secs: u64,
    /// Minimum spacing between requests.
    #[arg(long, default_value_t = 100)]
    min_interval_ms: u64,
}

pub fn run(args: Args) -> Result<()> {
    if args.out.exists() && !args.force {
        return Err(exit::refusal(format!(
            "{} already exists; pass --force to overwrite",
            args.out.display()
        )));
    }
    let status: ChangeStatus = args.status.parse()?;
    let query = ChangeQuery::parse(&args.project, &args.after, &args.before, status)?;
    let keywords = match &args.keywords_file {
        Some(p) => Some(KeywordSet::parse(
            &fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?,
        )?),
        None => None,
    };
    let mut endpoint = GerritEndpoint::new(&args.base_url)?;
    endpoint.page_size = args.page_size;
    endpoint.request_timeout = Duration::from_secs(args.timeout_secs);
    if let Some(user) = &args.user {
        let token = std::env::var(&args.token_env)
            .map_err(|_| exit::usage(format!("--user given but ${} is not set", args.token_env)))?;
        endpoint = endpoint.with_credentials(user.clone(), token);
    }
    let policy = RetryPolicy {
        min_interval: Duration::from_millis(args.min_interval_ms),
        ..RetryPolicy::default()
    };
    let client = GerritClient::new(endpoint.clone(), UreqTransport::new(endpoint.request_timeout), policy);

    let result = fetch(&client, &query, keywords.as_ref());
    // the log is written even when fetching fails part-way
    let log_path = args.out.with_extension("fetch.log");
    let mut log = String::new();
    for event in client.fetch_log() {
        log.push_str(&serde_json::to_string(&event)?);
        log.push('\n');
    }
    fs::write(&log_path, log).with_context(|| format!("writing {}", log_path.display()))?;
    let (comments, fetched, changes) = result?;

    let mut out = Vec::new();
    for c in &comments {
        serde_json::to_writer(&mut out, c)?;
        out.push(b'\n');
    }
    fs::File::create(&args.out)
        .and_then(|mut f| f.write_all(&out))
        .with_context(|| format!("writing {}", args.out.display()))?;
    eprintln!(
        "{changes} changes, {fetched} comments, {} kept -> {}",
        comments.len(),
        args.out.display()
    );
    Ok(())
}

type Fetched = (Vec<ersn_core::corpus::ReviewComment>, usize, usize);

fn fetch(client: &GerritClient<UreqTransport>, query: &ChangeQuery, keywords: Option<&KeywordSet>) -> Result<Fetched> {
    let changes = client.fetch_changes(query).context("listing changes")?;
    let mut all = Vec::new();
    for change in &changes {
        all.extend(
            client
                .fetch_comments(change)
                .with_context(|| format!("comments of change {}", change.change_number))?,
        );
    }
    let fetched = all.len();
    let kept = match keywords {
        Some(kw) => filter_by_keywords(&all, kw),
        None => all,
    };
    Ok((kept, fetched, changes.len()))
}
