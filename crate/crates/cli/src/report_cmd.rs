//! `mine`, `analyze`, `compare` and `gap`: everything downstream of profiling.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use anyhow::Context;
use benchrep_core::analytics::{compare_suites, gap_analysis, load_api_list, load_prefixes, tier_apis};
use benchrep_core::api::ApiRef;
use benchrep_core::profile::{merge_corpus, read_profiles, suite_apis, CorpusStore};
use benchrep_core::report::{analyze as build_bundle, write_bundle, AnalysisInputs};
use benchrep_core::somine::{build_post_index, load_security_tags, MineOptions, PostIndex};
use chrono::{DateTime, Utc};
use clap::Args;

use crate::{cutoff_default, fail, parse_cutoff, parse_levels, EXIT_INPUT, EXIT_USAGE};

pub const CORPUS_FILE: &str = "corpus.tsv";

#[derive(Args)]
pub struct MineArgs {
    /// Posts.xml from a Stack Exchange data dump.
    #[arg(long)]
    posts: PathBuf,
    /// Tags.xml-shaped list of tags that mark a question as security related.
    #[arg(long)]
    security_tags: PathBuf,
    /// Profile stores whose APIs are counted.
    #[arg(long = "profiles")]
    profiles: Vec<PathBuf>,
    /// Extra API lists, one serialized API per line.
    #[arg(long = "apis")]
    apis: Vec<PathBuf>,
    #[arg(long)]
    comments: Option<PathBuf>,
    #[arg(long)]
    votes: Option<PathBuf>,
    /// Count questions alone instead of question plus answers.
    #[arg(long)]
    question_only: bool,
    /// Units last active before this instant are ignored.
    #[arg(long, default_value_t = cutoff_default(), value_parser = parse_cutoff_arg)]
    cutoff: String,
    /// Output post index file.
    #[arg(long)]
    out: PathBuf,
}

fn parse_cutoff_arg(s: &str) -> Result<String, String> {
    parse_cutoff(s).map(|_| s.to_string())
}

#[derive(Args)]
struct SuiteArgs {
    /// `NAME=PROFILES` for one benchmark suite; repeat for every suite.
    #[arg(long = "suite", value_parser = parse_suite, required = true)]
    suites: Vec<(String, PathBuf)>,
}

fn parse_suite(s: &str) -> Result<(String, PathBuf), String> {
    let (name, path) = s.split_once('=').ok_or("expected NAME=PROFILES")?;
    if name.is_empty() || path.is_empty() {
        return Err("expected NAME=PROFILES".into());
    }
    Ok((name.to_string(), PathBuf::from(path)))
}

#[derive(Args)]
struct CorpusArgs {
    /// Profile stores of real-world apps; several stores are merged as shards.
    #[arg(long = "corpus", required = true)]
    corpus: Vec<PathBuf>,
    /// Inclusive target API level range of corpus apps.
    #[arg(long, default_value = "23:27", value_parser = parse_levels)]
    levels: (u32, u32),
}

#[derive(Args)]
pub struct AnalyzeArgs {
    #[command(flatten)]
    corpus: CorpusArgs,
    #[command(flatten)]
    suites: SuiteArgs,
    /// Post index written by `mine`.
    #[arg(long)]
    posts: PathBuf,
    #[arg(long)]
    baseline: PathBuf,
    #[arg(long)]
    orthogonal: PathBuf,
    #[arg(long)]
    ui_prefixes: PathBuf,
    /// APIs kept per package prefix in the gap report.
    #[arg(long, default_value_t = 10)]
    top: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
pub struct CompareArgs {
    #[command(flatten)]
    suites: SuiteArgs,
    #[arg(long)]
    baseline: PathBuf,
    #[arg(long)]
    orthogonal: PathBuf,
}

#[derive(Args)]
pub struct GapArgs {
    #[command(flatten)]
    corpus: CorpusArgs,
    #[command(flatten)]
    suites: SuiteArgs,
    #[arg(long)]
    posts: PathBuf,
    #[arg(long)]
    ui_prefixes: PathBuf,
    #[arg(long, default_value_t = 10)]
    top: usize,
}

fn must_exist(p: &Path) -> anyhow::Result<()> {
    if p.exists() {
        Ok(())
    } else {
        Err(fail(EXIT_INPUT, format!("{}: no such file", p.display())))
    }
}

fn load_corpus(args: &CorpusArgs) -> anyhow::Result<CorpusStore> {
    let mut store = CorpusStore::default();
    for path in &args.corpus {
        must_exist(path)?;
        let profiles = read_profiles(path)?;
        let shard = merge_corpus(&profiles, args.levels);
        store = store.merge(shard).with_context(|| format!("merging {}", path.display()))?;
    }
    if store.corpus_size == 0 {
        return Err(fail(
            EXIT_INPUT,
            format!("no corpus app targets a level in {}:{}", args.levels.0, args.levels.1),
        ));
    }
    Ok(store)
}

fn load_suites(args: &SuiteArgs) -> anyhow::Result<BTreeMap<String, BTreeSet<ApiRef>>> {
    let mut out = BTreeMap::new();
    for (name, path) in &args.suites {
        must_exist(path)?;
        let profiles = read_profiles(path)?;
        if out.insert(name.clone(), suite_apis(&profiles)).is_some() {
            return Err(fail(EXIT_USAGE, format!("suite `{name}` given twice")));
        }
    }
    Ok(out)
}

fn load_posts(path: &Path) -> anyhow::Result<PostIndex> {
    must_exist(path)?;
    Ok(PostIndex::read(path)?)
}

fn config<T, E>(path: &Path, load: impl FnOnce(&Path) -> Result<T, E>) -> anyhow::Result<T>
where
    E: std::error::Error + Send + Sync + 'static,
{
    must_exist(path)?;
    Ok(load(path)?)
}

pub fn mine(args: MineArgs) -> anyhow::Result<()> {
    must_exist(&args.posts)?;
    let tagset = config(&args.security_tags, |p| load_security_tags(p))?;
    let mut apis: BTreeSet<ApiRef> = BTreeSet::new();
    for p in &args.profiles {
        must_exist(p)?;
        apis.extend(suite_apis(&read_profiles(p)?));
    }
    for p in &args.apis {
        apis.extend(config(p, |p| load_api_list(p))?);
    }
    if apis.is_empty() {
        return Err(fail(EXIT_USAGE, "no APIs to count; pass --profiles or --apis"));
    }
    for p in [&args.comments, &args.votes].into_iter().flatten() {
        must_exist(p)?;
    }
    let cutoff: DateTime<Utc> = parse_cutoff(&args.cutoff).map_err(|e| fail(EXIT_USAGE, e))?;
    let opts = MineOptions { cutoff, question_only: args.question_only, comments: args.comments, votes: args.votes };
    let index = build_post_index(&args.posts, &apis, &tagset, &opts)?;

    let f = std::fs::File::create(&args.out).with_context(|| format!("writing {}", args.out.display()))?;
    index.write(std::io::BufWriter::new(f))?;
    let discussed = apis.iter().filter(|a| index.android(a) > 0).count();
    println!(
        "apis={} discussed={} android_units={} security_units={} orphans={}",
        apis.len(),
        discussed,
        index.totals.0,
        index.totals.1,
        index.orphan_answers
    );
    Ok(())
}

pub fn analyze(args: AnalyzeArgs) -> anyhow::Result<()> {
    let corpus = load_corpus(&args.corpus)?;
    let suites = load_suites(&args.suites)?;
    let index = load_posts(&args.posts)?;
    let baseline = config(&args.baseline, |p| load_api_list(p))?;
    let orthogonal = config(&args.orthogonal, |p| load_prefixes(p))?;
    let ui_prefixes = config(&args.ui_prefixes, |p| load_prefixes(p))?;
    if args.top == 0 {
        return Err(fail(EXIT_USAGE, "--top must be at least 1"));
    }

    let inputs = AnalysisInputs {
        corpus: &corpus,
        suites: &suites,
        index: &index,
        baseline: &baseline,
        orthogonal: &orthogonal,
        ui_prefixes: &ui_prefixes,
        k: args.top,
    };
    let bundle = build_bundle(&inputs)?;
    std::fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    let corpus_path = args.out.join(CORPUS_FILE);
    corpus.write(std::io::BufWriter::new(std::fs::File::create(&corpus_path)?))?;
    let files = write_bundle(&bundle, &args.out)?;
    println!(
        "corpus_size={} suites={} gap_apis={} files={}",
        corpus.corpus_size,
        suites.len(),
        bundle.gap.gap_apis.len(),
        files.len() + 1
    );
    Ok(())
}

pub fn compare(args: CompareArgs) -> anyhow::Result<()> {
    let suites = load_suites(&args.suites)?;
    let baseline = config(&args.baseline, |p| load_api_list(p))?;
    let orthogonal = config(&args.orthogonal, |p| load_prefixes(p))?;
    // filtering does not look at posts
    let no_posts = PostIndex::default();
    let filtered: Vec<(&String, BTreeSet<ApiRef>)> = suites
        .iter()
        .map(|(name, apis)| (name, tier_apis(apis, &baseline, &orthogonal, &no_posts).filtered))
        .collect();

    let mut w = csv::Writer::from_writer(std::io::stdout().lock());
    w.write_record(["x", "y", "common", "unique_x", "unique_y"])?;
    for (i, (x, xs)) in filtered.iter().enumerate() {
        for (y, ys) in &filtered[i + 1..] {
            let c = compare_suites(x, xs, y, ys);
            w.write_record([
                c.x,
                c.y,
                c.common.len().to_string(),
                c.unique_x.len().to_string(),
                c.unique_y.len().to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn gap(args: GapArgs) -> anyhow::Result<()> {
    let corpus = load_corpus(&args.corpus)?;
    let suites = load_suites(&args.suites)?;
    let index = load_posts(&args.posts)?;
    let ui_prefixes = config(&args.ui_prefixes, |p| load_prefixes(p))?;
    if args.top == 0 {
        return Err(fail(EXIT_USAGE, "--top must be at least 1"));
    }
    let union: BTreeSet<ApiRef> = suites.values().flatten().cloned().collect();
    let report = gap_analysis(&corpus, &union, &ui_prefixes, &index, args.top)?;

    let mut w = csv::Writer::from_writer(std::io::stdout().lock());
    w.write_record(["prefix", "known", "rank", "api", "security_posts"])?;
    for (prefix, list) in &report.groups {
        let known = report.known_prefixes.contains(prefix);
        for (rank, (api, n)) in list.iter().enumerate() {
            w.write_record([prefix.clone(), known.to_string(), (rank + 1).to_string(), api.to_string(), n.to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}
