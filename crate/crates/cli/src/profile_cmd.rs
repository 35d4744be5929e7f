use std::collections::BTreeSet;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::time::Instant;

use anyhow::Context;
use benchrep_core::apk::{digest_hex, read_apk};
use benchrep_core::framework::{load_index, FrameworkIndex};
use benchrep_core::profile::{profile_apk, write_profiles, AppProfile, ProfileCache, ProfileError};
use clap::Args;
use rayon::prelude::*;

use crate::{fail, EXIT_INPUT};

pub const STORE_FILE: &str = "profiles.jsonl";
pub const ERRORS_FILE: &str = "profile-errors.tsv";

#[derive(Args)]
pub struct ProfileArgs {
    /// APK files, or directories searched recursively for `*.apk`.
    #[arg(required = true)]
    inputs: Vec<PathBuf>,
    #[arg(long)]
    framework_index: PathBuf,
    /// Output directory for the profile store and its error report.
    #[arg(long)]
    out: PathBuf,
    /// Directory of cached profiles keyed by APK and index digests.
    #[arg(long)]
    cache: Option<PathBuf>,
    /// Print parse and cache counts with elapsed time to stderr.
    #[arg(long)]
    timings: bool,
}

fn collect_apks(p: &Path, out: &mut Vec<PathBuf>) -> anyhow::Result<()> {
    for entry in walkdir::WalkDir::new(p).follow_links(true) {
        let entry = entry.with_context(|| format!("listing {}", p.display()))?;
        let path = entry.path();
        if entry.file_type().is_file() && path.extension().is_some_and(|e| e.eq_ignore_ascii_case("apk")) {
            out.push(path.to_path_buf());
        }
    }
    Ok(())
}

struct ErrorRow {
    app_id: String,
    path: PathBuf,
    reason: String,
    detail: String,
}

struct Counters {
    parsed: AtomicU64,
    cache_hits: AtomicU64,
}

fn profile_one(
    app_id: &str,
    path: &Path,
    index: &FrameworkIndex,
    cache: Option<&ProfileCache>,
    counters: &Counters,
) -> Result<AppProfile, (String, String)> {
    let bytes = std::fs::read(path).map_err(|e| ("io".to_string(), e.to_string()))?;
    let key = cache.map(|_| ProfileCache::key(&digest_hex(&bytes), index));
    if let (Some(c), Some(k)) = (cache, &key) {
        if let Some(p) = c.get(k, app_id) {
            counters.cache_hits.fetch_add(1, Ordering::Relaxed);
            return Ok(p);
        }
    }
    counters.parsed.fetch_add(1, Ordering::Relaxed);
    let entries = read_apk(app_id, &bytes).map_err(|source| {
        let e = ProfileError::Apk { app_id: app_id.to_string(), source };
        (e.kind().to_string(), e.to_string())
    })?;
    let p = profile_apk(&entries, index).map_err(|e| (e.kind().to_string(), e.to_string()))?;
    if let (Some(c), Some(k)) = (cache, &key) {
        // a failed cache write only costs a re-parse next time
        if let Err(e) = c.put(k, &p) {
            eprintln!("benchrep: cache write for {app_id} failed: {e}");
        }
    }
    Ok(p)
}

pub fn run(args: ProfileArgs) -> anyhow::Result<()> {
    let start = Instant::now();
    let index = load_index(&args.framework_index)
        .with_context(|| format!("loading framework index {}", args.framework_index.display()))?;
    let cache = args.cache.as_ref().map(ProfileCache::new).transpose().context("opening cache directory")?;

    let mut paths = Vec::new();
    for input in &args.inputs {
        if !input.exists() {
            return Err(fail(EXIT_INPUT, format!("{}: no such file or directory", input.display())));
        }
        collect_apks(input, &mut paths)?;
    }
    paths.sort();
    paths.dedup();

    let mut seen = BTreeSet::new();
    let mut jobs = Vec::new();
    let mut errors = Vec::new();
    for path in paths {
        let app_id = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        if seen.insert(app_id.clone()) {
            jobs.push((app_id, path));
        } else {
            let detail = format!("another input already uses app id {app_id}");
            errors.push(ErrorRow { app_id, path, reason: "duplicate-app-id".into(), detail });
        }
    }

    let counters = Counters { parsed: AtomicU64::new(0), cache_hits: AtomicU64::new(0) };
    let results: Vec<_> = jobs
        .par_iter()
        .map(|(id, path)| profile_one(id, path, &index, cache.as_ref(), &counters))
        .collect();

    let mut profiles = Vec::new();
    for ((app_id, path), r) in jobs.into_iter().zip(results) {
        match r {
            Ok(p) => profiles.push(p),
            Err((reason, detail)) => errors.push(ErrorRow { app_id, path, reason, detail }),
        }
    }
    profiles.sort_by(|a, b| a.app_id.cmp(&b.app_id));
    errors.sort_by(|a, b| a.path.cmp(&b.path));

    std::fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    let store = args.out.join(STORE_FILE);
    let f = std::fs::File::create(&store).with_context(|| format!("writing {}", store.display()))?;
    write_profiles(std::io::BufWriter::new(f), &profiles)?;
    let err_path = args.out.join(ERRORS_FILE);
    let mut w = std::io::BufWriter::new(std::fs::File::create(&err_path)?);
    writeln!(w, "app_id\tpath\treason\tdetail")?;
    for e in &errors {
        let detail = e.detail.replace(['\t', '\n'], " ");
        writeln!(w, "{}\t{}\t{}\t{}", e.app_id, e.path.display(), e.reason, detail)?;
    }
    w.flush()?;

    println!("profiled={} failed={} store={}", profiles.len(), errors.len(), store.display());
    if args.timings {
        eprintln!(
            "parsed={} cache_hits={} elapsed_ms={}",
            counters.parsed.load(Ordering::Relaxed),
            counters.cache_hits.load(Ordering::Relaxed),
            start.elapsed().as_millis()
        );
    }
    if profiles.is_empty() {
        return Err(fail(EXIT_INPUT, "no APK could be profiled"));
    }
    Ok(())
}

