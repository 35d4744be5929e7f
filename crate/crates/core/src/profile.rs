//! Per-app API profiles and the corpus-wide usage store.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::api::ApiRef;
use crate::apk::{digest_hex, ApkEntries, ApkError};
use crate::axml::{manifest_api_tokens, parse_manifest, sdk_levels, AxmlError, SdkLevels};
use crate::dex::{parse_dex, used_not_defined, DexError, DexPool, MemberRef};
use crate::framework::{framework_callbacks, resolve_through_app, FrameworkIndex};

const RETAINED_ROOTS: [&str; 3] = ["android", "java", "org"];

#[derive(Debug, Error)]
pub enum ProfileError {
    #[error("{app_id}: {source}")]
    Apk {
        app_id: String,
        #[source]
        source: ApkError,
    },
    #[error("{app_id}: dex #{ordinal}: {source}")]
    Dex {
        app_id: String,
        ordinal: usize,
        #[source]
        source: DexError,
    },
    #[error("{app_id}: manifest: {source}")]
    Manifest {
        app_id: String,
        #[source]
        source: AxmlError,
    },
}

impl ProfileError {
    /// Short machine-readable reason, used in error reports.
    pub fn kind(&self) -> &'static str {
        match self {
            ProfileError::Apk { source, .. } => match source {
                ApkError::Io { .. } => "io",
                ApkError::NotZip(_) => "not-zip",
                ApkError::MissingManifest => "missing-manifest",
                ApkError::MissingDex => "missing-dex",
                ApkError::CorruptEntry { .. } => "corrupt-entry",
            },
            ProfileError::Dex { .. } => "dex",
            ProfileError::Manifest { .. } => "manifest",
        }
    }
}

/// True iff `name` is exactly one Unicode code point.
pub fn is_obfuscated(name: &str) -> bool {
    let mut chars = name.chars();
    chars.next().is_some() && chars.next().is_none()
}

/// True iff the first path segment is `android`, `java` or `org`, or the
/// first two are `com/android`. Segments must match whole.
pub fn has_retained_prefix(class_path: &str) -> bool {
    let mut segs = class_path.split('/');
    match segs.next() {
        Some(first) if RETAINED_ROOTS.contains(&first) => segs.next().is_some(),
        Some("com") => segs.next() == Some("android") && segs.next().is_some(),
        _ => false,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AppProfile {
    pub app_id: String,
    #[serde(flatten)]
    pub sdk: SdkLevels,
    pub source_hash: String,
    pub apis: BTreeSet<ApiRef>,
}

/// Framework-facing member refs of one app: used-but-undefined refs and
/// callbacks, each re-owned to its canonical declaring class. A ref named on
/// an app class that merely inherits the member is resolved through the app
/// hierarchy first (`MainActivity.getString` reads as
/// `Context.getString`).
pub fn app_member_refs(pool: &DexPool, index: &FrameworkIndex) -> BTreeSet<MemberRef> {
    let mut out: BTreeSet<MemberRef> = used_not_defined(pool)
        .into_iter()
        .map(|m| resolve_through_app(index, &pool.defined_classes, &m).unwrap_or(m))
        .collect();
    out.extend(framework_callbacks(index, &pool.defined_classes));
    out
}

/// Applies the obfuscation and retained-prefix filters to member APIs;
/// manifest tokens pass untouched.
pub fn keep_api(api: &ApiRef) -> bool {
    !api.kind.is_member() || (!is_obfuscated(&api.member) && has_retained_prefix(&api.class))
}

pub fn profile_apk(entries: &ApkEntries, index: &FrameworkIndex) -> Result<AppProfile, ProfileError> {
    let app_id = &entries.app_id;
    let tree = parse_manifest(&entries.manifest_payload)
        .map_err(|source| ProfileError::Manifest { app_id: app_id.clone(), source })?;
    let mut pools = Vec::with_capacity(entries.dex_payloads.len());
    for (i, payload) in entries.dex_payloads.iter().enumerate() {
        let pool = parse_dex(payload).map_err(|source| ProfileError::Dex { app_id: app_id.clone(), ordinal: i + 1, source })?;
        pools.push(pool);
    }
    let pool = DexPool::union(pools);

    let mut apis = manifest_api_tokens(&tree);
    apis.extend(app_member_refs(&pool, index).iter().map(MemberRef::to_api));
    apis.retain(keep_api);
    Ok(AppProfile { app_id: app_id.clone(), sdk: sdk_levels(&tree), source_hash: entries.source_digest.clone(), apis })
}

// ---------------------------------------------------------------- profile store

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {reason}")]
    Parse { path: String, line: usize, reason: String },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> StoreError + '_ {
    move |source| StoreError::Io { path: path.display().to_string(), source }
}

/// One JSON object per line, in the order given.
pub fn write_profiles<'a>(mut w: impl Write, profiles: impl IntoIterator<Item = &'a AppProfile>) -> std::io::Result<()> {
    for p in profiles {
        serde_json::to_writer(&mut w, p)?;
        w.write_all(b"\n")?;
    }
    w.flush()
}

pub fn read_profiles(path: impl AsRef<Path>) -> Result<Vec<AppProfile>, StoreError> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(io_err(path))?;
    let mut out = Vec::new();
    for (i, line) in std::io::BufReader::new(file).lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        if line.trim().is_empty() {
            continue;
        }
        let p: AppProfile = serde_json::from_str(&line).map_err(|e| StoreError::Parse {
            path: path.display().to_string(),
            line: i + 1,
            reason: e.to_string(),
        })?;
        out.push(p);
    }
    Ok(out)
}

/// Profile cache keyed by APK content plus index content, one JSON file per
/// entry.
#[derive(Debug, Clone)]
pub struct ProfileCache {
    dir: PathBuf,
}

impl ProfileCache {
    pub fn new(dir: impl Into<PathBuf>) -> std::io::Result<Self> {
        let dir = dir.into();
        std::fs::create_dir_all(&dir)?;
        Ok(ProfileCache { dir })
    }

    pub fn key(apk_digest: &str, index: &FrameworkIndex) -> String {
        digest_hex(format!("{apk_digest}:{}", index.digest()).as_bytes())
    }

    fn path(&self, key: &str) -> PathBuf {
        self.dir.join(format!("{key}.json"))
    }

    /// A cached profile, relabelled with `app_id`. Unreadable entries are misses.
    pub fn get(&self, key: &str, app_id: &str) -> Option<AppProfile> {
        let bytes = std::fs::read(self.path(key)).ok()?;
        let mut p: AppProfile = serde_json::from_slice(&bytes).ok()?;
        p.app_id = app_id.to_string();
        Some(p)
    }

    pub fn put(&self, key: &str, profile: &AppProfile) -> std::io::Result<()> {
        static SEQ: AtomicU64 = AtomicU64::new(0);
        let seq = SEQ.fetch_add(1, Ordering::Relaxed);
        let tmp = self.dir.join(format!(".{key}.{}.{seq}.tmp", std::process::id()));
        std::fs::write(&tmp, serde_json::to_vec(profile)?)?;
        std::fs::rename(tmp, self.path(key))
    }
}

// ---------------------------------------------------------------- corpus store

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CorpusError {
    #[error("app id {0} appears in both stores")]
    DuplicateAppId(String),
}

/// What [`CorpusStore::ingest`] did with a profile.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Ingested {
    Added,
    OutOfRange,
    Duplicate,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CorpusStore {
    pub corpus_size: u64,
    pub usage: BTreeMap<ApiRef, u64>,
    /// Apps per target level.
    pub levels: BTreeMap<u32, u64>,
    pub skipped_out_of_range: u64,
    pub skipped_duplicates: u64,
    /// Ids of ingested apps; not persisted.
    pub app_ids: BTreeSet<String>,
}

impl CorpusStore {
    /// Adds one profile if its target level is within `range` (inclusive) and
    /// its id is new. A repeated id is skipped and counted.
    pub fn ingest(&mut self, p: &AppProfile, range: (u32, u32)) -> Ingested {
        if p.sdk.target_level < range.0 || p.sdk.target_level > range.1 {
            self.skipped_out_of_range += 1;
            return Ingested::OutOfRange;
        }
        if !self.app_ids.insert(p.app_id.clone()) {
            self.skipped_duplicates += 1;
            return Ingested::Duplicate;
        }
        self.corpus_size += 1;
        *self.levels.entry(p.sdk.target_level).or_default() += 1;
        for a in &p.apis {
            *self.usage.entry(a.clone()).or_default() += 1;
        }
        Ingested::Added
    }

    /// Combines two disjoint shards.
    pub fn merge(mut self, other: CorpusStore) -> Result<CorpusStore, CorpusError> {
        if let Some(dup) = self.app_ids.intersection(&other.app_ids).next() {
            return Err(CorpusError::DuplicateAppId(dup.clone()));
        }
        self.corpus_size += other.corpus_size;
        self.skipped_out_of_range += other.skipped_out_of_range;
        self.skipped_duplicates += other.skipped_duplicates;
        self.app_ids.extend(other.app_ids);
        for (a, n) in other.usage {
            *self.usage.entry(a).or_default() += n;
        }
        for (l, n) in other.levels {
            *self.levels.entry(l).or_default() += n;
        }
        Ok(self)
    }

    pub fn usage_of(&self, api: &ApiRef) -> u64 {
        self.usage.get(api).copied().unwrap_or(0)
    }

    pub fn apis(&self) -> impl Iterator<Item = &ApiRef> {
        self.usage.keys()
    }

    /// Header line, then `ApiRef<TAB>count` rows in ApiRef order.
    pub fn write(&self, mut w: impl Write) -> std::io::Result<()> {
        let levels: Vec<String> = self.levels.iter().map(|(l, n)| format!("{l}:{n}")).collect();
        writeln!(
            w,
            "# corpus_size={} levels={} out_of_range={} duplicates={}",
            self.corpus_size,
            levels.join(","),
            self.skipped_out_of_range,
            self.skipped_duplicates
        )?;
        for (a, n) in &self.usage {
            writeln!(w, "{a}\t{n}")?;
        }
        w.flush()
    }

    pub fn read(path: impl AsRef<Path>) -> Result<CorpusStore, StoreError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(io_err(path))?;
        let perr = |line: usize, reason: &str| StoreError::Parse {
            path: path.display().to_string(),
            line,
            reason: reason.to_string(),
        };
        let mut lines = text.lines().enumerate();
        let (_, header) = lines.next().ok_or_else(|| perr(1, "empty corpus store"))?;
        let header = header.strip_prefix("# ").ok_or_else(|| perr(1, "missing header"))?;
        let mut store = CorpusStore::default();
        for field in header.split_whitespace() {
            let (k, v) = field.split_once('=').ok_or_else(|| perr(1, "bad header field"))?;
            let num = |s: &str| s.parse::<u64>().map_err(|_| perr(1, "bad number"));
            match k {
                "corpus_size" => store.corpus_size = num(v)?,
                "out_of_range" => store.skipped_out_of_range = num(v)?,
                "duplicates" => store.skipped_duplicates = num(v)?,
                "levels" => {
                    for pair in v.split(',').filter(|s| !s.is_empty()) {
                        let (l, n) = pair.split_once(':').ok_or_else(|| perr(1, "bad level count"))?;
                        store.levels.insert(l.parse().map_err(|_| perr(1, "bad level"))?, num(n)?);
                    }
                }
                _ => {}
            }
        }
        for (i, line) in lines {
            if line.is_empty() {
                continue;
            }
            let (a, n) = line.split_once('\t').ok_or_else(|| perr(i + 1, "expected ApiRef<TAB>count"))?;
            let api: ApiRef = a.parse().map_err(|e: crate::api::ApiRefParseError| perr(i + 1, &e.to_string()))?;
            let n: u64 = n.parse().map_err(|_| perr(i + 1, "bad count"))?;
            if n == 0 || n > store.corpus_size {
                return Err(perr(i + 1, "count outside 1..=corpus_size"));
            }
            store.usage.insert(api, n);
        }
        Ok(store)
    }
}

/// Single-pass corpus build over a profile stream.
pub fn merge_corpus<'a>(profiles: impl IntoIterator<Item = &'a AppProfile>, range: (u32, u32)) -> CorpusStore {
    let mut store = CorpusStore::default();
    for p in profiles {
        store.ingest(p, range);
    }
    store
}

/// Union of every API in the given profiles (a suite's API set).
pub fn suite_apis<'a>(profiles: impl IntoIterator<Item = &'a AppProfile>) -> BTreeSet<ApiRef> {
    profiles.into_iter().flat_map(|p| p.apis.iter().cloned()).collect()
}
