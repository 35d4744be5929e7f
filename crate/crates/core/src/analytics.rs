//! Derived quantities over profiles and the post index: API tiers, usage
//! percentages, five-number summaries, suite comparisons and gap analysis.

use std::collections::{BTreeMap, BTreeSet};
use std::io::BufRead;
use std::path::Path;

use serde::Serialize;
use thiserror::Error;

use crate::api::ApiRef;
use crate::profile::CorpusStore;
use crate::somine::PostIndex;

#[derive(Debug, Error, PartialEq)]
pub enum AnalyticsError {
    #[error("the corpus is empty")]
    EmptyCorpus,
    #[error("no values to summarise")]
    EmptyInput,
    #[error("value {0} is not a number")]
    NotANumber(usize),
    #[error("k must be at least 1")]
    ZeroK,
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {reason}")]
    Parse { path: String, line: usize, reason: String },
}

/// Non-empty, non-comment lines of a config file with their line numbers.
fn config_lines(path: &Path) -> Result<Vec<(usize, String)>, ConfigError> {
    let io = |source| ConfigError::Io { path: path.display().to_string(), source };
    let f = std::fs::File::open(path).map_err(io)?;
    let mut out = Vec::new();
    for (i, line) in std::io::BufReader::new(f).lines().enumerate() {
        let line = line.map_err(io)?;
        let t = line.trim();
        if !t.is_empty() && !t.starts_with('#') {
            out.push((i + 1, t.to_string()));
        }
    }
    Ok(out)
}

/// One serialized [`ApiRef`] per line; `#` starts a comment line.
pub fn load_api_list(path: impl AsRef<Path>) -> Result<BTreeSet<ApiRef>, ConfigError> {
    let path = path.as_ref();
    config_lines(path)?
        .into_iter()
        .map(|(line, t)| {
            t.parse()
                .map_err(|e| ConfigError::Parse { path: path.display().to_string(), line, reason: format!("{e}") })
        })
        .collect()
}

/// One package prefix per line, slash or dot form; `#` starts a comment line.
pub fn load_prefixes(path: impl AsRef<Path>) -> Result<BTreeSet<String>, ConfigError> {
    let path = path.as_ref();
    let mut out = BTreeSet::new();
    for (line, t) in config_lines(path)? {
        if t.contains(char::is_whitespace) {
            return Err(ConfigError::Parse {
                path: path.display().to_string(),
                line,
                reason: format!("`{t}` is not a package prefix"),
            });
        }
        out.insert(t.replace('.', "/").trim_end_matches('/').to_string());
    }
    Ok(out)
}

/// The first two `/`-separated segments of a class path.
pub fn package_prefix(class_path: &str) -> &str {
    match class_path.match_indices('/').nth(1) {
        Some((i, _)) => &class_path[..i],
        None => class_path,
    }
}

fn api_prefix(api: &ApiRef) -> &str {
    package_prefix(&api.class)
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct TierReport {
    pub total: BTreeSet<ApiRef>,
    pub considered: BTreeSet<ApiRef>,
    pub filtered: BTreeSet<ApiRef>,
    pub relevant: BTreeSet<ApiRef>,
    pub security: BTreeSet<ApiRef>,
}

impl TierReport {
    pub fn sizes(&self) -> [usize; 5] {
        [self.total.len(), self.considered.len(), self.filtered.len(), self.relevant.len(), self.security.len()]
    }
}

pub fn tier_apis(
    total: &BTreeSet<ApiRef>,
    baseline: &BTreeSet<ApiRef>,
    orthogonal_prefixes: &BTreeSet<String>,
    index: &PostIndex,
) -> TierReport {
    let considered: BTreeSet<ApiRef> = total.difference(baseline).cloned().collect();
    let filtered: BTreeSet<ApiRef> =
        considered.iter().filter(|a| !orthogonal_prefixes.contains(api_prefix(a))).cloned().collect();
    let relevant: BTreeSet<ApiRef> = filtered.iter().filter(|a| index.android(a) >= 1).cloned().collect();
    // taken from the relevant tier so the chain holds even for an inconsistent index
    let security: BTreeSet<ApiRef> = relevant.iter().filter(|a| index.security(a) >= 1).cloned().collect();
    TierReport { total: total.clone(), considered, filtered, relevant, security }
}

pub fn usage_percentage(store: &CorpusStore, api: &ApiRef) -> Result<f64, AnalyticsError> {
    if store.corpus_size == 0 {
        return Err(AnalyticsError::EmptyCorpus);
    }
    Ok(100.0 * store.usage_of(api) as f64 / store.corpus_size as f64)
}

/// Number of `apis` used by more than `threshold` percent of the corpus.
pub fn used_by_more_than(store: &CorpusStore, apis: &BTreeSet<ApiRef>, threshold: f64) -> Result<usize, AnalyticsError> {
    let mut n = 0;
    for a in apis {
        if usage_percentage(store, a)? > threshold {
            n += 1;
        }
    }
    Ok(n)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FiveNumber {
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

impl FiveNumber {
    pub fn as_array(&self) -> [f64; 5] {
        [self.min, self.q1, self.median, self.q3, self.max]
    }

    pub fn scaled(&self, factor: f64) -> FiveNumber {
        let [min, q1, median, q3, max] = self.as_array().map(|v| v * factor);
        FiveNumber { min, q1, median, q3, max }
    }
}

/// Quantile `q` of sorted data, interpolating linearly at position `(n-1)q`.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = (sorted.len() - 1) as f64 * q;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

pub fn five_number(values: &[f64]) -> Result<FiveNumber, AnalyticsError> {
    if values.is_empty() {
        return Err(AnalyticsError::EmptyInput);
    }
    if let Some(i) = values.iter().position(|v| v.is_nan()) {
        return Err(AnalyticsError::NotANumber(i));
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    Ok(FiveNumber {
        min: v[0],
        q1: quantile(&v, 0.25),
        median: quantile(&v, 0.5),
        q3: quantile(&v, 0.75),
        max: v[v.len() - 1],
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ComparisonReport {
    pub x: String,
    pub y: String,
    pub common: BTreeSet<ApiRef>,
    pub unique_x: BTreeSet<ApiRef>,
    pub unique_y: BTreeSet<ApiRef>,
}

pub fn compare_suites(
    x_name: &str,
    x: &BTreeSet<ApiRef>,
    y_name: &str,
    y: &BTreeSet<ApiRef>,
) -> ComparisonReport {
    ComparisonReport {
        x: x_name.to_string(),
        y: y_name.to_string(),
        common: x.intersection(y).cloned().collect(),
        unique_x: x.difference(y).cloned().collect(),
        unique_y: y.difference(x).cloned().collect(),
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct GapReport {
    pub gap_apis: BTreeSet<ApiRef>,
    /// Security-discussed gap APIs per prefix, best first, at most k each.
    pub groups: BTreeMap<String, Vec<(ApiRef, u64)>>,
    /// Security-discussed gap APIs per prefix before truncation.
    pub group_sizes: BTreeMap<String, usize>,
    pub known_prefixes: BTreeSet<String>,
    pub unknown_prefixes: BTreeSet<String>,
}

impl GapReport {
    /// Prefixes from `set`, largest group first, ties by prefix.
    pub fn ranked<'a>(&'a self, set: &'a BTreeSet<String>) -> Vec<(&'a str, usize)> {
        let mut v: Vec<(&str, usize)> = set.iter().map(|p| (p.as_str(), self.group_sizes[p])).collect();
        v.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
        v
    }
}

pub fn gap_analysis(
    store: &CorpusStore,
    suite_union: &BTreeSet<ApiRef>,
    ui_prefixes: &BTreeSet<String>,
    index: &PostIndex,
    k: usize,
) -> Result<GapReport, AnalyticsError> {
    if k == 0 {
        return Err(AnalyticsError::ZeroK);
    }
    let gap_apis: BTreeSet<ApiRef> = store
        .apis()
        .filter(|a| !suite_union.contains(a) && !ui_prefixes.contains(api_prefix(a)))
        .cloned()
        .collect();
    let mut groups: BTreeMap<String, Vec<(ApiRef, u64)>> = BTreeMap::new();
    for a in &gap_apis {
        let n = index.security(a);
        if n >= 1 {
            groups.entry(api_prefix(a).to_string()).or_default().push((a.clone(), n));
        }
    }
    let mut group_sizes = BTreeMap::new();
    for (p, list) in groups.iter_mut() {
        group_sizes.insert(p.clone(), list.len());
        list.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        list.truncate(k);
    }
    let suite_prefixes: BTreeSet<&str> = suite_union.iter().map(api_prefix).collect();
    let (known_prefixes, unknown_prefixes) = groups.keys().cloned().partition(|p| suite_prefixes.contains(p.as_str()));
    Ok(GapReport { gap_apis, groups, group_sizes, known_prefixes, unknown_prefixes })
}
