//! The analysis report bundle: every table computed from one set of inputs,
//! written as fixed-header CSV files plus one JSON record file.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::analytics::{
    compare_suites, five_number, gap_analysis, tier_apis, usage_percentage, used_by_more_than, AnalyticsError,
    ComparisonReport, FiveNumber, GapReport, TierReport,
};
use crate::api::ApiRef;
use crate::profile::CorpusStore;
use crate::somine::PostIndex;

/// Usage threshold, in percent, for the "widely used" column.
pub const WIDE_USE_PERCENT: f64 = 60.0;

pub struct AnalysisInputs<'a> {
    pub corpus: &'a CorpusStore,
    /// Suite name to the union of its benchmarks' APIs.
    pub suites: &'a BTreeMap<String, BTreeSet<ApiRef>>,
    pub index: &'a PostIndex,
    pub baseline: &'a BTreeSet<ApiRef>,
    pub orthogonal: &'a BTreeSet<String>,
    pub ui_prefixes: &'a BTreeSet<String>,
    pub k: usize,
}

/// One point of a suite's usage plot.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlotRow {
    pub api: ApiRef,
    pub usage_percent: f64,
    pub android_post_percent: f64,
}

/// A five-number summary of post counts, with the same summary as a
/// percentage of all units of that kind.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PostSummary {
    pub apis: usize,
    pub counts: Option<FiveNumber>,
    pub percent: Option<FiveNumber>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteReport {
    pub tiers: TierReport,
    pub widely_used_relevant: usize,
    pub plot: Vec<PlotRow>,
    pub relevant_posts: PostSummary,
    pub security_posts: PostSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Bundle {
    pub corpus_size: u64,
    pub android_units: u64,
    pub security_units: u64,
    pub suites: BTreeMap<String, SuiteReport>,
    pub comparisons: Vec<ComparisonReport>,
    pub gap: GapReport,
    pub gap_posts: PostSummary,
}

fn percent(n: u64, of: u64) -> f64 {
    if of == 0 {
        0.0
    } else {
        100.0 * n as f64 / of as f64
    }
}

fn summarize(counts: Vec<u64>, total: u64) -> Result<PostSummary, AnalyticsError> {
    if counts.is_empty() {
        return Ok(PostSummary { apis: 0, counts: None, percent: None });
    }
    let values: Vec<f64> = counts.iter().map(|&c| c as f64).collect();
    let f = five_number(&values)?;
    let scale = if total == 0 { 0.0 } else { 100.0 / total as f64 };
    Ok(PostSummary { apis: counts.len(), counts: Some(f), percent: Some(f.scaled(scale)) })
}

pub fn analyze(inp: &AnalysisInputs<'_>) -> Result<Bundle, AnalyticsError> {
    let (android_units, security_units) = inp.index.totals;
    let mut suites = BTreeMap::new();
    for (name, apis) in inp.suites {
        let tiers = tier_apis(apis, inp.baseline, inp.orthogonal, inp.index);
        let mut plot = tiers
            .relevant
            .iter()
            .map(|a| {
                Ok(PlotRow {
                    api: a.clone(),
                    usage_percent: usage_percentage(inp.corpus, a)?,
                    android_post_percent: percent(inp.index.android(a), android_units),
                })
            })
            .collect::<Result<Vec<_>, AnalyticsError>>()?;
        plot.sort_by(|a, b| b.usage_percent.total_cmp(&a.usage_percent).then_with(|| a.api.cmp(&b.api)));
        let report = SuiteReport {
            widely_used_relevant: used_by_more_than(inp.corpus, &tiers.relevant, WIDE_USE_PERCENT)?,
            relevant_posts: summarize(tiers.relevant.iter().map(|a| inp.index.android(a)).collect(), android_units)?,
            security_posts: summarize(tiers.security.iter().map(|a| inp.index.security(a)).collect(), security_units)?,
            plot,
            tiers,
        };
        suites.insert(name.clone(), report);
    }

    let names: Vec<&String> = suites.keys().collect();
    let mut comparisons = Vec::new();
    for (i, x) in names.iter().enumerate() {
        for y in &names[i + 1..] {
            comparisons.push(compare_suites(x, &suites[*x].tiers.filtered, y, &suites[*y].tiers.filtered));
        }
    }

    let suite_union: BTreeSet<ApiRef> = inp.suites.values().flatten().cloned().collect();
    let gap = gap_analysis(inp.corpus, &suite_union, inp.ui_prefixes, inp.index, inp.k)?;
    let gap_counts: Vec<u64> = gap.gap_apis.iter().map(|a| inp.index.security(a)).filter(|&n| n > 0).collect();
    let gap_posts = summarize(gap_counts, security_units)?;

    Ok(Bundle {
        corpus_size: inp.corpus.corpus_size,
        android_units,
        security_units,
        suites,
        comparisons,
        gap,
        gap_posts,
    })
}

fn num(v: f64) -> String {
    format!("{v:.4}")
}

fn summary_cells(s: &PostSummary) -> Vec<String> {
    let mut cells = vec![s.apis.to_string()];
    for f in [s.counts, s.percent] {
        match f {
            Some(f) => cells.extend(f.as_array().map(num)),
            None => cells.extend(std::iter::repeat_n("NA".to_string(), 5)),
        }
    }
    cells
}

const SUMMARY_HEADER: [&str; 11] =
    ["apis", "min", "q1", "median", "q3", "max", "min_pct", "q1_pct", "median_pct", "q3_pct", "max_pct"];

/// Suite names become file names; anything outside `[A-Za-z0-9._-]` turns into `_`.
pub fn file_stem(name: &str) -> String {
    name.chars().map(|c| if c.is_ascii_alphanumeric() || "._-".contains(c) { c } else { '_' }).collect()
}

fn csv_file(dir: &Path, name: &str, header: &[&str], rows: Vec<Vec<String>>) -> std::io::Result<PathBuf> {
    let path = dir.join(name);
    let mut w = csv::Writer::from_path(&path)?;
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    w.flush()?;
    Ok(path)
}

/// Writes the bundle into `dir` and returns the files written, in order.
///
/// - `tiers.csv`: suite, five tier sizes, relevant APIs above 60% usage
/// - `usage-<suite>.csv`: plot data, one row per relevant API by usage
/// - `compare.csv`: filtered-API overlap for every suite pair
/// - `posts-relevant.csv`, `posts-security.csv`: post count summaries per suite
/// - `gap-posts.csv`, `gap-known.csv`, `gap-unknown.csv`, `gap-top.csv`
/// - `report.json`: everything above as structured records
pub fn write_bundle(bundle: &Bundle, dir: &Path) -> std::io::Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut files = Vec::new();

    let tiers = bundle
        .suites
        .iter()
        .map(|(name, s)| {
            let mut r = vec![name.clone()];
            r.extend(s.tiers.sizes().map(|n| n.to_string()));
            r.push(s.widely_used_relevant.to_string());
            r
        })
        .collect();
    files.push(csv_file(
        dir,
        "tiers.csv",
        &["suite", "total", "considered", "filtered", "relevant", "security", "relevant_over_60pct"],
        tiers,
    )?);

    for (name, s) in &bundle.suites {
        let rows = s
            .plot
            .iter()
            .map(|p| vec![p.api.to_string(), num(p.usage_percent), num(p.android_post_percent)])
            .collect();
        let file = format!("usage-{}.csv", file_stem(name));
        files.push(csv_file(dir, &file, &["api", "usage_percent", "android_post_percent"], rows)?);
    }

    let rows = bundle
        .comparisons
        .iter()
        .map(|c| {
            vec![
                c.x.clone(),
                c.y.clone(),
                c.common.len().to_string(),
                c.unique_x.len().to_string(),
                c.unique_y.len().to_string(),
            ]
        })
        .collect();
    files.push(csv_file(dir, "compare.csv", &["x", "y", "common", "unique_x", "unique_y"], rows)?);

    let mut header = vec!["suite"];
    header.extend(SUMMARY_HEADER);
    for (file, pick) in [
        ("posts-relevant.csv", (|s: &SuiteReport| &s.relevant_posts) as fn(&SuiteReport) -> &PostSummary),
        ("posts-security.csv", |s: &SuiteReport| &s.security_posts),
    ] {
        let rows = bundle
            .suites
            .iter()
            .map(|(name, s)| {
                let mut r = vec![name.clone()];
                r.extend(summary_cells(pick(s)));
                r
            })
            .collect();
        files.push(csv_file(dir, file, &header, rows)?);
    }
    files.push(csv_file(dir, "gap-posts.csv", &SUMMARY_HEADER, vec![summary_cells(&bundle.gap_posts)])?);

    for (file, set) in [("gap-known.csv", &bundle.gap.known_prefixes), ("gap-unknown.csv", &bundle.gap.unknown_prefixes)] {
        let rows = bundle.gap.ranked(set).into_iter().map(|(p, n)| vec![p.to_string(), n.to_string()]).collect();
        files.push(csv_file(dir, file, &["prefix", "apis"], rows)?);
    }

    let mut rows = Vec::new();
    for (prefix, list) in &bundle.gap.groups {
        let known = bundle.gap.known_prefixes.contains(prefix);
        for (rank, (api, n)) in list.iter().enumerate() {
            rows.push(vec![prefix.clone(), known.to_string(), (rank + 1).to_string(), api.to_string(), n.to_string()]);
        }
    }
    files.push(csv_file(dir, "gap-top.csv", &["prefix", "known", "rank", "api", "security_posts"], rows)?);

    let json = dir.join("report.json");
    let mut text = serde_json::to_string_pretty(bundle).map_err(std::io::Error::other)?;
    text.push('\n');
    std::fs::write(&json, text)?;
    files.push(json);
    Ok(files)
}
