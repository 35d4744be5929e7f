//! Brute-force reference implementations shared by the integration tests
//! and the acceptance run.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use benchrep_core::api::{ApiKind, ApiRef};
use benchrep_core::profile::AppProfile;
use benchrep_core::somine::{parse_timestamp, PostIndex};

// ---------------------------------------------------------------- oracle
//
// Reads rows with plain string scanning, decodes entities by hand, builds
// each unit by scanning the whole dump for its answers and tests every
// (unit, api) pair by checking every text position.

pub fn unescape(s: &str) -> String {
    let mut out = String::new();
    let mut rest = s;
    while let Some(i) = rest.find('&') {
        out.push_str(&rest[..i]);
        rest = &rest[i..];
        let end = rest.find(';').expect("entity terminator");
        let ent = &rest[1..end];
        let c = match ent {
            "lt" => '<',
            "gt" => '>',
            "amp" => '&',
            "quot" => '"',
            "apos" => '\'',
            _ if ent.starts_with("#x") => char::from_u32(u32::from_str_radix(&ent[2..], 16).unwrap()).unwrap(),
            _ if ent.starts_with('#') => char::from_u32(ent[1..].parse().unwrap()).unwrap(),
            _ => panic!("unknown entity {ent}"),
        };
        out.push(c);
        rest = &rest[end + 1..];
    }
    out.push_str(rest);
    out
}

pub fn naive_rows(text: &str) -> Vec<BTreeMap<String, String>> {
    let mut rows = Vec::new();
    for line in text.lines() {
        let Some(body) = line.trim().strip_prefix("<row ") else { continue };
        let mut row = BTreeMap::new();
        let mut rest = body;
        while let Some(eq) = rest.find("=\"") {
            let key = rest[..eq].trim().to_string();
            let after = &rest[eq + 2..];
            let close = after.find('"').unwrap();
            row.insert(key, unescape(&after[..close]));
            rest = &after[close + 1..];
        }
        rows.push(row);
    }
    rows
}

fn tok(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_' || c == '$'
}

pub fn naive_occurs(text: &str, needle: &str) -> bool {
    let chars: Vec<char> = text.chars().collect();
    let n: Vec<char> = needle.chars().collect();
    if n.is_empty() || n.len() > chars.len() {
        return false;
    }
    (0..=chars.len() - n.len()).any(|i| {
        chars[i..i + n.len()] == n[..]
            && (i == 0 || !tok(chars[i - 1]))
            && (i + n.len() == chars.len() || !tok(chars[i + n.len()]))
    })
}

pub fn naive_simple_name(class: &str) -> &str {
    let seg = class.rsplit('/').next().unwrap();
    seg.rsplit('$').next().unwrap()
}

pub fn naive_discussed(text: &str, api: &ApiRef) -> bool {
    match api.kind {
        ApiKind::Method | ApiKind::Field => {
            naive_occurs(text, naive_simple_name(&api.class)) && naive_occurs(text, &api.member)
        }
        ApiKind::ManifestAttribute => naive_occurs(text, &api.class) && naive_occurs(text, &api.member),
        ApiKind::ManifestElement => naive_occurs(text, &api.class),
    }
}

pub fn so_oracle(dump: &str, apis: &BTreeSet<ApiRef>, tags: &BTreeSet<String>) -> PostIndex {
    let rows = naive_rows(dump);
    let cutoff = parse_timestamp("2015-01-01T00:00:00Z").unwrap();
    let mut idx = PostIndex::default();
    for a in apis {
        idx.android_count.insert(a.clone(), 0);
        idx.security_count.insert(a.clone(), 0);
    }
    let question_ids: BTreeSet<&str> =
        rows.iter().filter(|r| r["PostTypeId"] == "1").map(|r| r["Id"].as_str()).collect();
    idx.orphan_answers =
        rows.iter().filter(|r| r["PostTypeId"] == "2" && !question_ids.contains(r["ParentId"].as_str())).count() as u64;
    for q in rows.iter().filter(|r| r["PostTypeId"] == "1") {
        let qtags: BTreeSet<String> = q["Tags"]
            .trim_start_matches('<')
            .trim_end_matches('>')
            .split("><")
            .map(|t| t.to_lowercase())
            .collect();
        if !qtags.contains("android") {
            continue;
        }
        let mut answers: Vec<&BTreeMap<String, String>> =
            rows.iter().filter(|r| r["PostTypeId"] == "2" && r["ParentId"] == q["Id"]).collect();
        answers.sort_by_key(|a| a["Id"].parse::<u64>().unwrap());
        let mut last = parse_timestamp(&q["LastActivityDate"]).unwrap();
        for a in &answers {
            last = last.max(parse_timestamp(&a["LastActivityDate"]).unwrap());
        }
        if last < cutoff {
            continue;
        }
        let mut text = unescape(q.get("Title").map(String::as_str).unwrap_or(""));
        text.push('\n');
        text.push_str(&unescape(q.get("Body").map(String::as_str).unwrap_or("")));
        for a in &answers {
            text.push('\n');
            text.push_str(&unescape(&a["Body"]));
        }
        // android is itself a Security Stack Exchange tag and cannot be the marker
        let security = qtags.iter().any(|t| t != "android" && tags.contains(t));
        idx.totals.0 += 1;
        idx.totals.1 += security as u64;
        for api in apis {
            if naive_discussed(&text, api) {
                *idx.android_count.get_mut(api).unwrap() += 1;
                if security {
                    *idx.security_count.get_mut(api).unwrap() += 1;
                }
            }
        }
    }
    idx
}

// ---------------------------------------------------------------- statistics

/// Hyndman and Fan type 7 with 1-based order statistics.
pub fn oracle_quantile(xs: &[f64], p: f64) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let h = (v.len() as f64 - 1.0) * p + 1.0;
    let j = h.floor() as usize;
    if j >= v.len() {
        return v[v.len() - 1];
    }
    v[j - 1] + (h - j as f64) * (v[j] - v[j - 1])
}

// ---------------------------------------------------------------- gap analysis

/// Gap set, ranked groups and known prefixes.
pub type GapParts = (BTreeSet<ApiRef>, BTreeMap<String, Vec<(ApiRef, u64)>>, BTreeSet<String>);

pub fn oracle_gap(
    ps: &[AppProfile],
    suite_union: &BTreeSet<ApiRef>,
    ui: &BTreeSet<String>,
    idx: &PostIndex,
    k: usize,
) -> GapParts {
    let prefix = |a: &ApiRef| a.class.split('/').take(2).collect::<Vec<_>>().join("/");
    let corpus: BTreeSet<ApiRef> = ps.iter().flat_map(|p| p.apis.iter().cloned()).collect();
    let gap: BTreeSet<ApiRef> =
        corpus.into_iter().filter(|a| !suite_union.contains(a) && !ui.contains(&prefix(a))).collect();
    let mut groups: BTreeMap<String, Vec<(ApiRef, u64)>> = BTreeMap::new();
    for p in gap.iter().map(prefix).collect::<BTreeSet<_>>() {
        let mut members: Vec<(ApiRef, u64)> = gap
            .iter()
            .filter(|a| prefix(a) == p && idx.security(a) > 0)
            .map(|a| (a.clone(), idx.security(a)))
            .collect();
        // selection sort by count desc, api asc
        let mut ranked = Vec::new();
        while !members.is_empty() && ranked.len() < k {
            let mut best = 0;
            for i in 1..members.len() {
                let (a, n) = &members[i];
                let (b, bn) = &members[best];
                if n > bn || (n == bn && a < b) {
                    best = i;
                }
            }
            ranked.push(members.remove(best));
        }
        if !ranked.is_empty() {
            groups.insert(p, ranked);
        }
    }
    let suite_prefixes: BTreeSet<String> = suite_union.iter().map(prefix).collect();
    let known = groups.keys().filter(|p| suite_prefixes.contains(*p)).cloned().collect();
    (gap, groups, known)
}
