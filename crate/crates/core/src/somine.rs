//! Stack Exchange dump mining: which APIs are discussed in Android posts,
//! and which of those discussions carry a security tag.
//!
//! A discussion unit is a question together with all of its answers. Tags
//! live on the question only.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use chrono::{DateTime, NaiveDate, NaiveDateTime, TimeZone, Utc};
use quick_xml::events::{BytesStart, Event};
use quick_xml::Reader;
use rayon::prelude::*;
use thiserror::Error;

use crate::api::{ApiKind, ApiRef};

#[derive(Debug, Error)]
pub enum MineError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: row {row}: {reason}")]
    Parse { path: String, row: usize, reason: String },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TagSet {
    pub security_tags: BTreeSet<String>,
}

impl TagSet {
    pub fn new(tags: impl IntoIterator<Item = impl AsRef<str>>) -> Self {
        let mut security_tags: BTreeSet<String> = tags.into_iter().map(|t| t.as_ref().to_lowercase()).collect();
        security_tags.insert("security".to_string());
        TagSet { security_tags }
    }

    /// True iff `tags` holds a security tag other than `android`. Security
    /// Stack Exchange has an `android` tag of its own, which would otherwise
    /// mark every Android unit as a security one.
    pub fn marks_security(&self, tags: &BTreeSet<String>) -> bool {
        tags.iter().any(|t| t != "android" && self.security_tags.contains(t))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DiscussionUnit {
    pub question_id: u64,
    pub tags: BTreeSet<String>,
    pub text: String,
    pub last_activity: DateTime<Utc>,
    pub created: DateTime<Utc>,
}

pub fn default_cutoff() -> DateTime<Utc> {
    Utc.with_ymd_and_hms(2015, 1, 1, 0, 0, 0).unwrap()
}

/// Accepts `2015-01-01`, the dump's `2015-01-01T00:00:00.000` (read as UTC)
/// and RFC 3339.
pub fn parse_timestamp(s: &str) -> Option<DateTime<Utc>> {
    let s = s.trim();
    if let Ok(t) = DateTime::parse_from_rfc3339(s) {
        return Some(t.with_timezone(&Utc));
    }
    if let Ok(t) = NaiveDateTime::parse_from_str(s, "%Y-%m-%dT%H:%M:%S%.f") {
        return Some(t.and_utc());
    }
    NaiveDate::parse_from_str(s, "%Y-%m-%d").ok().map(|d| d.and_hms_opt(0, 0, 0).unwrap().and_utc())
}

pub fn activity_ok(unit: &DiscussionUnit, cutoff: DateTime<Utc>) -> bool {
    unit.last_activity >= cutoff
}

fn is_token_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_' || c == '$'
}

/// True iff `needle` occurs in `text` with a non-token character (or the
/// text edge) on both sides.
pub fn occurs_as_token(text: &str, needle: &str) -> bool {
    if needle.is_empty() {
        return false;
    }
    text.match_indices(needle).any(|(i, _)| {
        let before = text[..i].chars().next_back();
        let after = text[i + needle.len()..].chars().next();
        !before.is_some_and(is_token_char) && !after.is_some_and(is_token_char)
    })
}

/// The words that must all occur for `api` to count as discussed. The first
/// one is the most selective.
fn needles(api: &ApiRef) -> Vec<&str> {
    match api.kind {
        ApiKind::Method | ApiKind::Field => vec![api.member.as_str(), api.simple_class_name()],
        ApiKind::ManifestAttribute => vec![api.member.as_str(), api.class.as_str()],
        ApiKind::ManifestElement => vec![api.class.as_str()],
    }
}

pub fn api_discussed(unit: &DiscussionUnit, api: &ApiRef) -> bool {
    needles(api).into_iter().all(|n| occurs_as_token(&unit.text, n))
}

pub fn load_security_tags(path: impl AsRef<Path>) -> Result<TagSet, MineError> {
    let path = path.as_ref();
    let mut tags = Vec::new();
    for_each_row(path, |row, attrs| {
        if let Some(name) = attrs.get("TagName") {
            tags.push(name.clone());
        } else {
            return Err(format!("row {row} has no TagName"));
        }
        Ok(())
    })?;
    Ok(TagSet::new(tags))
}

fn open(path: &Path) -> Result<BufReader<File>, MineError> {
    File::open(path).map(BufReader::new).map_err(|source| MineError::Io { path: path.display().to_string(), source })
}

/// Streams every `<row>` element of a dump file, handing its attributes to `f`.
fn for_each_row(
    path: &Path,
    mut f: impl FnMut(usize, &HashMap<String, String>) -> Result<(), String>,
) -> Result<(), MineError> {
    let mut reader = Reader::from_reader(open(path)?);
    let parse_err = |row: usize, reason: String| MineError::Parse { path: path.display().to_string(), row, reason };
    let mut buf = Vec::new();
    let mut row = 0usize;
    loop {
        let event = reader.read_event_into(&mut buf).map_err(|e| parse_err(row + 1, e.to_string()))?;
        match event {
            Event::Empty(ref e) | Event::Start(ref e) if e.name().as_ref() == b"row" => {
                row += 1;
                let attrs = row_attributes(e, reader.decoder()).map_err(|r| parse_err(row, r))?;
                f(row, &attrs).map_err(|r| parse_err(row, r))?;
            }
            Event::Eof => break,
            _ => {}
        }
        buf.clear();
    }
    Ok(())
}

fn row_attributes(e: &BytesStart<'_>, decoder: quick_xml::encoding::Decoder) -> Result<HashMap<String, String>, String> {
    let mut out = HashMap::new();
    for a in e.attributes() {
        let a = a.map_err(|e| e.to_string())?;
        let key = String::from_utf8_lossy(a.key.as_ref()).into_owned();
        let value = a.decode_and_unescape_value(decoder).map_err(|e| e.to_string())?;
        out.insert(key, value.into_owned());
    }
    Ok(out)
}

/// Splits `<a><b>` or `|a|b|` into lowercase tags.
pub fn parse_tags(s: &str) -> BTreeSet<String> {
    s.split(['<', '>', '|']).filter(|t| !t.is_empty()).map(str::to_lowercase).collect()
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PostIndex {
    pub android_count: BTreeMap<ApiRef, u64>,
    pub security_count: BTreeMap<ApiRef, u64>,
    /// (android units, security units) that passed the activity cutoff.
    pub totals: (u64, u64),
    pub orphan_answers: u64,
}

impl PostIndex {
    pub fn android(&self, api: &ApiRef) -> u64 {
        self.android_count.get(api).copied().unwrap_or(0)
    }

    pub fn security(&self, api: &ApiRef) -> u64 {
        self.security_count.get(api).copied().unwrap_or(0)
    }

    /// Adds another shard's counts. Shards must hold disjoint questions.
    pub fn merge(mut self, other: PostIndex) -> PostIndex {
        for (a, n) in other.android_count {
            *self.android_count.entry(a).or_default() += n;
        }
        for (a, n) in other.security_count {
            *self.security_count.entry(a).or_default() += n;
        }
        self.totals.0 += other.totals.0;
        self.totals.1 += other.totals.1;
        self.orphan_answers += other.orphan_answers;
        self
    }

    /// Counts `unit` against every API it discusses.
    pub fn add_unit(&mut self, unit: &DiscussionUnit, matcher: &Matcher, tagset: &TagSet, cutoff: DateTime<Utc>) {
        if !unit.tags.contains("android") || !activity_ok(unit, cutoff) {
            return;
        }
        let security = tagset.marks_security(&unit.tags);
        self.totals.0 += 1;
        if security {
            self.totals.1 += 1;
        }
        for api in matcher.discussed(&unit.text) {
            *self.android_count.entry(api.clone()).or_default() += 1;
            if security {
                *self.security_count.entry(api.clone()).or_default() += 1;
            }
        }
    }

    /// An index over `apis` with every count at zero.
    pub fn seeded<'a>(apis: impl IntoIterator<Item = &'a ApiRef>) -> PostIndex {
        let android_count: BTreeMap<ApiRef, u64> = apis.into_iter().map(|a| (a.clone(), 0)).collect();
        PostIndex { security_count: android_count.clone(), android_count, ..PostIndex::default() }
    }

    /// Writes `# units android=N security=M orphans=K` then one
    /// `ApiRef<TAB>android<TAB>security` row per API, sorted.
    pub fn write(&self, mut w: impl Write) -> std::io::Result<()> {
        writeln!(w, "# units android={} security={} orphans={}", self.totals.0, self.totals.1, self.orphan_answers)?;
        for (api, n) in &self.android_count {
            writeln!(w, "{api}\t{n}\t{}", self.security(api))?;
        }
        w.flush()
    }

    pub fn read(path: impl AsRef<Path>) -> Result<PostIndex, MineError> {
        let path = path.as_ref();
        let perr = |row: usize, reason: String| MineError::Parse { path: path.display().to_string(), row, reason };
        let mut idx = PostIndex::default();
        for (i, line) in open(path)?.lines().enumerate() {
            let line = line.map_err(|source| MineError::Io { path: path.display().to_string(), source })?;
            let row = i + 1;
            if let Some(header) = line.strip_prefix("# units ") {
                for kv in header.split_whitespace() {
                    let (k, v) = kv.split_once('=').ok_or_else(|| perr(row, format!("bad header field `{kv}`")))?;
                    let v: u64 = v.parse().map_err(|_| perr(row, format!("bad number in `{kv}`")))?;
                    match k {
                        "android" => idx.totals.0 = v,
                        "security" => idx.totals.1 = v,
                        "orphans" => idx.orphan_answers = v,
                        _ => return Err(perr(row, format!("unknown header field `{k}`"))),
                    }
                }
                continue;
            }
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let cols: Vec<&str> = line.split('\t').collect();
            let [api, a, s] = cols[..] else {
                return Err(perr(row, format!("expected 3 columns, found {}", cols.len())));
            };
            let api: ApiRef = api.parse().map_err(|e| perr(row, format!("{e}")))?;
            let a: u64 = a.parse().map_err(|_| perr(row, format!("bad android count `{a}`")))?;
            let s: u64 = s.parse().map_err(|_| perr(row, format!("bad security count `{s}`")))?;
            if s > a || a > idx.totals.0 || s > idx.totals.1 {
                return Err(perr(row, format!("counts {a}/{s} exceed their totals")));
            }
            idx.android_count.insert(api.clone(), a);
            idx.security_count.insert(api, s);
        }
        Ok(idx)
    }
}

struct Needle {
    text: String,
    /// Made only of token characters, so a token-set lookup decides it.
    plain: bool,
}

impl Needle {
    fn new(s: &str) -> Needle {
        Needle { text: s.to_string(), plain: !s.is_empty() && s.chars().all(is_token_char) }
    }

    fn found(&self, text: &str, tokens: &HashSet<&str>) -> bool {
        if self.plain {
            tokens.contains(self.text.as_str())
        } else {
            occurs_as_token(text, &self.text)
        }
    }
}

/// Matches many APIs against a text at once. APIs are bucketed by a word
/// every match must contain, so a text only checks the APIs whose key word
/// it holds.
pub struct Matcher {
    apis: Vec<(ApiRef, Vec<Needle>)>,
    by_key: HashMap<String, Vec<usize>>,
    unkeyed: Vec<usize>,
}

impl Matcher {
    pub fn new<'a>(apis: impl IntoIterator<Item = &'a ApiRef>) -> Matcher {
        let mut m = Matcher { apis: Vec::new(), by_key: HashMap::new(), unkeyed: Vec::new() };
        for api in apis {
            let ns: Vec<Needle> = needles(api).into_iter().map(Needle::new).collect();
            let i = m.apis.len();
            // any run of token characters inside a bounded occurrence is itself a whole token
            match ns[0].text.split(|c| !is_token_char(c)).find(|w| !w.is_empty()) {
                Some(key) => m.by_key.entry(key.to_string()).or_default().push(i),
                None => m.unkeyed.push(i),
            }
            m.apis.push((api.clone(), ns));
        }
        m
    }

    pub fn apis(&self) -> impl Iterator<Item = &ApiRef> {
        self.apis.iter().map(|(a, _)| a)
    }

    /// Every API discussed in `text`, each once.
    pub fn discussed<'s>(&'s self, text: &str) -> Vec<&'s ApiRef> {
        let tokens: HashSet<&str> = text.split(|c| !is_token_char(c)).filter(|t| !t.is_empty()).collect();
        let mut hits: Vec<usize> = tokens
            .iter()
            .filter_map(|t| self.by_key.get(*t))
            .flatten()
            .chain(&self.unkeyed)
            .copied()
            .filter(|&i| self.apis[i].1.iter().all(|n| n.found(text, &tokens)))
            .collect();
        hits.sort_unstable();
        hits.dedup();
        hits.into_iter().map(|i| &self.apis[i].0).collect()
    }
}

/// Options for [`build_post_index`].
#[derive(Debug, Clone)]
pub struct MineOptions {
    pub cutoff: DateTime<Utc>,
    /// Units are questions alone; answers are ignored.
    pub question_only: bool,
    /// Comments.xml-shaped files whose dates extend a post's activity.
    pub comments: Option<PathBuf>,
    /// Votes.xml-shaped files whose dates extend a post's activity.
    pub votes: Option<PathBuf>,
}

impl Default for MineOptions {
    fn default() -> Self {
        MineOptions { cutoff: default_cutoff(), question_only: false, comments: None, votes: None }
    }
}

struct Question {
    tags: BTreeSet<String>,
    title: String,
    body: String,
    created: DateTime<Utc>,
    last_activity: DateTime<Utc>,
}

struct Answer {
    id: u64,
    body: String,
    last_activity: DateTime<Utc>,
}

/// Assembled units plus the number of answers whose question never appeared.
pub struct Units {
    pub units: Vec<DiscussionUnit>,
    pub orphan_answers: u64,
}

fn required<'a>(attrs: &'a HashMap<String, String>, key: &str) -> Result<&'a str, String> {
    attrs.get(key).map(String::as_str).ok_or_else(|| format!("missing {key}"))
}

fn id_attr(attrs: &HashMap<String, String>, key: &str) -> Result<u64, String> {
    let v = required(attrs, key)?;
    v.parse().map_err(|_| format!("bad {key} `{v}`"))
}

fn date_attr(attrs: &HashMap<String, String>, key: &str) -> Result<DateTime<Utc>, String> {
    let v = required(attrs, key)?;
    parse_timestamp(v).ok_or_else(|| format!("bad {key} `{v}`"))
}

/// Latest `CreationDate` per `PostId` in a comments or votes file.
fn activity_dates(path: &Path, into: &mut HashMap<u64, DateTime<Utc>>) -> Result<(), MineError> {
    for_each_row(path, |_, attrs| {
        let post = id_attr(attrs, "PostId")?;
        let when = date_attr(attrs, "CreationDate")?;
        let slot = into.entry(post).or_insert(when);
        *slot = (*slot).max(when);
        Ok(())
    })
}

/// Reads a posts dump into Android discussion units. Rows may come in any
/// order. Questions without the `android` tag are dropped while reading.
pub fn read_units(dump: impl AsRef<Path>, opts: &MineOptions) -> Result<Units, MineError> {
    let dump = dump.as_ref();
    let mut extra = HashMap::new();
    for p in [&opts.comments, &opts.votes].into_iter().flatten() {
        activity_dates(p, &mut extra)?;
    }

    let mut questions: BTreeMap<u64, Question> = BTreeMap::new();
    let mut other_questions: HashSet<u64> = HashSet::new();
    let mut answers: HashMap<u64, Vec<Answer>> = HashMap::new();
    for_each_row(dump, |_, attrs| {
        let id = id_attr(attrs, "Id")?;
        match required(attrs, "PostTypeId")? {
            "1" => {
                let tags = parse_tags(attrs.get("Tags").map(String::as_str).unwrap_or(""));
                if tags.is_empty() {
                    return Err(format!("question {id} has no tags"));
                }
                if !tags.contains("android") {
                    other_questions.insert(id);
                    answers.remove(&id);
                    return Ok(());
                }
                let q = Question {
                    tags,
                    title: attrs.get("Title").cloned().unwrap_or_default(),
                    body: attrs.get("Body").cloned().unwrap_or_default(),
                    created: date_attr(attrs, "CreationDate")?,
                    last_activity: date_attr(attrs, "LastActivityDate")?,
                };
                questions.insert(id, q);
            }
            "2" => {
                let parent = id_attr(attrs, "ParentId")?;
                if other_questions.contains(&parent) {
                    return Ok(());
                }
                let a = Answer {
                    id,
                    body: if opts.question_only { String::new() } else { attrs.get("Body").cloned().unwrap_or_default() },
                    last_activity: date_attr(attrs, "LastActivityDate")?,
                };
                answers.entry(parent).or_default().push(a);
            }
            // wikis, excerpts and the like carry no discussion
            _ => {}
        }
        Ok(())
    })?;

    let orphan_answers =
        answers.iter().filter(|(p, _)| !questions.contains_key(p)).map(|(_, v)| v.len() as u64).sum();
    let units = questions
        .into_iter()
        .map(|(id, q)| {
            let mut mine = answers.remove(&id).unwrap_or_default();
            mine.sort_by_key(|a| a.id);
            let mut last = q.last_activity;
            for when in mine.iter().map(|a| a.last_activity) {
                last = last.max(when);
            }
            for post in std::iter::once(id).chain(mine.iter().map(|a| a.id)) {
                if let Some(&when) = extra.get(&post) {
                    last = last.max(when);
                }
            }
            let mut text = html_escape::decode_html_entities(&q.title).into_owned();
            text.push('\n');
            text.push_str(&html_escape::decode_html_entities(&q.body));
            if !opts.question_only {
                for a in &mine {
                    text.push('\n');
                    text.push_str(&html_escape::decode_html_entities(&a.body));
                }
            }
            DiscussionUnit { question_id: id, tags: q.tags, text, last_activity: last, created: q.created }
        })
        .collect();
    Ok(Units { units, orphan_answers })
}

/// Counts, per API, the Android units that discuss it and the subset that
/// also carry a security tag.
pub fn build_post_index<'a>(
    dump: impl AsRef<Path>,
    apis: impl IntoIterator<Item = &'a ApiRef>,
    tagset: &TagSet,
    opts: &MineOptions,
) -> Result<PostIndex, MineError> {
    let Units { units, orphan_answers } = read_units(dump, opts)?;
    let matcher = Matcher::new(apis);
    let mut idx = index_units(&units, &matcher, tagset, opts.cutoff);
    idx.orphan_answers = orphan_answers;
    Ok(idx)
}

/// Parallel count over already assembled units.
pub fn index_units(units: &[DiscussionUnit], matcher: &Matcher, tagset: &TagSet, cutoff: DateTime<Utc>) -> PostIndex {
    let empty = PostIndex::seeded(matcher.apis());
    units
        .par_chunks(256)
        .map(|chunk| {
            let mut idx = empty.clone();
            for u in chunk {
                idx.add_unit(u, matcher, tagset, cutoff);
            }
            idx
        })
        .reduce(|| empty.clone(), PostIndex::merge)
}
