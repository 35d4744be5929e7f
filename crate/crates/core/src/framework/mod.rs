//! Platform class hierarchy: loading, member canonicalization and callback
//! detection.

pub mod classfile;

use std::collections::{BTreeMap, BTreeSet, HashSet, VecDeque};
use std::fmt::Write;
use std::path::Path;

use thiserror::Error;

use crate::apk::digest_hex;
use crate::dex::{ClassDef, MemberKind, MemberRef};

#[derive(Debug, Error)]
pub enum IndexError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("index line {line}: {reason}")]
    ParseError { line: usize, reason: String },
    #[error("class hierarchy cycle through {}", .0.join(" -> "))]
    HierarchyCycle(Vec<String>),
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ClassInfo {
    pub superclass: Option<String>,
    pub interfaces: Vec<String>,
    /// (name, descriptor)
    pub methods: BTreeSet<(String, String)>,
    /// (name, type)
    pub fields: BTreeSet<(String, String)>,
}

impl ClassInfo {
    pub fn declares(&self, m: &MemberRef) -> bool {
        let key = (m.name.clone(), m.descriptor.clone());
        match m.kind {
            MemberKind::Method => self.methods.contains(&key),
            MemberKind::Field => self.fields.contains(&key),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FrameworkIndex {
    pub classes: BTreeMap<String, ClassInfo>,
    /// Supertypes named by some record but not defined in the index.
    pub external: BTreeSet<String>,
    digest: String,
}

pub fn load_index(path: impl AsRef<Path>) -> Result<FrameworkIndex, IndexError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|source| IndexError::Io { path: path.display().to_string(), source })?;
    parse_index(&text)
}

pub fn parse_index(text: &str) -> Result<FrameworkIndex, IndexError> {
    let mut classes: BTreeMap<String, ClassInfo> = BTreeMap::new();
    let mut current: Option<String> = None;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let err = |reason: &str| IndexError::ParseError { line, reason: reason.to_string() };
        let body = raw.trim();
        if body.is_empty() || body.starts_with('#') {
            continue;
        }
        let mut parts = body.split_whitespace();
        match parts.next() {
            Some("C") => {
                let name = parts.next().ok_or_else(|| err("C record without class"))?;
                let sup = parts.next().ok_or_else(|| err("C record without superclass"))?;
                let mut interfaces = Vec::new();
                while let Some(tok) = parts.next() {
                    if tok != "I" {
                        return Err(err("expected `I <interface>`"));
                    }
                    interfaces.push(parts.next().ok_or_else(|| err("dangling `I`"))?.to_string());
                }
                if classes.contains_key(name) {
                    return Err(err("class defined twice"));
                }
                let superclass = (sup != "-").then(|| sup.to_string());
                classes.insert(name.to_string(), ClassInfo { superclass, interfaces, ..ClassInfo::default() });
                current = Some(name.to_string());
            }
            Some(kind @ ("M" | "F")) => {
                let owner = current.as_ref().ok_or_else(|| err("member before any class"))?;
                let name = parts.next().ok_or_else(|| err("member without name"))?;
                let desc = parts.next().ok_or_else(|| err("member without descriptor"))?;
                if parts.next().is_some() {
                    return Err(err("trailing tokens"));
                }
                if kind == "M" && !desc.starts_with('(') {
                    return Err(err("method descriptor must start with `(`"));
                }
                let info = classes.get_mut(owner).expect("current class exists");
                let set = if kind == "M" { &mut info.methods } else { &mut info.fields };
                set.insert((name.to_string(), desc.to_string()));
            }
            Some(other) => return Err(err(&format!("unknown record `{other}`"))),
            None => unreachable!("blank lines skipped"),
        }
    }
    FrameworkIndex::new(classes)
}

impl FrameworkIndex {
    /// Links the records: finds external supertypes and rejects cycles.
    pub fn new(classes: BTreeMap<String, ClassInfo>) -> Result<Self, IndexError> {
        let mut external = BTreeSet::new();
        for info in classes.values() {
            for s in info.superclass.iter().chain(&info.interfaces) {
                if !classes.contains_key(s) {
                    external.insert(s.clone());
                }
            }
        }
        check_acyclic(&classes)?;
        let mut index = FrameworkIndex { classes, external, digest: String::new() };
        index.digest = digest_hex(index.to_text().as_bytes());
        Ok(index)
    }

    pub fn contains(&self, class: &str) -> bool {
        self.classes.contains_key(class)
    }

    pub fn get(&self, class: &str) -> Option<&ClassInfo> {
        self.classes.get(class)
    }

    /// SHA-256 of the normalized index text; identifies the index in caches.
    pub fn digest(&self) -> &str {
        &self.digest
    }

    pub fn member_count(&self) -> (usize, usize) {
        self.classes.values().fold((0, 0), |(m, f), c| (m + c.methods.len(), f + c.fields.len()))
    }

    /// Renders the index file format, classes in path order.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (name, info) in &self.classes {
            let _ = write!(out, "C {name} {}", info.superclass.as_deref().unwrap_or("-"));
            for i in &info.interfaces {
                let _ = write!(out, " I {i}");
            }
            out.push('\n');
            for (n, d) in &info.methods {
                let _ = writeln!(out, "M {n} {d}");
            }
            for (n, t) in &info.fields {
                let _ = writeln!(out, "F {n} {t}");
            }
        }
        out
    }
}

fn check_acyclic(classes: &BTreeMap<String, ClassInfo>) -> Result<(), IndexError> {
    #[derive(Clone, Copy, PartialEq)]
    enum Mark {
        Open,
        Done,
    }
    let mut marks: BTreeMap<&str, Mark> = BTreeMap::new();
    for start in classes.keys() {
        if marks.contains_key(start.as_str()) {
            continue;
        }
        // iterative DFS; the path doubles as the cycle report
        let mut path: Vec<(&str, Vec<&str>)> = Vec::new();
        let succ = |c: &str| -> Vec<&str> {
            classes.get(c).map_or_else(Vec::new, |i| {
                i.superclass.iter().chain(&i.interfaces).map(String::as_str).filter(|s| classes.contains_key(*s)).collect()
            })
        };
        marks.insert(start, Mark::Open);
        path.push((start, succ(start)));
        while let Some((node, next)) = path.last_mut() {
            match next.pop() {
                Some(s) => match marks.get(s) {
                    Some(Mark::Open) => {
                        let from = path.iter().position(|(n, _)| *n == s).expect("open node on path");
                        let mut cycle: Vec<String> = path[from..].iter().map(|(n, _)| n.to_string()).collect();
                        cycle.push(s.to_string());
                        return Err(IndexError::HierarchyCycle(cycle));
                    }
                    Some(Mark::Done) => {}
                    None => {
                        marks.insert(s, Mark::Open);
                        path.push((s, succ(s)));
                    }
                },
                None => {
                    marks.insert(node, Mark::Done);
                    path.pop();
                }
            }
        }
    }
    Ok(())
}

/// A class hierarchy that declaration search can walk.
trait Hierarchy {
    fn known(&self, class: &str) -> bool;
    fn superclass(&self, class: &str) -> Option<&str>;
    fn interfaces(&self, class: &str) -> &[String];
    fn declares(&self, class: &str, m: &MemberRef) -> bool;
}

impl Hierarchy for FrameworkIndex {
    fn known(&self, class: &str) -> bool {
        self.classes.contains_key(class)
    }
    fn superclass(&self, class: &str) -> Option<&str> {
        self.classes.get(class)?.superclass.as_deref()
    }
    fn interfaces(&self, class: &str) -> &[String] {
        self.classes.get(class).map_or(&[], |c| c.interfaces.as_slice())
    }
    fn declares(&self, class: &str, m: &MemberRef) -> bool {
        self.classes.get(class).is_some_and(|c| c.declares(m))
    }
}

/// App classes layered over the platform. App classes contribute edges but
/// never declarations, so a search through them ends at framework classes.
struct Overlay<'a> {
    index: &'a FrameworkIndex,
    app: &'a BTreeMap<String, ClassDef>,
}

impl Hierarchy for Overlay<'_> {
    fn known(&self, class: &str) -> bool {
        self.app.contains_key(class) || self.index.known(class)
    }
    fn superclass(&self, class: &str) -> Option<&str> {
        match self.app.get(class) {
            Some(c) => c.superclass.as_deref(),
            None => self.index.superclass(class),
        }
    }
    fn interfaces(&self, class: &str) -> &[String] {
        match self.app.get(class) {
            Some(c) => &c.interfaces,
            None => self.index.interfaces(class),
        }
    }
    fn declares(&self, class: &str, m: &MemberRef) -> bool {
        !self.app.contains_key(class) && self.index.declares(class, m)
    }
}

/// One search step: the topmost declaring class on the superclass chain,
/// else the deepest declaring interface in breadth-first order (earliest
/// wins among equals).
fn resolve_once<H: Hierarchy>(h: &H, m: &MemberRef) -> Option<String> {
    if !h.known(&m.owner_class) {
        return None;
    }
    // constructors and static initializers are never inherited
    if m.kind == MemberKind::Method && (m.name == "<init>" || m.name == "<clinit>") {
        return h.declares(&m.owner_class, m).then(|| m.owner_class.clone());
    }
    let mut chain: Vec<&str> = Vec::new();
    let mut seen: HashSet<&str> = HashSet::new();
    let mut cur = Some(m.owner_class.as_str());
    while let Some(c) = cur {
        if !h.known(c) || !seen.insert(c) {
            break;
        }
        chain.push(c);
        cur = h.superclass(c);
    }
    if let Some(top) = chain.iter().rev().find(|c| h.declares(c, m)) {
        return Some(top.to_string());
    }

    let mut queue: VecDeque<(&str, usize)> = VecDeque::new();
    let mut visited: HashSet<&str> = HashSet::new();
    for c in &chain {
        for i in h.interfaces(c) {
            if visited.insert(i) {
                queue.push_back((i, 1));
            }
        }
    }
    let mut best: Option<(&str, usize)> = None;
    while let Some((i, depth)) = queue.pop_front() {
        if !h.known(i) {
            continue;
        }
        if h.declares(i, m) && best.is_none_or(|(_, d)| depth > d) {
            best = Some((i, depth));
        }
        for s in h.interfaces(i) {
            if visited.insert(s) {
                queue.push_back((s, depth + 1));
            }
        }
    }
    best.map(|(i, _)| i.to_string())
}

/// Re-owns `m` to its topmost declaring framework class, repeating the
/// search until the owner is stable so the result is idempotent. Refs whose
/// owner the index does not know, or that no ancestor declares, come back
/// unchanged, and constructors keep their owner.
pub fn canonical_declaring_class(index: &FrameworkIndex, m: &MemberRef) -> MemberRef {
    declaring_class(index, m).unwrap_or_else(|| m.clone())
}

/// Like [`canonical_declaring_class`] but `None` when nothing declares `m`.
pub fn declaring_class(index: &FrameworkIndex, m: &MemberRef) -> Option<MemberRef> {
    let mut owner = resolve_once(index, m)?;
    loop {
        let next = resolve_once(index, &m.with_owner(&owner)).expect("owner declares the member");
        if next == owner {
            return Some(m.with_owner(owner));
        }
        owner = next;
    }
}

/// Resolves a member named on an app class through the app hierarchy to the
/// framework class declaring it, canonicalized. `None` if no framework
/// ancestor declares it.
pub fn resolve_through_app(
    index: &FrameworkIndex,
    app_classes: &BTreeMap<String, ClassDef>,
    m: &MemberRef,
) -> Option<MemberRef> {
    let owner = resolve_once(&Overlay { index, app: app_classes }, m)?;
    declaring_class(index, &m.with_owner(owner))
}

/// App-defined methods that override a framework-declared method, reported
/// as the canonical framework ref. Constructors and static initializers are
/// not overrides.
pub fn framework_callbacks(index: &FrameworkIndex, app_classes: &BTreeMap<String, ClassDef>) -> BTreeSet<MemberRef> {
    app_classes
        .values()
        .flat_map(|c| c.members.iter())
        .filter(|m| m.kind == MemberKind::Method && m.name != "<init>" && m.name != "<clinit>")
        .filter_map(|m| resolve_through_app(index, app_classes, m))
        .collect()
}
