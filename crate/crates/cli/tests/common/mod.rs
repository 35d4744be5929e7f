#![allow(dead_code)]

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::net::TcpListener;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

pub fn fixture(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures").join(rel)
}

pub fn benchrep() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_benchrep"));
    c.env_remove("ANDROZOO_API_KEY");
    c
}

pub fn run(args: &[&str]) -> Output {
    benchrep().args(args).output().expect("spawn benchrep")
}

pub fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

pub fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

pub fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

pub fn index_path() -> PathBuf {
    fixture("framework/android-27-min.index")
}

pub fn profile(inputs: &[&Path], out: &Path, extra: &[&str]) -> Output {
    let mut args = vec!["profile"];
    args.extend(inputs.iter().map(|p| s(p)));
    let idx = index_path();
    args.extend(["--framework-index", s(&idx), "--out", s(out)]);
    args.extend(extra);
    run(&args)
}

/// Profile stores and post index for the fixture corpus and both suites.
pub struct Staged {
    pub corpus: PathBuf,
    pub alpha: PathBuf,
    pub beta: PathBuf,
    pub posts: PathBuf,
}

pub fn stage(dir: &Path) -> Staged {
    let mut stores = BTreeMap::new();
    for (name, input) in [("corpus", "corpus"), ("alpha", "suites/alpha"), ("beta", "suites/beta")] {
        let out = dir.join(name);
        let o = profile(&[&fixture(input)], &out, &[]);
        assert!(o.status.success(), "profile {name}: {}", stderr(&o));
        stores.insert(name, out.join("profiles.jsonl"));
    }
    let posts = dir.join("posts.tsv");
    let o = run(&[
        "mine",
        "--posts",
        s(&fixture("so/Posts.xml")),
        "--security-tags",
        s(&fixture("so/SecurityTags.xml")),
        "--profiles",
        s(&stores["corpus"]),
        "--profiles",
        s(&stores["alpha"]),
        "--profiles",
        s(&stores["beta"]),
        "--out",
        s(&posts),
    ]);
    assert!(o.status.success(), "mine: {}", stderr(&o));
    Staged { corpus: stores["corpus"].clone(), alpha: stores["alpha"].clone(), beta: stores["beta"].clone(), posts }
}

pub fn analyze<P: AsRef<Path>>(st: &Staged, suites: &[(&str, P)], out: &Path) -> Output {
    let specs: Vec<String> = suites.iter().map(|(n, p)| format!("{n}={}", p.as_ref().display())).collect();
    let mut args = vec!["analyze", "--corpus", s(&st.corpus), "--posts", s(&st.posts)];
    for spec in &specs {
        args.extend(["--suite", spec.as_str()]);
    }
    let (b, o, u) = (fixture("config/baseline.apis"), fixture("config/orthogonal.prefixes"), fixture("config/ui.prefixes"));
    args.extend(["--baseline", s(&b), "--orthogonal", s(&o), "--ui-prefixes", s(&u), "--top", "3", "--out", s(out)]);
    run(&args)
}

/// File name to contents for every file directly inside `dir`.
pub fn snapshot(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).unwrap())
        })
        .collect()
}

// ---------------------------------------------------------------- stub endpoint

pub struct Reply {
    pub status: u16,
    pub body: Vec<u8>,
}

/// Called with (apikey, sha256, request number starting at 0).
pub type Handler = dyn Fn(&str, &str, usize) -> Reply + Send + Sync;

pub struct Stub {
    pub url: String,
    pub hits: Arc<AtomicUsize>,
}

fn query_param<'a>(target: &'a str, key: &str) -> &'a str {
    let query = target.split_once('?').map(|(_, q)| q).unwrap_or("");
    query.split('&').filter_map(|kv| kv.split_once('=')).find(|(k, _)| *k == key).map(|(_, v)| v).unwrap_or("")
}

/// Serves one request per connection until the test process exits.
pub fn serve(handler: Box<Handler>) -> Stub {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}/api/download", listener.local_addr().unwrap());
    let hits = Arc::new(AtomicUsize::new(0));
    let counter = hits.clone();
    std::thread::spawn(move || {
        for conn in listener.incoming() {
            let Ok(mut conn) = conn else { continue };
            let mut req = Vec::new();
            let mut buf = [0u8; 1024];
            while !req.windows(4).any(|w| w == b"\r\n\r\n") {
                match conn.read(&mut buf) {
                    Ok(0) | Err(_) => break,
                    Ok(n) => req.extend_from_slice(&buf[..n]),
                }
            }
            let text = String::from_utf8_lossy(&req);
            let target = text.split(' ').nth(1).unwrap_or("");
            let n = counter.fetch_add(1, Ordering::SeqCst);
            let reply = handler(query_param(target, "apikey"), query_param(target, "sha256"), n);
            let head = format!(
                "HTTP/1.1 {} Stub\r\nContent-Type: application/vnd.android.package-archive\r\nContent-Length: {}\r\nConnection: close\r\n\r\n",
                reply.status,
                reply.body.len()
            );
            let _ = conn.write_all(head.as_bytes());
            let _ = conn.write_all(&reply.body);
        }
    });
    Stub { url, hits }
}

/// Serves `files` by digest to callers presenting `key`.
pub fn serve_files(files: BTreeMap<String, Vec<u8>>, key: &'static str) -> Stub {
    serve(Box::new(move |k, sha, _| {
        if k != key {
            return Reply { status: 401, body: b"bad key".to_vec() };
        }
        match files.get(sha) {
            Some(b) => Reply { status: 200, body: b.clone() },
            None => Reply { status: 404, body: Vec::new() },
        }
    }))
}

pub fn fetch(stub: &Stub, list: &Path, dest: &Path, key: Option<&str>) -> Output {
    let mut c = benchrep();
    c.args(["fetch", "--list", s(list), "--dest", s(dest), "--endpoint", &stub.url]);
    c.args(["--rate", "1000", "--backoff-ms", "1", "--retries", "2"]);
    if let Some(k) = key {
        c.env("ANDROZOO_API_KEY", k);
    }
    c.output().unwrap()
}

/// Two fixture APKs keyed by their SHA-256.
pub fn two_apks() -> BTreeMap<String, Vec<u8>> {
    ["apks/minimal.apk", "apks/app.apk"]
        .iter()
        .map(|rel| {
            let b = std::fs::read(fixture(rel)).unwrap();
            (benchrep_core::apk::digest_hex(&b), b)
        })
        .collect()
}

pub fn summary(o: &Output) -> (usize, usize, usize) {
    let line = stdout(o);
    let line = line.lines().find(|l| l.starts_with("fetched=")).unwrap_or_else(|| panic!("no summary in {line:?}"));
    let field = |k: &str| -> usize {
        line.split(' ').find_map(|f| f.strip_prefix(k)).unwrap().parse().unwrap()
    };
    (field("fetched="), field("skipped="), field("failed="))
}
