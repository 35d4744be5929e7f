//! Resumable, rate-limited APK downloads from an AndroZoo-compatible API.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use anyhow::Context;
use benchrep_core::apk::digest_hex;
use clap::Args;
use reqwest::blocking::Client;
use reqwest::StatusCode;

use crate::{fail, EXIT_INPUT, EXIT_PARTIAL, EXIT_USAGE};

pub const API_KEY_VAR: &str = "ANDROZOO_API_KEY";
pub const ERRORS_FILE: &str = "fetch-errors.tsv";

#[derive(Args)]
pub struct FetchArgs {
    /// Newline-separated SHA-256 digests; blank lines and `#` comments are skipped.
    #[arg(long)]
    list: PathBuf,
    #[arg(long, default_value = "https://androzoo.uni.lu/api/download")]
    endpoint: String,
    /// Directory the APKs are saved to as `<sha256>.apk`.
    #[arg(long)]
    dest: PathBuf,
    /// Requests per second, at most.
    #[arg(long, default_value_t = 2.0)]
    rate: f64,
    /// Extra attempts after a transient failure.
    #[arg(long, default_value_t = 3)]
    retries: u32,
    /// First retry delay in milliseconds; doubles on every further attempt.
    #[arg(long, default_value_t = 1000)]
    backoff_ms: u64,
    #[arg(long, default_value_t = 300)]
    timeout_secs: u64,
}

#[derive(Debug, Default, Clone, Copy, PartialEq, Eq)]
pub struct Summary {
    pub fetched: usize,
    pub skipped: usize,
    pub failed: usize,
}

enum Outcome {
    Saved,
    /// Not worth retrying.
    Fatal(String),
    Retry(String, Option<Duration>),
    Auth(StatusCode),
}

struct Fetcher {
    client: Client,
    endpoint: String,
    key: String,
    interval: Duration,
    last: Option<Instant>,
}

impl Fetcher {
    fn pace(&mut self) {
        if let Some(last) = self.last {
            let since = last.elapsed();
            if since < self.interval {
                std::thread::sleep(self.interval - since);
            }
        }
        self.last = Some(Instant::now());
    }

    fn attempt(&mut self, sha: &str, dest: &Path) -> Outcome {
        self.pace();
        let resp = self.client.get(&self.endpoint).query(&[("apikey", self.key.as_str()), ("sha256", sha)]).send();
        // the request URL carries the key, so it never goes into messages
        let resp = match resp {
            Ok(r) => r,
            Err(e) => return Outcome::Retry(e.without_url().to_string(), None),
        };
        let status = resp.status();
        match status {
            StatusCode::UNAUTHORIZED | StatusCode::FORBIDDEN => return Outcome::Auth(status),
            StatusCode::NOT_FOUND => return Outcome::Fatal("not found".into()),
            StatusCode::TOO_MANY_REQUESTS => {
                let wait = resp
                    .headers()
                    .get(reqwest::header::RETRY_AFTER)
                    .and_then(|v| v.to_str().ok())
                    .and_then(|v| v.trim().parse::<u64>().ok())
                    .map(|s| Duration::from_secs(s.min(600)));
                return Outcome::Retry("rate limited".into(), wait);
            }
            s if s.is_server_error() => return Outcome::Retry(format!("server error {s}"), None),
            s if !s.is_success() => return Outcome::Fatal(format!("unexpected status {s}")),
            _ => {}
        }
        let bytes = match resp.bytes() {
            Ok(b) => b,
            Err(e) => return Outcome::Retry(e.without_url().to_string(), None),
        };
        if digest_hex(&bytes) != sha {
            return Outcome::Retry("downloaded bytes do not match the digest".into(), None);
        }
        match save(dest, &bytes) {
            Ok(()) => Outcome::Saved,
            Err(e) => Outcome::Fatal(format!("saving: {e}")),
        }
    }
}

fn save(dest: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let tmp = dest.with_extension("apk.part");
    std::fs::write(&tmp, bytes)?;
    std::fs::rename(tmp, dest)
}

/// True iff `path` holds bytes whose SHA-256 is `sha`.
fn verified(path: &Path, sha: &str) -> bool {
    std::fs::read(path).map(|b| digest_hex(&b) == sha).unwrap_or(false)
}

pub fn read_list(path: &Path) -> anyhow::Result<Vec<String>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        if t.len() != 64 || !t.bytes().all(|b| b.is_ascii_hexdigit()) {
            return Err(fail(EXIT_INPUT, format!("{}:{}: `{t}` is not a SHA-256 digest", path.display(), i + 1)));
        }
        let sha = t.to_ascii_lowercase();
        if !out.contains(&sha) {
            out.push(sha);
        }
    }
    Ok(out)
}

pub fn run(args: FetchArgs) -> anyhow::Result<()> {
    let key = match std::env::var(API_KEY_VAR) {
        Ok(k) if !k.is_empty() => k,
        _ => return Err(fail(EXIT_USAGE, format!("{API_KEY_VAR} is not set"))),
    };
    if !(args.rate > 0.0 && args.rate.is_finite()) {
        return Err(fail(EXIT_USAGE, "--rate must be a positive number"));
    }
    let shas = read_list(&args.list)?;
    std::fs::create_dir_all(&args.dest).with_context(|| format!("creating {}", args.dest.display()))?;
    let client = Client::builder().timeout(Duration::from_secs(args.timeout_secs)).build()?;
    let mut f = Fetcher {
        client,
        endpoint: args.endpoint.clone(),
        key,
        interval: Duration::from_secs_f64(1.0 / args.rate),
        last: None,
    };

    let mut summary = Summary::default();
    let mut failures: Vec<(String, String)> = Vec::new();
    for sha in &shas {
        let dest = args.dest.join(format!("{sha}.apk"));
        if verified(&dest, sha) {
            summary.skipped += 1;
            continue;
        }
        let mut attempt = 0;
        loop {
            match f.attempt(sha, &dest) {
                Outcome::Saved => {
                    summary.fetched += 1;
                    break;
                }
                Outcome::Auth(status) => {
                    write_failures(&args.dest, &failures)?;
                    println!("fetched={} skipped={} failed={}", summary.fetched, summary.skipped, summary.failed);
                    return Err(fail(EXIT_INPUT, format!("authentication failed ({status}); check {API_KEY_VAR}")));
                }
                Outcome::Fatal(reason) => {
                    failures.push((sha.clone(), reason));
                    break;
                }
                Outcome::Retry(reason, wait) => {
                    if attempt >= args.retries {
                        failures.push((sha.clone(), format!("{reason} after {} attempts", attempt + 1)));
                        break;
                    }
                    let backoff = Duration::from_millis(args.backoff_ms.saturating_mul(1 << attempt.min(16)));
                    std::thread::sleep(wait.unwrap_or(backoff).max(backoff));
                    attempt += 1;
                }
            }
        }
    }
    summary.failed = failures.len();
    write_failures(&args.dest, &failures)?;
    println!("fetched={} skipped={} failed={}", summary.fetched, summary.skipped, summary.failed);
    if summary.failed > 0 {
        return Err(fail(EXIT_PARTIAL, format!("{} downloads failed; see {}", summary.failed, ERRORS_FILE)));
    }
    Ok(())
}

fn write_failures(dest: &Path, failures: &[(String, String)]) -> anyhow::Result<()> {
    let path = dest.join(ERRORS_FILE);
    if failures.is_empty() {
        if path.exists() {
            std::fs::remove_file(&path)?;
        }
        return Ok(());
    }
    let mut w = std::fs::File::create(&path)?;
    writeln!(w, "sha256\treason")?;
    for (sha, reason) in failures {
        writeln!(w, "{sha}\t{reason}")?;
    }
    Ok(())
}
