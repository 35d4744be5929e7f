use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;

use benchrep_core::api::ApiRef;
use benchrep_core::apk::open_apk;
use benchrep_core::dex::{defined_members, used_not_defined, ClassDef, DexPool, MemberRef};
use benchrep_core::framework::{canonical_declaring_class, load_index, FrameworkIndex};
use benchrep_core::profile::{
    app_member_refs, has_retained_prefix, is_obfuscated, keep_api, merge_corpus, profile_apk, read_profiles,
    write_profiles, AppProfile, CorpusStore, ProfileCache,
};
use proptest::prelude::*;

fn fixture(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(rel)
}

fn platform() -> FrameworkIndex {
    load_index(fixture("framework/android-27-min.index")).unwrap()
}

fn profile_of(rel: &str, idx: &FrameworkIndex) -> AppProfile {
    profile_apk(&open_apk(fixture(rel)).unwrap(), idx).unwrap()
}

fn members(p: &AppProfile) -> BTreeSet<String> {
    p.apis.iter().filter(|a| a.kind.is_member()).map(|a| a.to_string()).collect()
}

#[test]
fn app_fixture_hand_trace() {
    let idx = platform();
    let p = profile_of("apks/app.apk", &idx);
    let want: BTreeSet<String> = [
        "field|android/os/Build$VERSION|SDK_INT|I",
        "method|android/app/Activity|<init>|()V",
        "method|android/app/Activity|onCreate|(Landroid/os/Bundle;)V",
        "method|android/content/Context|getString|(I)Ljava/lang/String;",
        "method|android/webkit/SslErrorHandler|proceed|()V",
        "method|android/webkit/WebSettings|setJavaScriptEnabled|(Z)V",
        "method|android/webkit/WebView|<init>|(Landroid/content/Context;)V",
        "method|android/webkit/WebView|getSettings|()Landroid/webkit/WebSettings;",
        "method|android/webkit/WebView|loadUrl|(Ljava/lang/String;)V",
        "method|android/webkit/WebViewClient|<init>|()V",
        "method|android/webkit/WebViewClient|onReceivedSslError|(Landroid/webkit/WebView;Landroid/webkit/SslErrorHandler;Landroid/net/http/SslError;)V",
        "method|android/widget/Toast|makeText|(Landroid/content/Context;Ljava/lang/CharSequence;I)Landroid/widget/Toast;",
        "method|java/lang/Object|<init>|()V",
        "method|java/lang/Runnable|run|()V",
    ]
    .map(String::from)
    .into();
    assert_eq!(members(&p), want);

    // every profiled ref traces back to a disassembler-listed ref, or an
    // app-defined override of it
    let golden: BTreeSet<(String, String)> = std::fs::read_to_string(fixture("golden/app.refs"))
        .unwrap()
        .lines()
        .map(|l| {
            let f: Vec<&str> = l.split('|').collect();
            (f[2].to_string(), f[3].to_string())
        })
        .collect();
    for a in p.apis.iter().filter(|a| a.kind.is_member()) {
        assert!(golden.contains(&(a.member.clone(), a.descriptor.clone())), "{a}");
    }

    assert_eq!((p.sdk.min_level, p.sdk.target_level), (23, 27));
    assert!(p.apis.contains(&ApiRef::attribute("activity", "exported")));
    assert!(p.apis.contains(&ApiRef::element("intent-filter")));
    assert!(!p.apis.iter().any(|a| a.class.starts_with("com/example")));
    assert!(!p.apis.iter().any(|a| a.class == "org/obf/Util"));
}

#[test]
fn third_party_only_app_keeps_manifest_tokens() {
    let p = profile_of("apks/libonly.apk", &platform());
    assert!(p.apis.iter().all(|a| !a.kind.is_member()), "{:?}", p.apis);
    assert!(p.apis.contains(&ApiRef::element("manifest")));
}

#[test]
fn single_character_members_are_dropped() {
    let idx = platform();
    let p = profile_of("apks/obfuscated.apk", &idx);
    assert!(p.apis.iter().filter(|a| a.kind.is_member()).all(|a| a.member.chars().count() > 1));
    // the rule is purely lexical, so a genuine one-letter platform name goes too
    assert!(!members(&p).contains("method|android/util/Log|d|(Ljava/lang/String;Ljava/lang/String;)I"));
    assert!(members(&p).contains("method|android/app/Activity|onCreate|(Landroid/os/Bundle;)V"));
    assert!(members(&p).contains("field|java/lang/System|out|Ljava/io/PrintStream;"));
    assert!(!members(&p).contains("method|org/obf/b|c|()V"));

    let u = profile_of("apks/unicode.apk", &idx);
    let m = members(&u);
    assert!(m.contains("method|org/unicode/Lib|ääh|()V"));
    assert!(!m.contains("method|org/unicode/Lib|ä|()V"));
    assert!(m.contains("method|android/app/Activity|onResume|()V"));
}

#[test]
fn profiles_are_deterministic() {
    let idx = platform();
    for name in ["minimal", "multidex", "app", "unicode", "obfuscated"] {
        let a = profile_of(&format!("apks/{name}.apk"), &idx);
        let b = profile_of(&format!("apks/{name}.apk"), &idx);
        let (mut sa, mut sb) = (Vec::new(), Vec::new());
        write_profiles(&mut sa, [&a]).unwrap();
        write_profiles(&mut sb, [&b]).unwrap();
        assert_eq!(sa, sb);
    }
}

#[test]
fn profile_store_round_trips() {
    let idx = platform();
    let ps: Vec<AppProfile> =
        ["minimal", "app", "unicode"].iter().map(|n| profile_of(&format!("apks/{n}.apk"), &idx)).collect();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("p.jsonl");
    write_profiles(std::fs::File::create(&path).unwrap(), &ps).unwrap();
    assert_eq!(read_profiles(&path).unwrap(), ps);
    let line = std::fs::read_to_string(&path).unwrap().lines().next().unwrap().to_string();
    assert!(line.starts_with("{\"app_id\":\"minimal\",\"min_level\":"), "{line}");

    std::fs::write(&path, "{\"app_id\":1}\n").unwrap();
    assert!(read_profiles(&path).is_err());
}

#[test]
fn cache_returns_relabelled_profiles() {
    let idx = platform();
    let p = profile_of("apks/app.apk", &idx);
    let dir = tempfile::tempdir().unwrap();
    let cache = ProfileCache::new(dir.path().join("c")).unwrap();
    let key = ProfileCache::key(&p.source_hash, &idx);
    assert!(cache.get(&key, "x").is_none());
    cache.put(&key, &p).unwrap();
    let hit = cache.get(&key, "renamed").unwrap();
    assert_eq!(hit.app_id, "renamed");
    assert_eq!(hit.apis, p.apis);
    let other = load_index(fixture("framework/android-27-min.index")).unwrap();
    assert_eq!(ProfileCache::key(&p.source_hash, &other), key);
}

fn corpus_profiles(idx: &FrameworkIndex) -> Vec<AppProfile> {
    (0..20).map(|i| profile_of(&format!("corpus/app{i:02}.apk"), idx)).collect()
}

#[test]
fn corpus_level_filter_and_store_file() {
    let idx = platform();
    let ps = corpus_profiles(&idx);
    let store = merge_corpus(&ps, (23, 27));
    assert_eq!(store.corpus_size, 18);
    assert_eq!(store.skipped_out_of_range, 2);
    assert_eq!(store.levels.values().sum::<u64>(), store.corpus_size);
    assert_eq!(store.levels, [(23, 5), (24, 3), (25, 3), (26, 4), (27, 3)].into());
    for n in store.usage.values() {
        assert!(*n > 0 && *n <= store.corpus_size);
    }
    // recount from the raw profiles
    for (api, n) in &store.usage {
        let recount = ps.iter().filter(|p| (23..=27).contains(&p.sdk.target_level) && p.apis.contains(api)).count();
        assert_eq!(*n, recount as u64, "{api}");
    }

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("corpus.tsv");
    store.write(std::fs::File::create(&path).unwrap()).unwrap();
    let back = CorpusStore::read(&path).unwrap();
    assert_eq!(back.usage, store.usage);
    assert_eq!(back.levels, store.levels);
    assert_eq!(back.corpus_size, store.corpus_size);
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(text.starts_with("# corpus_size=18 levels=23:5,24:3,25:3,26:4,27:3 out_of_range=2 duplicates=0\n"));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn sharding_never_changes_the_store(assign in proptest::collection::vec(0usize..4, 20)) {
        let idx = platform();
        let ps = corpus_profiles(&idx);
        let whole = merge_corpus(&ps, (23, 27));
        let mut shards: Vec<Vec<AppProfile>> = vec![Vec::new(); 4];
        for (p, s) in ps.iter().zip(&assign) {
            shards[*s].push(p.clone());
        }
        let merged = shards
            .iter()
            .rev()
            .map(|s| merge_corpus(s, (23, 27)))
            .try_fold(CorpusStore::default(), |acc, s| acc.merge(s))
            .unwrap();
        prop_assert_eq!(merged, whole);
    }
}

// ---------------------------------------------------------------- randomized pools

const APP_CLASSES: [&str; 4] = ["com/x/A", "com/x/B", "com/x/C", "androidx/y/D"];
const FW_CLASSES: [&str; 6] = [
    "android/app/Activity",
    "android/webkit/WebViewClient",
    "java/lang/Object",
    "java/lang/Runnable",
    "android/content/Context",
    "org/unknown/Lib",
];
const NAMES: [&str; 8] = ["onCreate", "run", "a", "ä", "getString", "toString", "<init>", "helper"];
const DESCS: [&str; 4] = ["(Landroid/os/Bundle;)V", "()V", "(I)Ljava/lang/String;", "()Ljava/lang/String;"];

fn member() -> impl Strategy<Value = MemberRef> {
    (0usize..10, 0..NAMES.len(), 0..DESCS.len(), any::<bool>()).prop_map(|(o, n, d, field)| {
        let owner = if o < 4 { APP_CLASSES[o] } else { FW_CLASSES[o - 4] };
        if field {
            MemberRef::field(owner, NAMES[n], "I")
        } else {
            MemberRef::method(owner, NAMES[n], DESCS[d])
        }
    })
}

fn pool() -> impl Strategy<Value = DexPool> {
    let classes = proptest::collection::vec(
        (0..APP_CLASSES.len(), 0..(APP_CLASSES.len() + FW_CLASSES.len()), proptest::collection::vec(member(), 0..5)),
        0..4,
    );
    (classes, proptest::collection::btree_set(member(), 0..12)).prop_map(|(classes, refs)| {
        let mut defined = BTreeMap::new();
        for (c, s, ms) in classes {
            let name = APP_CLASSES[c];
            let sup = if s < APP_CLASSES.len() { APP_CLASSES[s] } else { FW_CLASSES[s - APP_CLASSES.len()] };
            let members: BTreeSet<MemberRef> = ms.into_iter().map(|m| m.with_owner(name)).collect();
            // app classes extend framework classes or later app classes, never themselves
            let sup = if sup == name || (s < APP_CLASSES.len() && s <= c) { "java/lang/Object" } else { sup };
            defined.insert(name.to_string(), ClassDef { superclass: Some(sup.into()), interfaces: vec![], members });
        }
        let mut referenced = refs;
        for c in defined.values() {
            referenced.extend(c.members.iter().cloned());
        }
        DexPool { defined_classes: defined, referenced_members: referenced, ..DexPool::default() }
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn pipeline_invariants_on_random_pools(parts in proptest::collection::vec(pool(), 1..4)) {
        let idx = platform();
        let forward = DexPool::union(parts.clone());
        let backward = DexPool::union(parts.into_iter().rev());
        prop_assert_eq!(used_not_defined(&forward), used_not_defined(&backward));
        prop_assert!(used_not_defined(&forward).is_disjoint(&defined_members(&forward)));

        let refs = app_member_refs(&forward, &idx);
        prop_assert_eq!(&refs, &app_member_refs(&backward, &idx));
        for r in &refs {
            prop_assert_eq!(&canonical_declaring_class(&idx, r), r);
        }
        let kept: Vec<ApiRef> = refs.iter().map(MemberRef::to_api).filter(keep_api).collect();
        for a in &kept {
            prop_assert!(has_retained_prefix(&a.class), "{}", a);
            prop_assert!(!is_obfuscated(&a.member), "{}", a);
        }
    }
}
