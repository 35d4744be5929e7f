use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;

use benchrep_core::analytics::{
    compare_suites, five_number, gap_analysis, load_api_list, load_prefixes, package_prefix, tier_apis,
    usage_percentage, AnalyticsError, GapReport,
};
use benchrep_core::api::ApiRef;
use benchrep_core::axml::SdkLevels;
use benchrep_core::profile::{merge_corpus, AppProfile, CorpusStore};
use benchrep_core::somine::PostIndex;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};

mod oracle;

use oracle::{oracle_gap, oracle_quantile};

fn fixture(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(rel)
}

fn m(class: &str, name: &str) -> ApiRef {
    ApiRef::method(class, name, "()V")
}

fn index_of(counts: &[(ApiRef, u64, u64)]) -> PostIndex {
    let mut idx = PostIndex::default();
    for (a, n, s) in counts {
        idx.android_count.insert(a.clone(), *n);
        idx.security_count.insert(a.clone(), *s);
    }
    idx.totals = (counts.iter().map(|c| c.1).max().unwrap_or(0), counts.iter().map(|c| c.2).max().unwrap_or(0));
    idx
}

fn profile(id: &str, target: u32, apis: impl IntoIterator<Item = ApiRef>) -> AppProfile {
    AppProfile {
        app_id: id.to_string(),
        sdk: SdkLevels { min_level: 21, target_level: target },
        source_hash: String::new(),
        apis: apis.into_iter().collect(),
    }
}

// ---------------------------------------------------------------- tiers

#[test]
fn ten_api_tiers_against_set_arithmetic() {
    let apis: Vec<ApiRef> = vec![
        m("android/app/Activity", "onCreate"),
        m("android/app/Activity", "finish"),
        m("android/webkit/WebView", "loadUrl"),
        m("android/webkit/WebView", "addJavascriptInterface"),
        m("android/graphics/Canvas", "drawText"),
        m("android/media/MediaPlayer", "start"),
        m("java/lang/Object", "<init>"),
        m("javax/crypto/Cipher", "doFinal"),
        ApiRef::element("provider"),
        ApiRef::attribute("provider", "exported"),
    ];
    let total: BTreeSet<ApiRef> = apis.iter().cloned().collect();
    let baseline: BTreeSet<ApiRef> = [apis[0].clone(), apis[6].clone()].into();
    let orthogonal: BTreeSet<String> = ["android/graphics".to_string(), "android/media".to_string()].into();
    let idx = index_of(&[
        (apis[1].clone(), 4, 0),
        (apis[2].clone(), 9, 3),
        (apis[4].clone(), 7, 7),
        (apis[7].clone(), 2, 2),
        (apis[8].clone(), 1, 0),
        (apis[0].clone(), 50, 50),
    ]);
    let r = tier_apis(&total, &baseline, &orthogonal, &idx);

    let considered: BTreeSet<ApiRef> = total.iter().filter(|a| !baseline.contains(*a)).cloned().collect();
    let filtered: BTreeSet<ApiRef> = considered
        .iter()
        .filter(|a| {
            let segs: Vec<&str> = a.class.split('/').collect();
            let p = if segs.len() < 2 { a.class.clone() } else { format!("{}/{}", segs[0], segs[1]) };
            !orthogonal.contains(&p)
        })
        .cloned()
        .collect();
    let relevant: BTreeSet<ApiRef> = filtered.iter().filter(|a| idx.android(a) > 0).cloned().collect();
    let security: BTreeSet<ApiRef> = filtered.iter().filter(|a| idx.security(a) > 0).cloned().collect();
    assert_eq!(r.considered, considered);
    assert_eq!(r.filtered, filtered);
    assert_eq!(r.relevant, relevant);
    assert_eq!(r.security, security);
    assert_eq!(r.sizes(), [10, 8, 6, 4, 2]);
}

#[test]
fn whole_baseline_empties_every_tier() {
    let total: BTreeSet<ApiRef> = [m("android/app/Activity", "finish"), ApiRef::element("application")].into();
    let r = tier_apis(&total, &total, &BTreeSet::new(), &index_of(&[(m("android/app/Activity", "finish"), 3, 3)]));
    assert_eq!(r.sizes(), [2, 0, 0, 0, 0]);
}

const CLASSES: [&str; 6] =
    ["android/app/Activity", "android/graphics/Canvas", "android/webkit/WebView", "java/io/File", "javax/crypto/Cipher", "android/os/Build$VERSION"];
const MEMBERS: [&str; 4] = ["alpha", "beta", "gamma", "delta"];

fn api() -> impl Strategy<Value = ApiRef> {
    (0..CLASSES.len(), 0..MEMBERS.len()).prop_map(|(c, n)| m(CLASSES[c], MEMBERS[n]))
}

fn api_set() -> impl Strategy<Value = BTreeSet<ApiRef>> {
    proptest::collection::btree_set(api(), 0..20)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn tiers_form_a_chain(
        total in api_set(),
        baseline in api_set(),
        counts in proptest::collection::btree_map(api(), (0u64..4, 0u64..4), 0..20),
        orth in proptest::collection::btree_set(0..CLASSES.len(), 0..3),
    ) {
        let orthogonal: BTreeSet<String> = orth.iter().map(|&i| package_prefix(CLASSES[i]).to_string()).collect();
        // security never exceeds android in a well-formed index
        let rows: Vec<(ApiRef, u64, u64)> = counts.into_iter().map(|(a, (x, y))| (a, x + y, y)).collect();
        let r = tier_apis(&total, &baseline, &orthogonal, &index_of(&rows));
        prop_assert!(r.security.is_subset(&r.relevant));
        prop_assert!(r.relevant.is_subset(&r.filtered));
        prop_assert!(r.filtered.is_subset(&r.considered));
        prop_assert!(r.considered.is_subset(&r.total));
        let s = r.sizes();
        prop_assert!(s.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn comparison_partitions(x in api_set(), y in api_set()) {
        let c = compare_suites("x", &x, "y", &y);
        prop_assert_eq!(c.common.len() + c.unique_x.len(), x.len());
        prop_assert_eq!(c.common.len() + c.unique_y.len(), y.len());
        prop_assert!(c.common.is_disjoint(&c.unique_x));
        prop_assert!(c.common.is_disjoint(&c.unique_y));
        prop_assert!(c.unique_x.is_disjoint(&c.unique_y));
        let ux: BTreeSet<ApiRef> = c.common.union(&c.unique_x).cloned().collect();
        prop_assert_eq!(ux, x.clone());
        if x == y {
            prop_assert!(c.unique_x.is_empty() && c.unique_y.is_empty());
        }
    }
}

#[test]
fn droidbench_ghera_cross_check() {
    let mk = |prefix: &str, n: usize| (0..n).map(|i| m(&format!("android/{prefix}/C{i}"), "run")).collect::<Vec<_>>();
    let common = mk("common", 344);
    let droid: BTreeSet<ApiRef> = common.iter().cloned().chain(mk("droid", 454)).collect();
    let ghera: BTreeSet<ApiRef> = common.iter().cloned().chain(mk("ghera", 174)).collect();
    let c = compare_suites("DroidBench", &droid, "Ghera", &ghera);
    assert_eq!((c.common.len(), c.unique_x.len(), c.unique_y.len()), (344, 454, 174));
    assert_eq!(c.common.len() + c.unique_x.len(), 798);
    assert_eq!(c.common.len() + c.unique_y.len(), 518);
}

// ---------------------------------------------------------------- usage

#[test]
fn usage_percentages() {
    let a = m("android/app/Activity", "finish");
    let b = m("android/app/Activity", "recreate");
    let ps = vec![
        profile("p1", 23, [a.clone()]),
        profile("p2", 24, [a.clone(), b.clone()]),
        profile("p3", 25, [a.clone()]),
        profile("p4", 26, []),
    ];
    let store = merge_corpus(&ps, (23, 27));
    assert_eq!(usage_percentage(&store, &a), Ok(75.0));
    assert_eq!(usage_percentage(&store, &b), Ok(25.0));
    assert_eq!(usage_percentage(&store, &m("java/io/File", "delete")), Ok(0.0));
    assert_eq!(usage_percentage(&CorpusStore::default(), &a), Err(AnalyticsError::EmptyCorpus));
}

#[test]
fn usage_matches_recount_on_random_stores() {
    let mut rng = rand::rngs::StdRng::seed_from_u64(7);
    let pool: Vec<ApiRef> = CLASSES.iter().flat_map(|c| MEMBERS.iter().map(move |n| m(c, n))).collect();
    for round in 0..50 {
        let n = rng.gen_range(1..40);
        let ps: Vec<AppProfile> = (0..n)
            .map(|i| {
                let apis: Vec<ApiRef> = pool.iter().filter(|_| rng.gen_bool(0.3)).cloned().collect();
                profile(&format!("r{round}-{i}"), rng.gen_range(20..30), apis)
            })
            .collect();
        let store = merge_corpus(&ps, (23, 27));
        let in_range: Vec<&AppProfile> = ps.iter().filter(|p| (23..=27).contains(&p.sdk.target_level)).collect();
        for a in &pool {
            let got = usage_percentage(&store, a);
            if in_range.is_empty() {
                assert_eq!(got, Err(AnalyticsError::EmptyCorpus));
                continue;
            }
            let users = in_range.iter().filter(|p| p.apis.contains(a)).count();
            let want = users as f64 * 100.0 / in_range.len() as f64;
            assert!((got.unwrap() - want).abs() < 1e-9);
        }
    }
}

// ---------------------------------------------------------------- statistics

#[test]
fn five_number_against_oracle() {
    let mut rng = rand::rngs::StdRng::seed_from_u64(11);
    for _ in 0..10_000 {
        let n = rng.gen_range(1..60);
        let xs: Vec<f64> = (0..n)
            .map(|_| if rng.gen_bool(0.3) { rng.gen_range(0..5) as f64 } else { rng.gen_range(-1e6..1e6) })
            .collect();
        let f = five_number(&xs).unwrap();
        let want = [0.0, 0.25, 0.5, 0.75, 1.0].map(|p| oracle_quantile(&xs, p));
        for (g, w) in f.as_array().iter().zip(want) {
            assert!((g - w).abs() <= 1e-9 * w.abs().max(1.0), "{xs:?}: {g} vs {w}");
        }
        assert!(f.as_array().windows(2).all(|w| w[0] <= w[1]));
    }
}

#[test]
fn five_number_examples() {
    assert_eq!(five_number(&[1.0, 2.0, 3.0, 4.0, 5.0]).unwrap().as_array(), [1.0, 2.0, 3.0, 4.0, 5.0]);
    assert_eq!(five_number(&[7.0]).unwrap().as_array(), [7.0; 5]);
    assert_eq!(five_number(&[]), Err(AnalyticsError::EmptyInput));
}

#[test]
fn package_prefix_against_split() {
    assert_eq!(package_prefix("android/app/Activity"), "android/app");
    assert_eq!(package_prefix("android"), "android");
    let mut rng = rand::rngs::StdRng::seed_from_u64(3);
    let alphabet: Vec<char> = "abcXYZ09_$ä".chars().collect();
    for _ in 0..10_000 {
        let k = rng.gen_range(1..6);
        let segs: Vec<String> = (0..k)
            .map(|_| (0..rng.gen_range(1..5)).map(|_| alphabet[rng.gen_range(0..alphabet.len())]).collect())
            .collect();
        let path = segs.join("/");
        let want = segs.iter().take(2).cloned().collect::<Vec<_>>().join("/");
        assert_eq!(package_prefix(&path), want);
    }
}

// ---------------------------------------------------------------- gap analysis

#[test]
fn planted_gap_apis() {
    let suite_api = m("android/webkit/WebView", "loadUrl");
    let shared = m("android/app/Activity", "finish");
    let planted = [
        m("android/webkit/CookieManager", "setAcceptCookie"),
        m("android/bluetooth/BluetoothSocket", "connect"),
        m("android/bluetooth/BluetoothAdapter", "enable"),
    ];
    let quiet = m("android/os/Bundle", "clear");
    let ui = m("android/widget/TextView", "setText");
    let ps: Vec<AppProfile> = (0..20)
        .map(|i| {
            let mut apis = vec![shared.clone(), ui.clone()];
            if i % 2 == 0 {
                apis.push(suite_api.clone());
            }
            apis.push(planted[i % 3].clone());
            if i % 5 == 0 {
                apis.push(quiet.clone());
            }
            profile(&format!("app{i:02}"), 23 + (i as u32 % 5), apis)
        })
        .collect();
    let store = merge_corpus(&ps, (23, 27));
    assert_eq!(store.corpus_size, 20);
    let suite_union: BTreeSet<ApiRef> = [suite_api.clone(), shared.clone()].into();
    let ui_prefixes: BTreeSet<String> = ["android/widget".to_string()].into();
    let idx = index_of(&[
        (planted[0].clone(), 12, 5),
        (planted[1].clone(), 30, 9),
        (planted[2].clone(), 30, 9),
        (quiet.clone(), 40, 0),
        (ui.clone(), 90, 30),
        (suite_api.clone(), 80, 40),
    ]);

    let got = gap_analysis(&store, &suite_union, &ui_prefixes, &idx, 10).unwrap();
    let (gap, groups, known) = oracle_gap(&ps, &suite_union, &ui_prefixes, &idx, 10);
    assert_eq!(got.gap_apis, gap);
    assert_eq!(got.groups, groups);
    assert_eq!(got.known_prefixes, known);

    let want: BTreeMap<String, Vec<(ApiRef, u64)>> = [
        ("android/bluetooth".to_string(), vec![(planted[2].clone(), 9), (planted[1].clone(), 9)]),
        ("android/webkit".to_string(), vec![(planted[0].clone(), 5)]),
    ]
    .into();
    assert_eq!(got.groups, want);
    assert_eq!(got.known_prefixes, BTreeSet::from(["android/webkit".to_string()]));
    assert_eq!(got.unknown_prefixes, BTreeSet::from(["android/bluetooth".to_string()]));
    assert!(got.gap_apis.contains(&quiet));
    assert!(got.gap_apis.is_disjoint(&suite_union));
    assert_eq!(got.ranked(&got.unknown_prefixes), vec![("android/bluetooth", 2)]);

    let top1 = gap_analysis(&store, &suite_union, &ui_prefixes, &idx, 1).unwrap();
    assert_eq!(top1.groups["android/bluetooth"], vec![(planted[2].clone(), 9)]);
    assert_eq!(top1.group_sizes["android/bluetooth"], 2);
    assert_eq!(gap_analysis(&store, &suite_union, &ui_prefixes, &idx, 0), Err(AnalyticsError::ZeroK));

    let everything: BTreeSet<ApiRef> = store.apis().cloned().collect();
    let none = gap_analysis(&store, &everything, &BTreeSet::new(), &idx, 10).unwrap();
    assert_eq!(none, GapReport::default());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn gap_matches_oracle(
        apps in proptest::collection::vec(api_set(), 1..20),
        suite_union in api_set(),
        counts in proptest::collection::btree_map(api(), 0u64..4, 0..20),
        ui in proptest::collection::btree_set(0..CLASSES.len(), 0..2),
        k in 1usize..4,
    ) {
        let ps: Vec<AppProfile> =
            apps.into_iter().enumerate().map(|(i, a)| profile(&format!("g{i}"), 25, a)).collect();
        let store = merge_corpus(&ps, (23, 27));
        let ui: BTreeSet<String> = ui.iter().map(|&i| package_prefix(CLASSES[i]).to_string()).collect();
        let rows: Vec<(ApiRef, u64, u64)> = counts.into_iter().map(|(a, n)| (a, n, n)).collect();
        let idx = index_of(&rows);
        let got = gap_analysis(&store, &suite_union, &ui, &idx, k).unwrap();
        let (gap, groups, known) = oracle_gap(&ps, &suite_union, &ui, &idx, k);
        prop_assert!(got.gap_apis.is_disjoint(&suite_union));
        prop_assert_eq!(&got.gap_apis, &gap);
        prop_assert_eq!(&got.groups, &groups);
        prop_assert_eq!(&got.known_prefixes, &known);
        let all: BTreeSet<String> = got.known_prefixes.union(&got.unknown_prefixes).cloned().collect();
        prop_assert_eq!(all, got.groups.keys().cloned().collect::<BTreeSet<_>>());
        for (p, list) in &got.groups {
            prop_assert!(list.iter().all(|(a, _)| package_prefix(&a.class) == p));
        }
    }
}

// ---------------------------------------------------------------- config files

#[test]
fn shipped_config_files_load() {
    let baseline = load_api_list(fixture("config/baseline.apis")).unwrap();
    let text = std::fs::read_to_string(fixture("config/baseline.apis")).unwrap();
    let listed = text.lines().filter(|l| !l.trim().is_empty() && !l.starts_with('#')).count();
    assert_eq!(baseline.len(), listed);
    assert!(baseline.contains(&ApiRef::element("manifest")));
    let orth = load_prefixes(fixture("config/orthogonal.prefixes")).unwrap();
    assert!(orth.contains("android/graphics"));
    let ui = load_prefixes(fixture("config/ui.prefixes")).unwrap();
    assert!(ui.contains("android/widget"));
}

#[test]
fn config_errors_name_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("b.apis");
    std::fs::write(&p, "# c\nmethod|android/X|a|()V\nbogus\n").unwrap();
    let e = load_api_list(&p).unwrap_err().to_string();
    assert!(e.contains(":3:"), "{e}");
    std::fs::write(&p, "android.graphics\nandroid/media/\n").unwrap();
    assert_eq!(load_prefixes(&p).unwrap(), BTreeSet::from(["android/graphics".to_string(), "android/media".to_string()]));
    std::fs::write(&p, "android graphics\n").unwrap();
    assert!(load_prefixes(&p).is_err());
    assert!(load_prefixes(dir.path().join("missing")).is_err());
}
