mod support;

use itsguard::scenario::{generate, Scenario, ScenarioConfig};
use itsguard::Error;
use support::fixture;

#[test]
fn two_by_two_grid_counts() {
    let s = generate(&ScenarioConfig { grid_n: 2, street_length: 1.0, ..ScenarioConfig::default() }).unwrap();
    // 4 roads, two directions each
    assert_eq!(s.network.len(), 8);
    assert_eq!(s.network.conservation_rank(), 7);
    let roads: std::collections::BTreeSet<(usize, usize)> =
        s.network.streets().iter().map(|x| (x.from.min(x.to), x.from.max(x.to))).collect();
    assert_eq!(roads.into_iter().collect::<Vec<_>>(), vec![(0, 1), (0, 2), (1, 3), (2, 3)]);
}

#[test]
fn same_seed_serializes_identically() {
    let cfg = ScenarioConfig { grid_n: 5, seed: 42, ..ScenarioConfig::default() };
    assert_eq!(generate(&cfg).unwrap().to_toml().unwrap(), generate(&cfg).unwrap().to_toml().unwrap());
}

#[test]
fn nine_by_nine_grid_passes_every_invariant() {
    let s = generate(&ScenarioConfig { grid_n: 9, cell_radius: 1.0, seed: 0, ..ScenarioConfig::default() }).unwrap();
    s.validate().unwrap();
    let n = s.network.len();
    assert_eq!(n, 2 * 2 * 9 * 8);
    for node in s.network.intersections() {
        for k in &node.inbound {
            assert!(!node.outbound.contains(k));
        }
    }
    for st in s.network.streets() {
        assert!((st.length - st.geometry.length()).abs() <= 1e-9);
        assert_ne!(st.from, st.to);
    }
    for i in 0..n {
        assert!(s.coverage.row_sum(i) <= 1.0 + 1e-9);
    }
    for g in &s.generators {
        assert!(!g.connected_bs.is_empty());
    }
}

#[test]
fn save_and_load_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s.toml");
    for (n, seed) in [(3, 0), (6, 17)] {
        let s = generate(&ScenarioConfig { grid_n: n, seed, ..ScenarioConfig::default() }).unwrap();
        s.save(&path).unwrap();
        let back = Scenario::load(&path).unwrap();
        assert_eq!(back, s);
    }
}

#[test]
fn truncated_file_names_the_missing_section() {
    let s = generate(&ScenarioConfig { grid_n: 3, ..ScenarioConfig::default() }).unwrap();
    let text = s.to_toml().unwrap();
    for section in ["[pg]", "[ci]"] {
        let cut = text.find(section).unwrap();
        match Scenario::from_toml(&text[..cut]) {
            Err(Error::Format { path, .. }) => assert_eq!(path, &section[1..section.len() - 1]),
            other => panic!("expected a format error, got {other:?}"),
        }
    }
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cut.toml");
    std::fs::write(&path, &text[..text.find("[pg]").unwrap()]).unwrap();
    match Scenario::load(&path) {
        Err(Error::Format { path: p, .. }) => assert!(p.ends_with(":pg")),
        other => panic!("expected a format error, got {other:?}"),
    }
}

#[test]
fn tampered_scores_are_rejected() {
    let s = generate(&ScenarioConfig { grid_n: 3, ..ScenarioConfig::default() }).unwrap();
    let text = s.to_toml().unwrap();
    let z = s.impact.z_scores()[0];
    let tampered = text.replacen(&format!("z_scores = [{z:?}"), &format!("z_scores = [{:?}", z * 1.5), 1);
    assert_ne!(tampered, text);
    assert!(matches!(Scenario::from_toml(&tampered), Err(Error::Format { .. })));
}

#[test]
fn hand_written_two_street_fixture_loads() {
    let s = Scenario::load(fixture("two_street.toml")).unwrap();
    s.validate().unwrap();
    assert_eq!(s.network.len(), 2);
    assert_eq!(s.flows().unwrap(), vec![1000.0, 1000.0]);
    // one cell covers both directions of the only road
    assert_eq!(s.coverage.fraction(0, 0), 1.0);
    assert_eq!(s.coverage.fraction(1, 0), 1.0);
    // each street loses all of its flow and passes it on to the other
    let expected = 2.0 * 2.0 / 100.0;
    assert!((s.impact.z_scores()[0] - expected).abs() < 1e-12);
}

#[test]
fn larger_grids_have_at_least_as_many_useful_stations() {
    for seed in 0..5 {
        let mut last = 0;
        for n in 3..=8 {
            let s = generate(&ScenarioConfig { grid_n: n, seed, ..ScenarioConfig::default() }).unwrap();
            let useful = s.impact.z_scores().iter().filter(|z| **z > 0.0).count();
            assert!(useful >= last, "grid {n} seed {seed}: {useful} < {last}");
            last = useful;
        }
    }
}

#[test]
fn config_files_fill_in_defaults_and_reject_unknown_keys() {
    let cfg: ScenarioConfig = toml::from_str("grid_n = 4\nseed = 9\n").unwrap();
    assert_eq!(cfg, ScenarioConfig { grid_n: 4, seed: 9, ..ScenarioConfig::default() });
    assert!(toml::from_str::<ScenarioConfig>("grid = 4\n").is_err());
    let back: ScenarioConfig = toml::from_str(&cfg.to_toml()).unwrap();
    assert_eq!(back, cfg);
}
