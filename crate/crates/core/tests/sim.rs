mod common;

use proptest::prelude::*;
use treeval::sim::{
    adjusted_rand_index, coverage_study, ks_uniform, null_study, power_study, SimConfig,
};
use treeval::Exec;

/// Hubert-Arabie index from pair-level agreement counts.
fn ari_by_pairs(labels_a: &[usize], labels_b: &[usize]) -> f64 {
    let (mut both, mut only_a, mut only_b, mut neither) = (0.0, 0.0, 0.0, 0.0);
    for i in 0..labels_a.len() {
        for j in i + 1..labels_a.len() {
            match (labels_a[i] == labels_a[j], labels_b[i] == labels_b[j]) {
                (true, true) => both += 1.0,
                (true, false) => only_a += 1.0,
                (false, true) => only_b += 1.0,
                (false, false) => neither += 1.0,
            }
        }
    }
    let denom = (both + only_a) * (only_a + neither) + (both + only_b) * (only_b + neither);
    if denom == 0.0 {
        return 0.0;
    }
    2.0 * (both * neither - only_a * only_b) / denom
}

proptest! {
    #[test]
    fn ari_matches_pair_counting(table in prop::array::uniform2(prop::array::uniform3(0usize..6))) {
        let mut a = Vec::new();
        let mut b = Vec::new();
        for (r, row) in table.iter().enumerate() {
            for (c, &k) in row.iter().enumerate() {
                a.extend(std::iter::repeat_n(r, k));
                b.extend(std::iter::repeat_n(c, k));
            }
        }
        let got = adjusted_rand_index(&table);
        let want = ari_by_pairs(&a, &b);
        prop_assert!((got - want).abs() < 1e-12, "{:?}: {} vs {}", table, got, want);
    }
}

#[test]
fn ks_distance_of_a_uniform_grid_is_small() {
    let p: Vec<f64> = (0..100).map(|k| (k as f64 + 0.5) / 100.0).collect();
    assert!((ks_uniform(&p) - 0.005).abs() < 1e-12);
    assert!((ks_uniform(&[0.0; 10]) - 1.0).abs() < 1e-12);
}

fn small_config() -> SimConfig {
    SimConfig {
        replicates: 6,
        a_grid: vec![1.0],
        b_grid: vec![2.0, 6.0],
        ..SimConfig::default()
    }
}

#[test]
fn studies_are_reproducible_and_independent_of_execution() {
    let cfg = small_config();
    let a = serde_json::to_string(&null_study(&cfg, Exec::Sequential).unwrap()).unwrap();
    let b = serde_json::to_string(&null_study(&cfg, Exec::Parallel).unwrap()).unwrap();
    assert_eq!(a, b);
    let a = serde_json::to_string(&power_study(&cfg, Exec::Sequential).unwrap()).unwrap();
    let b = serde_json::to_string(&power_study(&cfg, Exec::Parallel).unwrap()).unwrap();
    assert_eq!(a, b);
    let a = serde_json::to_string(&coverage_study(&cfg, Exec::Sequential).unwrap()).unwrap();
    let b = serde_json::to_string(&coverage_study(&cfg, Exec::default()).unwrap()).unwrap();
    assert_eq!(a, b);
}

#[test]
fn invalid_configurations_are_rejected() {
    let cfg = SimConfig {
        p: 2,
        ..small_config()
    };
    assert!(null_study(&cfg, Exec::Sequential).is_err());
    let cfg = SimConfig {
        sigma: 0.0,
        ..small_config()
    };
    assert!(coverage_study(&cfg, Exec::Sequential).is_err());
}

#[test]
fn estimated_sigma_changes_p_values_only_through_sigma() {
    let known = small_config();
    let estimated = SimConfig {
        estimate_sigma: true,
        ..small_config()
    };
    let (a, _) = null_study(&known, Exec::Sequential).unwrap();
    let (b, _) = null_study(&estimated, Exec::Sequential).unwrap();
    assert_eq!(a.len(), b.len());
    let mut differ = false;
    for (x, y) in a.iter().zip(&b) {
        assert_eq!(
            (x.replicate, x.level, x.method),
            (y.replicate, y.level, y.method)
        );
        assert!((0.0..=1.0).contains(&y.p_value));
        differ |= x.p_value != y.p_value;
    }
    assert!(differ);
}
