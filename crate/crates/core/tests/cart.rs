mod common;

use proptest::prelude::*;
use rand::seq::IndexedRandom;
use rand::Rng;
use treeval::cart::{
    best_split, fit, g_value, gain, grow, is_bottom_up, prune, RegionId, TreeDocument,
};
use treeval::{Dataset, StoppingRule, Tree};

fn small_dataset(xs: &[(u8, u8)], ys: &[f64]) -> Dataset {
    let rows: Vec<Vec<f64>> = xs
        .iter()
        .map(|&(a, b)| vec![f64::from(a), f64::from(b)])
        .collect();
    Dataset::from_rows(&rows, ys.to_vec()).unwrap()
}

fn dataset_strategy() -> impl Strategy<Value = Dataset> {
    (4usize..14).prop_flat_map(|n| {
        (
            prop::collection::vec((0u8..6, 0u8..6), n),
            prop::collection::vec(-5.0f64..5.0, n),
        )
            .prop_map(|(xs, ys)| small_dataset(&xs, &ys))
    })
}

fn sse(idx: &[usize], y: &[f64]) -> f64 {
    let m = idx.iter().map(|&i| y[i]).sum::<f64>() / idx.len() as f64;
    idx.iter().map(|&i| (y[i] - m).powi(2)).sum()
}

/// Every admissible split, evaluated from scratch.
fn exhaustive(d: &Dataset, members: &[usize], min: usize) -> Vec<(usize, usize, f64)> {
    let mut out = Vec::new();
    for j in 0..d.p() {
        for s in 1..d.n() {
            let t = d.order_statistic(j, s).unwrap();
            if d.order_statistic(j, s + 1).unwrap() == t {
                continue;
            }
            let nl = members.iter().filter(|&&i| d.x(i, j) <= t).count();
            if nl < min || members.len() - nl < min {
                continue;
            }
            out.push((j, s, gain(d, members, j, s, d.y()).unwrap()));
        }
    }
    out
}

/// A random ordering listing every region after its children.
fn random_bottom_up(t: &Tree, rng: &mut impl Rng) -> Vec<RegionId> {
    let mut placed = vec![false; t.len()];
    let mut order = Vec::new();
    while order.len() < t.len() {
        let ready: Vec<RegionId> = (0..t.len())
            .filter(|&k| !placed[k])
            .filter(|&k| {
                t.regions()[k]
                    .children
                    .is_none_or(|[a, b]| placed[a] && placed[b])
            })
            .collect();
        let k = *ready.choose(rng).unwrap();
        placed[k] = true;
        order.push(k);
    }
    order
}

proptest! {
    #[test]
    fn best_split_matches_exhaustive_search(d in dataset_strategy(), min in 1usize..3) {
        let stop = StoppingRule { min_node_size: min, ..StoppingRule::default() };
        let members: Vec<usize> = (0..d.n()).collect();
        let all = exhaustive(&d, &members, min);
        match best_split(&d, d.y(), &members, &stop) {
            None => prop_assert!(all.is_empty()),
            Some(c) => {
                let max = all.iter().map(|x| x.2).fold(f64::NEG_INFINITY, f64::max);
                let tol = 1e-9 * sse(&members, d.y()).max(1e-300);
                prop_assert!((c.gain - max).abs() <= tol);
                prop_assert!(all.iter().any(|x| (x.0, x.1) == (c.feature, c.rank)));
                // the smallest (feature, rank) among clear maxima is never passed over
                let first = all.iter().find(|x| x.2 >= max - tol).unwrap();
                prop_assert!((first.0, first.1) <= (c.feature, c.rank));
                prop_assert!(all.iter().filter(|x| (x.0, x.1) < (c.feature, c.rank)).all(|x| x.2 <= c.gain + tol));
            }
        }
    }

    #[test]
    fn g_value_is_average_sse_reduction(d in dataset_strategy()) {
        let stop = StoppingRule { max_level: 3, ..StoppingRule::default() };
        let t = grow(&d, d.y(), &stop).unwrap();
        for id in t.internal() {
            let leaves = t.terminal_descendants(id);
            let below: f64 = leaves.iter().map(|&k| sse(&t.regions()[k].members, d.y())).sum();
            let expect = (sse(&t.regions()[id].members, d.y()) - below) / (leaves.len() - 1) as f64;
            let g = g_value(&t, id, d.y()).unwrap();
            prop_assert!((g - expect).abs() <= 1e-9 * (1.0 + expect.abs()), "{} vs {}", g, expect);
            prop_assert!(g >= 0.0);
        }
    }

    #[test]
    fn pruning_does_not_depend_on_the_bottom_up_ordering(
        d in dataset_strategy(),
        lambda in 0.0f64..20.0,
        seed in any::<u64>(),
    ) {
        let stop = StoppingRule { max_level: 3, ..StoppingRule::default() };
        let t = grow(&d, d.y(), &stop).unwrap();
        let reference = prune(&t, d.y(), lambda, &(0..t.len()).collect::<Vec<_>>()).unwrap();
        let mut rng = common::rng(seed);
        for _ in 0..4 {
            let order = random_bottom_up(&t, &mut rng);
            prop_assert!(is_bottom_up(&t, &order));
            prop_assert_eq!(&prune(&t, d.y(), lambda, &order).unwrap(), &reference);
        }
    }

    #[test]
    fn document_round_trip_restores_the_tree(d in dataset_strategy(), lambda in 0.0f64..5.0) {
        let t = fit(&d, d.y(), &StoppingRule::default(), lambda).unwrap();
        let text = serde_json::to_string(&t.to_document(&d)).unwrap();
        let doc: TreeDocument = serde_json::from_str(&text).unwrap();
        prop_assert_eq!(&Tree::from_document(&doc, &d).unwrap(), &t);
    }

    #[test]
    fn terminal_regions_partition_the_sample(d in dataset_strategy()) {
        let t = fit(&d, d.y(), &StoppingRule::default(), 0.0).unwrap();
        let mut seen = vec![0usize; d.n()];
        for k in t.terminals() {
            for &i in &t.regions()[k].members {
                seen[i] += 1;
                prop_assert_eq!(t.locate(&d.row(i)), k);
                prop_assert!((t.predict(&d.row(i)) - t.regions()[k].mean()).abs() < 1e-12);
            }
        }
        prop_assert!(seen.iter().all(|&c| c == 1));
    }
}

#[test]
fn tied_gains_go_to_the_first_feature() {
    let x: Vec<f64> = vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
    let d = Dataset::new(vec![x.clone(), x], vec![0.0, 0.1, 0.0, 5.0, 5.2, 5.1]).unwrap();
    let c = best_split(
        &d,
        d.y(),
        &(0..6).collect::<Vec<_>>(),
        &StoppingRule::default(),
    )
    .unwrap();
    assert_eq!((c.feature, c.rank), (0, 3));
}

#[test]
fn four_rows_at_one_level_give_three_regions() {
    let d = Dataset::new(vec![vec![1.0, 2.0, 3.0, 4.0]], vec![0.0, 0.0, 3.0, 3.0]).unwrap();
    let stop = StoppingRule {
        max_level: 1,
        ..StoppingRule::default()
    };
    let t = fit(&d, d.y(), &stop, 0.0).unwrap();
    assert_eq!(t.len(), 3);
    let root = &t.regions()[t.root()];
    assert_eq!(root.level, 0);
    let [l, r] = root.children.unwrap();
    assert_eq!(t.regions()[l].members, vec![0, 1]);
    assert_eq!(t.regions()[r].members, vec![2, 3]);
}

#[test]
fn lambda_above_every_gain_leaves_the_root() {
    let mut rng = common::rng(3);
    let d = common::step_data(&mut rng, 30, 2, 1.0);
    let t = fit(&d, d.y(), &StoppingRule::default(), 1e9).unwrap();
    assert_eq!(t.len(), 1);
}

#[test]
fn min_node_size_bounds_every_child() {
    let mut rng = common::rng(4);
    let d = common::step_data(&mut rng, 40, 2, 2.0);
    let stop = StoppingRule {
        max_level: 4,
        min_node_size: 5,
        ..StoppingRule::default()
    };
    let t = grow(&d, d.y(), &stop).unwrap();
    assert!(t.regions().iter().all(|r| r.n() >= 5));
    assert!(t.regions().iter().all(|r| r.level <= 4));
}
