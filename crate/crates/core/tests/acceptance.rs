//! Acceptance gate: runs each criterion in turn and prints one PASS/FAIL line
//! per criterion. Exits nonzero if any criterion fails.

mod common;

use std::collections::BTreeMap;
use std::process::ExitCode;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use treeval::cart::fit;
use treeval::inference::{naive_z, p_region, p_sibling, selective_ci, tn_cdf};
use treeval::oracle::{dense_gain_quadratic, gain_matrix};
use treeval::sim::{
    coverage_study, generate, null_study, power_study, replicate_rng, Design, Method, SimConfig,
};
use treeval::truncation::{
    branch_of, pruned_report, sibling_fast_path, sibling_report, stream_coefficients,
};
use treeval::{
    Conditioning, Contrast, ContrastKind, Dataset, Exec, Interval, IntervalSet, StoppingRule, Tree,
};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

/// Small instance for the refit oracle: n in 10..=20, p in 1..=2, depth 1..=3.
struct SmallCase {
    data: Dataset,
    stop: StoppingRule,
    lambda: f64,
}

fn small_cases() -> Vec<SmallCase> {
    let mut rng = common::rng(2024);
    (0..50)
        .map(|i| {
            let n = 10 + i % 11;
            let p = 1 + i % 2;
            let data = if i % 5 == 4 {
                common::tied_data(&mut rng, n, p)
            } else {
                common::step_data(&mut rng, n, p, 2.0)
            };
            SmallCase {
                data,
                stop: StoppingRule {
                    max_level: 1 + (i / 2) % 3,
                    ..StoppingRule::default()
                },
                lambda: [0.0, 0.5, 3.0][(i / 6) % 3],
            }
        })
        .collect()
}

fn oracle_equivalence() -> Outcome {
    let (mut targets, mut probes, mut excluded, mut bad) = (0, 0, 0, Vec::new());
    for (i, case) in small_cases().iter().enumerate() {
        for c in common::oracle_cases(&case.data, &case.stop, case.lambda, Exec::default()) {
            targets += 1;
            probes += c.agreement.probes;
            excluded += c.agreement.excluded;
            if !c.agreement.agrees() {
                bad.push(format!(
                    "instance {i} {} ({} probes)",
                    c.label,
                    c.agreement.mismatches.len()
                ));
            }
        }
    }
    outcome(
        bad.is_empty(),
        format!(
            "{targets} sibling and region sets on 50 instances, {probes} probes, {excluded} near endpoints; disagreements: {}",
            if bad.is_empty() { "none".to_string() } else { bad.join("; ") }
        ),
    )
}

fn coefficient_equivalence() -> Outcome {
    let mut rng = common::rng(77);
    let mut cases = Vec::new();
    for _ in 0..12 {
        let d = common::step_data(&mut rng, 24, 3, 1.5);
        let y = d.y().to_vec();
        let tree = fit(&d, &y, &StoppingRule::default(), 0.0).unwrap();
        let ctx = Conditioning::from_fitted(&d, &y, &tree);
        for id in common::region_targets(&tree) {
            let chain = tree.chain(id);
            let mut contrasts = vec![Contrast::for_region(&tree, id, &y).unwrap()];
            if let Some(parent) = tree.regions()[id].parent {
                contrasts.push(Contrast::for_split(&tree, parent, &y).unwrap());
            }
            for nu in contrasts {
                if nu.kind() == ContrastKind::Sibling
                    && tree.regions()[chain[chain.len() - 2]].children.unwrap()[0] != id
                {
                    continue;
                }
                let streamed =
                    stream_coefficients(&ctx, &branch_of(&tree, id).unwrap(), &nu).unwrap();
                for level in streamed.levels {
                    let members = tree.regions()[chain[level.level - 1]].members.clone();
                    for comp in level.competitors {
                        cases.push((d.clone(), members.clone(), comp, nu.clone()));
                    }
                }
            }
        }
    }
    cases.shuffle(&mut rng);
    cases.truncate(200);
    let mut worst = 0.0f64;
    let mut min_quad = f64::INFINITY;
    for (d, members, comp, nu) in &cases {
        let dense = dense_gain_quadratic(d, members, comp.feature, comp.rank, nu, d.y()).unwrap();
        let w = nu.project_out(d.y());
        let wn = w.iter().map(|v| v * v).sum::<f64>().sqrt();
        let bounds = [1.0 / nu.norm_sq(), 2.0 * wn / nu.norm(), wn * wn];
        let pairs = [
            (comp.coef.a, dense.a),
            (comp.coef.b, dense.b),
            (comp.coef.c, dense.c),
        ];
        for (k, (s, e)) in pairs.into_iter().enumerate() {
            worst = worst.max((s - e).abs() / bounds[k]);
        }
        let t = d.order_statistic(comp.feature, comp.rank).unwrap();
        let (left, right): (Vec<usize>, Vec<usize>) =
            members.iter().partition(|&&i| d.x(i, comp.feature) <= t);
        let m = gain_matrix(d.n(), &left, &right);
        for _ in 0..5 {
            let v: Vec<f64> = (0..d.n()).map(|_| rng.sample(StandardNormal)).collect();
            let q: f64 = (0..d.n())
                .map(|r| v[r] * (0..d.n()).map(|c| m[r][c] * v[c]).sum::<f64>())
                .sum();
            min_quad = min_quad.min(q);
        }
    }
    outcome(
        cases.len() == 200 && worst <= 1e-9 && min_quad >= -1e-12,
        format!(
            "{} (region, feature, rank, contrast) cases, worst relative error {worst:.2e}, min v'Mv over 1000 draws {min_quad:.2e}",
            cases.len()
        ),
    )
}

fn sibling_instances() -> Vec<(Dataset, StoppingRule, f64)> {
    let mut out: Vec<(Dataset, StoppingRule, f64)> = small_cases()
        .into_iter()
        .map(|c| (c.data, c.stop, c.lambda))
        .collect();
    for r in 0..40u64 {
        let mut rng = replicate_rng(31, r);
        let design = Design {
            n: 100,
            p: 5,
            sigma: 5.0,
            a: 1.0,
            b: [0.0, 2.0, 5.0, 10.0][r as usize % 4],
        };
        let (d, _) = generate(&design, &mut rng).unwrap();
        out.push((
            d,
            StoppingRule::default(),
            [0.0, 50.0, 200.0][r as usize % 3],
        ));
    }
    out
}

fn fast_path_equivalence() -> Outcome {
    let (mut total, mut used, mut bad) = (0, 0, 0);
    for (d, stop, lambda) in sibling_instances() {
        let tree = fit(&d, d.y(), &stop, lambda).unwrap();
        let ctx = Conditioning::from_fitted(&d, d.y(), &tree);
        for parent in tree.internal() {
            let [a, _] = tree.regions()[parent].children.unwrap();
            let nu = Contrast::for_split(&tree, parent, d.y()).unwrap();
            let branch = branch_of(&tree, a).unwrap();
            total += 1;
            if let Some(fast) = sibling_fast_path(&ctx, &branch, &nu).unwrap() {
                used += 1;
                if fast.set != pruned_report(&ctx, &branch, &nu).unwrap().set {
                    bad += 1;
                }
            }
        }
    }
    outcome(
        bad == 0 && used > 0,
        format!("{used} of {total} fitted sibling pairs took the fast path, {bad} differ from the generic path"),
    )
}

fn null_uniformity() -> Outcome {
    let cfg = SimConfig {
        replicates: 1000,
        ..SimConfig::default()
    };
    let (_, summary) = null_study(&cfg, Exec::default()).unwrap();
    let sel = summary.pooled(Method::Selective).unwrap();
    let naive = summary.pooled(Method::Naive).unwrap();
    outcome(
        sel.ks < sel.critical_99 && naive.ks > naive.critical_99,
        format!(
            "selective KS {:.4} on {} p-values, naive KS {:.4}, 1% critical value {:.4}, {} errors",
            sel.ks, sel.count, naive.ks, sel.critical_99, summary.errors
        ),
    )
}

fn coverage() -> Outcome {
    let cfg = SimConfig {
        replicates: 100,
        ..SimConfig::default()
    };
    let (_, summary) = coverage_study(&cfg, Exec::default()).unwrap();
    let mut pass = true;
    let mut parts = Vec::new();
    let mut selective_total = 0;
    for kind in [ContrastKind::Sibling, ContrastKind::Region] {
        for level in 1..=cfg.stopping.max_level {
            match summary.cell(kind, level, Method::Selective) {
                Some(c) => {
                    selective_total += c.count;
                    pass &= (0.935..=0.965).contains(&c.coverage);
                    parts.push(format!(
                        "{kind:?} L{level} {:.3} (n={})",
                        c.coverage, c.count
                    ));
                }
                None => {
                    pass = false;
                    parts.push(format!("{kind:?} L{level} missing"));
                }
            }
        }
    }
    let naive = summary
        .cell(ContrastKind::Sibling, 2, Method::Naive)
        .map_or(f64::NAN, |c| c.coverage);
    pass &= selective_total >= 2000 && naive < 0.80;
    outcome(
        pass,
        format!(
            "selective {}; naive sibling L2 {naive:.3}; {} errors",
            parts.join(", "),
            summary.errors
        ),
    )
}

fn reduction_identity() -> Outcome {
    let mut rng = common::rng(6);
    let line = IntervalSet::real_line();
    let mut worst = 0.0f64;
    for _ in 0..200 {
        let stat: f64 = rng.random_range(-10.0..10.0);
        let sd: f64 = rng.random_range(0.1..5.0);
        let center: f64 = rng.random_range(-2.0..2.0);
        let alpha: f64 = rng.random_range(0.01..0.3);
        let z0 = naive_z(stat, sd, alpha, 0.0).unwrap();
        let zc = naive_z(stat, sd, alpha, center).unwrap();
        let ci = selective_ci(stat, sd, &line, alpha).unwrap();
        for diff in [
            p_sibling(stat, sd, &line).unwrap() - z0.p_value,
            p_region(stat, sd, &line, center).unwrap() - zc.p_value,
            ci.0 - z0.ci.0,
            ci.1 - z0.ci.1,
        ] {
            worst = worst.max(diff.abs());
        }
    }
    outcome(
        worst <= 1e-6,
        format!("200 cases, largest difference {worst:.2e}"),
    )
}

/// Support placed `shift` standard deviations into one tail.
fn tail_support(rng: &mut ChaCha8Rng, mean: f64, sd: f64, shift: f64) -> IntervalSet {
    let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
    let a = mean + sign * shift * sd;
    let w = rng.random_range(0.1..2.0) * sd;
    let gap = rng.random_range(0.5..3.0) * sd;
    let near = Interval::closed(a.min(a + sign * w), a.max(a + sign * w));
    let far_end = a + sign * (w + gap);
    let far = if sign > 0.0 {
        Interval::above(far_end, true)
    } else {
        Interval::below(far_end, true)
    };
    IntervalSet::from_intervals(vec![near, far])
}

fn truncated_normal_accuracy() -> Outcome {
    let mut rng = common::rng(9);
    let mut worst = 0.0f64;
    let mut tails = 0;
    for k in 0..100 {
        let mean = rng.random_range(-5.0..5.0);
        let sd = rng.random_range(0.2..3.0);
        let s = if k % 4 == 0 {
            tails += 1;
            let shift = rng.random_range(30.0..45.0);
            tail_support(&mut rng, mean, sd, shift)
        } else {
            common::random_support(&mut rng, mean, sd)
        };
        let x = common::point_in(&mut rng, &s, mean, sd);
        let got = tn_cdf(x, mean, sd, &s).unwrap();
        let want = common::tn_cdf_quadrature(x, mean, sd, &s);
        worst = worst.max((got - want).abs());
    }
    outcome(
        worst <= 1e-8,
        format!(
            "100 cases ({tails} with supports 30-45 sd into a tail), largest error {worst:.2e}"
        ),
    )
}

fn ci_residuals() -> Outcome {
    let mut rng = common::rng(10);
    let mut worst = 0.0f64;
    let mut infinite = 0;
    for _ in 0..200 {
        let mean = rng.random_range(-3.0..3.0);
        let sd = rng.random_range(0.3..3.0);
        let s = common::random_support(&mut rng, mean, sd);
        let stat = common::point_in(&mut rng, &s, mean, sd);
        let alpha = 0.05;
        let (lo, hi) = selective_ci(stat, sd, &s, alpha).unwrap();
        for (m, target) in [(lo, 1.0 - alpha / 2.0), (hi, alpha / 2.0)] {
            if m.is_finite() {
                worst = worst.max((tn_cdf(stat, m, sd, &s).unwrap() - target).abs());
            } else {
                infinite += 1;
            }
        }
    }
    outcome(
        worst <= 1e-7,
        format!("200 intervals, largest residual {worst:.2e}, {infinite} unbounded limits"),
    )
}

fn timing_case(n: usize) -> (Dataset, Tree) {
    let mut rng = replicate_rng(99, n as u64);
    let design = Design {
        n,
        p: 5,
        sigma: 1.0,
        a: 1.0,
        b: 3.0,
    };
    let (d, _) = generate(&design, &mut rng).unwrap();
    let tree = fit(&d, d.y(), &StoppingRule::default(), 0.0).unwrap();
    (d, tree)
}

fn complexity() -> Outcome {
    let cases = [timing_case(1000), timing_case(2000)];
    let mut times = [Vec::new(), Vec::new()];
    for _ in 0..21 {
        for (k, (d, tree)) in cases.iter().enumerate() {
            let ctx = Conditioning::from_fitted(d, d.y(), tree);
            let leaf = tree
                .regions()
                .iter()
                .find(|r| r.level == 3)
                .expect("a level-3 region")
                .id;
            let parent = tree.regions()[leaf].parent.unwrap();
            let [a, _] = tree.regions()[parent].children.unwrap();
            let nu = Contrast::for_split(tree, parent, d.y()).unwrap();
            let branch = branch_of(tree, a).unwrap();
            let start = Instant::now();
            std::hint::black_box(sibling_report(&ctx, &branch, &nu).unwrap());
            times[k].push(start.elapsed().as_secs_f64());
        }
    }
    for t in &mut times {
        t.sort_by(f64::total_cmp);
    }
    let (m1, m2) = (times[0][10], times[1][10]);
    let ratio = m2 / m1;
    outcome(
        (1.6..=2.8).contains(&ratio),
        format!(
            "median s_sib {:.2} ms at n=1000, {:.2} ms at n=2000, ratio {ratio:.2}",
            m1 * 1e3,
            m2 * 1e3
        ),
    )
}

fn power_direction() -> Outcome {
    let cfg = SimConfig {
        replicates: 100,
        b_grid: (5..=10).map(f64::from).collect(),
        ..SimConfig::default()
    };
    let (_, summary) = power_study(&cfg, Exec::default()).unwrap();
    let mut pooled: BTreeMap<(u64, usize, Method), (usize, usize)> = BTreeMap::new();
    for c in &summary.cells {
        let e = pooled
            .entry((c.b.to_bits(), c.level, c.method))
            .or_default();
        e.0 += c.trials;
        e.1 += c.detections;
    }
    let rate = |b: f64, level: usize, m: Method| {
        pooled
            .get(&(b.to_bits(), level, m))
            .map_or(f64::NAN, |&(t, d)| d as f64 / t as f64)
    };
    let mut pass = true;
    let mut worst = f64::INFINITY;
    for &b in &cfg.b_grid {
        for level in 1..=3 {
            let gap = rate(b, level, Method::Selective) - rate(b, level, Method::SampleSplit);
            pass &= gap >= 0.0;
            worst = worst.min(gap);
        }
    }
    outcome(
        pass,
        format!(
            "b in 5..=10, levels 1-3: smallest selective minus sample-splitting detection rate {worst:.3}; {} skipped true splits",
            summary.skipped
        ),
    )
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        (
            "oracle equivalence of conditioning sets",
            oracle_equivalence,
        ),
        (
            "streamed coefficients equal dense projections",
            coefficient_equivalence,
        ),
        (
            "sibling fast path equals generic path",
            fast_path_equivalence,
        ),
        ("null p-values are uniform", null_uniformity),
        ("confidence interval coverage", coverage),
        (
            "whole-line support reduces to the Z-test",
            reduction_identity,
        ),
        ("truncated normal CDF accuracy", truncated_normal_accuracy),
        ("confidence limits solve their equations", ci_residuals),
        ("s_sib time grows linearly in n", complexity),
        (
            "selective detection beats sample splitting",
            power_direction,
        ),
    ];
    let mut failed = 0;
    for (k, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let o = run();
        println!(
            "{} [{}] {name}: {} ({:.1}s)",
            if o.pass { "PASS" } else { "FAIL" },
            k + 1,
            o.detail,
            start.elapsed().as_secs_f64()
        );
        failed += usize::from(!o.pass);
    }
    if failed == 0 {
        println!("all {} acceptance criteria passed", criteria.len());
        ExitCode::SUCCESS
    } else {
        println!("{failed} of {} acceptance criteria failed", criteria.len());
        ExitCode::FAILURE
    }
}
