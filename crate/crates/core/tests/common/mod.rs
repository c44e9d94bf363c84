#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use treeval::cart::{fit, RegionId};
use treeval::oracle::{brute_force_membership, compare, Agreement, Event, GridSpec};
use treeval::truncation::{branch_of, s_reg, s_sib};
use treeval::{
    Conditioning, Contrast, Dataset, Exec, Interval, IntervalSet, PermutationMode, StoppingRule,
    Tree,
};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Continuous covariates and a step-shaped response with unit noise.
pub fn step_data(rng: &mut ChaCha8Rng, n: usize, p: usize, effect: f64) -> Dataset {
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..p).map(|_| rng.sample(StandardNormal)).collect())
        .collect();
    let y = rows
        .iter()
        .map(|x| {
            let shift = if x[0] > 0.0 { effect } else { 0.0 }
                + if p > 1 && x[1] > 0.3 {
                    0.5 * effect
                } else {
                    0.0
                };
            shift + rng.sample::<f64, _>(StandardNormal)
        })
        .collect();
    Dataset::from_rows(&rows, y).unwrap()
}

/// Covariates on a coarse grid, so that ties occur.
pub fn tied_data(rng: &mut ChaCha8Rng, n: usize, p: usize) -> Dataset {
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|_| {
            (0..p)
                .map(|_| f64::from(rng.random_range(0..5u8)))
                .collect()
        })
        .collect();
    let y = rows
        .iter()
        .map(|x| x[0] + rng.sample::<f64, _>(StandardNormal))
        .collect();
    Dataset::from_rows(&rows, y).unwrap()
}

pub struct OracleCase {
    pub label: String,
    pub agreement: Agreement,
}

/// Checks every sibling pair and every non-root region of the fitted tree
/// against refits at 2001 grid probes.
pub fn oracle_cases(d: &Dataset, stop: &StoppingRule, lambda: f64, exec: Exec) -> Vec<OracleCase> {
    let y = d.y();
    let tree = fit(d, y, stop, lambda).unwrap();
    let ctx = Conditioning::from_fitted(d, y, &tree);
    let mut out = Vec::new();
    for parent in tree.internal() {
        let [a, b] = tree.regions()[parent].children.unwrap();
        let nu = Contrast::for_split(&tree, parent, y).unwrap();
        let set = s_sib(&ctx, &branch_of(&tree, a).unwrap(), &nu).unwrap();
        let event = Event::siblings(&tree, a, b).unwrap();
        out.push(OracleCase {
            label: format!("siblings {a},{b}"),
            agreement: check(d, &nu, &set, &event, stop, lambda, exec),
        });
    }
    for id in region_targets(&tree) {
        let nu = Contrast::for_region(&tree, id, y).unwrap();
        let branch = branch_of(&tree, id).unwrap();
        let set = s_reg(&ctx, &branch, &nu, PermutationMode::Identity).unwrap();
        let event = Event::branch(&tree, id).unwrap();
        out.push(OracleCase {
            label: format!("region {id}"),
            agreement: check(d, &nu, &set, &event, stop, lambda, exec),
        });
    }
    out
}

pub fn region_targets(tree: &Tree) -> Vec<RegionId> {
    (0..tree.len())
        .filter(|&id| tree.regions()[id].level > 0)
        .collect()
}

fn check(
    d: &Dataset,
    nu: &Contrast,
    set: &IntervalSet,
    event: &Event,
    stop: &StoppingRule,
    lambda: f64,
    exec: Exec,
) -> Agreement {
    let grid = GridSpec::around(nu, 1.0);
    let probes = grid.probes();
    let member = brute_force_membership(d, d.y(), nu, event, stop, lambda, &probes, exec).unwrap();
    compare(set, &probes, &member, 1e-6 * 2.0 * grid.half_width)
}

fn simpson(
    f: &dyn Fn(f64) -> f64,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    eps: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm), f(rm));
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * eps {
        return left + right + delta / 15.0;
    }
    simpson(f, a, m, fa, flm, fm, left, 0.5 * eps, depth - 1)
        + simpson(f, m, b, fm, frm, fb, right, 0.5 * eps, depth - 1)
}

/// Adaptive Simpson quadrature of `f` over `[a, b]`.
pub fn integrate(f: &dyn Fn(f64) -> f64, a: f64, b: f64, eps: f64) -> f64 {
    if !(b > a) {
        return 0.0;
    }
    // seed with a fixed subdivision so narrow peaks are not missed
    let k = 64;
    let h = (b - a) / k as f64;
    (0..k)
        .map(|i| {
            let (lo, hi) = (a + i as f64 * h, a + (i + 1) as f64 * h);
            let (fa, fb, fm) = (f(lo), f(hi), f(0.5 * (lo + hi)));
            let whole = (hi - lo) / 6.0 * (fa + 4.0 * fm + fb);
            simpson(f, lo, hi, fa, fm, fb, whole, eps / k as f64, 40)
        })
        .sum()
}

/// `P(X <= x | X in support)` for `X ~ N(mean, sd^2)`, by quadrature of the
/// density rescaled to peak at one on the support.
pub fn tn_cdf_quadrature(x: f64, mean: f64, sd: f64, support: &IntervalSet) -> f64 {
    let pieces: Vec<(f64, f64)> = support
        .pieces()
        .iter()
        .map(|iv| ((iv.lo - mean) / sd, (iv.hi - mean) / sd))
        .collect();
    let z0 = pieces
        .iter()
        .map(|&(lo, hi)| 0.0f64.clamp(lo, hi).abs())
        .fold(f64::INFINITY, f64::min);
    let f = move |z: f64| (-(z * z - z0 * z0) / 2.0).exp();
    // beyond an edge at distance r >= 1 the density falls by at least exp(-r t)
    let reach = |edge: f64| 40.0 / edge.abs().max(1.0);
    let finite = |(lo, hi): (f64, f64)| -> (f64, f64) {
        match (lo.is_finite(), hi.is_finite()) {
            (true, true) => (lo, hi),
            (true, false) => (lo, lo.max(0.0) + reach(lo.max(0.0))),
            (false, true) => (hi.min(0.0) - reach(hi.min(0.0)), hi),
            (false, false) => (-40.0, 40.0),
        }
    };
    let zx = (x - mean) / sd;
    let (mut below, mut total) = (0.0, 0.0);
    for &piece in &pieces {
        let (lo, hi) = finite(piece);
        let mass = integrate(&f, lo, hi, 1e-13);
        total += mass;
        if zx >= hi {
            below += mass;
        } else if zx > lo {
            below += integrate(&f, lo, zx, 1e-13);
        }
    }
    below / total
}

/// A union of one to four intervals, possibly unbounded, on the scale of `mean` and `sd`.
pub fn random_support(rng: &mut impl Rng, mean: f64, sd: f64) -> IntervalSet {
    let k = rng.random_range(1..=4);
    let mut cuts: Vec<f64> = (0..2 * k).map(|_| rng.random_range(-4.0..4.0)).collect();
    cuts.sort_by(f64::total_cmp);
    if rng.random_bool(0.3) {
        cuts[0] = f64::NEG_INFINITY;
    }
    if rng.random_bool(0.3) {
        cuts[2 * k - 1] = f64::INFINITY;
    }
    IntervalSet::from_intervals(
        cuts.chunks(2)
            .map(|c| Interval::closed(mean + sd * c[0], mean + sd * c[1]))
            .collect(),
    )
}

pub fn point_in(rng: &mut impl Rng, s: &IntervalSet, mean: f64, sd: f64) -> f64 {
    let iv = s.pieces()[rng.random_range(0..s.pieces().len())];
    let lo = if iv.lo.is_finite() {
        iv.lo
    } else {
        iv.hi.min(mean) - 3.0 * sd
    };
    let hi = if iv.hi.is_finite() {
        iv.hi
    } else {
        lo.max(mean) + 3.0 * sd
    };
    rng.random_range(lo..=hi)
}
