use crate::contrast::{Contrast, ContrastKind};
use crate::error::{Error, Result};
use crate::intervals::{
    intersect_all, solve_quadratic_scaled, union_all, Interval, IntervalSet, QuadraticConstraint,
};

use super::pruning::prune_constraints;
use super::{
    build_pruning_tree, stream_coefficients, Branch, Conditioning, ConstraintKind,
    ConstraintRecord, PermutationMode, SetReport, StreamedBranch,
};

/// Gains closer than this fraction of the parent SSE count as tied, matching growth.
const GAIN_TIE_TOL: f64 = 1e-10;

const MAX_FULL_PERMUTATION_LEN: usize = 8;

/// Solved growth constraints grouped by level, or a proof the set is empty.
enum GrowSolution {
    Empty,
    Levels(Vec<Vec<IntervalSet>>),
}

fn solve_growth(
    ctx: &Conditioning<'_>,
    streamed: &StreamedBranch,
    phi_scale: f64,
    trace: &mut Vec<ConstraintRecord>,
) -> GrowSolution {
    let mut levels = Vec::with_capacity(streamed.levels.len());
    for lv in &streamed.levels {
        if !lv.admissible {
            return GrowSolution::Empty;
        }
        let chosen_key = (lv.chosen_feature, lv.chosen_rank);
        let tie = GAIN_TIE_TOL * lv.parent_sse;
        let mut sets = Vec::new();
        for comp in &lv.competitors {
            if comp.ties_chosen {
                // the refit keeps the smallest (feature, rank) realizing a partition
                if (comp.feature, comp.rank) < chosen_key {
                    return GrowSolution::Empty;
                }
                continue;
            }
            let diff = comp.coef.minus(&lv.chosen);
            let q = QuadraticConstraint::le(diff.a, diff.b, diff.c);
            let set = if diff.a == 0.0 && diff.b == 0.0 {
                if diff.c <= tie {
                    IntervalSet::real_line()
                } else {
                    IntervalSet::empty()
                }
            } else {
                solve_quadratic_scaled(&q, ctx.tol, phi_scale)
            };
            if ctx.trace {
                trace.push(ConstraintRecord {
                    kind: ConstraintKind::Grow,
                    level: lv.level,
                    feature: Some(comp.feature),
                    rank: Some(comp.rank),
                    constraint: q,
                    solution: set.clone(),
                });
            }
            if !set.is_real_line() {
                sets.push(set);
            }
        }
        levels.push(sets);
    }
    GrowSolution::Levels(levels)
}

fn check_stopping(ctx: &Conditioning<'_>) -> Result<()> {
    if ctx.stopping.min_gain > 0.0 {
        return Err(Error::InvalidArgument(
            "conditioning sets do not cover a positive min_gain; refit with min_gain = 0".into(),
        ));
    }
    Ok(())
}

fn branch_too_deep(ctx: &Conditioning<'_>, branch: &Branch) -> bool {
    branch.len() > ctx.stopping.max_level
}

/// Values of `phi` for which the unpruned tree grown on `y'(phi)` contains `branch`.
pub fn s_grow(ctx: &Conditioning<'_>, branch: &Branch, nu: &Contrast) -> Result<IntervalSet> {
    check_stopping(ctx)?;
    if branch_too_deep(ctx, branch) {
        return Ok(IntervalSet::empty());
    }
    let streamed = stream_coefficients(ctx, branch, nu)?;
    let mut trace = Vec::new();
    Ok(
        match solve_growth(ctx, &streamed, ctx.phi_scale(nu), &mut trace) {
            GrowSolution::Empty => IntervalSet::empty(),
            GrowSolution::Levels(levels) => intersect_all(&levels.concat()),
        },
    )
}

fn empty_report(trace: Vec<ConstraintRecord>) -> SetReport {
    SetReport {
        set: IntervalSet::empty(),
        fast_path: false,
        constraints: trace,
    }
}

/// The shared work of both paths: growth constraints, then pruning constraints
/// against the pruning tree. `fast` reduces the solved sets in constant time
/// per constraint and returns `None` if their shapes do not allow it.
fn conditioning_set(
    ctx: &Conditioning<'_>,
    branch: &Branch,
    nu: &Contrast,
    fast: bool,
) -> Result<Option<SetReport>> {
    check_stopping(ctx)?;
    let mut trace = Vec::new();
    if branch_too_deep(ctx, branch) {
        return Ok(Some(empty_report(trace)));
    }
    let streamed = stream_coefficients(ctx, branch, nu)?;
    let phi_scale = ctx.phi_scale(nu);
    let levels = match solve_growth(ctx, &streamed, phi_scale, &mut trace) {
        GrowSolution::Empty => return Ok(Some(empty_report(trace))),
        GrowSolution::Levels(levels) => levels,
    };

    let grow_set = if fast {
        IntervalSet::real_line()
    } else {
        let set = intersect_all(&levels.concat());
        if set.is_empty() || ctx.lambda == 0.0 {
            return Ok(Some(SetReport {
                set,
                fast_path: false,
                constraints: trace,
            }));
        }
        set
    };

    let prune_sets: Vec<IntervalSet> = if ctx.lambda == 0.0 {
        Vec::new()
    } else {
        let pt = build_pruning_tree(ctx, branch, nu, &grow_set)?;
        prune_constraints(ctx, &streamed, &pt)
            .into_iter()
            .map(|(l, q)| {
                let set = solve_quadratic_scaled(&q, ctx.tol, phi_scale);
                if ctx.trace {
                    trace.push(ConstraintRecord {
                        kind: ConstraintKind::Prune,
                        level: l,
                        feature: None,
                        rank: None,
                        constraint: q,
                        solution: set.clone(),
                    });
                }
                set
            })
            .collect()
    };

    if !fast {
        let mut all = prune_sets;
        all.push(grow_set);
        return Ok(Some(SetReport {
            set: intersect_all(&all),
            fast_path: false,
            constraints: trace,
        }));
    }

    let big_l = levels.len();
    let mut inner = Some(Interval::real_line());
    let mut outer = Complements::default();
    for (l, sets) in levels.iter().enumerate() {
        for set in sets {
            if l + 1 < big_l {
                match set.pieces() {
                    [] => inner = None,
                    [iv] => inner = inner.and_then(|cur| intersect_interval(&cur, iv)),
                    _ => return Ok(None),
                }
            } else if !outer.absorb(set) {
                return Ok(None);
            }
        }
    }
    for set in &prune_sets {
        if !outer.absorb(set) {
            return Ok(None);
        }
    }
    let Some(inner) = inner else {
        return Ok(Some(SetReport {
            set: IntervalSet::empty(),
            fast_path: true,
            constraints: trace,
        }));
    };
    let Some(outer_set) = outer.finish() else {
        return Ok(None);
    };
    Ok(Some(SetReport {
        set: IntervalSet::from_interval(inner).intersect(&outer_set),
        fast_path: true,
        constraints: trace,
    }))
}

fn intersect_interval(a: &Interval, b: &Interval) -> Option<Interval> {
    let s = IntervalSet::from_interval(*a).intersect(&IntervalSet::from_interval(*b));
    s.pieces().first().copied()
}

/// Running intersection of sets of the form `(-inf, c] U [d, inf)`.
#[derive(Default)]
struct Complements {
    /// Smallest `c` with closedness, and the largest `c` seen.
    low: Option<(f64, bool)>,
    max_c: f64,
    /// Largest `d` with closedness, and the smallest `d` seen.
    high: Option<(f64, bool)>,
    min_d: f64,
}

impl Complements {
    fn absorb(&mut self, set: &IntervalSet) -> bool {
        if set.is_real_line() {
            return true;
        }
        let [left, right] = set.pieces() else {
            return false;
        };
        if left.lo != f64::NEG_INFINITY || right.hi != f64::INFINITY {
            return false;
        }
        let (c, cc) = (left.hi, left.hi_closed);
        let (d, dc) = (right.lo, right.lo_closed);
        self.low = Some(match self.low {
            None => {
                self.max_c = c;
                (c, cc)
            }
            Some((v, vc)) => {
                self.max_c = self.max_c.max(c);
                if c < v {
                    (c, cc)
                } else if c == v {
                    (v, vc && cc)
                } else {
                    (v, vc)
                }
            }
        });
        self.high = Some(match self.high {
            None => {
                self.min_d = d;
                (d, dc)
            }
            Some((v, vc)) => {
                self.min_d = self.min_d.min(d);
                if d > v {
                    (d, dc)
                } else if d == v {
                    (v, vc && dc)
                } else {
                    (v, vc)
                }
            }
        });
        true
    }

    /// The intersection, valid when every gap `(c_i, d_i)` shares a common point.
    fn finish(&self) -> Option<IntervalSet> {
        match (self.low, self.high) {
            (None, None) => Some(IntervalSet::real_line()),
            (Some((c, cc)), Some((d, dc))) => (self.max_c < self.min_d).then(|| {
                IntervalSet::from_intervals(vec![Interval::below(c, cc), Interval::above(d, dc)])
            }),
            _ => None,
        }
    }
}

/// Conditioning set of a branch by intersecting every solved constraint.
pub fn s_pruned(ctx: &Conditioning<'_>, branch: &Branch, nu: &Contrast) -> Result<IntervalSet> {
    Ok(pruned_report(ctx, branch, nu)?.set)
}

pub fn pruned_report(ctx: &Conditioning<'_>, branch: &Branch, nu: &Contrast) -> Result<SetReport> {
    Ok(conditioning_set(ctx, branch, nu, false)?.expect("the generic path always yields a set"))
}

/// The sibling fast path, or `None` when it does not apply: the branch must be
/// in the fitted tree, `nu` a sibling contrast, and every solved constraint of
/// the expected shape.
pub fn sibling_fast_path(
    ctx: &Conditioning<'_>,
    branch: &Branch,
    nu: &Contrast,
) -> Result<Option<SetReport>> {
    let in_fitted = ctx
        .fitted
        .is_some_and(|t| t.follow(branch.steps()).is_some());
    if !in_fitted || nu.kind() != ContrastKind::Sibling || branch.is_empty() {
        return Ok(None);
    }
    conditioning_set(ctx, branch, nu, true)
}

/// Conditioning set for a sibling contrast, by the fast path when it applies.
pub fn s_sib(ctx: &Conditioning<'_>, branch: &Branch, nu: &Contrast) -> Result<IntervalSet> {
    Ok(sibling_report(ctx, branch, nu)?.set)
}

pub fn sibling_report(ctx: &Conditioning<'_>, branch: &Branch, nu: &Contrast) -> Result<SetReport> {
    if nu.kind() != ContrastKind::Sibling {
        return Err(Error::InvalidContrast("expected a sibling contrast".into()));
    }
    match sibling_fast_path(ctx, branch, nu)? {
        Some(report) => Ok(report),
        None => pruned_report(ctx, branch, nu),
    }
}

/// Orderings of `0..len` in lexicographic order, at most `limit` of them.
pub fn permutations(len: usize, limit: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut perm: Vec<usize> = (0..len).collect();
    loop {
        if out.len() >= limit {
            break;
        }
        out.push(perm.clone());
        let Some(i) = (1..len).rev().find(|&i| perm[i - 1] < perm[i]) else {
            break;
        };
        let j = (i..len)
            .rev()
            .find(|&j| perm[j] > perm[i - 1])
            .expect("pivot exists");
        perm.swap(i - 1, j);
        perm[i..].reverse();
    }
    out
}

/// Conditioning set for a region contrast, united over orderings of the branch.
pub fn s_reg(
    ctx: &Conditioning<'_>,
    branch: &Branch,
    nu: &Contrast,
    mode: PermutationMode,
) -> Result<IntervalSet> {
    if nu.kind() != ContrastKind::Region {
        return Err(Error::InvalidContrast("expected a region contrast".into()));
    }
    let perms = match mode {
        PermutationMode::Identity => permutations(branch.len(), 1),
        PermutationMode::Budget(k) => permutations(branch.len(), k),
        PermutationMode::Full => {
            if branch.len() > MAX_FULL_PERMUTATION_LEN {
                return Err(Error::TooManyPermutations(branch.len()));
            }
            permutations(branch.len(), usize::MAX)
        }
    };
    let sets = ctx
        .exec
        .map(&perms, |perm| s_pruned(ctx, &branch.permuted(perm), nu));
    let sets: Vec<IntervalSet> = sets.into_iter().collect::<Result<_>>()?;
    Ok(union_all(&sets))
}
