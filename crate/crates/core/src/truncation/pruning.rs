use std::borrow::Cow;

use crate::cart::{bottom_up_ordering, grow, prune_steps, split_gains, RegionId, Tree};
use crate::contrast::Contrast;
use crate::error::{Error, Result};
use crate::intervals::{IntervalSet, QuadraticConstraint};

use super::{Branch, Conditioning, StreamedBranch};

/// The tree against which the pruning constraints of a branch are written:
/// the unpruned tree at some `phi` in the growth set, pruned at every region
/// except those on the branch.
#[derive(Clone, Debug)]
pub struct PruningTree<'a> {
    pub tree: Cow<'a, Tree>,
    /// Ids of `R^(0)`, ..., `R^(L)` in `tree`.
    pub chain: Vec<RegionId>,
    /// The `phi` at which the tree was grown.
    pub phi: f64,
    /// `y'(phi)`.
    pub y: Cow<'a, [f64]>,
}

/// Points of `set` to try as growth responses, widest piece first. Unbounded
/// pieces are probed `reach` away from their finite end.
fn probe_points(set: &IntervalSet, anchor: f64, reach: f64) -> Vec<f64> {
    let mut pts: Vec<(f64, f64)> = set
        .pieces()
        .iter()
        .map(|iv| match (iv.lo.is_finite(), iv.hi.is_finite()) {
            (true, true) => ((iv.lo + iv.hi) / 2.0, iv.hi - iv.lo),
            (true, false) => (iv.lo.max(anchor - reach) + reach, reach),
            (false, true) => (iv.hi.min(anchor + reach) - reach, reach),
            (false, false) => (anchor, f64::INFINITY),
        })
        .collect();
    pts.sort_by(|a, b| b.1.total_cmp(&a.1));
    pts.into_iter().map(|p| p.0).collect()
}

/// Builds the pruning tree for `branch`. When the fitted tree contains the
/// branch it is used directly at `phi = nu^T y`.
pub fn build_pruning_tree<'a>(
    ctx: &Conditioning<'a>,
    branch: &Branch,
    nu: &Contrast,
    grow_set: &IntervalSet,
) -> Result<PruningTree<'a>> {
    if let Some(fitted) = ctx.fitted {
        if let Some(chain) = fitted.follow(branch.steps()) {
            return Ok(PruningTree {
                tree: Cow::Borrowed(fitted),
                chain,
                phi: nu.statistic(),
                y: Cow::Borrowed(ctx.y),
            });
        }
    }
    if grow_set.is_empty() {
        return Err(Error::PruningTree("the growth set is empty".into()));
    }
    let reach = 10.0 * nu.norm() * ctx.spread();
    let big_l = branch.len();
    for phi in probe_points(grow_set, nu.statistic(), reach) {
        let y = nu.y_prime(phi, ctx.y);
        let t0 = grow(ctx.data, &y, &ctx.stopping)?;
        let Some(chain) = t0.follow(branch.steps()) else {
            continue;
        };
        let tail: Vec<RegionId> = chain[..big_l].iter().rev().copied().collect();
        let order = bottom_up_ordering(&t0, &tail)?;
        let tree = prune_steps(&t0, &y, ctx.lambda, &order, t0.len() - big_l)?;
        let Some(chain) = tree.follow(branch.steps()) else {
            continue;
        };
        return Ok(PruningTree {
            tree: Cow::Owned(tree),
            chain,
            phi,
            y: Cow::Owned(y),
        });
    }
    Err(Error::PruningTree(format!(
        "no point of {grow_set} regrows the branch"
    )))
}

/// For each `l < L`, the constraint that `R^(l)` survives pruning:
/// the summed gains along the branch below `R^(l)` must reach
/// `lambda (|term(R^(l))| - 1)` less the fixed cost of the side subtrees.
pub(crate) fn prune_constraints(
    ctx: &Conditioning<'_>,
    streamed: &StreamedBranch,
    pt: &PruningTree<'_>,
) -> Vec<(usize, QuadraticConstraint)> {
    let tree = pt.tree.as_ref();
    let gains = split_gains(tree, &pt.y);
    let h = |id: RegionId| -> f64 { tree.subtree(id).into_iter().map(|k| gains[k]).sum() };
    let big_l = streamed.levels.len();
    let chain = &pt.chain;

    // side[l] = h of the sibling of R^(l), for l = 1..=L
    let side: Vec<f64> = (0..=big_l)
        .map(|l| {
            if l == 0 {
                0.0
            } else {
                tree.sibling(chain[l]).map_or(0.0, h)
            }
        })
        .collect();
    let h_last = h(chain[big_l]);

    (0..big_l)
        .map(|l| {
            let terms = tree.terminal_descendants(chain[l]).len();
            let fixed: f64 = side[l + 1..].iter().sum::<f64>() + h_last;
            let gamma = ctx.lambda * (terms as f64 - 1.0) - fixed;
            let lhs = streamed.levels[l..]
                .iter()
                .fold(super::Coefficients::default(), |acc, lv| {
                    acc.plus(&lv.chosen)
                });
            (l, QuadraticConstraint::ge(lhs.a, lhs.b, lhs.c - gamma))
        })
        .collect()
}
