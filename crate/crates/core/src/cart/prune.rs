use crate::dataset::Dataset;
use crate::error::{Error, Result};

use super::{grow, RegionId, StoppingRule, Tree};

/// Every region appears once and after both of its children.
pub fn is_bottom_up(t: &Tree, order: &[RegionId]) -> bool {
    if order.len() != t.len() {
        return false;
    }
    let mut pos = vec![usize::MAX; t.len()];
    for (k, &id) in order.iter().enumerate() {
        if id >= t.len() || pos[id] != usize::MAX {
            return false;
        }
        pos[id] = k;
    }
    t.regions().iter().all(|r| {
        r.children
            .is_none_or(|[l, c]| pos[l] < pos[r.id] && pos[c] < pos[r.id])
    })
}

/// A bottom-up ordering of `t` whose last entries are `tail`.
///
/// `tail` must be an ancestor chain ending at the root, deepest first.
pub fn bottom_up_ordering(t: &Tree, tail: &[RegionId]) -> Result<Vec<RegionId>> {
    for &id in tail {
        t.region(id)?;
    }
    if let Some(&last) = tail.last() {
        if last != t.root() {
            return Err(Error::NotBottomUp("tail must end at the root".into()));
        }
    }
    for w in tail.windows(2) {
        if t.regions()[w[0]].parent != Some(w[1]) {
            return Err(Error::NotBottomUp(format!(
                "region {} is not the parent of {}",
                w[1], w[0]
            )));
        }
    }
    let mut in_tail = vec![false; t.len()];
    for &id in tail {
        in_tail[id] = true;
    }
    // ids are already post-order
    let mut order: Vec<RegionId> = (0..t.len()).filter(|&k| !in_tail[k]).collect();
    order.extend_from_slice(tail);
    Ok(order)
}

/// Gain of each internal region's split under `y`; zero at terminal regions.
pub fn split_gains(t: &Tree, y: &[f64]) -> Vec<f64> {
    let sums: Vec<f64> = t
        .regions()
        .iter()
        .map(|r| r.members.iter().map(|&i| y[i]).sum())
        .collect();
    t.regions()
        .iter()
        .map(|r| match r.children {
            None => 0.0,
            Some([l, c]) => {
                let nl = t.regions()[l].n() as f64;
                let nr = t.regions()[c].n() as f64;
                let diff = sums[l] / nl - sums[c] / nr;
                nl * nr / (nl + nr) * diff * diff
            }
        })
        .collect()
}

/// SSE of region `id` minus the SSE of its terminal descendants, accumulated as
/// the sum of split gains below `id`.
pub fn subtree_gain(t: &Tree, id: RegionId, y: &[f64]) -> f64 {
    let gains = split_gains(t, y);
    t.subtree(id).into_iter().map(|k| gains[k]).sum()
}

/// Weakest-link value of a non-terminal region.
pub fn g_value(t: &Tree, id: RegionId, y: &[f64]) -> Result<f64> {
    let r = t.region(id)?;
    if r.is_terminal() {
        return Err(Error::TerminalRegion(id));
    }
    let terms = t.terminal_descendants(id).len();
    Ok(subtree_gain(t, id, y) / (terms - 1) as f64)
}

/// Cost-complexity pruning: visits `order` and collapses each region whose
/// current g-value falls below `lambda`.
pub fn prune(t: &Tree, y: &[f64], lambda: f64, order: &[RegionId]) -> Result<Tree> {
    prune_steps(t, y, lambda, order, order.len())
}

/// The tree after the first `steps` visits of the pruning loop.
pub fn prune_steps(
    t: &Tree,
    y: &[f64],
    lambda: f64,
    order: &[RegionId],
    steps: usize,
) -> Result<Tree> {
    if !(lambda >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "lambda must be non-negative, got {lambda}"
        )));
    }
    if !is_bottom_up(t, order) {
        return Err(Error::NotBottomUp(
            "ordering must list every region after its children".into(),
        ));
    }
    let gains = split_gains(t, y);
    let mut cut = vec![false; t.len()];
    for &r in order.iter().take(steps) {
        if t.is_terminal(r) || cut[r] {
            continue;
        }
        let (mut h, mut terms) = (0.0, 0usize);
        let mut stack = vec![r];
        while let Some(k) = stack.pop() {
            match t.regions()[k].children {
                Some([l, c]) if !cut[k] => {
                    h += gains[k];
                    stack.push(l);
                    stack.push(c);
                }
                _ => terms += 1,
            }
        }
        if h / ((terms - 1) as f64) < lambda {
            cut[r] = true;
        }
    }
    let mut nodes = t.to_arena();
    for (k, node) in nodes.iter_mut().enumerate() {
        if cut[k] {
            node.children = None;
        }
    }
    Ok(Tree::from_arena(
        &nodes,
        t.root(),
        y,
        t.p(),
        Some(lambda),
        t.stopping(),
    ))
}

/// Grows on `y` and prunes at `lambda` with the default bottom-up ordering.
pub fn fit(d: &Dataset, y: &[f64], stop: &StoppingRule, lambda: f64) -> Result<Tree> {
    let t = grow(d, y, stop)?;
    let order: Vec<RegionId> = (0..t.len()).collect();
    prune(&t, y, lambda, &order)
}
