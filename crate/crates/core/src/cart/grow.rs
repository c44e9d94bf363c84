use crate::dataset::Dataset;
use crate::error::{Error, Result};

use super::{sum_and_sse, Node, Side, Split, StoppingRule, Tree};

/// Relative tolerance under which two gains count as tied.
const GAIN_TIE_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SplitCandidate {
    pub feature: usize,
    pub rank: usize,
    pub threshold: f64,
    pub gain: f64,
    pub n_left: usize,
    pub n_right: usize,
}

/// Reduction in SSE from splitting `members` at `x_j <= x_(s)`.
pub fn gain(d: &Dataset, members: &[usize], j: usize, s: usize, y: &[f64]) -> Result<f64> {
    let t = d.order_statistic(j, s)?;
    let (left, right): (Vec<usize>, Vec<usize>) = members.iter().partition(|&&i| d.x(i, j) <= t);
    if left.is_empty() || right.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "split ({j}, {s}) leaves an empty child"
        )));
    }
    let (sl, _) = sum_and_sse(&left, y);
    let (sr, _) = sum_and_sse(&right, y);
    let (nl, nr) = (left.len() as f64, right.len() as f64);
    let diff = sl / nl - sr / nr;
    Ok(nl * nr / (nl + nr) * diff * diff)
}

/// Admissible split maximizing the gain over `members`, ties going to the
/// smallest `(feature, rank)`. Only the smallest rank realizing each distinct
/// partition is considered.
pub fn best_split(
    d: &Dataset,
    y: &[f64],
    members: &[usize],
    stop: &StoppingRule,
) -> Option<SplitCandidate> {
    let m = members.len();
    if m < 2 * stop.min_node_size.max(1) {
        return None;
    }
    let mut mask = vec![false; d.n()];
    for &i in members {
        mask[i] = true;
    }
    let (total, sse) = sum_and_sse(members, y);
    let tol = GAIN_TIE_TOL * sse.max(f64::MIN_POSITIVE);
    let min = stop.min_node_size.max(1);
    let mut best: Option<SplitCandidate> = None;

    for j in 0..d.p() {
        let order = d.sort_order(j);
        let col = d.column(j);
        let mut nl = 0usize;
        let mut sl = 0.0;
        let mut prev_nl = usize::MAX;
        for k in 0..d.n() - 1 {
            let i = order[k];
            if mask[i] {
                nl += 1;
                sl += y[i];
            }
            if col[i] >= col[order[k + 1]] || nl == prev_nl {
                continue;
            }
            prev_nl = nl;
            if nl == m {
                break;
            }
            let nr = m - nl;
            if nl < min || nr < min {
                continue;
            }
            let diff = sl / nl as f64 - (total - sl) / nr as f64;
            let g = (nl * nr) as f64 / m as f64 * diff * diff;
            if best.is_none_or(|b| g > b.gain + tol) {
                best = Some(SplitCandidate {
                    feature: j,
                    rank: k + 1,
                    threshold: col[i],
                    gain: g,
                    n_left: nl,
                    n_right: nr,
                });
            }
        }
    }
    best
}

/// Grows the unpruned tree on response `y`.
pub fn grow(d: &Dataset, y: &[f64], stop: &StoppingRule) -> Result<Tree> {
    stop.validate()?;
    if y.len() != d.n() {
        return Err(Error::InvalidArgument(format!(
            "response has {} values, dataset has {}",
            y.len(),
            d.n()
        )));
    }
    let mut nodes = vec![Node {
        parent: None,
        children: None,
        split: None,
        members: (0..d.n()).collect(),
    }];
    let mut stack = vec![(0usize, 0usize)];
    while let Some((id, level)) = stack.pop() {
        if level >= stop.max_level {
            continue;
        }
        let Some(c) = best_split(d, y, &nodes[id].members, stop) else {
            continue;
        };
        if c.gain < stop.min_gain {
            continue;
        }
        let (left, right): (Vec<usize>, Vec<usize>) = nodes[id]
            .members
            .iter()
            .partition(|&&i| d.x(i, c.feature) <= c.threshold);
        let split = Split {
            feature: c.feature,
            rank: c.rank,
            threshold: c.threshold,
            side: Side::Left,
        };
        let l = nodes.len();
        nodes.push(Node {
            parent: Some(id),
            children: None,
            split: Some(split),
            members: left,
        });
        nodes.push(Node {
            parent: Some(id),
            children: None,
            split: Some(split.flipped()),
            members: right,
        });
        nodes[id].children = Some([l, l + 1]);
        stack.push((l + 1, level + 1));
        stack.push((l, level + 1));
    }
    Ok(Tree::from_arena(&nodes, 0, y, d.p(), None, *stop))
}
