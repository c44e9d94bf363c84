//! CART regression trees: greedy growth, cost-complexity pruning and prediction.

mod document;
mod grow;
mod prune;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use document::{RegionRecord, SplitRecord, TreeDocument, TREE_SCHEMA};
pub use grow::{best_split, gain, grow, SplitCandidate};
pub use prune::{
    bottom_up_ordering, fit, g_value, is_bottom_up, prune, prune_steps, split_gains, subtree_gain,
};

pub type RegionId = usize;

/// Which halfspace of a split a region lies in.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    /// `x_j <= threshold`
    Left,
    /// `x_j > threshold`
    Right,
}

impl Side {
    pub fn opposite(self) -> Side {
        match self {
            Side::Left => Side::Right,
            Side::Right => Side::Left,
        }
    }

    pub fn admits(self, value: f64, threshold: f64) -> bool {
        match self {
            Side::Left => value <= threshold,
            Side::Right => value > threshold,
        }
    }
}

/// The halfspace `{z : z_feature <= x_(rank)}` or its complement.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Split {
    pub feature: usize,
    pub rank: usize,
    pub threshold: f64,
    pub side: Side,
}

impl Split {
    pub fn admits(&self, x: &[f64]) -> bool {
        self.side.admits(x[self.feature], self.threshold)
    }

    /// Same halfspace, compared geometrically.
    pub fn same_halfspace(&self, other: &Split) -> bool {
        self.feature == other.feature
            && self.threshold == other.threshold
            && self.side == other.side
    }

    pub fn flipped(&self) -> Split {
        Split {
            side: self.side.opposite(),
            ..*self
        }
    }
}

/// Growth limits. A node is split only below `max_level`, when each child keeps
/// at least `min_node_size` observations, and when the best gain reaches `min_gain`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StoppingRule {
    pub max_level: usize,
    pub min_node_size: usize,
    pub min_gain: f64,
}

impl Default for StoppingRule {
    fn default() -> Self {
        Self {
            max_level: 3,
            min_node_size: 1,
            min_gain: 0.0,
        }
    }
}

impl StoppingRule {
    pub fn validate(&self) -> Result<()> {
        if self.min_node_size == 0 {
            return Err(Error::InvalidArgument(
                "min_node_size must be at least 1".into(),
            ));
        }
        if !(self.min_gain >= 0.0) {
            return Err(Error::InvalidArgument(
                "min_gain must be non-negative".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Region {
    pub id: RegionId,
    pub parent: Option<RegionId>,
    /// `[left, right]` children, absent for terminal regions.
    pub children: Option<[RegionId; 2]>,
    /// The halfspace added at this region's parent; `None` at the root.
    pub split: Option<Split>,
    pub level: usize,
    /// Sorted observation indices.
    pub members: Vec<usize>,
    pub sum: f64,
    pub sse: f64,
}

impl Region {
    pub fn n(&self) -> usize {
        self.members.len()
    }

    pub fn mean(&self) -> f64 {
        self.sum / self.members.len() as f64
    }

    pub fn is_terminal(&self) -> bool {
        self.children.is_none()
    }
}

/// Axis-aligned box of a region: per feature, an exclusive lower and inclusive upper bound.
#[derive(Clone, Debug, PartialEq)]
pub struct RegionBox(pub Vec<(f64, f64)>);

impl RegionBox {
    pub fn unbounded(p: usize) -> Self {
        Self(vec![(f64::NEG_INFINITY, f64::INFINITY); p])
    }

    pub fn from_splits(p: usize, splits: &[Split]) -> Self {
        let mut b = Self::unbounded(p);
        for s in splits {
            let (lo, hi) = &mut b.0[s.feature];
            match s.side {
                Side::Left => *hi = hi.min(s.threshold),
                Side::Right => *lo = lo.max(s.threshold),
            }
        }
        b
    }
}

/// A fitted tree. Regions are stored in post-order (children before parents,
/// left before right) so ids are bottom-up and the root has the largest id.
#[derive(Clone, Debug, PartialEq)]
pub struct Tree {
    regions: Vec<Region>,
    p: usize,
    lambda: Option<f64>,
    stopping: StoppingRule,
}

/// Arena node used while building or restricting trees.
#[derive(Clone, Debug)]
pub(crate) struct Node {
    pub parent: Option<usize>,
    pub children: Option<[usize; 2]>,
    pub split: Option<Split>,
    pub members: Vec<usize>,
}

impl Tree {
    /// Renumbers the subtree hanging from arena node `root` in post-order.
    pub(crate) fn from_arena(
        nodes: &[Node],
        root: usize,
        y: &[f64],
        p: usize,
        lambda: Option<f64>,
        stopping: StoppingRule,
    ) -> Tree {
        let mut order = Vec::with_capacity(nodes.len());
        let mut stack = vec![(root, false)];
        while let Some((id, expanded)) = stack.pop() {
            if expanded {
                order.push(id);
                continue;
            }
            stack.push((id, true));
            if let Some([l, r]) = nodes[id].children {
                stack.push((r, false));
                stack.push((l, false));
            }
        }
        let mut new_id = vec![usize::MAX; nodes.len()];
        for (k, &old) in order.iter().enumerate() {
            new_id[old] = k;
        }
        let mut regions: Vec<Region> = order
            .iter()
            .enumerate()
            .map(|(k, &old)| {
                let node = &nodes[old];
                let (sum, sse) = sum_and_sse(&node.members, y);
                Region {
                    id: k,
                    parent: if old == root {
                        None
                    } else {
                        node.parent.map(|q| new_id[q])
                    },
                    children: node.children.map(|[l, r]| [new_id[l], new_id[r]]),
                    split: if old == root { None } else { node.split },
                    level: 0,
                    members: node.members.clone(),
                    sum,
                    sse,
                }
            })
            .collect();
        for k in (0..regions.len()).rev() {
            if let Some(q) = regions[k].parent {
                regions[k].level = regions[q].level + 1;
            }
        }
        Tree {
            regions,
            p,
            lambda,
            stopping,
        }
    }

    pub(crate) fn to_arena(&self) -> Vec<Node> {
        self.regions
            .iter()
            .map(|r| Node {
                parent: r.parent,
                children: r.children,
                split: r.split,
                members: r.members.clone(),
            })
            .collect()
    }

    pub fn regions(&self) -> &[Region] {
        &self.regions
    }

    pub fn len(&self) -> usize {
        self.regions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.regions.is_empty()
    }

    pub fn root(&self) -> RegionId {
        self.regions.len() - 1
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn lambda(&self) -> Option<f64> {
        self.lambda
    }

    pub fn stopping(&self) -> StoppingRule {
        self.stopping
    }

    pub fn region(&self, id: RegionId) -> Result<&Region> {
        self.regions.get(id).ok_or(Error::UnknownRegion(id))
    }

    pub fn is_terminal(&self, id: RegionId) -> bool {
        self.regions[id].children.is_none()
    }

    /// Ids of terminal regions, ascending.
    pub fn terminals(&self) -> Vec<RegionId> {
        (0..self.len()).filter(|&k| self.is_terminal(k)).collect()
    }

    /// Ids of internal regions, ascending.
    pub fn internal(&self) -> Vec<RegionId> {
        (0..self.len()).filter(|&k| !self.is_terminal(k)).collect()
    }

    /// The subtree rooted at `id` in post-order, `id` last.
    pub fn subtree(&self, id: RegionId) -> Vec<RegionId> {
        let mut out = Vec::new();
        let mut stack = vec![(id, false)];
        while let Some((k, expanded)) = stack.pop() {
            if expanded {
                out.push(k);
            } else {
                stack.push((k, true));
                if let Some([l, r]) = self.regions[k].children {
                    stack.push((r, false));
                    stack.push((l, false));
                }
            }
        }
        out
    }

    /// Terminal descendants of `id`; `{id}` when `id` is terminal.
    pub fn terminal_descendants(&self, id: RegionId) -> Vec<RegionId> {
        self.subtree(id)
            .into_iter()
            .filter(|&k| self.is_terminal(k))
            .collect()
    }

    pub fn sibling(&self, id: RegionId) -> Option<RegionId> {
        let parent = self.regions[id].parent?;
        let [l, r] = self.regions[parent].children?;
        Some(if l == id { r } else { l })
    }

    /// Region ids from the root down to `id`.
    pub fn chain(&self, id: RegionId) -> Vec<RegionId> {
        let mut out = vec![id];
        let mut k = id;
        while let Some(q) = self.regions[k].parent {
            out.push(q);
            k = q;
        }
        out.reverse();
        out
    }

    /// Splits from the root down to `id`.
    pub fn path(&self, id: RegionId) -> Vec<Split> {
        self.chain(id)
            .into_iter()
            .filter_map(|k| self.regions[k].split)
            .collect()
    }

    /// Follows `splits` from the root, matching halfspaces geometrically.
    /// Returns the region ids visited, root first.
    pub fn follow(&self, splits: &[Split]) -> Option<Vec<RegionId>> {
        let mut k = self.root();
        let mut out = vec![k];
        for s in splits {
            let [l, r] = self.regions[k].children?;
            k = [l, r]
                .into_iter()
                .find(|&c| self.regions[c].split.is_some_and(|cs| cs.same_halfspace(s)))?;
            out.push(k);
        }
        Some(out)
    }

    pub fn region_box(&self, id: RegionId) -> RegionBox {
        RegionBox::from_splits(self.p, &self.path(id))
    }

    /// First region whose box equals `target`.
    pub fn find_box(&self, target: &RegionBox) -> Option<RegionId> {
        (0..self.len()).find(|&k| &self.region_box(k) == target)
    }

    /// Predicted mean for a covariate vector.
    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut k = self.root();
        while let Some([l, r]) = self.regions[k].children {
            let s = self.regions[l].split.expect("child regions carry a split");
            k = if s.admits(x) { l } else { r };
        }
        self.regions[k].mean()
    }

    /// Terminal region containing a covariate vector.
    pub fn locate(&self, x: &[f64]) -> RegionId {
        let mut k = self.root();
        while let Some([l, r]) = self.regions[k].children {
            let s = self.regions[l].split.expect("child regions carry a split");
            k = if s.admits(x) { l } else { r };
        }
        k
    }
}

pub(crate) fn sum_and_sse(members: &[usize], y: &[f64]) -> (f64, f64) {
    if members.is_empty() {
        return (0.0, 0.0);
    }
    let sum: f64 = members.iter().map(|&i| y[i]).sum();
    let mean = sum / members.len() as f64;
    let sse = members.iter().map(|&i| (y[i] - mean).powi(2)).sum();
    (sum, sse)
}
