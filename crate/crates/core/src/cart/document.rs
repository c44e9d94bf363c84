use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};

use super::{Node, Side, Split, StoppingRule, Tree};

pub const TREE_SCHEMA: &str = "treeval.tree/v1";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitRecord {
    pub feature: usize,
    pub rank: usize,
    pub threshold: f64,
    pub side: Side,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegionRecord {
    pub id: usize,
    pub parent: Option<usize>,
    pub children: Option<[usize; 2]>,
    pub level: usize,
    pub split: Option<SplitRecord>,
    pub n: usize,
    pub mean: f64,
    pub sse: f64,
}

/// Serialized form of a [`Tree`]. Ids follow the tree's bottom-up numbering.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TreeDocument {
    pub schema: String,
    pub response: String,
    pub features: Vec<String>,
    pub lambda: Option<f64>,
    pub stopping: StoppingRule,
    pub regions: Vec<RegionRecord>,
}

impl Tree {
    pub fn to_document(&self, d: &Dataset) -> TreeDocument {
        TreeDocument {
            schema: TREE_SCHEMA.to_string(),
            response: d.response_name().to_string(),
            features: d.feature_names().to_vec(),
            lambda: self.lambda,
            stopping: self.stopping,
            regions: self
                .regions
                .iter()
                .map(|r| RegionRecord {
                    id: r.id,
                    parent: r.parent,
                    children: r.children,
                    level: r.level,
                    split: r.split.map(|s| SplitRecord {
                        feature: s.feature,
                        rank: s.rank,
                        threshold: s.threshold,
                        side: s.side,
                    }),
                    n: r.n(),
                    mean: r.mean(),
                    sse: r.sse,
                })
                .collect(),
        }
    }

    /// Rebuilds a tree against the dataset it was fitted on. Memberships are
    /// recomputed from the thresholds and checked against the recorded sizes.
    pub fn from_document(doc: &TreeDocument, d: &Dataset) -> Result<Tree> {
        let bad = |msg: String| Error::TreeFormat(msg);
        if doc.schema != TREE_SCHEMA {
            return Err(bad(format!("unsupported schema '{}'", doc.schema)));
        }
        if doc.features.len() != d.p() {
            return Err(bad(format!(
                "tree has {} features, dataset has {}",
                doc.features.len(),
                d.p()
            )));
        }
        let k = doc.regions.len();
        if k == 0 {
            return Err(bad("no regions".into()));
        }
        for (idx, r) in doc.regions.iter().enumerate() {
            if r.id != idx {
                return Err(bad(format!("region ids must be 0..{k} in order")));
            }
        }
        let root = k - 1;
        if doc.regions[root].parent.is_some() {
            return Err(bad("the last region must be the root".into()));
        }
        let mut nodes: Vec<Node> = doc
            .regions
            .iter()
            .map(|r| Node {
                parent: r.parent,
                children: r.children,
                split: None,
                members: Vec::new(),
            })
            .collect();
        for r in &doc.regions {
            if r.id != root {
                let s = r
                    .split
                    .as_ref()
                    .ok_or_else(|| bad(format!("region {} has no split", r.id)))?;
                d.check_feature(s.feature)?;
                let t = d.order_statistic(s.feature, s.rank)?;
                if t != s.threshold {
                    return Err(bad(format!(
                        "region {}: threshold {} is not order statistic {} of feature {}",
                        r.id, s.threshold, s.rank, s.feature
                    )));
                }
                nodes[r.id].split = Some(Split {
                    feature: s.feature,
                    rank: s.rank,
                    threshold: s.threshold,
                    side: s.side,
                });
            }
        }
        nodes[root].members = (0..d.n()).collect();
        for id in (0..k).rev() {
            if let Some(children) = nodes[id].children {
                for c in children {
                    if c >= id || nodes.get(c).and_then(|n| n.parent) != Some(id) {
                        return Err(bad(format!("region {id} has inconsistent child {c}")));
                    }
                    let s = nodes[c].split.expect("checked above");
                    let members = nodes[id]
                        .members
                        .iter()
                        .copied()
                        .filter(|&i| s.side.admits(d.x(i, s.feature), s.threshold))
                        .collect();
                    nodes[c].members = members;
                }
            }
        }
        let tree = Tree::from_arena(&nodes, root, d.y(), d.p(), doc.lambda, doc.stopping);
        if tree.len() != k {
            return Err(bad("regions are not all reachable from the root".into()));
        }
        for (r, rec) in tree.regions.iter().zip(&doc.regions) {
            if r.parent != rec.parent || r.children != rec.children {
                return Err(bad("region ids are not in bottom-up order".into()));
            }
            if r.n() != rec.n {
                return Err(bad(format!(
                    "region {} has {} members, document says {}",
                    r.id,
                    r.n(),
                    rec.n
                )));
            }
        }
        Ok(tree)
    }
}
