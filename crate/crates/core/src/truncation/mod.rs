//! Conditioning sets: the values of `nu^T y` for which a selection event recurs
//! when `y` is moved along `nu` with `P_perp y` held fixed.

mod coefficients;
mod pruning;
mod sets;

use serde::{Deserialize, Serialize};

use crate::cart::{RegionId, Split, StoppingRule, Tree};
use crate::contrast::Contrast;
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::intervals::{IntervalSet, QuadraticConstraint, DEFAULT_QUADRATIC_TOL};

pub use coefficients::{
    stream_coefficients, Coefficients, Competitor, LevelCoefficients, StreamedBranch,
};
pub use pruning::{build_pruning_tree, PruningTree};
pub use sets::{
    permutations, pruned_report, s_grow, s_pruned, s_reg, s_sib, sibling_fast_path, sibling_report,
};

/// The ordered halfspaces leading from the root to a region.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Branch {
    steps: Vec<Split>,
}

impl Branch {
    pub fn new(steps: Vec<Split>) -> Self {
        Self { steps }
    }

    pub fn steps(&self) -> &[Split] {
        &self.steps
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// Steps reordered so that step `k` of the result is step `perm[k]` of `self`.
    pub fn permuted(&self, perm: &[usize]) -> Branch {
        Branch {
            steps: perm.iter().map(|&k| self.steps[k]).collect(),
        }
    }

    /// For each observation, the deepest level `l` with the observation in `R^(l)`.
    pub fn depths(&self, d: &Dataset) -> Vec<usize> {
        let mut depth = vec![0usize; d.n()];
        for (l, s) in self.steps.iter().enumerate() {
            let col = d.column(s.feature);
            for (i, dep) in depth.iter_mut().enumerate() {
                if *dep == l && s.side.admits(col[i], s.threshold) {
                    *dep = l + 1;
                }
            }
        }
        depth
    }

    pub fn validate(&self, d: &Dataset) -> Result<()> {
        for s in &self.steps {
            d.check_feature(s.feature)?;
            if s.rank == 0 || s.rank >= d.n() {
                return Err(Error::RankOutOfRange {
                    rank: s.rank,
                    max: d.n() - 1,
                });
            }
            if d.order_statistic(s.feature, s.rank)? != s.threshold {
                return Err(Error::InvalidBranch(format!(
                    "threshold {} is not order statistic {} of feature {}",
                    s.threshold, s.rank, s.feature
                )));
            }
        }
        Ok(())
    }
}

/// The branch from the root of `tree` to region `id`.
pub fn branch_of(tree: &Tree, id: RegionId) -> Result<Branch> {
    tree.region(id)?;
    Ok(Branch::new(tree.path(id)))
}

/// How many orderings of a branch contribute to the region conditioning set.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "mode", content = "k")]
pub enum PermutationMode {
    /// Only the fitted ordering.
    Identity,
    /// The first `k` orderings in lexicographic order.
    Budget(usize),
    /// Every ordering; refused for branches longer than 8.
    Full,
}

impl std::str::FromStr for PermutationMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "identity" => Ok(Self::Identity),
            "full" => Ok(Self::Full),
            _ => match s.strip_prefix("budget:").map(str::parse::<usize>) {
                Some(Ok(k)) if k >= 1 => Ok(Self::Budget(k)),
                _ => Err(Error::InvalidArgument(format!(
                    "mode must be identity, full or budget:K with K >= 1, got '{s}'"
                ))),
            },
        }
    }
}

/// Everything fixed while a conditioning set is computed.
#[derive(Clone, Copy, Debug)]
pub struct Conditioning<'a> {
    pub data: &'a Dataset,
    pub y: &'a [f64],
    pub stopping: StoppingRule,
    pub lambda: f64,
    /// The tree fitted on `y`, reused as the pruning tree when it contains the branch.
    pub fitted: Option<&'a Tree>,
    pub tol: f64,
    pub exec: Exec,
    /// Record every constraint and its solution set.
    pub trace: bool,
}

impl<'a> Conditioning<'a> {
    pub fn new(data: &'a Dataset, y: &'a [f64], stopping: StoppingRule, lambda: f64) -> Self {
        Self {
            data,
            y,
            stopping,
            lambda,
            fitted: None,
            tol: DEFAULT_QUADRATIC_TOL,
            exec: Exec::Sequential,
            trace: false,
        }
    }

    /// Conditioning on a fitted tree, taking its penalty and stopping rule.
    pub fn from_fitted(data: &'a Dataset, y: &'a [f64], tree: &'a Tree) -> Self {
        Self {
            fitted: Some(tree),
            ..Self::new(data, y, tree.stopping(), tree.lambda().unwrap_or(0.0))
        }
    }

    pub fn with_exec(self, exec: Exec) -> Self {
        Self { exec, ..self }
    }

    pub fn with_trace(self, trace: bool) -> Self {
        Self { trace, ..self }
    }

    /// Sample standard deviation of `y`, or 1 when `y` is constant.
    pub(crate) fn spread(&self) -> f64 {
        let n = self.y.len() as f64;
        let mean = self.y.iter().sum::<f64>() / n;
        let var = self.y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        if var > 0.0 {
            var.sqrt()
        } else {
            1.0
        }
    }

    /// Typical magnitude of `phi`, used to compare quadratic coefficients in common units.
    pub(crate) fn phi_scale(&self, nu: &Contrast) -> f64 {
        nu.statistic().abs().max(nu.norm() * self.spread())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConstraintKind {
    Grow,
    Prune,
}

/// One constraint of a conditioning set together with its solution.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConstraintRecord {
    pub kind: ConstraintKind,
    pub level: usize,
    pub feature: Option<usize>,
    pub rank: Option<usize>,
    pub constraint: QuadraticConstraint,
    pub solution: IntervalSet,
}

/// A conditioning set with optional per-constraint diagnostics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SetReport {
    pub set: IntervalSet,
    /// True when the sibling fast path produced the set.
    pub fast_path: bool,
    pub constraints: Vec<ConstraintRecord>,
}
