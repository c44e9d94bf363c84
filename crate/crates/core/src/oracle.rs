//! Brute-force reference computations for validating conditioning sets.
//!
//! Nothing here is used on the inference path: each routine refits trees or
//! forms dense projection matrices directly from their definitions.

use std::io::Write;
use std::path::Path;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::cart::{fit, RegionBox, RegionId, Split, StoppingRule, Tree};
use crate::contrast::{Contrast, ContrastKind};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::intervals::IntervalSet;
use crate::truncation::{
    branch_of, s_reg, s_sib, Branch, Coefficients, Conditioning, PermutationMode,
};

/// Probe points for a membership scan: an even grid plus far-out extremes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub center: f64,
    pub half_width: f64,
    pub points: usize,
    pub extremes: Vec<f64>,
}

impl GridSpec {
    /// `nu^T y +/- 8 sigma ||nu||` at 2001 points, plus `+/- 1e6`.
    pub fn around(nu: &Contrast, sigma: f64) -> Self {
        Self {
            center: nu.statistic(),
            half_width: 8.0 * sigma * nu.norm(),
            points: 2001,
            extremes: vec![-1e6, 1e6],
        }
    }

    pub fn probes(&self) -> Vec<f64> {
        let mut out: Vec<f64> = if self.points <= 1 {
            vec![self.center]
        } else {
            (0..self.points)
                .map(|k| {
                    let t = k as f64 / (self.points - 1) as f64;
                    self.center - self.half_width + 2.0 * self.half_width * t
                })
                .collect()
        };
        out.extend_from_slice(&self.extremes);
        out
    }
}

/// A selection event checked on a refitted tree.
#[derive(Clone, Debug, PartialEq)]
pub enum Event {
    /// Some region has box `a` and its sibling has box `b`.
    Siblings { a: RegionBox, b: RegionBox },
    /// Some region is cut out by exactly these halfspaces, in any order.
    Region(Vec<Split>),
    /// The tree contains every region along the branch.
    Branch(Branch),
}

impl Event {
    pub fn siblings(tree: &Tree, a: RegionId, b: RegionId) -> Result<Self> {
        if tree.sibling(a) != Some(b) {
            return Err(Error::NotSiblings(a, b));
        }
        Ok(Event::Siblings {
            a: tree.region_box(a),
            b: tree.region_box(b),
        })
    }

    pub fn region(tree: &Tree, id: RegionId) -> Result<Self> {
        tree.region(id)?;
        Ok(Event::Region(tree.path(id)))
    }

    pub fn branch(tree: &Tree, id: RegionId) -> Result<Self> {
        tree.region(id)?;
        Ok(Event::Branch(Branch::new(tree.path(id))))
    }

    pub fn occurs(&self, tree: &Tree) -> bool {
        match self {
            Event::Siblings { a, b } => tree
                .find_box(a)
                .and_then(|k| tree.sibling(k))
                .is_some_and(|s| &tree.region_box(s) == b),
            Event::Region(halfspaces) => (0..tree.len()).any(|k| {
                let path = tree.path(k);
                path.len() == halfspaces.len()
                    && halfspaces
                        .iter()
                        .all(|h| path.iter().any(|s| s.same_halfspace(h)))
            }),
            Event::Branch(branch) => tree.follow(branch.steps()).is_some(),
        }
    }
}

/// Refits the pruned tree at each probe `phi` and reports whether `event` occurs.
pub fn brute_force_membership(
    d: &Dataset,
    y: &[f64],
    nu: &Contrast,
    event: &Event,
    stopping: &StoppingRule,
    lambda: f64,
    probes: &[f64],
    exec: Exec,
) -> Result<Vec<bool>> {
    exec.map(probes, |&phi| {
        let yp = nu.y_prime(phi, y);
        fit(d, &yp, stopping, lambda).map(|t| event.occurs(&t))
    })
    .into_iter()
    .collect()
}

/// Quadratic gain coefficients of splitting `members` at `(j, s)` along
/// `y'(phi)`, from explicit `n x n` projection matrices.
pub fn dense_gain_quadratic(
    d: &Dataset,
    members: &[usize],
    j: usize,
    s: usize,
    nu: &Contrast,
    y: &[f64],
) -> Result<Coefficients> {
    let n = d.n();
    let t = d.order_statistic(j, s)?;
    let (left, right): (Vec<usize>, Vec<usize>) = members.iter().partition(|&&i| d.x(i, j) <= t);
    if left.is_empty() || right.is_empty() {
        return Err(Error::InvalidArgument("split leaves an empty child".into()));
    }
    let m = gain_matrix(n, &left, &right);
    let nu_d = nu.dense();
    let ns = nu_d.iter().map(|v| v * v).sum::<f64>();
    // P_perp = I - nu nu^T / ||nu||^2
    let perp: Vec<Vec<f64>> = (0..n)
        .map(|r| {
            (0..n)
                .map(|c| f64::from(u8::from(r == c)) - nu_d[r] * nu_d[c] / ns)
                .collect()
        })
        .collect();
    let w = mat_vec(&perp, y);
    let u: Vec<f64> = nu_d.iter().map(|v| v / ns).collect();
    let mu = mat_vec(&m, &u);
    let mw = mat_vec(&m, &w);
    Ok(Coefficients {
        a: dot(&u, &mu),
        b: 2.0 * dot(&u, &mw),
        c: dot(&w, &mw),
    })
}

/// `P_L + P_R - P_{L u R}` for index sets `left` and `right`.
pub fn gain_matrix(n: usize, left: &[usize], right: &[usize]) -> Vec<Vec<f64>> {
    let mut m = vec![vec![0.0; n]; n];
    let union: Vec<usize> = left.iter().chain(right).copied().collect();
    for (set, sign) in [(left, 1.0), (right, 1.0), (&union[..], -1.0)] {
        let w = sign / set.len() as f64;
        for &r in set {
            for &c in set {
                m[r][c] += w;
            }
        }
    }
    m
}

fn mat_vec(m: &[Vec<f64>], v: &[f64]) -> Vec<f64> {
    m.iter().map(|row| dot(row, v)).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Agreement between an analytic set and brute-force membership.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Agreement {
    pub probes: usize,
    pub excluded: usize,
    pub mismatches: Vec<f64>,
}

impl Agreement {
    pub fn agrees(&self) -> bool {
        self.mismatches.is_empty()
    }
}

/// Compares membership at each probe, skipping probes within `margin` of an
/// endpoint of `set`.
pub fn compare(set: &IntervalSet, probes: &[f64], member: &[bool], margin: f64) -> Agreement {
    let mut out = Agreement {
        probes: probes.len(),
        ..Agreement::default()
    };
    for (&phi, &m) in probes.iter().zip(member) {
        if set.distance_to_boundary(phi) <= margin {
            out.excluded += 1;
        } else if set.contains(phi) != m {
            out.mismatches.push(phi);
        }
    }
    out
}

/// Writes `phi,member` rows.
pub fn write_membership_csv(path: &Path, probes: &[f64], member: &[bool]) -> Result<()> {
    let io = |source| Error::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut f = std::io::BufWriter::new(std::fs::File::create(path).map_err(io)?);
    writeln!(f, "phi,member").map_err(io)?;
    for (phi, m) in probes.iter().zip(member) {
        writeln!(f, "{phi},{}", u8::from(*m)).map_err(io)?;
    }
    f.flush().map_err(io)
}

/// Gaussian covariates and a response with steps in the first two features
/// plus standard normal noise.
pub fn random_instance<R: Rng>(n: usize, p: usize, rng: &mut R) -> Result<Dataset> {
    if p == 0 {
        return Err(Error::NoCovariates);
    }
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..p).map(|_| rng.sample(StandardNormal)).collect())
        .collect();
    let y = rows
        .iter()
        .map(|x| {
            let step = if x[0] > 0.0 { 2.0 } else { 0.0 };
            let second = if p > 1 && x[1] > 0.3 { 1.0 } else { 0.0 };
            step + second + rng.sample::<f64, _>(StandardNormal)
        })
        .collect();
    Dataset::from_rows(&rows, y)
}

/// Agreement for one tested contrast of a fitted tree.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TargetAgreement {
    pub kind: ContrastKind,
    pub regions: Vec<RegionId>,
    pub level: usize,
    pub set: IntervalSet,
    pub agreement: Agreement,
}

/// Checks the conditioning set of every sibling pair and every non-root region
/// of the tree fitted on `d` against refits over a probe grid of half-width
/// `8 sigma ||nu||`.
pub fn agreement_report(
    d: &Dataset,
    stopping: &StoppingRule,
    lambda: f64,
    sigma: f64,
    mode: PermutationMode,
    exec: Exec,
) -> Result<Vec<TargetAgreement>> {
    if let PermutationMode::Budget(_) = mode {
        return Err(Error::InvalidArgument(
            "a partial permutation budget has no refit event to compare against; use identity or full"
                .into(),
        ));
    }
    let y = d.y();
    let tree = fit(d, y, stopping, lambda)?;
    let ctx = Conditioning::from_fitted(d, y, &tree);
    let mut out = Vec::new();
    let mut check =
        |nu: &Contrast, set: IntervalSet, event: Event, regions: Vec<RegionId>, level| {
            let grid = GridSpec::around(nu, sigma);
            let probes = grid.probes();
            let member = brute_force_membership(d, y, nu, &event, stopping, lambda, &probes, exec)?;
            let agreement = compare(&set, &probes, &member, 1e-6 * 2.0 * grid.half_width);
            out.push(TargetAgreement {
                kind: nu.kind(),
                regions,
                level,
                set,
                agreement,
            });
            Ok::<(), Error>(())
        };
    for parent in tree.internal() {
        let [a, b] = tree.regions()[parent].children.expect("internal region");
        let nu = Contrast::for_split(&tree, parent, y)?;
        let set = s_sib(&ctx, &branch_of(&tree, a)?, &nu)?;
        let level = tree.regions()[a].level;
        check(&nu, set, Event::siblings(&tree, a, b)?, vec![a, b], level)?;
    }
    for id in 0..tree.len() {
        let level = tree.regions()[id].level;
        if level == 0 {
            continue;
        }
        let nu = Contrast::for_region(&tree, id, y)?;
        let set = s_reg(&ctx, &branch_of(&tree, id)?, &nu, mode)?;
        let event = match mode {
            PermutationMode::Identity => Event::branch(&tree, id)?,
            _ => Event::region(&tree, id)?,
        };
        check(&nu, set, event, vec![id], level)?;
    }
    Ok(out)
}
