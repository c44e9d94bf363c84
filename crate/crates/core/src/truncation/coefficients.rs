//! Gain of every candidate split along `y'(phi)`, as a quadratic in `phi`.
//!
//! Along `y'(phi) = w + phi u` with `w = P_perp y` and `u = nu / ||nu||^2`, the
//! gain of splitting a region into `L` and `R` is `k (du phi + dw)^2` where
//! `k = n_L n_R / n`, `du` is the difference of the child means of `u` and `dw`
//! the same for `w`. Child means come from prefix counts over each feature's
//! sort order, so a full pass over one level costs `O(n p)`.

use serde::{Deserialize, Serialize};

use crate::contrast::{Contrast, ContrastKind};
use crate::error::{Error, Result};

use super::{Branch, Conditioning};

/// Gain `a phi^2 + b phi + c` of one split.
#[derive(Clone, Copy, Debug, PartialEq, Default, Serialize, Deserialize)]
pub struct Coefficients {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl Coefficients {
    fn from_differences(nl: usize, nr: usize, du: f64, dw: f64) -> Self {
        let k = (nl * nr) as f64 / (nl + nr) as f64;
        Self {
            a: k * du * du,
            b: 2.0 * k * du * dw,
            c: k * dw * dw,
        }
    }

    pub fn eval(&self, phi: f64) -> f64 {
        (self.a * phi + self.b) * phi + self.c
    }

    pub fn minus(&self, other: &Coefficients) -> Coefficients {
        Coefficients {
            a: self.a - other.a,
            b: self.b - other.b,
            c: self.c - other.c,
        }
    }

    pub fn plus(&self, other: &Coefficients) -> Coefficients {
        Coefficients {
            a: self.a + other.a,
            b: self.b + other.b,
            c: self.c + other.c,
        }
    }
}

/// An admissible competitor split of `R^(l-1)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Competitor {
    pub feature: usize,
    pub rank: usize,
    pub coef: Coefficients,
    /// Induces the same partition of `R^(l-1)` as the chosen split.
    pub ties_chosen: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelCoefficients {
    /// Level `l` of the child `R^(l)`, starting at 1.
    pub level: usize,
    pub chosen_feature: usize,
    pub chosen_rank: usize,
    pub chosen: Coefficients,
    /// Both children of the chosen split meet the minimum node size.
    pub admissible: bool,
    /// SSE of `R^(l-1)` under `y`.
    pub parent_sse: f64,
    pub competitors: Vec<Competitor>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StreamedBranch {
    pub levels: Vec<LevelCoefficients>,
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Running sums over one side of a split.
#[derive(Clone, Copy, Default)]
struct Side {
    n: usize,
    in_a: usize,
    in_b: usize,
    sum_y: f64,
    fingerprint: u64,
}

impl Side {
    fn add(&mut self, group: Group, y: f64, key: u64) {
        self.n += 1;
        match group {
            Group::A => self.in_a += 1,
            Group::B => self.in_b += 1,
            Group::Neither => {}
        }
        self.sum_y += y;
        self.fingerprint = self.fingerprint.wrapping_add(key);
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Group {
    A,
    B,
    Neither,
}

/// Shape of `nu`: `alpha_a / |A|` on `A = R^(L)`, `alpha_b / |B|` on the sibling
/// set `B`, zero elsewhere.
struct Shape {
    size_a: usize,
    size_b: usize,
    alpha_b: f64,
    norm_sq: f64,
    stat: f64,
}

impl Shape {
    /// `sum_i nu_i` over a set holding `in_a` members of `A` and `in_b` of `B`.
    fn nu_mass(&self, in_a: usize, in_b: usize) -> f64 {
        let ma = in_a as f64 / self.size_a as f64;
        if self.size_b == 0 {
            ma
        } else {
            ma + self.alpha_b * (in_b as f64 / self.size_b as f64)
        }
    }

    fn coefficients(&self, left: &Side, total: &Side) -> Coefficients {
        let nl = left.n;
        let nr = total.n - left.n;
        let mass_l = self.nu_mass(left.in_a, left.in_b);
        let mass_r = self.nu_mass(total.in_a - left.in_a, total.in_b - left.in_b);
        let du = (mass_l / nl as f64 - mass_r / nr as f64) / self.norm_sq;
        let dy = left.sum_y / nl as f64 - (total.sum_y - left.sum_y) / nr as f64;
        Coefficients::from_differences(nl, nr, du, dy - self.stat * du)
    }
}

/// Checks that moving `y` along `nu` only shifts `R^(L)` and its sibling by
/// constants, and returns each observation's group.
fn shape_of(branch: &Branch, depth: &[usize], nu: &Contrast) -> Result<(Shape, Vec<Group>)> {
    let l = branch.len();
    let n = depth.len();
    if nu.n() != n {
        return Err(Error::ShiftStructure(format!(
            "contrast has length {}, dataset has {n}",
            nu.n()
        )));
    }
    let mut group = vec![Group::Neither; n];
    let (mut size_a, mut size_b) = (0, 0);
    for (i, &dep) in depth.iter().enumerate() {
        if dep == l {
            group[i] = Group::A;
            size_a += 1;
        } else if l >= 1 && dep == l - 1 {
            group[i] = Group::B;
            size_b += 1;
        }
    }
    if size_a == 0 {
        return Err(Error::InvalidBranch(
            "the branch selects no observations".into(),
        ));
    }
    let mut nu_a = 0;
    let mut nu_b = 0;
    for &(i, w) in nu.entries() {
        match (group[i], w > 0.0) {
            (Group::A, true) => nu_a += 1,
            (Group::B, false) if nu.kind() == ContrastKind::Sibling => nu_b += 1,
            _ => {
                return Err(Error::ShiftStructure(format!(
                    "observation {i} carries an unexpected contrast weight"
                )))
            }
        }
    }
    let (wants_b, alpha_b) = match nu.kind() {
        ContrastKind::Sibling => (size_b, -1.0),
        ContrastKind::Region => (0, 0.0),
    };
    if nu_a != size_a || nu_b != wants_b {
        return Err(Error::ShiftStructure(
            "contrast support does not match the branch regions".into(),
        ));
    }
    Ok((
        Shape {
            size_a,
            size_b: wants_b,
            alpha_b,
            norm_sq: nu.norm_sq(),
            stat: nu.statistic(),
        },
        group,
    ))
}

/// Quadratic gain coefficients of the chosen split and every admissible
/// competitor at each level of `branch`.
pub fn stream_coefficients(
    ctx: &Conditioning<'_>,
    branch: &Branch,
    nu: &Contrast,
) -> Result<StreamedBranch> {
    let d = ctx.data;
    let y = ctx.y;
    branch.validate(d)?;
    let depth = branch.depths(d);
    let (shape, group) = shape_of(branch, &depth, nu)?;
    let n = d.n();
    let keys: Vec<u64> = (0..n as u64).map(splitmix64).collect();
    let min = ctx.stopping.min_node_size.max(1);
    let big_l = branch.len();

    struct LevelTotals {
        total: Side,
        chosen_left: Side,
        sse: f64,
    }
    let totals: Vec<LevelTotals> = (1..=big_l)
        .map(|l| {
            let step = branch.steps()[l - 1];
            let col = d.column(step.feature);
            let mut total = Side::default();
            let mut chosen_left = Side::default();
            for i in 0..n {
                if depth[i] + 1 >= l {
                    total.add(group[i], y[i], keys[i]);
                    if col[i] <= step.threshold {
                        chosen_left.add(group[i], y[i], keys[i]);
                    }
                }
            }
            let mean = total.sum_y / total.n as f64;
            let sse = (0..n)
                .filter(|&i| depth[i] + 1 >= l)
                .map(|i| (y[i] - mean).powi(2))
                .sum();
            LevelTotals {
                total,
                chosen_left,
                sse,
            }
        })
        .collect();

    let jobs: Vec<(usize, usize)> = (1..=big_l)
        .flat_map(|l| (0..d.p()).map(move |j| (l, j)))
        .collect();
    let scans: Vec<Vec<Competitor>> = ctx.exec.map(&jobs, |&(l, j)| {
        let LevelTotals {
            total, chosen_left, ..
        } = &totals[l - 1];
        let m = total.n;
        let order = d.sort_order(j);
        let col = d.column(j);
        let mut left = Side::default();
        let mut prev_n = usize::MAX;
        let mut out = Vec::new();
        for k in 0..n - 1 {
            let i = order[k];
            if depth[i] + 1 >= l {
                left.add(group[i], y[i], keys[i]);
            }
            if col[i] >= col[order[k + 1]] || left.n == prev_n {
                continue;
            }
            prev_n = left.n;
            if left.n == m {
                break;
            }
            if left.n < min || m - left.n < min {
                continue;
            }
            let same = left.fingerprint == chosen_left.fingerprint && left.n == chosen_left.n;
            let mirror = left.fingerprint
                == total.fingerprint.wrapping_sub(chosen_left.fingerprint)
                && left.n == m - chosen_left.n;
            out.push(Competitor {
                feature: j,
                rank: k + 1,
                coef: shape.coefficients(&left, total),
                ties_chosen: same || mirror,
            });
        }
        out
    });

    let mut levels = Vec::with_capacity(big_l);
    let mut scans = scans.into_iter();
    for (l, tot) in (1..=big_l).zip(&totals) {
        let step = branch.steps()[l - 1];
        let nl = tot.chosen_left.n;
        let nr = tot.total.n - nl;
        let admissible = nl >= min && nr >= min;
        let chosen = if nl > 0 && nr > 0 {
            shape.coefficients(&tot.chosen_left, &tot.total)
        } else {
            Coefficients::default()
        };
        let competitors = scans.by_ref().take(d.p()).flatten().collect();
        levels.push(LevelCoefficients {
            level: l,
            chosen_feature: step.feature,
            chosen_rank: step.rank,
            chosen,
            admissible,
            parent_sse: tot.sse,
            competitors,
        });
    }
    Ok(StreamedBranch { levels })
}
