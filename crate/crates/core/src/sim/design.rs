use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::cart::Side;
use crate::dataset::Dataset;
use crate::error::{Error, Result};

/// Simulation design: `n` draws of `p` independent standard normal covariates
/// with a three-level step mean.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Design {
    pub n: usize,
    pub p: usize,
    pub sigma: f64,
    pub a: f64,
    pub b: f64,
}

impl Design {
    /// `b 1(x1 <= 0) [1 + a 1(x2 > 0) + 1(x2 x3 > 0)]`.
    pub fn mean(&self, x: &[f64]) -> f64 {
        if x[0] > 0.0 {
            return 0.0;
        }
        let a_term = if x[1] > 0.0 { self.a } else { 0.0 };
        let c_term = if x[1] * x[2] > 0.0 { 1.0 } else { 0.0 };
        self.b * (1.0 + a_term + c_term)
    }
}

/// Independent stream `stream` of the generator seeded with `seed`.
pub fn replicate_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Draws a dataset and its mean vector.
pub fn generate<R: Rng>(design: &Design, rng: &mut R) -> Result<(Dataset, Vec<f64>)> {
    if design.p < 3 {
        return Err(Error::InvalidArgument(format!(
            "the design needs p >= 3, got {}",
            design.p
        )));
    }
    let rows: Vec<Vec<f64>> = (0..design.n)
        .map(|_| (0..design.p).map(|_| rng.sample(StandardNormal)).collect())
        .collect();
    let mu: Vec<f64> = rows.iter().map(|x| design.mean(x)).collect();
    let y = mu
        .iter()
        .map(|m| m + design.sigma * rng.sample::<f64, _>(StandardNormal))
        .collect();
    Ok((Dataset::from_rows(&rows, y)?, mu))
}

/// Random half split of `0..n` into training and test indices, each sorted.
pub fn sample_split<R: Rng>(n: usize, rng: &mut R) -> (Vec<usize>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(rng);
    let mut train = idx[..n / 2].to_vec();
    let mut test = idx[n / 2..].to_vec();
    train.sort_unstable();
    test.sort_unstable();
    (train, test)
}

/// A split of the true mean function: within the parent cell, `x_feature <= 0`
/// against `x_feature > 0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrueSplit {
    pub level: usize,
    pub parent: Vec<(usize, Side)>,
    pub feature: usize,
}

impl TrueSplit {
    /// `Some(true)` on the left child, `Some(false)` on the right, `None` outside the parent.
    pub fn classify(&self, x: &[f64]) -> Option<bool> {
        self.parent
            .iter()
            .all(|&(j, side)| side.admits(x[j], 0.0))
            .then(|| x[self.feature] <= 0.0)
    }
}

/// The four splits of the true tree.
pub fn true_splits() -> Vec<TrueSplit> {
    vec![
        TrueSplit {
            level: 1,
            parent: vec![],
            feature: 0,
        },
        TrueSplit {
            level: 2,
            parent: vec![(0, Side::Left)],
            feature: 1,
        },
        TrueSplit {
            level: 3,
            parent: vec![(0, Side::Left), (1, Side::Right)],
            feature: 2,
        },
        TrueSplit {
            level: 3,
            parent: vec![(0, Side::Left), (1, Side::Left)],
            feature: 2,
        },
    ]
}

fn pairs(k: usize) -> f64 {
    let k = k as f64;
    k * (k - 1.0) / 2.0
}

/// Adjusted Rand index of a contingency table; zero when undefined.
pub fn adjusted_rand_index<const C: usize>(table: &[[usize; C]]) -> f64 {
    let total: usize = table.iter().flatten().sum();
    if total < 2 {
        return 0.0;
    }
    let cells: f64 = table.iter().flatten().map(|&v| pairs(v)).sum();
    let rows: f64 = table.iter().map(|r| pairs(r.iter().sum())).sum();
    let cols: f64 = (0..C)
        .map(|c| pairs(table.iter().map(|r| r[c]).sum()))
        .sum();
    let expected = rows * cols / pairs(total);
    let max = 0.5 * (rows + cols);
    if max == expected {
        return 0.0;
    }
    (cells - expected) / (max - expected)
}
