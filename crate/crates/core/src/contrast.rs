//! Contrast vectors for sibling differences and region means.

use serde::{Deserialize, Serialize};

use crate::cart::{RegionId, Tree};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ContrastKind {
    /// Mean of one region minus the mean of its sibling.
    Sibling,
    /// Mean of a single region.
    Region,
}

/// A sparse contrast `nu` with cached squared norm and statistic `nu^T y`.
#[derive(Clone, Debug, PartialEq)]
pub struct Contrast {
    kind: ContrastKind,
    n: usize,
    entries: Vec<(usize, f64)>,
    norm_sq: f64,
    statistic: f64,
}

fn check_members(n: usize, members: &[usize], what: &str) -> Result<()> {
    if members.is_empty() {
        return Err(Error::InvalidContrast(format!("{what} is empty")));
    }
    if members.iter().any(|&i| i >= n) {
        return Err(Error::InvalidContrast(format!(
            "{what} has an index >= {n}"
        )));
    }
    if members.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidContrast(format!(
            "{what} must be sorted without repeats"
        )));
    }
    Ok(())
}

impl Contrast {
    /// `1_A / |A| - 1_B / |B|` for disjoint, nonempty, sorted index sets.
    pub fn sibling(n: usize, a: &[usize], b: &[usize], y: &[f64]) -> Result<Self> {
        check_members(n, a, "region A")?;
        check_members(n, b, "region B")?;
        let (wa, wb) = (1.0 / a.len() as f64, 1.0 / b.len() as f64);
        let mut entries: Vec<(usize, f64)> = a.iter().map(|&i| (i, wa)).collect();
        entries.extend(b.iter().map(|&i| (i, -wb)));
        entries.sort_by_key(|e| e.0);
        if entries.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::InvalidContrast("regions A and B overlap".into()));
        }
        Self::finish(ContrastKind::Sibling, n, entries, wa + wb, y)
    }

    /// `1_A / |A|` for a nonempty, sorted index set.
    pub fn region(n: usize, a: &[usize], y: &[f64]) -> Result<Self> {
        check_members(n, a, "region")?;
        let w = 1.0 / a.len() as f64;
        let entries = a.iter().map(|&i| (i, w)).collect();
        Self::finish(ContrastKind::Region, n, entries, w, y)
    }

    /// Sibling contrast between the two children of `parent`, left minus right.
    pub fn for_split(tree: &Tree, parent: RegionId, y: &[f64]) -> Result<Self> {
        let [l, r] = tree
            .region(parent)?
            .children
            .ok_or(Error::TerminalRegion(parent))?;
        let regions = tree.regions();
        Self::sibling(y.len(), &regions[l].members, &regions[r].members, y)
    }

    pub fn for_region(tree: &Tree, id: RegionId, y: &[f64]) -> Result<Self> {
        Self::region(y.len(), &tree.region(id)?.members, y)
    }

    fn finish(
        kind: ContrastKind,
        n: usize,
        entries: Vec<(usize, f64)>,
        norm_sq: f64,
        y: &[f64],
    ) -> Result<Self> {
        if y.len() != n {
            return Err(Error::InvalidContrast(format!(
                "response has {} values, expected {n}",
                y.len()
            )));
        }
        let mut c = Self {
            kind,
            n,
            entries,
            norm_sq,
            statistic: 0.0,
        };
        c.statistic = c.dot(y);
        Ok(c)
    }

    pub fn kind(&self) -> ContrastKind {
        self.kind
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn entries(&self) -> &[(usize, f64)] {
        &self.entries
    }

    pub fn norm_sq(&self) -> f64 {
        self.norm_sq
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq.sqrt()
    }

    /// `nu^T y` for the response the contrast was built with.
    pub fn statistic(&self) -> f64 {
        self.statistic
    }

    pub fn dot(&self, v: &[f64]) -> f64 {
        self.entries.iter().map(|&(i, w)| w * v[i]).sum()
    }

    pub fn dense(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        for &(i, w) in &self.entries {
            out[i] = w;
        }
        out
    }

    /// `nu / ||nu||^2` as a dense vector.
    pub fn direction(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        for &(i, w) in &self.entries {
            out[i] = w / self.norm_sq;
        }
        out
    }

    /// `P_perp y = y - nu (nu^T y) / ||nu||^2`.
    pub fn project_out(&self, y: &[f64]) -> Vec<f64> {
        self.y_prime(0.0, y)
    }

    /// `y'(phi) = P_perp y + phi nu / ||nu||^2`.
    pub fn y_prime(&self, phi: f64, y: &[f64]) -> Vec<f64> {
        let shift = (phi - self.dot(y)) / self.norm_sq;
        let mut out = y.to_vec();
        for &(i, w) in &self.entries {
            out[i] += shift * w;
        }
        out
    }
}

pub fn nu_sib(n: usize, a: &[usize], b: &[usize], y: &[f64]) -> Result<Contrast> {
    Contrast::sibling(n, a, b, y)
}

pub fn nu_reg(n: usize, a: &[usize], y: &[f64]) -> Result<Contrast> {
    Contrast::region(n, a, y)
}

/// `y'(phi)` along contrast `nu`.
pub fn y_prime(phi: f64, nu: &Contrast, y: &[f64]) -> Vec<f64> {
    nu.y_prime(phi, y)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sibling_statistic_is_mean_difference() {
        let y = [1.0, 2.0, 3.0, 10.0, 20.0];
        let c = Contrast::sibling(5, &[0, 1, 2], &[3, 4], &y).unwrap();
        assert!((c.statistic() - (2.0 - 15.0)).abs() < 1e-12);
        assert!((c.norm_sq() - (1.0 / 3.0 + 0.5)).abs() < 1e-15);
        let yp = c.y_prime(4.0, &y);
        assert!((c.dot(&yp) - 4.0).abs() < 1e-12);
        assert!(Contrast::sibling(5, &[0, 1], &[1, 2], &y).is_err());
        assert!(Contrast::region(5, &[], &y).is_err());
    }
}
