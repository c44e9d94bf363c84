//! Truncated-normal p-values and confidence intervals for tree contrasts.

pub mod normal;
mod truncated;

use serde::{Deserialize, Serialize};

use crate::cart::{RegionId, Tree};
use crate::contrast::{Contrast, ContrastKind};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::intervals::IntervalSet;
use crate::truncation::{branch_of, s_reg, sibling_report, Conditioning, PermutationMode};

pub use truncated::{tn_cdf, TruncatedNormal};

const MAX_BISECTIONS: usize = 64;
/// Confidence limits are searched within this many standard deviations of the statistic.
const CI_REACH_SD: f64 = 50.0;

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "alpha must lie in (0, 1), got {alpha}"
        )));
    }
    Ok(())
}

/// Confirms `stat` lies in `support`, allowing for rounding at an endpoint.
fn check_support(stat: f64, sd: f64, support: &IntervalSet) -> Result<()> {
    if support.contains(stat) || support.distance_to_boundary(stat) <= 1e-9 * (stat.abs() + sd) {
        Ok(())
    } else {
        Err(Error::StatisticOutsideSupport(stat))
    }
}

/// Two-sided p-value for `H0: nu^T mu = 0` with a sibling contrast.
pub fn p_sibling(stat: f64, sd: f64, support: &IntervalSet) -> Result<f64> {
    p_region(stat, sd, support, 0.0)
}

/// Two-sided p-value for `H0: nu^T mu = center`.
pub fn p_region(stat: f64, sd: f64, support: &IntervalSet, center: f64) -> Result<f64> {
    let tn = TruncatedNormal::new(center, sd, support)?;
    check_support(stat, sd, support)?;
    tn.outer_prob(center, (stat - center).abs())
}

/// Solves `F(stat; m) = target` for the mean `m`, where `F` decreases in `m`.
fn invert(stat: f64, sd: f64, support: &IntervalSet, target: f64) -> Result<f64> {
    let f = |m: f64| tn_cdf(stat, m, sd, support);
    let f0 = f(stat)?;
    if f0 == target {
        return Ok(stat);
    }
    // f0 > target: the root lies above stat
    let up = f0 > target;
    let mut inner = stat;
    let mut outer = None;
    let mut step = sd;
    while step <= CI_REACH_SD * sd * 2.0 {
        let m = if up {
            stat + step.min(CI_REACH_SD * sd)
        } else {
            stat - step.min(CI_REACH_SD * sd)
        };
        let fm = f(m)?;
        if (up && fm <= target) || (!up && fm >= target) {
            outer = Some(m);
            break;
        }
        inner = m;
        if step >= CI_REACH_SD * sd {
            break;
        }
        step *= 2.0;
    }
    let Some(mut outer) = outer else {
        return Ok(if up { f64::INFINITY } else { f64::NEG_INFINITY });
    };
    for _ in 0..MAX_BISECTIONS {
        let mid = 0.5 * (inner + outer);
        if mid == inner || mid == outer {
            break;
        }
        let fm = f(mid)?;
        if (up && fm > target) || (!up && fm < target) {
            inner = mid;
        } else {
            outer = mid;
        }
    }
    let (fi, fo) = (f(inner)?, f(outer)?);
    Ok(if (fi - target).abs() <= (fo - target).abs() {
        inner
    } else {
        outer
    })
}

/// Equal-tailed `1 - alpha` selective confidence interval for the mean of a
/// normal with known `sd` observed as `stat` and truncated to `support`.
pub fn selective_ci(stat: f64, sd: f64, support: &IntervalSet, alpha: f64) -> Result<(f64, f64)> {
    check_alpha(alpha)?;
    TruncatedNormal::new(stat, sd, support)?.log_total()?;
    check_support(stat, sd, support)?;
    let lo = invert(stat, sd, support, 1.0 - alpha / 2.0)?;
    let hi = invert(stat, sd, support, alpha / 2.0)?;
    Ok((lo, hi))
}

/// Sample standard deviation with the `n - 1` denominator.
pub fn estimate_sigma(y: &[f64]) -> Result<f64> {
    if y.len() < 2 {
        return Err(Error::TooFewObservations(y.len()));
    }
    let n = y.len() as f64;
    let mean = y.iter().sum::<f64>() / n;
    let var = y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    if var <= 0.0 {
        return Err(Error::ConstantResponse);
    }
    Ok(var.sqrt())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NaiveResult {
    pub p_value: f64,
    #[serde(with = "crate::ext_float::pair")]
    pub ci: (f64, f64),
}

/// Z-test and interval that ignore selection.
pub fn naive_z(stat: f64, sd: f64, alpha: f64, center: f64) -> Result<NaiveResult> {
    check_alpha(alpha)?;
    if !(sd > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "standard deviation must be positive, got {sd}"
        )));
    }
    let z = normal::upper_quantile(alpha / 2.0);
    let p = 2.0 * normal::log_q((stat - center).abs() / sd).exp();
    Ok(NaiveResult {
        p_value: p.min(1.0),
        ci: (stat - z * sd, stat + z * sd),
    })
}

/// Selective inference for one contrast of a fitted tree.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InferenceResult {
    pub kind: ContrastKind,
    /// `[A, B]` for a sibling contrast, `[A]` for a region.
    pub regions: Vec<RegionId>,
    pub level: usize,
    pub statistic: f64,
    pub sigma: f64,
    /// Standard deviation of the statistic, `sigma ||nu||`.
    pub sd: f64,
    pub null_value: f64,
    pub p_value: f64,
    pub alpha: f64,
    #[serde(with = "crate::ext_float::pair")]
    pub ci: (f64, f64),
    pub support: IntervalSet,
    pub mode: Option<PermutationMode>,
    pub fast_path: bool,
    pub naive: NaiveResult,
}

/// Inference for the difference in means between the children of `parent`.
pub fn infer_split(
    ctx: &Conditioning<'_>,
    tree: &Tree,
    parent: RegionId,
    sigma: f64,
    alpha: f64,
) -> Result<InferenceResult> {
    let [a, b] = tree
        .region(parent)?
        .children
        .ok_or(Error::TerminalRegion(parent))?;
    let nu = Contrast::for_split(tree, parent, ctx.y)?;
    let branch = branch_of(tree, a)?;
    let report = sibling_report(ctx, &branch, &nu)?;
    let sd = sigma * nu.norm();
    let stat = nu.statistic();
    Ok(InferenceResult {
        kind: ContrastKind::Sibling,
        regions: vec![a, b],
        level: tree.regions()[a].level,
        statistic: stat,
        sigma,
        sd,
        null_value: 0.0,
        p_value: p_sibling(stat, sd, &report.set)?,
        alpha,
        ci: selective_ci(stat, sd, &report.set, alpha)?,
        support: report.set,
        mode: None,
        fast_path: report.fast_path,
        naive: naive_z(stat, sd, alpha, 0.0)?,
    })
}

/// Inference for the mean of region `id`, testing `H0: mean = null_value`.
pub fn infer_region(
    ctx: &Conditioning<'_>,
    tree: &Tree,
    id: RegionId,
    sigma: f64,
    alpha: f64,
    mode: PermutationMode,
    null_value: f64,
) -> Result<InferenceResult> {
    let nu = Contrast::for_region(tree, id, ctx.y)?;
    let branch = branch_of(tree, id)?;
    let set = s_reg(ctx, &branch, &nu, mode)?;
    let sd = sigma * nu.norm();
    let stat = nu.statistic();
    Ok(InferenceResult {
        kind: ContrastKind::Region,
        regions: vec![id],
        level: tree.regions()[id].level,
        statistic: stat,
        sigma,
        sd,
        null_value,
        p_value: p_region(stat, sd, &set, null_value)?,
        alpha,
        ci: selective_ci(stat, sd, &set, alpha)?,
        support: set,
        mode: Some(mode),
        fast_path: false,
        naive: naive_z(stat, sd, alpha, null_value)?,
    })
}

/// What to test in a fitted tree.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "target", content = "id")]
pub enum Target {
    /// The children of an internal region.
    Split(RegionId),
    Region(RegionId),
}

#[derive(Clone, Copy, Debug)]
pub struct InferenceOptions {
    pub sigma: f64,
    pub alpha: f64,
    pub mode: PermutationMode,
    pub null_value: f64,
    pub exec: Exec,
}

/// Every split and every region of `tree`, in id order.
pub fn all_targets(tree: &Tree) -> Vec<Target> {
    let mut out: Vec<Target> = tree.internal().into_iter().map(Target::Split).collect();
    out.extend((0..tree.len()).map(Target::Region));
    out
}

pub fn infer_targets(
    data: &Dataset,
    tree: &Tree,
    targets: &[Target],
    opts: &InferenceOptions,
) -> Result<Vec<InferenceResult>> {
    if !(opts.sigma > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "sigma must be positive, got {}",
            opts.sigma
        )));
    }
    check_alpha(opts.alpha)?;
    let y = data.y();
    let ctx = Conditioning::from_fitted(data, y, tree);
    opts.exec
        .map(targets, |t| match *t {
            Target::Split(id) => infer_split(&ctx, tree, id, opts.sigma, opts.alpha),
            Target::Region(id) => infer_region(
                &ctx,
                tree,
                id,
                opts.sigma,
                opts.alpha,
                opts.mode,
                opts.null_value,
            ),
        })
        .into_iter()
        .collect()
}
