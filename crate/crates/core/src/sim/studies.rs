use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::cart::{fit, RegionId, StoppingRule, Tree};
use crate::contrast::ContrastKind;
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::inference::{estimate_sigma, infer_region, infer_split, naive_z};
use crate::truncation::{Conditioning, PermutationMode};

use super::design::{
    adjusted_rand_index, generate, replicate_rng, sample_split, true_splits, Design,
};

/// Estimated splits matching a true split with at least this ARI count as detected.
const DETECTION_ARI: f64 = 0.75;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub n: usize,
    pub p: usize,
    pub sigma: f64,
    pub lambda: f64,
    pub stopping: StoppingRule,
    pub alpha: f64,
    pub replicates: usize,
    pub seed: u64,
    pub a_grid: Vec<f64>,
    pub b_grid: Vec<f64>,
    /// Replace the known `sigma` by the sample standard deviation of each response.
    #[serde(default)]
    pub estimate_sigma: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            n: 100,
            p: 5,
            sigma: 5.0,
            lambda: 200.0,
            stopping: StoppingRule::default(),
            alpha: 0.05,
            replicates: 100,
            seed: 1,
            a_grid: vec![0.5, 1.0, 2.0],
            b_grid: (1..=10).map(f64::from).collect(),
            estimate_sigma: false,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        self.stopping.validate()?;
        if self.n < 4 || self.p < 3 {
            return Err(Error::InvalidArgument(
                "simulations need n >= 4 and p >= 3".into(),
            ));
        }
        if !(self.sigma > 0.0) || !(self.lambda >= 0.0) {
            return Err(Error::InvalidArgument(
                "sigma must be positive and lambda non-negative".into(),
            ));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidArgument("alpha must lie in (0, 1)".into()));
        }
        if self.replicates == 0 {
            return Err(Error::InvalidArgument(
                "replicates must be at least 1".into(),
            ));
        }
        Ok(())
    }

    fn sigma_for(&self, y: &[f64]) -> Result<f64> {
        if self.estimate_sigma {
            estimate_sigma(y)
        } else {
            Ok(self.sigma)
        }
    }

    fn design(&self, a: f64, b: f64) -> Design {
        Design {
            n: self.n,
            p: self.p,
            sigma: self.sigma,
            a,
            b,
        }
    }

    fn cells(&self) -> Vec<(f64, f64)> {
        self.a_grid
            .iter()
            .flat_map(|&a| self.b_grid.iter().map(move |&b| (a, b)))
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Selective,
    Naive,
    SampleSplit,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Selective => "selective",
            Method::Naive => "naive",
            Method::SampleSplit => "sample_split",
        }
    }
}

/// Kolmogorov-Smirnov distance between a sample and the uniform distribution.
pub fn ks_uniform(p: &[f64]) -> f64 {
    let mut v = p.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    v.iter()
        .enumerate()
        .map(|(i, &x)| ((i + 1) as f64 / n - x).max(x - i as f64 / n))
        .fold(0.0, f64::max)
}

/// Approximate 1% critical value of the one-sample KS statistic.
pub fn ks_critical_99(n: usize) -> f64 {
    let s = (n as f64).sqrt();
    1.6276 / (s + 0.12 + 0.11 / s)
}

fn in_region(tree: &Tree, id: RegionId, x: &[f64]) -> bool {
    tree.path(id).iter().all(|s| s.admits(x))
}

fn members_of(tree: &Tree, id: RegionId, d: &Dataset, rows: &[usize]) -> Vec<usize> {
    rows.iter()
        .copied()
        .filter(|&i| in_region(tree, id, &d.row(i)))
        .collect()
}

fn mean_over(v: &[f64], idx: &[usize]) -> f64 {
    idx.iter().map(|&i| v[i]).sum::<f64>() / idx.len() as f64
}

/// A contrast chosen on the training half and estimated on the test half.
struct HeldOut {
    /// The parent for a sibling contrast, the region itself otherwise.
    id: RegionId,
    kind: ContrastKind,
    level: usize,
    /// `nu^T mu` with `nu` built on the full sample.
    truth: f64,
    /// Statistic and its standard deviation; `None` when a test region is empty.
    estimate: Option<(f64, f64)>,
}

/// Sibling and region contrasts of a tree fitted on the training half.
fn sample_split_contrasts(
    d: &Dataset,
    mu: &[f64],
    train_tree: &Tree,
    test: &[usize],
    sigma: f64,
) -> Vec<HeldOut> {
    let all: Vec<usize> = (0..d.n()).collect();
    let y = d.y();
    let mut out = Vec::new();
    for parent in train_tree.internal() {
        let [a, b] = train_tree.regions()[parent].children.expect("internal");
        let (ta, tb) = (
            members_of(train_tree, a, d, test),
            members_of(train_tree, b, d, test),
        );
        let (fa, fb) = (
            members_of(train_tree, a, d, &all),
            members_of(train_tree, b, d, &all),
        );
        out.push(HeldOut {
            id: parent,
            kind: ContrastKind::Sibling,
            level: train_tree.regions()[a].level,
            truth: mean_over(mu, &fa) - mean_over(mu, &fb),
            estimate: (!ta.is_empty() && !tb.is_empty()).then(|| {
                (
                    mean_over(y, &ta) - mean_over(y, &tb),
                    sigma * (1.0 / ta.len() as f64 + 1.0 / tb.len() as f64).sqrt(),
                )
            }),
        });
    }
    for id in 0..train_tree.len() {
        let level = train_tree.regions()[id].level;
        if level == 0 {
            continue;
        }
        let t = members_of(train_tree, id, d, test);
        let f = members_of(train_tree, id, d, &all);
        out.push(HeldOut {
            id,
            kind: ContrastKind::Region,
            level,
            truth: mean_over(mu, &f),
            estimate: (!t.is_empty()).then(|| (mean_over(y, &t), sigma / (t.len() as f64).sqrt())),
        });
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NullRow {
    pub replicate: usize,
    pub level: usize,
    pub method: Method,
    pub p_value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KsSummary {
    pub method: Method,
    /// `None` pools every level.
    pub level: Option<usize>,
    pub count: usize,
    pub ks: f64,
    pub critical_99: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NullSummary {
    pub replicates: usize,
    pub errors: usize,
    pub ks: Vec<KsSummary>,
}

impl NullSummary {
    pub fn pooled(&self, method: Method) -> Option<&KsSummary> {
        self.ks
            .iter()
            .find(|k| k.method == method && k.level.is_none())
    }
}

/// P-values of every fitted split when the mean is constant.
pub fn null_study(cfg: &SimConfig, exec: Exec) -> Result<(Vec<NullRow>, NullSummary)> {
    cfg.validate()?;
    let design = cfg.design(0.0, 0.0);
    let per_rep = exec.map_range(cfg.replicates, |r| -> Result<(Vec<NullRow>, usize)> {
        let mut rng = replicate_rng(cfg.seed, r as u64);
        let (d, mu) = generate(&design, &mut rng)?;
        let sigma = cfg.sigma_for(d.y())?;
        let (train, test) = sample_split(cfg.n, &mut rng);
        let tree = fit(&d, d.y(), &cfg.stopping, cfg.lambda)?;
        let ctx = Conditioning::from_fitted(&d, d.y(), &tree);
        let mut rows = Vec::new();
        let mut errors = 0;
        for parent in tree.internal() {
            match infer_split(&ctx, &tree, parent, sigma, cfg.alpha) {
                Ok(res) => {
                    for (method, p) in [
                        (Method::Selective, res.p_value),
                        (Method::Naive, res.naive.p_value),
                    ] {
                        rows.push(NullRow {
                            replicate: r,
                            level: res.level,
                            method,
                            p_value: p,
                        });
                    }
                }
                Err(_) => errors += 1,
            }
        }
        let train_d = d.subset(&train)?;
        let train_tree = fit(&train_d, train_d.y(), &cfg.stopping, cfg.lambda)?;
        for h in sample_split_contrasts(&d, &mu, &train_tree, &test, sigma) {
            if let (ContrastKind::Sibling, Some((stat, sd))) = (h.kind, h.estimate) {
                rows.push(NullRow {
                    replicate: r,
                    level: h.level,
                    method: Method::SampleSplit,
                    p_value: naive_z(stat, sd, cfg.alpha, 0.0)?.p_value,
                });
            }
        }
        Ok((rows, errors))
    });
    let mut rows = Vec::new();
    let mut errors = 0;
    for rep in per_rep {
        let (r, e) = rep?;
        rows.extend(r);
        errors += e;
    }
    let mut groups: BTreeMap<(Method, Option<usize>), Vec<f64>> = BTreeMap::new();
    for row in &rows {
        groups
            .entry((row.method, None))
            .or_default()
            .push(row.p_value);
        groups
            .entry((row.method, Some(row.level)))
            .or_default()
            .push(row.p_value);
    }
    let ks = groups
        .into_iter()
        .map(|((method, level), p)| KsSummary {
            method,
            level,
            count: p.len(),
            ks: ks_uniform(&p),
            critical_99: ks_critical_99(p.len()),
        })
        .collect();
    Ok((
        rows,
        NullSummary {
            replicates: cfg.replicates,
            errors,
            ks,
        },
    ))
}

/// Sorted p-values against uniform plotting positions.
pub fn qq_points(p: &[f64]) -> Vec<(f64, f64)> {
    let mut v = p.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    v.into_iter()
        .enumerate()
        .map(|(i, x)| ((i as f64 + 0.5) / n, x))
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PowerRow {
    pub a: f64,
    pub b: f64,
    pub replicate: usize,
    /// Index into the true splits.
    pub true_split: usize,
    pub level: usize,
    pub method: Method,
    pub ari: f64,
    pub detected: bool,
    pub rejected: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PowerCell {
    pub a: f64,
    pub b: f64,
    pub level: usize,
    pub method: Method,
    pub trials: usize,
    pub detections: usize,
    pub rejections: usize,
    pub detection_rate: f64,
    /// Rejections among detections.
    pub conditional_power: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PowerSummary {
    pub errors: usize,
    /// True splits left out of a replicate because one side of the split held no observations.
    pub skipped: usize,
    pub cells: Vec<PowerCell>,
}

/// Best-matching estimated split for each true split: `(ari, parent id)`.
fn best_matches(tree: &Tree, d: &Dataset) -> Vec<Option<(f64, RegionId)>> {
    let rows: Vec<Vec<f64>> = (0..d.n()).map(|i| d.row(i)).collect();
    let in_child: Vec<(RegionId, Vec<u8>)> = tree
        .internal()
        .into_iter()
        .map(|parent| {
            let [l, r] = tree.regions()[parent].children.expect("internal");
            let col = rows
                .iter()
                .map(|x| {
                    if in_region(tree, l, x) {
                        0
                    } else if in_region(tree, r, x) {
                        1
                    } else {
                        2
                    }
                })
                .collect();
            (parent, col)
        })
        .collect();
    true_splits()
        .iter()
        .map(|ts| {
            let truth: Vec<Option<bool>> = rows.iter().map(|x| ts.classify(x)).collect();
            in_child
                .iter()
                .map(|(parent, col)| {
                    let mut table = [[0usize; 3]; 2];
                    for (t, &c) in truth.iter().zip(col) {
                        if let Some(left) = t {
                            table[usize::from(!left)][c as usize] += 1;
                        }
                    }
                    (adjusted_rand_index(&table), *parent)
                })
                .fold(None, |best: Option<(f64, RegionId)>, cand| match best {
                    Some(b) if b.0 >= cand.0 => Some(b),
                    _ => Some(cand),
                })
        })
        .collect()
}

/// Detection of each true split and rejection of its best match.
pub fn power_study(cfg: &SimConfig, exec: Exec) -> Result<(Vec<PowerRow>, PowerSummary)> {
    cfg.validate()?;
    let cells = cfg.cells();
    let jobs: Vec<(usize, usize)> = (0..cells.len())
        .flat_map(|c| (0..cfg.replicates).map(move |r| (c, r)))
        .collect();
    let splits = true_splits();
    let per_rep = exec.map(&jobs, |&(c, r)| -> Result<(Vec<PowerRow>, usize, usize)> {
        let (a, b) = cells[c];
        let mut rng = replicate_rng(cfg.seed, (c * cfg.replicates + r) as u64);
        let (d, mu) = generate(&cfg.design(a, b), &mut rng)?;
        let sigma = cfg.sigma_for(d.y())?;
        let (train, test) = sample_split(cfg.n, &mut rng);
        let tree = fit(&d, d.y(), &cfg.stopping, cfg.lambda)?;
        let ctx = Conditioning::from_fitted(&d, d.y(), &tree);
        let train_d = d.subset(&train)?;
        let train_tree = fit(&train_d, train_d.y(), &cfg.stopping, cfg.lambda)?;
        let held_out: BTreeMap<RegionId, Option<(f64, f64)>> =
            sample_split_contrasts(&d, &mu, &train_tree, &test, sigma)
                .into_iter()
                .filter(|h| h.kind == ContrastKind::Sibling)
                .map(|h| (h.id, h.estimate))
                .collect();

        let mut rows = Vec::new();
        let mut errors = 0;
        let mut skipped = 0;
        let rows_x: Vec<Vec<f64>> = (0..d.n()).map(|i| d.row(i)).collect();
        let full = best_matches(&tree, &d);
        let half = best_matches(&train_tree, &d);
        for (k, ts) in splits.iter().enumerate() {
            let sides: Vec<bool> = rows_x.iter().filter_map(|x| ts.classify(x)).collect();
            if !(sides.contains(&true) && sides.contains(&false)) {
                skipped += 1;
                continue;
            }
            let mut push = |method, m: Option<(f64, RegionId)>, rejected: bool| {
                let ari = m.map_or(0.0, |x| x.0);
                let detected = ari > DETECTION_ARI;
                rows.push(PowerRow {
                    a,
                    b,
                    replicate: r,
                    true_split: k,
                    level: ts.level,
                    method,
                    ari,
                    detected,
                    rejected: detected && rejected,
                });
            };
            let selective = match full[k] {
                Some((ari, parent)) if ari > DETECTION_ARI => {
                    match infer_split(&ctx, &tree, parent, sigma, cfg.alpha) {
                        Ok(res) => res.p_value < cfg.alpha,
                        Err(_) => {
                            errors += 1;
                            false
                        }
                    }
                }
                _ => false,
            };
            push(Method::Selective, full[k], selective);
            let split = half[k]
                .and_then(|(_, parent)| held_out.get(&parent).copied().flatten())
                .is_some_and(|(stat, sd)| {
                    naive_z(stat, sd, cfg.alpha, 0.0).is_ok_and(|z| z.p_value < cfg.alpha)
                });
            push(Method::SampleSplit, half[k], split);
        }
        Ok((rows, errors, skipped))
    });
    let mut rows = Vec::new();
    let mut errors = 0;
    let mut skipped = 0;
    for rep in per_rep {
        let (r, e, s) = rep?;
        rows.extend(r);
        errors += e;
        skipped += s;
    }
    let mut acc: BTreeMap<(u64, u64, usize, Method), (usize, usize, usize)> = BTreeMap::new();
    for row in &rows {
        let e = acc
            .entry((row.a.to_bits(), row.b.to_bits(), row.level, row.method))
            .or_default();
        e.0 += 1;
        e.1 += usize::from(row.detected);
        e.2 += usize::from(row.rejected);
    }
    let cells = acc
        .into_iter()
        .map(|((a, b, level, method), (trials, det, rej))| PowerCell {
            a: f64::from_bits(a),
            b: f64::from_bits(b),
            level,
            method,
            trials,
            detections: det,
            rejections: rej,
            detection_rate: det as f64 / trials as f64,
            conditional_power: if det > 0 {
                rej as f64 / det as f64
            } else {
                0.0
            },
        })
        .collect();
    Ok((
        rows,
        PowerSummary {
            errors,
            skipped,
            cells,
        },
    ))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoverageRow {
    pub a: f64,
    pub b: f64,
    pub replicate: usize,
    pub kind: ContrastKind,
    pub level: usize,
    pub method: Method,
    #[serde(with = "crate::ext_float")]
    pub lower: f64,
    #[serde(with = "crate::ext_float")]
    pub upper: f64,
    pub truth: f64,
    pub covered: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoverageCell {
    pub kind: ContrastKind,
    pub level: usize,
    pub method: Method,
    pub count: usize,
    pub covered: usize,
    pub coverage: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoverageSummary {
    pub errors: usize,
    pub cells: Vec<CoverageCell>,
}

impl CoverageSummary {
    pub fn cell(&self, kind: ContrastKind, level: usize, method: Method) -> Option<&CoverageCell> {
        self.cells
            .iter()
            .find(|c| c.kind == kind && c.level == level && c.method == method)
    }
}

/// Coverage of sibling and region intervals, pooled over the `(a, b)` grid.
pub fn coverage_study(cfg: &SimConfig, exec: Exec) -> Result<(Vec<CoverageRow>, CoverageSummary)> {
    cfg.validate()?;
    let cells = cfg.cells();
    let jobs: Vec<(usize, usize)> = (0..cells.len())
        .flat_map(|c| (0..cfg.replicates).map(move |r| (c, r)))
        .collect();
    let per_rep = exec.map(&jobs, |&(c, r)| -> Result<(Vec<CoverageRow>, usize)> {
        let (a, b) = cells[c];
        let mut rng = replicate_rng(cfg.seed, (c * cfg.replicates + r) as u64);
        let (d, mu) = generate(&cfg.design(a, b), &mut rng)?;
        let sigma = cfg.sigma_for(d.y())?;
        let (train, test) = sample_split(cfg.n, &mut rng);
        let tree = fit(&d, d.y(), &cfg.stopping, cfg.lambda)?;
        let ctx = Conditioning::from_fitted(&d, d.y(), &tree);
        let mut rows = Vec::new();
        let mut errors = 0;
        let mut record = |kind, level, method, ci: (f64, f64), truth: f64| {
            rows.push(CoverageRow {
                a,
                b,
                replicate: r,
                kind,
                level,
                method,
                lower: ci.0,
                upper: ci.1,
                truth,
                covered: ci.0 <= truth && truth <= ci.1,
            });
        };

        for parent in tree.internal() {
            let [ra, rb] = tree.regions()[parent].children.expect("internal");
            let truth = mean_over(&mu, &tree.regions()[ra].members)
                - mean_over(&mu, &tree.regions()[rb].members);
            match infer_split(&ctx, &tree, parent, sigma, cfg.alpha) {
                Ok(res) => {
                    record(
                        ContrastKind::Sibling,
                        res.level,
                        Method::Selective,
                        res.ci,
                        truth,
                    );
                    record(
                        ContrastKind::Sibling,
                        res.level,
                        Method::Naive,
                        res.naive.ci,
                        truth,
                    );
                }
                Err(_) => errors += 1,
            }
        }
        for id in 0..tree.len() {
            if tree.regions()[id].level == 0 {
                continue;
            }
            let truth = mean_over(&mu, &tree.regions()[id].members);
            match infer_region(
                &ctx,
                &tree,
                id,
                sigma,
                cfg.alpha,
                PermutationMode::Identity,
                0.0,
            ) {
                Ok(res) => {
                    record(
                        ContrastKind::Region,
                        res.level,
                        Method::Selective,
                        res.ci,
                        truth,
                    );
                    record(
                        ContrastKind::Region,
                        res.level,
                        Method::Naive,
                        res.naive.ci,
                        truth,
                    );
                }
                Err(_) => errors += 1,
            }
        }

        let train_d = d.subset(&train)?;
        let train_tree = fit(&train_d, train_d.y(), &cfg.stopping, cfg.lambda)?;
        for h in sample_split_contrasts(&d, &mu, &train_tree, &test, sigma) {
            // an empty test region fails to cover
            let ci = match h.estimate {
                Some((stat, sd)) => naive_z(stat, sd, cfg.alpha, 0.0)?.ci,
                None => (f64::NAN, f64::NAN),
            };
            record(h.kind, h.level, Method::SampleSplit, ci, h.truth);
        }
        Ok((rows, errors))
    });
    let mut rows = Vec::new();
    let mut errors = 0;
    for rep in per_rep {
        let (r, e) = rep?;
        rows.extend(r);
        errors += e;
    }
    let mut acc: BTreeMap<(u8, usize, Method), (ContrastKind, usize, usize)> = BTreeMap::new();
    for row in &rows {
        let key = (row.kind as u8, row.level, row.method);
        let e = acc.entry(key).or_insert((row.kind, 0, 0));
        e.1 += 1;
        e.2 += usize::from(row.covered);
    }
    let cells = acc
        .into_iter()
        .map(
            |((_, level, method), (kind, count, covered))| CoverageCell {
                kind,
                level,
                method,
                count,
                covered,
                coverage: covered as f64 / count as f64,
            },
        )
        .collect();
    Ok((rows, CoverageSummary { errors, cells }))
}

fn io_error(path: &Path) -> impl Fn(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Writes one CSV row per record, with a header taken from the field names.
pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let file = std::fs::File::create(path).map_err(io_error(path))?;
    let mut w = csv::Writer::from_writer(file);
    for row in rows {
        w.serialize(row).map_err(|e| Error::Csv(e.to_string()))?;
    }
    w.flush().map_err(io_error(path))
}

/// Writes `uniform_quantile p_value` pairs, one per line, for plotting.
pub fn write_qq(path: &Path, p: &[f64]) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path).map_err(io_error(path))?);
    writeln!(f, "# uniform_quantile p_value").map_err(io_error(path))?;
    for (u, v) in qq_points(p) {
        writeln!(f, "{u} {v}").map_err(io_error(path))?;
    }
    f.flush().map_err(io_error(path))
}
