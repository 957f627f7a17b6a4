//! From pose maps to a dependency matrix: Jacobian-norm statistics,
//! normalized features, thresholding, row clustering and duplicate merging.

mod cluster;
mod tij;

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hetero_tree::check_conditions;

pub use crate::hetero_tree::DependencyMatrix;
pub use cluster::{cluster_rows, Cluster, ClusterConfig, ClusterMethod, Clustering};
pub use tij::{sample_configurations, tij, tij_aggregate, tij_variance, Aggregate, OracleSensor, PoseMap, Reposed, Tij};

/// Binary dependency row together with the sensors that produced it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DependencyFeature {
    pub sensors: Vec<String>,
    pub bits: Vec<bool>,
}

/// Column-wise maximum of `jbar`, scaled to unit Euclidean length.
pub fn feature_raw(jbar: &DMatrix<f64>, sensor: &str) -> Result<Vec<f64>> {
    let maxes: Vec<f64> = jbar.column_iter().map(|c| c.iter().cloned().fold(0.0, f64::max)).collect();
    let norm = maxes.iter().map(|v| v * v).sum::<f64>().sqrt();
    if !(norm > 0.0) || !norm.is_finite() {
        return Err(Error::DegenerateSensor(sensor.to_string()));
    }
    Ok(maxes.into_iter().map(|v| v / norm).collect())
}

/// `d_i = d'_i > δ`.
pub fn threshold(dprime: &[f64], delta: f64) -> Vec<bool> {
    dprime.iter().map(|&v| v > delta).collect()
}

fn as_f64(bits: &[bool]) -> Vec<f64> {
    bits.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect()
}

/// Keeps the `max_rows` largest clusters, rounds their means at 0.5 and
/// merges rounds that coincide. `sensors` names the clustered rows.
pub fn reduce_rows(clustering: &Clustering, sensors: &[String], max_rows: usize) -> Vec<DependencyFeature> {
    let mut out: Vec<DependencyFeature> = Vec::new();
    for c in clustering.clusters.iter().take(max_rows) {
        let bits: Vec<bool> = c.mean.iter().map(|&m| m > 0.5).collect();
        let names = c.members.iter().map(|&i| sensors[i].clone());
        match out.iter_mut().find(|f| f.bits == bits) {
            Some(f) => f.sensors.extend(names),
            None => out.push(DependencyFeature { sensors: names.collect(), bits }),
        }
    }
    for f in &mut out {
        f.sensors.sort();
    }
    out
}

/// Score of one candidate threshold and the resulting cluster count.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeltaScore {
    pub delta: f64,
    pub clusters: usize,
    /// `None` when fewer than two clusters form.
    pub score: Option<f64>,
    /// At most one cluster per column and the reduced rows satisfy the
    /// partial-matrix conditions, i.e. some tree is consistent with them.
    pub admissible: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaChoice {
    pub delta: f64,
    pub scores: Vec<DeltaScore>,
}

/// Floor on the within-cluster dispersion so that perfectly tight clusters
/// give a large finite score.
pub const DISPERSION_FLOOR: f64 = 1e-12;

/// `|det S| / max(m, floor) − λ Σ p_c log p_c` for one clustering of the
/// rows `x`, where `S_ij = |μ_i − μ_j|` and `m` sums squared deviations
/// from the cluster means.
pub fn delta_objective(x: &[Vec<f64>], c: &Clustering, lambda: f64) -> Option<f64> {
    let k = c.clusters.len();
    if k < 2 {
        return None;
    }
    let s = DMatrix::from_fn(k, k, |i, j| {
        let (a, b) = (&c.clusters[i].mean, &c.clusters[j].mean);
        a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum::<f64>().sqrt()
    });
    let m: f64 = c
        .clusters
        .iter()
        .flat_map(|cl| cl.members.iter().map(move |&i| (i, &cl.mean)))
        .map(|(i, mu)| x[i].iter().zip(mu).map(|(p, q)| (p - q) * (p - q)).sum::<f64>())
        .sum();
    let n = x.len() as f64;
    let plogp: f64 = c.clusters.iter().map(|cl| cl.size() as f64 / n).map(|p| p * p.ln()).sum();
    Some(s.determinant().abs() / m.max(DISPERSION_FLOOR) - lambda * plogp)
}

/// Rows reduced from `c`, and whether they could come from a tree: at most
/// one cluster per column and the partial-matrix conditions hold.
fn reduced_rows(c: &Clustering, n_cols: usize) -> (Vec<Vec<bool>>, bool) {
    let names: Vec<String> = (0..c.assignment.len()).map(|i| i.to_string()).collect();
    let mut rows: Vec<Vec<bool>> = reduce_rows(c, &names, n_cols).into_iter().map(|f| f.bits).collect();
    rows.sort();
    let ok = c.clusters.len() <= n_cols
        && DependencyMatrix::unlabeled(rows.clone()).is_ok_and(|m| check_conditions(&m).satisfies_p_minus());
    (rows, ok)
}

fn check_grid(grid: &[f64], lambda: f64) -> Result<Vec<f64>> {
    if grid.is_empty() {
        return Err(Error::InvalidArgument("empty δ grid".into()));
    }
    if !(lambda >= 0.0) {
        return Err(Error::InvalidArgument("λ must be non-negative".into()));
    }
    let mut grid = grid.to_vec();
    grid.sort_by(f64::total_cmp);
    Ok(grid)
}

/// Thresholds, clusters and scores the rows at every grid value.
fn scan_grid(features_raw: &[Vec<f64>], grid: &[f64], lambda: f64, cfg: &ClusterConfig) -> Vec<(DeltaScore, Vec<Vec<bool>>)> {
    let n_cols = features_raw.first().map_or(0, Vec::len);
    grid.iter()
        .map(|&delta| {
            let x: Vec<Vec<f64>> = features_raw.iter().map(|f| as_f64(&threshold(f, delta))).collect();
            let c = cluster_rows(&x, cfg);
            let (rows, admissible) = reduced_rows(&c, n_cols);
            let score = DeltaScore { delta, clusters: c.clusters.len(), score: delta_objective(&x, &c, lambda), admissible };
            (score, rows)
        })
        .collect()
}

/// Grid search for the threshold maximizing [`delta_objective`] on the
/// binarized rows. Ties go to the smaller δ. With `admissible_only` the
/// argmax runs over admissible thresholds when there is at least one.
/// Returns `None` if no candidate yields two or more clusters.
pub fn optimize_delta(
    features_raw: &[Vec<f64>],
    grid: &[f64],
    lambda: f64,
    cfg: &ClusterConfig,
    admissible_only: bool,
) -> Result<Option<DeltaChoice>> {
    let grid = check_grid(grid, lambda)?;
    let scores: Vec<DeltaScore> = scan_grid(features_raw, &grid, lambda, cfg).into_iter().map(|(s, _)| s).collect();
    let restrict = admissible_only && scores.iter().any(|s| s.admissible && s.score.is_some());
    let mut best: Option<(f64, f64)> = None;
    for s in scores.iter().filter(|s| s.admissible || !restrict) {
        if let Some(v) = s.score {
            if best.is_none_or(|(_, b)| v > b) {
                best = Some((s.delta, v));
            }
        }
    }
    Ok(best.map(|(delta, _)| DeltaChoice { delta, scores }))
}

/// Threshold in the middle of the longest run of consecutive grid values
/// that all give the same admissible reduced matrix. Ties go to the run
/// with smaller δ. `None` if no grid value is admissible. Scores of the
/// objective are reported alongside.
pub fn stable_delta(features_raw: &[Vec<f64>], grid: &[f64], lambda: f64, cfg: &ClusterConfig) -> Result<Option<DeltaChoice>> {
    let grid = check_grid(grid, lambda)?;
    let scan = scan_grid(features_raw, &grid, lambda, cfg);
    let mut best: Option<(usize, usize)> = None;
    let mut i = 0;
    while i < scan.len() {
        if !scan[i].0.admissible {
            i += 1;
            continue;
        }
        let mut j = i + 1;
        while j < scan.len() && scan[j].0.admissible && scan[j].1 == scan[i].1 {
            j += 1;
        }
        if best.is_none_or(|(a, b)| j - i > b - a) {
            best = Some((i, j));
        }
        i = j;
    }
    let scores: Vec<DeltaScore> = scan.into_iter().map(|(s, _)| s).collect();
    Ok(best.map(|(a, b)| DeltaChoice { delta: grid[(a + b - 1) / 2], scores }))
}

/// Name of a merged row: the shared link name when every sensor id has the
/// form `link/k` with the same link, otherwise the sorted ids joined by `+`.
pub fn group_label(sensors: &[String]) -> String {
    let link = |s: &String| s.split_once('/').map(|(l, _)| l.to_string());
    let first = sensors.first().and_then(link);
    match first {
        Some(l) if sensors.iter().all(|s| link(s).as_deref() == Some(l.as_str())) => l,
        _ => {
            let mut v = sensors.to_vec();
            v.sort();
            v.join("+")
        }
    }
}

/// Stacks features into a matrix, merging identical rows. Each row is named
/// by [`group_label`] and `merged_groups` lists its sensors.
pub fn build_matrix(features: &[DependencyFeature], col_labels: &[String]) -> Result<DependencyMatrix> {
    let mut merged: Vec<DependencyFeature> = Vec::new();
    for f in features {
        if f.bits.len() != col_labels.len() {
            return Err(Error::DimensionMismatch { expected: col_labels.len(), got: f.bits.len() });
        }
        match merged.iter_mut().find(|m| m.bits == f.bits) {
            Some(m) => m.sensors.extend(f.sensors.iter().cloned()),
            None => merged.push(f.clone()),
        }
    }
    let mut labels = Vec::new();
    let mut groups = BTreeMap::new();
    for m in &mut merged {
        m.sensors.sort();
        m.sensors.dedup();
        let mut l = group_label(&m.sensors);
        while labels.contains(&l) {
            l.push('\'');
        }
        groups.insert(l.clone(), m.sensors.clone());
        labels.push(l);
    }
    let rows = merged.into_iter().map(|m| m.bits).collect();
    Ok(DependencyMatrix::new(labels, col_labels.to_vec(), rows)?.with_merged_groups(groups))
}

/// How δ is chosen.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DeltaRule {
    Fixed { delta: f64 },
    /// Middle of the widest grid interval with one stable admissible
    /// matrix; see [`stable_delta`].
    Stable {
        #[serde(default = "default_delta_grid")]
        grid: Vec<f64>,
        #[serde(default = "one")]
        lambda: f64,
        #[serde(default = "default_fallback")]
        fallback: f64,
    },
    /// Grid search, falling back to `fallback` when no grid value separates
    /// the rows into two or more clusters.
    Optimize {
        #[serde(default = "default_delta_grid")]
        grid: Vec<f64>,
        #[serde(default = "one")]
        lambda: f64,
        #[serde(default = "default_fallback")]
        fallback: f64,
        /// Only consider thresholds whose reduced rows fit some tree.
        #[serde(default = "yes")]
        admissible_only: bool,
    },
}

/// 50 points uniform on [0.02, 0.98].
pub fn default_delta_grid() -> Vec<f64> {
    (0..50).map(|i| 0.02 + 0.96 * i as f64 / 49.0).collect()
}

impl Default for DeltaRule {
    fn default() -> Self {
        Self::Stable { grid: default_delta_grid(), lambda: one(), fallback: default_fallback() }
    }
}

impl DeltaRule {
    /// Objective maximization over the default grid, λ = 1.
    pub fn optimize() -> Self {
        Self::Optimize { grid: default_delta_grid(), lambda: one(), fallback: default_fallback(), admissible_only: true }
    }
}

fn yes() -> bool {
    true
}

fn one() -> f64 {
    1.0
}

fn default_fallback() -> f64 {
    0.3
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExtractConfig {
    /// Number of configurations sampled for the Jacobian statistic.
    pub samples: usize,
    /// Joint box `[lo, hi]` for the configurations.
    pub box_lo: f64,
    pub box_hi: f64,
    pub seed: u64,
    pub aggregate: Aggregate,
    pub delta: DeltaRule,
    pub cluster: ClusterConfig,
}

impl Default for ExtractConfig {
    fn default() -> Self {
        Self {
            samples: 64,
            box_lo: -std::f64::consts::PI,
            box_hi: std::f64::consts::PI,
            seed: 0,
            aggregate: Aggregate::Mean,
            delta: DeltaRule::default(),
            cluster: ClusterConfig::default(),
        }
    }
}

/// Everything the extraction stage produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Extraction {
    pub sensors: Vec<String>,
    pub features_raw: Vec<Vec<f64>>,
    pub delta: f64,
    pub delta_scores: Vec<DeltaScore>,
    pub clustering: Clustering,
    pub matrix: DependencyMatrix,
}

/// Normalized features of every sensor, computed in parallel over
/// configurations drawn from the joint box of `cfg`.
pub fn sensor_features<P: PoseMap>(maps: &[(String, P)], cfg: &ExtractConfig) -> Result<Vec<Vec<f64>>> {
    let n = maps.first().map(|(_, m)| m.n_joints()).unwrap_or(0);
    let thetas = sample_configurations(n, cfg.samples, cfg.box_lo, cfg.box_hi, cfg.seed);
    sensor_features_at(maps, &thetas, cfg.aggregate)
}

/// Same as [`sensor_features`] at caller-chosen configurations.
pub fn sensor_features_at<P: PoseMap>(maps: &[(String, P)], thetas: &[Vec<f64>], how: Aggregate) -> Result<Vec<Vec<f64>>> {
    let n = maps.first().map(|(_, m)| m.n_joints()).unwrap_or(0);
    maps.par_iter()
        .map(|(id, m)| {
            if m.n_joints() != n {
                return Err(Error::DimensionMismatch { expected: n, got: m.n_joints() });
            }
            feature_raw(&tij_aggregate(m, thetas, how)?, id)
        })
        .collect()
}

/// Threshold, cluster, reduce and merge pre-computed sensor features.
pub fn extract_from_features(
    sensors: &[String],
    features_raw: Vec<Vec<f64>>,
    col_labels: &[String],
    cfg: &ExtractConfig,
) -> Result<Extraction> {
    if sensors.is_empty() || sensors.len() != features_raw.len() {
        return Err(Error::InvalidArgument("need one feature per sensor and at least one sensor".into()));
    }
    let (delta, delta_scores) = match &cfg.delta {
        DeltaRule::Fixed { delta } => (*delta, Vec::new()),
        DeltaRule::Optimize { grid, lambda, fallback, admissible_only } => match optimize_delta(&features_raw, grid, *lambda, &cfg.cluster, *admissible_only)? {
            Some(c) => (c.delta, c.scores),
            None => (*fallback, Vec::new()),
        },
        DeltaRule::Stable { grid, lambda, fallback } => match stable_delta(&features_raw, grid, *lambda, &cfg.cluster)? {
            Some(c) => (c.delta, c.scores),
            None => (*fallback, Vec::new()),
        },
    };
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidArgument(format!("δ = {delta} outside (0, 1)")));
    }
    let x: Vec<Vec<f64>> = features_raw.iter().map(|f| as_f64(&threshold(f, delta))).collect();
    let clustering = cluster_rows(&x, &cfg.cluster);
    let reduced = reduce_rows(&clustering, sensors, col_labels.len());
    let matrix = build_matrix(&reduced, col_labels)?;
    Ok(Extraction { sensors: sensors.to_vec(), features_raw, delta, delta_scores, clustering, matrix })
}

/// Full extraction from a set of per-sensor pose maps.
pub fn extract<P: PoseMap>(maps: &[(String, P)], col_labels: &[String], cfg: &ExtractConfig) -> Result<Extraction> {
    let f = sensor_features(maps, cfg)?;
    let sensors: Vec<String> = maps.iter().map(|(s, _)| s.clone()).collect();
    extract_from_features(&sensors, f, col_labels, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain_sim::builtin_robot;
    use crate::hetero_tree::tree_to_matrix;

    fn fixture() -> DMatrix<f64> {
        DMatrix::from_row_slice(
            4,
            4,
            &[3.14, 6.23, 0.0, 1.56, 7.23, 2.64, 0.0, 3.25, 2.33, 3.08, 0.0, 6.32, 7.33, 8.32, 0.0, 9.17],
        )
    }

    #[test]
    fn max_filter_fixture() {
        let d = feature_raw(&fixture(), "s").unwrap();
        let truncated: Vec<f64> = d.iter().map(|v| (v * 100.0).floor() / 100.0).collect();
        assert_eq!(truncated, vec![0.5, 0.57, 0.0, 0.63]);
        assert_eq!(threshold(&d, 0.1), vec![true, true, false, true]);
    }

    #[test]
    fn feature_is_scale_free_and_rejects_zero() {
        let a = feature_raw(&fixture(), "s").unwrap();
        let b = feature_raw(&(fixture() * 10.0), "s").unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-15);
        }
        assert!(matches!(feature_raw(&DMatrix::zeros(4, 3), "s"), Err(Error::DegenerateSensor(_))));
        let one_hot = DMatrix::from_row_slice(4, 3, &[0.0, 2.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.5, 0.0, 0.0, 0.0, 0.0]);
        assert_eq!(feature_raw(&one_hot, "s").unwrap(), vec![0.0, 1.0, 0.0]);
    }

    #[test]
    fn threshold_extremes_and_monotone() {
        let d = [0.5, 0.57, 0.0, 0.63];
        assert_eq!(threshold(&d, 0.999), vec![false; 4]);
        let mut prev = threshold(&d, 0.0);
        for k in 1..100 {
            let cur = threshold(&d, k as f64 / 100.0);
            assert!(cur.iter().zip(&prev).all(|(c, p)| !c || *p));
            prev = cur;
        }
    }

    fn names(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("s{i}")).collect()
    }

    #[test]
    fn reduce_rows_rounds_and_caps() {
        let c = Clustering {
            assignment: vec![0, 0, 1, 2],
            clusters: vec![
                Cluster { members: vec![0, 1], mean: vec![0.9, 0.1, 0.8] },
                Cluster { members: vec![2], mean: vec![1.0, 0.0, 1.0] },
                Cluster { members: vec![3], mean: vec![0.0, 1.0, 0.0] },
            ],
        };
        let r = reduce_rows(&c, &names(4), 3);
        assert_eq!(r.len(), 2);
        assert_eq!(r[0].bits, vec![true, false, true]);
        assert_eq!(r[0].sensors, vec!["s0", "s1", "s2"]);
        assert_eq!(reduce_rows(&c, &names(4), 1).len(), 1);
    }

    #[test]
    fn rule_fields_default_when_omitted() {
        let r: DeltaRule = serde_json::from_str(r#"{"kind": "optimize"}"#).unwrap();
        assert_eq!(r, DeltaRule::optimize());
        let r: DeltaRule = serde_json::from_str(r#"{"kind": "stable"}"#).unwrap();
        assert_eq!(r, DeltaRule::default());
    }

    #[test]
    fn stable_rule_takes_middle_of_widest_run() {
        let rows = vec![vec![1.0, 0.0], vec![0.7, 0.7], vec![1.0, 0.0]];
        let grid: Vec<f64> = (1..10).map(|i| i as f64 / 10.0).collect();
        let c = stable_delta(&rows, &grid, 1.0, &ClusterConfig::default()).unwrap().unwrap();
        // Admissible for δ < 0.7, where the second row still has a 1.
        assert_eq!(c.scores.iter().filter(|s| s.admissible).count(), 6);
        assert_eq!(c.delta, 0.3);
        assert!(stable_delta(&rows, &[0.8, 0.9], 1.0, &ClusterConfig::default()).unwrap().is_none());
    }

    #[test]
    fn delta_search_finds_separating_range() {
        // The groups differ only in joint 2 (0.1 vs 0.4); any δ of 0.4 or
        // more merges them.
        let a = [0.9, 0.3, 0.1];
        let b = [0.9, 0.3, 0.4];
        let rows: Vec<Vec<f64>> = (0..6).map(|i| if i % 2 == 0 { a.to_vec() } else { b.to_vec() }).collect();
        let grid: Vec<f64> = (1..10).map(|i| i as f64 / 10.0).collect();
        let c = optimize_delta(&rows, &grid, 1.0, &ClusterConfig::default(), false).unwrap().unwrap();
        assert!(c.delta >= 0.1 && c.delta < 0.4, "{}", c.delta);
        let single = optimize_delta(&rows, &[0.3], 0.0, &ClusterConfig::default(), false).unwrap().unwrap();
        assert_eq!(single.delta, 0.3);
        assert!(optimize_delta(&rows, &[0.8], 1.0, &ClusterConfig::default(), false).unwrap().is_none());
    }

    #[test]
    fn admissible_rule_skips_empty_rows() {
        // At δ = 0.5 the second group thresholds to an all-zero row.
        let rows = vec![vec![0.9, 0.1], vec![0.45, 0.45], vec![0.9, 0.1], vec![0.45, 0.45]];
        let grid = [0.3, 0.5];
        let literal = optimize_delta(&rows, &grid, 0.0, &ClusterConfig::default(), false).unwrap().unwrap();
        assert_eq!(literal.scores.iter().map(|s| s.admissible).collect::<Vec<_>>(), vec![true, false]);
        let ok = optimize_delta(&rows, &grid, 0.0, &ClusterConfig::default(), true).unwrap().unwrap();
        assert_eq!(ok.delta, 0.3);
        // Nothing admissible: the literal argmax is used.
        let only_bad = optimize_delta(&rows, &[0.5], 0.0, &ClusterConfig::default(), true).unwrap().unwrap();
        assert_eq!(only_bad.delta, 0.5);
    }

    #[test]
    fn lambda_zero_is_det_over_dispersion() {
        let x = vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![0.0, 1.0]];
        let c = cluster_rows(&x, &ClusterConfig::default());
        let v = delta_objective(&x, &c, 0.0).unwrap();
        // S = [[0, √2], [√2, 0]], det = −2, m = 0.
        assert!((v - 2.0 / DISPERSION_FLOOR).abs() < 1e-3);
        let with = delta_objective(&x, &c, 1.0).unwrap();
        let h = -(1.0 / 3.0f64 * (1.0f64 / 3.0).ln() + 2.0 / 3.0 * (2.0f64 / 3.0).ln());
        assert!((with - v - h).abs() < 1e-3);
    }

    #[test]
    fn build_matrix_merges_same_link() {
        let f = vec![
            DependencyFeature { sensors: vec!["l1/0".into()], bits: vec![true, false] },
            DependencyFeature { sensors: vec!["l1/1".into()], bits: vec![true, false] },
            DependencyFeature { sensors: vec!["l2/0".into()], bits: vec![true, true] },
        ];
        let cols = vec!["j1".to_string(), "j2".to_string()];
        let m = build_matrix(&f, &cols).unwrap();
        assert_eq!(m.nrows(), 2);
        assert_eq!(m.row_labels(), ["l1", "l2"]);
        assert_eq!(m.merged_groups()["l1"], vec!["l1/0", "l1/1"]);
        let mixed = vec![DependencyFeature { sensors: vec!["l2/0".into(), "l1/0".into()], bits: vec![true, false] }];
        assert_eq!(build_matrix(&mixed, &cols).unwrap().row_labels(), ["l1/0+l2/0"]);
    }

    #[test]
    fn oracle_extraction_reproduces_chain_matrix() {
        let spec = builtin_robot("robot1", 2).unwrap();
        let maps: Vec<(String, OracleSensor)> =
            spec.sensors().iter().map(|s| (s.id.clone(), OracleSensor { spec: &spec, id: &s.id })).collect();
        let cfg = ExtractConfig { samples: 32, delta: DeltaRule::Fixed { delta: 0.05 }, ..Default::default() };
        let e = extract(&maps, &spec.joint_labels(), &cfg).unwrap();
        assert!(e.matrix.same_as(&tree_to_matrix(spec.topology())), "{}", e.matrix);
    }
}
