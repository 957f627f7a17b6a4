use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::digamma;

/// Inference scheme for the Dirichlet-process mixture.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClusterMethod {
    /// Truncated stick-breaking mixture of diagonal Gaussians, fit by
    /// mean-field updates starting from the DP-means partition.
    #[default]
    Variational,
    /// Hard-assignment DP-means only.
    DpMeans,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClusterConfig {
    /// Concentration of the Dirichlet process.
    pub alpha: f64,
    pub method: ClusterMethod,
    /// Prior variance of each feature within a cluster.
    pub prior_variance: f64,
    pub max_iter: usize,
    /// Seeds the order in which DP-means visits the rows.
    pub seed: u64,
}

impl Default for ClusterConfig {
    fn default() -> Self {
        Self { alpha: 1.0, method: ClusterMethod::Variational, prior_variance: 0.01, max_iter: 200, seed: 0 }
    }
}

impl ClusterConfig {
    /// Squared-distance cost of opening a new DP-means cluster. It follows
    /// the small-variance limit of the DP mixture: cost grows with
    /// `log(1 + 1/α)` and stays well below the squared distance (1) between
    /// two distinct binary rows.
    pub fn dp_means_penalty(&self) -> f64 {
        let s2 = self.prior_variance.max(1e-6);
        (s2 * (1.0 + 2.0 * (1.0 + 1.0 / self.alpha.max(1e-9)).ln())).min(0.5)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cluster {
    pub members: Vec<usize>,
    pub mean: Vec<f64>,
}

impl Cluster {
    pub fn size(&self) -> usize {
        self.members.len()
    }
}

/// Clusters sorted by decreasing size, ties by smallest member index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Clustering {
    pub assignment: Vec<usize>,
    pub clusters: Vec<Cluster>,
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn dp_means(x: &[Vec<f64>], penalty: f64, seed: u64, max_iter: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut centers: Vec<Vec<f64>> = vec![x[order[0]].clone()];
    let mut z = vec![0usize; x.len()];
    for _ in 0..max_iter.max(1) {
        let before = z.clone();
        for &i in &order {
            let (best, d) = centers
                .iter()
                .enumerate()
                .map(|(k, c)| (k, dist2(&x[i], c)))
                .fold((0, f64::INFINITY), |a, b| if b.1 < a.1 { b } else { a });
            if d > penalty {
                centers.push(x[i].clone());
                z[i] = centers.len() - 1;
            } else {
                z[i] = best;
            }
        }
        centers = recenter(x, &mut z);
        if z == before {
            break;
        }
    }
    z
}

/// Means of the non-empty groups, relabelling `z` to 0..k.
fn recenter(x: &[Vec<f64>], z: &mut [usize]) -> Vec<Vec<f64>> {
    let mut ids: Vec<usize> = z.to_vec();
    ids.sort_unstable();
    ids.dedup();
    for v in z.iter_mut() {
        *v = ids.binary_search(v).expect("present");
    }
    let d = x[0].len();
    let mut c = vec![vec![0.0; d]; ids.len()];
    let mut n = vec![0usize; ids.len()];
    for (i, &k) in z.iter().enumerate() {
        n[k] += 1;
        for j in 0..d {
            c[k][j] += x[i][j];
        }
    }
    for (ck, nk) in c.iter_mut().zip(n) {
        ck.iter_mut().for_each(|v| *v /= nk as f64);
    }
    c
}

/// Mean-field updates for a truncated DP mixture with diagonal
/// Normal-Gamma components. Returns hard assignments (argmax of the
/// responsibilities).
fn variational(x: &[Vec<f64>], init: &[usize], cfg: &ClusterConfig) -> Vec<usize> {
    let n = x.len();
    let d = x[0].len();
    let t = n;
    let m0: Vec<f64> = (0..d).map(|j| x.iter().map(|r| r[j]).sum::<f64>() / n as f64).collect();
    // A small β0 keeps the prior on cluster means broad; otherwise the
    // Normal-Gamma coupling pulls every mean toward the global mean.
    let (beta0, a0) = (1e-3, 1.0);
    let b0 = a0 * cfg.prior_variance.max(1e-9);
    let mut resp = vec![vec![0.0; t]; n];
    for (i, &k) in init.iter().enumerate() {
        resp[i][k] = 1.0;
    }
    for _ in 0..cfg.max_iter {
        // M step: component posteriors.
        let mut nk = vec![0.0; t];
        let mut xbar = vec![vec![0.0; d]; t];
        for i in 0..n {
            for k in 0..t {
                nk[k] += resp[i][k];
                for j in 0..d {
                    xbar[k][j] += resp[i][k] * x[i][j];
                }
            }
        }
        let mut m = vec![vec![0.0; d]; t];
        let mut a = vec![0.0; t];
        let mut b = vec![vec![0.0; d]; t];
        let mut beta = vec![0.0; t];
        for k in 0..t {
            if nk[k] > 1e-12 {
                xbar[k].iter_mut().for_each(|v| *v /= nk[k]);
            } else {
                xbar[k] = m0.clone();
            }
            beta[k] = beta0 + nk[k];
            a[k] = a0 + nk[k] / 2.0;
            for j in 0..d {
                let sk: f64 = (0..n).map(|i| resp[i][k] * (x[i][j] - xbar[k][j]).powi(2)).sum();
                m[k][j] = (beta0 * m0[j] + nk[k] * xbar[k][j]) / beta[k];
                b[k][j] = b0 + 0.5 * (sk + beta0 * nk[k] * (xbar[k][j] - m0[j]).powi(2) / beta[k]);
            }
        }
        // Stick-breaking weights.
        let mut e_log_pi = vec![0.0; t];
        let mut tail = 0.0;
        let mut rest: f64 = nk.iter().sum();
        for k in 0..t {
            rest -= nk[k];
            let g1 = 1.0 + nk[k];
            let g2 = cfg.alpha + rest.max(0.0);
            let dg = digamma(g1 + g2);
            e_log_pi[k] = digamma(g1) - dg + tail;
            tail += digamma(g2) - dg;
        }
        // E step.
        let mut change: f64 = 0.0;
        for i in 0..n {
            let mut logs = vec![0.0; t];
            for k in 0..t {
                let mut l = e_log_pi[k];
                for j in 0..d {
                    let e_log_lam = digamma(a[k]) - b[k][j].ln();
                    let e_quad = a[k] / b[k][j] * (x[i][j] - m[k][j]).powi(2) + 1.0 / beta[k];
                    l += 0.5 * (e_log_lam - (2.0 * std::f64::consts::PI).ln() - e_quad);
                }
                logs[k] = l;
            }
            let mx = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let z: f64 = logs.iter().map(|l| (l - mx).exp()).sum();
            for k in 0..t {
                let r = (logs[k] - mx).exp() / z;
                change = change.max((r - resp[i][k]).abs());
                resp[i][k] = r;
            }
        }
        if change < 1e-9 {
            break;
        }
    }
    resp.iter()
        .map(|r| r.iter().enumerate().fold((0, f64::NEG_INFINITY), |a, (k, &v)| if v > a.1 { (k, v) } else { a }).0)
        .collect()
}

/// Partitions feature rows with a Dirichlet-process mixture. Cluster means
/// are the plain averages of their member rows.
pub fn cluster_rows(features: &[Vec<f64>], cfg: &ClusterConfig) -> Clustering {
    if features.is_empty() {
        return Clustering { assignment: Vec::new(), clusters: Vec::new() };
    }
    let mut z = dp_means(features, cfg.dp_means_penalty(), cfg.seed, cfg.max_iter);
    if cfg.method == ClusterMethod::Variational {
        z = variational(features, &z, cfg);
    }
    let means = recenter(features, &mut z);
    let mut clusters: Vec<Cluster> = means
        .into_iter()
        .enumerate()
        .map(|(k, mean)| Cluster { members: (0..z.len()).filter(|&i| z[i] == k).collect(), mean })
        .collect();
    clusters.sort_by(|a, b| b.size().cmp(&a.size()).then(a.members[0].cmp(&b.members[0])));
    let mut assignment = vec![0; features.len()];
    for (k, c) in clusters.iter().enumerate() {
        for &i in &c.members {
            assignment[i] = k;
        }
    }
    Clustering { assignment, clusters }
}
