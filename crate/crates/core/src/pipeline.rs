//! End-to-end run: robot → trajectory → IMU data → pose maps → dependency
//! matrix → (completion / correction) → out-tree, with metrics against the
//! ground truth.

use std::collections::BTreeMap;
use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chain_sim::{add_noise, builtin_robot, gen_trajectory, simulate, write_jsonl, NoiseModel, RobotSpec, TrajectoryMode, TrajectorySample};
use crate::completion::complete;
use crate::correction::{correct_partial, trellis_correct, Correction, TrellisConfig};
use crate::dependency_extract::{extract_from_features, sensor_features, sensor_features_at, Extraction, ExtractConfig, OracleSensor};
use crate::error::{Error, Result};
use crate::hetero_tree::{check_conditions, matrix_to_tree, tree_to_matrix, ConditionReport, DependencyMatrix, HeteroOutTree};
use crate::pose_net::{sensor_dataset, train, Optimizer, PoseNet, TrainConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum RobotSource {
    Builtin {
        name: String,
        #[serde(default = "default_sensors_per_link")]
        sensors_per_link: usize,
    },
    File {
        path: PathBuf,
    },
}

fn default_sensors_per_link() -> usize {
    2
}

impl RobotSource {
    pub fn load(&self) -> Result<RobotSpec> {
        match self {
            RobotSource::Builtin { name, sensors_per_link } => builtin_robot(name, *sensors_per_link),
            RobotSource::File { path } => {
                let text = fs::read_to_string(path)
                    .map_err(|e| Error::Schema(format!("robot spec {}: {e}", path.display())))?;
                RobotSpec::from_json(&text)
            }
        }
    }

    pub fn name(&self) -> String {
        match self {
            RobotSource::Builtin { name, .. } => name.clone(),
            RobotSource::File { path } => path.file_stem().map_or_else(|| "robot".into(), |s| s.to_string_lossy().into_owned()),
        }
    }
}

/// Where the pose maps come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PipelineMode {
    /// One network per sensor trained on simulated IMU data.
    #[default]
    Learned,
    /// Analytic forward kinematics of the ground-truth robot.
    OracleFk,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PoseNetConfig {
    pub widths: Vec<usize>,
    pub train: TrainConfig,
}

/// Pipeline defaults are smaller and faster than the bare [`TrainConfig`]:
/// three hidden layers of 32, Adam at 3e-3 for 40 epochs, and a rotation
/// weight of 1e4 (about 1/ts²) so both loss terms have similar scale.
impl Default for PoseNetConfig {
    fn default() -> Self {
        Self {
            widths: vec![32; 3],
            train: TrainConfig {
                learning_rate: 3e-3,
                epochs: 40,
                rotation_weight: 1e4,
                optimizer: Optimizer::Adam { beta1: 0.9, beta2: 0.999, eps: 1e-8 },
                ..TrainConfig::default()
            },
        }
    }
}

/// Everything needed to reproduce one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentManifest {
    pub robot: RobotSource,
    #[serde(default)]
    pub trajectory: TrajectoryMode,
    #[serde(default = "default_duration")]
    pub duration: f64,
    #[serde(default = "default_rate")]
    pub rate: f64,
    /// Seed for measurement noise; see [`ExperimentManifest::reseed`] for
    /// the other seeds.
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub noise: NoiseModel,
    #[serde(default = "default_true")]
    pub gravity: bool,
    #[serde(default)]
    pub pose_net: PoseNetConfig,
    #[serde(default)]
    pub extraction: ExtractConfig,
    #[serde(default)]
    pub correction: TrellisConfig,
    #[serde(default)]
    pub mode: PipelineMode,
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
    /// Worker threads; `None` uses all cores.
    #[serde(default)]
    pub workers: Option<usize>,
}

fn default_duration() -> f64 {
    60.0
}

fn default_rate() -> f64 {
    100.0
}

fn default_true() -> bool {
    true
}

impl ExperimentManifest {
    /// Defaults for a built-in robot.
    pub fn builtin(name: &str, mode: PipelineMode) -> Self {
        Self {
            robot: RobotSource::Builtin { name: name.to_string(), sensors_per_link: default_sensors_per_link() },
            trajectory: TrajectoryMode::default(),
            duration: default_duration(),
            rate: default_rate(),
            seed: 0,
            noise: NoiseModel::default(),
            gravity: true,
            pose_net: PoseNetConfig::default(),
            extraction: ExtractConfig::default(),
            correction: TrellisConfig::default(),
            mode,
            out_dir: None,
            workers: None,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Schema(format!("manifest line {} column {}: {e}", e.line(), e.column())))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::Schema(format!("manifest {}: {e}", path.display())))?;
        let mut m = Self::from_json(&text)?;
        // Relative robot paths are taken from the manifest's directory.
        if let RobotSource::File { path: p } = &mut m.robot {
            if p.is_relative() {
                if let Some(dir) = path.parent() {
                    *p = dir.join(&*p);
                }
            }
        }
        Ok(m)
    }

    /// Sets every seed (noise, trajectory, network init and shuffling,
    /// extraction sampling and clustering) from one value.
    pub fn reseed(&mut self, seed: u64) {
        self.seed = seed;
        if let TrajectoryMode::SmoothRandom { seed: s, .. } = &mut self.trajectory {
            *s = seed;
        }
        self.pose_net.train.seed = seed;
        self.extraction.seed = seed;
        self.extraction.cluster.seed = seed;
    }

    pub fn set_gravity(&mut self, on: bool) {
        self.gravity = on;
        self.pose_net.train.gravity = on;
    }
}

/// Exact match and Hamming distance between a recovered and a true matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Comparison {
    pub exact_match: bool,
    /// `None` when rows cannot be paired (different row counts).
    pub hamming: Option<usize>,
}

/// Compares matrices by label. Rows of `recovered` whose labels do not occur
/// in `truth` (links added by completion) are paired with the leftover true
/// rows, identical bit patterns first and label order after that.
pub fn compare_matrices(recovered: &DependencyMatrix, truth: &DependencyMatrix) -> Comparison {
    let none = Comparison { exact_match: false, hamming: None };
    if recovered.nrows() != truth.nrows() || recovered.ncols() != truth.ncols() {
        return none;
    }
    let Some(cols) = recovered
        .col_labels()
        .iter()
        .map(|c| truth.col_index(c))
        .collect::<Option<Vec<usize>>>()
    else {
        return none;
    };
    let aligned = |i: usize| -> Vec<bool> { cols.iter().map(|&c| truth.get(i, c)).collect() };
    let mut free_truth: Vec<usize> = (0..truth.nrows()).filter(|&i| recovered.row_index(&truth.row_labels()[i]).is_none()).collect();
    let mut extra: Vec<usize> = Vec::new();
    let mut dist = 0;
    for i in 0..recovered.nrows() {
        match truth.row_index(&recovered.row_labels()[i]) {
            Some(t) => dist += diff(recovered.row(i), &aligned(t)),
            None => extra.push(i),
        }
    }
    extra.retain(|&i| match free_truth.iter().position(|&t| aligned(t) == recovered.row(i)) {
        Some(k) => {
            free_truth.remove(k);
            false
        }
        None => true,
    });
    for (i, t) in extra.into_iter().zip(free_truth) {
        dist += diff(recovered.row(i), &aligned(t));
    }
    Comparison { exact_match: dist == 0, hamming: Some(dist) }
}

fn diff(a: &[bool], b: &[bool]) -> usize {
    a.iter().zip(b).filter(|(x, y)| x != y).count()
}

/// Share of sensors that sit in a cluster whose majority link is their own.
pub fn cluster_purity(ex: &Extraction, spec: &RobotSpec) -> f64 {
    let n = ex.sensors.len();
    if n == 0 {
        return 1.0;
    }
    let majority: usize = ex
        .clustering
        .clusters
        .iter()
        .map(|c| {
            let mut count: BTreeMap<&str, usize> = BTreeMap::new();
            for &i in &c.members {
                let link = spec.sensor(&ex.sensors[i]).map_or("?", |s| s.node.as_str());
                *count.entry(link).or_default() += 1;
            }
            count.values().copied().max().unwrap_or(0)
        })
        .sum();
    majority as f64 / n as f64
}

/// What the structural stage did to the extracted matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepairSummary {
    pub conditions: ConditionReport,
    pub completed: bool,
    pub corrected: bool,
    pub correction_distance: Option<usize>,
    pub candidates: usize,
    pub added_rows: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorTraining {
    pub sensor: String,
    pub final_loss: f64,
    pub accel: f64,
    pub rotation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub robot: String,
    pub mode: PipelineMode,
    pub manifest: ExperimentManifest,
    pub training: Vec<SensorTraining>,
    pub delta: f64,
    pub extracted: DependencyMatrix,
    pub repair: RepairSummary,
    pub matrix: DependencyMatrix,
    pub tree: HeteroOutTree,
    pub truth: DependencyMatrix,
    pub comparison: Comparison,
    pub cluster_purity: f64,
    /// Wall-clock seconds per stage.
    pub timings: BTreeMap<String, f64>,
}

/// Labels for rows added by completion, chosen not to clash with `d`.
pub fn fresh_row_labels(d: &DependencyMatrix, count: usize) -> Vec<String> {
    let mut out = Vec::with_capacity(count);
    let mut k = 1;
    while out.len() < count {
        let l = format!("hidden{k}");
        if d.row_index(&l).is_none() {
            out.push(l);
        }
        k += 1;
    }
    out
}

/// Mean raw feature of the sensors behind each row, for ranking tied
/// correction candidates.
fn row_feature_means(ex: &Extraction) -> BTreeMap<String, Vec<f64>> {
    let index: BTreeMap<&str, usize> = ex.sensors.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
    ex.matrix
        .merged_groups()
        .iter()
        .filter_map(|(label, sensors)| {
            let rows: Vec<&Vec<f64>> = sensors.iter().filter_map(|s| index.get(s.as_str()).map(|&i| &ex.features_raw[i])).collect();
            let first = rows.first()?;
            let mut mean = vec![0.0; first.len()];
            for r in &rows {
                mean.iter_mut().zip(r.iter()).for_each(|(m, v)| *m += v / rows.len() as f64);
            }
            Some((label.clone(), mean))
        })
        .collect()
}

/// Candidate whose 1s best follow the raw features of the observed rows:
/// the score sums `feature` over dropped 1s and `1 − feature`... expressed
/// as `Σ |bit − feature|`. Rows without features contribute nothing.
fn pick_candidate(c: &Correction, means: &BTreeMap<String, Vec<f64>>) -> DependencyMatrix {
    let score = |m: &DependencyMatrix| -> f64 {
        (0..m.nrows())
            .filter_map(|i| means.get(&m.row_labels()[i]).map(|f| (i, f)))
            .map(|(i, f)| m.row(i).iter().zip(f).map(|(&b, &v)| (if b { 1.0 } else { 0.0 } - v).abs()).sum::<f64>())
            .sum()
    };
    c.candidates
        .iter()
        .map(|m| (score(m), m))
        .fold(None::<(f64, &DependencyMatrix)>, |best, (s, m)| match best {
            Some((bs, _)) if bs <= s => best,
            _ => Some((s, m)),
        })
        .map(|(_, m)| m.clone())
        .expect("correction returns at least one candidate")
}

/// Completion when rows are missing, correction when the matrix is
/// contradictory. Returns the repaired square matrix.
pub fn repair(ex: &Extraction, cfg: &TrellisConfig, seed: u64) -> Result<(DependencyMatrix, RepairSummary)> {
    let d = &ex.matrix;
    let conditions = check_conditions(d);
    let missing = d.ncols().saturating_sub(d.nrows());
    let added_rows = fresh_row_labels(d, missing);
    let mut summary =
        RepairSummary { conditions, completed: false, corrected: false, correction_distance: None, candidates: 0, added_rows: added_rows.clone() };
    if missing == 0 && conditions.satisfies_p() {
        return Ok((d.clone(), summary));
    }
    if missing > 0 && conditions.satisfies_p_minus() {
        if let Ok(full) = complete(d, &added_rows, seed) {
            summary.completed = true;
            return Ok((full, summary));
        }
    }
    let corr = if missing > 0 { correct_partial(d, &added_rows, cfg)? } else { trellis_correct(d, cfg)? };
    summary.corrected = true;
    summary.correction_distance = Some(corr.distance);
    summary.candidates = corr.candidates.len();
    Ok((pick_candidate(&corr, &row_feature_means(ex)), summary))
}

fn timed<T>(timings: &mut BTreeMap<String, f64>, stage: &'static str, f: impl FnOnce() -> Result<T>) -> Result<T> {
    let t0 = Instant::now();
    let out = f().map_err(|e| e.at_stage(stage));
    timings.insert(stage.to_string(), t0.elapsed().as_secs_f64());
    out
}

/// Simulated, noisy IMU data for `spec` under the manifest's trajectory.
pub fn simulate_data(spec: &RobotSpec, m: &ExperimentManifest) -> Result<Vec<TrajectorySample>> {
    let traj = gen_trajectory(spec, &m.trajectory, m.duration, m.rate)?;
    let clean = simulate(spec, &traj, m.rate, m.gravity)?;
    add_noise(&clean, m.noise, m.seed)
}

/// Seed for the network of sensor `k`.
pub fn net_seed(base: u64, k: usize) -> u64 {
    base.wrapping_add((k as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

/// Trains one network per sensor, in parallel.
pub fn train_sensors(
    spec: &RobotSpec,
    data: &[TrajectorySample],
    cfg: &PoseNetConfig,
    rate: f64,
) -> Result<Vec<(String, PoseNet, SensorTraining)>> {
    let tc = TrainConfig { ts: 1.0 / rate, ..cfg.train.clone() };
    spec.sensors()
        .par_iter()
        .enumerate()
        .map(|(k, s)| {
            let ds = sensor_dataset(data, &s.id)?;
            let init = PoseNet::new(spec.n_joints(), &cfg.widths, net_seed(tc.seed, k))?;
            let (net, rep) = train(&init, &ds, &tc, &s.id)?;
            let t = SensorTraining {
                sensor: s.id.clone(),
                final_loss: rep.final_loss.total,
                accel: rep.final_loss.accel,
                rotation: rep.final_loss.rotation,
            };
            Ok((s.id.clone(), net, t))
        })
        .collect()
}

/// Configurations for the learned Jacobian statistic: evenly spaced
/// samples of the training trajectory, where the networks were fitted.
pub fn trajectory_configurations(data: &[TrajectorySample], count: usize) -> Vec<Vec<f64>> {
    if data.is_empty() || count == 0 {
        return Vec::new();
    }
    let step = (data.len() as f64 / count as f64).max(1.0);
    (0..count.min(data.len())).map(|k| data[(k as f64 * step) as usize].theta.clone()).collect()
}

fn write_json<T: Serialize>(path: &Path, v: &T) -> Result<()> {
    let f = fs::File::create(path)?;
    serde_json::to_writer_pretty(BufWriter::new(f), v)?;
    Ok(())
}

fn run_inner(m: &ExperimentManifest) -> Result<RunReport> {
    let mut timings = BTreeMap::new();
    let spec = timed(&mut timings, "generate", || m.robot.load())?;
    let cols = spec.joint_labels();
    let sensors: Vec<String> = spec.sensors().iter().map(|s| s.id.clone()).collect();
    if let Some(dir) = &m.out_dir {
        fs::create_dir_all(dir).map_err(|e| Error::from(e).at_stage("output"))?;
        fs::write(dir.join("robot.json"), spec.to_json()?).map_err(|e| Error::from(e).at_stage("output"))?;
    }

    let mut training = Vec::new();
    let features = match m.mode {
        PipelineMode::OracleFk => timed(&mut timings, "oracle", || {
            let maps: Vec<(String, OracleSensor)> =
                sensors.iter().map(|id| (id.clone(), OracleSensor { spec: &spec, id })).collect();
            sensor_features(&maps, &m.extraction)
        })?,
        PipelineMode::Learned => {
            let data = timed(&mut timings, "simulate", || simulate_data(&spec, m))?;
            if let Some(dir) = &m.out_dir {
                let f = fs::File::create(dir.join("trajectory.jsonl")).map_err(|e| Error::from(e).at_stage("output"))?;
                write_jsonl(BufWriter::new(f), &data).map_err(|e| e.at_stage("output"))?;
            }
            let nets = timed(&mut timings, "train", || train_sensors(&spec, &data, &m.pose_net, m.rate))?;
            if let Some(dir) = &m.out_dir {
                let nd = dir.join("nets");
                fs::create_dir_all(&nd).map_err(|e| Error::from(e).at_stage("output"))?;
                for (id, net, _) in &nets {
                    write_json(&nd.join(format!("{}.json", id.replace('/', "_"))), net).map_err(|e| e.at_stage("output"))?;
                }
            }
            training = nets.iter().map(|(_, _, t)| t.clone()).collect();
            let maps: Vec<(String, PoseNet)> = nets.into_iter().map(|(id, net, _)| (id, net)).collect();
            let thetas = trajectory_configurations(&data, m.extraction.samples);
            timed(&mut timings, "features", || sensor_features_at(&maps, &thetas, m.extraction.aggregate))?
        }
    };

    let ex = timed(&mut timings, "extract", || extract_from_features(&sensors, features, &cols, &m.extraction))?;
    let (matrix, repair_summary) = timed(&mut timings, "repair", || repair(&ex, &m.correction, m.seed))?;
    let tree = timed(&mut timings, "translate", || matrix_to_tree(&matrix))?;
    let truth = tree_to_matrix(spec.topology());
    let comparison = compare_matrices(&matrix, &truth);
    let report = RunReport {
        robot: m.robot.name(),
        mode: m.mode,
        manifest: m.clone(),
        training,
        delta: ex.delta,
        extracted: ex.matrix.clone(),
        repair: repair_summary,
        matrix,
        tree,
        truth,
        comparison,
        cluster_purity: cluster_purity(&ex, &spec),
        timings,
    };
    if let Some(dir) = &m.out_dir {
        let out = || -> Result<()> {
            write_json(&dir.join("extraction.json"), &ex)?;
            write_json(&dir.join("matrix.json"), &report.matrix)?;
            write_json(&dir.join("tree.json"), &report.tree)?;
            fs::write(dir.join("tree.dot"), report.tree.to_dot())?;
            write_json(&dir.join("report.json"), &report)
        };
        out().map_err(|e| e.at_stage("output"))?;
    }
    Ok(report)
}

/// Runs every stage of the manifest on a pool of `workers` threads.
pub fn run_pipeline(m: &ExperimentManifest) -> Result<RunReport> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(w) = m.workers {
        builder = builder.num_threads(w.max(1));
    }
    let pool = builder.build().map_err(|e| Error::Internal(format!("thread pool: {e}")))?;
    pool.install(|| run_inner(m))
}
