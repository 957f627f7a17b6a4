use std::fs;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use bodyschema::chain_sim::{read_jsonl, write_jsonl, RobotSpec, TrajectorySample, BUILTIN_ROBOTS};
use bodyschema::completion::complete;
use bodyschema::correction::{trellis_correct, TrellisConfig};
use bodyschema::dependency_extract::{extract_from_features, sensor_features, sensor_features_at, DeltaRule, Extraction, OracleSensor};
use bodyschema::hetero_tree::{check_conditions, matrix_to_tree, tree_to_matrix, DependencyMatrix, HeteroOutTree};
use bodyschema::pipeline::{
    compare_matrices, fresh_row_labels, repair, run_pipeline, simulate_data, train_sensors, trajectory_configurations,
    ExperimentManifest, PipelineMode, RobotSource,
};
use bodyschema::pose_net::PoseNet;
use bodyschema::{Error, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

#[derive(Parser)]
#[command(name = "bodyschema", version, about = "Infer a robot's body topology from IMU and joint encoder data")]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a robot spec (built-in or from the manifest) as JSON.
    Generate(Common),
    /// Simulate noisy IMU readings along the manifest trajectory (JSONL).
    Simulate(Common),
    /// Train one pose network per sensor; writes `<out>/<sensor>.json`.
    Train {
        #[command(flatten)]
        common: Common,
        /// Trajectory JSONL from `simulate`.
        #[arg(long)]
        data: PathBuf,
    },
    /// Dependency matrix from trained networks (or the true kinematics
    /// with `--mode oracle-fk`). Writes the full extraction record.
    Extract {
        #[command(flatten)]
        common: Common,
        /// Trajectory JSONL, learned mode only.
        #[arg(long)]
        data: Option<PathBuf>,
        /// Directory written by `train`, learned mode only.
        #[arg(long)]
        nets: Option<PathBuf>,
    },
    /// Complete or correct an extraction exactly as `run` does.
    Repair {
        #[command(flatten)]
        common: Common,
        /// Extraction JSON from `extract`.
        input: PathBuf,
    },
    /// Translate a matrix into an out-tree; prints DOT unless `--out` is a directory.
    ToTree {
        input: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fill missing rows of a partial matrix.
    Complete {
        input: PathBuf,
        /// Labels for the new rows, comma separated (default hidden1, hidden2, ...).
        #[arg(long, value_delimiter = ',')]
        labels: Vec<String>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Trellis correction of a square matrix; writes every candidate.
    Correct {
        input: PathBuf,
        /// Beam width; default is unbounded up to 6 columns and 64 beyond.
        #[arg(long)]
        beam_cap: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Hamming distance and exact match between two matrices or trees.
    Compare { a: PathBuf, b: PathBuf },
    /// Every stage end to end.
    Run(Common),
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Learned,
    OracleFk,
}

#[derive(Clone, Copy, ValueEnum)]
enum Switch {
    On,
    Off,
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// Built-in robot name or robot spec JSON; overrides the manifest.
    #[arg(long)]
    robot: Option<String>,
    #[arg(long, value_enum)]
    mode: Option<Mode>,
    /// Sets every seed in the manifest.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    workers: Option<usize>,
    /// Fixed threshold instead of the grid search.
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long, value_enum)]
    gravity: Option<Switch>,
}

impl Common {
    fn manifest(&self) -> Result<ExperimentManifest> {
        let mut m = match &self.manifest {
            Some(p) => ExperimentManifest::load(p)?,
            None => ExperimentManifest::builtin("robot1", PipelineMode::default()),
        };
        if let Some(r) = &self.robot {
            m.robot = if BUILTIN_ROBOTS.contains(&r.as_str()) {
                let sensors_per_link = match &m.robot {
                    RobotSource::Builtin { sensors_per_link, .. } => *sensors_per_link,
                    RobotSource::File { .. } => 2,
                };
                RobotSource::Builtin { name: r.clone(), sensors_per_link }
            } else {
                RobotSource::File { path: r.into() }
            };
        }
        if let Some(mode) = self.mode {
            m.mode = match mode {
                Mode::Learned => PipelineMode::Learned,
                Mode::OracleFk => PipelineMode::OracleFk,
            };
        }
        if let Some(s) = self.seed {
            m.reseed(s);
        }
        if let Some(d) = self.delta {
            m.extraction.delta = DeltaRule::Fixed { delta: d };
        }
        if let Some(g) = self.gravity {
            m.set_gravity(matches!(g, Switch::On));
        }
        if self.workers.is_some() {
            m.workers = self.workers;
        }
        if self.out.is_some() {
            m.out_dir = self.out.clone();
        }
        Ok(m)
    }

    fn pool(&self) -> Result<rayon::ThreadPool> {
        let mut b = rayon::ThreadPoolBuilder::new();
        if let Some(w) = self.workers {
            b = b.num_threads(w.max(1));
        }
        b.build().map_err(|e| Error::Internal(format!("thread pool: {e}")))
    }
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::Schema(format!("{}: {e}", path.display())))
}

fn parse<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = read_text(path)?;
    serde_json::from_str(&text)
        .map_err(|e| Error::Schema(format!("{} line {} column {}: {e}", path.display(), e.line(), e.column())))
}

/// A matrix file, or the matrix inside an extraction record.
fn read_matrix(path: &Path) -> Result<DependencyMatrix> {
    let text = read_text(path)?;
    if let Ok(m) = serde_json::from_str::<DependencyMatrix>(&text) {
        return Ok(m);
    }
    if let Ok(ex) = serde_json::from_str::<Extraction>(&text) {
        return Ok(ex.matrix);
    }
    parse(path)
}

/// A matrix, an extraction or a tree, as a matrix.
fn read_comparable(path: &Path) -> Result<DependencyMatrix> {
    let text = read_text(path)?;
    match serde_json::from_str::<HeteroOutTree>(&text) {
        Ok(t) => Ok(tree_to_matrix(&t)),
        Err(_) => read_matrix(path),
    }
}

fn read_data(path: &Path) -> Result<Vec<TrajectorySample>> {
    let f = fs::File::open(path).map_err(|e| Error::Schema(format!("{}: {e}", path.display())))?;
    read_jsonl(BufReader::new(f))
}

/// Writes to stdout; a closed pipe (`| head`) is not an error.
fn say(text: &str) -> Result<()> {
    match std::io::stdout().lock().write_all(text.as_bytes()) {
        Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
        r => Ok(r?),
    }
}

fn emit<T: Serialize>(out: Option<&Path>, v: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(v)?;
    match out {
        Some(p) => fs::write(p, text + "\n")?,
        None => say(&(text + "\n"))?,
    }
    Ok(())
}

fn net_file(dir: &Path, sensor: &str) -> PathBuf {
    dir.join(format!("{}.json", sensor.replace('/', "_")))
}

fn sensor_ids(spec: &RobotSpec) -> Vec<String> {
    spec.sensors().iter().map(|s| s.id.clone()).collect()
}

#[derive(Serialize)]
struct Candidate<'a> {
    distance: usize,
    matrix: &'a DependencyMatrix,
}

#[derive(Serialize)]
struct CandidateFile<'a> {
    distance: usize,
    history: &'a [usize],
    beam_cap: Option<usize>,
    truncated: bool,
    candidates: Vec<Candidate<'a>>,
}

fn generate(c: &Common) -> Result<()> {
    let spec = c.manifest()?.robot.load()?;
    let text = spec.to_json()?;
    match &c.out {
        Some(p) => fs::write(p, text + "\n")?,
        None => say(&(text + "\n"))?,
    }
    Ok(())
}

fn simulate(c: &Common) -> Result<()> {
    let m = c.manifest()?;
    let spec = m.robot.load()?;
    let data = simulate_data(&spec, &m)?;
    match &c.out {
        Some(p) => write_jsonl(BufWriter::new(fs::File::create(p)?), &data),
        None => write_jsonl(std::io::stdout().lock(), &data),
    }
}

fn train(c: &Common, data: &Path) -> Result<()> {
    let m = c.manifest()?;
    let out = c.out.as_deref().ok_or_else(|| Error::InvalidArgument("train needs --out DIR".into()))?;
    let spec = m.robot.load()?;
    let data = read_data(data)?;
    let nets = c.pool()?.install(|| train_sensors(&spec, &data, &m.pose_net, m.rate))?;
    fs::create_dir_all(out)?;
    for (id, net, _) in &nets {
        emit(Some(&net_file(out, id)), net)?;
    }
    let training: Vec<_> = nets.iter().map(|(_, _, t)| t).collect();
    emit(Some(&out.join("training.json")), &training)
}

fn extract(c: &Common, data: Option<&Path>, nets: Option<&Path>) -> Result<()> {
    let m = c.manifest()?;
    let spec = m.robot.load()?;
    let sensors = sensor_ids(&spec);
    let features = c.pool()?.install(|| match m.mode {
        PipelineMode::OracleFk => {
            let maps: Vec<(String, OracleSensor)> = sensors.iter().map(|id| (id.clone(), OracleSensor { spec: &spec, id })).collect();
            sensor_features(&maps, &m.extraction)
        }
        PipelineMode::Learned => {
            let (Some(data), Some(dir)) = (data, nets) else {
                return Err(Error::InvalidArgument("learned mode needs --data and --nets".into()));
            };
            let maps = sensors
                .iter()
                .map(|id| Ok((id.clone(), parse::<PoseNet>(&net_file(dir, id))?)))
                .collect::<Result<Vec<_>>>()?;
            let thetas = trajectory_configurations(&read_data(data)?, m.extraction.samples);
            sensor_features_at(&maps, &thetas, m.extraction.aggregate)
        }
    })?;
    let ex = extract_from_features(&sensors, features, &spec.joint_labels(), &m.extraction)?;
    emit(c.out.as_deref(), &ex)
}

fn repair_cmd(c: &Common, input: &Path) -> Result<()> {
    let m = c.manifest()?;
    let ex: Extraction = parse(input)?;
    let (matrix, summary) = repair(&ex, &m.correction, m.seed)?;
    eprintln!("{}", serde_json::to_string(&summary)?);
    emit(c.out.as_deref(), &matrix)
}

fn to_tree(input: &Path, out: Option<&Path>) -> Result<()> {
    let t = matrix_to_tree(&read_matrix(input)?)?;
    match out {
        Some(dir) => {
            fs::create_dir_all(dir)?;
            fs::write(dir.join("tree.dot"), t.to_dot())?;
            emit(Some(&dir.join("tree.json")), &t)
        }
        None => {
            say(&t.to_dot())
        }
    }
}

fn complete_cmd(input: &Path, labels: &[String], seed: u64, out: Option<&Path>) -> Result<()> {
    let d = read_matrix(input)?;
    let labels =
        if labels.is_empty() { fresh_row_labels(&d, d.ncols().saturating_sub(d.nrows())) } else { labels.to_vec() };
    emit(out, &complete(&d, &labels, seed)?)
}

fn correct(input: &Path, beam_cap: Option<usize>, out: Option<&Path>) -> Result<()> {
    let d = read_matrix(input)?;
    let cfg = TrellisConfig { beam_cap };
    let corr = trellis_correct(&d, &cfg)?;
    for m in &corr.candidates {
        let r = check_conditions(m);
        if !r.satisfies_p() {
            return Err(Error::Internal(format!("correction candidate fails: {r}")));
        }
    }
    let file = CandidateFile {
        distance: corr.distance,
        history: &corr.history,
        beam_cap: corr.beam_cap,
        truncated: corr.truncated,
        candidates: corr.candidates.iter().map(|m| Candidate { distance: corr.distance, matrix: m }).collect(),
    };
    emit(out, &file)
}

fn compare(a: &Path, b: &Path) -> Result<()> {
    let c = compare_matrices(&read_comparable(a)?, &read_comparable(b)?);
    let hamming = c.hamming.map_or_else(|| "n/a (shapes or labels differ)".to_string(), |h| h.to_string());
    say(&format!("hamming {hamming}\nmatch {}\n", c.exact_match))
}

fn run(c: &Common) -> Result<()> {
    let m = c.manifest()?;
    let r = run_pipeline(&m)?;
    let hamming = r.comparison.hamming.map_or_else(|| "n/a".to_string(), |h| h.to_string());
    say(&format!(
        "robot {} ({:?})\ndelta {:.4}\nrepair completed={} corrected={}\nmatch {}\nhamming {hamming}\ncluster purity {:.3}\n{}",
        r.robot,
        r.mode,
        r.delta,
        r.repair.completed,
        r.repair.corrected,
        r.comparison.exact_match,
        r.cluster_purity,
        r.tree.to_dot()
    ))
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.cmd {
        Command::Generate(c) => generate(&c),
        Command::Simulate(c) => simulate(&c),
        Command::Train { common, data } => train(&common, &data),
        Command::Extract { common, data, nets } => extract(&common, data.as_deref(), nets.as_deref()),
        Command::Repair { common, input } => repair_cmd(&common, &input),
        Command::ToTree { input, out } => to_tree(&input, out.as_deref()),
        Command::Complete { input, labels, seed, out } => complete_cmd(&input, &labels, seed, out.as_deref()),
        Command::Correct { input, beam_cap, out } => correct(&input, beam_cap, out.as_deref()),
        Command::Compare { a, b } => compare(&a, &b),
        Command::Run(c) => run(&c),
    }
}

fn exit_code(e: &Error) -> u8 {
    match e.root() {
        Error::Schema(_) | Error::Json(_) => 2,
        Error::NotATree(_) | Error::NotCompletable(_) => 3,
        Error::Diverged { .. } => 4,
        _ => 1,
    }
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_follow_root_error() {
        let schema = Error::Schema("x".into()).at_stage("generate");
        assert_eq!(exit_code(&schema), 2);
        assert_eq!(exit_code(&Error::Diverged { sensor: "s".into(), epoch: 3 }), 4);
        assert_eq!(exit_code(&Error::InvalidArgument("x".into())), 1);
    }

    #[test]
    fn builtin_names_are_not_paths() {
        let c = Common {
            manifest: None,
            robot: Some("robot4".into()),
            mode: Some(Mode::OracleFk),
            seed: Some(5),
            out: None,
            workers: None,
            delta: Some(0.2),
            gravity: Some(Switch::Off),
        };
        let m = c.manifest().unwrap();
        assert_eq!(m.robot, RobotSource::Builtin { name: "robot4".into(), sensors_per_link: 2 });
        assert_eq!(m.extraction.delta, DeltaRule::Fixed { delta: 0.2 });
        assert!(!m.gravity && !m.pose_net.train.gravity);
        assert_eq!(m.seed, 5);
    }
}
