use std::f64::consts::TAU;
use std::io::{BufRead, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::kinematics::{synthesize_imu, SensorReading};
use super::spec::RobotSpec;

/// Joint state at one instant plus the IMU readings taken there.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySample {
    pub t: f64,
    pub theta: Vec<f64>,
    pub theta_dot: Vec<f64>,
    pub theta_ddot: Vec<f64>,
    #[serde(default)]
    pub sensors: Vec<SensorReading>,
}

impl TrajectorySample {
    pub fn reading(&self, id: &str) -> Option<&SensorReading> {
        self.sensors.iter().find(|s| s.id == id)
    }
}

/// Joint velocity `A·sin(2πk·t + y)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sinusoid {
    pub amplitude: f64,
    pub freq: f64,
    pub phase: f64,
}

/// Velocity profiles of the six arm joints used for the hardware runs.
pub const ARM_SINUSOIDS: [Sinusoid; 6] = [
    Sinusoid { amplitude: 0.2, freq: 0.1, phase: 0.1 },
    Sinusoid { amplitude: 0.2, freq: 0.13, phase: 0.2 },
    Sinusoid { amplitude: 0.2, freq: 0.15, phase: 0.3 },
    Sinusoid { amplitude: 0.2, freq: 0.17, phase: 0.4 },
    Sinusoid { amplitude: 0.2, freq: 0.19, phase: 0.5 },
    Sinusoid { amplitude: 0.2, freq: 0.21, phase: 0.6 },
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TrajectoryMode {
    /// One velocity sinusoid per joint; θ starts at zero. An empty list
    /// means the arm table, cycled over the joints.
    Sinusoidal {
        #[serde(default)]
        params: Vec<Sinusoid>,
    },
    /// Each joint angle is a sum of `components` random sinusoids with
    /// frequencies up to `bandwidth` Hz and total amplitude about `amplitude`.
    SmoothRandom { seed: u64, bandwidth: f64, amplitude: f64, components: usize },
}

impl Default for TrajectoryMode {
    fn default() -> Self {
        TrajectoryMode::SmoothRandom { seed: 0, bandwidth: 0.5, amplitude: 1.2, components: 4 }
    }
}

/// Angle, rate and acceleration of one joint as a sum of sine terms
/// `c + Σ a sin(ω t + φ)`.
#[derive(Debug, Clone)]
struct JointSignal {
    offset: f64,
    terms: Vec<(f64, f64, f64)>,
}

impl JointSignal {
    fn eval(&self, t: f64) -> (f64, f64, f64) {
        let mut out = (self.offset, 0.0, 0.0);
        for &(a, w, p) in &self.terms {
            let (s, c) = (w * t + p).sin_cos();
            out.0 += a * s;
            out.1 += a * w * c;
            out.2 -= a * w * w * s;
        }
        out
    }
}

fn signals(n: usize, mode: &TrajectoryMode) -> Result<Vec<JointSignal>> {
    match mode {
        TrajectoryMode::Sinusoidal { params } => {
            let table: &[Sinusoid] = if params.is_empty() { &ARM_SINUSOIDS } else { params };
            (0..n)
                .map(|j| {
                    let Sinusoid { amplitude, freq, phase } = table[j % table.len()];
                    if amplitude == 0.0 {
                        return Ok(JointSignal { offset: 0.0, terms: vec![] });
                    }
                    if !(freq > 0.0) {
                        return Err(Error::InvalidArgument("sinusoid frequency must be positive".into()));
                    }
                    // θ = A/(2πk)·(cos y − cos(2πk t + y)), written as a sine.
                    let w = TAU * freq;
                    let a = amplitude / w;
                    Ok(JointSignal { offset: a * phase.cos(), terms: vec![(a, w, phase - std::f64::consts::FRAC_PI_2)] })
                })
                .collect()
        }
        TrajectoryMode::SmoothRandom { seed, bandwidth, amplitude, components } => {
            if !(*bandwidth > 0.0) || *components == 0 {
                return Err(Error::InvalidArgument("smooth random mode needs positive bandwidth and components".into()));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            let scale = amplitude / (*components as f64).sqrt();
            Ok((0..n)
                .map(|_| JointSignal {
                    offset: 0.0,
                    terms: (0..*components)
                        .map(|_| {
                            let f = bandwidth * rng.random_range(0.1..1.0);
                            let a = scale * rng.random_range(0.5..1.0);
                            (a, TAU * f, rng.random_range(0.0..TAU))
                        })
                        .collect(),
                })
                .collect())
        }
    }
}

/// Joint trajectory sampled at `rate` Hz for `duration` seconds. Angles,
/// rates and accelerations are exact derivatives of one another. Readings
/// are left empty; see [`simulate`].
pub fn gen_trajectory(spec: &RobotSpec, mode: &TrajectoryMode, duration: f64, rate: f64) -> Result<Vec<TrajectorySample>> {
    if !(duration > 0.0) || !(rate > 0.0) {
        return Err(Error::InvalidArgument("duration and rate must be positive".into()));
    }
    let sig = signals(spec.n_joints(), mode)?;
    let count = (duration * rate).round() as usize;
    Ok((0..count)
        .map(|k| {
            let t = k as f64 / rate;
            let vals: Vec<(f64, f64, f64)> = sig.iter().map(|s| s.eval(t)).collect();
            TrajectorySample {
                t,
                theta: vals.iter().map(|v| v.0).collect(),
                theta_dot: vals.iter().map(|v| v.1).collect(),
                theta_ddot: vals.iter().map(|v| v.2).collect(),
                sensors: Vec::new(),
            }
        })
        .collect())
}

/// Fills in the noiseless IMU readings of every sample; `ts = 1/rate`.
pub fn simulate(spec: &RobotSpec, samples: &[TrajectorySample], rate: f64, gravity: bool) -> Result<Vec<TrajectorySample>> {
    samples
        .par_iter()
        .map(|s| {
            let sensors = synthesize_imu(spec, &s.theta, &s.theta_dot, &s.theta_ddot, 1.0 / rate, gravity)?;
            Ok(TrajectorySample { sensors, ..s.clone() })
        })
        .collect()
}

/// Additive white Gaussian measurement noise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub sigma_alpha: f64,
    pub sigma_beta: f64,
}

impl Default for NoiseModel {
    fn default() -> Self {
        Self { sigma_alpha: 0.05, sigma_beta: 0.01 }
    }
}

impl NoiseModel {
    pub fn none() -> Self {
        Self { sigma_alpha: 0.0, sigma_beta: 0.0 }
    }
}

/// Perturbs every reading; deterministic per seed. A zero sigma leaves the
/// corresponding channel untouched.
pub fn add_noise(samples: &[TrajectorySample], model: NoiseModel, seed: u64) -> Result<Vec<TrajectorySample>> {
    if !(model.sigma_alpha >= 0.0) || !(model.sigma_beta >= 0.0) {
        return Err(Error::InvalidArgument("noise sigmas must be non-negative".into()));
    }
    let na = Normal::new(0.0, model.sigma_alpha).expect("valid sigma");
    let nb = Normal::new(0.0, model.sigma_beta).expect("valid sigma");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = samples.to_vec();
    for s in &mut out {
        for r in &mut s.sensors {
            if model.sigma_alpha > 0.0 {
                r.alpha.iter_mut().for_each(|v| *v += na.sample(&mut rng));
            }
            if model.sigma_beta > 0.0 {
                r.beta.iter_mut().for_each(|v| *v += nb.sample(&mut rng));
            }
        }
    }
    Ok(out)
}

pub fn write_jsonl<W: Write>(mut w: W, samples: &[TrajectorySample]) -> Result<()> {
    for s in samples {
        serde_json::to_writer(&mut w, s)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_jsonl<R: BufRead>(r: R) -> Result<Vec<TrajectorySample>> {
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let s: TrajectorySample =
            serde_json::from_str(&line).map_err(|e| Error::Schema(format!("trajectory line {}: {e}", i + 1)))?;
        out.push(s);
    }
    Ok(out)
}
