use std::collections::BTreeMap;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hetero_tree::{HeteroOutTree, ROOT};
use crate::rigid_motion::{rpy_matrix, HomTransform};

/// Tolerance on joint axis length.
pub const AXIS_TOL: f64 = 1e-9;

/// Standard gravity used by the built-in robots.
pub const GRAVITY: [f64; 3] = [0.0, 0.0, -9.8];

/// Revolute joint: the child frame is `parent · offset · Rot(axis, θ)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Joint {
    pub axis: Vector3<f64>,
    pub offset: HomTransform,
}

/// One IMU: the link it is bolted to and its pose in that link's frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Sensor {
    pub id: String,
    pub node: String,
    pub mount: HomTransform,
}

/// Geometric realization of a topology.
#[derive(Debug, Clone, PartialEq)]
pub struct RobotSpec {
    topology: HeteroOutTree,
    /// Joint per edge, in edge-label order (the order of θ entries).
    joints: Vec<(String, Joint)>,
    sensors: Vec<Sensor>,
    pub gravity: Vector3<f64>,
}

impl RobotSpec {
    /// `mounts` maps node labels (the root is allowed) to mount poses.
    pub fn new(
        topology: HeteroOutTree,
        joints: BTreeMap<String, Joint>,
        mounts: BTreeMap<String, Vec<HomTransform>>,
        gravity: Vector3<f64>,
    ) -> Result<Self> {
        let edges = topology.edges();
        if joints.len() != edges.len() || !edges.iter().all(|e| joints.contains_key(*e)) {
            return Err(Error::Schema("joints must list every topology edge exactly once".into()));
        }
        for (e, j) in &joints {
            if !((j.axis.norm() - 1.0).abs() <= AXIS_TOL) {
                return Err(Error::Schema(format!("joint `{e}` axis is not a unit vector")));
            }
        }
        let mut sensors = Vec::new();
        for (node, poses) in &mounts {
            if node != topology.root() && !topology.contains(node) {
                return Err(Error::Schema(format!("mount on unknown node `{node}`")));
            }
            for (k, p) in poses.iter().enumerate() {
                sensors.push(Sensor { id: format!("{node}/{k}"), node: node.clone(), mount: *p });
            }
        }
        Ok(Self { topology, joints: joints.into_iter().collect(), sensors, gravity })
    }

    pub fn topology(&self) -> &HeteroOutTree {
        &self.topology
    }

    pub fn n_joints(&self) -> usize {
        self.joints.len()
    }

    pub fn joint_labels(&self) -> Vec<String> {
        self.joints.iter().map(|(e, _)| e.clone()).collect()
    }

    pub fn joint(&self, edge: &str) -> Option<&Joint> {
        self.joints.iter().find(|(e, _)| e == edge).map(|(_, j)| j)
    }

    pub fn joint_index(&self, edge: &str) -> Option<usize> {
        self.joints.iter().position(|(e, _)| e == edge)
    }

    /// Sensors in node-label order, then mount order.
    pub fn sensors(&self) -> &[Sensor] {
        &self.sensors
    }

    pub fn sensor(&self, id: &str) -> Option<&Sensor> {
        self.sensors.iter().find(|s| s.id == id)
    }

    /// Sensor id → node label.
    pub fn sensor_nodes(&self) -> BTreeMap<String, String> {
        self.sensors.iter().map(|s| (s.id.clone(), s.node.clone())).collect()
    }

    /// Copy keeping only sensors on the listed nodes.
    pub fn with_sensors_on(&self, nodes: &[&str]) -> Self {
        let mut out = self.clone();
        out.sensors.retain(|s| nodes.contains(&s.node.as_str()));
        out
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::Schema(format!("robot spec: {e}")))
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SpecDoc {
    topology: HeteroOutTree,
    joints: Vec<JointDoc>,
    #[serde(default)]
    mounts: Vec<MountDoc>,
    #[serde(default = "default_gravity")]
    gravity: [f64; 3],
}

fn default_gravity() -> [f64; 3] {
    GRAVITY
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct JointDoc {
    edge: String,
    axis: [f64; 3],
    offset: HomTransform,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MountDoc {
    node: String,
    poses: Vec<HomTransform>,
}

impl Serialize for RobotSpec {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut mounts: BTreeMap<&str, Vec<HomTransform>> = BTreeMap::new();
        for sensor in &self.sensors {
            mounts.entry(&sensor.node).or_default().push(sensor.mount);
        }
        SpecDoc {
            topology: self.topology.clone(),
            joints: self
                .joints
                .iter()
                .map(|(e, j)| JointDoc { edge: e.clone(), axis: j.axis.into(), offset: j.offset })
                .collect(),
            mounts: mounts.into_iter().map(|(n, p)| MountDoc { node: n.to_string(), poses: p }).collect(),
            gravity: self.gravity.into(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for RobotSpec {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let doc = SpecDoc::deserialize(d)?;
        let mut joints = BTreeMap::new();
        for j in doc.joints {
            let joint = Joint { axis: Vector3::from(j.axis), offset: j.offset };
            if joints.insert(j.edge.clone(), joint).is_some() {
                return Err(D::Error::custom(format!("duplicate joint `{}`", j.edge)));
            }
        }
        let mut mounts = BTreeMap::new();
        for m in doc.mounts {
            if mounts.insert(m.node.clone(), m.poses).is_some() {
                return Err(D::Error::custom(format!("duplicate mount entry for `{}`", m.node)));
            }
        }
        RobotSpec::new(doc.topology, joints, mounts, Vector3::from(doc.gravity)).map_err(D::Error::custom)
    }
}

/// Names of the built-in robots.
pub const BUILTIN_ROBOTS: [&str; 6] = ["robot1", "robot2", "robot3", "robot4", "robot5", "robot6"];

/// Parent of `link{k}` for k = 1..=5 (0 = root) in each built-in topology.
fn builtin_parents(name: &str) -> Option<[usize; 5]> {
    Some(match name {
        // serial chain
        "robot1" => [0, 1, 2, 3, 4],
        // two arms on a shared shoulder
        "robot2" => [0, 1, 2, 1, 4],
        // two arms from the base
        "robot3" => [0, 1, 2, 0, 4],
        // hand with four fingers
        "robot4" => [0, 1, 1, 1, 1],
        // elbow splitting into a short and a long branch
        "robot5" => [0, 1, 2, 2, 4],
        // three branches from the base
        "robot6" => [0, 1, 0, 0, 4],
        _ => return None,
    })
}

fn joint_geometry(k: usize) -> Joint {
    // Axes are deliberately not all axis-aligned.
    const AXES: [[f64; 3]; 5] = [
        [0.0, 0.0, 1.0],
        [0.0, 1.0, 0.0],
        [0.6, 0.0, 0.8],
        [1.0, 0.0, 0.0],
        [0.0, 0.6, 0.8],
    ];
    const OFFSETS: [[f64; 3]; 5] = [
        [0.0, 0.0, 0.15],
        [0.25, 0.0, 0.05],
        [0.2, 0.05, 0.0],
        [0.0, 0.22, 0.05],
        [0.18, -0.04, 0.1],
    ];
    const TILTS: [[f64; 3]; 5] = [
        [0.0, 0.0, 0.0],
        [0.0, 0.0, 0.3],
        [0.2, 0.0, 0.0],
        [0.0, -0.25, 0.0],
        [0.1, 0.1, -0.2],
    ];
    Joint {
        axis: Vector3::from(AXES[k]).normalize(),
        offset: HomTransform::new(rpy_matrix(TILTS[k]), Vector3::from(OFFSETS[k])),
    }
}

/// Deterministic mount pose `k` on a link: a point on a small shell around
/// the link origin with a varied orientation.
pub fn default_mount(k: usize) -> HomTransform {
    let a = 2.1 * k as f64 + 0.4;
    let p = Vector3::new(0.08 * a.cos(), 0.08 * a.sin(), 0.04 + 0.03 * (1.7 * a).sin());
    HomTransform::new(rpy_matrix([0.3 * a.sin(), 0.2 * (0.5 * a).cos(), 0.7 * a]), p)
}

/// One of the six 5-joint desk-scale robots with `sensors_per_link` IMUs on
/// every link and none on the base.
pub fn builtin_robot(name: &str, sensors_per_link: usize) -> Result<RobotSpec> {
    let parents = builtin_parents(name)
        .ok_or_else(|| Error::InvalidArgument(format!("unknown built-in robot `{name}` (expected robot1..robot6)")))?;
    if sensors_per_link > 12 {
        return Err(Error::InvalidArgument("at most 12 sensors per link".into()));
    }
    let link = |k: usize| if k == 0 { ROOT.to_string() } else { format!("link{k}") };
    let topology = HeteroOutTree::new(
        ROOT,
        (1..=5).map(|k| (link(k), link(parents[k - 1]), format!("joint{k}"))),
    )?;
    let joints = (1..=5).map(|k| (format!("joint{k}"), joint_geometry(k - 1))).collect();
    let mounts = (1..=5)
        .map(|k| (link(k), (0..sensors_per_link).map(|s| default_mount(s + 2 * k)).collect()))
        .collect();
    RobotSpec::new(topology, joints, mounts, Vector3::from(GRAVITY))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtins_are_valid() {
        for name in BUILTIN_ROBOTS {
            let r = builtin_robot(name, 2).unwrap();
            assert_eq!(r.n_joints(), 5);
            assert_eq!(r.sensors().len(), 10);
            assert_eq!(r.topology().len(), 5);
        }
        assert_eq!(builtin_robot("robot1", 2).unwrap().topology().max_depth(), 5);
        assert_eq!(builtin_robot("robot4", 2).unwrap().topology().max_depth(), 2);
        assert!(builtin_robot("robot7", 2).is_err());
    }

    #[test]
    fn sensor_ids_name_their_link() {
        let r = builtin_robot("robot3", 2).unwrap();
        let s = r.sensor("link4/1").unwrap();
        assert_eq!(s.node, "link4");
    }

    #[test]
    fn json_round_trip() {
        let r = builtin_robot("robot5", 3).unwrap();
        let back = RobotSpec::from_json(&r.to_json().unwrap()).unwrap();
        assert_eq!(back.topology(), r.topology());
        assert_eq!(back.sensors().len(), 15);
        for ((e1, j1), (e2, j2)) in r.joints.iter().zip(&back.joints) {
            assert_eq!(e1, e2);
            assert_eq!(j1.axis, j2.axis);
            assert_eq!(j1.offset.to_row_major(), j2.offset.to_row_major());
        }
    }

    #[test]
    fn rejects_bad_axis_and_missing_joint() {
        let r = builtin_robot("robot1", 1).unwrap();
        let json = r.to_json().unwrap();
        let mut v: serde_json::Value = serde_json::from_str(&json).unwrap();
        v["joints"][0]["axis"] = serde_json::json!([0.0, 0.0, 2.0]);
        assert!(RobotSpec::from_json(&v.to_string()).is_err());
        let mut w: serde_json::Value = serde_json::from_str(&json).unwrap();
        w["joints"].as_array_mut().unwrap().pop();
        assert!(RobotSpec::from_json(&w.to_string()).is_err());
    }
}
