//! Core domain types for Gaussian fields, interaction states, cameras, and
//! joints, plus scene-manifest serialization and validation.
//!
//! A scene manifest is a single JSON document with top-level keys
//! `canonical`, `states`, `cameras` and optional `ground_truth`; each
//! primitive is `{"mu":[3],"q":[4],"s":[3],"rgb":[3],"opacity":f,"label":n}`.
//! Angles are radians, lengths are scene units, and floats are written with
//! shortest round-trip decimal encoding so `load_scene(save_field(b))`
//! reproduces every value exactly.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::quat::Quat;

/// Unit-norm tolerance for quaternions and rotation matrices.
pub const UNIT_TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum FieldError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("malformed scene manifest: {0}")]
    Malformed(String),
    #[error("primitive count mismatch: state {state} has {got} primitives, expected {expected}")]
    PrimitiveCountMismatch {
        state: usize,
        got: usize,
        expected: usize,
    },
    #[error("invalid primitive {index}: {reason}")]
    InvalidPrimitive { index: usize, reason: String },
    #[error("invalid camera (state {state}, view {view}): {reason}")]
    InvalidCamera {
        state: usize,
        view: usize,
        reason: String,
    },
    #[error("invalid bundle: {0}")]
    InvalidBundle(String),
    #[error("invalid ground truth: {0}")]
    InvalidGroundTruth(String),
}

/// One oriented anisotropic Gaussian primitive.
///
/// `scale` stores full per-axis ellipsoid lengths; the standard deviation
/// along an axis is `scale / 2`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianPrimitive {
    pub center: Vector3<f64>,
    pub orientation: Quat,
    pub scale: Vector3<f64>,
    pub color: [f64; 3],
    pub opacity: f64,
    /// Part id; 0 means static.
    pub label: u32,
}

impl GaussianPrimitive {
    pub fn validate(&self, index: usize) -> Result<(), FieldError> {
        let bad = |reason: String| FieldError::InvalidPrimitive { index, reason };
        for v in [
            self.center.x,
            self.center.y,
            self.center.z,
            self.scale.x,
            self.scale.y,
            self.scale.z,
            self.opacity,
            self.orientation.w,
            self.orientation.x,
            self.orientation.y,
            self.orientation.z,
            self.color[0],
            self.color[1],
            self.color[2],
        ] {
            if !v.is_finite() {
                return Err(bad("non-finite component".into()));
            }
        }
        if !self.orientation.is_unit(UNIT_TOL) {
            return Err(bad(format!(
                "non-unit quaternion (norm {})",
                self.orientation.norm()
            )));
        }
        if self.scale.x <= 0.0 || self.scale.y <= 0.0 || self.scale.z <= 0.0 {
            return Err(bad("non-positive scale component".into()));
        }
        if !(0.0..=1.0).contains(&self.opacity) {
            return Err(bad(format!("opacity {} outside [0,1]", self.opacity)));
        }
        if self.color.iter().any(|c| !(0.0..=1.0).contains(c)) {
            return Err(bad("color component outside [0,1]".into()));
        }
        Ok(())
    }
}

/// Covariance of a primitive: `R(q) Diag((s/2)^2) R(q)^T`.
pub fn covariance_of(p: &GaussianPrimitive) -> Matrix3<f64> {
    let r = p.orientation.rotation_matrix();
    let d = Matrix3::from_diagonal(&Vector3::new(
        (p.scale.x / 2.0).powi(2),
        (p.scale.y / 2.0).powi(2),
        (p.scale.z / 2.0).powi(2),
    ));
    r * d * r.transpose()
}

/// One articulation state: an index-stable ordered list of primitives.
#[derive(Debug, Clone, PartialEq)]
pub struct StateSnapshot {
    pub state_index: usize,
    pub primitives: Vec<GaussianPrimitive>,
}

impl StateSnapshot {
    pub fn centers(&self) -> Vec<Vector3<f64>> {
        self.primitives.iter().map(|p| p.center).collect()
    }

    pub fn labels(&self) -> Vec<u32> {
        self.primitives.iter().map(|p| p.label).collect()
    }

    /// Copy of this snapshot with per-primitive labels replaced.
    pub fn with_labels(&self, labels: &[u32]) -> StateSnapshot {
        assert_eq!(labels.len(), self.primitives.len());
        let mut out = self.clone();
        for (p, &l) in out.primitives.iter_mut().zip(labels) {
            p.label = l;
        }
        out
    }
}

/// Pinhole camera with a rigid world-to-camera transform.
///
/// Camera space is x-right, y-down, z-forward; a world point `p` maps to
/// pixel `(fx*x/z + cx, fy*y/z + cy)` where `(x,y,z) = R*p + t`.
#[derive(Debug, Clone, PartialEq)]
pub struct CameraModel {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
    pub width: usize,
    pub height: usize,
}

impl CameraModel {
    pub fn validate(&self, state: usize, view: usize) -> Result<(), FieldError> {
        let bad = |reason: String| FieldError::InvalidCamera {
            state,
            view,
            reason,
        };
        let vals = [
            self.fx,
            self.fy,
            self.cx,
            self.cy,
            self.translation.x,
            self.translation.y,
            self.translation.z,
        ];
        if vals.iter().any(|v| !v.is_finite()) || self.rotation.iter().any(|v| !v.is_finite()) {
            return Err(bad("non-finite component".into()));
        }
        if self.fx <= 0.0 || self.fy <= 0.0 {
            return Err(bad("focal lengths must be positive".into()));
        }
        if self.width == 0 || self.height == 0 {
            return Err(bad("zero image dimension".into()));
        }
        let gram = self.rotation * self.rotation.transpose();
        if (gram - Matrix3::identity()).norm() > UNIT_TOL {
            return Err(bad("rotation is not orthonormal".into()));
        }
        if (self.rotation.determinant() - 1.0).abs() > UNIT_TOL {
            return Err(bad("rotation determinant is not +1".into()));
        }
        Ok(())
    }

    /// World point to camera coordinates.
    pub fn to_camera(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * p + self.translation
    }

    /// Full projection to pixel coordinates; None behind the camera.
    pub fn project_point(&self, p: &Vector3<f64>) -> Option<(f64, f64, f64)> {
        let c = self.to_camera(p);
        if c.z <= 0.0 {
            return None;
        }
        Some((
            self.fx * c.x / c.z + self.cx,
            self.fy * c.y / c.z + self.cy,
            c.z,
        ))
    }
}

/// Kind of a one-degree-of-freedom joint.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JointKind {
    Revolute,
    Prismatic,
}

impl std::fmt::Display for JointKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            JointKind::Revolute => write!(f, "revolute"),
            JointKind::Prismatic => write!(f, "prismatic"),
        }
    }
}

/// A fitted or ground-truth joint between two interaction states.
#[derive(Debug, Clone, PartialEq)]
pub enum JointModel {
    Revolute {
        pivot: Vector3<f64>,
        axis: Vector3<f64>,
        /// Rotation angle in radians, in (-pi, pi].
        angle: f64,
    },
    Prismatic {
        axis: Vector3<f64>,
        /// Translation distance in scene units.
        distance: f64,
    },
}

impl JointModel {
    pub fn kind(&self) -> JointKind {
        match self {
            JointModel::Revolute { .. } => JointKind::Revolute,
            JointModel::Prismatic { .. } => JointKind::Prismatic,
        }
    }

    pub fn axis(&self) -> Vector3<f64> {
        match self {
            JointModel::Revolute { axis, .. } => *axis,
            JointModel::Prismatic { axis, .. } => *axis,
        }
    }

    pub fn magnitude(&self) -> f64 {
        match self {
            JointModel::Revolute { angle, .. } => *angle,
            JointModel::Prismatic { distance, .. } => *distance,
        }
    }

    pub fn validate(&self) -> Result<(), FieldError> {
        let axis = self.axis();
        if (axis.norm() - 1.0).abs() > UNIT_TOL {
            return Err(FieldError::InvalidBundle(format!(
                "joint axis is not unit (norm {})",
                axis.norm()
            )));
        }
        if let JointModel::Revolute { angle, pivot, .. } = self {
            if !angle.is_finite() || *angle <= -std::f64::consts::PI || *angle > std::f64::consts::PI
            {
                return Err(FieldError::InvalidBundle(format!(
                    "revolute angle {angle} outside (-pi, pi]"
                )));
            }
            if !(pivot.x.is_finite() && pivot.y.is_finite() && pivot.z.is_finite()) {
                return Err(FieldError::InvalidBundle("non-finite pivot".into()));
            }
        }
        Ok(())
    }
}

/// Ground-truth articulation for a single moving part: a fixed joint
/// geometry plus the scheduled magnitude at each state.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruthPart {
    pub label: u32,
    pub kind: JointKind,
    pub axis: Vector3<f64>,
    /// Present for revolute joints.
    pub pivot: Option<Vector3<f64>>,
    /// Magnitude at each of the K states (radians or scene units).
    pub schedule: Vec<f64>,
}

impl GroundTruthPart {
    /// Relative joint transform taking state `a` to state `b`, with the
    /// magnitude canonicalized to be non-negative (axis flipped if needed).
    pub fn joint_for_pair(&self, a: usize, b: usize) -> JointModel {
        let delta = self.schedule[b] - self.schedule[a];
        let (axis, mag) = if delta < 0.0 {
            (-self.axis, -delta)
        } else {
            (self.axis, delta)
        };
        match self.kind {
            JointKind::Revolute => JointModel::Revolute {
                pivot: self.pivot.unwrap_or_else(Vector3::zeros),
                axis,
                angle: mag,
            },
            JointKind::Prismatic => JointModel::Prismatic {
                axis,
                distance: mag,
            },
        }
    }
}

/// Exact annotations carried by synthetic scenes.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct GroundTruth {
    /// True part label per primitive (0 = static).
    pub labels: Vec<u32>,
    pub parts: Vec<GroundTruthPart>,
    /// Indices of primitives deliberately planted across part boundaries.
    pub straddlers: Vec<usize>,
}

impl GroundTruth {
    pub fn part(&self, label: u32) -> Option<&GroundTruthPart> {
        self.parts.iter().find(|p| p.label == label)
    }

    /// Moving-part count between two states (parts whose scheduled
    /// magnitude differs).
    pub fn parts_moved_between(&self, a: usize, b: usize) -> u32 {
        self.parts
            .iter()
            .filter(|p| (p.schedule[a] - p.schedule[b]).abs() > 1e-12)
            .count() as u32
    }
}

/// Canonical field, K identity-consistent state snapshots, the camera rig
/// per state, and optional exact ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneBundle {
    pub canonical: StateSnapshot,
    pub states: Vec<StateSnapshot>,
    /// One list of cameras per state.
    pub cameras: Vec<Vec<CameraModel>>,
    pub ground_truth: Option<GroundTruth>,
}

impl SceneBundle {
    pub fn num_states(&self) -> usize {
        self.states.len()
    }

    pub fn num_primitives(&self) -> usize {
        self.canonical.primitives.len()
    }

    pub fn validate(&self) -> Result<(), FieldError> {
        let n = self.canonical.primitives.len();
        if self.states.len() < 2 {
            return Err(FieldError::InvalidBundle(format!(
                "need at least 2 states, got {}",
                self.states.len()
            )));
        }
        if self.cameras.len() != self.states.len() {
            return Err(FieldError::InvalidBundle(format!(
                "{} camera lists for {} states",
                self.cameras.len(),
                self.states.len()
            )));
        }
        for p in self.canonical.primitives.iter().enumerate() {
            p.1.validate(p.0)?;
        }
        for (k, state) in self.states.iter().enumerate() {
            if state.primitives.len() != n {
                return Err(FieldError::PrimitiveCountMismatch {
                    state: k,
                    got: state.primitives.len(),
                    expected: n,
                });
            }
            for (i, p) in state.primitives.iter().enumerate() {
                p.validate(i)?;
                let c = &self.canonical.primitives[i];
                if p.color != c.color || p.opacity != c.opacity {
                    return Err(FieldError::InvalidBundle(format!(
                        "state {k} primitive {i} does not share canonical appearance"
                    )));
                }
            }
        }
        for (k, views) in self.cameras.iter().enumerate() {
            if views.is_empty() {
                return Err(FieldError::InvalidBundle(format!(
                    "state {k} has no cameras"
                )));
            }
            for (v, cam) in views.iter().enumerate() {
                cam.validate(k, v)?;
            }
        }
        if let Some(gt) = &self.ground_truth {
            if gt.labels.len() != n {
                return Err(FieldError::InvalidGroundTruth(format!(
                    "{} labels for {} primitives",
                    gt.labels.len(),
                    n
                )));
            }
            for part in &gt.parts {
                if part.schedule.len() != self.states.len() {
                    return Err(FieldError::InvalidGroundTruth(format!(
                        "part {} schedule length {} != {} states",
                        part.label,
                        part.schedule.len(),
                        self.states.len()
                    )));
                }
                if part.label == 0 {
                    return Err(FieldError::InvalidGroundTruth(
                        "moving part labeled 0".into(),
                    ));
                }
                if (part.axis.norm() - 1.0).abs() > UNIT_TOL {
                    return Err(FieldError::InvalidGroundTruth(format!(
                        "part {} axis is not unit",
                        part.label
                    )));
                }
                if part.kind == JointKind::Revolute && part.pivot.is_none() {
                    return Err(FieldError::InvalidGroundTruth(format!(
                        "revolute part {} has no pivot",
                        part.label
                    )));
                }
            }
            for idx in &gt.straddlers {
                if *idx >= n {
                    return Err(FieldError::InvalidGroundTruth(format!(
                        "straddler index {idx} out of range"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Centers of primitives with the given label at a state.
    pub fn part_centers(&self, labels: &[u32], label: u32, state: usize) -> Vec<Vector3<f64>> {
        self.states[state]
            .primitives
            .iter()
            .zip(labels)
            .filter(|(_, &l)| l == label)
            .map(|(p, _)| p.center)
            .collect()
    }
}

// ---------------------------------------------------------------------------
// Manifest schema
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct PrimitiveRecord {
    mu: [f64; 3],
    q: [f64; 4],
    s: [f64; 3],
    rgb: [f64; 3],
    opacity: f64,
    label: u32,
}

#[derive(Serialize, Deserialize)]
struct CameraRecord {
    fx: f64,
    fy: f64,
    cx: f64,
    cy: f64,
    /// Row-major 3x3 world-to-camera rotation.
    rot: [f64; 9],
    t: [f64; 3],
    width: usize,
    height: usize,
}

#[derive(Serialize, Deserialize)]
struct GroundTruthPartRecord {
    label: u32,
    kind: JointKind,
    axis: [f64; 3],
    #[serde(skip_serializing_if = "Option::is_none")]
    pivot: Option<[f64; 3]>,
    schedule: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct GroundTruthRecord {
    labels: Vec<u32>,
    parts: Vec<GroundTruthPartRecord>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    straddlers: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
struct SceneManifest {
    canonical: Vec<PrimitiveRecord>,
    states: Vec<Vec<PrimitiveRecord>>,
    cameras: Vec<Vec<CameraRecord>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    ground_truth: Option<GroundTruthRecord>,
}

fn primitive_to_record(p: &GaussianPrimitive) -> PrimitiveRecord {
    PrimitiveRecord {
        mu: [p.center.x, p.center.y, p.center.z],
        q: p.orientation.to_array(),
        s: [p.scale.x, p.scale.y, p.scale.z],
        rgb: p.color,
        opacity: p.opacity,
        label: p.label,
    }
}

fn record_to_primitive(r: &PrimitiveRecord) -> GaussianPrimitive {
    GaussianPrimitive {
        center: Vector3::new(r.mu[0], r.mu[1], r.mu[2]),
        orientation: Quat::from_array(r.q),
        scale: Vector3::new(r.s[0], r.s[1], r.s[2]),
        color: r.rgb,
        opacity: r.opacity,
        label: r.label,
    }
}

fn camera_to_record(c: &CameraModel) -> CameraRecord {
    let m = &c.rotation;
    CameraRecord {
        fx: c.fx,
        fy: c.fy,
        cx: c.cx,
        cy: c.cy,
        rot: [
            m[(0, 0)],
            m[(0, 1)],
            m[(0, 2)],
            m[(1, 0)],
            m[(1, 1)],
            m[(1, 2)],
            m[(2, 0)],
            m[(2, 1)],
            m[(2, 2)],
        ],
        t: [c.translation.x, c.translation.y, c.translation.z],
        width: c.width,
        height: c.height,
    }
}

fn record_to_camera(r: &CameraRecord) -> CameraModel {
    CameraModel {
        fx: r.fx,
        fy: r.fy,
        cx: r.cx,
        cy: r.cy,
        rotation: Matrix3::from_row_slice(&r.rot),
        translation: Vector3::new(r.t[0], r.t[1], r.t[2]),
        width: r.width,
        height: r.height,
    }
}

fn manifest_to_bundle(m: SceneManifest) -> SceneBundle {
    SceneBundle {
        canonical: StateSnapshot {
            state_index: 0,
            primitives: m.canonical.iter().map(record_to_primitive).collect(),
        },
        states: m
            .states
            .iter()
            .enumerate()
            .map(|(k, prims)| StateSnapshot {
                state_index: k,
                primitives: prims.iter().map(record_to_primitive).collect(),
            })
            .collect(),
        cameras: m
            .cameras
            .iter()
            .map(|views| views.iter().map(record_to_camera).collect())
            .collect(),
        ground_truth: m.ground_truth.map(|g| GroundTruth {
            labels: g.labels,
            parts: g
                .parts
                .iter()
                .map(|p| GroundTruthPart {
                    label: p.label,
                    kind: p.kind,
                    axis: Vector3::new(p.axis[0], p.axis[1], p.axis[2]),
                    pivot: p.pivot.map(|v| Vector3::new(v[0], v[1], v[2])),
                    schedule: p.schedule.clone(),
                })
                .collect(),
            straddlers: g.straddlers,
        }),
    }
}

fn bundle_to_manifest(b: &SceneBundle) -> SceneManifest {
    SceneManifest {
        canonical: b.canonical.primitives.iter().map(primitive_to_record).collect(),
        states: b
            .states
            .iter()
            .map(|s| s.primitives.iter().map(primitive_to_record).collect())
            .collect(),
        cameras: b
            .cameras
            .iter()
            .map(|views| views.iter().map(camera_to_record).collect())
            .collect(),
        ground_truth: b.ground_truth.as_ref().map(|g| GroundTruthRecord {
            labels: g.labels.clone(),
            parts: g
                .parts
                .iter()
                .map(|p| GroundTruthPartRecord {
                    label: p.label,
                    kind: p.kind,
                    axis: [p.axis.x, p.axis.y, p.axis.z],
                    pivot: p.pivot.map(|v| [v.x, v.y, v.z]),
                    schedule: p.schedule.clone(),
                })
                .collect(),
            straddlers: g.straddlers.clone(),
        }),
    }
}

/// Load and fully validate a scene manifest.
///
/// `path` may name the manifest file itself or a directory containing
/// `scene.json`. Quaternions that are not unit within tolerance are
/// rejected rather than renormalized.
pub fn load_scene(path: &Path) -> Result<SceneBundle, FieldError> {
    let file = if path.is_dir() {
        path.join("scene.json")
    } else {
        path.to_path_buf()
    };
    let text = fs::read_to_string(&file).map_err(|source| FieldError::Io {
        path: file.display().to_string(),
        source,
    })?;
    let manifest: SceneManifest =
        serde_json::from_str(&text).map_err(|e| FieldError::Malformed(e.to_string()))?;
    let bundle = manifest_to_bundle(manifest);
    bundle.validate()?;
    Ok(bundle)
}

/// Validate and write a scene manifest readable by [`load_scene`].
pub fn save_field(bundle: &SceneBundle, path: &Path) -> Result<(), FieldError> {
    bundle.validate()?;
    let file = if path.is_dir() || path.extension().is_none() {
        fs::create_dir_all(path).map_err(|source| FieldError::Io {
            path: path.display().to_string(),
            source,
        })?;
        path.join("scene.json")
    } else {
        if let Some(parent) = path.parent() {
            if !parent.as_os_str().is_empty() {
                fs::create_dir_all(parent).map_err(|source| FieldError::Io {
                    path: parent.display().to_string(),
                    source,
                })?;
            }
        }
        path.to_path_buf()
    };
    let manifest = bundle_to_manifest(bundle);
    let text =
        serde_json::to_string(&manifest).map_err(|e| FieldError::Malformed(e.to_string()))?;
    fs::write(&file, text).map_err(|source| FieldError::Io {
        path: file.display().to_string(),
        source,
    })
}

/// Count of primitives per label, ordered by label.
pub fn label_histogram(labels: &[u32]) -> BTreeMap<u32, usize> {
    let mut h = BTreeMap::new();
    for &l in labels {
        *h.entry(l).or_insert(0) += 1;
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    pub(crate) fn test_primitive() -> GaussianPrimitive {
        GaussianPrimitive {
            center: Vector3::new(0.1, -0.2, 0.3),
            orientation: Quat::IDENTITY,
            scale: Vector3::new(0.05, 0.04, 0.03),
            color: [0.5, 0.2, 0.9],
            opacity: 0.8,
            label: 0,
        }
    }

    fn test_camera() -> CameraModel {
        CameraModel {
            fx: 100.0,
            fy: 100.0,
            cx: 50.0,
            cy: 50.0,
            rotation: Matrix3::identity(),
            translation: Vector3::new(0.0, 0.0, 2.0),
            width: 100,
            height: 100,
        }
    }

    fn minimal_bundle() -> SceneBundle {
        let p = test_primitive();
        let snap = |k: usize| StateSnapshot {
            state_index: k,
            primitives: vec![p.clone()],
        };
        SceneBundle {
            canonical: snap(0),
            states: vec![snap(0), snap(1)],
            cameras: vec![vec![test_camera()], vec![test_camera()]],
            ground_truth: None,
        }
    }

    #[test]
    fn minimal_manifest_round_trip() {
        let bundle = minimal_bundle();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("scene.json");
        save_field(&bundle, &path).unwrap();
        let loaded = load_scene(&path).unwrap();
        assert_eq!(loaded.states.len(), 2);
        assert_eq!(loaded, bundle);
        // Optional block omitted from the file entirely.
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(!text.contains("ground_truth"));
    }

    #[test]
    fn manifest_uses_documented_schema() {
        let bundle = minimal_bundle();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("scene.json");
        save_field(&bundle, &path).unwrap();
        let doc: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
        let mut top: Vec<&str> = doc.as_object().unwrap().keys().map(|k| k.as_str()).collect();
        top.sort_unstable();
        assert_eq!(top, vec!["cameras", "canonical", "states"]);
        let prim = &doc["canonical"][0];
        for key in ["mu", "q", "s", "rgb", "opacity", "label"] {
            assert!(prim.get(key).is_some(), "primitive missing '{key}'");
        }
        assert_eq!(prim["mu"].as_array().unwrap().len(), 3);
        assert_eq!(prim["q"].as_array().unwrap().len(), 4);
        assert!(doc["states"].as_array().unwrap().len() >= 2);
        assert!(doc["cameras"][0].as_array().is_some());
    }

    #[test]
    fn count_mismatch_rejected() {
        let mut bundle = minimal_bundle();
        bundle.states[1].primitives.clear();
        let err = bundle.validate().unwrap_err();
        assert!(err.to_string().contains("primitive count mismatch"));
    }

    #[test]
    fn nan_center_rejected_before_writing() {
        let mut bundle = minimal_bundle();
        bundle.canonical.primitives[0].center.x = f64::NAN;
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("scene.json");
        assert!(save_field(&bundle, &path).is_err());
        assert!(!path.exists());
    }

    #[test]
    fn non_unit_quaternion_rejected_on_load() {
        let bundle = minimal_bundle();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("scene.json");
        save_field(&bundle, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let tampered = text.replace("\"q\":[1.0,0.0,0.0,0.0]", "\"q\":[1.0,0.01,0.0,0.0]");
        assert_ne!(text, tampered);
        std::fs::write(&path, tampered).unwrap();
        let err = load_scene(&path).unwrap_err();
        assert!(err.to_string().contains("non-unit quaternion"));
    }

    #[test]
    fn missing_file_is_io_error() {
        let err = load_scene(Path::new("/nonexistent/scene.json")).unwrap_err();
        assert!(matches!(err, FieldError::Io { .. }));
    }

    #[test]
    fn appearance_sharing_enforced() {
        let mut bundle = minimal_bundle();
        bundle.states[1].primitives[0].opacity = 0.5;
        assert!(bundle.validate().is_err());
    }

    #[test]
    fn covariance_isotropic_unit() {
        let mut p = test_primitive();
        p.scale = Vector3::new(2.0, 2.0, 2.0);
        let cov = covariance_of(&p);
        assert!((cov - Matrix3::identity()).norm() < 1e-12);
    }

    #[test]
    fn covariance_axis_permutation_under_rotation() {
        let (a, b, c) = (0.7, 0.4, 0.2);
        let mut p = test_primitive();
        p.orientation = Quat::from_axis_angle(&Vector3::z(), FRAC_PI_2);
        p.scale = Vector3::new(2.0 * a, 2.0 * b, 2.0 * c);
        let cov = covariance_of(&p);
        let expect = Matrix3::from_diagonal(&Vector3::new(b * b, a * a, c * c));
        assert!((cov - expect).norm() < 1e-12);
    }

    #[test]
    fn covariance_eigenvalues_match_half_scales() {
        use rand::Rng;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let q = Quat::new(
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
            )
            .normalized()
            .unwrap();
            let s = Vector3::new(
                rng.random_range(0.1..2.0),
                rng.random_range(0.1..2.0),
                rng.random_range(0.1..2.0),
            );
            let mut p = test_primitive();
            p.orientation = q;
            p.scale = s;
            let cov = covariance_of(&p);
            // Symmetry and positive determinant.
            assert!((cov - cov.transpose()).norm() < 1e-12);
            assert!(cov.determinant() > 0.0);
            // Eigendecomposition oracle: eigenvalues equal (s/2)^2 as a multiset.
            let mut eig: Vec<f64> = nalgebra::SymmetricEigen::new(cov)
                .eigenvalues
                .iter()
                .copied()
                .collect();
            let mut expect: Vec<f64> = [s.x, s.y, s.z].iter().map(|v| (v / 2.0).powi(2)).collect();
            eig.sort_by(|a, b| a.partial_cmp(b).unwrap());
            expect.sort_by(|a, b| a.partial_cmp(b).unwrap());
            for (e, x) in eig.iter().zip(&expect) {
                assert!((e - x).abs() < 1e-12, "eig {e} vs scale {x}");
            }
        }
    }

    #[test]
    fn joint_pair_canonicalizes_sign() {
        let part = GroundTruthPart {
            label: 1,
            kind: JointKind::Prismatic,
            axis: Vector3::z(),
            pivot: None,
            schedule: vec![0.0, 0.3],
        };
        let fwd = part.joint_for_pair(0, 1);
        let back = part.joint_for_pair(1, 0);
        assert_eq!(fwd.magnitude(), 0.3);
        assert_eq!(back.magnitude(), 0.3);
        assert!((back.axis() + Vector3::z()).norm() < 1e-12);
    }
}
