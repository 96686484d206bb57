//! End-to-end orchestration: coarse segmentation, boundary refinement,
//! per-part joint estimation, and evaluation, with all artifacts written
//! into an output directory next to a manifest of inputs, configuration,
//! and content hashes. Byte-identical outputs for identical inputs and
//! seed.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::{ProviderKind, RunConfig, SegmenterKind};
use crate::error::Error;
use crate::field::{JointKind, JointModel, SceneBundle};
use crate::image::{write_pgm16, write_ppm};
use crate::kinematics::{analyze_parts, JointDiagnostics};
use crate::metrics::{evaluate, MetricsReport};
use crate::refine::{refine_labels, OracleSegmenter, Segmenter};
use crate::segment::{coarse_labels, FixedProvider, OracleProvider, PartCountProvider};
use crate::splat::render_view;

/// Serialized form of a fitted joint.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct JointRecord {
    pub kind: JointKind,
    pub axis: [f64; 3],
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pivot: Option<[f64; 3]>,
    /// Radians for revolute joints, scene units for prismatic.
    pub magnitude: f64,
}

impl JointRecord {
    pub fn from_model(model: &JointModel) -> JointRecord {
        match model {
            JointModel::Revolute { pivot, axis, angle } => JointRecord {
                kind: JointKind::Revolute,
                axis: [axis.x, axis.y, axis.z],
                pivot: Some([pivot.x, pivot.y, pivot.z]),
                magnitude: *angle,
            },
            JointModel::Prismatic { axis, distance } => JointRecord {
                kind: JointKind::Prismatic,
                axis: [axis.x, axis.y, axis.z],
                pivot: None,
                magnitude: *distance,
            },
        }
    }

    pub fn to_model(&self) -> JointModel {
        let axis = nalgebra::Vector3::new(self.axis[0], self.axis[1], self.axis[2]);
        match self.kind {
            JointKind::Revolute => JointModel::Revolute {
                pivot: self
                    .pivot
                    .map(|p| nalgebra::Vector3::new(p[0], p[1], p[2]))
                    .unwrap_or_else(nalgebra::Vector3::zeros),
                axis,
                angle: self.magnitude,
            },
            JointKind::Prismatic => JointModel::Prismatic {
                axis,
                distance: self.magnitude,
            },
        }
    }
}

/// Per-part outcome in the joints report.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct JointEntry {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub joint: Option<JointRecord>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub diagnostics: Option<JointDiagnostics>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Joints file: one entry per nonzero part label.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct JointsFile {
    pub state_pair: (usize, usize),
    pub parts: BTreeMap<u32, JointEntry>,
}

impl JointsFile {
    /// Successfully fitted joints as models, keyed by part label.
    pub fn models(&self) -> BTreeMap<u32, JointModel> {
        self.parts
            .iter()
            .filter_map(|(l, e)| e.joint.as_ref().map(|j| (*l, j.to_model())))
            .collect()
    }
}

/// Labels file: coarse labels, refined labels mapped back to the original
/// primitives, and the labels of the refined (split) field.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LabelsFile {
    pub coarse: Vec<u32>,
    pub refined: Vec<u32>,
    pub refined_field: Vec<u32>,
}

#[derive(Debug)]
pub struct PipelineSummary {
    pub report: MetricsReport,
    pub labels: LabelsFile,
    pub joints: JointsFile,
    pub splits: usize,
    pub warnings: Vec<String>,
    pub out_dir: PathBuf,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// Serialize a value as compact JSON and write it, returning the content
/// hash.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<String, Error> {
    let text = serde_json::to_string(value)
        .map_err(|e| Error::Invalid(format!("serialization failed: {e}")))?;
    fs::write(path, &text).map_err(|e| Error::io(path, e))?;
    Ok(sha256_hex(text.as_bytes()))
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<String, Error> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))?;
    Ok(sha256_hex(bytes))
}

/// Resolve the configured part-count provider for a bundle.
fn make_provider<'a>(
    cfg: &RunConfig,
    bundle: &'a SceneBundle,
) -> Result<Box<dyn PartCountProvider + 'a>, Error> {
    match cfg.provider {
        ProviderKind::Oracle => {
            if bundle.ground_truth.is_none() {
                return Err(crate::segment::SegmentError::NoGroundTruth.into());
            }
            Ok(Box::new(OracleProvider { bundle }))
        }
        ProviderKind::Fixed => Ok(Box::new(FixedProvider {
            count: cfg.fixed_count,
        })),
        ProviderKind::Http => crate::http::HttpProvider::from_env()
            .map(|p| Box::new(p) as Box<dyn PartCountProvider>)
            .ok_or_else(|| {
                Error::Invalid(format!(
                    "http provider selected but {} is not set",
                    crate::http::VLM_ENDPOINT_VAR
                ))
            }),
    }
}

fn make_segmenter<'a>(
    cfg: &RunConfig,
    bundle: &'a SceneBundle,
) -> Result<Box<dyn Segmenter + 'a>, Error> {
    match cfg.segmenter {
        SegmenterKind::Oracle => Ok(Box::new(OracleSegmenter::new(bundle)?)),
        SegmenterKind::Http => crate::http::HttpSegmenter::from_env()
            .map(|s| Box::new(s) as Box<dyn Segmenter>)
            .ok_or_else(|| {
                Error::Invalid(format!(
                    "http segmenter selected but {} is not set",
                    crate::http::SAM_ENDPOINT_VAR
                ))
            }),
    }
}

/// Run segmentation (coarse then refined), kinematics, and evaluation on a
/// scene, writing labels, joints, reports, renderings, and a run manifest
/// into `out_dir`.
pub fn run_pipeline(
    scene_path: &Path,
    out_dir: &Path,
    cfg: &RunConfig,
) -> Result<PipelineSummary, Error> {
    cfg.validate()?;
    let bundle = crate::field::load_scene(scene_path)?;
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;

    // Coarse segmentation.
    let provider = make_provider(cfg, &bundle)?;
    let coarse = coarse_labels(
        &bundle,
        cfg.tau_mot,
        provider.as_ref(),
        cfg.count_queries,
        cfg.provider_retries,
        cfg.seed,
    )?;

    // Boundary refinement.
    let segmenter = make_segmenter(cfg, &bundle)?;
    let outcome = refine_labels(&bundle, &coarse, segmenter.as_ref(), &cfg.refine_config())?;

    // Kinematics on the original-aligned labels.
    let pair = cfg.resolve_state_pair(bundle.num_states());
    let fits = analyze_parts(
        &bundle,
        &outcome.original_labels,
        pair.0,
        pair.1,
        &cfg.analyze_config(),
    )?;
    let mut parts = BTreeMap::new();
    let mut models = BTreeMap::new();
    for (label, fit) in &fits {
        let entry = match fit {
            Ok(fit) => {
                models.insert(*label, fit.model.clone());
                JointEntry {
                    joint: Some(JointRecord::from_model(&fit.model)),
                    diagnostics: Some(fit.diagnostics.clone()),
                    error: None,
                }
            }
            Err(e) => JointEntry {
                joint: None,
                diagnostics: None,
                error: Some(e.to_string()),
            },
        };
        parts.insert(*label, entry);
    }
    let joints = JointsFile {
        state_pair: pair,
        parts,
    };

    // Evaluation against ground truth.
    let report = evaluate(&bundle, &outcome.original_labels, &models, pair)?;

    // Artifacts.
    let labels = LabelsFile {
        coarse,
        refined: outcome.original_labels.clone(),
        refined_field: outcome.refined.labels(),
    };
    let mut hashes = BTreeMap::new();
    hashes.insert(
        "labels.json".to_string(),
        write_json(&out_dir.join("labels.json"), &labels)?,
    );
    hashes.insert(
        "joints.json".to_string(),
        write_json(&out_dir.join("joints.json"), &joints)?,
    );
    hashes.insert(
        "report.json".to_string(),
        write_json(&out_dir.join("report.json"), &report)?,
    );
    hashes.insert(
        "report.csv".to_string(),
        write_bytes(&out_dir.join("report.csv"), report.to_csv().as_bytes())?,
    );

    let images_dir = out_dir.join("images");
    fs::create_dir_all(&images_dir).map_err(|e| Error::io(&images_dir, e))?;
    let canonical_render = render_view(&outcome.refined, &bundle.cameras[0][0]);
    write_ppm(&canonical_render.color, &images_dir.join("canonical_view0.ppm"))
        .map_err(|e| Error::io(images_dir.join("canonical_view0.ppm"), e))?;
    write_pgm16(&canonical_render.depth, &images_dir.join("canonical_view0_depth.pgm"))
        .map_err(|e| Error::io(images_dir.join("canonical_view0_depth.pgm"), e))?;
    for (k, state) in bundle.states.iter().enumerate() {
        let render = render_view(state, &bundle.cameras[k][0]);
        let name = format!("state{k}_view0.ppm");
        write_ppm(&render.color, &images_dir.join(&name))
            .map_err(|e| Error::io(images_dir.join(&name), e))?;
    }
    for name in [
        "canonical_view0.ppm",
        "canonical_view0_depth.pgm",
    ] {
        let path = images_dir.join(name);
        let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
        hashes.insert(format!("images/{name}"), sha256_hex(&bytes));
    }

    let scene_bytes = fs::read(if scene_path.is_dir() {
        scene_path.join("scene.json")
    } else {
        scene_path.to_path_buf()
    })
    .map_err(|e| Error::io(scene_path, e))?;

    #[derive(Serialize)]
    struct Manifest<'a> {
        tool: &'static str,
        scene: String,
        scene_sha256: String,
        config: &'a RunConfig,
        num_primitives: usize,
        num_states: usize,
        splits: usize,
        warnings: &'a [String],
        outputs: &'a BTreeMap<String, String>,
    }
    let manifest = Manifest {
        tool: "artikin",
        scene: scene_path.display().to_string(),
        scene_sha256: sha256_hex(&scene_bytes),
        config: cfg,
        num_primitives: bundle.num_primitives(),
        num_states: bundle.num_states(),
        splits: outcome.splits,
        warnings: &outcome.warnings,
        outputs: &hashes,
    };
    write_json(&out_dir.join("manifest.json"), &manifest)?;

    Ok(PipelineSummary {
        report,
        labels,
        joints,
        splits: outcome.splits,
        warnings: outcome.warnings,
        out_dir: out_dir.to_path_buf(),
    })
}
