//! `artikin`: decompose articulated objects represented as multi-state 3D
//! Gaussian fields into rigid parts, estimate joints, fit a deformation
//! field, and score the results against built-in synthetic ground truth.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use artikin_core::config::{ProviderKind, RunConfig, SegmenterKind};
use artikin_core::deform;
use artikin_core::field::{load_scene, save_field, StateSnapshot};
use artikin_core::image::{write_mask_pgm, write_pgm16, write_ppm};
use artikin_core::kinematics::PivotEstimator;
use artikin_core::metrics::evaluate;
use artikin_core::pipeline::{
    run_pipeline, write_json, JointEntry, JointRecord, JointsFile, LabelsFile,
};
use artikin_core::splat::render_view;
use artikin_core::synth::{generate_scene, ground_truth_masks, SceneSpec};
use artikin_core::Error;

fn defaults_help() -> String {
    let d = RunConfig::default();
    format!(
        "Config keys and defaults (overridable via --config and flags):\n  \
         seed = {}\n  tau_mot = {}\n  tau_vis = {}\n  tau_rank = {}\n  \
         theta_min_deg = {}\n  count_queries = {}\n  provider_retries = {}\n  \
         provider = oracle (oracle|fixed|http)\n  fixed_count = {}\n  \
         segmenter = oracle (oracle|http)\n  deform.epochs = {}\n  \
         deform.learning_rate = {}\n  deform.latent_dim = {}\n  \
         deform.hidden_dim = {}\n  refiner.max_depth = {}\n  \
         refiner.s_min = {}\n  refiner.ellipse_sigma = {}\n  \
         pivot_estimator = pseudoinverse (pseudoinverse|static-centroids)\n  \
         state_pair = first,last\n  threads = {} (0 = all cores)",
        d.seed,
        d.tau_mot,
        d.tau_vis,
        d.tau_rank,
        d.theta_min_deg,
        d.count_queries,
        d.provider_retries,
        d.fixed_count,
        d.deform.epochs,
        d.deform.learning_rate,
        d.deform.latent_dim,
        d.deform.hidden_dim,
        d.refiner.max_depth,
        d.refiner.s_min,
        d.refiner.ellipse_sigma,
        d.threads,
    )
}

#[derive(Parser)]
#[command(
    name = "artikin",
    about = "Rigid-part decomposition and joint estimation for multi-state 3D Gaussian fields",
    after_long_help = defaults_help(),
    after_help = "Run with --help for the full list of config keys and defaults."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Flags mirroring RunConfig; explicit flags override --config, which
/// overrides the built-in defaults.
#[derive(Args, Clone)]
struct ConfigArgs {
    /// JSON config file with any subset of the config keys.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed; all randomness flows from it.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Static/dynamic displacement threshold in [0, 1].
    #[arg(long, global = true)]
    tau_mot: Option<f64>,
    /// Winner-margin ratio for pixel assignment (>= 1).
    #[arg(long, global = true)]
    tau_vis: Option<f64>,
    /// Rank-ratio threshold of the joint classifier.
    #[arg(long, global = true)]
    tau_rank: Option<f64>,
    /// Minimum Kabsch angle in degrees for a revolute call.
    #[arg(long, global = true)]
    theta_min_deg: Option<f64>,
    /// Image pairs sampled for part-count estimation.
    #[arg(long, global = true)]
    count_queries: Option<usize>,
    /// Part-count provider: oracle, fixed, or http.
    #[arg(long, global = true)]
    provider: Option<String>,
    /// Count returned by the fixed provider.
    #[arg(long, global = true)]
    fixed_count: Option<u32>,
    /// Segmenter backend: oracle or http.
    #[arg(long, global = true)]
    segmenter: Option<String>,
    /// Deformation training epochs.
    #[arg(long, global = true)]
    epochs: Option<usize>,
    /// Deformation learning rate.
    #[arg(long, global = true)]
    learning_rate: Option<f64>,
    /// Latent code dimension.
    #[arg(long, global = true)]
    latent_dim: Option<usize>,
    /// Hidden layer width of the deformation net.
    #[arg(long, global = true)]
    hidden_dim: Option<usize>,
    /// Maximum recursive split depth.
    #[arg(long, global = true)]
    max_depth: Option<u32>,
    /// Minimum child axis scale before splitting stops.
    #[arg(long, global = true)]
    s_min: Option<f64>,
    /// Ellipse extent (in sigmas) of the boundary-candidate test.
    #[arg(long, global = true)]
    ellipse_sigma: Option<f64>,
    /// Revolute pivot estimator: pseudoinverse or static-centroids.
    #[arg(long, global = true)]
    pivot_estimator: Option<String>,
    /// State pair for kinematics/eval as "A,B" (default first,last).
    #[arg(long, global = true)]
    pair: Option<String>,
    /// Thread cap for parallel sections; 0 uses all cores.
    #[arg(long, global = true)]
    threads: Option<usize>,
}

impl ConfigArgs {
    fn resolve(&self) -> Result<RunConfig, Error> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = self.tau_mot {
            cfg.tau_mot = v;
        }
        if let Some(v) = self.tau_vis {
            cfg.tau_vis = v;
        }
        if let Some(v) = self.tau_rank {
            cfg.tau_rank = v;
        }
        if let Some(v) = self.theta_min_deg {
            cfg.theta_min_deg = v;
        }
        if let Some(v) = self.count_queries {
            cfg.count_queries = v;
        }
        if let Some(v) = &self.provider {
            cfg.provider = match v.as_str() {
                "oracle" => ProviderKind::Oracle,
                "fixed" => ProviderKind::Fixed,
                "http" => ProviderKind::Http,
                other => {
                    return Err(Error::Invalid(format!(
                        "unknown provider '{other}' (expected oracle, fixed, or http)"
                    )))
                }
            };
        }
        if let Some(v) = self.fixed_count {
            cfg.fixed_count = v;
        }
        if let Some(v) = &self.segmenter {
            cfg.segmenter = match v.as_str() {
                "oracle" => SegmenterKind::Oracle,
                "http" => SegmenterKind::Http,
                other => {
                    return Err(Error::Invalid(format!(
                        "unknown segmenter '{other}' (expected oracle or http)"
                    )))
                }
            };
        }
        if let Some(v) = self.epochs {
            cfg.deform.epochs = v;
        }
        if let Some(v) = self.learning_rate {
            cfg.deform.learning_rate = v;
        }
        if let Some(v) = self.latent_dim {
            cfg.deform.latent_dim = v;
        }
        if let Some(v) = self.hidden_dim {
            cfg.deform.hidden_dim = v;
        }
        if let Some(v) = self.max_depth {
            cfg.refiner.max_depth = v;
        }
        if let Some(v) = self.s_min {
            cfg.refiner.s_min = v;
        }
        if let Some(v) = self.ellipse_sigma {
            cfg.refiner.ellipse_sigma = v;
        }
        if let Some(v) = &self.pivot_estimator {
            cfg.pivot_estimator = match v.as_str() {
                "pseudoinverse" => PivotEstimator::Pseudoinverse,
                "static-centroids" => PivotEstimator::StaticCentroids,
                other => {
                    return Err(Error::Invalid(format!(
                        "unknown pivot estimator '{other}' (expected pseudoinverse or static-centroids)"
                    )))
                }
            };
        }
        if let Some(v) = &self.pair {
            cfg.state_pair = Some(parse_pair(v)?);
        }
        if let Some(v) = self.threads {
            cfg.threads = v;
        }
        cfg.validate()?;
        if cfg.threads > 0 {
            // Ignore the error if a pool was already installed.
            let _ = rayon::ThreadPoolBuilder::new()
                .num_threads(cfg.threads)
                .build_global();
        }
        Ok(cfg)
    }
}

fn parse_pair(text: &str) -> Result<(usize, usize), Error> {
    let parts: Vec<&str> = text.split(',').collect();
    if parts.len() != 2 {
        return Err(Error::Invalid(format!(
            "state pair '{text}' must be two comma-separated indices, e.g. 0,3"
        )));
    }
    let a = parts[0]
        .trim()
        .parse()
        .map_err(|_| Error::Invalid(format!("bad state index '{}'", parts[0])))?;
    let b = parts[1]
        .trim()
        .parse()
        .map_err(|_| Error::Invalid(format!("bad state index '{}'", parts[1])))?;
    Ok((a, b))
}

fn parse_float_list(text: &str) -> Result<Vec<f64>, Error> {
    text.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| Error::Invalid(format!("bad number '{t}' in list")))
        })
        .collect()
}

fn parse_label_list(text: &str) -> Result<BTreeSet<u32>, Error> {
    text.split(',')
        .map(|t| {
            t.trim()
                .parse::<u32>()
                .map_err(|_| Error::Invalid(format!("bad label '{t}' in list")))
        })
        .collect()
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic scene (manifest + ground-truth masks).
    Synth {
        /// Preset name: storage2, storage3, box, or eyeglasses2r.
        #[arg(long, conflicts_with = "spec")]
        preset: Option<String>,
        /// Scene spec JSON file (alternative to --preset).
        #[arg(long)]
        spec: Option<PathBuf>,
        /// Output directory for scene.json and masks/.
        #[arg(long)]
        out: PathBuf,
        /// Skip writing per-view ground-truth masks.
        #[arg(long)]
        no_masks: bool,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Fit the latent-conditioned deformation field to a scene.
    FitDeform {
        #[arg(long)]
        scene: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Coarse + refined part segmentation; writes labels.json.
    Segment {
        #[arg(long)]
        scene: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Joint classification and parameter fitting from a labels file.
    Kinematics {
        #[arg(long)]
        scene: PathBuf,
        /// labels.json produced by `segment` (the refined labels are used).
        #[arg(long)]
        labels: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Interpolate the latent code between two trained states.
    Interp {
        #[arg(long)]
        scene: PathBuf,
        /// Checkpoint written by fit-deform.
        #[arg(long)]
        checkpoint: PathBuf,
        /// Comma-separated interpolation parameters in [0, 1].
        #[arg(long, default_value = "0,0.5,1")]
        t: String,
        /// Deform only these part labels (comma-separated); the rest stay
        /// on the start-state deformation.
        #[arg(long)]
        part: Option<String>,
        /// Latent of the start state (index).
        #[arg(long, default_value_t = 0)]
        from: usize,
        /// Latent of the end state (index; default last).
        #[arg(long)]
        to: Option<usize>,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Render color and depth images of a state.
    Render {
        #[arg(long)]
        scene: PathBuf,
        /// State index to render; omit for the canonical field.
        #[arg(long)]
        state: Option<usize>,
        /// Comma-separated view indices (default: all).
        #[arg(long)]
        views: Option<String>,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Score labels and joints against ground truth.
    Eval {
        #[arg(long)]
        scene: PathBuf,
        #[arg(long)]
        labels: PathBuf,
        /// joints.json produced by `kinematics`.
        #[arg(long)]
        joints: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Full pipeline: segment -> kinematics -> eval with all artifacts.
    Pipeline {
        #[arg(long)]
        scene: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        config: ConfigArgs,
    },
}

fn ensure_dir(path: &Path) -> Result<(), Error> {
    std::fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

fn read_labels_file(path: &Path) -> Result<LabelsFile, Error> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text)
        .map_err(|e| Error::Invalid(format!("malformed labels file {}: {e}", path.display())))
}

fn read_joints_file(path: &Path) -> Result<JointsFile, Error> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text)
        .map_err(|e| Error::Invalid(format!("malformed joints file {}: {e}", path.display())))
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Synth {
            preset,
            spec,
            out,
            no_masks,
            config,
        } => {
            let cfg = config.resolve()?;
            let mut scene_spec = match (&preset, &spec) {
                (Some(name), None) => SceneSpec::preset(name).ok_or_else(|| {
                    Error::Invalid(format!(
                        "unknown preset '{name}' (available: {})",
                        SceneSpec::preset_names().join(", ")
                    ))
                })?,
                (None, Some(path)) => {
                    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
                    serde_json::from_str(&text)
                        .map_err(|e| Error::Invalid(format!("malformed scene spec: {e}")))?
                }
                _ => {
                    return Err(Error::Invalid(
                        "exactly one of --preset or --spec is required".into(),
                    ))
                }
            };
            if config.seed.is_some() {
                scene_spec.seed = cfg.seed;
            }
            let bundle = generate_scene(&scene_spec)?;
            ensure_dir(&out)?;
            save_field(&bundle, &out.join("scene.json"))?;
            write_json(&out.join("spec.json"), &scene_spec)?;
            if !no_masks {
                let masks_dir = out.join("masks");
                ensure_dir(&masks_dir)?;
                for view in 0..bundle.cameras[0].len() {
                    for mask in ground_truth_masks(&bundle, view) {
                        let name = format!("view{:02}_part{}.pgm", view, mask.label);
                        write_mask_pgm(&mask.mask, &masks_dir.join(&name))
                            .map_err(|e| Error::io(masks_dir.join(&name), e))?;
                    }
                }
            }
            println!(
                "wrote scene with {} primitives, {} states, {} views/state to {}",
                bundle.num_primitives(),
                bundle.num_states(),
                bundle.cameras[0].len(),
                out.display()
            );
            Ok(())
        }
        Command::FitDeform { scene, out, config } => {
            let cfg = config.resolve()?;
            let bundle = load_scene(&scene)?;
            ensure_dir(&out)?;
            let fit_cfg = cfg.fit_config();
            let result = deform::fit(&bundle, &fit_cfg)?;
            let path = out.join("checkpoint.json");
            deform::save_checkpoint(&path, &result.net, &result.latents, &fit_cfg)?;
            println!(
                "fit {} epochs: loss {:.6e} -> {:.6e}; checkpoint at {}",
                fit_cfg.epochs,
                result.initial_loss,
                result.final_loss,
                path.display()
            );
            Ok(())
        }
        Command::Segment { scene, out, config } => {
            let cfg = config.resolve()?;
            let bundle = load_scene(&scene)?;
            ensure_dir(&out)?;
            let labels = segment_only(&bundle, &cfg)?;
            write_json(&out.join("labels.json"), &labels)?;
            let parts = artikin_core::field::label_histogram(&labels.refined);
            println!(
                "segmented {} primitives into {} labels: {:?}",
                labels.refined.len(),
                parts.len(),
                parts
            );
            Ok(())
        }
        Command::Kinematics {
            scene,
            labels,
            out,
            config,
        } => {
            let cfg = config.resolve()?;
            let bundle = load_scene(&scene)?;
            let labels = read_labels_file(&labels)?;
            ensure_dir(&out)?;
            let pair = cfg.resolve_state_pair(bundle.num_states());
            let fits = artikin_core::kinematics::analyze_parts(
                &bundle,
                &labels.refined,
                pair.0,
                pair.1,
                &cfg.analyze_config(),
            )?;
            let mut parts = std::collections::BTreeMap::new();
            for (label, fit) in &fits {
                let entry = match fit {
                    Ok(fit) => JointEntry {
                        joint: Some(JointRecord::from_model(&fit.model)),
                        diagnostics: Some(fit.diagnostics.clone()),
                        error: None,
                    },
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
            write_json(&out.join("joints.json"), &joints)?;
            for (label, entry) in &joints.parts {
                match (&entry.joint, &entry.error) {
                    (Some(j), _) => println!(
                        "part {label}: {} axis [{:.4}, {:.4}, {:.4}] magnitude {:.4}",
                        j.kind, j.axis[0], j.axis[1], j.axis[2], j.magnitude
                    ),
                    (None, Some(e)) => println!("part {label}: failed ({e})"),
                    _ => {}
                }
            }
            Ok(())
        }
        Command::Interp {
            scene,
            checkpoint,
            t,
            part,
            from,
            to,
            out,
            config,
        } => {
            let _cfg = config.resolve()?;
            let bundle = load_scene(&scene)?;
            let (net, latents, _fit_cfg) = deform::load_checkpoint(&checkpoint)?;
            let to = to.unwrap_or(latents.len().saturating_sub(1));
            if from >= latents.len() || to >= latents.len() {
                return Err(Error::Invalid(format!(
                    "latent indices {from},{to} out of range ({} states in checkpoint)",
                    latents.len()
                )));
            }
            let ts = parse_float_list(&t)?;
            let filter = part.as_deref().map(parse_label_list).transpose()?;
            ensure_dir(&out)?;
            for (i, &tv) in ts.iter().enumerate() {
                let snap = deform::interpolate(
                    &net,
                    &latents[from],
                    &latents[to],
                    tv,
                    &bundle.canonical,
                    filter.as_ref(),
                )?;
                let state_path = out.join(format!("interp_{i:02}.json"));
                write_state_json(&state_path, &snap)?;
                let render = render_view(&snap, &bundle.cameras[0][0]);
                let ppm_path = out.join(format!("interp_{i:02}.ppm"));
                write_ppm(&render.color, &ppm_path).map_err(|e| Error::io(&ppm_path, e))?;
            }
            println!("wrote {} interpolated states to {}", ts.len(), out.display());
            Ok(())
        }
        Command::Render {
            scene,
            state,
            views,
            out,
            config,
        } => {
            let _cfg = config.resolve()?;
            let bundle = load_scene(&scene)?;
            let (snapshot, rig, tag): (&StateSnapshot, usize, String) = match state {
                Some(k) => {
                    if k >= bundle.num_states() {
                        return Err(Error::Invalid(format!(
                            "state {k} out of range ({} states)",
                            bundle.num_states()
                        )));
                    }
                    (&bundle.states[k], k, format!("state{k}"))
                }
                None => (&bundle.canonical, 0, "canonical".to_string()),
            };
            let view_ids: Vec<usize> = match views {
                Some(list) => list
                    .split(',')
                    .map(|v| {
                        v.trim().parse::<usize>().map_err(|_| {
                            Error::Invalid(format!("bad view index '{v}'"))
                        })
                    })
                    .collect::<Result<_, _>>()?,
                None => (0..bundle.cameras[rig].len()).collect(),
            };
            ensure_dir(&out)?;
            for v in view_ids {
                let cam = bundle.cameras[rig].get(v).ok_or_else(|| {
                    Error::Invalid(format!(
                        "view {v} out of range ({} views)",
                        bundle.cameras[rig].len()
                    ))
                })?;
                let render = render_view(snapshot, cam);
                let color = out.join(format!("{tag}_view{v:02}.ppm"));
                write_ppm(&render.color, &color).map_err(|e| Error::io(&color, e))?;
                let depth = out.join(format!("{tag}_view{v:02}_depth.pgm"));
                write_pgm16(&render.depth, &depth).map_err(|e| Error::io(&depth, e))?;
                for (label, weights) in &render.weight_maps {
                    let path = out.join(format!("{tag}_view{v:02}_weight_part{label}.pgm"));
                    write_pgm16(weights, &path).map_err(|e| Error::io(&path, e))?;
                }
            }
            println!("rendered {tag} to {}", out.display());
            Ok(())
        }
        Command::Eval {
            scene,
            labels,
            joints,
            out,
            config,
        } => {
            let cfg = config.resolve()?;
            let bundle = load_scene(&scene)?;
            if bundle.ground_truth.is_none() {
                return Err(Error::Invalid(
                    "scene manifest has no ground_truth block; eval needs one".into(),
                ));
            }
            let labels = read_labels_file(&labels)?;
            let joints = read_joints_file(&joints)?;
            let pair = cfg
                .state_pair
                .unwrap_or(joints.state_pair);
            let report = evaluate(&bundle, &labels.refined, &joints.models(), pair)?;
            ensure_dir(&out)?;
            write_json(&out.join("report.json"), &report)?;
            std::fs::write(out.join("report.csv"), report.to_csv())
                .map_err(|e| Error::io(out.join("report.csv"), e))?;
            println!(
                "label accuracy {:.4}; worst axis angle {:.4} deg; report at {}",
                report.label_accuracy,
                report.max_axis_angle(),
                out.display()
            );
            Ok(())
        }
        Command::Pipeline { scene, out, config } => {
            let cfg = config.resolve()?;
            let summary = run_pipeline(&scene, &out, &cfg)?;
            println!(
                "pipeline done: {} splits, label accuracy {:.4}, kinds correct: {}",
                summary.splits,
                summary.report.label_accuracy,
                summary.report.all_kinds_correct()
            );
            for w in &summary.warnings {
                eprintln!("warning: {w}");
            }
            Ok(())
        }
    }
}

/// Coarse + refined segmentation shared by the segment subcommand.
fn segment_only(
    bundle: &artikin_core::SceneBundle,
    cfg: &RunConfig,
) -> Result<LabelsFile, Error> {
    let provider: Box<dyn artikin_core::segment::PartCountProvider> = match cfg.provider {
        ProviderKind::Oracle => {
            if bundle.ground_truth.is_none() {
                return Err(artikin_core::segment::SegmentError::NoGroundTruth.into());
            }
            Box::new(artikin_core::segment::OracleProvider { bundle })
        }
        ProviderKind::Fixed => Box::new(artikin_core::segment::FixedProvider {
            count: cfg.fixed_count,
        }),
        ProviderKind::Http => artikin_core::http::HttpProvider::from_env()
            .map(|p| Box::new(p) as Box<dyn artikin_core::segment::PartCountProvider>)
            .ok_or_else(|| {
                Error::Invalid(format!(
                    "http provider selected but {} is not set",
                    artikin_core::http::VLM_ENDPOINT_VAR
                ))
            })?,
    };
    let coarse = artikin_core::segment::coarse_labels(
        bundle,
        cfg.tau_mot,
        provider.as_ref(),
        cfg.count_queries,
        cfg.provider_retries,
        cfg.seed,
    )?;
    let segmenter: Box<dyn artikin_core::refine::Segmenter> = match cfg.segmenter {
        SegmenterKind::Oracle => Box::new(artikin_core::refine::OracleSegmenter::new(bundle)?),
        SegmenterKind::Http => artikin_core::http::HttpSegmenter::from_env()
            .map(|s| Box::new(s) as Box<dyn artikin_core::refine::Segmenter>)
            .ok_or_else(|| {
                Error::Invalid(format!(
                    "http segmenter selected but {} is not set",
                    artikin_core::http::SAM_ENDPOINT_VAR
                ))
            })?,
    };
    let outcome = artikin_core::refine::refine_labels(
        bundle,
        &coarse,
        segmenter.as_ref(),
        &cfg.refine_config(),
    )?;
    Ok(LabelsFile {
        coarse,
        refined: outcome.original_labels,
        refined_field: outcome.refined.labels(),
    })
}

fn write_state_json(path: &Path, snap: &StateSnapshot) -> Result<(), Error> {
    #[derive(serde::Serialize)]
    struct Prim {
        mu: [f64; 3],
        q: [f64; 4],
        s: [f64; 3],
        rgb: [f64; 3],
        opacity: f64,
        label: u32,
    }
    let prims: Vec<Prim> = snap
        .primitives
        .iter()
        .map(|p| Prim {
            mu: [p.center.x, p.center.y, p.center.z],
            q: p.orientation.to_array(),
            s: [p.scale.x, p.scale.y, p.scale.z],
            rgb: p.color,
            opacity: p.opacity,
            label: p.label,
        })
        .collect();
    write_json(path, &serde_json::json!({ "primitives": prims }))?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return ExitCode::SUCCESS;
            }
            // One-line actionable message, then usage context.
            eprintln!("{e}");
            return ExitCode::from(1);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_validation() { 1 } else { 2 })
        }
    }
}
