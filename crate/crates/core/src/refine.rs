//! Boundary refinement of coarse part labels: visibility-aware pixel
//! assignment, farthest-point prompt sampling, mask acquisition through a
//! segmenter abstraction, boundary-candidate detection, recursive
//! boundary-aware Gaussian splitting, and multiview label voting.

use std::cell::RefCell;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap};

use nalgebra::{Vector2, Vector3};
use thiserror::Error;

use crate::field::{CameraModel, GaussianPrimitive, SceneBundle, StateSnapshot};
use crate::image::{BinaryMask, RgbImage};
use crate::splat::{project_gaussian, render_view, ProjectedGaussian, RenderOutput};

/// Default winner-margin threshold for pixel assignment.
pub const DEFAULT_TAU_VIS: f64 = 2.0;
/// Margin-test epsilon.
pub const VIS_EPS: f64 = 1e-9;
/// Positive prompts requested per (part, view).
pub const N_POSITIVE: usize = 10;
/// Negative prompts requested per (part, view).
pub const N_NEGATIVE: usize = 20;

#[derive(Debug, Error)]
pub enum RefineError {
    #[error("prompt pixel ({0}, {1}) outside {2}x{3} image")]
    PromptOutOfBounds(i64, i64, usize, usize),
    #[error("mask dimensions {0}x{1} do not match image {2}x{3}")]
    MaskDimensionMismatch(usize, usize, usize, usize),
    #[error("segmenter failed: {0}")]
    SegmenterFailed(String),
    #[error("split ratio {0} outside (0, 1)")]
    BadSplitRatio(f64),
    #[error("split direction is not unit (norm {0})")]
    BadSplitDirection(f64),
    #[error("label vector length {0} != primitive count {1}")]
    LabelLength(usize, usize),
    #[error("ground truth required by the oracle segmenter")]
    NoGroundTruth,
}

/// A per-view, per-part binary mask.
#[derive(Debug, Clone)]
pub struct PartMask {
    pub view: usize,
    pub label: u32,
    pub mask: BinaryMask,
}

/// Point prompts for one (part, view) query: positives on pixels assigned
/// to the part, negatives on pixels the part does not touch at all.
#[derive(Debug, Clone)]
pub struct PromptSet {
    pub view: usize,
    pub label: u32,
    pub positives: Vec<(u32, u32)>,
    pub negatives: Vec<(u32, u32)>,
}

impl PromptSet {
    pub fn validate(&self, width: usize, height: usize) -> Result<(), RefineError> {
        for &(x, y) in self.positives.iter().chain(&self.negatives) {
            if x as usize >= width || y as usize >= height {
                return Err(RefineError::PromptOutOfBounds(
                    x as i64,
                    y as i64,
                    width,
                    height,
                ));
            }
        }
        Ok(())
    }
}

/// External mask source: given an RGB render and point prompts, produce a
/// binary mask for the prompted part.
pub trait Segmenter {
    fn segment(&self, image: &RgbImage, prompts: &PromptSet) -> Result<PartMask, RefineError>;
}

/// Oracle segmenter: ignores the prompts (after validating them) and
/// returns the exact ground-truth silhouette of the prompted part.
pub struct OracleSegmenter<'a> {
    bundle: &'a SceneBundle,
    cache: RefCell<BTreeMap<usize, Vec<PartMask>>>,
}

impl<'a> OracleSegmenter<'a> {
    pub fn new(bundle: &'a SceneBundle) -> Result<Self, RefineError> {
        if bundle.ground_truth.is_none() {
            return Err(RefineError::NoGroundTruth);
        }
        Ok(OracleSegmenter {
            bundle,
            cache: RefCell::new(BTreeMap::new()),
        })
    }
}

impl Segmenter for OracleSegmenter<'_> {
    fn segment(&self, image: &RgbImage, prompts: &PromptSet) -> Result<PartMask, RefineError> {
        prompts.validate(image.width, image.height)?;
        let mut cache = self.cache.borrow_mut();
        let masks = cache
            .entry(prompts.view)
            .or_insert_with(|| crate::synth::ground_truth_masks(self.bundle, prompts.view));
        masks
            .iter()
            .find(|m| m.label == prompts.label)
            .cloned()
            .ok_or_else(|| {
                RefineError::SegmenterFailed(format!(
                    "no ground-truth part {} in view {}",
                    prompts.label, prompts.view
                ))
            })
    }
}

/// Per-pixel part assignment from the winner-margin test.
#[derive(Debug, Clone)]
pub struct PixelAssignment {
    pub width: usize,
    pub height: usize,
    pub labels: Vec<Option<u32>>,
}

impl PixelAssignment {
    pub fn get(&self, x: usize, y: usize) -> Option<u32> {
        self.labels[y * self.width + x]
    }
}

/// Assign each pixel to the part whose accumulated weight beats the best
/// competitor by the ratio tau_vis; ambiguous pixels stay unassigned.
pub fn part_pixel_assignment(render: &RenderOutput, tau_vis: f64) -> PixelAssignment {
    let (w, h) = (render.width(), render.height());
    let mut labels = vec![None; w * h];
    let parts: Vec<(&u32, &crate::image::ScalarImage)> = render.weight_maps.iter().collect();
    for (idx, slot) in labels.iter_mut().enumerate() {
        let mut best = (0.0f64, None::<u32>);
        let mut second = 0.0f64;
        for (label, map) in &parts {
            let v = map.data[idx];
            if v > best.0 {
                second = best.0;
                best = (v, Some(**label));
            } else if v > second {
                second = v;
            }
        }
        if let (v, Some(label)) = best {
            if v / (second + VIS_EPS) > tau_vis {
                *slot = Some(label);
            }
        }
    }
    PixelAssignment {
        width: w,
        height: h,
        labels,
    }
}

/// Deterministic farthest-point sampling over pixel coordinates: the first
/// pick is the member nearest the set centroid, then each pick maximizes
/// the minimum distance to the chosen set (ties break on index order).
pub fn farthest_point_sample(points: &[(u32, u32)], count: usize) -> Vec<(u32, u32)> {
    if points.is_empty() || count == 0 {
        return Vec::new();
    }
    if points.len() <= count {
        return points.to_vec();
    }
    let n = points.len();
    let cx = points.iter().map(|p| p.0 as f64).sum::<f64>() / n as f64;
    let cy = points.iter().map(|p| p.1 as f64).sum::<f64>() / n as f64;
    let d2 = |a: (u32, u32), b: (f64, f64)| {
        let dx = a.0 as f64 - b.0;
        let dy = a.1 as f64 - b.1;
        dx * dx + dy * dy
    };
    let mut first = 0usize;
    let mut best = f64::INFINITY;
    for (i, &p) in points.iter().enumerate() {
        let d = d2(p, (cx, cy));
        if d < best {
            best = d;
            first = i;
        }
    }
    let mut chosen = vec![first];
    let mut min_dist: Vec<f64> = points
        .iter()
        .map(|&p| d2(p, (points[first].0 as f64, points[first].1 as f64)))
        .collect();
    while chosen.len() < count {
        let mut next = 0usize;
        let mut far = -1.0;
        for (i, &d) in min_dist.iter().enumerate() {
            if d > far {
                far = d;
                next = i;
            }
        }
        chosen.push(next);
        for (i, &p) in points.iter().enumerate() {
            let d = d2(p, (points[next].0 as f64, points[next].1 as f64));
            if d < min_dist[i] {
                min_dist[i] = d;
            }
        }
    }
    chosen.into_iter().map(|i| points[i]).collect()
}

/// Sample positive and negative prompts for one part in one view. Returns
/// None (skip this pair) when the part has no assigned pixels.
pub fn sample_prompts(
    assignment: &PixelAssignment,
    render: &RenderOutput,
    part: u32,
    view: usize,
) -> Option<PromptSet> {
    let (w, h) = (assignment.width, assignment.height);
    let mut positives = Vec::new();
    for y in 0..h {
        for x in 0..w {
            if assignment.get(x, y) == Some(part) {
                positives.push((x as u32, y as u32));
            }
        }
    }
    if positives.is_empty() {
        return None;
    }
    let weight = render.weight_maps.get(&part);
    let mut negatives = Vec::new();
    for y in 0..h {
        for x in 0..w {
            let touched = weight.map_or(0.0, |m| m.get(x, y));
            if touched == 0.0 {
                negatives.push((x as u32, y as u32));
            }
        }
    }
    Some(PromptSet {
        view,
        label: part,
        positives: farthest_point_sample(&positives, N_POSITIVE),
        negatives: farthest_point_sample(&negatives, N_NEGATIVE),
    })
}

/// Acquire one mask per (nonzero part, selected view) by rendering the
/// labeled canonical field, assigning pixels, sampling prompts, and
/// querying the segmenter. Pairs whose positive set is empty are skipped
/// with a warning record.
pub fn acquire_masks(
    segmenter: &dyn Segmenter,
    bundle: &SceneBundle,
    labels: &[u32],
    views: &[usize],
    tau_vis: f64,
) -> Result<(Vec<PartMask>, Vec<String>), RefineError> {
    if labels.len() != bundle.num_primitives() {
        return Err(RefineError::LabelLength(
            labels.len(),
            bundle.num_primitives(),
        ));
    }
    let field = bundle.canonical.with_labels(labels);
    let mut parts: Vec<u32> = labels.iter().copied().filter(|&l| l != 0).collect();
    parts.sort_unstable();
    parts.dedup();

    let mut masks = Vec::new();
    let mut warnings = Vec::new();
    for &view in views {
        let cam = &bundle.cameras[0][view];
        let render = render_view(&field, cam);
        let assignment = part_pixel_assignment(&render, tau_vis);
        for &part in &parts {
            match sample_prompts(&assignment, &render, part, view) {
                Some(prompts) => {
                    prompts.validate(cam.width, cam.height)?;
                    let mask = segmenter.segment(&render.color, &prompts)?;
                    if mask.mask.width != cam.width || mask.mask.height != cam.height {
                        return Err(RefineError::MaskDimensionMismatch(
                            mask.mask.width,
                            mask.mask.height,
                            cam.width,
                            cam.height,
                        ));
                    }
                    masks.push(mask);
                }
                None => warnings.push(format!(
                    "part {part} has no assigned pixels in view {view}; skipped"
                )),
            }
        }
    }
    Ok((masks, warnings))
}

/// How one projected primitive relates to a mask along its major axis.
struct AxisProbe {
    end_a: Vector2<f64>,
    end_b: Vector2<f64>,
    inside_a: bool,
    inside_b: bool,
}

fn probe_axis(pg: &ProjectedGaussian, mask: &BinaryMask, sigma: f64) -> AxisProbe {
    let eig = nalgebra::SymmetricEigen::new(pg.cov2d);
    let (major, lambda) = if eig.eigenvalues[0] >= eig.eigenvalues[1] {
        (eig.eigenvectors.column(0).into_owned(), eig.eigenvalues[0])
    } else {
        (eig.eigenvectors.column(1).into_owned(), eig.eigenvalues[1])
    };
    let half = sigma * lambda.max(0.0).sqrt();
    let end_a = pg.mean2d + half * major;
    let end_b = pg.mean2d - half * major;
    // A 1-pixel dilation absorbs rasterization aliasing at the silhouette
    // fringe; genuine overflow spans several pixels.
    let inside =
        |p: &Vector2<f64>| mask.contains_dilated(p.x.floor() as i64, p.y.floor() as i64, 1);
    AxisProbe {
        end_a,
        end_b,
        inside_a: inside(&end_a),
        inside_b: inside(&end_b),
    }
}

/// Walk the pixel segment from the in-mask endpoint toward the out-of-mask
/// endpoint; (lambda, overflow px) at the first mask exit, or None when the
/// overflow is sub-pixel.
fn walk_crossing(from: Vector2<f64>, to: Vector2<f64>, mask: &BinaryMask) -> Option<(f64, f64)> {
    let delta = to - from;
    let steps = delta.x.abs().max(delta.y.abs()).ceil() as usize;
    if steps == 0 {
        return None;
    }
    for i in 1..=steps {
        let t = i as f64 / steps as f64;
        let p = from + t * delta;
        if !mask.contains(p.x.floor() as i64, p.y.floor() as i64) {
            if i == steps {
                return None;
            }
            return Some((t, (1.0 - t) * delta.norm()));
        }
    }
    None
}

/// Nearest view of a primitive: minimum camera-space depth among views
/// where it projects on-screen and a mask exists to compare against.
fn nearest_view(
    p: &GaussianPrimitive,
    cams: &[CameraModel],
    usable_views: &BTreeSet<usize>,
) -> Option<(usize, ProjectedGaussian)> {
    views_by_depth(p, cams, usable_views).into_iter().next()
}

/// Usable views ordered by ascending camera-space depth of the primitive.
fn views_by_depth(
    p: &GaussianPrimitive,
    cams: &[CameraModel],
    usable_views: &BTreeSet<usize>,
) -> Vec<(usize, ProjectedGaussian)> {
    let mut views: Vec<(usize, ProjectedGaussian)> = cams
        .iter()
        .enumerate()
        .filter(|(v, _)| usable_views.contains(v))
        .filter_map(|(v, cam)| project_gaussian(p, cam, 0).map(|pg| (v, pg)))
        .collect();
    views.sort_by(|a, b| a.1.depth.partial_cmp(&b.1.depth).unwrap().then(a.0.cmp(&b.0)));
    views
}

/// Detect primitives whose projected major axis pokes outside their own
/// part's mask in their nearest view. Returns (primitive index, view).
pub fn detect_boundary_candidates(
    field: &StateSnapshot,
    masks: &[PartMask],
    cams: &[CameraModel],
    ellipse_sigma: f64,
) -> Vec<(usize, usize)> {
    let mask_map: BTreeMap<(u32, usize), &BinaryMask> = masks
        .iter()
        .map(|m| ((m.label, m.view), &m.mask))
        .collect();
    let mut views_per_part: BTreeMap<u32, BTreeSet<usize>> = BTreeMap::new();
    for m in masks {
        views_per_part.entry(m.label).or_default().insert(m.view);
    }

    let mut out = Vec::new();
    for (i, p) in field.primitives.iter().enumerate() {
        if p.label == 0 {
            continue;
        }
        let Some(views) = views_per_part.get(&p.label) else {
            continue;
        };
        let Some((view, pg)) = nearest_view(p, cams, views) else {
            continue;
        };
        let mask = mask_map[&(p.label, view)];
        let probe = probe_axis(&pg, mask, ellipse_sigma);
        if !probe.inside_a || !probe.inside_b {
            out.push((i, view));
        }
    }
    out
}

/// Split a primitive along its major axis at in-mask ratio `lambda`, with
/// `e` the unit major-axis direction pointing toward the in-mask endpoint.
/// The part child keeps the in-mask portion (length lambda * s_max), the
/// background child the overflow; the children tile the parent's axis
/// segment exactly.
pub fn split_gaussian(
    p: &GaussianPrimitive,
    lambda: f64,
    e: &Vector3<f64>,
) -> Result<(GaussianPrimitive, GaussianPrimitive), RefineError> {
    if !(lambda > 0.0 && lambda < 1.0) {
        return Err(RefineError::BadSplitRatio(lambda));
    }
    if (e.norm() - 1.0).abs() > 1e-9 {
        return Err(RefineError::BadSplitDirection(e.norm()));
    }
    let axis_idx = major_axis_index(p);
    let s_max = p.scale[axis_idx];

    let mut part_child = p.clone();
    part_child.center = p.center + ((1.0 - lambda) / 2.0) * s_max * e;
    part_child.scale[axis_idx] = lambda * s_max;

    let mut bg_child = p.clone();
    bg_child.center = p.center - (lambda / 2.0) * s_max * e;
    bg_child.scale[axis_idx] = (1.0 - lambda) * s_max;

    Ok((part_child, bg_child))
}

fn major_axis_index(p: &GaussianPrimitive) -> usize {
    let s = &p.scale;
    if s.x >= s.y && s.x >= s.z {
        0
    } else if s.y >= s.z {
        1
    } else {
        2
    }
}

/// World-space unit direction of the primitive's major axis.
fn major_axis_direction(p: &GaussianPrimitive) -> Vector3<f64> {
    let mut local = Vector3::zeros();
    local[major_axis_index(p)] = 1.0;
    p.orientation.rotate(&local)
}

pub struct RefineConfig {
    pub max_depth: u32,
    pub s_min: f64,
    pub ellipse_sigma: f64,
    pub tau_vis: f64,
}

impl Default for RefineConfig {
    fn default() -> Self {
        RefineConfig {
            max_depth: 4,
            s_min: 1e-4,
            ellipse_sigma: 3.0,
            tau_vis: DEFAULT_TAU_VIS,
        }
    }
}

pub struct RefineOutcome {
    /// Canonical snapshot with split children and voted labels.
    pub refined: StateSnapshot,
    /// Labels mapped back onto the original primitives (majority by axis
    /// length over each primitive's descendants), usable wherever
    /// index-stable identity across states is required.
    pub original_labels: Vec<u32>,
    pub splits: usize,
    pub warnings: Vec<String>,
}

#[derive(Debug)]
struct QueueEntry {
    seq: usize,
    prim: usize,
    depth: u32,
    lambda: f64,
    direction: Vector3<f64>,
    overflow_px: f64,
}

impl PartialEq for QueueEntry {
    fn eq(&self, other: &Self) -> bool {
        self.seq == other.seq
    }
}
impl Eq for QueueEntry {}
impl Ord for QueueEntry {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        // Max-heap on overflow, FIFO on ties.
        self.overflow_px
            .partial_cmp(&other.overflow_px)
            .unwrap()
            .then(other.seq.cmp(&self.seq))
    }
}
impl PartialOrd for QueueEntry {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

/// Build a split plan for one primitive against one mask, orienting the 3D
/// major axis toward the in-mask endpoint.
///
/// The walk runs along the sigma-extent endpoint segment, but the returned
/// ratio is re-expressed on the physical axis segment (half-length s/2
/// corresponds to one sigma of extent). Crossings that never enter the
/// physical segment are fringe-only and yield no plan.
fn plan_split(
    p: &GaussianPrimitive,
    cam: &CameraModel,
    mask: &BinaryMask,
    sigma: f64,
) -> Option<(f64, Vector3<f64>, f64)> {
    let pg = project_gaussian(p, cam, 0)?;
    let probe = probe_axis(&pg, mask, sigma);
    let (from, to) = match (probe.inside_a, probe.inside_b) {
        (true, false) => (probe.end_a, probe.end_b),
        (false, true) => (probe.end_b, probe.end_a),
        _ => return None, // fully inside, or no in-mask anchor to walk from
    };
    let (t, overflow_px) = walk_crossing(from, to, mask)?;
    // Endpoints sit at sigma * (s/2) from the center; map the crossing onto
    // the physical segment [-s/2, +s/2].
    let lambda = (1.0 - sigma + 2.0 * sigma * t) / 2.0;
    if !(lambda > 0.001 && lambda < 0.999) {
        return None;
    }

    // Orient the world-space major axis toward the in-mask endpoint. A
    // near-zero projected step means the axis points down the viewing ray
    // and the orientation is unrecoverable in this view.
    let mut direction = major_axis_direction(p);
    let ahead = p.center + 1e-4 * p.scale[major_axis_index(p)] * direction;
    let (ux, uy, _) = cam.project_point(&ahead)?;
    let step = Vector2::new(ux, uy) - pg.mean2d;
    if step.norm() < 1e-12 {
        return None;
    }
    if step.dot(&(from - pg.mean2d)) < 0.0 {
        direction = -direction;
    }
    Some((lambda, direction, overflow_px))
}

/// Refine coarse labels by recursive boundary-aware splitting and
/// multiview voting. Deterministic for fixed inputs and config.
pub fn refine_labels(
    bundle: &SceneBundle,
    labels: &[u32],
    segmenter: &dyn Segmenter,
    cfg: &RefineConfig,
) -> Result<RefineOutcome, RefineError> {
    if labels.len() != bundle.num_primitives() {
        return Err(RefineError::LabelLength(
            labels.len(),
            bundle.num_primitives(),
        ));
    }
    let cams = &bundle.cameras[0];
    let views: Vec<usize> = (0..cams.len()).collect();
    let (masks, warnings) = acquire_masks(segmenter, bundle, labels, &views, cfg.tau_vis)?;
    // Per-part restricted depth per view: the depth of each part's own
    // surface along every pixel ray, used to test whether a child actually
    // lies on a part's surface before it may vote for that part.
    let coarse_field = bundle.canonical.with_labels(labels);
    let mut part_labels_all: Vec<u32> = labels.iter().copied().filter(|&l| l != 0).collect();
    part_labels_all.sort_unstable();
    part_labels_all.dedup();
    let mut part_depths: BTreeMap<u32, Vec<crate::image::ScalarImage>> = BTreeMap::new();
    for &label in &part_labels_all {
        let restricted = StateSnapshot {
            state_index: coarse_field.state_index,
            primitives: coarse_field
                .primitives
                .iter()
                .filter(|p| p.label == label)
                .cloned()
                .collect(),
        };
        let depths = cams
            .iter()
            .map(|cam| render_view(&restricted, cam).depth)
            .collect();
        part_depths.insert(label, depths);
    }
    let mask_map: BTreeMap<(u32, usize), &BinaryMask> = masks
        .iter()
        .map(|m| ((m.label, m.view), &m.mask))
        .collect();
    let views_with_any_mask: BTreeSet<usize> = masks.iter().map(|m| m.view).collect();
    let mut views_per_part: BTreeMap<u32, BTreeSet<usize>> = BTreeMap::new();
    for m in &masks {
        views_per_part.entry(m.label).or_default().insert(m.view);
    }

    let mut prims: Vec<GaussianPrimitive> = bundle.canonical.with_labels(labels).primitives;
    let n_original = prims.len();
    // Root original primitive of every live primitive.
    let mut root: Vec<usize> = (0..n_original).collect();
    let mut new_children: BTreeSet<usize> = BTreeSet::new();

    let mut queue: BinaryHeap<QueueEntry> = BinaryHeap::new();
    let mut seq = 0usize;
    for (i, p) in prims.iter().enumerate() {
        if p.label == 0 {
            continue;
        }
        let Some(part_views) = views_per_part.get(&p.label) else {
            continue;
        };
        // Candidacy is decided in the nearest view (endpoint test); the
        // lambda walk may fall through to farther views when the nearest
        // one sees the boundary edge-on and offers no in-mask anchor.
        let ordered = views_by_depth(p, cams, part_views);
        let Some((_, pg)) = ordered.first() else {
            continue;
        };
        let nearest_mask = mask_map[&(p.label, ordered[0].0)];
        let probe = probe_axis(pg, nearest_mask, cfg.ellipse_sigma);
        if probe.inside_a && probe.inside_b {
            continue;
        }
        for (view, _) in &ordered {
            let mask = mask_map[&(p.label, *view)];
            if let Some((lambda, direction, overflow_px)) =
                plan_split(p, &cams[*view], mask, cfg.ellipse_sigma)
            {
                queue.push(QueueEntry {
                    seq,
                    prim: i,
                    depth: 0,
                    lambda,
                    direction,
                    overflow_px,
                });
                seq += 1;
                break;
            }
        }
    }

    let mut splits = 0usize;
    while let Some(entry) = queue.pop() {
        let parent = prims[entry.prim].clone();
        if entry.depth >= cfg.max_depth {
            continue;
        }
        if parent.scale[major_axis_index(&parent)] < cfg.s_min {
            continue;
        }
        let Ok((part_child, bg_child)) = split_gaussian(&parent, entry.lambda, &entry.direction)
        else {
            continue;
        };
        splits += 1;
        let parent_root = root[entry.prim];
        prims[entry.prim] = part_child;
        new_children.insert(entry.prim);
        let bg_index = prims.len();
        prims.push(bg_child);
        root.push(parent_root);
        new_children.insert(bg_index);

        // Re-evaluate the background child against every part mask, walking
        // views from nearest outward; the largest overflow in the first
        // view with any crossing wins.
        let bg = &prims[bg_index];
        for (view, _) in views_by_depth(bg, cams, &views_with_any_mask) {
            let mut best: Option<(f64, Vector3<f64>, f64)> = None;
            for ((_, mask_view), mask) in &mask_map {
                if *mask_view != view {
                    continue;
                }
                if let Some(plan) = plan_split(bg, &cams[view], mask, cfg.ellipse_sigma) {
                    if best.as_ref().is_none_or(|b| plan.2 > b.2) {
                        best = Some(plan);
                    }
                }
            }
            if let Some((lambda, direction, overflow_px)) = best {
                queue.push(QueueEntry {
                    seq,
                    prim: bg_index,
                    depth: entry.depth + 1,
                    lambda,
                    direction,
                    overflow_px,
                });
                seq += 1;
                break;
            }
        }
    }

    // Multiview vote. In each view, a child may vote for a mask only when
    // its center pixel lies in that mask and its depth matches the masked
    // part's own surface depth along the same ray (the child sits on that
    // part's surface there). Children with no votes anywhere keep their
    // inherited label.
    for &idx in &new_children {
        let center = prims[idx].center;
        let provisional = prims[idx].label;
        let mut votes: BTreeMap<u32, usize> = BTreeMap::new();
        for (v, cam) in cams.iter().enumerate() {
            if let Some((x, y, z)) = cam.project_point(&center) {
                let (px, py) = (x.floor() as i64, y.floor() as i64);
                if px < 0 || py < 0 || px as usize >= cam.width || py as usize >= cam.height {
                    continue;
                }
                for ((label, mask_view), mask) in &mask_map {
                    if *mask_view != v || !mask.contains(px, py) {
                        continue;
                    }
                    let surface = part_depths[label][v].get(px as usize, py as usize);
                    if surface > 0.0 && (z - surface).abs() <= 0.015 * z + 0.01 {
                        *votes.entry(*label).or_insert(0) += 1;
                    }
                }
            }
        }
        if let Ok(target) = std::env::var("ARTIKIN_VOTE_DEBUG") {
            if root[idx] == target.parse::<usize>().unwrap_or(usize::MAX) {
                eprintln!("child idx {idx} provisional {provisional} votes {votes:?} center {:?} scale {:?}", prims[idx].center.as_slice(), prims[idx].scale.as_slice());
            }
        }
        let label = votes
            .iter()
            .max_by(|a, b| {
                a.1.cmp(b.1).then_with(|| {
                    // Prefer the provisional label among ties, then smaller.
                    let a_pref = (*a.0 == provisional) as u8;
                    let b_pref = (*b.0 == provisional) as u8;
                    a_pref.cmp(&b_pref).then(b.0.cmp(a.0))
                })
            })
            .map(|(l, _)| *l)
            .unwrap_or(provisional);
        prims[idx].label = label;
    }

    // Map refined labels back to the original index space: majority over
    // descendants weighted by major-axis length.
    let mut tally: Vec<BTreeMap<u32, f64>> = vec![BTreeMap::new(); n_original];
    for (i, p) in prims.iter().enumerate() {
        let w = p.scale[major_axis_index(p)];
        *tally[root[i]].entry(p.label).or_insert(0.0) += w;
    }
    let original_labels: Vec<u32> = tally
        .iter()
        .enumerate()
        .map(|(i, t)| {
            t.iter()
                .max_by(|a, b| a.1.partial_cmp(b.1).unwrap().then(b.0.cmp(a.0)))
                .map(|(l, _)| *l)
                .unwrap_or(labels[i])
        })
        .collect();

    Ok(RefineOutcome {
        refined: StateSnapshot {
            state_index: bundle.canonical.state_index,
            primitives: prims,
        },
        original_labels,
        splits,
        warnings,
    })
}
