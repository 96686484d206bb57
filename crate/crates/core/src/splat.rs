//! Forward-only rasterization of a Gaussian field: covariance projection,
//! per-pixel front-to-back compositing, and color/depth/part-weight maps.
//!
//! Conventions follow the original 3DGS rasterizer: 0.3 px^2 low-pass
//! dilation of the screen-space covariance, density clamped at 0.99, a
//! 3-sigma evaluation cutoff, and depth sorting by center z. Pixels are
//! point-sampled at their centers (x + 0.5, y + 0.5).

use std::collections::BTreeMap;

use nalgebra::{Matrix2, Matrix2x3, Vector2};
use rayon::prelude::*;

use crate::field::{CameraModel, GaussianPrimitive, StateSnapshot};
use crate::field::covariance_of;
use crate::image::{RgbImage, ScalarImage};

/// Low-pass dilation added to both diagonal entries of the 2D covariance.
pub const COV2D_DILATION: f64 = 0.3;
/// Per-primitive density ceiling; keeps transmittance strictly positive.
pub const DENSITY_CLAMP: f64 = 0.99;
/// Mahalanobis cutoff: densities vanish outside this many sigmas.
pub const CUTOFF_SIGMA: f64 = 3.0;
/// Default near-plane; primitives at or behind it are culled.
pub const Z_NEAR: f64 = 1e-4;
/// Accumulated weight below which the depth image reads zero.
pub const DEPTH_WEIGHT_FLOOR: f64 = 1e-6;

/// A primitive projected into one view.
#[derive(Debug, Clone)]
pub struct ProjectedGaussian {
    pub mean2d: Vector2<f64>,
    /// Dilated screen-space covariance in px^2.
    pub cov2d: Matrix2<f64>,
    /// Camera-space z in scene units.
    pub depth: f64,
    pub source_index: usize,
}

impl ProjectedGaussian {
    /// Half-extents of the 3-sigma bounding box along x and y.
    pub fn bbox_radii(&self) -> (f64, f64) {
        (
            CUTOFF_SIGMA * self.cov2d[(0, 0)].max(0.0).sqrt(),
            CUTOFF_SIGMA * self.cov2d[(1, 1)].max(0.0).sqrt(),
        )
    }
}

/// Project one primitive into a camera.
///
/// Returns None (culled) when the center is at or behind the near plane or
/// the 3-sigma screen ellipse misses the viewport. The 2D covariance is
/// `J R Sigma R^T J^T + 0.3 I` with J the perspective Jacobian at the center.
pub fn project_gaussian(
    p: &GaussianPrimitive,
    cam: &CameraModel,
    source_index: usize,
) -> Option<ProjectedGaussian> {
    let c = cam.to_camera(&p.center);
    if c.z <= Z_NEAR {
        return None;
    }
    let mean2d = Vector2::new(
        cam.fx * c.x / c.z + cam.cx,
        cam.fy * c.y / c.z + cam.cy,
    );
    let inv_z = 1.0 / c.z;
    let jac = Matrix2x3::new(
        cam.fx * inv_z,
        0.0,
        -cam.fx * c.x * inv_z * inv_z,
        0.0,
        cam.fy * inv_z,
        -cam.fy * c.y * inv_z * inv_z,
    );
    let jw = jac * cam.rotation;
    let mut cov2d = jw * covariance_of(p) * jw.transpose();
    cov2d[(0, 0)] += COV2D_DILATION;
    cov2d[(1, 1)] += COV2D_DILATION;
    // Symmetrize against rounding.
    let off = 0.5 * (cov2d[(0, 1)] + cov2d[(1, 0)]);
    cov2d[(0, 1)] = off;
    cov2d[(1, 0)] = off;

    let pg = ProjectedGaussian {
        mean2d,
        cov2d,
        depth: c.z,
        source_index,
    };
    let (rx, ry) = pg.bbox_radii();
    let (w, h) = (cam.width as f64, cam.height as f64);
    if mean2d.x + rx < 0.0 || mean2d.x - rx > w || mean2d.y + ry < 0.0 || mean2d.y - ry > h {
        return None;
    }
    Some(pg)
}

/// Screen-space density of a projected primitive at pixel position `x`:
/// `min(opacity * exp(-0.5 d^2), 0.99)`, zero outside the 3-sigma ellipse.
pub fn pixel_density(pg: &ProjectedGaussian, opacity: f64, x: Vector2<f64>) -> f64 {
    let d = x - pg.mean2d;
    let det = pg.cov2d[(0, 0)] * pg.cov2d[(1, 1)] - pg.cov2d[(0, 1)] * pg.cov2d[(1, 0)];
    if det <= 0.0 {
        return 0.0;
    }
    let inv00 = pg.cov2d[(1, 1)] / det;
    let inv01 = -pg.cov2d[(0, 1)] / det;
    let inv11 = pg.cov2d[(0, 0)] / det;
    let maha2 = d.x * d.x * inv00 + 2.0 * d.x * d.y * inv01 + d.y * d.y * inv11;
    if maha2 > CUTOFF_SIGMA * CUTOFF_SIGMA {
        return 0.0;
    }
    (opacity * (-0.5 * maha2).exp()).min(DENSITY_CLAMP)
}

/// Result of compositing one pixel.
#[derive(Debug, Clone, PartialEq)]
pub struct PixelComposite {
    pub color: [f64; 3],
    /// Accumulated weight per part label.
    pub part_weights: BTreeMap<u32, f64>,
    pub transmittance: f64,
}

/// Front-to-back alpha compositing of (density, color, part) entries that
/// are already ordered by ascending depth.
pub fn composite_pixel(entries: &[(f64, [f64; 3], u32)]) -> PixelComposite {
    let mut color = [0.0; 3];
    let mut part_weights = BTreeMap::new();
    let mut transmittance = 1.0;
    for &(rho, c, part) in entries {
        let w = rho * transmittance;
        color[0] += w * c[0];
        color[1] += w * c[1];
        color[2] += w * c[2];
        *part_weights.entry(part).or_insert(0.0) += w;
        transmittance *= 1.0 - rho;
    }
    PixelComposite {
        color,
        part_weights,
        transmittance,
    }
}

/// Rendered buffers for one view.
#[derive(Debug, Clone)]
pub struct RenderOutput {
    pub color: RgbImage,
    /// Weight-normalized mean depth; 0 where accumulated weight < 1e-6.
    pub depth: ScalarImage,
    /// Accumulated weight image per part label present in the field.
    pub weight_maps: BTreeMap<u32, ScalarImage>,
    pub transmittance: ScalarImage,
}

impl RenderOutput {
    pub fn width(&self) -> usize {
        self.color.width
    }

    pub fn height(&self) -> usize {
        self.color.height
    }

    /// Sum of all part weights at a pixel (= 1 - transmittance up to
    /// rounding).
    pub fn total_weight(&self, x: usize, y: usize) -> f64 {
        self.weight_maps.values().map(|m| m.get(x, y)).sum()
    }
}

/// Render one view of a field.
pub fn render_view(field: &StateSnapshot, cam: &CameraModel) -> RenderOutput {
    let (w, h) = (cam.width, cam.height);
    let mut color = RgbImage::new(w, h);
    let mut depth = ScalarImage::new(w, h);
    let mut transmittance = ScalarImage::new(w, h);
    let mut weight_maps: BTreeMap<u32, ScalarImage> = BTreeMap::new();
    for p in &field.primitives {
        weight_maps
            .entry(p.label)
            .or_insert_with(|| ScalarImage::new(w, h));
    }

    let mut projected: Vec<ProjectedGaussian> = field
        .primitives
        .iter()
        .enumerate()
        .filter_map(|(i, p)| project_gaussian(p, cam, i))
        .collect();
    projected.sort_by(|a, b| {
        a.depth
            .partial_cmp(&b.depth)
            .unwrap()
            .then(a.source_index.cmp(&b.source_index))
    });

    // Per-pixel contributor lists, filled in depth order.
    let mut bins: Vec<Vec<u32>> = vec![Vec::new(); w * h];
    for (slot, pg) in projected.iter().enumerate() {
        let (rx, ry) = pg.bbox_radii();
        let x0 = (pg.mean2d.x - rx - 0.5).floor().max(0.0) as usize;
        let x1 = ((pg.mean2d.x + rx - 0.5).ceil() as i64).min(w as i64 - 1);
        let y0 = (pg.mean2d.y - ry - 0.5).floor().max(0.0) as usize;
        let y1 = ((pg.mean2d.y + ry - 0.5).ceil() as i64).min(h as i64 - 1);
        if x1 < 0 || y1 < 0 {
            continue;
        }
        for y in y0..=y1 as usize {
            for x in x0..=x1 as usize {
                bins[y * w + x].push(slot as u32);
            }
        }
    }

    let mut depth_acc = vec![0.0f64; w * h];
    let mut weight_acc = vec![0.0f64; w * h];
    for y in 0..h {
        for x in 0..w {
            let px = Vector2::new(x as f64 + 0.5, y as f64 + 0.5);
            let idx = y * w + x;
            let mut trans = 1.0;
            let mut rgb = [0.0; 3];
            for &slot in &bins[idx] {
                let pg = &projected[slot as usize];
                let prim = &field.primitives[pg.source_index];
                let rho = pixel_density(pg, prim.opacity, px);
                if rho <= 0.0 {
                    continue;
                }
                let wgt = rho * trans;
                rgb[0] += wgt * prim.color[0];
                rgb[1] += wgt * prim.color[1];
                rgb[2] += wgt * prim.color[2];
                weight_maps.get_mut(&prim.label).unwrap().data[idx] += wgt;
                depth_acc[idx] += wgt * pg.depth;
                weight_acc[idx] += wgt;
                trans *= 1.0 - rho;
            }
            color.data[idx] = rgb;
            transmittance.data[idx] = trans;
            depth.data[idx] = if weight_acc[idx] >= DEPTH_WEIGHT_FLOOR {
                depth_acc[idx] / weight_acc[idx]
            } else {
                0.0
            };
        }
    }

    RenderOutput {
        color,
        depth,
        weight_maps,
        transmittance,
    }
}

/// Render every view of a state. Views are independent, so they may be
/// rendered in parallel; the per-view result does not depend on schedule.
pub fn render_views(field: &StateSnapshot, cams: &[CameraModel]) -> Vec<RenderOutput> {
    cams.par_iter().map(|cam| render_view(field, cam)).collect()
}
