//! Evaluation metrics against ground truth: joint axis angle/position
//! errors, part-motion error, Chamfer distances on Gaussian-center point
//! clouds, and report emission (JSON struct + flat CSV).
//!
//! Chamfer here is the symmetric mean of squared nearest-neighbor
//! distances, scaled by 1e3; predicted parts are matched to ground-truth
//! parts by minimum-cost assignment on center-set Chamfer.

use std::collections::BTreeMap;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::field::{JointKind, JointModel, SceneBundle};

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("joint kinds differ: {0} vs {1}")]
    KindMismatch(JointKind, JointKind),
    #[error("axis position error is only defined for revolute joints")]
    NotApplicable,
    #[error("empty point set")]
    EmptyPointSet,
    #[error("bundle has no ground truth")]
    NoGroundTruth,
    #[error("label vector length {0} != primitive count {1}")]
    LabelLength(usize, usize),
    #[error("state index {0} out of range ({1} states)")]
    BadState(usize, usize),
}

/// Angle between joint axes in degrees, insensitive to axis sign.
pub fn axis_angle_error(pred: &JointModel, gt: &JointModel) -> Result<f64, MetricsError> {
    if pred.kind() != gt.kind() {
        return Err(MetricsError::KindMismatch(pred.kind(), gt.kind()));
    }
    let dot = pred.axis().dot(&gt.axis()).abs().clamp(0.0, 1.0);
    Ok(dot.acos().to_degrees())
}

/// Minimum distance between the two infinite joint axis lines (revolute
/// only; prismatic joints have no pivot position).
pub fn axis_position_error(pred: &JointModel, gt: &JointModel) -> Result<f64, MetricsError> {
    let (JointModel::Revolute {
        pivot: p1, axis: a1, ..
    }, JointModel::Revolute {
        pivot: p2, axis: a2, ..
    }) = (pred, gt)
    else {
        return Err(MetricsError::NotApplicable);
    };
    let cross = a1.cross(a2);
    let d = p2 - p1;
    let denom = cross.norm();
    if denom < 1e-9 {
        // Parallel lines: distance from one pivot to the other line.
        Ok((d - a1 * d.dot(a1)).norm())
    } else {
        Ok((d.dot(&cross) / denom).abs())
    }
}

/// |magnitude difference|: degrees for revolute pairs, scene units for
/// prismatic pairs.
pub fn part_motion_error(pred: &JointModel, gt: &JointModel) -> Result<f64, MetricsError> {
    if pred.kind() != gt.kind() {
        return Err(MetricsError::KindMismatch(pred.kind(), gt.kind()));
    }
    let diff = (pred.magnitude() - gt.magnitude()).abs();
    Ok(match pred.kind() {
        JointKind::Revolute => diff.to_degrees(),
        JointKind::Prismatic => diff,
    })
}

// ---------------------------------------------------------------------------
// Chamfer distance with a kd-tree index
// ---------------------------------------------------------------------------

struct KdTree {
    // Nodes stored as (point, split axis); balanced by median splits.
    points: Vec<Vector3<f64>>,
    axes: Vec<u8>,
    left: Vec<i32>,
    right: Vec<i32>,
    root: i32,
}

impl KdTree {
    fn build(input: &[Vector3<f64>]) -> KdTree {
        let n = input.len();
        let mut tree = KdTree {
            points: Vec::with_capacity(n),
            axes: Vec::with_capacity(n),
            left: Vec::with_capacity(n),
            right: Vec::with_capacity(n),
            root: -1,
        };
        let mut idx: Vec<usize> = (0..n).collect();
        let mut scratch = input.to_vec();
        tree.root = tree.build_rec(&mut scratch, &mut idx, 0);
        tree
    }

    fn build_rec(&mut self, pts: &mut [Vector3<f64>], idx: &mut [usize], depth: usize) -> i32 {
        if pts.is_empty() {
            return -1;
        }
        let axis = (depth % 3) as u8;
        let mid = pts.len() / 2;
        // Median split along the cycling axis.
        pts.sort_by(|a, b| a[axis as usize].partial_cmp(&b[axis as usize]).unwrap());
        let node = self.points.len() as i32;
        self.points.push(pts[mid]);
        self.axes.push(axis);
        self.left.push(-1);
        self.right.push(-1);
        let (lo, hi) = pts.split_at_mut(mid);
        let (_, hi) = hi.split_at_mut(1);
        let (ilo, ihi) = idx.split_at_mut(mid);
        let (_, ihi) = ihi.split_at_mut(1);
        let l = self.build_rec(lo, ilo, depth + 1);
        let r = self.build_rec(hi, ihi, depth + 1);
        self.left[node as usize] = l;
        self.right[node as usize] = r;
        node
    }

    /// Squared distance to the nearest stored point.
    fn nearest_sq(&self, query: &Vector3<f64>) -> f64 {
        let mut best = f64::INFINITY;
        self.nearest_rec(self.root, query, &mut best);
        best
    }

    fn nearest_rec(&self, node: i32, query: &Vector3<f64>, best: &mut f64) {
        if node < 0 {
            return;
        }
        let i = node as usize;
        let d2 = (self.points[i] - query).norm_squared();
        if d2 < *best {
            *best = d2;
        }
        let axis = self.axes[i] as usize;
        let delta = query[axis] - self.points[i][axis];
        let (near, far) = if delta < 0.0 {
            (self.left[i], self.right[i])
        } else {
            (self.right[i], self.left[i])
        };
        self.nearest_rec(near, query, best);
        if delta * delta < *best {
            self.nearest_rec(far, query, best);
        }
    }
}

/// Chamfer distance: `1e3 * 0.5 * (mean_a min_b |a-b|^2 + mean_b min_a |a-b|^2)`.
pub fn chamfer(a: &[Vector3<f64>], b: &[Vector3<f64>]) -> Result<f64, MetricsError> {
    if a.is_empty() || b.is_empty() {
        return Err(MetricsError::EmptyPointSet);
    }
    let tree_b = KdTree::build(b);
    let tree_a = KdTree::build(a);
    let sum_ab: f64 = a.iter().map(|p| tree_b.nearest_sq(p)).sum();
    let sum_ba: f64 = b.iter().map(|p| tree_a.nearest_sq(p)).sum();
    Ok(1e3 * 0.5 * (sum_ab / a.len() as f64 + sum_ba / b.len() as f64))
}

// ---------------------------------------------------------------------------
// Assignment
// ---------------------------------------------------------------------------

/// Minimum-cost assignment (Hungarian algorithm with potentials) for a
/// rows x cols cost matrix with rows <= cols. Returns the column assigned
/// to each row.
pub fn hungarian_min_cost(cost: &[Vec<f64>]) -> Vec<usize> {
    let n = cost.len();
    if n == 0 {
        return Vec::new();
    }
    let m = cost[0].len();
    assert!(n <= m, "hungarian: need rows <= cols");
    const INF: f64 = f64::INFINITY;
    // 1-indexed potentials over rows (u) and columns (v).
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; m + 1];
    let mut way = vec![0usize; m + 1];
    let mut assignment = vec![0usize; m + 1]; // column -> row
    for i in 1..=n {
        assignment[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![INF; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = assignment[j0];
            let mut delta = INF;
            let mut j1 = 0usize;
            for j in 1..=m {
                if used[j] {
                    continue;
                }
                let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=m {
                if used[j] {
                    u[assignment[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if assignment[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            assignment[j0] = assignment[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut row_to_col = vec![usize::MAX; n];
    for j in 1..=m {
        if assignment[j] != 0 {
            row_to_col[assignment[j] - 1] = j - 1;
        }
    }
    row_to_col
}

/// Fraction of positions where the label vectors agree after the
/// accuracy-maximizing relabeling of predicted labels (assignment on the
/// confusion matrix).
pub fn label_accuracy(pred: &[u32], gt: &[u32]) -> f64 {
    assert_eq!(pred.len(), gt.len());
    if pred.is_empty() {
        return 1.0;
    }
    let mut pred_ids: Vec<u32> = pred.to_vec();
    pred_ids.sort_unstable();
    pred_ids.dedup();
    let mut gt_ids: Vec<u32> = gt.to_vec();
    gt_ids.sort_unstable();
    gt_ids.dedup();
    let mut confusion = vec![vec![0usize; gt_ids.len()]; pred_ids.len()];
    for (&p, &g) in pred.iter().zip(gt) {
        let pi = pred_ids.binary_search(&p).unwrap();
        let gi = gt_ids.binary_search(&g).unwrap();
        confusion[pi][gi] += 1;
    }
    // Maximize agreement = minimize negated counts; pad so rows <= cols.
    let rows = pred_ids.len();
    let cols = gt_ids.len().max(rows);
    let cost: Vec<Vec<f64>> = (0..rows)
        .map(|i| {
            (0..cols)
                .map(|j| {
                    if j < gt_ids.len() {
                        -(confusion[i][j] as f64)
                    } else {
                        0.0
                    }
                })
                .collect()
        })
        .collect();
    let asg = hungarian_min_cost(&cost);
    let agree: usize = asg
        .iter()
        .enumerate()
        .filter(|(_, &j)| j < gt_ids.len())
        .map(|(i, &j)| confusion[i][j])
        .sum();
    agree as f64 / pred.len() as f64
}

// ---------------------------------------------------------------------------
// Report
// ---------------------------------------------------------------------------

/// Metrics for one ground-truth part after matching.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PartReport {
    pub gt_label: u32,
    /// Matched predicted label, if any prediction was matched.
    pub pred_label: Option<u32>,
    pub gt_kind: JointKind,
    pub pred_kind: Option<JointKind>,
    /// True when both joints exist but their kinds differ.
    pub kind_confused: bool,
    /// Degrees; present when kinds match.
    pub axis_angle_deg: Option<f64>,
    /// Scene units; present for matched revolute pairs only.
    pub axis_position: Option<f64>,
    /// Degrees (revolute) or scene units (prismatic); present when kinds match.
    pub part_motion: Option<f64>,
    /// Chamfer between matched part center clouds at the evaluation state.
    pub cd_m: Option<f64>,
    /// Populated when the predicted joint was missing or failed to fit.
    pub joint_error: Option<String>,
}

/// Full evaluation of predicted labels and joints against ground truth.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricsReport {
    /// Chamfer definition recorded for downstream consumers: symmetric mean
    /// squared nearest-neighbor distance, x1000.
    pub chamfer_definition: String,
    pub eval_states: (usize, usize),
    pub parts: Vec<PartReport>,
    /// Chamfer between predicted-static and true-static clouds.
    pub cd_s: Option<f64>,
    /// Chamfer between the whole predicted and true clouds.
    pub cd_w: f64,
    /// Hungarian-matched per-primitive label accuracy.
    pub label_accuracy: f64,
}

impl MetricsReport {
    /// Flat CSV mirroring the per-part rows plus the global footer.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "gt_label,pred_label,gt_kind,pred_kind,kind_confused,axis_angle_deg,axis_position,part_motion,cd_m,joint_error\n",
        );
        let fmt = |v: &Option<f64>| v.map(|x| format!("{x}")).unwrap_or_default();
        for p in &self.parts {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{}\n",
                p.gt_label,
                p.pred_label.map(|l| l.to_string()).unwrap_or_default(),
                p.gt_kind,
                p.pred_kind.map(|k| k.to_string()).unwrap_or_default(),
                p.kind_confused,
                fmt(&p.axis_angle_deg),
                fmt(&p.axis_position),
                fmt(&p.part_motion),
                fmt(&p.cd_m),
                p.joint_error.clone().unwrap_or_default()
            ));
        }
        out.push_str(&format!(
            "cd_s,{}\ncd_w,{}\nlabel_accuracy,{}\n",
            self.cd_s.map(|x| format!("{x}")).unwrap_or_default(),
            self.cd_w,
            self.label_accuracy
        ));
        out
    }

    /// Worst axis-angle error over parts with matching kinds.
    pub fn max_axis_angle(&self) -> f64 {
        self.parts
            .iter()
            .filter_map(|p| p.axis_angle_deg)
            .fold(0.0, f64::max)
    }

    pub fn max_axis_position(&self) -> f64 {
        self.parts
            .iter()
            .filter_map(|p| p.axis_position)
            .fold(0.0, f64::max)
    }

    pub fn max_part_motion(&self) -> f64 {
        self.parts
            .iter()
            .filter_map(|p| p.part_motion)
            .fold(0.0, f64::max)
    }

    pub fn all_kinds_correct(&self) -> bool {
        self.parts
            .iter()
            .all(|p| p.pred_kind == Some(p.gt_kind) && !p.kind_confused)
    }
}

/// Score predicted labels and joints against the bundle's ground truth.
///
/// Predicted parts are matched to ground-truth parts by minimum-cost
/// assignment on center-set Chamfer at the evaluation state `states.1`;
/// per-part joint metrics are computed on matched pairs with equal kinds.
pub fn evaluate(
    bundle: &SceneBundle,
    pred_labels: &[u32],
    pred_joints: &BTreeMap<u32, JointModel>,
    states: (usize, usize),
) -> Result<MetricsReport, MetricsError> {
    let gt = bundle
        .ground_truth
        .as_ref()
        .ok_or(MetricsError::NoGroundTruth)?;
    let n = bundle.num_primitives();
    if pred_labels.len() != n {
        return Err(MetricsError::LabelLength(pred_labels.len(), n));
    }
    let k = bundle.num_states();
    if states.0 >= k || states.1 >= k {
        return Err(MetricsError::BadState(states.0.max(states.1), k));
    }
    let eval_state = states.1;

    let mut pred_ids: Vec<u32> = pred_labels.iter().copied().filter(|&l| l != 0).collect();
    pred_ids.sort_unstable();
    pred_ids.dedup();
    let gt_ids: Vec<u32> = gt.parts.iter().map(|p| p.label).collect();

    let pred_clouds: Vec<Vec<Vector3<f64>>> = pred_ids
        .iter()
        .map(|&l| bundle.part_centers(pred_labels, l, eval_state))
        .collect();
    let gt_clouds: Vec<Vec<Vector3<f64>>> = gt_ids
        .iter()
        .map(|&l| bundle.part_centers(&gt.labels, l, eval_state))
        .collect();

    // Match ground-truth parts (rows) to predicted parts (columns) on
    // center-set Chamfer; pad columns when predictions are missing.
    let rows = gt_ids.len();
    let cols = pred_ids.len().max(rows);
    let big = 1e18;
    let cost: Vec<Vec<f64>> = (0..rows)
        .map(|i| {
            (0..cols)
                .map(|j| {
                    if j < pred_ids.len() {
                        chamfer(&gt_clouds[i], &pred_clouds[j]).unwrap_or(big)
                    } else {
                        big
                    }
                })
                .collect()
        })
        .collect();
    let matching = hungarian_min_cost(&cost);

    let mut parts = Vec::new();
    for (gi, gt_part) in gt.parts.iter().enumerate() {
        let gt_joint = gt_part.joint_for_pair(states.0, states.1);
        let matched_pred = matching
            .get(gi)
            .copied()
            .filter(|&j| j < pred_ids.len())
            .map(|j| pred_ids[j]);
        let mut report = PartReport {
            gt_label: gt_part.label,
            pred_label: matched_pred,
            gt_kind: gt_part.kind,
            pred_kind: None,
            kind_confused: false,
            axis_angle_deg: None,
            axis_position: None,
            part_motion: None,
            cd_m: None,
            joint_error: None,
        };
        if let Some(pl) = matched_pred {
            let pi = pred_ids.iter().position(|&x| x == pl).unwrap();
            report.cd_m = chamfer(&gt_clouds[gi], &pred_clouds[pi]).ok();
            match pred_joints.get(&pl) {
                Some(pred_joint) if pred_joint.validate().is_err() => {
                    report.joint_error = Some("predicted joint violates invariants".into());
                }
                Some(pred_joint) => {
                    report.pred_kind = Some(pred_joint.kind());
                    if pred_joint.kind() == gt_joint.kind() {
                        report.axis_angle_deg = Some(axis_angle_error(pred_joint, &gt_joint)?);
                        report.part_motion = Some(part_motion_error(pred_joint, &gt_joint)?);
                        if gt_joint.kind() == JointKind::Revolute {
                            report.axis_position =
                                Some(axis_position_error(pred_joint, &gt_joint)?);
                        }
                    } else {
                        report.kind_confused = true;
                    }
                }
                None => {
                    report.joint_error = Some("no predicted joint for matched part".into());
                }
            }
        } else {
            report.joint_error = Some("no predicted part matched".into());
        }
        parts.push(report);
    }

    let pred_static = bundle.part_centers(pred_labels, 0, eval_state);
    let gt_static = bundle.part_centers(&gt.labels, 0, eval_state);
    let cd_s = chamfer(&pred_static, &gt_static).ok();
    let whole: Vec<Vector3<f64>> = bundle.states[eval_state].centers();
    let cd_w = chamfer(&whole, &whole)?;

    Ok(MetricsReport {
        chamfer_definition: "1e3 * 0.5 * (mean_a min_b |a-b|^2 + mean_b min_a |a-b|^2)".into(),
        eval_states: states,
        parts,
        cd_s,
        cd_w,
        label_accuracy: label_accuracy(pred_labels, &gt.labels),
    })
}
