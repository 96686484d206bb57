//! Per-part joint typing and parameter estimation from two-state point
//! correspondences: SVD-based rigid alignment, a rank-ratio test on the raw
//! displacement matrix, and revolute/prismatic parameter extraction.

use std::collections::BTreeMap;

use nalgebra::{Matrix3, Matrix3xX, Vector3, SVD};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::field::{JointKind, JointModel, SceneBundle};

/// Default rank-ratio threshold: displacements with (s2+s3)/s1 below this
/// are treated as a pure translation.
pub const DEFAULT_TAU_RANK: f64 = 0.05;
/// Default minimum Kabsch rotation angle (radians) for a revolute call.
pub const DEFAULT_THETA_MIN: f64 = 1.0_f64 * std::f64::consts::PI / 180.0;

#[derive(Debug, Error)]
pub enum KinematicsError {
    #[error("point sets have different sizes ({0} vs {1})")]
    CountMismatch(usize, usize),
    #[error("insufficient support: need at least 3 points, got {0}")]
    InsufficientSupport(usize),
    #[error("degenerate point set: rank of centered points < 2")]
    DegenerateGeometry,
    #[error("no motion between the two states")]
    NoMotion,
    #[error("rotation angle {got:.2e} rad below minimum {min:.2e}")]
    AngleBelowMinimum { got: f64, min: f64 },
    #[error("zero translation; prismatic fit undefined")]
    ZeroTranslation,
    #[error("states {0} and {1} must be distinct")]
    IdenticalStates(usize, usize),
}

/// Least-squares rigid alignment of corresponded point sets.
#[derive(Debug, Clone)]
pub struct RigidAlignment {
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
    pub rmsd: f64,
}

impl RigidAlignment {
    /// Rotation angle recovered from the trace, in [0, pi].
    pub fn angle(&self) -> f64 {
        ((self.rotation.trace() - 1.0) / 2.0).clamp(-1.0, 1.0).acos()
    }
}

/// Singular values of the raw displacement matrix and their rank ratio
/// (s2 + s3) / s1.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResidualSpectrum {
    pub sigma: [f64; 3],
    pub ratio: f64,
}

/// Everything the classifier measured, kept for reporting.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct JointDiagnostics {
    pub spectrum: ResidualSpectrum,
    /// Kabsch rotation angle in radians.
    pub kabsch_angle: f64,
    pub rmsd: f64,
    /// True when the rank test and the angle cross-check disagreed; the
    /// angle check wins.
    pub disagreement: bool,
    /// Set when the recovered rotation is near pi and the axis sign is
    /// ambiguous.
    pub axis_sign_ambiguous: bool,
}

/// How the revolute pivot is estimated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PivotEstimator {
    /// Minimum-norm least-squares solution of (I - R) x = t.
    #[default]
    Pseudoinverse,
    /// Fit the axis line to the static-part centroids (requires static
    /// geometry near the hinge; kept for comparison).
    StaticCentroids,
}

fn check_pair(p: &[Vector3<f64>], q: &[Vector3<f64>]) -> Result<(), KinematicsError> {
    if p.len() != q.len() {
        return Err(KinematicsError::CountMismatch(p.len(), q.len()));
    }
    if p.len() < 3 {
        return Err(KinematicsError::InsufficientSupport(p.len()));
    }
    Ok(())
}

fn centroid(points: &[Vector3<f64>]) -> Vector3<f64> {
    points.iter().sum::<Vector3<f64>>() / points.len() as f64
}

/// Kabsch algorithm: the proper rotation R and translation t minimizing
/// sum ||q_i - (R p_i + t)||^2, with reflection correction.
pub fn kabsch_align(
    p: &[Vector3<f64>],
    q: &[Vector3<f64>],
) -> Result<RigidAlignment, KinematicsError> {
    check_pair(p, q)?;
    let pc = centroid(p);
    let qc = centroid(q);

    // Cross-covariance H = sum (q - qc)(p - pc)^T, so that R = proper(U V^T)
    // maps centered P onto centered Q.
    let mut h = Matrix3::zeros();
    let mut p_spread = Matrix3::zeros();
    for (a, b) in p.iter().zip(q) {
        let pa = a - pc;
        let qb = b - qc;
        h += qb * pa.transpose();
        p_spread += pa * pa.transpose();
    }
    // Degeneracy: centered P must span at least a plane.
    let p_svals = SVD::new(p_spread, false, false).singular_values;
    if p_svals[1] <= 1e-12 * p_svals[0].max(1e-300) {
        return Err(KinematicsError::DegenerateGeometry);
    }

    let svd = SVD::new(h, true, true);
    let u = svd.u.unwrap();
    let v_t = svd.v_t.unwrap();
    let d = (u * v_t).determinant();
    let sign = if d < 0.0 { -1.0 } else { 1.0 };
    let fix = Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, sign));
    let rotation = u * fix * v_t;
    let translation = qc - rotation * pc;

    let mut sq_sum = 0.0;
    for (a, b) in p.iter().zip(q) {
        sq_sum += (b - (rotation * a + translation)).norm_squared();
    }
    Ok(RigidAlignment {
        rotation,
        translation,
        rmsd: (sq_sum / p.len() as f64).sqrt(),
    })
}

/// Singular values of the 3xN matrix of raw displacements q_i - p_i.
pub fn residual_spectrum(
    p: &[Vector3<f64>],
    q: &[Vector3<f64>],
) -> Result<ResidualSpectrum, KinematicsError> {
    check_pair(p, q)?;
    let mut d = Matrix3xX::zeros(p.len());
    for (i, (a, b)) in p.iter().zip(q).enumerate() {
        d.set_column(i, &(b - a));
    }
    let sv = SVD::new(d, false, false).singular_values;
    let sigma = [sv[0], sv[1], sv[2]];
    let ratio = if sigma[0] > 0.0 {
        (sigma[1] + sigma[2]) / sigma[0]
    } else {
        0.0
    };
    Ok(ResidualSpectrum { sigma, ratio })
}

/// Classify the joint between two states of one part.
///
/// Raw displacements of a pure translation are rank 1 (ratio ~ 0) while a
/// rotation spreads them across the plane orthogonal to its axis, so the
/// part is prismatic iff ratio < tau_rank. A Kabsch rotation angle below
/// theta_min overrides a revolute call from the rank test.
pub fn classify_joint(
    p: &[Vector3<f64>],
    q: &[Vector3<f64>],
    tau_rank: f64,
    theta_min: f64,
) -> Result<(JointKind, JointDiagnostics), KinematicsError> {
    let spectrum = residual_spectrum(p, q)?;
    if spectrum.sigma[0] < 1e-9 {
        return Err(KinematicsError::NoMotion);
    }
    let alignment = kabsch_align(p, q)?;
    let angle = alignment.angle();

    let rank_kind = if spectrum.ratio < tau_rank {
        JointKind::Prismatic
    } else {
        JointKind::Revolute
    };
    let kind = if angle < theta_min {
        JointKind::Prismatic
    } else {
        rank_kind
    };
    let diagnostics = JointDiagnostics {
        spectrum,
        kabsch_angle: angle,
        rmsd: alignment.rmsd,
        disagreement: kind != rank_kind,
        axis_sign_ambiguous: false,
    };
    Ok((kind, diagnostics))
}

/// Unit rotation axis and angle in [0, pi] such that rotating by +angle
/// about +axis reproduces R.
fn rotation_axis_angle(r: &Matrix3<f64>) -> (Vector3<f64>, f64, bool) {
    let angle = ((r.trace() - 1.0) / 2.0).clamp(-1.0, 1.0).acos();
    let skew = Vector3::new(
        r[(2, 1)] - r[(1, 2)],
        r[(0, 2)] - r[(2, 0)],
        r[(1, 0)] - r[(0, 1)],
    );
    if skew.norm() > 1e-8 {
        // skew = 2 sin(angle) * axis, so this sign convention already obeys
        // the positive-angle orientation.
        (skew.normalize(), angle, false)
    } else {
        // angle near 0 or pi; recover the axis as the +1 eigenvector of R
        // via (R + I) columns, sign undetermined.
        let m = r + Matrix3::identity();
        let mut best = m.column(0).into_owned();
        for c in 1..3 {
            if m.column(c).norm() > best.norm() {
                best = m.column(c).into_owned();
            }
        }
        let axis = if best.norm() > 1e-12 {
            best.normalize()
        } else {
            Vector3::z()
        };
        (axis, angle, true)
    }
}

/// Fit a revolute joint from corresponded centers of one part.
///
/// The axis is the +1 eigenvector of the Kabsch rotation, the angle comes
/// from the trace, and the pivot solves (I - R) x = t in the least-squares
/// sense (pseudoinverse route) or fits the axis line to the static-part
/// centroids (alternate route), then is slid along the axis next to the
/// moving part's centroid.
pub fn fit_revolute(
    p: &[Vector3<f64>],
    q: &[Vector3<f64>],
    theta_min: f64,
    estimator: PivotEstimator,
    static_centers: Option<&[Vector3<f64>]>,
) -> Result<(JointModel, bool), KinematicsError> {
    let alignment = kabsch_align(p, q)?;
    let angle = alignment.angle();
    if angle < theta_min {
        return Err(KinematicsError::AngleBelowMinimum {
            got: angle,
            min: theta_min,
        });
    }
    let (axis, angle, sign_ambiguous) = rotation_axis_angle(&alignment.rotation);

    let raw_pivot = match estimator {
        PivotEstimator::Pseudoinverse => {
            let m = Matrix3::identity() - alignment.rotation;
            let pinv = SVD::new(m, true, true)
                .pseudo_inverse(1e-10)
                .expect("svd of 3x3 always converges");
            pinv * alignment.translation
        }
        PivotEstimator::StaticCentroids => {
            // argmin_x sum ||(x - c) x u||^2 over static centroids: any
            // point projecting onto the mean of the centroids in the plane
            // orthogonal to the axis.
            let cs = static_centers
                .filter(|c| !c.is_empty())
                .ok_or(KinematicsError::InsufficientSupport(0))?;
            let mean = centroid(cs);
            mean - axis * mean.dot(&axis)
        }
    };
    // The pivot is defined only up to the axis line; anchor it at the point
    // nearest the moving part's centroid.
    let part_center = centroid(p);
    let pivot = raw_pivot + axis * (part_center - raw_pivot).dot(&axis);

    Ok((JointModel::Revolute { pivot, axis, angle }, sign_ambiguous))
}

/// Fit a prismatic joint: axis and distance of the mean translation.
pub fn fit_prismatic(
    p: &[Vector3<f64>],
    q: &[Vector3<f64>],
) -> Result<JointModel, KinematicsError> {
    check_pair(p, q)?;
    let t = centroid(q) - centroid(p);
    let d = t.norm();
    if d <= 1e-9 {
        return Err(KinematicsError::ZeroTranslation);
    }
    Ok(JointModel::Prismatic {
        axis: t / d,
        distance: d,
    })
}

/// A classified and fitted joint together with its measurements.
#[derive(Debug, Clone)]
pub struct JointFit {
    pub model: JointModel,
    pub diagnostics: JointDiagnostics,
}

#[derive(Debug, Clone, Copy)]
pub struct AnalyzeConfig {
    pub tau_rank: f64,
    pub theta_min: f64,
    pub pivot_estimator: PivotEstimator,
}

impl Default for AnalyzeConfig {
    fn default() -> Self {
        AnalyzeConfig {
            tau_rank: DEFAULT_TAU_RANK,
            theta_min: DEFAULT_THETA_MIN,
            pivot_estimator: PivotEstimator::default(),
        }
    }
}

/// Classify and fit a joint for every nonzero part label between two
/// states. Failures are reported per part and do not abort the others.
pub fn analyze_parts(
    bundle: &SceneBundle,
    labels: &[u32],
    state_a: usize,
    state_b: usize,
    cfg: &AnalyzeConfig,
) -> Result<BTreeMap<u32, Result<JointFit, KinematicsError>>, KinematicsError> {
    if state_a == state_b {
        return Err(KinematicsError::IdenticalStates(state_a, state_b));
    }
    let mut part_labels: Vec<u32> = labels.iter().copied().filter(|&l| l != 0).collect();
    part_labels.sort_unstable();
    part_labels.dedup();

    let static_centers: Vec<Vector3<f64>> = bundle.states[state_a]
        .primitives
        .iter()
        .zip(labels)
        .filter(|(_, &l)| l == 0)
        .map(|(p, _)| p.center)
        .collect();

    let results: Vec<(u32, Result<JointFit, KinematicsError>)> = part_labels
        .par_iter()
        .map(|&label| {
            let p = bundle.part_centers(labels, label, state_a);
            let q = bundle.part_centers(labels, label, state_b);
            let fit = analyze_one_part(&p, &q, cfg, &static_centers);
            (label, fit)
        })
        .collect();
    Ok(results.into_iter().collect())
}

fn analyze_one_part(
    p: &[Vector3<f64>],
    q: &[Vector3<f64>],
    cfg: &AnalyzeConfig,
    static_centers: &[Vector3<f64>],
) -> Result<JointFit, KinematicsError> {
    let (kind, mut diagnostics) = classify_joint(p, q, cfg.tau_rank, cfg.theta_min)?;
    let model = match kind {
        JointKind::Revolute => {
            let (model, ambiguous) = fit_revolute(
                p,
                q,
                cfg.theta_min,
                cfg.pivot_estimator,
                Some(static_centers),
            )?;
            diagnostics.axis_sign_ambiguous = ambiguous;
            model
        }
        JointKind::Prismatic => fit_prismatic(p, q)?,
    };
    Ok(JointFit { model, diagnostics })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn cube_corners() -> Vec<Vector3<f64>> {
        let mut v = Vec::new();
        for x in [0.0, 1.0] {
            for y in [0.0, 1.0] {
                for z in [0.0, 1.0] {
                    v.push(Vector3::new(x, y, z));
                }
            }
        }
        v
    }

    fn random_cloud(rng: &mut ChaCha8Rng, n: usize) -> Vec<Vector3<f64>> {
        (0..n)
            .map(|_| {
                Vector3::new(
                    rng.random_range(-0.5..0.5),
                    rng.random_range(-0.5..0.5),
                    rng.random_range(-0.5..0.5),
                )
            })
            .collect()
    }

    fn rotate_about(
        points: &[Vector3<f64>],
        axis: &Vector3<f64>,
        angle: f64,
        pivot: &Vector3<f64>,
    ) -> Vec<Vector3<f64>> {
        let q = crate::quat::Quat::from_axis_angle(axis, angle);
        points
            .iter()
            .map(|p| q.rotate(&(p - pivot)) + pivot)
            .collect()
    }

    #[test]
    fn identity_alignment() {
        let p = cube_corners();
        let a = kabsch_align(&p, &p).unwrap();
        assert!((a.rotation - Matrix3::identity()).norm() < 1e-12);
        assert!(a.translation.norm() < 1e-12);
        assert!(a.rmsd < 1e-12);
    }

    #[test]
    fn exact_rigid_recovery() {
        let p = cube_corners();
        let q: Vec<_> = rotate_about(
            &p,
            &Vector3::z(),
            std::f64::consts::FRAC_PI_2,
            &Vector3::zeros(),
        )
        .iter()
        .map(|v| v + Vector3::new(1.0, 2.0, 3.0))
        .collect();
        let a = kabsch_align(&p, &q).unwrap();
        assert!(a.rmsd < 1e-12);
        for (x, y) in p.iter().zip(&q) {
            assert!((a.rotation * x + a.translation - y).norm() < 1e-12);
        }
    }

    #[test]
    fn reflection_corrected_to_proper_rotation() {
        let p = cube_corners();
        let q: Vec<_> = p.iter().map(|v| Vector3::new(-v.x, v.y, v.z)).collect();
        let a = kabsch_align(&p, &q).unwrap();
        assert!((a.rotation.determinant() - 1.0).abs() < 1e-9);
        assert!(a.rmsd > 0.0);
    }

    #[test]
    fn collinear_input_degenerate() {
        let p: Vec<_> = (0..5).map(|i| Vector3::new(i as f64, 0.0, 0.0)).collect();
        assert!(matches!(
            kabsch_align(&p, &p),
            Err(KinematicsError::DegenerateGeometry)
        ));
    }

    #[test]
    fn pure_translation_is_prismatic() {
        let p = cube_corners();
        let t = Vector3::new(0.0, 0.0, 0.3);
        let q: Vec<_> = p.iter().map(|v| v + t).collect();
        let (kind, diag) = classify_joint(&p, &q, 0.05, DEFAULT_THETA_MIN).unwrap();
        assert_eq!(kind, JointKind::Prismatic);
        assert!(diag.spectrum.ratio < 1e-9);
    }

    #[test]
    fn rotation_is_revolute() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let p = random_cloud(&mut rng, 40);
        let pivot = Vector3::new(1.0, 0.0, 0.0);
        let q = rotate_about(&p, &Vector3::z(), 30f64.to_radians(), &pivot);
        let (kind, diag) = classify_joint(&p, &q, 0.05, DEFAULT_THETA_MIN).unwrap();
        assert_eq!(kind, JointKind::Revolute, "ratio {}", diag.spectrum.ratio);
        assert!(diag.spectrum.ratio >= 0.05);
        // Displacements of a rotation span a plane: the third singular value
        // vanishes while the second does not.
        assert!(diag.spectrum.sigma[2] < 1e-10 * diag.spectrum.sigma[0]);
        assert!(diag.spectrum.sigma[1] > 0.05 * diag.spectrum.sigma[0]);
    }

    #[test]
    fn noisy_prismatic_stays_prismatic() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let t = Vector3::new(0.0, 0.0, 0.3);
        for _ in 0..50 {
            let p = random_cloud(&mut rng, 60);
            let q: Vec<_> = p
                .iter()
                .map(|v| {
                    v + t
                        + 1e-3
                            * t.norm()
                            * Vector3::new(
                                rng.random_range(-1.0..1.0),
                                rng.random_range(-1.0..1.0),
                                rng.random_range(-1.0..1.0),
                            )
                })
                .collect();
            let (kind, _) = classify_joint(&p, &q, 0.05, DEFAULT_THETA_MIN).unwrap();
            assert_eq!(kind, JointKind::Prismatic);
        }
    }

    #[test]
    fn no_motion_rejected() {
        let p = cube_corners();
        assert!(matches!(
            classify_joint(&p, &p, 0.05, DEFAULT_THETA_MIN),
            Err(KinematicsError::NoMotion)
        ));
    }

    #[test]
    fn revolute_canonical_z() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let p = random_cloud(&mut rng, 30);
        let q = rotate_about(
            &p,
            &Vector3::z(),
            std::f64::consts::FRAC_PI_2,
            &Vector3::zeros(),
        );
        let (model, _) =
            fit_revolute(&p, &q, DEFAULT_THETA_MIN, PivotEstimator::Pseudoinverse, None).unwrap();
        let JointModel::Revolute { pivot, axis, angle } = model else {
            panic!("expected revolute");
        };
        assert!((axis - Vector3::z()).norm() < 1e-9);
        assert!((angle - std::f64::consts::FRAC_PI_2).abs() < 1e-12);
        // Pivot lies on the z-axis.
        let d = pivot.cross(&Vector3::z()).norm();
        assert!(d < 1e-9, "pivot off axis by {d}");
    }

    #[test]
    fn revolute_offset_pivot_recovered() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let p = random_cloud(&mut rng, 30);
        let true_pivot = Vector3::new(1.0, 0.0, 0.0);
        let q = rotate_about(&p, &Vector3::z(), std::f64::consts::FRAC_PI_4, &true_pivot);
        let (model, _) =
            fit_revolute(&p, &q, DEFAULT_THETA_MIN, PivotEstimator::Pseudoinverse, None).unwrap();
        let JointModel::Revolute { pivot, axis, angle } = model else {
            panic!("expected revolute");
        };
        assert!((angle - std::f64::consts::FRAC_PI_4).abs() < 1e-12);
        // Recovered axis line passes through the true pivot.
        let line_dist = (true_pivot - pivot).cross(&axis).norm();
        assert!(line_dist < 1e-9, "axis line misses pivot by {line_dist}");
    }

    #[test]
    fn tiny_angle_rejected_by_precondition() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let p = random_cloud(&mut rng, 20);
        let q = rotate_about(&p, &Vector3::z(), 1e-13, &Vector3::zeros());
        // tr(R) numerically ~3; the clamped arccos gives ~0, below theta_min.
        assert!(matches!(
            fit_revolute(&p, &q, DEFAULT_THETA_MIN, PivotEstimator::Pseudoinverse, None),
            Err(KinematicsError::AngleBelowMinimum { .. })
        ));
    }

    #[test]
    fn prismatic_exact_shifts() {
        let p = cube_corners();
        let q: Vec<_> = p.iter().map(|v| v + Vector3::new(0.0, 0.0, 0.3)).collect();
        let model = fit_prismatic(&p, &q).unwrap();
        assert!((model.axis() - Vector3::z()).norm() < 1e-12);
        assert!((model.magnitude() - 0.3).abs() < 1e-12);

        let q345: Vec<_> = p.iter().map(|v| v + Vector3::new(3.0, 4.0, 0.0)).collect();
        let model = fit_prismatic(&p, &q345).unwrap();
        assert!((model.axis() - Vector3::new(0.6, 0.8, 0.0)).norm() < 1e-12);
        assert!((model.magnitude() - 5.0).abs() < 1e-12);
    }

    #[test]
    fn prismatic_noise_cancels_in_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let p = random_cloud(&mut rng, 500);
        let t = Vector3::new(0.0, 0.0, 0.3);
        let q: Vec<_> = p
            .iter()
            .map(|v| {
                v + t
                    + 1e-3
                        * Vector3::new(
                            rng.random_range(-1.0..1.0),
                            rng.random_range(-1.0..1.0),
                            rng.random_range(-1.0..1.0),
                        )
            })
            .collect();
        let model = fit_prismatic(&p, &q).unwrap();
        assert!((model.magnitude() - 0.3).abs() < 1e-4);
    }

    #[test]
    fn zero_translation_rejected() {
        let p = cube_corners();
        assert!(matches!(
            fit_prismatic(&p, &p),
            Err(KinematicsError::ZeroTranslation)
        ));
    }

    #[test]
    fn scale_equivariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let p = random_cloud(&mut rng, 40);
        let pivot = Vector3::new(0.4, -0.2, 0.1);
        let axis = Vector3::new(1.0, 1.0, 0.0).normalize();
        let q = rotate_about(&p, &axis, 0.6, &pivot);
        let gamma = 3.7;
        let ps: Vec<_> = p.iter().map(|v| v * gamma).collect();
        let qs: Vec<_> = q.iter().map(|v| v * gamma).collect();

        let (k1, d1) = classify_joint(&p, &q, 0.05, DEFAULT_THETA_MIN).unwrap();
        let (k2, d2) = classify_joint(&ps, &qs, 0.05, DEFAULT_THETA_MIN).unwrap();
        assert_eq!(k1, k2);
        assert!((d1.spectrum.ratio - d2.spectrum.ratio).abs() < 1e-9);

        let (m1, _) =
            fit_revolute(&p, &q, DEFAULT_THETA_MIN, PivotEstimator::Pseudoinverse, None).unwrap();
        let (m2, _) =
            fit_revolute(&ps, &qs, DEFAULT_THETA_MIN, PivotEstimator::Pseudoinverse, None).unwrap();
        assert!((m1.axis() - m2.axis()).norm() < 1e-9);
        let (JointModel::Revolute { pivot: p1, .. }, JointModel::Revolute { pivot: p2, .. }) =
            (m1, m2)
        else {
            panic!()
        };
        // The scaled pivot lies on the scaled axis line.
        let line_dist = (p2 - p1 * gamma).cross(&axis).norm();
        assert!(line_dist < 1e-8, "line dist {line_dist}");
    }

    #[test]
    fn half_turn_reports_axis_sign_ambiguity() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let p = random_cloud(&mut rng, 25);
        let q = rotate_about(&p, &Vector3::z(), std::f64::consts::PI, &Vector3::zeros());
        let (model, ambiguous) =
            fit_revolute(&p, &q, DEFAULT_THETA_MIN, PivotEstimator::Pseudoinverse, None).unwrap();
        assert!(ambiguous, "axis sign should be flagged ambiguous at pi");
        let JointModel::Revolute { axis, angle, .. } = model else {
            panic!()
        };
        // acos near -1 has square-root conditioning: ~3e-8 from 1e-16 of
        // trace rounding. The tight 1e-9 bound applies away from pi.
        assert!(
            (angle - std::f64::consts::PI).abs() < 1e-6,
            "angle {angle} vs pi, axis {axis:?}"
        );
        assert!((axis.dot(&Vector3::z()).abs() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn static_centroid_pivot_estimator() {
        // Static geometry centered on the hinge line: the static-centroid
        // estimator recovers the same axis line as the pseudoinverse route.
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let p = random_cloud(&mut rng, 30);
        let true_pivot = Vector3::new(0.5, -0.3, 0.0);
        let axis = Vector3::z();
        let q = rotate_about(&p, &axis, 0.8, &true_pivot);
        // Statics symmetric about the hinge line so their mean sits on it.
        let statics: Vec<Vector3<f64>> = (0..20)
            .flat_map(|i| {
                let offset = Vector3::new(0.1 + 0.01 * i as f64, 0.05 * i as f64, 0.2);
                [true_pivot + offset, true_pivot - offset]
            })
            .collect();
        let (model, _) = fit_revolute(
            &p,
            &q,
            DEFAULT_THETA_MIN,
            PivotEstimator::StaticCentroids,
            Some(&statics),
        )
        .unwrap();
        let JointModel::Revolute { pivot, axis: fit_axis, angle } = model else {
            panic!()
        };
        assert!((angle - 0.8).abs() < 1e-12);
        let line_dist = (true_pivot - pivot).cross(&fit_axis).norm();
        assert!(line_dist < 1e-9, "line dist {line_dist}");
    }

    #[test]
    fn analyze_parts_on_synthetic_scene() {
        let spec = crate::synth::storage2();
        let bundle = crate::synth::generate_scene(&spec).unwrap();
        let gt = bundle.ground_truth.clone().unwrap();
        let fits = analyze_parts(&bundle, &gt.labels, 0, 3, &AnalyzeConfig::default()).unwrap();
        assert_eq!(fits.len(), 2);

        let door = fits[&1].as_ref().unwrap();
        assert_eq!(door.model.kind(), JointKind::Revolute);
        let gt_door = gt.part(1).unwrap().joint_for_pair(0, 3);
        assert!((door.model.axis().dot(&gt_door.axis()).abs() - 1.0).abs() < 1e-9);
        assert!((door.model.magnitude() - gt_door.magnitude()).abs() < 1e-9);

        let drawer = fits[&2].as_ref().unwrap();
        assert_eq!(drawer.model.kind(), JointKind::Prismatic);
        assert!((drawer.model.magnitude() - 0.3).abs() < 1e-12);
    }

    #[test]
    fn analyze_parts_insufficient_support() {
        let spec = crate::synth::tests::drawer_spec(3, 40);
        let bundle = crate::synth::generate_scene(&spec).unwrap();
        // Keep only two primitives of part 1.
        let mut labels = bundle.ground_truth.clone().unwrap().labels;
        let mut kept = 0;
        for l in labels.iter_mut() {
            if *l == 1 {
                if kept < 2 {
                    kept += 1;
                } else {
                    *l = 0;
                }
            }
        }
        let fits = analyze_parts(&bundle, &labels, 0, 2, &AnalyzeConfig::default()).unwrap();
        assert!(matches!(
            fits[&1],
            Err(KinematicsError::InsufficientSupport(2))
        ));
    }

    #[test]
    fn analyze_parts_same_state_rejected() {
        let spec = crate::synth::tests::drawer_spec(3, 20);
        let bundle = crate::synth::generate_scene(&spec).unwrap();
        let labels = bundle.ground_truth.clone().unwrap().labels;
        assert!(matches!(
            analyze_parts(&bundle, &labels, 1, 1, &AnalyzeConfig::default()),
            Err(KinematicsError::IdenticalStates(1, 1))
        ));
    }

    #[test]
    fn analyze_parts_no_motion_per_part() {
        let spec = crate::synth::tests::drawer_spec(3, 40);
        let mut bundle = crate::synth::generate_scene(&spec).unwrap();
        // Duplicate state 0 into state 1 so nothing moves between them.
        bundle.states[1] = bundle.states[0].clone();
        bundle.states[1].state_index = 1;
        let labels = bundle.ground_truth.clone().unwrap().labels;
        let fits = analyze_parts(&bundle, &labels, 0, 1, &AnalyzeConfig::default()).unwrap();
        assert!(matches!(fits[&1], Err(KinematicsError::NoMotion)));
    }
}
