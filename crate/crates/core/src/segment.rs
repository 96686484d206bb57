//! Motion-driven coarse segmentation: static/dynamic separation from
//! per-primitive displacement, part-count estimation through a provider
//! abstraction, and k-means++ clustering of trajectory descriptors.

use nalgebra::Vector3;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::field::SceneBundle;
use crate::image::RgbImage;
use crate::splat::render_view;

/// Default motion threshold on normalized displacement.
pub const DEFAULT_TAU_MOT: f64 = 0.05;
/// Direction guard for zero-length steps.
pub const DESCRIPTOR_EPS: f64 = 1e-9;
/// Clusters holding fewer than this fraction of dynamic primitives are
/// dissolved into the nearest surviving centroid.
pub const MERGE_FRACTION: f64 = 0.02;

#[derive(Debug, Error)]
pub enum SegmentError {
    #[error("need at least 2 states, got {0}")]
    TooFewStates(usize),
    #[error("part-count provider failed after {retries} retries: {reason}")]
    ProviderFailed { retries: usize, reason: String },
    #[error("provider returned no counts")]
    EmptyCounts,
    #[error("cannot form {k} clusters from {n} points")]
    TooFewPoints { k: usize, n: usize },
    #[error("bundle has no ground truth (oracle provider needs one)")]
    NoGroundTruth,
}

/// Per-primitive maximal displacement across all state pairs, raw and
/// normalized by the scene-wide maximum.
#[derive(Debug, Clone)]
pub struct DisplacementStats {
    pub raw: Vec<f64>,
    pub normalized: Vec<f64>,
    pub max: f64,
}

/// d_i = max over state pairs (j,k) of |mu_i^(j) - mu_i^(k)|; when nothing
/// moves at all, every normalized entry is 0.
pub fn displacement_stats(bundle: &SceneBundle) -> Result<DisplacementStats, SegmentError> {
    let k = bundle.num_states();
    if k < 2 {
        return Err(SegmentError::TooFewStates(k));
    }
    let n = bundle.num_primitives();
    let mut raw = vec![0.0f64; n];
    for a in 0..k {
        for b in (a + 1)..k {
            let sa = &bundle.states[a].primitives;
            let sb = &bundle.states[b].primitives;
            for i in 0..n {
                let d = (sa[i].center - sb[i].center).norm();
                if d > raw[i] {
                    raw[i] = d;
                }
            }
        }
    }
    let max = raw.iter().copied().fold(0.0, f64::max);
    let normalized = if max > 0.0 {
        raw.iter().map(|d| d / max).collect()
    } else {
        vec![0.0; n]
    };
    Ok(DisplacementStats {
        raw,
        normalized,
        max,
    })
}

/// Partition primitive indices by the motion threshold: normalized
/// displacement >= tau_mot is dynamic.
pub fn split_static_dynamic(stats: &DisplacementStats, tau_mot: f64) -> (Vec<usize>, Vec<usize>) {
    let mut stat = Vec::new();
    let mut dyn_ = Vec::new();
    for (i, &d) in stats.normalized.iter().enumerate() {
        if d >= tau_mot {
            dyn_.push(i);
        } else {
            stat.push(i);
        }
    }
    (stat, dyn_)
}

/// Two rendered views of the same object in two different states, handed to
/// a part-count provider.
#[derive(Debug, Clone)]
pub struct StatePairImages {
    pub state_a: usize,
    pub state_b: usize,
    pub view_a: usize,
    pub view_b: usize,
    pub image_a: RgbImage,
    pub image_b: RgbImage,
}

/// Estimates how many components moved between two object states. One
/// query per image pair; a batch of M pairs yields M counts.
pub trait PartCountProvider {
    fn count_moved(&self, pair: &StatePairImages) -> Result<u32, String>;
}

/// Reads the answer straight from synthetic ground truth (parts whose
/// schedule differs between the two sampled states).
pub struct OracleProvider<'a> {
    pub bundle: &'a SceneBundle,
}

impl PartCountProvider for OracleProvider<'_> {
    fn count_moved(&self, pair: &StatePairImages) -> Result<u32, String> {
        let gt = self
            .bundle
            .ground_truth
            .as_ref()
            .ok_or("oracle provider needs ground truth")?;
        Ok(gt.parts_moved_between(pair.state_a, pair.state_b))
    }
}

/// Always answers with a user-supplied count.
pub struct FixedProvider {
    pub count: u32,
}

impl PartCountProvider for FixedProvider {
    fn count_moved(&self, _pair: &StatePairImages) -> Result<u32, String> {
        Ok(self.count)
    }
}

/// Sample M state pairs (distinct states, distinct views where possible),
/// render both sides, query the provider once per pair, and return the mode
/// of the counts; ties break toward the smaller count.
pub fn estimate_part_count(
    provider: &dyn PartCountProvider,
    bundle: &SceneBundle,
    m: usize,
    retries: usize,
    seed: u64,
) -> Result<u32, SegmentError> {
    let k = bundle.num_states();
    if k < 2 {
        return Err(SegmentError::TooFewStates(k));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x70c0_u64);
    let mut counts = Vec::with_capacity(m);
    for _ in 0..m.max(1) {
        let state_a = rng.random_range(0..k);
        let state_b = loop {
            let s = rng.random_range(0..k);
            if s != state_a {
                break s;
            }
        };
        let views = bundle.cameras[state_a].len().min(bundle.cameras[state_b].len());
        let view_a = rng.random_range(0..views);
        let view_b = if views > 1 {
            loop {
                let v = rng.random_range(0..views);
                if v != view_a {
                    break v;
                }
            }
        } else {
            view_a
        };
        let pair = StatePairImages {
            state_a,
            state_b,
            view_a,
            view_b,
            image_a: render_view(&bundle.states[state_a], &bundle.cameras[state_a][view_a]).color,
            image_b: render_view(&bundle.states[state_b], &bundle.cameras[state_b][view_b]).color,
        };
        let mut last_err = String::new();
        let mut got = None;
        for _ in 0..=retries {
            match provider.count_moved(&pair) {
                Ok(c) => {
                    got = Some(c);
                    break;
                }
                Err(e) => last_err = e,
            }
        }
        match got {
            Some(c) => counts.push(c),
            None => {
                return Err(SegmentError::ProviderFailed {
                    retries,
                    reason: last_err,
                })
            }
        }
    }
    mode_smallest(&counts).ok_or(SegmentError::EmptyCounts)
}

/// Mode of the counts; ties break toward the smaller value.
pub fn mode_smallest(counts: &[u32]) -> Option<u32> {
    let mut hist = std::collections::BTreeMap::new();
    for &c in counts {
        *hist.entry(c).or_insert(0usize) += 1;
    }
    // BTreeMap iterates ascending, so the first maximum is the smallest.
    hist.into_iter()
        .max_by(|a, b| a.1.cmp(&b.1).then(b.0.cmp(&a.0)))
        .map(|(v, _)| v)
}

/// Per-primitive trajectory descriptor: per consecutive state pair, the
/// unit step direction (3) and step length (1), then the stacked vector is
/// l2-normalized as a whole.
#[derive(Debug, Clone, PartialEq)]
pub struct MotionDescriptor {
    pub values: Vec<f64>,
}

impl MotionDescriptor {
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn cosine_similarity(&self, other: &MotionDescriptor) -> f64 {
        let dot: f64 = self.values.iter().zip(&other.values).map(|(a, b)| a * b).sum();
        let na: f64 = self.values.iter().map(|v| v * v).sum::<f64>().sqrt();
        let nb: f64 = other.values.iter().map(|v| v * v).sum::<f64>().sqrt();
        if na == 0.0 || nb == 0.0 {
            0.0
        } else {
            dot / (na * nb)
        }
    }
}

/// Build 4(K-1)-dimensional motion descriptors for the given primitives.
pub fn build_descriptors(
    bundle: &SceneBundle,
    dynamic: &[usize],
) -> Result<Vec<MotionDescriptor>, SegmentError> {
    let k = bundle.num_states();
    if k < 2 {
        return Err(SegmentError::TooFewStates(k));
    }
    let out = dynamic
        .iter()
        .map(|&i| {
            let mut values = Vec::with_capacity(4 * (k - 1));
            for s in 0..k - 1 {
                let delta: Vector3<f64> = bundle.states[s + 1].primitives[i].center
                    - bundle.states[s].primitives[i].center;
                let len = delta.norm();
                let dir = delta / (len + DESCRIPTOR_EPS);
                values.extend_from_slice(&[dir.x, dir.y, dir.z, len]);
            }
            let norm: f64 = values.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm > 0.0 {
                for v in values.iter_mut() {
                    *v /= norm;
                }
            }
            MotionDescriptor { values }
        })
        .collect();
    Ok(out)
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// K-means with k-means++ seeding and Lloyd iterations until the centroids
/// move less than 1e-8 (or 300 iterations), followed by the small-cluster
/// merge rule. Returns dense labels 1..=n_surviving per descriptor.
pub fn cluster_dynamic(
    descriptors: &[MotionDescriptor],
    n_parts: usize,
    seed: u64,
) -> Result<Vec<u32>, SegmentError> {
    let n = descriptors.len();
    let k = n_parts.max(1);
    if n < k {
        return Err(SegmentError::TooFewPoints { k, n });
    }
    let dim = descriptors[0].dim();
    let points: Vec<&[f64]> = descriptors.iter().map(|d| d.values.as_slice()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ KMEANS_SALT);

    // k-means++ seeding.
    let mut centroids: Vec<Vec<f64>> = Vec::with_capacity(k);
    centroids.push(points[rng.random_range(0..n)].to_vec());
    let mut dist2: Vec<f64> = points
        .iter()
        .map(|p| sq_dist(p, &centroids[0]))
        .collect();
    while centroids.len() < k {
        let total: f64 = dist2.iter().sum();
        let next = if total > 0.0 {
            let mut pick = rng.random_range(0.0..total);
            let mut chosen = n - 1;
            for (i, &d) in dist2.iter().enumerate() {
                if pick < d {
                    chosen = i;
                    break;
                }
                pick -= d;
            }
            chosen
        } else {
            // All points coincide with some centroid; take the first index
            // not yet chosen.
            (0..n)
                .find(|i| centroids.iter().all(|c| sq_dist(points[*i], c) > 0.0))
                .unwrap_or(0)
        };
        centroids.push(points[next].to_vec());
        for (i, d) in dist2.iter_mut().enumerate() {
            let cand = sq_dist(points[i], centroids.last().unwrap());
            if cand < *d {
                *d = cand;
            }
        }
    }

    // Lloyd iterations.
    let mut assign = vec![0usize; n];
    for _ in 0..300 {
        for (i, p) in points.iter().enumerate() {
            let mut best = (f64::INFINITY, 0usize);
            for (c, centroid) in centroids.iter().enumerate() {
                let d = sq_dist(p, centroid);
                if d < best.0 {
                    best = (d, c);
                }
            }
            assign[i] = best.1;
        }
        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (i, &a) in assign.iter().enumerate() {
            counts[a] += 1;
            for (s, v) in sums[a].iter_mut().zip(points[i]) {
                *s += v;
            }
        }
        let mut movement: f64 = 0.0;
        for c in 0..k {
            if counts[c] == 0 {
                continue; // keep the previous centroid
            }
            let mut shift = 0.0;
            for d in 0..dim {
                let new = sums[c][d] / counts[c] as f64;
                shift += (new - centroids[c][d]).powi(2);
                centroids[c][d] = new;
            }
            movement = movement.max(shift.sqrt());
        }
        if movement < 1e-8 {
            break;
        }
    }

    // Merge rule: dissolve clusters holding fewer than 2% of the points
    // into the nearest surviving centroid.
    let mut counts = vec![0usize; k];
    for &a in &assign {
        counts[a] += 1;
    }
    let threshold = MERGE_FRACTION * n as f64;
    let mut surviving: Vec<usize> = (0..k)
        .filter(|&c| counts[c] as f64 >= threshold && counts[c] > 0)
        .collect();
    if surviving.is_empty() {
        // Keep the largest cluster (lowest index on ties).
        let best = (0..k).max_by_key(|&c| (counts[c], std::cmp::Reverse(c))).unwrap();
        surviving = vec![best];
    }
    let mut remap = vec![usize::MAX; k];
    for (dense, &c) in surviving.iter().enumerate() {
        remap[c] = dense;
    }
    for c in 0..k {
        if remap[c] == usize::MAX {
            // Nearest surviving centroid.
            let nearest = surviving
                .iter()
                .min_by(|&&a, &&b| {
                    sq_dist(&centroids[c], &centroids[a])
                        .partial_cmp(&sq_dist(&centroids[c], &centroids[b]))
                        .unwrap()
                })
                .copied()
                .unwrap();
            remap[c] = remap[nearest];
        }
    }
    Ok(assign.iter().map(|&a| (remap[a] + 1) as u32).collect())
}

// Salt keeps the clustering stream independent of other seeded consumers.
const KMEANS_SALT: u64 = 0x6b6d65616e73;

/// Full coarse labeling: displacement stats, static/dynamic split,
/// provider-estimated part count, descriptor clustering. Returns one label
/// per primitive (0 = static). The provider is never queried when the
/// scene is fully static.
pub fn coarse_labels(
    bundle: &SceneBundle,
    tau_mot: f64,
    provider: &dyn PartCountProvider,
    m_queries: usize,
    retries: usize,
    seed: u64,
) -> Result<Vec<u32>, SegmentError> {
    let stats = displacement_stats(bundle)?;
    let n = bundle.num_primitives();
    if stats.max == 0.0 {
        return Ok(vec![0; n]);
    }
    let (_static_set, dynamic) = split_static_dynamic(&stats, tau_mot);
    if dynamic.is_empty() {
        return Ok(vec![0; n]);
    }
    let n_parts = estimate_part_count(provider, bundle, m_queries, retries, seed)? as usize;
    if n_parts == 0 {
        return Ok(vec![0; n]);
    }
    let descriptors = build_descriptors(bundle, &dynamic)?;
    let cluster = cluster_dynamic(&descriptors, n_parts.min(dynamic.len()), seed)?;
    let mut labels = vec![0u32; n];
    for (&idx, &c) in dynamic.iter().zip(&cluster) {
        labels[idx] = c;
    }
    Ok(labels)
}
