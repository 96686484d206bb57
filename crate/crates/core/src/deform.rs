//! Latent-conditioned deformation network: a small tanh MLP mapping
//! (center, orientation, scale, latent) to per-primitive offsets
//! (delta-center, raw delta-quaternion, delta-scale), fit by displacement
//! regression against identity-consistent state snapshots with analytic
//! gradients and plain full-batch gradient descent.
//!
//! Offsets apply as `mu' = mu + dmu`, `s' = max(s + ds, S_MIN)`,
//! `q' = normalize(dq_raw) ⊗ q` (left multiplication).

use std::fs;
use std::path::Path;

use nalgebra::Vector3;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::field::{GaussianPrimitive, SceneBundle, StateSnapshot};
use crate::quat::Quat;

/// Scale floor preserving positivity under additive scale updates.
pub const S_MIN: f64 = 1e-6;
/// Geometry inputs: center (3) + quaternion (4) + scale (3).
pub const GEOM_DIM: usize = 10;
/// Output channels: dmu (3) + dq_raw (4) + ds (3).
pub const OUT_DIM: usize = 10;
/// Checkpoint format tag.
pub const CHECKPOINT_FORMAT: &str = "artikin-deform-v1";

#[derive(Debug, Error)]
pub enum DeformError {
    #[error("zero-norm delta quaternion")]
    ZeroDeltaQuat,
    #[error("training diverged at epoch {epoch}: loss {loss}")]
    Diverged { epoch: usize, loss: f64 },
    #[error("latent dimensions differ: {0} vs {1}")]
    LatentDimMismatch(usize, usize),
    #[error("interpolation parameter {0} outside [0,1]")]
    BadInterpolant(f64),
    #[error("unknown label {0} in part filter")]
    UnknownLabel(u32),
    #[error("need at least 2 states, got {0}")]
    TooFewStates(usize),
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("malformed checkpoint: {0}")]
    Malformed(String),
}

/// Per-state latent code.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatentCode {
    pub values: Vec<f64>,
}

impl LatentCode {
    pub fn zeros(dim: usize) -> Self {
        LatentCode {
            values: vec![0.0; dim],
        }
    }

    pub fn lerp(&self, other: &LatentCode, t: f64) -> LatentCode {
        LatentCode {
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| (1.0 - t) * a + t * b)
                .collect(),
        }
    }
}

/// Offsets predicted for one primitive.
#[derive(Debug, Clone, PartialEq)]
pub struct Offsets {
    pub delta_center: Vector3<f64>,
    pub delta_quat: [f64; 4],
    pub delta_scale: Vector3<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Dense {
    pub in_dim: usize,
    pub out_dim: usize,
    /// Row-major (out_dim x in_dim).
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Dense {
    #[allow(clippy::needless_range_loop)]
    fn forward(&self, x: &[f64], out: &mut [f64]) {
        for o in 0..self.out_dim {
            let row = &self.weights[o * self.in_dim..(o + 1) * self.in_dim];
            let mut acc = self.bias[o];
            for (w, v) in row.iter().zip(x) {
                acc += w * v;
            }
            out[o] = acc;
        }
    }
}

/// The deformation MLP: three tanh hidden layers and a linear output.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DeformNet {
    pub latent_dim: usize,
    pub hidden_dim: usize,
    pub layers: Vec<Dense>,
    /// Per-feature input standardization (geometry block only; the latent
    /// block passes through untouched). Identity until
    /// [`Self::standardize_inputs_from`] is called.
    pub input_offset: Vec<f64>,
    pub input_scale: Vec<f64>,
}

/// Gradient buffer shaped like the network parameters.
#[derive(Debug, Clone)]
pub struct GradBuf {
    pub layers: Vec<(Vec<f64>, Vec<f64>)>,
}

impl GradBuf {
    fn zeros_like(net: &DeformNet) -> GradBuf {
        GradBuf {
            layers: net
                .layers
                .iter()
                .map(|l| (vec![0.0; l.weights.len()], vec![0.0; l.bias.len()]))
                .collect(),
        }
    }

    fn scale(&mut self, f: f64) {
        for (w, b) in &mut self.layers {
            for v in w.iter_mut() {
                *v *= f;
            }
            for v in b.iter_mut() {
                *v *= f;
            }
        }
    }
}

struct Trace {
    input: Vec<f64>,
    hidden: Vec<Vec<f64>>, // post-tanh activations, one per hidden layer
}

impl DeformNet {
    /// Fresh network with small random weights. The output layer starts
    /// near zero with the delta-quaternion bias at identity (1,0,0,0), so an
    /// untrained network deforms nothing.
    pub fn new(latent_dim: usize, hidden_dim: usize, seed: u64) -> DeformNet {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x6465666e6574);
        let dims = [
            (GEOM_DIM + latent_dim, hidden_dim),
            (hidden_dim, hidden_dim),
            (hidden_dim, hidden_dim),
            (hidden_dim, OUT_DIM),
        ];
        let layers = dims
            .iter()
            .enumerate()
            .map(|(li, &(i, o))| {
                let bound = (6.0 / (i + o) as f64).sqrt();
                let out_scale = if li == 3 { 0.005 } else { 1.0 };
                let weights = (0..i * o)
                    .map(|_| rng.random_range(-bound..bound) * out_scale)
                    .collect();
                let mut bias = vec![0.0; o];
                if li == 3 {
                    bias[3] = 1.0; // identity delta rotation
                }
                Dense {
                    in_dim: i,
                    out_dim: o,
                    weights,
                    bias,
                }
            })
            .collect();
        DeformNet {
            latent_dim,
            hidden_dim,
            layers,
            input_offset: vec![0.0; GEOM_DIM + latent_dim],
            input_scale: vec![1.0; GEOM_DIM + latent_dim],
        }
    }

    /// Standardize the geometry input block to zero mean and unit scale
    /// using statistics of a reference field; conditions the optimization.
    pub fn standardize_inputs_from(&mut self, field: &StateSnapshot) {
        if field.primitives.is_empty() {
            return;
        }
        let n = field.primitives.len() as f64;
        let mut mean = [0.0; GEOM_DIM];
        let mut var = [0.0; GEOM_DIM];
        let rows: Vec<[f64; GEOM_DIM]> = field
            .primitives
            .iter()
            .map(|p| {
                [
                    p.center.x,
                    p.center.y,
                    p.center.z,
                    p.orientation.w,
                    p.orientation.x,
                    p.orientation.y,
                    p.orientation.z,
                    p.scale.x,
                    p.scale.y,
                    p.scale.z,
                ]
            })
            .collect();
        for row in &rows {
            for (m, v) in mean.iter_mut().zip(row) {
                *m += v;
            }
        }
        for m in mean.iter_mut() {
            *m /= n;
        }
        for row in &rows {
            for i in 0..GEOM_DIM {
                var[i] += (row[i] - mean[i]).powi(2);
            }
        }
        for i in 0..GEOM_DIM {
            self.input_offset[i] = mean[i];
            self.input_scale[i] = (var[i] / n).sqrt().max(1e-3);
        }
    }

    pub fn input_dim(&self) -> usize {
        GEOM_DIM + self.latent_dim
    }

    pub fn param_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.len() + l.bias.len())
            .sum()
    }

    pub fn get_param(&self, mut idx: usize) -> f64 {
        for l in &self.layers {
            if idx < l.weights.len() {
                return l.weights[idx];
            }
            idx -= l.weights.len();
            if idx < l.bias.len() {
                return l.bias[idx];
            }
            idx -= l.bias.len();
        }
        panic!("parameter index out of range");
    }

    pub fn set_param(&mut self, mut idx: usize, v: f64) {
        for l in &mut self.layers {
            if idx < l.weights.len() {
                l.weights[idx] = v;
                return;
            }
            idx -= l.weights.len();
            if idx < l.bias.len() {
                l.bias[idx] = v;
                return;
            }
            idx -= l.bias.len();
        }
        panic!("parameter index out of range");
    }

    /// Flat-index lookup into a gradient buffer, matching the parameter
    /// order of [`Self::get_param`].
    pub fn grad_at(grads: &GradBuf, mut idx: usize) -> f64 {
        for (w, b) in &grads.layers {
            if idx < w.len() {
                return w[idx];
            }
            idx -= w.len();
            if idx < b.len() {
                return b[idx];
            }
            idx -= b.len();
        }
        panic!("parameter index out of range");
    }

    fn pack_input(&self, p: &GaussianPrimitive, alpha: &LatentCode) -> Vec<f64> {
        assert_eq!(alpha.values.len(), self.latent_dim);
        let mut x = Vec::with_capacity(self.input_dim());
        x.extend_from_slice(&[p.center.x, p.center.y, p.center.z]);
        x.extend_from_slice(&p.orientation.to_array());
        x.extend_from_slice(&[p.scale.x, p.scale.y, p.scale.z]);
        x.extend_from_slice(&alpha.values);
        for (v, (off, sc)) in x.iter_mut().zip(self.input_offset.iter().zip(&self.input_scale)) {
            *v = (*v - off) / sc;
        }
        x
    }

    fn forward_trace(&self, input: Vec<f64>) -> (Trace, [f64; OUT_DIM]) {
        let mut hidden = Vec::with_capacity(3);
        let mut cur = input.clone();
        for l in &self.layers[..3] {
            let mut next = vec![0.0; l.out_dim];
            l.forward(&cur, &mut next);
            for v in next.iter_mut() {
                *v = v.tanh();
            }
            hidden.push(next.clone());
            cur = next;
        }
        let mut out = [0.0; OUT_DIM];
        self.layers[3].forward(&cur, &mut out);
        (Trace { input, hidden }, out)
    }

    /// Deterministic forward evaluation of the offsets for one primitive.
    pub fn forward(&self, p: &GaussianPrimitive, alpha: &LatentCode) -> Offsets {
        let (_, out) = self.forward_trace(self.pack_input(p, alpha));
        Offsets {
            delta_center: Vector3::new(out[0], out[1], out[2]),
            delta_quat: [out[3], out[4], out[5], out[6]],
            delta_scale: Vector3::new(out[7], out[8], out[9]),
        }
    }

    /// Reverse-mode pass: accumulate parameter gradients for an arbitrary
    /// output cotangent and return the gradient with respect to the input
    /// vector (geometry block first, latent block last).
    fn backward(&self, trace: &Trace, cotangent: &[f64; OUT_DIM], grads: &mut GradBuf) -> Vec<f64> {
        // Output layer.
        let mut delta: Vec<f64> = cotangent.to_vec();
        let mut below = vec![0.0; self.layers[3].in_dim];
        accumulate_layer(
            &self.layers[3],
            &trace.hidden[2],
            &delta,
            &mut grads.layers[3],
            &mut below,
        );
        // Hidden layers in reverse; tanh'(a) = 1 - h^2 on the stored h.
        for li in (0..3).rev() {
            delta = below
                .iter()
                .zip(&trace.hidden[li])
                .map(|(d, h)| d * (1.0 - h * h))
                .collect();
            let upstream: Vec<f64> = if li == 0 {
                trace.input.clone()
            } else {
                trace.hidden[li - 1].clone()
            };
            below = vec![0.0; self.layers[li].in_dim];
            accumulate_layer(
                &self.layers[li],
                &upstream,
                &delta,
                &mut grads.layers[li],
                &mut below,
            );
        }
        below
    }
}

#[allow(clippy::needless_range_loop)]
fn accumulate_layer(
    layer: &Dense,
    upstream: &[f64],
    delta: &[f64],
    grad: &mut (Vec<f64>, Vec<f64>),
    below: &mut [f64],
) {
    for o in 0..layer.out_dim {
        let d = delta[o];
        grad.1[o] += d;
        let row = &layer.weights[o * layer.in_dim..(o + 1) * layer.in_dim];
        let grow = &mut grad.0[o * layer.in_dim..(o + 1) * layer.in_dim];
        for i in 0..layer.in_dim {
            grow[i] += d * upstream[i];
            below[i] += d * row[i];
        }
    }
}

/// Apply predicted offsets to a primitive. The raw delta quaternion is
/// normalized and left-multiplied onto the orientation; appearance and
/// label are untouched.
pub fn apply_offsets(
    p: &GaussianPrimitive,
    delta_center: &Vector3<f64>,
    delta_quat_raw: &[f64; 4],
    delta_scale: &Vector3<f64>,
) -> Result<GaussianPrimitive, DeformError> {
    let dq = Quat::from_array(*delta_quat_raw)
        .normalized()
        .ok_or(DeformError::ZeroDeltaQuat)?;
    let mut out = p.clone();
    out.center = p.center + delta_center;
    out.scale = Vector3::new(
        (p.scale.x + delta_scale.x).max(S_MIN),
        (p.scale.y + delta_scale.y).max(S_MIN),
        (p.scale.z + delta_scale.z).max(S_MIN),
    );
    out.orientation = dq
        .hamilton(&p.orientation)
        .normalized()
        .ok_or(DeformError::ZeroDeltaQuat)?;
    Ok(out)
}

/// Deform a whole snapshot with one latent code.
pub fn deform_snapshot(
    net: &DeformNet,
    canonical: &StateSnapshot,
    alpha: &LatentCode,
    state_index: usize,
) -> Result<StateSnapshot, DeformError> {
    let primitives = canonical
        .primitives
        .iter()
        .map(|p| {
            let o = net.forward(p, alpha);
            apply_offsets(p, &o.delta_center, &o.delta_quat, &o.delta_scale)
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(StateSnapshot {
        state_index,
        primitives,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct FitConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub latent_dim: usize,
    pub hidden_dim: usize,
    pub seed: u64,
    pub lambda_q: f64,
    pub lambda_s: f64,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            epochs: 2000,
            learning_rate: 0.5,
            latent_dim: 8,
            hidden_dim: 64,
            seed: 0,
            lambda_q: 0.1,
            lambda_s: 0.1,
        }
    }
}

#[derive(Debug, Clone)]
pub struct FitResult {
    pub net: DeformNet,
    pub latents: Vec<LatentCode>,
    pub initial_loss: f64,
    pub final_loss: f64,
}

/// One sample's loss and the cotangent on the network outputs.
///
/// loss = |mu' - mu_t|^2 + lambda_q (1 - <q', q_t>^2) + lambda_s |s' - s_t|^2
fn sample_loss_cotangent(
    canonical: &GaussianPrimitive,
    target: &GaussianPrimitive,
    out: &[f64; OUT_DIM],
    lambda_q: f64,
    lambda_s: f64,
) -> (f64, [f64; OUT_DIM]) {
    let mut cot = [0.0; OUT_DIM];

    // Center block.
    let mu_res = [
        canonical.center.x + out[0] - target.center.x,
        canonical.center.y + out[1] - target.center.y,
        canonical.center.z + out[2] - target.center.z,
    ];
    let mut loss = 0.0;
    for i in 0..3 {
        loss += mu_res[i] * mu_res[i];
        cot[i] = 2.0 * mu_res[i];
    }

    // Quaternion block: q' = normalize(v) ⊗ q.
    let v = [out[3], out[4], out[5], out[6]];
    let r = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2] + v[3] * v[3]).sqrt();
    let qhat = Quat::new(v[0] / r, v[1] / r, v[2] / r, v[3] / r);
    let qp = qhat.hamilton(&canonical.orientation);
    let qt = target.orientation;
    let c = qp.dot(&qt);
    loss += lambda_q * (1.0 - c * c);
    let d_qp = [
        -2.0 * lambda_q * c * qt.w,
        -2.0 * lambda_q * c * qt.x,
        -2.0 * lambda_q * c * qt.y,
        -2.0 * lambda_q * c * qt.z,
    ];
    // q' = M_R(q) qhat (right multiplication by the canonical orientation);
    // d qhat = M_R(q)^T d q'.
    let q = canonical.orientation;
    let d_qhat = [
        q.w * d_qp[0] + q.x * d_qp[1] + q.y * d_qp[2] + q.z * d_qp[3],
        -q.x * d_qp[0] + q.w * d_qp[1] - q.z * d_qp[2] + q.y * d_qp[3],
        -q.y * d_qp[0] + q.z * d_qp[1] + q.w * d_qp[2] - q.x * d_qp[3],
        -q.z * d_qp[0] - q.y * d_qp[1] + q.x * d_qp[2] + q.w * d_qp[3],
    ];
    // Normalization Jacobian: (I - qhat qhat^T) / r.
    let qh = [qhat.w, qhat.x, qhat.y, qhat.z];
    let dot: f64 = (0..4).map(|i| qh[i] * d_qhat[i]).sum();
    for i in 0..4 {
        cot[3 + i] = (d_qhat[i] - qh[i] * dot) / r;
    }

    // Scale block with the positivity floor.
    let s = [canonical.scale.x, canonical.scale.y, canonical.scale.z];
    let st = [target.scale.x, target.scale.y, target.scale.z];
    for i in 0..3 {
        let pre = s[i] + out[7 + i];
        let clamped = pre.max(S_MIN);
        let res = clamped - st[i];
        loss += lambda_s * res * res;
        cot[7 + i] = if pre > S_MIN {
            2.0 * lambda_s * res
        } else {
            0.0
        };
    }

    (loss, cot)
}

/// Mean loss over all (state, primitive) samples.
pub fn total_loss(
    net: &DeformNet,
    latents: &[LatentCode],
    bundle: &SceneBundle,
    lambda_q: f64,
    lambda_s: f64,
) -> f64 {
    let mut sum = 0.0;
    let mut count = 0usize;
    for (k, alpha) in latents.iter().enumerate() {
        for (canon, target) in bundle
            .canonical
            .primitives
            .iter()
            .zip(&bundle.states[k].primitives)
        {
            let (_, out) = net.forward_trace(net.pack_input(canon, alpha));
            let (loss, _) = sample_loss_cotangent(canon, target, &out, lambda_q, lambda_s);
            sum += loss;
            count += 1;
        }
    }
    sum / count as f64
}

/// Mean loss and its gradients with respect to parameters and latents.
pub fn total_loss_and_grads(
    net: &DeformNet,
    latents: &[LatentCode],
    bundle: &SceneBundle,
    lambda_q: f64,
    lambda_s: f64,
) -> (f64, GradBuf, Vec<Vec<f64>>) {
    let mut grads = GradBuf::zeros_like(net);
    let mut latent_grads = vec![vec![0.0; net.latent_dim]; latents.len()];
    let mut sum = 0.0;
    let mut count = 0usize;
    for (k, alpha) in latents.iter().enumerate() {
        for (canon, target) in bundle
            .canonical
            .primitives
            .iter()
            .zip(&bundle.states[k].primitives)
        {
            let (trace, out) = net.forward_trace(net.pack_input(canon, alpha));
            let (loss, cot) = sample_loss_cotangent(canon, target, &out, lambda_q, lambda_s);
            let input_grad = net.backward(&trace, &cot, &mut grads);
            for (g, v) in latent_grads[k].iter_mut().zip(&input_grad[GEOM_DIM..]) {
                *g += v;
            }
            sum += loss;
            count += 1;
        }
    }
    let inv = 1.0 / count as f64;
    grads.scale(inv);
    for lg in &mut latent_grads {
        for v in lg.iter_mut() {
            *v *= inv;
        }
    }
    (sum * inv, grads, latent_grads)
}

/// Jointly fit the network parameters and one latent per state by plain
/// full-batch gradient descent. Single-threaded with a fixed accumulation
/// order: the same seed reproduces the result bit for bit.
pub fn fit(bundle: &SceneBundle, cfg: &FitConfig) -> Result<FitResult, DeformError> {
    let k = bundle.num_states();
    if k < 2 {
        return Err(DeformError::TooFewStates(k));
    }
    let mut net = DeformNet::new(cfg.latent_dim, cfg.hidden_dim, cfg.seed);
    net.standardize_inputs_from(&bundle.canonical);
    let mut latent_rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x6c6174656e74);
    let normal = rand_distr::Normal::new(0.0f64, 0.1).expect("valid stddev");
    let mut latents: Vec<LatentCode> = (0..k)
        .map(|_| LatentCode {
            values: (0..cfg.latent_dim).map(|_| latent_rng.sample(normal)).collect(),
        })
        .collect();

    let mut initial_loss = 0.0;
    for epoch in 0..cfg.epochs {
        let (loss, grads, latent_grads) =
            total_loss_and_grads(&net, &latents, bundle, cfg.lambda_q, cfg.lambda_s);
        if !loss.is_finite() {
            return Err(DeformError::Diverged { epoch, loss });
        }
        if epoch == 0 {
            initial_loss = loss;
        }
        for (layer, (gw, gb)) in net.layers.iter_mut().zip(&grads.layers) {
            for (w, g) in layer.weights.iter_mut().zip(gw) {
                *w -= cfg.learning_rate * g;
            }
            for (b, g) in layer.bias.iter_mut().zip(gb) {
                *b -= cfg.learning_rate * g;
            }
        }
        for (alpha, lg) in latents.iter_mut().zip(&latent_grads) {
            for (a, g) in alpha.values.iter_mut().zip(lg) {
                *a -= cfg.learning_rate * g;
            }
        }
    }
    let final_loss = total_loss(&net, &latents, bundle, cfg.lambda_q, cfg.lambda_s);
    if !final_loss.is_finite() {
        return Err(DeformError::Diverged {
            epoch: cfg.epochs,
            loss: final_loss,
        });
    }
    Ok(FitResult {
        net,
        latents,
        initial_loss,
        final_loss,
    })
}

/// Deform the canonical field at the interpolated latent
/// `(1-t) a + t b`. With a part filter, only primitives whose label is in
/// the filter follow the interpolated latent; all others stay on the
/// `alpha_a` deformation.
pub fn interpolate(
    net: &DeformNet,
    alpha_a: &LatentCode,
    alpha_b: &LatentCode,
    t: f64,
    canonical: &StateSnapshot,
    part_filter: Option<&std::collections::BTreeSet<u32>>,
) -> Result<StateSnapshot, DeformError> {
    if alpha_a.values.len() != alpha_b.values.len() {
        return Err(DeformError::LatentDimMismatch(
            alpha_a.values.len(),
            alpha_b.values.len(),
        ));
    }
    if !(0.0..=1.0).contains(&t) {
        return Err(DeformError::BadInterpolant(t));
    }
    if let Some(filter) = part_filter {
        let present: std::collections::BTreeSet<u32> =
            canonical.primitives.iter().map(|p| p.label).collect();
        for l in filter {
            if !present.contains(l) {
                return Err(DeformError::UnknownLabel(*l));
            }
        }
    }
    let alpha_t = alpha_a.lerp(alpha_b, t);
    let primitives = canonical
        .primitives
        .iter()
        .map(|p| {
            let alpha = match part_filter {
                Some(filter) if !filter.contains(&p.label) => alpha_a,
                _ => &alpha_t,
            };
            let o = net.forward(p, alpha);
            apply_offsets(p, &o.delta_center, &o.delta_quat, &o.delta_scale)
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(StateSnapshot {
        state_index: canonical.state_index,
        primitives,
    })
}

// ---------------------------------------------------------------------------
// Checkpoints
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct Checkpoint {
    format: String,
    net: DeformNet,
    latents: Vec<LatentCode>,
    config: FitConfig,
}

pub fn save_checkpoint(
    path: &Path,
    net: &DeformNet,
    latents: &[LatentCode],
    cfg: &FitConfig,
) -> Result<(), DeformError> {
    let ck = Checkpoint {
        format: CHECKPOINT_FORMAT.into(),
        net: net.clone(),
        latents: latents.to_vec(),
        config: cfg.clone(),
    };
    let text = serde_json::to_string(&ck).map_err(|e| DeformError::Malformed(e.to_string()))?;
    fs::write(path, text).map_err(|source| DeformError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn load_checkpoint(path: &Path) -> Result<(DeformNet, Vec<LatentCode>, FitConfig), DeformError> {
    let text = fs::read_to_string(path).map_err(|source| DeformError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let ck: Checkpoint =
        serde_json::from_str(&text).map_err(|e| DeformError::Malformed(e.to_string()))?;
    if ck.format != CHECKPOINT_FORMAT {
        return Err(DeformError::Malformed(format!(
            "unsupported checkpoint format {}",
            ck.format
        )));
    }
    Ok((ck.net, ck.latents, ck.config))
}
