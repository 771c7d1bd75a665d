//! Convolutional patch-to-energy regressor trained with momentum SGD.
//!
//! The network is generic over the float type: production models run in
//! `f32`, while gradient checks run the identical code in `f64`.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::iter::Sum;
use std::path::{Path, PathBuf};

use num_traits::Float;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::patch::HeightPatch;

pub const MODEL_MAGIC: &[u8; 8] = b"TENRGNN\0";
pub const MODEL_VERSION: u32 = 1;
const GRAD_CHUNK: usize = 8;

pub trait Scalar: Float + Send + Sync + Sum + std::fmt::Debug + 'static {}
impl<T: Float + Send + Sync + Sum + std::fmt::Debug + 'static> Scalar for T {}

fn cast<T: Scalar>(v: f64) -> T {
    T::from(v).expect("float conversion")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    /// Patch side the network consumes.
    #[serde(default = "default_input_n")]
    pub input_n: usize,
    /// Heights are divided by this before entering the network.
    #[serde(default = "default_height_scale")]
    pub height_scale: f64,
    /// Output channels of the stride-2 3×3 convolutions.
    #[serde(default = "default_conv")]
    pub conv_channels: Vec<usize>,
    /// Fully connected widths after global average pooling; ends in 1.
    #[serde(default = "default_dense")]
    pub dense_widths: Vec<usize>,
}

fn default_input_n() -> usize {
    32
}
fn default_height_scale() -> f64 {
    0.05
}
fn default_conv() -> Vec<usize> {
    vec![8, 16, 32]
}
fn default_dense() -> Vec<usize> {
    vec![512, 256, 1]
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            input_n: default_input_n(),
            height_scale: default_height_scale(),
            conv_channels: default_conv(),
            dense_widths: default_dense(),
        }
    }
}

impl ModelConfig {
    /// An 8×8 input, two small convolutions and an 8/4/1 head.
    pub fn tiny() -> Self {
        ModelConfig {
            input_n: 8,
            height_scale: 0.05,
            conv_channels: vec![2, 3],
            dense_widths: vec![8, 4, 1],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_n < 2 {
            return Err(Error::invalid("input_n must be at least 2"));
        }
        if !(self.height_scale > 0.0 && self.height_scale.is_finite()) {
            return Err(Error::invalid("height_scale must be positive"));
        }
        if self.conv_channels.is_empty() || self.conv_channels.contains(&0) {
            return Err(Error::invalid(
                "need at least one convolution with non-zero channels",
            ));
        }
        if self.dense_widths.last() != Some(&1) || self.dense_widths.contains(&0) {
            return Err(Error::invalid("dense widths must be non-zero and end in 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrainMode {
    /// Only the fully connected head learns.
    HeadOnly,
    FromScratch,
    /// Reserved for [`fine_tune`].
    FineTune,
}

fn default_lr() -> f64 {
    1e-4
}
fn default_momentum() -> f64 {
    0.9
}
fn default_batch() -> usize {
    32
}
fn default_mode() -> TrainMode {
    TrainMode::FromScratch
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    #[serde(default = "default_lr")]
    pub learning_rate: f64,
    pub epochs: usize,
    #[serde(default = "default_batch")]
    pub batch_size: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_mode")]
    pub mode: TrainMode,
    #[serde(default = "default_momentum")]
    pub momentum: f64,
}

impl TrainConfig {
    pub fn new(epochs: usize, seed: u64) -> Self {
        TrainConfig {
            learning_rate: default_lr(),
            epochs,
            batch_size: default_batch(),
            seed,
            mode: default_mode(),
            momentum: default_momentum(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::invalid("learning rate must be positive"));
        }
        if self.batch_size == 0 {
            return Err(Error::invalid("batch size must be at least 1"));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::invalid("momentum must be in [0, 1)"));
        }
        Ok(())
    }
}

/// Patches paired with scaled-energy targets.
#[derive(Debug, Clone, Default)]
pub struct Dataset {
    patches: Vec<HeightPatch>,
    targets: Vec<f64>,
}

impl Dataset {
    pub fn new(patches: Vec<HeightPatch>, targets: Vec<f64>) -> Result<Self> {
        if patches.len() != targets.len() {
            return Err(Error::invalid(format!(
                "{} patches for {} targets",
                patches.len(),
                targets.len()
            )));
        }
        if let Some(first) = patches.first() {
            if patches.iter().any(|p| {
                p.n() != first.n() || (p.side() - first.side()).abs() > 1e-6 * first.side()
            }) {
                return Err(Error::invalid("all patches must share n and side"));
            }
        }
        if targets.iter().any(|t| !t.is_finite()) {
            return Err(Error::invalid("targets must be finite"));
        }
        Ok(Dataset { patches, targets })
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn patches(&self) -> &[HeightPatch] {
        &self.patches
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }
}

#[derive(Debug, Clone, Copy)]
struct ConvShape {
    cin: usize,
    cout: usize,
    n_in: usize,
    n_out: usize,
    w: usize,
    b: usize,
}

#[derive(Debug, Clone, Copy)]
struct DenseShape {
    nin: usize,
    nout: usize,
    w: usize,
    b: usize,
    relu: bool,
}

#[derive(Debug, Clone)]
struct Layout {
    conv: Vec<ConvShape>,
    dense: Vec<DenseShape>,
    /// Parameters before this index belong to the convolutions.
    head_start: usize,
    len: usize,
}

impl Layout {
    fn new(cfg: &ModelConfig) -> Self {
        let mut off = 0;
        let mut conv = Vec::new();
        let (mut cin, mut n_in) = (1, cfg.input_n);
        for &cout in &cfg.conv_channels {
            let n_out = (n_in - 1) / 2 + 1;
            let w = off;
            off += cout * cin * 9;
            let b = off;
            off += cout;
            conv.push(ConvShape {
                cin,
                cout,
                n_in,
                n_out,
                w,
                b,
            });
            cin = cout;
            n_in = n_out;
        }
        let head_start = off;
        let mut dense = Vec::new();
        let mut nin = cin;
        for (k, &nout) in cfg.dense_widths.iter().enumerate() {
            let w = off;
            off += nout * nin;
            let b = off;
            off += nout;
            dense.push(DenseShape {
                nin,
                nout,
                w,
                b,
                relu: k + 1 < cfg.dense_widths.len(),
            });
            nin = nout;
        }
        Layout {
            conv,
            dense,
            head_start,
            len: off,
        }
    }
}

/// Activations kept for the backward pass.
struct Trace<T> {
    /// Unrolled convolution inputs, `(cin·9) × n_out²` per layer.
    cols: Vec<Vec<T>>,
    conv: Vec<Vec<T>>,
    pooled: Vec<T>,
    dense: Vec<Vec<T>>,
}

/// The raw network: architecture plus a flat parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Network<T> {
    config: ModelConfig,
    params: Vec<T>,
    layout_len: usize,
    head_start: usize,
}

impl<T: Scalar> Network<T> {
    /// Uniform `±√(6/fan_in)` weights from a seeded generator; biases start
    /// at zero.
    pub fn init(config: &ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let layout = Layout::new(config);
        let mut params = vec![T::zero(); layout.len];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for c in &layout.conv {
            let bound = (6.0 / (c.cin * 9) as f64).sqrt();
            for p in &mut params[c.w..c.b] {
                *p = cast(rng.random_range(-bound..bound));
            }
        }
        for d in &layout.dense {
            let bound = (6.0 / d.nin as f64).sqrt();
            for p in &mut params[d.w..d.b] {
                *p = cast(rng.random_range(-bound..bound));
            }
        }
        Ok(Network {
            config: config.clone(),
            params,
            layout_len: layout.len,
            head_start: layout.head_start,
        })
    }

    pub fn from_params(config: &ModelConfig, params: Vec<T>) -> Result<Self> {
        config.validate()?;
        let layout = Layout::new(config);
        if params.len() != layout.len {
            return Err(Error::invalid(format!(
                "architecture needs {} parameters, got {}",
                layout.len,
                params.len()
            )));
        }
        Ok(Network {
            config: config.clone(),
            params,
            layout_len: layout.len,
            head_start: layout.head_start,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn params(&self) -> &[T] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [T] {
        &mut self.params
    }

    pub fn param_count(&self) -> usize {
        self.layout_len
    }

    /// Index of the first fully connected parameter.
    pub fn head_start(&self) -> usize {
        self.head_start
    }

    /// Zeroes the final layer so the network outputs exactly 0.
    pub fn zero_output_layer(&mut self) {
        let layout = Layout::new(&self.config);
        let last = layout.dense.last().expect("validated");
        self.params[last.w..last.b + last.nout].fill(T::zero());
    }

    fn input_len(&self) -> usize {
        self.config.input_n * self.config.input_n
    }

    /// Forward pass on a normalized `input_n²` input.
    pub fn forward(&self, input: &[T]) -> T {
        let layout = Layout::new(&self.config);
        let trace = self.forward_trace(&layout, input);
        trace.dense.last().expect("validated")[0]
    }

    fn forward_trace(&self, layout: &Layout, input: &[T]) -> Trace<T> {
        let p = &self.params;
        let mut cols_all: Vec<Vec<T>> = Vec::with_capacity(layout.conv.len());
        let mut conv_out: Vec<Vec<T>> = Vec::with_capacity(layout.conv.len());
        for (l, c) in layout.conv.iter().enumerate() {
            let x: &[T] = if l == 0 { input } else { &conv_out[l - 1] };
            let cols = im2col(c, x);
            let (k_len, area) = (c.cin * 9, c.n_out * c.n_out);
            let mut out = vec![T::zero(); c.cout * area];
            for (o, row) in out.chunks_exact_mut(area).enumerate() {
                row.fill(p[c.b + o]);
                let w = &p[c.w + o * k_len..c.w + (o + 1) * k_len];
                for (k, &wk) in w.iter().enumerate() {
                    axpy(row, wk, &cols[k * area..(k + 1) * area]);
                }
                row.iter_mut().for_each(|v| *v = v.max(T::zero()));
            }
            cols_all.push(cols);
            conv_out.push(out);
        }

        let last = layout.conv.last().expect("validated");
        let area = last.n_out * last.n_out;
        let feat = conv_out.last().expect("validated");
        let inv_area: T = cast(1.0 / area as f64);
        let pooled: Vec<T> = feat
            .chunks_exact(area)
            .map(|ch| ch.iter().copied().sum::<T>() * inv_area)
            .collect();

        let mut dense_out: Vec<Vec<T>> = Vec::with_capacity(layout.dense.len());
        for (l, d) in layout.dense.iter().enumerate() {
            let x: &[T] = if l == 0 { &pooled } else { &dense_out[l - 1] };
            let out = (0..d.nout)
                .map(|o| {
                    let z = p[d.b + o] + dot(&p[d.w + o * d.nin..d.w + (o + 1) * d.nin], x);
                    if d.relu {
                        z.max(T::zero())
                    } else {
                        z
                    }
                })
                .collect();
            dense_out.push(out);
        }
        Trace {
            cols: cols_all,
            conv: conv_out,
            pooled,
            dense: dense_out,
        }
    }

    /// Accumulates `d(output)/d(params) · dout` into `grad`.
    fn backward(&self, layout: &Layout, trace: &Trace<T>, dout: T, grad: &mut [T]) {
        let p = &self.params;
        let mut delta = vec![dout];
        for l in (0..layout.dense.len()).rev() {
            let d = layout.dense[l];
            let x: &[T] = if l == 0 {
                &trace.pooled
            } else {
                &trace.dense[l - 1]
            };
            if d.relu {
                for (g, &a) in delta.iter_mut().zip(&trace.dense[l]) {
                    if a <= T::zero() {
                        *g = T::zero();
                    }
                }
            }
            let mut dx = vec![T::zero(); d.nin];
            for (o, &g) in delta.iter().enumerate() {
                if g == T::zero() {
                    continue;
                }
                grad[d.b + o] = grad[d.b + o] + g;
                let row = d.w + o * d.nin..d.w + (o + 1) * d.nin;
                axpy(&mut grad[row.clone()], g, x);
                axpy(&mut dx, g, &p[row]);
            }
            delta = dx;
        }

        let last = layout.conv.last().expect("validated");
        let area = last.n_out * last.n_out;
        let inv_area: T = cast(1.0 / area as f64);
        let mut dfeat: Vec<T> = (0..last.cout * area)
            .map(|k| delta[k / area] * inv_area)
            .collect();

        for l in (0..layout.conv.len()).rev() {
            let c = layout.conv[l];
            let (k_len, area) = (c.cin * 9, c.n_out * c.n_out);
            for (g, &a) in dfeat.iter_mut().zip(&trace.conv[l]) {
                if a <= T::zero() {
                    *g = T::zero();
                }
            }
            let cols = &trace.cols[l];
            let need_dx = l > 0;
            let mut dcols = if need_dx {
                vec![T::zero(); k_len * area]
            } else {
                Vec::new()
            };
            for (o, dz) in dfeat.chunks_exact(area).enumerate() {
                if dz.iter().all(|&g| g == T::zero()) {
                    continue;
                }
                grad[c.b + o] = grad[c.b + o] + dz.iter().copied().sum::<T>();
                for k in 0..k_len {
                    let wi = c.w + o * k_len + k;
                    grad[wi] = grad[wi] + dot(dz, &cols[k * area..(k + 1) * area]);
                    if need_dx {
                        axpy(&mut dcols[k * area..(k + 1) * area], p[wi], dz);
                    }
                }
            }
            if need_dx {
                dfeat = col2im(&c, &dcols);
            }
        }
    }

    /// Mean squared error over `(inputs, targets)`.
    pub fn loss(&self, inputs: &[Vec<T>], targets: &[T]) -> T {
        let n: T = cast(targets.len() as f64);
        inputs
            .iter()
            .zip(targets)
            .map(|(x, &y)| {
                let e = self.forward(x) - y;
                e * e
            })
            .sum::<T>()
            / n
    }

    /// Mean squared error and its gradient with respect to every parameter.
    pub fn loss_and_gradient(&self, inputs: &[Vec<T>], targets: &[T]) -> (T, Vec<T>) {
        let idx: Vec<usize> = (0..targets.len()).collect();
        let refs: Vec<&[T]> = inputs.iter().map(Vec::as_slice).collect();
        self.batch_gradient(&refs, targets, &idx)
    }

    /// Gradient over the samples in `batch`, computed in fixed chunks and
    /// summed in chunk order so the result does not depend on scheduling.
    fn batch_gradient(&self, inputs: &[&[T]], targets: &[T], batch: &[usize]) -> (T, Vec<T>) {
        let layout = Layout::new(&self.config);
        let scale: T = cast(2.0 / batch.len() as f64);
        let partials: Vec<(T, Vec<T>)> = batch
            .par_chunks(GRAD_CHUNK)
            .map(|chunk| {
                let mut grad = vec![T::zero(); self.layout_len];
                let mut sse = T::zero();
                for &k in chunk {
                    let x = inputs[k];
                    debug_assert_eq!(x.len(), self.input_len());
                    let trace = self.forward_trace(&layout, x);
                    let e = trace.dense.last().expect("validated")[0] - targets[k];
                    sse = sse + e * e;
                    self.backward(&layout, &trace, scale * e, &mut grad);
                }
                (sse, grad)
            })
            .collect();
        let mut total = vec![T::zero(); self.layout_len];
        let mut sse = T::zero();
        for (s, g) in partials {
            sse = sse + s;
            for (t, v) in total.iter_mut().zip(g) {
                *t = *t + v;
            }
        }
        (sse / cast(batch.len() as f64), total)
    }
}

/// Unrolls the stride-2, pad-1 3×3 windows of `x` into rows `ci·9 + ki·3 + kj`.
fn im2col<T: Scalar>(c: &ConvShape, x: &[T]) -> Vec<T> {
    let area = c.n_out * c.n_out;
    let mut cols = vec![T::zero(); c.cin * 9 * area];
    for_each_tap(c, |k, p, src| cols[k * area + p] = x[src]);
    cols
}

/// Adjoint of [`im2col`]: scatters column gradients back onto the input.
fn col2im<T: Scalar>(c: &ConvShape, dcols: &[T]) -> Vec<T> {
    let area = c.n_out * c.n_out;
    let mut dx = vec![T::zero(); c.cin * c.n_in * c.n_in];
    for_each_tap(c, |k, p, src| dx[src] = dx[src] + dcols[k * area + p]);
    dx
}

/// Calls `f(row, position, input index)` for every in-bounds tap.
fn for_each_tap(c: &ConvShape, mut f: impl FnMut(usize, usize, usize)) {
    for ci in 0..c.cin {
        for ki in 0..3 {
            for kj in 0..3 {
                let k = ci * 9 + ki * 3 + kj;
                for i in 0..c.n_out {
                    let y = (2 * i + ki) as isize - 1;
                    if y < 0 || y as usize >= c.n_in {
                        continue;
                    }
                    for j in 0..c.n_out {
                        let xx = (2 * j + kj) as isize - 1;
                        if xx < 0 || xx as usize >= c.n_in {
                            continue;
                        }
                        f(
                            k,
                            i * c.n_out + j,
                            (ci * c.n_in + y as usize) * c.n_in + xx as usize,
                        );
                    }
                }
            }
        }
    }
}

/// Dot product with eight independent accumulators so it vectorizes.
fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    let mut acc = [T::zero(); 8];
    let (ca, cb) = (a.chunks_exact(8), b.chunks_exact(8));
    let tail: T = ca
        .remainder()
        .iter()
        .zip(cb.remainder())
        .map(|(&x, &y)| x * y)
        .sum();
    for (x, y) in ca.zip(cb) {
        for l in 0..8 {
            acc[l] = acc[l] + x[l] * y[l];
        }
    }
    acc.iter().copied().sum::<T>() + tail
}

fn axpy<T: Scalar>(y: &mut [T], a: T, x: &[T]) {
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi = *yi + a * xi;
    }
}

/// Per-epoch training diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Mean squared error of the standardized targets over each epoch's
    /// mini-batches, measured before each update.
    pub loss_trace: Vec<f64>,
    pub n_samples: usize,
}

impl TrainReport {
    pub fn final_loss(&self) -> Option<f64> {
        self.loss_trace.last().copied()
    }
}

/// Affine map from network output to scaled energy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TargetScaling {
    pub offset: f64,
    pub scale: f64,
}

impl TargetScaling {
    pub const IDENTITY: TargetScaling = TargetScaling {
        offset: 0.0,
        scale: 1.0,
    };

    /// Standardizes targets to zero mean and unit deviation.
    pub fn fit(targets: &[f64]) -> Self {
        if targets.is_empty() {
            return Self::IDENTITY;
        }
        let n = targets.len() as f64;
        let mean = targets.iter().sum::<f64>() / n;
        let var = targets.iter().map(|t| (t - mean) * (t - mean)).sum::<f64>() / n;
        TargetScaling {
            offset: mean,
            scale: if var.sqrt() > 1e-6 { var.sqrt() } else { 1.0 },
        }
    }
}

/// A trained `f32` network plus its input and output scaling.
#[derive(Debug, Clone, PartialEq)]
pub struct PatchRegressor {
    net: Network<f32>,
    target: TargetScaling,
}

impl PatchRegressor {
    pub fn from_network(net: Network<f32>) -> Self {
        PatchRegressor {
            net,
            target: TargetScaling::IDENTITY,
        }
    }

    /// Freshly initialized, untrained model.
    pub fn untrained(config: &ModelConfig, seed: u64) -> Result<Self> {
        Ok(PatchRegressor {
            net: Network::init(config, seed)?,
            target: TargetScaling::IDENTITY,
        })
    }

    pub fn network(&self) -> &Network<f32> {
        &self.net
    }

    pub fn network_mut(&mut self) -> &mut Network<f32> {
        &mut self.net
    }

    pub fn config(&self) -> &ModelConfig {
        self.net.config()
    }

    pub fn target_scaling(&self) -> TargetScaling {
        self.target
    }

    pub fn input_n(&self) -> usize {
        self.net.config.input_n
    }

    /// The normalized network input for a patch.
    pub fn encode(&self, patch: &HeightPatch) -> Result<Vec<f32>> {
        if patch.n() != self.input_n() {
            return Err(Error::invalid(format!(
                "model expects {0}x{0} patches, got {1}x{1}",
                self.input_n(),
                patch.n()
            )));
        }
        let inv = 1.0 / self.net.config.height_scale;
        Ok(patch.values().iter().map(|&v| (v * inv) as f32).collect())
    }

    /// Predicted scaled energy for crossing `patch`.
    pub fn predict(&self, patch: &HeightPatch) -> Result<f64> {
        let x = self.encode(patch)?;
        Ok(self.target.offset + self.target.scale * self.net.forward(&x) as f64)
    }

    pub fn predict_many(&self, patches: &[HeightPatch]) -> Result<Vec<f64>> {
        patches.par_iter().map(|p| self.predict(p)).collect()
    }

    /// Writes the binary model and a `<path>.json` sidecar.
    pub fn save(
        &self,
        path: &Path,
        train: Option<&TrainConfig>,
        report: Option<&TrainReport>,
    ) -> Result<()> {
        let cfg = self.config();
        let mut w = BufWriter::new(File::create(path)?);
        w.write_all(MODEL_MAGIC)?;
        w.write_all(&MODEL_VERSION.to_le_bytes())?;
        w.write_all(&(cfg.input_n as u32).to_le_bytes())?;
        w.write_all(&cfg.height_scale.to_le_bytes())?;
        w.write_all(&self.target.offset.to_le_bytes())?;
        w.write_all(&self.target.scale.to_le_bytes())?;
        for widths in [&cfg.conv_channels, &cfg.dense_widths] {
            w.write_all(&(widths.len() as u32).to_le_bytes())?;
            for &c in widths.iter() {
                w.write_all(&(c as u32).to_le_bytes())?;
            }
        }
        w.write_all(&(self.net.params.len() as u64).to_le_bytes())?;
        for p in &self.net.params {
            w.write_all(&p.to_le_bytes())?;
        }
        w.flush()?;

        let sidecar = Sidecar {
            model: cfg.clone(),
            train: train.cloned(),
            metrics: report.cloned(),
            param_count: self.net.params.len(),
            target_scaling: self.target,
        };
        let mut s = BufWriter::new(File::create(sidecar_path(path))?);
        serde_json::to_writer_pretty(&mut s, &sidecar)?;
        s.write_all(b"\n")?;
        s.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut bytes = Vec::new();
        BufReader::new(File::open(path)?).read_to_end(&mut bytes)?;
        let bad = |reason: &str| Error::format(path, reason);
        let mut cur = Cursor {
            bytes: &bytes,
            pos: 0,
        };
        if cur.take(8).ok_or_else(|| bad("truncated header"))? != MODEL_MAGIC {
            return Err(bad("not a model file"));
        }
        let version = cur.u32().ok_or_else(|| bad("truncated header"))?;
        if version != MODEL_VERSION {
            return Err(bad(&format!("unsupported model version {version}")));
        }
        let input_n = cur.u32().ok_or_else(|| bad("truncated header"))? as usize;
        let mut f64s = [0.0; 3];
        for v in &mut f64s {
            *v = f64::from_le_bytes(
                cur.take(8)
                    .ok_or_else(|| bad("truncated header"))?
                    .try_into()
                    .expect("8 bytes"),
            );
        }
        let [height_scale, offset, scale] = f64s;
        if !(offset.is_finite() && scale.is_finite() && scale != 0.0) {
            return Err(bad("invalid target scaling"));
        }
        let mut lists = Vec::new();
        for _ in 0..2 {
            let len = cur.u32().ok_or_else(|| bad("truncated header"))? as usize;
            if len > 64 {
                return Err(bad("implausible layer count"));
            }
            let mut v = Vec::with_capacity(len);
            for _ in 0..len {
                v.push(cur.u32().ok_or_else(|| bad("truncated header"))? as usize);
            }
            lists.push(v);
        }
        let dense_widths = lists.pop().expect("two lists");
        let conv_channels = lists.pop().expect("two lists");
        let config = ModelConfig {
            input_n,
            height_scale,
            conv_channels,
            dense_widths,
        };
        config.validate().map_err(|e| bad(&e.to_string()))?;
        let count = u64::from_le_bytes(
            cur.take(8)
                .ok_or_else(|| bad("truncated header"))?
                .try_into()
                .expect("8 bytes"),
        ) as usize;
        let body = cur
            .take(count * 4)
            .ok_or_else(|| bad("truncated parameters"))?;
        if cur.pos != bytes.len() {
            return Err(bad("trailing bytes after parameters"));
        }
        let params = body
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes(b.try_into().expect("4 bytes")))
            .collect();
        let net = Network::from_params(&config, params).map_err(|e| bad(&e.to_string()))?;
        Ok(PatchRegressor {
            net,
            target: TargetScaling { offset, scale },
        })
    }
}

/// `<path>.json`, e.g. `model.bin.json`.
pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

#[derive(Debug, Serialize, Deserialize)]
struct Sidecar {
    model: ModelConfig,
    train: Option<TrainConfig>,
    metrics: Option<TrainReport>,
    param_count: usize,
    target_scaling: TargetScaling,
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Option<&'a [u8]> {
        let end = self.pos.checked_add(n)?;
        let out = self.bytes.get(self.pos..end)?;
        self.pos = end;
        Some(out)
    }

    fn u32(&mut self) -> Option<u32> {
        self.take(4)
            .map(|b| u32::from_le_bytes(b.try_into().expect("4 bytes")))
    }
}

/// Trains a freshly initialized model. `config.mode` must be `head_only` or
/// `from_scratch`; continuing from an existing model goes through
/// [`fine_tune`].
pub fn train(
    data: &Dataset,
    model: &ModelConfig,
    config: &TrainConfig,
) -> Result<(PatchRegressor, TrainReport)> {
    config.validate()?;
    let freeze_features = match config.mode {
        TrainMode::HeadOnly => true,
        TrainMode::FromScratch => false,
        TrainMode::FineTune => {
            return Err(Error::invalid(
                "fine_tune mode needs an existing model; use fine_tune",
            ))
        }
    };
    let mut reg = PatchRegressor::untrained(model, config.seed)?;
    reg.target = TargetScaling::fit(&data.targets);
    let report = run_sgd(&mut reg, data, config, freeze_features)?;
    Ok((reg, report))
}

/// Continues training `model` on `data` with every layer trainable.
pub fn fine_tune(
    model: &PatchRegressor,
    data: &Dataset,
    config: &TrainConfig,
) -> Result<(PatchRegressor, TrainReport)> {
    config.validate()?;
    let mut reg = model.clone();
    let report = run_sgd(&mut reg, data, config, false)?;
    Ok((reg, report))
}

fn run_sgd(
    reg: &mut PatchRegressor,
    data: &Dataset,
    config: &TrainConfig,
    freeze_features: bool,
) -> Result<TrainReport> {
    if data.is_empty() {
        return Err(Error::invalid("training set is empty"));
    }
    let inputs: Vec<Vec<f32>> = data
        .patches
        .iter()
        .map(|p| reg.encode(p))
        .collect::<Result<_>>()?;
    let refs: Vec<&[f32]> = inputs.iter().map(Vec::as_slice).collect();
    let t = reg.target;
    let targets: Vec<f32> = data
        .targets
        .iter()
        .map(|&y| ((y - t.offset) / t.scale) as f32)
        .collect();

    let first_trainable = if freeze_features {
        reg.net.head_start
    } else {
        0
    };
    let lr = config.learning_rate as f32;
    let mu = config.momentum as f32;
    let mut velocity = vec![0f32; reg.net.params.len()];
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x005E_ED0F_BA7C);
    let mut trace = Vec::with_capacity(config.epochs);

    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut sse = 0.0f64;
        for batch in order.chunks(config.batch_size) {
            let (loss, grad) = reg.net.batch_gradient(&refs, &targets, batch);
            sse += loss as f64 * batch.len() as f64;
            for k in first_trainable..grad.len() {
                velocity[k] = mu * velocity[k] + grad[k];
                reg.net.params[k] -= lr * velocity[k];
            }
        }
        let loss = sse / data.len() as f64;
        if !loss.is_finite() || reg.net.params.iter().any(|p| !p.is_finite()) {
            return Err(Error::Diverged { epoch, loss });
        }
        trace.push(loss);
    }
    Ok(TrainReport {
        loss_trace: trace,
        n_samples: data.len(),
    })
}

/// Shifts predictions so their mean equals `target_mean`.
pub fn mean_shift_calibrate(predictions: &[f64], target_mean: f64) -> Result<Vec<f64>> {
    if predictions.is_empty() {
        return Err(Error::invalid("nothing to calibrate"));
    }
    if !target_mean.is_finite() {
        return Err(Error::invalid("target mean must be finite"));
    }
    let mean = predictions.iter().sum::<f64>() / predictions.len() as f64;
    Ok(predictions.iter().map(|p| p - mean + target_mean).collect())
}
