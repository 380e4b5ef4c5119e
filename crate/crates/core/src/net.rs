//! The segment network.
//!
//! A windowed text encoder turns `x_{1:U}` into embeddings `e_{1:U}`. A
//! sine-activated coordinate network, whose per-layer pre-activations are
//! shifted by a linear map of `e_u`, maps a time index `i` to logits over the
//! joint space `Y ∪ {end}`:
//!
//! ```text
//! h_0     = i
//! h_{k+1} = sin(w0 * (h_k W_k + b_k + shift_k(e_u)))
//! logits  = h_L W_out + b_out
//! ```
//!
//! Every weight matrix is stored `[fan_in, fan_out]` row-major inside one
//! [`ParamVector`]. The canonical view order (also the checkpoint order) is
//!
//! 1. `enc.embed` `[V_x, D]`
//! 2. per mixing layer `l`: `enc.mix{l}.weight` `[(2w+1)·D, D]`, `enc.mix{l}.bias` `[D]`
//! 3. `siren.mod.weight` `[D, L·H]`, `siren.mod.bias` `[L·H]`
//! 4. per sine layer `k`: `siren.layer{k}.weight` `[1 or H, H]`, `siren.layer{k}.bias` `[H]`
//! 5. `head.weight` `[H, |Y|+1]`, `head.bias` `[|Y|+1]`

use std::ops::Range;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::numerics::{cross_entropy_into, fill_uniform, Matrix, ParamVector, SeededRng};
use crate::segment::{PaddedTargetMatrix, TokenSequence, VocabSpec};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelConfig {
    pub input_size: usize,
    pub output_size: usize,
    pub embed_dim: usize,
    pub hidden: usize,
    pub enc_layers: usize,
    pub siren_layers: usize,
    pub window: usize,
    pub w0: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            input_size: 16,
            output_size: 32,
            embed_dim: 64,
            hidden: 64,
            enc_layers: 2,
            siren_layers: 3,
            window: 1,
            w0: 1.0,
        }
    }
}

impl ModelConfig {
    /// Small model used for gradient checks.
    pub fn tiny() -> Self {
        Self {
            embed_dim: 8,
            hidden: 16,
            ..Self::default()
        }
    }

    /// Dimensions of the full-size speech system.
    pub fn full_scale() -> Self {
        Self {
            output_size: 512,
            embed_dim: 384,
            hidden: 256,
            ..Self::default()
        }
    }

    pub fn vocab(&self) -> Result<VocabSpec> {
        VocabSpec::new(self.input_size, self.output_size)
    }

    pub fn validate(&self) -> Result<()> {
        self.vocab()?;
        if self.embed_dim == 0 || self.hidden == 0 || self.siren_layers == 0 {
            return Err(Error::InvalidConfig(
                "embedding dim, hidden width and sine layer count must be positive".into(),
            ));
        }
        if !(self.w0.is_finite() && self.w0 > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "w0 must be positive, got {}",
                self.w0
            )));
        }
        Ok(())
    }

    /// Encoder receptive field radius, `L_enc * w`.
    pub fn receptive_radius(&self) -> usize {
        self.enc_layers * self.window
    }

    fn layout(&self) -> Vec<(String, Vec<usize>)> {
        let d = self.embed_dim;
        let h = self.hidden;
        let mut layout = vec![("enc.embed".to_string(), vec![self.input_size, d])];
        for l in 0..self.enc_layers {
            layout.push((
                format!("enc.mix{l}.weight"),
                vec![(2 * self.window + 1) * d, d],
            ));
            layout.push((format!("enc.mix{l}.bias"), vec![d]));
        }
        layout.push(("siren.mod.weight".into(), vec![d, self.siren_layers * h]));
        layout.push(("siren.mod.bias".into(), vec![self.siren_layers * h]));
        for k in 0..self.siren_layers {
            let fan_in = if k == 0 { 1 } else { h };
            layout.push((format!("siren.layer{k}.weight"), vec![fan_in, h]));
            layout.push((format!("siren.layer{k}.bias"), vec![h]));
        }
        layout.push(("head.weight".into(), vec![h, self.output_size + 1]));
        layout.push(("head.bias".into(), vec![self.output_size + 1]));
        layout
    }
}

/// Resolved ranges into the flat parameter array.
#[derive(Debug, Clone, PartialEq)]
struct Offsets {
    embed: Range<usize>,
    mix_w: Vec<Range<usize>>,
    mix_b: Vec<Range<usize>>,
    mod_w: Range<usize>,
    mod_b: Range<usize>,
    sin_w: Vec<Range<usize>>,
    sin_b: Vec<Range<usize>>,
    head_w: Range<usize>,
    head_b: Range<usize>,
}

impl Offsets {
    fn resolve(config: &ModelConfig, params: &ParamVector) -> Self {
        let r = |name: &str| params.find(name).expect("layout view").range();
        Self {
            embed: r("enc.embed"),
            mix_w: (0..config.enc_layers)
                .map(|l| r(&format!("enc.mix{l}.weight")))
                .collect(),
            mix_b: (0..config.enc_layers)
                .map(|l| r(&format!("enc.mix{l}.bias")))
                .collect(),
            mod_w: r("siren.mod.weight"),
            mod_b: r("siren.mod.bias"),
            sin_w: (0..config.siren_layers)
                .map(|k| r(&format!("siren.layer{k}.weight")))
                .collect(),
            sin_b: (0..config.siren_layers)
                .map(|k| r(&format!("siren.layer{k}.bias")))
                .collect(),
            head_w: r("head.weight"),
            head_b: r("head.bias"),
        }
    }
}

/// Encoder, modulated sine network and output head.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    config: ModelConfig,
    vocab: VocabSpec,
    params: ParamVector,
    offsets: Offsets,
}

/// Per-cell activations kept for the backward pass.
#[derive(Debug, Clone)]
pub(crate) struct CellTrace {
    /// Pre-activations, `L x H`.
    z: Vec<f64>,
    /// Layer outputs `sin(w0 z)`, `L x H`.
    h: Vec<f64>,
    pub(crate) logits: Vec<f64>,
}

impl CellTrace {
    pub(crate) fn new(config: &ModelConfig) -> Self {
        let n = config.siren_layers * config.hidden;
        Self {
            z: vec![0.0; n],
            h: vec![0.0; n],
            logits: vec![0.0; config.output_size + 1],
        }
    }
}

/// `out += scale * row`.
#[inline]
fn axpy(out: &mut [f64], scale: f64, row: &[f64]) {
    for (o, &r) in out.iter_mut().zip(row) {
        *o += scale * r;
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl ModelParams {
    pub fn zeros(config: ModelConfig) -> Result<Self> {
        config.validate()?;
        let params = ParamVector::zeros(config.layout());
        let offsets = Offsets::resolve(&config, &params);
        Ok(Self {
            vocab: config.vocab()?,
            config,
            params,
            offsets,
        })
    }

    /// Encoder, modulation and head weights and biases use `U(±1/√fan_in)`.
    /// Sine layers follow the SIREN scheme: the first layer `U(±1/fan_in)`,
    /// later layers `U(±√(6/fan_in)/w0)`. The modulation bias starts at zero.
    pub fn init(config: ModelConfig, rng: &mut SeededRng) -> Result<Self> {
        let mut model = Self::zeros(config)?;
        let d = config.embed_dim as f64;
        let h = config.hidden as f64;
        let o = model.offsets.clone();
        let v = model.params.values_mut();
        fill_uniform(
            &mut v[o.embed.clone()],
            1.0 / (config.input_size as f64).sqrt(),
            rng,
        );
        let mix_fan_in = ((2 * config.window + 1) * config.embed_dim) as f64;
        for l in 0..config.enc_layers {
            fill_uniform(&mut v[o.mix_w[l].clone()], 1.0 / mix_fan_in.sqrt(), rng);
            fill_uniform(&mut v[o.mix_b[l].clone()], 1.0 / mix_fan_in.sqrt(), rng);
        }
        fill_uniform(&mut v[o.mod_w.clone()], 1.0 / d.sqrt(), rng);
        for k in 0..config.siren_layers {
            let (fan_in, bound) = if k == 0 {
                (1.0, 1.0)
            } else {
                (h, (6.0 / h).sqrt() / config.w0)
            };
            fill_uniform(&mut v[o.sin_w[k].clone()], bound, rng);
            fill_uniform(&mut v[o.sin_b[k].clone()], 1.0 / f64::sqrt(fan_in), rng);
        }
        fill_uniform(&mut v[o.head_w.clone()], 1.0 / h.sqrt(), rng);
        fill_uniform(&mut v[o.head_b.clone()], 1.0 / h.sqrt(), rng);
        Ok(model)
    }

    pub fn from_values(config: ModelConfig, values: Vec<f64>) -> Result<Self> {
        let mut model = Self::zeros(config)?;
        model.params.set_values(values)?;
        Ok(model)
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn vocab(&self) -> &VocabSpec {
        &self.vocab
    }

    pub fn params(&self) -> &ParamVector {
        &self.params
    }

    pub fn values(&self) -> &[f64] {
        self.params.values()
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        self.params.values_mut()
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    fn slice(&self, r: &Range<usize>) -> &[f64] {
        &self.params.values()[r.clone()]
    }

    /// Encoder activations for every layer; the last entry is `e_{1:U}`.
    fn encode_layers(&self, x: &TokenSequence) -> Result<Vec<Matrix>> {
        x.validate(&self.vocab)?;
        let d = self.config.embed_dim;
        let w = self.config.window;
        let u_len = x.len();
        let embed = self.slice(&self.offsets.embed);
        let mut h0 = Matrix::zeros(u_len, d);
        for (u, &tok) in x.tokens().iter().enumerate() {
            h0.row_mut(u)
                .copy_from_slice(&embed[tok * d..(tok + 1) * d]);
        }
        let mut layers = vec![h0];
        for l in 0..self.config.enc_layers {
            let weight = self.slice(&self.offsets.mix_w[l]);
            let bias = self.slice(&self.offsets.mix_b[l]);
            let prev = layers.last().unwrap();
            let mut next = Matrix::zeros(u_len, d);
            for u in 0..u_len {
                let out = next.row_mut(u);
                out.copy_from_slice(bias);
                for slot in 0..2 * w + 1 {
                    // positions outside the sequence contribute a zero vector
                    let Some(v) = (u + slot).checked_sub(w).filter(|&v| v < u_len) else {
                        continue;
                    };
                    let src = prev.row(v);
                    let block = &weight[slot * d * d..(slot + 1) * d * d];
                    for (m, &s) in src.iter().enumerate() {
                        axpy(out, s, &block[m * d..(m + 1) * d]);
                    }
                }
                for o in out.iter_mut() {
                    *o = o.tanh();
                }
            }
            layers.push(next);
        }
        Ok(layers)
    }

    /// Text embeddings `e_{1:U}` as a `U x D` matrix.
    pub fn encode(&self, x: &TokenSequence) -> Result<Matrix> {
        Ok(self.encode_layers(x)?.pop().unwrap())
    }

    /// Per-layer additive shifts for one embedding, `L x H` flattened.
    pub fn shifts(&self, e_u: &[f64]) -> Result<Vec<f64>> {
        if e_u.len() != self.config.embed_dim {
            return Err(Error::DimensionMismatch(format!(
                "embedding has {} entries, expected {}",
                e_u.len(),
                self.config.embed_dim
            )));
        }
        let n = self.config.siren_layers * self.config.hidden;
        let mut out = self.slice(&self.offsets.mod_b).to_vec();
        let weight = self.slice(&self.offsets.mod_w);
        for (m, &e) in e_u.iter().enumerate() {
            axpy(&mut out, e, &weight[m * n..(m + 1) * n]);
        }
        Ok(out)
    }

    /// Forward pass of one cell given precomputed shifts. This is the only
    /// code path that evaluates the sine network.
    pub(crate) fn cell_forward(&self, i: f64, shift: &[f64], trace: &mut CellTrace) {
        let hdim = self.config.hidden;
        let w0 = self.config.w0;
        let values = self.params.values();
        for k in 0..self.config.siren_layers {
            let weight = &values[self.offsets.sin_w[k].clone()];
            let bias = &values[self.offsets.sin_b[k].clone()];
            let (done, rest) = trace.h.split_at_mut(k * hdim);
            let z = &mut trace.z[k * hdim..(k + 1) * hdim];
            for ((zj, &b), &s) in z.iter_mut().zip(bias).zip(&shift[k * hdim..(k + 1) * hdim]) {
                *zj = b + s;
            }
            if k == 0 {
                axpy(z, i, weight);
            } else {
                let input = &done[(k - 1) * hdim..];
                for (m, &hm) in input.iter().enumerate() {
                    axpy(z, hm, &weight[m * hdim..(m + 1) * hdim]);
                }
            }
            for (hj, &zj) in rest[..hdim].iter_mut().zip(z.iter()) {
                *hj = (w0 * zj).sin();
            }
        }
        let classes = self.config.output_size + 1;
        let last = &trace.h[(self.config.siren_layers - 1) * hdim..];
        let head_w = &values[self.offsets.head_w.clone()];
        trace
            .logits
            .copy_from_slice(&values[self.offsets.head_b.clone()]);
        for (m, &hm) in last.iter().enumerate() {
            axpy(
                &mut trace.logits,
                hm,
                &head_w[m * classes..(m + 1) * classes],
            );
        }
    }

    /// Joint-space logits for time index `i` of the segment conditioned on
    /// `e_u`. Any real `i` is accepted.
    pub fn siren_forward(&self, i: f64, e_u: &[f64]) -> Result<Vec<f64>> {
        let shift = self.shifts(e_u)?;
        let mut trace = CellTrace::new(&self.config);
        self.cell_forward(i, &shift, &mut trace);
        Ok(trace.logits)
    }

    /// Logits for every `(u, i)` cell: entry `(u, i)` evaluates time index
    /// `times[u][i]` against embedding row `u`.
    pub fn forward_batch(&self, times: &Matrix, e: &Matrix) -> Result<LogitGrid> {
        if times.rows() != e.rows() {
            return Err(Error::DimensionMismatch(format!(
                "{} time-index rows for {} embeddings",
                times.rows(),
                e.rows()
            )));
        }
        let classes = self.config.output_size + 1;
        let mut data = Vec::with_capacity(times.rows() * times.cols() * classes);
        let mut trace = CellTrace::new(&self.config);
        for u in 0..times.rows() {
            let shift = self.shifts(e.row(u))?;
            for &i in times.row(u) {
                self.cell_forward(i, &shift, &mut trace);
                data.extend_from_slice(&trace.logits);
            }
        }
        Ok(LogitGrid {
            rows: times.rows(),
            cols: times.cols(),
            classes,
            data,
        })
    }

    /// Mean cross-entropy over every cell of `targets`, with its gradient.
    pub fn backward(
        &self,
        x: &TokenSequence,
        targets: &PaddedTargetMatrix,
    ) -> Result<(f64, Vec<f64>)> {
        self.backward_masked(x, targets, None)
    }

    /// Like [`backward`](Self::backward) but cells whose mask entry is
    /// `false` are left out of both the loss and the mean.
    pub fn backward_masked(
        &self,
        x: &TokenSequence,
        targets: &PaddedTargetMatrix,
        mask: Option<&[bool]>,
    ) -> Result<(f64, Vec<f64>)> {
        self.batch_backward(&[BatchItem {
            tokens: x,
            targets,
            mask,
        }])
    }

    /// Mean cross-entropy over all counted cells of all items. Items are
    /// processed independently and their gradients summed in input order.
    pub fn batch_backward(&self, items: &[BatchItem<'_>]) -> Result<(f64, Vec<f64>)> {
        let parts = items
            .par_iter()
            .map(|item| {
                let mut grad = vec![0.0; self.num_params()];
                let (sum, count) =
                    self.accumulate(item.tokens, item.targets, item.mask, &mut grad)?;
                Ok((grad, sum, count))
            })
            .collect::<Result<Vec<_>>>()?;
        let mut grad = vec![0.0; self.num_params()];
        let mut loss_sum = 0.0;
        let mut cells = 0usize;
        for (g, sum, count) in &parts {
            for (a, b) in grad.iter_mut().zip(g) {
                *a += b;
            }
            loss_sum += sum;
            cells += count;
        }
        let scale = 1.0 / cells.max(1) as f64;
        for g in &mut grad {
            *g *= scale;
        }
        Ok((loss_sum * scale, grad))
    }

    /// Adds the summed (unnormalised) cross-entropy gradient of one example
    /// into `grad`. Returns the summed loss and the number of counted cells.
    fn accumulate(
        &self,
        x: &TokenSequence,
        targets: &PaddedTargetMatrix,
        mask: Option<&[bool]>,
        grad: &mut [f64],
    ) -> Result<(f64, usize)> {
        let cfg = &self.config;
        let (d, hdim, layers) = (cfg.embed_dim, cfg.hidden, cfg.siren_layers);
        let classes = cfg.output_size + 1;
        let u_len = x.len();
        let i_pad = targets.i_pad();
        if targets.rows() != u_len {
            return Err(Error::DimensionMismatch(format!(
                "{} target rows for {u_len} tokens",
                targets.rows()
            )));
        }
        if grad.len() != self.num_params() {
            return Err(Error::LengthMismatch {
                expected: self.num_params(),
                actual: grad.len(),
            });
        }
        if let Some(m) = mask {
            if m.len() != u_len * i_pad {
                return Err(Error::LengthMismatch {
                    expected: u_len * i_pad,
                    actual: m.len(),
                });
            }
        }
        if let Some(&class) = targets.cells().iter().find(|&&c| c >= classes) {
            return Err(Error::BadClass { class, classes });
        }

        let enc = self.encode_layers(x)?;
        let e = enc.last().unwrap();
        let values = self.params.values();
        let o = &self.offsets;
        let w0 = cfg.w0;

        let mut trace = CellTrace::new(cfg);
        let mut dlogits = vec![0.0; classes];
        let mut dh = vec![0.0; hdim];
        let mut dz = vec![0.0; hdim];
        let mut dshift = vec![0.0; layers * hdim];
        let mut de = Matrix::zeros(u_len, d);
        let mut loss_sum = 0.0;
        let mut count = 0usize;

        for u in 0..u_len {
            let shift = self.shifts(e.row(u))?;
            dshift.iter_mut().for_each(|g| *g = 0.0);
            let mut any = false;
            for i in 0..i_pad {
                if mask.is_some_and(|m| !m[u * i_pad + i]) {
                    continue;
                }
                any = true;
                count += 1;
                let t = i as f64;
                self.cell_forward(t, &shift, &mut trace);
                loss_sum += cross_entropy_into(&trace.logits, targets.get(u, i), &mut dlogits);

                // output head
                let last = &trace.h[(layers - 1) * hdim..];
                {
                    let gw = &mut grad[o.head_w.clone()];
                    for (m, &hm) in last.iter().enumerate() {
                        axpy(&mut gw[m * classes..(m + 1) * classes], hm, &dlogits);
                    }
                }
                axpy(&mut grad[o.head_b.clone()], 1.0, &dlogits);
                let head_w = &values[o.head_w.clone()];
                for (m, g) in dh.iter_mut().enumerate() {
                    *g = dot(&head_w[m * classes..(m + 1) * classes], &dlogits);
                }

                for k in (0..layers).rev() {
                    let z = &trace.z[k * hdim..(k + 1) * hdim];
                    for ((dzj, &dhj), &zj) in dz.iter_mut().zip(&dh).zip(z) {
                        *dzj = dhj * w0 * (w0 * zj).cos();
                    }
                    axpy(&mut grad[o.sin_b[k].clone()], 1.0, &dz);
                    axpy(&mut dshift[k * hdim..(k + 1) * hdim], 1.0, &dz);
                    let gw = &mut grad[o.sin_w[k].clone()];
                    if k == 0 {
                        axpy(gw, t, &dz);
                    } else {
                        let input = &trace.h[(k - 1) * hdim..k * hdim];
                        for (m, &hm) in input.iter().enumerate() {
                            axpy(&mut gw[m * hdim..(m + 1) * hdim], hm, &dz);
                        }
                        let weight = &values[o.sin_w[k].clone()];
                        for (m, g) in dh.iter_mut().enumerate() {
                            *g = dot(&weight[m * hdim..(m + 1) * hdim], &dz);
                        }
                    }
                }
            }
            if !any {
                continue;
            }
            // modulation map
            let n = layers * hdim;
            let mod_w = &values[o.mod_w.clone()];
            let gw = &mut grad[o.mod_w.clone()];
            for (m, &em) in e.row(u).iter().enumerate() {
                axpy(&mut gw[m * n..(m + 1) * n], em, &dshift);
            }
            axpy(&mut grad[o.mod_b.clone()], 1.0, &dshift);
            for (m, g) in de.row_mut(u).iter_mut().enumerate() {
                *g = dot(&mod_w[m * n..(m + 1) * n], &dshift);
            }
        }

        self.encoder_backward(x, &enc, de, grad);
        Ok((loss_sum, count))
    }

    fn encoder_backward(
        &self,
        x: &TokenSequence,
        enc: &[Matrix],
        mut dout: Matrix,
        grad: &mut [f64],
    ) {
        let d = self.config.embed_dim;
        let w = self.config.window;
        let u_len = x.len();
        let values = self.params.values();
        let mut dz = vec![0.0; d];
        for l in (0..self.config.enc_layers).rev() {
            let out = &enc[l + 1];
            let input = &enc[l];
            let weight = &values[self.offsets.mix_w[l].clone()];
            let mut din = Matrix::zeros(u_len, d);
            for u in 0..u_len {
                for ((g, &dy), &y) in dz.iter_mut().zip(dout.row(u)).zip(out.row(u)) {
                    *g = dy * (1.0 - y * y);
                }
                axpy(&mut grad[self.offsets.mix_b[l].clone()], 1.0, &dz);
                for slot in 0..2 * w + 1 {
                    let Some(v) = (u + slot).checked_sub(w).filter(|&v| v < u_len) else {
                        continue;
                    };
                    let block = &weight[slot * d * d..(slot + 1) * d * d];
                    let gw =
                        &mut grad[self.offsets.mix_w[l].clone()][slot * d * d..(slot + 1) * d * d];
                    for (m, &s) in input.row(v).iter().enumerate() {
                        axpy(&mut gw[m * d..(m + 1) * d], s, &dz);
                    }
                    for (m, g) in din.row_mut(v).iter_mut().enumerate() {
                        *g += dot(&block[m * d..(m + 1) * d], &dz);
                    }
                }
            }
            dout = din;
        }
        let gembed = &mut grad[self.offsets.embed.clone()];
        for (u, &tok) in x.tokens().iter().enumerate() {
            axpy(&mut gembed[tok * d..(tok + 1) * d], 1.0, dout.row(u));
        }
    }
}

/// One example of a training batch.
#[derive(Debug, Clone, Copy)]
pub struct BatchItem<'a> {
    pub tokens: &'a TokenSequence,
    pub targets: &'a PaddedTargetMatrix,
    /// Cells marked `false` are excluded from the loss.
    pub mask: Option<&'a [bool]>,
}

/// Logits for a `rows x cols` grid of cells.
#[derive(Debug, Clone, PartialEq)]
pub struct LogitGrid {
    rows: usize,
    cols: usize,
    classes: usize,
    data: Vec<f64>,
}

impl LogitGrid {
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn cell(&self, u: usize, i: usize) -> &[f64] {
        let start = (u * self.cols + i) * self.classes;
        &self.data[start..start + self.classes]
    }
}

/// Finite-difference check of [`ModelParams::backward`] on a tiny model
/// (D=8, H=16) with a random 3-token input and random targets at
/// `i_pad = 4`. Returns the largest relative error over `samples`
/// coordinates.
pub fn tiny_gradient_check(seed: u64, samples: usize, h: f64) -> Result<f64> {
    use crate::segment::{build_padded_targets, Segment, SegmentedTarget};
    use rand::Rng;

    let config = ModelConfig::tiny();
    let mut rng = crate::numerics::rng_from_seed(seed);
    let model = ModelParams::init(config, &mut rng)?;
    let vocab = *model.vocab();
    let i_pad = 4;
    let tokens: Vec<usize> = (0..3)
        .map(|_| rng.gen_range(0..vocab.input_size()))
        .collect();
    let x = TokenSequence::new(tokens, &vocab)?;
    let segments = (0..3)
        .map(|_| {
            let d = rng.gen_range(0..i_pad);
            Segment(
                (0..d)
                    .map(|_| rng.gen_range(0..vocab.output_size()))
                    .collect(),
            )
        })
        .collect();
    let targets = build_padded_targets(&SegmentedTarget::new(segments), i_pad, &vocab)?;
    let loss = |p: &[f64]| {
        let m = ModelParams::from_values(config, p.to_vec()).expect("same layout");
        m.backward(&x, &targets).expect("valid example")
    };
    Ok(crate::numerics::grad_check(
        loss,
        model.values(),
        h,
        samples,
        seed,
    ))
}
