//! Padded batch construction, the training loop and checkpoint files.
//!
//! Each example is expanded to a `U x i_pad` grid: every embedding `e_u` is
//! paired with time indices `0..i_pad` and the target grid is the padded
//! segment matrix. With padding disabled, cells past the first end class are
//! masked out of the loss instead of being supervised to the end class.
//!
//! Checkpoint layout (all little-endian):
//!
//! ```text
//! "SGNR"  u32 version=1
//! u32 V_x, |Y|, D, H, L_enc, L_siren, w, flags   (flags bit 0: Adam state present)
//! f64 w0
//! f64 x P   parameters in canonical view order (see `net`)
//! [f64 x P  Adam m] [f64 x P  Adam v] [u64 t]
//! ```

use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;

use crate::data::Example;
use crate::error::{Error, Result};
use crate::net::{BatchItem, ModelConfig, ModelParams};
use crate::numerics::{adam_step, rng_from_seed, AdamConfig, AdamState, Matrix};
use crate::segment::{build_padded_targets, PaddedTargetMatrix, SegmentedTarget, VocabSpec};

pub const CHECKPOINT_MAGIC: [u8; 4] = *b"SGNR";
pub const CHECKPOINT_VERSION: u32 = 1;
const FLAG_ADAM: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub i_pad: usize,
    pub lr: f64,
    pub steps: usize,
    pub batch_size: usize,
    pub seed: u64,
    /// Supervise every cell past the segment with the end class. When
    /// false only the cell at index `d_u` carries the end class.
    pub padded: bool,
    /// Save a checkpoint to this path every `checkpoint_interval` steps.
    pub checkpoint_path: Option<PathBuf>,
    pub checkpoint_interval: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            i_pad: 20,
            lr: 1e-3,
            steps: 30_000,
            batch_size: 8,
            seed: 0,
            padded: true,
            checkpoint_path: None,
            checkpoint_interval: 0,
        }
    }
}

/// Time indices and padded targets for one example.
pub fn make_training_batch(
    example: &Example,
    i_pad: usize,
    vocab: &VocabSpec,
) -> Result<(Matrix, PaddedTargetMatrix)> {
    let targets = build_padded_targets(&example.target, i_pad, vocab)?;
    let u_len = example.tokens.len();
    let row: Vec<f64> = (0..i_pad).map(|i| i as f64).collect();
    let times = Matrix::from_rows(&vec![row; u_len])?;
    Ok((times, targets))
}

/// Loss mask for unpadded training: cell `(u, i)` counts iff `i <= d_u`.
pub fn unpadded_mask(target: &SegmentedTarget, i_pad: usize) -> Vec<bool> {
    target
        .segments()
        .iter()
        .flat_map(|s| (0..i_pad).map(move |i| i <= s.duration()))
        .collect()
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: ModelParams,
    pub adam: AdamState,
    /// Mean loss of every step, in order.
    pub losses: Vec<f64>,
}

struct Prepared {
    example: Example,
    targets: PaddedTargetMatrix,
    mask: Option<Vec<bool>>,
}

/// Runs `cfg.steps` Adam steps over mini-batches drawn from reshuffled
/// passes through `dataset`. `on_step` sees the step index and its loss.
pub fn train(
    dataset: &[Example],
    model: ModelParams,
    cfg: &TrainConfig,
    mut on_step: impl FnMut(usize, f64),
) -> Result<TrainOutcome> {
    if dataset.is_empty() {
        return Err(Error::InvalidConfig("empty training set".into()));
    }
    if cfg.batch_size == 0 {
        return Err(Error::InvalidConfig("batch size must be at least 1".into()));
    }
    let vocab = *model.vocab();
    let prepared = dataset
        .iter()
        .map(|ex| {
            ex.tokens.validate(&vocab)?;
            ex.target.validate(&vocab)?;
            let targets = build_padded_targets(&ex.target, cfg.i_pad, &vocab)?;
            let mask = (!cfg.padded).then(|| unpadded_mask(&ex.target, cfg.i_pad));
            Ok(Prepared {
                example: ex.clone(),
                targets,
                mask,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut model = model;
    let mut adam = AdamState::new(
        model.num_params(),
        AdamConfig {
            lr: cfg.lr,
            ..AdamConfig::default()
        },
    );
    // distinct stream from the one used for parameter initialisation
    let mut rng = rng_from_seed(cfg.seed ^ 0x9e37_79b9_7f4a_7c15);
    let mut order: Vec<usize> = (0..prepared.len()).collect();
    let mut cursor = order.len();
    let mut losses = Vec::with_capacity(cfg.steps);

    for step in 0..cfg.steps {
        let batch: Vec<usize> = (0..cfg.batch_size)
            .map(|_| {
                if cursor == order.len() {
                    order.shuffle(&mut rng);
                    cursor = 0;
                }
                cursor += 1;
                order[cursor - 1]
            })
            .collect();

        let items: Vec<BatchItem<'_>> = batch
            .iter()
            .map(|&k| {
                let p = &prepared[k];
                BatchItem {
                    tokens: &p.example.tokens,
                    targets: &p.targets,
                    mask: p.mask.as_deref(),
                }
            })
            .collect();
        let (loss, grad) = model.batch_backward(&items)?;
        if !loss.is_finite() {
            return Err(Error::NonFiniteLoss { step });
        }
        adam_step(model.values_mut(), &grad, &mut adam)?;
        losses.push(loss);
        on_step(step, loss);

        if let Some(path) = &cfg.checkpoint_path {
            if cfg.checkpoint_interval > 0 && (step + 1) % cfg.checkpoint_interval == 0 {
                save_checkpoint(&model, Some(&adam), path)?;
            }
        }
    }
    Ok(TrainOutcome {
        model,
        adam,
        losses,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub model: ModelParams,
    /// Restored moments and step count; hyperparameters are not stored and
    /// come back as [`AdamConfig::default`].
    pub adam: Option<AdamState>,
}

pub fn checkpoint_bytes(model: &ModelParams, adam: Option<&AdamState>) -> Vec<u8> {
    let c = model.config();
    let n = model.num_params();
    let mut out = Vec::with_capacity(48 + 8 * n * if adam.is_some() { 3 } else { 1 });
    out.extend_from_slice(&CHECKPOINT_MAGIC);
    out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    let flags = if adam.is_some() { FLAG_ADAM } else { 0 };
    for field in [
        c.input_size,
        c.output_size,
        c.embed_dim,
        c.hidden,
        c.enc_layers,
        c.siren_layers,
        c.window,
    ] {
        out.extend_from_slice(&(field as u32).to_le_bytes());
    }
    out.extend_from_slice(&flags.to_le_bytes());
    out.extend_from_slice(&c.w0.to_le_bytes());
    for v in model.values() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    if let Some(a) = adam {
        for v in a.m.iter().chain(&a.v) {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out.extend_from_slice(&a.t.to_le_bytes());
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take<const N: usize>(&mut self) -> Result<[u8; N]> {
        let end = self.pos + N;
        if end > self.bytes.len() {
            return Err(Error::TruncatedFile {
                offset: self.pos,
                needed: end - self.bytes.len(),
            });
        }
        let mut buf = [0u8; N];
        buf.copy_from_slice(&self.bytes[self.pos..end]);
        self.pos = end;
        Ok(buf)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take()?))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take()?))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take()?))
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let needed = n.saturating_mul(8);
        if self.bytes.len() - self.pos < needed {
            return Err(Error::TruncatedFile {
                offset: self.pos,
                needed: needed - (self.bytes.len() - self.pos),
            });
        }
        (0..n).map(|_| self.f64()).collect()
    }
}

pub fn parse_checkpoint(bytes: &[u8]) -> Result<Checkpoint> {
    let mut r = Reader { bytes, pos: 0 };
    let magic: [u8; 4] = r.take()?;
    if magic != CHECKPOINT_MAGIC {
        return Err(Error::BadMagic(magic));
    }
    let version = r.u32()?;
    if version != CHECKPOINT_VERSION {
        return Err(Error::BadVersion(version));
    }
    let mut dims = [0usize; 7];
    for d in &mut dims {
        *d = r.u32()? as usize;
    }
    let flags = r.u32()?;
    let w0 = r.f64()?;
    let config = ModelConfig {
        input_size: dims[0],
        output_size: dims[1],
        embed_dim: dims[2],
        hidden: dims[3],
        enc_layers: dims[4],
        siren_layers: dims[5],
        window: dims[6],
        w0,
    };
    config.validate()?;
    let mut model = ModelParams::zeros(config)?;
    let n = model.num_params();
    model.values_mut().copy_from_slice(&r.f64s(n)?);
    let adam = if flags & FLAG_ADAM != 0 {
        let m = r.f64s(n)?;
        let v = r.f64s(n)?;
        let t = r.u64()?;
        Some(AdamState {
            m,
            v,
            t,
            config: AdamConfig::default(),
        })
    } else {
        None
    };
    if r.pos != bytes.len() {
        return Err(Error::TrailingBytes(bytes.len() - r.pos));
    }
    Ok(Checkpoint { model, adam })
}

pub fn save_checkpoint(model: &ModelParams, adam: Option<&AdamState>, path: &Path) -> Result<()> {
    std::fs::write(path, checkpoint_bytes(model, adam)).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_checkpoint(&bytes)
}
