//! Streaming and parallel decoding.
//!
//! Streaming decode walks `i = 0, 1, ...` for each segment until the stop
//! rule yields the end class or `i_max` frames have been emitted. Parallel
//! decode evaluates the full `U x i_max` grid and truncates each row at its
//! first end class. Both share the same cell evaluation and stop rule, so
//! they agree exactly.

use std::fmt::Write as _;
use std::str::FromStr;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::net::{CellTrace, ModelParams};
use crate::numerics::{format_float, softmax_into};
use crate::segment::TokenSequence;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DecodeMode {
    Streaming,
    Parallel,
}

impl FromStr for DecodeMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "streaming" => Ok(Self::Streaming),
            "parallel" => Ok(Self::Parallel),
            other => Err(Error::InvalidConfig(format!(
                "unknown decode mode {other:?}"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StopRule {
    /// End iff `P(end) >= tau`, otherwise the most probable output token.
    Threshold(f64),
    /// Most probable class over the whole joint space.
    Argmax,
}

impl StopRule {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Threshold(_) => "threshold",
            Self::Argmax => "argmax",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecodeConfig {
    pub mode: DecodeMode,
    pub rule: StopRule,
    pub i_max: usize,
}

impl Default for DecodeConfig {
    fn default() -> Self {
        Self {
            mode: DecodeMode::Parallel,
            rule: StopRule::Threshold(0.5),
            i_max: 20,
        }
    }
}

impl DecodeConfig {
    /// Thresholds above 1 are allowed; they never fire.
    pub fn validate(&self) -> Result<()> {
        if self.i_max == 0 {
            return Err(Error::InvalidConfig("i_max must be at least 1".into()));
        }
        if let StopRule::Threshold(tau) = self.rule {
            if !(tau >= 0.0 && tau.is_finite()) {
                return Err(Error::InvalidConfig(format!(
                    "threshold must be >= 0, got {tau}"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Step {
    Token(usize),
    End,
}

fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (k, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = k;
        }
    }
    best
}

/// Applies the stop rule to a joint distribution whose last entry is the end
/// class. Ties go to the lowest class id.
pub fn step_rule(dist: &[f64], rule: StopRule) -> Result<Step> {
    let sum: f64 = dist.iter().sum();
    let normalized = (sum - 1.0).abs() <= 1e-6;
    let non_negative = dist.iter().all(|p| *p >= 0.0);
    if dist.len() < 2 || !normalized || !non_negative {
        return Err(Error::BadDistribution { sum });
    }
    let end = dist.len() - 1;
    Ok(match rule {
        StopRule::Threshold(tau) => {
            if dist[end] >= tau {
                Step::End
            } else {
                Step::Token(argmax(&dist[..end]))
            }
        }
        StopRule::Argmax => match argmax(dist) {
            k if k == end => Step::End,
            k => Step::Token(k),
        },
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DecodeResult {
    pub output: Vec<usize>,
    pub durations: Vec<usize>,
    /// Segments that hit `i_max` without the end class firing.
    pub truncated: Vec<bool>,
    /// Evaluated cells past each segment's end; always 0 when streaming.
    pub wasted: usize,
}

/// Evaluates one cell and returns its joint distribution.
struct CellEval<'a> {
    model: &'a ModelParams,
    trace: CellTrace,
    probs: Vec<f64>,
}

impl<'a> CellEval<'a> {
    fn new(model: &'a ModelParams) -> Self {
        Self {
            model,
            trace: CellTrace::new(model.config()),
            probs: vec![0.0; model.vocab().joint_size()],
        }
    }

    fn dist(&mut self, i: usize, shift: &[f64]) -> &[f64] {
        self.model.cell_forward(i as f64, shift, &mut self.trace);
        softmax_into(&self.trace.logits, &mut self.probs);
        &self.probs
    }
}

fn segment_shifts(model: &ModelParams, x: &TokenSequence) -> Result<Vec<Vec<f64>>> {
    let e = model.encode(x)?;
    (0..e.rows()).map(|u| model.shifts(e.row(u))).collect()
}

pub fn decode(x: &TokenSequence, model: &ModelParams, cfg: &DecodeConfig) -> Result<DecodeResult> {
    match cfg.mode {
        DecodeMode::Streaming => streaming_decode(x, model, cfg),
        DecodeMode::Parallel => parallel_decode(x, model, cfg),
    }
}

pub fn streaming_decode(
    x: &TokenSequence,
    model: &ModelParams,
    cfg: &DecodeConfig,
) -> Result<DecodeResult> {
    cfg.validate()?;
    let shifts = segment_shifts(model, x)?;
    let mut eval = CellEval::new(model);
    let mut result = DecodeResult {
        output: Vec::new(),
        durations: Vec::with_capacity(x.len()),
        truncated: Vec::with_capacity(x.len()),
        wasted: 0,
    };
    for shift in &shifts {
        let mut d = 0;
        let mut ended = false;
        while d < cfg.i_max {
            match step_rule(eval.dist(d, shift), cfg.rule)? {
                Step::End => {
                    ended = true;
                    break;
                }
                Step::Token(y) => {
                    result.output.push(y);
                    d += 1;
                }
            }
        }
        result.durations.push(d);
        result.truncated.push(!ended);
    }
    Ok(result)
}

pub fn parallel_decode(
    x: &TokenSequence,
    model: &ModelParams,
    cfg: &DecodeConfig,
) -> Result<DecodeResult> {
    cfg.validate()?;
    let shifts = segment_shifts(model, x)?;
    let rows: Vec<Vec<Step>> = shifts
        .par_iter()
        .map(|shift| {
            let mut eval = CellEval::new(model);
            (0..cfg.i_max)
                .map(|i| step_rule(eval.dist(i, shift), cfg.rule))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;

    let mut result = DecodeResult {
        output: Vec::new(),
        durations: Vec::with_capacity(rows.len()),
        truncated: Vec::with_capacity(rows.len()),
        wasted: 0,
    };
    for row in rows {
        let end = row.iter().position(|s| *s == Step::End);
        let d = end.unwrap_or(cfg.i_max);
        result.output.extend(row[..d].iter().map(|s| match s {
            Step::Token(y) => *y,
            Step::End => unreachable!(),
        }));
        result.durations.push(d);
        result.truncated.push(end.is_none());
        result.wasted += cfg.i_max - d;
    }
    Ok(result)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbeRecord {
    pub u: usize,
    pub i: usize,
    pub p_end: f64,
    pub argmax_y: usize,
    pub p_y: f64,
}

/// End-class probability and the best output token for each `i < i_pad` of
/// segment `u`.
pub fn probe_segment(
    u: usize,
    x: &TokenSequence,
    model: &ModelParams,
    i_pad: usize,
) -> Result<Vec<ProbeRecord>> {
    if u >= x.len() {
        return Err(Error::InvalidConfig(format!(
            "segment {u} out of range for {} tokens",
            x.len()
        )));
    }
    let e = model.encode(x)?;
    let shift = model.shifts(e.row(u))?;
    let mut eval = CellEval::new(model);
    let end = model.vocab().end_id();
    Ok((0..i_pad)
        .map(|i| {
            let p = eval.dist(i, &shift);
            let argmax_y = argmax(&p[..end]);
            ProbeRecord {
                u,
                i,
                p_end: p[end],
                argmax_y,
                p_y: p[argmax_y],
            }
        })
        .collect())
}

pub const PROBE_CSV_HEADER: &str = "u,i,p_null,argmax_y,p_y";

pub fn probe_csv(records: &[ProbeRecord]) -> String {
    let mut out = String::from(PROBE_CSV_HEADER);
    out.push('\n');
    for r in records {
        writeln!(
            out,
            "{},{},{},{},{}",
            r.u,
            r.i,
            format_float(r.p_end),
            r.argmax_y,
            format_float(r.p_y)
        )
        .unwrap();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::ModelConfig;
    use crate::segment::VocabSpec;

    #[test]
    fn threshold_rule() {
        let mut d = vec![0.1, 0.3, 0.6];
        assert_eq!(step_rule(&d, StopRule::Threshold(0.5)).unwrap(), Step::End);
        d = vec![0.2, 0.5, 0.3];
        assert_eq!(
            step_rule(&d, StopRule::Threshold(0.5)).unwrap(),
            Step::Token(1)
        );
        // inclusive comparison
        d = vec![0.25, 0.25, 0.5];
        assert_eq!(step_rule(&d, StopRule::Threshold(0.5)).unwrap(), Step::End);
        d = vec![0.5, 0.5, 0.0];
        assert_eq!(step_rule(&d, StopRule::Threshold(0.0)).unwrap(), Step::End);
        assert_eq!(
            step_rule(&d, StopRule::Threshold(1.1)).unwrap(),
            Step::Token(0)
        );
    }

    #[test]
    fn argmax_rule_ties_to_lowest() {
        let u = vec![0.25; 4];
        assert_eq!(step_rule(&u, StopRule::Argmax).unwrap(), Step::Token(0));
        let d = vec![0.3, 0.3, 0.4];
        assert_eq!(step_rule(&d, StopRule::Argmax).unwrap(), Step::End);
        let d = vec![0.1, 0.45, 0.45];
        assert_eq!(step_rule(&d, StopRule::Argmax).unwrap(), Step::Token(1));
    }

    #[test]
    fn bad_distribution() {
        assert!(matches!(
            step_rule(&[0.5, 0.6], StopRule::Argmax),
            Err(Error::BadDistribution { .. })
        ));
        assert!(step_rule(&[f64::NAN, 1.0], StopRule::Argmax).is_err());
        assert!(step_rule(&[1.2, -0.2], StopRule::Argmax).is_err());
    }

    fn end_model(config: ModelConfig) -> ModelParams {
        // zero network with a large end-class bias
        let mut m = ModelParams::zeros(config).unwrap();
        let end = m.vocab().end_id();
        let r = m.params().find("head.bias").unwrap().range();
        m.values_mut()[r.start + end] = 50.0;
        m
    }

    #[test]
    fn all_end_model_decodes_empty() {
        let m = end_model(ModelConfig::tiny());
        let x = TokenSequence::new(vec![1, 2, 3], m.vocab()).unwrap();
        for mode in [DecodeMode::Streaming, DecodeMode::Parallel] {
            let cfg = DecodeConfig {
                mode,
                ..DecodeConfig::default()
            };
            let r = decode(&x, &m, &cfg).unwrap();
            assert!(r.output.is_empty());
            assert_eq!(r.durations, vec![0, 0, 0]);
            assert_eq!(r.truncated, vec![false; 3]);
            let expected_waste = if mode == DecodeMode::Parallel {
                3 * 20
            } else {
                0
            };
            assert_eq!(r.wasted, expected_waste);
        }
    }

    #[test]
    fn threshold_above_one_never_stops() {
        let m = ModelParams::zeros(ModelConfig::tiny()).unwrap();
        let x = TokenSequence::new(vec![4, 0], m.vocab()).unwrap();
        for mode in [DecodeMode::Streaming, DecodeMode::Parallel] {
            let cfg = DecodeConfig {
                mode,
                rule: StopRule::Threshold(1.1),
                i_max: 7,
            };
            let r = decode(&x, &m, &cfg).unwrap();
            assert_eq!(r.durations, vec![7, 7]);
            assert_eq!(r.output, vec![0; 14]);
            assert_eq!(r.truncated, vec![true, true]);
            assert_eq!(r.wasted, 0);
        }
    }

    #[test]
    fn tau_zero_always_stops() {
        let m = ModelParams::zeros(ModelConfig::tiny()).unwrap();
        let x = TokenSequence::new(vec![4, 0, 9], m.vocab()).unwrap();
        let cfg = DecodeConfig {
            rule: StopRule::Threshold(0.0),
            ..DecodeConfig::default()
        };
        let r = parallel_decode(&x, &m, &cfg).unwrap();
        assert_eq!(r.durations, vec![0, 0, 0]);
        assert_eq!(r.wasted, 60);
    }

    #[test]
    fn invalid_configs() {
        let m = ModelParams::zeros(ModelConfig::tiny()).unwrap();
        let x = TokenSequence::new(vec![1], m.vocab()).unwrap();
        let cfg = DecodeConfig {
            i_max: 0,
            ..DecodeConfig::default()
        };
        assert!(decode(&x, &m, &cfg).is_err());
        let cfg = DecodeConfig {
            rule: StopRule::Threshold(-0.1),
            ..DecodeConfig::default()
        };
        assert!(decode(&x, &m, &cfg).is_err());
        let bad = TokenSequence::from_raw(vec![16]);
        assert!(matches!(
            decode(&bad, &m, &DecodeConfig::default()),
            Err(Error::BadToken { .. })
        ));
    }

    #[test]
    fn probe_on_zero_model_is_uniform() {
        let m = ModelParams::zeros(ModelConfig::default()).unwrap();
        let x = TokenSequence::new(vec![3, 5], m.vocab()).unwrap();
        let recs = probe_segment(0, &x, &m, 20).unwrap();
        assert_eq!(recs.len(), 20);
        for (i, r) in recs.iter().enumerate() {
            assert_eq!(r.i, i);
            assert!((r.p_end - 1.0 / 33.0).abs() < 1e-15);
            assert_eq!(r.argmax_y, 0);
        }
        assert!(probe_segment(2, &x, &m, 20).is_err());
        let csv = probe_csv(&recs[..1]);
        assert_eq!(
            csv,
            "u,i,p_null,argmax_y,p_y\n0,0,0.030303030303030304,0,0.030303030303030304\n"
        );
    }

    #[test]
    fn vocab_end_id_matches_last_class() {
        let v = VocabSpec::new(16, 32).unwrap();
        assert_eq!(v.end_id(), 32);
    }
}
