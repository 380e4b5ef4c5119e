//! Error metrics and the padded-training x stop-rule ablation.

use std::fmt::Write as _;

use rayon::prelude::*;

use crate::data::Example;
use crate::decode::{parallel_decode, probe_segment, DecodeConfig, DecodeMode, StopRule};
use crate::error::{Error, Result};
use crate::net::ModelParams;
use crate::numerics::format_float;
use crate::segment::concat_segments;

/// Edit distance with unit insert, delete and substitute costs.
pub fn levenshtein(a: &[usize], b: &[usize]) -> usize {
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0; b.len() + 1];
    for (i, &x) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, &y) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(x != y);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// `levenshtein(hyp, ref) / max(|ref|, 1)`.
pub fn token_error_rate(hyp: &[usize], reference: &[usize]) -> f64 {
    levenshtein(hyp, reference) as f64 / reference.len().max(1) as f64
}

/// Fraction of positions with equal durations.
pub fn duration_accuracy(hyp: &[usize], reference: &[usize]) -> Result<f64> {
    if hyp.len() != reference.len() {
        return Err(Error::LengthMismatch {
            expected: reference.len(),
            actual: hyp.len(),
        });
    }
    if reference.is_empty() {
        return Ok(1.0);
    }
    let hits = hyp.iter().zip(reference).filter(|(a, b)| a == b).count();
    Ok(hits as f64 / reference.len() as f64)
}

/// Corpus-level counts. Rates are ratios of integer totals, so they do not
/// depend on evaluation order.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct EvalCounts {
    pub edits: usize,
    pub ref_tokens: usize,
    pub duration_hits: usize,
    pub segments: usize,
    pub wasted: usize,
    pub examples: usize,
}

impl EvalCounts {
    /// Total edits over total reference length (each floored at 1).
    pub fn seq_error(&self) -> f64 {
        self.edits as f64 / self.ref_tokens.max(1) as f64
    }

    pub fn duration_accuracy(&self) -> f64 {
        self.duration_hits as f64 / self.segments.max(1) as f64
    }

    pub fn wasted_mean(&self) -> f64 {
        self.wasted as f64 / self.examples.max(1) as f64
    }

    fn add(mut self, other: Self) -> Self {
        self.edits += other.edits;
        self.ref_tokens += other.ref_tokens;
        self.duration_hits += other.duration_hits;
        self.segments += other.segments;
        self.wasted += other.wasted;
        self.examples += other.examples;
        self
    }
}

/// Parallel-decodes every example with `rule` and scores it against its
/// stored segments.
pub fn evaluate(
    dataset: &[Example],
    model: &ModelParams,
    rule: StopRule,
    i_max: usize,
) -> Result<EvalCounts> {
    let cfg = DecodeConfig {
        mode: DecodeMode::Parallel,
        rule,
        i_max,
    };
    let per_example = dataset
        .par_iter()
        .map(|ex| {
            let r = parallel_decode(&ex.tokens, model, &cfg)?;
            let reference = concat_segments(&ex.target);
            let ref_d = ex.target.durations();
            Ok(EvalCounts {
                edits: levenshtein(&r.output, &reference),
                ref_tokens: reference.len().max(1),
                duration_hits: r
                    .durations
                    .iter()
                    .zip(&ref_d)
                    .filter(|(a, b)| a == b)
                    .count(),
                segments: ref_d.len(),
                wasted: r.wasted,
                examples: 1,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(per_example
        .into_iter()
        .fold(EvalCounts::default(), EvalCounts::add))
}

/// Fraction of segments whose end-class probability stays at or above `tau`
/// for every index in `[d_u, i_pad)`.
pub fn end_stability(
    dataset: &[Example],
    model: &ModelParams,
    i_pad: usize,
    tau: f64,
) -> Result<f64> {
    let per_example = dataset
        .par_iter()
        .map(|ex| {
            let mut stable = 0usize;
            for (u, seg) in ex.target.segments().iter().enumerate() {
                let probe = probe_segment(u, &ex.tokens, model, i_pad)?;
                if probe[seg.duration().min(i_pad)..]
                    .iter()
                    .all(|r| r.p_end >= tau)
                {
                    stable += 1;
                }
            }
            Ok((stable, ex.target.len()))
        })
        .collect::<Result<Vec<_>>>()?;
    let (stable, total) = per_example
        .into_iter()
        .fold((0, 0), |(a, b), (c, d)| (a + c, b + d));
    Ok(stable as f64 / total.max(1) as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct AblationCell {
    pub padded: bool,
    pub stop_rule: String,
    pub seq_error: f64,
    pub dur_acc: f64,
    pub wasted_mean: f64,
}

/// Four cells: `{padded, unpadded} x {threshold, argmax}`.
#[derive(Debug, Clone, PartialEq)]
pub struct AblationReport {
    pub cells: Vec<AblationCell>,
}

impl AblationReport {
    pub fn cell(&self, padded: bool, stop_rule: &str) -> Option<&AblationCell> {
        self.cells
            .iter()
            .find(|c| c.padded == padded && c.stop_rule == stop_rule)
    }
}

/// Evaluates both checkpoints under both stop rules on the same held-out
/// set with the same `i_max`.
pub fn run_ablation(
    dataset: &[Example],
    padded: &ModelParams,
    unpadded: &ModelParams,
    i_max: usize,
    tau: f64,
) -> Result<AblationReport> {
    let mut cells = Vec::with_capacity(4);
    for (is_padded, model) in [(true, padded), (false, unpadded)] {
        for rule in [StopRule::Threshold(tau), StopRule::Argmax] {
            let counts = evaluate(dataset, model, rule, i_max)?;
            cells.push(AblationCell {
                padded: is_padded,
                stop_rule: rule.name().to_string(),
                seq_error: counts.seq_error(),
                dur_acc: counts.duration_accuracy(),
                wasted_mean: counts.wasted_mean(),
            });
        }
    }
    Ok(AblationReport { cells })
}

pub const ABLATION_CSV_HEADER: &str = "padded,stop_rule,seq_error,dur_acc,wasted_mean";

pub fn ablation_csv(report: &AblationReport) -> String {
    let mut out = String::from(ABLATION_CSV_HEADER);
    out.push('\n');
    for c in &report.cells {
        writeln!(
            out,
            "{},{},{},{},{}",
            c.padded,
            c.stop_rule,
            format_float(c.seq_error),
            format_float(c.dur_acc),
            format_float(c.wasted_mean)
        )
        .unwrap();
    }
    out
}

pub fn parse_ablation_csv(text: &str) -> Result<AblationReport> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h == ABLATION_CSV_HEADER => {}
        _ => return Err(Error::parse(1, 1, "missing ablation header")),
    }
    let mut cells = Vec::new();
    for (idx, line) in lines {
        let lineno = idx + 1;
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 5 {
            return Err(Error::parse(
                lineno,
                1,
                format!("expected 5 fields, got {}", fields.len()),
            ));
        }
        let padded = fields[0]
            .parse()
            .map_err(|_| Error::parse(lineno, 1, format!("bad padded flag {:?}", fields[0])))?;
        let number = |k: usize| -> Result<f64> {
            let col = fields[..k].iter().map(|f| f.len() + 1).sum::<usize>() + 1;
            fields[k]
                .parse()
                .map_err(|_| Error::parse(lineno, col, format!("bad number {:?}", fields[k])))
        };
        cells.push(AblationCell {
            padded,
            stop_rule: fields[1].to_string(),
            seq_error: number(2)?,
            dur_acc: number(3)?,
            wasted_mean: number(4)?,
        });
    }
    Ok(AblationReport { cells })
}
