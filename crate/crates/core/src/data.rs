//! Synthetic monotonic sequence task with exact ground-truth durations, and
//! the line-based dataset format.
//!
//! Durations follow either a local rule, `d_u = 1 + (x_u mod 8)`, or a
//! contextual rule, `d_u = 1 + ((x_u + x_{u+1}) mod 8)` with the token past
//! the end taken as 0. Frame `i` of segment `u` is `(8 x_u + i) mod |Y|`.
//!
//! Dataset lines look like `3 5\t24|8,9,10,11,12,13`: input ids separated by
//! spaces, a tab, then segments separated by `|` with comma-separated frames.

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use rand::Rng;

use crate::error::{Error, Result};
use crate::numerics::{rng_from_seed, SeededRng};
use crate::segment::{Segment, SegmentedTarget, TokenSequence, VocabSpec};

pub const MAX_DURATION: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DurationRule {
    Local,
    Contextual,
}

impl FromStr for DurationRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "local" => Ok(Self::Local),
            "contextual" => Ok(Self::Contextual),
            other => Err(Error::InvalidConfig(format!(
                "unknown duration rule {other:?}"
            ))),
        }
    }
}

impl std::fmt::Display for DurationRule {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Local => "local",
            Self::Contextual => "contextual",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TaskSpec {
    pub input_size: usize,
    pub output_size: usize,
    pub rule: DurationRule,
    pub u_min: usize,
    pub u_max: usize,
    pub seed: u64,
}

impl Default for TaskSpec {
    fn default() -> Self {
        Self {
            input_size: 16,
            output_size: 32,
            rule: DurationRule::Contextual,
            u_min: 2,
            u_max: 8,
            seed: 0,
        }
    }
}

impl TaskSpec {
    pub fn vocab(&self) -> Result<VocabSpec> {
        VocabSpec::new(self.input_size, self.output_size)
    }

    pub fn validate(&self) -> Result<()> {
        self.vocab()?;
        if self.u_min == 0 || self.u_min > self.u_max {
            return Err(Error::InvalidConfig(format!(
                "bad length range [{}, {}]",
                self.u_min, self.u_max
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Example {
    pub tokens: TokenSequence,
    pub target: SegmentedTarget,
}

/// Draws one example from `rng`.
pub fn gen_example(spec: &TaskSpec, rng: &mut SeededRng) -> Example {
    let u_len = rng.gen_range(spec.u_min..=spec.u_max);
    let tokens: Vec<usize> = (0..u_len)
        .map(|_| rng.gen_range(0..spec.input_size))
        .collect();
    let target = segments_for(spec, &tokens);
    Example {
        tokens: TokenSequence::from_raw(tokens),
        target,
    }
}

/// `n` examples from a generator seeded with `spec.seed`.
pub fn generate(spec: &TaskSpec, n: usize) -> Result<Vec<Example>> {
    spec.validate()?;
    let mut rng = rng_from_seed(spec.seed);
    Ok((0..n).map(|_| gen_example(spec, &mut rng)).collect())
}

/// Ground-truth segments for `x`, recomputed from the defining formulas.
pub fn oracle_segments(spec: &TaskSpec, x: &TokenSequence) -> Result<SegmentedTarget> {
    x.validate(&spec.vocab()?)?;
    Ok(segments_for(spec, x.tokens()))
}

fn segments_for(spec: &TaskSpec, tokens: &[usize]) -> SegmentedTarget {
    let segments = tokens
        .iter()
        .enumerate()
        .map(|(u, &x)| {
            let d = match spec.rule {
                DurationRule::Local => 1 + x % MAX_DURATION,
                DurationRule::Contextual => {
                    let next = tokens.get(u + 1).copied().unwrap_or(0);
                    1 + (x + next) % MAX_DURATION
                }
            };
            Segment(
                (0..d)
                    .map(|i| (MAX_DURATION * x + i) % spec.output_size)
                    .collect(),
            )
        })
        .collect();
    SegmentedTarget::new(segments)
}

fn join<T: std::fmt::Display>(out: &mut String, items: &[T], sep: char) {
    for (k, item) in items.iter().enumerate() {
        if k > 0 {
            out.push(sep);
        }
        write!(out, "{item}").unwrap();
    }
}

/// One LF-terminated line per example.
pub fn serialize_dataset(examples: &[Example]) -> String {
    let mut out = String::new();
    for ex in examples {
        join(&mut out, ex.tokens.tokens(), ' ');
        out.push('\t');
        for (k, seg) in ex.target.segments().iter().enumerate() {
            if k > 0 {
                out.push('|');
            }
            join(&mut out, seg.frames(), ',');
        }
        out.push('\n');
    }
    out
}

pub fn write_dataset(examples: &[Example], path: &Path) -> Result<()> {
    std::fs::write(path, serialize_dataset(examples)).map_err(|e| Error::io(path, e))
}

pub fn read_dataset(path: &Path) -> Result<Vec<Example>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_dataset(&text)
}

/// Parses ids separated by `sep`, starting at byte column `col0` (0-based).
fn parse_ids(field: &str, sep: char, line: usize, col0: usize) -> Result<Vec<usize>> {
    let mut ids = Vec::new();
    let mut col = col0;
    for piece in field.split(sep) {
        if piece.is_empty() {
            return Err(Error::parse(
                line,
                col + 1,
                format!("empty entry before {sep:?}"),
            ));
        }
        if let Some(bad) = piece.find(|c: char| !c.is_ascii_digit()) {
            return Err(Error::parse(
                line,
                col + bad + 1,
                format!("unexpected character in {piece:?}"),
            ));
        }
        let id = piece
            .parse()
            .map_err(|_| Error::parse(line, col + 1, format!("id {piece:?} out of range")))?;
        ids.push(id);
        col += piece.len() + sep.len_utf8();
    }
    Ok(ids)
}

pub fn parse_dataset(text: &str) -> Result<Vec<Example>> {
    let mut examples = Vec::new();
    let body = text.strip_suffix('\n').unwrap_or(text);
    if body.is_empty() && text.len() <= 1 {
        return Ok(examples);
    }
    for (idx, line) in body.split('\n').enumerate() {
        let lineno = idx + 1;
        let Some((left, right)) = line.split_once('\t') else {
            return Err(Error::parse(
                lineno,
                line.len() + 1,
                "missing tab separator",
            ));
        };
        let tokens = parse_ids(left, ' ', lineno, 0)?;
        let seg_col = left.len() + 1;
        let mut segments = Vec::new();
        let mut col = seg_col;
        for piece in right.split('|') {
            let frames = if piece.is_empty() {
                Vec::new()
            } else {
                parse_ids(piece, ',', lineno, col)?
            };
            segments.push(Segment(frames));
            col += piece.len() + 1;
        }
        if segments.len() != tokens.len() {
            return Err(Error::parse(
                lineno,
                seg_col + 1,
                format!("{} segments for {} tokens", segments.len(), tokens.len()),
            ));
        }
        examples.push(Example {
            tokens: TokenSequence::from_raw(tokens),
            target: SegmentedTarget::new(segments),
        });
    }
    Ok(examples)
}
