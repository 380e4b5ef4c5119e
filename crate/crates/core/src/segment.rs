//! Sequence, segment and duration types shared by every other module.
//!
//! An output sequence `y_{1:T}` is the in-order concatenation of one segment
//! per input token. Segment `u` occupies time indices `0..d_u`; during
//! training the end-of-segment class sits at index `d_u` and, for padded
//! targets, at every later index up to the padding horizon.

use crate::error::{Error, Result};

/// Input and output vocabulary sizes. The end-of-segment class is the last
/// class of the joint output space, at index `output_size`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VocabSpec {
    input_size: usize,
    output_size: usize,
}

impl VocabSpec {
    pub fn new(input_size: usize, output_size: usize) -> Result<Self> {
        if input_size == 0 || output_size == 0 {
            return Err(Error::InvalidConfig(format!(
                "vocabulary sizes must be positive (input {input_size}, output {output_size})"
            )));
        }
        Ok(Self {
            input_size,
            output_size,
        })
    }

    pub fn input_size(&self) -> usize {
        self.input_size
    }

    pub fn output_size(&self) -> usize {
        self.output_size
    }

    /// `|Y| + 1`.
    pub fn joint_size(&self) -> usize {
        self.output_size + 1
    }

    /// Class id of the end-of-segment token.
    pub fn end_id(&self) -> usize {
        self.output_size
    }
}

/// Input symbols `x_{1:U}`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TokenSequence(Vec<usize>);

impl TokenSequence {
    pub fn new(tokens: Vec<usize>, vocab: &VocabSpec) -> Result<Self> {
        if tokens.is_empty() {
            return Err(Error::InvalidConfig(
                "token sequence must be non-empty".into(),
            ));
        }
        if let Some((position, &token)) = tokens
            .iter()
            .enumerate()
            .find(|(_, &t)| t >= vocab.input_size())
        {
            return Err(Error::BadToken {
                token,
                position,
                vocab: vocab.input_size(),
            });
        }
        Ok(Self(tokens))
    }

    /// Builds a sequence without checking ids against a vocabulary. Consumers
    /// that index into parameters re-validate.
    pub fn from_raw(tokens: Vec<usize>) -> Self {
        Self(tokens)
    }

    pub fn tokens(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn validate(&self, vocab: &VocabSpec) -> Result<()> {
        if self.0.is_empty() {
            return Err(Error::InvalidConfig(
                "token sequence must be non-empty".into(),
            ));
        }
        match self
            .0
            .iter()
            .enumerate()
            .find(|(_, &t)| t >= vocab.input_size())
        {
            Some((position, &token)) => Err(Error::BadToken {
                token,
                position,
                vocab: vocab.input_size(),
            }),
            None => Ok(()),
        }
    }
}

/// Output frames aligned to one input token. Its duration is the frame count.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct Segment(pub Vec<usize>);

impl Segment {
    pub fn duration(&self) -> usize {
        self.0.len()
    }

    pub fn frames(&self) -> &[usize] {
        &self.0
    }
}

/// One segment per input token.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct SegmentedTarget {
    segments: Vec<Segment>,
}

impl SegmentedTarget {
    pub fn new(segments: Vec<Segment>) -> Self {
        Self { segments }
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn len(&self) -> usize {
        self.segments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    pub fn durations(&self) -> Vec<usize> {
        self.segments.iter().map(Segment::duration).collect()
    }

    /// `T = sum of durations`.
    pub fn total_len(&self) -> usize {
        self.segments.iter().map(Segment::duration).sum()
    }

    pub fn max_duration(&self) -> usize {
        self.segments
            .iter()
            .map(Segment::duration)
            .max()
            .unwrap_or(0)
    }

    /// Rejects frames equal to or beyond the end-of-segment id.
    pub fn validate(&self, vocab: &VocabSpec) -> Result<()> {
        for segment in &self.segments {
            if let Some(&class) = segment.0.iter().find(|&&f| f >= vocab.output_size()) {
                return Err(Error::BadClass {
                    class,
                    classes: vocab.output_size(),
                });
            }
        }
        Ok(())
    }
}

/// `U x i_pad` grid of joint-space class ids, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PaddedTargetMatrix {
    rows: usize,
    i_pad: usize,
    cells: Vec<usize>,
}

impl PaddedTargetMatrix {
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn i_pad(&self) -> usize {
        self.i_pad
    }

    pub fn row(&self, u: usize) -> &[usize] {
        &self.cells[u * self.i_pad..(u + 1) * self.i_pad]
    }

    pub fn get(&self, u: usize, i: usize) -> usize {
        self.cells[u * self.i_pad + i]
    }

    pub fn cells(&self) -> &[usize] {
        &self.cells
    }

    pub fn to_rows(&self) -> Vec<Vec<usize>> {
        (0..self.rows).map(|u| self.row(u).to_vec()).collect()
    }
}

/// Concatenates segments in order into `y_{1:T}`.
pub fn concat_segments(target: &SegmentedTarget) -> Vec<usize> {
    let mut out = Vec::with_capacity(target.total_len());
    for segment in target.segments() {
        out.extend_from_slice(&segment.0);
    }
    out
}

/// Inverse of [`concat_segments`].
pub fn split_by_durations(flat: &[usize], durations: &[usize]) -> Result<SegmentedTarget> {
    let total: usize = durations.iter().sum();
    if total != flat.len() {
        return Err(Error::LengthMismatch {
            expected: total,
            actual: flat.len(),
        });
    }
    let mut rest = flat;
    let segments = durations
        .iter()
        .map(|&d| {
            let (head, tail) = rest.split_at(d);
            rest = tail;
            Segment(head.to_vec())
        })
        .collect();
    Ok(SegmentedTarget::new(segments))
}

/// Row `u` holds the segment frames at `0..d_u` and the end-of-segment id at
/// every column from `d_u` to `i_pad - 1`.
pub fn build_padded_targets(
    target: &SegmentedTarget,
    i_pad: usize,
    vocab: &VocabSpec,
) -> Result<PaddedTargetMatrix> {
    let end = vocab.end_id();
    let mut cells = Vec::with_capacity(target.len() * i_pad);
    for (u, segment) in target.segments().iter().enumerate() {
        let d = segment.duration();
        if d >= i_pad {
            return Err(Error::PadTooSmall {
                segment: u,
                duration: d,
                i_pad,
            });
        }
        cells.extend_from_slice(&segment.0);
        cells.extend(std::iter::repeat_n(end, i_pad - d));
    }
    Ok(PaddedTargetMatrix {
        rows: target.len(),
        i_pad,
        cells,
    })
}

/// Index of the first end-of-segment entry, or the row length if none.
pub fn durations_from_row(row: &[usize], end_id: usize) -> usize {
    row.iter().position(|&c| c == end_id).unwrap_or(row.len())
}
