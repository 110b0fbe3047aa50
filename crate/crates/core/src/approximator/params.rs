//! Flat parameter storage with named segments.
//!
//! All learnable parameters of an agent live in one `ParamVector`. The
//! vector is carved into contiguous, non-overlapping segments addressed by
//! `(head, tensor)` name pairs, e.g. `("actor", "w_in")`. Gradients are
//! plain `Vec<f64>` of the same length, so optimizer updates and checkpoint
//! dumps never need to know about architecture.

use std::sync::Arc;

use rand::Rng;

use crate::error::CoreError;
use crate::Result;

/// Handle to one named segment of a [`ParamLayout`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SegmentId(pub(crate) usize);

#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub head: String,
    pub tensor: String,
    pub start: usize,
    pub len: usize,
    /// Fan-in of the layer this tensor belongs to; controls init scale.
    pub fan_in: usize,
}

impl Segment {
    pub fn range(&self) -> std::ops::Range<usize> {
        self.start..self.start + self.len
    }
}

/// Immutable description of how a parameter vector is carved up.
///
/// Segments are allocated sequentially by [`LayoutBuilder`], so contiguity
/// and non-overlap hold by construction.
#[derive(Debug, PartialEq)]
pub struct ParamLayout {
    segments: Vec<Segment>,
    total: usize,
}

impl ParamLayout {
    pub fn total_len(&self) -> usize {
        self.total
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn segment(&self, id: SegmentId) -> &Segment {
        &self.segments[id.0]
    }

    pub fn find(&self, head: &str, tensor: &str) -> Option<SegmentId> {
        self.segments
            .iter()
            .position(|s| s.head == head && s.tensor == tensor)
            .map(SegmentId)
    }

    /// All segments registered under one head, in allocation order.
    pub fn head_segments(&self, head: &str) -> Vec<SegmentId> {
        self.segments
            .iter()
            .enumerate()
            .filter(|(_, s)| s.head == head)
            .map(|(i, _)| SegmentId(i))
            .collect()
    }
}

/// Sequential allocator for [`ParamLayout`] segments.
#[derive(Debug, Default)]
pub struct LayoutBuilder {
    segments: Vec<Segment>,
    cursor: usize,
}

impl LayoutBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    /// Reserves `len` parameters for `(head, tensor)`. Panics on duplicate
    /// names; that is always a programming error in architecture code.
    pub fn segment(&mut self, head: &str, tensor: &str, len: usize, fan_in: usize) -> SegmentId {
        assert!(
            !self
                .segments
                .iter()
                .any(|s| s.head == head && s.tensor == tensor),
            "duplicate segment {head}/{tensor}"
        );
        let id = SegmentId(self.segments.len());
        self.segments.push(Segment {
            head: head.to_string(),
            tensor: tensor.to_string(),
            start: self.cursor,
            len,
            fan_in,
        });
        self.cursor += len;
        id
    }

    pub fn finish(self) -> Arc<ParamLayout> {
        Arc::new(ParamLayout {
            segments: self.segments,
            total: self.cursor,
        })
    }
}

/// The agent's learnable parameters: one flat, fixed-length vector plus the
/// layout that names its pieces.
#[derive(Debug, Clone)]
pub struct ParamVector {
    layout: Arc<ParamLayout>,
    values: Vec<f64>,
}

impl ParamVector {
    pub fn zeros(layout: Arc<ParamLayout>) -> Self {
        let values = vec![0.0; layout.total_len()];
        Self { layout, values }
    }

    /// Uniform init in [-1/sqrt(fan_in), +1/sqrt(fan_in)] per segment,
    /// drawn in segment order so the result is a pure function of the seed.
    pub fn init_uniform<R: Rng>(layout: Arc<ParamLayout>, rng: &mut R) -> Self {
        let mut v = Self::zeros(layout);
        for seg in v.layout.clone().segments() {
            let bound = if seg.fan_in == 0 {
                0.0
            } else {
                1.0 / (seg.fan_in as f64).sqrt()
            };
            for x in &mut v.values[seg.range()] {
                *x = rng.random_range(-bound..=bound);
            }
        }
        v
    }

    pub fn from_values(layout: Arc<ParamLayout>, values: Vec<f64>) -> Result<Self> {
        if values.len() != layout.total_len() {
            return Err(CoreError::DimensionMismatch {
                context: "ParamVector::from_values",
                expected: layout.total_len(),
                actual: values.len(),
            });
        }
        Ok(Self { layout, values })
    }

    pub fn layout(&self) -> &Arc<ParamLayout> {
        &self.layout
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn segment(&self, id: SegmentId) -> &[f64] {
        &self.values[self.layout.segment(id).range()]
    }

    pub fn segment_mut(&mut self, id: SegmentId) -> &mut [f64] {
        let range = self.layout.segment(id).range();
        &mut self.values[range]
    }

    /// Gradient-ascent step: `values += scale * grad` restricted to `ids`.
    pub fn add_scaled(&mut self, ids: &[SegmentId], grad: &[f64], scale: f64) {
        debug_assert_eq!(grad.len(), self.values.len());
        for id in ids {
            for i in self.layout.segment(*id).range() {
                self.values[i] += scale * grad[i];
            }
        }
    }

    /// Zero-filled gradient buffer matching this vector.
    pub fn zeros_like(&self) -> Vec<f64> {
        vec![0.0; self.values.len()]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;
    use proptest::prelude::*;

    fn demo_layout() -> Arc<ParamLayout> {
        let mut b = LayoutBuilder::new();
        b.segment("actor", "w", 6, 3);
        b.segment("actor", "b", 2, 3);
        b.segment("critic_v", "w", 4, 4);
        b.finish()
    }

    #[test]
    fn segments_are_contiguous_and_cover_everything() {
        let layout = demo_layout();
        let mut cursor = 0;
        for seg in layout.segments() {
            assert_eq!(seg.start, cursor, "gap before {}/{}", seg.head, seg.tensor);
            cursor += seg.len;
        }
        assert_eq!(cursor, layout.total_len());
    }

    #[test]
    fn lookup_by_name() {
        let layout = demo_layout();
        let id = layout.find("actor", "b").unwrap();
        assert_eq!(layout.segment(id).len, 2);
        assert!(layout.find("actor", "nope").is_none());
        assert_eq!(layout.head_segments("actor").len(), 2);
    }

    #[test]
    fn init_is_seed_deterministic_and_bounded() {
        let layout = demo_layout();
        let a = ParamVector::init_uniform(layout.clone(), &mut rng_from_seed(9));
        let b = ParamVector::init_uniform(layout.clone(), &mut rng_from_seed(9));
        assert_eq!(a.values(), b.values());
        let bound = 1.0 / (3.0f64).sqrt();
        for &x in &a.values()[..8] {
            assert!(x.abs() <= bound);
        }
    }

    #[test]
    fn from_values_rejects_wrong_length() {
        let layout = demo_layout();
        assert!(ParamVector::from_values(layout, vec![0.0; 3]).is_err());
    }

    #[test]
    #[should_panic(expected = "duplicate segment")]
    fn duplicate_names_panic() {
        let mut b = LayoutBuilder::new();
        b.segment("h", "t", 1, 1);
        b.segment("h", "t", 1, 1);
    }

    proptest! {
        // Every index belongs to exactly one segment regardless of how the
        // layout was built.
        #[test]
        fn indices_partition(lens in proptest::collection::vec(1usize..20, 1..8)) {
            let mut b = LayoutBuilder::new();
            for (i, len) in lens.iter().enumerate() {
                b.segment("h", &format!("t{i}"), *len, 1);
            }
            let layout = b.finish();
            let mut owners = vec![0usize; layout.total_len()];
            for seg in layout.segments() {
                for i in seg.range() {
                    owners[i] += 1;
                }
            }
            prop_assert!(owners.iter().all(|&c| c == 1));
        }
    }
}
