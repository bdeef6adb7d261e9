/// Circular history of the most recent `span` spike vectors of one layer.
///
/// Lags that reach before the start of the sequence read as zeros.
#[derive(Debug, Clone)]
pub struct SpikeRing {
    width: usize,
    span: usize,
    buf: Vec<f64>,
    /// Slot that the next push writes to.
    head: usize,
    pushed: usize,
    zeros: Vec<f64>,
}

impl SpikeRing {
    pub fn new(width: usize, span: usize) -> Self {
        let span = span.max(1);
        Self {
            width,
            span,
            buf: vec![0.0; width * span],
            head: 0,
            pushed: 0,
            zeros: vec![0.0; width],
        }
    }

    pub fn span(&self) -> usize {
        self.span
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn reset(&mut self) {
        self.buf.iter_mut().for_each(|v| *v = 0.0);
        self.head = 0;
        self.pushed = 0;
    }

    pub fn push(&mut self, spikes: &[f64]) {
        debug_assert_eq!(spikes.len(), self.width);
        let start = self.head * self.width;
        self.buf[start..start + self.width].copy_from_slice(spikes);
        self.head = (self.head + 1) % self.span;
        self.pushed += 1;
    }

    /// Spike vector from `lag` steps ago (`lag >= 1`).
    pub fn lag(&self, lag: usize) -> &[f64] {
        assert!(lag >= 1 && lag <= self.span, "lag {lag} outside 1..={}", self.span);
        if lag > self.pushed {
            return &self.zeros;
        }
        let slot = (self.head + self.span - lag) % self.span;
        &self.buf[slot * self.width..(slot + 1) * self.width]
    }
}
