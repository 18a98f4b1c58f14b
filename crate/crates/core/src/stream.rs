//! Random access over a forward-only sequence of chunks.
//!
//! Detection and feature extraction look a bounded distance ahead of and
//! behind the current pulse. [`SampleStream`] keeps only the samples still
//! needed, so a channel of arbitrary length is processed in bounded memory
//! and the result does not depend on how the input was chunked.

use crate::error::{Error, Result};
use crate::signal_io::SampleBuffer;

/// Index-addressed samples of one channel and weighting.
pub trait SampleSource {
    fn sample_rate_hz(&self) -> f64;

    /// Absolute time of sample index 0.
    fn start_time_s(&self) -> f64;

    /// Samples `[start, end)`, clipped at the end of the data.
    fn range(&mut self, start: usize, end: usize) -> Result<&[f64]>;

    /// Releases samples before `index`; later reads must not reach behind it.
    fn release_before(&mut self, _index: usize) {}

    fn time_at(&self, index: usize) -> f64 {
        self.start_time_s() + index as f64 / self.sample_rate_hz()
    }

    /// Nearest sample index of absolute time `t`.
    fn index_of(&self, t: f64) -> i64 {
        ((t - self.start_time_s()) * self.sample_rate_hz()).round() as i64
    }
}

impl SampleSource for SampleBuffer {
    fn sample_rate_hz(&self) -> f64 {
        self.sample_rate_hz
    }

    fn start_time_s(&self) -> f64 {
        self.start_time_s
    }

    fn range(&mut self, start: usize, end: usize) -> Result<&[f64]> {
        let end = end.min(self.samples.len());
        Ok(&self.samples[start.min(end)..end])
    }
}

/// Sliding window over time-contiguous chunks.
pub struct SampleStream<I> {
    chunks: I,
    sample_rate_hz: f64,
    start_time_s: f64,
    buf: Vec<f64>,
    base: usize,
    released: usize,
    exhausted: bool,
}

impl<I> SampleStream<I>
where
    I: Iterator<Item = Result<SampleBuffer>>,
{
    pub fn new(chunks: I, sample_rate_hz: f64, start_time_s: f64) -> Self {
        Self {
            chunks,
            sample_rate_hz,
            start_time_s,
            buf: Vec::new(),
            base: 0,
            released: 0,
            exhausted: false,
        }
    }

    /// One past the last sample pulled so far.
    pub fn available_end(&self) -> usize {
        self.base + self.buf.len()
    }

    /// Total length once the source is exhausted.
    pub fn total_len(&self) -> Option<usize> {
        self.exhausted.then(|| self.available_end())
    }

    /// Pulls chunks until `end` is buffered or the source runs dry.
    pub fn fill_to(&mut self, end: usize) -> Result<()> {
        while !self.exhausted && self.available_end() < end {
            match self.chunks.next() {
                None => self.exhausted = true,
                Some(chunk) => self.push(chunk?)?,
            }
        }
        Ok(())
    }

    fn push(&mut self, chunk: SampleBuffer) -> Result<()> {
        if chunk.sample_rate_hz != self.sample_rate_hz {
            return Err(Error::SampleRateMismatch {
                expected: self.sample_rate_hz,
                found: chunk.sample_rate_hz,
            });
        }
        let expected = self.time_at(self.available_end());
        if (chunk.start_time_s - expected).abs() * self.sample_rate_hz > 0.5 {
            return Err(Error::Discontinuous {
                expected,
                found: chunk.start_time_s,
            });
        }
        self.buf.extend_from_slice(&chunk.samples);
        Ok(())
    }
}

impl<I> SampleSource for SampleStream<I>
where
    I: Iterator<Item = Result<SampleBuffer>>,
{
    fn sample_rate_hz(&self) -> f64 {
        self.sample_rate_hz
    }

    fn start_time_s(&self) -> f64 {
        self.start_time_s
    }

    fn range(&mut self, start: usize, end: usize) -> Result<&[f64]> {
        if start < self.released.max(self.base) && start < end {
            return Err(Error::Released {
                requested: start,
                base: self.released.max(self.base),
            });
        }
        self.fill_to(end)?;
        let end = end.min(self.available_end());
        let start = start.min(end);
        Ok(&self.buf[start - self.base..end - self.base])
    }

    fn release_before(&mut self, index: usize) {
        if index <= self.released {
            return;
        }
        self.released = index;
        let drop = (index - self.base).min(self.buf.len());
        // amortize: compact only when at least half the buffer is dead
        if drop > 0 && drop * 2 >= self.buf.len() {
            self.buf.drain(..drop);
            self.base += drop;
        }
    }
}
