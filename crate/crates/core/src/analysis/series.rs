//! Sampled signals with provenance metadata.

use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SeriesError {
    #[error("t and y lengths differ ({t} vs {y})")]
    LengthMismatch { t: usize, y: usize },
    #[error("time grid must be strictly increasing (index {0})")]
    NotIncreasing(usize),
    #[error("value {value} at index {index} outside [-0.05, 1.05]")]
    OutOfRange { index: usize, value: f64 },
    #[error("non-finite sample at index {0}")]
    NonFinite(usize),
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct SeriesMeta {
    pub sweep_variable: String,
    pub sweep_value: f64,
    pub seed: Option<u64>,
    pub tags: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TimeSeries {
    /// µs.
    pub t: Vec<f64>,
    pub y: Vec<f64>,
    pub meta: SeriesMeta,
}

impl TimeSeries {
    /// Validating constructor for probabilities and contrast signals.
    pub fn new(t: Vec<f64>, y: Vec<f64>) -> Result<Self, SeriesError> {
        let s = Self::unchecked(t, y)?;
        for (index, &value) in s.y.iter().enumerate() {
            if !(-0.05..=1.05).contains(&value) {
                return Err(SeriesError::OutOfRange { index, value });
            }
        }
        Ok(s)
    }

    /// Checks grid shape only; accepts arbitrary real values (external data).
    pub fn unchecked(t: Vec<f64>, y: Vec<f64>) -> Result<Self, SeriesError> {
        if t.len() != y.len() {
            return Err(SeriesError::LengthMismatch { t: t.len(), y: y.len() });
        }
        for (i, (a, b)) in t.iter().zip(&y).enumerate() {
            if !a.is_finite() || !b.is_finite() {
                return Err(SeriesError::NonFinite(i));
            }
        }
        if let Some(i) = t.windows(2).position(|w| w[1] <= w[0]) {
            return Err(SeriesError::NotIncreasing(i + 1));
        }
        Ok(Self { t, y, meta: SeriesMeta::default() })
    }

    pub fn with_meta(mut self, meta: SeriesMeta) -> Self {
        self.meta = meta;
        self
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn mean(&self) -> f64 {
        self.y.iter().sum::<f64>() / self.y.len().max(1) as f64
    }

    /// Grid step if uniform to `rel_tol` of the mean step.
    pub fn uniform_step(&self, rel_tol: f64) -> Option<f64> {
        if self.len() < 2 {
            return None;
        }
        let dt = (self.t[self.len() - 1] - self.t[0]) / (self.len() - 1) as f64;
        let ok = self.t.windows(2).all(|w| ((w[1] - w[0]) - dt).abs() <= rel_tol * dt);
        ok.then_some(dt)
    }
}
