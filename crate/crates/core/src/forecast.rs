//! Moving-average demand forecasting over a sliding window of the most
//! recent observations.

use std::collections::VecDeque;

use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum ForecastError {
    #[error("forecast window is empty")]
    EmptyWindow,
    #[error("need at least 2 observations for a standard deviation, have {0}")]
    InsufficientData(usize),
}

/// Sliding window of the most recent `capacity` demand observations.
#[derive(Debug, Clone, PartialEq)]
pub struct ForecastWindow {
    capacity: usize,
    observations: VecDeque<f64>,
}

impl ForecastWindow {
    /// Empty window holding up to `capacity` observations.
    pub fn new(capacity: usize) -> Self {
        assert!(capacity >= 1, "forecast window capacity must be at least 1");
        Self { capacity, observations: VecDeque::with_capacity(capacity) }
    }

    /// Window pre-filled to capacity with `prior_mean`, so forecasts are
    /// defined from the first period. The prior's influence is gone after
    /// `capacity` pushes.
    pub fn with_prior(capacity: usize, prior_mean: f64) -> Self {
        let mut w = Self::new(capacity);
        for _ in 0..capacity {
            w.observations.push_back(prior_mean);
        }
        w
    }

    /// Appends an observation, evicting the oldest when over capacity.
    pub fn push(&mut self, obs: f64) {
        if self.observations.len() == self.capacity {
            self.observations.pop_front();
        }
        self.observations.push_back(obs);
    }

    /// Arithmetic mean of the buffered observations.
    pub fn mean(&self) -> Result<f64, ForecastError> {
        if self.observations.is_empty() {
            return Err(ForecastError::EmptyWindow);
        }
        Ok(self.observations.iter().sum::<f64>() / self.observations.len() as f64)
    }

    /// Sample standard deviation (n-1 denominator).
    pub fn std_dev(&self) -> Result<f64, ForecastError> {
        let n = self.observations.len();
        if n < 2 {
            return Err(ForecastError::InsufficientData(n));
        }
        let mean = self.mean()?;
        let ss: f64 = self.observations.iter().map(|x| (x - mean) * (x - mean)).sum();
        Ok((ss / (n - 1) as f64).sqrt())
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn observations(&self) -> impl Iterator<Item = f64> + '_ {
        self.observations.iter().copied()
    }
}
