use super::DspError;

/// Causal moving average. During warm-up the mean is taken over however many
/// samples have arrived, so the output never includes padding.
#[derive(Debug, Clone)]
pub struct MovingAverage {
    ring: Vec<f64>,
    next: usize,
    filled: usize,
}

impl MovingAverage {
    pub fn new(window: usize) -> Result<Self, DspError> {
        if window == 0 {
            return Err(DspError::InvalidWindow);
        }
        Ok(MovingAverage {
            ring: vec![0.0; window],
            next: 0,
            filled: 0,
        })
    }

    pub fn window(&self) -> usize {
        self.ring.len()
    }

    #[inline]
    pub fn process(&mut self, x: f64) -> f64 {
        self.ring[self.next] = x;
        self.next = (self.next + 1) % self.ring.len();
        self.filled = (self.filled + 1).min(self.ring.len());
        // summed fresh each time; a running sum drifts over long streams
        let sum: f64 = if self.filled == self.ring.len() {
            self.ring.iter().sum()
        } else {
            self.ring[..self.filled].iter().sum()
        };
        sum / self.filled as f64
    }

    pub fn reset(&mut self) {
        self.next = 0;
        self.filled = 0;
    }
}

pub fn moving_average(signal: &[f64], window: usize) -> Result<Vec<f64>, DspError> {
    let mut ma = MovingAverage::new(window)?;
    Ok(signal.iter().map(|&x| ma.process(x)).collect())
}
