use rustfft::num_complex::Complex64;

/// One second-order section, direct form II transposed, `a0` normalised to 1.
///
/// A first-order section is stored with `b2 = a2 = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BiquadSection {
    pub b0: f64,
    pub b1: f64,
    pub b2: f64,
    pub a1: f64,
    pub a2: f64,
    z1: f64,
    z2: f64,
}

impl BiquadSection {
    pub const fn new(b0: f64, b1: f64, b2: f64, a1: f64, a2: f64) -> Self {
        BiquadSection {
            b0,
            b1,
            b2,
            a1,
            a2,
            z1: 0.0,
            z2: 0.0,
        }
    }

    #[inline]
    pub fn process(&mut self, x: f64) -> f64 {
        let y = self.b0 * x + self.z1;
        self.z1 = self.b1 * x - self.a1 * y + self.z2;
        self.z2 = self.b2 * x - self.a2 * y;
        y
    }

    pub fn reset(&mut self) {
        self.z1 = 0.0;
        self.z2 = 0.0;
    }

    /// Largest pole magnitude, i.e. the largest |root| of `z^2 + a1 z + a2`.
    pub fn pole_radius(&self) -> f64 {
        let disc = self.a1 * self.a1 - 4.0 * self.a2;
        if disc < 0.0 {
            // complex pair, |p|^2 = product of roots
            self.a2.sqrt()
        } else {
            let s = disc.sqrt();
            ((-self.a1 + s) / 2.0).abs().max(((-self.a1 - s) / 2.0).abs())
        }
    }

    pub fn dc_gain(&self) -> f64 {
        (self.b0 + self.b1 + self.b2) / (1.0 + self.a1 + self.a2)
    }

    /// H(z) at `z = e^{jw}`, `w` in radians per sample.
    pub fn response(&self, w: f64) -> Complex64 {
        let z1 = Complex64::from_polar(1.0, -w);
        let z2 = z1 * z1;
        (self.b0 + z1 * self.b1 + z2 * self.b2) / (1.0 + z1 * self.a1 + z2 * self.a2)
    }

    /// Loads the state a constant input `u` would have settled into. Returns
    /// the settled output.
    fn settle(&mut self, u: f64) -> f64 {
        let y = self.dc_gain() * u;
        self.z1 = y - self.b0 * u;
        self.z2 = self.b2 * u - self.a2 * y;
        y
    }
}

/// Cascade of second-order sections preceded by a scalar gain.
#[derive(Debug, Clone, PartialEq)]
pub struct SosFilter {
    pub sections: Vec<BiquadSection>,
    pub gain: f64,
}

impl SosFilter {
    pub fn new(sections: Vec<BiquadSection>, gain: f64) -> Self {
        SosFilter { sections, gain }
    }

    #[inline]
    pub fn process(&mut self, x: f64) -> f64 {
        self.sections
            .iter_mut()
            .fold(self.gain * x, |acc, s| s.process(acc))
    }

    pub fn process_slice(&mut self, signal: &[f64]) -> Vec<f64> {
        signal.iter().map(|&x| self.process(x)).collect()
    }

    pub fn reset(&mut self) {
        self.sections.iter_mut().for_each(BiquadSection::reset);
    }

    /// Puts every section in the steady state for an input that has been
    /// constant at `x0` forever. For a high-pass this suppresses the start-up
    /// step transient.
    pub fn prime(&mut self, x0: f64) {
        let mut u = self.gain * x0;
        for s in &mut self.sections {
            u = s.settle(u);
        }
    }

    pub fn is_stable(&self) -> bool {
        self.sections.iter().all(|s| s.pole_radius() < 1.0)
    }

    pub fn response(&self, freq_hz: f64, fs_hz: f64) -> Complex64 {
        let w = std::f64::consts::TAU * freq_hz / fs_hz;
        self.sections
            .iter()
            .fold(Complex64::new(self.gain, 0.0), |acc, s| acc * s.response(w))
    }

    pub fn magnitude_db(&self, freq_hz: f64, fs_hz: f64) -> f64 {
        20.0 * self.response(freq_hz, fs_hz).norm().log10()
    }
}

/// Runs `signal` through `filter`, continuing from whatever state the filter
/// carries so consecutive calls behave as one long signal.
pub fn filter_apply(filter: &mut SosFilter, signal: &[f64]) -> Vec<f64> {
    filter.process_slice(signal)
}
