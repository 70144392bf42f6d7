//! Frozen gravity-removal high-pass.
//!
//! 7th-order elliptic (Cauer) high-pass for 50 Hz data: passband edge 0.5 Hz,
//! 0.5 dB passband ripple, 40 dB minimum stopband attenuation. The sections
//! were designed offline with SciPy 1.15.3,
//!
//! ```text
//! scipy.signal.ellip(7, 0.5, 40, 0.5, btype="highpass", fs=50, output="sos")
//! ```
//!
//! with the leading section's numerator factored out as the cascade gain. The
//! values are copied at full `f64` precision (17 significant digits).

use super::{BiquadSection, DspError, SosFilter};

pub const HPF_FS_HZ: f64 = 50.0;
pub const HPF_CUTOFF_HZ: f64 = 0.5;
pub const HPF_ORDER: usize = 7;

const GAIN: f64 = 0.8971401921118527;

#[rustfmt::skip]
const SECTIONS: [[f64; 5]; 4] = [
    // b0, b1, b2, a1, a2
    [1.0, -1.0, 0.0, -0.8638455050430203, 0.0],
    [1.0, -1.9986400512070623, 0.9999999999999998, -1.9349147027208444, 0.9420251409387792],
    [1.0, -1.9970926394962356, 1.0000000000000002, -1.9843709467278032, 0.9887667672965991],
    [1.0, -1.9965472100797084, 1.0000000000000002, -1.9940821702650529, 0.9979974163128176],
];

/// Returns the shipped high-pass design. Only 50 Hz is supported.
pub fn hpf_coefficients(fs_hz: f64) -> Result<SosFilter, DspError> {
    if (fs_hz - HPF_FS_HZ).abs() > 1e-9 {
        return Err(DspError::UnsupportedRate(fs_hz));
    }
    let sections = SECTIONS
        .iter()
        .map(|&[b0, b1, b2, a1, a2]| BiquadSection::new(b0, b1, b2, a1, a2))
        .collect();
    Ok(SosFilter::new(sections, GAIN))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn four_stable_sections() {
        let f = hpf_coefficients(50.0).unwrap();
        assert_eq!(f.sections.len(), 4);
        assert!(f.sections.len() * 2 >= HPF_ORDER);
        assert!(f.is_stable());
        for s in &f.sections {
            assert!(s.pole_radius() < 1.0);
        }
    }

    #[test]
    fn stopband_and_passband_points() {
        let f = hpf_coefficients(50.0).unwrap();
        assert!(f.magnitude_db(0.1, 50.0) <= -40.0);
        assert!(f.magnitude_db(5.0, 50.0).abs() <= 0.5);
        // zero at DC
        assert!(f.response(0.0, 50.0).norm() < 1e-12);
    }

    #[test]
    fn matches_reference_tool_response() {
        // 20*log10|H| from scipy.signal.sosfreqz on the unfactored sections
        let f = hpf_coefficients(50.0).unwrap();
        let reference = [
            (0.1, -41.87482813121594),
            (0.3, -60.33460470150936),
            (0.5, -0.4999999999992624),
            (1.0, -0.2479461771721997),
            (5.0, -0.0881363288744371),
        ];
        for (freq, db) in reference {
            assert!((f.magnitude_db(freq, 50.0) - db).abs() < 1e-6, "{freq} Hz");
        }
    }

    #[test]
    fn other_rates_rejected() {
        assert_eq!(hpf_coefficients(44.1), Err(DspError::UnsupportedRate(44.1)));
        assert!(hpf_coefficients(100.0).is_err());
    }
}
