//! RMM index construction, amplitude and phase.

mod eigen;
mod eof;

pub use eigen::symmetric_eigen;
pub use eof::{compute_eof_basis, project_rmm, EofBasis, EOF_FIELDS};

use chrono::NaiveDate;

use crate::error::{Error, Result};

/// Daily (RMM1, RMM2) pairs.
#[derive(Clone, Debug, PartialEq)]
pub struct RmmSeries {
    pub dates: Vec<NaiveDate>,
    pub rmm1: Vec<f64>,
    pub rmm2: Vec<f64>,
}

impl RmmSeries {
    pub fn new(dates: Vec<NaiveDate>, rmm1: Vec<f64>, rmm2: Vec<f64>) -> Result<Self> {
        if dates.len() != rmm1.len() || dates.len() != rmm2.len() {
            return Err(Error::Dimension(format!(
                "rmm series with {} dates, {} rmm1, {} rmm2 values",
                dates.len(),
                rmm1.len(),
                rmm2.len()
            )));
        }
        if let Some(w) = dates.windows(2).find(|w| w[1] <= w[0]) {
            return Err(Error::Alignment(w[1]));
        }
        Ok(Self { dates, rmm1, rmm2 })
    }

    pub fn len(&self) -> usize {
        self.dates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dates.is_empty()
    }

    pub fn index_of(&self, date: NaiveDate) -> Option<usize> {
        self.dates.binary_search(&date).ok()
    }

    pub fn amplitude(&self, i: usize) -> f64 {
        rmm_amplitude(self.rmm1[i], self.rmm2[i])
    }
}

/// `√(rmm1² + rmm2²)`.
pub fn rmm_amplitude(rmm1: f64, rmm2: f64) -> f64 {
    rmm1.hypot(rmm2)
}

/// An MJO event is present when the amplitude is strictly above 1.
pub fn mjo_active(rmm1: f64, rmm2: f64) -> bool {
    rmm_amplitude(rmm1, rmm2) > 1.0
}

/// Octant 1..=8 of the RMM phase diagram.
///
/// With `θ = atan2(rmm2, rmm1)` taken in `[−π, π)`, phase `p` covers
/// `[−π + (p−1)π/4, −π + pπ/4)`: phase 1 starts on the negative RMM1 axis
/// and phases increase counterclockwise. Boundary angles belong to the
/// higher interval. The octant is decided by exact sign and magnitude
/// comparisons, so boundaries are not subject to rounding in `atan2`.
pub fn rmm_phase(rmm1: f64, rmm2: f64) -> Result<u8> {
    let (x, y) = (rmm1, rmm2);
    if x == 0.0 && y == 0.0 || !x.is_finite() || !y.is_finite() {
        return Err(Error::UndefinedPhase);
    }
    let phase = if y < 0.0 || (y == 0.0 && x < 0.0) {
        // lower half-plane, θ ∈ [−π, 0)
        if x < 0.0 {
            if -y < -x {
                1
            } else {
                2
            }
        } else if -y > x {
            3
        } else {
            4
        }
    } else if x > 0.0 {
        // θ ∈ [0, π/2)
        if y < x {
            5
        } else {
            6
        }
    } else if y > -x {
        7
    } else {
        8
    };
    Ok(phase)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn formula_phase(x: f64, y: f64) -> u8 {
        let mut t = y.atan2(x);
        if t >= PI {
            t -= 2.0 * PI;
        }
        1 + ((t + PI) / (PI / 4.0)).floor() as u8
    }

    #[test]
    fn amplitude_examples() {
        assert!((rmm_amplitude(0.6, 0.8) - 1.0).abs() < 1e-15);
        assert!(!mjo_active(1.0, 0.0));
        assert_eq!(rmm_amplitude(0.0, 0.0), 0.0);
        assert!(!mjo_active(0.0, 0.0));
        assert!((rmm_amplitude(1.2, -0.5) - 1.3).abs() < 1e-15);
        assert!(mjo_active(1.2, -0.5));
    }

    #[test]
    fn phase_examples() {
        assert_eq!(rmm_phase(-1.0, -1e-12).unwrap(), 1);
        assert_eq!(rmm_phase(0.0, -1.0).unwrap(), 3);
        assert_eq!(rmm_phase(1.0, 0.0).unwrap(), 5);
        assert!(matches!(rmm_phase(0.0, 0.0), Err(Error::UndefinedPhase)));
    }

    #[test]
    fn boundaries_go_to_upper_interval() {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let cases = [
            ((-1.0, 0.0), 1),
            ((-s, -s), 2),
            ((0.0, -1.0), 3),
            ((s, -s), 4),
            ((1.0, 0.0), 5),
            ((s, s), 6),
            ((0.0, 1.0), 7),
            ((-s, s), 8),
        ];
        for ((x, y), p) in cases {
            assert_eq!(rmm_phase(x, y).unwrap(), p, "({x}, {y})");
        }
    }

    #[test]
    fn matches_angle_formula_off_boundaries() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for _ in 0..10_000 {
            let (x, y): (f64, f64) = (rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0));
            let t = y.atan2(x);
            let frac = ((t + PI) / (PI / 4.0)).fract();
            if !(1e-9..=1.0 - 1e-9).contains(&frac) {
                continue;
            }
            assert_eq!(rmm_phase(x, y).unwrap(), formula_phase(x, y));
        }
    }
}
