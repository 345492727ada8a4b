//! Standard normal distribution helpers over `statrs`.

use statrs::distribution::{ContinuousCDF, Normal};
use statrs::function::erf::erfc;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
#[error("probability {0} is outside (0, 1)")]
pub struct QuantileDomainError(pub f64);

fn standard() -> Normal {
    Normal::standard()
}

/// Standard normal distribution function Φ.
pub fn phi(x: f64) -> f64 {
    standard().cdf(x)
}

/// Upper tail `1 − Φ(x)`, accurate far into the tail.
pub fn phi_upper(x: f64) -> f64 {
    0.5 * erfc(x / std::f64::consts::SQRT_2)
}

/// Standard normal quantile Φ⁻¹.
pub fn phi_inv(p: f64) -> Result<f64, QuantileDomainError> {
    if !(p > 0.0 && p < 1.0) {
        return Err(QuantileDomainError(p));
    }
    let x = standard().inverse_cdf(p);
    // one Newton step takes the library value to full precision
    let density = (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt();
    if density > 0.0 {
        Ok(x - (phi(x) - p) / density)
    } else {
        Ok(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn anchors() {
        // phi_inv inverts phi exactly; phi itself is good to about 1e-11
        assert_eq!(phi(0.0), 0.5);
        assert_abs_diff_eq!(phi_inv(0.975).unwrap(), 1.959963984540054, epsilon = 1e-10);
        assert_abs_diff_eq!(phi_inv(0.95).unwrap(), 1.6448536269514722, epsilon = 1e-10);
        assert_abs_diff_eq!(phi_inv(0.5).unwrap(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn upper_tail_keeps_relative_accuracy() {
        let v = phi_upper(4.8);
        assert!((v / 7.933281519755953e-7 - 1.0).abs() < 1e-9, "{v}");
        let v = phi_upper(10.0);
        assert!((v / 7.619853024160526e-24 - 1.0).abs() < 1e-9, "{v}");
        for i in -90..90 {
            let x = i as f64 * 0.1;
            assert_abs_diff_eq!(phi(x) + phi_upper(x), 1.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn quantile_round_trip() {
        for i in 1..2000 {
            let p = i as f64 / 2000.0;
            assert_abs_diff_eq!(phi(phi_inv(p).unwrap()), p, epsilon = 1e-15);
        }
    }

    #[test]
    fn quantile_domain() {
        assert!(phi_inv(0.0).is_err());
        assert!(phi_inv(1.0).is_err());
        assert!(phi_inv(-0.1).is_err());
        assert!(phi_inv(f64::NAN).is_err());
    }
}
