//! Null moments of the relative density and the resulting one-sided tests.
//!
//! `mu_null` and `nu_null` are the asymptotic mean and variance
//! (`Cov[h12, h13]`) of the relative density under uniform data on a single
//! triangle. For a Delaunay tessellation with area weights `w_j` the moments
//! become `μ Σw²` and `ν Σw³ + 4μ²(Σw³ − (Σw²)²)`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::RFactor;
use crate::normal;

/// Below this the asymptotic variance is treated as zero.
pub const DEGENERATE_VARIANCE: f64 = 1e-14;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NullDistError {
    #[error("invalid weights: {0}")]
    InvalidWeights(String),
    #[error("need at least 2 points, got {0}")]
    TooFewPoints(usize),
    #[error("relative density {0} outside [0, 1]")]
    InvalidDensity(f64),
}

/// Horner evaluation, coefficients from the highest power down.
pub(crate) fn horner(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().fold(0.0, |acc, &c| acc * x + c)
}

/// Asymptotic null mean μ(r).
pub fn mu_null(r: RFactor) -> f64 {
    if r.is_infinite() {
        return 1.0;
    }
    let r = r.value();
    if r < 1.5 {
        37.0 / 216.0 * r * r
    } else if r < 2.0 {
        -r * r / 8.0 + 4.0 - 8.0 / r + 4.5 / (r * r)
    } else {
        1.0 - 1.5 / (r * r)
    }
}

const NU1: [f64; 11] = [
    3007.0, -13824.0, 898.0, 77760.0, -117953.0, 48888.0, -24246.0, 60480.0, -38880.0, 0.0, 3888.0,
];
const NU2: [f64; 11] = [
    5467.0, -37800.0, 61912.0, 0.0, 46588.0, -191520.0, 13608.0, 241920.0, -155520.0, 0.0, 15552.0,
];
const NU3: [f64; 13] = [
    7.0, -72.0, 312.0, 0.0, -5332.0, 15072.0, 13704.0, -139264.0, 273600.0, -242176.0, 103232.0,
    -27648.0, 8640.0,
];
const NU4: [f64; 5] = [15.0, 0.0, -11.0, -48.0, 25.0];

/// Asymptotic null variance ν(r) = Cov[h12, h13].
pub fn nu_null(r: RFactor) -> f64 {
    if r.is_infinite() {
        return 0.0;
    }
    let r = r.value();
    let r4 = r.powi(4);
    let r6 = r.powi(6);
    if r < 4.0 / 3.0 {
        horner(&NU1, r) / (58320.0 * r4)
    } else if r < 1.5 {
        horner(&NU2, r) / (233280.0 * r4)
    } else if r < 2.0 {
        -horner(&NU3, r) / (960.0 * r6)
    } else {
        horner(&NU4, r) / (15.0 * r6)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentPair {
    pub mean: f64,
    /// Asymptotic variance: `n · Var[ρ_n] → avar`.
    pub avar: f64,
}

impl MomentPair {
    pub fn is_degenerate(&self) -> bool {
        self.avar <= DEGENERATE_VARIANCE
    }
}

pub fn null_moments(r: RFactor) -> MomentPair {
    MomentPair {
        mean: mu_null(r),
        avar: nu_null(r),
    }
}

/// Normalized triangle area weights `w_j = A(T_j) / A(hull)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Weights {
    values: Vec<f64>,
    sum_sq: f64,
    sum_cube: f64,
}

impl Weights {
    pub fn new(values: Vec<f64>) -> Result<Self, NullDistError> {
        if values.is_empty() {
            return Err(NullDistError::InvalidWeights("empty weight vector".into()));
        }
        if let Some(w) = values.iter().find(|w| !(w.is_finite() && **w > 0.0)) {
            return Err(NullDistError::InvalidWeights(format!(
                "weight {w} is not positive"
            )));
        }
        let total: f64 = values.iter().sum();
        if (total - 1.0).abs() > 1e-10 {
            return Err(NullDistError::InvalidWeights(format!(
                "weights sum to {total}, expected 1"
            )));
        }
        let sum_sq = values.iter().map(|w| w * w).sum();
        let sum_cube = values.iter().map(|w| w * w * w).sum();
        Ok(Weights {
            values,
            sum_sq,
            sum_cube,
        })
    }

    /// A single triangle.
    pub fn single() -> Self {
        Weights::new(vec![1.0]).expect("unit weight")
    }

    /// Scales arbitrary positive areas to weights.
    pub fn from_areas(areas: &[f64]) -> Result<Self, NullDistError> {
        let total: f64 = areas.iter().sum();
        Weights::new(areas.iter().map(|a| a / total).collect())
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Σ w_j²
    pub fn sum_sq(&self) -> f64 {
        self.sum_sq
    }

    /// Σ w_j³
    pub fn sum_cube(&self) -> f64 {
        self.sum_cube
    }

    /// Σw³ − (Σw²)², non-negative by Jensen.
    pub fn spread(&self) -> f64 {
        (self.sum_cube - self.sum_sq * self.sum_sq).max(0.0)
    }
}

/// Lifts single-triangle moments to a tessellation with the given weights.
pub fn multi_moments(single: MomentPair, weights: &Weights) -> MomentPair {
    MomentPair {
        mean: single.mean * weights.sum_sq(),
        avar: single.avar * weights.sum_cube() + 4.0 * single.mean * single.mean * weights.spread(),
    }
}

pub fn mu_null_multi(r: RFactor, weights: &Weights) -> f64 {
    multi_moments(null_moments(r), weights).mean
}

pub fn nu_null_multi(r: RFactor, weights: &Weights) -> f64 {
    multi_moments(null_moments(r), weights).avar
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub rho: f64,
    pub mean: f64,
    pub avar: f64,
    /// `√n (ρ − μ) / √ν`; absent when the statistic is degenerate.
    pub z: Option<f64>,
    /// Upper tail, evidence for segregation.
    pub p_segregation: Option<f64>,
    /// Lower tail, evidence for association.
    pub p_association: Option<f64>,
    pub degenerate: bool,
}

/// Standardizes an observed relative density against the null moments.
pub fn test(
    rho: f64,
    n: usize,
    r: RFactor,
    weights: &Weights,
) -> Result<TestResult, NullDistError> {
    if n < 2 {
        return Err(NullDistError::TooFewPoints(n));
    }
    if !(0.0..=1.0).contains(&rho) {
        return Err(NullDistError::InvalidDensity(rho));
    }
    let m = multi_moments(null_moments(r), weights);
    if m.is_degenerate() {
        return Ok(TestResult {
            rho,
            mean: m.mean,
            avar: m.avar,
            z: None,
            p_segregation: None,
            p_association: None,
            degenerate: true,
        });
    }
    let z = (n as f64).sqrt() * (rho - m.mean) / m.avar.sqrt();
    Ok(TestResult {
        rho,
        mean: m.mean,
        avar: m.avar,
        z: Some(z),
        p_segregation: Some(normal::phi_upper(z)),
        p_association: Some(normal::phi(z)),
        degenerate: false,
    })
}
