//! Pitman and Hodges-Lehmann asymptotic efficacies and asymptotic power.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::alternatives::{
    self, alt_nondegenerate, numeric, piece_near_null, AltError, AltKind, AltSpec,
};
use crate::geometry::RFactor;
use crate::montecarlo::{self, McError};
use crate::normal;
use crate::nulldist::{mu_null, nu_null, NullDistError, Weights, DEGENERATE_VARIANCE};

/// Finite-difference steps for the second ε-derivative at ε = 0.
pub const FD_STEPS: [f64; 2] = [1e-3, 5e-4];
/// Largest accepted relative gap between the two step sizes.
pub const FD_AGREEMENT: f64 = 1e-5;
/// Nodes `0, h, …, (FD_NODES − 1) h` of the one-sided stencil.
pub const FD_NODES: usize = 9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EfficacyError {
    #[error("null variance is zero at r = {0}")]
    NullDegenerate(RFactor),
    #[error("second derivative unstable at r = {r}: {coarse} vs {fine}")]
    UnstableDerivative { r: f64, coarse: f64, fine: f64 },
    #[error("efficacy undefined: zero variance and zero mean gap at r = {0}")]
    Indeterminate(RFactor),
    #[error("alpha = {0} is outside (0, 1)")]
    InvalidAlpha(f64),
    #[error("need n ≥ 1, got {0}")]
    InvalidN(usize),
    #[error(transparent)]
    Alt(#[from] AltError),
    #[error(transparent)]
    MonteCarlo(#[from] McError),
    #[error(transparent)]
    Weights(#[from] NullDistError),
}

/// Where the alternative variance comes from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "source")]
pub enum VarianceSource {
    /// The closed forms at ε = √3/4 (segregation) and ε = √3/12 (association).
    ClosedForm,
    /// Numerical integration of the exact catch areas.
    Quadrature { resolution: usize },
    /// Triple-sampling estimate.
    MonteCarlo { reps: usize, seed: u64 },
}

impl Default for VarianceSource {
    fn default() -> Self {
        VarianceSource::Quadrature {
            resolution: numeric::DEFAULT_RESOLUTION,
        }
    }
}

/// An efficacy value; divergence is a result in its own right.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Efficacy {
    Finite(f64),
    Infinite,
}

impl Efficacy {
    pub fn value(self) -> f64 {
        match self {
            Efficacy::Finite(v) => v,
            Efficacy::Infinite => f64::INFINITY,
        }
    }

    pub fn is_infinite(self) -> bool {
        matches!(self, Efficacy::Infinite)
    }
}

// Fornberg's recursion: weights of the order-`m` derivative at 0 for the
// given nodes.
fn fd_weights(nodes: &[f64], m: usize) -> Vec<f64> {
    let n = nodes.len();
    let mut c = vec![vec![0.0; m + 1]; n];
    c[0][0] = 1.0;
    let mut c1 = 1.0;
    for i in 1..n {
        let mut c2 = 1.0;
        for j in 0..i {
            let c3 = nodes[i] - nodes[j];
            c2 *= c3;
            for k in (0..=m.min(i)).rev() {
                let prev_i = if k > 0 { c[i - 1][k - 1] } else { 0.0 };
                if j == i - 1 {
                    c[i][k] = c1 * (k as f64 * prev_i - nodes[i - 1] * c[i - 1][k]) / c2;
                }
                let prev_j = if k > 0 { c[j][k - 1] } else { 0.0 };
                c[j][k] = (nodes[i] * c[j][k] - k as f64 * prev_j) / c3;
            }
        }
        c1 = c2;
    }
    c.iter().map(|row| row[m]).collect()
}

// One-sided second derivative at 0, exact for polynomials of degree
// below FD_NODES. The pieces carry r²ε⁴ terms, so a short stencil's
// truncation error grows with r.
fn second_difference(f: impl Fn(f64) -> f64, h: f64) -> f64 {
    let nodes: Vec<f64> = (0..FD_NODES).map(|k| k as f64).collect();
    let w = fd_weights(&nodes, 2);
    (0..FD_NODES).map(|k| w[k] * f(k as f64 * h)).sum::<f64>() / (h * h)
}

/// `∂²μ_·(r, ε)/∂ε²` at ε = 0, from the piece that holds `r` for small ε.
pub fn mu_second_derivative(kind: AltKind, r: RFactor) -> Result<f64, EfficacyError> {
    if r.is_infinite() {
        // μ_· is identically 1 at r = ∞
        return Ok(0.0);
    }
    let x = r.value();
    let piece = piece_near_null(kind, x);
    let f = |e: f64| piece(x, e);
    let coarse = second_difference(f, FD_STEPS[0]);
    let fine = second_difference(f, FD_STEPS[1]);
    if (coarse - fine).abs() > FD_AGREEMENT * fine.abs().max(1e-3) {
        return Err(EfficacyError::UnstableDerivative { r: x, coarse, fine });
    }
    // the finer step only adds rounding error
    Ok(coarse)
}

/// `PAE(r) = (μ''(r, 0))² / ν(r)`.
pub fn pae(r: RFactor, kind: AltKind) -> Result<f64, EfficacyError> {
    let nu = nu_null(r);
    if nu <= DEGENERATE_VARIANCE {
        return Err(EfficacyError::NullDegenerate(r));
    }
    let d2 = mu_second_derivative(kind, r)?;
    Ok(d2 * d2 / nu)
}

/// `ν_·(r, ε)` from the requested source.
pub fn alt_variance(
    spec: &AltSpec,
    r: RFactor,
    source: VarianceSource,
) -> Result<f64, EfficacyError> {
    Ok(match source {
        VarianceSource::ClosedForm => alternatives::nu_closed_form(spec, r)?,
        VarianceSource::Quadrature { resolution } => numeric::variance(spec, r, resolution),
        VarianceSource::MonteCarlo { reps, seed } => {
            montecarlo::estimate_alt_variance(r, spec, reps, seed)?
                .value
                .max(0.0)
        }
    })
}

fn ratio(gap: f64, var: f64, r: RFactor) -> Result<Efficacy, EfficacyError> {
    if var <= DEGENERATE_VARIANCE {
        return if gap != 0.0 {
            Ok(Efficacy::Infinite)
        } else {
            Err(EfficacyError::Indeterminate(r))
        };
    }
    Ok(Efficacy::Finite(gap * gap / var))
}

/// `HLAE(r, ε) = (μ_·(r, ε) − μ(r))² / ν_·(r, ε)`.
pub fn hlae(r: RFactor, spec: &AltSpec, source: VarianceSource) -> Result<Efficacy, EfficacyError> {
    let gap = spec.mean(r) - mu_null(r);
    let var = if alt_nondegenerate(r, spec) {
        alt_variance(spec, r, source)?
    } else {
        0.0
    };
    ratio(gap, var, r)
}

/// Multi-triangle PAE for fixed area fractions `w`.
pub fn pae_multi(r: RFactor, kind: AltKind, weights: &Weights) -> Result<f64, EfficacyError> {
    let (s2, s3) = (weights.sum_sq(), weights.sum_cube());
    let mu = mu_null(r);
    let denom = nu_null(r) * s3 + 4.0 * mu * mu * (s3 - s2 * s2);
    if denom <= DEGENERATE_VARIANCE {
        return Err(EfficacyError::NullDegenerate(r));
    }
    let num = mu_second_derivative(kind, r)? * s2;
    Ok(num * num / denom)
}

/// Multi-triangle HLAE for fixed area fractions `w`.
pub fn hlae_multi(
    r: RFactor,
    spec: &AltSpec,
    weights: &Weights,
    source: VarianceSource,
) -> Result<Efficacy, EfficacyError> {
    let (s2, s3) = (weights.sum_sq(), weights.sum_cube());
    let mu_alt = spec.mean(r);
    let gap = (mu_alt - mu_null(r)) * s2;
    let nu_alt = if alt_nondegenerate(r, spec) {
        alt_variance(spec, r, source)?
    } else {
        0.0
    };
    let denom = nu_alt * s3 + 4.0 * mu_alt * mu_alt * (s3 - s2 * s2);
    ratio(gap, denom, r)
}

/// The large-r limit of the multi-triangle segregation PAE, in two forms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PaeLimit {
    /// `8 Σw² / (256 (Σw³ − (Σw²)²))`, as quoted in the literature.
    pub quoted: f64,
    /// `16 (Σw²)² / (Σw³ − (Σw²)²)`, from μ_S''(r, 0) → 8 and μ(r) → 1.
    pub derived: f64,
    /// `pae_multi` evaluated at r = 10⁴.
    pub at_large_r: f64,
}

pub fn pae_multi_limit(weights: &Weights) -> Result<PaeLimit, EfficacyError> {
    let (s2, s3) = (weights.sum_sq(), weights.sum_cube());
    let spread = s3 - s2 * s2;
    Ok(PaeLimit {
        quoted: 8.0 * s2 / (256.0 * spread),
        derived: 16.0 * s2 * s2 / spread,
        at_large_r: pae_multi(
            RFactor::new(1e4).expect("finite"),
            AltKind::Segregation,
            weights,
        )?,
    })
}

/// Asymptotic power with a note when the alternative variance vanishes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Power {
    pub value: f64,
    pub note: Option<String>,
}

/// Asymptotic power of the level-`alpha` test against `spec` at sample size `n`.
pub fn power_asymptotic(
    r: RFactor,
    n: usize,
    spec: &AltSpec,
    alpha: f64,
    source: VarianceSource,
) -> Result<Power, EfficacyError> {
    let nu_alt = if alt_nondegenerate(r, spec) {
        alt_variance(spec, r, source)?
    } else {
        0.0
    };
    power_from_moments(
        spec.kind,
        (mu_null(r), nu_null(r)),
        (spec.mean(r), nu_alt),
        n,
        alpha,
    )
    .map_err(|e| match e {
        EfficacyError::NullDegenerate(_) => EfficacyError::NullDegenerate(r),
        e => e,
    })
}

/// Power from explicit `(mean, variance)` pairs for the null and alternative.
pub fn power_from_moments(
    kind: AltKind,
    null: (f64, f64),
    alt: (f64, f64),
    n: usize,
    alpha: f64,
) -> Result<Power, EfficacyError> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(EfficacyError::InvalidAlpha(alpha));
    }
    if n == 0 {
        return Err(EfficacyError::InvalidN(n));
    }
    let (mu, nu) = null;
    let (mu_alt, nu_alt) = alt;
    if nu <= DEGENERATE_VARIANCE {
        return Err(EfficacyError::NullDegenerate(RFactor::INFINITY));
    }
    let root_n = (n as f64).sqrt();
    let (critical, upper) = match kind {
        AltKind::Segregation => (normal::phi_inv(1.0 - alpha).expect("alpha checked"), true),
        AltKind::Association => (normal::phi_inv(alpha).expect("alpha checked"), false),
    };
    let shift = critical * nu.sqrt() + root_n * (mu - mu_alt);
    if nu_alt <= DEGENERATE_VARIANCE {
        // ρ is concentrated at μ_alt; the test rejects surely or never
        let rejects = if upper { shift < 0.0 } else { shift > 0.0 };
        return Ok(Power {
            value: if rejects { 1.0 } else { 0.0 },
            note: Some("alternative variance is zero: rejection is deterministic".into()),
        });
    }
    let z = shift / nu_alt.sqrt();
    let value = if upper {
        normal::phi_upper(z)
    } else {
        normal::phi(z)
    };
    Ok(Power { value, note: None })
}

/// Quantity swept over r by [`sweep`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "quantity")]
pub enum Curve {
    Pae {
        kind: AltKind,
    },
    PaeMulti {
        kind: AltKind,
        weights: Vec<f64>,
    },
    Hlae {
        spec: AltSpec,
        source: VarianceSource,
    },
    HlaeMulti {
        spec: AltSpec,
        weights: Vec<f64>,
        source: VarianceSource,
    },
    Power {
        spec: AltSpec,
        n: usize,
        alpha: f64,
        source: VarianceSource,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EfficacyReport {
    pub curve: Curve,
    pub r_grid: Vec<f64>,
    pub values: Vec<Efficacy>,
    /// Per grid point, any note attached to the value.
    pub notes: Vec<Option<String>>,
}

/// Evaluates a curve over an increasing r grid.
pub fn sweep(curve: Curve, r_grid: &[RFactor]) -> Result<EfficacyReport, EfficacyError> {
    if let Curve::PaeMulti { weights, .. } | Curve::HlaeMulti { weights, .. } = &curve {
        Weights::new(weights.clone())?;
    }
    let points: Vec<(Efficacy, Option<String>)> = r_grid
        .par_iter()
        .map(|&r| evaluate(&curve, r))
        .collect::<Result<_, _>>()?;
    let (values, notes) = points.into_iter().unzip();
    Ok(EfficacyReport {
        r_grid: r_grid.iter().map(|r| r.value()).collect(),
        curve,
        values,
        notes,
    })
}

fn evaluate(curve: &Curve, r: RFactor) -> Result<(Efficacy, Option<String>), EfficacyError> {
    let weights = |w: &[f64]| Weights::new(w.to_vec()).expect("checked in sweep");
    Ok(match curve {
        Curve::Pae { kind } => (Efficacy::Finite(pae(r, *kind)?), None),
        Curve::PaeMulti { kind, weights: w } => {
            (Efficacy::Finite(pae_multi(r, *kind, &weights(w))?), None)
        }
        Curve::Hlae { spec, source } => (hlae(r, spec, *source)?, None),
        Curve::HlaeMulti {
            spec,
            weights: w,
            source,
        } => (hlae_multi(r, spec, &weights(w), *source)?, None),
        Curve::Power {
            spec,
            n,
            alpha,
            source,
        } => {
            let p = power_asymptotic(r, *n, spec, *alpha, *source)?;
            (Efficacy::Finite(p.value), p.note)
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn r(v: f64) -> RFactor {
        RFactor::new(v).unwrap()
    }

    fn s3() -> f64 {
        3f64.sqrt()
    }

    #[test]
    fn second_derivative_at_one() {
        // exact values of the closed-form pieces at r = 1
        assert_relative_eq!(
            mu_second_derivative(AltKind::Segregation, r(1.0)).unwrap(),
            2.0 / 27.0,
            max_relative = 1e-6
        );
        assert_relative_eq!(
            mu_second_derivative(AltKind::Association, r(1.0)).unwrap(),
            -22.0 / 9.0,
            max_relative = 1e-6
        );
    }

    #[test]
    fn second_derivative_large_r() {
        // μ_S''(r, 0) = 8 − 8/r² once r ≥ 2
        for x in [2.5, 4.0, 10.0, 100.0] {
            assert_relative_eq!(
                mu_second_derivative(AltKind::Segregation, r(x)).unwrap(),
                8.0 - 8.0 / (x * x),
                max_relative = 1e-6
            );
        }
    }

    #[test]
    fn stencil_weights() {
        let w = fd_weights(&[0.0, 1.0, 2.0, 3.0], 2);
        for (a, b) in w.iter().zip([2.0, -5.0, 4.0, -1.0]) {
            assert!((a - b).abs() < 1e-12);
        }
        // exact on polynomials below the node count
        let f = |e: f64| 3.0 + 2.0 * e - 1.5 * e * e + 7.0 * e.powi(5) - 2.0 * e.powi(10);
        assert!((second_difference(f, 0.01) + 3.0).abs() < 1e-8);
    }

    #[test]
    fn derivative_stable_off_breakpoints() {
        for i in 0..300 {
            let x = 1.0 + i as f64 * 0.01 + 0.003;
            for kind in [AltKind::Segregation, AltKind::Association] {
                mu_second_derivative(kind, r(x)).unwrap();
            }
        }
    }

    #[test]
    fn pae_needs_null_variance() {
        assert!(matches!(
            pae(RFactor::INFINITY, AltKind::Segregation),
            Err(EfficacyError::NullDegenerate(_))
        ));
        assert!(pae(r(1.5), AltKind::Association).unwrap() > 0.0);
    }

    #[test]
    fn pae_multi_single_weight_matches() {
        let one = Weights::single();
        for x in [1.0, 1.3, 1.7, 2.4, 5.0] {
            for kind in [AltKind::Segregation, AltKind::Association] {
                assert_relative_eq!(
                    pae_multi(r(x), kind, &one).unwrap(),
                    pae(r(x), kind).unwrap(),
                    max_relative = 1e-12
                );
            }
        }
    }

    #[test]
    fn hlae_properties() {
        let spec = AltSpec::association(s3() / 12.0).unwrap();
        assert_eq!(
            hlae(r(1.0), &spec, VarianceSource::ClosedForm).unwrap(),
            Efficacy::Infinite
        );
        let seg = AltSpec::segregation(s3() / 4.0).unwrap();
        let near = hlae(r(1.99), &seg, VarianceSource::ClosedForm)
            .unwrap()
            .value();
        let far = hlae(r(1.6), &seg, VarianceSource::ClosedForm)
            .unwrap()
            .value();
        assert!(near > far);
        assert_eq!(
            hlae(r(2.0), &seg, VarianceSource::ClosedForm).unwrap(),
            Efficacy::Infinite
        );
        // ε → 0: the mean gap and so the efficacy vanish
        let tiny = AltSpec::segregation(1e-7).unwrap();
        let h = hlae(
            r(1.5),
            &tiny,
            VarianceSource::Quadrature { resolution: 200 },
        )
        .unwrap();
        assert!(h.value() < 1e-10);
        assert!(matches!(
            hlae(
                r(1.5),
                &AltSpec::segregation(s3() / 8.0).unwrap(),
                VarianceSource::ClosedForm
            ),
            Err(EfficacyError::Alt(AltError::NoClosedForm { .. }))
        ));
    }

    #[test]
    fn hlae_multi_single_weight_matches() {
        let spec = AltSpec::association(s3() / 12.0).unwrap();
        for x in [1.2, 1.8, 3.0] {
            let a = hlae(r(x), &spec, VarianceSource::ClosedForm)
                .unwrap()
                .value();
            let b = hlae_multi(r(x), &spec, &Weights::single(), VarianceSource::ClosedForm)
                .unwrap()
                .value();
            assert_relative_eq!(a, b, max_relative = 1e-12);
        }
    }

    #[test]
    fn hlae_multi_equal_weights() {
        // equal weights: Σw² = 1/J, Σw³ = 1/J², spread = 0
        let spec = AltSpec::association(s3() / 12.0).unwrap();
        let j = 4;
        let w = Weights::new(vec![0.25; 4]).unwrap();
        for x in [1.2, 1.8] {
            let single = hlae(r(x), &spec, VarianceSource::ClosedForm)
                .unwrap()
                .value();
            let multi = hlae_multi(r(x), &spec, &w, VarianceSource::ClosedForm)
                .unwrap()
                .value();
            let jf = j as f64;
            let s2 = 1.0 / jf;
            let s3v = 1.0 / (jf * jf);
            assert_relative_eq!(multi, single * s2 * s2 / s3v, max_relative = 1e-12);
        }
    }

    #[test]
    fn power_at_null_moments_is_alpha() {
        for kind in [AltKind::Segregation, AltKind::Association] {
            for alpha in [0.01, 0.05, 0.1] {
                let p = power_from_moments(kind, (0.3, 0.02), (0.3, 0.02), 100, alpha).unwrap();
                assert!(
                    (p.value - alpha).abs() < 1e-15,
                    "{kind} {alpha}: {}",
                    p.value
                );
            }
        }
    }

    #[test]
    fn power_consistency() {
        let spec = AltSpec::segregation(s3() / 8.0).unwrap();
        let src = VarianceSource::Quadrature { resolution: 200 };
        let small = power_asymptotic(r(1.5), 10, &spec, 0.05, src)
            .unwrap()
            .value;
        let big = power_asymptotic(r(1.5), 10_000, &spec, 0.05, src)
            .unwrap()
            .value;
        assert!(big > small);
        assert!(big > 0.999);
        let assoc = AltSpec::association(s3() / 12.0).unwrap();
        let p = power_asymptotic(r(1.5), 10_000, &assoc, 0.05, VarianceSource::ClosedForm)
            .unwrap()
            .value;
        assert!(p > 0.999);
    }

    #[test]
    fn power_when_alternative_degenerate() {
        let spec = AltSpec::segregation(s3() / 4.0).unwrap();
        let p = power_asymptotic(r(3.0), 100, &spec, 0.05, VarianceSource::ClosedForm).unwrap();
        assert_eq!(p.value, 1.0);
        assert!(p.note.is_some());
        assert!(power_asymptotic(r(3.0), 100, &spec, 1.5, VarianceSource::ClosedForm).is_err());
    }

    #[test]
    fn limit_forms() {
        let w = Weights::new(vec![0.5, 0.3, 0.2]).unwrap();
        let lim = pae_multi_limit(&w).unwrap();
        assert_relative_eq!(lim.at_large_r, lim.derived, max_relative = 1e-3);
        assert!(lim.quoted < lim.derived);
    }

    #[test]
    fn sweep_keeps_order() {
        let grid: Vec<RFactor> = (0..20).map(|i| r(1.0 + 0.1 * i as f64)).collect();
        let rep = sweep(
            Curve::Pae {
                kind: AltKind::Segregation,
            },
            &grid,
        )
        .unwrap();
        assert_eq!(rep.values.len(), grid.len());
        for (x, v) in grid.iter().zip(&rep.values) {
            assert_eq!(v.value(), pae(*x, AltKind::Segregation).unwrap());
        }
    }
}
