//! Means and variances of the relative density under the segregation and
//! association alternatives.
//!
//! Under segregation with parameter ε the data are uniform on the triangle
//! with the three corners of height ε removed; under association they are
//! uniform on those corners themselves, with `ε` measured from the centre
//! (the corners have height `√3/3 − ε`). Everything is stated for the
//! standard equilateral triangle, which loses nothing by affine invariance.
//!
//! The mean `μ_·(r, ε)` is available in closed form for every ε. Closed-form
//! variances exist only for `ε = √3/4` (segregation) and `ε = √3/12`
//! (association); [`numeric`] integrates the exact catch areas for the
//! others.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::RFactor;
use crate::nulldist::mu_null;

#[inline]
fn sqrt3() -> f64 {
    3f64.sqrt()
}

/// Upper end of the admissible ε range, `√3/3`.
pub fn eps_max() -> f64 {
    sqrt3() / 3.0
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AltError {
    #[error("ε = {0} is outside [0, √3/3)")]
    EpsOutOfRange(f64),
    #[error("no closed-form variance for {kind} at ε = {eps}")]
    NoClosedForm { kind: AltKind, eps: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AltKind {
    Segregation,
    Association,
}

impl std::fmt::Display for AltKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            AltKind::Segregation => "segregation",
            AltKind::Association => "association",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AltSpec {
    pub kind: AltKind,
    pub eps: f64,
}

impl AltSpec {
    /// `eps` must lie in `(0, √3/3)`.
    pub fn new(kind: AltKind, eps: f64) -> Result<Self, AltError> {
        if !(eps > 0.0 && eps < eps_max()) {
            return Err(AltError::EpsOutOfRange(eps));
        }
        Ok(AltSpec { kind, eps })
    }

    pub fn segregation(eps: f64) -> Result<Self, AltError> {
        AltSpec::new(AltKind::Segregation, eps)
    }

    pub fn association(eps: f64) -> Result<Self, AltError> {
        AltSpec::new(AltKind::Association, eps)
    }

    pub fn mean(&self, r: RFactor) -> f64 {
        match self.kind {
            AltKind::Segregation => mu_segregation(r, self.eps),
            AltKind::Association => mu_association(r, self.eps),
        }
        .expect("validated ε")
    }
}

fn check_eps(eps: f64) -> Result<(), AltError> {
    if !(eps >= 0.0 && eps < eps_max()) {
        return Err(AltError::EpsOutOfRange(eps));
    }
    Ok(())
}

/// One closed-form piece `μ(r, ε)`.
pub type Piece = fn(f64, f64) -> f64;

/// Picks the piece whose half-open interval `[prev, upper)` holds `r`.
fn pick(r: f64, pieces: &[(f64, Piece)]) -> Piece {
    pieces
        .iter()
        .find(|(upper, _)| r < *upper)
        .map(|(_, f)| *f)
        .unwrap_or(pieces[pieces.len() - 1].1)
}

// Segregation pieces. `d` is the common factor (2ε+1)²(2ε−1)².

fn seg_d(e: f64) -> f64 {
    let x = (2.0 * e + 1.0) * (2.0 * e - 1.0);
    x * x
}

fn s11(r: f64, e: f64) -> f64 {
    let (e2, e4, r2) = (e * e, e.powi(4), r * r);
    -(576.0 * r2 * e4 - 1152.0 * e4 - 37.0 * r2 + 288.0 * e2) / (216.0 * seg_d(e))
}

fn s12(r: f64, e: f64) -> f64 {
    let s = sqrt3();
    let (e2, e3, e4) = (e * e, e.powi(3), e.powi(4));
    let (r2, r3, r4) = (r * r, r.powi(3), r.powi(4));
    -(576.0 * r4 * e4 - 1152.0 * r2 * e4
        + 91.0 * r4
        + 512.0 * s * r3 * e
        + 2592.0 * r2 * e2
        + 1536.0 * s * r * e3
        + 1152.0 * e4
        - 768.0 * r3
        - 2304.0 * s * r2 * e
        - 6912.0 * r * e2
        - 2304.0 * s * e3
        + 1728.0 * r2
        + 3456.0 * s * r * e
        + 5184.0 * e2
        - 1728.0 * r
        - 1728.0 * s * e
        + 648.0)
        / (216.0 * r2 * seg_d(e))
}

fn s13(r: f64, e: f64) -> f64 {
    let s = sqrt3();
    let (e2, e3, e4) = (e * e, e.powi(3), e.powi(4));
    let (r2, r4) = (r * r, r.powi(4));
    -(192.0 * r4 * e4 - 384.0 * r2 * e4
        + 9.0 * r4
        + 864.0 * r2 * e2
        + 512.0 * s * r * e3
        + 384.0 * e4
        - 2304.0 * r * e2
        - 768.0 * s * e3
        - 288.0 * r2
        + 1728.0 * e2
        + 576.0 * r
        - 324.0)
        / (72.0 * r2 * seg_d(e))
}

fn s14(r: f64, e: f64) -> f64 {
    let s = sqrt3();
    let (e2, e3, e4) = (e * e, e.powi(3), e.powi(4));
    let (r2, r3, r4) = (r * r, r.powi(3), r.powi(4));
    -(192.0 * r4 * e4 - 384.0 * r2 * e4 - 9.0 * r4 - 96.0 * s * r3 * e + 288.0 * r2 * e2
        - 128.0 * e4
        + 144.0 * r3
        + 576.0 * s * r2 * e
        + 256.0 * s * e3
        - 720.0 * r2
        - 1152.0 * s * r * e
        - 576.0 * e2
        + 1152.0 * r
        + 768.0 * s * e
        - 612.0)
        / (72.0 * r2 * seg_d(e))
}

fn s15(r: f64, e: f64) -> f64 {
    let s = sqrt3();
    let (e2, e3, e4) = (e * e, e.powi(3), e.powi(4));
    let (r2, r4) = (r * r, r.powi(4));
    -(48.0 * r4 * e4 - 96.0 * r2 * e4 + 72.0 * r2 * e2 - 32.0 * e4 + 64.0 * s * e3
        - 18.0 * r2
        - 144.0 * e2
        + 27.0)
        / (18.0 * r2 * seg_d(e))
}

fn s16(r: f64, e: f64) -> f64 {
    let s = sqrt3();
    let (e2, e3, e4) = (e * e, e.powi(3), e.powi(4));
    let (r2, r3, r4) = (r * r, r.powi(3), r.powi(4));
    (48.0 * r4 * e4 + 256.0 * r3 * e4 - 128.0 * s * r3 * e3 + 288.0 * r2 * e4 - 192.0 * s * r2 * e3
        + 72.0 * r2 * e2
        + 18.0 * r2
        + 48.0 * s * e
        - 45.0)
        / (18.0 * r2 * seg_d(e))
}

fn one(_: f64, _: f64) -> f64 {
    1.0
}

fn s23(r: f64, e: f64) -> f64 {
    let s = sqrt3();
    let (e2, e3, e4) = (e * e, e.powi(3), e.powi(4));
    let (r2, r3, r4) = (r * r, r.powi(3), r.powi(4));
    -(576.0 * r4 * e4 - 1152.0 * r2 * e4 + 37.0 * r4 + 224.0 * s * r3 * e + 864.0 * r2 * e2
        - 384.0 * e4
        - 336.0 * r3
        - 576.0 * s * r2 * e
        + 768.0 * s * e3
        + 432.0 * r2
        - 1728.0 * e2
        + 576.0 * s * e
        - 216.0)
        / (216.0 * r2 * seg_d(e))
}

fn s33(r: f64, e: f64) -> f64 {
    let s = sqrt3();
    let (e2, e3, e4) = (e * e, e.powi(3), e.powi(4));
    let r2 = r * r;
    (576.0 * r2 * e4 + 3072.0 * r * e4 - 1536.0 * s * r * e3 + 3456.0 * e4
        - 2304.0 * s * e3
        - 37.0 * r2
        - 224.0 * s * r * e
        + 864.0 * e2
        + 336.0 * r
        + 576.0 * s * e
        - 432.0)
        / (216.0 * seg_d(e))
}

fn s34(r: f64, e: f64) -> f64 {
    let s = sqrt3();
    let (e2, e3, e4) = (e * e, e.powi(3), e.powi(4));
    let (r2, r3, r4) = (r * r, r.powi(3), r.powi(4));
    (192.0 * r4 * e4 + 1024.0 * r3 * e4 - 512.0 * s * r3 * e3 + 1152.0 * r2 * e4
        - 768.0 * s * r2 * e3
        + 9.0 * r4
        + 96.0 * s * r3 * e
        + 288.0 * r2 * e2
        - 144.0 * r3
        - 576.0 * s * r2 * e
        + 720.0 * r2
        + 1152.0 * s * r * e
        - 1152.0 * r
        - 576.0 * s * e
        + 540.0)
        / (72.0 * r2 * seg_d(e))
}

// Used for ε in [√3/6, √3/5), where √3/(2ε) − 1 lies above 3/2 and both
// corrections are active at once.
fn s3_overlap(r: f64, e: f64) -> f64 {
    s23(r, e) + s34(r, e) - s33(r, e)
}

// Pieces with a power of q = 3ε − √3 in the denominator are kept as
// polynomials in q; expanded in ε they cancel badly as ε nears √3/3.
fn s41(r: f64, e: f64) -> f64 {
    let s = sqrt3();
    let q = 3.0 * e - s;
    let num = -18.0 * (r - 1.0).powi(2)
        + q * (-8.0 * s * (r - 1.0) * (r + 3.0) + q * (-3.0 * r * r - 16.0 * r + 30.0));
    num / (54.0 * q * q)
}

fn s42(r: f64, e: f64) -> f64 {
    let s = sqrt3();
    let q = 3.0 * e - s;
    let (r2, r1) = (r * r, r - 1.0);
    let c4 = -3.0 * r2 * r2 - 16.0 * r2 * r + 30.0 * r2 + 16.0;
    let c3 = -8.0 * s * r1 * r1 * (r + 2.0).powi(2);
    let c2 = -18.0 * (r - 2.0) * r1 * r1 * (r + 2.0);
    let c1 = 24.0 * s * r1.powi(3);
    let c0 = 9.0 * r1.powi(4);
    let num = c0 + q * (c1 + q * (c2 + q * (c3 + q * c4)));
    num / (54.0 * q.powi(4) * r2)
}

/// Segregation pieces for the ε regime containing `eps`, as
/// `(upper breakpoint, piece)` in increasing order.
pub fn segregation_pieces(eps: f64) -> Vec<(f64, Piece)> {
    let s = sqrt3();
    let inf = f64::INFINITY;
    let top = s / (2.0 * eps);
    if eps < s / 8.0 {
        vec![
            (1.5 - s * eps, s11),
            (1.5, s12),
            (2.0 - 4.0 * eps / s, s13),
            (2.0, s14),
            (top - 1.0, s15),
            (top, s16),
            (inf, one),
        ]
    } else if eps < s / 6.0 {
        vec![
            (1.5 - s * eps, s11),
            (2.0 - 4.0 * eps / s, s12),
            (1.5, s23),
            (2.0, s14),
            (top - 1.0, s15),
            (top, s16),
            (inf, one),
        ]
    } else if eps < s / 4.0 {
        if top - 1.0 > 1.5 {
            vec![
                (2.0 - 4.0 * eps / s, s12),
                (1.5, s23),
                (top - 1.0, s3_overlap),
                (2.0, s34),
                (top, s16),
                (inf, one),
            ]
        } else {
            vec![
                (2.0 - 4.0 * eps / s, s12),
                (top - 1.0, s23),
                (1.5, s33),
                (2.0, s34),
                (top, s16),
                (inf, one),
            ]
        }
    } else {
        vec![(3.0 - 2.0 * s * eps, s41), (s / eps - 2.0, s42), (inf, one)]
    }
}

// Association pieces. `d` is (6ε+√3)²(6ε−√3)².

fn assoc_d(e: f64) -> f64 {
    let s = sqrt3();
    let x = (6.0 * e + s) * (6.0 * e - s);
    x * x
}

fn a11(r: f64, e: f64) -> f64 {
    let s = sqrt3();
    let (e2, e3, e4) = (e * e, e.powi(3), e.powi(4));
    let (r2, r3, r4) = (r * r, r.powi(3), r.powi(4));
    -(3456.0 * e4 * r4 + 9216.0 * e4 * r3
        - 3072.0 * s * e3 * r4
        - 17280.0 * e4 * r2
        - 3072.0 * s * e3 * r3
        + 2304.0 * e2 * r4
        + 4608.0 * s * e3 * r2
        - 2304.0 * e2 * r3
        + 6336.0 * e4
        + 6144.0 * s * e3 * r
        + 6912.0 * e2 * r2
        + 512.0 * s * e * r3
        - 101.0 * r4
        - 6144.0 * s * e3
        - 11520.0 * e2 * r
        - 1536.0 * s * e * r2
        + 256.0 * r3
        + 5760.0 * e2
        + 1536.0 * s * e * r
        - 384.0 * r2
        - 512.0 * s * e
        + 256.0 * r
        - 64.0)
        / (24.0 * assoc_d(e) * r2)
}

fn a12(r: f64, e: f64) -> f64 {
    let s = sqrt3();
    let (e2, e3, e4) = (e * e, e.powi(3), e.powi(4));
    let (r2, r4) = (r * r, r.powi(4));
    -(1728.0 * e4 * r4 - 1536.0 * s * e3 * r4 - 31104.0 * e4 * r2
        + 1152.0 * e2 * r4
        + 15552.0 * e4
        + 10368.0 * e2 * r2
        - 37.0 * r4
        - 20736.0 * e2 * r
        + 10368.0 * e2)
        / (24.0 * assoc_d(e) * r2)
}

// Checked against direct integration of the catch probability; equals
// a12 + a22 − a11, as the breakpoint structure requires.
fn a13(r: f64, e: f64) -> f64 {
    let s = sqrt3();
    let (e2, e3, e4) = (e * e, e.powi(3), e.powi(4));
    let (r2, r3, r4) = (r * r, r.powi(3), r.powi(4));
    (-2592.0 * e4 * r4 + 46656.0 * e4 * r2 - 10656.0 * e4
        + 2304.0 * s * e3 * r4
        + 9216.0 * s * e3 * r
        - 12288.0 * s * e3
        - 1728.0 * e2 * r4
        - 9072.0 * e2 * r2
        + 13824.0 * e2 * r
        - 4032.0 * e2
        + 432.0 * s * e * r3
        - 1728.0 * s * e * r2
        + 2304.0 * s * e * r
        - 1024.0 * s * e
        + 15.0 * r4
        + 216.0 * r3
        - 432.0 * r2
        + 384.0 * r
        - 128.0)
        / (36.0 * assoc_d(e) * r2)
}

fn a14(r: f64, e: f64) -> f64 {
    let s = sqrt3();
    let (e2, e3, e4) = (e * e, e.powi(3), e.powi(4));
    let (r2, r4) = (r * r, r.powi(4));
    -(1728.0 * e4 * r4 - 1536.0 * s * e3 * r4 - 31104.0 * e4 * r2 + 1152.0 * e2 * r4 - 5184.0 * e4
        + 2592.0 * e2 * r2
        - 37.0 * r4
        - 3456.0 * e2)
        / (24.0 * assoc_d(e) * r2)
}

fn a15(r: f64, e: f64) -> f64 {
    let (e2, e4) = (e * e, e.powi(4));
    let (r2, r4) = (r * r, r.powi(4));
    9.0 * (1152.0 * e4 * r2 + 192.0 * e4 - 192.0 * e2 * r2 - r4 + 128.0 * e2 + 32.0 * r2 - 64.0 * r
        + 36.0)
        / (8.0 * assoc_d(e) * r2)
}

// a15 plus the increment 9(r+6)(r−2)³ / (8 d r²) picked up at r = 2; at ε = 0
// this is 1 − 3/(2r²).
fn a16(r: f64, e: f64) -> f64 {
    let (e2, e4, r2) = (e * e, e.powi(4), r * r);
    9.0 * (1152.0 * e4 * r2 + 192.0 * e4 - 192.0 * e2 * r2 + 128.0 * e2 + 8.0 * r2 - 12.0)
        / (8.0 * assoc_d(e) * r2)
}

fn a22(r: f64, e: f64) -> f64 {
    let s = sqrt3();
    let (e2, e3, e4) = (e * e, e.powi(3), e.powi(4));
    let (r2, r3, r4) = (r * r, r.powi(3), r.powi(4));
    (-3456.0 * e2 * r4 + 111.0 * r4 - 5184.0 * e4 * r4 + 4608.0 * s * e3 * r4
        - 336.0 * s * e * r3
        - 168.0 * r3
        - 13824.0 * e4 * r3
        + 4608.0 * s * e3 * r3
        + 3456.0 * e2 * r3
        + 144.0 * r2
        - 6912.0 * s * e3 * r2
        - 3888.0 * e2 * r2
        + 576.0 * s * e * r2
        + 25920.0 * e4 * r2
        + 3168.0 * e4
        + 2880.0 * e2
        - 256.0 * s * e
        - 32.0
        - 3072.0 * s * e3)
        / (36.0 * assoc_d(e) * r2)
}

fn a31(r: f64, _e: f64) -> f64 {
    (2.0 * r * r - 1.0) / (6.0 * r * r)
}

fn a32(r: f64, e: f64) -> f64 {
    let s = sqrt3();
    let q = 3.0 * e - s;
    let r2 = r * r;
    let c4 = 8.0 * (6.0 * r2 * r2 + 16.0 * r2 * r + 18.0 * r2 - 5.0);
    let c3 = 96.0 * s * (r + 1.0).powi(2) * (2.0 * r - 1.0);
    let c2 = 648.0 * (r2 - 1.0);
    let num = -729.0 + q * (-648.0 * s + q * (c2 + q * (c3 + q * c4)));
    num / (144.0 * q.powi(4) * r2)
}

fn a33(r: f64, e: f64) -> f64 {
    let s = sqrt3();
    let q = 3.0 * e - s;
    let r2 = r * r;
    let num = -81.0 + q * (-12.0 * s + q * (18.0 * r2 - 5.0));
    num / (18.0 * q * q * r2)
}

/// Association pieces for the ε regime containing `eps`.
pub fn association_pieces(eps: f64) -> Vec<(f64, Piece)> {
    let s = sqrt3();
    let b1 = (1.0 + 2.0 * s * eps) / (1.0 - s * eps);
    let b2 = 4.0 * (1.0 - s * eps) / 3.0;
    let b3 = 4.0 * (1.0 + 2.0 * s * eps) / 3.0;
    let b4 = 3.0 / (2.0 * (1.0 - s * eps));
    let inf = f64::INFINITY;
    let regime_split = (7.0 * s - 3.0 * 15f64.sqrt()) / 12.0;
    if eps < regime_split {
        vec![
            (b1, a11),
            (b2, a12),
            (b3, a13),
            (b4, a14),
            (2.0, a15),
            (inf, a16),
        ]
    } else if eps < s / 12.0 {
        vec![
            (b2, a11),
            (b1, a22),
            (b3, a13),
            (b4, a14),
            (2.0, a15),
            (inf, a16),
        ]
    } else {
        vec![
            ((1.0 + 2.0 * s * eps) / (2.0 * (1.0 - s * eps)), a31),
            (b4, a32),
            (inf, a33),
        ]
    }
}

/// `μ_S(r, ε)`; `eps = 0` gives the null mean.
pub fn mu_segregation(r: RFactor, eps: f64) -> Result<f64, AltError> {
    check_eps(eps)?;
    if eps == 0.0 {
        return Ok(mu_null(r));
    }
    if r.is_infinite() {
        return Ok(1.0);
    }
    let r = r.value();
    Ok(pick(r, &segregation_pieces(eps))(r, eps))
}

/// `μ_A(r, ε)`; `eps = 0` gives the null mean.
pub fn mu_association(r: RFactor, eps: f64) -> Result<f64, AltError> {
    check_eps(eps)?;
    if eps == 0.0 {
        return Ok(mu_null(r));
    }
    if r.is_infinite() {
        return Ok(1.0);
    }
    let r = r.value();
    Ok(pick(r, &association_pieces(eps))(r, eps))
}

/// The piece that holds `r` for every sufficiently small ε > 0. Its formula
/// is smooth in ε at 0, so it can be differentiated there.
pub fn piece_near_null(kind: AltKind, r: f64) -> Piece {
    const PROBE: f64 = 1e-10;
    match kind {
        AltKind::Segregation => pick(r, &segregation_pieces(PROBE)),
        AltKind::Association => pick(r, &association_pieces(PROBE)),
    }
}

/// The ε value where the closed-form segregation variance is available.
pub fn seg_closed_form_eps() -> f64 {
    sqrt3() / 4.0
}

/// The ε value where the closed-form association variance is available.
pub fn assoc_closed_form_eps() -> f64 {
    sqrt3() / 12.0
}

fn horner(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().fold(0.0, |acc, &c| acc * x + c)
}

/// `ν_S(r, √3/4)`. Zero for `r ≥ 2`, where the digraph is complete.
///
/// On `[3/2, 2)` the variance comes from [`numeric::variance`]; the closed
/// form quoted for that range fails to vanish at `r = 2` and turns negative
/// just above `3/2`.
pub fn nu_segregation_s34(r: RFactor) -> f64 {
    if r.is_infinite() || r.value() >= 2.0 {
        return 0.0;
    }
    let r = r.value();
    const B1: [f64; 8] = [
        14285.0, -28224.0, -233266.0, 1106688.0, -2021199.0, 1876608.0, -880794.0, 165888.0,
    ];
    const B2: [f64; 11] = [
        14285.0,
        -28224.0,
        -233266.0,
        1106688.0,
        -1234767.0,
        -3431808.0,
        14049126.0,
        -22228992.0,
        18895680.0,
        -8503056.0,
        1594323.0,
    ];
    const B3: [f64; 11] = [
        14285.0,
        -28224.0,
        -233266.0,
        1106688.0,
        -2545713.0,
        5903280.0,
        -13456044.0,
        20636208.0,
        -18305190.0,
        8503056.0,
        -1594323.0,
    ];
    const B4: [f64; 11] = [
        1909.0,
        -27072.0,
        104920.0,
        -111072.0,
        1992132.0,
        -15844032.0,
        50174640.0,
        -81881280.0,
        73220760.0,
        -34012224.0,
        6377292.0,
    ];
    if r < 9.0 / 8.0 {
        -horner(&B1, r) / (3645.0 * r)
    } else if r < 9.0 / 7.0 {
        -horner(&B2, r) / (3645.0 * r.powi(4))
    } else if r < 4.0 / 3.0 {
        -horner(&B3, r) / (3645.0 * r.powi(4))
    } else if r < 1.5 {
        horner(&B4, r) / (14580.0 * r.powi(4))
    } else {
        let spec = AltSpec::segregation(seg_closed_form_eps()).expect("valid ε");
        numeric::variance(
            &spec,
            RFactor::new(r).expect("r ≥ 1"),
            numeric::DEFAULT_RESOLUTION,
        )
    }
}

/// `ν_A(r, √3/12)`.
pub fn nu_association_s312(r: RFactor) -> f64 {
    if r.is_infinite() {
        return 0.0;
    }
    let r = r.value();
    const C1: [f64; 13] = [
        10.0, -96.0, 240.0, 192.0, -1830.0, 3360.0, -2650.0, 240.0, 1383.0, -1280.0, 540.0, -144.0,
        35.0,
    ];
    const C2: [f64; 13] = [
        10.0, -96.0, 240.0, 192.0, -1670.0, 2784.0, -2650.0, 2400.0, -1047.0, -1280.0, 1269.0,
        -144.0, 35.0,
    ];
    const C3: [f64; 5] = [537.0, 0.0, -683.0, -2448.0, 1315.0];
    let r6 = r.powi(6);
    let v = if r < 1.5 {
        horner(&C1, r) / (405.0 * r6)
    } else if r < 2.0 {
        horner(&C2, r) / (405.0 * r6)
    } else {
        horner(&C3, r) / (405.0 * r6)
    };
    // the r = 1 numerator cancels exactly; keep rounding from going negative
    v.max(0.0)
}

/// Closed-form alternative variance where one exists.
pub fn nu_closed_form(spec: &AltSpec, r: RFactor) -> Result<f64, AltError> {
    let tol = 1e-15;
    match spec.kind {
        AltKind::Segregation if (spec.eps - seg_closed_form_eps()).abs() < tol => {
            Ok(nu_segregation_s34(r))
        }
        AltKind::Association if (spec.eps - assoc_closed_form_eps()).abs() < tol => {
            Ok(nu_association_s312(r))
        }
        kind => Err(AltError::NoClosedForm {
            kind,
            eps: spec.eps,
        }),
    }
}

/// The r beyond which the segregation digraph is complete almost surely.
pub fn r_degenerate(eps: f64) -> Result<f64, AltError> {
    if !(eps > 0.0 && eps < eps_max()) {
        return Err(AltError::EpsOutOfRange(eps));
    }
    let s = sqrt3();
    Ok(if eps <= s / 4.0 {
        s / (2.0 * eps)
    } else {
        s / eps - 2.0
    })
}

/// Whether the alternative variance is positive at `r`.
pub fn alt_nondegenerate(r: RFactor, spec: &AltSpec) -> bool {
    if r.is_infinite() {
        return false;
    }
    let r = r.value();
    match spec.kind {
        AltKind::Segregation => r < r_degenerate(spec.eps).expect("validated ε"),
        AltKind::Association => r > 1.0 || spec.eps < assoc_closed_form_eps(),
    }
}

/// Mean and variance by numerical integration of the exact catch areas.
///
/// The support is cut into convex cells, each inside one vertex region. For
/// a point `x`, the areas of `N^r(x)` and of `Γ1(x) = {z : x ∈ N^r(z)}`
/// within the support are exact: both are unions of cells clipped by one
/// half-plane. Only the outer integral over `x` is numerical, a centroid
/// lattice on each cell, so the error is `O(resolution⁻²)`.
pub mod numeric {
    use rayon::prelude::*;

    use super::*;

    /// Lattice subdivisions across the support.
    pub const DEFAULT_RESOLUTION: usize = 800;

    type Poly = Vec<[f64; 3]>;

    struct Support {
        /// `(vertex region, cell)` pairs.
        cells: Vec<(usize, Poly)>,
        area: f64,
    }

    impl Support {
        fn new(kind: AltKind, eps: f64) -> Self {
            let h = sqrt3() / 2.0;
            let depth = match kind {
                AltKind::Segregation => eps / h,
                AltKind::Association => 2.0 / 3.0 - eps / h,
            };
            let t = 1.0 - depth;
            let triangle = vec![[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
            let mut cells = Vec::new();
            for j in 0..3 {
                let mut region = triangle.clone();
                for m in (0..3).filter(|&m| m != j) {
                    region = clip(&region, |b| b[j] - b[m]);
                }
                match kind {
                    AltKind::Segregation => {
                        let mut cell = region;
                        for m in 0..3 {
                            cell = clip(&cell, |b| t - b[m]);
                        }
                        cells.push((j, cell));
                    }
                    AltKind::Association => {
                        // corner k minus the corners already taken
                        for k in 0..3 {
                            let mut cell = clip(&region, |b| b[k] - t);
                            for m in 0..k {
                                cell = clip(&cell, |b| t - b[m]);
                            }
                            cells.push((j, cell));
                        }
                    }
                }
            }
            cells.retain(|(_, c)| c.len() >= 3);
            let area = cells.iter().map(|(_, c)| poly_area(c)).sum();
            Support { cells, area }
        }

        /// `∫_support f` in units of the triangle's area.
        fn integrate(&self, resolution: usize, f: &(dyn Fn([f64; 3]) -> f64 + Sync)) -> f64 {
            let mut total = 0.0;
            for (_, cell) in &self.cells {
                for w in 1..cell.len() - 1 {
                    let tri = [cell[0], cell[w], cell[w + 1]];
                    let frac = poly_area(&tri);
                    if frac <= 0.0 {
                        continue;
                    }
                    let m =
                        ((resolution as f64 * (frac / self.area).sqrt()).ceil() as usize).max(4);
                    total += lattice(m, &tri, f) * frac;
                }
            }
            total
        }

        fn out_area(&self, r: f64, b: &[f64; 3]) -> f64 {
            let j = dominant(b);
            let floor = 1.0 - r * (1.0 - b[j]);
            if floor <= 0.0 {
                return self.area;
            }
            self.cells
                .iter()
                .map(|(_, c)| poly_area(&clip(c, |z| z[j] - floor)))
                .sum()
        }

        fn in_area(&self, r: f64, b: &[f64; 3]) -> f64 {
            let mut total = 0.0;
            for (k, cell) in &self.cells {
                let ceiling = 1.0 - (1.0 - b[*k]) / r;
                total += poly_area(&clip(cell, |z| ceiling - z[*k]));
            }
            total
        }
    }

    // Sutherland–Hodgman: keeps the part of a convex polygon where g ≥ 0.
    fn clip(poly: &[[f64; 3]], g: impl Fn(&[f64; 3]) -> f64) -> Poly {
        let mut out = Vec::with_capacity(poly.len() + 1);
        for i in 0..poly.len() {
            let (a, b) = (poly[i], poly[(i + 1) % poly.len()]);
            let (ga, gb) = (g(&a), g(&b));
            if ga >= 0.0 {
                out.push(a);
            }
            if (ga >= 0.0) != (gb >= 0.0) {
                let t = ga / (ga - gb);
                out.push([0, 1, 2].map(|k| a[k] + t * (b[k] - a[k])));
            }
        }
        out
    }

    // As a fraction of the triangle's area.
    fn poly_area(poly: &[[f64; 3]]) -> f64 {
        if poly.len() < 3 {
            return 0.0;
        }
        let mut twice = 0.0;
        for i in 0..poly.len() {
            let (p, q) = (poly[i], poly[(i + 1) % poly.len()]);
            twice += p[1] * q[2] - q[1] * p[2];
        }
        twice.abs()
    }

    // Mean of f over a triangle, from the centroids of its m² congruent
    // sub-triangles.
    fn lattice(m: usize, tri: &[[f64; 3]; 3], f: &(dyn Fn([f64; 3]) -> f64 + Sync)) -> f64 {
        let inv = 1.0 / m as f64;
        let sum: f64 = (0..m)
            .into_par_iter()
            .map(|i| {
                let mut row = 0.0;
                for j in 0..m - i {
                    for (off, limit) in [(1.0 / 3.0, m - i), (2.0 / 3.0, m - i - 1)] {
                        if j >= limit {
                            continue;
                        }
                        let u = (i as f64 + off) * inv;
                        let v = (j as f64 + off) * inv;
                        let w = 1.0 - u - v;
                        row += f([0, 1, 2].map(|k| w * tri[0][k] + u * tri[1][k] + v * tri[2][k]));
                    }
                }
                row
            })
            .collect::<Vec<_>>()
            .iter()
            .sum();
        sum * inv * inv
    }

    fn dominant(b: &[f64; 3]) -> usize {
        let mut j = 0;
        for k in 1..3 {
            if b[k] > b[j] {
                j = k;
            }
        }
        j
    }

    /// `μ_·(r, ε)` by integration.
    pub fn mean(spec: &AltSpec, r: RFactor, resolution: usize) -> f64 {
        if r.is_infinite() {
            return 1.0;
        }
        let sup = Support::new(spec.kind, spec.eps);
        let (a, r) = (sup.area, r.value());
        sup.integrate(resolution, &|b| sup.out_area(r, &b)) / (a * a)
    }

    /// `ν_·(r, ε) = Cov[h12, h13]` by integration.
    pub fn variance(spec: &AltSpec, r: RFactor, resolution: usize) -> f64 {
        if r.is_infinite() {
            return 0.0;
        }
        let sup = Support::new(spec.kind, spec.eps);
        let (a, r) = (sup.area, r.value());
        let g = |b: [f64; 3]| (sup.out_area(r, &b) + sup.in_area(r, &b)) / a;
        let mean = sup.integrate(resolution, &g) / a;
        // centred second pass; the raw second moment loses digits to cancellation
        let var = sup.integrate(resolution, &|b| (g(b) - mean).powi(2)) / a;
        var.max(0.0)
    }
}
