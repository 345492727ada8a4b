//! Seeded samplers and Monte Carlo experiments.
//!
//! Every replicate draws from its own ChaCha8 stream: the generator is
//! seeded from the experiment seed and switched to stream `replicate`, so
//! results do not depend on how replicates are scheduled across threads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::alternatives::{eps_max, AltError, AltKind, AltSpec};
use crate::delaunay::{triangulate, DelaunayError, Triangulation};
use crate::geometry::{key_catches, Point, ProximityKey, RFactor, Triangle};
use crate::normal;
use crate::nulldist::{mu_null, multi_moments, null_moments, MomentPair, Weights};
use crate::pcd::{OutsidePolicy, Partition, PcdError};

/// Smallest segregation acceptance probability the rejection sampler takes on.
pub const MIN_ACCEPTANCE: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum McError {
    #[error("segregation support covers a fraction {0:e} of the triangle; rejection sampling is impractical")]
    AcceptanceTooLow(f64),
    #[error("invalid experiment: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Alt(#[from] AltError),
    #[error(transparent)]
    Delaunay(#[from] DelaunayError),
    #[error(transparent)]
    Pcd(#[from] PcdError),
    #[error("thread pool: {0}")]
    Pool(String),
}

/// A replicate's generator.
pub fn replicate_rng(seed: u64, replicate: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replicate);
    rng
}

fn uniform_barycentric<R: Rng + ?Sized>(rng: &mut R) -> [f64; 3] {
    let s = rng.random::<f64>().sqrt();
    let u = rng.random::<f64>();
    [1.0 - s, s * (1.0 - u), s * u]
}

fn depth_of(eps: f64) -> f64 {
    eps / (3f64.sqrt() / 2.0)
}

/// Barycentric depth `d` of the corners `{b_k ≥ 1 − d}` that segregation
/// removes or association keeps.
pub fn corner_depth(spec: &AltSpec) -> f64 {
    match spec.kind {
        AltKind::Segregation => depth_of(spec.eps),
        AltKind::Association => depth_of(eps_max() - spec.eps),
    }
}

/// Share of the triangle left to segregation data.
pub fn segregation_acceptance(eps: f64) -> f64 {
    let d = depth_of(eps);
    let overlap = (2.0 * d - 1.0).max(0.0);
    1.0 - 3.0 * d * d + 3.0 * overlap * overlap
}

/// Draws barycentric coordinates from the null or an alternative.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Sampler {
    Uniform,
    /// Uniform off the corners `b_k ≥ 1 − depth`, by rejection.
    Segregation {
        depth: f64,
    },
    /// Uniform on the union of the corners `b_k ≥ 1 − depth`.
    Association {
        depth: f64,
    },
}

impl Sampler {
    pub fn new(alt: Option<&AltSpec>) -> Result<Self, McError> {
        Ok(match alt {
            None => Sampler::Uniform,
            Some(spec) if spec.kind == AltKind::Segregation => {
                let acc = segregation_acceptance(spec.eps);
                if acc < MIN_ACCEPTANCE {
                    return Err(McError::AcceptanceTooLow(acc));
                }
                Sampler::Segregation {
                    depth: corner_depth(spec),
                }
            }
            Some(spec) => Sampler::Association {
                depth: corner_depth(spec),
            },
        })
    }

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> [f64; 3] {
        match *self {
            Sampler::Uniform => uniform_barycentric(rng),
            Sampler::Segregation { depth } => loop {
                let b = uniform_barycentric(rng);
                if b.iter().all(|&w| w < 1.0 - depth) {
                    return b;
                }
            },
            Sampler::Association { depth } => loop {
                let k = rng.random_range(0..3);
                let u = uniform_barycentric(rng);
                let mut b = u.map(|w| depth * w);
                b[k] += 1.0 - depth;
                // thin overlaps so the union is covered uniformly
                let cover = b.iter().filter(|&&w| w >= 1.0 - depth).count();
                if cover <= 1 || rng.random_range(0..cover) == 0 {
                    return b;
                }
            },
        }
    }

    /// Whether `b` lies in this sampler's support.
    pub fn supports(&self, b: &[f64; 3]) -> bool {
        let tol = 1e-12;
        let inside = b.iter().all(|&w| w >= -tol);
        match *self {
            Sampler::Uniform => inside,
            Sampler::Segregation { depth } => inside && b.iter().all(|&w| w < 1.0 - depth + tol),
            Sampler::Association { depth } => inside && b.iter().any(|&w| w >= 1.0 - depth - tol),
        }
    }
}

/// `n` uniform points in `tri`.
pub fn sample_null<R: Rng + ?Sized>(tri: &Triangle, n: usize, rng: &mut R) -> Vec<Point> {
    (0..n)
        .map(|_| tri.from_barycentric(uniform_barycentric(rng)))
        .collect()
}

/// `n` points avoiding the corners of height `eps`, measured in the standard
/// triangle and carried to `tri` by barycentric coordinates.
pub fn sample_segregation<R: Rng + ?Sized>(
    tri: &Triangle,
    eps: f64,
    n: usize,
    rng: &mut R,
) -> Result<Vec<Point>, McError> {
    if eps == 0.0 {
        return Ok(sample_null(tri, n, rng));
    }
    let sampler = Sampler::new(Some(&AltSpec::segregation(eps)?))?;
    Ok((0..n)
        .map(|_| tri.from_barycentric(sampler.draw(rng)))
        .collect())
}

/// `n` points in the corners of height `√3/3 − eps`.
pub fn sample_association<R: Rng + ?Sized>(
    tri: &Triangle,
    eps: f64,
    n: usize,
    rng: &mut R,
) -> Result<Vec<Point>, McError> {
    let sampler = Sampler::new(Some(&AltSpec::association(eps)?))?;
    Ok((0..n)
        .map(|_| tri.from_barycentric(sampler.draw(rng)))
        .collect())
}

/// Picks triangle `j` with probability `w_j`, then draws inside it.
pub fn sample_multi<R: Rng + ?Sized>(
    tr: &Triangulation,
    sampler: &Sampler,
    n: usize,
    rng: &mut R,
) -> Vec<Point> {
    let cumulative: Vec<f64> = tr
        .area_fractions()
        .iter()
        .scan(0.0, |acc, w| {
            *acc += w;
            Some(*acc)
        })
        .collect();
    let last = cumulative.len() - 1;
    (0..n)
        .map(|_| {
            let u = rng.random::<f64>() * cumulative[last];
            let j = cumulative.partition_point(|&c| c <= u).min(last);
            tr.triangles()[j].from_barycentric(sampler.draw(rng))
        })
        .collect()
}

/// Data-generating hypothesis of an experiment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "mode", content = "eps")]
pub enum Mode {
    Null,
    Segregation(f64),
    Association(f64),
}

impl Mode {
    fn spec(&self) -> Result<Option<AltSpec>, McError> {
        Ok(match *self {
            Mode::Null => None,
            Mode::Segregation(eps) => Some(AltSpec::segregation(eps)?),
            Mode::Association(eps) => Some(AltSpec::association(eps)?),
        })
    }
}

/// Where the data live.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Region {
    StandardTriangle,
    /// The Delaunay triangles of these anchor points.
    Anchors(Vec<Point>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub mode: Mode,
    pub n: usize,
    pub reps: usize,
    pub r_grid: Vec<RFactor>,
    pub alpha: f64,
    pub seed: u64,
    pub region: Region,
    /// Worker threads; `None` uses rayon's default.
    pub threads: Option<usize>,
    /// Also compute critical values from a null run with the same seed.
    pub empirical_critical: bool,
    /// Keep every replicate's ρ in the result.
    pub keep_samples: bool,
}

impl ExperimentConfig {
    pub fn new(mode: Mode, n: usize, reps: usize, r_grid: Vec<RFactor>, seed: u64) -> Self {
        ExperimentConfig {
            mode,
            n,
            reps,
            r_grid,
            alpha: 0.05,
            seed,
            region: Region::StandardTriangle,
            threads: None,
            empirical_critical: false,
            keep_samples: false,
        }
    }

    fn validate(&self) -> Result<(), McError> {
        let bad = |m: &str| Err(McError::InvalidConfig(m.to_string()));
        if self.reps < 1 {
            return bad("reps must be at least 1");
        }
        if self.n < 2 {
            return bad("n must be at least 2");
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return bad("alpha must lie in (0, 1)");
        }
        if self.r_grid.is_empty() {
            return bad("empty r grid");
        }
        if self.threads == Some(0) {
            return bad("threads must be positive");
        }
        self.mode.spec()?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RSummary {
    pub r: RFactor,
    /// Null moments used for standardization.
    pub mu: f64,
    pub nu: f64,
    pub mean: f64,
    pub variance: f64,
    pub se_mean: f64,
    /// `n` times the sample variance, comparable with `nu`.
    pub n_variance: f64,
    /// Share of replicates with `z > z_{1−α}`.
    pub reject_upper: Option<f64>,
    /// Share of replicates with `z < z_α`.
    pub reject_lower: Option<f64>,
    /// Rejection share for the mode's own direction; both tails are
    /// reported separately for the null.
    pub power: Option<f64>,
    pub se_power: Option<f64>,
    pub empirical_upper: Option<f64>,
    pub empirical_lower: Option<f64>,
    pub empirical_power: Option<f64>,
    pub samples: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub config: ExperimentConfig,
    /// Triangle count of the region.
    pub triangles: usize,
    pub weights: Vec<f64>,
    pub per_r: Vec<RSummary>,
}

struct Setting {
    tr: Option<Triangulation>,
    standard: Triangle,
    weights: Weights,
}

impl Setting {
    fn new(region: &Region) -> Result<Self, McError> {
        Ok(match region {
            Region::StandardTriangle => Setting {
                tr: None,
                standard: Triangle::standard(),
                weights: Weights::single(),
            },
            Region::Anchors(ys) => {
                let tr = triangulate(ys)?;
                let weights = tr.weights()?;
                Setting {
                    tr: Some(tr),
                    standard: Triangle::standard(),
                    weights,
                }
            }
        })
    }

    fn replicate(
        &self,
        sampler: &Sampler,
        n: usize,
        rng: &mut ChaCha8Rng,
    ) -> Result<Partition, McError> {
        Ok(match &self.tr {
            None => {
                let xs = (0..n)
                    .map(|_| self.standard.from_barycentric(sampler.draw(rng)))
                    .collect();
                Partition::single(&self.standard, xs)
            }
            Some(tr) => {
                let xs = sample_multi(tr, sampler, n, rng);
                Partition::new(tr, &xs, OutsidePolicy::Reject)?
            }
        })
    }
}

/// Relative densities, indexed `[replicate][r]`.
fn densities(
    setting: &Setting,
    sampler: &Sampler,
    cfg: &ExperimentConfig,
) -> Result<Vec<Vec<f64>>, McError> {
    let denom = (cfg.n * (cfg.n - 1)) as f64;
    (0..cfg.reps)
        .into_par_iter()
        .map(|rep| {
            let mut rng = replicate_rng(cfg.seed, rep as u64);
            let part = setting.replicate(sampler, cfg.n, &mut rng)?;
            Ok(cfg
                .r_grid
                .iter()
                .map(|&r| part.digraph(r).total_arcs as f64 / denom)
                .collect())
        })
        .collect()
}

fn mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = if xs.len() > 1 {
        xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (mean, var)
}

// Order statistic at probability p (the ⌈p·m⌉-th smallest).
fn order_statistic(sorted: &[f64], p: f64) -> f64 {
    let m = sorted.len();
    let k = ((p * m as f64).ceil() as usize).clamp(1, m);
    sorted[k - 1]
}

fn share(xs: &[f64], pred: impl Fn(f64) -> bool) -> f64 {
    xs.iter().filter(|&&x| pred(x)).count() as f64 / xs.len() as f64
}

/// Runs the experiment; identical configs give identical results for any
/// number of threads.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentResult, McError> {
    cfg.validate()?;
    let setting = Setting::new(&cfg.region)?;
    let spec = cfg.mode.spec()?;
    let sampler = Sampler::new(spec.as_ref())?;
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(t) = cfg.threads {
        pool = pool.num_threads(t);
    }
    let pool = pool.build().map_err(|e| McError::Pool(e.to_string()))?;

    let (rho, null_rho) = pool.install(|| -> Result<_, McError> {
        let rho = densities(&setting, &sampler, cfg)?;
        let null_rho = if cfg.empirical_critical {
            Some(if cfg.mode == Mode::Null {
                rho.clone()
            } else {
                densities(&setting, &Sampler::Uniform, cfg)?
            })
        } else {
            None
        };
        Ok((rho, null_rho))
    })?;

    let root_n = (cfg.n as f64).sqrt();
    let z_upper = normal::phi_inv(1.0 - cfg.alpha).expect("alpha validated");
    let z_lower = normal::phi_inv(cfg.alpha).expect("alpha validated");
    let reps = cfg.reps as f64;
    let per_r = cfg
        .r_grid
        .iter()
        .enumerate()
        .map(|(i, &r)| {
            let column: Vec<f64> = rho.iter().map(|row| row[i]).collect();
            let moments: MomentPair = multi_moments(null_moments(r), &setting.weights);
            let (mean, variance) = mean_var(&column);
            let (reject_upper, reject_lower) = if moments.is_degenerate() {
                (None, None)
            } else {
                let sd = moments.avar.sqrt();
                let z = |x: f64| root_n * (x - moments.mean) / sd;
                (
                    Some(share(&column, |x| z(x) > z_upper)),
                    Some(share(&column, |x| z(x) < z_lower)),
                )
            };
            let (empirical_upper, empirical_lower) = match &null_rho {
                Some(null) => {
                    let mut col: Vec<f64> = null.iter().map(|row| row[i]).collect();
                    col.sort_by(f64::total_cmp);
                    (
                        Some(order_statistic(&col, 1.0 - cfg.alpha)),
                        Some(order_statistic(&col, cfg.alpha)),
                    )
                }
                None => (None, None),
            };
            let (power, empirical_power) = match cfg.mode {
                Mode::Null => (None, None),
                Mode::Segregation(_) => (
                    reject_upper,
                    empirical_upper.map(|c| share(&column, |x| x > c)),
                ),
                Mode::Association(_) => (
                    reject_lower,
                    empirical_lower.map(|c| share(&column, |x| x < c)),
                ),
            };
            RSummary {
                r,
                mu: moments.mean,
                nu: moments.avar,
                mean,
                variance,
                se_mean: (variance / reps).sqrt(),
                n_variance: cfg.n as f64 * variance,
                reject_upper,
                reject_lower,
                power,
                se_power: power.map(|p| (p * (1.0 - p) / reps).sqrt()),
                empirical_upper,
                empirical_lower,
                empirical_power,
                samples: cfg.keep_samples.then_some(column),
            }
        })
        .collect();
    Ok(ExperimentResult {
        config: cfg.clone(),
        triangles: setting.weights.len(),
        weights: setting.weights.values().to_vec(),
        per_r,
    })
}

/// Monte Carlo estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub se: f64,
}

impl Estimate {
    fn from_samples(xs: &[f64]) -> Self {
        let (mean, var) = mean_var(xs);
        Estimate {
            value: mean,
            se: (var / xs.len() as f64).sqrt(),
        }
    }
}

/// The three joint catch probabilities of a uniform triple and the
/// covariance they imply.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TripleProbabilities {
    /// `P({X2, X3} ⊂ N(X1))`.
    pub p2n: Estimate,
    /// `P(X2 ∈ N(X1), X1 ∈ N(X3))`.
    pub pm: Estimate,
    /// `P(X1 ∈ N(X2) ∩ N(X3))`.
    pub p2g: Estimate,
    /// `P2N + 2 PM + P2G − 4 μ(r)²`.
    pub cov: Estimate,
}

fn draw_keys(tri: &Triangle, sampler: &Sampler, rng: &mut ChaCha8Rng) -> [ProximityKey; 3] {
    std::array::from_fn(|_| ProximityKey::new(tri, tri.from_barycentric(sampler.draw(rng))))
}

// Indicator rows (2N, M, M', 2G) for `chunk` triples from one stream.
fn triple_indicators(r: RFactor, sampler: &Sampler, seed: u64, reps: usize) -> Vec<[f64; 4]> {
    const CHUNK: usize = 4096;
    let tri = Triangle::standard();
    let chunks = reps.div_ceil(CHUNK);
    (0..chunks)
        .into_par_iter()
        .flat_map_iter(|c| {
            let mut rng = replicate_rng(seed, c as u64);
            let len = CHUNK.min(reps - c * CHUNK);
            (0..len)
                .map(|_| {
                    let [x1, x2, x3] = draw_keys(&tri, sampler, &mut rng);
                    let n = |a: &ProximityKey, b: &ProximityKey| key_catches(r, a, b, false);
                    let f = |b: bool| if b { 1.0 } else { 0.0 };
                    [
                        f(n(&x1, &x2) && n(&x1, &x3)),
                        f(n(&x1, &x2) && n(&x3, &x1)),
                        f(n(&x1, &x3) && n(&x2, &x1)),
                        f(n(&x2, &x1) && n(&x3, &x1)),
                    ]
                })
                .collect::<Vec<_>>()
        })
        .collect()
}

/// Estimates the triple probabilities under the null in the standard
/// triangle; `reps` triples.
pub fn estimate_triple_probabilities(
    r: RFactor,
    reps: usize,
    seed: u64,
) -> Result<TripleProbabilities, McError> {
    if reps < 2 {
        return Err(McError::InvalidConfig("need at least 2 triples".into()));
    }
    let rows = triple_indicators(r, &Sampler::Uniform, seed, reps);
    let col = |k: usize| -> Vec<f64> { rows.iter().map(|row| row[k]).collect() };
    let mu = mu_null(r);
    let pm: Vec<f64> = rows.iter().map(|row| 0.5 * (row[1] + row[2])).collect();
    let cov: Vec<f64> = rows
        .iter()
        .map(|row| row.iter().sum::<f64>() - 4.0 * mu * mu)
        .collect();
    Ok(TripleProbabilities {
        p2n: Estimate::from_samples(&col(0)),
        pm: Estimate::from_samples(&pm),
        p2g: Estimate::from_samples(&col(3)),
        cov: Estimate::from_samples(&cov),
    })
}

/// `ν_·(r, ε) = Cov[h12, h13]` estimated from `reps` triples drawn from the
/// alternative, with the mean also estimated from the same triples.
pub fn estimate_alt_variance(
    r: RFactor,
    spec: &AltSpec,
    reps: usize,
    seed: u64,
) -> Result<Estimate, McError> {
    if reps < 2 {
        return Err(McError::InvalidConfig("need at least 2 triples".into()));
    }
    let sampler = Sampler::new(Some(spec))?;
    let tri = Triangle::standard();
    const CHUNK: usize = 4096;
    let chunks = reps.div_ceil(CHUNK);
    // h12 and h13 for each triple
    let pairs: Vec<(f64, f64)> = (0..chunks)
        .into_par_iter()
        .flat_map_iter(|c| {
            let mut rng = replicate_rng(seed, c as u64);
            let len = CHUNK.min(reps - c * CHUNK);
            (0..len)
                .map(|_| {
                    let [x1, x2, x3] = draw_keys(&tri, &sampler, &mut rng);
                    let n = |a: &ProximityKey, b: &ProximityKey| {
                        if key_catches(r, a, b, false) {
                            1.0
                        } else {
                            0.0
                        }
                    };
                    (n(&x1, &x2) + n(&x2, &x1), n(&x1, &x3) + n(&x3, &x1))
                })
                .collect::<Vec<_>>()
        })
        .collect();
    let m = pairs.len() as f64;
    let h_mean = pairs.iter().map(|(a, b)| a + b).sum::<f64>() / (2.0 * m);
    // influence terms of Cov = E[h12 h13] − (E h)²
    let phi: Vec<f64> = pairs
        .iter()
        .map(|(a, b)| a * b - h_mean * (a + b))
        .collect();
    let prod = pairs.iter().map(|(a, b)| a * b).sum::<f64>() / m;
    let se = Estimate::from_samples(&phi).se;
    Ok(Estimate {
        value: prod - h_mean * h_mean,
        se,
    })
}
