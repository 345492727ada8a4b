use std::fs::File;
use std::io::{self, Write};

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::Value;

use rpcd::alternatives::{association_pieces, r_degenerate, segregation_pieces};
use rpcd::efficacy::{sweep, Curve, Efficacy, VarianceSource};
use rpcd::montecarlo::{run_experiment, ExperimentConfig, ExperimentResult, Mode, Region};
use rpcd::nulldist::{self, mu_null_multi, nu_null_multi, Weights};
use rpcd::pcd::build_digraph;
use rpcd::{delaunay, AltKind, AltSpec, RFactor};

use crate::input::{read_points, read_weights};
use crate::{
    usage, AltFlag, CurvesArgs, Format, ModeFlag, Quantity, SimulateArgs, Status, TestArgs,
};

/// Null moment breakpoints.
const NULL_BREAKS: [f64; 3] = [4.0 / 3.0, 1.5, 2.0];

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(usage(format!("alpha must lie in (0, 1), got {alpha}")))
    }
}

// JSON has no infinity; r = ∞ is written as the string "inf".
fn r_json(r: RFactor) -> Value {
    if r.is_infinite() {
        Value::String("inf".into())
    } else {
        Value::from(r.value())
    }
}

fn r_text(r: RFactor) -> String {
    if r.is_infinite() {
        "inf".into()
    } else {
        r.value().to_string()
    }
}

fn opt_text<T: ToString>(v: Option<T>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

#[derive(Serialize)]
struct Inputs {
    r: Value,
    n: usize,
    #[serde(rename = "J")]
    triangles: usize,
    weights: Vec<f64>,
    alpha: f64,
    seed: Option<u64>,
    outside: rpcd::OutsidePolicy,
    dropped: usize,
}

#[derive(Serialize)]
struct Statistic {
    rho: f64,
    mu: f64,
    nu: f64,
    z: Option<f64>,
    p_segregation: Option<f64>,
    p_association: Option<f64>,
    reject_segregation: Option<bool>,
    reject_association: Option<bool>,
    degenerate: bool,
}

#[derive(Serialize)]
struct Provenance {
    version: &'static str,
    timestamp: String,
}

#[derive(Serialize)]
struct ResultDocument {
    inputs: Inputs,
    statistic: Statistic,
    provenance: Provenance,
}

pub fn test(a: TestArgs) -> Result<Status> {
    check_alpha(a.alpha)?;
    let ys = read_points(&a.y)?;
    let xs = read_points(&a.x)?;
    let tr = delaunay::triangulate(&ys)
        .with_context(|| format!("cannot triangulate {}", a.y.display()))?;
    let weights = tr.weights()?;
    let g = build_digraph(&tr, &xs, a.r, a.outside.into())?;
    if g.dropped > 0 {
        eprintln!(
            "warning: dropped {} of {} points outside the convex hull of Y",
            g.dropped,
            xs.len()
        );
    }
    let rho = g.relative_density()?;
    let t = nulldist::test(rho, g.n, a.r, &weights)?;
    let reject = |p: Option<f64>| p.map(|p| p < a.alpha);
    let doc = ResultDocument {
        inputs: Inputs {
            r: r_json(a.r),
            n: g.n,
            triangles: tr.len(),
            weights: weights.values().to_vec(),
            alpha: a.alpha,
            seed: None,
            outside: a.outside.into(),
            dropped: g.dropped,
        },
        statistic: Statistic {
            rho: t.rho,
            mu: t.mean,
            nu: t.avar,
            z: t.z,
            p_segregation: t.p_segregation,
            p_association: t.p_association,
            reject_segregation: reject(t.p_segregation),
            reject_association: reject(t.p_association),
            degenerate: t.degenerate,
        },
        provenance: Provenance {
            version: env!("CARGO_PKG_VERSION"),
            timestamp: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
        },
    };
    let mut out = io::stdout().lock();
    match a.format {
        Format::Json => {
            serde_json::to_writer_pretty(&mut out, &doc)?;
            writeln!(out)?;
        }
        Format::Csv => {
            let s = &doc.statistic;
            let mut w = csv::Writer::from_writer(out);
            w.write_record([
                "r",
                "n",
                "J",
                "alpha",
                "rho",
                "mu",
                "nu",
                "z",
                "p_segregation",
                "p_association",
                "degenerate",
            ])?;
            w.write_record([
                r_text(a.r),
                g.n.to_string(),
                tr.len().to_string(),
                a.alpha.to_string(),
                s.rho.to_string(),
                s.mu.to_string(),
                s.nu.to_string(),
                opt_text(s.z),
                opt_text(s.p_segregation),
                opt_text(s.p_association),
                s.degenerate.to_string(),
            ])?;
            w.flush()?;
        }
    }
    Ok(if t.degenerate {
        Status::Degenerate
    } else {
        Status::Ok
    })
}

fn alt_spec(kind: AltKind, eps: Option<f64>, what: &str) -> Result<AltSpec> {
    let eps = eps.ok_or_else(|| usage(format!("{what} needs --eps")))?;
    AltSpec::new(kind, eps).map_err(|e| usage(e.to_string()))
}

fn spec_breaks(spec: &AltSpec) -> Vec<f64> {
    let mut b: Vec<f64> = match spec.kind {
        AltKind::Segregation => segregation_pieces(spec.eps).iter().map(|p| p.0).collect(),
        AltKind::Association => association_pieces(spec.eps).iter().map(|p| p.0).collect(),
    };
    if spec.kind == AltKind::Segregation {
        b.extend(r_degenerate(spec.eps).ok());
    }
    b.extend(NULL_BREAKS);
    b
}

// The closed-form variance where one exists, otherwise quadrature.
fn variance_source(spec: &AltSpec, resolution: usize) -> VarianceSource {
    match rpcd::alternatives::nu_closed_form(spec, RFactor::ONE) {
        Ok(_) => VarianceSource::ClosedForm,
        Err(_) => VarianceSource::Quadrature { resolution },
    }
}

/// Evenly spaced points in `[lo, hi]` together with the breakpoints inside.
fn grid(lo: f64, hi: f64, steps: usize, breaks: &[f64]) -> Vec<RFactor> {
    let mut g: Vec<f64> = (0..steps)
        .map(|i| {
            if i + 1 == steps {
                hi
            } else {
                lo + (hi - lo) * i as f64 / (steps - 1) as f64
            }
        })
        .chain(
            breaks
                .iter()
                .copied()
                .filter(|b| b.is_finite() && *b >= lo && *b <= hi),
        )
        .collect();
    g.sort_by(f64::total_cmp);
    g.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * b.abs());
    g.into_iter()
        .map(|v| RFactor::new(v).expect("grid starts at r_min ≥ 1"))
        .collect()
}

pub fn curves(a: CurvesArgs) -> Result<Status> {
    check_alpha(a.alpha)?;
    let (lo, hi) = (a.r_min.value(), a.r_max.value());
    if !hi.is_finite() || lo >= hi {
        return Err(usage(format!(
            "need a finite range with r_min < r_max, got [{}, {}]",
            r_text(a.r_min),
            r_text(a.r_max)
        )));
    }
    if a.steps < 2 {
        return Err(usage("steps must be at least 2"));
    }
    let weights = match &a.weights {
        Some(path) => Some(Weights::new(read_weights(path)?)?),
        None => None,
    };
    let kind_of = |q: Quantity| match q {
        Quantity::PaeSeg | Quantity::HlaeSeg => AltKind::Segregation,
        _ => AltKind::Association,
    };
    let values: Vec<(RFactor, String)> = match a.quantity {
        Quantity::Mu | Quantity::Nu => {
            let w = weights.unwrap_or_else(Weights::single);
            grid(lo, hi, a.steps, &NULL_BREAKS)
                .into_iter()
                .map(|r| {
                    let v = if a.quantity == Quantity::Mu {
                        mu_null_multi(r, &w)
                    } else {
                        nu_null_multi(r, &w)
                    };
                    (r, v.to_string())
                })
                .collect()
        }
        q => {
            let (curve, breaks) = match q {
                Quantity::PaeSeg | Quantity::PaeAssoc => {
                    let kind = kind_of(q);
                    let curve = match &weights {
                        Some(w) => Curve::PaeMulti {
                            kind,
                            weights: w.values().to_vec(),
                        },
                        None => Curve::Pae { kind },
                    };
                    (curve, NULL_BREAKS.to_vec())
                }
                Quantity::HlaeSeg | Quantity::HlaeAssoc => {
                    let spec = alt_spec(kind_of(q), a.eps, "hlae")?;
                    let source = variance_source(&spec, a.resolution);
                    let curve = match &weights {
                        Some(w) => Curve::HlaeMulti {
                            spec,
                            weights: w.values().to_vec(),
                            source,
                        },
                        None => Curve::Hlae { spec, source },
                    };
                    (curve, spec_breaks(&spec))
                }
                _ => {
                    let kind = match a.alt {
                        AltFlag::Seg => AltKind::Segregation,
                        AltFlag::Assoc => AltKind::Association,
                    };
                    let spec = alt_spec(kind, a.eps, "power")?;
                    let n = a.n.ok_or_else(|| usage("power needs --n"))?;
                    if weights.is_some() {
                        return Err(usage(
                            "power is tabulated for a single triangle; drop --weights",
                        ));
                    }
                    let curve = Curve::Power {
                        spec,
                        n,
                        alpha: a.alpha,
                        source: variance_source(&spec, a.resolution),
                    };
                    (curve, spec_breaks(&spec))
                }
            };
            let rs = grid(lo, hi, a.steps, &breaks);
            let report = sweep(curve, &rs)?;
            rs.into_iter()
                .zip(report.values)
                .map(|(r, v)| {
                    let text = match v {
                        Efficacy::Finite(x) => x.to_string(),
                        Efficacy::Infinite => "inf".into(),
                    };
                    (r, text)
                })
                .collect()
        }
    };
    let mut w = csv::Writer::from_writer(io::stdout().lock());
    w.write_record(["r", "value"])?;
    for (r, v) in values {
        w.write_record([r_text(r), v])?;
    }
    w.flush()?;
    Ok(Status::Ok)
}

const SUMMARY_HEADER: [&str; 15] = [
    "r",
    "mu",
    "nu",
    "mean",
    "variance",
    "se_mean",
    "n_variance",
    "reject_upper",
    "reject_lower",
    "power",
    "se_power",
    "empirical_upper",
    "empirical_lower",
    "empirical_power",
    "triangles",
];

fn write_summary_csv(res: &ExperimentResult, out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SUMMARY_HEADER)?;
    for s in &res.per_r {
        w.write_record([
            r_text(s.r),
            s.mu.to_string(),
            s.nu.to_string(),
            s.mean.to_string(),
            s.variance.to_string(),
            s.se_mean.to_string(),
            s.n_variance.to_string(),
            opt_text(s.reject_upper),
            opt_text(s.reject_lower),
            opt_text(s.power),
            opt_text(s.se_power),
            opt_text(s.empirical_upper),
            opt_text(s.empirical_lower),
            opt_text(s.empirical_power),
            res.triangles.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn result_json(res: &ExperimentResult) -> Result<Value> {
    let mut v = serde_json::to_value(res)?;
    for (i, &r) in res.config.r_grid.iter().enumerate() {
        v["config"]["r_grid"][i] = r_json(r);
        v["per_r"][i]["r"] = r_json(r);
    }
    Ok(v)
}

pub fn simulate(a: SimulateArgs) -> Result<Status> {
    check_alpha(a.alpha)?;
    let mode = match (a.mode, a.eps) {
        (ModeFlag::Null, None) => Mode::Null,
        (ModeFlag::Null, Some(_)) => return Err(usage("--eps is meaningless in null mode")),
        (ModeFlag::Seg, eps) => {
            Mode::Segregation(alt_spec(AltKind::Segregation, eps, "seg mode")?.eps)
        }
        (ModeFlag::Assoc, eps) => {
            Mode::Association(alt_spec(AltKind::Association, eps, "assoc mode")?.eps)
        }
    };
    if a.n < 2 || a.reps < 1 {
        return Err(usage("need --n ≥ 2 and --reps ≥ 1"));
    }
    if a.threads == Some(0) {
        return Err(usage("--threads must be positive"));
    }
    let mut cfg = ExperimentConfig::new(mode, a.n, a.reps, a.r.clone(), a.seed);
    cfg.alpha = a.alpha;
    cfg.threads = a.threads;
    cfg.empirical_critical = a.empirical_critical;
    cfg.keep_samples = a.emit_samples.is_some();
    if let Some(path) = &a.y {
        cfg.region = Region::Anchors(read_points(path)?);
    }
    let mut res = run_experiment(&cfg)?;
    // the worker count must not show in the output
    res.config.threads = None;

    if let Some(path) = &a.emit_samples {
        let file =
            File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
        let mut w = csv::Writer::from_writer(io::BufWriter::new(file));
        w.write_record(["replicate", "r", "rho"])?;
        for s in &res.per_r {
            let r = r_text(s.r);
            for (i, rho) in s.samples.iter().flatten().enumerate() {
                w.write_record([i.to_string(), r.clone(), rho.to_string()])?;
            }
        }
        w.flush()?;
        for s in &mut res.per_r {
            s.samples = None;
        }
        res.config.keep_samples = false;
    }

    let mut out = io::stdout().lock();
    match a.format {
        Format::Csv => write_summary_csv(&res, &mut out)?,
        Format::Json => {
            serde_json::to_writer_pretty(&mut out, &result_json(&res)?)?;
            writeln!(out)?;
        }
    }
    Ok(Status::Ok)
}
