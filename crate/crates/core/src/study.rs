//! Convergence studies against a fine reference solution.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corrector::{postprocess, LinSolveConfig, Scheme};
use crate::error::{Error, Result};
use crate::estimator::{certificate, certificate_supported, energy_bounds, residual_dual_norm};
use crate::model::{GroundState, GroundStateRecord, Problem, ProblemSpec};
use crate::solver::{solve_ground_state, SolverConfig};
use crate::spectral::{make_basis, prolong, SpectralField};

/// Environment variable naming the reference cache directory.
pub const CACHE_ENV: &str = "GPWAVE_CACHE_DIR";

/// Tolerance used for reference solves.
pub const REFERENCE_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StudyConfig {
    pub cutoffs: Vec<usize>,
    pub reference_cutoff: usize,
    /// Fine cutoff is `fine_factor · M`.
    pub fine_factor: usize,
    pub schemes: Vec<Scheme>,
    /// Run the Newton–Kantorovich check where it is supported.
    pub certificate: bool,
    pub solver: SolverConfig,
    pub lin: LinSolveConfig,
}

impl Default for StudyConfig {
    fn default() -> Self {
        Self {
            cutoffs: vec![8, 12, 16, 24, 32],
            reference_cutoff: 256,
            fine_factor: 4,
            schemes: Scheme::ALL.to_vec(),
            certificate: true,
            solver: SolverConfig {
                tol_residual: REFERENCE_TOL,
                ..Default::default()
            },
            lin: LinSolveConfig::default(),
        }
    }
}

impl StudyConfig {
    pub fn validate(&self) -> Result<()> {
        let max = self.cutoffs.iter().copied().max().ok_or_else(|| Error::InvalidInput("empty cutoff list".into()))?;
        if self.reference_cutoff < 4 * max {
            return Err(Error::InvalidInput(format!(
                "reference cutoff {} is below 4 × largest study cutoff {}",
                self.reference_cutoff, max
            )));
        }
        if self.fine_factor < 2 {
            return Err(Error::InvalidInput(format!("fine factor must be at least 2, got {}", self.fine_factor)));
        }
        if self.fine_factor * max > self.reference_cutoff {
            return Err(Error::InvalidInput("fine spaces must stay inside the reference space".into()));
        }
        self.solver.validate()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CacheStatus {
    Hit,
    Miss,
    /// An entry existed but failed its integrity check.
    Recomputed,
    Disabled,
}

#[derive(Serialize, Deserialize)]
struct CacheEntry {
    key: String,
    digest: String,
    state: GroundStateRecord,
}

#[derive(Serialize)]
struct KeyMaterial<'a> {
    d: usize,
    a0: f64,
    mu: f64,
    power: f64,
    potential: crate::spectral::FieldRecord,
    reference_cutoff: usize,
    solver: &'a SolverConfig,
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().fold(String::new(), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

fn sha256(text: &str) -> String {
    hex(&Sha256::digest(text.as_bytes()))
}

/// Content hash of (problem, reference cutoff, solver settings).
pub fn reference_key(p: &Problem, m_ref: usize, solver: &SolverConfig) -> String {
    let material = KeyMaterial {
        d: p.dim(),
        a0: p.a0(),
        mu: p.mu(),
        power: p.nonlinearity().power,
        potential: p.potential().to_record(),
        reference_cutoff: m_ref,
        solver,
    };
    sha256(&serde_json::to_string(&material).expect("key material serializes"))
}

/// The cache directory from the environment, if set.
pub fn cache_dir_from_env() -> Option<PathBuf> {
    std::env::var_os(CACHE_ENV).filter(|v| !v.is_empty()).map(PathBuf::from)
}

fn reference_settings(cfg: &SolverConfig) -> SolverConfig {
    SolverConfig {
        tol_residual: cfg.tol_residual.min(REFERENCE_TOL),
        ..cfg.clone()
    }
}

/// Fine reference solution, loaded from `cache` when a valid entry exists.
pub fn reference_solution(
    p: &Problem,
    m_ref: usize,
    cfg: &SolverConfig,
    cache: Option<&Path>,
) -> Result<(GroundState, CacheStatus)> {
    let settings = reference_settings(cfg);
    let key = reference_key(p, m_ref, &settings);
    let path = cache.map(|dir| dir.join(format!("reference-{key}.json")));
    let mut status = CacheStatus::Disabled;
    if let Some(path) = &path {
        status = CacheStatus::Miss;
        if let Ok(text) = fs::read_to_string(path) {
            match serde_json::from_str::<CacheEntry>(&text) {
                Ok(entry) if entry.key == key => {
                    let body = serde_json::to_string(&entry.state)?;
                    if sha256(&body) == entry.digest {
                        return Ok((GroundState::from_record(&entry.state)?, CacheStatus::Hit));
                    }
                    status = CacheStatus::Recomputed;
                }
                _ => status = CacheStatus::Recomputed,
            }
        }
    }
    let gs = solve_ground_state(p, &make_basis(p.dim(), m_ref)?, &settings)?;
    if let (Some(path), Some(dir)) = (&path, cache) {
        fs::create_dir_all(dir)?;
        let state = gs.to_record();
        let digest = sha256(&serde_json::to_string(&state)?);
        let entry = CacheEntry { key, digest, state };
        let tmp = path.with_extension(format!("tmp{}", std::process::id()));
        fs::write(&tmp, serde_json::to_string(&entry)?)?;
        fs::rename(&tmp, path)?;
    }
    Ok((gs, status))
}

/// Errors of one candidate against the reference.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ErrorEntry {
    pub err_h1: f64,
    pub err_l2: f64,
    pub err_lambda: f64,
    /// E − E_ref (signed; nonnegative up to rounding for conforming candidates).
    pub err_energy: f64,
}

/// Compares (u, λ, E) with the reference after prolongation and sign alignment.
pub fn measure(u: &SpectralField, lambda: f64, energy: f64, reference: &GroundState) -> Result<ErrorEntry> {
    if u.basis().cutoff() > reference.basis.cutoff() {
        return Err(Error::BasisMismatch(format!(
            "candidate cutoff {} exceeds reference cutoff {}",
            u.basis().cutoff(),
            reference.basis.cutoff()
        )));
    }
    let v = prolong(u, &reference.basis)?.aligned_with(&reference.u);
    let diff = &v - &reference.u;
    Ok(ErrorEntry {
        err_h1: diff.norm_h1(),
        err_l2: diff.norm_l2(),
        err_lambda: (lambda - reference.lambda).abs(),
        err_energy: energy - reference.energy,
    })
}

/// Least-squares line through (log x, log y).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Fit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
}

pub fn fit_rate(points: &[(f64, f64)]) -> Result<Fit> {
    if points.len() < 3 {
        return Err(Error::FitData(format!("need at least 3 points, got {}", points.len())));
    }
    if let Some(bad) = points.iter().find(|(x, y)| !(*x > 0.0 && *y > 0.0) || !x.is_finite() || !y.is_finite()) {
        return Err(Error::FitData(format!("nonpositive data point {bad:?}")));
    }
    let n = points.len() as f64;
    let lx: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ly: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ly.iter().map(|y| (y - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::FitData("all abscissae are equal".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = lx.iter().zip(&ly).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    let r2 = if syy == 0.0 { 1.0 } else { 1.0 - sse / syy };
    Ok(Fit { slope, intercept, r2 })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SchemeEntry {
    pub errors: Option<ErrorEntry>,
    pub lambda_hat: Option<f64>,
    pub energy_hat: Option<f64>,
    /// Set when the scheme reported an error instead of a result.
    pub failure: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CertificateEntry {
    pub validity_alpha: f64,
    pub certified: bool,
    pub error_bound_h1: Option<f64>,
    pub eps: f64,
    pub gamma: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StudyRecord {
    #[serde(rename = "M")]
    pub cutoff: usize,
    pub fine_cutoff: usize,
    pub lambda: f64,
    pub energy: f64,
    pub coarse: ErrorEntry,
    pub residual_dual: f64,
    pub energy_upper: Option<f64>,
    pub energy_lower: Option<f64>,
    pub a_ww: Option<f64>,
    pub certificate: Option<CertificateEntry>,
    pub schemes: BTreeMap<String, SchemeEntry>,
}

/// One fitted relation with its acceptance window.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RelationCheck {
    pub name: String,
    pub fit: Option<Fit>,
    pub window: [f64; 2],
    pub pass: bool,
    pub note: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PropertyCheck {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub generated_unix: u64,
    /// Wall-clock seconds per cutoff and stage.
    pub timings: BTreeMap<String, BTreeMap<String, f64>>,
    pub reference_cache: Option<CacheStatus>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StudyReport {
    pub problem: ProblemSpec,
    pub cutoffs: Vec<usize>,
    pub reference_cutoff: usize,
    pub reference_lambda: f64,
    pub reference_energy: f64,
    pub records: Vec<StudyRecord>,
    pub relations: Vec<RelationCheck>,
    pub properties: Vec<PropertyCheck>,
    pub metadata: Metadata,
}

fn study_point(
    p: &Problem,
    m: usize,
    cfg: &StudyConfig,
    reference: &GroundState,
) -> Result<(StudyRecord, BTreeMap<String, f64>)> {
    let mut timings = BTreeMap::new();
    let t = Instant::now();
    let basis = make_basis(p.dim(), m)?;
    let gs = solve_ground_state(p, &basis, &cfg.solver)?;
    timings.insert("solve".to_string(), t.elapsed().as_secs_f64());
    let fine = make_basis(p.dim(), cfg.fine_factor * m)?;
    let coarse = measure(&gs.u, gs.lambda, gs.energy, reference)?;
    let residual_dual = residual_dual_norm(p, &gs, &fine)?;

    let mut schemes = BTreeMap::new();
    let mut bounds = None;
    let mut a_ww = None;
    for &scheme in &cfg.schemes {
        let t = Instant::now();
        let entry = match postprocess(p, &gs, &fine, scheme, &cfg.lin) {
            Ok(corr) => {
                if scheme == Scheme::Newton {
                    a_ww = Some(corr.a_ww);
                    bounds = energy_bounds(&gs, &corr).ok();
                }
                SchemeEntry {
                    errors: Some(measure(&corr.u_hat, corr.lambda_hat, corr.energy_hat, reference)?),
                    lambda_hat: Some(corr.lambda_hat),
                    energy_hat: Some(corr.energy_hat),
                    failure: None,
                }
            }
            Err(e) => SchemeEntry {
                errors: None,
                lambda_hat: None,
                energy_hat: None,
                failure: Some(e.to_string()),
            },
        };
        timings.insert(scheme.name().to_string(), t.elapsed().as_secs_f64());
        schemes.insert(scheme.name().to_string(), entry);
    }

    let certificate = if cfg.certificate && certificate_supported(p) {
        let t = Instant::now();
        let c = certificate(p, &gs, &fine, &cfg.lin)?;
        timings.insert("certificate".to_string(), t.elapsed().as_secs_f64());
        Some(CertificateEntry {
            validity_alpha: c.validity_alpha,
            certified: c.certified,
            error_bound_h1: c.certified.then_some(2.0 * c.eps),
            eps: c.eps,
            gamma: c.gamma,
        })
    } else {
        None
    };

    Ok((
        StudyRecord {
            cutoff: m,
            fine_cutoff: fine.cutoff(),
            lambda: gs.lambda,
            energy: gs.energy,
            coarse,
            residual_dual,
            energy_upper: bounds.map(|b| b.upper),
            energy_lower: bounds.map(|b| b.lower),
            a_ww,
            certificate,
            schemes,
        },
        timings,
    ))
}

fn scheme_errors<'a>(records: &'a [StudyRecord], scheme: &str) -> impl Iterator<Item = (&'a StudyRecord, ErrorEntry)> + 'a {
    let scheme = scheme.to_string();
    records
        .iter()
        .filter_map(move |r| r.schemes.get(&scheme).and_then(|e| e.errors).map(|e| (r, e)))
}

fn relation(name: &str, points: Vec<(f64, f64)>, window: [f64; 2], min_r2: Option<f64>) -> RelationCheck {
    match fit_rate(&points) {
        Ok(fit) => {
            let in_window = fit.slope >= window[0] && fit.slope <= window[1];
            let r2_ok = min_r2.is_none_or(|m| fit.r2 >= m);
            RelationCheck {
                name: name.to_string(),
                fit: Some(fit),
                window,
                pass: in_window && r2_ok,
                note: None,
            }
        }
        Err(e) => RelationCheck {
            name: name.to_string(),
            fit: None,
            window,
            pass: false,
            note: Some(e.to_string()),
        },
    }
}

/// Rate relations between the measured errors.
pub fn evaluate_relations(records: &[StudyRecord]) -> Vec<RelationCheck> {
    let coarse = |f: fn(&ErrorEntry) -> f64| records.iter().map(|r| (r.coarse.err_h1, f(&r.coarse))).collect::<Vec<_>>();
    let newton: Vec<_> = scheme_errors(records, "newton").collect();
    vec![
        relation("err_lambda vs err_h1", coarse(|e| e.err_lambda), [1.7, 2.3], Some(0.95)),
        relation("err_energy vs err_h1", coarse(|e| e.err_energy.abs()), [1.7, 2.3], Some(0.95)),
        relation(
            "newton err_h1 vs coarse err_h1",
            newton.iter().map(|(r, e)| (r.coarse.err_h1, e.err_h1)).collect(),
            [1.7, 2.5],
            None,
        ),
        relation(
            "newton err_energy vs coarse err_h1",
            newton.iter().map(|(r, e)| (r.coarse.err_h1, e.err_energy.abs())).collect(),
            [3.4, 4.6],
            None,
        ),
        relation(
            "pert improvement ratio vs M",
            scheme_errors(records, "pert")
                .map(|(r, e)| (r.cutoff as f64, e.err_h1 / r.coarse.err_h1))
                .collect(),
            [-2.6, -1.4],
            None,
        ),
    ]
}

/// Sandwich, residual-ratio and certificate properties.
pub fn evaluate_properties(records: &[StudyRecord], reference_energy: f64) -> Vec<PropertyCheck> {
    let mut out = Vec::new();

    let mut sandwich = true;
    let mut detail = String::new();
    for r in records.iter().filter(|r| r.cutoff >= 12) {
        match (r.energy_lower, r.energy_upper) {
            (Some(lo), Some(hi)) => {
                let ok = lo <= reference_energy && reference_energy <= hi;
                sandwich &= ok;
                let _ = write!(detail, "M={}: {:.3e} <= 0 <= {:.3e}; ", r.cutoff, lo - reference_energy, hi - reference_energy);
            }
            _ => sandwich = false,
        }
    }
    if let Some(last) = records.last() {
        if let (Some(lo), Some(hi)) = (last.energy_lower, last.energy_upper) {
            let ok = (reference_energy - lo).abs() <= 0.2 * (hi - reference_energy);
            sandwich &= ok;
            let _ = write!(detail, "finest gap ratio {:.3e}", (reference_energy - lo).abs() / (hi - reference_energy));
        }
    }
    out.push(PropertyCheck {
        name: "energy sandwich".into(),
        pass: sandwich,
        detail,
    });

    let ratios: Vec<f64> = records.iter().map(|r| r.coarse.err_h1 / r.residual_dual).collect();
    let tail = &ratios[ratios.len().saturating_sub(3)..];
    let (lo, hi) = tail.iter().fold((f64::INFINITY, 0f64), |(a, b), &x| (a.min(x), b.max(x)));
    out.push(PropertyCheck {
        name: "residual-error equivalence".into(),
        pass: tail.len() == 3 && hi / lo - 1.0 < 0.2,
        detail: format!("ratios {tail:?}"),
    });

    let mut sound = true;
    let mut detail = String::new();
    for r in records {
        if let Some(c) = &r.certificate {
            if c.certified {
                let err = r.coarse.err_h1 + r.coarse.err_lambda;
                let bound = c.error_bound_h1.unwrap_or(f64::INFINITY);
                sound &= err <= bound;
                let _ = write!(detail, "M={}: {:.3e} <= {:.3e}; ", r.cutoff, err, bound);
            }
        }
    }
    out.push(PropertyCheck {
        name: "certificate soundness".into(),
        pass: sound,
        detail,
    });

    let monotone = records.windows(2).all(|w| w[1].energy <= w[0].energy + 1e-13);
    out.push(PropertyCheck {
        name: "variational monotonicity".into(),
        pass: monotone && records.iter().all(|r| r.coarse.err_energy >= -1e-12),
        detail: String::new(),
    });
    out
}

/// Solves, post-processes and measures every cutoff of the study.
pub fn run_study(spec: &ProblemSpec, cfg: &StudyConfig, cache: Option<&Path>) -> Result<StudyReport> {
    cfg.validate()?;
    let p = spec.build()?;
    let t = Instant::now();
    let (reference, status) = reference_solution(&p, cfg.reference_cutoff, &cfg.solver, cache)?;
    let reference_time = t.elapsed().as_secs_f64();
    let results: Vec<_> = cfg
        .cutoffs
        .par_iter()
        .map(|&m| study_point(&p, m, cfg, &reference))
        .collect::<Result<Vec<_>>>()?;
    let mut metadata = Metadata {
        generated_unix: SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs()),
        reference_cache: Some(status),
        ..Default::default()
    };
    metadata
        .timings
        .insert("reference".into(), BTreeMap::from([("solve".to_string(), reference_time)]));
    let mut records = Vec::new();
    for (rec, timing) in results {
        metadata.timings.insert(format!("M={}", rec.cutoff), timing);
        records.push(rec);
    }
    Ok(StudyReport {
        problem: spec.clone(),
        cutoffs: cfg.cutoffs.clone(),
        reference_cutoff: cfg.reference_cutoff,
        reference_lambda: reference.lambda,
        reference_energy: reference.energy,
        relations: evaluate_relations(&records),
        properties: evaluate_properties(&records, reference.energy),
        records,
        metadata,
    })
}

pub const CSV_HEADER: &str = "M,method,err_h1,err_l2,err_lambda,err_energy,residual_dual,energy_lower,energy_upper,a_ww,validity_alpha,certified,error_bound_h1,failure";

fn num(x: Option<f64>) -> String {
    x.map_or(String::new(), |v| format!("{v:?}"))
}

/// One row per (cutoff, method); the coarse solution is method "coarse".
pub fn to_csv(report: &StudyReport) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in &report.records {
        let cert = r.certificate.as_ref();
        let shared = format!(
            "{},{},{},{},{},{},{}",
            r.residual_dual,
            num(r.energy_lower),
            num(r.energy_upper),
            num(r.a_ww),
            num(cert.map(|c| c.validity_alpha)),
            cert.map_or(String::new(), |c| c.certified.to_string()),
            num(cert.and_then(|c| c.error_bound_h1)),
        );
        let mut row = |method: &str, e: Option<&ErrorEntry>, failure: Option<&str>| {
            let errs = e.map_or(",,,".to_string(), |e| format!("{:?},{:?},{:?},{:?}", e.err_h1, e.err_l2, e.err_lambda, e.err_energy));
            let failure = failure.map_or(String::new(), |f| format!("\"{}\"", f.replace('"', "'")));
            let _ = writeln!(out, "{},{},{},{},{}", r.cutoff, method, errs, shared, failure);
        };
        row("coarse", Some(&r.coarse), None);
        for (name, entry) in &r.schemes {
            row(name, entry.errors.as_ref(), entry.failure.as_deref());
        }
    }
    out
}

/// Standalone matplotlib script that redraws the log-log figures from study.csv.
pub fn plot_script() -> String {
    r#"#!/usr/bin/env python3
"""Log-log convergence plots from study.csv (written by `gpwave study`)."""
import csv
import sys
from collections import defaultdict

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

path = sys.argv[1] if len(sys.argv) > 1 else "study.csv"
rows = defaultdict(list)
with open(path) as fh:
    for row in csv.DictReader(fh):
        if row["err_h1"]:
            rows[row["method"]].append(row)

colors = {m: f"C{i}" for i, m in enumerate(sorted(rows))}
fig, axes = plt.subplots(1, 3, figsize=(15, 4.5))
for method, rs in sorted(rows.items()):
    m = [int(r["M"]) for r in rs]
    axes[0].loglog(m, [float(r["err_h1"]) for r in rs], "o-", color=colors[method], label=method)
axes[0].set_xlabel("M")
axes[0].set_ylabel("H1 error")
axes[0].legend()

coarse = rows["coarse"]
e = [float(r["err_h1"]) for r in coarse]
axes[1].loglog(e, [float(r["err_lambda"]) for r in coarse], "o-", label="|lambda error|")
axes[1].loglog(e, [abs(float(r["err_energy"])) for r in coarse], "s-", label="|energy error|")
axes[1].loglog(e, [x * x for x in e], "k--", label="slope 2")
axes[1].set_xlabel("coarse H1 error")
axes[1].legend()

by_m = {int(r["M"]): float(r["err_h1"]) for r in coarse}
for method, rs in sorted(rows.items()):
    if method == "coarse":
        continue
    pts = [(by_m[int(r["M"])], float(r["err_h1"])) for r in rs if int(r["M"]) in by_m]
    axes[2].loglog([p[0] for p in pts], [p[1] for p in pts], "o-", color=colors[method], label=method)
axes[2].loglog(e, [x * x for x in e], "k--", label="slope 2")
axes[2].set_xlabel("coarse H1 error")
axes[2].set_ylabel("post-processed H1 error")
axes[2].legend()

fig.tight_layout()
fig.savefig("study.png", dpi=150)
print("wrote study.png")
"#
    .to_string()
}

/// Writes study.csv, report.json and plot_study.py into `dir`.
pub fn write_outputs(report: &StudyReport, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("study.csv"), to_csv(report))?;
    fs::write(dir.join("report.json"), serde_json::to_string_pretty(report)?)?;
    fs::write(dir.join("plot_study.py"), plot_script())?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Nonlinearity, PotentialSpec};

    #[test]
    fn fit_exact_power_laws() {
        let pts: Vec<_> = (1..6).map(|i| (i as f64, (i * i) as f64)).collect();
        let f = fit_rate(&pts).unwrap();
        assert!((f.slope - 2.0).abs() < 1e-14 && (f.r2 - 1.0).abs() < 1e-14);
        let pts: Vec<_> = (1..6).map(|i| (i as f64, 3.0 * (i as f64).powi(-4))).collect();
        assert!((fit_rate(&pts).unwrap().slope + 4.0).abs() < 1e-13);
        assert!(fit_rate(&pts[..2]).is_err());
        assert!(fit_rate(&[(1.0, 1.0), (2.0, 0.0), (3.0, 1.0)]).is_err());
    }

    #[test]
    fn measuring_the_reference_gives_zero() {
        let p = Problem::cosine(1).unwrap();
        let gs = solve_ground_state(&p, &make_basis(1, 12).unwrap(), &SolverConfig::default()).unwrap();
        let e = measure(&gs.u, gs.lambda, gs.energy, &gs).unwrap();
        assert_eq!(e, ErrorEntry::default());
        let flipped = gs.u.scaled(-1.0);
        assert_eq!(measure(&flipped, gs.lambda, gs.energy, &gs).unwrap().err_h1, 0.0);
    }

    #[test]
    fn cache_round_trip_is_bit_identical() {
        let dir = tempfile::tempdir().unwrap();
        let p = Problem::cosine(1).unwrap();
        let cfg = SolverConfig::default();
        let (a, s1) = reference_solution(&p, 32, &cfg, Some(dir.path())).unwrap();
        assert_eq!(s1, CacheStatus::Miss);
        let t = Instant::now();
        let (b, s2) = reference_solution(&p, 32, &cfg, Some(dir.path())).unwrap();
        assert_eq!(s2, CacheStatus::Hit);
        assert!(t.elapsed().as_secs_f64() < 1.0);
        assert_eq!(a.u.coeffs(), b.u.coeffs());
        assert_eq!(a.lambda.to_bits(), b.lambda.to_bits());
        assert_eq!(a.energy.to_bits(), b.energy.to_bits());

        // corrupt the payload: the digest no longer matches
        let file = fs::read_dir(dir.path()).unwrap().next().unwrap().unwrap().path();
        let text = fs::read_to_string(&file).unwrap();
        let lam = format!("{:?}", a.lambda);
        fs::write(&file, text.replacen(&lam, "0.5", 1)).unwrap();
        let (c, s3) = reference_solution(&p, 32, &cfg, Some(dir.path())).unwrap();
        assert_eq!(s3, CacheStatus::Recomputed);
        assert_eq!(c.lambda.to_bits(), a.lambda.to_bits());
    }

    #[test]
    fn free_problem_study_is_exact() {
        let spec = ProblemSpec {
            d: 1,
            a0: 1.0,
            mu: 1.0,
            potential: PotentialSpec::Zero,
            nonlinearity: Nonlinearity::default(),
        };
        let cfg = StudyConfig {
            cutoffs: vec![2, 3, 4],
            reference_cutoff: 16,
            ..Default::default()
        };
        let report = run_study(&spec, &cfg, None).unwrap();
        for r in &report.records {
            assert!(r.coarse.err_h1 < 1e-10 && r.coarse.err_lambda < 1e-12 && r.coarse.err_energy.abs() < 1e-12);
            for (name, e) in &r.schemes {
                let e = e.errors.unwrap_or_else(|| panic!("{name} failed"));
                assert!(e.err_h1 < 1e-10, "{name}");
            }
        }
        let csv = to_csv(&report);
        assert_eq!(csv.lines().next().unwrap(), CSV_HEADER);
        assert_eq!(csv.lines().count(), 1 + 3 * 6);
    }

    #[test]
    fn rejects_small_reference() {
        let cfg = StudyConfig {
            cutoffs: vec![8, 16],
            reference_cutoff: 32,
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
    }
}
