//! Discrete ground-state solvers: damped SCF and a projected Sobolev gradient flow.

use std::fmt::Write as _;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{lobpcg, EigenOptions, Vector};
use crate::model::{GroundState, Problem};
use crate::spectral::{BasisSpec, SpectralField};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Scf,
    GradientFlow,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub method: Method,
    /// Stop once ‖𝒜_u u − Λ_u u‖_{H⁻¹} on X_M is below this.
    pub tol_residual: f64,
    pub max_outer: usize,
    /// SCF mixing weight β.
    pub damping: f64,
    /// Initial gradient-flow step; halved until the energy decreases.
    pub flow_step: f64,
    /// Floor for the inner eigensolver tolerance. The inner solve is tightened
    /// along with the outer residual but never below this.
    pub inner_tol: f64,
    pub seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            method: Method::Scf,
            tol_residual: 1e-10,
            max_outer: 500,
            damping: 0.5,
            flow_step: 1.0,
            inner_tol: 1e-13,
            seed: 0,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol_residual > 0.0) {
            return Err(Error::InvalidInput(format!("tol_residual must be positive, got {}", self.tol_residual)));
        }
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(Error::InvalidInput(format!("damping must lie in (0, 1], got {}", self.damping)));
        }
        if !(self.flow_step > 0.0) {
            return Err(Error::InvalidInput(format!("flow_step must be positive, got {}", self.flow_step)));
        }
        if !(self.inner_tol > 0.0) {
            return Err(Error::InvalidInput(format!("inner_tol must be positive, got {}", self.inner_tol)));
        }
        if self.max_outer == 0 {
            return Err(Error::InvalidInput("max_outer must be at least 1".into()));
        }
        Ok(())
    }
}

/// One row of the convergence trace.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub iteration: usize,
    pub energy: f64,
    pub residual: f64,
    pub lambda: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Trace(pub Vec<TraceRow>);

impl Trace {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("iteration,energy,residual,lambda\n");
        for r in &self.0 {
            let _ = writeln!(out, "{},{:?},{:?},{:?}", r.iteration, r.energy, r.residual, r.lambda);
        }
        out
    }
}

/// Normalized constant plus a seeded 1e-2 perturbation of the modes |k| ≤ 2.
pub fn initial_guess(basis: &BasisSpec, seed: u64) -> SpectralField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut noise = SpectralField::random_real(basis, &mut rng, 0.0);
    for (c, &k2) in noise.coeffs_mut().iter_mut().zip(basis.norm2()) {
        if k2 > 4.0 {
            *c = 0.0.into();
        }
    }
    let n = noise.norm_l2();
    let mut u = SpectralField::unit_constant(basis);
    if n > 0.0 {
        u.axpy(1e-2 / n, &noise);
    }
    u.normalized().expect("nonzero guess").with_nonnegative_mean()
}

pub fn solve_ground_state(p: &Problem, basis: &BasisSpec, cfg: &SolverConfig) -> Result<GroundState> {
    solve_with_trace(p, basis, cfg).map(|(gs, _)| gs)
}

/// Residual of the constrained problem restricted to X_M, and Λ_u.
fn restricted_residual(p: &Problem, u: &SpectralField) -> Result<(f64, f64)> {
    let au = p.fock_operator(u)?.apply(u);
    let lambda = au.dot(u) / u.dot(u);
    let mut r = au;
    r.axpy(-lambda, u);
    Ok((r.norm_hm1(), lambda))
}

pub fn solve_with_trace(p: &Problem, basis: &BasisSpec, cfg: &SolverConfig) -> Result<(GroundState, Trace)> {
    cfg.validate()?;
    if basis.dim() != p.dim() {
        return Err(Error::BasisMismatch(format!(
            "basis is {}-dimensional, problem is {}-dimensional",
            basis.dim(),
            p.dim()
        )));
    }
    let mut u = initial_guess(basis, cfg.seed);
    let mut trace = Trace::default();
    let mut warm: Vec<Vector> = Vec::new();
    let mut gap = None;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5eed);
    let mut last = f64::INFINITY;
    for it in 0..=cfg.max_outer {
        let (res, lambda) = restricted_residual(p, &u)?;
        let energy = p.energy(&u)?;
        trace.0.push(TraceRow {
            iteration: it,
            energy,
            residual: res,
            lambda,
        });
        last = res;
        if res <= cfg.tol_residual {
            let gs = GroundState {
                basis: basis.clone(),
                u,
                lambda,
                energy,
                residual_dual_norm: res,
                iterations: it,
                converged: true,
                linear_gap: gap,
            };
            return Ok((gs, trace));
        }
        if it == cfg.max_outer {
            break;
        }
        u = match cfg.method {
            Method::Scf => {
                let inner = inner_tolerance(cfg, res);
                let step = scf_step_warm(p, &u, cfg.damping, inner, &mut warm, &mut rng)?;
                gap = step.gap;
                step.u
            }
            Method::GradientFlow => gradient_flow_step(p, &u, cfg)?,
        };
    }
    Err(Error::NonConvergence {
        what: match cfg.method {
            Method::Scf => "scf",
            Method::GradientFlow => "gradient flow",
        },
        iterations: cfg.max_outer,
        residual: last,
    })
}

fn inner_tolerance(cfg: &SolverConfig, outer: f64) -> f64 {
    (0.1 * outer).min(1e-3).max(cfg.inner_tol)
}

pub(crate) struct ScfStep {
    pub u: SpectralField,
    pub eigenvalue: f64,
    pub gap: Option<f64>,
}

/// Lowest eigenpairs of a symmetric operator on `basis`, seeded from `seed`
/// plus random real fields. Returns (values, vectors).
pub(crate) fn lowest_pairs<F>(
    basis: &BasisSpec,
    op: F,
    a0: f64,
    seed: &[Vector],
    nev: usize,
    tol: f64,
    rng: &mut ChaCha8Rng,
    what: &'static str,
) -> Result<(Vec<f64>, Vec<Vector>)>
where
    F: Fn(&[num_complex::Complex64]) -> Vector,
{
    let guard = 1;
    let mut block: Vec<Vector> = seed.iter().take(nev + guard).cloned().collect();
    while block.len() < nev + guard {
        block.push(SpectralField::random_real(basis, rng, 1.0).into_coeffs());
    }
    let precond: Vec<f64> = basis.norm2().iter().map(|k2| 1.0 / (a0 * (1.0 + k2))).collect();
    let weights = basis.weights(-1.0);
    let res = lobpcg(op, &precond, &weights, block, &EigenOptions { nev, guard, tol, max_iter: 2000 });
    if !res.converged {
        return Err(Error::NonConvergence {
            what,
            iterations: res.iterations,
            residual: res.residuals.iter().cloned().fold(0.0, f64::max),
        });
    }
    Ok((res.values, res.vectors))
}

fn scf_step_warm(
    p: &Problem,
    u: &SpectralField,
    beta: f64,
    inner_tol: f64,
    warm: &mut Vec<Vector>,
    rng: &mut ChaCha8Rng,
) -> Result<ScfStep> {
    let basis = u.basis();
    let op = p.fock_operator(u)?;
    let mut seed = vec![u.coeffs().to_vec()];
    seed.extend(warm.iter().skip(1).cloned());
    let (values, vectors) = lowest_pairs(basis, |x| op.apply_coeffs(x), p.a0(), &seed, 2, inner_tol, rng, "scf inner eigensolve")?;
    let gap = (values.len() >= 2).then(|| values[1] - values[0]);
    if let Some(g) = gap {
        if g < 1e-10 {
            return Err(Error::DegenerateGroundState { gap: g });
        }
    }
    let phi = SpectralField::from_coeffs(basis, vectors[0].clone())?.aligned_with(u);
    let mut next = u.scaled(1.0 - beta);
    next.axpy(beta, &phi);
    let next = next.normalized()?.with_nonnegative_mean();
    *warm = vectors;
    Ok(ScfStep {
        u: next,
        eigenvalue: values[0],
        gap,
    })
}

/// One damped SCF step: lowest eigenpair of the frozen operator 𝒜_u, then
/// u_next ∝ (1 − β) u + β φ with φ sign-aligned to u.
pub fn scf_step(p: &Problem, u: &SpectralField, cfg: &SolverConfig) -> Result<(SpectralField, f64)> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut warm = Vec::new();
    let (res, _) = restricted_residual(p, u)?;
    let step = scf_step_warm(p, u, cfg.damping, inner_tolerance(cfg, res), &mut warm, &mut rng)?;
    Ok((step.u, step.eigenvalue))
}

/// One preconditioned projected gradient step with backtracking; the energy
/// never increases beyond rounding.
pub fn gradient_flow_step(p: &Problem, u: &SpectralField, cfg: &SolverConfig) -> Result<SpectralField> {
    let basis = u.basis();
    let au = p.fock_operator(u)?.apply(u);
    let lambda = au.dot(u) / u.dot(u);
    let mut g = au;
    g.axpy(-lambda, u);
    for (c, &k2) in g.coeffs_mut().iter_mut().zip(basis.norm2()) {
        *c /= p.a0() * (1.0 + k2);
    }
    let along = g.dot(u);
    g.axpy(-along, u);
    if g.norm_l2() == 0.0 {
        return Ok(u.clone());
    }
    let e0 = p.energy(u)?;
    let slack = 8.0 * f64::EPSILON * e0.abs().max(1e-300);
    let mut tau = cfg.flow_step;
    while tau >= 1e-12 {
        let mut cand = u.clone();
        cand.axpy(-tau, &g);
        let cand = cand.normalized()?.with_nonnegative_mean();
        if p.energy(&cand)? <= e0 + slack {
            return Ok(cand);
        }
        tau *= 0.5;
    }
    Err(Error::Stagnation { step: tau })
}
