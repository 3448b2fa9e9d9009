//! Fine-space post-processing of a coarse ground state: the Newton step on
//! the complement of u_δ (reconstructed error), the three two-grid schemes and
//! the diagonal perturbation correction.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{minres, project_out, projected_cg, KrylovBreakdown, LinearOptions, LinearResult};
use crate::model::{GroundState, Problem};
use crate::solver::lowest_pairs;
use crate::spectral::{prolong, BasisSpec, FieldRecord, SpectralField};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    /// Newton step on the complement of u_δ.
    Newton,
    /// Linear eigenproblem with the nonlinearity frozen at u_δ.
    Tg1,
    /// (𝒜 + g(u_δ²)) v = λ_δ u_δ
    Tg2a,
    /// 𝒜 v = λ_δ u_δ − g(u_δ²) u_δ
    Tg2b,
    /// Diagonal correction on the fine-only modes.
    Pert,
}

impl Scheme {
    pub const ALL: [Scheme; 5] = [Scheme::Newton, Scheme::Tg1, Scheme::Tg2a, Scheme::Tg2b, Scheme::Pert];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::Newton => "newton",
            Scheme::Tg1 => "tg1",
            Scheme::Tg2a => "tg2a",
            Scheme::Tg2b => "tg2b",
            Scheme::Pert => "pert",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|x| x.name() == s)
    }
}

/// How û_δ is brought back to unit norm.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    /// û = (1 − α*) u_δ + ŵ
    #[default]
    Affine,
    /// û = β* (u_δ + ŵ)
    Radial,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LinSolveConfig {
    /// Target for the H⁻¹ residual of the fine linear solves (and the
    /// eigen-residual of scheme 1).
    pub tol: f64,
    pub max_iter: usize,
    pub normalization: Normalization,
    /// Required ratio fine.M / coarse M.
    pub min_fine_ratio: usize,
    pub seed: u64,
}

impl Default for LinSolveConfig {
    fn default() -> Self {
        Self {
            tol: 1e-12,
            max_iter: 5000,
            normalization: Normalization::Affine,
            min_fine_ratio: 2,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LinSolveDiagnostics {
    pub iterations: usize,
    /// H⁻¹ norm of the residual of the linear system actually solved.
    pub residual: f64,
    pub converged: bool,
    /// Regularization or fallback applied, if any.
    pub note: Option<String>,
    /// Smallest Ritz value seen, when the scheme computes one.
    pub smallest_ritz: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct Correction {
    pub scheme: Scheme,
    /// Component of the update orthogonal to u_δ, on the fine basis.
    pub w_hat: SpectralField,
    /// α* for affine normalization, β* for radial.
    pub alpha_star: f64,
    pub u_hat: SpectralField,
    pub lambda_hat: f64,
    pub energy_hat: f64,
    /// a_{u_δ}(ŵ, ŵ)
    pub a_ww: f64,
    pub diagnostics: LinSolveDiagnostics,
}

impl Correction {
    pub fn to_record(&self) -> CorrectionRecord {
        CorrectionRecord {
            scheme: self.scheme,
            alpha_star: self.alpha_star,
            lambda_hat: self.lambda_hat,
            energy_hat: self.energy_hat,
            a_ww: self.a_ww,
            w_hat_norm_l2: self.w_hat.norm_l2(),
            w_hat_norm_h1: self.w_hat.norm_h1(),
            diagnostics: self.diagnostics.clone(),
            u_hat: self.u_hat.to_record(),
        }
    }
}

/// JSON form of a [`Correction`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrectionRecord {
    pub scheme: Scheme,
    pub alpha_star: f64,
    pub lambda_hat: f64,
    pub energy_hat: f64,
    pub a_ww: f64,
    pub w_hat_norm_l2: f64,
    pub w_hat_norm_h1: f64,
    pub diagnostics: LinSolveDiagnostics,
    pub u_hat: FieldRecord,
}

/// Runs the selected scheme.
pub fn postprocess(p: &Problem, gs: &GroundState, fine: &BasisSpec, scheme: Scheme, lin: &LinSolveConfig) -> Result<Correction> {
    match scheme {
        Scheme::Newton => reconstructed_error(p, gs, fine, lin),
        Scheme::Tg1 => two_grid_scheme1(p, gs, fine, lin),
        Scheme::Tg2a => two_grid_scheme2a(p, gs, fine, lin),
        Scheme::Tg2b => two_grid_scheme2b(p, gs, fine, lin),
        Scheme::Pert => perturbation_correction(p, gs, fine, lin),
    }
}

fn check_fine(gs: &GroundState, fine: &BasisSpec, ratio: usize) -> Result<()> {
    let coarse = gs.basis.cutoff();
    let required = ratio.max(1) * coarse;
    if fine.dim() != gs.basis.dim() || fine.cutoff() < required {
        return Err(Error::FineSpaceTooSmall {
            coarse,
            fine: fine.cutoff(),
            required,
        });
    }
    Ok(())
}

fn preconditioner(p: &Problem, fine: &BasisSpec) -> Vec<f64> {
    fine.norm2().iter().map(|k2| 1.0 / (p.a0() * (1.0 + k2))).collect()
}

/// Relative tolerance for a Krylov solve so that the absolute H⁻¹ residual
/// lands near `tol`.
fn relative_tol(rhs: &SpectralField, tol: f64, a0: f64) -> f64 {
    let scale = rhs.norm_hm1() / a0.sqrt();
    if scale == 0.0 {
        1.0
    } else {
        (tol / scale).clamp(1e-15, 0.5)
    }
}

fn field(fine: &BasisSpec, x: Vec<num_complex::Complex64>) -> SpectralField {
    let mut f = SpectralField::from_coeffs(fine, x).expect("fine basis");
    f.symmetrize();
    f
}

/// (1 − α*) u + ŵ or β*(u + ŵ), with ‖û‖ = 1 exactly (up to rounding).
pub fn normalize_correction(gs: &GroundState, w_hat: &SpectralField, mode: Normalization) -> Result<(f64, SpectralField)> {
    let u = prolong(&gs.u, w_hat.basis())?;
    let along = w_hat.dot(&u);
    if along.abs() > 1e-10 * w_hat.norm_l2().max(1.0) {
        return Err(Error::InvalidInput(format!("correction is not orthogonal to u_δ: (ŵ, u_δ) = {along:e}")));
    }
    let ww = w_hat.norm_l2().powi(2);
    match mode {
        Normalization::Affine => {
            if ww >= 1.0 {
                return Err(Error::CorrectionTooLarge { norm: ww.sqrt() });
            }
            let keep = (1.0 - ww).sqrt();
            let mut out = u.scaled(keep);
            out.axpy(1.0, w_hat);
            Ok((1.0 - keep, out))
        }
        Normalization::Radial => {
            let beta = (1.0 + ww).powf(-0.5);
            let mut out = u;
            out.axpy(1.0, w_hat);
            out.scale(beta);
            Ok((beta, out))
        }
    }
}

/// Builds the correction record from a unit-norm fine state û.
fn finish(
    p: &Problem,
    gs: &GroundState,
    scheme: Scheme,
    w_hat: SpectralField,
    alpha_star: f64,
    u_hat: SpectralField,
    diagnostics: LinSolveDiagnostics,
) -> Result<Correction> {
    let u_f = prolong(&gs.u, w_hat.basis())?;
    let u_hat = u_hat.aligned_with(&u_f);
    let a_ww = p.linearized_operator(&u_f, gs.lambda)?.form(&w_hat, &w_hat);
    Ok(Correction {
        scheme,
        lambda_hat: p.rayleigh(&u_hat)?,
        energy_hat: p.energy(&u_hat)?,
        w_hat,
        alpha_star,
        u_hat,
        a_ww,
        diagnostics,
    })
}

/// Splits a normalized fine state into its u_δ component and the rest.
fn split_off(u_hat: &SpectralField, u_f: &SpectralField) -> (f64, SpectralField) {
    let c = u_hat.dot(u_f);
    let mut w = u_hat.clone();
    w.axpy(-c, u_f);
    (c, w)
}

/// Newton step on {u_δ}^⊥ in the fine space:
/// P(𝒜 + μ[2g′(u_δ²)u_δ² + g(u_δ²)] − λ_δ)P ŵ = −P r.
pub fn reconstructed_error(p: &Problem, gs: &GroundState, fine: &BasisSpec, lin: &LinSolveConfig) -> Result<Correction> {
    check_fine(gs, fine, lin.min_fine_ratio)?;
    let u_f = prolong(&gs.u, fine)?;
    let q = u_f.normalized()?;
    let op = p.linearized_operator(&u_f, gs.lambda)?;
    let mut rhs = p.residual_of(&u_f, gs.lambda, fine)?;
    rhs.scale(-1.0);
    let mut b = rhs.clone().into_coeffs();
    let constraint = [q.coeffs().to_vec()];
    project_out(&mut b, &constraint);
    let rhs = field(fine, b);
    let opts = LinearOptions {
        tol: relative_tol(&rhs, lin.tol, p.a0()),
        max_iter: lin.max_iter,
    };
    let out = projected_cg(|x| op.apply_coeffs(x), rhs.coeffs(), &preconditioner(p, fine), &constraint, &opts)
        .map_err(|KrylovBreakdown::NegativeCurvature(c)| Error::CoercivityViolated { curvature: c })?;
    let LinearResult { x, iterations, converged, .. } = out;
    let mut x = x;
    project_out(&mut x, &constraint);
    let w_hat = field(fine, x);
    // true residual of the projected system
    let mut r = op.apply(&w_hat);
    r.axpy(-1.0, &rhs);
    let mut rc = r.into_coeffs();
    project_out(&mut rc, &constraint);
    let residual = field(fine, rc).norm_hm1();
    if !converged {
        return Err(Error::NonConvergence {
            what: "reconstructed error linear solve",
            iterations,
            residual,
        });
    }
    let (alpha, u_hat) = normalize_correction(gs, &w_hat, lin.normalization)?;
    let diag = LinSolveDiagnostics {
        iterations,
        residual,
        converged,
        note: None,
        smallest_ritz: None,
    };
    finish(p, gs, Scheme::Newton, w_hat, alpha, u_hat, diag)
}

/// Lowest eigenpair of the frozen operator 𝒜 + μ g(u_δ²) on the fine space.
pub fn two_grid_scheme1(p: &Problem, gs: &GroundState, fine: &BasisSpec, lin: &LinSolveConfig) -> Result<Correction> {
    check_fine(gs, fine, lin.min_fine_ratio)?;
    let u_f = prolong(&gs.u, fine)?;
    let op = p.fock_operator(&u_f)?;
    let mut rng = ChaCha8Rng::seed_from_u64(lin.seed);
    let (values, vectors) = lowest_pairs(
        fine,
        |x| op.apply_coeffs(x),
        p.a0(),
        &[u_f.coeffs().to_vec()],
        1,
        lin.tol,
        &mut rng,
        "two-grid eigensolve",
    )?;
    let u_hat = field(fine, vectors[0].clone()).normalized()?.aligned_with(&u_f);
    let (c, w_hat) = split_off(&u_hat, &u_f);
    let mut r = op.apply(&u_hat);
    r.axpy(-values[0], &u_hat);
    let diag = LinSolveDiagnostics {
        iterations: 0,
        residual: r.norm_hm1(),
        converged: true,
        note: None,
        smallest_ritz: Some(values[0]),
    };
    finish(p, gs, Scheme::Tg1, w_hat, 1.0 - c, u_hat, diag)
}

/// Ritz values below this magnitude trigger the deflated solve in scheme 2a
/// and the singular-operator error in scheme 2b.
const NEAR_SINGULAR: f64 = 1e-8;

/// (𝒜 + μ g(u_δ²)) v = λ_δ u_δ on the full fine space, then normalized.
pub fn two_grid_scheme2a(p: &Problem, gs: &GroundState, fine: &BasisSpec, lin: &LinSolveConfig) -> Result<Correction> {
    check_fine(gs, fine, lin.min_fine_ratio)?;
    let u_f = prolong(&gs.u, fine)?;
    let op = p.fock_operator(&u_f)?;
    let precond = preconditioner(p, fine);
    let mut rng = ChaCha8Rng::seed_from_u64(lin.seed);
    let (values, vectors) = lowest_pairs(
        fine,
        |x| op.apply_coeffs(x),
        p.a0(),
        &[u_f.coeffs().to_vec()],
        1,
        lin.tol.max(1e-12),
        &mut rng,
        "scheme 2a spectrum probe",
    )?;
    let ritz = values[0];
    let rhs = u_f.scaled(gs.lambda);
    let (v, iterations, converged, note) = if ritz.abs() < NEAR_SINGULAR {
        // Deflate the near-null eigenvector, solve on its complement and put
        // the coarse balance λ_δ/λ₁ back along it.
        let phi = field(fine, vectors[0].clone()).normalized()?;
        let constraint = [phi.coeffs().to_vec()];
        let mut b = rhs.clone().into_coeffs();
        project_out(&mut b, &constraint);
        let b = field(fine, b);
        let opts = LinearOptions {
            tol: relative_tol(&b, lin.tol, p.a0()),
            max_iter: lin.max_iter,
        };
        let apply = |x: &[num_complex::Complex64]| {
            let mut y = op.apply_coeffs(x);
            project_out(&mut y, &constraint);
            y
        };
        let res = minres(apply, b.coeffs(), &precond, &opts);
        let mut v = field(fine, res.x);
        let ratio = if gs.lambda.abs() < NEAR_SINGULAR {
            1.0
        } else {
            gs.lambda / (ritz.signum() * ritz.abs().max(NEAR_SINGULAR))
        };
        v.axpy(ratio * u_f.dot(&phi), &phi);
        (v, res.iterations, res.converged, Some(format!("deflated near-null Ritz value {ritz:e}")))
    } else {
        let opts = LinearOptions {
            tol: relative_tol(&rhs, lin.tol, p.a0()),
            max_iter: lin.max_iter,
        };
        let res = minres(|x| op.apply_coeffs(x), rhs.coeffs(), &precond, &opts);
        (field(fine, res.x), res.iterations, res.converged, None)
    };
    if !converged {
        return Err(Error::NearSingularBvp { ritz });
    }
    let mut r = op.apply(&v);
    r.axpy(-1.0, &rhs);
    let residual = r.norm_hm1();
    let u_hat = v.normalized().map_err(|_| Error::NearSingularBvp { ritz })?.aligned_with(&u_f);
    let (c, w_hat) = split_off(&u_hat, &u_f);
    let diag = LinSolveDiagnostics {
        iterations,
        residual,
        converged,
        note,
        smallest_ritz: Some(ritz),
    };
    finish(p, gs, Scheme::Tg2a, w_hat, 1.0 - c, u_hat, diag)
}

/// 𝒜 v = λ_δ u_δ − μ g(u_δ²) u_δ on the fine space, then normalized. With
/// V ≡ 0 the solve runs on zero-mean fields and the coarse mean is kept.
/// Fails with `IndefiniteOperator` when the bottom eigenvalue of 𝒜 is within
/// `NEAR_SINGULAR` of zero or the solve stagnates.
pub fn two_grid_scheme2b(p: &Problem, gs: &GroundState, fine: &BasisSpec, lin: &LinSolveConfig) -> Result<Correction> {
    check_fine(gs, fine, lin.min_fine_ratio)?;
    let u_f = prolong(&gs.u, fine)?;
    let bare = p.bare_operator(fine)?;
    let nonlinear = &p.fock_operator(&u_f)?.apply(&u_f) - &bare.apply(&u_f);
    let mut rhs = u_f.scaled(gs.lambda);
    rhs.axpy(-1.0, &nonlinear);
    let constant = SpectralField::unit_constant(fine);
    let constraints: Vec<_> = if p.potential_is_zero() {
        vec![constant.coeffs().to_vec()]
    } else {
        Vec::new()
    };
    let mut b = rhs.into_coeffs();
    project_out(&mut b, &constraints);
    let rhs = field(fine, b);
    let opts = LinearOptions {
        tol: relative_tol(&rhs, lin.tol, p.a0()),
        max_iter: lin.max_iter,
    };
    let apply = |x: &[num_complex::Complex64]| bare.apply_coeffs(x);
    if !p.potential_is_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(lin.seed);
        let (values, _) = lowest_pairs(
            fine,
            apply,
            p.a0(),
            &[u_f.coeffs().to_vec()],
            1,
            lin.tol.max(1e-12),
            &mut rng,
            "scheme 2b spectrum probe",
        )?;
        if values[0].abs() < NEAR_SINGULAR {
            return Err(Error::IndefiniteOperator { curvature: values[0] });
        }
    }
    let precond = preconditioner(p, fine);
    // 𝒜 is indefinite when V pushes its bottom eigenvalue below zero; it is
    // still invertible unless that eigenvalue sits at zero, so fall back to MINRES.
    let (out, note) = match projected_cg(apply, rhs.coeffs(), &precond, &constraints, &opts) {
        Ok(out) if out.converged => (out, None),
        cg => {
            let curvature = match cg {
                Err(KrylovBreakdown::NegativeCurvature(c)) => c,
                Ok(_) => 0.0,
            };
            let out = minres(apply, rhs.coeffs(), &precond, &opts);
            if !out.converged {
                return Err(Error::IndefiniteOperator { curvature });
            }
            (out, Some(format!("indefinite operator (curvature {curvature:.3e}), solved with MINRES")))
        }
    };
    let mut v = field(fine, out.x);
    if p.potential_is_zero() {
        v.axpy(u_f.dot(&constant), &constant);
    }
    let mut r = bare.apply(&v);
    r.axpy(-1.0, &rhs);
    let mut rc = r.into_coeffs();
    project_out(&mut rc, &constraints);
    let residual = field(fine, rc).norm_hm1();
    if !out.converged {
        return Err(Error::NonConvergence {
            what: "scheme 2b linear solve",
            iterations: out.iterations,
            residual,
        });
    }
    let u_hat = v.normalized()?.aligned_with(&u_f);
    let (c, w_hat) = split_off(&u_hat, &u_f);
    let diag = LinSolveDiagnostics {
        iterations: out.iterations,
        residual,
        converged: true,
        note: note.or_else(|| p.potential_is_zero().then(|| "zero mode kept from the coarse solution".to_string())),
        smallest_ritz: None,
    };
    finish(p, gs, Scheme::Tg2b, w_hat, 1.0 - c, u_hat, diag)
}

/// τ̂_k = −r̂_k / (a0|k|² − λ_δ) on the modes M < |k| ≤ M_f, zero elsewhere.
/// Needs λ_δ < a0 (M² + 1).
pub fn perturbation_correction(p: &Problem, gs: &GroundState, fine: &BasisSpec, lin: &LinSolveConfig) -> Result<Correction> {
    check_fine(gs, fine, lin.min_fine_ratio)?;
    // fine-only modes have integer |k|² ≥ M² + 1
    let m = gs.basis.cutoff() as f64;
    let bound = p.a0() * (m * m + 1.0);
    if gs.lambda >= bound {
        return Err(Error::DiagonalNotInvertible { lambda: gs.lambda, bound });
    }
    let r = p.residual(gs, fine)?;
    let tau = perturbation_update(&r, gs.basis.cutoff(), gs.lambda, p.a0());
    let (alpha, u_hat) = normalize_correction(gs, &tau, lin.normalization)?;
    let diag = LinSolveDiagnostics {
        converged: true,
        ..Default::default()
    };
    finish(p, gs, Scheme::Pert, tau, alpha, u_hat, diag)
}

/// The diagonal update for a residual `r` on the fine basis.
pub fn perturbation_update(r: &SpectralField, coarse_cutoff: usize, lambda: f64, a0: f64) -> SpectralField {
    let m2 = (coarse_cutoff * coarse_cutoff) as f64;
    let basis = r.basis().clone();
    let coeffs = r
        .coeffs()
        .iter()
        .zip(basis.norm2())
        .map(|(c, &k2)| if k2 > m2 { -c / (a0 * k2 - lambda) } else { 0.0.into() })
        .collect();
    SpectralField::from_coeffs(&basis, coeffs).expect("same basis")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Nonlinearity, PotentialSpec, ProblemSpec};
    use crate::oracle::DenseOracle;
    use crate::solver::{solve_ground_state, SolverConfig};
    use crate::spectral::make_basis;
    use num_complex::Complex64;
    use std::f64::consts::PI;

    fn exact_constant(m: usize) -> (Problem, GroundState) {
        let p = Problem::free_cubic(1).unwrap();
        let b = make_basis(1, m).unwrap();
        let gs = GroundState::from_state(&p, SpectralField::unit_constant(&b), &b).unwrap();
        (p, gs)
    }

    fn solved(p: &Problem, m: usize) -> GroundState {
        let cfg = SolverConfig { tol_residual: 1e-12, ..Default::default() };
        solve_ground_state(p, &make_basis(p.dim(), m).unwrap(), &cfg).unwrap()
    }

    #[test]
    fn exact_solution_is_invariant_under_every_scheme() {
        let (p, gs) = exact_constant(4);
        let fine = make_basis(1, 16).unwrap();
        let c = SpectralField::unit_constant(&fine);
        for scheme in Scheme::ALL {
            let corr = postprocess(&p, &gs, &fine, scheme, &LinSolveConfig::default()).unwrap();
            assert!(corr.w_hat.norm_h1() < 1e-12, "{scheme:?}");
            assert!((&corr.u_hat - &c).norm_h1() < 1e-12, "{scheme:?}");
            assert!((corr.lambda_hat - 1.0 / (2.0 * PI)).abs() < 1e-12);
        }
    }

    #[test]
    fn normalization_modes() {
        let (_, gs) = exact_constant(3);
        let b = gs.basis.clone();
        let zero = SpectralField::zeros(&b);
        let (alpha, u) = normalize_correction(&gs, &zero, Normalization::Affine).unwrap();
        assert_eq!(alpha, 0.0);
        assert!((&u - &gs.u).norm_l2() < 1e-16);

        let a = Complex64::new(0.6 / 2f64.sqrt(), 0.0);
        let mut w = SpectralField::single_mode(&b, [1, 0, 0], a).unwrap();
        w.axpy(1.0, &SpectralField::single_mode(&b, [-1, 0, 0], a).unwrap());
        let (alpha, u) = normalize_correction(&gs, &w, Normalization::Affine).unwrap();
        assert!((1.0 - alpha - 0.8).abs() < 1e-15);
        assert!((u.norm_l2() - 1.0).abs() < 1e-14);
        let (beta, v) = normalize_correction(&gs, &w, Normalization::Radial).unwrap();
        assert!((beta - 1.36f64.powf(-0.5)).abs() < 1e-15);
        assert!((v.norm_l2() - 1.0).abs() < 1e-14);

        let big = w.scaled(2.0);
        assert!(matches!(
            normalize_correction(&gs, &big, Normalization::Affine),
            Err(Error::CorrectionTooLarge { .. })
        ));
    }

    #[test]
    fn diagonal_formula_on_single_mode() {
        let b = make_basis(1, 8).unwrap();
        let mut r = SpectralField::single_mode(&b, [6, 0, 0], Complex64::new(1.0, 0.0)).unwrap();
        r.axpy(1.0, &SpectralField::single_mode(&b, [-6, 0, 0], Complex64::new(1.0, 0.0)).unwrap());
        let tau = perturbation_update(&r, 4, 0.0, 1.0);
        assert_eq!(tau.coeff(&[6, 0, 0]), Complex64::new(-1.0 / 36.0, 0.0));
        assert_eq!(tau.coeff(&[2, 0, 0]), Complex64::new(0.0, 0.0));
    }

    #[test]
    fn perturbation_needs_invertible_diagonal() {
        let p = Problem::free_cubic(1).unwrap().with_mu(20.0).unwrap();
        let b = make_basis(1, 1).unwrap();
        let gs = GroundState::from_state(&p, SpectralField::unit_constant(&b), &b).unwrap();
        assert!(gs.lambda >= 2.0);
        let err = perturbation_correction(&p, &gs, &make_basis(1, 4).unwrap(), &LinSolveConfig::default()).unwrap_err();
        assert!(matches!(err, Error::DiagonalNotInvertible { .. }));
    }

    #[test]
    fn outputs_are_normalized_orthogonal_and_positive() {
        let p = Problem::cosine(1).unwrap();
        let gs = solved(&p, 6);
        let fine = make_basis(1, 24).unwrap();
        let q = ProblemSpec {
            d: 1,
            a0: 1.0,
            mu: 1.0,
            potential: PotentialSpec::Cosine {
                offset: 2.0,
                terms: vec![crate::model::CosineTerm { amplitude: 1.0, k: vec![1] }],
            },
            nonlinearity: Nonlinearity::default(),
        }
        .build()
        .unwrap();
        let gs_q = solved(&q, 6);
        for scheme in Scheme::ALL {
            let (prob, g) = if scheme == Scheme::Tg2b { (&q, &gs_q) } else { (&p, &gs) };
            let corr = postprocess(prob, g, &fine, scheme, &LinSolveConfig::default()).unwrap();
            assert!((corr.u_hat.norm_l2() - 1.0).abs() < 1e-12, "{scheme:?}");
            assert!(corr.u_hat.mean_coefficient() > 0.0);
            let uf = prolong(&g.u, &fine).unwrap();
            assert!(corr.w_hat.dot(&uf).abs() < 1e-11, "{scheme:?}");
            assert!(corr.a_ww >= -1e-12);
        }
    }

    #[test]
    fn newton_output_satisfies_two_grid_identity_on_complement() {
        let p = Problem::cosine(1).unwrap();
        let gs = solved(&p, 5);
        let fine = make_basis(1, 20).unwrap();
        let lin = LinSolveConfig::default();
        let corr = reconstructed_error(&p, &gs, &fine, &lin).unwrap();
        let u_f = prolong(&gs.u, &fine).unwrap();
        let mut v = u_f.clone();
        v.axpy(1.0, &corr.w_hat);
        let lhs = p.apply_linearized(&u_f, gs.lambda, &v).unwrap();
        // 2 μ g'(u²)u² · u, evaluated on the grid
        let nl = p.nonlinearity();
        let vals: Vec<f64> = u_f.grid_real().iter().map(|&x| 2.0 * p.mu() * nl.g_prime_times_t(x * x) * x).collect();
        let rhs = SpectralField::from_real_grid(&fine, &vals);
        let mut diff = (&lhs - &rhs).into_coeffs();
        let q = [u_f.normalized().unwrap().into_coeffs()];
        project_out(&mut diff, &q);
        let diff = SpectralField::from_coeffs(&fine, diff).unwrap();
        assert!(diff.norm_hm1() <= 10.0 * lin.tol, "{:e}", diff.norm_hm1());
    }

    #[test]
    fn linear_newton_with_coarse_equal_fine_is_zero() {
        let p = Problem::cosine(1).unwrap().with_mu(0.0).unwrap();
        let gs = solved(&p, 8);
        let lin = LinSolveConfig { min_fine_ratio: 1, ..Default::default() };
        let corr = reconstructed_error(&p, &gs, &gs.basis.clone(), &lin).unwrap();
        assert!(corr.w_hat.norm_h1() < 1e-10);
    }

    #[test]
    fn all_schemes_fix_discrete_solution_when_coarse_is_fine() {
        let p = Problem::cosine(1).unwrap();
        let gs = solved(&p, 8);
        let lin = LinSolveConfig { min_fine_ratio: 1, ..Default::default() };
        for scheme in [Scheme::Newton, Scheme::Tg1, Scheme::Tg2a, Scheme::Pert] {
            let corr = postprocess(&p, &gs, &gs.basis.clone(), scheme, &lin).unwrap();
            assert!((&corr.u_hat - &gs.u).norm_h1() < 1e-9, "{scheme:?}: {:e}", (&corr.u_hat - &gs.u).norm_h1());
        }
    }

    #[test]
    fn mu_zero_schemes() {
        let p = Problem::free_cubic(1).unwrap().with_mu(0.0).unwrap();
        let (_, gs_c) = exact_constant(3);
        let gs = GroundState::from_state(&p, gs_c.u.clone(), &gs_c.basis).unwrap();
        assert!(gs.lambda.abs() < 1e-15);
        let fine = make_basis(1, 12).unwrap();
        let c = SpectralField::unit_constant(&fine);
        let corr = two_grid_scheme2a(&p, &gs, &fine, &LinSolveConfig::default()).unwrap();
        assert!((&corr.u_hat - &c).norm_h1() < 1e-12);
        assert!(corr.diagnostics.note.is_some());
    }

    fn cosine_with_offset(amplitude: f64, offset: f64) -> Problem {
        ProblemSpec {
            d: 1,
            a0: 1.0,
            mu: 1.0,
            potential: PotentialSpec::Cosine {
                offset,
                terms: vec![crate::model::CosineTerm { amplitude, k: vec![1] }],
            },
            nonlinearity: Nonlinearity::default(),
        }
        .build()
        .unwrap()
    }

    #[test]
    fn scheme2b_handles_an_indefinite_bare_operator() {
        // −Δ + 3cos(x) has a negative bottom eigenvalue but is invertible
        let p = cosine_with_offset(3.0, 0.0);
        let gs = solved(&p, 6);
        let fine = make_basis(1, 24).unwrap();
        let corr = two_grid_scheme2b(&p, &gs, &fine, &LinSolveConfig::default()).unwrap();
        assert!(corr.diagnostics.note.as_deref().unwrap().contains("MINRES"));
        // the solve itself is checked against the operator
        let bare = p.bare_operator(&fine).unwrap();
        let u_f = prolong(&gs.u, &fine).unwrap();
        let nonlinear = &p.fock_operator(&u_f).unwrap().apply(&u_f) - &bare.apply(&u_f);
        let mut rhs = u_f.scaled(gs.lambda);
        rhs.axpy(-1.0, &nonlinear);
        let au = bare.apply(&corr.u_hat);
        let scale = au.dot(&rhs) / au.dot(&au);
        assert!((&au.scaled(scale) - &rhs).norm_hm1() < 1e-9 * rhs.norm_hm1());
    }

    #[test]
    fn scheme2b_on_singular_bare_operator_is_reported() {
        // shift −Δ + cos(x) so that its bottom eigenvalue is zero
        let fine = make_basis(1, 24).unwrap();
        let w = cosine_with_offset(1.0, 0.0);
        let bottom = DenseOracle::eigenvalues(&DenseOracle::new(&w, &fine).unwrap().bare_matrix())[0];
        let p = cosine_with_offset(1.0, -bottom);
        let gs = solved(&p, 4);
        match two_grid_scheme2b(&p, &gs, &fine, &LinSolveConfig::default()) {
            Err(Error::IndefiniteOperator { curvature }) => assert!(curvature.abs() < 1e-8),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn fine_space_must_be_large_enough() {
        let (p, gs) = exact_constant(4);
        let err = reconstructed_error(&p, &gs, &make_basis(1, 6).unwrap(), &LinSolveConfig::default()).unwrap_err();
        assert_eq!(err, Error::FineSpaceTooSmall { coarse: 4, fine: 6, required: 8 });
    }
}
