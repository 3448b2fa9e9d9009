//! A posteriori estimates for a discrete ground state: residual dual norm,
//! energy bounds from the reconstructed error, the spectral gap and a
//! Newton–Kantorovich validity check.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corrector::{reconstructed_error, Correction, LinSolveConfig, Scheme};
use crate::error::{Error, Result};
use crate::linalg::{dot, lobpcg, minres, EigenOptions, LinearOptions, Vector};
use crate::model::{GroundState, Problem};
use crate::solver::lowest_pairs;
use crate::spectral::{prolong, BasisSpec, SpectralField};

/// Label attached to certificates: γ comes from the discrete fine space.
pub const CERTIFICATE_LABEL: &str = "discrete-certified";

/// Sup-norm embedding constant of H¹ on (0, 2π): ‖w‖_∞ ≤ C ‖w‖_{H¹} with
/// C² = Σ_k (1 + k²)⁻¹ / (2π) = π coth(π) / (2π).
pub fn sup_embedding_constant() -> f64 {
    (PI / PI.tanh() / (2.0 * PI)).sqrt()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    /// ‖𝒜_u u − λ u‖_{H⁻¹} on the fine basis.
    pub residual_dual: f64,
    pub energy_upper: f64,
    pub energy_lower: f64,
    pub a_ww: f64,
    pub lambda1: f64,
    pub lambda2: f64,
    pub gap: f64,
    pub gamma: Option<f64>,
    pub eps: Option<f64>,
    #[serde(rename = "L_of_2eps")]
    pub l_of_2eps: Option<f64>,
    pub validity_alpha: Option<f64>,
    pub certified: bool,
    /// Bound on ‖u − u_δ‖_{H¹} + |λ − λ_δ|; `None` stands for +∞.
    pub error_bound_h1: Option<f64>,
    /// The cruder bound 2γ‖ℱ(u_δ, λ_δ)‖, reported alongside when certified.
    pub residual_bound_h1: Option<f64>,
    pub label: Option<String>,
}

impl EstimateReport {
    pub fn error_bound(&self) -> f64 {
        self.error_bound_h1.unwrap_or(f64::INFINITY)
    }

    pub fn to_table(&self) -> String {
        let opt = |x: Option<f64>| x.map_or("-".to_string(), |v| format!("{v:.6e}"));
        let rows = [
            ("residual (H^-1)", format!("{:.6e}", self.residual_dual)),
            ("energy upper", format!("{:.15}", self.energy_upper)),
            ("energy lower", format!("{:.15}", self.energy_lower)),
            ("a(w,w)", format!("{:.6e}", self.a_ww)),
            ("lambda1", format!("{:.15}", self.lambda1)),
            ("lambda2", format!("{:.15}", self.lambda2)),
            ("gap", format!("{:.6e}", self.gap)),
            ("gamma", opt(self.gamma)),
            ("eps", opt(self.eps)),
            ("L(2 eps)", opt(self.l_of_2eps)),
            ("validity alpha", opt(self.validity_alpha)),
            ("certified", self.certified.to_string()),
            ("error bound (H^1)", self.error_bound_h1.map_or("inf".into(), |v| format!("{v:.6e}"))),
        ];
        let mut out = String::new();
        for (k, v) in rows {
            out.push_str(&format!("{k:<20} {v}\n"));
        }
        out
    }
}

pub fn residual_dual_norm(p: &Problem, gs: &GroundState, fine: &BasisSpec) -> Result<f64> {
    if fine.cutoff() < gs.basis.cutoff() || fine.dim() != gs.basis.dim() {
        return Err(Error::FineSpaceTooSmall {
            coarse: gs.basis.cutoff(),
            fine: fine.cutoff(),
            required: gs.basis.cutoff(),
        });
    }
    Ok(p.residual(gs, fine)?.norm_hm1())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyBounds {
    pub lower: f64,
    pub upper: f64,
    /// E(u_δ) − ½ a_ww, which is also the best available estimate.
    pub best: f64,
}

/// Upper bound E(u_δ) and asymptotic lower bound E(u_δ) − ½ a_{u_δ}(ŵ, ŵ).
pub fn energy_bounds(gs: &GroundState, corr: &Correction) -> Result<EnergyBounds> {
    if corr.scheme != Scheme::Newton {
        return Err(Error::InvalidInput(format!(
            "energy bounds need the reconstructed error, got scheme {}",
            corr.scheme.name()
        )));
    }
    let slack = 1e-12 * (1.0 + corr.w_hat.norm_h1().powi(2));
    if corr.a_ww < -slack {
        return Err(Error::CoercivityViolated { curvature: corr.a_ww });
    }
    let lower = gs.energy - 0.5 * corr.a_ww;
    Ok(EnergyBounds {
        lower,
        upper: gs.energy,
        best: lower,
    })
}

/// Two lowest eigenvalues of 𝒜_{u_δ} on the fine basis.
pub fn spectral_gap(p: &Problem, gs: &GroundState, fine: &BasisSpec, lin: &LinSolveConfig) -> Result<(f64, f64)> {
    let u_f = prolong(&gs.u, fine)?;
    let op = p.fock_operator(&u_f)?;
    let mut rng = ChaCha8Rng::seed_from_u64(lin.seed);
    let (values, _) = lowest_pairs(
        fine,
        |x| op.apply_coeffs(x),
        p.a0(),
        &[u_f.coeffs().to_vec()],
        2,
        lin.tol.max(1e-11),
        &mut rng,
        "spectral gap eigensolve",
    )?;
    if values.len() < 2 {
        return Err(Error::InvalidInput("fine space too small to resolve two eigenvalues".into()));
    }
    let gap = values[1] - values[0];
    if gap <= 0.0 {
        return Err(Error::DegenerateGroundState { gap });
    }
    Ok((values[0], values[1]))
}

/// ‖ℱ‖ scalars that the validity criterion is assembled from.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Certificate {
    pub gamma: f64,
    pub eps: f64,
    pub l_of_2eps: f64,
    pub validity_alpha: f64,
    pub certified: bool,
}

/// Lipschitz bound of Dℱ over the ball of radius α around (u_δ, λ_δ) in
/// H¹ × ℝ, cubic case in 1D. `u_sup` bounds ‖u_δ‖_∞.
pub fn lipschitz_bound(alpha: f64, mu: f64, u_sup: f64) -> f64 {
    let c = sup_embedding_constant();
    // 3μ(v² − u²)h − (μ' − λ)h − η(v − u) in the first row, 2(v − u, h) in the second
    let first = 3.0 * mu * (2.0 * u_sup + c * alpha) * c * alpha + alpha + alpha;
    let second = 2.0 * alpha;
    first.hypot(second)
}

/// Whether the Newton–Kantorovich check is available for `p`.
pub fn certificate_supported(p: &Problem) -> bool {
    check_certificate_support(p).is_ok()
}

fn check_certificate_support(p: &Problem) -> Result<()> {
    if p.dim() != 1 {
        return Err(Error::CertificateUnsupported(format!("dimension {} (only d = 1 is supported)", p.dim())));
    }
    if p.mu() != 0.0 && !p.nonlinearity().is_cubic() {
        return Err(Error::CertificateUnsupported(format!(
            "power {} (only the cubic nonlinearity is supported)",
            p.nonlinearity().power
        )));
    }
    Ok(())
}

/// ε, γ and L(2ε) for (u_δ, λ_δ) on the fine basis.
///
/// The bordered Jacobian is symmetrized as K = [[L, −u], [−uᵀ, 0]]; the true
/// Jacobian differs by a factor −2 on the constraint row, so ‖Dℱ⁻¹‖ ≤ ‖K⁻¹‖
/// and ε is unchanged for a normalized u_δ.
pub fn certificate(p: &Problem, gs: &GroundState, fine: &BasisSpec, lin: &LinSolveConfig) -> Result<Certificate> {
    check_certificate_support(p)?;
    let u_f = prolong(&gs.u, fine)?;
    let op = p.linearized_operator(&u_f, gs.lambda)?;
    let n = fine.len();
    let u = u_f.coeffs().to_vec();
    let bordered = |x: &[Complex64]| -> Vector {
        let mut y = op.apply_coeffs(&x[..n]);
        let s = x[n].re;
        y.iter_mut().zip(&u).for_each(|(y, u)| *y -= u * s);
        y.push(Complex64::new(-dot(&u, &x[..n]), 0.0));
        y
    };

    // ε = ‖K⁻¹(r, 0)‖_{H¹×ℝ}
    let r = p.residual(gs, fine)?;
    let mut rhs = r.coeffs().to_vec();
    rhs.push(Complex64::new(0.0, 0.0));
    let mut precond: Vec<f64> = fine.norm2().iter().map(|k2| 1.0 / (p.a0() * (1.0 + k2))).collect();
    precond.push(1.0);
    let sol = minres(bordered, &rhs, &precond, &LinearOptions { tol: 1e-10, max_iter: lin.max_iter });
    if !sol.converged {
        return Err(Error::NonConvergence {
            what: "bordered system",
            iterations: sol.iterations,
            residual: sol.relative_residual,
        });
    }
    let mut w = SpectralField::from_coeffs(fine, sol.x[..n].to_vec())?;
    w.symmetrize();
    let nu = sol.x[n].re;
    let eps = w.norm_h1().hypot(nu);

    // γ = 1/σ_min of K in scaled variables (H¹ → H⁻¹ becomes ℓ² → ℓ²)
    let scale: Vec<f64> = fine.norm2().iter().map(|k2| (1.0 + k2).powf(-0.5)).collect();
    let scaled = |x: &[Complex64]| -> Vector {
        let mut z: Vector = x[..n].iter().zip(&scale).map(|(c, s)| c * s).collect();
        z.push(x[n]);
        let mut y = bordered(&z);
        y[..n].iter_mut().zip(&scale).for_each(|(c, s)| *c *= s);
        y
    };
    let squared = |x: &[Complex64]| scaled(&scaled(x));
    let mut rng = ChaCha8Rng::seed_from_u64(lin.seed);
    let mut block: Vec<Vector> = Vec::new();
    let mut seed = u.clone();
    seed.push(Complex64::new(0.0, 0.0));
    block.push(seed);
    for _ in 0..3 {
        let mut v = SpectralField::random_real(fine, &mut rng, 1.0).into_coeffs();
        v.push(Complex64::new(0.5, 0.0));
        block.push(v);
    }
    let ones = vec![1.0; n + 1];
    let eig = lobpcg(
        squared,
        &ones,
        &ones,
        block,
        &EigenOptions { nev: 1, guard: 3, tol: 1e-10, max_iter: 5000 },
    );
    if !eig.converged {
        return Err(Error::NonConvergence {
            what: "stability constant eigensolve",
            iterations: eig.iterations,
            residual: eig.residuals[0],
        });
    }
    // a Ritz value overestimates the smallest eigenvalue by at most the residual
    let sigma2 = (eig.values[0] - eig.residuals[0]).max(0.0);
    let gamma = if sigma2 > 0.0 { 1.0 / sigma2.sqrt() } else { f64::INFINITY };

    let s = 1.0 / (2.0 * PI).sqrt();
    let u_sup = s * gs.u.coeffs().iter().map(|c| c.norm()).sum::<f64>();
    let l = lipschitz_bound(2.0 * eps, p.mu(), u_sup);
    let validity_alpha = 2.0 * gamma * l;
    Ok(Certificate {
        gamma,
        eps,
        l_of_2eps: l,
        validity_alpha,
        certified: validity_alpha.is_finite() && validity_alpha <= 1.0,
    })
}

/// Full report including the certificate; errors when the certificate is not
/// available for this problem.
pub fn kantorovich_certificate(p: &Problem, gs: &GroundState, fine: &BasisSpec, lin: &LinSolveConfig) -> Result<EstimateReport> {
    check_certificate_support(p)?;
    estimate(p, gs, fine, lin, true)
}

/// Residual, energy bounds and gap; the certificate fields are filled when
/// `with_certificate` is set (and then must be supported).
pub fn estimate(p: &Problem, gs: &GroundState, fine: &BasisSpec, lin: &LinSolveConfig, with_certificate: bool) -> Result<EstimateReport> {
    let residual_dual = residual_dual_norm(p, gs, fine)?;
    let corr = reconstructed_error(p, gs, fine, lin)?;
    let bounds = energy_bounds(gs, &corr)?;
    let (lambda1, lambda2) = spectral_gap(p, gs, fine, lin)?;
    let mut report = EstimateReport {
        residual_dual,
        energy_upper: bounds.upper,
        energy_lower: bounds.lower,
        a_ww: corr.a_ww,
        lambda1,
        lambda2,
        gap: lambda2 - lambda1,
        gamma: None,
        eps: None,
        l_of_2eps: None,
        validity_alpha: None,
        certified: false,
        error_bound_h1: None,
        residual_bound_h1: None,
        label: None,
    };
    if with_certificate {
        let c = certificate(p, gs, fine, lin)?;
        report.gamma = Some(c.gamma);
        report.eps = Some(c.eps);
        report.l_of_2eps = Some(c.l_of_2eps);
        report.validity_alpha = Some(c.validity_alpha);
        report.certified = c.certified;
        if c.certified {
            report.error_bound_h1 = Some(2.0 * c.eps);
            report.residual_bound_h1 = Some(2.0 * c.gamma * residual_dual);
            report.label = Some(CERTIFICATE_LABEL.to_string());
        }
    }
    Ok(report)
}
