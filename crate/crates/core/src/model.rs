//! The periodic Gross–Pitaevskii-type model: energy, Fock and linearized
//! operators, residuals and Rayleigh quotients.

use std::f64::consts::PI;
use std::path::PathBuf;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::{
    cell_scale, make_basis, prolong, scatter, symmetrize, BasisSpec, FieldRecord, SpectralField,
};

/// Power nonlinearity G(t) = t^p / p, so g(t) = t^{p-1} and g'(t) t = (p-1) t^{p-1}.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Nonlinearity {
    pub power: f64,
}

impl Default for Nonlinearity {
    fn default() -> Self {
        Self { power: 2.0 }
    }
}

impl Nonlinearity {
    pub fn power(p: f64) -> Result<Self> {
        if !(p > 1.0 && p < 3.0) {
            return Err(Error::InvalidInput(format!(
                "power nonlinearity needs 1 < p < 3, got {p}"
            )));
        }
        Ok(Self { power: p })
    }

    pub fn is_cubic(&self) -> bool {
        self.power == 2.0
    }

    /// G(t)
    pub fn energy_density(&self, t: f64) -> f64 {
        let t = t.max(0.0);
        if self.is_cubic() {
            0.5 * t * t
        } else {
            t.powf(self.power) / self.power
        }
    }

    /// g(t)
    pub fn g(&self, t: f64) -> f64 {
        let t = t.max(0.0);
        if self.is_cubic() {
            t
        } else {
            t.powf(self.power - 1.0)
        }
    }

    /// g'(t)·t, evaluated in closed form so that p < 2 stays finite at t = 0.
    pub fn g_prime_times_t(&self, t: f64) -> f64 {
        let t = t.max(0.0);
        if self.is_cubic() {
            t
        } else {
            (self.power - 1.0) * t.powf(self.power - 1.0)
        }
    }
}

/// One term a·cos(k·x) of a cosine potential.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CosineTerm {
    pub amplitude: f64,
    pub k: Vec<i32>,
}

/// Catalog of potentials accepted in problem files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PotentialSpec {
    Zero,
    /// V(x) = offset + Σ a_j cos(k_j · x)
    Cosine {
        #[serde(default)]
        offset: f64,
        #[serde(default)]
        terms: Vec<CosineTerm>,
    },
    /// V(x) = amplitude · Σ_axes (P_ρ(x_i) − 1) with the Poisson kernel
    /// P_ρ(t) = (1 − ρ²)/(1 − 2ρ cos t + ρ²); Fourier coefficients decay like ρ^|k|.
    Poisson { amplitude: f64, rho: f64 },
    /// Coefficients read from a field record (JSON).
    File { path: PathBuf },
}

impl PotentialSpec {
    /// cos(x) in 1D, cos(x) + cos(y) in 2D, and so on.
    pub fn default_cosine(d: usize) -> Self {
        let terms = (0..d)
            .map(|axis| {
                let mut k = vec![0; d];
                k[axis] = 1;
                CosineTerm { amplitude: 1.0, k }
            })
            .collect();
        PotentialSpec::Cosine { offset: 0.0, terms }
    }

    pub fn build(&self, d: usize) -> Result<SpectralField> {
        let scale = cell_scale(d);
        match self {
            PotentialSpec::Zero => Ok(SpectralField::zeros(&make_basis(d, 0)?)),
            PotentialSpec::Cosine { offset, terms } => {
                let mut cutoff = 0usize;
                for t in terms {
                    if t.k.len() != d {
                        return Err(Error::InvalidInput(format!(
                            "cosine term wave vector {:?} is not {d}-dimensional",
                            t.k
                        )));
                    }
                    let n2: i64 = t.k.iter().map(|&c| (c as i64) * (c as i64)).sum();
                    cutoff = cutoff.max((n2 as f64).sqrt().ceil() as usize);
                }
                let basis = make_basis(d, cutoff)?;
                let mut v = SpectralField::zeros(&basis);
                v.coeffs_mut()[basis.zero_index()] += Complex64::new(offset * scale, 0.0);
                for t in terms {
                    let mut k = [0; 3];
                    k[..d].copy_from_slice(&t.k);
                    let neg = [-k[0], -k[1], -k[2]];
                    let half = Complex64::new(0.5 * t.amplitude * scale, 0.0);
                    for kk in [k, neg] {
                        let i = basis.index_of(&kk).expect("term inside its own cutoff");
                        v.coeffs_mut()[i] += half;
                    }
                }
                Ok(v)
            }
            PotentialSpec::Poisson { amplitude, rho } => {
                if !(*rho > 0.0 && *rho < 1.0) {
                    return Err(Error::InvalidInput(format!(
                        "Poisson potential needs 0 < rho < 1, got {rho}"
                    )));
                }
                // keep every coefficient above 1e-18 relative
                let cutoff = ((1e-18f64).ln() / rho.ln()).ceil() as usize;
                let basis = make_basis(d, cutoff)?;
                let mut v = SpectralField::zeros(&basis);
                for axis in 0..d {
                    for k in 1..=cutoff as i32 {
                        let c = Complex64::new(amplitude * rho.powi(k) * scale, 0.0);
                        for sign in [1, -1] {
                            let mut kk = [0; 3];
                            kk[axis] = sign * k;
                            let i = basis.index_of(&kk).expect("axis mode inside ball");
                            v.coeffs_mut()[i] += c;
                        }
                    }
                }
                Ok(v)
            }
            PotentialSpec::File { path } => {
                let text = std::fs::read_to_string(path)?;
                let record: FieldRecord = serde_json::from_str(&text)?;
                if record.d != d {
                    return Err(Error::InvalidInput(format!(
                        "potential file is {}-dimensional, problem is {d}-dimensional",
                        record.d
                    )));
                }
                SpectralField::from_record(&record)
            }
        }
    }
}

/// Problem description as it appears in configuration files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSpec {
    pub d: usize,
    #[serde(default = "one")]
    pub a0: f64,
    #[serde(default = "one")]
    pub mu: f64,
    pub potential: PotentialSpec,
    #[serde(default)]
    pub nonlinearity: Nonlinearity,
}

fn one() -> f64 {
    1.0
}

impl ProblemSpec {
    pub fn build(&self) -> Result<Problem> {
        let nl = Nonlinearity::power(self.nonlinearity.power)?;
        Problem::new(self.d, self.a0, self.potential.build(self.d)?, self.mu, nl)
    }
}

/// −a0 Δ + V + μ g(u²) on (0, 2π)^d with a real potential V.
#[derive(Clone, Debug)]
pub struct Problem {
    d: usize,
    a0: f64,
    potential: SpectralField,
    mu: f64,
    nl: Nonlinearity,
    potential_is_zero: bool,
}

impl Problem {
    pub fn new(d: usize, a0: f64, potential: SpectralField, mu: f64, nl: Nonlinearity) -> Result<Self> {
        if !(1..=3).contains(&d) {
            return Err(Error::UnsupportedDimension(d));
        }
        if potential.basis().dim() != d {
            return Err(Error::BasisMismatch(format!(
                "potential is {}-dimensional, problem is {d}-dimensional",
                potential.basis().dim()
            )));
        }
        if !(a0 > 0.0 && a0.is_finite()) {
            return Err(Error::InvalidInput(format!("diffusion coefficient must be positive, got {a0}")));
        }
        if !(mu >= 0.0 && mu.is_finite()) {
            return Err(Error::InvalidInput(format!("nonlinearity strength must be >= 0, got {mu}")));
        }
        let scale = potential.norm_l2().max(1.0);
        if potential.conjugate_symmetry_defect() > 1e-12 * scale {
            return Err(Error::InvalidInput("potential is not real-valued".into()));
        }
        let mut potential = potential;
        potential.symmetrize();
        let potential_is_zero = potential.coeffs().iter().all(|c| c.norm() == 0.0);
        Ok(Self {
            d,
            a0,
            potential,
            mu,
            nl,
            potential_is_zero,
        })
    }

    /// V = 0, μ = 1, cubic nonlinearity, a0 = 1: the constant function is the exact ground state.
    pub fn free_cubic(d: usize) -> Result<Self> {
        Self::new(d, 1.0, SpectralField::zeros(&make_basis(d, 0)?), 1.0, Nonlinearity::default())
    }

    /// V = cos(x) (+ cos(y) …), μ = 1, cubic nonlinearity.
    pub fn cosine(d: usize) -> Result<Self> {
        Self::new(
            d,
            1.0,
            PotentialSpec::default_cosine(d).build(d)?,
            1.0,
            Nonlinearity::default(),
        )
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn a0(&self) -> f64 {
        self.a0
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn nonlinearity(&self) -> Nonlinearity {
        self.nl
    }

    pub fn potential(&self) -> &SpectralField {
        &self.potential
    }

    pub fn potential_is_zero(&self) -> bool {
        self.potential_is_zero
    }

    pub fn with_mu(&self, mu: f64) -> Result<Self> {
        Self::new(self.d, self.a0, self.potential.clone(), mu, self.nl)
    }

    fn check_basis(&self, basis: &BasisSpec) -> Result<()> {
        if basis.dim() != self.d {
            return Err(Error::BasisMismatch(format!(
                "field is {}-dimensional, problem is {}-dimensional",
                basis.dim(),
                self.d
            )));
        }
        Ok(())
    }

    /// V sampled on the grid of `basis`. Only modes with |k| ≤ 2M matter for
    /// Galerkin products on X_M, and those fit on the grid without wrap-around.
    pub fn potential_grid(&self, basis: &BasisSpec) -> Vec<f64> {
        let reach = (2 * basis.cutoff()) as i64;
        let n = basis.grid_size();
        let n_i = n as i64;
        let d = basis.dim();
        let mut data = vec![Complex64::new(0.0, 0.0); basis.grid_points()];
        for (k, c) in self.potential.basis().modes().iter().zip(self.potential.coeffs()) {
            let k2: i64 = k.iter().map(|&x| (x as i64) * (x as i64)).sum();
            if k2 > reach * reach {
                continue;
            }
            let flat = k[..d]
                .iter()
                .fold(0usize, |acc, &x| acc * n + (x as i64).rem_euclid(n_i) as usize);
            data[flat] += c;
        }
        basis.plans().inverse(&mut data, d);
        let s = 1.0 / cell_scale(d);
        data.iter().map(|x| x.re * s).collect()
    }

    fn build_operator(&self, basis: &BasisSpec, extra: Option<Vec<f64>>, shift: f64) -> Hamiltonian {
        let kinetic = basis.norm2().iter().map(|&k2| self.a0 * k2 - shift).collect();
        let multiplier = match (self.potential_is_zero, extra) {
            (true, None) => None,
            (true, Some(m)) => Some(m),
            (false, extra) => {
                let mut v = self.potential_grid(basis);
                if let Some(m) = extra {
                    v.iter_mut().zip(&m).for_each(|(a, b)| *a += b);
                }
                Some(v)
            }
        };
        let multiplier = multiplier.filter(|m| m.iter().any(|&x| x != 0.0));
        Hamiltonian {
            basis: basis.clone(),
            kinetic,
            multiplier,
        }
    }

    /// The linear part 𝒜 = −a0 Δ + V on `basis`.
    pub fn bare_operator(&self, basis: &BasisSpec) -> Result<Hamiltonian> {
        self.check_basis(basis)?;
        Ok(self.build_operator(basis, None, 0.0))
    }

    /// 𝒜_u = −a0 Δ + V + μ g(u²) on u's basis.
    pub fn fock_operator(&self, u: &SpectralField) -> Result<Hamiltonian> {
        self.check_basis(u.basis())?;
        let extra = (self.mu != 0.0).then(|| {
            u.grid_real()
                .iter()
                .map(|&x| self.mu * self.nl.g(x * x))
                .collect()
        });
        Ok(self.build_operator(u.basis(), extra, 0.0))
    }

    /// −a0 Δ + V + μ[2 g'(u²) u² + g(u²)] − λ on u's basis.
    pub fn linearized_operator(&self, u: &SpectralField, lambda: f64) -> Result<Hamiltonian> {
        self.check_basis(u.basis())?;
        let extra = (self.mu != 0.0).then(|| {
            u.grid_real()
                .iter()
                .map(|&x| {
                    let t = x * x;
                    self.mu * (2.0 * self.nl.g_prime_times_t(t) + self.nl.g(t))
                })
                .collect()
        });
        Ok(self.build_operator(u.basis(), extra, lambda))
    }

    pub fn apply_fock(&self, u: &SpectralField, v: &SpectralField) -> Result<SpectralField> {
        same_basis(u, v)?;
        Ok(self.fock_operator(u)?.apply(v))
    }

    pub fn apply_linearized(&self, u: &SpectralField, lambda: f64, v: &SpectralField) -> Result<SpectralField> {
        same_basis(u, v)?;
        Ok(self.linearized_operator(u, lambda)?.apply(v))
    }

    /// ½ a(v, v) + (μ/2) ∫ G(v²), by exact quadrature on the dealiased grid.
    pub fn energy(&self, v: &SpectralField) -> Result<f64> {
        self.check_basis(v.basis())?;
        let basis = v.basis();
        let kinetic: f64 = basis
            .norm2()
            .iter()
            .zip(v.coeffs())
            .map(|(&k2, c)| k2 * c.norm_sqr())
            .sum::<f64>()
            * self.a0;
        let values = v.grid_real();
        let weight = (2.0 * PI).powi(self.d as i32) / basis.grid_points() as f64;
        let potential = if self.potential_is_zero {
            0.0
        } else {
            self.potential_grid(basis)
                .iter()
                .zip(&values)
                .map(|(w, x)| w * x * x)
                .sum::<f64>()
                * weight
        };
        let nonlinear = if self.mu == 0.0 {
            0.0
        } else {
            values
                .iter()
                .map(|&x| self.nl.energy_density(x * x))
                .sum::<f64>()
                * weight
        };
        Ok(0.5 * (kinetic + potential) + 0.5 * self.mu * nonlinear)
    }

    /// Λ_v = ⟨𝒜_v v, v⟩ / ‖v‖².
    pub fn rayleigh(&self, v: &SpectralField) -> Result<f64> {
        let vv = v.norm_l2().powi(2);
        if vv == 0.0 {
            return Err(Error::ZeroField("Rayleigh quotient"));
        }
        Ok(self.fock_operator(v)?.apply(v).dot(v) / vv)
    }

    /// 𝒜_{u_δ} u_δ − λ_δ u_δ represented on `fine`.
    pub fn residual(&self, gs: &GroundState, fine: &BasisSpec) -> Result<SpectralField> {
        self.residual_of(&gs.u, gs.lambda, fine)
    }

    pub fn residual_of(&self, u: &SpectralField, lambda: f64, fine: &BasisSpec) -> Result<SpectralField> {
        let uf = prolong(u, fine)?;
        let mut r = self.fock_operator(&uf)?.apply(&uf);
        r.axpy(-lambda, &uf);
        Ok(r)
    }
}

fn same_basis(u: &SpectralField, v: &SpectralField) -> Result<()> {
    if u.basis().same_as(v.basis()) {
        Ok(())
    } else {
        Err(Error::BasisMismatch(format!("{:?} vs {:?}", u.basis(), v.basis())))
    }
}

/// A Schrödinger-type operator: Fourier-diagonal part plus a real multiplication
/// on the grid, projected back onto the basis.
#[derive(Clone, Debug)]
pub struct Hamiltonian {
    basis: BasisSpec,
    kinetic: Vec<f64>,
    multiplier: Option<Vec<f64>>,
}

impl Hamiltonian {
    pub fn basis(&self) -> &BasisSpec {
        &self.basis
    }

    /// Diagonal (Fourier) part, including any shift.
    pub fn diagonal(&self) -> &[f64] {
        &self.kinetic
    }

    pub fn is_diagonal(&self) -> bool {
        self.multiplier.is_none()
    }

    pub fn apply(&self, v: &SpectralField) -> SpectralField {
        debug_assert!(v.basis().same_as(&self.basis));
        SpectralField::from_coeffs(&self.basis, self.apply_coeffs(v.coeffs()))
            .expect("operator preserves the basis")
    }

    pub(crate) fn apply_coeffs(&self, x: &[Complex64]) -> Vec<Complex64> {
        let mut out: Vec<Complex64> = x.iter().zip(&self.kinetic).map(|(c, k)| c * k).collect();
        if let Some(m) = &self.multiplier {
            let d = self.basis.dim();
            let plans = self.basis.plans();
            let mut data = scatter(&self.basis, x);
            plans.inverse(&mut data, d);
            let s = 1.0 / self.basis.grid_points() as f64;
            data.iter_mut().zip(m).for_each(|(z, w)| *z *= w * s);
            plans.forward(&mut data, d);
            for (o, &j) in out.iter_mut().zip(self.basis.grid_index()) {
                *o += data[j];
            }
        }
        symmetrize(&mut out);
        out
    }

    /// ⟨H v, w⟩
    pub fn form(&self, v: &SpectralField, w: &SpectralField) -> f64 {
        self.apply(v).dot(w)
    }
}

/// Converged discrete ground state (u_δ, λ_δ) on X_M.
#[derive(Clone, Debug)]
pub struct GroundState {
    pub basis: BasisSpec,
    pub u: SpectralField,
    pub lambda: f64,
    pub energy: f64,
    /// ‖𝒜_u u − λ u‖_{H⁻¹} measured on a larger basis.
    pub residual_dual_norm: f64,
    pub iterations: usize,
    pub converged: bool,
    /// λ₂ − λ₁ of the frozen operator at the last outer iterate, when known.
    pub linear_gap: Option<f64>,
}

impl GroundState {
    /// Wraps a normalized state, computing λ, energy and the residual on `measure`.
    pub fn from_state(p: &Problem, u: SpectralField, measure: &BasisSpec) -> Result<Self> {
        let u = u.normalized()?.with_nonnegative_mean();
        let lambda = p.rayleigh(&u)?;
        let energy = p.energy(&u)?;
        let residual_dual_norm = p.residual_of(&u, lambda, measure)?.norm_hm1();
        Ok(Self {
            basis: u.basis().clone(),
            u,
            lambda,
            energy,
            residual_dual_norm,
            iterations: 0,
            converged: true,
            linear_gap: None,
        })
    }

    pub fn to_record(&self) -> GroundStateRecord {
        GroundStateRecord {
            d: self.basis.dim(),
            cutoff: self.basis.cutoff(),
            lambda: self.lambda,
            energy: self.energy,
            residual_dual_norm: self.residual_dual_norm,
            iterations: self.iterations,
            converged: self.converged,
            linear_gap: self.linear_gap,
            field: self.u.to_record(),
        }
    }

    pub fn from_record(record: &GroundStateRecord) -> Result<Self> {
        let u = SpectralField::from_record(&record.field)?;
        Ok(Self {
            basis: u.basis().clone(),
            u,
            lambda: record.lambda,
            energy: record.energy,
            residual_dual_norm: record.residual_dual_norm,
            iterations: record.iterations,
            converged: record.converged,
            linear_gap: record.linear_gap,
        })
    }
}

/// JSON form of a [`GroundState`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroundStateRecord {
    pub d: usize,
    #[serde(rename = "M")]
    pub cutoff: usize,
    pub lambda: f64,
    pub energy: f64,
    pub residual_dual_norm: f64,
    pub iterations: usize,
    pub converged: bool,
    pub linear_gap: Option<f64>,
    pub field: FieldRecord,
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random(basis: &BasisSpec, seed: u64) -> SpectralField {
        SpectralField::random_real(basis, &mut ChaCha8Rng::seed_from_u64(seed), 1.0)
    }

    fn unit(k: i32, m: usize) -> SpectralField {
        let b = make_basis(1, m).unwrap();
        // real unit-norm combination of e_k and e_{-k}
        let a = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        let mut f = SpectralField::single_mode(&b, [k, 0, 0], a).unwrap();
        f.axpy(1.0, &SpectralField::single_mode(&b, [-k, 0, 0], a).unwrap());
        f
    }

    #[test]
    fn constant_state_energy() {
        let p = Problem::free_cubic(1).unwrap();
        let b = make_basis(1, 6).unwrap();
        let c = SpectralField::unit_constant(&b);
        assert_relative_eq!(p.energy(&c).unwrap(), 1.0 / (8.0 * PI), max_relative = 1e-14);
        assert_relative_eq!(p.energy(&c).unwrap(), 0.039788735772973836, max_relative = 1e-14);
        assert_relative_eq!(p.rayleigh(&c).unwrap(), 1.0 / (2.0 * PI), max_relative = 1e-14);
    }

    #[test]
    fn linear_single_mode_energy_and_rayleigh() {
        let p = Problem::free_cubic(1).unwrap().with_mu(0.0).unwrap();
        let v = unit(1, 4);
        assert_relative_eq!(p.energy(&v).unwrap(), 0.5, max_relative = 1e-14);
        let v3 = unit(3, 4);
        assert_relative_eq!(p.rayleigh(&v3).unwrap(), 9.0, max_relative = 1e-14);
    }

    #[test]
    fn fock_examples() {
        let lin = Problem::free_cubic(2).unwrap().with_mu(0.0).unwrap();
        let b = make_basis(2, 3).unwrap();
        let op = lin.bare_operator(&b).unwrap();
        assert!(op.is_diagonal());
        assert_relative_eq!(op.diagonal()[b.index_of(&[2, 1, 0]).unwrap()], 5.0);

        let p = Problem::free_cubic(1).unwrap();
        let b = make_basis(1, 5).unwrap();
        let c = SpectralField::unit_constant(&b);
        let out = p.apply_fock(&c, &c).unwrap();
        assert!((&out - &c.scaled(1.0 / (2.0 * PI))).norm_l2() < 1e-15);

        let v = unit(2, 5);
        let lin1 = p.with_mu(0.0).unwrap();
        let out = lin1.apply_fock(&c, &v).unwrap();
        assert!((&out - &v.scaled(4.0)).norm_l2() < 1e-14);
    }

    #[test]
    fn linearized_examples() {
        let p = Problem::free_cubic(1).unwrap();
        let b = make_basis(1, 5).unwrap();
        let c = SpectralField::unit_constant(&b);
        let lambda = 1.0 / (2.0 * PI);
        let out = p.apply_linearized(&c, lambda, &c).unwrap();
        assert!((&out - &c.scaled(2.0 / (2.0 * PI))).norm_l2() < 1e-15);

        let q = Problem::cosine(1).unwrap().with_mu(0.0).unwrap();
        let u = random(&b, 1).normalized().unwrap();
        let v = random(&b, 2);
        let a = q.apply_linearized(&u, 0.3, &v).unwrap();
        let mut f = q.apply_fock(&u, &v).unwrap();
        f.axpy(-0.3, &v);
        assert!((&a - &f).norm_l2() < 1e-14);
    }

    #[test]
    fn constant_state_has_zero_residual_everywhere() {
        let p = Problem::free_cubic(1).unwrap();
        for m in [0, 1, 4, 9] {
            let b = make_basis(1, m).unwrap();
            let fine = make_basis(1, 4 * m + 1).unwrap();
            let gs = GroundState::from_state(&p, SpectralField::unit_constant(&b), &fine).unwrap();
            assert!(p.residual(&gs, &fine).unwrap().norm_hm1() < 1e-15);
            assert_relative_eq!(gs.lambda, 1.0 / (2.0 * PI), max_relative = 1e-14);
            assert_relative_eq!(gs.energy, 1.0 / (8.0 * PI), max_relative = 1e-14);
        }
    }

    #[test]
    fn mu_zero_reduces_to_linear_operator() {
        let p = Problem::cosine(1).unwrap().with_mu(0.0).unwrap();
        let b = make_basis(1, 7).unwrap();
        let u = random(&b, 3);
        let v = random(&b, 4);
        let bare = p.bare_operator(&b).unwrap().apply(&v);
        assert!((&bare - &p.apply_fock(&u, &v).unwrap()).norm_l2() < 1e-14);
    }

    #[test]
    fn nonlinearity_is_finite_at_zero() {
        let nl = Nonlinearity::power(1.5).unwrap();
        assert_eq!(nl.g(0.0), 0.0);
        assert_eq!(nl.g_prime_times_t(0.0), 0.0);
        assert!(nl.g_prime_times_t(1e-300).is_finite());
        assert!(Nonlinearity::power(3.0).is_err());
        assert!(Nonlinearity::power(1.0).is_err());
    }

    #[test]
    fn catalog_potentials() {
        let v = PotentialSpec::default_cosine(2).build(2).unwrap();
        let b = v.basis().clone();
        let grid = v.grid_real();
        let nodes = crate::spectral::GridField::nodes(&b);
        for (x, val) in nodes.iter().zip(grid) {
            assert!((val - (x[0].cos() + x[1].cos())).abs() < 1e-14);
        }
        let pois = PotentialSpec::Poisson { amplitude: -1.0, rho: 0.5 }.build(1).unwrap();
        let p = Problem::new(1, 1.0, pois, 1.0, Nonlinearity::default()).unwrap();
        let fine = make_basis(1, 40).unwrap();
        let on_grid = p.potential_grid(&fine);
        for (x, val) in crate::spectral::GridField::nodes(&fine).iter().zip(on_grid) {
            let rho: f64 = 0.5;
            let kernel = (1.0 - rho * rho) / (1.0 - 2.0 * rho * x[0].cos() + rho * rho);
            assert!((val + (kernel - 1.0)).abs() < 1e-12, "{val} {kernel}");
        }
    }

    fn fd_check(p: &Problem, basis: &BasisSpec, seed: u64) {
        let v = random(basis, seed).normalized().unwrap();
        let w = random(basis, seed + 100);
        let h = 1e-5;
        let mut plus = v.clone();
        plus.axpy(h, &w);
        let mut minus = v.clone();
        minus.axpy(-h, &w);
        let fd = (p.energy(&plus).unwrap() - p.energy(&minus).unwrap()) / (2.0 * h);
        let exact = p.apply_fock(&v, &v).unwrap().dot(&w);
        assert!((fd - exact).abs() <= 1e-6 * exact.abs(), "fd={fd} exact={exact}");
    }

    #[test]
    fn energy_gradient_matches_fock_operator() {
        let b1 = make_basis(1, 8).unwrap();
        fd_check(&Problem::cosine(1).unwrap(), &b1, 1);
        let pois = ProblemSpec {
            d: 1,
            a0: 0.7,
            mu: 2.0,
            potential: PotentialSpec::Poisson { amplitude: -1.0, rho: 0.8 },
            nonlinearity: Nonlinearity { power: 1.6 },
        }
        .build()
        .unwrap();
        fd_check(&pois, &b1, 2);
        fd_check(&Problem::cosine(2).unwrap(), &make_basis(2, 4).unwrap(), 3);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn operators_are_self_adjoint(seed in 0u64..10_000, power in 1.2f64..2.8) {
            let p = ProblemSpec {
                d: 1,
                a0: 1.3,
                mu: 1.0,
                potential: PotentialSpec::default_cosine(1),
                nonlinearity: Nonlinearity { power },
            }
            .build()
            .unwrap();
            let b = make_basis(1, 8).unwrap();
            let u = random(&b, seed);
            let v = random(&b, seed + 1);
            let w = random(&b, seed + 2);
            let fock = p.fock_operator(&u).unwrap();
            let a = fock.form(&v, &w);
            let c = fock.form(&w, &v);
            prop_assert!((a - c).abs() <= 1e-11 * a.abs().max(c.abs()).max(1e-12));
            let lin = p.linearized_operator(&u, 0.37).unwrap();
            let a = lin.form(&v, &w);
            let c = lin.form(&w, &v);
            prop_assert!((a - c).abs() <= 1e-11 * a.abs().max(c.abs()).max(1e-12));
        }
    }
}
