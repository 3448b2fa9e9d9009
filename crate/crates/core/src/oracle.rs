//! Dense brute-force reference for tiny bases.
//!
//! Everything here is assembled from explicit coefficient convolutions and
//! dense matrices, without the FFT machinery, so it can be used to check the
//! matrix-free code paths. Only the cubic nonlinearity is supported.

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::model::{GroundState, Problem};
use crate::spectral::{cell_scale, BasisSpec, SpectralField, WaveVector};

/// Largest basis the oracle accepts.
pub const MAX_MODES: usize = 200;

type CMat = DMatrix<Complex64>;
type CVec = DVector<Complex64>;

fn sub(a: &WaveVector, b: &WaveVector) -> WaveVector {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub struct DenseOracle {
    problem: Problem,
    basis: BasisSpec,
    potential: HashMap<WaveVector, Complex64>,
}

impl DenseOracle {
    pub fn new(p: &Problem, basis: &BasisSpec) -> Result<Self> {
        if basis.len() > MAX_MODES {
            return Err(Error::OracleTooLarge { modes: basis.len(), cap: MAX_MODES });
        }
        if p.mu() != 0.0 && !p.nonlinearity().is_cubic() {
            return Err(Error::InvalidInput("the dense oracle handles the cubic nonlinearity only".into()));
        }
        if basis.dim() != p.dim() {
            return Err(Error::BasisMismatch("oracle basis dimension".into()));
        }
        let v = p.potential();
        let potential = v
            .basis()
            .modes()
            .iter()
            .zip(v.coeffs())
            .filter(|(_, c)| c.norm() != 0.0)
            .map(|(k, c)| (*k, *c))
            .collect();
        Ok(Self {
            problem: p.clone(),
            basis: basis.clone(),
            potential,
        })
    }

    pub fn basis(&self) -> &BasisSpec {
        &self.basis
    }

    /// Coefficients of u² for every difference k − l of basis modes:
    /// (u²)_m = (2π)^{-d/2} Σ_k u_k u_{m−k}.
    fn square_coefficients(&self, u: &[Complex64]) -> HashMap<WaveVector, Complex64> {
        let s = 1.0 / cell_scale(self.basis.dim());
        let mut out: HashMap<WaveVector, Complex64> = HashMap::new();
        let modes = self.basis.modes();
        for (i, ki) in modes.iter().enumerate() {
            for (j, kj) in modes.iter().enumerate() {
                let m = [ki[0] + kj[0], ki[1] + kj[1], ki[2] + kj[2]];
                *out.entry(m).or_default() += u[i] * u[j] * s;
            }
        }
        out
    }

    /// Matrix of multiplication by a function with coefficients `f` (scaled by `w`).
    fn multiplication(&self, f: &HashMap<WaveVector, Complex64>, w: f64, out: &mut CMat) {
        let s = w / cell_scale(self.basis.dim());
        let modes = self.basis.modes();
        for (i, ki) in modes.iter().enumerate() {
            for (j, kj) in modes.iter().enumerate() {
                if let Some(c) = f.get(&sub(ki, kj)) {
                    out[(i, j)] += c * s;
                }
            }
        }
    }

    /// 𝒜 = −a0 Δ + V.
    pub fn bare_matrix(&self) -> CMat {
        let n = self.basis.len();
        let mut m = CMat::zeros(n, n);
        for (i, k2) in self.basis.norm2().iter().enumerate() {
            m[(i, i)] += Complex64::new(self.problem.a0() * k2, 0.0);
        }
        self.multiplication(&self.potential, 1.0, &mut m);
        m
    }

    /// 𝒜 + μ u².
    pub fn fock_matrix(&self, u: &SpectralField) -> CMat {
        let mut m = self.bare_matrix();
        if self.problem.mu() != 0.0 {
            let sq = self.square_coefficients(u.coeffs());
            self.multiplication(&sq, self.problem.mu(), &mut m);
        }
        m
    }

    /// 𝒜 + 3μ u² − λ.
    pub fn linearized_matrix(&self, u: &SpectralField, lambda: f64) -> CMat {
        let mut m = self.bare_matrix();
        if self.problem.mu() != 0.0 {
            let sq = self.square_coefficients(u.coeffs());
            self.multiplication(&sq, 3.0 * self.problem.mu(), &mut m);
        }
        for i in 0..m.nrows() {
            m[(i, i)] -= Complex64::new(lambda, 0.0);
        }
        m
    }

    /// ½[a0‖∇u‖² + ∫V u²] + (μ/4)∫u⁴ by Parseval.
    pub fn energy(&self, u: &SpectralField) -> f64 {
        let c = CVec::from_column_slice(u.coeffs());
        let bare = self.bare_matrix();
        let quad = (c.adjoint() * &bare * &c)[(0, 0)].re;
        let quartic: f64 = self.square_coefficients(u.coeffs()).values().map(|w| w.norm_sqr()).sum();
        0.5 * quad + 0.25 * self.problem.mu() * quartic
    }

    fn field(&self, v: &CVec) -> SpectralField {
        let mut f = SpectralField::from_coeffs(&self.basis, v.iter().cloned().collect()).expect("same basis");
        f.symmetrize();
        f
    }

    /// Removes the arbitrary complex phase of an eigenvector of a real operator.
    fn real_phase(&self, v: &CVec) -> CVec {
        let n = v.len();
        let w: Complex64 = (0..n).map(|i| v[i] * v[n - 1 - i]).sum();
        let phase = if w.norm() > 0.0 { Complex64::from_polar(1.0, -0.5 * w.arg()) } else { Complex64::new(1.0, 0.0) };
        v * phase
    }

    /// Full spectrum (ascending) and eigenvectors of a Hermitian matrix.
    pub fn diagonalize(m: &CMat) -> (Vec<f64>, CMat) {
        let eig = SymmetricEigen::new(m.clone());
        let mut order: Vec<usize> = (0..m.nrows()).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
        let vectors = CMat::from_fn(m.nrows(), m.ncols(), |i, j| eig.eigenvectors[(i, order[j])]);
        (values, vectors)
    }

    pub fn eigenvalues(m: &CMat) -> Vec<f64> {
        Self::diagonalize(m).0
    }

    /// Solves P L P x = P b with x ⟂ u through the bordered system
    /// [[L, u], [uᴴ, 0]].
    pub fn complement_solve(&self, l: &CMat, b: &SpectralField, u: &SpectralField) -> Result<SpectralField> {
        let n = l.nrows();
        let mut k = CMat::zeros(n + 1, n + 1);
        k.view_mut((0, 0), (n, n)).copy_from(l);
        for i in 0..n {
            k[(i, n)] = u.coeffs()[i];
            k[(n, i)] = u.coeffs()[i].conj();
        }
        let mut rhs = CVec::zeros(n + 1);
        for i in 0..n {
            rhs[i] = b.coeffs()[i];
        }
        let x = k
            .lu()
            .solve(&rhs)
            .ok_or_else(|| Error::InvalidInput("singular bordered matrix".into()))?;
        Ok(self.field(&x.rows(0, n).into_owned()))
    }

    /// Ground state by damped dense SCF followed by Newton on the bordered system.
    pub fn solve(&self) -> Result<GroundState> {
        let n = self.basis.len();
        let mut u = SpectralField::unit_constant(&self.basis);
        let mut iterations = 0;
        // SCF phase: get into the Newton basin
        for _ in 0..500 {
            iterations += 1;
            let (_, vecs) = Self::diagonalize(&self.fock_matrix(&u));
            let phi = self.field(&self.real_phase(&vecs.column(0).into_owned())).normalized()?.aligned_with(&u);
            let mut next = u.scaled(0.5);
            next.axpy(0.5, &phi);
            u = next.normalized()?.with_nonnegative_mean();
            if self.residual(&u, self.rayleigh(&u)) < 1e-6 {
                break;
            }
        }
        let mut lambda = self.rayleigh(&u);
        for _ in 0..50 {
            let res = self.residual(&u, lambda);
            if res < 1e-14 {
                break;
            }
            iterations += 1;
            // F(u, λ) = (H(u)u − λu, (1 − ‖u‖²)/2); J = [[L, −u], [−uᴴ, 0]]
            let c = CVec::from_column_slice(u.coeffs());
            let mut f = CVec::zeros(n + 1);
            let hu = self.fock_matrix(&u) * &c - &c * Complex64::new(lambda, 0.0);
            f.rows_mut(0, n).copy_from(&hu);
            f[n] = Complex64::new(0.5 * (1.0 - c.norm_squared()), 0.0);
            let mut j = CMat::zeros(n + 1, n + 1);
            j.view_mut((0, 0), (n, n)).copy_from(&self.linearized_matrix(&u, lambda));
            for i in 0..n {
                j[(i, n)] = -c[i];
                j[(n, i)] = -c[i].conj();
            }
            let step = j.lu().solve(&(-f)).ok_or_else(|| Error::InvalidInput("singular Newton matrix".into()))?;
            let mut du = self.field(&step.rows(0, n).into_owned());
            du.symmetrize();
            u.axpy(1.0, &du);
            lambda += step[n].re;
        }
        let u = u.normalized()?.with_nonnegative_mean();
        let lambda = self.rayleigh(&u);
        let residual = self.residual_hm1(&u, lambda);
        Ok(GroundState {
            basis: self.basis.clone(),
            energy: self.energy(&u),
            u,
            lambda,
            residual_dual_norm: residual,
            iterations,
            converged: residual <= 1e-12,
            linear_gap: None,
        })
    }

    pub fn rayleigh(&self, u: &SpectralField) -> f64 {
        let c = CVec::from_column_slice(u.coeffs());
        (c.adjoint() * self.fock_matrix(u) * &c)[(0, 0)].re / c.norm_squared()
    }

    fn residual_vector(&self, u: &SpectralField, lambda: f64) -> CVec {
        let c = CVec::from_column_slice(u.coeffs());
        self.fock_matrix(u) * &c - &c * Complex64::new(lambda, 0.0)
    }

    fn residual(&self, u: &SpectralField, lambda: f64) -> f64 {
        self.residual_vector(u, lambda).norm()
    }

    pub fn residual_hm1(&self, u: &SpectralField, lambda: f64) -> f64 {
        let r = self.residual_vector(u, lambda);
        r.iter()
            .zip(self.basis.norm2())
            .map(|(c, k2)| c.norm_sqr() / (1.0 + k2))
            .sum::<f64>()
            .sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::make_basis;
    use std::f64::consts::PI;

    #[test]
    fn free_cubic_gives_constant() {
        let p = Problem::free_cubic(1).unwrap();
        let o = DenseOracle::new(&p, &make_basis(1, 2).unwrap()).unwrap();
        let gs = o.solve().unwrap();
        assert!((gs.lambda - 1.0 / (2.0 * PI)).abs() < 1e-13);
        assert!((gs.energy - 1.0 / (8.0 * PI)).abs() < 1e-13);
    }

    #[test]
    fn laplacian_spectrum() {
        let p = Problem::free_cubic(1).unwrap().with_mu(0.0).unwrap();
        let o = DenseOracle::new(&p, &make_basis(1, 4).unwrap()).unwrap();
        let vals = DenseOracle::eigenvalues(&o.bare_matrix());
        let want = [0.0, 1.0, 1.0, 4.0, 4.0, 9.0, 9.0, 16.0, 16.0];
        for (a, b) in vals.iter().zip(want) {
            assert!((a - b).abs() < 1e-12);
        }
        let gs = o.solve().unwrap();
        assert!(gs.lambda.abs() < 1e-13);
    }

    #[test]
    fn agrees_with_matrix_free_solver() {
        use crate::solver::{solve_ground_state, SolverConfig};
        let p = Problem::cosine(1).unwrap();
        let b = make_basis(1, 16).unwrap();
        let dense = DenseOracle::new(&p, &b).unwrap().solve().unwrap();
        assert!(dense.converged);
        let cfg = SolverConfig { tol_residual: 1e-12, ..Default::default() };
        let gs = solve_ground_state(&p, &b, &cfg).unwrap();
        let diff = (&gs.u - &dense.u).norm_l2();
        assert!(diff < 1e-10);
        assert!((gs.lambda - dense.lambda).abs() < 1e-10);
        assert!((gs.energy - dense.energy).abs() < 1e-10);
    }

    #[test]
    fn size_cap() {
        let p = Problem::cosine(2).unwrap();
        assert!(matches!(
            DenseOracle::new(&p, &make_basis(2, 9).unwrap()),
            Err(Error::OracleTooLarge { .. })
        ));
    }

    #[test]
    fn cosine_potential_matrix_entries() {
        // cos x couples k and k ± 1 with weight 1/2
        let p = Problem::cosine(1).unwrap().with_mu(0.0).unwrap();
        let b = make_basis(1, 3).unwrap();
        let o = DenseOracle::new(&p, &b).unwrap();
        let m = o.bare_matrix();
        for i in 0..b.len() {
            for j in 0..b.len() {
                let ki = b.modes()[i][0];
                let kj = b.modes()[j][0];
                let want = if i == j { (ki * ki) as f64 } else if (ki - kj).abs() == 1 { 0.5 } else { 0.0 };
                assert!((m[(i, j)] - Complex64::new(want, 0.0)).norm() < 1e-15);
            }
        }
    }
}
