use std::f64::consts::PI;
use std::ops::{Add, Mul, Neg, Sub};

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::basis::{make_basis, BasisSpec, WaveVector};
use crate::error::{Error, Result};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// (2π)^{d/2}, the factor between planewave coefficients and plain Fourier series coefficients.
pub fn cell_scale(d: usize) -> f64 {
    (2.0 * PI).powf(d as f64 / 2.0)
}

/// A function in X_M stored by its planewave coefficients, the k-th one being the
/// L² product against e_k(x) = (2π)^{-d/2} e^{ik·x}.
///
/// All fields produced by the solvers are real-valued functions, i.e. their
/// coefficients satisfy c(−k) = conj(c(k)).
#[derive(Clone, Debug)]
pub struct SpectralField {
    basis: BasisSpec,
    coeffs: Vec<Complex64>,
}

/// Samples of a function on the uniform N^d collocation grid of a basis.
#[derive(Clone, Debug)]
pub struct GridField {
    basis: BasisSpec,
    values: Vec<Complex64>,
}

impl GridField {
    pub fn new(basis: BasisSpec, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != basis.grid_points() {
            return Err(Error::InvalidInput(format!(
                "grid field needs {} values, got {}",
                basis.grid_points(),
                values.len()
            )));
        }
        Ok(Self { basis, values })
    }

    pub fn from_real(basis: BasisSpec, values: &[f64]) -> Result<Self> {
        Self::new(basis, values.iter().map(|&v| Complex64::new(v, 0.0)).collect())
    }

    pub fn basis(&self) -> &BasisSpec {
        &self.basis
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn real_values(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.re).collect()
    }

    /// Grid nodes x_j = 2π j / N along each axis, in storage order.
    pub fn nodes(basis: &BasisSpec) -> Vec<[f64; 3]> {
        let n = basis.grid_size();
        let d = basis.dim();
        let h = 2.0 * PI / n as f64;
        (0..basis.grid_points())
            .map(|mut flat| {
                let mut x = [0.0; 3];
                for axis in (0..d).rev() {
                    x[axis] = (flat % n) as f64 * h;
                    flat /= n;
                }
                x
            })
            .collect()
    }
}

impl SpectralField {
    pub fn zeros(basis: &BasisSpec) -> Self {
        Self {
            basis: basis.clone(),
            coeffs: vec![ZERO; basis.len()],
        }
    }

    pub fn from_coeffs(basis: &BasisSpec, coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.len() != basis.len() {
            return Err(Error::BasisMismatch(format!(
                "{} coefficients for a basis of {} modes",
                coeffs.len(),
                basis.len()
            )));
        }
        Ok(Self {
            basis: basis.clone(),
            coeffs,
        })
    }

    /// The constant function with unit L² norm on the cell.
    pub fn unit_constant(basis: &BasisSpec) -> Self {
        let mut f = Self::zeros(basis);
        f.coeffs[basis.zero_index()] = Complex64::new(1.0, 0.0);
        f
    }

    pub fn single_mode(basis: &BasisSpec, k: WaveVector, amplitude: Complex64) -> Result<Self> {
        let i = basis
            .index_of(&k)
            .ok_or_else(|| Error::InvalidInput(format!("mode {k:?} outside cutoff {}", basis.cutoff())))?;
        let mut f = Self::zeros(basis);
        f.coeffs[i] = amplitude;
        Ok(f)
    }

    /// Random real-valued field with coefficients of size (1 + |k|²)^{-decay}.
    pub fn random_real<R: Rng + ?Sized>(basis: &BasisSpec, rng: &mut R, decay: f64) -> Self {
        let coeffs = basis
            .norm2()
            .iter()
            .map(|&k2| {
                let w = (1.0 + k2).powf(-decay);
                Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5) * w
            })
            .collect();
        let mut f = Self {
            basis: basis.clone(),
            coeffs,
        };
        f.symmetrize();
        f
    }

    pub fn basis(&self) -> &BasisSpec {
        &self.basis
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [Complex64] {
        &mut self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<Complex64> {
        self.coeffs
    }

    /// Coefficient of mode k, zero outside the cutoff ball.
    pub fn coeff(&self, k: &WaveVector) -> Complex64 {
        self.basis.index_of(k).map_or(ZERO, |i| self.coeffs[i])
    }

    /// Real part of the k = 0 coefficient; its sign is the sign of the mean.
    pub fn mean_coefficient(&self) -> f64 {
        self.coeffs[self.basis.zero_index()].re
    }

    fn check_same(&self, other: &Self) -> Result<()> {
        if self.basis.same_as(&other.basis) {
            Ok(())
        } else {
            Err(Error::BasisMismatch(format!(
                "{:?} vs {:?}",
                self.basis, other.basis
            )))
        }
    }

    /// L² inner product (real part).
    pub fn dot(&self, other: &Self) -> f64 {
        debug_assert!(self.basis.same_as(&other.basis));
        dot(&self.coeffs, &other.coeffs)
    }

    pub fn try_dot(&self, other: &Self) -> Result<f64> {
        self.check_same(other)?;
        Ok(self.dot(other))
    }

    pub fn norm_l2(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn norm_h1(&self) -> f64 {
        self.norm_sobolev(1.0)
    }

    pub fn norm_hm1(&self) -> f64 {
        self.norm_sobolev(-1.0)
    }

    pub fn norm_sobolev(&self, s: f64) -> f64 {
        weighted_dot(&self.coeffs, &self.coeffs, self.basis.norm2(), s).sqrt()
    }

    pub fn scale(&mut self, a: f64) {
        self.coeffs.iter_mut().for_each(|c| *c *= a);
    }

    pub fn scaled(&self, a: f64) -> Self {
        let mut out = self.clone();
        out.scale(a);
        out
    }

    /// self ← self + a·x
    pub fn axpy(&mut self, a: f64, x: &Self) {
        debug_assert!(self.basis.same_as(&x.basis));
        for (c, xc) in self.coeffs.iter_mut().zip(&x.coeffs) {
            *c += xc * a;
        }
    }

    pub fn normalized(&self) -> Result<Self> {
        let n = self.norm_l2();
        if n == 0.0 {
            return Err(Error::ZeroField("normalization"));
        }
        Ok(self.scaled(1.0 / n))
    }

    /// Averages c(k) and conj(c(−k)) so the field is exactly real-valued.
    pub fn symmetrize(&mut self) {
        symmetrize(&mut self.coeffs);
    }

    pub fn conjugate_symmetry_defect(&self) -> f64 {
        let n = self.coeffs.len();
        (0..n)
            .map(|i| (self.coeffs[i] - self.coeffs[n - 1 - i].conj()).norm())
            .fold(0.0, f64::max)
    }

    /// Flips the sign so the mean is nonnegative.
    pub fn with_nonnegative_mean(mut self) -> Self {
        if self.mean_coefficient() < 0.0 {
            self.scale(-1.0);
        }
        self
    }

    /// Flips the sign if the L² product with `reference` is negative.
    pub fn aligned_with(mut self, reference: &Self) -> Self {
        if self.dot(reference) < 0.0 {
            self.scale(-1.0);
        }
        self
    }

    /// Real grid values on this field's own collocation grid.
    pub fn grid_real(&self) -> Vec<f64> {
        let mut data = scatter(&self.basis, &self.coeffs);
        self.basis.plans().inverse(&mut data, self.basis.dim());
        let s = 1.0 / cell_scale(self.basis.dim());
        data.iter().map(|v| v.re * s).collect()
    }

    /// Projection onto X_M of a real grid function sampled on the basis grid.
    pub fn from_real_grid(basis: &BasisSpec, values: &[f64]) -> Self {
        debug_assert_eq!(values.len(), basis.grid_points());
        let mut data: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        basis.plans().forward(&mut data, basis.dim());
        let s = cell_scale(basis.dim()) / basis.grid_points() as f64;
        let mut coeffs: Vec<Complex64> = basis.grid_index().iter().map(|&j| data[j] * s).collect();
        symmetrize(&mut coeffs);
        Self {
            basis: basis.clone(),
            coeffs,
        }
    }

    pub fn to_record(&self) -> FieldRecord {
        FieldRecord {
            d: self.basis.dim(),
            cutoff: self.basis.cutoff(),
            modes: self
                .basis
                .modes()
                .iter()
                .zip(&self.coeffs)
                .map(|(k, c)| (k[..self.basis.dim()].to_vec(), c.re, c.im))
                .collect(),
        }
    }

    pub fn from_record(record: &FieldRecord) -> Result<Self> {
        let basis = make_basis(record.d, record.cutoff)?;
        let mut f = Self::zeros(&basis);
        for (k, re, im) in &record.modes {
            if k.len() != record.d {
                return Err(Error::InvalidInput(format!("wave vector {k:?} has wrong length")));
            }
            let mut kk = [0; 3];
            kk[..k.len()].copy_from_slice(k);
            let i = basis
                .index_of(&kk)
                .ok_or_else(|| Error::InvalidInput(format!("mode {k:?} outside cutoff {}", record.cutoff)))?;
            f.coeffs[i] = Complex64::new(*re, *im);
        }
        Ok(f)
    }
}

/// Serialized form of a field: dimension, cutoff and (k, re, im) triples in mode order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FieldRecord {
    pub d: usize,
    #[serde(rename = "M")]
    pub cutoff: usize,
    pub modes: Vec<(Vec<i32>, f64, f64)>,
}

impl Add for &SpectralField {
    type Output = SpectralField;
    fn add(self, rhs: Self) -> SpectralField {
        let mut out = self.clone();
        out.axpy(1.0, rhs);
        out
    }
}

impl Sub for &SpectralField {
    type Output = SpectralField;
    fn sub(self, rhs: Self) -> SpectralField {
        let mut out = self.clone();
        out.axpy(-1.0, rhs);
        out
    }
}

impl Mul<f64> for &SpectralField {
    type Output = SpectralField;
    fn mul(self, rhs: f64) -> SpectralField {
        self.scaled(rhs)
    }
}

impl Neg for &SpectralField {
    type Output = SpectralField;
    fn neg(self) -> SpectralField {
        self.scaled(-1.0)
    }
}

pub(crate) fn dot(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x.re * y.re + x.im * y.im).sum()
}

pub(crate) fn weighted_dot(a: &[Complex64], b: &[Complex64], norm2: &[f64], s: f64) -> f64 {
    a.iter()
        .zip(b)
        .zip(norm2)
        .map(|((x, y), &k2)| (1.0 + k2).powf(s) * (x.re * y.re + x.im * y.im))
        .sum()
}

pub(crate) fn symmetrize(c: &mut [Complex64]) {
    let n = c.len();
    for i in 0..n.div_ceil(2) {
        let j = n - 1 - i;
        let avg = (c[i] + c[j].conj()) * 0.5;
        c[i] = avg;
        c[j] = avg.conj();
    }
}

/// Places coefficients on the basis grid (unscaled).
pub(crate) fn scatter(basis: &BasisSpec, coeffs: &[Complex64]) -> Vec<Complex64> {
    let mut data = vec![ZERO; basis.grid_points()];
    for (&j, &c) in basis.grid_index().iter().zip(coeffs) {
        data[j] = c;
    }
    data
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn symmetrize_is_idempotent_and_real() {
        let b = make_basis(2, 4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let f = SpectralField::random_real(&b, &mut rng, 1.0);
        assert!(f.conjugate_symmetry_defect() < 1e-15);
        let mut g = f.clone();
        g.symmetrize();
        assert_eq!(f.coeffs(), g.coeffs());
        assert!(f.coeffs()[b.zero_index()].im.abs() < 1e-16);
    }

    #[test]
    fn record_round_trip_is_exact() {
        let b = make_basis(2, 3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let f = SpectralField::random_real(&b, &mut rng, 0.5);
        let json = serde_json::to_string(&f.to_record()).unwrap();
        let back: FieldRecord = serde_json::from_str(&json).unwrap();
        let g = SpectralField::from_record(&back).unwrap();
        assert_eq!(f.coeffs(), g.coeffs());
    }

    #[test]
    fn record_rejects_modes_outside_ball() {
        let rec = FieldRecord {
            d: 1,
            cutoff: 2,
            modes: vec![(vec![3], 1.0, 0.0)],
        };
        assert!(SpectralField::from_record(&rec).is_err());
    }

    #[test]
    fn grid_nodes_in_storage_order() {
        let b = make_basis(2, 1).unwrap();
        let nodes = GridField::nodes(&b);
        let n = b.grid_size();
        let h = 2.0 * PI / n as f64;
        assert_eq!(nodes[1], [0.0, h, 0.0]);
        assert_eq!(nodes[n], [h, 0.0, 0.0]);
    }
}
