//! Planewave discretization on the periodic cell (0, 2π)^d.
//!
//! Coefficients follow the e_k = (2π)^{-d/2} e^{ik·x} normalization, so the
//! coefficient ℓ² norm is the L² norm of the function and H^s norms are plain
//! weighted sums with weights (1 + |k|²)^s.

mod basis;
mod field;
mod transform;

pub use basis::{efficient_length, make_basis, BasisSpec, WaveVector, DEFAULT_GRID_BUDGET};
pub use field::{cell_scale, FieldRecord, GridField, SpectralField};

pub(crate) use field::{scatter, symmetrize};

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Evaluates the trigonometric polynomial at the nodes of the field's grid.
pub fn to_grid(v: &SpectralField) -> GridField {
    let basis = v.basis();
    let mut data = scatter(basis, v.coeffs());
    basis.plans().inverse(&mut data, basis.dim());
    let s = 1.0 / cell_scale(basis.dim());
    data.iter_mut().for_each(|x| *x *= s);
    GridField::new(basis.clone(), data).expect("grid length matches basis")
}

/// L² projection onto X_M of the trigonometric interpolant of `g`.
pub fn from_grid(g: &GridField, m: usize) -> Result<SpectralField> {
    let n = g.basis().grid_size();
    if n < 2 * m + 1 {
        return Err(Error::AliasingUnresolvable { grid: n, cutoff: m });
    }
    let d = g.basis().dim();
    let target = make_basis(d, m)?;
    let mut data = g.values().to_vec();
    g.basis().plans().forward(&mut data, d);
    let s = cell_scale(d) / data.len() as f64;
    let n_i = n as i64;
    let coeffs = target
        .modes()
        .iter()
        .map(|k| {
            let flat = k[..d]
                .iter()
                .fold(0usize, |acc, &c| acc * n + (c as i64).rem_euclid(n_i) as usize);
            data[flat] * s
        })
        .collect();
    SpectralField::from_coeffs(&target, coeffs)
}

/// Σ_k (1 + |k|²)^s Re(v̂_k conj(ŵ_k)).
pub fn sobolev_inner(v: &SpectralField, w: &SpectralField, s: f64) -> Result<f64> {
    if !v.basis().same_as(w.basis()) {
        return Err(Error::BasisMismatch(format!("{:?} vs {:?}", v.basis(), w.basis())));
    }
    if !(-2.0..=2.0).contains(&s) {
        return Err(Error::InvalidInput(format!("Sobolev exponent {s} outside [-2, 2]")));
    }
    Ok(field::weighted_dot(v.coeffs(), w.coeffs(), v.basis().norm2(), s))
}

/// Zero-padding embedding X_M ⊂ X_{M'}.
pub fn prolong(v: &SpectralField, fine: &BasisSpec) -> Result<SpectralField> {
    check_dims(v.basis(), fine)?;
    if fine.cutoff() < v.basis().cutoff() {
        return Err(Error::BasisMismatch(format!(
            "cannot prolong cutoff {} to smaller cutoff {}",
            v.basis().cutoff(),
            fine.cutoff()
        )));
    }
    if fine.same_as(v.basis()) {
        return Ok(v.clone());
    }
    let mut out = vec![Complex64::new(0.0, 0.0); fine.len()];
    for (k, c) in v.basis().modes().iter().zip(v.coeffs()) {
        let i = fine.index_of(k).expect("coarse ball inside fine ball");
        out[i] = *c;
    }
    SpectralField::from_coeffs(fine, out)
}

/// Truncation to a smaller ball; the L² projection onto X_M.
pub fn restrict(v: &SpectralField, coarse: &BasisSpec) -> Result<SpectralField> {
    check_dims(v.basis(), coarse)?;
    if coarse.cutoff() > v.basis().cutoff() {
        return Err(Error::BasisMismatch(format!(
            "cannot restrict cutoff {} to larger cutoff {}",
            v.basis().cutoff(),
            coarse.cutoff()
        )));
    }
    if coarse.same_as(v.basis()) {
        return Ok(v.clone());
    }
    let coeffs = coarse
        .modes()
        .iter()
        .map(|k| v.coeff(k))
        .collect();
    SpectralField::from_coeffs(coarse, coeffs)
}

/// Prolongs or restricts, whichever the target cutoff requires.
pub fn resample(v: &SpectralField, target: &BasisSpec) -> Result<SpectralField> {
    if target.cutoff() >= v.basis().cutoff() {
        prolong(v, target)
    } else {
        restrict(v, target)
    }
}

/// v − (v, u)/‖u‖² · u.
pub fn project_orthogonal(v: &SpectralField, u: &SpectralField) -> Result<SpectralField> {
    let uu = u.try_dot(u)?;
    if uu == 0.0 {
        return Err(Error::DegenerateProjector);
    }
    let mut out = v.clone();
    out.axpy(-v.dot(u) / uu, u);
    Ok(out)
}

fn check_dims(a: &BasisSpec, b: &BasisSpec) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(Error::BasisMismatch(format!(
            "dimension {} vs {}",
            a.dim(),
            b.dim()
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn random(d: usize, m: usize, seed: u64) -> SpectralField {
        let b = make_basis(d, m).unwrap();
        SpectralField::random_real(&b, &mut ChaCha8Rng::seed_from_u64(seed), 0.5)
    }

    fn quadrature_l2_sq(v: &SpectralField) -> f64 {
        let g = to_grid(v);
        let b = v.basis();
        let cell = (2.0 * PI).powi(b.dim() as i32);
        g.values().iter().map(|x| x.norm_sqr()).sum::<f64>() * cell / b.grid_points() as f64
    }

    #[test]
    fn constant_field_on_grid() {
        for d in 1..=3 {
            let b = make_basis(d, 2).unwrap();
            let g = to_grid(&SpectralField::unit_constant(&b));
            let expected = (2.0 * PI).powf(-(d as f64) / 2.0);
            for v in g.values() {
                assert_relative_eq!(v.re, expected, max_relative = 1e-14);
                assert!(v.im.abs() < 1e-15);
            }
        }
    }

    #[test]
    fn cosine_coefficients() {
        let b = make_basis(1, 5).unwrap();
        let values: Vec<f64> = GridField::nodes(&b).iter().map(|x| x[0].cos()).collect();
        let g = GridField::from_real(b.clone(), &values).unwrap();
        let f = from_grid(&g, 5).unwrap();
        let expected = (2.0 * PI).sqrt() * 0.5;
        for (k, c) in b.modes().iter().zip(f.coeffs()) {
            let target = if k[0].abs() == 1 { expected } else { 0.0 };
            assert!((c.re - target).abs() < 1e-14 && c.im.abs() < 1e-14, "{k:?} {c}");
        }
    }

    #[test]
    fn round_trip_identity() {
        for d in 1..=3 {
            let v = random(d, 8.min(12 / d), 3);
            let back = from_grid(&to_grid(&v), v.basis().cutoff()).unwrap();
            let err = (&back - &v).norm_l2() / v.norm_l2();
            assert!(err < 1e-12, "d={d} err={err}");
        }
    }

    #[test]
    fn from_grid_rejects_unresolvable_cutoff() {
        let b = make_basis(1, 2).unwrap();
        let g = to_grid(&SpectralField::unit_constant(&b));
        let n = b.grid_size();
        assert!(from_grid(&g, (n - 1) / 2).is_ok());
        assert!(matches!(
            from_grid(&g, n / 2),
            Err(Error::AliasingUnresolvable { .. })
        ));
    }

    #[test]
    fn parseval_against_quadrature() {
        for (d, m) in [(1, 16), (2, 6), (3, 3)] {
            let v = random(d, m, 11);
            let spectral = v.norm_l2().powi(2);
            assert_relative_eq!(spectral, quadrature_l2_sq(&v), max_relative = 1e-12);
        }
    }

    #[test]
    fn sobolev_examples() {
        let b = make_basis(2, 2).unwrap();
        let c = SpectralField::unit_constant(&b);
        for s in [-2.0, -1.0, 0.0, 0.5, 2.0] {
            assert_relative_eq!(sobolev_inner(&c, &c, s).unwrap(), 1.0);
        }
        let e = SpectralField::single_mode(&b, [1, 0, 0], Complex64::new(1.0, 0.0)).unwrap();
        assert_relative_eq!(sobolev_inner(&e, &e, 1.0).unwrap(), 2.0);
        let other = random(2, 3, 1);
        assert!(matches!(sobolev_inner(&c, &other, 0.0), Err(Error::BasisMismatch(_))));
    }

    #[test]
    fn restrict_drops_outer_modes() {
        let fine = make_basis(1, 6).unwrap();
        let coarse = make_basis(1, 3).unwrap();
        let v = SpectralField::single_mode(&fine, [5, 0, 0], Complex64::new(1.0, 0.0)).unwrap();
        assert_eq!(restrict(&v, &coarse).unwrap().norm_l2(), 0.0);
        assert!(prolong(&v, &coarse).is_err());
        assert!(restrict(&SpectralField::zeros(&coarse), &fine).is_err());
    }

    #[test]
    fn projector_examples() {
        let u = random(1, 6, 5);
        assert!(project_orthogonal(&u, &u).unwrap().norm_l2() < 1e-15);
        let v = random(1, 6, 6);
        let pv = project_orthogonal(&v, &u).unwrap();
        let again = project_orthogonal(&pv, &u).unwrap();
        assert!((&again - &pv).norm_l2() < 1e-12 * pv.norm_l2());
        let zero = SpectralField::zeros(u.basis());
        assert_eq!(project_orthogonal(&v, &zero).unwrap_err(), Error::DegenerateProjector);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn sobolev_weights_are_monotone(seed in 0u64..10_000, m in 1usize..12) {
            let v = random(1, m, seed);
            let h1 = v.norm_sobolev(1.0);
            let l2 = v.norm_l2();
            let hm1 = v.norm_sobolev(-1.0);
            prop_assert!(h1 >= l2 && l2 >= hm1);
        }

        #[test]
        fn prolong_is_isometric_and_restrict_contracts(
            seed in 0u64..10_000,
            d in 1usize..3,
            m in 0usize..6,
            extra in 0usize..5,
            s in -2.0f64..2.0,
        ) {
            let v = random(d, m + extra, seed);
            let fine = make_basis(d, m + extra + 3).unwrap();
            let coarse = make_basis(d, m).unwrap();
            let p = prolong(&v, &fine).unwrap();
            prop_assert!((p.norm_sobolev(s) - v.norm_sobolev(s)).abs() <= 1e-14 * v.norm_sobolev(s).max(1e-300));
            let r = restrict(&v, &coarse).unwrap();
            prop_assert!(r.norm_sobolev(s) <= v.norm_sobolev(s) * (1.0 + 1e-15));
            let back = restrict(&p, v.basis()).unwrap();
            prop_assert_eq!(back.coeffs(), v.coeffs());
            prop_assert!(p.conjugate_symmetry_defect() == 0.0);
        }

        #[test]
        fn projector_is_self_adjoint_and_orthogonal(seed in 0u64..10_000) {
            let u = random(1, 8, seed);
            let v = random(1, 8, seed + 1);
            let w = random(1, 8, seed + 2);
            let pv = project_orthogonal(&v, &u).unwrap();
            let pw = project_orthogonal(&w, &u).unwrap();
            let lhs = pv.dot(&w);
            let rhs = v.dot(&pw);
            prop_assert!((lhs - rhs).abs() <= 1e-12 * v.norm_l2() * w.norm_l2());
            prop_assert!(pv.dot(&u).abs() <= 1e-12 * v.norm_l2() * u.norm_l2());
        }

        #[test]
        fn grid_round_trip_preserves_symmetry(seed in 0u64..10_000, m in 0usize..10) {
            let v = random(1, m, seed);
            let g = to_grid(&v);
            prop_assert!(g.values().iter().all(|x| x.im.abs() < 1e-14));
            let back = SpectralField::from_real_grid(v.basis(), &g.real_values());
            prop_assert!((&back - &v).norm_l2() <= 1e-12 * v.norm_l2().max(1e-300));
        }
    }
}
