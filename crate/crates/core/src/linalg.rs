//! Iterative solvers on coefficient vectors.
//!
//! Vectors are complex coefficient arrays of real-valued fields, so the inner
//! product is the real part of the ℓ² product and the operators are symmetric
//! with respect to it. All solvers take matrix-free operators and a diagonal
//! preconditioner.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

pub type Vector = Vec<Complex64>;

pub fn dot(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x.re * y.re + x.im * y.im).sum()
}

fn weighted_norm(a: &[Complex64], w: &[f64]) -> f64 {
    a.iter().zip(w).map(|(x, &w)| w * x.norm_sqr()).sum::<f64>().sqrt()
}

fn axpy(y: &mut [Complex64], a: f64, x: &[Complex64]) {
    y.iter_mut().zip(x).for_each(|(y, x)| *y += x * a);
}

fn precondition(t: &[f64], r: &[Complex64]) -> Vector {
    r.iter().zip(t).map(|(x, &w)| x * w).collect()
}

/// Removes the components along the (orthonormal) `basis` vectors, twice.
pub fn project_out(v: &mut [Complex64], basis: &[Vector]) {
    for _ in 0..2 {
        for q in basis {
            let c = dot(q, v);
            axpy(v, -c, q);
        }
    }
}

/// Modified Gram–Schmidt with reorthogonalization. Vectors that lose more than
/// `drop_tol` of their norm are discarded.
pub fn orthonormalize(vectors: Vec<Vector>, drop_tol: f64) -> Vec<Vector> {
    let mut out: Vec<Vector> = Vec::with_capacity(vectors.len());
    for mut v in vectors {
        let before = dot(&v, &v).sqrt();
        if before == 0.0 || !before.is_finite() {
            continue;
        }
        project_out(&mut v, &out);
        let after = dot(&v, &v).sqrt();
        if after <= drop_tol * before {
            continue;
        }
        v.iter_mut().for_each(|x| *x /= after);
        out.push(v);
    }
    out
}

#[derive(Clone, Debug)]
pub struct EigenOptions {
    /// Number of wanted eigenpairs.
    pub nev: usize,
    /// Extra block vectors that are iterated but not checked for convergence.
    pub guard: usize,
    /// Tolerance on the weighted residual norm of each wanted pair.
    pub tol: f64,
    pub max_iter: usize,
}

#[derive(Clone, Debug)]
pub struct EigenResult {
    pub values: Vec<f64>,
    pub vectors: Vec<Vector>,
    pub residuals: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// Block LOBPCG for the lowest eigenpairs of a symmetric operator.
///
/// `x0` seeds the block (it should hold `nev + guard` independent vectors);
/// `precond` is a positive diagonal preconditioner and `norm_weights` define
/// the norm in which residuals are measured.
pub fn lobpcg<F>(op: F, precond: &[f64], norm_weights: &[f64], x0: Vec<Vector>, opts: &EigenOptions) -> EigenResult
where
    F: Fn(&[Complex64]) -> Vector,
{
    let mut x = orthonormalize(x0, 1e-8);
    let m = x.len();
    let nev = opts.nev.min(m);
    let mut p: Vec<Vector> = Vec::new();
    let mut ax: Vec<Vector> = x.iter().map(|v| op(v)).collect();
    let (mut theta, c) = ritz(&x, &ax);
    x = combine(&x, &c, m);
    ax = combine(&ax, &c, m);

    let mut residuals = vec![f64::INFINITY; m];
    let mut iterations = 0;
    loop {
        let r: Vec<Vector> = (0..m)
            .map(|i| {
                let mut r = ax[i].clone();
                axpy(&mut r, -theta[i], &x[i]);
                r
            })
            .collect();
        for i in 0..m {
            residuals[i] = weighted_norm(&r[i], norm_weights);
        }
        let converged = residuals[..nev].iter().all(|&r| r <= opts.tol);
        if converged || iterations >= opts.max_iter {
            return EigenResult {
                values: theta[..nev].to_vec(),
                vectors: x[..nev].to_vec(),
                residuals: residuals[..nev].to_vec(),
                iterations,
                converged,
            };
        }
        iterations += 1;

        // skip search directions for pairs that are already far below tolerance
        let w: Vec<Vector> = r
            .iter()
            .zip(&residuals)
            .filter(|(_, &res)| res > 1e-3 * opts.tol)
            .map(|(r, _)| precondition(precond, r))
            .collect();
        let mut s = x.clone();
        s.extend(w);
        s.extend(p.iter().cloned());
        let s = orthonormalize(s, 1e-10);
        let as_: Vec<Vector> = s.iter().map(|v| op(v)).collect();
        let (vals, c) = ritz(&s, &as_);
        theta = vals[..m].to_vec();
        let new_x = combine(&s, &c, m);
        let new_ax = combine(&as_, &c, m);
        // the implicit direction: part of the new block outside span(old X)
        p = (0..m)
            .map(|j| {
                let mut v = vec![Complex64::new(0.0, 0.0); s[0].len()];
                for (i, si) in s.iter().enumerate().skip(m) {
                    axpy(&mut v, c[(i, j)], si);
                }
                v
            })
            .collect();
        p = orthonormalize(p, 1e-10);
        x = new_x;
        ax = new_ax;
    }
}

/// Rayleigh–Ritz on an orthonormal set: eigenvalues ascending and coefficient matrix.
fn ritz(s: &[Vector], as_: &[Vector]) -> (Vec<f64>, DMatrix<f64>) {
    let n = s.len();
    let mut g = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let v = 0.5 * (dot(&s[i], &as_[j]) + dot(&s[j], &as_[i]));
            g[(i, j)] = v;
            g[(j, i)] = v;
        }
    }
    let eig = SymmetricEigen::new(g);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let c = DMatrix::from_fn(n, n, |i, j| eig.eigenvectors[(i, order[j])]);
    (values, c)
}

fn combine(s: &[Vector], c: &DMatrix<f64>, m: usize) -> Vec<Vector> {
    (0..m)
        .map(|j| {
            let mut v = vec![Complex64::new(0.0, 0.0); s[0].len()];
            for (i, si) in s.iter().enumerate() {
                axpy(&mut v, c[(i, j)], si);
            }
            v
        })
        .collect()
}

#[derive(Clone, Debug)]
pub struct LinearOptions {
    /// Stop when the preconditioned residual norm drops below `tol · ‖b‖`.
    pub tol: f64,
    pub max_iter: usize,
}

#[derive(Clone, Debug)]
pub struct LinearResult {
    pub x: Vector,
    pub iterations: usize,
    /// Final preconditioned residual norm relative to the right-hand side.
    pub relative_residual: f64,
    pub converged: bool,
}

/// Failure modes of the Krylov solvers that callers map to their own errors.
#[derive(Clone, Debug, PartialEq)]
pub enum KrylovBreakdown {
    /// pᵀAp ≤ 0 in conjugate gradients; carries the normalized curvature.
    NegativeCurvature(f64),
}

/// Preconditioned conjugate gradients restricted to the orthogonal complement
/// of the orthonormal `constraints`.
pub fn projected_cg<F>(
    op: F,
    b: &[Complex64],
    precond: &[f64],
    constraints: &[Vector],
    opts: &LinearOptions,
) -> Result<LinearResult, KrylovBreakdown>
where
    F: Fn(&[Complex64]) -> Vector,
{
    let n = b.len();
    let mut x = vec![Complex64::new(0.0, 0.0); n];
    let mut r = b.to_vec();
    project_out(&mut r, constraints);
    let mut z = precondition(precond, &r);
    project_out(&mut z, constraints);
    let mut rz = dot(&r, &z);
    let b_norm = rz.max(0.0).sqrt();
    if b_norm == 0.0 {
        return Ok(LinearResult {
            x,
            iterations: 0,
            relative_residual: 0.0,
            converged: true,
        });
    }
    let mut p = z.clone();
    let mut iterations = 0;
    let mut rel = 1.0;
    while iterations < opts.max_iter {
        iterations += 1;
        let mut ap = op(&p);
        project_out(&mut ap, constraints);
        let pap = dot(&p, &ap);
        let pp = dot(&p, &p);
        if pap <= 0.0 {
            return Err(KrylovBreakdown::NegativeCurvature(pap / pp));
        }
        let alpha = rz / pap;
        axpy(&mut x, alpha, &p);
        axpy(&mut r, -alpha, &ap);
        z = precondition(precond, &r);
        project_out(&mut z, constraints);
        let rz_new = dot(&r, &z);
        rel = rz_new.max(0.0).sqrt() / b_norm;
        if rel <= opts.tol {
            return Ok(LinearResult {
                x,
                iterations,
                relative_residual: rel,
                converged: true,
            });
        }
        let beta = rz_new / rz;
        rz = rz_new;
        p.iter_mut().zip(&z).for_each(|(p, z)| *p = z + *p * beta);
    }
    Ok(LinearResult {
        x,
        iterations,
        relative_residual: rel,
        converged: false,
    })
}

/// Preconditioned MINRES for symmetric, possibly indefinite systems. The
/// preconditioner must be positive definite.
pub fn minres<F>(op: F, b: &[Complex64], precond: &[f64], opts: &LinearOptions) -> LinearResult
where
    F: Fn(&[Complex64]) -> Vector,
{
    let n = b.len();
    let zero = Complex64::new(0.0, 0.0);
    let mut x = vec![zero; n];
    let mut r1 = b.to_vec();
    let mut y = precondition(precond, &r1);
    let beta1 = dot(&r1, &y).max(0.0).sqrt();
    if beta1 == 0.0 {
        return LinearResult {
            x,
            iterations: 0,
            relative_residual: 0.0,
            converged: true,
        };
    }
    let mut r2 = r1.clone();
    let mut oldb = 0.0;
    let mut beta = beta1;
    let mut dbar = 0.0;
    let mut epsln = 0.0;
    let mut phibar = beta1;
    let mut cs = -1.0;
    let mut sn = 0.0;
    let mut w = vec![zero; n];
    let mut w2 = vec![zero; n];
    let mut iterations = 0;
    let mut rel = 1.0;
    while iterations < opts.max_iter {
        iterations += 1;
        let s = 1.0 / beta;
        let v: Vector = y.iter().map(|c| c * s).collect();
        y = op(&v);
        if iterations >= 2 {
            axpy(&mut y, -beta / oldb, &r1);
        }
        let alfa = dot(&v, &y);
        axpy(&mut y, -alfa / beta, &r2);
        r1 = std::mem::replace(&mut r2, y);
        y = precondition(precond, &r2);
        oldb = beta;
        beta = dot(&r2, &y).max(0.0).sqrt();

        let oldeps = epsln;
        let delta = cs * dbar + sn * alfa;
        let gbar = sn * dbar - cs * alfa;
        epsln = sn * beta;
        dbar = -cs * beta;
        let gamma = gbar.hypot(beta).max(f64::EPSILON);
        cs = gbar / gamma;
        sn = beta / gamma;
        let phi = cs * phibar;
        phibar *= sn;

        let w1 = std::mem::replace(&mut w2, w);
        w = v
            .iter()
            .zip(&w1)
            .zip(&w2)
            .map(|((v, a), b)| (v - a * oldeps - b * delta) / gamma)
            .collect();
        axpy(&mut x, phi, &w);
        rel = phibar / beta1;
        if rel <= opts.tol || beta == 0.0 {
            return LinearResult {
                x,
                iterations,
                relative_residual: rel,
                converged: true,
            };
        }
    }
    LinearResult {
        x,
        iterations,
        relative_residual: rel,
        converged: false,
    }
}
