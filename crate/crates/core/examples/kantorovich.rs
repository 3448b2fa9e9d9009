//! Where does the certificate switch on? Scans M for the study well and
//! prints the validity quantity 2γL(2ε) next to the true error.

use gpwave::corrector::LinSolveConfig;
use gpwave::estimator::kantorovich_certificate;
use gpwave::model::{Nonlinearity, PotentialSpec, ProblemSpec};
use gpwave::solver::{solve_ground_state, SolverConfig};
use gpwave::spectral::make_basis;
use gpwave::study::measure;

fn main() -> gpwave::Result<()> {
    let p = ProblemSpec {
        d: 1,
        a0: 1.0,
        mu: 1.0,
        potential: PotentialSpec::Poisson { amplitude: -1.0, rho: 0.8 },
        nonlinearity: Nonlinearity::default(),
    }
    .build()?;
    let cfg = SolverConfig { tol_residual: 1e-12, ..Default::default() };
    let reference = solve_ground_state(&p, &make_basis(1, 256)?, &cfg)?;
    println!("{:>4} {:>10} {:>10} {:>10} {:>9} {:>11}", "M", "gamma", "eps", "alpha", "certified", "true error");
    for m in [2, 4, 8, 12, 16, 24, 32] {
        let gs = solve_ground_state(&p, &make_basis(1, m)?, &cfg)?;
        let r = kantorovich_certificate(&p, &gs, &make_basis(1, 4 * m)?, &LinSolveConfig::default())?;
        let e = measure(&gs.u, gs.lambda, gs.energy, &reference)?;
        println!(
            "{m:>4} {:>10.4} {:>10.3e} {:>10.3e} {:>9} {:>11.3e}  bound {}",
            r.gamma.unwrap_or(f64::NAN),
            r.eps.unwrap_or(f64::NAN),
            r.validity_alpha.unwrap_or(f64::NAN),
            r.certified,
            e.err_h1 + e.err_lambda,
            r.error_bound_h1.map_or("inf".to_string(), |b| format!("{b:.3e}"))
        );
    }
    Ok(())
}
