//! One Newton step on the fine space (the reconstructed error) and the
//! energy bounds it yields, compared against a fine reference solution.

use gpwave::corrector::{reconstructed_error, LinSolveConfig};
use gpwave::estimator::energy_bounds;
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
    println!("{:>4} {:>11} {:>11} {:>11} {:>11}", "M", "H1 coarse", "H1 newton", "E - Eref", "lower gap");
    for m in [8, 12, 16, 24] {
        let gs = solve_ground_state(&p, &make_basis(1, m)?, &cfg)?;
        let corr = reconstructed_error(&p, &gs, &make_basis(1, 4 * m)?, &LinSolveConfig::default())?;
        let bounds = energy_bounds(&gs, &corr)?;
        let before = measure(&gs.u, gs.lambda, gs.energy, &reference)?;
        let after = measure(&corr.u_hat, corr.lambda_hat, corr.energy_hat, &reference)?;
        println!(
            "{m:>4} {:>11.3e} {:>11.3e} {:>11.3e} {:>11.3e}",
            before.err_h1,
            after.err_h1,
            before.err_energy,
            bounds.lower - reference.energy
        );
    }
    Ok(())
}
