//! The five post-processing schemes side by side on one coarse solution.

use gpwave::corrector::{postprocess, LinSolveConfig, Scheme};
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
    let m = 12;
    let gs = solve_ground_state(&p, &make_basis(1, m)?, &cfg)?;
    let fine = make_basis(1, 4 * m)?;
    let coarse = measure(&gs.u, gs.lambda, gs.energy, &reference)?;
    println!("coarse  H1 {:.3e}  |dlambda| {:.3e}", coarse.err_h1, coarse.err_lambda);
    for scheme in Scheme::ALL {
        match postprocess(&p, &gs, &fine, scheme, &LinSolveConfig::default()) {
            Ok(c) => {
                let e = measure(&c.u_hat, c.lambda_hat, c.energy_hat, &reference)?;
                let note = c.diagnostics.note.unwrap_or_default();
                println!("{:<7} H1 {:.3e}  |dlambda| {:.3e}  {note}", scheme.name(), e.err_h1, e.err_lambda);
            }
            Err(e) => println!("{:<7} failed: {e}", scheme.name()),
        }
    }
    Ok(())
}
