//! Residual dual norm, energy bounds, spectral gap and the Newton–Kantorovich
//! certificate for a range of cutoffs.

use gpwave::corrector::LinSolveConfig;
use gpwave::estimator::estimate;
use gpwave::model::Problem;
use gpwave::solver::{solve_ground_state, SolverConfig};
use gpwave::spectral::make_basis;

fn main() -> gpwave::Result<()> {
    let p = Problem::cosine(1)?;
    for m in [1, 2, 4, 8] {
        let gs = solve_ground_state(&p, &make_basis(1, m)?, &SolverConfig::default())?;
        let report = estimate(&p, &gs, &make_basis(1, 4 * m)?, &LinSolveConfig::default(), true)?;
        println!("M = {m}");
        print!("{}", report.to_table());
        println!();
    }
    Ok(())
}
