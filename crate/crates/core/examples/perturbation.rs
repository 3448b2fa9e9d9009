//! Diagonal perturbation correction: two FFTs for the residual, then a
//! division on the fine-only modes. The gain over the coarse error grows like M².

use gpwave::corrector::{perturbation_correction, LinSolveConfig};
use gpwave::model::{Nonlinearity, PotentialSpec, ProblemSpec};
use gpwave::solver::{solve_ground_state, SolverConfig};
use gpwave::spectral::make_basis;
use gpwave::study::{fit_rate, measure};

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
    let mut points = Vec::new();
    for m in [8usize, 12, 16, 24, 32] {
        let gs = solve_ground_state(&p, &make_basis(1, m)?, &cfg)?;
        let c = perturbation_correction(&p, &gs, &make_basis(1, 4 * m)?, &LinSolveConfig::default())?;
        let ratio = measure(&c.u_hat, c.lambda_hat, c.energy_hat, &reference)?.err_h1
            / measure(&gs.u, gs.lambda, gs.energy, &reference)?.err_h1;
        println!("M={m:>3}  post/coarse = {ratio:.3e}");
        points.push((m as f64, ratio));
    }
    println!("fitted slope {:.3}", fit_rate(&points)?.slope);
    Ok(())
}
