//! Brute-force check of the matrix-free solver: assemble the dense Fock and
//! linearized matrices for a small basis and compare ground states and spectra.

use gpwave::model::Problem;
use gpwave::oracle::DenseOracle;
use gpwave::solver::{solve_ground_state, SolverConfig};
use gpwave::spectral::make_basis;

fn main() -> gpwave::Result<()> {
    let p = Problem::cosine(1)?;
    let basis = make_basis(1, 16)?;
    let oracle = DenseOracle::new(&p, &basis)?;
    let dense = oracle.solve()?;
    let cfg = SolverConfig { tol_residual: 1e-12, ..Default::default() };
    let gs = solve_ground_state(&p, &basis, &cfg)?;
    let diff = (&dense.u - &gs.u.clone().aligned_with(&dense.u)).norm_h1();
    println!("lambda: dense {:.15}  matrix-free {:.15}", dense.lambda, gs.lambda);
    println!("energy: dense {:.15}  matrix-free {:.15}", dense.energy, gs.energy);
    println!("H1 distance between states: {diff:.2e}");
    let spectrum = DenseOracle::eigenvalues(&oracle.fock_matrix(&dense.u));
    println!("lowest Fock eigenvalues: {:.6?}", &spectrum[..4]);
    Ok(())
}
