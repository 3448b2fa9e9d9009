//! Ground state of −u'' + cos(x) u + u³ = λu on (0, 2π) by damped SCF and by
//! the projected Sobolev gradient flow.
//!
//!     cargo run --release --example ground_state -- 16

use gpwave::model::Problem;
use gpwave::solver::{solve_with_trace, Method, SolverConfig};
use gpwave::spectral::make_basis;

fn main() -> gpwave::Result<()> {
    let m: usize = std::env::args().nth(1).map_or(16, |s| s.parse().expect("cutoff"));
    let p = Problem::cosine(1)?;
    let basis = make_basis(1, m)?;
    for method in [Method::Scf, Method::GradientFlow] {
        let cfg = SolverConfig { method, ..Default::default() };
        let (gs, trace) = solve_with_trace(&p, &basis, &cfg)?;
        println!(
            "{method:?}: M={m} lambda={:.15} E={:.15} residual={:.2e} after {} iterations",
            gs.lambda, gs.energy, gs.residual_dual_norm, gs.iterations
        );
        let last = trace.0.iter().rev().take(3).collect::<Vec<_>>();
        for row in last.iter().rev() {
            println!("  it {:>4}  E={:.15}  r={:.2e}", row.iteration, row.energy, row.residual);
        }
    }
    Ok(())
}
