//! Full convergence study with rate fits; writes study.csv, report.json and
//! plot_study.py into the directory given as first argument (default
//! `study-out`). Set GPWAVE_CACHE_DIR to reuse the reference solution.

use std::path::PathBuf;

use gpwave::model::{Nonlinearity, PotentialSpec, ProblemSpec};
use gpwave::study::{cache_dir_from_env, run_study, write_outputs, StudyConfig};

fn main() -> gpwave::Result<()> {
    let out = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "study-out".into()));
    let spec = ProblemSpec {
        d: 1,
        a0: 1.0,
        mu: 1.0,
        potential: PotentialSpec::Poisson { amplitude: -1.0, rho: 0.8 },
        nonlinearity: Nonlinearity::default(),
    };
    let report = run_study(&spec, &StudyConfig::default(), cache_dir_from_env().as_deref())?;
    for r in &report.relations {
        match r.fit {
            Some(f) => println!("{:<36} slope {:>7.3}  R2 {:.4}  window {:?}  pass={}", r.name, f.slope, f.r2, r.window, r.pass),
            None => println!("{:<36} no fit: {}", r.name, r.note.as_deref().unwrap_or("")),
        }
    }
    for c in &report.properties {
        println!("{:<36} pass={}", c.name, c.pass);
    }
    write_outputs(&report, &out)?;
    println!("wrote {}", out.display());
    Ok(())
}
