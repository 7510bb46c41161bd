//! Solves the forward equation by finite volumes and measures the L1 gap to the closed form.

use skewdiff::densities::q_theorem2;
use skewdiff::fokker_planck::{backward_residual_brownian_h, l1_error, solve_kfe, FpConfig};
use skewdiff::densities::linspace;
use skewdiff::sde_engine::TimeGrid;
use skewdiff::skew_family::{family_theorem1, family_theorem2, DriftSpec};
use skewdiff::Chirality;

fn main() -> skewdiff::Result<()> {
    let alpha = 1.0;
    let drift = DriftSpec::theorem2(family_theorem2(alpha, Chirality::Right)?);
    let snapshots = TimeGrid::uniform(2.0, 4)?;
    let cfg = FpConfig::new(-8.0, 8.0, 1601, 4000);
    let sol = solve_kfe(&drift, 1.0, 0.0, &snapshots, &cfg)?;
    let centers = cfg.centers();
    for (j, &t) in sol.t_nodes.iter().enumerate() {
        let l1 = l1_error(sol.row(j), &centers, |x| q_theorem2(x, t, alpha, Chirality::Right).unwrap());
        println!("t={t:.2} mass={:.8} L1={l1:.3e}", sol.mass_per_t[j]);
    }

    let fam = family_theorem1(1.0, Chirality::Right)?;
    let r = backward_residual_brownian_h(&fam, &linspace(-3.0, 3.0, 61), &linspace(0.05, 0.9, 18));
    println!("backward residual of h for theorem1 T=1: {r:.2e}");
    Ok(())
}
