//! Builds the three named drift families plus one from a custom ψ and tabulates α_t, ψ_t and the ODE residual.

use std::sync::Arc;

use skewdiff::densities::linspace;
use skewdiff::skew_family::{
    family_constant_correlation, family_theorem1, family_theorem2, ode_residual, psi_from_alpha, solve_family_from_psi,
    SkewFamily,
};
use skewdiff::Chirality;

fn table(name: &str, f: &SkewFamily, times: &[f64]) {
    println!("{name}: horizon {}, constant {:.6}", f.validity_horizon(), f.family_constant());
    println!("  {:>6} {:>12} {:>10} {:>12}", "t", "alpha", "psi", "ode resid");
    for &t in times {
        println!("  {t:>6.2} {:>12.6} {:>10.6} {:>12.2e}", f.alpha(t), f.psi(t), ode_residual(f, t));
    }
}

fn main() -> skewdiff::Result<()> {
    let times = [0.1, 0.5, 0.9];
    table("theorem1 T=1", &family_theorem1(1.0, Chirality::Right)?, &times);
    table("theorem2 alpha=1", &family_theorem2(1.0, Chirality::Right)?, &times);
    table("constant correlation 0.5", &family_constant_correlation(0.5, Chirality::Left)?, &times);

    let psi = Arc::new(|t: f64| 0.5 + 0.5 * (-t).exp());
    let custom = solve_family_from_psi(psi.clone(), 0.3, Chirality::Right, &linspace(0.02, 3.0, 60))?;
    table("custom psi", &custom, &times);
    let worst = times.iter().map(|&t| (psi_from_alpha(&custom, t) - psi(t)).abs()).fold(0.0, f64::max);
    println!("psi recovered from alpha to {worst:.1e}");

    let descriptor = serde_json::to_string(&family_theorem2(1.0, Chirality::Left)?.descriptor())?;
    println!("descriptor: {descriptor}");
    Ok(())
}
