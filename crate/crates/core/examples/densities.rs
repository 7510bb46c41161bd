//! Evaluates the closed-form transition densities on a grid and prints masses and moments.

use skewdiff::densities::{
    censored_posterior, linspace, mass, q_class, q_esn_ou, q_theorem1, q_theorem2, DensityGrid,
};
use skewdiff::skew_family::family_constant_correlation;
use skewdiff::Chirality;

fn main() -> skewdiff::Result<()> {
    let x = linspace(-9.0, 9.0, 1801);
    let t = vec![0.25, 0.5, 1.0, 2.0];

    let grid = DensityGrid::from_fn(x.clone(), t.clone(), |x, t| q_theorem2(x, t, 1.0, Chirality::Right))?;
    println!("theorem2 alpha=1");
    for s in grid.summary() {
        println!("  t={:.2} mass={:.6} mean={:.4} var={:.4} skew={:.4}", s.t, s.mass, s.mean, s.variance, s.skewness);
    }

    let grid = DensityGrid::from_fn(x.clone(), vec![0.5, 0.9, 0.99], |x, t| q_theorem1(x, t, 0.0, 1.0, Chirality::Left))?;
    println!("theorem1 T=1, left-skewed");
    for s in grid.summary() {
        println!("  t={:.2} mass={:.6} mean={:.4} skew={:.4}", s.t, s.mass, s.mean, s.skewness);
    }

    let fam = family_constant_correlation(0.5, Chirality::Right)?;
    let m = mass(|x| q_class(x, 1.0, &fam, 0.3).unwrap(), 0.3, 12.0)?;
    println!("constant correlation from x0=0.3: mass at t=1 = {m:.12}");

    let m = mass(|x| censored_posterior(x, 1.0, 0.8).unwrap(), 0.0, 12.0)?;
    println!("censored posterior rho=0.8: mass = {m:.12}");

    let m = mass(|x| q_esn_ou(x, 1.0, 0.5, 0.2, Chirality::Right).unwrap(), 0.2, 12.0)?;
    println!("OU h-transform lambda=0.5: mass = {m:.12}");

    let mut csv = Vec::new();
    grid.write_csv(&mut csv)?;
    println!("grid CSV: {} lines", csv.iter().filter(|&&b| b == b'\n').count());
    Ok(())
}
