//! Simulates a skew diffusion and compares column statistics and the KS distance with the closed form.

use skewdiff::densities::skew_normal_cdf;
use skewdiff::sde_engine::{init_thread_pool, simulate, summarize, Recording, SimConfig, TimeGrid};
use skewdiff::skew_family::{family_theorem2, DriftSpec};
use skewdiff::validation::{ks_statistic, ks_threshold_99};
use skewdiff::Chirality;

fn main() -> skewdiff::Result<()> {
    init_thread_pool();
    let alpha = 1.0;
    let drift = DriftSpec::theorem2(family_theorem2(alpha, Chirality::Right)?);
    let grid = TimeGrid::uniform(2.0, 2000)?;
    let cfg = SimConfig::new(50_000, 42).with_recording(Recording::Every(500));
    let ens = simulate(&drift, 0.0, &grid, &cfg)?;

    println!("{:>5} {:>9} {:>9} {:>9} {:>9}", "t", "mean", "var", "skew", "P(X<0)");
    for c in summarize(&ens).iter().skip(1) {
        println!("{:>5.2} {:>9.4} {:>9.4} {:>9.4} {:>9.4}", c.t, c.mean, c.variance, c.skewness, c.negative_fraction);
    }

    let t: f64 = 2.0;
    let ks = ks_statistic(&ens.terminal(), |x| skew_normal_cdf(x, 0.0, t.sqrt(), alpha * t.sqrt()).unwrap())?;
    println!("KS at t={t}: {ks:.4e} (99% threshold {:.4e})", ks_threshold_99(ens.n_paths));

    let mut csv = Vec::new();
    ens.write_csv(&mut csv)?;
    println!("CSV export: {} bytes, clamp fraction {:.2e}", csv.len(), ens.clamp_fraction());
    Ok(())
}
