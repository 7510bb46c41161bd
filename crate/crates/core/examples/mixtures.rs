//! Mixes the two chiralities and recovers Gaussian laws: Brownian motion from the theorem1 pair and the
//! repulsive OU law from the OU h-transform pair.

use skewdiff::analytic_dists::normal_cdf;
use skewdiff::ou_skew::{identity_sides, ou_mixture_probability, repulsive_ou_moments, OuSkewSpec};
use skewdiff::sde_engine::{init_thread_pool, mixture_probability, simulate_mixture, SimConfig, TimeGrid};
use skewdiff::skew_family::{family_theorem1, DriftSpec};
use skewdiff::validation::{ks_statistic, ks_threshold_99};
use skewdiff::Chirality;

fn main() -> skewdiff::Result<()> {
    init_thread_pool();
    let (horizon, x0) = (1.0, 0.3);
    let plus = DriftSpec::theorem1(family_theorem1(horizon, Chirality::Right)?).with_shift(x0);
    let (_, pp) = mixture_probability(x0, horizon)?;
    let grid = TimeGrid::new(0.0, horizon, 1000, 1e-4)?;
    let cfg = SimConfig::new(50_000, 3);
    let ens = simulate_mixture(&plus, &plus.mirrored(), pp, x0, &grid, &cfg)?;
    let t = grid.effective_end();
    let ks = ks_statistic(&ens.terminal(), |x| normal_cdf(x, x0, t))?;
    println!("brownian mixture p+={pp:.4}: KS vs N(x0, t) = {ks:.3e} (threshold {:.3e})", ks_threshold_99(ens.n_paths));

    let lambda = 1.0;
    let (pm, pp) = ou_mixture_probability(lambda, x0)?;
    let up = DriftSpec::ou_h_transform(OuSkewSpec::new(lambda, Chirality::Right, x0)?);
    let down = DriftSpec::ou_h_transform(OuSkewSpec::new(lambda, Chirality::Left, x0)?);
    let grid = TimeGrid::uniform(1.0, 1000)?;
    let ens = simulate_mixture(&up, &down, pp, x0, &grid, &cfg)?;
    let (m, v) = repulsive_ou_moments(lambda, x0, 1.0);
    let ks = ks_statistic(&ens.terminal(), |x| normal_cdf(x, m, v))?;
    println!("OU mixture p-={pm:.4} p+={pp:.4}: KS vs repulsive OU = {ks:.3e}");
    for x in [-1.0, 0.5, 3.0] {
        let (lhs, rhs) = identity_sides(lambda, x0, x, 1.0)?;
        println!("  x={x:+.1}: mixture {lhs:.12e} gaussian {rhs:.12e}");
    }
    Ok(())
}
