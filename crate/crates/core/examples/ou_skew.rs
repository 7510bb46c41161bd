//! OU with a chiral h-transform: drift, extended skew-normal densities and OU driven by skew noise.

use skewdiff::densities::{esn_ou_params, p_marginal_ou_sknoise_cdf, q_esn_ou, q_ou_h_transform};
use skewdiff::ou_skew::{drift_theorem4, sigma_ratio, simulate_ou_skew_noise, OuSkewSpec};
use skewdiff::sde_engine::{init_thread_pool, SimConfig, TimeGrid};
use skewdiff::validation::{ks_statistic, ks_threshold_99};
use skewdiff::Chirality;

fn main() -> skewdiff::Result<()> {
    init_thread_pool();
    let (lambda, x0) = (1.0, 0.5);
    let spec = OuSkewSpec::new(lambda, Chirality::Right, x0)?;
    for x in [-2.0, 0.0, 2.0] {
        println!("drift({x:+.1}) = {:.6}", drift_theorem4(x, &spec));
    }
    for t in [0.25, 1.0] {
        let p = esn_ou_params(t, lambda, x0, Chirality::Right)?;
        let gap = (q_esn_ou(0.3, t, lambda, x0, Chirality::Right)? - q_ou_h_transform(0.3, t, &spec)).abs();
        println!("t={t}: {p:?}, forms differ by {gap:.1e}, sigma ratio {:.4}", sigma_ratio(lambda, t));
    }

    let horizon = 2.0;
    let grid = TimeGrid::uniform(1.0, 1000)?;
    let (x, _z) = simulate_ou_skew_noise(lambda, x0, horizon, &grid, &SimConfig::new(50_000, 5))?;
    let ks = ks_statistic(&x.terminal(), |v| p_marginal_ou_sknoise_cdf(v, 1.0, lambda, x0, horizon).unwrap())?;
    println!("OU with skew noise at t=1: KS {ks:.3e} (threshold {:.3e})", ks_threshold_99(x.n_paths));
    Ok(())
}
