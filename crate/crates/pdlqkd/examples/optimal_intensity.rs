//! Stationary signal intensity of the approximate key rate as a function of
//! polarization-dependent loss, for two error-correction inefficiencies.
//!
//! With post-selection at the heuristic probability, the optimal intensity
//! grows with the loss, compensating the discarded detections.

use pdlqkd::keyrate::{approx_key_rate, heuristic_p_optimal, solve_optimal_mu};
use pdlqkd::model::{pdl_loss_factor, system_transmittance, ChannelGeometry, SystemParams};

fn main() -> pdlqkd::Result<()> {
    let params = SystemParams::default();
    let geometry = ChannelGeometry { distance_km: 80.0 };
    let eta = system_transmittance(&params, &geometry);

    println!(
        "{:>6} {:>12} {:>12} {:>14}",
        "pdl", "mu*(f=1.16)", "mu*(f=1.5)", "approx R(1.16)"
    );
    for tenth_db in 0..=10 {
        let pdl_db = f64::from(tenth_db);
        let loss = pdl_loss_factor(pdl_db);
        let mu_lean = solve_optimal_mu(loss, params.misalignment, 1.16)?;
        let mu_costly = solve_optimal_mu(loss, params.misalignment, 1.5)?;
        let p = heuristic_p_optimal(mu_lean, loss)?;
        let rate = approx_key_rate(mu_lean, loss, p, eta, params.misalignment, 1.16);
        println!("{pdl_db:>6.1} {mu_lean:>12.6} {mu_costly:>12.6} {rate:>14.6e}");
    }
    Ok(())
}
