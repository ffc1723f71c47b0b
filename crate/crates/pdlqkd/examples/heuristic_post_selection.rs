//! Accuracy of the closed-form post-selection probability: compares the
//! heuristic with the numerically optimized value and the key rates both
//! produce.

use pdlqkd::keyrate::{asymptotic_key_rate, heuristic_p_optimal, RateInputs};
use pdlqkd::model::{pdl_loss_factor, ChannelGeometry, SourceModel, SystemParams};

fn main() -> pdlqkd::Result<()> {
    let params = SystemParams::default();
    let geometry = ChannelGeometry { distance_km: 80.0 };
    let inputs = RateInputs::default();
    let mu_signal = 0.7;

    println!(
        "{:>6} {:>12} {:>12} {:>14} {:>14}",
        "pdl", "P_heur", "P_best", "R(P_heur)", "R(P_best)"
    );
    for pdl_db in [1.0, 2.0, 4.0, 6.0, 8.0, 10.0] {
        let source = SourceModel::symmetric_pdl(mu_signal, 0.1, pdl_db)?;
        let loss = pdl_loss_factor(pdl_db);
        let heuristic = heuristic_p_optimal(mu_signal, loss)?;
        let at_heuristic =
            asymptotic_key_rate(&params, &source, &geometry, &inputs, Some(heuristic))?;

        let mut best_p = f64::NAN;
        let mut best_rate = f64::NEG_INFINITY;
        for k in 1..=10000 {
            let p = f64::from(k) / 10000.0;
            let rate = asymptotic_key_rate(&params, &source, &geometry, &inputs, Some(p))?.rate;
            if rate > best_rate {
                best_rate = rate;
                best_p = p;
            }
        }
        println!(
            "{pdl_db:>6.1} {heuristic:>12.6} {best_p:>12.6} {:>14.6e} {best_rate:>14.6e}",
            at_heuristic.rate
        );
    }
    Ok(())
}
