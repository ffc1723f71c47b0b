//! Monte-Carlo check of the finite-key estimators: photon-resolved sessions
//! where the simulator tags true single-photon events, so the bounds can be
//! compared with the truth they must dominate.

use pdlqkd::finite::FiniteKeyParams;
use pdlqkd::keyrate::heuristic_p_optimal;
use pdlqkd::model::{pdl_loss_factor, ChannelGeometry, SourceModel, SystemParams};
use pdlqkd::montecarlo::check_bounds;

fn main() -> pdlqkd::Result<()> {
    let params = SystemParams::default();
    let geometry = ChannelGeometry { distance_km: 50.0 };
    let pdl_db = 3.0;
    let source = SourceModel::symmetric_pdl(0.7, 0.1, pdl_db)?;
    let p = heuristic_p_optimal(0.7, pdl_loss_factor(pdl_db))?;
    let fk = FiniteKeyParams::new(1_000_000_000, 0.8, 0.15, p, 1e-10, 1e-10)?;

    println!(
        "{:>6} {:>14} {:>14} {:>10} {:>10} {:>6} {:>8}",
        "seed", "s1_lower", "s1_truth", "e1_upper", "e1_truth", "ok", "covered"
    );
    let mut covered = 0;
    let mut indicators = 0;
    for seed in 0..20 {
        let check = check_bounds(&params, &source, &geometry, &fk, 1.16, seed)?;
        covered += check.covered;
        indicators += check.indicators;
        println!(
            "{seed:>6} {:>14.4e} {:>14.4e} {:>10.6} {:>10.6} {:>6} {:>7}/{}",
            check.s1_lower,
            check.s1_truth,
            check.e1_upper.unwrap_or(f64::NAN),
            check.e1_truth.unwrap_or(f64::NAN),
            check.dominance_ok,
            check.covered,
            check.indicators,
        );
    }
    println!(
        "interval coverage over all runs: {covered}/{indicators} ({:.4})",
        f64::from(covered) / f64::from(indicators)
    );
    Ok(())
}
