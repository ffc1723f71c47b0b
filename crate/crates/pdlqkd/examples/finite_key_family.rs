//! Finite-key rate against distance for a family of block sizes, converging
//! toward the two-decoy asymptotic curve as the session grows.

use pdlqkd::decoy::key_rate_two_decoy;
use pdlqkd::finite::{finite_key_rate, FiniteKeyParams};
use pdlqkd::keyrate::{heuristic_p_optimal, RateInputs};
use pdlqkd::model::{pdl_loss_factor, ChannelGeometry, SourceModel, SystemParams};

fn main() -> pdlqkd::Result<()> {
    let params = SystemParams::default();
    let pdl_db = 3.0;
    let source = SourceModel::symmetric_pdl(0.7, 0.1, pdl_db)?;
    let p = heuristic_p_optimal(0.7, pdl_loss_factor(pdl_db))?;
    let inputs = RateInputs { protocol_efficiency: 1.0, ec_inefficiency: 1.16 };
    let block_sizes = [1e10, 1e12, 1e14];

    print!("{:>6}", "km");
    for n in block_sizes {
        print!(" {:>14}", format!("N={n:.0e}"));
    }
    println!(" {:>14}", "asymptotic");

    for step in 0..=10 {
        let geometry = ChannelGeometry { distance_km: f64::from(step) * 10.0 };
        print!("{:>6.0}", geometry.distance_km);
        for n in block_sizes {
            let fk = FiniteKeyParams::new(n as u64, 0.8, 0.15, p, 1e-10, 1e-10)?;
            let result =
                finite_key_rate(&params, &source, &geometry, &fk, inputs.ec_inefficiency)?;
            print!(" {:>14.6e}", result.rate);
        }
        let asymptotic = key_rate_two_decoy(&params, &source, &geometry, &inputs, p)?;
        println!(" {:>14.6e}", asymptotic.rate);
    }
    Ok(())
}
