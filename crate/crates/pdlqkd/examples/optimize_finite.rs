//! Joint source optimization in the finite-key setting: intensities and
//! setting probabilities tuned together for a fixed block size.

use pdlqkd::finite::FiniteKeyParams;
use pdlqkd::keyrate::RateInputs;
use pdlqkd::model::{ChannelGeometry, SourceModel, SystemParams};
use pdlqkd::optimizer::{optimize, OptimizeMode, RateDetail, SearchSpec};

fn main() -> pdlqkd::Result<()> {
    let params = SystemParams::default();
    let geometry = ChannelGeometry { distance_km: 50.0 };
    let source = SourceModel::symmetric_pdl(0.7, 0.1, 3.0)?;
    let inputs = RateInputs { protocol_efficiency: 1.0, ec_inefficiency: 1.16 };
    let fk = FiniteKeyParams::new(10_000_000_000, 0.8, 0.15, 1.0, 1e-10, 1e-10)?;

    let mut spec = SearchSpec::new(OptimizeMode::Finite);
    spec.refine_levels = 3;
    let outcome = optimize(&spec, &params, &source, &geometry, &inputs, Some(&fk))?;

    println!("block size 1e10 at 50 km, 3 dB source loss");
    println!("mu_signal  {:.4}", outcome.params.mu_signal);
    println!("mu_decoy   {:.4}", outcome.params.mu_decoy.unwrap());
    println!("p_select   {:.4}", outcome.params.p_select);
    println!("p_signal   {:.4}", outcome.params.p_signal.unwrap());
    println!("p_decoy    {:.4}", outcome.params.p_decoy.unwrap());
    println!("rate       {:.6e}", outcome.rate);
    if let RateDetail::Finite(detail) = &outcome.detail {
        println!("key bits   {:.0}", detail.key_length);
        println!("s1_lower   {:.4e}", detail.s1_lower);
        println!("e1_upper   {:.6}", detail.e1_upper.unwrap());
    }
    Ok(())
}
