//! Forward detection model: per-cell gains and error rates for a lossy
//! polarization-dependent source, plus the waveguide perturbation that
//! motivates the loss model.

use pdlqkd::model::{
    forward_observables, plasma_dispersion_shift, system_transmittance, ChannelGeometry,
    IntensitySetting, Polarization, SourceModel, SystemParams,
};

fn main() -> pdlqkd::Result<()> {
    let params = SystemParams::default();
    let geometry = ChannelGeometry { distance_km: 50.0 };
    let source = SourceModel::symmetric_pdl(0.7, 0.1, 3.0)?;

    println!("channel transmittance: {:.6e}", system_transmittance(&params, &geometry));
    println!(
        "source intensities: signal H {:.4}, signal V {:.4}, decoy H {:.4}, decoy V {:.4}",
        source.intensity(IntensitySetting::Signal, Polarization::H),
        source.intensity(IntensitySetting::Signal, Polarization::V),
        source.intensity(IntensitySetting::Decoy, Polarization::H),
        source.intensity(IntensitySetting::Decoy, Polarization::V),
    );
    println!();

    let table = forward_observables(&params, &source, &geometry)?;
    println!("{:<8} {:<4} {:>12} {:>10}", "setting", "pol", "gain", "qber");
    for setting in IntensitySetting::ALL {
        for pol in Polarization::ALL {
            let obs = table.get(setting, pol);
            println!(
                "{:<8} {:<4} {:>12.6e} {:>10.6}",
                setting.label(),
                pol.label(),
                obs.gain,
                obs.qber
            );
        }
    }
    println!();

    let (index_shift, absorption_shift) = plasma_dispersion_shift(5e17, 1e17)?;
    println!(
        "carrier injection (Ne=5e17, Nh=1e17 cm^-3): dn = {index_shift:.4e}, dalpha = {absorption_shift:.4} cm^-1"
    );
    Ok(())
}
