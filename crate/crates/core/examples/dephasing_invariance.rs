//! Collective dephasing is invisible on dual-rail logical states but not on
//! bare physical qubits.

use std::f64::consts::FRAC_1_SQRT_2;

use sqsum::analysis::{dfs_statistics, trial_rng};
use sqsum::channel::{sample_window, transmit, ChannelConfig};
use sqsum::protocol::ProtocolParams;
use sqsum::qcore::{encode, LogicalBasisLabel, MeasurementBasis, StateVector};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut rng = trial_rng(1, 0);
    let logical = encode(LogicalBasisLabel::XdpPlus);
    let bare = StateVector::from_real(&[FRAC_1_SQRT_2, FRAC_1_SQRT_2])?;
    let x = MeasurementBasis::new(vec![
        bare.amplitudes().to_vec(),
        StateVector::from_real(&[FRAC_1_SQRT_2, -FRAC_1_SQRT_2])?
            .amplitudes()
            .to_vec(),
    ])?;

    println!(
        "{:>8}  {:>22}  {:>18}",
        "phase", "|+_dp> deviation", "P(+) on bare |+>"
    );
    for _ in 0..6 {
        let w = sample_window(&ChannelConfig::dephasing(), &mut rng);
        let dev = logical.deviation_up_to_phase(&transmit(&logical, w))?;
        let p_plus = transmit(&bare, w).probabilities(&[0], &x)?[0];
        println!("{:>8.4}  {:>22.1e}  {:>18.4}", w.phase(), dev, p_plus);
    }

    let stats = dfs_statistics(&ProtocolParams::new(8, 1, 1, 1.0)?, 10_000, 11)?;
    println!(
        "honest runs, dephasing vs noiseless: TVD {:.4} over {} groups",
        stats.tvd, stats.samples
    );
    Ok(())
}
