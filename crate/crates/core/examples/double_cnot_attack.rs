//! Eve entangles an ancilla on the way out and disentangles it on the way
//! back: the ancilla always returns to |0_dp⟩, so she learns nothing about
//! CTRL versus SIFT.

use sqsum::adversary::{eve_double_cnot_forward, eve_double_cnot_return, AdversaryStrategy, User};
use sqsum::analysis::{run_experiment, trial_rng, ExperimentSpec};
use sqsum::protocol::{step2_user_action, ProtocolParams, UserOp};
use sqsum::qcore::{encode, LogicalBasisLabel::*};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut rng = trial_rng(3, 0);
    for op in [UserOp::Ctrl, UserOp::Sift] {
        let joint = eve_double_cnot_forward(&encode(XdpPlus), &encode(Zdp0))?;
        let (returned, result) = step2_user_action(&joint, op, &mut rng)?;
        let (particle, ancilla) = eve_double_cnot_return(&returned)?;
        // TP gets back exactly what an unattacked exchange would deliver.
        let expected = result.map_or(encode(XdpPlus), encode);
        println!(
            "{op}: user saw {result:?}, ancilla deviation from |0_dp> {:.1e}, particle deviation {:.1e}",
            ancilla.deviation_up_to_phase(&encode(Zdp0))?,
            particle.deviation_up_to_phase(&expected)?
        );
    }

    let params = ProtocolParams::new(8, 1, 1, 1.0)?;
    let spec = ExperimentSpec::new(
        params,
        AdversaryStrategy::EveDoubleCnot(User::Alice),
        200,
        3,
    );
    let report = run_experiment(&spec)?;
    let eve = report.eve.expect("Eve intercepted particles");
    println!(
        "{} particles: ancilla |0_dp> rate {:.3}, CTRL/SIFT guess accuracy {:.4}, detections {}",
        eve.intercepted, eve.zero_reading_rate, eve.inference_accuracy, report.detections
    );
    Ok(())
}
