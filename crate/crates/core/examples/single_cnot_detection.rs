//! Eve skips the second CNOT and reads her ancilla directly. Each CTRL particle
//! TP checks in X_dp then fails with probability 1/2.

use sqsum::adversary::{AdversaryStrategy, User};
use sqsum::analysis::{run_experiment, ExperimentSpec};
use sqsum::protocol::ProtocolParams;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let params = ProtocolParams::new(8, 16, 1, 1.0)?;
    for target in [User::Alice, User::Bob] {
        let spec = ExperimentSpec::new(params, AdversaryStrategy::EveSingleCnot(target), 200, 5);
        let r = run_experiment(&spec)?;
        let c = r.eve_check.user(target);
        let other = r.eve_check.user(match target {
            User::Alice => User::Bob,
            User::Bob => User::Alice,
        });
        println!(
            "target {target}: CTRL error rate {:.4} ({} checks), other user {:.4}, SIFT errors {}, runs aborted {:.3}",
            c.ctrl_error_rate(),
            c.ctrl_checked,
            other.ctrl_error_rate(),
            c.sift_errors,
            r.detection_rate
        );
    }
    Ok(())
}
