//! Plain intercept-resend in Z_dp on one user's line.

use sqsum::adversary::{AdversaryStrategy, User};
use sqsum::analysis::{run_experiment, ExperimentSpec};
use sqsum::channel::ChannelConfig;
use sqsum::protocol::ProtocolParams;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let params = ProtocolParams::new(4, 1, 1, 1.0)?;
    let spec = ExperimentSpec::new(
        params,
        AdversaryStrategy::EveMeasureResend(User::Bob),
        2_000,
        9,
    )
    .with_channel(ChannelConfig::dephasing());
    let r = run_experiment(&spec)?;
    let bob = r.eve_check.bob;
    println!(
        "Bob CTRL error rate {:.4}, SIFT error rate {:.4}",
        bob.ctrl_error_rate(),
        bob.sift_error_rate()
    );
    println!(
        "detected in {:.4} of runs (ci95 {:.4}..{:.4}); abort breakdown {:?}",
        r.detection_rate, r.ci95.lower, r.ci95.upper, r.abort_breakdown
    );
    println!(
        "wrong results on surviving runs: {}",
        r.correctness_failures
    );
    Ok(())
}
