//! Dishonest-TP attacks: detection against 1 − (7/8)^{nd}, and how much of
//! the users' keys TP would learn if it went unnoticed.

use sqsum::adversary::AdversaryStrategy;
use sqsum::analysis::{run_experiment, single_group_detection, ExperimentSpec};
use sqsum::channel::ChannelConfig;
use sqsum::protocol::ProtocolParams;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    for attack in [AdversaryStrategy::TpAttack1, AdversaryStrategy::TpAttack2] {
        let g = single_group_detection(&attack, &ChannelConfig::noiseless(), 20_000, 1)?;
        println!(
            "{}: per checked group {:.4} (1/8 = 0.125)",
            attack.name(),
            g.rate
        );
        for nd in [1, 4, 8, 16, 32] {
            let params = ProtocolParams::new(1, 1, nd, 1.0)?;
            let r = run_experiment(&ExperimentSpec::new(params, attack, 4_000, nd as u64))?;
            println!(
                "  nd={nd:>2}  detected {:.4}  predicted {:.4}  key bits recovered when undetected {}",
                r.detection_rate,
                r.analytic_prediction.unwrap_or(f64::NAN),
                r.key_leakage.map_or("-".to_string(), |k| format!("{k:.3}"))
            );
        }
    }
    Ok(())
}
