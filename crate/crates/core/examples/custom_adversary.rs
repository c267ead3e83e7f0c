//! Plugging a new strategy into the engine through the `Adversary` hooks: a
//! TP that announces pure noise on every group.

use rand::{Rng, RngCore};
use sqsum::adversary::{Adversary, AdversaryStrategy};
use sqsum::analysis::trial_rng;
use sqsum::protocol::{Protocol, ProtocolParams, Verdict};
use sqsum::qcore::{BellLabel, DoubleBellOutcome, QuantumError, StateVector};
use sqsum::Bits;

struct NoisyTp;

impl Adversary for NoisyTp {
    // Reported as a TP attack; the announcement hook is what matters here.
    fn strategy(&self) -> AdversaryStrategy {
        AdversaryStrategy::TpAttack2
    }

    fn announce(
        &mut self,
        _index: usize,
        _group: &StateVector,
        rng: &mut dyn RngCore,
    ) -> Option<Result<DoubleBellOutcome, QuantumError>> {
        let pick = |rng: &mut dyn RngCore| BellLabel::ALL[rng.gen_range(0..4)];
        Some(Ok(DoubleBellOutcome::new(pick(rng), pick(rng))))
    }
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let params = ProtocolParams::new(4, 1, 4, 1.0)?;
    let protocol = Protocol::new(params)?;
    let (mut caught, runs) = (0, 1_000);
    for t in 0..runs {
        let mut rng = trial_rng(17, t);
        let x = Bits::random(4, &mut rng);
        let y = Bits::random(4, &mut rng);
        let out = protocol.run(&x, &y, &mut NoisyTp, &mut rng)?;
        if let Verdict::Abort { reason, .. } = out.verdict {
            caught += reason.is_detection() as u32;
        }
    }
    println!("noisy TP caught in {caught}/{runs} runs");
    Ok(())
}
