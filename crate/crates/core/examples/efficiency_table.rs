//! Qubit efficiency against the earlier three-party protocol, with the
//! counter audit of consumed qubits and classical bits.

use sqsum::analysis::{audit_resources, qubit_efficiency_for, ref20_efficiency};
use sqsum::protocol::ProtocolParams;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    println!(
        "{:>3} {:>3} {:>5}  {:>8}  {:>8}  {:>5}",
        "r", "d", "delta", "eta", "3-party", "ratio"
    );
    for (r, d, delta) in [
        (1.0, 1.0, 1.0),
        (2.0, 2.0, 2.0),
        (1.0, 4.0, 0.5),
        (8.0, 8.0, 8.0),
    ] {
        let this = qubit_efficiency_for(r, d, delta);
        let other = ref20_efficiency(r, d, delta);
        println!(
            "{r:>3} {d:>3} {delta:>5}  {this:>8.5}  {other:>8.5}  {:>5.2}",
            this / other
        );
    }

    let params = ProtocolParams::new(8, 1, 1, 1.0)?;
    let audit = audit_resources(&params, 1_000, 2)?;
    println!(
        "audit n=8: TP qubits {:?}, mean total qubits {:.1} ± {:.1} (6nq = {}), classical bits {:?} (6n = {})",
        audit.tp_qubits, audit.mean_p, audit.standard_error, audit.expected_p, audit.classical_bits, audit.expected_v
    );
    Ok(())
}
