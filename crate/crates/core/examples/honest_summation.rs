//! One honest run over a dephasing channel, with the transcript summarized.
//!
//! cargo run --example honest_summation -- 10110100 11010010 7

use sqsum::adversary::AdversaryStrategy;
use sqsum::analysis::trial_rng;
use sqsum::channel::ChannelConfig;
use sqsum::protocol::{Protocol, ProtocolParams, Role};
use sqsum::Bits;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let x: Bits = args.next().as_deref().unwrap_or("10110100").parse()?;
    let y: Bits = args.next().as_deref().unwrap_or("11010010").parse()?;
    let seed: u64 = args.next().as_deref().unwrap_or("7").parse()?;

    let params = ProtocolParams::new(x.len(), 1, 1, 4.0)?;
    let protocol = Protocol::new(params)?.with_channel(ChannelConfig::dephasing());
    let mut passive = AdversaryStrategy::Passive.build();
    let out = protocol.run(&x, &y, passive.as_mut(), &mut trial_rng(seed, 0))?;

    println!("params   {params}");
    println!("X        {x}");
    println!("Y        {y}");
    println!("verdict  {}", out.verdict);
    if let Some(keys) = &out.keys {
        println!("K_A      {}", keys.k_a);
        println!("K_B      {}", keys.k_b);
        println!("C_T      {}  (TP's announcements: K_A xor K_B)", keys.c_t);
        println!("C_A      {}", keys.c_a);
        println!("C_B      {}", keys.c_b);
    }
    for role in [
        Role::EveCheck,
        Role::TpHonestyCheck,
        Role::SummationKey,
        Role::Surplus,
    ] {
        let count = out.transcript.iter().filter(|g| g.role == role).count();
        println!("{role:?}: {count} groups");
    }
    println!(
        "resources: {} qubits, {} classical bits",
        out.resources.qubits(),
        out.resources.classical_bits
    );
    Ok(())
}
