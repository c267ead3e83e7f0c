//! Rebuilds the summation key table from the measurement algebra.

use sqsum::analysis::{admissible_announcements, verify_table1, AnnouncementClass};

fn main() {
    let report = verify_table1();
    println!(" x y  A     B     | k_a k_b c_a c_b | class k_t | r");
    for row in &report.rows {
        println!(
            " {} {}  {:?}  {:?}  |  {}   {}   {}   {}  |  {}    {}  | {}",
            row.x,
            row.y,
            row.alice,
            row.bob,
            row.k_a,
            row.k_b,
            row.c_a,
            row.c_b,
            match row.class {
                AnnouncementClass::Phi => "φ",
                AnnouncementClass::Psi => "ψ",
            },
            row.k_t,
            row.r
        );
    }
    let first = &report.rows[0];
    let possible: Vec<String> = admissible_announcements(first.alice, first.bob)
        .iter()
        .map(|o| format!("{:?}{:?}", o.first, o.second))
        .collect();
    println!("TP can announce on |0_dp>|0_dp>: {}", possible.join(", "));
    for m in &report.mismatches {
        println!(
            "printed table differs at row {}: {} = {} (derived {})",
            m.row, m.column, m.printed, m.derived
        );
    }
}
