//! Extracts a one-to-one numbering from a table with repetitions and checks
//! the translations both ways.

use eps_workbench::kernel::Descriptor;
use eps_workbench::numbering::DescriptorTable;
use eps_workbench::scenarios::friedberg_check;

fn main() {
    let psi = DescriptorTable(
        (0..24u64)
            .map(|p| match p % 4 {
                0 => Descriptor::Total { value: p % 3 },
                1 => Descriptor::finite(p % 2, 2),
                2 => Descriptor::Empty,
                _ => Descriptor::finite(p % 2, 2 + p % 3),
            })
            .collect(),
    );
    let c = friedberg_check(&psi, 32).expect("constant table");
    println!("{} programs, {} functions", psi.0.len(), c.eta.0.len());
    for (i, (d, m)) in c.eta.0.iter().zip(&c.forward).enumerate() {
        println!("  eta_{i:<2} = psi_{m:<2} = {d}");
    }
    println!("one-to-one: {}", c.one_to_one);
    println!(
        "psi -> eta: {}, eta -> psi: {}",
        c.backward_equal, c.forward_equal
    );
    println!("decider mismatches: {}", c.decider_mismatches.len());
}
