//! Descriptors, auxiliary functions, ceers and a rule-table numbering.

use eps_workbench::aux::{AuxNumbering, Family, StandardEnv};
use eps_workbench::ceer::CeerBuilder;
use eps_workbench::geometry::Layout;
use eps_workbench::kernel::{eval, ext_equal, Descriptor};
use eps_workbench::machine::{programs, Machine};
use eps_workbench::numbering::{equiv, Eps, Rule};

fn main() {
    let env = StandardEnv::new(Machine::default());
    let ds: Vec<Descriptor> = ["empty", "fin(3,2)", "tot(3)", "aux(single,5)", "phi(3)"]
        .iter()
        .map(|s| s.parse().unwrap())
        .collect();
    for d in &ds {
        let vals: Vec<String> = (0..5)
            .map(|x| match eval(d, x, 64, &env).unwrap().value() {
                Some(v) => v.to_string(),
                None => "-".into(),
            })
            .collect();
        println!("{:14} {}", d.to_string(), vals.join(" "));
    }
    println!(
        "fin(3,2) vs tot(3): {}",
        ext_equal(&ds[1], &ds[2], 64, &env).unwrap()
    );
    // Machine descriptors can only be told apart, never proved equal.
    let id = Descriptor::Machine {
        index: programs::identity(),
    };
    let padded = Descriptor::Machine {
        index: programs::padded_identity(2),
    };
    println!(
        "identity vs padded identity: {}",
        ext_equal(&id, &padded, 64, &env).unwrap()
    );

    let aux = AuxNumbering::new(Family::Paired);
    println!(
        "alpha_4 vs alpha_9 (paired): {}",
        aux.separate(4, 9).unwrap()
    );

    let mut r = CeerBuilder::new();
    r.add_pair(1, 4);
    r.add_pair(4, 9);
    r.add_class([2, 7]);
    println!(
        "ceer classes {:?}, 1~9 {}, 1~2 {}",
        r.mentioned_classes(),
        r.related(1, 9),
        r.related(1, 2)
    );

    // The single layout's initial rows, with Empty on odd programs.
    let mut eps = Eps::new();
    eps.push(
        0,
        Rule::RowBase {
            layout: Layout::Single,
        },
    );
    eps.push(
        0,
        Rule::Residue {
            modulus: 2,
            residue: 1,
            d: Descriptor::Empty,
        },
    );
    let psi = eps.at(0);
    for p in [4, 6, 8, 10, 11] {
        println!("psi_{p:<2} = {}", eps.lookup(p, 0).unwrap());
    }
    println!("psi_4 vs psi_6: {}", equiv(&psi, 4, 6, 64, &env).unwrap());
    println!("psi_4 vs psi_8: {}", equiv(&psi, 4, 8, 64, &env).unwrap());
}
