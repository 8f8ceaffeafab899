//! Ties: a numbering with each function repeated three times, the ceer
//! generated by the roundtrip through its one-to-one copy, and the
//! translation recovered from that ceer.

use eps_workbench::aux::StandardEnv;
use eps_workbench::kernel::Descriptor;
use eps_workbench::numbering::{check_translation, TranslationSource};
use eps_workbench::reductions::{ceer_from_roundtrip, ties_check, translation_from_ceer, TieMode};
use eps_workbench::scenarios::tie_instance;

fn main() {
    let env = StandardEnv::default();
    let theta: Vec<Descriptor> = (0..6).map(|v| Descriptor::Total { value: v }).collect();
    let inst = tie_instance(theta, |p| (p * 5) % 6, 18);
    let programs: Vec<u64> = (0..18).collect();
    let rt = ceer_from_roundtrip(&inst.t, &inst.t_prime, &programs, 8, &env);
    println!("ceer classes: {:?}", rt.ceer.mentioned_classes());
    for mode in [TieMode::Strong, TieMode::Weak] {
        let rep = ties_check(&rt.ceer, &inst.t, &inst.psi, mode, 18, 8, &env).unwrap();
        println!("{rep}");
    }
    let back: std::collections::BTreeMap<u64, u64> = programs
        .iter()
        .map(|&p| {
            (
                p,
                translation_from_ceer(&rt.ceer, &inst.t, &[], p, 18, 8, &env).unwrap(),
            )
        })
        .collect();
    let report = check_translation(
        &TranslationSource::Table(back),
        &inst.psi,
        &inst.theta,
        &programs,
        8,
        &env,
    )
    .unwrap();
    println!(
        "recovered translation: {} equal, {} distinct",
        report.equal, report.distinct
    );

    // A ceer that relates programs computing different functions is not a tie.
    let mut wrong = rt.ceer.clone();
    wrong.add_pair(0, 1);
    println!(
        "{}",
        ties_check(&wrong, &inst.t, &inst.psi, TieMode::Strong, 18, 8, &env).unwrap()
    );
}
