//! The reference machine: a few named register programs, their step-bounded
//! values, and a scripted index overriding one of them.

use eps_workbench::machine::{decode, programs, run_program, Fallback, Machine, ScriptRegistry};

fn main() {
    let named = [
        ("identity", programs::identity()),
        ("successor", programs::successor()),
        ("constant 5", programs::constant(5)),
        ("looping", programs::looping()),
        ("padded identity", programs::padded_identity(3)),
    ];
    for (name, e) in named {
        let values: Vec<String> = (0..4)
            .map(|x| match run_program(e, x, 100) {
                eps_workbench::machine::RunStatus::Halted { value, .. } => value.to_string(),
                _ => "-".into(),
            })
            .collect();
        println!(
            "{name:16} e={e:<8} {:?}  on 0..4: {}",
            decode(e),
            values.join(" ")
        );
    }

    let scripts = ScriptRegistry::parse("G 7 3 0 42\nW 8 5 11").unwrap();
    let m = Machine::new(scripts, Fallback::Programs);
    for s in [2, 6, 12] {
        println!(
            "stage {s}: phi_7(0) = {:?}, W_8 = {:?}, phi_1(2) = {:?}",
            m.step_eval(7, 0, s),
            m.w_enum(8, s),
            m.step_eval(1, 2, s)
        );
    }
}
