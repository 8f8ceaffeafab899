//! The counterexample translations from stabilized scripted runs, next to
//! their companion ceers.

use eps_workbench::scenarios::run_scenario;

fn main() {
    for name in ["counterexample-single", "counterexample-paired"] {
        let r = run_scenario(name).unwrap();
        print!("{r}");
        println!();
    }
}
