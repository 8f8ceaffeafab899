//! Runs every construction (and the all-rows scope of the paired one) and
//! checks the full invariant battery on the resulting traces.
//!
//! cargo run --release --example check_invariants -- 10000

use std::time::Instant;

use eps_workbench::config::RunConfig;
use eps_workbench::engines::{run, Construction, Scope};
use eps_workbench::machine::Machine;
use eps_workbench::trace::check::{check, SUITES};

fn main() {
    let horizon = std::env::args()
        .nth(1)
        .and_then(|a| a.parse().ok())
        .unwrap_or(2000);
    let runs = [
        (Construction::Paired, Scope::TriggerRow),
        (Construction::Paired, Scope::AllRows),
        (Construction::Single, Scope::TriggerRow),
        (Construction::Triad, Scope::TriggerRow),
    ];
    for (construction, scope) in runs {
        let config = RunConfig {
            construction,
            scope,
            horizon,
            ..RunConfig::default()
        };
        let trace = run(&config, Machine::default());
        let start = Instant::now();
        let report = check(&trace, &SUITES);
        println!("== {construction} {scope} ({:.2?})", start.elapsed());
        print!("{report}");
    }
}
