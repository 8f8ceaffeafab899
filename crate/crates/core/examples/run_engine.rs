//! Runs each construction against the register machine and prints a summary
//! of what fired.
//!
//! cargo run --release --example run_engine -- 10000

use std::time::Instant;

use eps_workbench::config::RunConfig;
use eps_workbench::engines::{run, Construction};
use eps_workbench::machine::Machine;
use eps_workbench::trace::Status;

fn main() {
    let horizon = std::env::args()
        .nth(1)
        .and_then(|a| a.parse().ok())
        .unwrap_or(2000);
    for construction in Construction::ALL {
        let config = RunConfig {
            construction,
            horizon,
            ..RunConfig::default()
        };
        let start = Instant::now();
        let trace = run(&config, Machine::default());
        let elapsed = start.elapsed();
        let fired = trace.records.iter().filter(|r| r.fired()).count();
        let deferred = trace
            .records
            .iter()
            .filter(|r| matches!(r.status, Status::Deferred(_)))
            .count();
        let st = trace.final_state();
        println!(
            "{construction:<7} stages={horizon} fired={fired} deferred={deferred} \
             r-flags={} t-flags={} ({:.2?})",
            st.r_flags.len(),
            st.t_flags.len(),
            elapsed
        );
    }
}
