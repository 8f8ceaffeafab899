//! Runs the built-in scenarios and prints their reports.
//!
//!     cargo run --release --example scenarios [name ...]

use eps_workbench::scenarios::{run_scenario, SCENARIOS};

fn main() {
    let names: Vec<String> = std::env::args().skip(1).collect();
    let names: Vec<&str> = if names.is_empty() {
        SCENARIOS.iter().map(|(n, _)| *n).collect()
    } else {
        names.iter().map(String::as_str).collect()
    };
    let mut failed = 0;
    for name in names {
        match run_scenario(name) {
            Some(r) => {
                print!("{r}");
                if !r.passed() {
                    failed += 1;
                }
            }
            None => eprintln!("unknown scenario `{name}`"),
        }
        println!();
    }
    std::process::exit(if failed == 0 { 0 } else { 1 });
}
