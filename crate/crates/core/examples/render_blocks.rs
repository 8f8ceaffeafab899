//! Renders the block diagram of a row, from a trace file or from the
//! built-in block-evolution instance.
//!
//!     cargo run --example render_blocks [trace-file i [j]] [--svg]

use eps_workbench::scenarios::block_evolution_trace;
use eps_workbench::trace::render::{render_blocks, render_svg};
use eps_workbench::trace::Trace;

fn main() {
    let mut args: Vec<String> = std::env::args().skip(1).collect();
    let svg = args.iter().any(|a| a == "--svg");
    args.retain(|a| a != "--svg");
    let (trace, i, j) = match args.as_slice() {
        [] => (block_evolution_trace(), 3, None),
        [path, i, rest @ ..] => {
            let text = std::fs::read_to_string(path).expect("readable trace");
            let trace = Trace::parse(&text).unwrap_or_else(|e| panic!("{e}"));
            let j = rest.first().map(|j| j.parse().expect("row j"));
            (trace, i.parse().expect("row i"), j)
        }
        _ => {
            eprintln!("usage: render_blocks [trace-file i [j]] [--svg]");
            std::process::exit(2);
        }
    };
    let out = if svg {
        render_svg(&trace, i, j)
    } else {
        render_blocks(&trace, i, j)
    };
    match out {
        Ok(text) => print!("{text}"),
        Err(e) => {
            eprintln!("{e}");
            std::process::exit(2);
        }
    }
}
