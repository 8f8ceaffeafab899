//! Refines X over three sets: the multiples of 3 (infinite), the numbers
//! below 40 (finite), and 4N+2 (infinite on what is left).

use eps_workbench::reductions::{lemma10_refine, Hint, SetSource};

fn main() {
    let sets = vec![
        SetSource::decidable("3N", |x| x % 3 == 0),
        SetSource::decidable("x<40", |x| x < 40),
        SetSource::decidable("4N+2", |x| x % 4 == 2),
    ];
    let hints = [Hint::Infinite, Hint::Finite { bound: 40 }, Hint::Infinite];
    let r = lemma10_refine(sets, &hints).expect("hints match sets");
    for log in &r.log {
        println!(
            "level {}: {:?} -> {:?} (saw {:?})",
            log.level, log.hint, log.decision, log.sampled
        );
    }
    println!("L = {:?}", r.l);
    for k in 0..=r.depth() {
        let xs: Vec<u64> = (0..200)
            .filter(|&x| r.contains_level(k, x).unwrap())
            .take(8)
            .collect();
        println!("X_{k} starts {xs:?}");
    }
}
