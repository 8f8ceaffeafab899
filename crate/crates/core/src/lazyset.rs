//! Infinite sets of naturals kept as a base arithmetic progression followed
//! by a stack of removal layers. Every layer maps ranks in the set it
//! produces to ranks in the set below it, so `select` and `rank` stay exact
//! without materializing anything.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

#[derive(Clone, Debug, PartialEq, Eq)]
enum Layer {
    /// Drops ranks `[0, prefix)` and the ranks in `extra` (all `>= prefix`).
    Drop { prefix: u64, extra: BTreeSet<u64> },
    /// Keeps only odd ranks: removes the even-positioned elements.
    Thin,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LazySet {
    start: u64,
    step: u64,
    layers: Vec<Layer>,
}

impl LazySet {
    /// `{start + step·n | n ∈ ℕ}`.
    pub fn progression(start: u64, step: u64) -> Self {
        assert!(step >= 1);
        LazySet {
            start,
            step,
            layers: Vec::new(),
        }
    }

    pub fn naturals() -> Self {
        Self::progression(0, 1)
    }

    /// The `n`-th element in increasing order.
    pub fn select(&self, n: u64) -> u64 {
        let mut r = n;
        for layer in self.layers.iter().rev() {
            r = match layer {
                Layer::Drop { prefix, extra } => {
                    let mut r = r + prefix;
                    for &e in extra {
                        if e <= r {
                            r += 1;
                        } else {
                            break;
                        }
                    }
                    r
                }
                Layer::Thin => 2 * r + 1,
            };
        }
        self.start + self.step * r
    }

    /// The position of `v` if it belongs to the set.
    pub fn rank(&self, v: u64) -> Option<u64> {
        if v < self.start || !(v - self.start).is_multiple_of(self.step) {
            return None;
        }
        let mut r = (v - self.start) / self.step;
        for layer in &self.layers {
            r = match layer {
                Layer::Drop { prefix, extra } => {
                    if r < *prefix || extra.contains(&r) {
                        return None;
                    }
                    r - prefix - extra.range(..r).count() as u64
                }
                Layer::Thin => {
                    if r.is_multiple_of(2) {
                        return None;
                    }
                    r / 2
                }
            };
        }
        Some(r)
    }

    pub fn contains(&self, v: u64) -> bool {
        self.rank(v).is_some()
    }

    pub fn min(&self) -> u64 {
        self.select(0)
    }

    pub fn first(&self, n: u64) -> Vec<u64> {
        (0..n).map(|k| self.select(k)).collect()
    }

    /// Removes the elements at the given ranks of the current set.
    pub fn remove_ranks<I: IntoIterator<Item = u64>>(&mut self, ranks: I) {
        let ranks: BTreeSet<u64> = ranks.into_iter().collect();
        if ranks.is_empty() {
            return;
        }
        match self.layers.last_mut() {
            Some(Layer::Drop { prefix, extra }) => {
                // Translate the new ranks into ranks of the layer below, then
                // merge them into this layer.
                let below: Vec<u64> = ranks
                    .iter()
                    .map(|&r| {
                        let mut r = r + *prefix;
                        for &e in extra.iter() {
                            if e <= r {
                                r += 1;
                            } else {
                                break;
                            }
                        }
                        r
                    })
                    .collect();
                extra.extend(below);
                while extra.remove(prefix) {
                    *prefix += 1;
                }
            }
            _ => {
                let mut prefix = 0;
                let mut extra = ranks;
                while extra.remove(&prefix) {
                    prefix += 1;
                }
                self.layers.push(Layer::Drop { prefix, extra });
            }
        }
    }

    /// Removes the given elements; elements not in the set are ignored.
    pub fn remove_values<I: IntoIterator<Item = u64>>(&mut self, values: I) {
        let ranks: Vec<u64> = values.into_iter().filter_map(|v| self.rank(v)).collect();
        self.remove_ranks(ranks);
    }

    pub fn remove_least(&mut self, n: u64) -> Vec<u64> {
        let taken = self.first(n);
        self.remove_ranks(0..n);
        taken
    }

    /// Removes every element at an even position.
    pub fn thin(&mut self) {
        self.layers.push(Layer::Thin);
    }
}

/// Compact text form, e.g. `ap(1,2)|drop(3;7,9)|thin`.
impl fmt::Display for LazySet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ap({},{})", self.start, self.step)?;
        for layer in &self.layers {
            match layer {
                Layer::Drop { prefix, extra } => {
                    let extra: Vec<String> = extra.iter().map(u64::to_string).collect();
                    write!(f, "|drop({};{})", prefix, extra.join(","))?;
                }
                Layer::Thin => f.write_str("|thin")?,
            }
        }
        Ok(())
    }
}

impl FromStr for LazySet {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || format!("malformed set `{s}`");
        let num = |t: &str| t.trim().parse::<u64>().map_err(|_| bad());
        let mut parts = s.split('|');
        let head = parts.next().ok_or_else(bad)?;
        let inner = head
            .strip_prefix("ap(")
            .and_then(|t| t.strip_suffix(')'))
            .ok_or_else(bad)?;
        let (a, b) = inner.split_once(',').ok_or_else(bad)?;
        let step = num(b)?;
        if step == 0 {
            return Err(bad());
        }
        let mut set = LazySet::progression(num(a)?, step);
        for part in parts {
            if part == "thin" {
                set.layers.push(Layer::Thin);
                continue;
            }
            let inner = part
                .strip_prefix("drop(")
                .and_then(|t| t.strip_suffix(')'))
                .ok_or_else(bad)?;
            let (p, rest) = inner.split_once(';').ok_or_else(bad)?;
            let extra = if rest.is_empty() {
                BTreeSet::new()
            } else {
                rest.split(',').map(num).collect::<Result<_, _>>()?
            };
            set.layers.push(Layer::Drop {
                prefix: num(p)?,
                extra,
            });
        }
        Ok(set)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[derive(Clone, Debug)]
    enum Op {
        Least(u64),
        Ranks(Vec<u64>),
        Thin,
    }

    fn arb_op() -> impl Strategy<Value = Op> {
        prop_oneof![
            (0u64..4).prop_map(Op::Least),
            prop::collection::vec(0u64..20, 0..4).prop_map(Op::Ranks),
            Just(Op::Thin),
        ]
    }

    /// Materialized model: the first `len` elements of the set.
    fn model(start: u64, step: u64, ops: &[Op], len: usize) -> Vec<u64> {
        let mut v: Vec<u64> = (0..len as u64 * 1024).map(|n| start + step * n).collect();
        for op in ops {
            match op {
                Op::Least(n) => {
                    v.drain(..*n as usize);
                }
                Op::Ranks(rs) => {
                    let rs: BTreeSet<u64> = rs.iter().copied().collect();
                    v = v
                        .into_iter()
                        .enumerate()
                        .filter(|(i, _)| !rs.contains(&(*i as u64)))
                        .map(|(_, x)| x)
                        .collect();
                }
                Op::Thin => {
                    v = v.into_iter().skip(1).step_by(2).collect();
                }
            }
        }
        v.truncate(len);
        v
    }

    #[test]
    fn progression_basics() {
        let s = LazySet::progression(2, 3);
        assert_eq!(s.first(4), vec![2, 5, 8, 11]);
        assert_eq!(s.rank(8), Some(2));
        assert!(!s.contains(3));
    }

    #[test]
    fn thin_keeps_odd_positions() {
        let mut s = LazySet::progression(1, 2);
        s.thin();
        assert_eq!(s.first(4), vec![3, 7, 11, 15]);
        assert!(!s.contains(1) && !s.contains(5));
    }

    #[test]
    fn remove_least_and_values() {
        let mut s = LazySet::progression(1, 2);
        assert_eq!(s.remove_least(2), vec![1, 3]);
        s.remove_values([7, 11]);
        assert_eq!(s.first(4), vec![5, 9, 13, 15]);
        assert_eq!(s.min(), 5);
    }

    #[test]
    fn text_form_roundtrip() {
        let mut s = LazySet::progression(2, 3);
        s.remove_least(2);
        s.remove_values([14]);
        s.thin();
        let text = s.to_string();
        assert_eq!(text, "ap(2,3)|drop(2;4)|thin");
        assert_eq!(text.parse::<LazySet>().unwrap(), s);
        assert!("ap(1,0)".parse::<LazySet>().is_err());
    }

    proptest! {
        #[test]
        fn agrees_with_materialized_model(ops in prop::collection::vec(arb_op(), 0..8)) {
            let mut s = LazySet::progression(1, 2);
            for op in &ops {
                match op {
                    Op::Least(n) => { s.remove_least(*n); }
                    Op::Ranks(rs) => s.remove_ranks(rs.iter().copied()),
                    Op::Thin => s.thin(),
                }
            }
            let expected = model(1, 2, &ops, 30);
            prop_assert_eq!(s.first(30), expected.clone());
            for (i, &v) in expected.iter().enumerate() {
                prop_assert_eq!(s.rank(v), Some(i as u64));
            }
            let top = *expected.last().unwrap();
            for v in 0..top {
                prop_assert_eq!(s.contains(v), expected.contains(&v));
            }
        }
    }
}
