//! Computably enumerable equivalence relations as growing pair streams.
//!
//! Reflexivity is implicit: every natural is related to itself without being
//! stored. Union-find keeps the least element of each class as its
//! representative, so representatives never depend on commit order.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;

#[derive(Clone, Debug, Default)]
pub struct CeerBuilder {
    pairs: Vec<(u64, u64)>,
    parent: HashMap<u64, u64>,
}

impl PartialEq for CeerBuilder {
    fn eq(&self, other: &Self) -> bool {
        self.pairs == other.pairs
    }
}

impl Eq for CeerBuilder {}

impl CeerBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    /// The least equivalence relation containing `pairs`.
    pub fn rst_closure<I: IntoIterator<Item = (u64, u64)>>(pairs: I) -> Self {
        let mut r = CeerBuilder::new();
        for (p, q) in pairs {
            r.add_pair(p, q);
        }
        r
    }

    pub fn pairs(&self) -> &[(u64, u64)] {
        &self.pairs
    }

    pub fn add_pair(&mut self, p: u64, q: u64) {
        self.pairs.push((p, q));
        let (a, b) = (self.find(p), self.find(q));
        if a != b {
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            self.parent.insert(hi, lo);
        }
    }

    /// Relates every element of `members` to the first one.
    pub fn add_class<I: IntoIterator<Item = u64>>(&mut self, members: I) {
        let mut it = members.into_iter();
        if let Some(first) = it.next() {
            for p in it {
                self.add_pair(first, p);
            }
        }
    }

    fn find(&mut self, p: u64) -> u64 {
        let mut root = p;
        while let Some(&up) = self.parent.get(&root) {
            root = up;
        }
        let mut cur = p;
        while let Some(&up) = self.parent.get(&cur) {
            if up == root {
                break;
            }
            self.parent.insert(cur, root);
            cur = up;
        }
        root
    }

    /// The least element of `p`'s class among the mentioned elements.
    pub fn representative(&self, p: u64) -> u64 {
        let mut root = p;
        while let Some(&up) = self.parent.get(&root) {
            root = up;
        }
        root
    }

    pub fn related(&self, p: u64, q: u64) -> bool {
        p == q || self.representative(p) == self.representative(q)
    }

    /// The partition of `set` induced by the relation.
    pub fn classes_among(&self, set: &BTreeSet<u64>) -> Vec<BTreeSet<u64>> {
        let mut blocks: BTreeMap<u64, BTreeSet<u64>> = BTreeMap::new();
        for &p in set {
            blocks.entry(self.representative(p)).or_default().insert(p);
        }
        let mut out: Vec<BTreeSet<u64>> = blocks.into_values().collect();
        out.sort_by_key(|b| *b.iter().next().unwrap());
        out
    }

    /// Every mentioned element, grouped into its class.
    pub fn mentioned_classes(&self) -> Vec<BTreeSet<u64>> {
        let set: BTreeSet<u64> = self.pairs.iter().flat_map(|&(p, q)| [p, q]).collect();
        self.classes_among(&set)
    }

    /// `P <p> <q>` lines in commit order.
    pub fn serialize(&self) -> String {
        let mut out = String::new();
        for (p, q) in &self.pairs {
            writeln!(out, "P {p} {q}").unwrap();
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self, String> {
        let mut r = CeerBuilder::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let f: Vec<&str> = line.split_whitespace().collect();
            match f.as_slice() {
                ["P", p, q] => {
                    let p = p
                        .parse()
                        .map_err(|_| format!("line {}: bad number", n + 1))?;
                    let q = q
                        .parse()
                        .map_err(|_| format!("line {}: bad number", n + 1))?;
                    r.add_pair(p, q);
                }
                _ => return Err(format!("line {}: expected `P <p> <q>`", n + 1)),
            }
        }
        Ok(r)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn add_and_relate_examples() {
        let r = CeerBuilder::rst_closure([(0, 1)]);
        assert!(r.related(1, 0));
        let r = CeerBuilder::rst_closure([(0, 1), (1, 2)]);
        assert!(r.related(0, 2));
        let fresh = CeerBuilder::new();
        assert!(fresh.related(5, 5));
        assert!(!fresh.related(3, 4));
        let r = CeerBuilder::rst_closure([(3, 4)]);
        assert!(r.related(4, 3));
        let r = CeerBuilder::rst_closure([(1, 2), (3, 4)]);
        assert!(!r.related(1, 3));
    }

    #[test]
    fn classes_among_examples() {
        let set = |v: &[u64]| v.iter().copied().collect::<BTreeSet<u64>>();
        let fresh = CeerBuilder::new();
        assert_eq!(
            fresh.classes_among(&set(&[0, 1, 2])),
            vec![set(&[0]), set(&[1]), set(&[2])]
        );
        let r = CeerBuilder::rst_closure([(0, 1)]);
        assert_eq!(
            r.classes_among(&set(&[0, 1, 2])),
            vec![set(&[0, 1]), set(&[2])]
        );
        let r = CeerBuilder::rst_closure([(0, 1), (2, 3)]);
        assert_eq!(r.classes_among(&set(&[0, 2])), vec![set(&[0]), set(&[2])]);
    }

    #[test]
    fn closure_examples() {
        let r = CeerBuilder::rst_closure([]);
        assert!(!r.related(0, 1));
        let r = CeerBuilder::rst_closure([(0, 1), (1, 2)]);
        assert_eq!(r.mentioned_classes(), vec![BTreeSet::from([0, 1, 2])]);
        assert!(!r.related(0, 3));
        let r = CeerBuilder::rst_closure([(4, 4), (7, 7)]);
        assert!(!r.related(4, 7));
    }

    #[test]
    fn representatives_are_least_elements() {
        let r = CeerBuilder::rst_closure([(9, 5), (5, 7), (12, 9)]);
        for p in [5, 7, 9, 12] {
            assert_eq!(r.representative(p), 5);
        }
    }

    #[test]
    fn serialization_roundtrip() {
        let r = CeerBuilder::rst_closure([(3, 1), (8, 2)]);
        assert_eq!(r.serialize(), "P 3 1\nP 8 2\n");
        assert_eq!(CeerBuilder::parse(&r.serialize()).unwrap(), r);
        assert!(CeerBuilder::parse("Q 1 2").is_err());
    }

    /// Brute-force closure on elements below `n` by iterating to a fixpoint.
    fn oracle(pairs: &[(u64, u64)], n: usize) -> Vec<Vec<bool>> {
        let mut m = vec![vec![false; n]; n];
        for (i, row) in m.iter_mut().enumerate() {
            row[i] = true;
        }
        for &(p, q) in pairs {
            m[p as usize][q as usize] = true;
            m[q as usize][p as usize] = true;
        }
        for k in 0..n {
            for i in 0..n {
                for j in 0..n {
                    if m[i][k] && m[k][j] {
                        m[i][j] = true;
                    }
                }
            }
        }
        m
    }

    proptest! {
        #[test]
        fn matches_transitive_closure_oracle(pairs in prop::collection::vec((0u64..40, 0u64..40), 0..40)) {
            let r = CeerBuilder::rst_closure(pairs.iter().copied());
            let m = oracle(&pairs, 40);
            for p in 0..40u64 {
                for q in 0..40u64 {
                    prop_assert_eq!(r.related(p, q), m[p as usize][q as usize]);
                }
            }
        }

        #[test]
        fn order_independent(pairs in prop::collection::vec((0u64..256, 0u64..256), 0..30), seed in 0usize..100) {
            let mut shuffled = pairs.clone();
            let len = shuffled.len().max(1);
            shuffled.rotate_left(seed % len);
            shuffled.reverse();
            let a = CeerBuilder::rst_closure(pairs.iter().copied());
            let b = CeerBuilder::rst_closure(shuffled.iter().copied());
            for p in 0..256u64 {
                prop_assert_eq!(a.representative(p), b.representative(p));
            }
        }

        #[test]
        fn classes_agree_with_related(pairs in prop::collection::vec((0u64..30, 0u64..30), 0..20)) {
            let r = CeerBuilder::rst_closure(pairs.iter().copied());
            let set: BTreeSet<u64> = (0..30).collect();
            let blocks = r.classes_among(&set);
            prop_assert_eq!(blocks.iter().map(|b| b.len()).sum::<usize>(), 30);
            for b in &blocks {
                prop_assert!(!b.is_empty());
            }
            for p in 0..30u64 {
                for q in 0..30u64 {
                    let same = blocks.iter().any(|b| b.contains(&p) && b.contains(&q));
                    prop_assert_eq!(same, r.related(p, q));
                }
            }
        }
    }
}
