//! Numberings as stage-stamped rule tables, bounded program equivalence and
//! translation checking.
//!
//! A rule stamped with version `v` takes effect in `psi^v`: the stage `-1`
//! block writes version 0 and stage `s` writes version `s + 1`. Looking up a
//! program at a version returns the descriptor of the most recent matching
//! rule.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::fmt::Write as _;
use std::sync::Arc;

use thiserror::Error;

use crate::aux::Family;
use crate::geometry::{block_of, Layout, Row};
use crate::kernel::{ext_equal, pair, unpair, Descriptor, EqVerdict, EvalEnv, KernelError};
use crate::lazyset::LazySet;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Rule {
    Program {
        p: u64,
        d: Descriptor,
    },
    Residue {
        modulus: u64,
        residue: u64,
        d: Descriptor,
    },
    /// Every row program gets the constant of its row on `pos / 2 + 1`
    /// inputs: the two programs of each initial block pair agree.
    RowBase {
        layout: Layout,
    },
    /// `3<i,j>` gets `i^{<2j+1}` and `3<i,j> + 1` gets `i^{<2j+2}`.
    TriadBase,
    /// The programs of a row after its height reached `height`: block pair
    /// `k` computes the row constant on `(k+1)·2^height` inputs.
    Row {
        layout: Layout,
        row: Row,
        height: u32,
    },
    /// The `E` halves of a row at `height` compute `alpha_left`, the `Ē`
    /// halves `alpha_right`.
    RowAux {
        layout: Layout,
        row: Row,
        height: u32,
        family: Family,
        left: u64,
        right: u64,
    },
    /// [`Rule::RowAux`] for every row `(i, j)` at once, with the heights the
    /// rows had when the rule was written (rows not listed had height 0).
    RowsAux {
        i: u64,
        heights: BTreeMap<u64, u32>,
        family: Family,
        left: u64,
        right: u64,
    },
    /// Fresh programs for every row of `i`: the even positions of `dst`,
    /// taken row after row, receive `<i,j>^{<(k+1)·2^h}` for `k < num`.
    FreshRows {
        i: u64,
        heights: BTreeMap<u64, u32>,
        dst: LazySet,
    },
}

fn row_constant(layout: Layout, row: Row, pos: u64, height: u32) -> Descriptor {
    let (k, _) = block_of(pos, height);
    Descriptor::finite(layout.row_value(row), (k + 1) << height)
}

impl Rule {
    /// The descriptor this rule gives `p`, if it covers `p`.
    pub fn apply(&self, p: u64) -> Option<Descriptor> {
        match self {
            Rule::Program { p: q, d } => (*q == p).then_some(*d),
            Rule::Residue {
                modulus,
                residue,
                d,
            } => (p % modulus == *residue).then_some(*d),
            Rule::RowBase { layout } => {
                let (row, pos) = layout.locate(p)?;
                Some(Descriptor::finite(layout.row_value(row), pos / 2 + 1))
            }
            Rule::TriadBase => {
                let (i, j) = unpair(p / 3);
                match p % 3 {
                    0 => Some(Descriptor::finite(i, 2 * j + 1)),
                    1 => Some(Descriptor::finite(i, 2 * j + 2)),
                    _ => None,
                }
            }
            Rule::Row {
                layout,
                row,
                height,
            } => {
                let (r, pos) = layout.locate(p)?;
                (r == *row).then(|| row_constant(*layout, r, pos, *height))
            }
            Rule::RowAux {
                layout,
                row,
                height,
                family,
                left,
                right,
            } => {
                let (r, pos) = layout.locate(p)?;
                if r != *row {
                    return None;
                }
                let (_, right_side) = block_of(pos, *height);
                Some(Descriptor::Aux {
                    family: *family,
                    index: if right_side { *right } else { *left },
                })
            }
            Rule::RowsAux {
                i,
                heights,
                family,
                left,
                right,
            } => {
                let (r, pos) = Layout::Paired.locate(p)?;
                if r.i != *i {
                    return None;
                }
                let h = heights.get(&r.j).copied().unwrap_or(0);
                let (_, right_side) = block_of(pos, h);
                Some(Descriptor::Aux {
                    family: *family,
                    index: if right_side { *right } else { *left },
                })
            }
            Rule::FreshRows { i, heights, dst } => {
                let rank = dst.rank(p)?;
                if rank % 2 != 0 {
                    return None;
                }
                let (j, k) = fresh_slot(*i, heights, rank / 2)?;
                let h = heights.get(&j).copied().unwrap_or(0);
                Some(Descriptor::finite(pair(*i, j), (k + 1) << h))
            }
        }
    }

    /// Row key for rules that only touch one row.
    fn row_key(&self) -> Option<(Layout, Row)> {
        match self {
            Rule::Row { layout, row, .. } | Rule::RowAux { layout, row, .. } => {
                Some((*layout, *row))
            }
            _ => None,
        }
    }
}

/// Splits the `n`-th fresh slot into `(row j, block k)` when row `j` has
/// `2^{i - h_j}` slots.
fn fresh_slot(i: u64, heights: &BTreeMap<u64, u32>, mut n: u64) -> Option<(u64, u64)> {
    let full = crate::geometry::num(i, 0)?;
    let mut j = 0u64;
    for (&row, &h) in heights {
        // Rows strictly between j and row all have height 0.
        let gap = row - j;
        if n < gap.saturating_mul(full) {
            return Some((j + n / full, n % full));
        }
        n -= gap * full;
        let slots = crate::geometry::num(i, h)?;
        if n < slots {
            return Some((row, n));
        }
        n -= slots;
        j = row + 1;
    }
    Some((j + n / full, n % full))
}

fn layout_name(l: Layout) -> &'static str {
    match l {
        Layout::Paired => "paired",
        Layout::Single => "single",
    }
}

fn heights_text(h: &BTreeMap<u64, u32>) -> String {
    if h.is_empty() {
        return "-".into();
    }
    h.iter()
        .map(|(j, h)| format!("{j}:{h}"))
        .collect::<Vec<_>>()
        .join(",")
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Rule::Program { p, d } => write!(f, "prog {p} {d}"),
            Rule::Residue {
                modulus,
                residue,
                d,
            } => write!(f, "residue {modulus} {residue} {d}"),
            Rule::RowBase { layout } => write!(f, "rowbase {}", layout_name(*layout)),
            Rule::TriadBase => write!(f, "triadbase"),
            Rule::Row {
                layout,
                row,
                height,
            } => write!(
                f,
                "row {} {} {} {}",
                layout_name(*layout),
                row.i,
                row.j,
                height
            ),
            Rule::RowAux {
                layout,
                row,
                height,
                family,
                left,
                right,
            } => write!(
                f,
                "rowaux {} {} {} {} {} {} {}",
                layout_name(*layout),
                row.i,
                row.j,
                height,
                family,
                left,
                right
            ),
            Rule::RowsAux {
                i,
                heights,
                family,
                left,
                right,
            } => write!(
                f,
                "rowsaux {i} {} {family} {left} {right}",
                heights_text(heights)
            ),
            Rule::FreshRows { i, heights, dst } => {
                write!(f, "fresh {i} {} {dst}", heights_text(heights))
            }
        }
    }
}

impl std::str::FromStr for Rule {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || format!("malformed rule `{s}`");
        let f: Vec<&str> = s.split_whitespace().collect();
        let n = |t: &str| t.parse::<u64>().map_err(|_| bad());
        let h = |t: &str| t.parse::<u32>().map_err(|_| bad());
        let layout = |t: &str| match t {
            "paired" => Ok(Layout::Paired),
            "single" => Ok(Layout::Single),
            _ => Err(bad()),
        };
        let heights = |t: &str| -> Result<BTreeMap<u64, u32>, String> {
            if t == "-" {
                return Ok(BTreeMap::new());
            }
            t.split(',')
                .map(|kv| {
                    let (j, v) = kv.split_once(':').ok_or_else(bad)?;
                    Ok((n(j)?, h(v)?))
                })
                .collect()
        };
        let desc = |t: &str| t.parse::<Descriptor>();
        let family = |t: &str| t.parse::<Family>();
        Ok(match f.as_slice() {
            ["prog", p, d] => Rule::Program {
                p: n(p)?,
                d: desc(d)?,
            },
            ["residue", m, r, d] => Rule::Residue {
                modulus: n(m)?,
                residue: n(r)?,
                d: desc(d)?,
            },
            ["rowbase", l] => Rule::RowBase { layout: layout(l)? },
            ["triadbase"] => Rule::TriadBase,
            ["row", l, i, j, ht] => Rule::Row {
                layout: layout(l)?,
                row: Row::new(n(i)?, n(j)?),
                height: h(ht)?,
            },
            ["rowaux", l, i, j, ht, fam, a, b] => Rule::RowAux {
                layout: layout(l)?,
                row: Row::new(n(i)?, n(j)?),
                height: h(ht)?,
                family: family(fam)?,
                left: n(a)?,
                right: n(b)?,
            },
            ["rowsaux", i, hs, fam, a, b] => Rule::RowsAux {
                i: n(i)?,
                heights: heights(hs)?,
                family: family(fam)?,
                left: n(a)?,
                right: n(b)?,
            },
            ["fresh", i, hs, dst] => Rule::FreshRows {
                i: n(i)?,
                heights: heights(hs)?,
                dst: dst.parse()?,
            },
            _ => return Err(bad()),
        })
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum NumberingError {
    #[error("no rule covers program {p} at version {version}")]
    NoRule { p: u64, version: u64 },
    #[error("program {0} is outside the table")]
    OutOfRange(u64),
    #[error(transparent)]
    Kernel(#[from] KernelError),
}

/// A numbering built from stage-stamped rules.
#[derive(Clone, Debug, Default)]
pub struct Eps {
    rules: Vec<(u64, Rule)>,
    singles: HashMap<u64, Vec<usize>>,
    rows: HashMap<(Layout, Row), Vec<usize>>,
    globals: Vec<usize>,
}

impl PartialEq for Eps {
    fn eq(&self, other: &Self) -> bool {
        self.rules == other.rules
    }
}

impl Eps {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn rules(&self) -> &[(u64, Rule)] {
        &self.rules
    }

    /// Appends a rule. Versions must not decrease.
    pub fn push(&mut self, version: u64, rule: Rule) {
        if let Some(&(last, _)) = self.rules.last() {
            assert!(version >= last, "rule versions must not decrease");
        }
        let idx = self.rules.len();
        if let Rule::Program { p, .. } = rule {
            self.singles.entry(p).or_default().push(idx);
        } else if let Some(key) = rule.row_key() {
            self.rows.entry(key).or_default().push(idx);
        } else {
            self.globals.push(idx);
        }
        self.rules.push((version, rule));
    }

    /// Latest matching rule at or before `version`, as (rule index, descriptor).
    fn resolve(&self, p: u64, version: u64) -> Option<(usize, Descriptor)> {
        let mut best: Option<(usize, Descriptor)> = None;
        let mut consider = |list: &[usize]| {
            for &idx in list.iter().rev() {
                let (v, rule) = &self.rules[idx];
                if *v > version {
                    continue;
                }
                if best.is_some_and(|(b, _)| b > idx) {
                    return;
                }
                if let Some(d) = rule.apply(p) {
                    best = Some((idx, d));
                    return;
                }
            }
        };
        if let Some(list) = self.singles.get(&p) {
            consider(list);
        }
        for layout in [Layout::Paired, Layout::Single] {
            if let Some((row, _)) = layout.locate(p) {
                if let Some(list) = self.rows.get(&(layout, row)) {
                    consider(list);
                }
            }
        }
        consider(&self.globals);
        best
    }

    pub fn lookup(&self, p: u64, version: u64) -> Result<Descriptor, NumberingError> {
        self.resolve(p, version)
            .map(|(_, d)| d)
            .ok_or(NumberingError::NoRule { p, version })
    }

    /// The successive descriptors of `p`, with the version each took effect.
    pub fn history(&self, p: u64) -> Vec<(u64, Descriptor)> {
        let mut versions: Vec<u64> = self
            .rules
            .iter()
            .filter(|(_, r)| r.apply(p).is_some())
            .map(|(v, _)| *v)
            .collect();
        versions.dedup();
        let mut out: Vec<(u64, Descriptor)> = Vec::new();
        for v in versions {
            if let Ok(d) = self.lookup(p, v) {
                if out.last().map(|(_, last)| *last) != Some(d) {
                    out.push((v, d));
                }
            }
        }
        out
    }

    pub fn at(&self, version: u64) -> EpsAt<'_> {
        EpsAt { eps: self, version }
    }

    pub fn serialize(&self) -> String {
        let mut out = String::new();
        for (v, r) in &self.rules {
            writeln!(out, "v={v} {r}").unwrap();
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self, String> {
        let mut eps = Eps::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let err = |m: String| format!("line {}: {m}", n + 1);
            let (v, rest) = line
                .strip_prefix("v=")
                .and_then(|t| t.split_once(' '))
                .ok_or_else(|| err("expected `v=<version> <rule>`".into()))?;
            let v: u64 = v.parse().map_err(|_| err("bad version".into()))?;
            if eps.rules.last().is_some_and(|(last, _)| *last > v) {
                return Err(err("versions must not decrease".into()));
            }
            eps.push(v, rest.parse().map_err(err)?);
        }
        Ok(eps)
    }
}

/// Anything that assigns a descriptor to each program.
pub trait Numbering {
    fn descriptor(&self, p: u64) -> Result<Descriptor, NumberingError>;
}

#[derive(Clone, Copy, Debug)]
pub struct EpsAt<'a> {
    pub eps: &'a Eps,
    pub version: u64,
}

impl Numbering for EpsAt<'_> {
    fn descriptor(&self, p: u64) -> Result<Descriptor, NumberingError> {
        self.eps.lookup(p, self.version)
    }
}

/// A finite table of descriptors; programs past the end are errors.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DescriptorTable(pub Vec<Descriptor>);

impl Numbering for DescriptorTable {
    fn descriptor(&self, p: u64) -> Result<Descriptor, NumberingError> {
        self.0
            .get(p as usize)
            .copied()
            .ok_or(NumberingError::OutOfRange(p))
    }
}

pub fn equiv(
    psi: &dyn Numbering,
    p: u64,
    q: u64,
    budget: u64,
    env: &dyn EvalEnv,
) -> Result<EqVerdict, NumberingError> {
    if p == q {
        return Ok(EqVerdict::Equal);
    }
    Ok(ext_equal(
        &psi.descriptor(p)?,
        &psi.descriptor(q)?,
        budget,
        env,
    )?)
}

/// A total mapping on programs: a translation candidate.
#[derive(Clone)]
pub enum TranslationSource {
    Identity,
    Constant(u64),
    /// Explicit table; unlisted programs are undefined.
    Table(BTreeMap<u64, u64>),
    /// `phi_e`, evaluated with the caller's budget.
    Machine(u64),
    Custom {
        name: String,
        f: Arc<dyn Fn(u64) -> Option<u64> + Send + Sync>,
    },
}

impl fmt::Debug for TranslationSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TranslationSource::Identity => write!(f, "Identity"),
            TranslationSource::Constant(c) => write!(f, "Constant({c})"),
            TranslationSource::Table(t) => write!(f, "Table({t:?})"),
            TranslationSource::Machine(e) => write!(f, "Machine({e})"),
            TranslationSource::Custom { name, .. } => write!(f, "Custom({name})"),
        }
    }
}

impl TranslationSource {
    pub fn custom(
        name: impl Into<String>,
        f: impl Fn(u64) -> Option<u64> + Send + Sync + 'static,
    ) -> Self {
        TranslationSource::Custom {
            name: name.into(),
            f: Arc::new(f),
        }
    }

    pub fn apply(&self, p: u64, budget: u64, env: &dyn EvalEnv) -> Option<u64> {
        match self {
            TranslationSource::Identity => Some(p),
            TranslationSource::Constant(c) => Some(*c),
            TranslationSource::Table(t) => t.get(&p).copied(),
            TranslationSource::Machine(e) => env.machine_eval(*e, p, budget).value(),
            TranslationSource::Custom { f, .. } => f(p),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ProgramVerdict {
    pub p: u64,
    /// `t(p)`, or `None` when `t` did not converge within the budget.
    pub image: Option<u64>,
    pub verdict: EqVerdict,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct TranslationReport {
    pub verdicts: Vec<ProgramVerdict>,
    pub equal: usize,
    pub distinct: usize,
    pub unknown: usize,
}

impl TranslationReport {
    pub fn all_equal(&self) -> bool {
        self.distinct == 0 && self.unknown == 0
    }

    pub fn first_distinct(&self) -> Option<&ProgramVerdict> {
        self.verdicts.iter().find(|v| v.verdict.is_distinct())
    }
}

/// Checks `theta_p = psi_{t(p)}` on each sampled program.
pub fn check_translation(
    t: &TranslationSource,
    theta: &dyn Numbering,
    psi: &dyn Numbering,
    programs: &[u64],
    budget: u64,
    env: &dyn EvalEnv,
) -> Result<TranslationReport, NumberingError> {
    let mut report = TranslationReport::default();
    for &p in programs {
        let image = t.apply(p, budget, env);
        let verdict = match image {
            None => EqVerdict::Unknown { budget },
            Some(q) => ext_equal(&theta.descriptor(p)?, &psi.descriptor(q)?, budget, env)?,
        };
        match verdict {
            EqVerdict::Equal => report.equal += 1,
            EqVerdict::Distinct { .. } => report.distinct += 1,
            EqVerdict::Unknown { .. } => report.unknown += 1,
        }
        report.verdicts.push(ProgramVerdict { p, image, verdict });
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::aux::StandardEnv;
    use proptest::prelude::*;

    fn single_base() -> Eps {
        let mut eps = Eps::new();
        eps.push(
            0,
            Rule::RowBase {
                layout: Layout::Single,
            },
        );
        eps.push(
            0,
            Rule::Residue {
                modulus: 2,
                residue: 1,
                d: Descriptor::Empty,
            },
        );
        eps
    }

    #[test]
    fn lookup_examples() {
        let eps = single_base();
        assert_eq!(eps.lookup(4, 0).unwrap(), Descriptor::finite(1, 1));
        assert_eq!(eps.lookup(1, 0).unwrap(), Descriptor::Empty);
        let mut nine = Eps::new();
        nine.push(0, Rule::TriadBase);
        assert_eq!(
            nine.lookup(3 * pair(0, 0), 0).unwrap(),
            Descriptor::finite(0, 1)
        );
        // 4 = 3<0,1> + 1.
        assert_eq!(nine.lookup(4, 0).unwrap(), Descriptor::finite(0, 4));
        assert!(nine.lookup(2, 0).is_err());
    }

    #[test]
    fn equiv_examples() {
        let env = StandardEnv::default();
        let eps = single_base();
        let psi = eps.at(0);
        assert_eq!(equiv(&psi, 9, 9, 0, &env).unwrap(), EqVerdict::Equal);
        assert_eq!(equiv(&psi, 0, 2, 0, &env).unwrap(), EqVerdict::Equal);
        // f_1(0) = 4 computes 1^{<1}, f_1(2) = 8 computes 1^{<2}.
        assert!(equiv(&psi, 4, 8, 0, &env).unwrap().is_distinct());
    }

    #[test]
    fn later_rules_win_and_history_records_changes() {
        let mut eps = single_base();
        eps.push(
            5,
            Rule::Row {
                layout: Layout::Single,
                row: Row::new(1, 0),
                height: 1,
            },
        );
        eps.push(
            7,
            Rule::Program {
                p: 1,
                d: Descriptor::finite(1, 1),
            },
        );
        assert_eq!(eps.lookup(6, 4).unwrap(), Descriptor::finite(1, 1));
        assert_eq!(eps.lookup(6, 5).unwrap(), Descriptor::finite(1, 2));
        assert_eq!(eps.lookup(10, 5).unwrap(), Descriptor::finite(1, 2));
        assert_eq!(eps.lookup(1, 6).unwrap(), Descriptor::Empty);
        assert_eq!(
            eps.history(1),
            vec![(0, Descriptor::Empty), (7, Descriptor::finite(1, 1))]
        );
    }

    #[test]
    fn fresh_slots_walk_rows_in_order() {
        let heights = BTreeMap::from([(1, 1u32)]);
        // i = 2: row 0 has 4 slots, row 1 has 2, row 2 has 4.
        let got: Vec<(u64, u64)> = (0..10)
            .map(|n| fresh_slot(2, &heights, n).unwrap())
            .collect();
        assert_eq!(
            got,
            vec![
                (0, 0),
                (0, 1),
                (0, 2),
                (0, 3),
                (1, 0),
                (1, 1),
                (2, 0),
                (2, 1),
                (2, 2),
                (2, 3)
            ]
        );
    }

    #[test]
    fn translation_examples() {
        let env = StandardEnv::default();
        let psi = DescriptorTable(vec![
            Descriptor::Total { value: 0 },
            Descriptor::finite(1, 2),
            Descriptor::Empty,
        ]);
        let programs = [0, 1, 2];
        let r = check_translation(&TranslationSource::Identity, &psi, &psi, &programs, 8, &env)
            .unwrap();
        assert!(r.all_equal());
        let r = check_translation(
            &TranslationSource::Constant(2),
            &psi,
            &psi,
            &programs,
            8,
            &env,
        )
        .unwrap();
        assert_eq!(r.first_distinct().unwrap().p, 0);
        let partial = TranslationSource::Table(BTreeMap::from([(0, 0)]));
        let r = check_translation(&partial, &psi, &psi, &programs, 8, &env).unwrap();
        assert_eq!((r.equal, r.unknown), (1, 2));
    }

    fn arb_rule() -> impl Strategy<Value = Rule> {
        prop_oneof![
            (0u64..64, 0u64..5, 0u64..5).prop_map(|(p, v, n)| Rule::Program {
                p,
                d: Descriptor::finite(v, n)
            }),
            (0u64..4, 0u64..4).prop_map(|(i, h)| Rule::Row {
                layout: Layout::Single,
                row: Row::new(i, 0),
                height: h.min(i) as u32
            }),
            (0u64..3, 0u64..3, 0u64..50, 0u64..50).prop_map(|(i, j, l, m)| Rule::RowAux {
                layout: Layout::Paired,
                row: Row::new(i, j),
                height: 0,
                family: Family::Paired,
                left: 2 * l,
                right: 2 * m + 1
            }),
        ]
    }

    proptest! {
        #[test]
        fn serialization_preserves_lookup(rules in prop::collection::vec(arb_rule(), 0..12)) {
            let mut eps = single_base();
            eps.push(0, Rule::RowBase { layout: Layout::Paired });
            for (v, r) in rules.into_iter().enumerate() {
                eps.push(v as u64 + 1, r);
            }
            let back = Eps::parse(&eps.serialize()).unwrap();
            prop_assert_eq!(&back, &eps);
            for p in 0..80 {
                for v in 0..14 {
                    prop_assert_eq!(back.lookup(p, v), eps.lookup(p, v));
                }
            }
        }
    }
}
