//! Translations between numberings and one-to-one numberings, tying ceers,
//! and the refinement of a computable set against finitely many c.e. sets.

use std::cell::RefCell;
use std::collections::BTreeSet;
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::ceer::CeerBuilder;
use crate::kernel::{Descriptor, EqVerdict, EvalEnv};
use crate::machine::Machine;
use crate::numbering::{equiv, DescriptorTable, Numbering, NumberingError, TranslationSource};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ReductionError {
    #[error("translation did not converge on {p} within budget {budget}")]
    Undecided { p: u64, budget: u64 },
    #[error("no q found for {p} within search budget {budget} and no exceptional class applies")]
    SearchExhausted { p: u64, budget: u64 },
    #[error("level {level}: budget {budget} cannot tell whether the intersection is finite")]
    Inconclusive { level: usize, budget: u64 },
    #[error("level {level}: no new element after {stages} stages; the Infinite hint looks wrong")]
    Starved { level: usize, stages: u64 },
    #[error("hints ({hints}) and sets ({sets}) differ in length")]
    HintCount { hints: usize, sets: usize },
    #[error(transparent)]
    Numbering(#[from] NumberingError),
}

/// Decides `psi_p = psi_q` through a translation into a one-to-one
/// numbering: the programs are equivalent iff they translate to the same
/// index.
pub fn friedberg_equiv_decider(
    t: &TranslationSource,
    p: u64,
    q: u64,
    budget: u64,
    env: &dyn EvalEnv,
) -> Result<bool, ReductionError> {
    let tp = t
        .apply(p, budget, env)
        .ok_or(ReductionError::Undecided { p, budget })?;
    let tq = t
        .apply(q, budget, env)
        .ok_or(ReductionError::Undecided { p: q, budget })?;
    Ok(tp == tq)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MinimalPrograms {
    pub programs: Vec<u64>,
    /// Set when the search stopped at this program bound before finding
    /// `count` classes.
    pub exhausted_at: Option<u64>,
}

/// The least program of each of the first `count` equivalence classes, in
/// order: `m_0 = 0` and `m_{i+1}` is the least program inequivalent to all
/// earlier ones. Candidates are searched below `search_limit`.
pub fn minimal_programs(
    oracle: &dyn Fn(u64, u64) -> bool,
    count: usize,
    search_limit: u64,
) -> MinimalPrograms {
    let mut programs = Vec::new();
    let mut p = 0;
    while programs.len() < count {
        if p >= search_limit {
            return MinimalPrograms {
                programs,
                exhausted_at: Some(search_limit),
            };
        }
        if programs.iter().all(|&m| !oracle(m, p)) {
            programs.push(p);
        }
        p += 1;
    }
    MinimalPrograms {
        programs,
        exhausted_at: None,
    }
}

#[derive(Clone, Debug)]
pub struct FriedbergResult {
    pub eta: DescriptorTable,
    /// `i -> m_i`.
    pub forward: Vec<u64>,
    pub exhausted_at: Option<u64>,
    /// Verdicts for every pair `i < j` of `eta` entries.
    pub pairwise: Vec<(usize, usize, EqVerdict)>,
}

impl FriedbergResult {
    pub fn one_to_one(&self) -> bool {
        self.pairwise.iter().all(|(_, _, v)| v.is_distinct())
    }

    /// The `eta` index of `p`'s class, using the oracle.
    pub fn backward(&self, oracle: &dyn Fn(u64, u64) -> bool, p: u64) -> Option<u64> {
        self.forward
            .iter()
            .position(|&m| oracle(m, p))
            .map(|i| i as u64)
    }
}

/// Builds the one-to-one numbering `eta_i = psi_{m_i}` from a decision
/// procedure for program equivalence.
pub fn friedberg_from_decider(
    psi: &dyn Numbering,
    oracle: &dyn Fn(u64, u64) -> bool,
    count: usize,
    search_limit: u64,
    budget: u64,
    env: &dyn EvalEnv,
) -> Result<FriedbergResult, ReductionError> {
    let m = minimal_programs(oracle, count, search_limit);
    let eta: Vec<Descriptor> = m
        .programs
        .iter()
        .map(|&p| psi.descriptor(p))
        .collect::<Result<_, _>>()?;
    let table = DescriptorTable(eta);
    let mut pairwise = Vec::new();
    for i in 0..table.0.len() {
        for j in i + 1..table.0.len() {
            pairwise.push((i, j, equiv(&table, i as u64, j as u64, budget, env)?));
        }
    }
    Ok(FriedbergResult {
        eta: table,
        forward: m.programs,
        exhausted_at: m.exhausted_at,
        pairwise,
    })
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Roundtrip {
    pub ceer: CeerBuilder,
    /// Sampled programs on which `t ∘ t'` did not converge.
    pub divergent: Vec<u64>,
}

/// The ceer generated by `p ~ t(t'(p))` over the sample.
pub fn ceer_from_roundtrip(
    t: &TranslationSource,
    t_prime: &TranslationSource,
    programs: &[u64],
    budget: u64,
    env: &dyn EvalEnv,
) -> Roundtrip {
    let mut ceer = CeerBuilder::new();
    let mut divergent = Vec::new();
    for &p in programs {
        match t_prime
            .apply(p, budget, env)
            .and_then(|q| t.apply(q, budget, env))
        {
            Some(r) => ceer.add_pair(p, r),
            None => divergent.push(p),
        }
    }
    Roundtrip { ceer, divergent }
}

/// `t'(p)`: the first `q` with `p ~ t(q)`, searching by (prefix of the
/// committed pairs, q); otherwise the chosen program of `p`'s exceptional
/// class.
pub fn translation_from_ceer(
    r: &CeerBuilder,
    t: &TranslationSource,
    exceptional: &[(u64, u64)],
    p: u64,
    search_budget: u64,
    budget: u64,
    env: &dyn EvalEnv,
) -> Result<u64, ReductionError> {
    let images: Vec<Option<u64>> = (0..search_budget)
        .map(|q| t.apply(q, budget, env))
        .collect();
    let mut grown = CeerBuilder::new();
    let pairs = r.pairs();
    for stage in 0..=pairs.len() {
        if stage > 0 {
            let (a, b) = pairs[stage - 1];
            grown.add_pair(a, b);
        }
        if let Some(q) = images
            .iter()
            .position(|y| y.is_some_and(|y| grown.related(p, y)))
        {
            return Ok(q as u64);
        }
    }
    exceptional
        .iter()
        .find(|&&(rep, _)| r.related(p, rep))
        .map(|&(_, q)| q)
        .ok_or(ReductionError::SearchExhausted {
            p,
            budget: search_budget,
        })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TieMode {
    Strong,
    Weak,
}

impl fmt::Display for TieMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TieMode::Strong => "strong",
            TieMode::Weak => "weak",
        })
    }
}

impl std::str::FromStr for TieMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "strong" => Ok(TieMode::Strong),
            "weak" => Ok(TieMode::Weak),
            _ => Err(format!("unknown tie mode `{s}` (strong|weak)")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Subrelation {
    HoldsOnSample,
    Violated { p: u64, q: u64, witness: u64 },
    Unknown { p: u64, q: u64 },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TieReport {
    pub mode: TieMode,
    pub subrelation: Subrelation,
    pub classes_checked: usize,
    /// Least members of the sampled classes that miss `{t(q) | q < horizon}`.
    pub classes_missed: Vec<u64>,
}

impl TieReport {
    /// Strong mode needs every sampled class met; weak mode tolerates a
    /// finite number of misses, which a finite sample cannot refute.
    pub fn holds(&self) -> bool {
        self.subrelation == Subrelation::HoldsOnSample
            && (self.mode == TieMode::Weak || self.classes_missed.is_empty())
    }
}

impl fmt::Display for TieReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sub = match self.subrelation {
            Subrelation::HoldsOnSample => "holds".to_string(),
            Subrelation::Violated { p, q, witness } => format!("violated {p}~{q} @ {witness}"),
            Subrelation::Unknown { p, q } => format!("unknown {p}~{q}"),
        };
        write!(
            f,
            "mode={} subrelation={} classes={} missed={}",
            self.mode,
            sub,
            self.classes_checked,
            self.classes_missed.len()
        )
    }
}

/// Checks that `r` relates only equivalent programs (on committed pairs below
/// the horizon) and that its classes among programs below the horizon meet
/// the range of `t` on the same window.
pub fn ties_check(
    r: &CeerBuilder,
    t: &TranslationSource,
    psi: &dyn Numbering,
    mode: TieMode,
    horizon: u64,
    budget: u64,
    env: &dyn EvalEnv,
) -> Result<TieReport, ReductionError> {
    let mut subrelation = Subrelation::HoldsOnSample;
    for &(p, q) in r.pairs() {
        if p.max(q) >= horizon {
            continue;
        }
        match equiv(psi, p, q, budget, env)? {
            EqVerdict::Equal => {}
            EqVerdict::Distinct { witness } => {
                subrelation = Subrelation::Violated { p, q, witness };
                break;
            }
            EqVerdict::Unknown { .. } => {
                if subrelation == Subrelation::HoldsOnSample {
                    subrelation = Subrelation::Unknown { p, q };
                }
            }
        }
    }
    let window: BTreeSet<u64> = (0..horizon).collect();
    let classes = r.classes_among(&window);
    let range: BTreeSet<u64> = (0..horizon)
        .filter_map(|q| t.apply(q, budget, env))
        .map(|y| r.representative(y))
        .collect();
    let mut missed = Vec::new();
    for class in &classes {
        let least = *class.iter().next().unwrap();
        if !range.contains(&r.representative(least)) {
            missed.push(least);
            if mode == TieMode::Strong {
                break;
            }
        }
    }
    Ok(TieReport {
        mode,
        subrelation,
        classes_checked: classes.len(),
        classes_missed: missed,
    })
}

/// A c.e. set given by its stage approximations `J^s`.
#[derive(Clone)]
pub enum SetSource {
    Finite(BTreeSet<u64>),
    /// A decidable set; stage `s` has revealed its members below `s`.
    Decidable {
        name: String,
        f: Arc<dyn Fn(u64) -> bool + Send + Sync>,
    },
    /// `W_e^s`.
    Machine {
        machine: Arc<Machine>,
        index: u64,
    },
}

impl fmt::Debug for SetSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SetSource::Finite(s) => write!(f, "Finite({s:?})"),
            SetSource::Decidable { name, .. } => write!(f, "Decidable({name})"),
            SetSource::Machine { index, .. } => write!(f, "W({index})"),
        }
    }
}

impl SetSource {
    pub fn decidable(
        name: impl Into<String>,
        f: impl Fn(u64) -> bool + Send + Sync + 'static,
    ) -> Self {
        SetSource::Decidable {
            name: name.into(),
            f: Arc::new(f),
        }
    }

    /// `J^s`.
    pub fn revealed(&self, s: u64) -> BTreeSet<u64> {
        match self {
            SetSource::Finite(set) => set.clone(),
            SetSource::Decidable { f, .. } => (0..s).filter(|&x| f(x)).collect(),
            SetSource::Machine { machine, index } => machine.w_enum(*index, s),
        }
    }

    /// `J^s \ J^{s-1}` in increasing order.
    pub fn arrivals(&self, s: u64) -> Vec<u64> {
        match self {
            SetSource::Finite(set) if s == 1 => set.iter().copied().collect(),
            SetSource::Finite(_) => Vec::new(),
            SetSource::Decidable { f, .. } => match s.checked_sub(1) {
                Some(x) if f(x) => vec![x],
                _ => Vec::new(),
            },
            SetSource::Machine { .. } if s == 0 => Vec::new(),
            SetSource::Machine { .. } => {
                let before = self.revealed(s - 1);
                self.revealed(s).difference(&before).copied().collect()
            }
        }
    }
}

/// What the caller knows about `J_l ∩ X_l`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Hint {
    Infinite,
    /// Finite, and fully enumerated by stage `bound`.
    Finite {
        bound: u64,
    },
    /// Unknown: look at stages up to `budget` and guess.
    Budgeted {
        budget: u64,
    },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Decision {
    /// `X_{l+1}` keeps every other element of an increasing enumeration of
    /// `J_l ∩ X_l`.
    Thinned,
    /// `X_{l+1} = {x ∈ X_l | x > max}`; `None` when the intersection was empty.
    Tail { max: Option<u64> },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LevelLog {
    pub level: usize,
    pub hint: Hint,
    pub decision: Decision,
    /// Elements of `J_l ∩ X_l` seen while deciding.
    pub sampled: Vec<u64>,
}

struct Picker {
    source: SetSource,
    stage: u64,
    last: Option<u64>,
    taken: u64,
    out: Vec<u64>,
}

enum Level {
    Thinned(RefCell<Picker>),
    Tail(Option<u64>),
}

/// The refined set `X` and the levels `L` where the intersection is infinite.
pub struct RefinementResult {
    pub l: BTreeSet<usize>,
    pub log: Vec<LevelLog>,
    levels: Vec<Level>,
    max_stages: u64,
}

impl fmt::Debug for RefinementResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RefinementResult")
            .field("l", &self.l)
            .field("log", &self.log)
            .finish()
    }
}

/// Stages a thinned level may run without producing an element.
pub const DEFAULT_MAX_STAGES: u64 = 1 << 16;

impl RefinementResult {
    /// Membership in `X_k`.
    fn contains_at(&self, k: usize, x: u64) -> Result<bool, ReductionError> {
        if k == 0 {
            return Ok(true);
        }
        match &self.levels[k - 1] {
            Level::Tail(max) => {
                if max.is_some_and(|m| x <= m) {
                    return Ok(false);
                }
                self.contains_at(k - 1, x)
            }
            Level::Thinned(cell) => {
                let mut picker = cell.borrow_mut();
                let mut idle = 0;
                while picker.last.is_none_or(|l| l < x) {
                    let before = picker.taken;
                    self.advance(k - 1, &mut picker)?;
                    if picker.taken == before {
                        idle += 1;
                        if idle > self.max_stages {
                            return Err(ReductionError::Starved {
                                level: k - 1,
                                stages: self.max_stages,
                            });
                        }
                    } else {
                        idle = 0;
                    }
                }
                Ok(picker.out.binary_search(&x).is_ok())
            }
        }
    }

    /// Runs one more stage of `J_level`, keeping new elements of `X_level`
    /// that exceed everything kept so far.
    fn advance(&self, level: usize, picker: &mut Picker) -> Result<(), ReductionError> {
        picker.stage += 1;
        for y in picker.source.arrivals(picker.stage) {
            if picker.last.is_some_and(|l| y <= l) || !self.contains_at(level, y)? {
                continue;
            }
            picker.last = Some(y);
            if picker.taken.is_multiple_of(2) {
                picker.out.push(y);
            }
            picker.taken += 1;
        }
        Ok(())
    }

    pub fn contains(&self, x: u64) -> Result<bool, ReductionError> {
        self.contains_at(self.levels.len(), x)
    }

    /// Membership in the intermediate set `X_k`.
    pub fn contains_level(&self, k: usize, x: u64) -> Result<bool, ReductionError> {
        self.contains_at(k.min(self.levels.len()), x)
    }

    pub fn depth(&self) -> usize {
        self.levels.len()
    }

    /// The first `n` elements of `X`.
    pub fn first(&self, n: usize) -> Result<Vec<u64>, ReductionError> {
        let mut out = Vec::with_capacity(n);
        let mut x = 0;
        while out.len() < n {
            if self.contains(x)? {
                out.push(x);
            }
            x += 1;
        }
        Ok(out)
    }
}

/// Refines `X_0 = ℕ` level by level: where `J_l ∩ X_l` is infinite, `X_{l+1}`
/// is an infinite computable subset of it and `l` joins `L`; otherwise
/// `X_{l+1}` is the part of `X_l` above the intersection.
pub fn lemma10_refine(
    sets: Vec<SetSource>,
    hints: &[Hint],
) -> Result<RefinementResult, ReductionError> {
    lemma10_refine_with(sets, hints, DEFAULT_MAX_STAGES)
}

pub fn lemma10_refine_with(
    sets: Vec<SetSource>,
    hints: &[Hint],
    max_stages: u64,
) -> Result<RefinementResult, ReductionError> {
    if sets.len() != hints.len() {
        return Err(ReductionError::HintCount {
            hints: hints.len(),
            sets: sets.len(),
        });
    }
    let mut result = RefinementResult {
        l: BTreeSet::new(),
        log: Vec::new(),
        levels: Vec::new(),
        max_stages,
    };
    for (level, (source, &hint)) in sets.into_iter().zip(hints).enumerate() {
        let meet = |s: u64, result: &RefinementResult| -> Result<Vec<u64>, ReductionError> {
            let mut v = Vec::new();
            for y in source.revealed(s) {
                if result.contains_at(level, y)? {
                    v.push(y);
                }
            }
            Ok(v)
        };
        let (infinite, sampled) = match hint {
            Hint::Infinite => (true, Vec::new()),
            Hint::Finite { bound } => (false, meet(bound, &result)?),
            Hint::Budgeted { budget } => {
                let early = meet(budget / 2, &result)?;
                let late = meet(budget, &result)?;
                if late.len() == early.len() {
                    (false, late)
                } else if late.len() >= early.len() + 2 {
                    (true, late)
                } else {
                    return Err(ReductionError::Inconclusive { level, budget });
                }
            }
        };
        let decision = if infinite {
            result.l.insert(level);
            result.levels.push(Level::Thinned(RefCell::new(Picker {
                source,
                stage: 0,
                last: None,
                taken: 0,
                out: Vec::new(),
            })));
            Decision::Thinned
        } else {
            let max = sampled.iter().max().copied();
            result.levels.push(Level::Tail(max));
            Decision::Tail { max }
        };
        result.log.push(LevelLog {
            level,
            hint,
            decision,
            sampled,
        });
    }
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::aux::StandardEnv;
    use crate::numbering::check_translation;
    use proptest::prelude::*;
    use std::collections::BTreeMap;

    fn env() -> StandardEnv {
        StandardEnv::default()
    }

    #[test]
    fn decider_examples() {
        let env = env();
        let id = TranslationSource::Identity;
        assert!(friedberg_equiv_decider(&id, 3, 3, 1, &env).unwrap());
        assert!(!friedberg_equiv_decider(&id, 3, 4, 1, &env).unwrap());
        let c = TranslationSource::Constant(7);
        assert!(friedberg_equiv_decider(&c, 3, 4, 1, &env).unwrap());
        let partial = TranslationSource::Table(BTreeMap::from([(3, 0)]));
        assert_eq!(
            friedberg_equiv_decider(&partial, 3, 4, 1, &env),
            Err(ReductionError::Undecided { p: 4, budget: 1 })
        );
    }

    #[test]
    fn minimal_program_examples() {
        let all = |_: u64, _: u64| true;
        let m = minimal_programs(&all, 3, 100);
        assert_eq!(m.programs, vec![0]);
        assert_eq!(m.exhausted_at, Some(100));
        let id = |p: u64, q: u64| p == q;
        assert_eq!(minimal_programs(&id, 3, 100).programs, vec![0, 1, 2]);
        // Classes {0,2}, {1}, {3,4,...}.
        let class = |p: u64| match p {
            0 | 2 => 0,
            1 => 1,
            _ => 3,
        };
        let r = |p: u64, q: u64| class(p) == class(q);
        assert_eq!(minimal_programs(&r, 3, 100).programs, vec![0, 1, 3]);
    }

    #[test]
    fn friedberg_examples() {
        let env = env();
        let a = Descriptor::finite(0, 1);
        let b = Descriptor::Total { value: 5 };
        let psi = DescriptorTable(vec![a, a, b]);
        let oracle = |p: u64, q: u64| psi.0[p as usize] == psi.0[q as usize];
        let r = friedberg_from_decider(&psi, &oracle, 2, 3, 8, &env).unwrap();
        assert_eq!(r.eta.0, vec![a, b]);
        assert_eq!(r.forward, vec![0, 2]);
        assert!(r.one_to_one());
        assert_eq!(r.backward(&oracle, 1), Some(0));
        let one = |_: u64, _: u64| true;
        let r = friedberg_from_decider(&psi, &one, 3, 3, 8, &env).unwrap();
        assert_eq!(r.eta.0, vec![a]);
    }

    #[test]
    fn roundtrip_examples() {
        let env = env();
        let programs: Vec<u64> = (0..6).collect();
        let id = TranslationSource::Identity;
        let r = ceer_from_roundtrip(&id, &id, &programs, 4, &env);
        assert!(
            r.ceer
                .classes_among(&programs.iter().copied().collect())
                .len()
                == 6
        );
        let r = ceer_from_roundtrip(&id, &TranslationSource::Constant(0), &programs, 4, &env);
        assert!(programs.iter().all(|&p| r.ceer.related(p, 0)));
        let partial = TranslationSource::Table(BTreeMap::from([(0, 0), (1, 1)]));
        let r = ceer_from_roundtrip(&id, &partial, &programs, 4, &env);
        assert_eq!(r.divergent, vec![2, 3, 4, 5]);
    }

    #[test]
    fn translation_from_ceer_examples() {
        let env = env();
        let id = TranslationSource::Identity;
        let none = CeerBuilder::new();
        assert_eq!(
            translation_from_ceer(&none, &id, &[], 5, 10, 4, &env),
            Ok(5)
        );
        let t = TranslationSource::custom("plus 100", |q| Some(q + 100));
        let all = CeerBuilder::rst_closure((0..10).map(|p| (p, 100)));
        for p in 0..10 {
            assert_eq!(translation_from_ceer(&all, &t, &[], p, 10, 4, &env), Ok(0));
        }
        let r = CeerBuilder::rst_closure([(50, 51)]);
        assert_eq!(
            translation_from_ceer(&r, &id, &[(50, 9)], 51, 10, 4, &env),
            Ok(9)
        );
        assert!(translation_from_ceer(&r, &id, &[], 51, 10, 4, &env).is_err());
    }

    #[test]
    fn ties_check_examples() {
        let env = env();
        let psi = DescriptorTable((0..40).map(|v| Descriptor::Total { value: v }).collect());
        let r = CeerBuilder::new();
        let rep = ties_check(
            &r,
            &TranslationSource::Identity,
            &psi,
            TieMode::Strong,
            10,
            4,
            &env,
        )
        .unwrap();
        assert!(rep.holds());
        let double = TranslationSource::custom("2q", |q| Some(2 * q));
        let rep = ties_check(&r, &double, &psi, TieMode::Weak, 10, 4, &env).unwrap();
        assert_eq!(rep.classes_missed, vec![1, 3, 5, 7, 9]);
        let bad = CeerBuilder::rst_closure([(1, 2)]);
        let rep = ties_check(
            &bad,
            &TranslationSource::Identity,
            &psi,
            TieMode::Strong,
            10,
            4,
            &env,
        )
        .unwrap();
        assert!(matches!(
            rep.subrelation,
            Subrelation::Violated { p: 1, q: 2, .. }
        ));
        assert!(!rep.holds());
    }

    /// The roundtrip ceer of a translation pair into a repetition-free copy
    /// ties the translation, and the translation recovered from the ceer
    /// is a witness again.
    #[test]
    fn tying_roundtrip_on_a_table() {
        let env = env();
        // psi repeats each function twice; theta lists each once.
        let psi = DescriptorTable(
            (0..40)
                .map(|p| Descriptor::Total { value: p / 2 })
                .collect(),
        );
        let theta = DescriptorTable((0..40).map(|v| Descriptor::Total { value: v }).collect());
        let t = TranslationSource::custom("2q", |q| Some(2 * q));
        let t_prime = TranslationSource::custom("p/2", |p| Some(p / 2));
        let programs: Vec<u64> = (0..40).collect();
        let rt = ceer_from_roundtrip(&t, &t_prime, &programs, 4, &env);
        let rep = ties_check(&rt.ceer, &t, &psi, TieMode::Strong, 40, 4, &env).unwrap();
        assert!(rep.holds(), "{rep}");
        let back: BTreeMap<u64, u64> = programs
            .iter()
            .map(|&p| {
                (
                    p,
                    translation_from_ceer(&rt.ceer, &t, &[], p, 40, 4, &env).unwrap(),
                )
            })
            .collect();
        let report = check_translation(
            &TranslationSource::Table(back),
            &psi,
            &theta,
            &programs,
            4,
            &env,
        )
        .unwrap();
        assert!(report.all_equal());
    }

    #[test]
    fn refinement_examples() {
        let evens = SetSource::decidable("evens", |x| x % 2 == 0);
        let threes = SetSource::decidable("threes", |x| x % 3 == 0);
        let r = lemma10_refine(vec![evens, threes], &[Hint::Infinite, Hint::Infinite]).unwrap();
        assert_eq!(r.l, BTreeSet::from([0, 1]));
        let xs = r.first(50).unwrap();
        assert!(xs.iter().all(|x| x % 6 == 0));
        let r = lemma10_refine(
            vec![SetSource::Finite(BTreeSet::from([1, 2]))],
            &[Hint::Finite { bound: 2 }],
        )
        .unwrap();
        assert!(r.l.is_empty());
        assert_eq!(r.first(3).unwrap(), vec![3, 4, 5]);
        let r = lemma10_refine(vec![], &[]).unwrap();
        assert_eq!(r.first(4).unwrap(), vec![0, 1, 2, 3]);
    }

    #[test]
    fn refinement_budgeted_and_errors() {
        let evens = SetSource::decidable("evens", |x| x % 2 == 0);
        let r = lemma10_refine(vec![evens.clone()], &[Hint::Budgeted { budget: 40 }]).unwrap();
        assert_eq!(r.log[0].decision, Decision::Thinned);
        let small = SetSource::decidable("small", |x| x < 5);
        let r = lemma10_refine(vec![small.clone()], &[Hint::Budgeted { budget: 40 }]).unwrap();
        assert_eq!(r.log[0].decision, Decision::Tail { max: Some(4) });
        let late = SetSource::decidable("one late", |x| x == 30);
        assert_eq!(
            lemma10_refine(vec![late], &[Hint::Budgeted { budget: 40 }]).unwrap_err(),
            ReductionError::Inconclusive {
                level: 0,
                budget: 40
            }
        );
        let r = lemma10_refine_with(vec![small], &[Hint::Infinite], 100).unwrap();
        assert!(matches!(
            r.first(10),
            Err(ReductionError::Starved { level: 0, .. })
        ));
    }

    #[test]
    fn refinement_over_machine_sets() {
        use crate::machine::{Fallback, ScriptRegistry};
        let mut scripts = ScriptRegistry::new();
        // W_1 enumerates multiples of 5, late and out of order.
        for k in (0..200u64).rev() {
            scripts.reveal_set(1, 400 - 2 * k, 5 * k).unwrap();
        }
        let machine = Arc::new(Machine::new(scripts, Fallback::Nowhere));
        let j = SetSource::Machine { machine, index: 1 };
        let r = lemma10_refine(vec![j], &[Hint::Infinite]).unwrap();
        let xs = r.first(3).unwrap();
        assert!(xs.iter().all(|x| x % 5 == 0));
        assert!(xs.windows(2).all(|w| w[0] < w[1]));
    }

    proptest! {
        /// For every level, members of X are in J_l exactly when l ∈ L.
        #[test]
        fn refinement_postcondition(specs in prop::collection::vec((0u8..3, 2u64..5, 0u64..6), 0..4)) {
            let mut sets = Vec::new();
            let mut hints = Vec::new();
            let mut truth: Vec<Box<dyn Fn(u64) -> bool>> = Vec::new();
            for (kind, m, c) in specs {
                match kind {
                    0 => {
                        sets.push(SetSource::decidable("mod", move |x| x % m == 0));
                        hints.push(Hint::Infinite);
                        truth.push(Box::new(move |x| x % m == 0));
                    }
                    1 => {
                        sets.push(SetSource::decidable("below", move |x| x < c));
                        hints.push(Hint::Finite { bound: c });
                        truth.push(Box::new(move |x| x < c));
                    }
                    _ => {
                        sets.push(SetSource::decidable("off", move |x| x % m == 1));
                        hints.push(Hint::Infinite);
                        truth.push(Box::new(move |x| x % m == 1));
                    }
                }
            }
            let r = match lemma10_refine_with(sets, &hints, 4096) {
                Ok(r) => r,
                Err(ReductionError::Starved { .. }) => return Ok(()),
                Err(e) => return Err(TestCaseError::fail(e.to_string())),
            };
            let xs = match r.first(20) {
                Ok(xs) => xs,
                // Two incompatible residues make the intersection empty.
                Err(ReductionError::Starved { .. }) => return Ok(()),
                Err(e) => return Err(TestCaseError::fail(e.to_string())),
            };
            for x in xs {
                for (l, j) in truth.iter().enumerate() {
                    prop_assert_eq!(j(x), r.l.contains(&l));
                }
            }
        }
    }
}
