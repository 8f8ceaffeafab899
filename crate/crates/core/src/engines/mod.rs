//! The three stage constructions. Each stage number decodes to a stage
//! form; a stage either fires, committing a list of effects atomically, or
//! leaves the state alone. Effects are the only way state changes, so a
//! trace of effects replays to the exact engine state.

mod companion;
mod stages;

pub use companion::{
    companion_ceer, counterexample_t, infinity_snapshot, paired_counterexample,
    PairedCounterexample, RowSnapshot, Snapshot, SnapshotError, ALL_ROWS_SAMPLE,
};
pub use stages::next_stage;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use crate::aux::{Family, StandardEnv};
use crate::config::RunConfig;
use crate::geometry::{self, Layout, Row};
use crate::kernel::{unpair, Descriptor};
use crate::lazyset::LazySet;
use crate::machine::{Machine, ProgramCache};
use crate::numbering::{Eps, Rule};
use crate::trace::{Status, Trace, TraceRecord};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Construction {
    /// Rows indexed by `(i, j)`; no ceer weakly ties every translation.
    Paired,
    /// Rows indexed by `i`; one ceer weakly ties every translation.
    Single,
    /// Constructed `E_i`/`Ē_i` sets; a ceer strongly ties every translation
    /// while program equivalence is not c.e.
    Triad,
}

impl Construction {
    pub const ALL: [Construction; 3] = [
        Construction::Paired,
        Construction::Single,
        Construction::Triad,
    ];

    pub fn family(self) -> Family {
        match self {
            Construction::Paired => Family::Paired,
            Construction::Single => Family::Single,
            Construction::Triad => Family::Triad,
        }
    }

    /// Row layout; `None` for the triad construction.
    pub fn layout(self) -> Option<Layout> {
        match self {
            Construction::Paired => Some(Layout::Paired),
            Construction::Single => Some(Layout::Single),
            Construction::Triad => None,
        }
    }

    fn initial_dst(self) -> LazySet {
        match self {
            Construction::Triad => LazySet::progression(2, 3),
            _ => LazySet::progression(1, 2),
        }
    }
}

impl fmt::Display for Construction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Construction::Paired => "paired",
            Construction::Single => "single",
            Construction::Triad => "triad",
        })
    }
}

impl FromStr for Construction {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "paired" => Ok(Construction::Paired),
            "single" => Ok(Construction::Single),
            "triad" => Ok(Construction::Triad),
            _ => Err(format!("unknown construction `{s}` (paired|single|triad)")),
        }
    }
}

/// Which rows of `i` an R-flag reassigns in the paired construction.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Scope {
    /// Only the row whose block pair triggered the flag.
    #[default]
    TriggerRow,
    /// Every row of `i`, overwriting the rows whose constants the chosen
    /// auxiliary functions do not extend.
    AllRows,
}

impl fmt::Display for Scope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scope::TriggerRow => "trigger-row",
            Scope::AllRows => "all-rows",
        })
    }
}

impl FromStr for Scope {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "trigger-row" => Ok(Scope::TriggerRow),
            "all-rows" => Ok(Scope::AllRows),
            _ => Err(format!("unknown scope `{s}` (trigger-row|all-rows)")),
        }
    }
}

/// A decoded stage number.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Form {
    /// `<0, l>`: hand `alpha_l` to the least fresh program.
    Assign { l: u64 },
    /// `<i+1, 0, ->`: refute `W_i` as a subrelation of program equivalence.
    Refute { i: u64 },
    /// `<i+1, j+1, l, ->`: does `phi_l` hit every block pair of row `(i, j)`?
    Translate { i: u64, j: u64, l: u64 },
    /// `<i+1, l+1, ->`: does `phi_l` hit every block pair of row `i`?
    TranslateSingle { i: u64, l: u64 },
    /// `<i+1, j+1, ->`: is the program pair of `(i, j)` in `rng(phi_j)`?
    Onto { i: u64, j: u64 },
}

impl Form {
    pub fn decode(s: u64, construction: Construction) -> Form {
        let (a, r) = unpair(s);
        if a == 0 {
            return Form::Assign { l: r };
        }
        let i = a - 1;
        let (b, rest) = unpair(r);
        if b == 0 {
            return Form::Refute { i };
        }
        match construction {
            Construction::Paired => Form::Translate {
                i,
                j: b - 1,
                l: unpair(rest).0,
            },
            Construction::Single => Form::TranslateSingle { i, l: b - 1 },
            Construction::Triad => Form::Onto { i, j: b - 1 },
        }
    }

    pub fn parse(s: &str, construction: Construction) -> Result<Form, String> {
        let bad = || format!("bad stage form `{s}`");
        let inner = s
            .strip_prefix('<')
            .and_then(|t| t.strip_suffix('>'))
            .ok_or_else(bad)?;
        let parts: Vec<&str> = inner.split(',').collect();
        let n = |t: &str| t.parse::<u64>().map_err(|_| bad());
        let pos = |t: &str| n(t)?.checked_sub(1).ok_or_else(bad);
        let form = match (parts.as_slice(), construction) {
            ([z, l], _) if *z == "0" => Form::Assign { l: n(l)? },
            ([a, z, "-"], _) if *z == "0" => Form::Refute { i: pos(a)? },
            ([a, b, l, "-"], Construction::Paired) => Form::Translate {
                i: pos(a)?,
                j: pos(b)?,
                l: n(l)?,
            },
            ([a, b, "-"], Construction::Single) => Form::TranslateSingle {
                i: pos(a)?,
                l: pos(b)?,
            },
            ([a, b, "-"], Construction::Triad) => Form::Onto {
                i: pos(a)?,
                j: pos(b)?,
            },
            _ => return Err(bad()),
        };
        Ok(form)
    }
}

impl fmt::Display for Form {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Form::Assign { l } => write!(f, "<0,{l}>"),
            Form::Refute { i } => write!(f, "<{},0,->", i + 1),
            Form::Translate { i, j, l } => write!(f, "<{},{},{l},->", i + 1, j + 1),
            Form::TranslateSingle { i, l } => write!(f, "<{},{},->", i + 1, l + 1),
            Form::Onto { i, j } => write!(f, "<{},{},->", i + 1, j + 1),
        }
    }
}

/// One atomic state change.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Effect {
    /// `i` joins the R-flags; `(p, q)` is the `W_i` pair that crossed a
    /// block pair of row `j` (`j = 0` outside the paired construction).
    RFlag {
        i: u64,
        j: u64,
        p: u64,
        q: u64,
    },
    /// Translation flag. The single construction uses `j = 0`, the triad
    /// construction `l = 0`.
    TFlag {
        i: u64,
        j: u64,
        l: u64,
    },
    /// Row `(i, j)` now has the given height.
    Merge {
        i: u64,
        j: u64,
        height: u32,
    },
    SrcRemove(u64),
    DstRemove(u64),
    /// Removes the even-positioned elements of Dst.
    DstThin,
    Rule(Rule),
    EGrow {
        i: u64,
        p: u64,
    },
    EbarGrow {
        i: u64,
        p: u64,
    },
    /// Rows of `i` other than the trigger row were reassigned even though
    /// their previous constants are not extended.
    Overwrite {
        i: u64,
    },
}

impl fmt::Display for Effect {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Effect::RFlag { i, j, p, q } => write!(f, "rflag {i} {j} {p} {q}"),
            Effect::TFlag { i, j, l } => write!(f, "tflag {i} {j} {l}"),
            Effect::Merge { i, j, height } => write!(f, "merge {i} {j} {height}"),
            Effect::SrcRemove(k) => write!(f, "src- {k}"),
            Effect::DstRemove(p) => write!(f, "dst- {p}"),
            Effect::DstThin => write!(f, "dst-thin"),
            Effect::Rule(r) => write!(f, "rule {r}"),
            Effect::EGrow { i, p } => write!(f, "e+ {i} {p}"),
            Effect::EbarGrow { i, p } => write!(f, "ebar+ {i} {p}"),
            Effect::Overwrite { i } => write!(f, "overwrite {i}"),
        }
    }
}

impl FromStr for Effect {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let bad = || format!("bad effect `{s}`");
        if let Some(rule) = s.strip_prefix("rule ") {
            return Ok(Effect::Rule(rule.parse()?));
        }
        let f: Vec<&str> = s.split_whitespace().collect();
        let n = |t: &str| t.parse::<u64>().map_err(|_| bad());
        Ok(match f.as_slice() {
            ["rflag", i, j, p, q] => Effect::RFlag {
                i: n(i)?,
                j: n(j)?,
                p: n(p)?,
                q: n(q)?,
            },
            ["tflag", i, j, l] => Effect::TFlag {
                i: n(i)?,
                j: n(j)?,
                l: n(l)?,
            },
            ["merge", i, j, h] => Effect::Merge {
                i: n(i)?,
                j: n(j)?,
                height: h.parse().map_err(|_| bad())?,
            },
            ["src-", k] => Effect::SrcRemove(n(k)?),
            ["dst-", p] => Effect::DstRemove(n(p)?),
            ["dst-thin"] => Effect::DstThin,
            ["e+", i, p] => Effect::EGrow { i: n(i)?, p: n(p)? },
            ["ebar+", i, p] => Effect::EbarGrow { i: n(i)?, p: n(p)? },
            ["overwrite", i] => Effect::Overwrite { i: n(i)? },
            _ => return Err(bad()),
        })
    }
}

/// Everything a construction keeps between stages.
#[derive(Clone, Debug, PartialEq)]
pub struct EngineState {
    pub construction: Construction,
    pub scope: Scope,
    /// The next stage to run.
    pub stage: u64,
    /// Flagged `i`, with the stage that set the flag.
    pub r_flags: BTreeMap<u64, u64>,
    /// Flag key `(i, j, l)`, with the stage that set it.
    pub t_flags: BTreeMap<(u64, u64, u64), u64>,
    /// Rows with nonzero height.
    pub heights: BTreeMap<(u64, u64), u32>,
    /// Src is ℕ minus these.
    pub src_removed: BTreeSet<u64>,
    pub dst: LazySet,
    pub eps: Eps,
    pub e_sets: BTreeMap<u64, BTreeSet<u64>>,
    pub ebar_sets: BTreeMap<u64, BTreeSet<u64>>,
    pub overwritten: BTreeSet<u64>,
}

impl EngineState {
    /// State after the initialization block.
    pub fn new(construction: Construction, scope: Scope) -> Self {
        let mut eps = Eps::new();
        match construction.layout() {
            Some(layout) => eps.push(0, Rule::RowBase { layout }),
            None => eps.push(0, Rule::TriadBase),
        }
        let dst = construction.initial_dst();
        let (modulus, residue) = match construction {
            Construction::Triad => (3, 2),
            _ => (2, 1),
        };
        eps.push(
            0,
            Rule::Residue {
                modulus,
                residue,
                d: Descriptor::Empty,
            },
        );
        EngineState {
            construction,
            scope,
            stage: 0,
            r_flags: BTreeMap::new(),
            t_flags: BTreeMap::new(),
            heights: BTreeMap::new(),
            src_removed: BTreeSet::new(),
            dst,
            eps,
            e_sets: BTreeMap::new(),
            ebar_sets: BTreeMap::new(),
            overwritten: BTreeSet::new(),
        }
    }

    pub fn in_src(&self, k: u64) -> bool {
        !self.src_removed.contains(&k)
    }

    /// `height_{i,j}`; `j` is ignored by the single construction.
    pub fn height(&self, i: u64, j: u64) -> u32 {
        let j = if self.construction == Construction::Single {
            0
        } else {
            j
        };
        self.heights.get(&(i, j)).copied().unwrap_or(0)
    }

    /// `num_{i,j} = 2^{i - height}`; `None` when it does not fit in a u64.
    pub fn num(&self, i: u64, j: u64) -> Option<u64> {
        geometry::num(i, self.height(i, j))
    }

    /// `E` and `Ē` of block pair `k` of row `(i, j)`, or the constructed
    /// `E_i`/`Ē_i` in the triad construction.
    pub fn block(&self, i: u64, j: u64, k: u64) -> (BTreeSet<u64>, BTreeSet<u64>) {
        match self.construction.layout() {
            Some(layout) => {
                let j = if layout == Layout::Single { 0 } else { j };
                let h = self.height(i, j);
                assert!(
                    self.num(i, j).is_some_and(|n| k < n),
                    "block {k} out of range for row ({i}, {j})"
                );
                layout.block_sets(Row::new(i, j), h, k)
            }
            None => (
                self.e_sets.get(&i).cloned().unwrap_or_default(),
                self.ebar_sets.get(&i).cloned().unwrap_or_default(),
            ),
        }
    }

    /// Descriptor of `p` in the current numbering `psi^stage`.
    pub fn descriptor(&self, p: u64) -> Descriptor {
        self.eps
            .lookup(p, self.stage)
            .expect("engine tables cover every program")
    }

    /// Applies one effect of stage `s`. Rules take effect at version `s + 1`.
    pub fn apply(&mut self, s: u64, effect: &Effect) {
        match effect {
            Effect::RFlag { i, .. } => {
                self.r_flags.entry(*i).or_insert(s);
            }
            Effect::TFlag { i, j, l } => {
                self.t_flags.entry((*i, *j, *l)).or_insert(s);
            }
            Effect::Merge { i, j, height } => {
                self.heights.insert((*i, *j), *height);
            }
            Effect::SrcRemove(k) => {
                self.src_removed.insert(*k);
            }
            Effect::DstRemove(p) => self.dst.remove_values([*p]),
            Effect::DstThin => self.dst.thin(),
            Effect::Rule(rule) => self.eps.push(s + 1, rule.clone()),
            Effect::EGrow { i, p } => {
                self.e_sets.entry(*i).or_default().insert(*p);
            }
            Effect::EbarGrow { i, p } => {
                self.ebar_sets.entry(*i).or_default().insert(*p);
            }
            Effect::Overwrite { i } => {
                self.overwritten.insert(*i);
            }
        }
    }

    /// Applies a whole record and advances to the next stage.
    pub fn apply_record(&mut self, record: &TraceRecord) {
        assert_eq!(
            record.stage, self.stage,
            "records must be replayed in order"
        );
        for e in &record.effects {
            self.apply(record.stage, e);
        }
        self.stage += 1;
    }
}

/// A running construction: the state plus the opponents it consults.
pub struct Engine {
    config: RunConfig,
    env: StandardEnv,
    cache: ProgramCache,
    state: EngineState,
    records: Vec<TraceRecord>,
}

impl Engine {
    pub fn new(config: RunConfig, machine: Machine) -> Self {
        let state = EngineState::new(config.construction, config.scope);
        Engine {
            env: StandardEnv::with_families(machine, &[config.construction.family()]),
            config,
            cache: ProgramCache::new(),
            state,
            records: Vec::new(),
        }
    }

    pub fn state(&self) -> &EngineState {
        &self.state
    }

    pub fn machine(&self) -> &Machine {
        &self.env.machine
    }

    pub fn records(&self) -> &[TraceRecord] {
        &self.records
    }

    /// Runs the next stage and returns its record.
    pub fn step(&mut self) -> &TraceRecord {
        let s = self.state.stage;
        let form = Form::decode(s, self.config.construction);
        let (status, effects) = match self.evaluate(s, form) {
            Outcome::Idle => (Status::Idle, Vec::new()),
            Outcome::Fired(fx) => (Status::Fired, fx),
            Outcome::Deferred(why) => (Status::Deferred(why), Vec::new()),
        };
        let record = TraceRecord {
            stage: s,
            form,
            status,
            effects,
        };
        self.state.apply_record(&record);
        self.records.push(record);
        self.records.last().unwrap()
    }

    /// Runs until `config.horizon` stages have executed.
    pub fn run_to_horizon(&mut self) {
        while self.state.stage < self.config.horizon {
            self.step();
        }
    }

    pub fn into_trace(self) -> Trace {
        Trace {
            config: self.config,
            scripts: self.env.machine.scripts.to_records(),
            records: self.records,
        }
    }
}

/// Executes stages `0..horizon` and returns the full trace.
pub fn run(config: &RunConfig, machine: Machine) -> Trace {
    let mut engine = Engine::new(config.clone(), machine);
    engine.run_to_horizon();
    engine.into_trace()
}

pub(crate) enum Outcome {
    Idle,
    Fired(Vec<Effect>),
    Deferred(String),
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::aux::AuxNumbering;
    use crate::kernel::pair;
    use crate::machine::{Fallback, ScriptRegistry};

    fn scripted(construction: Construction, horizon: u64, script: &str) -> Trace {
        let config = RunConfig {
            construction,
            horizon,
            opponents: Fallback::Nowhere,
            ..RunConfig::default()
        };
        let machine = Machine::new(ScriptRegistry::parse(script).unwrap(), Fallback::Nowhere);
        run(&config, machine)
    }

    fn fired(trace: &Trace, form: Form) -> Option<&TraceRecord> {
        trace.records.iter().find(|r| r.form == form && r.fired())
    }

    // phi_0 hits blocks 0 and 1 of row 1 (programs 4, 6 | 8, 10).
    const ROW1_TRANSLATE: &str = "G 0 0 0 4\nG 0 0 1 8\n";

    #[test]
    fn fresh_geometry() {
        let st = EngineState::new(Construction::Single, Scope::TriggerRow);
        assert_eq!(st.height(3, 0), 0);
        assert_eq!(st.num(3, 0), Some(8));
        assert_eq!(st.num(2, 0), Some(4));
        let (e, ebar) = st.block(1, 0, 0);
        assert_eq!(e.into_iter().collect::<Vec<_>>(), vec![4]);
        assert_eq!(ebar.into_iter().collect::<Vec<_>>(), vec![6]);
        let t = EngineState::new(Construction::Triad, Scope::TriggerRow);
        let (e, ebar) = t.block(0, 0, 0);
        assert!(e.is_empty() && ebar.is_empty());
        assert_eq!(t.dst.first(3), vec![2, 5, 8]);
    }

    #[test]
    #[should_panic(expected = "out of range")]
    fn block_index_checked() {
        EngineState::new(Construction::Single, Scope::TriggerRow).block(1, 0, 2);
    }

    #[test]
    fn dispatcher() {
        let c = Construction::Paired;
        assert_eq!(Form::decode(0, c), Form::Assign { l: 0 });
        assert_eq!(Form::decode(pair(0, 7), c), Form::Assign { l: 7 });
        assert_eq!(Form::decode(pair(3, pair(0, 5)), c), Form::Refute { i: 2 });
        assert_eq!(
            Form::decode(pair(3, pair(2, pair(1, 9))), c),
            Form::Translate { i: 2, j: 1, l: 1 }
        );
        let s = pair(4, pair(2, 11));
        assert_eq!(
            Form::decode(s, Construction::Single),
            Form::TranslateSingle { i: 3, l: 1 }
        );
        assert_eq!(
            Form::decode(s, Construction::Triad),
            Form::Onto { i: 3, j: 1 }
        );
        for c in Construction::ALL {
            for s in 0..500 {
                let f = Form::decode(s, c);
                assert_eq!(Form::parse(&f.to_string(), c), Ok(f));
            }
        }
    }

    #[test]
    fn effects_round_trip_as_text() {
        let fx = [
            "rflag 1 0 4 8",
            "tflag 3 2 1",
            "merge 3 2 1",
            "src- 5",
            "dst- 7",
            "dst-thin",
            "e+ 2 9",
            "ebar+ 2 10",
            "overwrite 4",
        ];
        for t in fx {
            assert_eq!(t.parse::<Effect>().unwrap().to_string(), t);
        }
        assert!("merge 1".parse::<Effect>().is_err());
    }

    #[test]
    fn triad_assign_uses_least_fresh_program() {
        let trace = scripted(Construction::Triad, 1, "");
        let r = &trace.records[0];
        assert_eq!(r.form, Form::Assign { l: 0 });
        assert_eq!(
            r.to_string(),
            "s=0 f=<0,0> st=fired fx: src- 0 + dst- 2 + rule prog 2 aux(triad,0)"
        );
        let st = trace.final_state();
        assert!(!st.in_src(0));
        assert!(!st.dst.contains(2));
        assert_eq!(
            st.descriptor(2),
            Descriptor::Aux {
                family: Family::Triad,
                index: 0
            }
        );
    }

    #[test]
    fn quiet_paired_run_only_assigns() {
        let trace = scripted(Construction::Paired, 100, "");
        assert!(trace
            .records
            .iter()
            .all(|r| !r.fired() || matches!(r.form, Form::Assign { .. })));
        let st = trace.final_state();
        assert!(st.r_flags.is_empty() && st.t_flags.is_empty());
    }

    #[test]
    fn single_translate_merges_row() {
        let trace = scripted(Construction::Single, 40, ROW1_TRANSLATE);
        let r = fired(&trace, Form::TranslateSingle { i: 1, l: 0 }).expect("translate fires");
        assert_eq!(r.stage, pair(2, pair(1, 0)));
        let st = trace.final_state();
        assert_eq!(st.height(1, 0), 1);
        assert_eq!(st.num(1, 0), Some(1));
        let (e, ebar) = st.block(1, 0, 0);
        assert_eq!(e, BTreeSet::from([4, 6]));
        assert_eq!(ebar, BTreeSet::from([8, 10]));
        // The abandoned constant 1^{<1} goes to one fresh program.
        let fresh = r
            .effects
            .iter()
            .filter_map(|e| match e {
                Effect::Rule(Rule::Program { p, d }) => Some((*p, *d)),
                _ => None,
            })
            .collect::<Vec<_>>();
        assert_eq!(fresh.len(), 1);
        assert_eq!(fresh[0].1, Descriptor::finite(1, 1));
        // Only one height level per (i, l).
        assert_eq!(
            trace
                .records
                .iter()
                .filter(|r| r.form == Form::TranslateSingle { i: 1, l: 0 } && r.fired())
                .count(),
            1
        );
    }

    #[test]
    fn height_counts_flags_on_wide_row() {
        // Row 3 programs are 28 + 2*pos; phi_0 hits every block at height 0.
        let script: String = (0..8)
            .map(|k| format!("G 0 0 {k} {}\n", 28 + 4 * k))
            .collect();
        let trace = scripted(Construction::Single, 200, &script);
        let st = trace.final_state();
        assert_eq!(st.height(3, 0), 1);
        assert_eq!(st.num(3, 0), Some(4));
    }

    #[test]
    fn single_refute_splits_row() {
        let code = pair(4, 8);
        let script = format!("{ROW1_TRANSLATE}W 1 20 {code}\n");
        let trace = scripted(Construction::Single, 200, &script);
        let r = fired(&trace, Form::Refute { i: 1 }).expect("refute fires");
        assert!(r.stage > 20);
        let st = trace.final_state();
        assert!(st.r_flags.contains_key(&1));
        let aux_index = |p: u64| match st.descriptor(p) {
            Descriptor::Aux {
                family: Family::Single,
                index,
            } => index,
            d => panic!("{p} computes {d}"),
        };
        let (left, right) = (aux_index(4), aux_index(8));
        assert_eq!(aux_index(6), left);
        assert_eq!(aux_index(10), right);
        assert_ne!(left, right);
        assert!(AuxNumbering::new(Family::Single)
            .separate(left, right)
            .unwrap()
            .is_distinct());
        assert!(!st.in_src(left) && !st.in_src(right));
        // One block pair at height 1: one fresh program takes 1^{<2}.
        let finite: Vec<_> = r
            .effects
            .iter()
            .filter_map(|e| match e {
                Effect::Rule(Rule::Program { d, .. }) => Some(*d),
                _ => None,
            })
            .collect();
        assert_eq!(finite, vec![Descriptor::finite(1, 2)]);
    }

    #[test]
    fn triad_onto_grows_sets() {
        // phi_1 is onto {3, 4} = {3<0,1>, 3<0,1> + 1}.
        let trace = scripted(Construction::Triad, 30, "G 1 0 0 3\nG 1 0 1 4\n");
        let r = fired(&trace, Form::Onto { i: 0, j: 1 }).expect("onto fires");
        assert_eq!(r.stage, pair(1, pair(2, 0)));
        let st = trace.final_state();
        let (e, ebar) = st.block(0, 0, 0);
        assert_eq!(e, BTreeSet::from([3]));
        assert_eq!(ebar, BTreeSet::from([4]));
        assert_eq!(st.descriptor(3), Descriptor::finite(0, 4));
        assert_eq!(st.descriptor(4), Descriptor::finite(0, 4));
    }

    #[test]
    fn triad_refute_after_onto() {
        let code = pair(3, 4);
        let script = format!("G 1 0 0 3\nG 1 0 1 4\nW 0 12 {code}\n");
        let trace = scripted(Construction::Triad, 200, &script);
        let r = fired(&trace, Form::Refute { i: 0 }).expect("refute fires");
        assert!(r.effects.contains(&Effect::RFlag {
            i: 0,
            j: 0,
            p: 3,
            q: 4
        }));
        let st = trace.final_state();
        let (a, b) = (st.descriptor(3), st.descriptor(4));
        assert!(matches!(
            a,
            Descriptor::Aux {
                family: Family::Triad,
                ..
            }
        ));
        assert!(matches!(
            b,
            Descriptor::Aux {
                family: Family::Triad,
                ..
            }
        ));
        assert_ne!(a, b);
        let fresh = r
            .effects
            .iter()
            .find_map(|e| match e {
                Effect::DstRemove(p) => Some(*p),
                _ => None,
            })
            .unwrap();
        assert_eq!(st.descriptor(fresh), Descriptor::Total { value: 0 });
    }

    #[test]
    fn same_config_same_trace() {
        for c in Construction::ALL {
            let config = RunConfig {
                construction: c,
                horizon: 400,
                ..RunConfig::default()
            };
            let a = run(&config, Machine::default()).serialize();
            let b = run(&config, Machine::default()).serialize();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn replay_matches_live_state() {
        let script = format!("{ROW1_TRANSLATE}W 1 20 {}\n", pair(4, 8));
        for c in Construction::ALL {
            let config = RunConfig {
                construction: c,
                horizon: 300,
                ..RunConfig::default()
            };
            let machine = Machine::new(ScriptRegistry::parse(&script).unwrap(), Fallback::Programs);
            let mut engine = Engine::new(config, machine);
            let mut live = Vec::new();
            for _ in 0..300 {
                engine.step();
                live.push(engine.state().clone());
            }
            let trace = engine.into_trace();
            let mut n = 0;
            trace.replay(|phase, state, _| {
                if phase == crate::trace::Phase::After {
                    assert_eq!(state, &live[n], "{c} stage {n}");
                    n += 1;
                }
            });
            assert_eq!(n, 300);
        }
    }

    #[test]
    fn companion_merges_halves() {
        let trace = scripted(Construction::Single, 40, ROW1_TRANSLATE);
        let ceer = companion_ceer(&trace, None).unwrap();
        assert!(ceer.related(4, 6));
        assert!(ceer.related(8, 10));
        assert!(!ceer.related(4, 8));
        let empty = scripted(Construction::Single, 5, "");
        let ceer = companion_ceer(&empty, None).unwrap();
        assert!(ceer.pairs().is_empty());
        assert!(ceer.related(4, 4) && !ceer.related(4, 6));
    }

    #[test]
    fn companion_unites_on_refute() {
        let script = format!("{ROW1_TRANSLATE}W 1 20 {}\n", pair(4, 8));
        let trace = scripted(Construction::Single, 200, &script);
        let ceer = companion_ceer(&trace, None).unwrap();
        assert!(ceer.related(4, 6) && ceer.related(8, 10));
        assert!(!ceer.related(4, 8));
    }

    #[test]
    fn paired_companion_needs_l() {
        let trace = scripted(Construction::Paired, 5, "");
        assert_eq!(
            companion_ceer(&trace, None).unwrap_err(),
            SnapshotError::MissingTranslationIndex
        );
    }

    fn range_prefix(t: &crate::numbering::TranslationSource, n: u64) -> Vec<u64> {
        let env = StandardEnv::new(Machine::default());
        (0..n).map(|p| t.apply(p, 0, &env).unwrap()).collect()
    }

    #[test]
    fn counterexample_avoids_first_block() {
        let fresh = scripted(Construction::Single, 5, "");
        let t = counterexample_t(&infinity_snapshot(&fresh, 1), 1, None).unwrap();
        assert_eq!(range_prefix(&t, 6), vec![0, 1, 2, 3, 5, 6]);
        let merged = scripted(Construction::Single, 40, ROW1_TRANSLATE);
        let t = counterexample_t(&infinity_snapshot(&merged, 10), 1, None).unwrap();
        assert_eq!(range_prefix(&t, 6), vec![0, 1, 2, 3, 5, 7]);
    }

    #[test]
    fn counterexample_requires_stability() {
        let merged = scripted(Construction::Single, 40, ROW1_TRANSLATE);
        let err = counterexample_t(&infinity_snapshot(&merged, 30), 1, None).unwrap_err();
        assert_eq!(
            err,
            SnapshotError::Unstable {
                i: 1,
                j: 0,
                stage: 12
            }
        );
        assert!(err.to_string().starts_with("unstable snapshot"));
    }

    #[test]
    fn snapshot_stability() {
        let quiet = scripted(Construction::Single, 50, "");
        let r = infinity_snapshot(&quiet, 10).row(2, 0);
        assert_eq!((r.height, r.num, r.stable), (0, Some(4), true));
        let trace = scripted(Construction::Single, 1000, ROW1_TRANSLATE);
        let snap = infinity_snapshot(&trace, 100);
        let r = snap.row(1, 0);
        assert_eq!((r.height, r.last_change, r.stable), (1, Some(12), true));
        assert_eq!(snap.changed_rows().len(), 1);
        let short = scripted(Construction::Single, 50, ROW1_TRANSLATE);
        assert!(!infinity_snapshot(&short, 45).row(1, 0).stable);
    }
}
