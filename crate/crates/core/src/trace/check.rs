//! The invariant battery. Every suite replays the trace from its effects and
//! reports the first violating stage.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use super::{Phase, Trace, TraceRecord};
use crate::aux::StandardEnv;
use crate::engines::{Construction, Effect, EngineState, Form, Scope, ALL_ROWS_SAMPLE};
use crate::geometry::{num, triad, Layout, Row};
use crate::kernel::{extends_descriptor, pair, Descriptor, EqVerdict, EvalEnv};
use crate::machine::ProgramCache;
use crate::numbering::Rule;

pub const SUITES: [&str; 12] = [
    "monotone",
    "flag-shape",
    "height-bound",
    "dst-empty",
    "psi-monotone",
    "merge-law",
    "e-monotone",
    "fixed-rows",
    "flagged-rows",
    "dst-unique",
    "tflag-hits",
    "rflag-witness",
];

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Verdict {
    Pass,
    Fail { stage: Option<u64>, detail: String },
    Skip(String),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CheckResult {
    pub name: &'static str,
    pub verdict: Verdict,
    pub notes: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CheckReport {
    pub results: Vec<CheckResult>,
}

impl CheckReport {
    pub fn all_pass(&self) -> bool {
        self.results
            .iter()
            .all(|r| !matches!(r.verdict, Verdict::Fail { .. }))
    }

    pub fn failures(&self) -> Vec<&CheckResult> {
        self.results
            .iter()
            .filter(|r| matches!(r.verdict, Verdict::Fail { .. }))
            .collect()
    }

    pub fn get(&self, name: &str) -> Option<&CheckResult> {
        self.results.iter().find(|r| r.name == name)
    }
}

impl fmt::Display for CheckReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for r in &self.results {
            match &r.verdict {
                Verdict::Pass => writeln!(f, "PASS {}", r.name)?,
                Verdict::Skip(why) => writeln!(f, "SKIP {}: {why}", r.name)?,
                Verdict::Fail { stage, detail } => match stage {
                    Some(s) => writeln!(f, "FAIL {} at stage {s}: {detail}", r.name)?,
                    None => writeln!(f, "FAIL {}: {detail}", r.name)?,
                },
            }
            for n in &r.notes {
                writeln!(f, "  note: {n}")?;
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CheckOptions {
    pub eq_budget: u64,
    /// Programs examined per rule, per row and per Dst sample.
    pub sample: u64,
}

impl Default for CheckOptions {
    fn default() -> Self {
        CheckOptions {
            eq_budget: 256,
            sample: 256,
        }
    }
}

/// `all`, or a comma-separated list of suite names.
pub fn parse_suites(spec: &str) -> Result<Vec<&'static str>, String> {
    if spec.trim() == "all" {
        return Ok(SUITES.to_vec());
    }
    spec.split(',')
        .map(str::trim)
        .map(|name| {
            SUITES
                .iter()
                .find(|&&s| s == name)
                .copied()
                .ok_or_else(|| format!("unknown suite `{name}`; known: all, {}", SUITES.join(", ")))
        })
        .collect()
}

pub fn check(trace: &Trace, suites: &[&str]) -> CheckReport {
    check_with(trace, suites, CheckOptions::default())
}

pub fn check_with(trace: &Trace, suites: &[&str], opts: CheckOptions) -> CheckReport {
    let mut ctx = Ctx::new(trace, opts);
    let results = suites
        .iter()
        .map(|&name| {
            let name = SUITES
                .iter()
                .find(|&&s| s == name)
                .copied()
                .expect("unknown suite");
            let mut run = Run::default();
            match name {
                "monotone" => ctx.monotone(&mut run),
                "flag-shape" => ctx.flag_shape(&mut run),
                "height-bound" => ctx.height_bound(&mut run),
                "dst-empty" => ctx.dst_empty(&mut run),
                "psi-monotone" => ctx.psi_monotone(&mut run),
                "merge-law" => ctx.merge_law(&mut run),
                "e-monotone" => ctx.e_monotone(&mut run),
                "fixed-rows" => ctx.fixed_rows(&mut run),
                "flagged-rows" => ctx.flagged_rows(&mut run),
                "dst-unique" => ctx.dst_unique(&mut run),
                "tflag-hits" => ctx.tflag_hits(&mut run),
                "rflag-witness" => ctx.rflag_witness(&mut run),
                _ => unreachable!(),
            }
            CheckResult {
                name,
                verdict: run.verdict.unwrap_or(Verdict::Pass),
                notes: run.notes,
            }
        })
        .collect();
    CheckReport { results }
}

#[derive(Default)]
struct Run {
    verdict: Option<Verdict>,
    notes: Vec<String>,
}

impl Run {
    fn fail(&mut self, stage: Option<u64>, detail: impl Into<String>) {
        if self.verdict.is_none() {
            self.verdict = Some(Verdict::Fail {
                stage,
                detail: detail.into(),
            });
        }
    }

    fn failed(&self) -> bool {
        self.verdict.is_some()
    }

    fn skip(&mut self, why: &str) {
        self.verdict = Some(Verdict::Skip(why.into()));
    }

    fn note(&mut self, n: String) {
        if self.notes.len() < 8 {
            self.notes.push(n);
        }
    }
}

struct Ctx<'a> {
    trace: &'a Trace,
    opts: CheckOptions,
    construction: Construction,
    env: StandardEnv,
    cache: ProgramCache,
    fin: EngineState,
}

fn row_of(c: Construction, i: u64, j: u64) -> Row {
    if c == Construction::Single {
        Row::new(i, 0)
    } else {
        Row::new(i, j)
    }
}

fn fmt_desc(d: &Descriptor) -> String {
    d.to_string()
}

impl<'a> Ctx<'a> {
    fn new(trace: &'a Trace, opts: CheckOptions) -> Self {
        let construction = trace.config.construction;
        Ctx {
            trace,
            opts,
            construction,
            env: StandardEnv::with_families(trace.machine(), &[construction.family()]),
            cache: ProgramCache::new(),
            fin: trace.final_state(),
        }
    }

    fn layout(&self) -> Option<Layout> {
        self.construction.layout()
    }

    fn final_version(&self) -> u64 {
        self.fin.stage
    }

    /// The first `sample` programs of a row.
    fn row_programs(&self, row: Row) -> Vec<u64> {
        let layout = self.layout().unwrap();
        let width = row.width().unwrap_or(u64::MAX);
        (0..width.min(self.opts.sample))
            .filter_map(|pos| layout.program(row, pos))
            .collect()
    }

    /// Rows worth examining: every row whose height changed or whose `i` was
    /// R-flagged, plus small rows.
    fn sample_rows(&self) -> BTreeSet<(u64, u64)> {
        let mut rows: BTreeSet<(u64, u64)> = self.fin.heights.keys().copied().collect();
        let js = if self.construction == Construction::Single {
            1
        } else {
            ALL_ROWS_SAMPLE
        };
        for &i in self.fin.r_flags.keys() {
            for j in 0..js {
                rows.insert((i, j));
            }
        }
        for i in 0..5 {
            for j in 0..js.min(3) {
                rows.insert((i, j));
            }
        }
        rows
    }

    fn monotone(&mut self, run: &mut Run) {
        self.trace.replay(|phase, state, rec| {
            if phase != Phase::Before || run.failed() {
                return;
            }
            let s = Some(rec.stage);
            for e in &rec.effects {
                match e {
                    Effect::RFlag { i, .. } if state.r_flags.contains_key(i) => {
                        run.fail(s, format!("R-flag {i} set twice"))
                    }
                    Effect::TFlag { i, j, l } if state.t_flags.contains_key(&(*i, *j, *l)) => {
                        run.fail(s, format!("t-flag ({i},{j},{l}) set twice"))
                    }
                    Effect::SrcRemove(k) if !state.in_src(*k) => {
                        run.fail(s, format!("{k} removed from Src but not in Src"))
                    }
                    Effect::DstRemove(p) if !state.dst.contains(*p) => {
                        run.fail(s, format!("{p} removed from Dst but not in Dst"))
                    }
                    Effect::Merge { i, j, height } if *height < state.height(*i, *j) => {
                        run.fail(s, format!("height of ({i},{j}) drops to {height}"))
                    }
                    Effect::EGrow { i, p } | Effect::EbarGrow { i, p } => {
                        let set = if matches!(e, Effect::EGrow { .. }) {
                            &state.e_sets
                        } else {
                            &state.ebar_sets
                        };
                        if set.get(i).is_some_and(|s| s.contains(p)) {
                            run.fail(s, format!("{p} added to a set of {i} twice"));
                        }
                    }
                    _ => {}
                }
            }
        });
    }

    fn flag_shape(&mut self, run: &mut Run) {
        let c = self.construction;
        for rec in &self.trace.records {
            let s = Some(rec.stage);
            for e in &rec.effects {
                match (*e).clone() {
                    Effect::TFlag { i, j, l } => {
                        let ok = match (c, rec.form) {
                            (
                                Construction::Paired,
                                Form::Translate {
                                    i: fi,
                                    j: fj,
                                    l: fl,
                                },
                            ) => (fi, fj, fl) == (i, j, l) && l < i,
                            (Construction::Single, Form::TranslateSingle { i: fi, l: fl }) => {
                                (fi, fl) == (i, l) && j == 0 && l < i
                            }
                            (Construction::Triad, Form::Onto { i: fi, j: fj }) => {
                                (fi, fj) == (i, j) && l == 0
                            }
                            _ => false,
                        };
                        if !ok {
                            run.fail(s, format!("t-flag ({i},{j},{l}) at form {}", rec.form));
                        }
                    }
                    Effect::RFlag { i, .. } if rec.form != (Form::Refute { i }) => {
                        run.fail(s, format!("R-flag {i} at form {}", rec.form));
                    }
                    _ => {}
                }
            }
        }
    }

    fn height_bound(&mut self, run: &mut Run) {
        if self.construction == Construction::Triad {
            return run.skip("no rows in the triad construction");
        }
        let c = self.construction;
        self.trace.replay(|phase, state, rec| {
            if phase != Phase::After || run.failed() {
                return;
            }
            let rows: BTreeSet<(u64, u64)> = rec
                .effects
                .iter()
                .filter_map(|e| match e {
                    Effect::Merge { i, j, .. } | Effect::TFlag { i, j, .. } => {
                        let row = row_of(c, *i, *j);
                        Some((row.i, row.j))
                    }
                    _ => None,
                })
                .collect();
            for (i, j) in rows {
                let height = state.height(i, j);
                let flags = state
                    .t_flags
                    .keys()
                    .filter(|&&(fi, fj, _)| (fi, fj) == (i, j))
                    .count() as u32;
                if u64::from(height) > i {
                    run.fail(
                        Some(rec.stage),
                        format!("height {height} of ({i},{j}) exceeds {i}"),
                    );
                } else if flags != height {
                    run.fail(
                        Some(rec.stage),
                        format!("height {height} of ({i},{j}) but {flags} t-flags"),
                    );
                }
            }
        });
    }

    fn dst_empty(&mut self, run: &mut Run) {
        let sample = self.opts.sample;
        self.trace.replay(|phase, state, rec| {
            if phase != Phase::Before || run.failed() {
                return;
            }
            let v = rec.stage;
            let check = |p: u64, run: &mut Run| match state.eps.lookup(p, v) {
                Ok(Descriptor::Empty) => {}
                Ok(d) => run.fail(Some(v), format!("{p} left Dst computing {}", fmt_desc(&d))),
                Err(e) => run.fail(Some(v), e.to_string()),
            };
            for e in &rec.effects {
                match e {
                    Effect::DstRemove(p) => check(*p, run),
                    Effect::DstThin => {
                        for k in 0..sample {
                            check(state.dst.select(2 * k), run);
                        }
                    }
                    _ => {}
                }
            }
        });
        if run.failed() {
            return;
        }
        for k in 0..sample {
            let p = self.fin.dst.select(k);
            match self.fin.eps.lookup(p, self.final_version()) {
                Ok(Descriptor::Empty) => {}
                Ok(d) => return run.fail(None, format!("{p} is in Dst but computes {d}")),
                Err(e) => return run.fail(None, e.to_string()),
            }
        }
    }

    fn programs_of_rule(&self, rule: &Rule, rec: &TraceRecord) -> (Vec<u64>, Vec<u64>) {
        // (checked programs, exempt programs)
        let layout = self.layout();
        match rule {
            Rule::Program { p, .. } => (vec![*p], vec![]),
            Rule::Row { row, .. } | Rule::RowAux { row, .. } => (self.row_programs(*row), vec![]),
            Rule::RowsAux { i, heights, .. } => {
                let trigger = rec.effects.iter().find_map(|e| match e {
                    Effect::RFlag { j, .. } => Some(*j),
                    _ => None,
                });
                let overwrite = rec
                    .effects
                    .iter()
                    .any(|e| matches!(e, Effect::Overwrite { i: oi } if oi == i));
                let mut rows: BTreeSet<u64> = heights.keys().copied().collect();
                rows.extend(0..ALL_ROWS_SAMPLE);
                let (mut checked, mut exempt) = (Vec::new(), Vec::new());
                for j in rows {
                    let progs = self.row_programs(Row::new(*i, j));
                    if overwrite && Some(j) != trigger {
                        exempt.extend(progs);
                    } else {
                        checked.extend(progs);
                    }
                }
                (checked, exempt)
            }
            Rule::FreshRows { dst, .. } => (
                (0..self.opts.sample).map(|k| dst.select(2 * k)).collect(),
                vec![],
            ),
            Rule::RowBase { .. } | Rule::TriadBase | Rule::Residue { .. } => {
                let _ = layout;
                ((0..self.opts.sample).collect(), vec![])
            }
        }
    }

    fn psi_monotone(&mut self, run: &mut Run) {
        let budget = self.opts.eq_budget;
        let mut exempted = 0usize;
        let mut unknown = 0usize;
        let records = &self.trace.records;
        // Programs touched by each record, computed up front.
        let touched: Vec<(Vec<u64>, Vec<u64>)> = records
            .iter()
            .map(|rec| {
                let mut checked = BTreeSet::new();
                let mut exempt = BTreeSet::new();
                for e in &rec.effects {
                    if let Effect::Rule(rule) = e {
                        let (c, x) = self.programs_of_rule(rule, rec);
                        checked.extend(c);
                        exempt.extend(x);
                    }
                }
                (checked.into_iter().collect(), exempt.into_iter().collect())
            })
            .collect();
        let env = &self.env;
        self.trace.replay(|phase, state, rec| {
            if phase != Phase::After || run.failed() {
                return;
            }
            let s = rec.stage;
            let (checked, exempt) = &touched[s as usize];
            if !exempt.is_empty() {
                exempted += exempt.len();
            }
            for &p in checked {
                let (Ok(prev), Ok(next)) = (state.eps.lookup(p, s), state.eps.lookup(p, s + 1))
                else {
                    run.fail(Some(s), format!("no descriptor for {p}"));
                    return;
                };
                if prev == next {
                    continue;
                }
                match extends_descriptor(&prev, &next, budget, env) {
                    Ok(EqVerdict::Equal) => {}
                    Ok(EqVerdict::Unknown { .. }) => unknown += 1,
                    Ok(EqVerdict::Distinct { witness }) => run.fail(
                        Some(s),
                        format!("{p}: {prev} is not extended by {next} (input {witness})"),
                    ),
                    Err(e) => run.fail(Some(s), e.to_string()),
                }
            }
        });
        if exempted > 0 {
            run.note(format!(
                "{exempted} overwritten programs of all-rows R-flags exempted"
            ));
        }
        if unknown > 0 {
            run.note(format!(
                "{unknown} comparisons undecided within budget {budget}"
            ));
        }
    }

    fn merge_law(&mut self, run: &mut Run) {
        let Some(layout) = self.layout() else {
            return run.skip("no rows in the triad construction");
        };
        let c = self.construction;
        let sample = self.opts.sample;
        let mut before: BTreeMap<(u64, u64), u32> = BTreeMap::new();
        self.trace.replay(|phase, state, rec| {
            if run.failed() {
                return;
            }
            let merges: Vec<(u64, u64, u32)> = rec
                .effects
                .iter()
                .filter_map(|e| match e {
                    Effect::Merge { i, j, height } => Some((*i, *j, *height)),
                    _ => None,
                })
                .collect();
            if merges.is_empty() {
                return;
            }
            let s = Some(rec.stage);
            if phase == Phase::Before {
                before = merges
                    .iter()
                    .map(|&(i, j, _)| ((i, j), state.height(i, j)))
                    .collect();
                return;
            }
            for (i, j, h1) in merges {
                let row = row_of(c, i, j);
                let h = before[&(i, j)];
                if h1 != h + 1 {
                    return run.fail(s, format!("({i},{j}) height {h} -> {h1}"));
                }
                let flagged = rec.effects.iter().any(
                    |e| matches!(e, Effect::TFlag { i: fi, j: fj, .. } if (*fi, *fj) == (i, j)),
                );
                if !flagged {
                    return run.fail(s, format!("({i},{j}) merged without a t-flag"));
                }
                // Blocks at h + 1 from the positions directly.
                let flags = state
                    .t_flags
                    .keys()
                    .filter(|&&(fi, fj, _)| (fi, fj) == (i, j))
                    .count() as u32;
                let half = 1u64 << flags;
                let Some(n1) = num(i, h1) else {
                    return run.fail(s, format!("row ({i},{j}) too wide"));
                };
                for k in 0..n1 {
                    let base = k * 2 * half;
                    let at = |pos: u64| layout.program(row, pos).unwrap();
                    let e1: BTreeSet<u64> = (base..base + half).map(at).collect();
                    let eb1: BTreeSet<u64> = (base + half..base + 2 * half).map(at).collect();
                    let (a0, b0) = layout.block_sets(row, h, 2 * k);
                    let (a1, b1) = layout.block_sets(row, h, 2 * k + 1);
                    let u0: BTreeSet<u64> = a0.union(&b0).copied().collect();
                    let u1: BTreeSet<u64> = a1.union(&b1).copied().collect();
                    if e1 != u0 || eb1 != u1 {
                        return run.fail(
                            s,
                            format!(
                                "block {k} of ({i},{j}) is not the union of blocks {} and {}",
                                2 * k,
                                2 * k + 1
                            ),
                        );
                    }
                    let want = Descriptor::finite(layout.row_value(row), (k + 1) << h1);
                    for &p in e1.iter().chain(&eb1).take(sample as usize) {
                        match state.eps.lookup(p, rec.stage + 1) {
                            Ok(d) if d == want => {}
                            Ok(d) => {
                                return run.fail(
                                    s,
                                    format!(
                                        "{p} in merged block {k} computes {d}, expected {want}"
                                    ),
                                )
                            }
                            Err(e) => return run.fail(s, e.to_string()),
                        }
                    }
                }
            }
        });
    }

    fn e_monotone(&mut self, run: &mut Run) {
        if self.construction != Construction::Triad {
            return run.skip("E/Ē sets are constructed only in the triad construction");
        }
        self.trace.replay(|phase, state, rec| {
            if run.failed() {
                return;
            }
            let s = Some(rec.stage);
            if phase == Phase::After {
                for (i, e) in &state.e_sets {
                    let eb = state.ebar_sets.get(i).map_or(0, |x| x.len());
                    if e.len() != eb {
                        return run.fail(s, format!("|E_{i}| = {} but |Ē_{i}| = {eb}", e.len()));
                    }
                }
                return;
            }
            for e in &rec.effects {
                let (i, p, side) = match e {
                    Effect::EGrow { i, p } => (*i, *p, 0),
                    Effect::EbarGrow { i, p } => (*i, *p, 1),
                    _ => continue,
                };
                if state.r_flags.contains_key(&i) {
                    return run.fail(s, format!("E/Ē of R-flagged {i} grew"));
                }
                let ok = rec.effects.iter().any(|f| match f {
                    Effect::TFlag { i: fi, j, .. } if *fi == i => {
                        let (a, b) = triad(i, *j);
                        p == if side == 0 { a } else { b }
                    }
                    _ => false,
                });
                if !ok {
                    return run.fail(s, format!("{p} joined a set of {i} without its t-flag"));
                }
            }
        });
    }

    /// Rows whose programs still compute the block constants at the horizon.
    fn is_fixed_row(&self, i: u64, j: u64) -> bool {
        match self.fin.r_flags.get(&i) {
            None => true,
            Some(_) => match (self.construction, self.fin.scope) {
                (Construction::Paired, Scope::TriggerRow) => !self.trace.records.iter().any(|r| {
                    r.effects.iter().any(
                        |e| matches!(e, Effect::RFlag { i: fi, j: fj, .. } if (*fi, *fj) == (i, j)),
                    )
                }),
                _ => false,
            },
        }
    }

    fn fixed_rows(&mut self, run: &mut Run) {
        let v = self.final_version();
        if self.construction == Construction::Triad {
            // Members of E_i ∪ Ē_i for unflagged i share one finite constant.
            for (i, e) in &self.fin.e_sets {
                if self.fin.r_flags.contains_key(i) {
                    continue;
                }
                let members: Vec<u64> = e
                    .iter()
                    .chain(self.fin.ebar_sets.get(i).into_iter().flatten())
                    .copied()
                    .collect();
                let ds: BTreeSet<Descriptor> = members
                    .iter()
                    .map(|&p| self.fin.eps.lookup(p, v).unwrap())
                    .collect();
                if ds.len() != 1
                    || !matches!(ds.first(), Some(Descriptor::Finite { value, .. }) if value == i)
                {
                    return run.fail(None, format!("members of E_{i}/Ē_{i} compute {ds:?}"));
                }
            }
            return;
        }
        let layout = self.layout().unwrap();
        for (i, j) in self.sample_rows() {
            if !self.is_fixed_row(i, j) {
                continue;
            }
            let row = row_of(self.construction, i, j);
            let h = self.fin.height(i, row.j);
            let Some(n) = num(i, h) else { continue };
            let mut seen = 0;
            'blocks: for k in 0..n {
                let want = Descriptor::finite(layout.row_value(row), (k + 1) << h);
                let (e, eb) = layout.block(row, h, k);
                for p in e.into_iter().chain(eb) {
                    seen += 1;
                    if seen > self.opts.sample {
                        break 'blocks;
                    }
                    match self.fin.eps.lookup(p, v) {
                        Ok(d) if d == want => {}
                        Ok(d) => {
                            return run.fail(
                                None,
                                format!(
                                    "{p} in block {k} of ({i},{}) computes {d}, expected {want}",
                                    row.j
                                ),
                            )
                        }
                        Err(e) => return run.fail(None, e.to_string()),
                    }
                }
            }
        }
    }

    fn flagged_rows(&mut self, run: &mut Run) {
        let v = self.final_version();
        let c = self.construction;
        let fin = &self.fin;
        let sample = self.opts.sample as usize;
        let layout = self.layout();
        let rows_of = |_i: u64, j: u64| -> Vec<u64> {
            match (c, fin.scope) {
                (Construction::Paired, Scope::AllRows) => {
                    let mut v: BTreeSet<u64> = (0..ALL_ROWS_SAMPLE).collect();
                    v.insert(j);
                    v.into_iter().collect()
                }
                _ => vec![j],
            }
        };
        let mut any = false;
        self.trace.replay(|phase, state, rec| {
            if phase != Phase::Before || run.failed() {
                return;
            }
            for e in &rec.effects {
                let Effect::RFlag { i, j, .. } = e else {
                    continue;
                };
                any = true;
                let s = Some(rec.stage);
                let (mut left, mut right) = (Vec::new(), Vec::new());
                match layout {
                    Some(layout) => {
                        for rj in rows_of(*i, *j) {
                            let row = row_of(c, *i, rj);
                            let h = state.height(*i, row.j);
                            for k in 0..num(*i, h).unwrap() {
                                let (a, b) = layout.block(row, h, k);
                                left.extend(a);
                                right.extend(b);
                            }
                        }
                    }
                    None => {
                        let (a, b) = state.block(*i, 0, 0);
                        left.extend(a);
                        right.extend(b);
                    }
                }
                let index_of = |side: &[u64]| -> Result<BTreeSet<u64>, String> {
                    side.iter()
                        .take(sample)
                        .map(|&p| match fin.eps.lookup(p, v) {
                            Ok(Descriptor::Aux { index, .. }) => Ok(index),
                            Ok(d) => Err(format!("{p} computes {d}, not an auxiliary function")),
                            Err(e) => Err(e.to_string()),
                        })
                        .collect()
                };
                match (index_of(&left), index_of(&right)) {
                    (Ok(a), Ok(b)) => {
                        if a.len() != 1 || b.len() != 1 || a == b {
                            run.fail(
                                s,
                                format!("R-flag {i}: E side computes {a:?}, Ē side {b:?}"),
                            );
                        }
                    }
                    (Err(m), _) | (_, Err(m)) => run.fail(s, format!("R-flag {i}: {m}")),
                }
            }
        });
        if !any && !run.failed() {
            run.note("no R-flags in this trace".into());
        }
    }

    fn dst_unique(&mut self, run: &mut Run) {
        let v = self.final_version();
        let mut assigned: Vec<u64> = Vec::new();
        let mut thinned: Vec<u64> = Vec::new();
        for rec in &self.trace.records {
            for e in &rec.effects {
                match e {
                    Effect::DstRemove(p) => assigned.push(*p),
                    Effect::Rule(Rule::FreshRows { dst, .. }) => {
                        thinned.extend((0..self.opts.sample.min(64)).map(|k| dst.select(2 * k)))
                    }
                    _ => {}
                }
            }
        }
        assigned.extend(thinned);
        // Members of unflagged triad sets compute λx.i in the limit.
        let limit_members: BTreeSet<u64> = if self.construction == Construction::Triad {
            self.fin
                .e_sets
                .iter()
                .chain(&self.fin.ebar_sets)
                .filter(|(i, _)| !self.fin.r_flags.contains_key(i))
                .flat_map(|(_, s)| s.iter().copied())
                .collect()
        } else {
            BTreeSet::new()
        };
        let mut owners: BTreeMap<Descriptor, u64> = BTreeMap::new();
        for &p in &assigned {
            let d = self.fin.eps.lookup(p, v).unwrap().normalized();
            if let Some(q) = owners.insert(d, p) {
                return run.fail(None, format!("fresh programs {q} and {p} both compute {d}"));
            }
        }
        let mut others: Vec<u64> = Vec::new();
        match self.layout() {
            Some(_) => {
                for (i, j) in self.sample_rows() {
                    others.extend(self.row_programs(row_of(self.construction, i, j)));
                }
            }
            None => {
                for i in 0..6 {
                    for j in 0..6 {
                        let (a, b) = triad(i, j);
                        others.extend([a, b]);
                    }
                }
                others.extend(self.fin.e_sets.values().flatten());
                others.extend(self.fin.ebar_sets.values().flatten());
            }
        }
        for q in others {
            if limit_members.contains(&q) {
                continue;
            }
            let d = self.fin.eps.lookup(q, v).unwrap().normalized();
            if let Some(&p) = owners.get(&d) {
                if p != q {
                    return run.fail(None, format!("fresh program {p} and {q} both compute {d}"));
                }
            }
        }
    }

    fn tflag_hits(&mut self, run: &mut Run) {
        let machine = &self.env.machine;
        for (&(i, j, l), &s) in &self.fin.t_flags {
            match self.construction.layout() {
                Some(layout) => {
                    let row = row_of(self.construction, i, j);
                    let h = self.fin.height(i, row.j);
                    let range = self.cache.range(machine, l, s);
                    let n = num(i, h).unwrap();
                    for k in 0..n {
                        let (e, eb) = layout.block_sets(row, h, k);
                        if e.is_disjoint(&range) || eb.is_disjoint(&range) {
                            return run.fail(
                                Some(s),
                                format!(
                                    "t-flag ({i},{j},{l}): rng(phi_{l}) misses a half of block {k}"
                                ),
                            );
                        }
                    }
                }
                None => {
                    let (a, b) = triad(i, j);
                    if !(self.cache.range_contains(machine, j, s, a)
                        && self.cache.range_contains(machine, j, s, b))
                    {
                        return run.fail(
                            Some(s),
                            format!("t-flag ({i},{j}): {a} or {b} not in rng(phi_{j})"),
                        );
                    }
                }
            }
        }
    }

    fn rflag_witness(&mut self, run: &mut Run) {
        let v = self.final_version();
        let budget = self.opts.eq_budget;
        let c = self.construction;
        let mut witnesses = Vec::new();
        let mut flags = Vec::new();
        self.trace.replay(|phase, state, rec| {
            if phase != Phase::Before {
                return;
            }
            for e in &rec.effects {
                if let Effect::RFlag { i, j, p, q } = e {
                    let crosses = match c.layout() {
                        Some(_) => {
                            let row = row_of(c, *i, *j);
                            let h = state.height(*i, row.j);
                            (0..num(*i, h).unwrap_or(0)).any(|k| {
                                let (a, b) = c.layout().unwrap().block_sets(row, h, k);
                                a.contains(p) && b.contains(q)
                            })
                        }
                        None => {
                            let (a, b) = state.block(*i, 0, 0);
                            a.contains(p) && b.contains(q)
                        }
                    };
                    flags.push((rec.stage, *i, *p, *q, crosses));
                }
            }
        });
        for (s, i, p, q, crosses) in flags {
            if !crosses {
                return run.fail(
                    Some(s),
                    format!("R-flag {i}: ({p},{q}) does not cross a block pair"),
                );
            }
            let code = pair(p, q);
            if !self.cache.domain(&self.env.machine, i, s).contains(&code) {
                return run.fail(
                    Some(s),
                    format!("R-flag {i}: <{p},{q}> = {code} not in W_{i}"),
                );
            }
            let (dp, dq) = (
                self.fin.eps.lookup(p, v).unwrap(),
                self.fin.eps.lookup(q, v).unwrap(),
            );
            match (dp, dq) {
                (
                    Descriptor::Aux { family, index: a },
                    Descriptor::Aux {
                        family: fb,
                        index: b,
                    },
                ) if family == fb && a != b => match self.env.aux_separate(family, a, b, budget) {
                    Ok(EqVerdict::Distinct { witness }) => witnesses.push(format!(
                        "R-flag {i}: psi_{p} = aux({family},{a}) and psi_{q} = aux({family},{b}) differ at {witness}"
                    )),
                    other => {
                        return run.fail(Some(s), format!("R-flag {i}: cannot separate {a} and {b}: {other:?}"))
                    }
                },
                _ => {
                    return run.fail(Some(s), format!("R-flag {i}: psi_{p} = {dp}, psi_{q} = {dq}"))
                }
            }
        }
        for w in witnesses {
            run.note(w);
        }
    }
}
