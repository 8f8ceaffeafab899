//! Built-in scripted instances and the outcomes they are expected to show.
//! Every scenario is a pure function of its name: running one twice gives
//! the same report and the same artifacts.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::aux::{AuxNumbering, StandardEnv};
use crate::ceer::CeerBuilder;
use crate::config::RunConfig;
use crate::engines::{
    companion_ceer, counterexample_t, infinity_snapshot, next_stage, paired_counterexample, run,
    Construction, Effect, Form, Scope,
};
use crate::geometry::{triad, Layout, Row};
use crate::kernel::{pair, Descriptor, EqVerdict};
use crate::machine::{Fallback, Machine, ScriptRegistry};
use crate::numbering::{check_translation, equiv, DescriptorTable, EpsAt, TranslationSource};
use crate::reductions::{
    ceer_from_roundtrip, friedberg_equiv_decider, friedberg_from_decider, lemma10_refine,
    ties_check, translation_from_ceer, Hint, SetSource, TieMode,
};
use crate::trace::check::{check, SUITES};
use crate::trace::render::render_blocks;
use crate::trace::Trace;

pub const BLOCK_EVOLUTION_GOLDEN: &str = include_str!("../tests/golden/block_evolution.txt");

pub const SCENARIOS: [(&str, &str); 11] = [
    (
        "block-evolution",
        "row 3 of the single construction merges twice, then splits; the diagram matches the golden file",
    ),
    ("refute-paired", "a W_i pair crossing a block pair is refuted (paired rows)"),
    ("refute-single", "a W_i pair crossing a block pair is refuted (single rows)"),
    ("refute-triad", "a W_i pair crossing E_i x Ē_i is refuted (triad)"),
    (
        "onto-triad",
        "onto translations grow E_i and Ē_i with one shared constant until W_i splits them",
    ),
    (
        "counterexample-single",
        "the translation avoiding E_{i,0} misses it and the companion ceer never crosses it",
    ),
    (
        "counterexample-paired",
        "the refined row sample, the translation avoiding its first blocks, and the companion ceer",
    ),
    (
        "friedberg-roundtrip",
        "one-to-one numberings extracted from decidable tables translate both ways",
    ),
    (
        "ceer-roundtrip",
        "roundtrip ceers strongly tie their translation and give back a translation",
    ),
    ("refinement", "ten hint-annotated families refine to X with the stated membership"),
    (
        "invariant-battery",
        "10^4-stage runs of every construction against mixed opponents pass every suite",
    ),
];

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ScenarioReport {
    pub name: String,
    pub lines: Vec<String>,
    pub failures: usize,
    /// Named text outputs: traces, diagrams.
    pub artifacts: Vec<(String, String)>,
}

impl ScenarioReport {
    fn new(name: &str) -> Self {
        ScenarioReport {
            name: name.to_string(),
            lines: Vec::new(),
            failures: 0,
            artifacts: Vec::new(),
        }
    }

    pub fn passed(&self) -> bool {
        self.failures == 0
    }

    fn expect(&mut self, ok: bool, what: impl Into<String>) -> bool {
        let what = what.into();
        if ok {
            self.lines.push(format!("ok   {what}"));
        } else {
            self.failures += 1;
            self.lines.push(format!("FAIL {what}"));
        }
        ok
    }

    fn info(&mut self, line: impl Into<String>) {
        self.lines.push(format!("     {}", line.into()));
    }

    fn artifact(&mut self, name: &str, text: String) {
        self.artifacts.push((name.to_string(), text));
    }
}

impl fmt::Display for ScenarioReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for l in &self.lines {
            writeln!(f, "{l}")?;
        }
        let verdict = if self.passed() { "pass" } else { "FAIL" };
        writeln!(f, "scenario {}: {verdict}", self.name)
    }
}

pub fn run_scenario(name: &str) -> Option<ScenarioReport> {
    let report = match name {
        "block-evolution" => block_evolution(),
        "refute-paired" => refute(Construction::Paired),
        "refute-single" => refute(Construction::Single),
        "refute-triad" => refute(Construction::Triad),
        "onto-triad" => onto_triad(),
        "counterexample-single" => counterexample_single(),
        "counterexample-paired" => counterexample_paired(),
        "friedberg-roundtrip" => friedberg_roundtrip(),
        "ceer-roundtrip" => ceer_roundtrip(),
        "refinement" => refinement(),
        "invariant-battery" => invariant_battery(10_000),
        _ => return None,
    };
    Some(report)
}

fn config(construction: Construction, horizon: u64) -> RunConfig {
    RunConfig {
        construction,
        horizon,
        opponents: Fallback::Nowhere,
        ..RunConfig::default()
    }
}

fn scripted_run(config: &RunConfig, script: &str) -> Trace {
    let machine = Machine::new(
        ScriptRegistry::parse(script).expect("built-in scripts parse"),
        config.opponents,
    );
    run(config, machine)
}

fn all_suites(report: &mut ScenarioReport, trace: &Trace) {
    let r = check(trace, &SUITES);
    let failed: Vec<&str> = r.failures().iter().map(|f| f.name).collect();
    report.expect(
        failed.is_empty(),
        format!("invariant suites pass (failed: {failed:?})"),
    );
}

fn first_fired(trace: &Trace, form: Form) -> Option<u64> {
    trace
        .records
        .iter()
        .find(|r| r.form == form && r.fired())
        .map(|r| r.stage)
}

/// One past the first stage of form `form` at or after `from`.
fn horizon_through(from: u64, form: Form, c: Construction) -> u64 {
    next_stage(from, |f| f == form, c) + 1
}

/// Row 3 of the single construction: programs `28 + 2·pos`. `phi_0` hits
/// the `E` half of each of the eight block pairs, `phi_1` each of the four
/// merged ones, and `W_3` finally reveals `<28, 36>`, which crosses the
/// first of the two remaining block pairs.
pub fn block_evolution_script() -> String {
    let mut s = String::new();
    for k in 0..8 {
        s.push_str(&format!("G 0 0 {k} {}\n", 28 + 4 * k));
    }
    for k in 0..4 {
        s.push_str(&format!("G 1 0 {k} {}\n", 28 + 8 * k));
    }
    s.push_str(&format!("W 3 100 {}\n", pair(28, 36)));
    s
}

pub fn block_evolution_trace() -> Trace {
    let code = pair(28, 36);
    let horizon = horizon_through(code + 1, Form::Refute { i: 3 }, Construction::Single);
    scripted_run(
        &config(Construction::Single, horizon),
        &block_evolution_script(),
    )
}

fn block_evolution() -> ScenarioReport {
    let mut report = ScenarioReport::new("block-evolution");
    let trace = block_evolution_trace();
    let mut nums = vec![trace.state_at(0).num(3, 0)];
    for r in &trace.records {
        if r.effects
            .iter()
            .any(|e| matches!(e, Effect::Merge { i: 3, .. }))
        {
            nums.push(trace.state_at(r.stage + 1).num(3, 0));
        }
    }
    report.expect(
        nums == [Some(8), Some(4), Some(2)],
        format!("row 3 goes through 8, 4, 2 block pairs ({nums:?})"),
    );
    let fin = trace.final_state();
    report.expect(fin.r_flags.contains_key(&3), "R-flag 3 fires");
    let aux = |p: u64| match fin.descriptor(p) {
        Descriptor::Aux { index, .. } => Some(index),
        _ => None,
    };
    // Positions 0-3 and 8-11 are E halves at height 2.
    let left: BTreeSet<_> = [0u64, 1, 2, 3, 8, 9, 10, 11]
        .iter()
        .map(|&p| aux(28 + 2 * p))
        .collect();
    let right: BTreeSet<_> = [4u64, 5, 6, 7, 12, 13, 14, 15]
        .iter()
        .map(|&p| aux(28 + 2 * p))
        .collect();
    report.expect(
        left.len() == 1 && right.len() == 1 && left != right && !left.contains(&None),
        "row 3 alternates between two auxiliary functions in runs of four",
    );
    all_suites(&mut report, &trace);
    match render_blocks(&trace, 3, None) {
        Ok(diagram) => {
            report.expect(
                diagram == BLOCK_EVOLUTION_GOLDEN,
                "diagram matches the golden file",
            );
            report.artifact("diagram", diagram);
        }
        Err(e) => {
            report.expect(false, format!("render: {e}"));
        }
    }
    report.artifact("trace", trace.serialize());
    report
}

/// A crossing pair for the refutation scenarios, with the script that
/// reveals it and the refuted index.
fn refute_instance(c: Construction) -> (u64, u64, u64, String) {
    match c {
        Construction::Triad => {
            let (p, q) = triad(0, 1);
            let code = pair(p, q);
            (0, p, q, format!("G 1 0 0 {p}\nG 1 0 1 {q}\nW 0 0 {code}\n"))
        }
        _ => {
            let layout = c.layout().unwrap();
            let (e, ebar) = layout.block(Row::new(1, 0), 0, 0);
            let (p, q) = (e[0], ebar[0]);
            (1, p, q, format!("W 1 0 {}\n", pair(p, q)))
        }
    }
}

fn refute(c: Construction) -> ScenarioReport {
    let mut report = ScenarioReport::new(&format!("refute-{c}"));
    let (i, p, q, script) = refute_instance(c);
    let code = pair(p, q);
    // After the crossing pair is visible, and (triad) after phi_1 fills E_0.
    let from = match c {
        Construction::Triad => code.max(next_stage(0, |f| f == Form::Onto { i, j: 1 }, c)) + 1,
        _ => code + 1,
    };
    let trace = scripted_run(
        &config(c, horizon_through(from, Form::Refute { i }, c)),
        &script,
    );
    report.info(format!("W_{i} reveals <{p}, {q}> = {code}"));
    let stage = first_fired(&trace, Form::Refute { i });
    report.expect(
        stage.is_some(),
        format!("R-flag {i} fires (stage {stage:?})"),
    );
    refuted_pair_checks(&mut report, &trace, c, i, p, q);
    all_suites(&mut report, &trace);
    report.artifact("trace", trace.serialize());
    report
}

/// After an R-flag for `i` with witness `(p, q)`: the two sides compute
/// different auxiliary functions, so `<p, q>` is outside Equiv(psi).
fn refuted_pair_checks(
    report: &mut ScenarioReport,
    trace: &Trace,
    c: Construction,
    i: u64,
    p: u64,
    q: u64,
) {
    let fin = trace.final_state();
    report.expect(
        fin.r_flags.contains_key(&i),
        format!("{i} is R-flagged at the horizon"),
    );
    let (dp, dq) = (fin.descriptor(p), fin.descriptor(q));
    let aux = AuxNumbering::new(c.family());
    let separated = match (dp, dq) {
        (Descriptor::Aux { index: a, .. }, Descriptor::Aux { index: b, .. }) => {
            match aux.separate(a, b) {
                Ok(EqVerdict::Distinct { witness }) => {
                    report.info(format!(
                        "psi_{p} = {dp}, psi_{q} = {dq}, differ at {witness}"
                    ));
                    true
                }
                _ => false,
            }
        }
        _ => false,
    };
    report.expect(
        separated,
        "the two sides carry separated auxiliary functions",
    );
    let env = StandardEnv::with_families(trace.machine(), &[c.family()]);
    let psi = EpsAt {
        eps: &fin.eps,
        version: fin.stage,
    };
    let verdict = equiv(&psi, p, q, 64, &env);
    report.expect(
        matches!(verdict, Ok(EqVerdict::Distinct { .. })),
        format!("<{p}, {q}> is not in Equiv(psi): {verdict:?}"),
    );
}

fn onto_triad() -> ScenarioReport {
    let c = Construction::Triad;
    let mut report = ScenarioReport::new("onto-triad");
    let mut script = String::new();
    for j in 1..=3 {
        let (a, b) = triad(0, j);
        script.push_str(&format!("G {j} 0 0 {a}\nG {j} 0 1 {b}\n"));
    }
    let (p, q) = (triad(0, 3).0, triad(0, 1).1);
    let code = pair(p, q);
    script.push_str(&format!("W 0 0 {code}\n"));
    let last_onto = next_stage(0, |f| f == Form::Onto { i: 0, j: 3 }, c);
    let from = code.max(last_onto) + 1;
    let trace = scripted_run(
        &config(c, horizon_through(from, Form::Refute { i: 0 }, c)),
        &script,
    );
    let refute_at = first_fired(&trace, Form::Refute { i: 0 });
    report.expect(
        refute_at.is_some(),
        format!("R-flag 0 fires (stage {refute_at:?})"),
    );
    let before = trace.state_at(refute_at.unwrap_or(trace.records.len() as u64));
    // E_0 grows at each onto stage.
    let mut sizes = Vec::new();
    for r in &trace.records {
        if r.effects
            .iter()
            .any(|e| matches!(e, Effect::EGrow { i: 0, .. }))
        {
            sizes.push(trace.state_at(r.stage + 1).block(0, 0, 0).0.len());
        }
    }
    report.expect(
        sizes == [1, 2, 3],
        format!("|E_0| strictly increases at each onto stage ({sizes:?})"),
    );
    let (e, ebar) = before.block(0, 0, 0);
    let ds: BTreeSet<Descriptor> = e
        .iter()
        .chain(&ebar)
        .map(|&m| before.descriptor(m))
        .collect();
    report.expect(
        !e.is_empty()
            && !ebar.is_empty()
            && ds.len() == 1
            && matches!(ds.first(), Some(Descriptor::Finite { value: 0, .. })),
        format!("before the flag E_0 = {e:?}, Ē_0 = {ebar:?} share one constant {ds:?}"),
    );
    report.expect(
        e.contains(&p) && ebar.contains(&q),
        "the revealed pair crosses E_0 x Ē_0",
    );
    let fin = trace.final_state();
    let sides = |set: &BTreeSet<u64>| -> BTreeSet<Descriptor> {
        set.iter().map(|&m| fin.descriptor(m)).collect()
    };
    let (de, db) = (sides(&e), sides(&ebar));
    report.expect(
        de.len() == 1
            && db.len() == 1
            && de != db
            && de
                .iter()
                .chain(&db)
                .all(|d| matches!(d, Descriptor::Aux { .. })),
        format!("after the flag E_0 computes {de:?}, Ē_0 computes {db:?}"),
    );
    let fresh = trace.records[refute_at.unwrap_or(0) as usize]
        .effects
        .iter()
        .find_map(|e| match e {
            Effect::DstRemove(m) => Some(*m),
            _ => None,
        });
    report.expect(
        fresh.is_some_and(|m| fin.descriptor(m) == Descriptor::Total { value: 0 }),
        format!("the least fresh program {fresh:?} computes the total constant 0"),
    );
    refuted_pair_checks(&mut report, &trace, c, 0, p, q);
    all_suites(&mut report, &trace);
    report.artifact("trace", trace.serialize());
    report
}

/// Every committed pair of `ceer` stays inside `set` or outside it.
fn respects(ceer: &CeerBuilder, set: &BTreeSet<u64>) -> Option<(u64, u64)> {
    ceer.pairs()
        .iter()
        .copied()
        .find(|(a, b)| set.contains(a) != set.contains(b))
}

/// Checks a counterexample range on `t(0..n)`: increasing, disjoint from
/// `avoid`, and covering every other number up to `t(n-1)`.
fn range_checks(report: &mut ScenarioReport, t: &TranslationSource, avoid: &BTreeSet<u64>, n: u64) {
    let env = StandardEnv::default();
    let values: Vec<u64> = (0..n).filter_map(|p| t.apply(p, 0, &env)).collect();
    report.expect(values.len() as u64 == n, "t is total on the sample");
    let hit: Vec<u64> = values
        .iter()
        .copied()
        .filter(|v| avoid.contains(v))
        .collect();
    report.expect(
        hit.is_empty(),
        format!("rng(t) misses {avoid:?} (hits {hit:?})"),
    );
    let top = values.last().copied().unwrap_or(0);
    let expect: Vec<u64> = (0..=top).filter(|v| !avoid.contains(v)).collect();
    report.expect(
        values == expect,
        format!("rng(t) is everything else up to {top}"),
    );
}

fn soundness(report: &mut ScenarioReport, trace: &Trace, ceer: &CeerBuilder) {
    let fin = trace.final_state();
    let env = StandardEnv::with_families(trace.machine(), &[trace.config.construction.family()]);
    let psi = EpsAt {
        eps: &fin.eps,
        version: fin.stage,
    };
    let bad = ceer
        .pairs()
        .iter()
        .find(|&&(a, b)| !matches!(equiv(&psi, a, b, 64, &env), Ok(EqVerdict::Equal)));
    report.expect(
        bad.is_none(),
        format!(
            "all {} committed companion pairs are program-equivalent (first bad: {bad:?})",
            ceer.pairs().len()
        ),
    );
}

/// Row 3 merged twice, without the refutation.
fn merged_row_trace(window: u64) -> Trace {
    let script: String = block_evolution_script()
        .lines()
        .filter(|l| !l.starts_with('W'))
        .map(|l| format!("{l}\n"))
        .collect();
    let c = Construction::Single;
    let last = next_stage(0, |f| f == Form::TranslateSingle { i: 3, l: 1 }, c);
    let mut cfg = config(c, last + 2 * window);
    cfg.window = window;
    scripted_run(&cfg, &script)
}

fn counterexample_single() -> ScenarioReport {
    let mut report = ScenarioReport::new("counterexample-single");
    let trace = merged_row_trace(100);
    let snap = infinity_snapshot(&trace, trace.config.window);
    let row = snap.row(3, 0);
    report.expect(
        row.stable && row.height == 2,
        format!(
            "row 3 is stable at height {} (last change {:?})",
            row.height, row.last_change
        ),
    );
    // Positions 0..4 of row 3 at height 2.
    let e: BTreeSet<u64> = (0..4).map(|pos| 28 + 2 * pos).collect();
    report.expect(snap.block(3, 0, 0).0 == e, format!("E(3,0) = {e:?}"));
    match counterexample_t(&snap, 3, None) {
        Ok(t) => range_checks(&mut report, &t, &e, 200),
        Err(err) => {
            report.expect(false, err.to_string());
        }
    }
    let ceer = companion_ceer(&trace, None).expect("single companion");
    let crossing = respects(&ceer, &e);
    report.expect(
        crossing.is_none(),
        format!("the companion ceer never relates E(3,0) to its complement ({crossing:?})"),
    );
    soundness(&mut report, &trace, &ceer);
    report.artifact("trace", trace.serialize());
    report
}

/// `phi_0` hits the `E` half of every block pair of the even rows `(2, j)`,
/// `j < 12`; `phi_1` hits nothing.
pub fn paired_rows_trace() -> Trace {
    let c = Construction::Paired;
    let layout = Layout::Paired;
    let mut script = String::new();
    let mut x = 0;
    for j in (0..12).step_by(2) {
        for k in 0..4 {
            let (e, _) = layout.block(Row::new(2, j), 0, k);
            script.push_str(&format!("G 0 0 {x} {}\n", e[0]));
            x += 1;
        }
    }
    let last = next_stage(x, |f| f == Form::Translate { i: 2, j: 10, l: 0 }, c);
    let mut cfg = config(c, last + 200);
    cfg.window = 100;
    scripted_run(&cfg, &script)
}

fn counterexample_paired() -> ScenarioReport {
    let mut report = ScenarioReport::new("counterexample-paired");
    let trace = paired_rows_trace();
    let snap = infinity_snapshot(&trace, trace.config.window);
    let j0: BTreeSet<u64> = snap
        .state
        .t_flags
        .keys()
        .filter(|&&(i, _, l)| i == 2 && l == 0)
        .map(|&(_, j, _)| j)
        .collect();
    report.expect(
        j0 == (0..12).step_by(2).collect(),
        format!("J_0 = {j0:?} at the horizon"),
    );
    let hints = [Hint::Infinite, Hint::Finite { bound: 1 }];
    match paired_counterexample(&snap, 2, &hints, 3) {
        Ok(cx) => {
            report.info(format!("L = {:?}, X starts {:?}", cx.levels, cx.sample));
            let j1: BTreeSet<u64> = BTreeSet::new();
            let member_ok = cx.sample.iter().all(|x| {
                j0.contains(x) == cx.levels.contains(&0) && j1.contains(x) == cx.levels.contains(&1)
            });
            report.expect(member_ok, "x in J_l exactly when l is in L, on the sample");
            // E(2,x,0) at height 1: positions 0 and 1 of row (2,x).
            let mut avoid = BTreeSet::new();
            for &x in &cx.sample {
                let row = Row::new(2, x);
                let h = snap.row(2, x).height;
                let want: BTreeSet<u64> =
                    (0..1u64 << h).map(|pos| 2 * pair(2, 8 * x + pos)).collect();
                report.expect(
                    snap.block(2, x, 0).0 == want
                        && Layout::Paired.program(row, 0) == want.first().copied(),
                    format!("E(2,{x},0) = {want:?}"),
                );
                avoid.extend(want);
            }
            range_checks(&mut report, &cx.t, &avoid, 400);
            let ceer = companion_ceer(&trace, Some(1)).expect("paired companion");
            let crossing = respects(&ceer, &avoid);
            report.expect(
                crossing.is_none(),
                format!("the companion ceer never relates the avoided blocks to other programs ({crossing:?})"),
            );
            soundness(&mut report, &trace, &ceer);
        }
        Err(e) => {
            report.expect(false, e.to_string());
        }
    }
    report.artifact("trace", trace.serialize());
    report
}

/// Outcome of extracting a one-to-one numbering from a decidable table.
pub struct FriedbergCheck {
    pub eta: DescriptorTable,
    pub forward: Vec<u64>,
    pub one_to_one: bool,
    /// `psi -> eta` checked on every program.
    pub backward_equal: bool,
    /// `eta -> psi` checked on every index.
    pub forward_equal: bool,
    /// Pairs where the decider through `eta` disagrees with comparing
    /// descriptors directly.
    pub decider_mismatches: Vec<(u64, u64)>,
}

impl FriedbergCheck {
    pub fn holds(&self) -> bool {
        self.one_to_one
            && self.backward_equal
            && self.forward_equal
            && self.decider_mismatches.is_empty()
    }
}

/// Runs the extraction on a table of constant descriptors, whose program
/// equivalence is decided by comparing normalized descriptors.
pub fn friedberg_check(psi: &DescriptorTable, budget: u64) -> Result<FriedbergCheck, String> {
    if !psi.0.iter().all(Descriptor::is_constant_kind) {
        return Err("the table must hold only empty, fin and tot descriptors".into());
    }
    let env = StandardEnv::default();
    let n = psi.0.len() as u64;
    let oracle = |p: u64, q: u64| psi.0[p as usize].normalized() == psi.0[q as usize].normalized();
    let r = friedberg_from_decider(psi, &oracle, psi.0.len(), n, budget, &env)
        .map_err(|e| e.to_string())?;
    let back: BTreeMap<u64, u64> = (0..n)
        .map(|p| {
            (
                p,
                r.backward(&oracle, p).expect("every program has a class"),
            )
        })
        .collect();
    let t_back = TranslationSource::Table(back);
    let t_fwd = TranslationSource::Table(
        r.forward
            .iter()
            .enumerate()
            .map(|(i, &m)| (i as u64, m))
            .collect(),
    );
    let programs: Vec<u64> = (0..n).collect();
    let indices: Vec<u64> = (0..r.eta.0.len() as u64).collect();
    let b = check_translation(&t_back, psi, &r.eta, &programs, budget, &env)
        .map_err(|e| e.to_string())?;
    let f = check_translation(&t_fwd, &r.eta, psi, &indices, budget, &env)
        .map_err(|e| e.to_string())?;
    let mut mismatches = Vec::new();
    for p in 0..n {
        for q in 0..n {
            let via_eta =
                friedberg_equiv_decider(&t_back, p, q, budget, &env).map_err(|e| e.to_string())?;
            let direct = equiv(psi, p, q, budget, &env).map_err(|e| e.to_string())?;
            if via_eta != direct.is_equal() || matches!(direct, EqVerdict::Unknown { .. }) {
                mismatches.push((p, q));
            }
        }
    }
    Ok(FriedbergCheck {
        one_to_one: r.one_to_one(),
        eta: r.eta,
        forward: r.forward,
        backward_equal: b.all_equal(),
        forward_equal: f.all_equal(),
        decider_mismatches: mismatches,
    })
}

/// Small tables with repeated functions, built from a fixed formula.
fn sample_tables() -> Vec<DescriptorTable> {
    (1..=6u64)
        .map(|n| {
            let size = 8 * n;
            DescriptorTable(
                (0..size)
                    .map(|p| match (p * 7 + n) % 5 {
                        0 => Descriptor::Empty,
                        1 | 2 => Descriptor::finite(p % 3, 1 + p % n),
                        _ => Descriptor::Total { value: p % (n + 1) },
                    })
                    .collect(),
            )
        })
        .collect()
}

fn friedberg_roundtrip() -> ScenarioReport {
    let mut report = ScenarioReport::new("friedberg-roundtrip");
    for (k, psi) in sample_tables().iter().enumerate() {
        match friedberg_check(psi, 16) {
            Ok(c) => {
                report.expect(
                    c.holds(),
                    format!(
                        "table {k}: {} programs, {} classes, one-to-one {}, both translations {} {}, decider mismatches {}",
                        psi.0.len(),
                        c.eta.0.len(),
                        c.one_to_one,
                        c.backward_equal,
                        c.forward_equal,
                        c.decider_mismatches.len()
                    ),
                );
            }
            Err(e) => {
                report.expect(false, format!("table {k}: {e}"));
            }
        }
    }
    report
}

/// A numbering with repetitions, its one-to-one copy, and translations
/// both ways.
pub struct TieInstance {
    pub psi: DescriptorTable,
    pub theta: DescriptorTable,
    /// `theta` index to the least `psi` program computing it.
    pub t: TranslationSource,
    /// `psi` program to its `theta` index.
    pub t_prime: TranslationSource,
}

/// `psi_p = theta_{class(p)}` for `p < size`.
pub fn tie_instance(theta: Vec<Descriptor>, class: impl Fn(u64) -> u64, size: u64) -> TieInstance {
    let classes: Vec<u64> = (0..size).map(&class).collect();
    let psi = DescriptorTable(classes.iter().map(|&c| theta[c as usize]).collect());
    let mut least = BTreeMap::new();
    for (p, &c) in classes.iter().enumerate() {
        least.entry(c).or_insert(p as u64);
    }
    let t_prime = TranslationSource::Table(
        classes
            .iter()
            .enumerate()
            .map(|(p, &c)| (p as u64, c))
            .collect(),
    );
    TieInstance {
        psi,
        theta: DescriptorTable(theta),
        t: TranslationSource::Table(least),
        t_prime,
    }
}

fn tie_instances() -> Vec<(&'static str, TieInstance)> {
    let totals = |n: u64| {
        (0..n)
            .map(|v| Descriptor::Total { value: v })
            .collect::<Vec<_>>()
    };
    let mixed: Vec<Descriptor> = (0..12)
        .map(|v| {
            if v % 2 == 0 {
                Descriptor::finite(v, 3)
            } else {
                Descriptor::Total { value: v }
            }
        })
        .collect();
    vec![
        ("pairs", tie_instance(totals(20), |p| p / 2, 40)),
        (
            "reversed triples",
            tie_instance(totals(10), |p| 9 - p / 3, 30),
        ),
        ("mixed residues", tie_instance(mixed, |p| p % 12, 48)),
    ]
}

fn ceer_roundtrip() -> ScenarioReport {
    let mut report = ScenarioReport::new("ceer-roundtrip");
    let env = StandardEnv::default();
    for (name, inst) in tie_instances() {
        let programs: Vec<u64> = (0..inst.psi.0.len() as u64).collect();
        let rt = ceer_from_roundtrip(&inst.t, &inst.t_prime, &programs, 8, &env);
        let n = programs.len() as u64;
        match ties_check(&rt.ceer, &inst.t, &inst.psi, TieMode::Strong, n, 8, &env) {
            Ok(tie) => {
                report.expect(
                    tie.holds() && rt.divergent.is_empty(),
                    format!("{name}: {tie}"),
                );
            }
            Err(e) => {
                report.expect(false, format!("{name}: {e}"));
            }
        }
        let back: Result<BTreeMap<u64, u64>, _> = programs
            .iter()
            .map(|&p| translation_from_ceer(&rt.ceer, &inst.t, &[], p, n, 8, &env).map(|q| (p, q)))
            .collect();
        match back {
            Ok(back) => {
                let r = check_translation(
                    &TranslationSource::Table(back),
                    &inst.psi,
                    &inst.theta,
                    &programs,
                    8,
                    &env,
                );
                match r {
                    Ok(r) => report.expect(
                        r.distinct == 0 && r.unknown == 0,
                        format!(
                            "{name}: the recovered translation has {} equal, {} distinct verdicts",
                            r.equal, r.distinct
                        ),
                    ),
                    Err(e) => report.expect(false, format!("{name}: {e}")),
                };
            }
            Err(e) => {
                report.expect(false, format!("{name}: {e}"));
            }
        }
    }
    report
}

/// One refinement level: a named decidable set and its hint.
pub type Level = (String, fn(u64) -> bool, Hint);

/// Decidable sets with names, as ground truth for refinement checks.
pub struct Family {
    pub name: &'static str,
    pub sets: Vec<Level>,
    pub infinite_levels: BTreeSet<usize>,
}

fn fam(name: &'static str, sets: Vec<Level>, infinite: &[usize]) -> Family {
    Family {
        name,
        sets,
        infinite_levels: infinite.iter().copied().collect(),
    }
}

pub fn refinement_families() -> Vec<Family> {
    use Hint::*;
    vec![
        fam("evens", vec![("2N".into(), |x| x % 2 == 0, Infinite)], &[0]),
        fam(
            "sixes",
            vec![
                ("2N".into(), |x| x % 2 == 0, Infinite),
                ("3N".into(), |x| x % 3 == 0, Infinite),
            ],
            &[0, 1],
        ),
        fam(
            "below ten",
            vec![("x<10".into(), |x| x < 10, Finite { bound: 10 })],
            &[],
        ),
        fam(
            "tail then fives",
            vec![
                ("x<10".into(), |x| x < 10, Finite { bound: 10 }),
                ("5N".into(), |x| x % 5 == 0, Infinite),
            ],
            &[1],
        ),
        fam(
            "odd residues",
            vec![
                ("2N+1".into(), |x| x % 2 == 1, Infinite),
                ("4N+1".into(), |x| x % 4 == 1, Infinite),
            ],
            &[0, 1],
        ),
        fam(
            "threes, tail, sevens",
            vec![
                ("3N".into(), |x| x % 3 == 0, Infinite),
                ("x<30".into(), |x| x < 30, Finite { bound: 30 }),
                ("7N".into(), |x| x % 7 == 0, Infinite),
            ],
            &[0, 2],
        ),
        fam(
            "evens then odds",
            vec![
                ("2N".into(), |x| x % 2 == 0, Infinite),
                ("2N+1".into(), |x| x % 2 == 1, Finite { bound: 50 }),
            ],
            &[0],
        ),
        fam(
            "four levels",
            vec![
                ("5N".into(), |x| x % 5 == 0, Infinite),
                ("10N".into(), |x| x % 10 == 0, Infinite),
                ("3N".into(), |x| x % 3 == 0, Infinite),
                ("x<100".into(), |x| x < 100, Finite { bound: 100 }),
            ],
            &[0, 1, 2],
        ),
        fam(
            "budgeted",
            vec![
                ("4N".into(), |x| x % 4 == 0, Budgeted { budget: 64 }),
                ("x<8".into(), |x| x < 8, Budgeted { budget: 64 }),
            ],
            &[0],
        ),
        fam("no sets", vec![], &[]),
    ]
}

fn refinement() -> ScenarioReport {
    let mut report = ScenarioReport::new("refinement");
    for f in refinement_families() {
        let sources = f
            .sets
            .iter()
            .map(|(n, g, _)| {
                let g = *g;
                SetSource::decidable(n.clone(), g)
            })
            .collect();
        let hints: Vec<Hint> = f.sets.iter().map(|s| s.2).collect();
        let r = match lemma10_refine(sources, &hints) {
            Ok(r) => r,
            Err(e) => {
                report.expect(false, format!("{}: {e}", f.name));
                continue;
            }
        };
        let xs = match r.first(50) {
            Ok(xs) => xs,
            Err(e) => {
                report.expect(false, format!("{}: {e}", f.name));
                continue;
            }
        };
        let membership = xs.iter().all(|&x| {
            f.sets
                .iter()
                .enumerate()
                .all(|(l, (_, g, _))| g(x) == r.l.contains(&l))
        });
        let top = *xs.last().unwrap();
        let nested = (0..=top).all(|x| {
            (0..r.depth()).all(|k| {
                !r.contains_level(k + 1, x).unwrap_or(false)
                    || r.contains_level(k, x).unwrap_or(false)
            })
        });
        report.expect(
            membership && nested && r.l == f.infinite_levels,
            format!(
                "{}: L = {:?}, X starts {:?}, membership {membership}, nested {nested}",
                f.name,
                r.l,
                &xs[..4.min(xs.len())]
            ),
        );
    }
    report
}

/// Scripts that give every construction something to react to on top of
/// the machine's own programs.
fn mixed_script(c: Construction) -> String {
    match c {
        Construction::Single => block_evolution_script(),
        Construction::Paired => refute_instance(c).3,
        Construction::Triad => {
            let mut s = String::new();
            for j in 1..=3 {
                let (a, b) = triad(0, j);
                s.push_str(&format!("G {j} 0 0 {a}\nG {j} 0 1 {b}\n"));
            }
            s
        }
    }
}

pub fn invariant_battery(horizon: u64) -> ScenarioReport {
    let mut report = ScenarioReport::new("invariant-battery");
    let runs = [
        (Construction::Paired, Scope::TriggerRow),
        (Construction::Paired, Scope::AllRows),
        (Construction::Single, Scope::TriggerRow),
        (Construction::Triad, Scope::TriggerRow),
    ];
    for (c, scope) in runs {
        let cfg = RunConfig {
            construction: c,
            scope,
            horizon,
            ..RunConfig::default()
        };
        let trace = scripted_run(&cfg, &mixed_script(c));
        let r = check(&trace, &SUITES);
        let st = trace.final_state();
        let failed: Vec<String> = r.failures().iter().map(|f| f.name.to_string()).collect();
        report.expect(
            failed.is_empty(),
            format!(
                "{c} {scope}: {horizon} stages, {} R-flags, {} t-flags, failed {failed:?}",
                st.r_flags.len(),
                st.t_flags.len()
            ),
        );
        if !failed.is_empty() {
            report.artifact(&format!("report-{c}-{scope}"), r.to_string());
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn registry_names_resolve() {
        for (name, _) in SCENARIOS {
            if name == "invariant-battery" {
                continue;
            }
            let r = run_scenario(name).unwrap();
            assert!(r.passed(), "{r}");
        }
        assert!(run_scenario("nope").is_none());
    }

    #[test]
    fn short_battery_passes() {
        let r = invariant_battery(600);
        assert!(r.passed(), "{r}");
    }

    #[test]
    fn tie_instance_translations() {
        let inst = tie_instance(
            vec![Descriptor::Total { value: 1 }, Descriptor::Empty],
            |p| p % 2,
            6,
        );
        let env = StandardEnv::default();
        assert_eq!(inst.t.apply(1, 0, &env), Some(1));
        assert_eq!(inst.t_prime.apply(5, 0, &env), Some(1));
    }
}
