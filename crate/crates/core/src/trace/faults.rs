//! Planted-fault fixtures: small healthy traces, each corrupted so that
//! exactly one invariant suite fails. Used to test the checker and by
//! `epsw check` demos.

use super::{Status, Trace};
use crate::aux::Family;
use crate::config::RunConfig;
use crate::engines::{run, Construction, Effect, Form};
use crate::kernel::{pair, Descriptor};
use crate::machine::{Fallback, Machine, ScriptRegistry};
use crate::numbering::Rule;

/// `phi_0` hits the `E` half of both block pairs of row 1 (programs 4, 8).
const HALVES: &str = "G 0 0 0 4\nG 0 0 1 8";
/// `phi_0` hits every program of row 1.
const WHOLE_ROW: &str = "G 0 0 0 4\nG 0 0 1 6\nG 0 0 2 8\nG 0 0 3 10";

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

/// Single construction: `phi_0` merges row 1.
pub fn translate_trace() -> Trace {
    scripted(Construction::Single, 40, HALVES)
}

/// Single construction: row 1 merges, then `W_1` reveals `<4, 8>` and row 1
/// is split between two auxiliary functions.
pub fn refute_trace() -> Trace {
    let script = format!("{HALVES}\nW 1 20 {}", pair(4, 8));
    scripted(Construction::Single, 200, &script)
}

/// Triad construction: `phi_1` is onto `{3, 4}`.
pub fn onto_trace() -> Trace {
    scripted(Construction::Triad, 40, "G 1 0 0 3\nG 1 0 1 4")
}

fn stage_of(trace: &Trace, form: Form) -> usize {
    trace
        .records
        .iter()
        .position(|r| r.form == form && r.fired())
        .expect("fixture stage fired")
}

fn first_idle_after(trace: &Trace, stage: usize) -> usize {
    (stage + 1..trace.records.len())
        .find(|&s| trace.records[s].status == Status::Idle)
        .expect("an idle stage")
}

fn set_effects(trace: &mut Trace, stage: usize, effects: Vec<Effect>) {
    let r = &mut trace.records[stage];
    r.status = if effects.is_empty() {
        Status::Idle
    } else {
        Status::Fired
    };
    r.effects = effects;
}

fn push_effect(trace: &mut Trace, stage: usize, effect: Effect) {
    let mut fx = trace.records[stage].effects.clone();
    fx.push(effect);
    set_effects(trace, stage, fx);
}

const TRANSLATE: Form = Form::TranslateSingle { i: 1, l: 0 };
const REFUTE: Form = Form::Refute { i: 1 };

/// A trace that fails `suite` and no other suite, or `None` for an unknown
/// suite name.
pub fn planted(suite: &str) -> Option<Trace> {
    let t = match suite {
        // Src loses 0 twice.
        "monotone" => {
            let mut t = translate_trace();
            push_effect(&mut t, 1, Effect::SrcRemove(0));
            t
        }
        // The translation's effects land on an earlier refutation stage.
        "flag-shape" => {
            let mut t = translate_trace();
            let s = stage_of(&t, TRANSLATE);
            let fx = t.records[s].effects.clone();
            set_effects(&mut t, s, Vec::new());
            let early = (0..s)
                .find(|&k| matches!(t.records[k].form, Form::Refute { .. }))
                .unwrap();
            set_effects(&mut t, early, fx);
            t
        }
        // A t-flag without its merge.
        "height-bound" => {
            let mut t = scripted(Construction::Single, 40, WHOLE_ROW);
            let s = stage_of(&t, TRANSLATE);
            set_effects(&mut t, s, vec![Effect::TFlag { i: 1, j: 0, l: 0 }]);
            t
        }
        // Program 5 gets alpha_2 but only leaves Dst later.
        "dst-empty" => {
            let mut t = translate_trace();
            let s = stage_of(&t, Form::Assign { l: 2 });
            let fx: Vec<Effect> = t.records[s]
                .effects
                .iter()
                .filter(|e| !matches!(e, Effect::DstRemove(_)))
                .cloned()
                .collect();
            set_effects(&mut t, s, fx);
            let later = first_idle_after(&t, s);
            push_effect(&mut t, later, Effect::DstRemove(5));
            t
        }
        // A fresh program's finite constant is replaced by another value.
        "psi-monotone" => {
            let mut t = translate_trace();
            let s = stage_of(&t, TRANSLATE);
            let q = t.records[s]
                .effects
                .iter()
                .find_map(|e| match e {
                    Effect::DstRemove(q) => Some(*q),
                    _ => None,
                })
                .unwrap();
            let later = first_idle_after(&t, s);
            push_effect(
                &mut t,
                later,
                Effect::Rule(Rule::Program {
                    p: q,
                    d: Descriptor::finite(90, 1),
                }),
            );
            t
        }
        // The merge keeps the old block constants.
        "merge-law" => {
            let mut t = refute_trace();
            let s = stage_of(&t, TRANSLATE);
            let fx = t.records[s]
                .effects
                .iter()
                .filter(|e| !matches!(e, Effect::Rule(Rule::Row { .. })))
                .cloned()
                .collect();
            set_effects(&mut t, s, fx);
            t
        }
        // E_0 and Ē_0 grow one stage after their t-flag.
        "e-monotone" => {
            let mut t = onto_trace();
            let s = stage_of(&t, Form::Onto { i: 0, j: 1 });
            let (grow, rest): (Vec<Effect>, Vec<Effect>) = t.records[s]
                .effects
                .iter()
                .cloned()
                .partition(|e| matches!(e, Effect::EGrow { .. } | Effect::EbarGrow { .. }));
            set_effects(&mut t, s, rest);
            let later = first_idle_after(&t, s);
            set_effects(&mut t, later, grow);
            t
        }
        // A block program of a never-flagged row computes a longer constant.
        "fixed-rows" => {
            let mut t = translate_trace();
            let later = first_idle_after(&t, stage_of(&t, TRANSLATE));
            push_effect(
                &mut t,
                later,
                Effect::Rule(Rule::Program {
                    p: 6,
                    d: Descriptor::finite(1, 7),
                }),
            );
            t
        }
        // The Ē half of a refuted row computes both auxiliary functions.
        "flagged-rows" => {
            let mut t = refute_trace();
            let s = stage_of(&t, REFUTE);
            let mut fx = Vec::new();
            for e in &t.records[s].effects {
                match e {
                    Effect::Rule(Rule::RowAux {
                        family,
                        left,
                        right,
                        ..
                    }) => {
                        for (p, index) in [(4, *left), (6, *left), (8, *right), (10, *left)] {
                            fx.push(Effect::Rule(Rule::Program {
                                p,
                                d: Descriptor::Aux {
                                    family: *family,
                                    index,
                                },
                            }));
                        }
                    }
                    e => fx.push(e.clone()),
                }
            }
            set_effects(&mut t, s, fx);
            t
        }
        // Two assignments hand out the same auxiliary function.
        "dst-unique" => {
            let mut t = translate_trace();
            let s = stage_of(&t, Form::Assign { l: 1 });
            let fx = t.records[s]
                .effects
                .iter()
                .map(|e| match e {
                    Effect::Rule(Rule::Program { p, .. }) => Effect::Rule(Rule::Program {
                        p: *p,
                        d: Descriptor::Aux {
                            family: Family::Single,
                            index: 0,
                        },
                    }),
                    e => e.clone(),
                })
                .collect();
            set_effects(&mut t, s, fx);
            t
        }
        // phi_0 never reaches block pair 1.
        "tflag-hits" => {
            let mut t = translate_trace();
            t.scripts.retain(|s| s != "G 0 0 1 8");
            t
        }
        // W_1 never enumerates the witness pair.
        "rflag-witness" => {
            let mut t = refute_trace();
            t.scripts.retain(|s| !s.starts_with("W 1"));
            t
        }
        _ => return None,
    };
    Some(t)
}
