//! Read-only views of finished runs: the companion ceers, horizon snapshots
//! standing in for limit quantities, and the counterexample translations.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use super::{Construction, Effect, EngineState, Scope};
use crate::ceer::CeerBuilder;
use crate::geometry::{num, Layout, Row};
use crate::numbering::TranslationSource;
use crate::reductions::{lemma10_refine, Hint, LevelLog, ReductionError, SetSource};
use crate::trace::{Phase, Trace};

/// Rows `j < ALL_ROWS_SAMPLE` stand in for "every row" when a companion ceer
/// or a checker has to enumerate rows of an all-rows R-flag.
pub const ALL_ROWS_SAMPLE: u64 = 4;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SnapshotError {
    #[error(
        "unstable snapshot: row ({i}, {j}) changed at stage {stage}, inside the trailing window"
    )]
    Unstable { i: u64, j: u64, stage: u64 },
    #[error("the paired companion needs the translation index l")]
    MissingTranslationIndex,
    #[error("the paired counterexample needs a sample X")]
    MissingSample,
    #[error("no counterexample translation for the {0} construction")]
    Unsupported(Construction),
    #[error("{0} hints for {1} sets")]
    HintCount(usize, usize),
    #[error(transparent)]
    Refinement(#[from] ReductionError),
}

fn all_halves(layout: Layout, row: Row, h: u32) -> (Vec<u64>, Vec<u64>) {
    let mut e = Vec::new();
    let mut ebar = Vec::new();
    for k in 0..num(row.i, h).expect("row too wide") {
        let (a, b) = layout.block(row, h, k);
        e.extend(a);
        ebar.extend(b);
    }
    (e, ebar)
}

/// Replays a trace and commits the companion ceer's pairs as stars.
///
/// Paired runs need `l`, the index of the translation being tied: rows with
/// `i <= l` that are never R-flagged merge whole block pairs, rows with
/// `i > l` merge halves separately, and an R-flag unites the halves of the
/// trigger row (all-rows scope: rows `j < ALL_ROWS_SAMPLE` and the trigger
/// row). Single runs merge halves and unite on R-flags. Triad runs relate the
/// final `E_i` and `Ē_i`.
pub fn companion_ceer(trace: &Trace, l: Option<u64>) -> Result<CeerBuilder, SnapshotError> {
    let construction = trace.config.construction;
    let mut ceer = CeerBuilder::new();
    if construction == Construction::Triad {
        let state = trace.final_state();
        for set in state.e_sets.values().chain(state.ebar_sets.values()) {
            ceer.add_class(set.iter().copied());
        }
        return Ok(ceer);
    }
    let layout = construction.layout().unwrap();
    if construction == Construction::Paired && l.is_none() {
        return Err(SnapshotError::MissingTranslationIndex);
    }
    let final_flags: BTreeSet<u64> = trace.final_state().r_flags.keys().copied().collect();
    trace.replay(|phase, state, record| {
        for effect in &record.effects {
            match (phase, effect) {
                (Phase::After, Effect::Merge { i, j, height }) => {
                    let row = Row::new(*i, *j);
                    let whole = match (construction, l) {
                        (Construction::Paired, Some(l)) if *i <= l => {
                            if final_flags.contains(i) {
                                continue;
                            }
                            true
                        }
                        _ => false,
                    };
                    for k in 0..num(*i, *height).unwrap() {
                        let (e, ebar) = layout.block(row, *height, k);
                        if whole {
                            ceer.add_class(e.into_iter().chain(ebar));
                        } else {
                            ceer.add_class(e);
                            ceer.add_class(ebar);
                        }
                    }
                }
                (Phase::Before, Effect::RFlag { i, j, .. }) => {
                    let rows: Vec<u64> = match (construction, state.scope) {
                        (Construction::Paired, Scope::AllRows) => {
                            let mut v: BTreeSet<u64> = (0..ALL_ROWS_SAMPLE).collect();
                            v.insert(*j);
                            v.into_iter().collect()
                        }
                        _ => vec![*j],
                    };
                    let mut e = Vec::new();
                    let mut ebar = Vec::new();
                    for rj in rows {
                        let (a, b) = all_halves(layout, Row::new(*i, rj), state.height(*i, rj));
                        e.extend(a);
                        ebar.extend(b);
                    }
                    ceer.add_class(e);
                    ceer.add_class(ebar);
                }
                _ => {}
            }
        }
    });
    Ok(ceer)
}

/// Horizon value of one row's height.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RowSnapshot {
    pub row: Row,
    pub height: u32,
    pub num: Option<u64>,
    /// Stage of the last height change.
    pub last_change: Option<u64>,
    pub stable: bool,
}

/// Final-stage values standing in for the limits, with a stability flag
/// meaning "unchanged during the trailing window".
#[derive(Clone, Debug, PartialEq)]
pub struct Snapshot {
    pub construction: Construction,
    pub horizon: u64,
    pub window: u64,
    pub state: EngineState,
    last_row_change: BTreeMap<(u64, u64), u64>,
    last_set_change: BTreeMap<u64, u64>,
}

impl Snapshot {
    fn quiet(&self, last: Option<u64>) -> bool {
        last.is_none_or(|s| s + self.window < self.horizon)
    }

    pub fn row(&self, i: u64, j: u64) -> RowSnapshot {
        let j = if self.construction == Construction::Single {
            0
        } else {
            j
        };
        let last_change = self.last_row_change.get(&(i, j)).copied();
        let height = self.state.height(i, j);
        RowSnapshot {
            row: Row::new(i, j),
            height,
            num: num(i, height),
            last_change,
            stable: self.quiet(last_change),
        }
    }

    /// Every row whose height ever changed.
    pub fn changed_rows(&self) -> Vec<RowSnapshot> {
        self.last_row_change
            .keys()
            .map(|&(i, j)| self.row(i, j))
            .collect()
    }

    /// Block pair `k` of a row at its horizon height.
    pub fn block(&self, i: u64, j: u64, k: u64) -> (BTreeSet<u64>, BTreeSet<u64>) {
        self.state.block(i, j, k)
    }

    /// Whether `E_i`/`Ē_i` (triad) stayed unchanged during the window.
    pub fn sets_stable(&self, i: u64) -> bool {
        self.quiet(self.last_set_change.get(&i).copied())
    }

    fn require_stable(&self, i: u64, j: u64) -> Result<RowSnapshot, SnapshotError> {
        let r = self.row(i, j);
        if r.stable {
            Ok(r)
        } else {
            Err(SnapshotError::Unstable {
                i,
                j: r.row.j,
                stage: r.last_change.unwrap(),
            })
        }
    }
}

pub fn infinity_snapshot(trace: &Trace, window: u64) -> Snapshot {
    let mut last_row_change = BTreeMap::new();
    let mut last_set_change = BTreeMap::new();
    for record in &trace.records {
        for effect in &record.effects {
            match effect {
                Effect::Merge { i, j, .. } => {
                    last_row_change.insert((*i, *j), record.stage);
                }
                Effect::EGrow { i, .. } | Effect::EbarGrow { i, .. } => {
                    last_set_change.insert(*i, record.stage);
                }
                _ => {}
            }
        }
    }
    Snapshot {
        construction: trace.config.construction,
        horizon: trace.records.len() as u64,
        window,
        state: trace.final_state(),
        last_row_change,
        last_set_change,
    }
}

/// The increasing enumeration of ℕ minus a finite set.
fn complement_enumeration(name: String, excluded: BTreeSet<u64>) -> TranslationSource {
    let sorted: Vec<u64> = excluded.into_iter().collect();
    TranslationSource::custom(name, move |p| {
        let mut v = p;
        for &e in &sorted {
            if e <= v {
                v += 1;
            } else {
                break;
            }
        }
        Some(v)
    })
}

/// The translation whose range omits `E_{i,0}` (single) or `E_{i,x,0}` for
/// every `x` in the sample (paired), at horizon heights. Each row involved
/// must be stable.
pub fn counterexample_t(
    snapshot: &Snapshot,
    i: u64,
    sample: Option<&[u64]>,
) -> Result<TranslationSource, SnapshotError> {
    let rows: Vec<u64> = match snapshot.construction {
        Construction::Single => vec![0],
        Construction::Paired => sample.ok_or(SnapshotError::MissingSample)?.to_vec(),
        c => return Err(SnapshotError::Unsupported(c)),
    };
    let mut excluded = BTreeSet::new();
    for &j in &rows {
        snapshot.require_stable(i, j)?;
        excluded.extend(snapshot.block(i, j, 0).0);
    }
    let name = match snapshot.construction {
        Construction::Single => format!("avoid E({i},0)"),
        _ => format!("avoid E({i},x,0) for x in {rows:?}"),
    };
    Ok(complement_enumeration(name, excluded))
}

/// The sampled refinement behind a paired counterexample.
pub struct PairedCounterexample {
    pub t: TranslationSource,
    /// The first elements of the refined row set `X`.
    pub sample: Vec<u64>,
    /// Translation indices `l < i` whose flagged-row sets are infinite on `X`.
    pub levels: BTreeSet<usize>,
    pub log: Vec<LevelLog>,
}

/// Builds `X` by refining over `J_l = {j | (i, j, l) flagged}` for `l < i`
/// with the caller's hints, then the translation avoiding `E_{i,x,0}` for the
/// first `sample_len` elements `x` of `X`.
pub fn paired_counterexample(
    snapshot: &Snapshot,
    i: u64,
    hints: &[Hint],
    sample_len: usize,
) -> Result<PairedCounterexample, SnapshotError> {
    if snapshot.construction != Construction::Paired {
        return Err(SnapshotError::Unsupported(snapshot.construction));
    }
    if hints.len() as u64 != i {
        return Err(SnapshotError::HintCount(hints.len(), i as usize));
    }
    let sets: Vec<SetSource> = (0..i)
        .map(|l| {
            SetSource::Finite(
                snapshot
                    .state
                    .t_flags
                    .keys()
                    .filter(|&&(fi, _, fl)| fi == i && fl == l)
                    .map(|&(_, j, _)| j)
                    .collect(),
            )
        })
        .collect();
    let refined = lemma10_refine(sets, hints)?;
    let sample = refined.first(sample_len)?;
    let t = counterexample_t(snapshot, i, Some(&sample))?;
    Ok(PairedCounterexample {
        t,
        sample,
        levels: refined.l.clone(),
        log: refined.log.clone(),
    })
}
