use std::collections::BTreeMap;

use super::{Construction, Effect, Engine, Form, Outcome, Scope};
use crate::aux::AuxNumbering;
use crate::geometry::{block_of, num, triad, Layout, Row};
use crate::kernel::{unpair, Descriptor, Prefix};
use crate::numbering::Rule;

const AUX_SEARCH: &str = "aux-search";
const OVERFLOW: &str = "overflow";

impl Engine {
    pub(super) fn evaluate(&mut self, s: u64, form: Form) -> Outcome {
        match form {
            Form::Assign { l } => self.assign(l),
            Form::Refute { i } => match self.config.construction {
                Construction::Triad => self.refute_triad(s, i),
                c => self.refute_rows(s, i, c.layout().unwrap()),
            },
            Form::Translate { i, j, l } => self.translate(s, Layout::Paired, i, j, l),
            Form::TranslateSingle { i, l } => self.translate(s, Layout::Single, i, 0, l),
            Form::Onto { i, j } => self.onto(s, i, j),
        }
    }

    fn assign(&mut self, l: u64) -> Outcome {
        if !self.state.in_src(l) {
            return Outcome::Idle;
        }
        let p = self.state.dst.min();
        Outcome::Fired(vec![
            Effect::SrcRemove(l),
            Effect::DstRemove(p),
            Effect::Rule(Rule::Program {
                p,
                d: Descriptor::Aux {
                    family: self.config.construction.family(),
                    index: l,
                },
            }),
        ])
    }

    /// Two distinct Src indices whose functions extend `prefix`.
    fn choose_aux(&self, prefix: Prefix) -> Option<(u64, u64)> {
        let aux = AuxNumbering::new(self.config.construction.family());
        let src = |k: u64| self.state.in_src(k);
        aux.find_extenders(prefix, &src, 2, self.config.aux_budget)
            .ok()
            .map(|v| (v[0], v[1]))
    }

    /// Least `(j, k, code)` with `code = <p, q>` in `W_i^s`, `p` in `E` and
    /// `q` in `Ē` of block pair `k` of row `(i, j)`.
    fn crossing_pair(&mut self, s: u64, i: u64, layout: Layout) -> Option<(u64, u64, u64, u64)> {
        let mut best: Option<(u64, u64, u64, u64, u64)> = None;
        for code in self.cache.domain(&self.env.machine, i, s) {
            let (p, q) = unpair(code);
            let (Some((rp, pp)), Some((rq, pq))) = (layout.locate(p), layout.locate(q)) else {
                continue;
            };
            if rp != rq || rp.i != i {
                continue;
            }
            let h = self.state.height(i, rp.j);
            let (kp, side_p) = block_of(pp, h);
            let (kq, side_q) = block_of(pq, h);
            if kp != kq || side_p || !side_q {
                continue;
            }
            let cand = (rp.j, kp, code, p, q);
            if best.is_none_or(|b| (cand.0, cand.1, cand.2) < (b.0, b.1, b.2)) {
                best = Some(cand);
            }
        }
        best.map(|(j, k, _, p, q)| (j, k, p, q))
    }

    fn refute_rows(&mut self, s: u64, i: u64, layout: Layout) -> Outcome {
        if self.state.r_flags.contains_key(&i) {
            return Outcome::Idle;
        }
        let Some((j, _k, p, q)) = self.crossing_pair(s, i, layout) else {
            return Outcome::Idle;
        };
        let row = Row::new(i, j);
        let h = self.state.height(i, j);
        let (Some(width), Some(n)) = (1u64.checked_shl(i as u32).filter(|_| i < 64), num(i, h))
        else {
            return Outcome::Deferred(OVERFLOW.into());
        };
        let value = layout.row_value(row);
        let Some((left, right)) = self.choose_aux(Prefix::new(value, width)) else {
            return Outcome::Deferred(AUX_SEARCH.into());
        };
        let family = self.config.construction.family();
        let mut fx = vec![
            Effect::RFlag { i, j, p, q },
            Effect::SrcRemove(left),
            Effect::SrcRemove(right),
        ];
        match (layout, self.state.scope) {
            (Layout::Paired, Scope::AllRows) => {
                let heights: BTreeMap<u64, u32> = self
                    .state
                    .heights
                    .iter()
                    .filter(|((ri, _), _)| *ri == i)
                    .map(|(&(_, rj), &h)| (rj, h))
                    .collect();
                fx.push(Effect::Rule(Rule::RowsAux {
                    i,
                    heights: heights.clone(),
                    family,
                    left,
                    right,
                }));
                fx.push(Effect::Rule(Rule::FreshRows {
                    i,
                    heights,
                    dst: self.state.dst.clone(),
                }));
                fx.push(Effect::DstThin);
                fx.push(Effect::Overwrite { i });
            }
            (Layout::Paired, Scope::TriggerRow) => {
                fx.push(Effect::Rule(Rule::RowAux {
                    layout,
                    row,
                    height: h,
                    family,
                    left,
                    right,
                }));
                // d(k) is the 2k-th element of Dst, so Dst minus rng(d)
                // stays infinite.
                let fresh: Vec<u64> = (0..n).map(|k| self.state.dst.select(2 * k)).collect();
                for (k, &d) in fresh.iter().enumerate() {
                    fx.push(Effect::DstRemove(d));
                    fx.push(Effect::Rule(Rule::Program {
                        p: d,
                        d: Descriptor::finite(value, (k as u64 + 1) << h),
                    }));
                }
            }
            (Layout::Single, _) => {
                fx.push(Effect::Rule(Rule::RowAux {
                    layout,
                    row,
                    height: h,
                    family,
                    left,
                    right,
                }));
                for (k, d) in self.state.dst.first(n).into_iter().enumerate() {
                    fx.push(Effect::DstRemove(d));
                    fx.push(Effect::Rule(Rule::Program {
                        p: d,
                        d: Descriptor::finite(value, (k as u64 + 1) << h),
                    }));
                }
            }
        }
        Outcome::Fired(fx)
    }

    fn translate(&mut self, s: u64, layout: Layout, i: u64, j: u64, l: u64) -> Outcome {
        if l >= i
            || self.state.r_flags.contains_key(&i)
            || self.state.t_flags.contains_key(&(i, j, l))
        {
            return Outcome::Idle;
        }
        let h = self.state.height(i, j);
        // rng(phi_l^s) has fewer than s elements.
        let Some(blocks) = num(i, h).filter(|&n| n <= s) else {
            return Outcome::Idle;
        };
        let row = Row::new(i, j);
        let mut hit = vec![false; blocks as usize];
        for y in self.cache.range(&self.env.machine, l, s) {
            if let Some((r, pos)) = layout.locate(y) {
                if r == row {
                    hit[block_of(pos, h).0 as usize] = true;
                }
            }
        }
        if !hit.iter().all(|&b| b) {
            return Outcome::Idle;
        }
        let value = layout.row_value(row);
        let n = blocks / 2;
        let mut fx = vec![
            Effect::TFlag { i, j, l },
            Effect::Merge {
                i,
                j,
                height: h + 1,
            },
            Effect::Rule(Rule::Row {
                layout,
                row,
                height: h + 1,
            }),
        ];
        for (k, q) in self.state.dst.first(n).into_iter().enumerate() {
            fx.push(Effect::DstRemove(q));
            fx.push(Effect::Rule(Rule::Program {
                p: q,
                d: Descriptor::finite(value, (2 * k as u64 + 1) << h),
            }));
        }
        Outcome::Fired(fx)
    }

    /// Length of the finite constant `p` currently computes.
    fn finite_length(&self, p: u64) -> u64 {
        match self.state.descriptor(p) {
            Descriptor::Finite { length, .. } => length,
            Descriptor::Empty => 0,
            d => panic!("triad member {p} computes {d}, not a finite constant"),
        }
    }

    fn refute_triad(&mut self, s: u64, i: u64) -> Outcome {
        if self.state.r_flags.contains_key(&i) {
            return Outcome::Idle;
        }
        let (e, ebar) = self.state.block(i, 0, 0);
        if e.is_empty() || ebar.is_empty() {
            return Outcome::Idle;
        }
        let hit = self
            .cache
            .domain(&self.env.machine, i, s)
            .into_iter()
            .map(unpair)
            .find(|(p, q)| e.contains(p) && ebar.contains(q));
        let Some((p, q)) = hit else {
            return Outcome::Idle;
        };
        let n = e
            .iter()
            .chain(&ebar)
            .map(|&m| self.finite_length(m))
            .max()
            .unwrap();
        let Some((left, right)) = self.choose_aux(Prefix::new(i, n)) else {
            return Outcome::Deferred(AUX_SEARCH.into());
        };
        let family = self.config.construction.family();
        let fresh = self.state.dst.min();
        let mut fx = vec![
            Effect::RFlag { i, j: 0, p, q },
            Effect::SrcRemove(left),
            Effect::SrcRemove(right),
            Effect::DstRemove(fresh),
        ];
        for (set, index) in [(&e, left), (&ebar, right)] {
            for &m in set {
                fx.push(Effect::Rule(Rule::Program {
                    p: m,
                    d: Descriptor::Aux { family, index },
                }));
            }
        }
        fx.push(Effect::Rule(Rule::Program {
            p: fresh,
            d: Descriptor::Total { value: i },
        }));
        Outcome::Fired(fx)
    }

    fn onto(&mut self, s: u64, i: u64, j: u64) -> Outcome {
        if self.state.r_flags.contains_key(&i) || self.state.t_flags.contains_key(&(i, j, 0)) {
            return Outcome::Idle;
        }
        let (a, b) = triad(i, j);
        let m = &self.env.machine;
        if !(self.cache.range_contains(m, j, s, a) && self.cache.range_contains(m, j, s, b)) {
            return Outcome::Idle;
        }
        let (e, ebar) = self.state.block(i, 0, 0);
        let members: Vec<u64> = e.iter().chain(&ebar).copied().collect();
        let n = members
            .iter()
            .map(|&p| self.finite_length(p))
            .chain([2 * j + 2])
            .max()
            .unwrap();
        let mut fx = vec![
            Effect::TFlag { i, j, l: 0 },
            Effect::EGrow { i, p: a },
            Effect::EbarGrow { i, p: b },
        ];
        for p in members.into_iter().chain([a, b]) {
            let target = Descriptor::finite(i, n);
            if self.state.descriptor(p) != target {
                fx.push(Effect::Rule(Rule::Program { p, d: target }));
            }
        }
        let q = self.state.dst.first(2);
        for (k, &qk) in q.iter().enumerate() {
            fx.push(Effect::DstRemove(qk));
            fx.push(Effect::Rule(Rule::Program {
                p: qk,
                d: Descriptor::finite(i, 2 * j + 1 + k as u64),
            }));
        }
        Outcome::Fired(fx)
    }
}

/// The first stage at or after `from` whose form satisfies `matches`.
pub fn next_stage(from: u64, matches: impl Fn(Form) -> bool, construction: Construction) -> u64 {
    let mut s = from;
    while !matches(Form::decode(s, construction)) {
        s += 1;
    }
    s
}
