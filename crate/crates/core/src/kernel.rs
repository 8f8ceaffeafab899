//! Number encodings and the symbolic partial-function descriptors.
//!
//! Every function an engine hands out is one of a handful of descriptor
//! kinds. Evaluation is budgeted, and extensional comparison is three-valued:
//! comparisons that cannot be settled within the budget come back as
//! [`EqVerdict::Unknown`] instead of guessing.

use std::fmt;

use thiserror::Error;

use crate::aux::Family;

/// Cantor pairing, `(x + y)(x + y + 1) / 2 + x`.
///
/// Panics if the code does not fit in a `u64`; every caller in this crate
/// works with stage numbers and program indices far below that.
pub fn pair(x: u64, y: u64) -> u64 {
    checked_pair(x, y).expect("pairing overflow")
}

pub fn checked_pair(x: u64, y: u64) -> Option<u64> {
    let w = x.checked_add(y)?;
    let tri = if w % 2 == 0 {
        (w / 2).checked_mul(w.checked_add(1)?)?
    } else {
        w.checked_mul(w.checked_add(1)? / 2)?
    };
    tri.checked_add(x)
}

/// Inverse of [`pair`].
pub fn unpair(z: u64) -> (u64, u64) {
    // w is the largest value with w(w+1)/2 <= z.
    let mut w = ((8u128 * z as u128 + 1).isqrt() as u64 - 1) / 2;
    while triangle(w + 1) <= z as u128 {
        w += 1;
    }
    while triangle(w) > z as u128 {
        w -= 1;
    }
    let x = z - triangle(w) as u64;
    (x, w - x)
}

fn triangle(w: u64) -> u128 {
    w as u128 * (w as u128 + 1) / 2
}

/// `<x, y, z> = <x, <y, z>>`.
pub fn triple(x: u64, y: u64, z: u64) -> u64 {
    pair(x, pair(y, z))
}

pub fn untriple(code: u64) -> (u64, u64, u64) {
    let (x, rest) = unpair(code);
    let (y, z) = unpair(rest);
    (x, y, z)
}

/// `max` of a finite set with `max ∅ = -1` kept out of band.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum SetMax {
    NegOne,
    Value(u64),
}

impl SetMax {
    pub fn of<I: IntoIterator<Item = u64>>(items: I) -> Self {
        items
            .into_iter()
            .max()
            .map_or(SetMax::NegOne, SetMax::Value)
    }

    /// Whether `x > max`.
    pub fn is_below(self, x: u64) -> bool {
        match self {
            SetMax::NegOne => true,
            SetMax::Value(m) => x > m,
        }
    }
}

/// `min` of a set with `min ∅ = ∞` kept out of band.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum SetMin {
    Value(u64),
    Infinity,
}

impl SetMin {
    pub fn of<I: IntoIterator<Item = u64>>(items: I) -> Self {
        items
            .into_iter()
            .min()
            .map_or(SetMin::Infinity, SetMin::Value)
    }
}

/// A partial function in symbolic form.
///
/// `Finite { value, length }` is the function that maps every `x < length`
/// to `value` and diverges elsewhere. A zero length is always stored as
/// [`Descriptor::Empty`]; use [`Descriptor::finite`] to build one.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Descriptor {
    Empty,
    Finite { value: u64, length: u64 },
    Total { value: u64 },
    Aux { family: Family, index: u64 },
    Machine { index: u64 },
}

impl Descriptor {
    pub fn finite(value: u64, length: u64) -> Self {
        if length == 0 {
            Descriptor::Empty
        } else {
            Descriptor::Finite { value, length }
        }
    }

    pub fn normalized(self) -> Self {
        match self {
            Descriptor::Finite { value, length } => Descriptor::finite(value, length),
            d => d,
        }
    }

    /// Empty, finite and total constants: the kinds compared exactly.
    pub fn is_constant_kind(&self) -> bool {
        matches!(
            self,
            Descriptor::Empty | Descriptor::Finite { .. } | Descriptor::Total { .. }
        )
    }

    pub fn as_prefix(&self) -> Option<Prefix> {
        match self.normalized() {
            Descriptor::Empty => Some(Prefix {
                value: 0,
                length: 0,
            }),
            Descriptor::Finite { value, length } => Some(Prefix { value, length }),
            _ => None,
        }
    }
}

impl fmt::Display for Descriptor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.normalized() {
            Descriptor::Empty => write!(f, "empty"),
            Descriptor::Finite { value, length } => write!(f, "fin({value},{length})"),
            Descriptor::Total { value } => write!(f, "tot({value})"),
            Descriptor::Aux { family, index } => write!(f, "aux({family},{index})"),
            Descriptor::Machine { index } => write!(f, "phi({index})"),
        }
    }
}

impl std::str::FromStr for Descriptor {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if s == "empty" {
            return Ok(Descriptor::Empty);
        }
        let (head, rest) = s
            .split_once('(')
            .ok_or_else(|| format!("bad descriptor `{s}`"))?;
        let inner = rest
            .strip_suffix(')')
            .ok_or_else(|| format!("bad descriptor `{s}`"))?;
        let args: Vec<&str> = inner.split(',').map(str::trim).collect();
        let num = |k: usize| -> Result<u64, String> {
            args.get(k)
                .ok_or_else(|| format!("missing argument in `{s}`"))?
                .parse::<u64>()
                .map_err(|e| format!("bad number in `{s}`: {e}"))
        };
        let arity = |n: usize| -> Result<(), String> {
            if args.len() == n {
                Ok(())
            } else {
                Err(format!("wrong arity in `{s}`"))
            }
        };
        match head {
            "fin" => {
                arity(2)?;
                Ok(Descriptor::finite(num(0)?, num(1)?))
            }
            "tot" => {
                arity(1)?;
                Ok(Descriptor::Total { value: num(0)? })
            }
            "aux" => {
                arity(2)?;
                Ok(Descriptor::Aux {
                    family: args[0].parse()?,
                    index: num(1)?,
                })
            }
            "phi" => {
                arity(1)?;
                Ok(Descriptor::Machine { index: num(0)? })
            }
            _ => Err(format!("unknown descriptor kind `{head}`")),
        }
    }
}

/// A finite constant used as a containment target, `value^{<length}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Prefix {
    pub value: u64,
    pub length: u64,
}

impl Prefix {
    pub fn new(value: u64, length: u64) -> Self {
        Prefix { value, length }
    }

    pub fn descriptor(self) -> Descriptor {
        Descriptor::finite(self.value, self.length)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EvalOutcome {
    Converges(u64),
    /// The descriptor kind guarantees divergence at this input.
    ProvedDivergent,
    BudgetExhausted(u64),
}

impl EvalOutcome {
    pub fn value(self) -> Option<u64> {
        match self {
            EvalOutcome::Converges(v) => Some(v),
            _ => None,
        }
    }
}

/// Outcome of a bounded extensional comparison. `Equal` and `Distinct` are
/// final; `Unknown` may be refined by a larger budget.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EqVerdict {
    Equal,
    Distinct { witness: u64 },
    Unknown { budget: u64 },
}

impl EqVerdict {
    pub fn is_equal(self) -> bool {
        self == EqVerdict::Equal
    }

    pub fn is_distinct(self) -> bool {
        matches!(self, EqVerdict::Distinct { .. })
    }
}

impl fmt::Display for EqVerdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EqVerdict::Equal => write!(f, "equal"),
            EqVerdict::Distinct { witness } => write!(f, "distinct@{witness}"),
            EqVerdict::Unknown { budget } => write!(f, "unknown@{budget}"),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum KernelError {
    #[error("environment has no auxiliary numbering for family {0}")]
    UnknownFamily(Family),
    #[error("separate called with identical indices {0}")]
    SameIndex(u64),
}

/// Backends behind `Machine` and `Aux` descriptors.
pub trait EvalEnv {
    fn machine_eval(&self, index: u64, x: u64, budget: u64) -> EvalOutcome;

    fn aux_eval(
        &self,
        family: Family,
        index: u64,
        x: u64,
        budget: u64,
    ) -> Result<EvalOutcome, KernelError>;

    /// A witness input where two distinct aux indices differ, when one can be
    /// produced within the budget.
    fn aux_separate(
        &self,
        family: Family,
        a: u64,
        b: u64,
        budget: u64,
    ) -> Result<EqVerdict, KernelError>;

    /// An `n` such that the aux function provably diverges on every `x >= n`.
    fn aux_domain_bound(&self, family: Family, index: u64) -> Result<Option<u64>, KernelError>;
}

pub fn eval(
    d: &Descriptor,
    x: u64,
    budget: u64,
    env: &dyn EvalEnv,
) -> Result<EvalOutcome, KernelError> {
    Ok(match d.normalized() {
        Descriptor::Empty => EvalOutcome::ProvedDivergent,
        Descriptor::Finite { value, length } => {
            if x < length {
                EvalOutcome::Converges(value)
            } else {
                EvalOutcome::ProvedDivergent
            }
        }
        Descriptor::Total { value } => EvalOutcome::Converges(value),
        Descriptor::Aux { family, index } => env.aux_eval(family, index, x, budget)?,
        Descriptor::Machine { index } => env.machine_eval(index, x, budget),
    })
}

fn domain_bound(d: &Descriptor, env: &dyn EvalEnv) -> Result<Option<u64>, KernelError> {
    Ok(match d.normalized() {
        Descriptor::Empty => Some(0),
        Descriptor::Finite { length, .. } => Some(length),
        Descriptor::Total { .. } | Descriptor::Machine { .. } => None,
        Descriptor::Aux { family, index } => env.aux_domain_bound(family, index)?,
    })
}

/// Does `d` contain `prefix`, i.e. converge to `prefix.value` on every
/// `x < prefix.length`? `Equal` means the containment holds.
pub fn extends(
    d: &Descriptor,
    prefix: Prefix,
    budget: u64,
    env: &dyn EvalEnv,
) -> Result<EqVerdict, KernelError> {
    match d.normalized() {
        Descriptor::Empty => {
            return Ok(if prefix.length == 0 {
                EqVerdict::Equal
            } else {
                EqVerdict::Distinct { witness: 0 }
            })
        }
        Descriptor::Finite { value, length } => {
            return Ok(if prefix.length == 0 {
                EqVerdict::Equal
            } else if value != prefix.value {
                EqVerdict::Distinct { witness: 0 }
            } else if length < prefix.length {
                EqVerdict::Distinct { witness: length }
            } else {
                EqVerdict::Equal
            })
        }
        Descriptor::Total { value } => {
            return Ok(if prefix.length == 0 || value == prefix.value {
                EqVerdict::Equal
            } else {
                EqVerdict::Distinct { witness: 0 }
            })
        }
        _ => {}
    }
    let mut exhausted = false;
    for x in 0..prefix.length {
        match eval(d, x, budget, env)? {
            EvalOutcome::Converges(v) if v == prefix.value => {}
            EvalOutcome::Converges(_) | EvalOutcome::ProvedDivergent => {
                return Ok(EqVerdict::Distinct { witness: x })
            }
            EvalOutcome::BudgetExhausted(_) => exhausted = true,
        }
    }
    Ok(if exhausted {
        EqVerdict::Unknown { budget }
    } else {
        EqVerdict::Equal
    })
}

/// Whether `next` extends `prev` as a graph. Used for the rule-table
/// monotonicity audit: finite predecessors are checked as prefixes, anything
/// else must be kept unchanged.
pub fn extends_descriptor(
    prev: &Descriptor,
    next: &Descriptor,
    budget: u64,
    env: &dyn EvalEnv,
) -> Result<EqVerdict, KernelError> {
    match prev.as_prefix() {
        Some(prefix) => extends(next, prefix, budget, env),
        None => ext_equal(prev, next, budget, env),
    }
}

/// Bounded extensional equality.
pub fn ext_equal(
    a: &Descriptor,
    b: &Descriptor,
    budget: u64,
    env: &dyn EvalEnv,
) -> Result<EqVerdict, KernelError> {
    let (a, b) = (a.normalized(), b.normalized());
    if a == b {
        return Ok(EqVerdict::Equal);
    }
    if a.is_constant_kind() && b.is_constant_kind() {
        return Ok(compare_constants(a, b));
    }
    if let (
        Descriptor::Aux {
            family: fa,
            index: ka,
        },
        Descriptor::Aux {
            family: fb,
            index: kb,
        },
    ) = (a, b)
    {
        if fa == fb {
            return env.aux_separate(fa, ka, kb, budget);
        }
    }
    probe(&a, &b, budget, env)
}

fn compare_constants(a: Descriptor, b: Descriptor) -> EqVerdict {
    use Descriptor::*;
    // Shape of a constant-kind descriptor: (value, length), length None = total.
    let shape = |d: Descriptor| match d {
        Empty => (0, Some(0)),
        Finite { value, length } => (value, Some(length)),
        Total { value } => (value, None),
        _ => unreachable!("not a constant kind"),
    };
    let ((va, la), (vb, lb)) = (shape(a), shape(b));
    let common = match (la, lb) {
        (Some(x), Some(y)) => x.min(y),
        (Some(x), None) | (None, Some(x)) => x,
        (None, None) => u64::MAX,
    };
    if common > 0 && va != vb {
        return EqVerdict::Distinct { witness: 0 };
    }
    if la == lb {
        EqVerdict::Equal
    } else {
        EqVerdict::Distinct { witness: common }
    }
}

fn probe(
    a: &Descriptor,
    b: &Descriptor,
    budget: u64,
    env: &dyn EvalEnv,
) -> Result<EqVerdict, KernelError> {
    let (ba, bb) = (domain_bound(a, env)?, domain_bound(b, env)?);
    let (limit, exact) = match (ba, bb) {
        (Some(x), Some(y)) => (x.max(y), true),
        (Some(x), None) | (None, Some(x)) => (budget.max(x.saturating_add(1)), false),
        (None, None) => (budget, false),
    };
    let mut exhausted = false;
    for x in 0..limit {
        let (ea, eb) = (eval(a, x, budget, env)?, eval(b, x, budget, env)?);
        match (ea, eb) {
            (EvalOutcome::Converges(u), EvalOutcome::Converges(v)) if u != v => {
                return Ok(EqVerdict::Distinct { witness: x })
            }
            (EvalOutcome::Converges(_), EvalOutcome::ProvedDivergent)
            | (EvalOutcome::ProvedDivergent, EvalOutcome::Converges(_)) => {
                return Ok(EqVerdict::Distinct { witness: x })
            }
            (EvalOutcome::BudgetExhausted(_), _) | (_, EvalOutcome::BudgetExhausted(_)) => {
                exhausted = true
            }
            _ => {}
        }
    }
    Ok(if exact && !exhausted {
        EqVerdict::Equal
    } else {
        EqVerdict::Unknown { budget }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::aux::StandardEnv;
    use proptest::prelude::*;

    fn env() -> StandardEnv {
        StandardEnv::default()
    }

    #[test]
    fn pairing_examples() {
        assert_eq!(pair(0, 0), 0);
        assert_eq!(pair(1, 1), 4);
        assert_eq!(unpair(7), (1, 2));
        assert_eq!(triple(1, 2, 3), pair(1, pair(2, 3)));
        assert_eq!(untriple(triple(4, 0, 9)), (4, 0, 9));
    }

    #[test]
    fn pairing_grid_is_injective_and_inverts() {
        let mut seen = std::collections::HashSet::new();
        for x in 0..1024u64 {
            for y in 0..1024u64 {
                let z = pair(x, y);
                assert_eq!(unpair(z), (x, y));
                assert!(seen.insert(z));
            }
        }
    }

    #[test]
    fn pairing_is_monotone() {
        for x in 0..200u64 {
            for y in 0..200u64 {
                assert!(pair(x + 1, y) > pair(x, y));
                assert!(pair(x, y + 1) > pair(x, y));
            }
        }
    }

    #[test]
    fn unpair_near_u64_limits() {
        for z in [u64::MAX, u64::MAX - 1, 1 << 62, (1 << 40) + 17] {
            let (x, y) = unpair(z);
            assert_eq!(checked_pair(x, y), Some(z));
        }
        assert_eq!(checked_pair(u64::MAX, 1), None);
    }

    #[test]
    fn finite_constant_normalizes() {
        assert_eq!(Descriptor::finite(9, 0), Descriptor::Empty);
        assert_eq!(
            Descriptor::Finite {
                value: 3,
                length: 0
            }
            .normalized(),
            Descriptor::Empty
        );
    }

    #[test]
    fn eval_examples() {
        let env = env();
        let d = Descriptor::finite(5, 2);
        assert_eq!(eval(&d, 1, 0, &env).unwrap(), EvalOutcome::Converges(5));
        assert_eq!(eval(&d, 2, 0, &env).unwrap(), EvalOutcome::ProvedDivergent);
        assert_eq!(
            eval(&Descriptor::Empty, 0, 100, &env).unwrap(),
            EvalOutcome::ProvedDivergent
        );
        assert_eq!(
            eval(&Descriptor::Total { value: 7 }, 1 << 40, 0, &env).unwrap(),
            EvalOutcome::Converges(7)
        );
    }

    #[test]
    fn eval_reports_unconfigured_family() {
        let env = StandardEnv::with_families(crate::machine::Machine::default(), &[Family::Single]);
        let d = Descriptor::Aux {
            family: Family::Paired,
            index: 2,
        };
        assert_eq!(
            eval(&d, 0, 10, &env),
            Err(KernelError::UnknownFamily(Family::Paired))
        );
    }

    #[test]
    fn extends_examples() {
        let env = env();
        let p = Prefix::new(3, 8);
        let total = Descriptor::Total { value: 3 };
        assert_eq!(extends(&total, p, 0, &env).unwrap(), EqVerdict::Equal);
        let short = Descriptor::finite(3, 4);
        assert_eq!(
            extends(&short, p, 0, &env).unwrap(),
            EqVerdict::Distinct { witness: 4 }
        );
        let wrong = Descriptor::finite(2, 8);
        assert_eq!(
            extends(&wrong, p, 0, &env).unwrap(),
            EqVerdict::Distinct { witness: 0 }
        );
    }

    #[test]
    fn ext_equal_examples() {
        let env = env();
        let a = Descriptor::finite(7, 3);
        assert_eq!(ext_equal(&a, &a, 0, &env).unwrap(), EqVerdict::Equal);
        assert_eq!(
            ext_equal(&a, &Descriptor::finite(7, 4), 0, &env).unwrap(),
            EqVerdict::Distinct { witness: 3 }
        );
        let x = Descriptor::Aux {
            family: Family::Paired,
            index: 2,
        };
        let y = Descriptor::Aux {
            family: Family::Paired,
            index: 5,
        };
        assert!(ext_equal(&x, &y, 16, &env).unwrap().is_distinct());
    }

    #[test]
    fn aux_against_reserved_member_is_distinct() {
        let env = env();
        // Even index 2*<4, <2, 0>>: constant 4 on [0, 3), tag at 3.
        let k = 2 * triple(4, 2, 0);
        let a = Descriptor::Aux {
            family: Family::Single,
            index: k,
        };
        for len in 1..8 {
            let v = ext_equal(&a, &Descriptor::finite(4, len), 4, &env).unwrap();
            assert!(v.is_distinct(), "len {len}: {v:?}");
        }
    }

    #[test]
    fn machine_comparison_stays_unknown_at_small_budget() {
        let env = env();
        let id = Descriptor::Machine { index: 0 };
        let also_id = Descriptor::Machine { index: 1 };
        assert_eq!(
            ext_equal(&id, &also_id, 16, &env).unwrap(),
            EqVerdict::Unknown { budget: 16 }
        );
    }

    #[test]
    fn display_parse_roundtrip() {
        for d in [
            Descriptor::Empty,
            Descriptor::finite(3, 9),
            Descriptor::Total { value: 4 },
            Descriptor::Aux {
                family: Family::Triad,
                index: 12,
            },
            Descriptor::Machine { index: 77 },
        ] {
            assert_eq!(d.to_string().parse::<Descriptor>().unwrap(), d);
        }
        assert!("fin(1)".parse::<Descriptor>().is_err());
    }

    #[test]
    fn set_sentinels() {
        assert_eq!(SetMax::of(Vec::<u64>::new()), SetMax::NegOne);
        assert!(SetMax::NegOne.is_below(0));
        assert_eq!(SetMax::of([1, 2]), SetMax::Value(2));
        assert!(!SetMax::Value(2).is_below(2));
        assert_eq!(SetMin::of(Vec::<u64>::new()), SetMin::Infinity);
        assert_eq!(SetMin::of([5, 3]), SetMin::Value(3));
    }

    fn arb_descriptor() -> impl Strategy<Value = Descriptor> {
        prop_oneof![
            Just(Descriptor::Empty),
            (0u64..4, 0u64..6).prop_map(|(v, n)| Descriptor::finite(v, n)),
            (0u64..4).prop_map(|v| Descriptor::Total { value: v }),
            (0u64..300).prop_map(|k| Descriptor::Aux {
                family: Family::Single,
                index: k
            }),
            (0u64..40).prop_map(|e| Descriptor::Machine { index: e }),
        ]
    }

    proptest! {
        #[test]
        fn distinct_verdicts_carry_real_witnesses(a in arb_descriptor(), b in arb_descriptor()) {
            let env = env();
            if let EqVerdict::Distinct { witness } = ext_equal(&a, &b, 64, &env).unwrap() {
                let ea = eval(&a, witness, 1 << 12, &env).unwrap();
                let eb = eval(&b, witness, 1 << 12, &env).unwrap();
                let differ = match (ea, eb) {
                    (EvalOutcome::Converges(u), EvalOutcome::Converges(v)) => u != v,
                    (EvalOutcome::Converges(_), EvalOutcome::ProvedDivergent)
                    | (EvalOutcome::ProvedDivergent, EvalOutcome::Converges(_)) => true,
                    _ => false,
                };
                prop_assert!(differ, "{a} vs {b} at {witness}: {ea:?} {eb:?}");
            }
        }

        #[test]
        fn verdicts_never_flip_with_budget(a in arb_descriptor(), b in arb_descriptor()) {
            let env = env();
            let small = ext_equal(&a, &b, 8, &env).unwrap();
            let large = ext_equal(&a, &b, 1 << 10, &env).unwrap();
            match small {
                EqVerdict::Equal => prop_assert_eq!(large, EqVerdict::Equal),
                EqVerdict::Distinct { .. } => prop_assert!(large.is_distinct()),
                EqVerdict::Unknown { .. } => {}
            }
        }

        #[test]
        fn structural_equal_survives_brute_force(a in arb_descriptor(), b in arb_descriptor()) {
            let env = env();
            if a.is_constant_kind() && b.is_constant_kind()
                && ext_equal(&a, &b, 0, &env).unwrap() == EqVerdict::Equal
            {
                for x in 0..256 {
                    prop_assert_eq!(
                        eval(&a, x, 1 << 10, &env).unwrap(),
                        eval(&b, x, 1 << 10, &env).unwrap()
                    );
                }
            }
        }

        #[test]
        fn eval_is_pure(d in arb_descriptor(), x in 0u64..64, budget in 0u64..256) {
            let env = env();
            prop_assert_eq!(eval(&d, x, budget, &env).unwrap(), eval(&d, x, budget, &env).unwrap());
        }
    }
}
