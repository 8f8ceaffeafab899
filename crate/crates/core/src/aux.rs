//! One-to-one auxiliary numberings, one per reserved family.
//!
//! Index layout, shared by every family:
//!
//! * even `k = 2·<c, <n-1, u>>`: the function is `c` on `[0, n)`, takes the
//!   value `k + 1` at `n` and diverges beyond. The tag `k + 1` is never `c`,
//!   so no even-stream function is constant on its domain.
//! * odd `k = 2e + 1`: `1, 0, k + 1` on inputs `0, 1, 2`, then
//!   `<e, phi_e(x)>` at input `x + 3`.
//!
//! Every reserved family consists of constant functions, so neither stream
//! meets it, and any two indices are separated by a fixed input.

use std::fmt;
use std::str::FromStr;

use crate::kernel::{
    checked_pair, unpair, Descriptor, EqVerdict, EvalEnv, EvalOutcome, KernelError, Prefix,
};
use crate::machine::Machine;

/// The family of constant functions an auxiliary numbering must avoid.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Family {
    /// `<i, j>^{<k+1}` for `k < 2^i`.
    Paired,
    /// `i^{<k+1}` for `k < 2^i`.
    Single,
    /// Every `i^{<j+1}` and every `lambda x. i`.
    Triad,
}

impl Family {
    pub const ALL: [Family; 3] = [Family::Paired, Family::Single, Family::Triad];

    /// Whether a constant-kind descriptor belongs to the reserved family.
    /// Other kinds are never members.
    pub fn is_reserved(self, d: &Descriptor) -> bool {
        let below_pow = |len: u64, exp: u64| exp >= 64 || len <= 1u64 << exp;
        match (self, d.normalized()) {
            (Family::Paired, Descriptor::Finite { value, length }) => {
                below_pow(length, unpair(value).0)
            }
            (Family::Single, Descriptor::Finite { value, length }) => below_pow(length, value),
            (Family::Triad, Descriptor::Finite { .. } | Descriptor::Total { .. }) => true,
            _ => false,
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Family::Paired => "paired",
            Family::Single => "single",
            Family::Triad => "triad",
        })
    }
}

impl FromStr for Family {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "paired" => Ok(Family::Paired),
            "single" => Ok(Family::Single),
            "triad" => Ok(Family::Triad),
            _ => Err(format!("unknown family `{s}`")),
        }
    }
}

/// Decoded form of an auxiliary index.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AuxShape {
    Tagged { value: u64, length: u64, tag: u64 },
    MachineBacked { program: u64 },
}

pub fn decode(k: u64) -> AuxShape {
    if k.is_multiple_of(2) {
        let (c, r) = unpair(k / 2);
        let (n1, _) = unpair(r);
        AuxShape::Tagged {
            value: c,
            length: n1 + 1,
            tag: k + 1,
        }
    } else {
        AuxShape::MachineBacked { program: k / 2 }
    }
}

/// Index of the even-stream function `c` on `[0, length)` with variant `u`.
pub fn tagged_index(value: u64, length: u64, variant: u64) -> Option<u64> {
    assert!(
        length >= 1,
        "tagged functions have a nonempty constant part"
    );
    let r = checked_pair(length - 1, variant)?;
    checked_pair(value, r)?.checked_mul(2)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct NotFoundWithinBudget {
    pub found: usize,
    pub examined: u64,
}

impl fmt::Display for NotFoundWithinBudget {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "found {} extenders after {} candidates",
            self.found, self.examined
        )
    }
}

/// An auxiliary numbering for one family.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct AuxNumbering {
    pub family: Family,
}

impl AuxNumbering {
    pub fn new(family: Family) -> Self {
        AuxNumbering { family }
    }

    pub fn eval(&self, machine: &Machine, k: u64, x: u64, budget: u64) -> EvalOutcome {
        match decode(k) {
            AuxShape::Tagged { value, length, tag } => {
                if x < length {
                    EvalOutcome::Converges(value)
                } else if x == length {
                    EvalOutcome::Converges(tag)
                } else {
                    EvalOutcome::ProvedDivergent
                }
            }
            AuxShape::MachineBacked { program } => match x {
                0 => EvalOutcome::Converges(1),
                1 => EvalOutcome::Converges(0),
                2 => EvalOutcome::Converges(k + 1),
                _ => match machine.step_eval(program, x - 3, budget) {
                    EvalOutcome::Converges(y) => match checked_pair(program, y) {
                        Some(v) => EvalOutcome::Converges(v),
                        None => EvalOutcome::BudgetExhausted(budget),
                    },
                    _ => EvalOutcome::BudgetExhausted(budget),
                },
            },
        }
    }

    /// An input where `alpha_a` and `alpha_b` differ.
    pub fn separate(&self, a: u64, b: u64) -> Result<EqVerdict, KernelError> {
        if a == b {
            return Err(KernelError::SameIndex(a));
        }
        let witness = match (decode(a), decode(b)) {
            (
                AuxShape::Tagged {
                    value: c,
                    length: n,
                    ..
                },
                AuxShape::Tagged {
                    value: c2,
                    length: n2,
                    ..
                },
            ) => {
                if c != c2 {
                    0
                } else {
                    n.min(n2)
                }
            }
            (AuxShape::Tagged { value, .. }, AuxShape::MachineBacked { .. })
            | (AuxShape::MachineBacked { .. }, AuxShape::Tagged { value, .. }) => {
                if value != 1 {
                    0
                } else {
                    1
                }
            }
            (AuxShape::MachineBacked { .. }, AuxShape::MachineBacked { .. }) => 2,
        };
        Ok(EqVerdict::Distinct { witness })
    }

    pub fn domain_bound(&self, k: u64) -> Option<u64> {
        match decode(k) {
            AuxShape::Tagged { length, .. } => Some(length + 1),
            AuxShape::MachineBacked { .. } => None,
        }
    }

    /// The `count` least even indices in `src` whose functions extend
    /// `prefix`. `search_budget` bounds the number of candidates examined.
    pub fn find_extenders(
        &self,
        prefix: Prefix,
        src: &dyn Fn(u64) -> bool,
        count: usize,
        search_budget: u64,
    ) -> Result<Vec<u64>, NotFoundWithinBudget> {
        assert!(count >= 1);
        let mut found = Vec::with_capacity(count);
        let mut examined = 0;
        let fail = |found: &Vec<u64>, examined| NotFoundWithinBudget {
            found: found.len(),
            examined,
        };
        if prefix.length == 0 {
            let mut k = 0u64;
            while found.len() < count {
                if examined >= search_budget {
                    return Err(fail(&found, examined));
                }
                examined += 1;
                if src(k) {
                    found.push(k);
                }
                k = k.checked_add(2).ok_or_else(|| fail(&found, examined))?;
            }
            return Ok(found);
        }
        // Constant part of length n >= prefix.length: r = <n-1, u> with
        // n - 1 >= prefix.length - 1. Indices grow with r.
        let mut r = checked_pair(prefix.length - 1, 0).ok_or_else(|| fail(&found, 0))?;
        while found.len() < count {
            if examined >= search_budget {
                return Err(fail(&found, examined));
            }
            let (n1, u) = unpair(r);
            if n1 + 1 < prefix.length {
                // Skip to the first qualifying index on this diagonal.
                let d = n1 + u;
                r = checked_pair(prefix.length - 1, d + 1 - prefix.length)
                    .ok_or_else(|| fail(&found, examined))?;
                continue;
            }
            {
                examined += 1;
                let k = checked_pair(prefix.value, r)
                    .and_then(|v| v.checked_mul(2))
                    .ok_or_else(|| fail(&found, examined))?;
                if src(k) {
                    found.push(k);
                }
            }
            r = r.checked_add(1).ok_or_else(|| fail(&found, examined))?;
        }
        Ok(found)
    }
}

/// The evaluation environment used throughout: the reference machine plus
/// the auxiliary numberings of the configured families.
#[derive(Clone, Debug)]
pub struct StandardEnv {
    pub machine: Machine,
    families: Vec<Family>,
}

impl Default for StandardEnv {
    fn default() -> Self {
        StandardEnv::with_families(Machine::default(), &Family::ALL)
    }
}

impl StandardEnv {
    pub fn new(machine: Machine) -> Self {
        StandardEnv::with_families(machine, &Family::ALL)
    }

    pub fn with_families(machine: Machine, families: &[Family]) -> Self {
        StandardEnv {
            machine,
            families: families.to_vec(),
        }
    }

    fn numbering(&self, family: Family) -> Result<AuxNumbering, KernelError> {
        if self.families.contains(&family) {
            Ok(AuxNumbering::new(family))
        } else {
            Err(KernelError::UnknownFamily(family))
        }
    }
}

impl EvalEnv for StandardEnv {
    fn machine_eval(&self, index: u64, x: u64, budget: u64) -> EvalOutcome {
        self.machine.step_eval(index, x, budget)
    }

    fn aux_eval(
        &self,
        family: Family,
        index: u64,
        x: u64,
        budget: u64,
    ) -> Result<EvalOutcome, KernelError> {
        Ok(self
            .numbering(family)?
            .eval(&self.machine, index, x, budget))
    }

    fn aux_separate(
        &self,
        family: Family,
        a: u64,
        b: u64,
        _budget: u64,
    ) -> Result<EqVerdict, KernelError> {
        self.numbering(family)?.separate(a, b)
    }

    fn aux_domain_bound(&self, family: Family, index: u64) -> Result<Option<u64>, KernelError> {
        Ok(self.numbering(family)?.domain_bound(index))
    }
}
