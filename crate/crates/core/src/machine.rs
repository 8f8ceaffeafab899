//! The reference programming system: a small register machine with
//! step-bounded evaluation, plus a registry of scripted indices that tests
//! and scenarios use to play specific `W_i` and `phi_l`.
//!
//! Program indices decode as numerals in bijective base 86, least significant
//! digit first, one digit per instruction. Every natural is a program and
//! `0` is the empty program (the identity, halting in zero steps).

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::path::Path;

use thiserror::Error;

use crate::kernel::EvalOutcome;

pub const REGISTERS: usize = 4;
pub const MAX_TARGET: u8 = 16;
const ALPHABET: u64 = 86;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Instr {
    /// Padding no-op.
    Nop,
    Halt,
    Inc(u8),
    /// Decrement the register, or jump to the target when it is zero.
    DecJz(u8, u8),
    Jmp(u8),
}

impl Instr {
    fn digit(self) -> u64 {
        match self {
            Instr::Nop => 0,
            Instr::Halt => 1,
            Instr::Inc(r) => 2 + r as u64,
            Instr::DecJz(r, t) => 6 + r as u64 * MAX_TARGET as u64 + t as u64,
            Instr::Jmp(t) => 70 + t as u64,
        }
    }

    fn from_digit(d: u64) -> Instr {
        match d {
            0 => Instr::Nop,
            1 => Instr::Halt,
            2..=5 => Instr::Inc((d - 2) as u8),
            6..=69 => {
                let d = d - 6;
                Instr::DecJz((d / 16) as u8, (d % 16) as u8)
            }
            70..=85 => Instr::Jmp((d - 70) as u8),
            _ => unreachable!("digit out of range"),
        }
    }

    fn is_valid(self) -> bool {
        match self {
            Instr::Inc(r) => (r as usize) < REGISTERS,
            Instr::DecJz(r, t) => (r as usize) < REGISTERS && t < MAX_TARGET,
            Instr::Jmp(t) => t < MAX_TARGET,
            Instr::Nop | Instr::Halt => true,
        }
    }
}

/// Decoding is total: every index names exactly one program.
pub fn decode(mut e: u64) -> Vec<Instr> {
    let mut program = Vec::new();
    while e > 0 {
        program.push(Instr::from_digit((e - 1) % ALPHABET));
        e = (e - 1) / ALPHABET;
    }
    program
}

/// Inverse of [`decode`]; `None` if an instruction is malformed or the index
/// overflows.
pub fn assemble(program: &[Instr]) -> Option<u64> {
    let mut e: u64 = 0;
    for instr in program.iter().rev() {
        if !instr.is_valid() {
            return None;
        }
        e = e.checked_mul(ALPHABET)?.checked_add(instr.digit() + 1)?;
    }
    Some(e)
}

/// A handful of programs the tests and scenarios refer to by name.
pub mod programs {
    use super::{assemble, Instr};

    pub fn identity() -> u64 {
        0
    }

    pub fn successor() -> u64 {
        assemble(&[Instr::Inc(0)]).unwrap()
    }

    /// Loops on every input.
    pub fn looping() -> u64 {
        assemble(&[Instr::Jmp(0)]).unwrap()
    }

    /// Counts register 1 up forever; never revisits a state.
    pub fn counter() -> u64 {
        assemble(&[Instr::Inc(1), Instr::Jmp(0)]).unwrap()
    }

    /// `lambda x. c` for `c <= 7`.
    pub fn constant(c: u8) -> u64 {
        let mut p = vec![Instr::DecJz(0, 2), Instr::Jmp(0)];
        p.extend(std::iter::repeat_n(Instr::Inc(0), c as usize));
        assemble(&p).expect("constant program too long")
    }

    /// `identity` padded with `n` no-ops: same function, different index.
    pub fn padded_identity(n: usize) -> u64 {
        assemble(&vec![Instr::Nop; n]).unwrap()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
struct MachineState {
    pc: usize,
    regs: [u64; REGISTERS],
}

/// A resumable computation with Brent cycle detection.
#[derive(Clone, Debug)]
pub struct Run {
    program: std::sync::Arc<Vec<Instr>>,
    state: MachineState,
    steps: u64,
    checkpoint: MachineState,
    power: u64,
    lambda: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RunStatus {
    /// Halted after `steps` executed instructions with `value` in register 0.
    Halted {
        steps: u64,
        value: u64,
    },
    /// A machine state repeated: the computation never halts.
    Cycles,
    Running,
}

impl Run {
    pub fn new(program: std::sync::Arc<Vec<Instr>>, input: u64) -> Self {
        let mut regs = [0; REGISTERS];
        regs[0] = input;
        let state = MachineState { pc: 0, regs };
        Run {
            program,
            state,
            steps: 0,
            checkpoint: state,
            power: 1,
            lambda: 0,
        }
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    /// Executes until halting, cycling, or `max_steps` instructions in total.
    pub fn advance(&mut self, max_steps: u64) -> RunStatus {
        loop {
            if self.state.pc >= self.program.len() {
                return RunStatus::Halted {
                    steps: self.steps,
                    value: self.state.regs[0],
                };
            }
            if self.steps >= max_steps {
                return RunStatus::Running;
            }
            let s = &mut self.state;
            match self.program[s.pc] {
                Instr::Nop => s.pc += 1,
                Instr::Halt => s.pc = usize::MAX,
                Instr::Inc(r) => {
                    s.regs[r as usize] = s.regs[r as usize].saturating_add(1);
                    s.pc += 1;
                }
                Instr::DecJz(r, t) => {
                    if s.regs[r as usize] == 0 {
                        s.pc = t as usize;
                    } else {
                        s.regs[r as usize] -= 1;
                        s.pc += 1;
                    }
                }
                Instr::Jmp(t) => s.pc = t as usize,
            }
            self.steps += 1;
            if self.state.pc < self.program.len() {
                self.lambda += 1;
                if self.state == self.checkpoint {
                    return RunStatus::Cycles;
                }
                if self.lambda == self.power {
                    self.checkpoint = self.state;
                    self.power *= 2;
                    self.lambda = 0;
                }
            }
        }
    }
}

/// Runs program `e` on `x` for at most `max_steps` instructions.
pub fn run_program(e: u64, x: u64, max_steps: u64) -> RunStatus {
    Run::new(std::sync::Arc::new(decode(e)), x).advance(max_steps)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Script {
    /// `phi_e(x) = y`, revealed at a step.
    Graph(BTreeMap<u64, (u64, u64)>),
    /// Elements of `W_e` (with value 0), revealed at a step.
    Set(BTreeMap<u64, u64>),
}

impl Script {
    fn lookup(&self, x: u64) -> Option<(u64, u64)> {
        match self {
            Script::Graph(g) => g.get(&x).copied(),
            Script::Set(s) => s.get(&x).map(|&step| (step, 0)),
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ScriptError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("cannot read script file {path}: {msg}")]
    Io { path: String, msg: String },
}

/// Scripted indices. An index is served by its script iff it is registered;
/// every other index decodes as a machine program.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ScriptRegistry {
    scripts: BTreeMap<u64, Script>,
    last_step: BTreeMap<u64, u64>,
}

impl ScriptRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn is_scripted(&self, e: u64) -> bool {
        self.scripts.contains_key(&e)
    }

    pub fn indices(&self) -> impl Iterator<Item = u64> + '_ {
        self.scripts.keys().copied()
    }

    pub fn get(&self, e: u64) -> Option<&Script> {
        self.scripts.get(&e)
    }

    /// Registers an index with no reveals: it is nowhere defined.
    pub fn silence(&mut self, index: u64) -> Result<(), String> {
        match self.scripts.get(&index) {
            None => {
                self.scripts.insert(index, Script::Set(BTreeMap::new()));
                Ok(())
            }
            Some(_) => Ok(()),
        }
    }

    pub fn reveal_set(&mut self, index: u64, step: u64, element: u64) -> Result<(), String> {
        self.check_step(index, step)?;
        let entry = self
            .scripts
            .entry(index)
            .or_insert_with(|| Script::Set(BTreeMap::new()));
        match entry {
            Script::Set(s) => {
                s.entry(element).or_insert(step);
            }
            Script::Graph(g) if g.is_empty() => {
                *entry = Script::Set(BTreeMap::from([(element, step)]));
            }
            Script::Graph(_) => return Err(format!("index {index} already has a graph script")),
        }
        self.last_step.insert(index, step);
        Ok(())
    }

    pub fn reveal_graph(
        &mut self,
        index: u64,
        step: u64,
        input: u64,
        output: u64,
    ) -> Result<(), String> {
        self.check_step(index, step)?;
        let entry = self
            .scripts
            .entry(index)
            .or_insert_with(|| Script::Graph(BTreeMap::new()));
        if let Script::Set(s) = entry {
            if s.is_empty() {
                *entry = Script::Graph(BTreeMap::new());
            } else {
                return Err(format!("index {index} already has a set script"));
            }
        }
        let Script::Graph(g) = entry else {
            unreachable!()
        };
        match g.get(&input) {
            Some(&(_, y)) if y != output => {
                return Err(format!(
                    "index {index} input {input} revealed with outputs {y} and {output}"
                ))
            }
            Some(_) => {}
            None => {
                g.insert(input, (step, output));
            }
        }
        self.last_step.insert(index, step);
        Ok(())
    }

    fn check_step(&self, index: u64, step: u64) -> Result<(), String> {
        match self.last_step.get(&index) {
            Some(&last) if step < last => Err(format!(
                "index {index}: step {step} after step {last} (steps must not decrease)"
            )),
            _ => Ok(()),
        }
    }

    /// Parses `W <index> <step> <element>` and `G <index> <step> <input> <output>`
    /// records; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self, ScriptError> {
        let mut reg = ScriptRegistry::new();
        reg.extend_from_text(text)?;
        Ok(reg)
    }

    pub fn extend_from_text(&mut self, text: &str) -> Result<(), ScriptError> {
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |msg: String| ScriptError::Parse { line: n + 1, msg };
            let fields: Vec<&str> = line.split_whitespace().collect();
            let nums = fields[1..]
                .iter()
                .map(|f| f.parse::<u64>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| err(format!("bad number: {e}")))?;
            match (fields[0], nums.as_slice()) {
                ("W", [index, step, elem]) => self.reveal_set(*index, *step, *elem).map_err(err)?,
                ("G", [index, step, x, y]) => {
                    self.reveal_graph(*index, *step, *x, *y).map_err(err)?
                }
                ("Z", [index]) => self.silence(*index).map_err(err)?,
                _ => return Err(err(format!("unrecognized record `{line}`"))),
            }
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, ScriptError> {
        let text = std::fs::read_to_string(path).map_err(|e| ScriptError::Io {
            path: path.display().to_string(),
            msg: e.to_string(),
        })?;
        Self::parse(&text)
    }

    /// Records sorted by index, then step, then argument.
    pub fn to_records(&self) -> Vec<String> {
        let mut out = Vec::new();
        for (&index, script) in &self.scripts {
            let mut recs: Vec<(u64, u64, String)> = match script {
                Script::Set(s) if s.is_empty() => {
                    out.push(format!("Z {index}"));
                    continue;
                }
                Script::Graph(g) if g.is_empty() => {
                    out.push(format!("Z {index}"));
                    continue;
                }
                Script::Set(s) => s
                    .iter()
                    .map(|(&x, &step)| (step, x, format!("W {index} {step} {x}")))
                    .collect(),
                Script::Graph(g) => g
                    .iter()
                    .map(|(&x, &(step, y))| (step, x, format!("G {index} {step} {x} {y}")))
                    .collect(),
            };
            recs.sort();
            out.extend(recs.into_iter().map(|r| r.2));
        }
        out
    }
}

/// What unscripted indices compute.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Fallback {
    /// Decode as register-machine programs.
    #[default]
    Programs,
    /// Nowhere defined: only scripted indices do anything.
    Nowhere,
}

impl fmt::Display for Fallback {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Fallback::Programs => "machine",
            Fallback::Nowhere => "scripted",
        })
    }
}

impl std::str::FromStr for Fallback {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "machine" => Ok(Fallback::Programs),
            "scripted" => Ok(Fallback::Nowhere),
            _ => Err(format!("unknown opponents mode `{s}` (machine|scripted)")),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Machine {
    pub scripts: ScriptRegistry,
    pub fallback: Fallback,
}

impl Machine {
    pub fn new(scripts: ScriptRegistry, fallback: Fallback) -> Self {
        Machine { scripts, fallback }
    }

    /// `phi_e^s(x)`: converges iff `x < s` and the computation halts in fewer
    /// than `s` steps.
    pub fn step_eval(&self, e: u64, x: u64, s: u64) -> EvalOutcome {
        if x >= s {
            return EvalOutcome::BudgetExhausted(s);
        }
        if let Some(script) = self.scripts.get(e) {
            return match script.lookup(x) {
                Some((step, y)) if step < s => EvalOutcome::Converges(y),
                _ => EvalOutcome::BudgetExhausted(s),
            };
        }
        if self.fallback == Fallback::Nowhere {
            return EvalOutcome::BudgetExhausted(s);
        }
        match run_program(e, x, s - 1) {
            RunStatus::Halted { value, .. } => EvalOutcome::Converges(value),
            _ => EvalOutcome::BudgetExhausted(s),
        }
    }

    /// `W_e^s`.
    pub fn w_enum(&self, e: u64, s: u64) -> BTreeSet<u64> {
        (0..s)
            .filter(|&x| matches!(self.step_eval(e, x, s), EvalOutcome::Converges(_)))
            .collect()
    }

    /// `rng(phi_e^s)`.
    pub fn range_enum(&self, e: u64, s: u64) -> BTreeSet<u64> {
        (0..s)
            .filter_map(|x| self.step_eval(e, x, s).value())
            .collect()
    }
}

/// Incremental step-bounded graphs for engines that ask about the same
/// indices at every stage. Results agree with [`Machine::step_eval`].
#[derive(Debug, Default)]
pub struct ProgramCache {
    entries: HashMap<u64, ProgramIndex>,
}

#[derive(Debug)]
struct ProgramIndex {
    program: std::sync::Arc<Vec<Instr>>,
    explored: u64,
    /// `(x, stage at which phi(x) appears, value)`, in order of x.
    halted: BTreeMap<u64, (u64, u64)>,
    /// Least stage at which each value enters the range.
    appear: HashMap<u64, u64>,
    pending: Vec<(u64, Run)>,
}

impl ProgramCache {
    pub fn new() -> Self {
        Self::default()
    }

    fn index(&mut self, e: u64, s: u64) -> &ProgramIndex {
        let idx = self.entries.entry(e).or_insert_with(|| ProgramIndex {
            program: std::sync::Arc::new(decode(e)),
            explored: 0,
            halted: BTreeMap::new(),
            appear: HashMap::new(),
            pending: Vec::new(),
        });
        idx.advance(s);
        idx
    }

    /// The graph of `phi_e^s` as `(x, y)` pairs in increasing `x`.
    pub fn graph(&mut self, machine: &Machine, e: u64, s: u64) -> Vec<(u64, u64)> {
        if let Some(script) = machine.scripts.get(e) {
            return match script {
                Script::Graph(g) => g
                    .iter()
                    .filter(|(&x, &(step, _))| x < s && step < s)
                    .map(|(&x, &(_, y))| (x, y))
                    .collect(),
                Script::Set(set) => set
                    .iter()
                    .filter(|(&x, &step)| x < s && step < s)
                    .map(|(&x, _)| (x, 0))
                    .collect(),
            };
        }
        if machine.fallback == Fallback::Nowhere {
            return Vec::new();
        }
        self.index(e, s)
            .halted
            .iter()
            .filter(|(_, &(at, _))| at <= s)
            .map(|(&x, &(_, y))| (x, y))
            .collect()
    }

    /// `W_e^s` in increasing order.
    pub fn domain(&mut self, machine: &Machine, e: u64, s: u64) -> Vec<u64> {
        self.graph(machine, e, s)
            .into_iter()
            .map(|(x, _)| x)
            .collect()
    }

    /// Whether `y ∈ rng(phi_e^s)`.
    pub fn range_contains(&mut self, machine: &Machine, e: u64, s: u64, y: u64) -> bool {
        if machine.scripts.is_scripted(e) || machine.fallback == Fallback::Nowhere {
            return self.graph(machine, e, s).iter().any(|&(_, v)| v == y);
        }
        self.index(e, s).appear.get(&y).is_some_and(|&a| a <= s)
    }

    /// `rng(phi_e^s)`.
    pub fn range(&mut self, machine: &Machine, e: u64, s: u64) -> BTreeSet<u64> {
        self.graph(machine, e, s)
            .into_iter()
            .map(|(_, y)| y)
            .collect()
    }
}

impl ProgramIndex {
    fn record(&mut self, x: u64, steps: u64, value: u64) {
        let at = x.max(steps) + 1;
        self.halted.insert(x, (at, value));
        let slot = self.appear.entry(value).or_insert(at);
        *slot = (*slot).min(at);
    }

    fn advance(&mut self, s: u64) {
        if s == 0 {
            return;
        }
        let limit = s - 1;
        let pending = std::mem::take(&mut self.pending);
        for (x, mut run) in pending {
            match run.advance(limit) {
                RunStatus::Halted { steps, value } => self.record(x, steps, value),
                RunStatus::Cycles => {}
                RunStatus::Running => self.pending.push((x, run)),
            }
        }
        while self.explored < s {
            let x = self.explored;
            let mut run = Run::new(self.program.clone(), x);
            match run.advance(limit) {
                RunStatus::Halted { steps, value } => self.record(x, steps, value),
                RunStatus::Cycles => {}
                RunStatus::Running => self.pending.push((x, run)),
            }
            self.explored += 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn decode_is_inverse_of_assemble() {
        for e in 0..20_000u64 {
            assert_eq!(assemble(&decode(e)), Some(e));
        }
        assert_eq!(decode(0), vec![]);
        assert_eq!(decode(1), vec![Instr::Nop]);
    }

    #[test]
    fn x_bound_law() {
        let m = Machine::default();
        assert_eq!(m.step_eval(0, 5, 3), EvalOutcome::BudgetExhausted(3));
        assert_eq!(m.step_eval(0, 0, 100), EvalOutcome::Converges(0));
    }

    #[test]
    fn named_programs() {
        let m = Machine::default();
        assert_eq!(
            m.step_eval(programs::successor(), 4, 10),
            EvalOutcome::Converges(5)
        );
        assert_eq!(
            m.step_eval(programs::looping(), 0, 1000),
            EvalOutcome::BudgetExhausted(1000)
        );
        assert_eq!(
            m.step_eval(programs::counter(), 0, 1000),
            EvalOutcome::BudgetExhausted(1000)
        );
        for c in 0..=7u8 {
            for x in 0..6 {
                assert_eq!(
                    m.step_eval(programs::constant(c), x, 200),
                    EvalOutcome::Converges(c as u64)
                );
            }
        }
        let padded = programs::padded_identity(3);
        assert_ne!(padded, programs::identity());
        assert_eq!(m.step_eval(padded, 4, 10), EvalOutcome::Converges(4));
    }

    #[test]
    fn step_count_is_strict() {
        // Identity padded with two no-ops halts after 2 steps: needs s > 2.
        let m = Machine::default();
        let e = programs::padded_identity(2);
        assert_eq!(m.step_eval(e, 0, 2), EvalOutcome::BudgetExhausted(2));
        assert_eq!(m.step_eval(e, 0, 3), EvalOutcome::Converges(0));
    }

    #[test]
    fn looping_programs_are_detected_as_cycles() {
        assert_eq!(
            run_program(programs::looping(), 3, u64::MAX),
            RunStatus::Cycles
        );
        assert_eq!(
            run_program(programs::counter(), 3, 10_000),
            RunStatus::Running
        );
    }

    fn replay_set(script: &[(u64, u64)], s: u64) -> BTreeSet<u64> {
        // Brute-force replay: an element is in W^s iff x < s and revealed before s.
        script
            .iter()
            .filter(|&&(step, x)| x < s && step < s)
            .map(|&(_, x)| x)
            .collect()
    }

    #[test]
    fn scripted_set_examples() {
        let evens: Vec<(u64, u64)> = (0..10).map(|t| (t, 2 * t)).collect();
        let mut reg = ScriptRegistry::new();
        for &(step, x) in &evens {
            reg.reveal_set(1 << 20, step, x).unwrap();
        }
        let m = Machine::new(reg, Fallback::Programs);
        let expected = replay_set(&evens, 4);
        assert_eq!(expected, BTreeSet::from([0, 2]));
        assert_eq!(m.w_enum(1 << 20, 4), expected);
        assert!(m.w_enum(0, 0).is_empty());
        assert!(m.w_enum(programs::looping(), 50).is_empty());
    }

    #[test]
    fn scripted_graph_examples() {
        let mut reg = ScriptRegistry::new();
        reg.reveal_graph(7, 4, 1, 9).unwrap();
        reg.reveal_graph(8, 1, 0, 10).unwrap();
        reg.reveal_graph(8, 1, 1, 11).unwrap();
        let m = Machine::new(reg, Fallback::Programs);
        assert_eq!(m.step_eval(7, 1, 5), EvalOutcome::Converges(9));
        assert_eq!(m.step_eval(7, 1, 4), EvalOutcome::BudgetExhausted(4));
        assert_eq!(m.range_enum(8, 3), BTreeSet::from([10, 11]));
        assert!(m.range_enum(8, 0).is_empty());
    }

    #[test]
    fn identity_range_oracle() {
        // Replay oracle: identity halts in 0 steps, so rng(phi^s) = {x < s}.
        let m = Machine::default();
        let expected: BTreeSet<u64> = (0..4).collect();
        assert_eq!(m.range_enum(programs::identity(), 4), expected);
        let halt_id = assemble(&[Instr::Halt]).unwrap();
        // One step each: converges iff 1 < s, and x < s.
        assert_eq!(m.range_enum(halt_id, 4), expected);
        assert!(m.range_enum(halt_id, 1).is_empty());
    }

    #[test]
    fn script_file_format() {
        let text = "# adversary\nW 3 1 59\nW 3 5 60\nG 9 2 0 28\nZ 11\n";
        let reg = ScriptRegistry::parse(text).unwrap();
        assert!(reg.is_scripted(3) && reg.is_scripted(9) && reg.is_scripted(11));
        assert_eq!(
            reg.to_records(),
            vec!["W 3 1 59", "W 3 5 60", "G 9 2 0 28", "Z 11"]
        );
        assert_eq!(
            ScriptRegistry::parse(&reg.to_records().join("\n")).unwrap(),
            reg
        );
    }

    #[test]
    fn script_file_rejects_decreasing_steps() {
        let err = ScriptRegistry::parse("W 3 5 1\nW 3 4 2\n").unwrap_err();
        assert!(matches!(err, ScriptError::Parse { line: 2, .. }));
        let err = ScriptRegistry::parse("G 3 1 0 1\nG 3 2 0 2\n").unwrap_err();
        assert!(matches!(err, ScriptError::Parse { line: 2, .. }));
        assert!(ScriptRegistry::parse("X 1 2").is_err());
        assert!(ScriptRegistry::parse("W 1 2 3\nG 1 4 0 0").is_err());
    }

    #[test]
    fn nowhere_fallback_silences_programs() {
        let m = Machine::new(ScriptRegistry::new(), Fallback::Nowhere);
        assert!(m.w_enum(0, 100).is_empty());
    }

    #[test]
    fn program_cache_matches_direct_evaluation() {
        let m = Machine::default();
        let mut cache = ProgramCache::new();
        for e in [
            0,
            1,
            2,
            3,
            7,
            23,
            71,
            programs::counter(),
            programs::successor(),
        ] {
            for s in [0u64, 1, 3, 8, 20, 20, 5, 64] {
                let direct = m.range_enum(e, s);
                assert_eq!(cache.range(&m, e, s), direct);
                for y in 0..70 {
                    assert_eq!(
                        cache.range_contains(&m, e, s, y),
                        direct.contains(&y),
                        "e={e} s={s} y={y}"
                    );
                }
                let w: Vec<u64> = m.w_enum(e, s).into_iter().collect();
                assert_eq!(cache.domain(&m, e, s), w);
            }
        }
    }

    proptest! {
        #[test]
        fn graph_monotone_in_steps(e in 0u64..5000, x in 0u64..20, s in 0u64..200) {
            let m = Machine::default();
            if let EvalOutcome::Converges(y) = m.step_eval(e, x, s) {
                prop_assert_eq!(m.step_eval(e, x, s + 1), EvalOutcome::Converges(y));
                prop_assert_eq!(m.step_eval(e, x, s + 37), EvalOutcome::Converges(y));
            }
            prop_assert_eq!(m.step_eval(e, x, s), m.step_eval(e, x, s));
        }

        #[test]
        fn w_enum_monotone(e in 0u64..3000, s in 0u64..60) {
            let m = Machine::default();
            prop_assert!(m.w_enum(e, s).is_subset(&m.w_enum(e, s + 1)));
        }
    }
}
