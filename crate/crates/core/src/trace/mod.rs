//! Line-oriented traces of engine runs, replay, invariant checking and
//! block-evolution rendering.
//!
//! ```text
//! # eps-workbench trace v1
//! config construction=single horizon=3 ...
//! script W 3 100 2108
//! s=0 f=<0,0> st=fired fx: src- 0 + dst- 1 + rule prog 1 aux(single,0)
//! s=1 f=<0,1> st=fired fx: ...
//! s=2 f=<1,0,-> st=idle
//! ```

pub mod check;
pub mod faults;
pub mod render;

use std::fmt;
use std::fmt::Write as _;

use thiserror::Error;

use crate::config::RunConfig;
use crate::engines::{Effect, EngineState, Form};
use crate::machine::{Machine, ScriptRegistry};

pub const HEADER: &str = "# eps-workbench trace v1";

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Status {
    Idle,
    Fired,
    Deferred(String),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TraceRecord {
    pub stage: u64,
    pub form: Form,
    pub status: Status,
    pub effects: Vec<Effect>,
}

impl TraceRecord {
    pub fn fired(&self) -> bool {
        self.status == Status::Fired
    }
}

impl fmt::Display for TraceRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "s={} f={} st=", self.stage, self.form)?;
        match &self.status {
            Status::Idle => f.write_str("idle"),
            Status::Deferred(why) => write!(f, "deferred why={why}"),
            Status::Fired => {
                f.write_str("fired fx: ")?;
                for (n, e) in self.effects.iter().enumerate() {
                    if n > 0 {
                        f.write_str(" + ")?;
                    }
                    write!(f, "{e}")?;
                }
                Ok(())
            }
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("trace line {line}: {msg}")]
pub struct TraceError {
    pub line: usize,
    pub msg: String,
}

/// A complete run: its configuration, the adversary scripts it saw, and one
/// record per stage.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Trace {
    pub config: RunConfig,
    pub scripts: Vec<String>,
    pub records: Vec<TraceRecord>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Phase {
    Before,
    After,
}

impl Trace {
    pub fn serialize(&self) -> String {
        let mut out = String::new();
        writeln!(out, "{HEADER}").unwrap();
        writeln!(out, "config {}", self.config.header()).unwrap();
        for s in &self.scripts {
            writeln!(out, "script {s}").unwrap();
        }
        for r in &self.records {
            writeln!(out, "{r}").unwrap();
        }
        out
    }

    pub fn parse(text: &str) -> Result<Trace, TraceError> {
        let mut lines = text.lines().enumerate();
        let err = |line: usize, msg: String| TraceError { line, msg };
        match lines.next() {
            Some((_, l)) if l.trim_end() == HEADER => {}
            _ => return Err(err(1, format!("expected `{HEADER}`"))),
        }
        let config = match lines.next() {
            Some((_, l)) => {
                let rest = l
                    .strip_prefix("config ")
                    .ok_or_else(|| err(2, "expected `config ...`".into()))?;
                RunConfig::from_header(rest).map_err(|e| err(2, e.to_string()))?
            }
            None => return Err(err(2, "missing config line".into())),
        };
        let mut scripts = Vec::new();
        let mut records: Vec<TraceRecord> = Vec::new();
        for (n, line) in lines {
            let ln = n + 1;
            if line.trim().is_empty() {
                continue;
            }
            if let Some(s) = line.strip_prefix("script ") {
                if !records.is_empty() {
                    return Err(err(ln, "script line after records".into()));
                }
                ScriptRegistry::parse(s).map_err(|e| err(ln, e.to_string()))?;
                scripts.push(s.to_string());
                continue;
            }
            let record = parse_record(line, config.construction).map_err(|m| err(ln, m))?;
            if record.stage != records.len() as u64 {
                return Err(err(
                    ln,
                    format!("expected stage {}, found {}", records.len(), record.stage),
                ));
            }
            let form = Form::decode(record.stage, config.construction);
            if record.form != form {
                return Err(err(ln, format!("stage {} has form {form}", record.stage)));
            }
            records.push(record);
        }
        Ok(Trace {
            config,
            scripts,
            records,
        })
    }

    /// The opponents the run consulted.
    pub fn machine(&self) -> Machine {
        let reg = ScriptRegistry::parse(&self.scripts.join("\n"))
            .expect("trace scripts were validated when the trace was built");
        Machine::new(reg, self.config.opponents)
    }

    /// Replays every record, calling `f` before and after its effects are
    /// applied.
    pub fn replay(&self, mut f: impl FnMut(Phase, &EngineState, &TraceRecord)) -> EngineState {
        let mut state = EngineState::new(self.config.construction, self.config.scope);
        for r in &self.records {
            f(Phase::Before, &state, r);
            state.apply_record(r);
            f(Phase::After, &state, r);
        }
        state
    }

    pub fn final_state(&self) -> EngineState {
        self.replay(|_, _, _| {})
    }

    /// State after the first `stages` records.
    pub fn state_at(&self, stages: u64) -> EngineState {
        let mut state = EngineState::new(self.config.construction, self.config.scope);
        for r in self.records.iter().take(stages as usize) {
            state.apply_record(r);
        }
        state
    }
}

fn parse_record(
    line: &str,
    construction: crate::engines::Construction,
) -> Result<TraceRecord, String> {
    let bad = |m: &str| format!("{m} in `{line}`");
    let (head, fx) = match line.split_once(" fx: ") {
        Some((h, fx)) => (h, Some(fx)),
        None => (line, None),
    };
    let mut parts = head.split_whitespace();
    let stage = parts
        .next()
        .and_then(|t| t.strip_prefix("s="))
        .and_then(|t| t.parse().ok())
        .ok_or_else(|| bad("missing stage"))?;
    let form = parts
        .next()
        .and_then(|t| t.strip_prefix("f="))
        .ok_or_else(|| bad("missing form"))?;
    let form = Form::parse(form, construction)?;
    let status = match parts.next() {
        Some("st=idle") => Status::Idle,
        Some("st=fired") => Status::Fired,
        Some("st=deferred") => {
            let why = parts
                .next()
                .and_then(|t| t.strip_prefix("why="))
                .ok_or_else(|| bad("missing deferral reason"))?;
            Status::Deferred(why.to_string())
        }
        _ => return Err(bad("missing status")),
    };
    if parts.next().is_some() {
        return Err(bad("trailing fields"));
    }
    let effects: Vec<Effect> = match fx {
        Some(fx) => fx.split(" + ").map(str::parse).collect::<Result<_, _>>()?,
        None => Vec::new(),
    };
    if (status == Status::Fired) != !effects.is_empty() {
        return Err(bad("effects must be present exactly when the stage fired"));
    }
    Ok(TraceRecord {
        stage,
        form,
        status,
        effects,
    })
}

#[cfg(test)]
mod tests {
    use super::check::{check, SUITES};
    use super::*;
    use crate::engines::{run, Construction, Scope};
    use crate::machine::Fallback;
    use proptest::prelude::*;

    #[test]
    fn empty_trace_is_header_only() {
        let config = RunConfig {
            horizon: 1,
            ..RunConfig::default()
        };
        let t = Trace {
            config,
            scripts: vec![],
            records: vec![],
        };
        let text = t.serialize();
        assert_eq!(text.lines().count(), 2);
        assert!(text.starts_with(HEADER));
        assert_eq!(Trace::parse(&text).unwrap(), t);
    }

    #[test]
    fn garbage_fails_at_line_one() {
        assert_eq!(Trace::parse("garbage").unwrap_err().line, 1);
        assert_eq!(Trace::parse("").unwrap_err().line, 1);
    }

    #[test]
    fn malformed_records_name_their_line() {
        let good = faults::translate_trace().serialize();
        let mut lines: Vec<String> = good.lines().map(String::from).collect();
        let at = lines.iter().position(|l| l.starts_with("s=3 ")).unwrap();
        for bad in [
            "s=4 f=<2,0,-> st=idle",
            "s=3 f=<1,0,-> st=idle",
            "s=3 f=<0,2> st=fired",
            "s=3 f=<0,2> st=idle fx: dst- 5",
            "s=3 f=<0,2> st=fired fx: frob 1",
            "s=3 f=<0,2>",
        ] {
            let saved = std::mem::replace(&mut lines[at], bad.into());
            let err = Trace::parse(&lines.join("\n")).unwrap_err();
            assert_eq!(err.line, at + 1, "{bad}: {err}");
            lines[at] = saved;
        }
        assert!(Trace::parse(&lines.join("\n")).is_ok());
    }

    #[test]
    fn script_lines_precede_records() {
        let text = faults::translate_trace().serialize() + "script W 5 0 1\n";
        assert!(Trace::parse(&text)
            .unwrap_err()
            .msg
            .contains("script line after records"));
    }

    #[test]
    fn state_at_prefix() {
        let t = faults::refute_trace();
        assert_eq!(
            t.state_at(0),
            EngineState::new(Construction::Single, Scope::TriggerRow)
        );
        assert_eq!(t.state_at(t.records.len() as u64), t.final_state());
        let s = t
            .records
            .iter()
            .position(|r| r.form == Form::Refute { i: 1 } && r.fired())
            .unwrap();
        assert!(!t.state_at(s as u64).r_flags.contains_key(&1));
        assert!(t.state_at(s as u64 + 1).r_flags.contains_key(&1));
    }

    #[test]
    fn healthy_fixtures_pass() {
        for t in [
            faults::translate_trace(),
            faults::refute_trace(),
            faults::onto_trace(),
        ] {
            let report = check(&t, &SUITES);
            assert!(report.all_pass(), "{report}");
        }
    }

    #[test]
    fn each_fault_fails_only_its_suite() {
        for suite in SUITES {
            let t = faults::planted(suite).unwrap();
            let t = Trace::parse(&t.serialize()).expect("fixtures serialize");
            let report = check(&t, &SUITES);
            let failed: Vec<&str> = report.failures().iter().map(|r| r.name).collect();
            assert_eq!(failed, vec![suite], "\n{report}");
        }
        assert!(faults::planted("nonsense").is_none());
    }

    #[test]
    fn dst_fault_reports_its_stage() {
        let t = faults::planted("dst-empty").unwrap();
        let s = t
            .records
            .iter()
            .position(|r| r.form != (Form::Assign { l: 2 }) && r.effects == [Effect::DstRemove(5)])
            .unwrap() as u64;
        let report = check(&t, &["dst-empty"]);
        match &report.get("dst-empty").unwrap().verdict {
            check::Verdict::Fail { stage, .. } => assert_eq!(*stage, Some(s)),
            v => panic!("{v:?}"),
        }
    }

    #[test]
    fn suite_selection() {
        assert_eq!(check::parse_suites("all").unwrap().len(), SUITES.len());
        assert_eq!(
            check::parse_suites("merge-law, dst-empty").unwrap(),
            vec!["merge-law", "dst-empty"]
        );
        assert!(check::parse_suites("merge-law,bogus").is_err());
    }

    fn script_strategy() -> impl Strategy<Value = String> {
        let graph = (0u64..3, 0u64..40, 0u64..6, 0u64..80);
        let set = (0u64..4, 0u64..40, 0u64..2000);
        (
            proptest::collection::vec(graph, 0..12),
            proptest::collection::vec(set, 0..6),
        )
            .prop_map(|(mut g, mut w)| {
                g.sort_by_key(|x| (x.0, x.1));
                w.sort_by_key(|x| (x.0, x.1));
                let mut out = String::new();
                let mut seen = std::collections::BTreeSet::new();
                for (e, step, x, y) in g {
                    if seen.insert((e, x)) {
                        writeln!(out, "G {e} {step} {x} {y}").unwrap();
                    }
                }
                // Set scripts use indices disjoint from the graph scripts.
                for (e, step, v) in w {
                    writeln!(out, "W {} {step} {v}", e + 3).unwrap();
                }
                out
            })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn round_trip(
            c in prop_oneof![
                Just(Construction::Paired),
                Just(Construction::Single),
                Just(Construction::Triad)
            ],
            all_rows in any::<bool>(),
            horizon in 1u64..250,
            script in script_strategy(),
        ) {
            let config = RunConfig {
                construction: c,
                horizon,
                scope: if all_rows { Scope::AllRows } else { Scope::TriggerRow },
                opponents: Fallback::Nowhere,
                ..RunConfig::default()
            };
            let machine = Machine::new(ScriptRegistry::parse(&script).unwrap(), Fallback::Nowhere);
            let t = run(&config, machine);
            let text = t.serialize();
            let back = Trace::parse(&text).unwrap();
            prop_assert_eq!(&back, &t);
            prop_assert_eq!(back.serialize(), text);
            prop_assert_eq!(back.final_state(), t.final_state());
        }
    }
}
