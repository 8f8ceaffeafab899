//! The `epsw` command line. Exit codes: 0 success, 1 property failure,
//! 2 usage or configuration error.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};

use crate::aux::StandardEnv;
use crate::ceer::CeerBuilder;
use crate::config::RunConfig;
use crate::engines::{companion_ceer, run, Construction, Scope};
use crate::kernel::Descriptor;
use crate::machine::{Fallback, Machine, ScriptRegistry};
use crate::numbering::{DescriptorTable, Numbering, TranslationSource};
use crate::reductions::{lemma10_refine, ties_check, Hint, SetSource, TieMode};
use crate::scenarios::{friedberg_check, run_scenario, SCENARIOS};
use crate::trace::check::{check, parse_suites, SUITES};
use crate::trace::render::{render_blocks, render_svg};
use crate::trace::Trace;

pub const OK: i32 = 0;
pub const PROPERTY_FAILURE: i32 = 1;
pub const USAGE: i32 = 2;

#[derive(Parser, Debug)]
#[command(
    name = "epsw",
    version,
    about = "Stage constructions, numberings and ceers at finite horizons"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run a construction and write its trace.
    Run(RunArgs),
    /// Check a trace against invariant suites.
    Check {
        trace: PathBuf,
        /// Comma-separated suite names, or `all`.
        #[arg(long, default_value = "all")]
        suites: String,
    },
    /// Run a built-in scenario.
    Scenario {
        name: Option<String>,
        #[arg(long)]
        list: bool,
        /// Directory for the scenario's traces and diagrams.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Draw the block evolution of a row.
    Render {
        trace: PathBuf,
        #[arg(long)]
        i: u64,
        #[arg(long)]
        j: Option<u64>,
        #[arg(long)]
        svg: bool,
    },
    /// Extract a one-to-one numbering from a descriptor table and check
    /// both translations.
    Friedberg {
        /// One descriptor per line: empty, fin(v,n) or tot(v).
        table: PathBuf,
        #[arg(long, default_value_t = 64)]
        budget: u64,
    },
    /// Refine X over a list of sets with hints.
    Lemma10(Lemma10Args),
    /// Check that a ceer ties a translation.
    TieCheck(TieArgs),
}

#[derive(Args, Debug)]
struct RunArgs {
    /// Config file (`key = value` lines).
    config: Option<PathBuf>,
    #[arg(short, long)]
    out: Option<PathBuf>,
    #[arg(long)]
    construction: Option<Construction>,
    #[arg(long)]
    horizon: Option<u64>,
    #[arg(long)]
    scope: Option<Scope>,
    /// machine | scripted
    #[arg(long)]
    opponents: Option<Fallback>,
    #[arg(long)]
    window: Option<u64>,
    /// Adversary script file; repeatable.
    #[arg(long = "script")]
    scripts: Vec<PathBuf>,
}

#[derive(Args, Debug)]
struct Lemma10Args {
    /// `SET@HINT` per level. Sets: `mod:M:R`, `below:N`, `above:N`,
    /// `list:a,b,c`, `w:E`. Hints: `inf`, `fin:BOUND`, `budget:B`.
    levels: Vec<String>,
    /// How many elements of X to print.
    #[arg(long, default_value_t = 20)]
    first: usize,
    /// Script file backing `w:E` sets.
    #[arg(long = "script")]
    scripts: Vec<PathBuf>,
}

#[derive(Args, Debug)]
struct TieArgs {
    /// Ceer file of `P p q` lines. Defaults to the trace's companion ceer.
    #[arg(long)]
    ceer: Option<PathBuf>,
    /// Descriptor table for psi.
    #[arg(long, conflicts_with = "trace")]
    psi: Option<PathBuf>,
    /// Take psi (and by default the ceer) from the end of a trace.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Translation index for the paired companion ceer.
    #[arg(long)]
    l: Option<u64>,
    /// Translation as `p q` lines; identity when absent.
    #[arg(long)]
    t: Option<PathBuf>,
    #[arg(long, default_value = "strong")]
    mode: TieMode,
    #[arg(long, default_value_t = 64)]
    horizon: u64,
    #[arg(long, default_value_t = 64)]
    budget: u64,
}

/// A usage or configuration error, reported with exit code 2.
struct Usage(String);

impl<E: std::fmt::Display> From<E> for Usage {
    fn from(e: E) -> Self {
        Usage(e.to_string())
    }
}

type Outcome = Result<i32, Usage>;

/// Parses arguments and runs one subcommand, writing to `out`.
pub fn main_with<I, T>(args: I, out: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { USAGE } else { OK };
        }
    };
    let result = match cli.command {
        Command::Run(a) => cmd_run(a, out),
        Command::Check { trace, suites } => cmd_check(&trace, &suites, out),
        Command::Scenario {
            name,
            list,
            out: dir,
        } => cmd_scenario(name.as_deref(), list, dir.as_deref(), out),
        Command::Render { trace, i, j, svg } => cmd_render(&trace, i, j, svg, out),
        Command::Friedberg { table, budget } => cmd_friedberg(&table, budget, out),
        Command::Lemma10(a) => cmd_lemma10(a, out),
        Command::TieCheck(a) => cmd_tie_check(a, out),
    };
    match result {
        Ok(code) => code,
        Err(Usage(msg)) => {
            eprintln!("epsw: {msg}");
            USAGE
        }
    }
}

fn read(path: &Path) -> Result<String, Usage> {
    std::fs::read_to_string(path).map_err(|e| Usage(format!("cannot read {}: {e}", path.display())))
}

fn load_scripts(paths: &[PathBuf]) -> Result<ScriptRegistry, Usage> {
    let mut reg = ScriptRegistry::new();
    for p in paths {
        reg.extend_from_text(&read(p)?)
            .map_err(|e| Usage(format!("{}: {e}", p.display())))?;
    }
    Ok(reg)
}

fn load_trace(path: &Path) -> Result<Trace, Usage> {
    Trace::parse(&read(path)?).map_err(|e| Usage(format!("{}: {e}", path.display())))
}

fn cmd_run(a: RunArgs, out: &mut dyn Write) -> Outcome {
    let mut cfg = match &a.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(c) = a.construction {
        cfg.construction = c;
    }
    if let Some(h) = a.horizon {
        cfg.horizon = h;
    }
    if let Some(s) = a.scope {
        cfg.scope = s;
    }
    if let Some(o) = a.opponents {
        cfg.opponents = o;
    }
    if let Some(w) = a.window {
        cfg.window = w;
    }
    cfg.scripts.extend(a.scripts);
    cfg.validate()?;
    let machine = Machine::new(load_scripts(&cfg.scripts)?, cfg.opponents);
    let text = run(&cfg, machine).serialize();
    match a.out {
        Some(p) => std::fs::write(&p, text)
            .map_err(|e| Usage(format!("cannot write {}: {e}", p.display())))?,
        None => out.write_all(text.as_bytes())?,
    }
    Ok(OK)
}

fn cmd_check(path: &Path, suites: &str, out: &mut dyn Write) -> Outcome {
    let suites = if suites == "all" {
        SUITES.to_vec()
    } else {
        parse_suites(suites).map_err(Usage)?
    };
    let trace = load_trace(path)?;
    let report = check(&trace, &suites);
    write!(out, "{report}")?;
    Ok(if report.all_pass() {
        OK
    } else {
        PROPERTY_FAILURE
    })
}

fn cmd_scenario(
    name: Option<&str>,
    list: bool,
    dir: Option<&Path>,
    out: &mut dyn Write,
) -> Outcome {
    if list {
        for (n, what) in SCENARIOS {
            writeln!(out, "{n:24} {what}")?;
        }
        return Ok(OK);
    }
    let name = name.ok_or_else(|| Usage("scenario name required (or --list)".into()))?;
    let report = run_scenario(name)
        .ok_or_else(|| Usage(format!("unknown scenario `{name}`; try --list")))?;
    write!(out, "{report}")?;
    if let Some(dir) = dir {
        std::fs::create_dir_all(dir)?;
        for (label, text) in &report.artifacts {
            std::fs::write(dir.join(format!("{name}.{label}.txt")), text)?;
        }
    }
    Ok(if report.passed() {
        OK
    } else {
        PROPERTY_FAILURE
    })
}

fn cmd_render(path: &Path, i: u64, j: Option<u64>, svg: bool, out: &mut dyn Write) -> Outcome {
    let trace = load_trace(path)?;
    let text = if svg {
        render_svg(&trace, i, j)?
    } else {
        render_blocks(&trace, i, j)?
    };
    out.write_all(text.as_bytes())?;
    Ok(OK)
}

/// Descriptor lines; blank lines and `#` comments are skipped.
pub fn parse_table(text: &str) -> Result<DescriptorTable, String> {
    let mut rows = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap().trim();
        if line.is_empty() {
            continue;
        }
        rows.push(
            line.parse::<Descriptor>()
                .map_err(|e| format!("line {}: {e}", n + 1))?,
        );
    }
    Ok(DescriptorTable(rows))
}

/// `p q` lines.
pub fn parse_map(text: &str) -> Result<BTreeMap<u64, u64>, String> {
    let mut map = BTreeMap::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap().trim();
        if line.is_empty() {
            continue;
        }
        let bad = || format!("line {}: expected `p q`", n + 1);
        let (p, q) = line.split_once(char::is_whitespace).ok_or_else(bad)?;
        map.insert(
            p.trim().parse().map_err(|_| bad())?,
            q.trim().parse().map_err(|_| bad())?,
        );
    }
    Ok(map)
}

fn cmd_friedberg(path: &Path, budget: u64, out: &mut dyn Write) -> Outcome {
    let psi = parse_table(&read(path)?).map_err(Usage)?;
    let c = friedberg_check(&psi, budget).map_err(Usage)?;
    writeln!(out, "programs {}  classes {}", psi.0.len(), c.eta.0.len())?;
    for (i, (d, m)) in c.eta.0.iter().zip(&c.forward).enumerate() {
        writeln!(out, "eta {i} = psi {m} = {d}")?;
    }
    writeln!(out, "one-to-one {}", c.one_to_one)?;
    writeln!(out, "psi -> eta {}", c.backward_equal)?;
    writeln!(out, "eta -> psi {}", c.forward_equal)?;
    writeln!(out, "decider mismatches {:?}", c.decider_mismatches)?;
    Ok(if c.holds() { OK } else { PROPERTY_FAILURE })
}

fn parse_level(spec: &str, machine: &Arc<Machine>) -> Result<(SetSource, Hint), String> {
    let bad = || format!("bad level `{spec}` (SET@HINT)");
    let (set, hint) = spec.split_once('@').ok_or_else(bad)?;
    let n = |s: &str| s.parse::<u64>().map_err(|_| bad());
    let hint = match hint.split_once(':') {
        None if hint == "inf" => Hint::Infinite,
        Some(("fin", b)) => Hint::Finite { bound: n(b)? },
        Some(("budget", b)) => Hint::Budgeted { budget: n(b)? },
        _ => return Err(bad()),
    };
    let parts: Vec<&str> = set.split(':').collect();
    let source = match parts.as_slice() {
        ["mod", m, r] => {
            let (m, r) = (n(m)?, n(r)?);
            if m == 0 {
                return Err(bad());
            }
            SetSource::decidable(set, move |x| x % m == r)
        }
        ["below", b] => {
            let b = n(b)?;
            SetSource::decidable(set, move |x| x < b)
        }
        ["above", b] => {
            let b = n(b)?;
            SetSource::decidable(set, move |x| x > b)
        }
        ["list", xs] => SetSource::Finite(
            xs.split(',')
                .filter(|s| !s.is_empty())
                .map(n)
                .collect::<Result<_, _>>()?,
        ),
        ["w", e] => SetSource::Machine {
            machine: machine.clone(),
            index: n(e)?,
        },
        _ => return Err(bad()),
    };
    Ok((source, hint))
}

fn cmd_lemma10(a: Lemma10Args, out: &mut dyn Write) -> Outcome {
    let machine = Arc::new(Machine::new(load_scripts(&a.scripts)?, Fallback::Nowhere));
    let (sets, hints): (Vec<_>, Vec<_>) = a
        .levels
        .iter()
        .map(|s| parse_level(s, &machine))
        .collect::<Result<Vec<_>, _>>()
        .map_err(Usage)?
        .into_iter()
        .unzip();
    let r = match lemma10_refine(sets, &hints) {
        Ok(r) => r,
        Err(e) => {
            writeln!(out, "refinement failed: {e}")?;
            return Ok(PROPERTY_FAILURE);
        }
    };
    for log in &r.log {
        writeln!(
            out,
            "level {} {:?}: {:?}, saw {:?}",
            log.level, log.hint, log.decision, log.sampled
        )?;
    }
    writeln!(out, "L = {:?}", r.l)?;
    match r.first(a.first) {
        Ok(xs) => {
            writeln!(out, "X = {xs:?}")?;
            Ok(OK)
        }
        Err(e) => {
            writeln!(out, "enumerating X failed: {e}")?;
            Ok(PROPERTY_FAILURE)
        }
    }
}

fn cmd_tie_check(a: TieArgs, out: &mut dyn Write) -> Outcome {
    let t = match &a.t {
        Some(p) => TranslationSource::Table(parse_map(&read(p)?).map_err(Usage)?),
        None => TranslationSource::Identity,
    };
    let given_ceer = match &a.ceer {
        Some(p) => Some(CeerBuilder::parse(&read(p)?).map_err(Usage)?),
        None => None,
    };
    let report = match (&a.psi, &a.trace) {
        (Some(p), None) => {
            let psi = parse_table(&read(p)?).map_err(Usage)?;
            let ceer = given_ceer.ok_or_else(|| Usage("--psi needs --ceer".into()))?;
            ties_check(
                &ceer,
                &t,
                &psi,
                a.mode,
                a.horizon,
                a.budget,
                &StandardEnv::default(),
            )?
        }
        (None, Some(p)) => {
            let trace = load_trace(p)?;
            let ceer = match given_ceer {
                Some(c) => c,
                None => companion_ceer(&trace, a.l)?,
            };
            let fin = trace.final_state();
            let psi = fin.eps.at(fin.stage);
            let env =
                StandardEnv::with_families(trace.machine(), &[trace.config.construction.family()]);
            ties_check(
                &ceer,
                &t,
                &psi as &dyn Numbering,
                a.mode,
                a.horizon,
                a.budget,
                &env,
            )?
        }
        _ => return Err(Usage("give exactly one of --psi or --trace".into())),
    };
    writeln!(out, "{report}")?;
    if !report.classes_missed.is_empty() {
        writeln!(out, "classes missed: {:?}", report.classes_missed)?;
    }
    Ok(if report.holds() { OK } else { PROPERTY_FAILURE })
}
