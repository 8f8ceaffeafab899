//! Block-evolution diagrams: one line per event touching a row, each
//! position labelled by its class. Block pair `k` shows as `k` (the `E`
//! half) and `k'` (the `Ē` half); after an R-flag the halves show as `a`
//! and `b`, the two auxiliary functions.

use std::fmt::Write as _;

use thiserror::Error;

use super::{Phase, Trace};
use crate::engines::{Construction, Effect};
use crate::geometry::{block_of, num, Layout, Row};
use crate::numbering::Rule;

/// Widest row the renderer accepts.
pub const MAX_RENDER_I: u64 = 8;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RenderError {
    #[error("the triad construction has no rows to render")]
    NoRows,
    #[error("paired traces need a row index j")]
    MissingRow,
    #[error("row i={0} is too wide to render (max {MAX_RENDER_I})")]
    TooWide(u64),
}

#[derive(Clone, Debug, PartialEq, Eq)]
enum Line {
    Blocks {
        stage: Option<u64>,
        height: u32,
        note: String,
    },
    Split {
        stage: u64,
        height: u32,
        left: u64,
        right: u64,
    },
}

/// The sequence of partitions row `(i, j)` goes through.
fn lines(trace: &Trace, row: Row) -> Vec<Line> {
    let mut out = vec![Line::Blocks {
        stage: None,
        height: 0,
        note: String::new(),
    }];
    let construction = trace.config.construction;
    trace.replay(|phase, state, record| {
        if phase != Phase::Before {
            return;
        }
        let mut flag_l = None;
        let mut merged = None;
        let mut split = None;
        for e in &record.effects {
            match e {
                Effect::TFlag { i, j, l } if (*i, *j) == (row.i, row.j) => flag_l = Some(*l),
                Effect::Merge { i, j, height } if (*i, *j) == (row.i, row.j) => {
                    merged = Some(*height)
                }
                Effect::Rule(Rule::RowAux {
                    row: r,
                    left,
                    right,
                    ..
                }) if *r == row => split = Some((*left, *right)),
                Effect::Rule(Rule::RowsAux { i, left, right, .. }) if *i == row.i => {
                    split = Some((*left, *right))
                }
                _ => {}
            }
        }
        if let Some(height) = merged {
            out.push(Line::Blocks {
                stage: Some(record.stage),
                height,
                note: flag_l.map(|l| format!("tflag l={l}")).unwrap_or_default(),
            });
        }
        if let Some((left, right)) = split {
            let j = if construction == Construction::Single {
                0
            } else {
                row.j
            };
            out.push(Line::Split {
                stage: record.stage,
                height: state.height(row.i, j),
                left,
                right,
            });
        }
    });
    out
}

fn labels(line: &Line, i: u64) -> Vec<String> {
    let width = 1u64 << (i + 1);
    (0..width)
        .map(|pos| match line {
            Line::Blocks { height, .. } => {
                let (k, right) = block_of(pos, *height);
                if right {
                    format!("{k}'")
                } else {
                    k.to_string()
                }
            }
            Line::Split { height, .. } => {
                if block_of(pos, *height).1 { "b" } else { "a" }.to_string()
            }
        })
        .collect()
}

fn group_size(line: &Line) -> u64 {
    match line {
        Line::Blocks { height, .. } | Line::Split { height, .. } => 2u64 << height,
    }
}

fn resolve_row(trace: &Trace, i: u64, j: Option<u64>) -> Result<(Layout, Row), RenderError> {
    if i > MAX_RENDER_I {
        return Err(RenderError::TooWide(i));
    }
    match trace.config.construction {
        Construction::Triad => Err(RenderError::NoRows),
        Construction::Single => Ok((Layout::Single, Row::new(i, 0))),
        Construction::Paired => Ok((
            Layout::Paired,
            Row::new(i, j.ok_or(RenderError::MissingRow)?),
        )),
    }
}

pub fn render_blocks(trace: &Trace, i: u64, j: Option<u64>) -> Result<String, RenderError> {
    let (layout, row) = resolve_row(trace, i, j)?;
    let family = trace.config.construction.family();
    let lines = lines(trace, row);
    let cell = (num(i, 0).unwrap().saturating_sub(1)).to_string().len() + 1;
    let mut out = String::new();
    let name = match layout {
        Layout::Single => format!("row {i}"),
        Layout::Paired => format!("row ({i},{})", row.j),
    };
    let first = layout.program(row, 0).unwrap();
    let last = layout.program(row, (1 << (i + 1)) - 1).unwrap();
    writeln!(
        out,
        "{name}: {} programs {first}..{last}, value {}",
        1u64 << (i + 1),
        layout.row_value(row)
    )
    .unwrap();
    writeln!(out, "{:<7} {:<6} {:<6} classes", "stage", "height", "pairs").unwrap();
    let mut legend = Vec::new();
    for line in &lines {
        let (stage, height, pairs, note) = match line {
            Line::Blocks {
                stage,
                height,
                note,
            } => (
                stage.map_or("init".to_string(), |s| s.to_string()),
                *height,
                num(i, *height).unwrap().to_string(),
                note.clone(),
            ),
            Line::Split {
                stage,
                height,
                left,
                right,
            } => {
                legend.push(format!(
                    "a = aux({family},{left}), b = aux({family},{right})"
                ));
                (
                    stage.to_string(),
                    *height,
                    "-".to_string(),
                    "rflag".to_string(),
                )
            }
        };
        let group = group_size(line) as usize;
        let cells: Vec<String> = labels(line, i)
            .chunks(group)
            .map(|g| {
                g.iter()
                    .map(|l| format!("{l:<cell$}"))
                    .collect::<Vec<_>>()
                    .join(" ")
            })
            .collect();
        let body = cells.join("|");
        let mut text = format!("{stage:<7} {height:<6} {pairs:<6} {body}");
        if !note.is_empty() {
            write!(text, "  {note}").unwrap();
        }
        writeln!(out, "{}", text.trim_end()).unwrap();
    }
    for l in legend {
        writeln!(out, "{l}").unwrap();
    }
    Ok(out)
}

/// The same diagram as SVG: one band per line, one cell per program, cells
/// of the same class share a fill.
pub fn render_svg(trace: &Trace, i: u64, j: Option<u64>) -> Result<String, RenderError> {
    let (_, row) = resolve_row(trace, i, j)?;
    let lines = lines(trace, row);
    let width = 1u64 << (i + 1);
    let (cw, ch, left) = (24u64, 20u64, 60u64);
    let mut out = String::new();
    writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{}" height="{}" font-family="monospace" font-size="10">"#,
        left + width * cw + 10,
        lines.len() as u64 * (ch + 6) + 10
    )
    .unwrap();
    for (n, line) in lines.iter().enumerate() {
        let y = 5 + n as u64 * (ch + 6);
        let stage = match line {
            Line::Blocks { stage: None, .. } => "init".to_string(),
            Line::Blocks { stage: Some(s), .. } | Line::Split { stage: s, .. } => s.to_string(),
        };
        writeln!(out, r#"<text x="4" y="{}">{stage}</text>"#, y + 14).unwrap();
        let labels = labels(line, i);
        for (pos, label) in labels.iter().enumerate() {
            let x = left + pos as u64 * cw;
            let fill = class_fill(label);
            writeln!(
                out,
                r##"<rect x="{x}" y="{y}" width="{cw}" height="{ch}" fill="{fill}" stroke="#333"/><text x="{}" y="{}">{label}</text>"##,
                x + 4,
                y + 14
            )
            .unwrap();
        }
    }
    out.push_str("</svg>\n");
    Ok(out)
}

fn class_fill(label: &str) -> String {
    let (k, right) = match label {
        "a" => return "#f4a261".into(),
        "b" => return "#2a9d8f".into(),
        l => match l.strip_suffix('\'') {
            Some(k) => (k, true),
            None => (l, false),
        },
    };
    let k: u64 = k.parse().unwrap_or(0);
    let hue = (k * 47) % 360;
    let light = if right { 75 } else { 55 };
    format!("hsl({hue},60%,{light}%)")
}
