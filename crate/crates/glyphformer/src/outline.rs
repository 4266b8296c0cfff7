//! Conversions between the four outline representations and geometric
//! sampling used to check that the conversions are lossless.
//!
//! The ladder is: original point form -> decomposed point form (implicit
//! on-curve midpoints made explicit) -> quadratic command form (segmentation)
//! -> cubic command form (degree elevation).

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::font::{GlyphOutline, Point};

#[derive(Debug, Error)]
pub enum OutlineError {
    #[error("invariant violation: {0}")]
    InvariantViolation(String),
}

/// Sentinel stored in unused argument slots.
pub const PAD_SENTINEL: f64 = -1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum CommandKind {
    MoveTo,
    LineTo,
    QCurveTo,
    CurveTo,
    ClosePath,
}

impl CommandKind {
    /// Stable id used by the tokenizer's command-type embedding.
    pub fn id(self) -> usize {
        match self {
            CommandKind::MoveTo => 0,
            CommandKind::LineTo => 1,
            CommandKind::QCurveTo => 2,
            CommandKind::CurveTo => 3,
            CommandKind::ClosePath => 4,
        }
    }

    pub const COUNT: usize = 5;

    /// Which of the six argument slots (x1, y1, x2, y2, x, y) this command
    /// uses.
    pub fn used_slots(self) -> [bool; 6] {
        match self {
            CommandKind::MoveTo | CommandKind::LineTo => [false, false, false, false, true, true],
            CommandKind::QCurveTo => [true, true, false, false, true, true],
            CommandKind::CurveTo => [true; 6],
            CommandKind::ClosePath => [false; 6],
        }
    }
}

/// One drawing command. Argument slots are (x1, y1, x2, y2, x, y); slots a
/// command does not use hold [`PAD_SENTINEL`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Command {
    pub index: usize,
    pub kind: CommandKind,
    pub args: [f64; 6],
}

impl Command {
    fn new(index: usize, kind: CommandKind, filled: &[f64]) -> Self {
        let used = kind.used_slots();
        let mut args = [PAD_SENTINEL; 6];
        let mut it = filled.iter();
        for (slot, used) in args.iter_mut().zip(used) {
            if used {
                *slot = *it.next().expect("arg count matches command kind");
            }
        }
        debug_assert!(it.next().is_none());
        Command { index, kind, args }
    }

    pub fn end_point(&self) -> Option<(f64, f64)> {
        match self.kind {
            CommandKind::ClosePath => None,
            _ => Some((self.args[4], self.args[5])),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CurveOrder {
    Quadratic,
    Cubic,
}

/// A sequence of drawing commands covering all contours of one glyph.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommandPath {
    pub commands: Vec<Command>,
    pub curve_order: CurveOrder,
}

/// The four representations compared in the experiments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Representation {
    /// Point form as stored in the font (implicit midpoints still implicit).
    #[serde(rename = "original")]
    OriginalTT,
    /// Point form with implicit on-curve midpoints inserted.
    #[serde(rename = "decomposed")]
    DecomposedTT,
    /// Quadratic command form.
    #[serde(rename = "segmented")]
    SegmentedTT,
    /// Cubic command form.
    #[serde(rename = "postscript")]
    PostScript,
}

impl Representation {
    pub const ALL: [Representation; 4] = [
        Representation::OriginalTT,
        Representation::DecomposedTT,
        Representation::SegmentedTT,
        Representation::PostScript,
    ];

    pub fn is_point_form(self) -> bool {
        matches!(self, Representation::OriginalTT | Representation::DecomposedTT)
    }

    pub fn name(self) -> &'static str {
        match self {
            Representation::OriginalTT => "original",
            Representation::DecomposedTT => "decomposed",
            Representation::SegmentedTT => "segmented",
            Representation::PostScript => "postscript",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "original" => Some(Representation::OriginalTT),
            "decomposed" => Some(Representation::DecomposedTT),
            "segmented" => Some(Representation::SegmentedTT),
            "postscript" => Some(Representation::PostScript),
            _ => None,
        }
    }
}

/// Insert the implicit on-curve midpoint between every cyclically adjacent
/// pair of off-curve points. Idempotent; on-curve points pass through.
pub fn decompose(outline: &GlyphOutline) -> GlyphOutline {
    let contours = outline
        .contours
        .iter()
        .map(|contour| {
            let n = contour.len();
            let mut out = Vec::with_capacity(n);
            for i in 0..n {
                let p = contour[i];
                out.push(p);
                let q = contour[(i + 1) % n];
                if !p.on_curve && !q.on_curve {
                    out.push(Point::new((p.x + q.x) / 2.0, (p.y + q.y) / 2.0, true));
                }
            }
            out
        })
        .collect();
    GlyphOutline {
        glyph_id: outline.glyph_id,
        contours,
    }
}

/// Rotate a contour so it starts at the first on-curve point of its
/// decomposed form. When the contour opens with two off-curve points, that
/// is the synthetic midpoint [`decompose`] inserts between them; otherwise
/// it is the first stored on-curve point (index 0 or 1).
pub fn normalize_start(contour: &[Point]) -> Vec<Point> {
    if !contour[0].on_curve && !contour[1].on_curve {
        let first = contour[0];
        let second = contour[1];
        let mut out = Vec::with_capacity(contour.len() + 1);
        out.push(Point::new(
            (first.x + second.x) / 2.0,
            (first.y + second.y) / 2.0,
            true,
        ));
        out.extend_from_slice(&contour[1..]);
        out.push(first);
        out
    } else {
        let k = contour.iter().position(|p| p.on_curve).unwrap();
        let mut out = Vec::with_capacity(contour.len());
        out.extend_from_slice(&contour[k..]);
        out.extend_from_slice(&contour[..k]);
        out
    }
}

/// Restructure a decomposed outline into a quadratic command path.
///
/// Per contour: `moveTo` at the (normalized) start, then `lineTo`/`qCurveTo`
/// segments. A curved closing segment is emitted explicitly; a straight
/// closing edge is left to `closePath`.
pub fn segment(outline: &GlyphOutline) -> Result<CommandPath, OutlineError> {
    let mut commands = Vec::new();
    for contour in &outline.contours {
        if contour.len() < 2 {
            continue;
        }
        let pts = normalize_start(contour);
        let start = pts[0];
        let idx = commands.len();
        commands.push(Command::new(idx, CommandKind::MoveTo, &[start.x, start.y]));
        let mut i = 1;
        while i < pts.len() {
            let p = pts[i];
            if p.on_curve {
                let idx = commands.len();
                commands.push(Command::new(idx, CommandKind::LineTo, &[p.x, p.y]));
                i += 1;
            } else {
                let end = if i + 1 < pts.len() { pts[i + 1] } else { start };
                if !end.on_curve {
                    return Err(OutlineError::InvariantViolation(
                        "adjacent off-curve points; outline was not decomposed".into(),
                    ));
                }
                let idx = commands.len();
                commands.push(Command::new(
                    idx,
                    CommandKind::QCurveTo,
                    &[p.x, p.y, end.x, end.y],
                ));
                i += 2;
            }
        }
        // straight closing edge is implicit in closePath; a trailing lineTo
        // back to the start would be redundant, so drop it
        if let Some(last) = commands.last() {
            if last.kind == CommandKind::LineTo && last.args[4] == start.x && last.args[5] == start.y
            {
                commands.pop();
                let n = commands.len();
                debug_assert!(n > 0);
            }
        }
        let idx = commands.len();
        commands.push(Command::new(idx, CommandKind::ClosePath, &[]));
    }
    // re-number after any pops
    for (i, c) in commands.iter_mut().enumerate() {
        c.index = i;
    }
    Ok(CommandPath {
        commands,
        curve_order: CurveOrder::Quadratic,
    })
}

/// Exact degree elevation of every quadratic segment to a cubic one via the
/// 2/3 control-point rule. Command count and endpoints are preserved.
pub fn elevate(path: &CommandPath) -> Result<CommandPath, OutlineError> {
    if path.curve_order != CurveOrder::Quadratic {
        return Err(OutlineError::InvariantViolation(
            "elevate expects a quadratic path".into(),
        ));
    }
    let mut commands = Vec::with_capacity(path.commands.len());
    let mut current = (0.0, 0.0);
    let mut subpath_start = (0.0, 0.0);
    for cmd in &path.commands {
        match cmd.kind {
            CommandKind::MoveTo => {
                subpath_start = (cmd.args[4], cmd.args[5]);
                current = subpath_start;
                commands.push(*cmd);
            }
            CommandKind::LineTo => {
                current = (cmd.args[4], cmd.args[5]);
                commands.push(*cmd);
            }
            CommandKind::QCurveTo => {
                let (qx, qy) = (cmd.args[0], cmd.args[1]);
                let (ex, ey) = (cmd.args[4], cmd.args[5]);
                let c1 = (
                    current.0 + 2.0 / 3.0 * (qx - current.0),
                    current.1 + 2.0 / 3.0 * (qy - current.1),
                );
                let c2 = (ex + 2.0 / 3.0 * (qx - ex), ey + 2.0 / 3.0 * (qy - ey));
                commands.push(Command::new(
                    cmd.index,
                    CommandKind::CurveTo,
                    &[c1.0, c1.1, c2.0, c2.1, ex, ey],
                ));
                current = (ex, ey);
            }
            CommandKind::CurveTo => {
                return Err(OutlineError::InvariantViolation(
                    "curveTo present in quadratic input".into(),
                ));
            }
            CommandKind::ClosePath => {
                current = subpath_start;
                commands.push(*cmd);
            }
        }
    }
    Ok(CommandPath {
        commands,
        curve_order: CurveOrder::Cubic,
    })
}

fn lerp(a: (f64, f64), b: (f64, f64), t: f64) -> (f64, f64) {
    (a.0 + (b.0 - a.0) * t, a.1 + (b.1 - a.1) * t)
}

fn quad_at(p0: (f64, f64), q: (f64, f64), p2: (f64, f64), t: f64) -> (f64, f64) {
    let u = 1.0 - t;
    (
        u * u * p0.0 + 2.0 * u * t * q.0 + t * t * p2.0,
        u * u * p0.1 + 2.0 * u * t * q.1 + t * t * p2.1,
    )
}

fn cubic_at(p0: (f64, f64), c1: (f64, f64), c2: (f64, f64), p3: (f64, f64), t: f64) -> (f64, f64) {
    let u = 1.0 - t;
    let (a, b, c, d) = (u * u * u, 3.0 * u * u * t, 3.0 * u * t * t, t * t * t);
    (
        a * p0.0 + b * c1.0 + c * c2.0 + d * p3.0,
        a * p0.1 + b * c1.1 + c * c2.1 + d * p3.1,
    )
}

enum Segment {
    Line((f64, f64), (f64, f64)),
    Quad((f64, f64), (f64, f64), (f64, f64)),
    Cubic((f64, f64), (f64, f64), (f64, f64), (f64, f64)),
}

impl Segment {
    fn sample_into(&self, samples: usize, out: &mut Vec<(f64, f64)>) {
        for k in 0..samples {
            let t = k as f64 / (samples - 1) as f64;
            out.push(match *self {
                Segment::Line(a, b) => lerp(a, b, t),
                Segment::Quad(p0, q, p2) => quad_at(p0, q, p2, t),
                Segment::Cubic(p0, c1, c2, p3) => cubic_at(p0, c1, c2, p3, t),
            });
        }
    }
}

/// Walk a point-form contour (after start normalization) into on-curve to
/// on-curve segments, reconstructing implicit midpoints on the fly. This is
/// deliberately independent of [`segment`]: it serves as the geometric oracle
/// the command path is checked against.
fn point_form_segments(contour: &[Point]) -> Vec<Segment> {
    let pts = normalize_start(contour);
    let start = (pts[0].x, pts[0].y);
    let mut segs = Vec::new();
    let mut current = start;
    let mut pending_ctrl: Option<(f64, f64)> = None;
    for p in pts.iter().skip(1) {
        let xy = (p.x, p.y);
        if p.on_curve {
            match pending_ctrl.take() {
                None => segs.push(Segment::Line(current, xy)),
                Some(q) => segs.push(Segment::Quad(current, q, xy)),
            }
            current = xy;
        } else if let Some(q) = pending_ctrl.take() {
            // two off-curve points in a row: implicit on-curve midpoint
            let mid = ((q.0 + xy.0) / 2.0, (q.1 + xy.1) / 2.0);
            segs.push(Segment::Quad(current, q, mid));
            current = mid;
            pending_ctrl = Some(xy);
        } else {
            pending_ctrl = Some(xy);
        }
    }
    match pending_ctrl {
        Some(q) => segs.push(Segment::Quad(current, q, start)),
        None => {}
    }
    // closing edge back to the start. A final straight edge that already
    // lands on the start collapses into the close itself (mirrors the
    // redundant-lineTo drop in `segment`); a curved close keeps its
    // degenerate closing line, as closePath does in command form.
    let last = segs
        .last()
        .map(|s| match *s {
            Segment::Line(_, b) => b,
            Segment::Quad(_, _, b) => b,
            Segment::Cubic(_, _, _, b) => b,
        })
        .unwrap_or(start);
    let already_closed_by_line = matches!(segs.last(), Some(Segment::Line(_, b)) if *b == start);
    if !already_closed_by_line {
        segs.push(Segment::Line(last, start));
    }
    segs
}

fn command_form_segments(path: &CommandPath) -> Vec<Segment> {
    let mut segs = Vec::new();
    let mut current = (0.0, 0.0);
    let mut subpath_start = (0.0, 0.0);
    for cmd in &path.commands {
        match cmd.kind {
            CommandKind::MoveTo => {
                subpath_start = (cmd.args[4], cmd.args[5]);
                current = subpath_start;
            }
            CommandKind::LineTo => {
                let end = (cmd.args[4], cmd.args[5]);
                segs.push(Segment::Line(current, end));
                current = end;
            }
            CommandKind::QCurveTo => {
                let q = (cmd.args[0], cmd.args[1]);
                let end = (cmd.args[4], cmd.args[5]);
                segs.push(Segment::Quad(current, q, end));
                current = end;
            }
            CommandKind::CurveTo => {
                let c1 = (cmd.args[0], cmd.args[1]);
                let c2 = (cmd.args[2], cmd.args[3]);
                let end = (cmd.args[4], cmd.args[5]);
                segs.push(Segment::Cubic(current, c1, c2, end));
                current = end;
            }
            CommandKind::ClosePath => {
                segs.push(Segment::Line(current, subpath_start));
                current = subpath_start;
            }
        }
    }
    segs
}

/// Sample a point-form outline: per segment, `samples_per_segment` uniform
/// parameter values, concatenated in contour order. Contours are start-
/// normalized first so the polyline aligns with the command-form sampling.
pub fn sample_outline(outline: &GlyphOutline, samples_per_segment: usize) -> Vec<(f64, f64)> {
    assert!(samples_per_segment >= 2);
    let mut out = Vec::new();
    for contour in &outline.contours {
        if contour.len() < 2 {
            continue;
        }
        for seg in point_form_segments(contour) {
            seg.sample_into(samples_per_segment, &mut out);
        }
    }
    out
}

/// Sample a command path with the same per-segment parameterization as
/// [`sample_outline`].
pub fn sample_path(path: &CommandPath, samples_per_segment: usize) -> Vec<(f64, f64)> {
    assert!(samples_per_segment >= 2);
    let mut out = Vec::new();
    for seg in command_form_segments(path) {
        seg.sample_into(samples_per_segment, &mut out);
    }
    out
}

fn fmt_coord(v: f64) -> String {
    // up to 6 decimals, trailing zeros trimmed
    let s = format!("{v:.6}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".to_string()
    } else {
        s.to_string()
    }
}

/// Render a command path as SVG path data, flipping y into the em box to
/// match SVG's screen-down convention.
pub fn to_svg_path(path: &CommandPath, units_per_em: f64) -> String {
    let fy = |y: f64| units_per_em - y;
    let mut parts: Vec<String> = Vec::new();
    for cmd in &path.commands {
        match cmd.kind {
            CommandKind::MoveTo => parts.push(format!(
                "M {} {}",
                fmt_coord(cmd.args[4]),
                fmt_coord(fy(cmd.args[5]))
            )),
            CommandKind::LineTo => parts.push(format!(
                "L {} {}",
                fmt_coord(cmd.args[4]),
                fmt_coord(fy(cmd.args[5]))
            )),
            CommandKind::QCurveTo => parts.push(format!(
                "Q {} {} {} {}",
                fmt_coord(cmd.args[0]),
                fmt_coord(fy(cmd.args[1])),
                fmt_coord(cmd.args[4]),
                fmt_coord(fy(cmd.args[5]))
            )),
            CommandKind::CurveTo => parts.push(format!(
                "C {} {} {} {} {} {}",
                fmt_coord(cmd.args[0]),
                fmt_coord(fy(cmd.args[1])),
                fmt_coord(cmd.args[2]),
                fmt_coord(fy(cmd.args[3])),
                fmt_coord(cmd.args[4]),
                fmt_coord(fy(cmd.args[5]))
            )),
            CommandKind::ClosePath => parts.push("Z".to_string()),
        }
    }
    parts.join(" ")
}

/// Check the slot/sentinel invariants of a command path.
pub fn validate_path(path: &CommandPath) -> Result<(), OutlineError> {
    let mut saw_move = false;
    for (i, cmd) in path.commands.iter().enumerate() {
        if cmd.index != i {
            return Err(OutlineError::InvariantViolation(format!(
                "command index {} at position {i}",
                cmd.index
            )));
        }
        if i == 0 && cmd.kind != CommandKind::MoveTo {
            return Err(OutlineError::InvariantViolation(
                "path must start with moveTo".into(),
            ));
        }
        saw_move |= cmd.kind == CommandKind::MoveTo;
        let used = cmd.kind.used_slots();
        for (s, &u) in used.iter().enumerate() {
            if !u && cmd.args[s] != PAD_SENTINEL {
                return Err(OutlineError::InvariantViolation(format!(
                    "unused slot {s} of {:?} not padded",
                    cmd.kind
                )));
            }
        }
        match cmd.kind {
            CommandKind::QCurveTo if path.curve_order == CurveOrder::Cubic => {
                return Err(OutlineError::InvariantViolation(
                    "qCurveTo in cubic path".into(),
                ))
            }
            CommandKind::CurveTo if path.curve_order == CurveOrder::Quadratic => {
                return Err(OutlineError::InvariantViolation(
                    "curveTo in quadratic path".into(),
                ))
            }
            _ => {}
        }
    }
    if !path.commands.is_empty() && path.commands.last().unwrap().kind != CommandKind::ClosePath {
        return Err(OutlineError::InvariantViolation(
            "path must end with closePath".into(),
        ));
    }
    let _ = saw_move;
    Ok(())
}

/// Apply the representation ladder to a raw outline, producing either a
/// point-form outline or a command path.
pub enum Converted {
    Points(GlyphOutline),
    Commands(CommandPath),
}

pub fn convert(outline: &GlyphOutline, rep: Representation) -> Result<Converted, OutlineError> {
    match rep {
        Representation::OriginalTT => Ok(Converted::Points(outline.clone())),
        Representation::DecomposedTT => Ok(Converted::Points(decompose(outline))),
        Representation::SegmentedTT => Ok(Converted::Commands(segment(&decompose(outline))?)),
        Representation::PostScript => {
            Ok(Converted::Commands(elevate(&segment(&decompose(outline))?)?))
        }
    }
}
