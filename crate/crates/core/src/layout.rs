//! Layout domain types, validation and the line-delimited layout format.
//!
//! A layout file holds one JSON object per line (UTF-8, LF):
//!
//! ```text
//! {"id":"f-001","balls":[{"num":0,"x":55.21,"y":48.0},{"num":2,"x":88.06,"y":76.02}],
//!  "labels":{"clear":true,"win":true,"potted":3},"remarks":"golden break"}
//! ```
//!
//! Coordinates are serialized with two decimal places; parsing then
//! serializing a file at that precision is the identity.

use crate::error::{Error, LineError, Result};
use crate::geom::TableGeometry;
use serde::{Deserialize, Serialize};
use std::io::{BufRead, Write};

pub const CUE_NUMBER: u8 = 0;
/// Largest object-ball number in the supported game family.
pub const MAX_BALL_NUMBER: u8 = 9;

/// A ball on the table; number 0 is the cue ball.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ball {
    pub num: u8,
    #[serde(serialize_with = "ser_coord")]
    pub x: f64,
    #[serde(serialize_with = "ser_coord")]
    pub y: f64,
}

impl Ball {
    pub fn new(num: u8, x: f64, y: f64) -> Self {
        Ball { num, x, y }
    }

    pub fn position(&self) -> (f64, f64) {
        (self.x, self.y)
    }

    pub fn distance_to(&self, other: &Ball) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// Rounds to the declared 2-decimal file precision.
pub fn round2(v: f64) -> f64 {
    (v * 100.0).round() / 100.0
}

fn ser_coord<S: serde::Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_f64(round2(*v))
}

/// Outcome labels attached to a break-shot layout.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct GameLabels {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub clear: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub win: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub potted: Option<u8>,
}

/// Game variant, identified by its total ball count (cue included);
/// 10 for 9-ball.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GameSpec {
    pub n: usize,
}

impl Default for GameSpec {
    fn default() -> Self {
        GameSpec { n: 10 }
    }
}

impl GameSpec {
    pub fn nine_ball() -> Self {
        Self::default()
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::Config(format!("game ball count {} < 2", self.n)));
        }
        Ok(())
    }

    /// Object-ball numbers of this game variant.
    pub fn object_numbers(&self) -> impl Iterator<Item = u8> {
        1..=(self.n - 1) as u8
    }
}

/// A table state: cue ball plus remaining object balls.
///
/// Canonical storage order is cue first, then object balls ascending by
/// number. Constructors and parsers canonicalize; validation reports
/// violations instead of panicking.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layout {
    pub id: String,
    pub balls: Vec<Ball>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub labels: Option<GameLabels>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub remarks: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub video_url: Option<String>,
}

impl Layout {
    pub fn new(id: impl Into<String>, balls: Vec<Ball>) -> Self {
        let mut layout = Layout {
            id: id.into(),
            balls,
            labels: None,
            remarks: None,
            video_url: None,
        };
        layout.canonicalize();
        layout
    }

    /// Sorts balls by number (cue first). Idempotent.
    pub fn canonicalize(&mut self) {
        self.balls.sort_by_key(|b| b.num);
    }

    pub fn is_canonical(&self) -> bool {
        self.balls.windows(2).all(|w| w[0].num < w[1].num)
    }

    pub fn cue(&self) -> Option<&Ball> {
        self.balls.iter().find(|b| b.num == CUE_NUMBER)
    }

    pub fn ball(&self, num: u8) -> Option<&Ball> {
        self.balls.iter().find(|b| b.num == num)
    }

    /// Object balls in ascending number order (assumes canonical storage).
    pub fn object_balls(&self) -> impl Iterator<Item = &Ball> {
        self.balls.iter().filter(|b| b.num != CUE_NUMBER)
    }

    pub fn ball_numbers(&self) -> Vec<u8> {
        self.balls.iter().map(|b| b.num).collect()
    }
}

/// A single invariant violation found by [`validate_layout`].
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    MissingCue,
    DuplicateNumber(u8),
    NumberOutOfRange(u8),
    OutOfBounds { num: u8, x: f64, y: f64 },
    Overlap { a: u8, b: u8, distance: f64 },
    LabelConflict(String),
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Violation::MissingCue => write!(f, "missing cue ball"),
            Violation::DuplicateNumber(n) => write!(f, "duplicate ball number {n}"),
            Violation::NumberOutOfRange(n) => write!(f, "ball number {n} out of range"),
            Violation::OutOfBounds { num, x, y } => {
                write!(f, "ball {num} at ({x:.2},{y:.2}) out of bounds")
            }
            Violation::Overlap { a, b, distance } => {
                write!(f, "balls {a} and {b} overlap (distance {distance:.2})")
            }
            Violation::LabelConflict(msg) => write!(f, "label conflict: {msg}"),
        }
    }
}

/// Everything [`validate_layout`] found; empty iff the layout is valid.
#[derive(Debug, Clone, Default)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn summary(&self) -> String {
        self.violations
            .iter()
            .map(|v| v.to_string())
            .collect::<Vec<_>>()
            .join("; ")
    }
}

/// Checks bounds, ball-number uniqueness and range, cue presence,
/// pairwise non-overlap and label consistency.
pub fn validate_layout(layout: &Layout, geom: &TableGeometry) -> ValidationReport {
    let mut report = ValidationReport::default();
    let mut seen = [false; MAX_BALL_NUMBER as usize + 1];
    for ball in &layout.balls {
        if ball.num > MAX_BALL_NUMBER {
            report.violations.push(Violation::NumberOutOfRange(ball.num));
            continue;
        }
        if seen[ball.num as usize] {
            report.violations.push(Violation::DuplicateNumber(ball.num));
        }
        seen[ball.num as usize] = true;
        if !geom.contains(ball.x, ball.y) || !ball.x.is_finite() || !ball.y.is_finite() {
            report.violations.push(Violation::OutOfBounds {
                num: ball.num,
                x: ball.x,
                y: ball.y,
            });
        }
    }
    if !seen[CUE_NUMBER as usize] {
        report.violations.push(Violation::MissingCue);
    }
    for (i, a) in layout.balls.iter().enumerate() {
        for b in &layout.balls[i + 1..] {
            let d = a.distance_to(b);
            if d < 2.0 * geom.ball_radius {
                report.violations.push(Violation::Overlap {
                    a: a.num,
                    b: b.num,
                    distance: d,
                });
            }
        }
    }
    if let Some(labels) = &layout.labels {
        if labels.clear == Some(true) && labels.win == Some(false) {
            report
                .violations
                .push(Violation::LabelConflict("clear implies win".into()));
        }
        if let Some(p) = labels.potted {
            if p > MAX_BALL_NUMBER {
                report
                    .violations
                    .push(Violation::LabelConflict(format!("potted {p} > 9")));
            }
        }
    }
    report
}

/// Parses a layout file: one record per line, blank lines ignored.
///
/// Every record is canonicalized and validated; all invalid records are
/// reported together with their line numbers.
pub fn parse_layouts<R: BufRead>(reader: R, geom: &TableGeometry) -> Result<Vec<Layout>> {
    let mut layouts = Vec::new();
    let mut errors = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<Layout>(&line) {
            Ok(mut layout) => {
                layout.canonicalize();
                let report = validate_layout(&layout, geom);
                if report.is_valid() {
                    layouts.push(layout);
                } else {
                    errors.push(LineError {
                        line: lineno,
                        message: report.summary(),
                    });
                }
            }
            Err(e) => errors.push(LineError {
                line: lineno,
                message: format!("malformed record: {e}"),
            }),
        }
    }
    if errors.is_empty() {
        Ok(layouts)
    } else {
        Err(Error::Parse(errors))
    }
}

/// Serializes layouts in the canonical line-delimited format.
pub fn write_layouts<W: Write>(writer: &mut W, layouts: &[Layout]) -> Result<()> {
    for layout in layouts {
        serde_json::to_writer(&mut *writer, layout)
            .map_err(|e| Error::Io(std::io::Error::other(e)))?;
        writer.write_all(b"\n")?;
    }
    Ok(())
}

pub fn layouts_to_string(layouts: &[Layout]) -> String {
    let mut buf = Vec::new();
    write_layouts(&mut buf, layouts).expect("in-memory write");
    String::from_utf8(buf).expect("layout json is utf-8")
}

pub fn read_layouts_file(path: &std::path::Path, geom: &TableGeometry) -> Result<Vec<Layout>> {
    let file = std::fs::File::open(path)?;
    parse_layouts(std::io::BufReader::new(file), geom)
}

pub fn write_layouts_file(path: &std::path::Path, layouts: &[Layout]) -> Result<()> {
    let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_layouts(&mut file, layouts)?;
    use std::io::Write as _;
    file.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn geom() -> TableGeometry {
        TableGeometry::standard()
    }

    #[test]
    fn parse_canonicalizes_storage_order() {
        let line = r#"{"id":"a","balls":[{"num":3,"x":50,"y":50},{"num":0,"x":10,"y":10},{"num":1,"x":100,"y":80}]}"#;
        let layouts = parse_layouts(line.as_bytes(), &geom()).unwrap();
        assert_eq!(layouts[0].ball_numbers(), vec![0, 1, 3]);
    }

    #[test]
    fn duplicate_number_is_reported_with_line() {
        let line = r#"{"id":"a","balls":[{"num":0,"x":10,"y":10},{"num":2,"x":50,"y":50},{"num":2,"x":90,"y":50}]}"#;
        let err = parse_layouts(line.as_bytes(), &geom()).unwrap_err();
        match err {
            Error::Parse(errors) => {
                assert_eq!(errors[0].line, 1);
                assert!(errors[0].message.contains("duplicate ball number 2"));
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn coordinate_out_of_bounds_is_reported() {
        let line = r#"{"id":"a","balls":[{"num":0,"x":250,"y":10}]}"#;
        let err = parse_layouts(line.as_bytes(), &geom()).unwrap_err();
        assert!(err.to_string().contains("out of bounds"));
    }

    #[test]
    fn missing_cue_is_reported() {
        let line = r#"{"id":"a","balls":[{"num":1,"x":20,"y":10}]}"#;
        let err = parse_layouts(line.as_bytes(), &geom()).unwrap_err();
        assert!(err.to_string().contains("missing cue ball"));
    }

    #[test]
    fn overlap_and_touching() {
        let mut l = Layout::new(
            "a",
            vec![Ball::new(0, 0.0, 0.0), Ball::new(1, 0.0, 0.0)],
        );
        assert!(!validate_layout(&l, &geom()).is_valid());
        l.balls[1].x = 10.0;
        assert!(validate_layout(&l, &geom()).is_valid());
    }

    #[test]
    fn negative_coordinate_is_out_of_bounds() {
        let l = Layout::new("a", vec![Ball::new(0, 5.0, -1.0)]);
        let report = validate_layout(&l, &geom());
        assert_eq!(report.violations.len(), 1);
        assert!(matches!(report.violations[0], Violation::OutOfBounds { .. }));
    }

    #[test]
    fn clear_implies_win() {
        let mut l = Layout::new("a", vec![Ball::new(0, 5.0, 5.0)]);
        l.labels = Some(GameLabels {
            clear: Some(true),
            win: Some(false),
            potted: None,
        });
        assert!(!validate_layout(&l, &geom()).is_valid());
    }

    #[test]
    fn round_trip_at_declared_precision() {
        let mut l = Layout::new(
            "rt",
            vec![Ball::new(0, 88.06, 76.02), Ball::new(9, 13.5, 99.25)],
        );
        l.labels = Some(GameLabels {
            clear: Some(false),
            win: Some(true),
            potted: Some(2),
        });
        l.remarks = Some("foul".into());
        let text = layouts_to_string(&[l.clone()]);
        let back = parse_layouts(text.as_bytes(), &geom()).unwrap();
        assert_eq!(back, vec![l]);
    }
}
