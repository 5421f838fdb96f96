//! CSV files for branches and events, and SVG renderings of diagrams and
//! solution profiles.
//!
//! Every CSV written here can be read back by the matching reader, which is
//! what the `plot` command runs on.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::continuation::{Branch, BranchPoint, Diagram, Event, EventKind};
use crate::discretization::StateVector;
use crate::error::{Error, Result};

pub const BRANCH_HEADER: [&str; 9] = [
    "param",
    "norm_u",
    "norm_v",
    "u0",
    "v0",
    "stability_index",
    "min_u",
    "min_v",
    "event_flag",
];
pub const EVENT_HEADER: [&str; 4] = ["kind", "param", "branch_id", "mode_hint"];

fn csv_error(path: &Path, line: u64, message: impl Into<String>) -> Error {
    Error::Csv {
        path: path.display().to_string(),
        line: line as usize,
        message: message.into(),
    }
}

/// Rows of a headed CSV file with the header checked, each with its 1-based
/// line number.
pub fn read_table(path: &Path, header: &[&str]) -> Result<Vec<(u64, csv::StringRecord)>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_error(path, 0, e.to_string()))?;
    let found = reader.headers().map_err(|e| csv_error(path, 1, e.to_string()))?.clone();
    if found.iter().ne(header.iter().copied()) {
        return Err(csv_error(path, 1, format!("expected header {}", header.join(","))));
    }
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            csv_error(path, line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line());
        rows.push((line, record));
    }
    Ok(rows)
}

pub(crate) fn parse_field<T: std::str::FromStr>(path: &Path, line: u64, record: &csv::StringRecord, i: usize, name: &str) -> Result<T> {
    let raw = record.get(i).unwrap_or("");
    raw.parse()
        .map_err(|_| csv_error(path, line, format!("bad {name}: {raw:?}")))
}

fn write_table(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, 0, e.to_string()))?;
    let io = |e: csv::Error| csv_error(path, 0, e.to_string());
    w.write_record(header).map_err(io)?;
    for row in rows {
        w.write_record(&row).map_err(io)?;
    }
    w.flush()?;
    Ok(())
}

/// One row of a branch CSV.
#[derive(Clone, Debug, PartialEq)]
pub struct BranchRow {
    pub param: f64,
    pub norm_u: f64,
    pub norm_v: f64,
    pub u0: f64,
    pub v0: f64,
    pub stability_index: usize,
    pub min_u: f64,
    pub min_v: f64,
    pub event_flag: Option<EventKind>,
}

impl From<&BranchPoint> for BranchRow {
    fn from(p: &BranchPoint) -> Self {
        BranchRow {
            param: p.value(),
            norm_u: p.norm_u,
            norm_v: p.norm_v,
            u0: p.u0,
            v0: p.v0,
            stability_index: p.stability_index,
            min_u: p.min_u,
            min_v: p.min_v,
            event_flag: p.event,
        }
    }
}

impl BranchRow {
    pub fn is_stable(&self) -> bool {
        self.stability_index == 0
    }
}

pub fn branch_rows(branch: &Branch) -> Vec<BranchRow> {
    branch.points.iter().map(BranchRow::from).collect()
}

pub fn write_branch_csv(rows: &[BranchRow], path: &Path) -> Result<()> {
    write_table(
        path,
        &BRANCH_HEADER,
        rows.iter().map(|r| {
            vec![
                r.param.to_string(),
                r.norm_u.to_string(),
                r.norm_v.to_string(),
                r.u0.to_string(),
                r.v0.to_string(),
                r.stability_index.to_string(),
                r.min_u.to_string(),
                r.min_v.to_string(),
                r.event_flag.map_or(String::new(), |k| k.code().to_string()),
            ]
        }),
    )
}

pub fn read_branch_csv(path: &Path) -> Result<Vec<BranchRow>> {
    read_table(path, &BRANCH_HEADER)?
        .into_iter()
        .map(|(line, r)| {
            let f = |i: usize| parse_field::<f64>(path, line, &r, i, BRANCH_HEADER[i]);
            let flag = r.get(8).unwrap_or("");
            let event_flag = if flag.is_empty() {
                None
            } else {
                Some(EventKind::from_code(flag).ok_or_else(|| csv_error(path, line, format!("unknown event flag {flag:?}")))?)
            };
            Ok(BranchRow {
                param: f(0)?,
                norm_u: f(1)?,
                norm_v: f(2)?,
                u0: f(3)?,
                v0: f(4)?,
                stability_index: parse_field(path, line, &r, 5, "stability_index")?,
                min_u: f(6)?,
                min_v: f(7)?,
                event_flag,
            })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct EventRow {
    pub kind: EventKind,
    pub param: f64,
    pub branch_id: usize,
    pub mode_hint: Option<usize>,
}

impl From<&Event> for EventRow {
    fn from(e: &Event) -> Self {
        EventRow {
            kind: e.kind,
            param: e.value,
            branch_id: e.branch_id,
            mode_hint: e.mode_hint,
        }
    }
}

pub fn write_events_csv(rows: &[EventRow], path: &Path) -> Result<()> {
    write_table(
        path,
        &EVENT_HEADER,
        rows.iter().map(|e| {
            vec![
                e.kind.code().to_string(),
                e.param.to_string(),
                e.branch_id.to_string(),
                e.mode_hint.map_or(String::new(), |k| k.to_string()),
            ]
        }),
    )
}

pub fn read_events_csv(path: &Path) -> Result<Vec<EventRow>> {
    read_table(path, &EVENT_HEADER)?
        .into_iter()
        .map(|(line, r)| {
            let kind_raw = r.get(0).unwrap_or("");
            let kind = EventKind::from_code(kind_raw).ok_or_else(|| csv_error(path, line, format!("unknown event kind {kind_raw:?}")))?;
            let hint = r.get(3).unwrap_or("");
            Ok(EventRow {
                kind,
                param: parse_field(path, line, &r, 1, "param")?,
                branch_id: parse_field(path, line, &r, 2, "branch_id")?,
                mode_hint: if hint.is_empty() {
                    None
                } else {
                    Some(parse_field(path, line, &r, 3, "mode_hint")?)
                },
            })
        })
        .collect()
}

/// Writes `branch_<id>.csv` for every branch, `events.csv` and `diagram.svg`
/// into `dir`; returns the paths written.
pub fn write_diagram(diagram: &Diagram, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let mut series = Vec::new();
    for b in diagram.all_branches() {
        let rows = branch_rows(b);
        let path = dir.join(format!("branch_{:03}.csv", b.id));
        write_branch_csv(&rows, &path)?;
        written.push(path);
        series.push(Series { id: b.id, rows });
    }
    let events: Vec<EventRow> = diagram.events().into_iter().map(EventRow::from).collect();
    let path = dir.join("events.csv");
    write_events_csv(&events, &path)?;
    written.push(path);
    let path = dir.join("diagram.svg");
    fs::write(&path, diagram_svg(&series, diagram.param.name()))?;
    written.push(path);
    Ok(written)
}

/// Branch colours in discovery order; branch 0 (homogeneous) is black.
pub const PALETTE: [&str; 8] = ["#1f4fd6", "#d62728", "#2ca02c", "#c21cc2", "#17becf", "#ff7f0e", "#8c564b", "#7f7f7f"];

pub fn branch_colour(id: usize) -> &'static str {
    if id == 0 {
        "#000000"
    } else {
        PALETTE[(id - 1) % PALETTE.len()]
    }
}

pub const STABLE_WIDTH: f64 = 2.0;
pub const UNSTABLE_WIDTH: f64 = 0.75;

/// One polyline of a diagram: a branch id (for its colour) and its rows.
#[derive(Clone, Debug)]
pub struct Series {
    pub id: usize,
    pub rows: Vec<BranchRow>,
}

struct Frame {
    width: f64,
    height: f64,
    margin: f64,
    x: (f64, f64),
    y: (f64, f64),
}

impl Frame {
    fn new(xs: impl Iterator<Item = f64> + Clone, ys: impl Iterator<Item = f64> + Clone) -> Self {
        let span = |it: &mut dyn Iterator<Item = f64>| {
            let (lo, hi) = it.filter(|v| v.is_finite()).fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
            if !lo.is_finite() {
                (0.0, 1.0)
            } else if hi - lo < 1e-12 * (1.0 + lo.abs()) {
                (lo - 0.5, hi + 0.5)
            } else {
                let pad = 0.05 * (hi - lo);
                (lo - pad, hi + pad)
            }
        };
        Frame {
            width: 640.0,
            height: 440.0,
            margin: 60.0,
            x: span(&mut xs.clone()),
            y: span(&mut ys.clone()),
        }
    }

    fn px(&self, x: f64) -> f64 {
        self.margin + (x - self.x.0) / (self.x.1 - self.x.0) * (self.width - 2.0 * self.margin)
    }

    fn py(&self, y: f64) -> f64 {
        self.height - self.margin - (y - self.y.0) / (self.y.1 - self.y.0) * (self.height - 2.0 * self.margin)
    }

    fn open(&self, out: &mut String, description: &str) {
        let _ = writeln!(
            out,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#,
            w = self.width,
            h = self.height
        );
        let _ = writeln!(out, "<desc>{}</desc>", escape(description));
        let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    }

    fn axes(&self, out: &mut String, xlabel: &str, ylabel: &str) {
        let (l, r) = (self.margin, self.width - self.margin);
        let (t, b) = (self.margin, self.height - self.margin);
        let _ = writeln!(out, r##"<rect x="{l}" y="{t}" width="{}" height="{}" fill="none" stroke="#444" stroke-width="1"/>"##, r - l, b - t);
        for i in 0..=4 {
            let f = i as f64 / 4.0;
            let xv = self.x.0 + f * (self.x.1 - self.x.0);
            let yv = self.y.0 + f * (self.y.1 - self.y.0);
            let (xp, yp) = (self.px(xv), self.py(yv));
            let _ = writeln!(out, r##"<line x1="{xp:.2}" y1="{b}" x2="{xp:.2}" y2="{:.2}" stroke="#444"/>"##, b + 5.0);
            let _ = writeln!(out, r#"<text x="{xp:.2}" y="{:.2}" font-size="11" text-anchor="middle">{}</text>"#, b + 18.0, tick(xv));
            let _ = writeln!(out, r##"<line x1="{:.2}" y1="{yp:.2}" x2="{l}" y2="{yp:.2}" stroke="#444"/>"##, l - 5.0);
            let _ = writeln!(out, r#"<text x="{:.2}" y="{:.2}" font-size="11" text-anchor="end">{}</text>"#, l - 8.0, yp + 4.0, tick(yv));
        }
        let _ = writeln!(out, r#"<text x="{:.2}" y="{:.2}" font-size="13" text-anchor="middle">{}</text>"#, 0.5 * (l + r), self.height - 15.0, escape(xlabel));
        let _ = writeln!(
            out,
            r#"<text x="15" y="{:.2}" font-size="13" text-anchor="middle" transform="rotate(-90 15 {:.2})">{}</text>"#,
            0.5 * (t + b),
            0.5 * (t + b),
            escape(ylabel)
        );
    }
}

fn tick(v: f64) -> String {
    let a = v.abs();
    if a != 0.0 && !(1e-3..1e4).contains(&a) {
        format!("{v:.2e}")
    } else {
        format!("{v:.4}")
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn polyline(out: &mut String, frame: &Frame, pts: &[(f64, f64)], colour: &str, width: f64) {
    if pts.len() < 2 {
        return;
    }
    let coords: Vec<String> = pts.iter().map(|&(x, y)| format!("{:.2},{:.2}", frame.px(x), frame.py(y))).collect();
    let _ = writeln!(
        out,
        r#"<polyline points="{}" fill="none" stroke="{colour}" stroke-width="{width}"/>"#,
        coords.join(" ")
    );
}

fn glyph(out: &mut String, kind: EventKind, x: f64, y: f64) {
    const R: f64 = 4.5;
    match kind {
        EventKind::BranchPoint => {
            let _ = writeln!(out, r#"<circle class="bp" cx="{x:.2}" cy="{y:.2}" r="{R}" fill="none" stroke="black"/>"#);
        }
        EventKind::Fold => {
            let _ = writeln!(
                out,
                r#"<path class="fold" d="M{:.2},{:.2} L{:.2},{:.2} M{:.2},{:.2} L{:.2},{:.2}" stroke="black" stroke-width="1.2"/>"#,
                x - R, y - R, x + R, y + R, x - R, y + R, x + R, y - R
            );
        }
        EventKind::Hopf => {
            let _ = writeln!(
                out,
                r#"<path class="hopf" d="M{x:.2},{:.2} L{:.2},{y:.2} L{x:.2},{:.2} L{:.2},{y:.2} Z" fill="none" stroke="black"/>"#,
                y - R, x + R, y + R, x - R
            );
        }
    }
}

/// Bifurcation diagram: parameter against ‖u‖, thick lines where the stability
/// index is zero, circles/crosses/diamonds for branch points/folds/Hopf points.
pub fn diagram_svg(series: &[Series], param_name: &str) -> String {
    let all = || series.iter().flat_map(|s| s.rows.iter());
    let frame = Frame::new(all().map(|r| r.param), all().map(|r| r.norm_u));
    let mut legend = String::from("colours by branch id in discovery order: 0 black (homogeneous)");
    for s in series.iter().filter(|s| s.id != 0) {
        let _ = write!(legend, "; {} {}", s.id, branch_colour(s.id));
    }
    legend.push_str(". Line width 2.0 stable, 0.75 unstable. Circle = branch point, cross = fold, diamond = Hopf.");
    let mut out = String::new();
    frame.open(&mut out, &legend);
    frame.axes(&mut out, param_name, "‖u‖");
    for s in series {
        let colour = branch_colour(s.id);
        // Split into runs of equal stability; neighbouring runs share a point.
        let mut start = 0;
        for i in 1..=s.rows.len() {
            if i == s.rows.len() || s.rows[i].is_stable() != s.rows[start].is_stable() {
                let end = (i + 1).min(s.rows.len());
                let pts: Vec<(f64, f64)> = s.rows[start..end].iter().map(|r| (r.param, r.norm_u)).collect();
                let width = if s.rows[start].is_stable() { STABLE_WIDTH } else { UNSTABLE_WIDTH };
                polyline(&mut out, &frame, &pts, colour, width);
                start = i;
            }
        }
    }
    for s in series {
        for r in &s.rows {
            if let Some(kind) = r.event_flag {
                glyph(&mut out, kind, frame.px(r.param), frame.py(r.norm_u));
            }
        }
    }
    out.push_str("</svg>\n");
    out
}

/// Overlay of several diagrams (e.g. one per sweep value), shaded from light
/// to dark in the given order.
pub fn overlay_svg(layers: &[(String, Vec<Series>)], param_name: &str) -> String {
    let all = || layers.iter().flat_map(|(_, s)| s.iter().flat_map(|x| x.rows.iter()));
    let frame = Frame::new(all().map(|r| r.param), all().map(|r| r.norm_u));
    let shade = |i: usize| {
        let f = if layers.len() > 1 { i as f64 / (layers.len() - 1) as f64 } else { 1.0 };
        let c = |light: f64, dark: f64| (light + f * (dark - light)).round() as u8;
        format!("#{:02x}{:02x}{:02x}", c(160.0, 8.0), c(200.0, 30.0), c(255.0, 120.0))
    };
    let labels: Vec<String> = layers.iter().enumerate().map(|(i, (l, _))| format!("{l} {}", shade(i))).collect();
    let mut out = String::new();
    frame.open(&mut out, &format!("overlay, light to dark: {}", labels.join("; ")));
    frame.axes(&mut out, param_name, "‖u‖");
    for (i, (label, series)) in layers.iter().enumerate() {
        let colour = shade(i);
        let _ = writeln!(out, "<g><title>{}</title>", escape(label));
        for s in series {
            let colour = if s.id == 0 { "#000000".to_string() } else { colour.clone() };
            let mut start = 0;
            for j in 1..=s.rows.len() {
                if j == s.rows.len() || s.rows[j].is_stable() != s.rows[start].is_stable() {
                    let end = (j + 1).min(s.rows.len());
                    let pts: Vec<(f64, f64)> = s.rows[start..end].iter().map(|r| (r.param, r.norm_u)).collect();
                    let width = if s.rows[start].is_stable() { STABLE_WIDTH } else { UNSTABLE_WIDTH };
                    polyline(&mut out, &frame, &pts, &colour, width);
                    start = j;
                }
            }
        }
        out.push_str("</g>\n");
    }
    out.push_str("</svg>\n");
    out
}

/// `max uv − min uv` over the nodes.
pub fn uv_spread(s: &StateVector) -> f64 {
    let uv: Vec<f64> = (0..s.nodes()).map(|i| s.u(i) * s.v(i)).collect();
    let (lo, hi) = uv.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
    hi - lo
}

/// Solution profile: `u` black, `v` blue, and optionally `uv` in red with its
/// spread in the caption.
pub fn profile_svg(s: &StateVector, show_uv: bool, caption: &str) -> String {
    let xs = s.grid.coordinates();
    let u = s.u_values();
    let v = s.v_values();
    let uv: Vec<f64> = u.iter().zip(&v).map(|(a, b)| a * b).collect();
    let ys: Vec<f64> = u.iter().chain(&v).chain(if show_uv { uv.iter() } else { [].iter() }).copied().collect();
    let frame = Frame::new(xs.iter().copied(), ys.iter().copied());
    let mut text = caption.to_string();
    if show_uv {
        let _ = write!(text, " uv spread (max - min) = {:.6e}", uv_spread(s));
    }
    let mut out = String::new();
    frame.open(&mut out, "u black, v blue, uv red");
    frame.axes(&mut out, "x", "density");
    let line = |out: &mut String, ys: &[f64], colour: &str| {
        let pts: Vec<(f64, f64)> = xs.iter().copied().zip(ys.iter().copied()).collect();
        polyline(out, &frame, &pts, colour, 1.5);
    };
    line(&mut out, &u, "#000000");
    line(&mut out, &v, "#1f4fd6");
    if show_uv {
        line(&mut out, &uv, "#d62728");
    }
    let _ = writeln!(out, r#"<text class="caption" x="{:.2}" y="30" font-size="12" text-anchor="middle">{}</text>"#, 0.5 * frame.width, escape(&text));
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discretization::{ActiveParam, Grid};

    fn row(param: f64, norm_u: f64, si: usize, flag: Option<EventKind>) -> BranchRow {
        BranchRow {
            param,
            norm_u,
            norm_v: 0.1,
            u0: 1.0,
            v0: 0.2,
            stability_index: si,
            min_u: 0.5,
            min_v: 1e-3,
            event_flag: flag,
        }
    }

    #[test]
    fn branch_csv_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("b.csv");
        let rows = vec![
            row(0.0328, 1.625, 0, Some(EventKind::BranchPoint)),
            row(0.03, 1.61477115, 1, None),
            row(1.0 / 3.0, 1.6, 2, Some(EventKind::Hopf)),
        ];
        write_branch_csv(&rows, &path).unwrap();
        assert_eq!(read_branch_csv(&path).unwrap(), rows);
    }

    #[test]
    fn event_csv_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("e.csv");
        let rows = vec![
            EventRow { kind: EventKind::BranchPoint, param: 0.0205, branch_id: 0, mode_hint: Some(2) },
            EventRow { kind: EventKind::Fold, param: 0.019231711, branch_id: 1, mode_hint: None },
        ];
        write_events_csv(&rows, &path).unwrap();
        assert_eq!(read_events_csv(&path).unwrap(), rows);
    }

    #[test]
    fn malformed_csv_reports_the_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        fs::write(&path, format!("{}\n0.1,1,1,1,1,0,1,1,\n0.2,1,oops,1,1,0,1,1,\n", BRANCH_HEADER.join(","))).unwrap();
        match read_branch_csv(&path) {
            Err(Error::Csv { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        fs::write(&path, "a,b\n1,2\n").unwrap();
        assert!(matches!(read_branch_csv(&path), Err(Error::Csv { line: 1, .. })));
    }

    #[test]
    fn all_stable_rows_give_only_thick_lines() {
        let rows: Vec<BranchRow> = (0..5).map(|i| row(i as f64, 1.0 + i as f64, 0, None)).collect();
        let svg = diagram_svg(&[Series { id: 1, rows }], "d");
        assert!(svg.contains(r#"stroke-width="2""#));
        assert!(!svg.contains(r#"stroke-width="0.75""#));
    }

    #[test]
    fn stability_changes_split_the_line_and_events_get_glyphs() {
        let rows = vec![
            row(0.0, 1.0, 0, Some(EventKind::BranchPoint)),
            row(1.0, 1.1, 0, None),
            row(2.0, 1.2, 1, Some(EventKind::Fold)),
            row(3.0, 1.3, 1, Some(EventKind::Hopf)),
        ];
        let svg = diagram_svg(&[Series { id: 2, rows }], "d");
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert_eq!(svg.matches(r#"class="bp""#).count(), 1);
        assert_eq!(svg.matches(r#"class="fold""#).count(), 1);
        assert_eq!(svg.matches(r#"class="hopf""#).count(), 1);
        assert!(svg.contains(branch_colour(2)));
    }

    #[test]
    fn no_events_means_no_glyphs() {
        let rows: Vec<BranchRow> = (0..3).map(|i| row(i as f64, 1.0, 1, None)).collect();
        let svg = diagram_svg(&[Series { id: 0, rows }], "d");
        assert!(!svg.contains("<circle") && !svg.contains("class=\"fold\"") && !svg.contains("class=\"hopf\""));
    }

    #[test]
    fn profile_reports_uv_spread() {
        let g = Grid::new(11).unwrap();
        let s = StateVector::from_fn(g, ActiveParam::D, 0.01, |x| (1.0 + x, 2.0 / (1.0 + x)));
        assert!(uv_spread(&s) < 1e-12);
        let svg = profile_svg(&s, true, "flat product");
        assert!(svg.contains("uv spread (max - min) = "));
        assert_eq!(svg.matches("<polyline").count(), 3);
        assert_eq!(profile_svg(&s, false, "").matches("<polyline").count(), 2);
    }
}
