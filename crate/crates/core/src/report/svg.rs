//! Deterministic SVG figures.
//!
//! `grid-bars` draws one `<rect class="bar">` per row of a transfer summary
//! CSV, grouped by test language in order of first appearance; rows without
//! a mean are drawn as `class="missing"` markers. `trajectory-lines` draws one
//! panel per feature with a `<polyline class="trajectory">` over epochs and a
//! horizontal `<line class="baseline">`. Coordinates are printed with two
//! decimals, so identical input gives identical bytes.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::transfer::csv_io::{read_rows, SummaryRow};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FigureKind {
    GridBars,
    TrajectoryLines,
}

impl FigureKind {
    pub fn as_str(self) -> &'static str {
        match self {
            FigureKind::GridBars => "grid-bars",
            FigureKind::TrajectoryLines => "trajectory-lines",
        }
    }
}

impl FromStr for FigureKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "grid-bars" => Ok(FigureKind::GridBars),
            "trajectory-lines" => Ok(FigureKind::TrajectoryLines),
            other => Err(Error::Config(format!(
                "unknown figure kind `{other}` (expected grid-bars or trajectory-lines)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FigureSpec {
    pub kind: FigureKind,
    pub source: PathBuf,
    pub output: PathBuf,
}

/// One feature's accuracy series.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub feature: String,
    pub points: Vec<(usize, f64)>,
    pub baseline: f64,
    pub pattern: Option<String>,
}

pub fn render_figure(spec: &FigureSpec) -> Result<()> {
    let text = std::fs::read_to_string(&spec.source).map_err(|e| Error::io(&spec.source, e))?;
    let svg = match spec.kind {
        FigureKind::GridBars => render_grid_bars(&read_rows::<SummaryRow>(&text)?)?,
        FigureKind::TrajectoryLines => render_trajectories(&read_trajectories(&text)?)?,
    };
    write_file(&spec.output, &svg)
}

pub(crate) fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    std::fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn empty_csv() -> Error {
    Error::Parse {
        line: 1,
        msg: "CSV has no data rows".into(),
    }
}

const PLOT_H: f64 = 200.0;
const TOP: f64 = 30.0;
const LEFT: f64 = 50.0;
const BAR_W: f64 = 14.0;
const BAR_GAP: f64 = 2.0;
const GROUP_GAP: f64 = 24.0;

pub fn render_grid_bars(rows: &[SummaryRow]) -> Result<String> {
    if rows.is_empty() {
        return Err(empty_csv());
    }
    let mut order: Vec<&str> = Vec::new();
    let mut groups: BTreeMap<&str, Vec<&SummaryRow>> = BTreeMap::new();
    for r in rows {
        if !groups.contains_key(r.test_lang.as_str()) {
            order.push(&r.test_lang);
        }
        groups.entry(&r.test_lang).or_default().push(r);
    }
    let group_widths: Vec<f64> = order
        .iter()
        .map(|t| groups[t].len() as f64 * (BAR_W + BAR_GAP))
        .collect();
    let width = LEFT + group_widths.iter().sum::<f64>() + GROUP_GAP * (order.len() as f64 + 1.0);
    let height = TOP + PLOT_H + 60.0;
    let base_y = TOP + PLOT_H;

    let mut s = String::new();
    writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.2}" height="{height:.2}" viewBox="0 0 {width:.2} {height:.2}" font-family="sans-serif" font-size="10">"#
    )
    .unwrap();
    writeln!(s, r#"<text x="{LEFT:.2}" y="16.00" font-size="12">accuracy by test language</text>"#).unwrap();
    for i in 0..=4 {
        let v = i as f64 / 4.0;
        let y = base_y - v * PLOT_H;
        writeln!(
            s,
            r##"<line class="tick" x1="{:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#dddddd"/><text x="{:.2}" y="{:.2}" text-anchor="end">{v:.2}</text>"##,
            LEFT,
            width - GROUP_GAP / 2.0,
            LEFT - 4.0,
            y + 3.0
        )
        .unwrap();
    }
    let mut x = LEFT + GROUP_GAP;
    for (test, gw) in order.iter().zip(&group_widths) {
        writeln!(s, r#"<g class="group" data-test="{}">"#, escape(test)).unwrap();
        for r in &groups[test] {
            let label = format!(
                "{} on {} ({})",
                r.train_langs,
                r.test_lang,
                if r.use_lang_emb { "with language embeddings" } else { "without language embeddings" }
            );
            match r.mean {
                Some(m) => {
                    let h = m.clamp(0.0, 1.0) * PLOT_H;
                    let fill = if r.use_lang_emb { "#3a6ea5" } else { "#d9843b" };
                    writeln!(
                        s,
                        r#"<rect class="bar" x="{x:.2}" y="{:.2}" width="{BAR_W:.2}" height="{h:.2}" fill="{fill}"><title>{}: {m:.4}</title></rect>"#,
                        base_y - h,
                        escape(&label)
                    )
                    .unwrap();
                }
                None => {
                    writeln!(
                        s,
                        r##"<rect class="missing" x="{x:.2}" y="{:.2}" width="{BAR_W:.2}" height="2.00" fill="#999999"><title>{}: failed</title></rect>"##,
                        base_y - 2.0,
                        escape(&label)
                    )
                    .unwrap();
                }
            }
            x += BAR_W + BAR_GAP;
        }
        writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            x - gw / 2.0 - BAR_GAP / 2.0,
            base_y + 14.0,
            escape(test)
        )
        .unwrap();
        s.push_str("</g>\n");
        x += GROUP_GAP;
    }
    writeln!(
        s,
        r##"<rect x="{LEFT:.2}" y="{:.2}" width="10.00" height="10.00" fill="#3a6ea5"/><text x="{:.2}" y="{:.2}">with language embeddings</text>"##,
        base_y + 30.0,
        LEFT + 14.0,
        base_y + 39.0
    )
    .unwrap();
    writeln!(
        s,
        r##"<rect x="{:.2}" y="{:.2}" width="10.00" height="10.00" fill="#d9843b"/><text x="{:.2}" y="{:.2}">without</text>"##,
        LEFT + 160.0,
        base_y + 30.0,
        LEFT + 174.0,
        base_y + 39.0
    )
    .unwrap();
    s.push_str("</svg>\n");
    Ok(s)
}

/// Reads a trajectory CSV with columns `feature_id`, `epoch`, a value column
/// (`cv_accuracy` or `uralic_accuracy`), `baseline` and optionally `pattern`.
/// Features keep their order of first appearance; points are sorted by epoch.
pub fn read_trajectories(text: &str) -> Result<Vec<Trajectory>> {
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let headers = reader.headers()?.clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let missing = |name: &str| Error::Parse {
        line: 1,
        msg: format!("missing column `{name}`"),
    };
    let feature = col("feature_id").ok_or_else(|| missing("feature_id"))?;
    let epoch = col("epoch").ok_or_else(|| missing("epoch"))?;
    let value = col("cv_accuracy")
        .or_else(|| col("uralic_accuracy"))
        .ok_or_else(|| missing("cv_accuracy"))?;
    let baseline = col("baseline").ok_or_else(|| missing("baseline"))?;
    let pattern = col("pattern");

    let mut out: Vec<Trajectory> = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec?;
        let line = i + 2;
        let field = |c: usize| rec.get(c).unwrap_or("");
        let parse_err = |what: &str| Error::Parse {
            line,
            msg: format!("bad {what} `{}`", rec.iter().collect::<Vec<_>>().join(",")),
        };
        let f = field(feature).to_string();
        let e: usize = field(epoch).parse().map_err(|_| parse_err("epoch"))?;
        let v: f64 = field(value).parse().map_err(|_| parse_err("accuracy"))?;
        let b: f64 = field(baseline).parse().map_err(|_| parse_err("baseline"))?;
        let p = pattern.map(|c| field(c).to_string()).filter(|p| !p.is_empty());
        match out.iter_mut().find(|t| t.feature == f) {
            Some(t) => t.points.push((e, v)),
            None => out.push(Trajectory {
                feature: f,
                points: vec![(e, v)],
                baseline: b,
                pattern: p,
            }),
        }
    }
    if out.is_empty() {
        return Err(empty_csv());
    }
    for t in &mut out {
        t.points.sort_by_key(|(e, _)| *e);
    }
    Ok(out)
}

const PANEL_W: f64 = 220.0;
const PANEL_H: f64 = 150.0;
const COLUMNS: usize = 4;

pub fn render_trajectories(series: &[Trajectory]) -> Result<String> {
    if series.is_empty() {
        return Err(empty_csv());
    }
    let cols = COLUMNS.min(series.len());
    let rows = series.len().div_ceil(cols);
    let width = cols as f64 * PANEL_W;
    let height = rows as f64 * PANEL_H;
    let (pl, pr, pt, pb) = (36.0, 10.0, 22.0, 24.0);
    let inner_w = PANEL_W - pl - pr;
    let inner_h = PANEL_H - pt - pb;

    let mut s = String::new();
    writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.2}" height="{height:.2}" viewBox="0 0 {width:.2} {height:.2}" font-family="sans-serif" font-size="9">"#
    )
    .unwrap();
    for (i, t) in series.iter().enumerate() {
        let ox = (i % cols) as f64 * PANEL_W;
        let oy = (i / cols) as f64 * PANEL_H;
        let max_epoch = t.points.iter().map(|(e, _)| *e).max().unwrap_or(0).max(1) as f64;
        let px = |e: usize| ox + pl + e as f64 / max_epoch * inner_w;
        let py = |a: f64| oy + pt + (1.0 - a.clamp(0.0, 1.0)) * inner_h;

        writeln!(s, r#"<g class="panel" data-feature="{}">"#, escape(&t.feature)).unwrap();
        let title = match &t.pattern {
            Some(p) => format!("{} ({})", t.feature, p),
            None => t.feature.clone(),
        };
        writeln!(s, r#"<text x="{:.2}" y="{:.2}" font-size="10">{}</text>"#, ox + pl, oy + 14.0, escape(&title)).unwrap();
        writeln!(
            s,
            r##"<rect x="{:.2}" y="{:.2}" width="{inner_w:.2}" height="{inner_h:.2}" fill="none" stroke="#cccccc"/>"##,
            ox + pl,
            oy + pt
        )
        .unwrap();
        for v in [0.0, 0.5, 1.0] {
            writeln!(
                s,
                r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{v:.1}</text>"#,
                ox + pl - 3.0,
                py(v) + 3.0
            )
            .unwrap();
        }
        for (e, _) in &t.points {
            writeln!(
                s,
                r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{e}</text>"#,
                px(*e),
                oy + pt + inner_h + 12.0
            )
            .unwrap();
        }
        writeln!(
            s,
            r##"<line class="baseline" x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="#888888" stroke-dasharray="4 3"/>"##,
            ox + pl,
            py(t.baseline),
            ox + pl + inner_w,
            py(t.baseline)
        )
        .unwrap();
        let pts: Vec<String> = t.points.iter().map(|(e, a)| format!("{:.2},{:.2}", px(*e), py(*a))).collect();
        writeln!(
            s,
            r##"<polyline class="trajectory" points="{}" fill="none" stroke="#3a6ea5" stroke-width="1.5"/>"##,
            pts.join(" ")
        )
        .unwrap();
        s.push_str("</g>\n");
    }
    s.push_str("</svg>\n");
    Ok(s)
}
