use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::Serialize;
use serde_json::{json, Value};

use super::sweep::TauSweep;
use super::PipelineError;

/// One line of a metric table. Missing metrics stay empty.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct ReportRow {
    pub name: String,
    pub frames: usize,
    pub psnr: Option<f64>,
    pub ssim: Option<f64>,
    pub mtsed: Option<f64>,
    pub fvd: Option<f64>,
}

impl ReportRow {
    fn metrics(&self) -> [(&'static str, Option<f64>); 4] {
        [("psnr", self.psnr), ("ssim", self.ssim), ("mtsed", self.mtsed), ("fvd", self.fvd)]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Json,
    Svg,
}

impl ReportFormat {
    pub fn extension(self) -> &'static str {
        match self {
            ReportFormat::Csv => "csv",
            ReportFormat::Json => "json",
            ReportFormat::Svg => "svg",
        }
    }
}

impl FromStr for ReportFormat {
    type Err = PipelineError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "csv" => Ok(ReportFormat::Csv),
            "json" => Ok(ReportFormat::Json),
            "svg" | "svg-plot" => Ok(ReportFormat::Svg),
            _ => Err(PipelineError::Validation(format!("unknown report format {s:?}"))),
        }
    }
}

/// Finite values as plain numbers, infinities as `inf`/`-inf`.
pub fn format_value(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf" } else { "-inf" }.into()
    } else {
        format!("{x}")
    }
}

fn json_value(x: Option<f64>) -> Value {
    match x {
        None => Value::Null,
        Some(v) if v.is_finite() => json!(v),
        Some(v) => Value::String(format_value(v)),
    }
}

fn csv_bytes(header: &[&str], rows: impl Iterator<Item = Vec<String>>) -> Result<Vec<u8>, PipelineError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let err = |e: csv::Error| PipelineError::Runtime(e.to_string());
    w.write_record(header).map_err(err)?;
    for r in rows {
        w.write_record(&r).map_err(err)?;
    }
    w.into_inner().map_err(|e| PipelineError::Runtime(e.to_string()))
}

fn json_bytes(v: &Value) -> Vec<u8> {
    let mut s = serde_json::to_string_pretty(v).expect("values always serialize");
    s.push('\n');
    s.into_bytes()
}

pub fn render_report(rows: &[ReportRow], format: ReportFormat) -> Result<Vec<u8>, PipelineError> {
    match format {
        ReportFormat::Csv => csv_bytes(
            &["name", "frames", "psnr", "ssim", "mtsed", "fvd"],
            rows.iter().map(|r| {
                let mut out = vec![r.name.clone(), r.frames.to_string()];
                out.extend(r.metrics().iter().map(|(_, v)| v.map(format_value).unwrap_or_default()));
                out
            }),
        ),
        ReportFormat::Json => Ok(json_bytes(&Value::Array(
            rows.iter()
                .map(|r| {
                    let mut o = serde_json::Map::new();
                    o.insert("name".into(), json!(r.name));
                    o.insert("frames".into(), json!(r.frames));
                    for (k, v) in r.metrics() {
                        o.insert(k.into(), json_value(v));
                    }
                    Value::Object(o)
                })
                .collect(),
        ))),
        ReportFormat::Svg => Ok(line_plot(rows).into_bytes()),
    }
}

/// Writes `rows` in `format`; output is a pure function of the input.
pub fn emit_report(rows: &[ReportRow], format: ReportFormat, path: &Path) -> Result<(), PipelineError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, render_report(rows, format)?)?;
    Ok(())
}

const W: f64 = 640.0;
const H: f64 = 400.0;
const MARGIN: f64 = 60.0;
const COLORS: [&str; 4] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];

fn svg_open(out: &mut String) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
}

fn range(xs: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = xs.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| (a.min(x), b.max(x)));
    if !lo.is_finite() {
        (0.0, 1.0)
    } else if hi - lo < 1e-12 {
        (lo - 0.5, hi + 0.5)
    } else {
        (lo, hi)
    }
}

/// Each metric against frame count, normalized to its own range so the
/// curves share one panel. Non-finite values are skipped.
fn line_plot(rows: &[ReportRow]) -> String {
    let mut sorted: Vec<&ReportRow> = rows.iter().collect();
    sorted.sort_by(|a, b| a.frames.cmp(&b.frames).then_with(|| a.name.cmp(&b.name)));
    let (x0, x1) = range(sorted.iter().map(|r| r.frames as f64));
    let px = |x: f64| MARGIN + (x - x0) / (x1 - x0) * (W - 2.0 * MARGIN);
    let mut out = String::new();
    svg_open(&mut out);
    let _ = writeln!(
        out,
        r#"<path d="M{m} {b} L{r} {b} M{m} {b} L{m} {m}" stroke="black" fill="none"/>"#,
        m = MARGIN,
        b = H - MARGIN,
        r = W - MARGIN
    );
    let _ = writeln!(out, r#"<text x="{}" y="{}" text-anchor="middle">frames</text>"#, W / 2.0, H - 20.0);
    let _ = writeln!(out, r#"<text x="{:.1}" y="{}" text-anchor="middle">{}</text>"#, px(x0), H - MARGIN + 16.0, x0);
    let _ = writeln!(out, r#"<text x="{:.1}" y="{}" text-anchor="middle">{}</text>"#, px(x1), H - MARGIN + 16.0, x1);
    for (i, name) in ["psnr", "ssim", "mtsed", "fvd"].iter().enumerate() {
        let pts: Vec<(f64, f64)> = sorted
            .iter()
            .filter_map(|r| r.metrics()[i].1.filter(|v| v.is_finite()).map(|v| (r.frames as f64, v)))
            .collect();
        if pts.is_empty() {
            continue;
        }
        let (y0, y1) = range(pts.iter().map(|p| p.1));
        let py = |y: f64| H - MARGIN - (y - y0) / (y1 - y0) * (H - 2.0 * MARGIN);
        let d: Vec<String> = pts.iter().map(|&(x, y)| format!("{:.2},{:.2}", px(x), py(y))).collect();
        let _ = writeln!(
            out,
            r#"<polyline points="{}" stroke="{}" fill="none" stroke-width="2"/>"#,
            d.join(" "),
            COLORS[i]
        );
        for &(x, y) in &pts {
            let _ = writeln!(out, r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{}"/>"#, px(x), py(y), COLORS[i]);
        }
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}" fill="{}">{name} [{}, {}]</text>"#,
            W - MARGIN - 150.0,
            MARGIN + 16.0 * i as f64,
            COLORS[i],
            format_value(y0),
            format_value(y1)
        );
    }
    out.push_str("</svg>\n");
    out
}

pub fn render_sweep(sweep: &TauSweep, format: ReportFormat) -> Result<Vec<u8>, PipelineError> {
    match format {
        ReportFormat::Csv => csv_bytes(
            &["tau_t_meters", "tau_q_radians", "score"],
            sweep.cells().map(|(t, q, s)| vec![format_value(t), format_value(q), format_value(s)]),
        ),
        ReportFormat::Json => Ok(json_bytes(&json!({
            "tau_t_meters": sweep.tau_t,
            "tau_q_radians": sweep.tau_q,
            "scores": sweep.scores.iter().map(|r| r.iter().map(|&s| json_value(Some(s))).collect::<Vec<_>>()).collect::<Vec<_>>(),
            "best": { "tau_t_meters": sweep.best.0, "tau_q_radians": sweep.best.1, "score": json_value(Some(sweep.best.2)) },
        }))),
        ReportFormat::Svg => Ok(heatmap(sweep).into_bytes()),
    }
}

pub fn emit_sweep(sweep: &TauSweep, format: ReportFormat, path: &Path) -> Result<(), PipelineError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, render_sweep(sweep, format)?)?;
    Ok(())
}

/// Score over the (τ_T, τ_q) grid, dark blue (low) to yellow (high), with
/// the best cell outlined.
fn heatmap(sweep: &TauSweep) -> String {
    let (nt, nq) = (sweep.tau_t.len(), sweep.tau_q.len());
    let (lo, hi) = range(sweep.scores.iter().flatten().copied().filter(|s| s.is_finite()));
    let cw = (W - 2.0 * MARGIN) / nq.max(1) as f64;
    let ch = (H - 2.0 * MARGIN) / nt.max(1) as f64;
    let mut out = String::new();
    svg_open(&mut out);
    for (i, row) in sweep.scores.iter().enumerate() {
        for (j, &s) in row.iter().enumerate() {
            let a = if s.is_finite() { ((s - lo) / (hi - lo)).clamp(0.0, 1.0) } else { 0.0 };
            let (r, g, b) = (
                (68.0 + a * (253.0 - 68.0)) as u8,
                (1.0 + a * (231.0 - 1.0)) as u8,
                (84.0 + a * (37.0 - 84.0)) as u8,
            );
            let _ = writeln!(
                out,
                r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="rgb({r},{g},{b})"><title>tau_t={} tau_q={} score={}</title></rect>"#,
                MARGIN + j as f64 * cw,
                H - MARGIN - (i + 1) as f64 * ch,
                cw,
                ch,
                format_value(sweep.tau_t[i]),
                format_value(sweep.tau_q[j]),
                format_value(s)
            );
        }
    }
    if let (Some(i), Some(j)) = (
        sweep.tau_t.iter().position(|&t| t == sweep.best.0),
        sweep.tau_q.iter().position(|&q| q == sweep.best.1),
    ) {
        let _ = writeln!(
            out,
            r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="none" stroke="red" stroke-width="2"/>"#,
            MARGIN + j as f64 * cw,
            H - MARGIN - (i + 1) as f64 * ch,
            cw,
            ch
        );
    }
    let _ = writeln!(out, r#"<text x="{}" y="{}" text-anchor="middle">tau_q (rad)</text>"#, W / 2.0, H - 20.0);
    let _ = writeln!(
        out,
        r#"<text x="20" y="{}" text-anchor="middle" transform="rotate(-90 20 {})">tau_T (m)</text>"#,
        H / 2.0,
        H / 2.0
    );
    let _ = writeln!(
        out,
        r#"<text x="{}" y="30" text-anchor="middle">best {} at tau_T={} tau_q={}</text>"#,
        W / 2.0,
        format_value(sweep.best.2),
        format_value(sweep.best.0),
        format_value(sweep.best.1)
    );
    out.push_str("</svg>\n");
    out
}
