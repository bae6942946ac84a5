//! Precision-recall plots as plain SVG.

use std::fmt::Write as _;
use std::path::Path;

use lowlight_core::eval::{recall_grid, EvalReport, NamedCurve};

use crate::error::CliError;

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 400.0;
const LEFT: f64 = 60.0;
const TOP: f64 = 30.0;
const SIDE: f64 = 320.0;
const LEGEND_X: f64 = 410.0;

const PALETTE: [&str; 10] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22",
    "#17becf",
];

fn px(recall: f64) -> f64 {
    LEFT + recall * SIDE
}

fn py(precision: f64) -> f64 {
    TOP + (1.0 - precision) * SIDE
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn label(nc: &NamedCurve) -> String {
    match nc.curve.ap {
        Some(ap) => format!("{}  AP {:.2}%", nc.name, ap * 100.0),
        None => format!("{}  no ground truth, not drawn", nc.name),
    }
}

/// Renders one polyline per defined curve. Undefined curves only appear in the legend.
pub fn render_pr_svg(curves: &[&NamedCurve]) -> Result<String, CliError> {
    if curves.is_empty() {
        return Err(CliError::Invalid("report contains no curves to plot".into()));
    }
    let height = HEIGHT.max(TOP + 20.0 * (curves.len() as f64 + 1.0));
    let mut s = String::new();
    let w = &mut s;
    writeln!(
        w,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{height}" viewBox="0 0 {WIDTH} {height}" font-family="sans-serif" font-size="12">"#
    )
    .unwrap();
    writeln!(w, r#"<rect x="0" y="0" width="{WIDTH}" height="{height}" fill="white"/>"#).unwrap();

    for i in 0..=5 {
        let t = f64::from(i) / 5.0;
        let (x, y) = (px(t), py(t));
        writeln!(
            w,
            r##"<line x1="{x:.1}" y1="{TOP:.1}" x2="{x:.1}" y2="{:.1}" stroke="#e0e0e0"/>"##,
            TOP + SIDE
        )
        .unwrap();
        writeln!(
            w,
            r##"<line x1="{LEFT:.1}" y1="{y:.1}" x2="{:.1}" y2="{y:.1}" stroke="#e0e0e0"/>"##,
            LEFT + SIDE
        )
        .unwrap();
        writeln!(
            w,
            r#"<text x="{x:.1}" y="{:.1}" text-anchor="middle">{t:.1}</text>"#,
            TOP + SIDE + 16.0
        )
        .unwrap();
        writeln!(
            w,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{t:.1}</text>"#,
            LEFT - 6.0,
            y + 4.0
        )
        .unwrap();
    }
    writeln!(
        w,
        r#"<rect x="{LEFT:.1}" y="{TOP:.1}" width="{SIDE:.1}" height="{SIDE:.1}" fill="none" stroke="black"/>"#
    )
    .unwrap();
    writeln!(
        w,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">Recall</text>"#,
        LEFT + SIDE / 2.0,
        TOP + SIDE + 34.0
    )
    .unwrap();
    writeln!(
        w,
        r#"<text x="16" y="{:.1}" text-anchor="middle" transform="rotate(-90 16 {:.1})">Precision</text>"#,
        TOP + SIDE / 2.0,
        TOP + SIDE / 2.0
    )
    .unwrap();

    for (i, nc) in curves.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let ly = TOP + 10.0 + 20.0 * i as f64;
        if nc.curve.is_defined() {
            let points: Vec<String> = recall_grid()
                .zip(&nc.curve.precision)
                .map(|(r, &p)| format!("{:.2},{:.2}", px(r), py(p)))
                .collect();
            writeln!(
                w,
                r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
                points.join(" ")
            )
            .unwrap();
            writeln!(
                w,
                r#"<line x1="{LEGEND_X:.1}" y1="{ly:.1}" x2="{:.1}" y2="{ly:.1}" stroke="{color}" stroke-width="3"/>"#,
                LEGEND_X + 20.0
            )
            .unwrap();
        }
        writeln!(
            w,
            r#"<text x="{:.1}" y="{:.1}">{}</text>"#,
            LEGEND_X + 26.0,
            ly + 4.0,
            escape(&label(nc))
        )
        .unwrap();
    }
    s.push_str("</svg>\n");
    Ok(s)
}

/// Writes the combined curves of `report`, plus per-class curves when asked.
pub fn emit_pr_plot(report: &EvalReport, out: &Path, per_class: bool) -> Result<(), CliError> {
    let curves: Vec<&NamedCurve> = if per_class {
        report.all_curves().collect()
    } else {
        report.curves.iter().collect()
    };
    let svg = render_pr_svg(&curves)?;
    std::fs::write(out, svg).map_err(|e| CliError::io(out, e))
}
