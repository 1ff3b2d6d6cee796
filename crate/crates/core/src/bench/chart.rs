//! Grouped bar chart of a result table as standalone SVG.

use std::fmt::Write as _;
use std::path::Path;

use super::report::{percent, ResultTable};
use crate::{Error, Result};

pub const PLOT_HEIGHT: f64 = 300.0;
const MARGIN_LEFT: f64 = 60.0;
const MARGIN_TOP: f64 = 40.0;
const MARGIN_BOTTOM: f64 = 60.0;
const BAR_WIDTH: f64 = 14.0;
const BAR_GAP: f64 = 2.0;
const GROUP_GAP: f64 = 30.0;
const LEGEND_WIDTH: f64 = 180.0;

const PALETTE: [&str; 10] = [
    "#7f7f7f", "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2",
    "#17becf", "#bcbd22",
];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// One group per (sample size, category count), one bar per mode × method
/// column; the y axis spans 0 to 100 %.
pub fn render_chart(table: &ResultTable) -> Result<String> {
    if table.rows.is_empty() {
        return Err(Error::Invalid("cannot chart an empty result table".into()));
    }
    let cols = table.columns();
    let grid = table.grid();
    let group_width = cols.len() as f64 * (BAR_WIDTH + BAR_GAP) + GROUP_GAP;
    let width = MARGIN_LEFT + grid.len() as f64 * group_width + LEGEND_WIDTH;
    let height = MARGIN_TOP + PLOT_HEIGHT + MARGIN_BOTTOM;
    let base = MARGIN_TOP + PLOT_HEIGHT;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(
        s,
        r#"<text x="{MARGIN_LEFT}" y="20" font-size="14">Average accuracy</text>"#
    );
    for tick in 0..=5 {
        let frac = tick as f64 / 5.0;
        let y = base - frac * PLOT_HEIGHT;
        let x_end = width - LEGEND_WIDTH;
        let _ = writeln!(
            s,
            r##"<line x1="{MARGIN_LEFT}" y1="{y}" x2="{x_end}" y2="{y}" stroke="#dddddd"/><text x="{}" y="{}" text-anchor="end">{}%</text>"##,
            MARGIN_LEFT - 6.0,
            y + 4.0,
            tick * 20
        );
    }
    let _ = writeln!(
        s,
        r##"<line x1="{MARGIN_LEFT}" y1="{MARGIN_TOP}" x2="{MARGIN_LEFT}" y2="{base}" stroke="#000000"/>"##
    );

    for (g, ((cats, n), cells)) in grid.iter().enumerate() {
        let gx = MARGIN_LEFT + GROUP_GAP / 2.0 + g as f64 * group_width;
        for (c, col) in cols.iter().enumerate() {
            let Some(row) = cells.get(&(col.mode, col.method.clone())) else {
                continue;
            };
            let h = row.mean_accuracy.clamp(0.0, 1.0) * PLOT_HEIGHT;
            let x = gx + c as f64 * (BAR_WIDTH + BAR_GAP);
            let _ = writeln!(
                s,
                r#"<rect class="bar" x="{x:.3}" y="{:.3}" width="{BAR_WIDTH}" height="{h:.3}" fill="{}" data-accuracy="{}"><title>{}: {}</title></rect>"#,
                base - h,
                PALETTE[c % PALETTE.len()],
                row.mean_accuracy,
                escape(&col.header()),
                percent(row.mean_accuracy)
            );
        }
        let label_x = gx + (group_width - GROUP_GAP) / 2.0;
        let _ = writeln!(
            s,
            r#"<text x="{label_x:.3}" y="{}" text-anchor="middle">n={n}, C={cats}</text>"#,
            base + 18.0
        );
    }

    let lx = width - LEGEND_WIDTH + 10.0;
    for (c, col) in cols.iter().enumerate() {
        let ly = MARGIN_TOP + c as f64 * 16.0;
        let _ = writeln!(
            s,
            r#"<rect x="{lx}" y="{ly}" width="10" height="10" fill="{}"/><text x="{}" y="{}">{}</text>"#,
            PALETTE[c % PALETTE.len()],
            lx + 14.0,
            ly + 9.0,
            escape(&col.header())
        );
    }
    s.push_str("</svg>\n");
    Ok(s)
}

pub fn write_chart(table: &ResultTable, path: &Path) -> Result<()> {
    let svg = render_chart(table)?;
    std::fs::write(path, svg).map_err(|e| Error::io(path, e))
}
