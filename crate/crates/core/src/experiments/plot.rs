//! Deterministic SVG line plots of sweep results.
//!
//! Two panel families are emitted:
//!
//! * BER vs noise level, one panel per (task, N_a, N_phi, E);
//! * BER vs amplitude level count, one panel per (task, E, noise level),
//!   emitted only when the sweep covered at least two level counts.
//!
//! Each panel shows the three methods (full = blue, naive = orange,
//! explorative = green) as seed-averaged curves with min/max bands, on a
//! log-log scale. Zero BER cannot be drawn on a log axis; such points are
//! plotted at the measurement floor (1 / test bits), which is marked with a
//! dashed line and an annotation. Rendering is fully deterministic: grouping
//! uses ordered maps and all coordinates are formatted with fixed precision,
//! so identical rows produce byte-identical files.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::experiments::config::Task;
use crate::experiments::sweep::{Method, SweepRow};

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 480.0;
const MARGIN_L: f64 = 72.0;
const MARGIN_R: f64 = 24.0;
const MARGIN_T: f64 = 42.0;
const MARGIN_B: f64 = 56.0;

fn method_color(m: Method) -> &'static str {
    match m {
        Method::Full => "#1f77b4",
        Method::Naive => "#ff7f0e",
        Method::Explorative => "#2ca02c",
    }
}

/// Float for an axis label / filename: shortest round-trip decimal.
fn fmt_value(x: f64) -> String {
    format!("{x}")
}

/// Float safe for a file name (`2.5` -> `2_5`).
fn fmt_file(x: f64) -> String {
    fmt_value(x).replace('.', "_").replace('-', "m")
}

/// Mean / min / max of the seed replicas at one x position.
#[derive(Debug, Clone, Copy)]
struct Aggregate {
    mean: f64,
    lo: f64,
    hi: f64,
}

fn aggregate(values: &[f64]) -> Aggregate {
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Aggregate { mean, lo, hi }
}

/// One curve point: x position (already log10), aggregated BER.
struct PanelData {
    title: String,
    x_label: String,
    /// x tick positions (log10 space) and their labels.
    x_ticks: Vec<(f64, String)>,
    /// Per method: sorted (x_log, aggregate) points.
    curves: BTreeMap<Method, Vec<(f64, Aggregate)>>,
    floor: f64,
}

struct LogAxis {
    min: f64,
    max: f64,
}

impl LogAxis {
    fn new(mut min: f64, mut max: f64) -> Self {
        if max.partial_cmp(&min) != Some(std::cmp::Ordering::Greater) {
            min -= 0.5;
            max += 0.5;
        }
        let pad = 0.06 * (max - min);
        Self {
            min: min - pad,
            max: max + pad,
        }
    }

    fn to_px(&self, v: f64, lo_px: f64, hi_px: f64) -> f64 {
        lo_px + (v - self.min) / (self.max - self.min) * (hi_px - lo_px)
    }
}

fn render_panel(panel: &PanelData) -> String {
    let plot_l = MARGIN_L;
    let plot_r = WIDTH - MARGIN_R;
    let plot_t = MARGIN_T;
    let plot_b = HEIGHT - MARGIN_B;

    let xs = LogAxis::new(
        panel
            .x_ticks
            .iter()
            .map(|(x, _)| *x)
            .fold(f64::INFINITY, f64::min),
        panel
            .x_ticks
            .iter()
            .map(|(x, _)| *x)
            .fold(f64::NEG_INFINITY, f64::max),
    );

    // y range over plotted (floor-clamped) values, in log10 space.
    let mut y_lo = panel.floor.log10();
    let mut y_hi = f64::NEG_INFINITY;
    for pts in panel.curves.values() {
        for (_, a) in pts {
            y_lo = y_lo.min(a.lo.max(panel.floor).log10());
            y_hi = y_hi.max(a.hi.max(panel.floor).log10());
        }
    }
    if !y_hi.is_finite() {
        y_hi = 0.0;
    }
    y_hi = y_hi.max(y_lo + 0.5);
    let ys = LogAxis::new(y_lo, y_hi);
    // Inverted: larger BER higher on screen.
    let y_px = |ber: f64| -> f64 { ys.to_px(ber.max(panel.floor).log10(), plot_b, plot_t) };
    let x_px = |xl: f64| -> f64 { xs.to_px(xl, plot_l, plot_r) };

    let mut s = String::with_capacity(16 * 1024);
    s.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" viewBox=\"0 0 {WIDTH} {HEIGHT}\">\n"
    ));
    s.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
    s.push_str(&format!(
        "<text x=\"{:.2}\" y=\"24\" font-family=\"monospace\" font-size=\"14\" text-anchor=\"middle\">{}</text>\n",
        (plot_l + plot_r) / 2.0,
        panel.title
    ));

    // y decade ticks and gridlines.
    let dec_lo = ys.min.floor() as i64;
    let dec_hi = ys.max.ceil() as i64;
    for d in dec_lo..=dec_hi {
        let v = d as f64;
        if v < ys.min || v > ys.max {
            continue;
        }
        let y = ys.to_px(v, plot_b, plot_t);
        s.push_str(&format!(
            "<line x1=\"{plot_l:.2}\" y1=\"{y:.2}\" x2=\"{plot_r:.2}\" y2=\"{y:.2}\" stroke=\"#dddddd\" stroke-width=\"1\"/>\n"
        ));
        s.push_str(&format!(
            "<text x=\"{:.2}\" y=\"{:.2}\" font-family=\"monospace\" font-size=\"11\" text-anchor=\"end\">1e{d}</text>\n",
            plot_l - 6.0,
            y + 4.0
        ));
    }

    // x ticks.
    for (xv, label) in &panel.x_ticks {
        let x = x_px(*xv);
        s.push_str(&format!(
            "<line x1=\"{x:.2}\" y1=\"{plot_b:.2}\" x2=\"{x:.2}\" y2=\"{:.2}\" stroke=\"#aaaaaa\" stroke-width=\"1\"/>\n",
            plot_b + 5.0
        ));
        s.push_str(&format!(
            "<text x=\"{x:.2}\" y=\"{:.2}\" font-family=\"monospace\" font-size=\"11\" text-anchor=\"middle\">{label}</text>\n",
            plot_b + 18.0
        ));
    }

    // Axis frame.
    s.push_str(&format!(
        "<rect x=\"{plot_l:.2}\" y=\"{plot_t:.2}\" width=\"{:.2}\" height=\"{:.2}\" fill=\"none\" stroke=\"black\" stroke-width=\"1\"/>\n",
        plot_r - plot_l,
        plot_b - plot_t
    ));

    // Floor line + annotation.
    let fy = y_px(panel.floor);
    s.push_str(&format!(
        "<line x1=\"{plot_l:.2}\" y1=\"{fy:.2}\" x2=\"{plot_r:.2}\" y2=\"{fy:.2}\" stroke=\"#888888\" stroke-width=\"1\" stroke-dasharray=\"6 4\"/>\n"
    ));
    s.push_str(&format!(
        "<text x=\"{:.2}\" y=\"{:.2}\" font-family=\"monospace\" font-size=\"10\" fill=\"#555555\">BER floor {}</text>\n",
        plot_l + 6.0,
        fy - 5.0,
        fmt_value(panel.floor)
    ));

    // Bands then curves, in method order.
    for (method, pts) in &panel.curves {
        if pts.len() > 1 {
            let mut poly = String::new();
            for (x, a) in pts {
                poly.push_str(&format!("{:.2},{:.2} ", x_px(*x), y_px(a.hi)));
            }
            for (x, a) in pts.iter().rev() {
                poly.push_str(&format!("{:.2},{:.2} ", x_px(*x), y_px(a.lo)));
            }
            s.push_str(&format!(
                "<polygon points=\"{}\" fill=\"{}\" fill-opacity=\"0.15\" stroke=\"none\"/>\n",
                poly.trim_end(),
                method_color(*method)
            ));
        }
    }
    for (method, pts) in &panel.curves {
        let color = method_color(*method);
        if pts.len() > 1 {
            let line: Vec<String> = pts
                .iter()
                .map(|(x, a)| format!("{:.2},{:.2}", x_px(*x), y_px(a.mean)))
                .collect();
            s.push_str(&format!(
                "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.8\"/>\n",
                line.join(" ")
            ));
        }
        for (x, a) in pts {
            s.push_str(&format!(
                "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"2.6\" fill=\"{color}\"/>\n",
                x_px(*x),
                y_px(a.mean)
            ));
        }
    }

    // Legend (top-right inside the frame).
    let mut ly = plot_t + 16.0;
    for method in panel.curves.keys() {
        let color = method_color(*method);
        s.push_str(&format!(
            "<line x1=\"{:.2}\" y1=\"{ly:.2}\" x2=\"{:.2}\" y2=\"{ly:.2}\" stroke=\"{color}\" stroke-width=\"2\"/>\n",
            plot_r - 120.0,
            plot_r - 96.0
        ));
        s.push_str(&format!(
            "<text x=\"{:.2}\" y=\"{:.2}\" font-family=\"monospace\" font-size=\"11\">{method}</text>\n",
            plot_r - 90.0,
            ly + 4.0
        ));
        ly += 16.0;
    }

    // Axis labels.
    s.push_str(&format!(
        "<text x=\"{:.2}\" y=\"{:.2}\" font-family=\"monospace\" font-size=\"12\" text-anchor=\"middle\">{}</text>\n",
        (plot_l + plot_r) / 2.0,
        HEIGHT - 14.0,
        panel.x_label
    ));
    s.push_str(&format!(
        "<text x=\"18\" y=\"{:.2}\" font-family=\"monospace\" font-size=\"12\" text-anchor=\"middle\" transform=\"rotate(-90 18 {:.2})\">bit error rate</text>\n",
        (plot_t + plot_b) / 2.0,
        (plot_t + plot_b) / 2.0
    ));

    s.push_str("</svg>\n");
    s
}

/// Noise levels need a log x axis, but 0 has no logarithm; it gets a
/// dedicated slot one decade below the smallest positive level, labeled "0".
fn noise_positions(etas: &[f64]) -> BTreeMap<u64, (f64, String)> {
    let min_pos = etas
        .iter()
        .copied()
        .filter(|&e| e > 0.0)
        .fold(f64::INFINITY, f64::min);
    let zero_slot = if min_pos.is_finite() {
        min_pos.log10() - 1.0
    } else {
        -3.0
    };
    etas.iter()
        .map(|&e| {
            let pos = if e == 0.0 { zero_slot } else { e.log10() };
            (e.to_bits(), (pos, fmt_value(e)))
        })
        .collect()
}

/// Render every panel for `rows` into `out_dir`, returning the written file
/// paths in sorted order. Identical rows produce byte-identical files.
pub fn emit_plots(rows: &[SweepRow], out_dir: &Path) -> Result<Vec<PathBuf>> {
    if rows.is_empty() {
        return Err(Error::invalid_argument("no sweep rows to plot"));
    }
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir.to_path_buf(), e))?;

    let mut files = Vec::new();

    // Panel family 1: BER vs noise, per (task, levels, E).
    type NoiseKey = (Task, usize, usize, u64);
    let mut by_cell: BTreeMap<NoiseKey, Vec<&SweepRow>> = BTreeMap::new();
    for r in rows {
        by_cell
            .entry((
                r.task,
                r.amp_levels,
                r.phase_levels,
                r.extinction_ratio.to_bits(),
            ))
            .or_default()
            .push(r);
    }
    for ((task, na, np, e_bits), cell_rows) in &by_cell {
        let e = f64::from_bits(*e_bits);
        let etas: Vec<f64> = {
            let mut v: Vec<f64> = cell_rows.iter().map(|r| r.noise_level).collect();
            v.sort_by(f64::total_cmp);
            v.dedup();
            v
        };
        let positions = noise_positions(&etas);

        let mut curves: BTreeMap<Method, Vec<(f64, Aggregate)>> = BTreeMap::new();
        for method in Method::ALL {
            let mut by_x: BTreeMap<u64, Vec<f64>> = BTreeMap::new();
            for r in cell_rows.iter().filter(|r| r.method == method) {
                by_x.entry(r.noise_level.to_bits())
                    .or_default()
                    .push(r.ber_mean);
            }
            if by_x.is_empty() {
                continue;
            }
            let mut pts: Vec<(f64, Aggregate)> = by_x
                .iter()
                .map(|(bits, vals)| (positions[bits].0, aggregate(vals)))
                .collect();
            pts.sort_by(|a, b| a.0.total_cmp(&b.0));
            curves.insert(method, pts);
        }

        let floor = cell_rows
            .iter()
            .map(|r| r.ber_floor)
            .fold(f64::INFINITY, f64::min);
        let mut x_ticks: Vec<(f64, String)> = positions.values().cloned().collect();
        x_ticks.sort_by(|a, b| a.0.total_cmp(&b.0));
        let panel = PanelData {
            title: format!(
                "{task}: BER vs noise (Na={na}, Nphi={np}, E={})",
                fmt_value(e)
            ),
            x_label: "noise level".to_string(),
            x_ticks,
            curves,
            floor,
        };
        let name = format!("ber_vs_noise_{task}_Na{na}_Np{np}_E{}.svg", fmt_file(e));
        let path = out_dir.join(name);
        std::fs::write(&path, render_panel(&panel)).map_err(|e| Error::io(path.clone(), e))?;
        files.push(path);
    }

    // Panel family 2: BER vs amplitude levels, per (task, E, noise), only
    // when the level axis has at least two values.
    type LevelKey = (Task, u64, u64);
    let mut by_noise: BTreeMap<LevelKey, Vec<&SweepRow>> = BTreeMap::new();
    for r in rows {
        by_noise
            .entry((
                r.task,
                r.extinction_ratio.to_bits(),
                r.noise_level.to_bits(),
            ))
            .or_default()
            .push(r);
    }
    for ((task, e_bits, eta_bits), cell_rows) in &by_noise {
        let mut levels: Vec<usize> = cell_rows.iter().map(|r| r.amp_levels).collect();
        levels.sort_unstable();
        levels.dedup();
        if levels.len() < 2 {
            continue;
        }
        let e = f64::from_bits(*e_bits);
        let eta = f64::from_bits(*eta_bits);

        let mut curves: BTreeMap<Method, Vec<(f64, Aggregate)>> = BTreeMap::new();
        for method in Method::ALL {
            let mut by_x: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
            for r in cell_rows.iter().filter(|r| r.method == method) {
                by_x.entry(r.amp_levels).or_default().push(r.ber_mean);
            }
            if by_x.is_empty() {
                continue;
            }
            let pts: Vec<(f64, Aggregate)> = by_x
                .iter()
                .map(|(na, vals)| ((*na as f64).log10(), aggregate(vals)))
                .collect();
            curves.insert(method, pts);
        }

        let floor = cell_rows
            .iter()
            .map(|r| r.ber_floor)
            .fold(f64::INFINITY, f64::min);
        let panel = PanelData {
            title: format!(
                "{task}: BER vs levels (E={}, noise={})",
                fmt_value(e),
                fmt_value(eta)
            ),
            x_label: "amplitude levels".to_string(),
            x_ticks: levels
                .iter()
                .map(|&n| ((n as f64).log10(), n.to_string()))
                .collect(),
            curves,
            floor,
        };
        let name = format!(
            "ber_vs_levels_{task}_E{}_eta{}.svg",
            fmt_file(e),
            fmt_file(eta)
        );
        let path = out_dir.join(name);
        std::fs::write(&path, render_panel(&panel)).map_err(|e| Error::io(path.clone(), e))?;
        files.push(path);
    }

    files.sort();
    Ok(files)
}
