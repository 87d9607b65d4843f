//! Deterministic SVG gain charts.
//!
//! One fixed 800x500 canvas, gain (dB) against frequency (MHz), one polyline
//! per scenario: solid strokes for classical curves and dashed for wireless,
//! one color per distance. All coordinates are rounded to 0.01 px and the
//! output carries no timestamps, so identical inputs yield byte-identical
//! files.

use std::fmt::Write;

use crate::analysis::GainCurve;
use crate::channel::DaqMode;

pub const CANVAS_WIDTH: f64 = 800.0;
pub const CANVAS_HEIGHT: f64 = 500.0;

const MARGIN_LEFT: f64 = 70.0;
const MARGIN_RIGHT: f64 = 170.0;
const MARGIN_TOP: f64 = 30.0;
const MARGIN_BOTTOM: f64 = 55.0;

const PALETTE: [&str; 6] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b",
];

/// Renders the curves into a complete SVG document.
///
/// Curves are drawn in a canonical order (classical before wireless,
/// ascending distance) regardless of input order, so the same data always
/// produces the same bytes.
pub fn gain_chart_svg(curves: &[GainCurve]) -> String {
    let mut sorted: Vec<&GainCurve> = curves.iter().collect();
    sorted.sort_by(|a, b| {
        mode_rank(a.daq_mode)
            .cmp(&mode_rank(b.daq_mode))
            .then(a.distance_cm.total_cmp(&b.distance_cm))
    });

    let mut distances: Vec<f64> = sorted.iter().map(|c| c.distance_cm).collect();
    distances.sort_by(f64::total_cmp);
    distances.dedup();

    let mut f_min = f64::INFINITY;
    let mut f_max = f64::NEG_INFINITY;
    let mut g_min = f64::INFINITY;
    let mut g_max = f64::NEG_INFINITY;
    for curve in &sorted {
        for &(f, g) in &curve.points {
            f_min = f_min.min(f);
            f_max = f_max.max(f);
            g_min = g_min.min(g);
            g_max = g_max.max(g);
        }
    }
    if !(f_min.is_finite() && f_max > f_min) {
        (f_min, f_max) = (0.0, 1.0);
    }
    // pad the gain axis to whole-5-dB lines
    if !(g_min.is_finite() && g_max.is_finite()) {
        (g_min, g_max) = (-1.0, 0.0);
    }
    let g_lo = (g_min / 5.0).floor() * 5.0;
    let g_hi = (g_max / 5.0).ceil() * 5.0;
    let (g_lo, g_hi) = if g_lo == g_hi { (g_lo - 5.0, g_hi + 5.0) } else { (g_lo, g_hi) };

    let plot_w = CANVAS_WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let plot_h = CANVAS_HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;
    let x_of = |f: f64| MARGIN_LEFT + (f - f_min) / (f_max - f_min) * plot_w;
    let y_of = |g: f64| MARGIN_TOP + (g_hi - g) / (g_hi - g_lo) * plot_h;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{CANVAS_WIDTH}\" height=\"{CANVAS_HEIGHT}\" viewBox=\"0 0 {CANVAS_WIDTH} {CANVAS_HEIGHT}\">"
    );
    let _ = writeln!(svg, "<rect width=\"{CANVAS_WIDTH}\" height=\"{CANVAS_HEIGHT}\" fill=\"#ffffff\"/>");

    // grid and axis labels: 5 ticks per axis
    for i in 0..=4 {
        let t = i as f64 / 4.0;
        let f = f_min + t * (f_max - f_min);
        let x = round2(x_of(f));
        let _ = writeln!(
            svg,
            "<line x1=\"{x}\" y1=\"{y1}\" x2=\"{x}\" y2=\"{y2}\" stroke=\"#dddddd\" stroke-width=\"1\"/>",
            y1 = round2(MARGIN_TOP),
            y2 = round2(MARGIN_TOP + plot_h),
        );
        let _ = writeln!(
            svg,
            "<text x=\"{x}\" y=\"{y}\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"middle\">{label}</text>",
            y = round2(MARGIN_TOP + plot_h + 18.0),
            label = format_mhz(f),
        );

        let g = g_hi + t * (g_lo - g_hi);
        let y = round2(y_of(g));
        let _ = writeln!(
            svg,
            "<line x1=\"{x1}\" y1=\"{y}\" x2=\"{x2}\" y2=\"{y}\" stroke=\"#dddddd\" stroke-width=\"1\"/>",
            x1 = round2(MARGIN_LEFT),
            x2 = round2(MARGIN_LEFT + plot_w),
        );
        let _ = writeln!(
            svg,
            "<text x=\"{x}\" y=\"{yt}\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"end\">{label:.1}</text>",
            x = round2(MARGIN_LEFT - 8.0),
            yt = round2(y_of(g) + 4.0),
            label = g,
        );
    }
    let _ = writeln!(
        svg,
        "<rect x=\"{x}\" y=\"{y}\" width=\"{w}\" height=\"{h}\" fill=\"none\" stroke=\"#333333\" stroke-width=\"1\"/>",
        x = round2(MARGIN_LEFT),
        y = round2(MARGIN_TOP),
        w = round2(plot_w),
        h = round2(plot_h),
    );
    let _ = writeln!(
        svg,
        "<text x=\"{x}\" y=\"{y}\" font-family=\"sans-serif\" font-size=\"13\" text-anchor=\"middle\">Frequency (MHz)</text>",
        x = round2(MARGIN_LEFT + plot_w / 2.0),
        y = round2(CANVAS_HEIGHT - 14.0),
    );
    let _ = writeln!(
        svg,
        "<text x=\"18\" y=\"{y}\" font-family=\"sans-serif\" font-size=\"13\" text-anchor=\"middle\" transform=\"rotate(-90 18 {y})\">Channel gain (dB)</text>",
        y = round2(MARGIN_TOP + plot_h / 2.0),
    );

    for curve in &sorted {
        let color_index = distances
            .iter()
            .position(|&d| d == curve.distance_cm)
            .unwrap_or(0)
            % PALETTE.len();
        let color = PALETTE[color_index];
        let dash = match curve.daq_mode {
            DaqMode::Classical => "",
            DaqMode::Wireless => " stroke-dasharray=\"6 3\"",
        };
        let mut points = String::new();
        for &(f, g) in &curve.points {
            let _ = write!(points, "{},{} ", round2(x_of(f)), round2(y_of(g)));
        }
        let _ = writeln!(
            svg,
            "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\"{dash}/>",
            points.trim_end(),
        );
    }

    // legend, one row per curve
    let legend_x = MARGIN_LEFT + plot_w + 14.0;
    for (i, curve) in sorted.iter().enumerate() {
        let y = MARGIN_TOP + 10.0 + i as f64 * 18.0;
        let color_index = distances
            .iter()
            .position(|&d| d == curve.distance_cm)
            .unwrap_or(0)
            % PALETTE.len();
        let dash = match curve.daq_mode {
            DaqMode::Classical => "",
            DaqMode::Wireless => " stroke-dasharray=\"6 3\"",
        };
        let _ = writeln!(
            svg,
            "<line x1=\"{x1}\" y1=\"{y}\" x2=\"{x2}\" y2=\"{y}\" stroke=\"{color}\" stroke-width=\"1.5\"{dash}/>",
            x1 = round2(legend_x),
            x2 = round2(legend_x + 26.0),
            y = round2(y),
            color = PALETTE[color_index],
        );
        let _ = writeln!(
            svg,
            "<text x=\"{x}\" y=\"{yt}\" font-family=\"sans-serif\" font-size=\"12\">{label}</text>",
            x = round2(legend_x + 32.0),
            yt = round2(y + 4.0),
            label = format!("{} {} cm", curve.daq_mode, curve.distance_cm),
        );
    }

    svg.push_str("</svg>\n");
    svg
}

fn mode_rank(mode: DaqMode) -> u8 {
    match mode {
        DaqMode::Classical => 0,
        DaqMode::Wireless => 1,
    }
}

fn round2(v: f64) -> f64 {
    (v * 100.0).round() / 100.0
}

fn format_mhz(f: f64) -> String {
    format!("{:.1}", f / 1e6)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn demo_curves() -> Vec<GainCurve> {
        let mk = |mode, d: f64, base: f64| GainCurve {
            daq_mode: mode,
            distance_cm: d,
            points: (0..13)
                .map(|i| (4e6 + i as f64 * 5e6, base - (i % 4) as f64))
                .collect(),
        };
        vec![
            mk(DaqMode::Wireless, 30.0, -65.0),
            mk(DaqMode::Classical, 10.0, -45.0),
            mk(DaqMode::Wireless, 10.0, -55.0),
            mk(DaqMode::Classical, 30.0, -47.0),
        ]
    }

    #[test]
    fn identical_inputs_give_identical_bytes() {
        let a = gain_chart_svg(&demo_curves());
        let b = gain_chart_svg(&demo_curves());
        assert_eq!(a, b);
    }

    #[test]
    fn input_order_does_not_matter() {
        let mut shuffled = demo_curves();
        shuffled.reverse();
        assert_eq!(gain_chart_svg(&demo_curves()), gain_chart_svg(&shuffled));
    }

    #[test]
    fn wireless_is_dashed_and_classical_is_not() {
        let svg = gain_chart_svg(&demo_curves());
        let polylines: Vec<&str> = svg
            .lines()
            .filter(|l| l.starts_with("<polyline"))
            .collect();
        assert_eq!(polylines.len(), 4);
        assert!(polylines[0..2].iter().all(|l| !l.contains("dasharray")));
        assert!(polylines[2..4].iter().all(|l| l.contains("dasharray")));
    }

    #[test]
    fn canvas_is_fixed_and_wellformed() {
        let svg = gain_chart_svg(&demo_curves());
        assert!(svg.starts_with("<svg"));
        assert!(svg.trim_end().ends_with("</svg>"));
        assert!(svg.contains("width=\"800\""));
        assert!(svg.contains("height=\"500\""));
        // handles the empty case without panicking
        let empty = gain_chart_svg(&[]);
        assert!(empty.contains("</svg>"));
    }
}
