//! Dependency-free SVG chart primitives: a grouped bar chart and a
//! multi-line chart. CSV remains the canonical output; these mirror it.

const WIDTH: f64 = 960.0;
const HEIGHT: f64 = 420.0;
const MARGIN_LEFT: f64 = 60.0;
const MARGIN_RIGHT: f64 = 180.0;
const MARGIN_TOP: f64 = 40.0;
const MARGIN_BOTTOM: f64 = 70.0;

const PALETTE: [&str; 12] = [
    "#4269d0", "#efb118", "#ff725c", "#6cc5b0", "#3ca951", "#ff8ab7", "#a463f2", "#97bbf5",
    "#9c6b4e", "#9498a0", "#e69f00", "#222222",
];

fn header(title: &str, config_hash: &str) -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" \
         viewBox=\"0 0 {WIDTH} {HEIGHT}\" font-family=\"sans-serif\" font-size=\"12\">\n\
         <!-- config_hash: {config_hash} -->\n\
         <rect width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"white\"/>\n\
         <text x=\"{}\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">{}</text>\n",
        WIDTH / 2.0,
        escape(title)
    )
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn y_axis(out: &mut String, lo: f64, hi: f64) {
    let plot_h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;
    for tick in 0..=5 {
        let value = lo + (hi - lo) * tick as f64 / 5.0;
        let y = MARGIN_TOP + plot_h * (1.0 - tick as f64 / 5.0);
        out.push_str(&format!(
            "<line x1=\"{MARGIN_LEFT}\" y1=\"{y:.1}\" x2=\"{:.1}\" y2=\"{y:.1}\" \
             stroke=\"#dddddd\"/>\n<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\">{value:.2}</text>\n",
            WIDTH - MARGIN_RIGHT,
            MARGIN_LEFT - 6.0,
            y + 4.0
        ));
    }
}

fn legend(out: &mut String, labels: &[String]) {
    for (i, label) in labels.iter().enumerate() {
        let y = MARGIN_TOP + 16.0 * i as f64;
        let x = WIDTH - MARGIN_RIGHT + 16.0;
        out.push_str(&format!(
            "<rect x=\"{x:.1}\" y=\"{:.1}\" width=\"10\" height=\"10\" fill=\"{}\"/>\n\
             <text x=\"{:.1}\" y=\"{:.1}\">{}</text>\n",
            y - 9.0,
            PALETTE[i % PALETTE.len()],
            x + 14.0,
            y,
            escape(label)
        ));
    }
}

/// Grouped bar chart: one group per `group_labels` entry, one bar per
/// series inside each group. `values[group][series]`.
pub fn bar_chart(
    title: &str,
    config_hash: &str,
    group_labels: &[String],
    series_labels: &[String],
    values: &[Vec<f64>],
) -> String {
    let mut out = header(title, config_hash);
    let plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let plot_h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;
    let hi = values
        .iter()
        .flatten()
        .cloned()
        .fold(0.0_f64, f64::max)
        .max(1e-9);
    y_axis(&mut out, 0.0, hi);

    let n_groups = group_labels.len().max(1);
    let group_w = plot_w / n_groups as f64;
    let bar_w = (group_w * 0.9) / series_labels.len().max(1) as f64;
    for (g, row) in values.iter().enumerate() {
        let x0 = MARGIN_LEFT + g as f64 * group_w + group_w * 0.05;
        for (s, &v) in row.iter().enumerate() {
            let h = plot_h * (v / hi).clamp(0.0, 1.0);
            out.push_str(&format!(
                "<rect x=\"{:.1}\" y=\"{:.1}\" width=\"{:.1}\" height=\"{:.1}\" fill=\"{}\"/>\n",
                x0 + s as f64 * bar_w,
                MARGIN_TOP + plot_h - h,
                bar_w.max(1.0) - 0.5,
                h,
                PALETTE[s % PALETTE.len()]
            ));
        }
        out.push_str(&format!(
            "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{}</text>\n",
            x0 + group_w * 0.45,
            HEIGHT - MARGIN_BOTTOM + 18.0,
            escape(&group_labels[g])
        ));
    }
    legend(&mut out, series_labels);
    out.push_str("</svg>\n");
    out
}

/// Multi-line chart over a shared x grid.
pub fn line_chart(
    title: &str,
    config_hash: &str,
    x_label: &str,
    x_values: &[f64],
    lines: &[(String, Vec<f64>)],
) -> String {
    let mut out = header(title, config_hash);
    let plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let plot_h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;
    let all: Vec<f64> = lines.iter().flat_map(|(_, v)| v.iter().cloned()).collect();
    let lo = all.iter().cloned().fold(f64::INFINITY, f64::min).min(1.0) * 0.98;
    let hi = all.iter().cloned().fold(0.0_f64, f64::max).max(lo + 1e-9);
    y_axis(&mut out, lo, hi);

    let x_lo = x_values.first().copied().unwrap_or(0.0);
    let x_hi = x_values.last().copied().unwrap_or(1.0).max(x_lo + 1e-9);
    let to_x = |v: f64| MARGIN_LEFT + plot_w * (v - x_lo) / (x_hi - x_lo);
    let to_y = |v: f64| MARGIN_TOP + plot_h * (1.0 - (v - lo) / (hi - lo));

    for (i, (_, values)) in lines.iter().enumerate() {
        let points: Vec<String> = x_values
            .iter()
            .zip(values)
            .map(|(&x, &y)| format!("{:.1},{:.1}", to_x(x), to_y(y)))
            .collect();
        out.push_str(&format!(
            "<polyline points=\"{}\" fill=\"none\" stroke=\"{}\" stroke-width=\"2\"/>\n",
            points.join(" "),
            PALETTE[i % PALETTE.len()]
        ));
    }
    for &x in x_values {
        out.push_str(&format!(
            "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{}</text>\n",
            to_x(x),
            HEIGHT - MARGIN_BOTTOM + 18.0,
            x
        ));
    }
    out.push_str(&format!(
        "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{}</text>\n",
        MARGIN_LEFT + plot_w / 2.0,
        HEIGHT - MARGIN_BOTTOM + 40.0,
        escape(x_label)
    ));
    let labels: Vec<String> = lines.iter().map(|(l, _)| l.clone()).collect();
    legend(&mut out, &labels);
    out.push_str("</svg>\n");
    out
}
