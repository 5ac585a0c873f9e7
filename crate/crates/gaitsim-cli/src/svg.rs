//! Hand-rolled static SVG emission for the two report figures:
//! accuracy-vs-k line chart and per-subject Jaccard box plot.

use gaitsim::recognition::ConditionResult;
use std::collections::BTreeMap;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const MARGIN_LEFT: f64 = 60.0;
const MARGIN_RIGHT: f64 = 160.0;
const MARGIN_TOP: f64 = 30.0;
const MARGIN_BOTTOM: f64 = 50.0;

const SERIES_COLORS: [&str; 6] =
    ["#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b"];

fn header(title: &str) -> String {
    format!(
        concat!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" ",
            "viewBox=\"0 0 {w} {h}\">\n",
            "<rect width=\"{w}\" height=\"{h}\" fill=\"white\"/>\n",
            "<text x=\"{tx}\" y=\"20\" text-anchor=\"middle\" font-family=\"sans-serif\" ",
            "font-size=\"14\">{title}</text>\n"
        ),
        w = WIDTH,
        h = HEIGHT,
        tx = (MARGIN_LEFT + (WIDTH - MARGIN_RIGHT)) / 2.0,
        title = title
    )
}

fn axes(y_label: &str, x_label: &str) -> String {
    let x0 = MARGIN_LEFT;
    let x1 = WIDTH - MARGIN_RIGHT;
    let y0 = HEIGHT - MARGIN_BOTTOM;
    let y1 = MARGIN_TOP;
    let mut out = format!(
        concat!(
            "<line x1=\"{x0}\" y1=\"{y0}\" x2=\"{x1}\" y2=\"{y0}\" stroke=\"black\"/>\n",
            "<line x1=\"{x0}\" y1=\"{y0}\" x2=\"{x0}\" y2=\"{y1}\" stroke=\"black\"/>\n"
        ),
        x0 = x0,
        x1 = x1,
        y0 = y0,
        y1 = y1
    );
    out.push_str(&format!(
        concat!(
            "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\" font-family=\"sans-serif\" ",
            "font-size=\"12\">{}</text>\n"
        ),
        (x0 + x1) / 2.0,
        HEIGHT - 12.0,
        x_label
    ));
    out.push_str(&format!(
        concat!(
            "<text x=\"16\" y=\"{}\" text-anchor=\"middle\" font-family=\"sans-serif\" ",
            "font-size=\"12\" transform=\"rotate(-90 16 {})\">{}</text>\n"
        ),
        (y0 + y1) / 2.0,
        (y0 + y1) / 2.0,
        y_label
    ));
    // unit-interval y ticks
    for i in 0..=5 {
        let v = i as f64 / 5.0;
        let y = y0 - v * (y0 - y1);
        out.push_str(&format!(
            concat!(
                "<line x1=\"{x}\" y1=\"{y}\" x2=\"{x2}\" y2=\"{y}\" stroke=\"#cccccc\"/>\n",
                "<text x=\"{tx}\" y=\"{ty}\" text-anchor=\"end\" font-family=\"sans-serif\" ",
                "font-size=\"10\">{v:.1}</text>\n"
            ),
            x = x0,
            x2 = x1,
            y = y,
            tx = x0 - 6.0,
            ty = y + 3.0,
            v = v
        ));
    }
    out
}

pub fn accuracy_plot(rows: &[ConditionResult]) -> String {
    let flat: Vec<(String, usize, f64)> = rows
        .iter()
        .map(|r| (r.condition.as_str().to_string(), r.k, r.accuracy))
        .collect();
    accuracy_plot_from_rows(&flat)
}

pub fn accuracy_plot_from_rows(rows: &[(String, usize, f64)]) -> String {
    let mut series: BTreeMap<&str, Vec<(usize, f64)>> = BTreeMap::new();
    let mut order: Vec<&str> = Vec::new();
    for (condition, k, acc) in rows {
        if !series.contains_key(condition.as_str()) {
            order.push(condition);
        }
        series.entry(condition).or_default().push((*k, *acc));
    }
    let ks: Vec<usize> = {
        let mut ks: Vec<usize> = rows.iter().map(|(_, k, _)| *k).collect();
        ks.sort_unstable();
        ks.dedup();
        ks
    };
    let (k_lo, k_hi) = (*ks.first().unwrap_or(&1) as f64, *ks.last().unwrap_or(&2) as f64);
    let x0 = MARGIN_LEFT;
    let x1 = WIDTH - MARGIN_RIGHT;
    let y0 = HEIGHT - MARGIN_BOTTOM;
    let y1 = MARGIN_TOP;
    let x_of = |k: f64| {
        if k_hi > k_lo {
            x0 + (k - k_lo) / (k_hi - k_lo) * (x1 - x0)
        } else {
            (x0 + x1) / 2.0
        }
    };
    let y_of = |a: f64| y0 - a * (y0 - y1);

    let mut out = header("accuracy vs principal components");
    out.push_str(&axes("accuracy", "principal components k"));
    for &k in &ks {
        out.push_str(&format!(
            concat!(
                "<text x=\"{x}\" y=\"{y}\" text-anchor=\"middle\" font-family=\"sans-serif\" ",
                "font-size=\"10\">{k}</text>\n"
            ),
            x = x_of(k as f64),
            y = y0 + 16.0,
            k = k
        ));
    }
    for (si, condition) in order.iter().enumerate() {
        let color = SERIES_COLORS[si % SERIES_COLORS.len()];
        let mut points = series[condition].clone();
        points.sort_by_key(|(k, _)| *k);
        let path: Vec<String> = points
            .iter()
            .map(|(k, a)| format!("{:.2},{:.2}", x_of(*k as f64), y_of(*a)))
            .collect();
        out.push_str(&format!(
            "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"2\" points=\"{}\"/>\n",
            path.join(" ")
        ));
        for (k, a) in &points {
            out.push_str(&format!(
                "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"3\" fill=\"{color}\"/>\n",
                x_of(*k as f64),
                y_of(*a)
            ));
        }
        let ly = MARGIN_TOP + 16.0 * si as f64;
        out.push_str(&format!(
            concat!(
                "<line x1=\"{lx}\" y1=\"{ly}\" x2=\"{lx2}\" y2=\"{ly}\" stroke=\"{color}\" ",
                "stroke-width=\"2\"/>\n",
                "<text x=\"{tx}\" y=\"{ty}\" font-family=\"sans-serif\" font-size=\"11\">",
                "{name}</text>\n"
            ),
            lx = x1 + 10.0,
            lx2 = x1 + 30.0,
            ly = ly,
            color = color,
            tx = x1 + 36.0,
            ty = ly + 4.0,
            name = condition
        ));
    }
    out.push_str("</svg>\n");
    out
}

pub struct BoxStats {
    pub subject: String,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

pub fn box_plot(stats: &[BoxStats]) -> String {
    let x0 = MARGIN_LEFT;
    let x1 = WIDTH - MARGIN_RIGHT;
    let y0 = HEIGHT - MARGIN_BOTTOM;
    let y1 = MARGIN_TOP;
    let n = stats.len().max(1) as f64;
    let slot = (x1 - x0) / n;
    let box_w = (slot * 0.5).min(40.0);
    let y_of = |v: f64| y0 - v * (y0 - y1);

    let mut out = header("aligned Jaccard per subject");
    out.push_str(&axes("Jaccard index", "subject"));
    for (i, s) in stats.iter().enumerate() {
        let cx = x0 + slot * (i as f64 + 0.5);
        let (bl, br) = (cx - box_w / 2.0, cx + box_w / 2.0);
        out.push_str(&format!(
            concat!(
                "<line x1=\"{cx:.2}\" y1=\"{ymin:.2}\" x2=\"{cx:.2}\" y2=\"{yq1:.2}\" ",
                "stroke=\"black\"/>\n",
                "<line x1=\"{cx:.2}\" y1=\"{yq3:.2}\" x2=\"{cx:.2}\" y2=\"{ymax:.2}\" ",
                "stroke=\"black\"/>\n",
                "<rect x=\"{bl:.2}\" y=\"{yq3:.2}\" width=\"{bw:.2}\" height=\"{bh:.2}\" ",
                "fill=\"#9ecae1\" stroke=\"black\"/>\n",
                "<line x1=\"{bl:.2}\" y1=\"{ymed:.2}\" x2=\"{br:.2}\" y2=\"{ymed:.2}\" ",
                "stroke=\"black\" stroke-width=\"2\"/>\n",
                "<text x=\"{cx:.2}\" y=\"{ty:.2}\" text-anchor=\"middle\" ",
                "font-family=\"sans-serif\" font-size=\"10\">{name}</text>\n"
            ),
            cx = cx,
            ymin = y_of(s.min),
            yq1 = y_of(s.q1),
            yq3 = y_of(s.q3),
            ymax = y_of(s.max),
            bl = bl,
            br = br,
            bw = box_w,
            bh = (y_of(s.q1) - y_of(s.q3)).abs(),
            ymed = y_of(s.median),
            ty = y0 + 16.0,
            name = s.subject
        ));
    }
    out.push_str("</svg>\n");
    out
}
