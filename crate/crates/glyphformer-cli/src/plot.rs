//! Self-contained SVG plots: confusion-matrix heatmap and loss curves.

use glyphformer::experiment::{EpochLog, MetricsReport};

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Confusion-matrix heatmap. Rows are true classes, columns predictions;
/// cell opacity scales with the row maximum.
pub fn confusion_heatmap(report: &MetricsReport, labels: &[String]) -> String {
    let k = report.confusion.len();
    let cell = 48.0;
    let margin = 110.0;
    let w = margin + k as f64 * cell + 20.0;
    let h = margin + k as f64 * cell + 20.0;
    let mut svg = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w:.0}\" height=\"{h:.0}\" \
         viewBox=\"0 0 {w:.0} {h:.0}\" font-family=\"sans-serif\" font-size=\"11\">\n"
    );
    svg.push_str(&format!(
        "<text x=\"{:.1}\" y=\"16\" text-anchor=\"middle\">predicted</text>\n",
        margin + k as f64 * cell / 2.0
    ));
    svg.push_str(&format!(
        "<text x=\"14\" y=\"{:.1}\" text-anchor=\"middle\" transform=\"rotate(-90 14 {:.1})\">true</text>\n",
        margin + k as f64 * cell / 2.0,
        margin + k as f64 * cell / 2.0
    ));
    for (r, row) in report.confusion.iter().enumerate() {
        let row_max = *row.iter().max().unwrap_or(&0) as f64;
        let y = margin + r as f64 * cell;
        let label = labels.get(r).map(String::as_str).unwrap_or("");
        svg.push_str(&format!(
            "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\">{}</text>\n",
            margin - 6.0,
            y + cell / 2.0 + 4.0,
            esc(label)
        ));
        for (c, &v) in row.iter().enumerate() {
            let x = margin + c as f64 * cell;
            let alpha = if row_max > 0.0 { v as f64 / row_max } else { 0.0 };
            svg.push_str(&format!(
                "<rect x=\"{x:.1}\" y=\"{y:.1}\" width=\"{cell:.1}\" height=\"{cell:.1}\" \
                 fill=\"#2166ac\" fill-opacity=\"{alpha:.3}\" stroke=\"#999\"/>\n"
            ));
            let text_fill = if alpha > 0.5 { "#fff" } else { "#000" };
            svg.push_str(&format!(
                "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\" fill=\"{text_fill}\">{v}</text>\n",
                x + cell / 2.0,
                y + cell / 2.0 + 4.0
            ));
        }
    }
    for (c, label) in labels.iter().enumerate().take(k) {
        let x = margin + c as f64 * cell + cell / 2.0;
        let y = margin + k as f64 * cell + 14.0;
        svg.push_str(&format!(
            "<text x=\"{x:.1}\" y=\"{y:.1}\" text-anchor=\"middle\">{}</text>\n",
            esc(label)
        ));
    }
    svg.push_str("</svg>\n");
    svg
}

const SERIES_COLORS: [&str; 4] = ["#d62728", "#1f77b4", "#2ca02c", "#9467bd"];

/// Overlaid training (solid) and validation (dashed) loss curves, one color
/// per named series.
pub fn loss_curves(series: &[(&str, &[EpochLog])]) -> String {
    let w = 640.0;
    let h = 420.0;
    let left = 60.0;
    let right = w - 150.0;
    let top = 30.0;
    let bottom = h - 40.0;

    let max_epoch = series
        .iter()
        .flat_map(|(_, log)| log.iter().map(|e| e.epoch))
        .max()
        .unwrap_or(1)
        .max(1) as f64;
    let mut max_loss = f64::MIN;
    let mut min_loss = f64::MAX;
    for (_, log) in series {
        for e in *log {
            max_loss = max_loss.max(e.train_loss).max(e.val_loss);
            min_loss = min_loss.min(e.train_loss).min(e.val_loss);
        }
    }
    if !max_loss.is_finite() || !min_loss.is_finite() || max_loss <= min_loss {
        min_loss = 0.0;
        max_loss = 1.0;
    }
    let sx = |epoch: f64| left + (epoch - 1.0) / (max_epoch - 1.0).max(1.0) * (right - left);
    let sy = |loss: f64| bottom - (loss - min_loss) / (max_loss - min_loss) * (bottom - top);

    let mut svg = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w:.0}\" height=\"{h:.0}\" \
         viewBox=\"0 0 {w:.0} {h:.0}\" font-family=\"sans-serif\" font-size=\"11\">\n"
    );
    svg.push_str(&format!(
        "<line x1=\"{left}\" y1=\"{bottom}\" x2=\"{right}\" y2=\"{bottom}\" stroke=\"#333\"/>\n\
         <line x1=\"{left}\" y1=\"{top}\" x2=\"{left}\" y2=\"{bottom}\" stroke=\"#333\"/>\n"
    ));
    svg.push_str(&format!(
        "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\">epoch</text>\n",
        (left + right) / 2.0,
        h - 10.0
    ));
    svg.push_str(&format!(
        "<text x=\"{left}\" y=\"{:.1}\" text-anchor=\"end\">{max_loss:.3}</text>\n\
         <text x=\"{left}\" y=\"{:.1}\" text-anchor=\"end\">{min_loss:.3}</text>\n\
         <text x=\"{left:.1}\" y=\"{:.1}\" text-anchor=\"end\">1</text>\n\
         <text x=\"{right:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{max_epoch:.0}</text>\n",
        top + 4.0,
        bottom + 4.0,
        bottom + 14.0,
        bottom + 14.0
    ));

    for (si, (name, log)) in series.iter().enumerate() {
        let color = SERIES_COLORS[si % SERIES_COLORS.len()];
        for (field, dash) in [("train", ""), ("val", " stroke-dasharray=\"5 3\"")] {
            let pts: String = log
                .iter()
                .map(|e| {
                    let loss = if field == "train" { e.train_loss } else { e.val_loss };
                    format!("{:.1},{:.1}", sx(e.epoch as f64), sy(loss))
                })
                .collect::<Vec<_>>()
                .join(" ");
            if !pts.is_empty() {
                svg.push_str(&format!(
                    "<polyline points=\"{pts}\" fill=\"none\" stroke=\"{color}\"{dash}/>\n"
                ));
            }
        }
        let ly = top + 16.0 * si as f64;
        svg.push_str(&format!(
            "<line x1=\"{:.1}\" y1=\"{ly:.1}\" x2=\"{:.1}\" y2=\"{ly:.1}\" stroke=\"{color}\"/>\n\
             <text x=\"{:.1}\" y=\"{:.1}\">{} (solid train, dashed val)</text>\n",
            right + 8.0,
            right + 28.0,
            right + 32.0,
            ly + 4.0,
            esc(name)
        ));
    }
    svg.push_str("</svg>\n");
    svg
}
