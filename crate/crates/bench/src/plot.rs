use gridpinn_core::pinn::LossWeights;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

/// One polyline of a chart.
#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

impl Series {
    pub fn new(label: impl Into<String>, points: Vec<(f64, f64)>) -> Self {
        Self {
            label: label.into(),
            points,
        }
    }
}

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 420.0;
const MARGIN: f64 = 60.0;
const PALETTE: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf"];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Line chart with a legend entry per series; `None` when every series is
/// empty or non-finite.
pub fn line_chart_svg(title: &str, x_label: &str, y_label: &str, series: &[Series]) -> Option<String> {
    let finite = |&(x, y): &(f64, f64)| x.is_finite() && y.is_finite();
    let all: Vec<(f64, f64)> = series.iter().flat_map(|s| s.points.iter().copied()).filter(finite).collect();
    if all.is_empty() {
        return None;
    }
    let (mut x0, mut x1, mut y0, mut y1) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
    for &(x, y) in &all {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if x1 <= x0 {
        x1 = x0 + 1.0;
    }
    if y1 <= y0 {
        y1 = y0 + 1.0;
    }
    let px = |x: f64| MARGIN + (x - x0) / (x1 - x0) * (WIDTH - 2.0 * MARGIN);
    let py = |y: f64| HEIGHT - MARGIN - (y - y0) / (y1 - y0) * (HEIGHT - 2.0 * MARGIN);

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(svg, r#"<text x="{}" y="24" text-anchor="middle" font-size="15">{}</text>"#, WIDTH / 2.0, escape(title));
    let _ = writeln!(
        svg,
        r#"<path d="M{m} {t} V{b} H{r}" stroke="black" fill="none"/>"#,
        m = MARGIN,
        t = MARGIN,
        b = HEIGHT - MARGIN,
        r = WIDTH - MARGIN
    );
    for k in 0..=4 {
        let f = k as f64 / 4.0;
        let yv = y0 + f * (y1 - y0);
        let xv = x0 + f * (x1 - x0);
        let _ = writeln!(svg, r#"<text x="{}" y="{}" text-anchor="end">{yv:.3e}</text>"#, MARGIN - 4.0, py(yv) + 4.0);
        let _ = writeln!(svg, r#"<text x="{}" y="{}" text-anchor="middle">{xv:.0}</text>"#, px(xv), HEIGHT - MARGIN + 16.0);
    }
    let _ = writeln!(svg, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, WIDTH / 2.0, HEIGHT - 16.0, escape(x_label));
    let _ = writeln!(
        svg,
        r#"<text x="16" y="{}" text-anchor="middle" transform="rotate(-90 16 {})">{}</text>"#,
        HEIGHT / 2.0,
        HEIGHT / 2.0,
        escape(y_label)
    );
    let mut legend_row = 0;
    for (i, s) in series.iter().enumerate() {
        let pts: Vec<String> =
            s.points.iter().copied().filter(finite).map(|(x, y)| format!("{:.2},{:.2}", px(x), py(y))).collect();
        if pts.is_empty() {
            continue;
        }
        let color = PALETTE[i % PALETTE.len()];
        let _ = writeln!(svg, r#"<polyline points="{}" stroke="{color}" fill="none" stroke-width="1.5"/>"#, pts.join(" "));
        let ly = MARGIN + 14.0 * legend_row as f64;
        let lx = WIDTH - MARGIN - 140.0;
        let _ = writeln!(svg, r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/>"#, lx + 18.0);
        let _ = writeln!(svg, r#"<text class="legend" x="{}" y="{}">{}</text>"#, lx + 24.0, ly + 4.0, escape(&s.label));
        legend_row += 1;
    }
    svg.push_str("</svg>\n");
    Some(svg)
}

fn color_scale(t: f64) -> String {
    let t = t.clamp(0.0, 1.0);
    let r = (255.0 * t) as u8;
    let b = (255.0 * (1.0 - t)) as u8;
    format!("#{r:02x}40{b:02x}")
}

/// Barycentric heatmap of MAE over the loss-weight simplex; one cell per
/// weight triple. Corners are labelled by the weight that is 1 there.
pub fn simplex_heatmap_svg(title: &str, cells: &[(LossWeights, f64)]) -> String {
    let size = 420.0;
    let (ax, ay) = (60.0, size - 40.0);
    let side = size - 120.0;
    let h = side * 3f64.sqrt() / 2.0;
    let place = |w: &LossWeights| (ax + side * (w.lambda_p + 0.5 * w.lambda_c), ay - h * w.lambda_c);
    let finite: Vec<f64> = cells.iter().map(|c| c.1).filter(|v| v.is_finite()).collect();
    let lo = finite.iter().copied().fold(f64::MAX, f64::min);
    let hi = finite.iter().copied().fold(f64::MIN, f64::max);
    let radius = if cells.len() > 1 { (side / (2.0 * (cells.len() as f64).sqrt())).clamp(4.0, 30.0) } else { 20.0 };

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" viewBox="0 0 {size} {size}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(svg, r#"<text x="{}" y="20" text-anchor="middle" font-size="15">{}</text>"#, size / 2.0, escape(title));
    let _ = writeln!(
        svg,
        r#"<path d="M{ax} {ay} L{} {ay} L{} {} Z" stroke="gray" fill="none"/>"#,
        ax + side,
        ax + side / 2.0,
        ay - h
    );
    let _ = writeln!(svg, r#"<text x="{}" y="{}" text-anchor="end">λd</text>"#, ax - 6.0, ay + 14.0);
    let _ = writeln!(svg, r#"<text x="{}" y="{}">λp</text>"#, ax + side + 6.0, ay + 14.0);
    let _ = writeln!(svg, r#"<text x="{}" y="{}" text-anchor="middle">λc</text>"#, ax + side / 2.0, ay - h - 8.0);
    for (w, mae) in cells {
        let (x, y) = place(w);
        let fill = if mae.is_finite() {
            color_scale(if hi > lo { (mae - lo) / (hi - lo) } else { 0.0 })
        } else {
            "#bbbbbb".to_string()
        };
        let _ = writeln!(
            svg,
            r#"<circle class="cell" cx="{x:.2}" cy="{y:.2}" r="{radius:.2}" fill="{fill}"><title>({:.3}, {:.3}, {:.3}) MAE {mae:.4e}</title></circle>"#,
            w.lambda_d, w.lambda_p, w.lambda_c
        );
    }
    if !finite.is_empty() {
        let _ = writeln!(svg, r#"<text x="{}" y="44">MAE {lo:.3e} (blue) to {hi:.3e} (red)</text>"#, 20.0);
    }
    svg.push_str("</svg>\n");
    svg
}

fn read_csv(path: &Path) -> Option<(Vec<String>, Vec<Vec<String>>)> {
    let mut rdr = csv::Reader::from_path(path).ok()?;
    let headers: Vec<String> = rdr.headers().ok()?.iter().map(String::from).collect();
    let rows: Vec<Vec<String>> =
        rdr.records().filter_map(|r| r.ok()).map(|r| r.iter().map(String::from).collect()).collect();
    Some((headers, rows))
}

fn num(s: &str) -> f64 {
    s.parse().unwrap_or(f64::NAN)
}

/// Columns of a series CSV as series over the first column.
fn series_from(path: &Path, columns: &[(&str, &str)]) -> Vec<Series> {
    let Some((headers, rows)) = read_csv(path) else {
        return Vec::new();
    };
    columns
        .iter()
        .filter_map(|(col, label)| {
            let j = headers.iter().position(|h| h == col)?;
            let pts = rows.iter().map(|r| (num(&r[0]), num(&r[j]))).collect();
            Some(Series::new(*label, pts))
        })
        .collect()
}

fn emit(dir: &Path, name: &str, svg: Option<String>, written: &mut Vec<PathBuf>) -> std::io::Result<()> {
    match svg {
        Some(svg) => {
            let path = dir.join(name);
            crate::files::write_atomic(&path, svg.as_bytes())?;
            written.push(path);
        }
        None => log::warn!("no data for {name}; skipped"),
    }
    Ok(())
}

/// Renders every chart whose series CSV exists in a seed bundle directory.
/// Missing or empty series are skipped with a warning.
pub fn render_plots(dir: &Path) -> std::io::Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    for (csv_name, svg_name, title) in [
        ("holdout_series.csv", "holdout_series.svg", "MAE per test point, unseen training-recipe data"),
        ("test_series.csv", "test_series.svg", "MAE per test point, scenario test set"),
    ] {
        let mut cols = vec![("pinn", "PINN"), ("nn", "NN")];
        if csv_name == "test_series.csv" {
            cols.extend([("pinn_bus", "PINN attacked bus"), ("nn_bus", "NN attacked bus")]);
        }
        let series = series_from(&dir.join(csv_name), &cols);
        emit(dir, svg_name, line_chart_svg(title, "test point", "MAE", &series), &mut written)?;
    }

    let epochs = dir.join("mae_per_epoch.csv");
    let mut by_combo: Vec<Series> = Vec::new();
    if let Some((headers, rows)) = read_csv(&epochs) {
        let col = |n: &str| headers.iter().position(|h| h == n);
        if let (Some(l), Some(e), Some(v)) = (col("label"), col("epoch"), col("val_mae")) {
            for r in &rows {
                let p = (num(&r[e]), num(&r[v]));
                match by_combo.iter_mut().find(|s| s.label == r[l]) {
                    Some(s) => s.points.push(p),
                    None => by_combo.push(Series::new(r[l].clone(), vec![p])),
                }
            }
        }
    }
    emit(dir, "mae_per_epoch.svg", line_chart_svg("Validation MAE per epoch", "epoch", "MAE", &by_combo), &mut written)?;

    let heat = dir.join("lambda_heatmap.csv");
    let cells: Vec<(LossWeights, f64)> = read_csv(&heat)
        .map(|(_, rows)| {
            rows.iter()
                .filter(|r| r.len() >= 4)
                .map(|r| {
                    let w = LossWeights { lambda_d: num(&r[0]), lambda_p: num(&r[1]), lambda_c: num(&r[2]) };
                    (w, num(&r[3]))
                })
                .collect()
        })
        .unwrap_or_default();
    let heatmap = (!cells.is_empty()).then(|| simplex_heatmap_svg("Best MAE per loss weighting", &cells));
    emit(dir, "lambda_heatmap.svg", heatmap, &mut written)?;
    Ok(written)
}
