use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::{CellResult, ExperimentReport, HarnessError, Method, Series};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Svg,
    Json,
}

impl std::str::FromStr for ReportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "csv" => Ok(ReportFormat::Csv),
            "svg" => Ok(ReportFormat::Svg),
            "json" => Ok(ReportFormat::Json),
            _ => Err(format!("unknown report format '{s}' (csv, svg or json)")),
        }
    }
}

/// CSV row of a cell. Wall time is left out so reruns compare byte for byte.
#[derive(Serialize)]
struct CellRow<'a> {
    method: &'a str,
    series: &'a str,
    n: usize,
    #[serde(rename = "N")]
    size: usize,
    k: usize,
    sigma: f64,
    trials: usize,
    successes: usize,
    numerical_errors: usize,
    success_rate: f64,
    wilson_low: f64,
    wilson_high: f64,
    mean_weight_error: f64,
}

#[derive(Serialize)]
struct SummaryRow<'a> {
    method: &'a str,
    series: &'a str,
    n: usize,
    #[serde(rename = "N")]
    size: usize,
    sigma: f64,
    max_k_50: Option<usize>,
    max_k_first_failure: Option<usize>,
    wilson_low: Option<f64>,
    wilson_high: Option<f64>,
}

fn write_rows<T: Serialize>(rows: impl IntoIterator<Item = T>) -> Result<String, HarnessError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    let bytes = w.into_inner().map_err(|e| HarnessError::Csv(e.into_error().into()))?;
    Ok(String::from_utf8(bytes).expect("CSV output is UTF-8"))
}

/// One row per cell.
pub fn to_csv(r: &ExperimentReport) -> Result<String, HarnessError> {
    write_rows(r.cells.iter().map(|c| CellRow {
        method: c.method.name(),
        series: c.series.name(),
        n: c.n,
        size: c.size,
        k: c.k,
        sigma: c.sigma,
        trials: c.trials,
        successes: c.successes,
        numerical_errors: c.numerical_errors,
        success_rate: c.success_rate,
        wilson_low: c.wilson_low,
        wilson_high: c.wilson_high,
        mean_weight_error: c.mean_weight_error,
    }))
}

/// One row per curve with both recoverable-size definitions.
pub fn summary_csv(r: &ExperimentReport) -> Result<String, HarnessError> {
    write_rows(r.summaries.iter().map(|s| SummaryRow {
        method: s.method.name(),
        series: s.series.name(),
        n: s.n,
        size: s.size,
        sigma: s.sigma,
        max_k_50: s.max_k_50,
        max_k_first_failure: s.max_k_first_failure,
        wilson_low: s.wilson_at_max_k_50.map(|w| w.0),
        wilson_high: s.wilson_at_max_k_50.map(|w| w.1),
    }))
}

const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];
const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 440.0;
const LEFT: f64 = 64.0;
const RIGHT: f64 = 220.0;
const TOP: f64 = 36.0;
const BOTTOM: f64 = 56.0;

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

type CurveKey = (Method, Series, usize, usize, u64);

fn key(c: &CellResult) -> CurveKey {
    (c.method, c.series, c.n, c.size, c.sigma.to_bits())
}

/// Line plot of success rate against k, one polyline per curve.
pub fn render_svg(r: &ExperimentReport) -> String {
    let mut curves: Vec<(CurveKey, Vec<&CellResult>)> = Vec::new();
    for c in &r.cells {
        match curves.iter_mut().find(|(k, _)| *k == key(c)) {
            Some((_, v)) => v.push(c),
            None => curves.push((key(c), vec![c])),
        }
    }
    let varies = |f: &dyn Fn(&CurveKey) -> u64| {
        curves.first().is_some_and(|(k0, _)| curves.iter().any(|(k, _)| f(k) != f(k0)))
    };
    let show_method = varies(&|k| k.0 as u64);
    let show_series = varies(&|k| k.1 as u64);
    let show_size = varies(&|k| k.3 as u64);
    let show_sigma = varies(&|k| k.4);
    let label = |(m, s, n, size, sigma): &CurveKey| {
        let mut parts = Vec::new();
        if show_method {
            parts.push(m.name().to_string());
        }
        if show_series {
            parts.push(s.name().to_string());
        }
        parts.push(format!("n={n}"));
        if show_size {
            parts.push(format!("N={size}"));
        }
        if show_sigma {
            parts.push(format!("sigma={}", f64::from_bits(*sigma)));
        }
        parts.join(" ")
    };

    let kmin = r.cells.iter().map(|c| c.k).min().unwrap_or(1) as f64;
    let kmax = r.cells.iter().map(|c| c.k).max().unwrap_or(1) as f64;
    let span = if kmax > kmin { kmax - kmin } else { 1.0 };
    let pw = WIDTH - LEFT - RIGHT;
    let ph = HEIGHT - TOP - BOTTOM;
    let x = |k: f64| LEFT + (k - kmin) / span * pw;
    let y = |rate: f64| TOP + (1.0 - rate) * ph;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="22" text-anchor="middle" font-size="14">{}</text>"#,
        LEFT + pw / 2.0,
        escape(&format!("{} (trials per cell: {})", r.spec.kind, r.spec.trials))
    );
    for i in 0..=4 {
        let rate = i as f64 / 4.0;
        let yy = y(rate);
        let _ = writeln!(
            s,
            r##"<line x1="{LEFT}" y1="{yy}" x2="{}" y2="{yy}" stroke="#dddddd"/><text x="{}" y="{}" text-anchor="end">{rate:.2}</text>"##,
            LEFT + pw,
            LEFT - 6.0,
            yy + 4.0
        );
    }
    let mut ks: Vec<usize> = r.cells.iter().map(|c| c.k).collect();
    ks.sort_unstable();
    ks.dedup();
    let stride = ks.len().div_ceil(12).max(1);
    for k in ks.iter().step_by(stride) {
        let xx = x(*k as f64);
        let _ = writeln!(
            s,
            r#"<line x1="{xx}" y1="{}" x2="{xx}" y2="{}" stroke="black"/><text x="{xx}" y="{}" text-anchor="middle">{k}</text>"#,
            TOP + ph,
            TOP + ph + 5.0,
            TOP + ph + 18.0
        );
    }
    let _ = writeln!(
        s,
        r#"<line x1="{LEFT}" y1="{TOP}" x2="{LEFT}" y2="{}" stroke="black"/><line x1="{LEFT}" y1="{}" x2="{}" y2="{}" stroke="black"/>"#,
        TOP + ph,
        TOP + ph,
        LEFT + pw,
        TOP + ph
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">set size k</text>"#,
        LEFT + pw / 2.0,
        HEIGHT - 14.0
    );
    let _ = writeln!(
        s,
        r#"<text x="16" y="{}" text-anchor="middle" transform="rotate(-90 16 {})">success rate</text>"#,
        TOP + ph / 2.0,
        TOP + ph / 2.0
    );
    for (i, (k, cells)) in curves.iter().enumerate() {
        let colour = PALETTE[i % PALETTE.len()];
        let mut pts: Vec<(f64, f64)> = cells.iter().map(|c| (x(c.k as f64), y(c.success_rate))).collect();
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
        let path: Vec<String> = pts.iter().map(|(a, b)| format!("{a:.2},{b:.2}")).collect();
        let _ = writeln!(
            s,
            r#"<polyline fill="none" stroke="{colour}" stroke-width="2" points="{}"/>"#,
            path.join(" ")
        );
        for (a, b) in &pts {
            let _ = writeln!(s, r#"<circle cx="{a:.2}" cy="{b:.2}" r="2.5" fill="{colour}"/>"#);
        }
        let ly = TOP + 10.0 + 18.0 * i as f64;
        let lx = LEFT + pw + 16.0;
        let _ = writeln!(
            s,
            r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{colour}" stroke-width="2"/><text x="{}" y="{}">{}</text>"#,
            lx + 18.0,
            lx + 24.0,
            ly + 4.0,
            escape(&label(k))
        );
    }
    s.push_str("</svg>\n");
    s
}

fn write_file(path: PathBuf, content: &str) -> Result<PathBuf, HarnessError> {
    std::fs::write(&path, content).map_err(|source| HarnessError::Io {
        path: path.clone(),
        source,
    })?;
    Ok(path)
}

/// Writes the report into `dir` and returns the files written: `cells.csv`
/// and `summary.csv`, `curves.svg`, or `report.json`.
pub fn emit_report(r: &ExperimentReport, format: ReportFormat, dir: &Path) -> Result<Vec<PathBuf>, HarnessError> {
    std::fs::create_dir_all(dir).map_err(|source| HarnessError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    Ok(match format {
        ReportFormat::Csv => vec![
            write_file(dir.join("cells.csv"), &to_csv(r)?)?,
            write_file(dir.join("summary.csv"), &summary_csv(r)?)?,
        ],
        ReportFormat::Svg => vec![write_file(dir.join("curves.svg"), &render_svg(r))?],
        ReportFormat::Json => vec![write_file(dir.join("report.json"), &r.to_json()?)?],
    })
}
