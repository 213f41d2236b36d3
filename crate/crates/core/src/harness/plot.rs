//! Standalone SVG line plots of aggregate error against the swept parameter.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::harness::experiment::{
    aggregate, parse_aggregate_csv, parse_trials_csv, AggregateRow, AGGREGATE_HEADER, TRIALS_HEADER,
};

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 440.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 200.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 56.0;
const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Statistic {
    Mean,
    P95,
}

impl Statistic {
    pub const ALL: [Statistic; 2] = [Statistic::Mean, Statistic::P95];

    pub fn name(self) -> &'static str {
        match self {
            Self::Mean => "mean",
            Self::P95 => "p95",
        }
    }

    fn title(self) -> &'static str {
        match self {
            Self::Mean => "average error",
            Self::P95 => "95% quantile of the error",
        }
    }

    fn of(self, row: &AggregateRow) -> f64 {
        match self {
            Self::Mean => row.mean_error,
            Self::P95 => row.p95_error,
        }
    }
}

/// One polyline with its legend label. Points need not be sorted.
#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

/// Groups aggregate rows of one algorithm into one series per
/// `(N, d, profile)` cell, sorted by parameter.
pub fn series_for(rows: &[AggregateRow], algorithm: &str, stat: Statistic) -> Vec<Series> {
    let mut out: Vec<(usize, usize, String, Series)> = Vec::new();
    for r in rows.iter().filter(|r| r.algorithm == algorithm) {
        let point = (r.param, stat.of(r));
        match out
            .iter_mut()
            .find(|(n, d, p, _)| *n == r.n && *d == r.d && *p == r.profile)
        {
            Some((_, _, _, s)) => s.points.push(point),
            None => out.push((
                r.n,
                r.d,
                r.profile.clone(),
                Series {
                    label: format!("N={} d={} {}", r.n, r.d, r.profile),
                    points: vec![point],
                },
            )),
        }
    }
    out.into_iter()
        .map(|(_, _, _, mut s)| {
            s.points.sort_by(|a, b| a.0.total_cmp(&b.0));
            s
        })
        .collect()
}

fn decade_range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    let (lo, hi) = (lo.floor(), hi.ceil());
    if hi - lo < 1.0 {
        (lo - 0.5, hi + 0.5)
    } else {
        (lo, hi)
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Renders a plot with log-scaled axes. Nonpositive errors are drawn at a
/// floor one decade below the smallest positive value.
pub fn render_svg(title: &str, x_label: &str, y_label: &str, series: &[Series]) -> String {
    let min_positive = series
        .iter()
        .flat_map(|s| s.points.iter().map(|p| p.1))
        .filter(|&y| y > 0.0)
        .fold(f64::INFINITY, f64::min);
    let floor = if min_positive.is_finite() { min_positive / 10.0 } else { 1e-16 };
    let log_point = |&(x, y): &(f64, f64)| (x.max(f64::MIN_POSITIVE).log10(), y.max(floor).log10());
    let logged: Vec<Vec<(f64, f64)>> = series
        .iter()
        .map(|s| s.points.iter().map(log_point).collect())
        .collect();
    let (x0, x1) = decade_range(logged.iter().flatten().map(|p| p.0));
    let (y0, y1) = decade_range(logged.iter().flatten().map(|p| p.1));
    let pw = WIDTH - LEFT - RIGHT;
    let ph = HEIGHT - TOP - BOTTOM;
    let sx = |x: f64| LEFT + (x - x0) / (x1 - x0) * pw;
    let sy = |y: f64| TOP + (y1 - y) / (y1 - y0) * ph;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="22" text-anchor="middle" font-size="14">{}</text>"#,
        LEFT + pw / 2.0,
        escape(title)
    );
    // Grid and decade ticks.
    for k in (x0.ceil() as i32)..=(x1.floor() as i32) {
        let x = sx(k as f64);
        let _ = writeln!(
            s,
            r##"<line x1="{x:.1}" y1="{TOP}" x2="{x:.1}" y2="{:.1}" stroke="#dddddd"/><text x="{x:.1}" y="{:.1}" text-anchor="middle">1e{k}</text>"##,
            TOP + ph,
            TOP + ph + 18.0
        );
    }
    for k in (y0.ceil() as i32)..=(y1.floor() as i32) {
        let y = sy(k as f64);
        let _ = writeln!(
            s,
            r##"<line x1="{LEFT}" y1="{y:.1}" x2="{:.1}" y2="{y:.1}" stroke="#dddddd"/><text x="{:.1}" y="{:.1}" text-anchor="end">1e{k}</text>"##,
            LEFT + pw,
            LEFT - 6.0,
            y + 4.0
        );
    }
    let _ = writeln!(
        s,
        r#"<rect x="{LEFT}" y="{TOP}" width="{pw:.1}" height="{ph:.1}" fill="none" stroke="black"/>"#
    );
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{} (log scale)</text>"#,
        LEFT + pw / 2.0,
        HEIGHT - 12.0,
        escape(x_label)
    );
    let _ = writeln!(
        s,
        r#"<text transform="translate(18 {:.1}) rotate(-90)" text-anchor="middle">{} (log scale)</text>"#,
        TOP + ph / 2.0,
        escape(y_label)
    );

    for (i, (series, pts)) in series.iter().zip(&logged).enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let path: Vec<String> = pts
            .iter()
            .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline class="series" fill="none" stroke="{color}" stroke-width="2" points="{}"/>"#,
            path.join(" ")
        );
        for &(x, y) in pts {
            let _ = writeln!(
                s,
                r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{color}"/>"#,
                sx(x),
                sy(y)
            );
        }
        let ly = TOP + 12.0 + 20.0 * i as f64;
        let lx = WIDTH - RIGHT + 16.0;
        let _ = writeln!(
            s,
            r#"<g class="legend-entry"><line x1="{lx:.1}" y1="{ly:.1}" x2="{:.1}" y2="{ly:.1}" stroke="{color}" stroke-width="2"/><text x="{:.1}" y="{:.1}">{}</text></g>"#,
            lx + 24.0,
            lx + 30.0,
            ly + 4.0,
            escape(&series.label)
        );
    }
    s.push_str("</svg>\n");
    s
}

fn x_label(algorithm: &str) -> &'static str {
    match algorithm {
        "atpe" => "step size h",
        "ogm" => "profile samples M",
        "retrieval" => "measurements",
        _ => "parameter",
    }
}

/// Reads an aggregate or per-trial CSV (trials are aggregated first).
pub fn read_aggregates(text: &str) -> Result<Vec<AggregateRow>> {
    let header = text.lines().find(|l| !l.trim().is_empty()).map(str::trim);
    match header {
        Some(h) if h == TRIALS_HEADER => Ok(aggregate(&parse_trials_csv(text)?)),
        Some(h) if h == AGGREGATE_HEADER => parse_aggregate_csv(text),
        Some(h) => Err(Error::Csv {
            line: 1,
            msg: format!("unrecognized header '{h}'"),
        }),
        None => Err(Error::Csv {
            line: 1,
            msg: "empty file".into(),
        }),
    }
}

/// Writes `<algorithm>_<statistic>.svg` into `out_dir` for every algorithm
/// present in the CSV. Returns the paths written.
pub fn emit_plots(csv: impl AsRef<Path>, out_dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let csv = csv.as_ref();
    let out_dir = out_dir.as_ref();
    let text = fs::read_to_string(csv).map_err(|e| Error::io(csv, e))?;
    let rows = read_aggregates(&text)?;
    let mut algorithms: Vec<&str> = Vec::new();
    for r in &rows {
        if !algorithms.contains(&r.algorithm.as_str()) {
            algorithms.push(&r.algorithm);
        }
    }
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut written = Vec::new();
    for alg in algorithms {
        for stat in Statistic::ALL {
            let series = series_for(&rows, alg, stat);
            let svg = render_svg(&format!("{alg}: {}", stat.title()), x_label(alg), "HS error", &series);
            let path = out_dir.join(format!("{alg}_{}.svg", stat.name()));
            fs::write(&path, svg).map_err(|e| Error::io(&path, e))?;
            written.push(path);
        }
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(n: usize, profile: &str, param: f64, mean: f64) -> AggregateRow {
        AggregateRow {
            algorithm: "atpe".into(),
            n,
            d: 1,
            profile: profile.into(),
            param,
            trials: 20,
            mean_error: mean,
            p95_error: 2.0 * mean,
        }
    }

    fn polyline_ys(svg: &str) -> Vec<Vec<f64>> {
        svg.lines()
            .filter(|l| l.contains("class=\"series\""))
            .map(|l| {
                let pts = l.split("points=\"").nth(1).unwrap().trim_end_matches("\"/>");
                pts.split(' ')
                    .map(|p| p.split(',').nth(1).unwrap().parse::<f64>().unwrap())
                    .collect()
            })
            .collect()
    }

    #[test]
    fn two_cells_give_two_legend_entries() {
        let rows = vec![
            row(10, "tanh", 1e-2, 1e-2),
            row(10, "tanh", 1e-3, 1e-3),
            row(50, "tanh", 1e-2, 3e-2),
            row(50, "tanh", 1e-3, 3e-3),
        ];
        let svg = render_svg("t", "h", "err", &series_for(&rows, "atpe", Statistic::Mean));
        assert_eq!(svg.matches("class=\"legend-entry\"").count(), 2);
        assert!(svg.contains("N=50 d=1 tanh"));
        assert!(svg.starts_with("<svg"));
    }

    #[test]
    fn decreasing_errors_plot_monotone_in_h() {
        // Screen y grows downward: error rising with h means y falling.
        let rows = vec![
            row(10, "tanh", 1e-1, 1e-1),
            row(10, "tanh", 1e-3, 1e-3),
            row(10, "tanh", 1e-2, 1e-2),
            row(10, "tanh", 1e-4, 1e-4),
        ];
        let svg = render_svg("t", "h", "err", &series_for(&rows, "atpe", Statistic::Mean));
        let ys = &polyline_ys(&svg)[0];
        assert_eq!(ys.len(), 4);
        for w in ys.windows(2) {
            assert!(w[1] < w[0], "{ys:?}");
        }
    }

    #[test]
    fn zero_errors_are_drawn_at_a_floor() {
        let s = Series {
            label: "x".into(),
            points: vec![(1.0, 0.0), (10.0, 1e-3)],
        };
        let svg = render_svg("t", "x", "y", &[s]);
        assert!(!svg.contains("NaN") && !svg.contains("inf"));
    }

    #[test]
    fn empty_csv_is_a_parse_error() {
        assert!(matches!(read_aggregates(""), Err(Error::Csv { line: 1, .. })));
        assert!(matches!(read_aggregates("a,b\n1,2\n"), Err(Error::Csv { line: 1, .. })));
    }

    #[test]
    fn emits_one_file_per_algorithm_and_statistic() {
        let dir = tempfile::tempdir().unwrap();
        let rows = vec![row(10, "tanh", 1e-2, 1e-2), row(10, "tanh", 1e-3, 1e-3)];
        let csv = dir.path().join("aggregate.csv");
        fs::write(&csv, crate::harness::experiment::aggregate_csv(&rows)).unwrap();
        let written = emit_plots(&csv, dir.path().join("plots")).unwrap();
        let names: Vec<String> = written
            .iter()
            .map(|p| p.file_name().unwrap().to_string_lossy().into_owned())
            .collect();
        assert_eq!(names, vec!["atpe_mean.svg", "atpe_p95.svg"]);
    }

    #[test]
    fn malformed_row_reports_its_line() {
        let dir = tempfile::tempdir().unwrap();
        let csv = dir.path().join("bad.csv");
        fs::write(&csv, format!("{AGGREGATE_HEADER}\natpe,10,1,tanh,0.01,20,oops,1e-2\n")).unwrap();
        let err = emit_plots(&csv, dir.path()).unwrap_err();
        assert!(matches!(err, Error::Csv { line: 2, .. }), "{err}");
    }
}
