//! Sweep outputs: `results.csv`, the two SVG charts and `manifest.json`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pipeline::{ExperimentConfig, SweepResultRow};

pub const RESULTS_HEADER: [&str; 9] = [
    "seed",
    "tau",
    "avg_pseudo_positives",
    "teacher_map",
    "student_map",
    "an_baseline_map",
    "em_baseline_map",
    "full_supervision_map",
    "wall_time_s",
];

/// Value of the `seed` column on per-tau mean rows.
pub const MEAN_SEED: &str = "mean";

/// One parsed line of `results.csv`. `seed` is `None` on mean rows.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRecord {
    pub seed: Option<u64>,
    pub tau: f64,
    pub avg_pseudo_positives: f64,
    pub teacher_map: f64,
    pub student_map: f64,
    pub an_baseline_map: f64,
    pub em_baseline_map: f64,
    pub full_supervision_map: f64,
    pub wall_time_s: f64,
}

impl ResultRecord {
    fn values(&self) -> [f64; 8] {
        [
            self.tau,
            self.avg_pseudo_positives,
            self.teacher_map,
            self.student_map,
            self.an_baseline_map,
            self.em_baseline_map,
            self.full_supervision_map,
            self.wall_time_s,
        ]
    }

    fn from_values(seed: Option<u64>, v: [f64; 8]) -> Self {
        ResultRecord {
            seed,
            tau: v[0],
            avg_pseudo_positives: v[1],
            teacher_map: v[2],
            student_map: v[3],
            an_baseline_map: v[4],
            em_baseline_map: v[5],
            full_supervision_map: v[6],
            wall_time_s: v[7],
        }
    }
}

impl From<&SweepResultRow> for ResultRecord {
    fn from(r: &SweepResultRow) -> Self {
        ResultRecord {
            seed: Some(r.seed),
            tau: r.tau,
            avg_pseudo_positives: r.avg_pseudo_positives,
            teacher_map: r.teacher_map,
            student_map: r.student_map,
            an_baseline_map: r.an_baseline_map,
            em_baseline_map: r.em_baseline_map,
            full_supervision_map: r.full_supervision_map,
            wall_time_s: r.wall_time_s,
        }
    }
}

/// Per-tau means over seeds, in ascending tau.
pub fn mean_rows(records: &[ResultRecord]) -> Vec<ResultRecord> {
    let mut groups: BTreeMap<u64, Vec<[f64; 8]>> = BTreeMap::new();
    for r in records.iter().filter(|r| r.seed.is_some()) {
        groups.entry(r.tau.to_bits()).or_default().push(r.values());
    }
    let mut out: Vec<ResultRecord> = groups
        .into_values()
        .map(|vals| {
            let mut mean = [0.0; 8];
            for v in &vals {
                for (m, x) in mean.iter_mut().zip(v) {
                    *m += x;
                }
            }
            for m in &mut mean {
                *m /= vals.len() as f64;
            }
            // exact tau, not a rounded mean of identical values
            mean[0] = vals[0][0];
            ResultRecord::from_values(None, mean)
        })
        .collect();
    out.sort_by(|a, b| a.tau.total_cmp(&b.tau));
    out
}

/// Writes per-(seed, tau) rows followed by per-tau mean rows. Floats use the
/// shortest representation that round-trips.
pub fn write_results_csv<W: Write>(out: W, rows: &[SweepResultRow]) -> Result<()> {
    let records: Vec<ResultRecord> = rows.iter().map(ResultRecord::from).collect();
    let means = mean_rows(&records);
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::CRLF).from_writer(out);
    w.write_record(RESULTS_HEADER)?;
    for r in records.iter().chain(&means) {
        let mut fields = vec![r.seed.map_or_else(|| MEAN_SEED.to_string(), |s| s.to_string())];
        fields.extend(r.values().iter().map(|v| v.to_string()));
        w.write_record(&fields)?;
    }
    w.flush().map_err(|e| Error::io("results.csv", e))?;
    Ok(())
}

pub fn results_csv_string(rows: &[SweepResultRow]) -> Result<String> {
    let mut buf = Vec::new();
    write_results_csv(&mut buf, rows)?;
    Ok(String::from_utf8(buf).expect("csv output is ascii"))
}

pub fn read_results_csv(path: &Path) -> Result<Vec<ResultRecord>> {
    let mut rdr = csv::Reader::from_path(path)?;
    let header = rdr.headers()?.clone();
    if header.iter().ne(RESULTS_HEADER.iter().copied()) {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line: 1,
            msg: format!("unexpected header {:?}", header.iter().collect::<Vec<_>>()),
        });
    }
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = i + 2;
        let bad = |msg: String| Error::Parse {
            path: path.to_path_buf(),
            line,
            msg,
        };
        let seed = match &rec[0] {
            MEAN_SEED => None,
            s => Some(s.parse().map_err(|_| bad(format!("bad seed `{s}`")))?),
        };
        let mut v = [0.0; 8];
        for (j, slot) in v.iter_mut().enumerate() {
            let s = &rec[j + 1];
            *slot = s.parse().map_err(|_| bad(format!("bad number `{s}` in {}", RESULTS_HEADER[j + 1])))?;
        }
        out.push(ResultRecord::from_values(seed, v));
    }
    Ok(out)
}

/// Mean rows of a results table, computing them when the table has none.
fn means_of(records: &[ResultRecord]) -> Vec<ResultRecord> {
    let stored: Vec<ResultRecord> = records.iter().filter(|r| r.seed.is_none()).cloned().collect();
    if stored.is_empty() {
        mean_rows(records)
    } else {
        stored
    }
}

/// (tau, mean avg pseudo positives) in ascending tau.
pub fn labels_vs_tau(records: &[ResultRecord]) -> Vec<(f64, f64)> {
    means_of(records).iter().map(|r| (r.tau, r.avg_pseudo_positives)).collect()
}

/// Named (tau, mean MAP) series for student, AN, EM and skyline.
pub fn map_vs_tau(records: &[ResultRecord]) -> Vec<(&'static str, Vec<(f64, f64)>)> {
    let m = means_of(records);
    let series = |f: fn(&ResultRecord) -> f64| m.iter().map(|r| (r.tau, f(r))).collect();
    vec![
        ("student (pseudo multi-labels)", series(|r| r.student_map)),
        ("assume negative", series(|r| r.an_baseline_map)),
        ("entropy maximization", series(|r| r.em_baseline_map)),
        ("full supervision", series(|r| r.full_supervision_map)),
    ]
}

const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#7f7f7f", "#9467bd", "#ff7f0e"];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Static SVG line chart with axes, ticks and a legend.
pub fn line_chart_svg(title: &str, x_label: &str, y_label: &str, series: &[(&str, Vec<(f64, f64)>)]) -> String {
    let (w, h) = (640.0, 420.0);
    let (left, right, top, bottom) = (70.0, 190.0, 40.0, 55.0);
    let pts = series.iter().flat_map(|(_, s)| s.iter());
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in pts {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if !x0.is_finite() {
        (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
    }
    if x1 - x0 < 1e-12 {
        x0 -= 0.5;
        x1 += 0.5;
    }
    let pad = ((y1 - y0) * 0.08).max(1e-3);
    y0 -= pad;
    y1 += pad;
    let px = |x: f64| left + (x - x0) / (x1 - x0) * (w - left - right);
    let py = |y: f64| top + (y1 - y) / (y1 - y0) * (h - top - bottom);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="22" text-anchor="middle" font-size="15">{}</text>"#, w / 2.0, escape(title));
    let (ax0, ax1, ay0, ay1) = (left, w - right, top, h - bottom);
    let _ = writeln!(s, r#"<line x1="{ax0}" y1="{ay1}" x2="{ax1}" y2="{ay1}" stroke="black"/>"#);
    let _ = writeln!(s, r#"<line x1="{ax0}" y1="{ay0}" x2="{ax0}" y2="{ay1}" stroke="black"/>"#);
    for i in 0..=4 {
        let fx = x0 + (x1 - x0) * f64::from(i) / 4.0;
        let fy = y0 + (y1 - y0) * f64::from(i) / 4.0;
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{fx:.3}</text>"#,
            px(fx),
            ay1 + 18.0
        );
        let _ = writeln!(
            s,
            r##"<line x1="{ax0}" y1="{0:.1}" x2="{ax1}" y2="{0:.1}" stroke="#e5e5e5"/><text x="{1:.1}" y="{2:.1}" text-anchor="end">{fy:.3}</text>"##,
            py(fy),
            ax0 - 6.0,
            py(fy) + 4.0
        );
    }
    let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#, (ax0 + ax1) / 2.0, h - 14.0, escape(x_label));
    let _ = writeln!(
        s,
        r#"<text x="16" y="{0:.1}" text-anchor="middle" transform="rotate(-90 16 {0:.1})">{1}</text>"#,
        (ay0 + ay1) / 2.0,
        escape(y_label)
    );
    for (k, (name, pts)) in series.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let poly: Vec<String> = pts.iter().map(|&(x, y)| format!("{:.2},{:.2}", px(x), py(y))).collect();
        let _ = writeln!(s, r#"<polyline fill="none" stroke="{color}" stroke-width="2" points="{}"/>"#, poly.join(" "));
        for &(x, y) in pts {
            let _ = writeln!(s, r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{color}"/>"#, px(x), py(y));
        }
        let ly = top + 10.0 + 20.0 * k as f64;
        let _ = writeln!(
            s,
            r#"<line x1="{0}" y1="{ly}" x2="{1}" y2="{ly}" stroke="{color}" stroke-width="2"/><text x="{2}" y="{3}">{4}</text>"#,
            ax1 + 12.0,
            ax1 + 32.0,
            ax1 + 38.0,
            ly + 4.0,
            escape(name)
        );
    }
    s.push_str("</svg>\n");
    s
}

pub fn map_chart(records: &[ResultRecord]) -> String {
    line_chart_svg("Test MAP vs threshold", "tau", "mean test MAP", &map_vs_tau(records))
}

pub fn labels_chart(records: &[ResultRecord]) -> String {
    line_chart_svg(
        "Pseudo positives per example vs threshold",
        "tau",
        "avg positive labels",
        &[("pseudo multi-labels", labels_vs_tau(records))],
    )
}

/// Writes `map_vs_tau.svg` and `labels_vs_tau.svg` into `dir`.
pub fn write_charts(dir: &Path, records: &[ResultRecord]) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut paths = Vec::new();
    for (name, svg) in [("map_vs_tau.svg", map_chart(records)), ("labels_vs_tau.svg", labels_chart(records))] {
        let p = dir.join(name);
        std::fs::write(&p, svg).map_err(|e| Error::io(&p, e))?;
        paths.push(p);
    }
    Ok(paths)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub config: ExperimentConfig,
    /// Paths relative to the run directory.
    pub artifacts: Vec<PathBuf>,
    pub started_at: String,
    pub finished_at: String,
}

impl RunManifest {
    /// Artifacts listed but absent under `root`.
    pub fn missing_artifacts(&self, root: &Path) -> Vec<PathBuf> {
        self.artifacts.iter().filter(|p| !root.join(p).exists()).cloned().collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(seed: u64, tau: f64, avg: f64, student: f64) -> SweepResultRow {
        SweepResultRow {
            seed,
            tau,
            avg_pseudo_positives: avg,
            teacher_map: 0.5,
            student_map: student,
            an_baseline_map: 0.4,
            em_baseline_map: 0.6,
            full_supervision_map: 0.9,
            wall_time_s: 0.0,
        }
    }

    #[test]
    fn csv_header_and_means() {
        let rows = vec![row(0, 0.55, 3.0, 0.5), row(0, 0.65, 2.0, 0.7), row(1, 0.55, 2.0, 0.6), row(1, 0.65, 1.0, 0.8)];
        let text = results_csv_string(&rows).unwrap();
        let first = text.lines().next().unwrap();
        assert_eq!(
            first,
            "seed,tau,avg_pseudo_positives,teacher_map,student_map,an_baseline_map,em_baseline_map,full_supervision_map,wall_time_s"
        );
        assert!(text.contains("mean,0.55,2.5,0.5,0.55,"));
        assert_eq!(text.lines().count(), 1 + 4 + 2);
    }

    #[test]
    fn csv_roundtrip() {
        let rows = vec![row(7, 0.75, 1.0 / 3.0, 0.123_456_789_012_345_67)];
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("results.csv");
        std::fs::write(&p, results_csv_string(&rows).unwrap()).unwrap();
        let back = read_results_csv(&p).unwrap();
        assert_eq!(back[0], ResultRecord::from(&rows[0]));
        assert_eq!(back[1].seed, None);
        assert_eq!(labels_vs_tau(&back), vec![(0.75, 1.0 / 3.0)]);
    }

    #[test]
    fn charts_are_svg() {
        let rows: Vec<ResultRecord> = [row(0, 0.55, 3.0, 0.5), row(0, 0.95, 0.0, 0.4)].iter().map(ResultRecord::from).collect();
        let svg = map_chart(&rows);
        assert!(svg.starts_with("<svg"));
        assert_eq!(svg.matches("<polyline").count(), 4);
        assert_eq!(labels_chart(&rows).matches("<polyline").count(), 1);
        // degenerate input still renders
        assert!(line_chart_svg("t", "x", "y", &[]).ends_with("</svg>\n"));
    }
}
