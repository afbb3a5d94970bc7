//! Tables, plot series and an SVG bar chart from a trial log.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::log::TrialLogRecord;
use crate::{Result, RunnerError};

/// Best (lowest validation MAE) completed trial of each family, ascending
/// by MAE; ties by family name.
pub fn family_best(records: &[TrialLogRecord]) -> Vec<&TrialLogRecord> {
    let mut best: BTreeMap<&str, &TrialLogRecord> = BTreeMap::new();
    for r in records.iter().filter(|r| r.status == "ok" && r.val_mae.is_some()) {
        let better = |cur: &&TrialLogRecord| {
            let (a, b) = (r.val_mae.unwrap(), cur.val_mae.unwrap());
            a < b || (a == b && r.trial_id < cur.trial_id)
        };
        match best.get(r.family.as_str()) {
            Some(cur) if !better(cur) => {}
            _ => {
                best.insert(&r.family, r);
            }
        }
    }
    let mut rows: Vec<&TrialLogRecord> = best.into_values().collect();
    rows.sort_by(|a, b| {
        a.val_mae
            .unwrap()
            .total_cmp(&b.val_mae.unwrap())
            .then_with(|| a.family.cmp(&b.family))
    });
    rows
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn family_best_csv(records: &[TrialLogRecord]) -> String {
    let mut s = String::from("rank,family,best_val_mae,accuracy,trial_id,trials\n");
    for (i, r) in family_best(records).into_iter().enumerate() {
        let n = records.iter().filter(|x| x.family == r.family).count();
        let _ = writeln!(
            s,
            "{},{},{},{},{},{}",
            i + 1,
            r.family,
            opt(r.val_mae),
            opt(r.accuracy),
            r.trial_id,
            n
        );
    }
    s
}

fn accuracy_vs_mae_csv(records: &[TrialLogRecord]) -> String {
    let mut s = String::from("trial_id,family,val_mae,accuracy\n");
    for r in sorted(records).into_iter().filter(|r| r.status == "ok") {
        let _ = writeln!(s, "{},{},{},{}", r.trial_id, r.family, opt(r.val_mae), opt(r.accuracy));
    }
    s
}

fn trials_series_csv(records: &[TrialLogRecord]) -> String {
    let mut s = String::from("trial_id,family,status,val_mae,best_so_far\n");
    let mut best = f64::INFINITY;
    for r in sorted(records) {
        if let Some(m) = r.val_mae.filter(|_| r.status == "ok") {
            best = best.min(m);
        }
        let _ = writeln!(
            s,
            "{},{},{},{},{}",
            r.trial_id,
            r.family,
            r.status,
            opt(r.val_mae),
            if best.is_finite() { best.to_string() } else { String::new() }
        );
    }
    s
}

fn sorted(records: &[TrialLogRecord]) -> Vec<&TrialLogRecord> {
    let mut v: Vec<&TrialLogRecord> = records.iter().collect();
    v.sort_by_key(|r| r.trial_id);
    v
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Horizontal bars of per-family best validation MAE.
fn bar_chart_svg(records: &[TrialLogRecord]) -> String {
    let rows = family_best(records);
    let (left, bar_w, row_h, top) = (110.0, 420.0, 26.0, 40.0);
    let height = top + row_h * rows.len() as f64 + 20.0;
    let max = rows.iter().filter_map(|r| r.val_mae).fold(0.0, f64::max);
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="640" height="{height}" viewBox="0 0 640 {height}">"#
    );
    let _ = writeln!(
        s,
        r#"<text x="10" y="24" font-family="sans-serif" font-size="14">Best validation MAE per family (W)</text>"#
    );
    for (i, r) in rows.iter().enumerate() {
        let v = r.val_mae.unwrap_or(0.0);
        let w = if max > 0.0 { bar_w * v / max } else { 0.0 };
        let y = top + row_h * i as f64;
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" font-family="sans-serif" font-size="12" text-anchor="end">{}</text>"#,
            left - 6.0,
            y + 15.0,
            escape(&r.family)
        );
        let _ = writeln!(
            s,
            r##"<rect x="{left}" y="{y}" width="{w:.2}" height="{}" fill="#4a7bb7"/>"##,
            row_h - 6.0
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{}" font-family="sans-serif" font-size="12">{v:.3}</text>"#,
            left + w + 4.0,
            y + 15.0
        );
    }
    s.push_str("</svg>\n");
    s
}

fn markdown(records: &[TrialLogRecord]) -> String {
    let ok = records.iter().filter(|r| r.status == "ok").count();
    let mut s = format!(
        "# Trial report\n\n{} trials, {} completed, {} failed.\n\n| rank | family | best val MAE (W) | accuracy | trial |\n|---|---|---|---|---|\n",
        records.len(),
        ok,
        records.len() - ok
    );
    for (i, r) in family_best(records).into_iter().enumerate() {
        let _ = writeln!(
            s,
            "| {} | {} | {} | {} | {} |",
            i + 1,
            r.family,
            opt(r.val_mae),
            opt(r.accuracy),
            r.trial_id
        );
    }
    s
}

/// Writes `family_best.csv`, `accuracy_vs_mae.csv`, `trials_series.csv`,
/// `family_best_mae.svg` and `report.md` into `dir`. Contents depend only on
/// `records` (wall times are not reported).
pub fn emit_report(records: &[TrialLogRecord], dir: &Path) -> Result<Vec<PathBuf>> {
    if records.is_empty() {
        return Err(RunnerError::Runtime("cannot report an empty trial history".into()));
    }
    std::fs::create_dir_all(dir).map_err(RunnerError::io(dir))?;
    let files = [
        ("family_best.csv", family_best_csv(records)),
        ("accuracy_vs_mae.csv", accuracy_vs_mae_csv(records)),
        ("trials_series.csv", trials_series_csv(records)),
        ("family_best_mae.svg", bar_chart_svg(records)),
        ("report.md", markdown(records)),
    ];
    let mut out = Vec::new();
    for (name, body) in files {
        let path = dir.join(name);
        std::fs::write(&path, body).map_err(RunnerError::io(&path))?;
        out.push(path);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn record(id: usize, family: &str, mae: Option<f64>) -> TrialLogRecord {
        TrialLogRecord {
            trial_id: id,
            family: family.into(),
            params: BTreeMap::new(),
            val_mae: mae,
            test_mae: None,
            accuracy: mae.map(|_| 0.5),
            wall_time_s: id as f64,
            status: if mae.is_some() { "ok" } else { "failed" }.into(),
            seed: 0,
            error: None,
        }
    }

    #[test]
    fn ordering_and_rows() {
        let recs = vec![record(0, "co", Some(224.0)), record(1, "seq2point", Some(8.31)), record(2, "co", None)];
        let csv = family_best_csv(&recs);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[1], "1,seq2point,8.31,0.5,1,1");
        assert_eq!(lines[2], "2,co,224,0.5,0,2");
        let one = family_best_csv(&recs[..1]);
        assert_eq!(one.lines().count(), 2);
    }

    #[test]
    fn series_tracks_best() {
        let recs = vec![record(0, "co", Some(5.0)), record(1, "dt", None), record(2, "dt", Some(3.0))];
        let s = trials_series_csv(&recs);
        assert_eq!(s.lines().nth(2).unwrap(), "1,dt,failed,,5");
        assert_eq!(s.lines().nth(3).unwrap(), "2,dt,ok,3,3");
    }

    #[test]
    fn svg_is_static() {
        let svg = bar_chart_svg(&[record(0, "co", Some(1.0))]);
        assert!(svg.starts_with("<svg"));
        assert!(!svg.contains("<script"));
    }
}
