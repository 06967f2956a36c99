//! Scoring a predictions CSV (`label,p0,p1,...`).

use std::path::Path;

use nalgebra::DMatrix;
use relaxbayes::metrics::MetricsReport;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::output::{num, opt_num, Table};

const ROW_SUM_TOL: f64 = 1e-6;

/// Parse a predictions CSV: a `label` column followed by `p0 .. p{C-1}`.
pub fn parse_predictions(path: &Path) -> Result<(DMatrix<f64>, Vec<usize>)> {
    let bad = |msg: String| Error::Csv {
        path: path.to_path_buf(),
        msg,
    };
    let mut r = csv::Reader::from_path(path).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => bad(format!("{other:?}")),
    })?;
    let header: Vec<String> = r.headers().map_err(|e| bad(e.to_string()))?.iter().map(String::from).collect();
    let classes = header.len().saturating_sub(1);
    let expected: Vec<String> = std::iter::once("label".to_string()).chain((0..classes).map(|c| format!("p{c}"))).collect();
    if classes < 2 || header != expected {
        return Err(bad(format!("header must be label,p0,...,p(C-1) with C >= 2, got {}", header.join(","))));
    }
    let mut labels = Vec::new();
    let mut probs = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        let line = i + 2;
        let label: usize = rec[0].trim().parse().map_err(|_| bad(format!("line {line}: bad label {}", &rec[0])))?;
        let row: Vec<f64> = rec
            .iter()
            .skip(1)
            .map(|c| c.trim().parse::<f64>().map_err(|_| bad(format!("line {line}: bad probability {c}"))))
            .collect::<Result<_>>()?;
        if row.iter().any(|p| !(0.0..=1.0).contains(p)) || (row.iter().sum::<f64>() - 1.0).abs() > ROW_SUM_TOL {
            return Err(bad(format!("line {line}: probabilities must lie in [0, 1] and sum to one")));
        }
        labels.push(label);
        probs.extend(row);
    }
    if labels.is_empty() {
        return Err(bad("no prediction rows".into()));
    }
    Ok((DMatrix::from_row_slice(labels.len(), classes, &probs), labels))
}

/// Metrics of a predictions file; with `out`, also write `metrics.csv` tagged
/// with the hash of the input file.
pub fn run_metrics(path: &Path, out: Option<&Path>) -> Result<MetricsReport> {
    let (probs, labels) = parse_predictions(path)?;
    let report = MetricsReport::compute(&probs, &labels).map_err(|e| match e {
        relaxbayes::Error::Domain(msg) => Error::Csv {
            path: path.to_path_buf(),
            msg,
        },
        e => e.into(),
    })?;
    if let Some(out) = out {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        let hash: String = Sha256::digest(&bytes).iter().take(8).map(|b| format!("{b:02x}")).collect();
        let mut t = Table::new(&["accuracy", "nll", "ece", "auroc", "n_examples"]);
        t.push(vec![
            num(report.accuracy),
            num(report.nll),
            num(report.ece),
            opt_num(report.auroc),
            report.n_examples.to_string(),
        ]);
        t.write(&out.join("metrics.csv"), &hash)?;
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(name: &str, text: &str) -> std::path::PathBuf {
        let p = std::env::temp_dir().join(format!("relaxbayes-score-{}-{name}", std::process::id()));
        std::fs::write(&p, text).unwrap();
        p
    }

    #[test]
    fn scores_hand_case() {
        let p = write("ok.csv", "label,p0,p1\n0,0.9,0.1\n1,0.2,0.8\n1,0.6,0.4\n");
        let r = run_metrics(&p, None).unwrap();
        assert!((r.accuracy - 2.0 / 3.0).abs() < 1e-15);
        let nll = -(0.9f64.ln() + 0.8f64.ln() + 0.4f64.ln()) / 3.0;
        assert!((r.nll - nll).abs() < 1e-12);
        std::fs::remove_file(p).unwrap();
    }

    #[test]
    fn rejects_malformed_files() {
        for (name, text) in [
            ("hdr.csv", "y,p0,p1\n0,0.5,0.5\n"),
            ("sum.csv", "label,p0,p1\n0,0.5,0.6\n"),
            ("lbl.csv", "label,p0,p1\n2,0.5,0.5\n"),
            ("empty.csv", "label,p0,p1\n"),
        ] {
            let p = write(name, text);
            let err = run_metrics(&p, None).unwrap_err();
            assert_eq!(err.exit_code(), 3, "{name}: {err}");
            std::fs::remove_file(p).unwrap();
        }
    }
}
