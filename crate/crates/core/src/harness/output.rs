use std::fs::File;
use std::io::Write;
use std::path::Path;

use super::experiment::ExperimentResult;
use super::{HarnessError, Result};

pub const CSV_HEADER: [&str; 10] = [
    "structure",
    "dataset",
    "train",
    "test",
    "amortized_cost",
    "merges",
    "eta_max",
    "seed",
    "mean",
    "stddev",
];

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn cost(v: f64) -> String {
    format!("{v:.6}")
}

/// Writes results in the given order. Wall time is not written so reruns
/// produce identical bytes.
pub fn write_csv<W: Write>(results: &[ExperimentResult], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    for r in results {
        w.write_record([
            r.structure.clone(),
            r.dataset.clone(),
            r.train.to_string(),
            r.test.to_string(),
            cost(r.amortized_cost),
            r.merges.to_string(),
            opt(r.eta_max),
            opt(r.seed),
            r.mean.map(cost).unwrap_or_default(),
            r.stddev.map(cost).unwrap_or_default(),
        ])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn emit_csv(results: &[ExperimentResult], path: &Path) -> Result<()> {
    if results.is_empty() {
        return Err(HarnessError::Config("no results to write".into()));
    }
    let file = File::create(path).map_err(|source| HarnessError::Io {
        path: path.display().to_string(),
        source,
    })?;
    write_csv(results, file)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::time::Duration;

    fn row(s: &str) -> ExperimentResult {
        ExperimentResult {
            structure: s.into(),
            dataset: "d".into(),
            train: 4,
            test: 4,
            amortized_cost: 1.5,
            merges: 2,
            eta_max: Some(3),
            seed: None,
            mean: None,
            stddev: None,
            wall_time: Duration::from_millis(5),
            witness_checks: 0,
            witness_failures: 0,
        }
    }

    #[test]
    fn header_plus_rows() {
        let mut buf = Vec::new();
        let rows: Vec<_> = ["pma", "apma", "learned-pma", "learned-apma"]
            .map(row)
            .into();
        write_csv(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 5);
        assert_eq!(
            lines[0],
            "structure,dataset,train,test,amortized_cost,merges,eta_max,seed,mean,stddev"
        );
        assert_eq!(lines[1], "pma,d,4,4,1.500000,2,3,,,");
    }

    #[test]
    fn robustness_columns() {
        let mut r = row("learned-pma");
        r.mean = Some(2.25);
        r.stddev = Some(0.5);
        r.seed = Some(1);
        let mut buf = Vec::new();
        write_csv(&[r], &mut buf).unwrap();
        assert!(String::from_utf8(buf)
            .unwrap()
            .ends_with(",1,2.250000,0.500000\n"));
    }

    #[test]
    fn refuses_empty_and_unwritable() {
        let dir = tempfile::tempdir().unwrap();
        assert_eq!(
            emit_csv(&[], &dir.path().join("x.csv"))
                .unwrap_err()
                .exit_code(),
            2
        );
        let bad = dir.path().join("missing").join("x.csv");
        assert!(matches!(
            emit_csv(&[row("pma")], &bad),
            Err(HarnessError::Io { .. })
        ));
    }
}
