use std::cmp::Ordering;
use std::collections::BTreeMap;

use anyhow::{bail, Result};

use crate::experiment::{ResultRow, RowStatus};

/// Compares factor values numerically when both parse as numbers.
fn compare_values(a: &str, b: &str) -> Ordering {
    match (a.parse::<f64>(), b.parse::<f64>()) {
        (Ok(x), Ok(y)) => x.total_cmp(&y),
        _ => a.cmp(b),
    }
}

fn compare_keys(a: &[String], b: &[String]) -> Ordering {
    a.iter()
        .zip(b)
        .map(|(x, y)| compare_values(x, y))
        .find(|o| o.is_ne())
        .unwrap_or(Ordering::Equal)
}

/// Aggregates validation MCC per cell as CSV with columns
/// `group_by..., mean_mcc, std_mcc, n_seeds, n_failed`.
///
/// Cells are sorted by their factor tuple. The standard deviation is the
/// population one over successful seeds; flagged rows only count toward
/// `n_failed`.
pub fn emit_table(rows: &[ResultRow], group_by: &[&str]) -> Result<String> {
    if rows.is_empty() {
        bail!("no result rows to aggregate");
    }
    let mut cells: BTreeMap<Vec<String>, Vec<&ResultRow>> = BTreeMap::new();
    for row in rows {
        let key = group_by
            .iter()
            .map(|name| match row.factors.iter().find(|(f, _)| f == name) {
                Some((_, v)) => Ok(v.clone()),
                None => bail!("row for seed {} has no factor `{name}`", row.seed),
            })
            .collect::<Result<Vec<_>>>()?;
        cells.entry(key).or_default().push(row);
    }
    let mut cells: Vec<_> = cells.into_iter().collect();
    cells.sort_by(|a, b| compare_keys(&a.0, &b.0));

    let mut w = csv::Writer::from_writer(Vec::new());
    let header: Vec<&str> = group_by
        .iter()
        .copied()
        .chain(["mean_mcc", "std_mcc", "n_seeds", "n_failed"])
        .collect();
    w.write_record(&header)?;
    for (key, members) in cells {
        let values: Vec<f64> = members
            .iter()
            .filter(|r| r.status == RowStatus::Ok)
            .filter_map(|r| r.val_mcc)
            .collect();
        let n = values.len();
        let failed = members.len() - n;
        let (mean, std) = if n == 0 {
            (String::new(), String::new())
        } else {
            let mean = values.iter().sum::<f64>() / n as f64;
            let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
            (mean.to_string(), var.sqrt().to_string())
        };
        let mut record = key;
        record.extend([mean, std, n.to_string(), failed.to_string()]);
        w.write_record(&record)?;
    }
    Ok(String::from_utf8(w.into_inner()?)?)
}
