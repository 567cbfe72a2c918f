//! On-disk dataset layout:
//!
//! ```text
//! <dir>/metadata.json   schema version, fingerprints, specs, seeds
//! <dir>/env_<e>.csv     t,u_1..u_{d_u},y_1..y_{d_y}   (rows t = 0..=T)
//! ```
//!
//! The last row (`t = T`) has empty control fields because `u_T` is never
//! applied. Floats use Rust's shortest round-trip formatting, so a
//! save/load cycle is bit-exact. States are not stored.

use std::fs;
use std::path::Path;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::{EnvironmentSpec, TrajectorySet};
use crate::lti::Trajectory;
use crate::{Error, Result};

pub const DATASET_SCHEMA_VERSION: u32 = 1;
const METADATA_FILE: &str = "metadata.json";

#[derive(Debug, Serialize, Deserialize)]
struct EnvironmentRecord {
    index: usize,
    variances: Vec<f64>,
    mean: Vec<f64>,
    seed: u64,
    file: String,
}

#[derive(Debug, Serialize, Deserialize)]
struct DatasetMetadata {
    schema_version: u32,
    system_fingerprint: String,
    dataset_fingerprint: String,
    horizon: usize,
    obs_noise_var: f64,
    seed: u64,
    input_dim: usize,
    output_dim: usize,
    environments: Vec<EnvironmentRecord>,
}

pub fn save_dataset(set: &TrajectorySet, dir: &Path) -> Result<()> {
    set.validate()?;
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let d_u = set.input_dim();
    let d_y = set.output_dim();

    let mut environments = Vec::with_capacity(set.trajectories.len());
    for tr in &set.trajectories {
        let spec = set.spec(tr.env_index).expect("validated");
        let file = format!("env_{}.csv", tr.env_index);
        let path = dir.join(&file);
        let mut w = csv::Writer::from_path(&path)?;
        let mut header = vec!["t".to_string()];
        header.extend((1..=d_u).map(|i| format!("u_{i}")));
        header.extend((1..=d_y).map(|i| format!("y_{i}")));
        w.write_record(&header)?;
        for (t, y) in tr.y.iter().enumerate() {
            let mut row = vec![t.to_string()];
            match tr.u.get(t) {
                Some(u) => row.extend(u.iter().map(|v| v.to_string())),
                None => row.extend(std::iter::repeat_n(String::new(), d_u)),
            }
            row.extend(y.iter().map(|v| v.to_string()));
            w.write_record(&row)?;
        }
        w.flush().map_err(|e| Error::io(&path, e))?;
        environments.push(EnvironmentRecord {
            index: tr.env_index,
            variances: spec.variances().as_slice().to_vec(),
            mean: spec.mean().as_slice().to_vec(),
            seed: tr.seed,
            file,
        });
    }

    let meta = DatasetMetadata {
        schema_version: DATASET_SCHEMA_VERSION,
        system_fingerprint: set.system_fingerprint.clone(),
        dataset_fingerprint: set.fingerprint(),
        horizon: set.horizon,
        obs_noise_var: set.obs_noise_var,
        seed: set.seed,
        input_dim: d_u,
        output_dim: d_y,
        environments,
    };
    let path = dir.join(METADATA_FILE);
    fs::write(&path, serde_json::to_string_pretty(&meta)?).map_err(|e| Error::io(&path, e))
}

fn parse_field(s: &str, path: &Path, line: usize) -> Result<f64> {
    s.parse::<f64>().map_err(|_| {
        Error::Format(format!("{}:{line}: cannot parse {s:?} as a number", path.display()))
    })
}

/// Loads a dataset written by [`save_dataset`]. Trajectories come back
/// without states. The stored dataset fingerprint is not re-checked, so
/// edited files load as long as they are well formed.
pub fn load_dataset(dir: &Path) -> Result<TrajectorySet> {
    let meta_path = dir.join(METADATA_FILE);
    let text = fs::read_to_string(&meta_path).map_err(|e| Error::io(&meta_path, e))?;
    let meta: DatasetMetadata = serde_json::from_str(&text)?;
    if meta.schema_version != DATASET_SCHEMA_VERSION {
        return Err(Error::Format(format!(
            "unsupported schema version {} (expected {DATASET_SCHEMA_VERSION})",
            meta.schema_version
        )));
    }
    let (d_u, d_y) = (meta.input_dim, meta.output_dim);

    let mut specs = Vec::with_capacity(meta.environments.len());
    let mut trajectories = Vec::with_capacity(meta.environments.len());
    for rec in &meta.environments {
        specs.push(EnvironmentSpec::new(
            rec.index,
            DVector::from_vec(rec.variances.clone()),
            Some(DVector::from_vec(rec.mean.clone())),
        )?);
        let path = dir.join(&rec.file);
        let mut r = csv::Reader::from_path(&path)?;
        let mut u = Vec::with_capacity(meta.horizon);
        let mut y = Vec::with_capacity(meta.horizon + 1);
        for (line, record) in r.records().enumerate() {
            let record = record?;
            if record.len() != 1 + d_u + d_y {
                return Err(Error::Format(format!(
                    "{}:{}: expected {} fields, found {}",
                    path.display(),
                    line + 2,
                    1 + d_u + d_y,
                    record.len()
                )));
            }
            let controls: Vec<&str> = record.iter().skip(1).take(d_u).collect();
            if controls.iter().all(|s| !s.is_empty()) {
                let v = controls
                    .iter()
                    .map(|s| parse_field(s, &path, line + 2))
                    .collect::<Result<Vec<_>>>()?;
                u.push(DVector::from_vec(v));
            }
            let v = record
                .iter()
                .skip(1 + d_u)
                .map(|s| parse_field(s, &path, line + 2))
                .collect::<Result<Vec<_>>>()?;
            y.push(DVector::from_vec(v));
        }
        trajectories.push(Trajectory {
            env_index: rec.index,
            u,
            x: None,
            y,
            seed: rec.seed,
        });
    }

    let set = TrajectorySet {
        trajectories,
        specs,
        system_fingerprint: meta.system_fingerprint,
        obs_noise_var: meta.obs_noise_var,
        horizon: meta.horizon,
        seed: meta.seed,
    };
    set.validate()?;
    Ok(set)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::environments::{design_max_variability, generate_dataset, with_random_means, DatasetOptions};
    use crate::lti::StateSpace;
    use nalgebra::{dmatrix, DMatrix};

    #[test]
    fn save_load_is_bit_exact() {
        let sys = StateSpace::new(dmatrix![0.5, 0.1; 0.0, 0.4], dmatrix![1.0, 0.3; 0.2, 1.0], DMatrix::identity(2, 2)).unwrap();
        let specs = with_random_means(design_max_variability(2, 0.9999, 0.0001).unwrap(), 1.0, 3).unwrap();
        let set = generate_dataset(&sys, &specs, &DatasetOptions::new(40, 0.01, 5)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        save_dataset(&set, dir.path()).unwrap();

        let header = std::fs::read_to_string(dir.path().join("env_0.csv")).unwrap();
        assert!(header.starts_with("t,u_1,u_2,y_1,y_2\n"));

        let loaded = load_dataset(dir.path()).unwrap();
        assert_eq!(loaded.fingerprint(), set.fingerprint());
        assert!(loaded.trajectories.iter().all(|t| t.x.is_none()));
        for (a, b) in loaded.trajectories.iter().zip(&set.trajectories) {
            assert_eq!(a.u, b.u);
            assert_eq!(a.y, b.y);
        }
    }

    #[test]
    fn rejects_unknown_schema() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(
            dir.path().join(METADATA_FILE),
            r#"{"schema_version":99,"system_fingerprint":"","dataset_fingerprint":"","horizon":1,"obs_noise_var":0.0,"seed":0,"input_dim":1,"output_dim":1,"environments":[]}"#,
        )
        .unwrap();
        assert!(matches!(load_dataset(dir.path()), Err(Error::Format(_))));
    }
}
