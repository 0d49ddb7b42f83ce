//! Sampled (snapshot, wrench) datasets and their on-disk format.
//!
//! A dataset is stored as a CSV file plus a JSON sidecar with the same
//! basename. The CSV starts with a key-value header record:
//!
//! ```text
//! # downwash-dataset,version=1,formation=leader_follower,k=3,oracle=merging,seed=7,records=21600
//! ```
//!
//! followed by a column-name row and one row per sample with the fixed
//! column order `time`, sufferer state (7), `k`, K neighbour states (7 each),
//! ground-truth wrench (6), measured wrench (6). A vehicle state is
//! `n, e, d, vn, ve, vd, yaw`. Numbers use the shortest representation that
//! parses back to the identical `f64`.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::NoiseParams;
use crate::formations::{FormationKind, SweepConfig};
use crate::frame::{FormationSnapshot, VehicleState, Wrench6};
use crate::oracle::{FieldParams, OracleKind};

pub const DATASET_VERSION: u32 = 1;
const MAGIC: &str = "# downwash-dataset";

/// Everything needed to regenerate a dataset bit for bit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetMeta {
    pub version: u32,
    pub formation: FormationKind,
    pub k: usize,
    pub oracle: OracleKind,
    pub sweep: SweepConfig,
    pub field: FieldParams,
    pub noise: NoiseParams,
}

impl DatasetMeta {
    pub fn new(
        formation: FormationKind,
        k: usize,
        sweep: SweepConfig,
        oracle: OracleKind,
        field: FieldParams,
        noise: NoiseParams,
    ) -> Self {
        DatasetMeta {
            version: DATASET_VERSION,
            formation,
            k,
            oracle,
            sweep,
            field,
            noise,
        }
    }

    /// Conventional file stem, e.g. `leader_follower_k3_merging`.
    pub fn stem(&self) -> String {
        format!("{}_k{}_{}", self.formation, self.k, self.oracle)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Record {
    pub time: f64,
    pub snapshot: FormationSnapshot,
    pub truth: Wrench6,
    pub measured: Wrench6,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub meta: DatasetMeta,
    pub records: Vec<Record>,
}

pub fn sidecar_path(csv: &Path) -> PathBuf {
    csv.with_extension("json")
}

fn column_names(k: usize) -> Vec<String> {
    const STATE: [&str; 7] = ["n", "e", "d", "vn", "ve", "vd", "yaw"];
    const WRENCH: [&str; 6] = ["f_n", "f_e", "f_d", "t_pitch", "t_roll", "t_yaw"];
    let mut cols = vec!["time".to_string()];
    cols.extend(STATE.iter().map(|s| format!("sufferer_{s}")));
    cols.push("k".into());
    for j in 0..k {
        cols.extend(STATE.iter().map(|s| format!("nb{j}_{s}")));
    }
    cols.extend(WRENCH.iter().map(|s| format!("truth_{s}")));
    cols.extend(WRENCH.iter().map(|s| format!("meas_{s}")));
    cols
}

impl Dataset {
    /// Rebuild the records from metadata alone.
    pub fn regenerate(meta: &DatasetMeta) -> Result<Self> {
        crate::formations::generate_from_meta(meta)
    }

    pub fn k(&self) -> usize {
        self.meta.k
    }

    pub fn to_csv_string(&self) -> String {
        let mut out = String::with_capacity(self.records.len() * (20 + 7 * 8 * (self.k() + 1)));
        let _ = writeln!(
            out,
            "{MAGIC},version={},formation={},k={},oracle={},seed={},records={}",
            self.meta.version,
            self.meta.formation,
            self.meta.k,
            self.meta.oracle,
            self.meta.noise.seed,
            self.records.len()
        );
        out.push_str(&column_names(self.k()).join(","));
        out.push('\n');
        for r in &self.records {
            let _ = write!(out, "{}", r.time);
            for v in r.snapshot.sufferer().to_row() {
                let _ = write!(out, ",{v}");
            }
            let _ = write!(out, ",{}", r.snapshot.k());
            for nb in r.snapshot.neighbours() {
                for v in nb.to_row() {
                    let _ = write!(out, ",{v}");
                }
            }
            for v in r.truth.to_array().into_iter().chain(r.measured.to_array()) {
                let _ = write!(out, ",{v}");
            }
            out.push('\n');
        }
        out
    }

    /// Write `path` (CSV) and its JSON sidecar.
    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_csv_string()).map_err(|e| Error::io(path, e))?;
        let side = sidecar_path(path);
        let json = serde_json::to_string_pretty(&self.meta).expect("metadata serializes");
        fs::write(&side, json + "\n").map_err(|e| Error::io(&side, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let side = sidecar_path(path);
        let meta_text = fs::read_to_string(&side).map_err(|e| Error::io(&side, e))?;
        let meta: DatasetMeta = serde_json::from_str(&meta_text).map_err(|e| Error::format(&side, e.to_string()))?;
        if meta.version != DATASET_VERSION {
            return Err(Error::format(&side, format!("unsupported version {}", meta.version)));
        }
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let records = parse_records(&text, &meta).map_err(|detail| Error::format(path, detail))?;
        Ok(Dataset { meta, records })
    }
}

fn parse_records(text: &str, meta: &DatasetMeta) -> std::result::Result<Vec<Record>, String> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or("empty file")?;
    if !header.starts_with(MAGIC) {
        return Err("missing dataset header record".into());
    }
    let header_k = header
        .split(',')
        .find_map(|kv| kv.strip_prefix("k="))
        .and_then(|v| v.parse::<usize>().ok())
        .ok_or("header record lacks k")?;
    if header_k != meta.k {
        return Err(format!("header k={header_k} but sidecar k={}", meta.k));
    }
    let (_, cols) = lines.next().ok_or("missing column row")?;
    if cols.split(',').count() != column_names(meta.k).len() {
        return Err("column row does not match k".into());
    }

    let mut records = Vec::new();
    for (lineno, line) in lines {
        let at = |msg: String| format!("line {}: {msg}", lineno + 1);
        let vals: Vec<f64> = line
            .split(',')
            .map(|s| s.parse::<f64>().map_err(|e| at(format!("`{s}`: {e}"))))
            .collect::<std::result::Result<_, _>>()?;
        if vals.len() < 9 {
            return Err(at("too few fields".into()));
        }
        let k = vals[8] as usize;
        if k != meta.k || vals.len() != 9 + 7 * k + 12 {
            return Err(at(format!("expected k={} with {} fields", meta.k, 9 + 7 * meta.k + 12)));
        }
        let state = |off: usize| {
            let mut row = [0.0; 7];
            row.copy_from_slice(&vals[off..off + 7]);
            VehicleState::from_row(row)
        };
        let neighbours = (0..k).map(|j| state(9 + 7 * j)).collect();
        let snapshot = FormationSnapshot::new(state(1), neighbours).map_err(|e| at(e.to_string()))?;
        let w = 9 + 7 * k;
        records.push(Record {
            time: vals[0],
            snapshot,
            truth: Wrench6::from_slice(&vals[w..w + 6]),
            measured: Wrench6::from_slice(&vals[w + 6..w + 12]),
        });
    }
    Ok(records)
}
