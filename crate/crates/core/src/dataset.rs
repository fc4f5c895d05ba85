//! Training-session collection and the JSONL trajectory log format.
//!
//! A session is one continuous run with no resets: the arm babbles between
//! random interior waypoints while the leg follows its balance script. The
//! log is line-delimited JSON with a single header line followed by one
//! record per tick:
//!
//! ```text
//! {"schema":"reachkit.dataset.v1","seed":7,"config_hash":"...","arm_chain":"arm_waist_10dof",...}
//! {"t":0,"x":[...],"fk_pose":[tx,ty,tz,qw,qx,qy,qz],"mocap_ee":[...],"y":[...],"fk_base":[...],"mocap_base":[...]}
//! ```
//!
//! Splits are chronological, never shuffled: the first two thirds
//! (`floor(2N/3)`) train, the remainder tests, so test data is strictly
//! later in time than anything trained on.

use crate::plant::{Observation, Plant, PlantError};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::io::{BufRead, Write};
use thiserror::Error;

pub const DATASET_SCHEMA: &str = "reachkit.dataset.v1";

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("line {line}: {source}")]
    Json {
        line: usize,
        source: serde_json::Error,
    },
    #[error("bad header: {0}")]
    Header(String),
    #[error("log ended after {got} records, header promised {expected}")]
    Truncated { expected: u64, got: u64 },
    #[error(transparent)]
    Plant(#[from] PlantError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetHeader {
    pub schema: String,
    pub seed: u64,
    /// Hash of the run configuration that produced the log; consumers refuse
    /// to mix artifacts with different hashes.
    pub config_hash: String,
    pub arm_chain: String,
    pub leg_chain: String,
    pub rate_hz: f64,
    pub records: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CollectConfig {
    /// Ticks to simulate; the log gains `ticks + 1` records (tick 0 included).
    pub ticks: u64,
    /// How long each random waypoint is held before resampling. Short holds
    /// keep the arm in continuous motion, which spreads the samples over the
    /// joint box far better than letting every waypoint settle.
    pub waypoint_ticks: u64,
    /// Babbling waypoints stay within this central fraction of each range.
    pub interior_frac: f64,
    pub seed: u64,
}

impl Default for CollectConfig {
    fn default() -> Self {
        CollectConfig {
            ticks: 50_000,
            waypoint_ticks: 5,
            interior_frac: 0.7,
            seed: 0,
        }
    }
}

/// Runs the babbling session. The plant is consumed tick by tick; waypoint
/// resampling is the only randomness and comes from `cfg.seed` alone.
pub fn collect(plant: &mut Plant, cfg: &CollectConfig) -> Result<Vec<Observation>, DatasetError> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let arm = plant.arm_nominal().clone();
    let mut waypoint = arm.sample_interior(&mut rng, cfg.interior_frac);
    let mut out = Vec::with_capacity(cfg.ticks as usize + 1);
    out.push(plant.observe());
    for k in 1..=cfg.ticks {
        plant.step(&waypoint)?;
        out.push(plant.observe());
        if k % cfg.waypoint_ticks.max(1) == 0 {
            waypoint = arm.sample_interior(&mut rng, cfg.interior_frac);
        }
    }
    Ok(out)
}

pub fn write_jsonl<W: Write>(
    mut w: W,
    header: &DatasetHeader,
    records: &[Observation],
) -> Result<(), DatasetError> {
    let mut header = header.clone();
    header.schema = DATASET_SCHEMA.to_string();
    header.records = records.len() as u64;
    serde_json::to_writer(&mut w, &header).map_err(|source| DatasetError::Json { line: 1, source })?;
    w.write_all(b"\n")?;
    for (i, rec) in records.iter().enumerate() {
        serde_json::to_writer(&mut w, rec).map_err(|source| DatasetError::Json {
            line: i + 2,
            source,
        })?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_jsonl<R: BufRead>(r: R) -> Result<(DatasetHeader, Vec<Observation>), DatasetError> {
    let mut lines = r.lines();
    let first = lines
        .next()
        .ok_or_else(|| DatasetError::Header("empty file".into()))??;
    let header: DatasetHeader = serde_json::from_str(&first)
        .map_err(|e| DatasetError::Header(format!("not a dataset header: {e}")))?;
    if header.schema != DATASET_SCHEMA {
        return Err(DatasetError::Header(format!(
            "schema '{}' is not '{DATASET_SCHEMA}'",
            header.schema
        )));
    }
    let mut records = Vec::with_capacity(header.records as usize);
    for (i, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        records.push(serde_json::from_str(&line).map_err(|source| DatasetError::Json {
            line: i + 2,
            source,
        })?);
    }
    if records.len() as u64 != header.records {
        return Err(DatasetError::Truncated {
            expected: header.records,
            got: records.len() as u64,
        });
    }
    Ok((header, records))
}

/// Chronological 2:1 split: first `floor(2N/3)` records train, rest test.
pub fn split(records: &[Observation]) -> (&[Observation], &[Observation]) {
    let cut = records.len() * 2 / 3;
    records.split_at(cut)
}
