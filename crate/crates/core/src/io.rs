//! JSON-lines serialization of trajectories: one state per line,
//! `{"n", "t", "x", "v", "l", "residual"}`, full-precision floats.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::algebra::{ForceField, PositionVector};
use crate::dynamics::Trajectory;
use crate::error::{Result, SsdError};
use crate::extrapolation::ExtrapolatedTrajectory;
use crate::problems::Problem;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateRecord {
    pub n: usize,
    pub t: f64,
    pub x: Vec<f64>,
    pub v: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub l: Option<f64>,
    pub residual: f64,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub extrapolated: bool,
}

fn to_vec(v: &PositionVector) -> Vec<f64> {
    v.iter().copied().collect()
}

/// Records for every state of `traj`, with residuals `|F(x_n)|`.
pub fn trajectory_records(problem: &Problem, traj: &Trajectory) -> Vec<StateRecord> {
    traj.states
        .iter()
        .map(|s| StateRecord {
            n: s.n,
            t: s.t,
            x: to_vec(&s.x),
            v: s.frame.vectors().iter().map(to_vec).collect(),
            l: Some(s.l.value()),
            residual: problem.force(&s.x).norm(),
            extrapolated: false,
        })
        .collect()
}

pub fn extrapolated_records(problem: &Problem, traj: &ExtrapolatedTrajectory) -> Vec<StateRecord> {
    traj.states
        .iter()
        .map(|s| StateRecord {
            n: s.n,
            t: s.t,
            x: to_vec(&s.x),
            v: s.v.iter().map(to_vec).collect(),
            l: None,
            residual: problem.force(&s.x).norm(),
            extrapolated: true,
        })
        .collect()
}

pub fn write_jsonl<W: Write>(mut out: W, records: &[StateRecord]) -> Result<()> {
    for r in records {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_jsonl<R: BufRead>(input: R) -> Result<Vec<StateRecord>> {
    let mut records = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: StateRecord = serde_json::from_str(&line)
            .map_err(|e| SsdError::input(format!("line {}: {e}", i + 1)))?;
        records.push(rec);
    }
    Ok(records)
}
