//! On-disk cache of reference trajectories.
//!
//! Entries are keyed by a SHA-256 over the problem name, a force fingerprint,
//! the initial condition, every config field and the reference step. Writes go
//! to a temporary file in the cache directory and are renamed into place.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::algebra::{
    DimerLength, ForceField, OrthonormalFrame, PositionVector, DEFAULT_ORTHO_TOL,
};
use crate::dynamics::{SaddleConfig, SaddleState, StepDiagnostics, Trajectory};
use crate::error::Result;
use crate::problems::{InitialCondition, Problem};

/// Environment variable naming the cache directory.
pub const CACHE_DIR_ENV: &str = "SADDLE_CACHE_DIR";

const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ReferenceCache {
    dir: Option<PathBuf>,
}

#[derive(Serialize, Deserialize)]
struct CachedState {
    n: usize,
    t: f64,
    x: Vec<f64>,
    v: Vec<Vec<f64>>,
    l0: f64,
}

#[derive(Serialize, Deserialize)]
struct CachedTrajectory {
    version: u32,
    config: SaddleConfig,
    states: Vec<CachedState>,
    diagnostics: Vec<StepDiagnostics>,
}

impl ReferenceCache {
    /// No caching; every reference is recomputed.
    pub fn disabled() -> Self {
        ReferenceCache { dir: None }
    }

    pub fn in_dir(dir: impl Into<PathBuf>) -> Self {
        ReferenceCache {
            dir: Some(dir.into()),
        }
    }

    /// Uses `$SADDLE_CACHE_DIR` when set and non-empty, otherwise disabled.
    pub fn from_env() -> Self {
        match std::env::var_os(CACHE_DIR_ENV) {
            Some(d) if !d.is_empty() => Self::in_dir(d),
            _ => Self::disabled(),
        }
    }

    pub fn dir(&self) -> Option<&Path> {
        self.dir.as_deref()
    }

    /// Cache path for a reference run, if caching is enabled.
    pub fn path_for(
        &self,
        problem: &Problem,
        ic: &InitialCondition,
        config: &SaddleConfig,
    ) -> Option<PathBuf> {
        let dir = self.dir.as_ref()?;
        let key = cache_key(problem, ic, config);
        let safe_name: String = problem
            .name()
            .chars()
            .map(|c| {
                if c.is_ascii_alphanumeric() || c == '-' || c == '_' {
                    c
                } else {
                    '_'
                }
            })
            .collect();
        Some(dir.join(format!("{safe_name}-k{}-{}.json", config.k, &key[..16])))
    }

    pub(crate) fn load(&self, path: &Path) -> Option<Trajectory> {
        let text = fs::read_to_string(path).ok()?;
        match decode(&text) {
            Ok(t) => Some(t),
            Err(e) => {
                log::warn!("ignoring unreadable cache entry {}: {e}", path.display());
                None
            }
        }
    }

    pub(crate) fn store(&self, path: &Path, traj: &Trajectory) -> Result<()> {
        static COUNTER: AtomicU64 = AtomicU64::new(0);
        let dir = path.parent().expect("cache paths live in the cache dir");
        fs::create_dir_all(dir)?;
        let tmp = dir.join(format!(
            ".{}.{}.{}.tmp",
            path.file_name().unwrap().to_string_lossy(),
            std::process::id(),
            COUNTER.fetch_add(1, Ordering::Relaxed)
        ));
        {
            let mut f = fs::File::create(&tmp)?;
            f.write_all(encode(traj)?.as_bytes())?;
            f.sync_all()?;
        }
        fs::rename(&tmp, path)?;
        Ok(())
    }
}

fn push_f64s(h: &mut Sha256, vals: impl IntoIterator<Item = f64>) {
    for v in vals {
        h.update(v.to_bits().to_le_bytes());
    }
}

fn cache_key(problem: &Problem, ic: &InitialCondition, config: &SaddleConfig) -> String {
    let mut h = Sha256::new();
    h.update(FORMAT_VERSION.to_le_bytes());
    h.update(problem.name().as_bytes());
    h.update([0u8]);
    // guards against a different field registered under the same name
    let probe = PositionVector::from_fn(ic.x0.len(), |r, _| 0.5 + 0.25 * r as f64);
    push_f64s(&mut h, problem.force(&ic.x0).iter().copied());
    push_f64s(&mut h, problem.force(&probe).iter().copied());
    push_f64s(&mut h, ic.x0.iter().copied());
    for v in ic.frame0.vectors() {
        push_f64s(&mut h, v.iter().copied());
    }
    h.update(serde_json::to_vec(config).expect("config serializes"));
    hex::encode(h.finalize())
}

pub(crate) fn encode(traj: &Trajectory) -> Result<String> {
    let cached = CachedTrajectory {
        version: FORMAT_VERSION,
        config: traj.config,
        states: traj
            .states
            .iter()
            .map(|s| CachedState {
                n: s.n,
                t: s.t,
                x: s.x.iter().copied().collect(),
                v: s.frame
                    .vectors()
                    .iter()
                    .map(|v| v.iter().copied().collect())
                    .collect(),
                l0: s.l.initial(),
            })
            .collect(),
        diagnostics: traj.diagnostics.clone(),
    };
    Ok(serde_json::to_string(&cached)?)
}

pub(crate) fn decode(text: &str) -> Result<Trajectory> {
    let cached: CachedTrajectory = serde_json::from_str(text)?;
    if cached.version != FORMAT_VERSION {
        return Err(crate::error::SsdError::input(
            "cache format version mismatch",
        ));
    }
    let states = cached
        .states
        .into_iter()
        .map(|s| {
            Ok(SaddleState {
                n: s.n,
                t: s.t,
                x: PositionVector::from_vec(s.x),
                frame: OrthonormalFrame::new(
                    s.v.into_iter().map(PositionVector::from_vec).collect(),
                    DEFAULT_ORTHO_TOL,
                )?,
                l: DimerLength::at(s.t, s.l0)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Trajectory {
        config: cached.config,
        states,
        diagnostics: cached.diagnostics,
    })
}
