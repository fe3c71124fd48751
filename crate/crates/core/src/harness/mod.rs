//! Reference solutions, error norms, dyadic convergence ladders and the
//! scaling probes for the per-step direction diagnostics.

mod cache;
mod report;

pub use cache::{ReferenceCache, CACHE_DIR_ENV};
pub use report::{CheckFailure, ConvergenceReport, ConvergenceRow, RateWindow};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::algebra::PositionVector;
use crate::dynamics::{integrate, SaddleConfig, Trajectory};
use crate::error::{Result, SsdError};
use crate::extrapolation::{richardson_combine, ExtrapolatedTrajectory};
use crate::par::{join, map_ordered, Execution};
use crate::problems::{InitialCondition, Problem};

/// Default reference step `2^-13`.
pub const DEFAULT_REF_TAU: f64 = 1.0 / 8192.0;

/// Errors below this are treated as roundoff; no rate is reported for them.
pub const ROUNDOFF_FLOOR: f64 = 1e-13;

/// `2^-from, 2^-(from+1), .., 2^-to`.
pub fn dyadic_ladder(from: i32, to: i32) -> Vec<f64> {
    (from..=to).map(|p| 2f64.powi(-p)).collect()
}

/// Nodes of a discrete solution that can be compared against a reference.
pub trait NodeSeries {
    fn tau(&self) -> f64;
    fn node_count(&self) -> usize;
    fn x_at(&self, n: usize) -> &PositionVector;
    fn v_at(&self, n: usize) -> &[PositionVector];
}

impl NodeSeries for Trajectory {
    fn tau(&self) -> f64 {
        self.config.tau
    }
    fn node_count(&self) -> usize {
        self.states.len()
    }
    fn x_at(&self, n: usize) -> &PositionVector {
        &self.states[n].x
    }
    fn v_at(&self, n: usize) -> &[PositionVector] {
        self.states[n].frame.vectors()
    }
}

impl NodeSeries for ExtrapolatedTrajectory {
    fn tau(&self) -> f64 {
        self.source_taus.0
    }
    fn node_count(&self) -> usize {
        self.states.len()
    }
    fn x_at(&self, n: usize) -> &PositionVector {
        &self.states[n].x
    }
    fn v_at(&self, n: usize) -> &[PositionVector] {
        &self.states[n].v
    }
}

/// Maximum position and direction errors over nodes `1..=K`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorSummary {
    /// `max_n |x(t_n) - x_n|`.
    pub max_ex: f64,
    /// `max_n sum_i |v_i(t_n) - v_{i,n}|`.
    pub max_ev: f64,
    /// `(n, i)` pairs where the reference and computed direction point into
    /// opposite half-spaces. Reported, never corrected.
    pub flips: Vec<(usize, usize)>,
}

/// Compares `traj` with `reference` at the coarse nodes of `traj`.
pub fn error_norms<A, B>(traj: &A, reference: &B) -> Result<ErrorSummary>
where
    A: NodeSeries + ?Sized,
    B: NodeSeries + ?Sized,
{
    let ratio = traj.tau() / reference.tau();
    let stride = ratio.round();
    if !(stride >= 1.0) || (ratio - stride).abs() > 1e-9 * stride {
        return Err(SsdError::input(format!(
            "reference tau {:e} does not divide tau {:e}",
            reference.tau(),
            traj.tau()
        )));
    }
    let stride = stride as usize;
    let nodes = traj.node_count();
    if (nodes - 1) * stride != reference.node_count() - 1 {
        return Err(SsdError::input(format!(
            "time grids do not cover the same interval: {} nodes at stride {stride} vs {} reference nodes",
            nodes,
            reference.node_count()
        )));
    }
    if traj.x_at(0) != reference.x_at(0) || traj.v_at(0).len() != reference.v_at(0).len() {
        return Err(SsdError::input(
            "solution and reference start from different states",
        ));
    }
    let mut summary = ErrorSummary {
        max_ex: 0.0,
        max_ev: 0.0,
        flips: Vec::new(),
    };
    for n in 1..nodes {
        let m = n * stride;
        summary.max_ex = summary
            .max_ex
            .max((reference.x_at(m) - traj.x_at(n)).norm());
        let mut ev = 0.0;
        for (i, (vr, v)) in reference.v_at(m).iter().zip(traj.v_at(n)).enumerate() {
            ev += (vr - v).norm();
            if vr.dot(v) < 0.0 {
                summary.flips.push((n, i));
            }
        }
        summary.max_ev = summary.max_ev.max(ev);
    }
    Ok(summary)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    /// The first-order explicit scheme.
    Euler,
    /// Richardson extrapolation of the `tau` and `tau / 2` runs.
    Richardson,
}

impl Scheme {
    /// Acceptance window for every reported convergence rate.
    pub fn rate_window(&self) -> RateWindow {
        match self {
            Scheme::Euler => RateWindow { lo: 0.90, hi: 1.15 },
            Scheme::Richardson => RateWindow { lo: 1.85, hi: 2.15 },
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scheme::Euler => "euler",
            Scheme::Richardson => "richardson",
        })
    }
}

impl FromStr for Scheme {
    type Err = SsdError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "euler" => Ok(Scheme::Euler),
            "richardson" => Ok(Scheme::Richardson),
            _ => Err(SsdError::input(format!(
                "unknown scheme `{s}` (euler|richardson)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProbeQuantity {
    /// Largest pre-orthonormalization overlap between distinct directions.
    Cross,
    /// Largest `| |raw_i|^2 - 1 |`.
    NormDefect,
    /// Largest Gram-Schmidt correction `|v_i - raw_i|`.
    GsCorrection,
}

impl fmt::Display for ProbeQuantity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ProbeQuantity::Cross => "cross",
            ProbeQuantity::NormDefect => "norm_defect",
            ProbeQuantity::GsCorrection => "gs_correction",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingProbeResult {
    pub quantity: ProbeQuantity,
    pub taus: Vec<f64>,
    pub maxima: Vec<f64>,
    /// Least-squares slope of `log2(maxima)` against `log2(taus)`.
    pub slope: f64,
}

/// Least-squares slope of `log2(y)` against `log2(x)`.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.log2()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.log2()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

/// `log2(prev / curr)`, blank when either error is at roundoff level.
pub fn convergence_rate(prev: f64, curr: f64) -> Option<f64> {
    if prev > ROUNDOFF_FLOOR && curr > ROUNDOFF_FLOOR {
        Some((prev / curr).log2())
    } else {
        None
    }
}

fn is_power_of_two_ratio(big: f64, small: f64) -> bool {
    let r = big / small;
    r >= 1.0 && r.fract() == 0.0 && (r as u64).is_power_of_two()
}

/// Checks that `taus` halve exactly from row to row and that `ref_tau`
/// divides each of them by a power of two, being strictly finer than all.
pub fn validate_ladder(taus: &[f64], ref_tau: f64) -> Result<()> {
    if taus.is_empty() {
        return Err(SsdError::input("the tau ladder is empty"));
    }
    if !(ref_tau > 0.0) || !ref_tau.is_finite() {
        return Err(SsdError::input(format!(
            "ref_tau must be positive, got {ref_tau}"
        )));
    }
    for pair in taus.windows(2) {
        if pair[1] * 2.0 != pair[0] {
            return Err(SsdError::input(format!(
                "ladder must halve exactly from row to row: {:e} -> {:e}",
                pair[0], pair[1]
            )));
        }
    }
    for &tau in taus {
        if !(tau > ref_tau) {
            return Err(SsdError::input(format!(
                "ref_tau {ref_tau:e} must be finer than every ladder entry, got tau {tau:e}"
            )));
        }
        if !is_power_of_two_ratio(tau, ref_tau) {
            return Err(SsdError::input(format!(
                "tau {tau:e} is not a power-of-two multiple of ref_tau {ref_tau:e}"
            )));
        }
    }
    Ok(())
}

/// Runs integrations, optionally caching references, over an execution policy.
#[derive(Debug, Clone, Default)]
pub struct Harness {
    pub cache: ReferenceCache,
    pub execution: Execution,
}

impl Harness {
    pub fn new(cache: ReferenceCache, execution: Execution) -> Self {
        Harness { cache, execution }
    }

    /// Harness configured from `$SADDLE_CACHE_DIR` with the default execution.
    pub fn from_env() -> Self {
        Harness::new(ReferenceCache::from_env(), Execution::default())
    }

    /// One integration at `ref_tau` (with the config's `l0` rule applied to
    /// `ref_tau`), served from the cache when possible.
    pub fn run_reference(
        &self,
        problem: &Problem,
        ic: &InitialCondition,
        config_base: &SaddleConfig,
        ref_tau: f64,
    ) -> Result<Trajectory> {
        let config = config_base.with_tau(ref_tau);
        let path = self.cache.path_for(problem, ic, &config);
        if let Some(path) = &path {
            if let Some(hit) = self.cache.load(path) {
                log::debug!("reference cache hit: {}", path.display());
                return Ok(hit);
            }
        }
        let traj = integrate(problem, ic, &config)?;
        if let Some(path) = &path {
            if let Err(e) = self.cache.store(path, &traj) {
                log::warn!("could not write reference cache {}: {e}", path.display());
            }
        }
        Ok(traj)
    }

    fn extrapolated(
        &self,
        problem: &Problem,
        ic: &InitialCondition,
        config_base: &SaddleConfig,
        tau: f64,
        reference: bool,
    ) -> Result<ExtrapolatedTrajectory> {
        let run = |t: f64| {
            if reference {
                self.run_reference(problem, ic, config_base, t)
            } else {
                integrate(problem, ic, &config_base.with_tau(t))
            }
        };
        let (coarse, fine) = join(self.execution, || run(tau), || run(tau / 2.0));
        richardson_combine(&coarse?, &fine?)
    }

    /// Error table over a dyadic ladder. For [`Scheme::Richardson`] the
    /// reference is itself the extrapolation of the `ref_tau` and
    /// `ref_tau / 2` runs.
    pub fn convergence_ladder(
        &self,
        problem: &Problem,
        ic: &InitialCondition,
        config_base: &SaddleConfig,
        taus: &[f64],
        ref_tau: f64,
        scheme: Scheme,
    ) -> Result<ConvergenceReport> {
        validate_ladder(taus, ref_tau)?;
        for &tau in taus {
            config_base
                .with_tau(tau)
                .validate()
                .map_err(|e| e.at_tau(tau))?;
        }

        let summaries: Vec<Result<ErrorSummary>> = match scheme {
            Scheme::Euler => {
                let reference = self
                    .run_reference(problem, ic, config_base, ref_tau)
                    .map_err(|e| e.at_tau(ref_tau))?;
                map_ordered(self.execution, taus, |&tau| {
                    integrate(problem, ic, &config_base.with_tau(tau))
                        .and_then(|t| error_norms(&t, &reference))
                        .map_err(|e| e.at_tau(tau))
                })
            }
            Scheme::Richardson => {
                let reference = self
                    .extrapolated(problem, ic, config_base, ref_tau, true)
                    .map_err(|e| e.at_tau(ref_tau))?;
                map_ordered(self.execution, taus, |&tau| {
                    self.extrapolated(problem, ic, config_base, tau, false)
                        .and_then(|t| error_norms(&t, &reference))
                        .map_err(|e| e.at_tau(tau))
                })
            }
        };
        let summaries = summaries.into_iter().collect::<Result<Vec<_>>>()?;

        let mut warnings = Vec::new();
        let mut rows: Vec<ConvergenceRow> = Vec::with_capacity(taus.len());
        for (&tau, s) in taus.iter().zip(&summaries) {
            if let Some(&(n, i)) = s.flips.first() {
                let msg = format!(
                    "tau {tau:e}: direction {i} points against the reference at node {n} ({} flips)",
                    s.flips.len()
                );
                log::warn!("{msg}");
                warnings.push(msg);
            }
            let (cr_x, cr_v) = match rows.last() {
                Some(prev) => (
                    convergence_rate(prev.max_ex, s.max_ex),
                    convergence_rate(prev.max_ev, s.max_ev),
                ),
                None => (None, None),
            };
            rows.push(ConvergenceRow {
                inv_tau: (1.0 / tau).round() as u64,
                tau,
                max_ex: s.max_ex,
                cr_x,
                max_ev: s.max_ev,
                cr_v,
            });
        }
        Ok(ConvergenceReport {
            problem: problem.name().to_string(),
            k: config_base.k,
            mode: config_base.mode,
            scheme,
            x0: ic.x0.iter().copied().collect(),
            v0: ic
                .frame0
                .vectors()
                .iter()
                .map(|v| v.iter().copied().collect())
                .collect(),
            config: *config_base,
            taus: taus.to_vec(),
            ref_tau,
            rows,
            warnings,
            build: report::build_version().to_string(),
        })
    }

    /// Integrates once per `tau`, records the largest chosen diagnostic and
    /// fits its log-log slope against `tau`.
    pub fn scaling_probe(
        &self,
        problem: &Problem,
        ic: &InitialCondition,
        config_base: &SaddleConfig,
        taus: &[f64],
        quantity: ProbeQuantity,
    ) -> Result<ScalingProbeResult> {
        if taus.len() < 3 {
            return Err(SsdError::input(format!(
                "a scaling probe needs at least 3 step sizes, got {}",
                taus.len()
            )));
        }
        if quantity == ProbeQuantity::Cross && config_base.k < 2 {
            return Err(SsdError::input(
                "the cross-term probe needs k >= 2 (there are no direction pairs for k = 1)",
            ));
        }
        let maxima = map_ordered(self.execution, taus, |&tau| {
            let traj =
                integrate(problem, ic, &config_base.with_tau(tau)).map_err(|e| e.at_tau(tau))?;
            let d = traj.max_diagnostics();
            Ok(match quantity {
                ProbeQuantity::Cross => d.max_cross,
                ProbeQuantity::NormDefect => d.max_norm_defect,
                ProbeQuantity::GsCorrection => d.max_gs_correction,
            })
        })
        .into_iter()
        .collect::<Result<Vec<f64>>>()?;
        if let Some(bad) = maxima.iter().find(|m| !(**m > 0.0) || !m.is_finite()) {
            return Err(SsdError::input(format!(
                "{quantity} maximum {bad:e} cannot be fitted on a log scale"
            )));
        }
        Ok(ScalingProbeResult {
            quantity,
            taus: taus.to_vec(),
            slope: loglog_slope(taus, &maxima),
            maxima,
        })
    }
}
