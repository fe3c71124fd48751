//! Explicit Euler steppers for shrinking-dimer saddle dynamics and trajectory
//! integration.
//!
//! One step maps `(x, v_1..v_k, l)` at `t_{n-1}` to `t_n`:
//!
//! ```text
//! x_n      = x_{n-1} + tau beta (I - 2 sum_j v_j v_j^T) F(x_{n-1})
//! raw_i    = v_i + tau gamma P_i(frame, H(x_{n-1}, v_j, l_{n-1}))
//! frame_n  = GS(raw_1..raw_k)
//! l_n      = e^{-t_n} l0
//! ```
//!
//! where `P_i` is the stable projector for gradient systems and the
//! symmetrized projector for non-gradient ones. All raw directions are built
//! from the old frame.

use serde::{Deserialize, Serialize};

use crate::algebra::{
    dimer_hessian_apply, gram_schmidt, householder_apply, stable_projector_apply,
    symmetrized_projector_apply, DimerLength, ForceField, OrthonormalFrame, PositionVector,
    RawFrame, DEGENERACY_TOL,
};
use crate::error::{Result, SsdError};
use crate::problems::{InitialCondition, Problem, ProblemKind};

/// Norm of `x` above which integration aborts with [`SsdError::Divergence`].
pub const DIVERGENCE_BOUND: f64 = 1e8;

/// How the initial dimer length is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitialDimerLength {
    /// `l0 = sqrt(tau)`; keeps the dimer error at the order of the time step.
    SqrtTau,
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SaddleConfig {
    /// Saddle index (number of unstable directions).
    pub k: usize,
    pub beta: f64,
    pub gamma: f64,
    pub t_final: f64,
    pub tau: f64,
    pub l0: InitialDimerLength,
    pub mode: ProblemKind,
}

impl SaddleConfig {
    /// `beta = gamma = T = 1`, `l0 = sqrt(tau)`.
    pub fn new(k: usize, tau: f64, mode: ProblemKind) -> Self {
        SaddleConfig {
            k,
            beta: 1.0,
            gamma: 1.0,
            t_final: 1.0,
            tau,
            l0: InitialDimerLength::SqrtTau,
            mode,
        }
    }

    pub fn with_tau(&self, tau: f64) -> Self {
        SaddleConfig { tau, ..*self }
    }

    pub fn initial_dimer_length(&self) -> f64 {
        match self.l0 {
            InitialDimerLength::SqrtTau => self.tau.sqrt(),
            InitialDimerLength::Fixed(l0) => l0,
        }
    }

    /// Number of steps `K = T / tau`, which must be a positive integer.
    pub fn steps(&self) -> Result<usize> {
        if !(self.tau > 0.0) || !self.tau.is_finite() {
            return Err(SsdError::input(format!(
                "tau must be positive, got {}",
                self.tau
            )));
        }
        if !(self.t_final > 0.0) || !self.t_final.is_finite() {
            return Err(SsdError::input(format!(
                "T must be positive, got {}",
                self.t_final
            )));
        }
        let ratio = self.t_final / self.tau;
        let steps = ratio.round();
        if steps < 1.0 || (ratio - steps).abs() > 1e-9 * steps {
            return Err(SsdError::input(format!(
                "T / tau = {ratio} is not a positive integer"
            )));
        }
        Ok(steps as usize)
    }

    pub fn validate(&self) -> Result<usize> {
        if self.k == 0 {
            return Err(SsdError::input("saddle index k must be >= 1"));
        }
        for (name, val) in [("beta", self.beta), ("gamma", self.gamma)] {
            if !(val > 0.0) || !val.is_finite() {
                return Err(SsdError::input(format!(
                    "{name} must be positive, got {val}"
                )));
            }
        }
        let l0 = self.initial_dimer_length();
        if !(l0 > 0.0) || !l0.is_finite() {
            return Err(SsdError::input(format!("l0 must be positive, got {l0}")));
        }
        self.steps()
    }
}

/// Full dynamical state at one time node.
#[derive(Debug, Clone, PartialEq)]
pub struct SaddleState {
    pub n: usize,
    pub t: f64,
    pub x: PositionVector,
    pub frame: OrthonormalFrame,
    pub l: DimerLength,
}

impl SaddleState {
    pub fn initial(ic: &InitialCondition, l0: f64) -> Result<Self> {
        Ok(SaddleState {
            n: 0,
            t: 0.0,
            x: ic.x0.clone(),
            frame: ic.frame0.clone(),
            l: DimerLength::at(0.0, l0)?,
        })
    }
}

/// Per-step measurements on the directions before orthonormalization.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct StepDiagnostics {
    /// `max_{m<i} |raw_m . raw_i|`; zero for `k = 1`.
    pub max_cross: f64,
    /// `max_i | |raw_i|^2 - 1 |`.
    pub max_norm_defect: f64,
    /// `max_i |v_i - raw_i|`.
    pub max_gs_correction: f64,
    /// `|F(x_{n-1})|`, the residual at the start of the step.
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub config: SaddleConfig,
    /// States for `n = 0..=K`.
    pub states: Vec<SaddleState>,
    /// Diagnostics for `n = 1..=K` (`diagnostics[n - 1]` belongs to step `n`).
    pub diagnostics: Vec<StepDiagnostics>,
}

impl Trajectory {
    pub fn initial_state(&self) -> &SaddleState {
        &self.states[0]
    }

    pub fn final_state(&self) -> &SaddleState {
        self.states
            .last()
            .expect("trajectory always holds the initial state")
    }

    /// Largest diagnostics over all steps, field by field.
    pub fn max_diagnostics(&self) -> StepDiagnostics {
        self.diagnostics
            .iter()
            .fold(StepDiagnostics::default(), |acc, d| StepDiagnostics {
                max_cross: acc.max_cross.max(d.max_cross),
                max_norm_defect: acc.max_norm_defect.max(d.max_norm_defect),
                max_gs_correction: acc.max_gs_correction.max(d.max_gs_correction),
                residual: acc.residual.max(d.residual),
            })
    }
}

#[derive(Clone, Copy, PartialEq)]
enum Projector {
    Stable,
    Symmetrized,
}

fn raw_diagnostics(raw: &[PositionVector]) -> (f64, f64) {
    let mut cross = 0.0_f64;
    let mut defect = 0.0_f64;
    for (i, vi) in raw.iter().enumerate() {
        defect = defect.max((vi.norm_squared() - 1.0).abs());
        for vm in &raw[..i] {
            cross = cross.max(vm.dot(vi).abs());
        }
    }
    (cross, defect)
}

fn advance(
    problem: &Problem,
    state: &SaddleState,
    config: &SaddleConfig,
    projector: Projector,
) -> Result<(SaddleState, StepDiagnostics)> {
    let n_dim = problem.dimension();
    if state.x.len() != n_dim || state.frame.dim() != n_dim {
        return Err(SsdError::DimensionMismatch {
            expected: n_dim,
            got: state.x.len(),
        });
    }
    if state.frame.k() != config.k {
        return Err(SsdError::input(format!(
            "state carries {} directions but config.k = {}",
            state.frame.k(),
            config.k
        )));
    }
    let tau = config.tau;
    let f = problem.force(&state.x);
    if f.iter().any(|c| !c.is_finite()) {
        return Err(SsdError::NonFinite(format!("F({:?})", state.x.as_slice())));
    }
    let residual = f.norm();
    let x = &state.x + householder_apply(&state.frame, &f)? * (tau * config.beta);

    let l = state.l.value();
    let vs = state.frame.vectors();
    // two force calls per direction, shared by every projector row
    let hs = vs
        .iter()
        .map(|v| dimer_hessian_apply(problem, &state.x, v, l))
        .collect::<Result<Vec<_>>>()?;
    let raw = (0..config.k)
        .map(|i| {
            let d = match projector {
                Projector::Stable => stable_projector_apply(&state.frame, i, &hs[i])?,
                Projector::Symmetrized => symmetrized_projector_apply(&state.frame, i, &hs)?,
            };
            Ok(&vs[i] + d * (tau * config.gamma))
        })
        .collect::<Result<Vec<_>>>()?;

    let (max_cross, max_norm_defect) = raw_diagnostics(&raw);
    let (frame, corrections) = gram_schmidt(&RawFrame::new(raw)?, DEGENERACY_TOL)?;
    let max_gs_correction = corrections.iter().copied().fold(0.0, f64::max);

    let n = state.n + 1;
    let x_norm = x.norm();
    if !(x_norm <= DIVERGENCE_BOUND) {
        return Err(SsdError::Divergence {
            step: n,
            norm: x_norm,
        });
    }
    let t = n as f64 * tau;
    let next = SaddleState {
        n,
        t,
        x,
        frame,
        l: DimerLength::at(t, state.l.initial())?,
    };
    Ok((
        next,
        StepDiagnostics {
            max_cross,
            max_norm_defect,
            max_gs_correction,
            residual,
        },
    ))
}

/// One explicit step of the gradient scheme (stable projector).
pub fn step_gradient(
    problem: &Problem,
    state: &SaddleState,
    config: &SaddleConfig,
) -> Result<(SaddleState, StepDiagnostics)> {
    if problem.kind() != ProblemKind::Gradient {
        return Err(SsdError::input(format!(
            "`{}` is a non-gradient problem; the gradient scheme needs a symmetric Jacobian",
            problem.name()
        )));
    }
    advance(problem, state, config, Projector::Stable).map_err(|e| e.at_step(state.n + 1))
}

/// One explicit step of the generalized (symmetrized) scheme. Also accepted
/// for gradient problems, where it agrees with the gradient scheme up to the
/// dimer error.
pub fn step_nongradient(
    problem: &Problem,
    state: &SaddleState,
    config: &SaddleConfig,
) -> Result<(SaddleState, StepDiagnostics)> {
    advance(problem, state, config, Projector::Symmetrized).map_err(|e| e.at_step(state.n + 1))
}

/// Dispatches on `config.mode`.
pub fn step(
    problem: &Problem,
    state: &SaddleState,
    config: &SaddleConfig,
) -> Result<(SaddleState, StepDiagnostics)> {
    match config.mode {
        ProblemKind::Gradient => step_gradient(problem, state, config),
        ProblemKind::NonGradient => step_nongradient(problem, state, config),
    }
}

/// Integrates `K = T / tau` steps from `ic`.
pub fn integrate(
    problem: &Problem,
    ic: &InitialCondition,
    config: &SaddleConfig,
) -> Result<Trajectory> {
    let steps = config.validate()?;
    if ic.k() != config.k {
        return Err(SsdError::input(format!(
            "initial frame has {} directions but k = {}",
            ic.k(),
            config.k
        )));
    }
    if ic.x0.len() != problem.dimension() {
        return Err(SsdError::DimensionMismatch {
            expected: problem.dimension(),
            got: ic.x0.len(),
        });
    }
    if config.mode == ProblemKind::Gradient && problem.kind() != ProblemKind::Gradient {
        return Err(SsdError::input(format!(
            "`{}` is a non-gradient problem; use the non-gradient mode",
            problem.name()
        )));
    }
    let mut states = Vec::with_capacity(steps + 1);
    let mut diagnostics = Vec::with_capacity(steps);
    states.push(SaddleState::initial(ic, config.initial_dimer_length())?);
    for _ in 0..steps {
        let (next, diag) = step(problem, states.last().unwrap(), config)?;
        states.push(next);
        diagnostics.push(diag);
    }
    log::debug!(
        "integrated `{}` k={} tau={:e}: final residual {:e}",
        problem.name(),
        config.k,
        config.tau,
        saddle_residual(problem, states.last().unwrap())
    );
    Ok(Trajectory {
        config: *config,
        states,
        diagnostics,
    })
}

/// `|F(x)|`.
pub fn saddle_residual(problem: &Problem, state: &SaddleState) -> f64 {
    problem.force(&state.x).norm()
}
