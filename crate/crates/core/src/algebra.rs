//! Frame algebra shared by every stepper: the Householder reflection of the
//! force, the projectors driving the direction dynamics, modified Gram-Schmidt,
//! the central-difference dimer Hessian and the analytic dimer-length decay.
//!
//! Direction indices are zero-based throughout: `i = 0` is the first
//! (most unstable) direction.

use nalgebra::DVector;

use crate::error::{Result, SsdError};

/// A point (or any vector) in `R^N`.
pub type PositionVector = DVector<f64>;

/// Tolerance used when checking that a frame is orthonormal.
pub const DEFAULT_ORTHO_TOL: f64 = 1e-10;

/// Relative tolerance below which Gram-Schmidt declares a direction degenerate.
/// The absolute threshold is `DEGENERACY_TOL * max(1, |raw_i|)`.
pub const DEGENERACY_TOL: f64 = 1e-12;

/// Anything that can evaluate a force (vector field) on `R^N`.
pub trait ForceField {
    fn dimension(&self) -> usize;
    fn force(&self, x: &PositionVector) -> PositionVector;
}

/// Ordered orthonormal directions `v_1..v_k` spanning the unstable subspace.
#[derive(Debug, Clone, PartialEq)]
pub struct OrthonormalFrame {
    vectors: Vec<PositionVector>,
    ortho_tol: f64,
}

/// Directions before orthonormalization, as produced by one explicit step.
#[derive(Debug, Clone, PartialEq)]
pub struct RawFrame {
    vectors: Vec<PositionVector>,
}

/// Dimer half-length `l` together with the initial value it decays from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DimerLength {
    l: f64,
    l0: f64,
}

fn check_finite(v: &PositionVector, what: &str) -> Result<()> {
    if v.iter().all(|c| c.is_finite()) {
        Ok(())
    } else {
        Err(SsdError::input(format!("{what} has non-finite entries")))
    }
}

fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(SsdError::DimensionMismatch { expected, got })
    }
}

impl RawFrame {
    pub fn new(vectors: Vec<PositionVector>) -> Result<Self> {
        let first = vectors
            .first()
            .ok_or_else(|| SsdError::input("a frame needs at least one direction"))?;
        let n = first.len();
        if n == 0 {
            return Err(SsdError::input("directions must have dimension >= 1"));
        }
        for v in &vectors {
            check_dim(n, v.len())?;
            check_finite(v, "direction")?;
        }
        if vectors.len() > n {
            return Err(SsdError::input(format!(
                "{} directions cannot be independent in R^{n}",
                vectors.len()
            )));
        }
        Ok(RawFrame { vectors })
    }

    pub fn vectors(&self) -> &[PositionVector] {
        &self.vectors
    }

    pub fn k(&self) -> usize {
        self.vectors.len()
    }

    pub fn dim(&self) -> usize {
        self.vectors[0].len()
    }
}

impl OrthonormalFrame {
    /// Wraps vectors that are already orthonormal within `ortho_tol`.
    pub fn new(vectors: Vec<PositionVector>, ortho_tol: f64) -> Result<Self> {
        let raw = RawFrame::new(vectors)?;
        let frame = OrthonormalFrame {
            vectors: raw.vectors,
            ortho_tol,
        };
        let defect = frame.orthonormality_defect();
        if defect > ortho_tol {
            return Err(SsdError::input(format!(
                "frame is not orthonormal: max |v_i.v_j - delta_ij| = {defect:e} > {ortho_tol:e}"
            )));
        }
        Ok(frame)
    }

    /// Orthonormalizes arbitrary directions. Returns the frame and the
    /// per-direction correction norms `|v_i - raw_i|`.
    pub fn orthonormalize(vectors: Vec<PositionVector>) -> Result<(Self, Vec<f64>)> {
        gram_schmidt(&RawFrame::new(vectors)?, DEGENERACY_TOL)
    }

    /// The first `k` standard basis vectors of `R^n`.
    pub fn standard(n: usize, k: usize) -> Result<Self> {
        if k == 0 || k > n {
            return Err(SsdError::input(format!(
                "need 1 <= k <= n, got k={k}, n={n}"
            )));
        }
        let vectors = (0..k)
            .map(|i| PositionVector::from_fn(n, |r, _| if r == i { 1.0 } else { 0.0 }))
            .collect();
        Ok(OrthonormalFrame {
            vectors,
            ortho_tol: DEFAULT_ORTHO_TOL,
        })
    }

    pub fn vectors(&self) -> &[PositionVector] {
        &self.vectors
    }

    pub fn k(&self) -> usize {
        self.vectors.len()
    }

    pub fn dim(&self) -> usize {
        self.vectors[0].len()
    }

    pub fn ortho_tol(&self) -> f64 {
        self.ortho_tol
    }

    /// `max_ij |v_i . v_j - delta_ij|`.
    pub fn orthonormality_defect(&self) -> f64 {
        let mut worst = 0.0_f64;
        for (i, vi) in self.vectors.iter().enumerate() {
            for vj in &self.vectors[i..] {
                let target = if std::ptr::eq(vi, vj) { 1.0 } else { 0.0 };
                worst = worst.max((vi.dot(vj) - target).abs());
            }
        }
        worst
    }
}

impl DimerLength {
    /// The dimer length at time `t` for initial length `l0`.
    pub fn at(t: f64, l0: f64) -> Result<Self> {
        Ok(DimerLength {
            l: dimer_length_at(t, l0)?,
            l0,
        })
    }

    pub fn value(&self) -> f64 {
        self.l
    }

    pub fn initial(&self) -> f64 {
        self.l0
    }
}

/// `(I - 2 sum_j v_j v_j^T) f`.
pub fn householder_apply(frame: &OrthonormalFrame, f: &PositionVector) -> Result<PositionVector> {
    check_dim(frame.dim(), f.len())?;
    let mut out = f.clone();
    for v in frame.vectors() {
        out.axpy(-2.0 * v.dot(f), v, 1.0);
    }
    Ok(out)
}

/// `(I - v_i v_i^T - 2 sum_{j<i} v_j v_j^T) h`, the direction update of the
/// gradient scheme.
pub fn stable_projector_apply(
    frame: &OrthonormalFrame,
    i: usize,
    h: &PositionVector,
) -> Result<PositionVector> {
    check_dim(frame.dim(), h.len())?;
    if i >= frame.k() {
        return Err(SsdError::input(format!(
            "direction index {i} out of range for a frame of {} directions",
            frame.k()
        )));
    }
    let vs = frame.vectors();
    let mut out = h.clone();
    out.axpy(-vs[i].dot(h), &vs[i], 1.0);
    for v in &vs[..i] {
        out.axpy(-2.0 * v.dot(h), v, 1.0);
    }
    Ok(out)
}

/// `(I - v_i v_i^T) h_i - sum_{j<i} v_j (v_j^T h_i + v_i^T h_j)`, the direction
/// update for non-gradient systems. `h_list[j]` must hold the dimer value for
/// direction `j`, for every `j <= i`.
pub fn symmetrized_projector_apply(
    frame: &OrthonormalFrame,
    i: usize,
    h_list: &[PositionVector],
) -> Result<PositionVector> {
    if i >= frame.k() {
        return Err(SsdError::input(format!(
            "direction index {i} out of range for a frame of {} directions",
            frame.k()
        )));
    }
    if h_list.len() <= i {
        return Err(SsdError::input(format!(
            "need {} dimer values for direction {i}, got {}",
            i + 1,
            h_list.len()
        )));
    }
    for h in &h_list[..=i] {
        check_dim(frame.dim(), h.len())?;
    }
    let vs = frame.vectors();
    let hi = &h_list[i];
    let mut out = hi.clone();
    out.axpy(-vs[i].dot(hi), &vs[i], 1.0);
    for (vj, hj) in vs[..i].iter().zip(&h_list[..i]) {
        out.axpy(-(vj.dot(hi) + vs[i].dot(hj)), vj, 1.0);
    }
    Ok(out)
}

/// Modified Gram-Schmidt: each raw direction is projected, one finalized
/// direction at a time, against the directions already produced and then
/// normalized.
///
/// A direction whose residual norm falls below `rel_tol * max(1, |raw_i|)`
/// yields [`SsdError::DegenerateFrame`].
pub fn gram_schmidt(raw: &RawFrame, rel_tol: f64) -> Result<(OrthonormalFrame, Vec<f64>)> {
    let mut out: Vec<PositionVector> = Vec::with_capacity(raw.k());
    let mut corrections = Vec::with_capacity(raw.k());
    for (index, r) in raw.vectors().iter().enumerate() {
        let mut w = r.clone();
        // Two sweeps keep the output orthonormal to roundoff even when the
        // first sweep cancels heavily.
        for _ in 0..2 {
            for u in &out {
                let c = u.dot(&w);
                w.axpy(-c, u, 1.0);
            }
        }
        let norm = w.norm();
        if !(norm >= rel_tol * r.norm().max(1.0)) {
            return Err(SsdError::DegenerateFrame { index, norm });
        }
        w /= norm;
        corrections.push((&w - r).norm());
        out.push(w);
    }
    Ok((
        OrthonormalFrame {
            vectors: out,
            ortho_tol: DEFAULT_ORTHO_TOL,
        },
        corrections,
    ))
}

/// Central-difference dimer approximation of the Hessian (Jacobian) action:
/// `(F(x + l v) - F(x - l v)) / (2 l)`.
pub fn dimer_hessian_apply<F: ForceField + ?Sized>(
    field: &F,
    x: &PositionVector,
    v: &PositionVector,
    l: f64,
) -> Result<PositionVector> {
    if !(l > 0.0) || !l.is_finite() {
        return Err(SsdError::input(format!(
            "dimer length must be positive, got {l}"
        )));
    }
    let n = field.dimension();
    check_dim(n, x.len())?;
    check_dim(n, v.len())?;
    if (v.norm() - 1.0).abs() > DEFAULT_ORTHO_TOL {
        return Err(SsdError::input(format!(
            "dimer direction must be a unit vector, |v| = {}",
            v.norm()
        )));
    }
    let plus = field.force(&(x + v * l));
    let minus = field.force(&(x - v * l));
    let h = (plus - minus) / (2.0 * l);
    if h.iter().any(|c| !c.is_finite()) {
        return Err(SsdError::NonFinite(format!(
            "dimer around {:?}",
            x.as_slice()
        )));
    }
    Ok(h)
}

/// `e^{-t} l0`.
pub fn dimer_length_at(t: f64, l0: f64) -> Result<f64> {
    if !(t >= 0.0) || !t.is_finite() {
        return Err(SsdError::input(format!("time must be >= 0, got {t}")));
    }
    if !(l0 > 0.0) || !l0.is_finite() {
        return Err(SsdError::input(format!(
            "initial dimer length must be positive, got {l0}"
        )));
    }
    Ok((-t).exp() * l0)
}
