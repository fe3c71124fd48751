//! Force fields: the `Problem` record, the built-in test systems and a
//! name-keyed registry.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::algebra::{ForceField, OrthonormalFrame, PositionVector};
use crate::error::{Result, SsdError};

type VectorMap = Arc<dyn Fn(&PositionVector) -> PositionVector + Send + Sync>;
type ScalarMap = Arc<dyn Fn(&PositionVector) -> f64 + Send + Sync>;
type HvpMap = Arc<dyn Fn(&PositionVector, &PositionVector) -> PositionVector + Send + Sync>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProblemKind {
    /// `F = -grad E` for some energy `E`; symmetric Jacobian.
    Gradient,
    /// General vector field; the Jacobian may be asymmetric.
    NonGradient,
}

impl fmt::Display for ProblemKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ProblemKind::Gradient => "gradient",
            ProblemKind::NonGradient => "non-gradient",
        })
    }
}

/// A force-field definition. Cheap to clone; all maps are shared.
#[derive(Clone)]
pub struct Problem {
    name: String,
    dimension: usize,
    kind: ProblemKind,
    force: VectorMap,
    energy: Option<ScalarMap>,
    exact_hvp: Option<HvpMap>,
    initial_conditions: BTreeMap<usize, InitialCondition>,
}

impl fmt::Debug for Problem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Problem")
            .field("name", &self.name)
            .field("dimension", &self.dimension)
            .field("kind", &self.kind)
            .field("energy", &self.energy.is_some())
            .field("exact_hvp", &self.exact_hvp.is_some())
            .finish()
    }
}

/// Starting point and starting frame of a saddle search.
#[derive(Debug, Clone, PartialEq)]
pub struct InitialCondition {
    pub x0: PositionVector,
    pub frame0: OrthonormalFrame,
}

impl InitialCondition {
    pub fn new(x0: PositionVector, frame0: OrthonormalFrame) -> Result<Self> {
        if x0.len() != frame0.dim() {
            return Err(SsdError::DimensionMismatch {
                expected: frame0.dim(),
                got: x0.len(),
            });
        }
        if x0.iter().any(|c| !c.is_finite()) {
            return Err(SsdError::input("x0 has non-finite entries"));
        }
        if frame0.orthonormality_defect() > 1e-12 {
            return Err(SsdError::input(
                "initial frame must be orthonormal within 1e-12",
            ));
        }
        Ok(InitialCondition { x0, frame0 })
    }

    /// Builds from raw slices, orthonormalizing the directions.
    /// Also returns the largest Gram-Schmidt correction applied.
    pub fn from_slices(x0: &[f64], v0: &[Vec<f64>]) -> Result<(Self, f64)> {
        let vectors = v0
            .iter()
            .map(|v| PositionVector::from_column_slice(v))
            .collect();
        let (frame, corrections) = OrthonormalFrame::orthonormalize(vectors)?;
        let worst = corrections.iter().copied().fold(0.0, f64::max);
        let ic = InitialCondition::new(PositionVector::from_column_slice(x0), frame)?;
        Ok((ic, worst))
    }

    pub fn k(&self) -> usize {
        self.frame0.k()
    }
}

impl Problem {
    pub fn new(
        name: impl Into<String>,
        dimension: usize,
        kind: ProblemKind,
        force: impl Fn(&PositionVector) -> PositionVector + Send + Sync + 'static,
    ) -> Self {
        Problem {
            name: name.into(),
            dimension,
            kind,
            force: Arc::new(force),
            energy: None,
            exact_hvp: None,
            initial_conditions: BTreeMap::new(),
        }
    }

    /// Attaches the energy. Only meaningful for gradient problems.
    pub fn with_energy(
        mut self,
        e: impl Fn(&PositionVector) -> f64 + Send + Sync + 'static,
    ) -> Self {
        self.energy = Some(Arc::new(e));
        self
    }

    /// Attaches the exact Hessian (gradient) or Jacobian (non-gradient) action.
    pub fn with_exact_hvp(
        mut self,
        hvp: impl Fn(&PositionVector, &PositionVector) -> PositionVector + Send + Sync + 'static,
    ) -> Self {
        self.exact_hvp = Some(Arc::new(hvp));
        self
    }

    /// Registers the default initial condition used for index `ic.k()`.
    pub fn with_initial_condition(mut self, ic: InitialCondition) -> Self {
        self.initial_conditions.insert(ic.k(), ic);
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn kind(&self) -> ProblemKind {
        self.kind
    }

    pub fn energy(&self, x: &PositionVector) -> Option<f64> {
        self.energy.as_ref().map(|e| e(x))
    }

    pub fn has_energy(&self) -> bool {
        self.energy.is_some()
    }

    pub fn exact_hvp(&self, x: &PositionVector, v: &PositionVector) -> Option<PositionVector> {
        self.exact_hvp.as_ref().map(|h| h(x, v))
    }

    pub fn has_exact_hvp(&self) -> bool {
        self.exact_hvp.is_some()
    }

    /// The registered initial condition for index `k`, or `x0 = (1,..,1)`
    /// with the first `k` coordinate directions.
    pub fn default_initial_condition(&self, k: usize) -> Result<InitialCondition> {
        if let Some(ic) = self.initial_conditions.get(&k) {
            return Ok(ic.clone());
        }
        InitialCondition::new(
            PositionVector::from_element(self.dimension, 1.0),
            OrthonormalFrame::standard(self.dimension, k)?,
        )
    }
}

impl ForceField for Problem {
    fn dimension(&self) -> usize {
        self.dimension
    }

    fn force(&self, x: &PositionVector) -> PositionVector {
        (self.force)(x)
    }
}

fn pv(c: &[f64]) -> PositionVector {
    PositionVector::from_column_slice(c)
}

fn builtin_ic(x0: &[f64], v0: &[&[f64]]) -> InitialCondition {
    let v0: Vec<Vec<f64>> = v0.iter().map(|v| v.to_vec()).collect();
    InitialCondition::from_slices(x0, &v0)
        .expect("built-in initial data is valid")
        .0
}

/// `-grad E` for `E(x1, x2) = x1^2 + (x1 - 1) x2^2`.
pub fn stingray_force(x: &PositionVector) -> PositionVector {
    pv(&[-2.0 * x[0] - x[1] * x[1], -2.0 * (x[0] - 1.0) * x[1]])
}

pub fn stingray_energy(x: &PositionVector) -> f64 {
    x[0] * x[0] + (x[0] - 1.0) * x[1] * x[1]
}

/// `-(grad^2 E) v` for the stingray energy.
pub fn exact_hvp_stingray(x: &PositionVector, v: &PositionVector) -> PositionVector {
    pv(&[
        -(2.0 * v[0] + 2.0 * x[1] * v[1]),
        -(2.0 * x[1] * v[0] + 2.0 * (x[0] - 1.0) * v[1]),
    ])
}

/// The stingray gradient system, `N = 2`.
pub fn stingray() -> Problem {
    Problem::new("stingray", 2, ProblemKind::Gradient, stingray_force)
        .with_energy(stingray_energy)
        .with_exact_hvp(exact_hvp_stingray)
        .with_initial_condition(builtin_ic(&[1.0, 1.0], &[&[0.0, 1.0]]))
        .with_initial_condition(builtin_ic(&[1.0, 1.0], &[&[0.0, 1.0], &[1.0, 0.0]]))
}

const NG3_MATRIX: [[f64; 3]; 3] = [[1.0, 0.5, 0.0], [-0.5, 1.0, -0.3], [0.0, -0.2, 1.0]];
const NG3_CENTERS: [f64; 3] = [1.0, 2.0, -1.0];

/// `M x + g(x)` with `g_i = 1 / (1 + (x_i - c_i)^2)`, `c = (1, 2, -1)`.
pub fn nongradient3_force(x: &PositionVector) -> PositionVector {
    PositionVector::from_fn(3, |r, _| {
        let s = x[r] - NG3_CENTERS[r];
        let linear: f64 = (0..3).map(|c| NG3_MATRIX[r][c] * x[c]).sum();
        linear + 1.0 / (1.0 + s * s)
    })
}

/// Exact Jacobian action `(M + diag(g'(x))) v`.
pub fn exact_jvp_nongradient3(x: &PositionVector, v: &PositionVector) -> PositionVector {
    PositionVector::from_fn(3, |r, _| {
        let s = x[r] - NG3_CENTERS[r];
        let q = 1.0 + s * s;
        let linear: f64 = (0..3).map(|c| NG3_MATRIX[r][c] * v[c]).sum();
        linear - 2.0 * s / (q * q) * v[r]
    })
}

/// The three-dimensional non-gradient system.
pub fn nongradient3() -> Problem {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    Problem::new(
        "nongradient3",
        3,
        ProblemKind::NonGradient,
        nongradient3_force,
    )
    .with_exact_hvp(exact_jvp_nongradient3)
    .with_initial_condition(builtin_ic(&[-1.0, 1.0, 0.0], &[&[-1.0, 0.0, 0.0]]))
    .with_initial_condition(builtin_ic(
        &[-1.0, 1.0, 0.0],
        &[&[-h, h, 0.0], &[h, h, 0.0]],
    ))
}

/// `F(x) = x^3` in one dimension (`E = -x^4 / 4`).
pub fn cubic1d() -> Problem {
    Problem::new("cubic1d", 1, ProblemKind::Gradient, |x| pv(&[x[0].powi(3)]))
        .with_energy(|x| -x[0].powi(4) / 4.0)
        .with_exact_hvp(|x, v| pv(&[3.0 * x[0] * x[0] * v[0]]))
}

/// Affine field `F(x) = M x + b`. Gradient kind iff `M` is symmetric.
pub fn linear(
    name: impl Into<String>,
    matrix: DMatrix<f64>,
    offset: PositionVector,
) -> Result<Problem> {
    let n = matrix.nrows();
    if n == 0 || matrix.ncols() != n {
        return Err(SsdError::input(format!(
            "linear problem needs a square matrix, got {}x{}",
            matrix.nrows(),
            matrix.ncols()
        )));
    }
    if offset.len() != n {
        return Err(SsdError::DimensionMismatch {
            expected: n,
            got: offset.len(),
        });
    }
    if matrix.iter().chain(offset.iter()).any(|c| !c.is_finite()) {
        return Err(SsdError::input(
            "linear problem has non-finite coefficients",
        ));
    }
    let symmetric = matrix == matrix.transpose();
    let kind = if symmetric {
        ProblemKind::Gradient
    } else {
        ProblemKind::NonGradient
    };
    let (m_force, b_force) = (matrix.clone(), offset.clone());
    let m_hvp = matrix.clone();
    let mut p = Problem::new(name, n, kind, move |x| &m_force * x + &b_force)
        .with_exact_hvp(move |_, v| &m_hvp * v);
    if symmetric {
        p = p.with_energy(move |x| -0.5 * x.dot(&(&matrix * x)) - offset.dot(x));
    }
    Ok(p)
}

/// Matrix entries of a linear problem file: flat row-major or nested rows.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MatrixSpec {
    Rows(Vec<Vec<f64>>),
    Flat(Vec<f64>),
}

/// On-disk definition of a linear test problem.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LinearProblemSpec {
    pub name: String,
    pub matrix: MatrixSpec,
    pub offset: Vec<f64>,
}

impl LinearProblemSpec {
    pub fn build(&self) -> Result<Problem> {
        let n = self.offset.len();
        let entries: Vec<f64> = match &self.matrix {
            MatrixSpec::Rows(rows) => {
                if rows.len() != n || rows.iter().any(|r| r.len() != n) {
                    return Err(SsdError::input(format!("matrix must be {n}x{n}")));
                }
                rows.concat()
            }
            MatrixSpec::Flat(flat) => {
                if flat.len() != n * n {
                    return Err(SsdError::input(format!(
                        "flat matrix needs {} entries, got {}",
                        n * n,
                        flat.len()
                    )));
                }
                flat.clone()
            }
        };
        linear(
            self.name.clone(),
            DMatrix::from_row_slice(n, n, &entries),
            PositionVector::from_vec(self.offset.clone()),
        )
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Problem> {
        let text = std::fs::read_to_string(path)?;
        let spec: LinearProblemSpec = serde_json::from_str(&text)?;
        spec.build()
    }
}

/// Name-keyed collection of problems.
#[derive(Debug, Clone, Default)]
pub struct ProblemRegistry {
    problems: BTreeMap<String, Problem>,
}

impl ProblemRegistry {
    pub fn empty() -> Self {
        Self::default()
    }

    /// Registry holding `stingray`, `nongradient3`, `cubic1d` and `linear`
    /// (the latter `F(x) = diag(-1, 1) x`).
    pub fn with_builtins() -> Self {
        let mut r = Self::empty();
        r.register(stingray());
        r.register(nongradient3());
        r.register(cubic1d());
        r.register(
            linear(
                "linear",
                DMatrix::from_row_slice(2, 2, &[-1.0, 0.0, 0.0, 1.0]),
                PositionVector::zeros(2),
            )
            .expect("valid built-in"),
        );
        r
    }

    /// Adds (or replaces) a problem under its own name.
    pub fn register(&mut self, problem: Problem) {
        self.problems.insert(problem.name.clone(), problem);
    }

    pub fn get(&self, name: &str) -> Result<Problem> {
        self.problems
            .get(name)
            .cloned()
            .ok_or_else(|| SsdError::UnknownProblem {
                name: name.to_string(),
                available: self.names(),
            })
    }

    pub fn names(&self) -> Vec<String> {
        self.problems.keys().cloned().collect()
    }
}

/// Looks up a built-in problem by name.
pub fn registry_get(name: &str) -> Result<Problem> {
    ProblemRegistry::with_builtins().get(name)
}
