//! Backend-neutral conic programs: minimise cᵀx subject to b − Ax ∈ K, with
//! K a product of zero, non-negative, second-order, exponential and PSD
//! (scaled upper-triangle) cones.

use clarabel::algebra::CscMatrix;
use clarabel::solver::{DefaultSettingsBuilder, DefaultSolver, IPSolver, SolverStatus, SupportedConeT};

use super::ConvexError;

#[derive(Clone, Debug, PartialEq)]
pub enum Cone {
    Zero(usize),
    Nonneg(usize),
    /// (t, x) with ‖x‖ ≤ t; the parameter is the total dimension.
    Soc(usize),
    /// (x, y, z) with y·e^{x/y} ≤ z.
    Exp,
    /// Symmetric n×n matrix stored column-wise as its upper triangle with
    /// off-diagonal entries scaled by √2; the parameter is n.
    PsdTriangle(usize),
}

impl Cone {
    pub fn dim(&self) -> usize {
        match *self {
            Cone::Zero(n) | Cone::Nonneg(n) | Cone::Soc(n) => n,
            Cone::Exp => 3,
            Cone::PsdTriangle(n) => n * (n + 1) / 2,
        }
    }
}

/// Position of entry (i, j), i ≤ j, in the triangle vector of a PSD cone.
pub fn svec_index(i: usize, j: usize) -> usize {
    debug_assert!(i <= j);
    j * (j + 1) / 2 + i
}

/// One affine row `b − a·x` (sparse `a`).
#[derive(Clone, Debug, Default, PartialEq)]
pub struct AffineRow {
    pub coeffs: Vec<(usize, f64)>,
    pub b: f64,
}

impl AffineRow {
    pub fn constant(b: f64) -> Self {
        Self { coeffs: vec![], b }
    }

    /// Row whose slack equals `Σ coef·x` + `offset`.
    pub fn slack(coeffs: impl IntoIterator<Item = (usize, f64)>, offset: f64) -> Self {
        Self { coeffs: coeffs.into_iter().map(|(i, v)| (i, -v)).collect(), b: offset }
    }
}

#[derive(Clone, Debug, Default)]
pub struct ConicProblem {
    pub n_vars: usize,
    pub c: Vec<f64>,
    pub rows: Vec<AffineRow>,
    pub cones: Vec<Cone>,
    /// Human-readable name per cone block, used in infeasibility reports.
    pub labels: Vec<String>,
}

impl ConicProblem {
    pub fn new(n_vars: usize) -> Self {
        Self { n_vars, c: vec![0.0; n_vars], ..Default::default() }
    }

    /// Appends a cone block whose slacks are the given rows.
    pub fn push(&mut self, cone: Cone, rows: Vec<AffineRow>, label: impl Into<String>) {
        assert_eq!(cone.dim(), rows.len(), "cone dimension does not match row count");
        self.cones.push(cone);
        self.rows.extend(rows);
        self.labels.push(label.into());
    }

    /// Row ranges of each cone block.
    pub fn block_ranges(&self) -> Vec<std::ops::Range<usize>> {
        let mut start = 0;
        self.cones
            .iter()
            .map(|c| {
                let r = start..start + c.dim();
                start = r.end;
                r
            })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ConicStatus {
    Optimal,
    /// Solved to reduced accuracy.
    Inaccurate,
    Infeasible,
    Failed(String),
}

#[derive(Clone, Debug)]
pub struct ConicSolution {
    pub status: ConicStatus,
    pub x: Vec<f64>,
    /// Dual variables, one per row.
    pub z: Vec<f64>,
    pub objective: f64,
}

/// Anything that can solve a [`ConicProblem`].
pub trait ConicBackend {
    fn solve(&self, problem: &ConicProblem) -> Result<ConicSolution, ConvexError>;
    /// Whether one instance may be used from several threads at once.
    fn reentrant(&self) -> bool;
    fn name(&self) -> &'static str;
}

/// Interior-point backend built on `clarabel`.
#[derive(Clone, Debug)]
pub struct ClarabelBackend {
    pub max_iter: u32,
    pub tol: f64,
}

impl Default for ClarabelBackend {
    fn default() -> Self {
        Self { max_iter: 200, tol: 1e-9 }
    }
}

impl ConicBackend for ClarabelBackend {
    fn solve(&self, p: &ConicProblem) -> Result<ConicSolution, ConvexError> {
        let m = p.rows.len();
        let (mut ii, mut jj, mut vv) = (Vec::new(), Vec::new(), Vec::new());
        let mut b = Vec::with_capacity(m);
        for (r, row) in p.rows.iter().enumerate() {
            for &(j, v) in &row.coeffs {
                if v != 0.0 {
                    ii.push(r);
                    jj.push(j);
                    vv.push(v);
                }
            }
            b.push(row.b);
        }
        let a = CscMatrix::new_from_triplets(m, p.n_vars, ii, jj, vv);
        let pmat = CscMatrix::zeros((p.n_vars, p.n_vars));
        let cones: Vec<SupportedConeT<f64>> = p
            .cones
            .iter()
            .map(|c| match *c {
                Cone::Zero(n) => SupportedConeT::ZeroConeT(n),
                Cone::Nonneg(n) => SupportedConeT::NonnegativeConeT(n),
                Cone::Soc(n) => SupportedConeT::SecondOrderConeT(n),
                Cone::Exp => SupportedConeT::ExponentialConeT(),
                Cone::PsdTriangle(n) => SupportedConeT::PSDTriangleConeT(n),
            })
            .collect();
        let settings = DefaultSettingsBuilder::default()
            .verbose(false)
            .max_iter(self.max_iter)
            .tol_gap_abs(self.tol)
            .tol_gap_rel(self.tol)
            .tol_feas(self.tol)
            .presolve_enable(false)
            .build()
            .map_err(|e| ConvexError::Backend(format!("{e:?}")))?;
        let mut solver = DefaultSolver::new(&pmat, &p.c, &a, &b, &cones, settings)
            .map_err(|e| ConvexError::Backend(e.to_string()))?;
        solver.solve();
        let sol = &solver.solution;
        let status = match sol.status {
            SolverStatus::Solved => ConicStatus::Optimal,
            SolverStatus::AlmostSolved => ConicStatus::Inaccurate,
            SolverStatus::PrimalInfeasible | SolverStatus::AlmostPrimalInfeasible => ConicStatus::Infeasible,
            other => ConicStatus::Failed(format!("{other:?}")),
        };
        Ok(ConicSolution { status, x: sol.x.clone(), z: sol.z.clone(), objective: sol.obj_val })
    }

    fn reentrant(&self) -> bool {
        true
    }

    fn name(&self) -> &'static str {
        "clarabel"
    }
}
