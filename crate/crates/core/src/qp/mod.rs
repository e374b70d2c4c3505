//! Convex QP with linear equalities and box bounds:
//!
//! ```text
//! minimize    ½ zᵀPz + qᵀz
//! subject to  Aeq z = beq,   lb ≤ z ≤ ub
//! ```
//!
//! Solved by an over-relaxed ADMM iteration on a Ruiz-equilibrated copy of the
//! problem, followed by an active-set polish that re-solves the equality
//! constrained KKT system on the guessed active set. When no bound is finite
//! the polish alone (a direct KKT solve) is tried first.

mod admm;
mod polish;
mod scaling;

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::linalg::norm_inf;
use crate::sparse::SparseMatrix;

/// Canonical QP instance. `P` must be symmetric positive semidefinite.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadProgram {
    pub p: SparseMatrix,
    pub q: Vec<f64>,
    pub aeq: SparseMatrix,
    pub beq: Vec<f64>,
    pub lb: Vec<f64>,
    pub ub: Vec<f64>,
}

impl QuadProgram {
    /// Checks dimensions, symmetry of `P` (max asymmetry 1e-9) and `lb ≤ ub`.
    pub fn new(
        p: SparseMatrix,
        q: Vec<f64>,
        aeq: SparseMatrix,
        beq: Vec<f64>,
        lb: Vec<f64>,
        ub: Vec<f64>,
    ) -> Result<Self, Error> {
        let qp = QuadProgram {
            p,
            q,
            aeq,
            beq,
            lb,
            ub,
        };
        qp.validate()?;
        Ok(qp)
    }

    /// Unconstrained-in-equalities program with only a box.
    pub fn boxed(p: SparseMatrix, q: Vec<f64>, lb: Vec<f64>, ub: Vec<f64>) -> Result<Self, Error> {
        let n = q.len();
        QuadProgram::new(p, q, SparseMatrix::zeros(0, n), Vec::new(), lb, ub)
    }

    pub fn validate(&self) -> Result<(), Error> {
        let n = self.q.len();
        if self.p.rows() != n || self.p.cols() != n {
            return Err(Error::DimensionMismatch(format!(
                "P is {}x{}, q has length {n}",
                self.p.rows(),
                self.p.cols()
            )));
        }
        if self.aeq.cols() != n || self.aeq.rows() != self.beq.len() {
            return Err(Error::DimensionMismatch(format!(
                "Aeq is {}x{}, beq has length {}, n = {n}",
                self.aeq.rows(),
                self.aeq.cols(),
                self.beq.len()
            )));
        }
        if self.lb.len() != n || self.ub.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "bounds have lengths {} and {}, n = {n}",
                self.lb.len(),
                self.ub.len()
            )));
        }
        let asym = self.p.max_asymmetry();
        if asym > 1e-9 {
            return Err(Error::Invalid(format!("P asymmetric by {asym:e}")));
        }
        if let Some(i) = (0..n).find(|&i| !(self.lb[i] <= self.ub[i])) {
            return Err(Error::Invalid(format!(
                "lb[{i}] = {} exceeds ub[{i}] = {}",
                self.lb[i], self.ub[i]
            )));
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.q.len()
    }

    pub fn m(&self) -> usize {
        self.beq.len()
    }

    pub fn objective(&self, z: &[f64]) -> f64 {
        let pz = self.p.mul_vec(z);
        z.iter()
            .zip(&pz)
            .zip(&self.q)
            .map(|((zi, pzi), qi)| 0.5 * zi * pzi + qi * zi)
            .sum()
    }

    fn has_finite_bounds(&self) -> bool {
        self.lb.iter().chain(&self.ub).any(|b| b.is_finite())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QpSettings {
    /// Absolute tolerance on every KKT residual for an `Optimal` verdict.
    pub tolerance: f64,
    pub max_iter: usize,
    /// Relative tolerance of the ADMM phase before a polish is attempted.
    pub admm_rel_tolerance: f64,
    pub rho: f64,
    pub sigma: f64,
    /// Over-relaxation factor in (0, 2).
    pub alpha: f64,
    pub adaptive_rho: bool,
    pub check_interval: usize,
    pub scaling_iters: usize,
    pub polish: bool,
    pub polish_refine_iters: usize,
    /// Threshold of the normalized Farkas certificate test.
    pub infeasibility_tolerance: f64,
}

impl Default for QpSettings {
    fn default() -> Self {
        QpSettings {
            tolerance: 1e-6,
            max_iter: 50_000,
            admm_rel_tolerance: 1e-4,
            rho: 0.1,
            sigma: 1e-6,
            alpha: 1.6,
            adaptive_rho: true,
            check_interval: 25,
            scaling_iters: 10,
            polish: true,
            polish_refine_iters: 8,
            infeasibility_tolerance: 1e-6,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum QpStatus {
    Optimal,
    Infeasible,
    MaxIter,
}

/// Lagrange multipliers. Stationarity reads `Pz + q + Aeqᵀ eq + bound = 0`;
/// a positive `bound[i]` prices the upper bound, a negative one the lower.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualSet {
    pub eq: Vec<f64>,
    pub bound: Vec<f64>,
}

impl DualSet {
    pub fn zeros(n: usize, m: usize) -> Self {
        DualSet {
            eq: vec![0.0; m],
            bound: vec![0.0; n],
        }
    }
}

/// Infinity-norm KKT residuals of a primal/dual pair.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct KktResiduals {
    pub primal_eq: f64,
    pub bound_violation: f64,
    pub stationarity: f64,
    /// `max_i max(min(bound_i⁺, |ub_i - z_i|), min(bound_i⁻, |z_i - lb_i|))`;
    /// zero exactly when every bound multiplier has the right sign and
    /// vanishes off its bound.
    pub complementarity: f64,
}

impl KktResiduals {
    pub fn max(&self) -> f64 {
        self.primal_eq
            .max(self.bound_violation)
            .max(self.stationarity)
            .max(self.complementarity)
    }

    pub fn within(&self, tol: f64) -> bool {
        self.max() <= tol
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QpSolution {
    pub z: Vec<f64>,
    pub objective: f64,
    pub status: QpStatus,
    pub kkt_residuals: KktResiduals,
    pub duals: DualSet,
    pub iterations: usize,
    pub polished: bool,
}

/// Evaluates the four KKT residuals of `(z, duals)` for `p`.
pub fn check_kkt(p: &QuadProgram, z: &[f64], duals: &DualSet) -> Result<KktResiduals, Error> {
    let n = p.n();
    if z.len() != n || duals.bound.len() != n || duals.eq.len() != p.m() {
        return Err(Error::DimensionMismatch(format!(
            "z has length {}, duals ({}, {}), problem is n = {n}, m = {}",
            z.len(),
            duals.eq.len(),
            duals.bound.len(),
            p.m()
        )));
    }
    let mut r_eq = p.aeq.mul_vec(z);
    for (r, b) in r_eq.iter_mut().zip(&p.beq) {
        *r -= b;
    }
    let mut grad = p.p.mul_vec(z);
    for i in 0..n {
        grad[i] += p.q[i] + duals.bound[i];
    }
    p.aeq.mul_transpose_vec_acc(&duals.eq, &mut grad);

    let mut bound_violation = 0.0f64;
    let mut complementarity = 0.0f64;
    for i in 0..n {
        bound_violation = bound_violation.max(p.lb[i] - z[i]).max(z[i] - p.ub[i]);
        let y = duals.bound[i];
        let c = if y > 0.0 {
            y.min(libm::fabs(p.ub[i] - z[i]))
        } else if y < 0.0 {
            (-y).min(libm::fabs(z[i] - p.lb[i]))
        } else {
            0.0
        };
        complementarity = complementarity.max(c);
    }
    Ok(KktResiduals {
        primal_eq: norm_inf(&r_eq),
        bound_violation,
        stationarity: norm_inf(&grad),
        complementarity,
    })
}

/// Solves `p` from a cold start.
pub fn solve_qp(p: &QuadProgram, settings: &QpSettings) -> QpSolution {
    solve_qp_with_hint(p, settings, None)
}

/// Solves `p`, optionally seeding the iteration with a primal point. A hint
/// that already sits on the optimal active set is verified by a single polish
/// and returned without ADMM iterations.
pub fn solve_qp_with_hint(p: &QuadProgram, settings: &QpSettings, hint: Option<&[f64]>) -> QpSolution {
    QpSolver::new(*settings).solve(p, hint)
}

/// Reusable solver. Keeps the equilibration and the KKT factorizations of the
/// last `(P, Aeq)` pair, so a sequence of problems that differ only in `q`,
/// `beq` and the bounds skips the setup work. Results do not depend on what
/// was solved before.
#[derive(Default)]
pub struct QpSolver {
    settings: QpSettings,
    structure: Option<(SparseMatrix, SparseMatrix, scaling::Equilibration)>,
    factors: admm::FactorCache,
}

impl QpSolver {
    pub fn new(settings: QpSettings) -> Self {
        QpSolver {
            settings,
            structure: None,
            factors: admm::FactorCache::default(),
        }
    }

    pub fn settings(&self) -> &QpSettings {
        &self.settings
    }

    pub fn solve(&mut self, p: &QuadProgram, hint: Option<&[f64]>) -> QpSolution {
        self.solve_warm(p, hint, None)
    }

    /// Like [`QpSolver::solve`], additionally seeding the ADMM multipliers.
    pub fn solve_warm(&mut self, p: &QuadProgram, hint: Option<&[f64]>, duals: Option<&DualSet>) -> QpSolution {
        debug_assert!(p.validate().is_ok());
        let settings = self.settings;
        let n = p.n();
        if n == 0 {
            let duals = DualSet::zeros(0, p.m());
            let kkt = check_kkt(p, &[], &duals).unwrap_or_default();
            let status = if kkt.primal_eq <= settings.tolerance {
                QpStatus::Optimal
            } else {
                QpStatus::Infeasible
            };
            return QpSolution {
                z: Vec::new(),
                objective: 0.0,
                status,
                kkt_residuals: kkt,
                duals,
                iterations: 0,
                polished: false,
            };
        }

        let reuse = matches!(&self.structure, Some((sp, sa, _)) if *sp == p.p && *sa == p.aeq);
        if !reuse {
            let eq = scaling::Equilibration::new(&p.p, &p.aeq, settings.scaling_iters);
            self.structure = Some((p.p.clone(), p.aeq.clone(), eq));
            self.factors = admm::FactorCache::default();
        }
        let eq = &self.structure.as_ref().expect("structure set above").2;
        let scaled = scaling::ScaledProblem::with(eq, p);

        if !p.has_finite_bounds() {
            let zeros = vec![0.0; n];
            if let Some(sol) = polish::polish(p, &scaled, &zeros, &zeros, &settings) {
                return sol;
            }
        }
        let hint = hint.filter(|h| h.len() == n);
        if let Some(h) = hint {
            if let Some(sol) = polish::polish_from_primal(p, &scaled, h, &settings) {
                return sol;
            }
        }
        admm::solve(p, &scaled, &settings, &mut self.factors, hint, duals)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Matrix;
    use alloc::vec;

    fn dense(rows: &[Vec<f64>]) -> SparseMatrix {
        SparseMatrix::from_dense(&Matrix::from_rows(rows).unwrap())
    }

    #[test]
    fn unconstrained_minimum_at_origin() {
        let qp = QuadProgram::boxed(
            dense(&[vec![2.0]]),
            vec![0.0],
            vec![f64::NEG_INFINITY],
            vec![f64::INFINITY],
        )
        .unwrap();
        let sol = solve_qp(&qp, &QpSettings::default());
        assert_eq!(sol.status, QpStatus::Optimal);
        assert!(sol.z[0].abs() < 1e-12);
        assert!(sol.objective.abs() < 1e-12);
        let r = check_kkt(&qp, &sol.z, &sol.duals).unwrap();
        assert!(r.max() < 1e-12);
    }

    #[test]
    fn box_clamps_unconstrained_minimizer() {
        // minimizer of z^2 - 2z is 1, box [2, 3] clamps to 2
        let qp = QuadProgram::boxed(dense(&[vec![2.0]]), vec![-2.0], vec![2.0], vec![3.0]).unwrap();
        let sol = solve_qp(&qp, &QpSettings::default());
        assert_eq!(sol.status, QpStatus::Optimal);
        assert!((sol.z[0] - 2.0).abs() < 1e-8);
        // oracle: objective at both endpoints
        let f = |z: f64| z * z - 2.0 * z;
        assert!(f(2.0) < f(3.0));
        assert!((sol.objective - f(2.0)).abs() < 1e-8);
    }

    #[test]
    fn constant_objective_on_simplex_edge() {
        let qp = QuadProgram::new(
            SparseMatrix::zeros(2, 2),
            vec![1.0, 1.0],
            dense(&[vec![1.0, 1.0]]),
            vec![1.0],
            vec![0.0, 0.0],
            vec![1.0, 1.0],
        )
        .unwrap();
        let sol = solve_qp(&qp, &QpSettings::default());
        assert_eq!(sol.status, QpStatus::Optimal);
        // oracle: both vertices (1,0) and (0,1) give objective 1
        assert_eq!(qp.objective(&[1.0, 0.0]), 1.0);
        assert_eq!(qp.objective(&[0.0, 1.0]), 1.0);
        assert!((sol.objective - 1.0).abs() < 1e-6);
    }

    #[test]
    fn kkt_perturbation_is_detected() {
        let qp = QuadProgram::boxed(dense(&[vec![2.0]]), vec![-2.0], vec![2.0], vec![3.0]).unwrap();
        let sol = solve_qp(&qp, &QpSettings::default());
        let z = vec![sol.z[0] + 1e-3];
        let r = check_kkt(&qp, &z, &sol.duals).unwrap();
        assert!(r.stationarity.max(r.complementarity).max(r.bound_violation) >= 1e-4);
    }

    #[test]
    fn bound_violation_is_exact_overshoot() {
        let qp = QuadProgram::boxed(dense(&[vec![2.0]]), vec![-2.0], vec![2.0], vec![3.0]).unwrap();
        let r = check_kkt(&qp, &[3.25], &DualSet::zeros(1, 0)).unwrap();
        assert_eq!(r.bound_violation, 0.25);
        let r = check_kkt(&qp, &[1.5], &DualSet::zeros(1, 0)).unwrap();
        assert_eq!(r.bound_violation, 0.5);
    }

    #[test]
    fn kkt_dimension_mismatch() {
        let qp = QuadProgram::boxed(dense(&[vec![2.0]]), vec![0.0], vec![0.0], vec![1.0]).unwrap();
        assert!(matches!(
            check_kkt(&qp, &[0.0, 1.0], &DualSet::zeros(1, 0)),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn inconsistent_equalities_with_box_are_infeasible() {
        // z0 + z1 = 3 with both in [0, 1]
        let qp = QuadProgram::new(
            dense(&[vec![1.0, 0.0], vec![0.0, 1.0]]),
            vec![0.0, 0.0],
            dense(&[vec![1.0, 1.0]]),
            vec![3.0],
            vec![0.0, 0.0],
            vec![1.0, 1.0],
        )
        .unwrap();
        let sol = solve_qp(&qp, &QpSettings::default());
        assert_eq!(sol.status, QpStatus::Infeasible);
    }

    #[test]
    fn asymmetric_p_rejected() {
        let r = QuadProgram::boxed(
            dense(&[vec![1.0, 1.0], vec![0.0, 1.0]]),
            vec![0.0, 0.0],
            vec![0.0, 0.0],
            vec![1.0, 1.0],
        );
        assert!(matches!(r, Err(Error::Invalid(_))));
    }

    #[test]
    fn hint_on_optimum_skips_iterations() {
        let qp = QuadProgram::boxed(dense(&[vec![2.0]]), vec![-2.0], vec![2.0], vec![3.0]).unwrap();
        let sol = solve_qp_with_hint(&qp, &QpSettings::default(), Some(&[2.0]));
        assert_eq!(sol.status, QpStatus::Optimal);
        assert_eq!(sol.iterations, 0);
        assert!(sol.polished);
    }
}
