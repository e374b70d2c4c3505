//! Ruiz equilibration of `[P Aeqᵀ; Aeq 0]` plus a cost scaling.
//!
//! Variables are scaled by `D`, equality rows by `E`, the objective by `c`.
//! Box bounds stay a plain box in the scaled variables (`lb / D`, `ub / D`).

use alloc::vec;
use alloc::vec::Vec;

use super::QuadProgram;
use crate::linalg::norm_inf;
use crate::sparse::SparseMatrix;

const MIN_NORM: f64 = 1e-4;
const MAX_NORM: f64 = 1e4;

/// Scaling factors of a fixed `(P, Aeq)` pair and the scaled matrices.
#[derive(Debug, Clone)]
pub(crate) struct Equilibration {
    pub p: SparseMatrix,
    pub aeq: SparseMatrix,
    pub d: Vec<f64>,
    pub e: Vec<f64>,
    /// Mean column norm of the scaled `P`, an input to the cost scaling.
    mean_p: f64,
}

#[derive(Debug, Clone)]
pub(crate) struct ScaledProblem {
    pub p: SparseMatrix,
    pub q: Vec<f64>,
    pub aeq: SparseMatrix,
    pub beq: Vec<f64>,
    pub lb: Vec<f64>,
    pub ub: Vec<f64>,
    pub d: Vec<f64>,
    pub e: Vec<f64>,
    pub c: f64,
}

fn clamp_norm(v: f64) -> f64 {
    if v < MIN_NORM {
        1.0
    } else {
        v.min(MAX_NORM)
    }
}

impl Equilibration {
    pub fn new(p0: &SparseMatrix, aeq0: &SparseMatrix, iters: usize) -> Self {
        let n = p0.rows();
        let m = aeq0.rows();
        let mut d = vec![1.0; n];
        let mut e = vec![1.0; m];
        let mut p = p0.clone();
        let mut aeq = aeq0.clone();
        for _ in 0..iters {
            let pc = p.col_norms_inf();
            let ac = aeq.col_norms_inf();
            let ar = aeq.row_norms_inf();
            let dd: Vec<f64> = (0..n)
                .map(|j| 1.0 / libm::sqrt(clamp_norm(pc[j].max(ac[j]))))
                .collect();
            let de: Vec<f64> = ar.iter().map(|&r| 1.0 / libm::sqrt(clamp_norm(r))).collect();
            p = p.scaled(&dd, &dd);
            aeq = aeq.scaled(&de, &dd);
            for j in 0..n {
                d[j] *= dd[j];
            }
            for i in 0..m {
                e[i] *= de[i];
            }
        }
        let pc = p.col_norms_inf();
        let mean_p = if n > 0 { pc.iter().sum::<f64>() / n as f64 } else { 0.0 };
        Equilibration { p, aeq, d, e, mean_p }
    }
}

impl ScaledProblem {
    pub fn with(eq: &Equilibration, qp: &QuadProgram) -> Self {
        let n = qp.n();
        let m = qp.m();
        let d = &eq.d;
        let e = &eq.e;
        let mut q: Vec<f64> = (0..n).map(|j| d[j] * qp.q[j]).collect();
        let c = 1.0 / clamp_norm(eq.mean_p.max(norm_inf(&q)));
        let mut p = eq.p.clone();
        p.scale_values(c);
        q.iter_mut().for_each(|v| *v *= c);
        let beq = (0..m).map(|i| e[i] * qp.beq[i]).collect();
        let lb = (0..n).map(|j| qp.lb[j] / d[j]).collect();
        let ub = (0..n).map(|j| qp.ub[j] / d[j]).collect();
        ScaledProblem {
            p,
            q,
            aeq: eq.aeq.clone(),
            beq,
            lb,
            ub,
            d: d.clone(),
            e: e.clone(),
            c,
        }
    }

    pub fn unscale_primal(&self, x: &[f64]) -> Vec<f64> {
        x.iter().zip(&self.d).map(|(v, d)| v * d).collect()
    }

    pub fn scale_primal(&self, z: &[f64]) -> Vec<f64> {
        z.iter().zip(&self.d).map(|(v, d)| v / d).collect()
    }

    pub fn unscale_eq_dual(&self, y: &[f64]) -> Vec<f64> {
        y.iter().zip(&self.e).map(|(v, e)| v * e / self.c).collect()
    }

    pub fn scale_eq_dual(&self, y: &[f64]) -> Vec<f64> {
        y.iter().zip(&self.e).map(|(v, e)| v * self.c / e).collect()
    }

    pub fn scale_bound_dual(&self, y: &[f64]) -> Vec<f64> {
        y.iter().zip(&self.d).map(|(v, d)| v * self.c * d).collect()
    }

    pub fn unscale_bound_dual(&self, y: &[f64]) -> Vec<f64> {
        y.iter().zip(&self.d).map(|(v, d)| v / (self.c * d)).collect()
    }
}
