//! Active-set polish: fix the guessed active bounds, solve the remaining
//! equality-constrained KKT system exactly (regularized LDLᵀ plus iterative
//! refinement), recover bound multipliers from stationarity and accept the
//! point only if every KKT residual is within tolerance.

use alloc::vec;
use alloc::vec::Vec;

use super::scaling::ScaledProblem;
use super::{check_kkt, DualSet, KktResiduals, QpSettings, QpSolution, QpStatus, QuadProgram};
use crate::linalg::norm_inf;
use crate::sparse::SkylineLdl;

const DELTA: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Side {
    Free,
    Lower,
    Upper,
}

/// Guess from ADMM iterates (scaled box variable `z` and bound duals `y`).
pub(super) fn polish(
    qp: &QuadProgram,
    s: &ScaledProblem,
    z: &[f64],
    y: &[f64],
    settings: &QpSettings,
) -> Option<QpSolution> {
    let sides: Vec<Side> = (0..qp.n())
        .map(|i| {
            if s.lb[i] == s.ub[i] || z[i] - s.lb[i] < -y[i] {
                Side::Lower
            } else if s.ub[i] - z[i] < y[i] {
                Side::Upper
            } else {
                Side::Free
            }
        })
        .collect();
    let weight: Vec<f64> = y.iter().map(|v| libm::fabs(*v)).collect();
    polish_on(qp, s, sides, &weight, settings)
}

/// Guess from an unscaled primal point alone: bounds it touches are active.
pub(super) fn polish_from_primal(
    qp: &QuadProgram,
    s: &ScaledProblem,
    hint: &[f64],
    settings: &QpSettings,
) -> Option<QpSolution> {
    let touch = |v: f64, b: f64| b.is_finite() && libm::fabs(v - b) <= 1e-9 * (1.0 + libm::fabs(b));
    let sides: Vec<Side> = (0..qp.n())
        .map(|i| {
            if qp.lb[i] == qp.ub[i] || touch(hint[i], qp.lb[i]) {
                Side::Lower
            } else if touch(hint[i], qp.ub[i]) {
                Side::Upper
            } else {
                Side::Free
            }
        })
        .collect();
    polish_on(qp, s, sides, &vec![0.0; qp.n()], settings)
}

// An equality row whose variables are all pinned makes the reduced KKT
// singular. Free the pinnable variable with the smallest multiplier
// estimate; the row then holds it at its bound value.
fn repair_degenerate_rows(s: &ScaledProblem, sides: &mut [Side], weight: &[f64]) {
    for r in 0..s.aeq.rows() {
        let mut pick: Option<usize> = None;
        let mut has_free = false;
        for (j, _) in s.aeq.row(r) {
            if sides[j] == Side::Free {
                has_free = true;
                break;
            }
            if s.lb[j] != s.ub[j] && pick.is_none_or(|p| weight[j] < weight[p]) {
                pick = Some(j);
            }
        }
        if !has_free {
            if let Some(j) = pick {
                sides[j] = Side::Free;
            }
        }
    }
}

const MAX_PASSES: usize = 8;
const CLEAN: f64 = 1e-10;

// Primal-dual active-set passes: solve on the current guess, then pin the
// free variables that left their box and release pinned ones whose multiplier
// has the wrong sign.
fn polish_on(
    qp: &QuadProgram,
    s: &ScaledProblem,
    mut sides: Vec<Side>,
    weight: &[f64],
    settings: &QpSettings,
) -> Option<QpSolution> {
    let tol = settings.tolerance;
    let mut accepted: Option<QpSolution> = None;
    for _ in 0..MAX_PASSES {
        repair_degenerate_rows(s, &mut sides, weight);
        let Some((z, duals, kkt)) = solve_on(qp, s, &sides, settings) else {
            break;
        };
        if !z.iter().all(|v| v.is_finite()) {
            break;
        }
        // passes continue past an acceptable point while it still leaves
        // the box or carries a wrong-signed multiplier beyond round-off
        let cutoff = if accepted.is_some() || kkt.within(tol) { CLEAN } else { tol };
        let strict = |b: f64| cutoff * (1.0 + libm::fabs(b));
        let mut changed = false;
        for i in 0..qp.n() {
            let next = match sides[i] {
                _ if qp.lb[i] == qp.ub[i] => Side::Lower,
                Side::Free if z[i] < qp.lb[i] - strict(qp.lb[i]) => Side::Lower,
                Side::Free if z[i] > qp.ub[i] + strict(qp.ub[i]) => Side::Upper,
                Side::Lower if duals.bound[i] > strict(0.0) => Side::Free,
                Side::Upper if duals.bound[i] < -strict(0.0) => Side::Free,
                side => side,
            };
            changed |= next != sides[i];
            sides[i] = next;
        }
        if kkt.within(tol) {
            let better = accepted.as_ref().is_none_or(|a| kkt.max() < a.kkt_residuals.max());
            if better {
                accepted = Some(QpSolution {
                    objective: qp.objective(&z),
                    z,
                    status: QpStatus::Optimal,
                    kkt_residuals: kkt,
                    duals,
                    iterations: 0,
                    polished: true,
                });
            }
        }
        if !changed {
            break;
        }
    }
    accepted
}

fn solve_on(
    qp: &QuadProgram,
    s: &ScaledProblem,
    sides: &[Side],
    settings: &QpSettings,
) -> Option<(Vec<f64>, DualSet, KktResiduals)> {
    let n = qp.n();
    let m = qp.m();
    let mut slot = vec![usize::MAX; n];
    let mut free = Vec::new();
    let mut x = vec![0.0; n];
    for i in 0..n {
        match sides[i] {
            Side::Free => {
                slot[i] = free.len();
                free.push(i);
            }
            Side::Lower => x[i] = s.lb[i],
            Side::Upper => x[i] = s.ub[i],
        }
    }
    let nf = free.len();
    let dim = nf + m;

    let mut lower = Vec::with_capacity(s.p.nnz() + s.aeq.nnz() + dim);
    let mut rhs = vec![0.0; dim];
    for (k, &i) in free.iter().enumerate() {
        rhs[k] = -s.q[i];
        lower.push((k, k, DELTA));
    }
    for (i, j, v) in s.p.iter() {
        match (slot[i] != usize::MAX, slot[j] != usize::MAX) {
            (true, true) if i >= j => lower.push((slot[i], slot[j], v)),
            (true, false) => rhs[slot[i]] -= v * x[j],
            _ => {}
        }
    }
    for r in 0..m {
        rhs[nf + r] = s.beq[r];
        lower.push((nf + r, nf + r, -DELTA));
        for (j, v) in s.aeq.row(r) {
            if slot[j] != usize::MAX {
                lower.push((nf + r, slot[j], v));
            } else {
                rhs[nf + r] -= v * x[j];
            }
        }
    }

    let mut sol = vec![0.0; dim];
    if dim > 0 {
        let mut ldl = SkylineLdl::analyze(dim, &lower);
        ldl.factor(&lower).ok()?;
        // refinement against the unregularized operator
        let apply = |v: &[f64]| -> Vec<f64> {
            let mut out = vec![0.0; dim];
            for (i, j, val) in s.p.iter() {
                if slot[i] != usize::MAX && slot[j] != usize::MAX {
                    out[slot[i]] += val * v[slot[j]];
                }
            }
            for r in 0..m {
                for (j, val) in s.aeq.row(r) {
                    if slot[j] != usize::MAX {
                        out[nf + r] += val * v[slot[j]];
                        out[slot[j]] += val * v[nf + r];
                    }
                }
            }
            out
        };
        let rhs_norm = norm_inf(&rhs).max(1.0);
        for _ in 0..=settings.polish_refine_iters {
            let kv = apply(&sol);
            let mut res: Vec<f64> = rhs.iter().zip(&kv).map(|(b, k)| b - k).collect();
            if norm_inf(&res) <= 1e-15 * rhs_norm {
                break;
            }
            ldl.solve(&mut res);
            for (a, d) in sol.iter_mut().zip(&res) {
                *a += d;
            }
        }
    }
    for (k, &i) in free.iter().enumerate() {
        x[i] = sol[k];
    }

    let z = s.unscale_primal(&x);
    let eq = s.unscale_eq_dual(&sol[nf..]);
    let mut grad = qp.p.mul_vec(&z);
    for i in 0..n {
        grad[i] += qp.q[i];
    }
    qp.aeq.mul_transpose_vec_acc(&eq, &mut grad);
    let bound: Vec<f64> = (0..n)
        .map(|i| if sides[i] == Side::Free { 0.0 } else { -grad[i] })
        .collect();
    let duals = DualSet { eq, bound };
    let kkt = check_kkt(qp, &z, &duals).ok()?;
    Some((z, duals, kkt))
}
