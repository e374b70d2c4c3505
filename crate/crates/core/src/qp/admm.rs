use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use super::scaling::ScaledProblem;
use super::{check_kkt, polish, DualSet, QpSettings, QpSolution, QpStatus, QuadProgram};
use crate::linalg::norm_inf;
use crate::sparse::SkylineLdl;

const RHO_MIN: f64 = 1e-6;
const RHO_MAX: f64 = 1e6;
const RHO_EQ_FACTOR: f64 = 1e3;

const MAX_FACTORS: usize = 8;

struct Kkt {
    ldl: Arc<SkylineLdl>,
    rho: f64,
    rho_b: Vec<f64>,
    rho_e: f64,
}

struct FactorEntry {
    c: f64,
    rho: f64,
    rho_b: Vec<f64>,
    ldl: Arc<SkylineLdl>,
}

/// ADMM KKT factorizations for one equilibrated `(P, Aeq)`, keyed by cost
/// scaling, step size and bound pattern.
#[derive(Default)]
pub(super) struct FactorCache {
    template: Option<SkylineLdl>,
    entries: Vec<FactorEntry>,
}

impl FactorCache {
    fn kkt(&mut self, s: &ScaledProblem, sigma: f64, rho: f64) -> Option<Kkt> {
        let rho_b = bound_rho(s, rho);
        let rho_e = RHO_EQ_FACTOR * rho;
        if let Some(e) = self
            .entries
            .iter()
            .find(|e| e.c == s.c && e.rho == rho && e.rho_b == rho_b)
        {
            return Some(Kkt {
                ldl: e.ldl.clone(),
                rho,
                rho_b,
                rho_e,
            });
        }
        let entries = kkt_entries(s, sigma, &rho_b, rho_e);
        let template = self
            .template
            .get_or_insert_with(|| SkylineLdl::analyze(s.q.len() + s.beq.len(), &entries));
        let mut ldl = template.clone();
        ldl.factor(&entries).ok()?;
        let ldl = Arc::new(ldl);
        if self.entries.len() == MAX_FACTORS {
            self.entries.remove(0);
        }
        self.entries.push(FactorEntry {
            c: s.c,
            rho,
            rho_b: rho_b.clone(),
            ldl: ldl.clone(),
        });
        Some(Kkt { ldl, rho, rho_b, rho_e })
    }
}

fn bound_rho(s: &ScaledProblem, rho: f64) -> Vec<f64> {
    (0..s.lb.len())
        .map(|i| {
            if s.lb[i] == s.ub[i] {
                RHO_EQ_FACTOR * rho
            } else if s.lb[i].is_finite() || s.ub[i].is_finite() {
                rho
            } else {
                RHO_MIN
            }
        })
        .collect()
}

// [P + σI + diag(ρ_b), Aᵀ; A, -I/ρ_e] in lower-triangle triplets.
fn kkt_entries(s: &ScaledProblem, sigma: f64, rho_b: &[f64], rho_e: f64) -> Vec<(usize, usize, f64)> {
    let n = s.q.len();
    let m = s.beq.len();
    let mut t = Vec::with_capacity(s.p.nnz() + s.aeq.nnz() + n + m);
    for i in 0..n {
        t.push((i, i, sigma + rho_b[i]));
    }
    t.extend(s.p.iter().filter(|&(i, j, _)| i >= j));
    for r in 0..m {
        t.push((n + r, n + r, -1.0 / rho_e));
        t.extend(s.aeq.row(r).map(|(j, v)| (n + r, j, v)));
    }
    t
}

struct Residuals {
    prim: f64,
    dual: f64,
    prim_scale: f64,
    dual_scale: f64,
}

pub(super) fn solve(
    qp: &QuadProgram,
    s: &ScaledProblem,
    settings: &QpSettings,
    factors: &mut FactorCache,
    hint: Option<&[f64]>,
    dual_hint: Option<&DualSet>,
) -> QpSolution {
    let n = qp.n();
    let m = qp.m();
    let alpha = settings.alpha;

    let mut x = match hint {
        Some(h) if h.len() == n => s.scale_primal(h),
        _ => vec![0.0; n],
    };
    let mut zb: Vec<f64> = (0..n).map(|i| x[i].clamp(s.lb[i], s.ub[i])).collect();
    let (mut ye, mut yb) = match dual_hint {
        Some(y) if y.eq.len() == m && y.bound.len() == n => (s.scale_eq_dual(&y.eq), s.scale_bound_dual(&y.bound)),
        _ => (vec![0.0; m], vec![0.0; n]),
    };
    let mut ye_prev = vec![0.0; m];
    let mut yb_prev = vec![0.0; n];

    let Some(mut kkt) = factors.kkt(s, settings.sigma, settings.rho) else {
        return finish(qp, s, &zb, &ye, &yb, QpStatus::MaxIter, 0);
    };

    let check = settings.check_interval.max(1);
    let mut rel_tol = settings.admm_rel_tolerance;
    let mut rhs = vec![0.0; n + m];

    for iter in 1..=settings.max_iter {
        let checking = iter % check == 0 || iter == settings.max_iter;
        if checking {
            ye_prev.copy_from_slice(&ye);
            yb_prev.copy_from_slice(&yb);
        }

        for i in 0..n {
            rhs[i] = settings.sigma * x[i] - s.q[i] + kkt.rho_b[i] * zb[i] - yb[i];
        }
        for r in 0..m {
            rhs[n + r] = s.beq[r] - ye[r] / kkt.rho_e;
        }
        kkt.ldl.solve(&mut rhs);

        for i in 0..n {
            let xt = rhs[i];
            let relaxed = alpha * xt + (1.0 - alpha) * zb[i];
            let znew = (relaxed + yb[i] / kkt.rho_b[i]).clamp(s.lb[i], s.ub[i]);
            yb[i] += kkt.rho_b[i] * (relaxed - znew);
            x[i] = alpha * xt + (1.0 - alpha) * x[i];
            zb[i] = znew;
        }
        for r in 0..m {
            ye[r] += alpha * (rhs[n + r] - ye[r]);
        }

        if !checking {
            continue;
        }

        if certify_infeasible(qp, s, &ye, &ye_prev, &yb, &yb_prev, settings.infeasibility_tolerance) {
            return finish(qp, s, &zb, &ye, &yb, QpStatus::Infeasible, iter);
        }

        let res = residuals(qp, s, &x, &zb, &ye, &yb);
        let eps_prim = settings.tolerance + rel_tol * res.prim_scale;
        let eps_dual = settings.tolerance + rel_tol * res.dual_scale;
        if res.prim <= eps_prim && res.dual <= eps_dual {
            if settings.polish {
                if let Some(mut sol) = polish::polish(qp, s, &zb, &yb, settings) {
                    sol.iterations = iter;
                    return sol;
                }
            }
            let sol = finish(qp, s, &zb, &ye, &yb, QpStatus::Optimal, iter);
            if sol.kkt_residuals.within(settings.tolerance) {
                return sol;
            }
            rel_tol *= 0.1;
            if rel_tol < 1e-14 {
                rel_tol = 0.0;
            }
        }

        if settings.adaptive_rho {
            let new_rho = adapted_rho(s, &x, &zb, &ye, &yb, kkt.rho);
            if new_rho > 5.0 * kkt.rho || new_rho < 0.2 * kkt.rho {
                match factors.kkt(s, settings.sigma, new_rho) {
                    Some(k) => kkt = k,
                    None => break,
                }
            }
        }
    }
    finish(qp, s, &zb, &ye, &yb, QpStatus::MaxIter, settings.max_iter)
}

fn finish(
    qp: &QuadProgram,
    s: &ScaledProblem,
    zb: &[f64],
    ye: &[f64],
    yb: &[f64],
    status: QpStatus,
    iterations: usize,
) -> QpSolution {
    let z = s.unscale_primal(zb);
    let duals = DualSet {
        eq: s.unscale_eq_dual(ye),
        bound: s.unscale_bound_dual(yb),
    };
    let kkt = check_kkt(qp, &z, &duals).unwrap_or_default();
    let status = match status {
        QpStatus::Optimal if !kkt.within(f64::INFINITY) => QpStatus::MaxIter,
        other => other,
    };
    QpSolution {
        objective: qp.objective(&z),
        z,
        status,
        kkt_residuals: kkt,
        duals,
        iterations,
        polished: false,
    }
}

// Unscaled OSQP-style residuals with their normalizers.
fn residuals(qp: &QuadProgram, s: &ScaledProblem, x: &[f64], zb: &[f64], ye: &[f64], yb: &[f64]) -> Residuals {
    let n = qp.n();
    let xu = s.unscale_primal(x);
    let zu = s.unscale_primal(zb);
    let yeu = s.unscale_eq_dual(ye);
    let ybu = s.unscale_bound_dual(yb);

    let ax = qp.aeq.mul_vec(&xu);
    let mut prim = 0.0f64;
    for (a, b) in ax.iter().zip(&qp.beq) {
        prim = prim.max(libm::fabs(a - b));
    }
    for i in 0..n {
        prim = prim.max(libm::fabs(xu[i] - zu[i]));
    }
    let prim_scale = norm_inf(&ax)
        .max(norm_inf(&qp.beq))
        .max(norm_inf(&xu))
        .max(norm_inf(&zu));

    let px = qp.p.mul_vec(&xu);
    let aty = qp.aeq.mul_transpose_vec(&yeu);
    let mut dual = 0.0f64;
    for i in 0..n {
        dual = dual.max(libm::fabs(px[i] + qp.q[i] + aty[i] + ybu[i]));
    }
    let dual_scale = norm_inf(&px)
        .max(norm_inf(&aty))
        .max(norm_inf(&ybu))
        .max(norm_inf(&qp.q));
    Residuals {
        prim,
        dual,
        prim_scale,
        dual_scale,
    }
}

fn adapted_rho(s: &ScaledProblem, x: &[f64], zb: &[f64], ye: &[f64], yb: &[f64], rho: f64) -> f64 {
    let n = x.len();
    let ax = s.aeq.mul_vec(x);
    let mut prim = 0.0f64;
    for (a, b) in ax.iter().zip(&s.beq) {
        prim = prim.max(libm::fabs(a - b));
    }
    for i in 0..n {
        prim = prim.max(libm::fabs(x[i] - zb[i]));
    }
    let prim_norm = norm_inf(&ax)
        .max(norm_inf(&s.beq))
        .max(norm_inf(x))
        .max(norm_inf(zb));
    let px = s.p.mul_vec(x);
    let aty = s.aeq.mul_transpose_vec(ye);
    let mut dual = 0.0f64;
    for i in 0..n {
        dual = dual.max(libm::fabs(px[i] + s.q[i] + aty[i] + yb[i]));
    }
    let dual_norm = norm_inf(&px)
        .max(norm_inf(&aty))
        .max(norm_inf(yb))
        .max(norm_inf(&s.q));
    let tiny = 1e-30;
    let ratio = (prim / (prim_norm + tiny)) / (dual / (dual_norm + tiny) + tiny);
    (rho * libm::sqrt(ratio)).clamp(RHO_MIN, RHO_MAX)
}

// A normalized dual step δy with Aeqᵀδy_e + δy_b ≈ 0 and a negative support
// value beqᵀδy_e + ubᵀδy_b⁺ + lbᵀδy_b⁻ is a Farkas certificate.
fn certify_infeasible(
    qp: &QuadProgram,
    s: &ScaledProblem,
    ye: &[f64],
    ye_prev: &[f64],
    yb: &[f64],
    yb_prev: &[f64],
    tol: f64,
) -> bool {
    let dye: Vec<f64> = ye.iter().zip(ye_prev).map(|(a, b)| a - b).collect();
    let dyb: Vec<f64> = yb.iter().zip(yb_prev).map(|(a, b)| a - b).collect();
    let mut de = s.unscale_eq_dual(&dye);
    let mut db = s.unscale_bound_dual(&dyb);
    let norm = norm_inf(&de).max(norm_inf(&db));
    if !(norm > 1e-12) {
        return false;
    }
    de.iter_mut().for_each(|v| *v /= norm);
    db.iter_mut().for_each(|v| *v /= norm);

    let mut at = qp.aeq.mul_transpose_vec(&de);
    for (a, b) in at.iter_mut().zip(&db) {
        *a += b;
    }
    if norm_inf(&at) > tol {
        return false;
    }
    let mut support: f64 = de.iter().zip(&qp.beq).map(|(y, b)| y * b).sum();
    for i in 0..db.len() {
        let y = db[i];
        let bound = if y > 0.0 { qp.ub[i] } else { qp.lb[i] };
        if y == 0.0 {
            continue;
        }
        if bound.is_finite() {
            support += bound * y;
        } else if libm::fabs(y) > tol {
            return false;
        }
    }
    support < -tol
}
