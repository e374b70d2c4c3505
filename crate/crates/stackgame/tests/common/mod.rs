#![allow(dead_code)]

use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use stackgame::synthetic::{generate_synthetic, SyntheticSpec};
use stackgame_core::Problem;

/// The small reference instance: 3 tanks, 2 followers, 2 leaders, 24 steps, seed 42.
pub fn fixture() -> Problem {
    generate_synthetic(&SyntheticSpec::default()).unwrap()
}

pub fn fixture_with(f: impl FnOnce(&mut SyntheticSpec)) -> Problem {
    let mut spec = SyntheticSpec::default();
    f(&mut spec);
    generate_synthetic(&spec).unwrap()
}

pub fn scratch(name: &str) -> tempfile::TempDir {
    tempfile::Builder::new().prefix(name).tempdir().unwrap()
}

/// Every file below `dir` as (relative path, bytes), sorted by path.
pub fn snapshot(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    fn walk(root: &Path, dir: &Path, out: &mut Vec<(PathBuf, Vec<u8>)>) {
        for entry in std::fs::read_dir(dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                walk(root, &path, out);
            } else {
                out.push((path.strip_prefix(root).unwrap().to_path_buf(), std::fs::read(&path).unwrap()));
            }
        }
    }
    let mut out = Vec::new();
    walk(dir, dir, &mut out);
    out.sort();
    out
}

/// Dense convex QP `min ½zᵀHz + fᵀz + c` subject to `Cz = d`, `Gz ≤ h`.
pub struct DenseQp {
    pub h: DMatrix<f64>,
    pub f: DVector<f64>,
    pub c0: f64,
    pub c: DMatrix<f64>,
    pub d: DVector<f64>,
    pub g: DMatrix<f64>,
    pub hv: DVector<f64>,
}

/// The joint follower problem at `a`, written over inputs only: states are
/// eliminated through the dynamics and their bounds become rows of `G`.
/// Variable order is follower, then step, then input.
pub fn reduced_joint_qp(p: &Problem, a: &[f64]) -> DenseQp {
    let net = &p.network;
    let sc = &p.scenario;
    let t_len = sc.horizon;
    let nf = net.n_followers();
    let mut offset = vec![0usize; nf + 1];
    for i in 0..nf {
        offset[i + 1] = offset[i] + net.n_u(i) * t_len;
    }
    let n = offset[nf];
    let var = |i: usize, k: usize, c: usize| offset[i] + k * net.n_u(i) + c;
    let dense = |m: &stackgame_core::Matrix| DMatrix::from_fn(m.rows(), m.cols(), |r, c| m.row(r)[c]);

    let mut h = DMatrix::zeros(n, n);
    let mut f = DVector::zeros(n);
    let mut c0 = 0.0;
    for i in 0..nf {
        let r = dense(&p.costs.r_blocks[i]);
        let nu = net.n_u(i);
        let prev = DVector::from_vec(sc.prior_input(net, i));
        c0 += prev.dot(&(&r * &prev));
        for k in 0..t_len {
            for c in 0..nu {
                f[var(i, k, c)] += p.costs.alpha[i][k][c];
            }
            // (u_k - u_{k-1})ᵀR(u_k - u_{k-1}) with u_{-1} the prior input.
            for r1 in 0..nu {
                for r2 in 0..nu {
                    let w = 2.0 * r[(r1, r2)];
                    h[(var(i, k, r1), var(i, k, r2))] += w;
                    if k > 0 {
                        h[(var(i, k - 1, r1), var(i, k - 1, r2))] += w;
                        h[(var(i, k, r1), var(i, k - 1, r2))] -= w;
                        h[(var(i, k - 1, r1), var(i, k, r2))] -= w;
                    } else {
                        f[var(i, 0, r1)] -= w * prev[r2];
                    }
                }
            }
        }
    }

    // x_k = x_aff[k] + x_lin[k] z
    let am = dense(&net.a);
    let bl = dense(&net.b_l);
    let mut x_aff = vec![DVector::from_vec(sc.x0.clone())];
    let mut x_lin = vec![DMatrix::zeros(net.n_x, n)];
    for k in 0..t_len {
        let aff = &am * &x_aff[k] + &bl * DVector::from_vec(sc.demand[k].clone());
        let mut lin = &am * &x_lin[k];
        for i in 0..nf {
            let b = dense(&net.b_blocks[i]);
            for c in 0..net.n_u(i) {
                for s in 0..net.n_x {
                    lin[(s, var(i, k, c))] += b[(s, c)];
                }
            }
        }
        x_aff.push(aff);
        x_lin.push(lin);
    }

    let xmax = p.state_upper_bound(a).unwrap();
    let mut g_rows: Vec<DVector<f64>> = Vec::new();
    let mut h_vals = Vec::new();
    for k in 1..=t_len {
        for s in 0..net.n_x {
            let row = x_lin[k].row(s).transpose();
            g_rows.push(row.clone());
            h_vals.push(xmax[s] - x_aff[k][s]);
            g_rows.push(-row);
            h_vals.push(x_aff[k][s] - net.x_min[s]);
        }
    }
    for i in 0..nf {
        for k in 0..t_len {
            for c in 0..net.n_u(i) {
                let mut e = DVector::zeros(n);
                e[var(i, k, c)] = 1.0;
                g_rows.push(e.clone());
                h_vals.push(net.u_max_blocks[i][c]);
                g_rows.push(-e);
                h_vals.push(-net.u_min_blocks[i][c]);
            }
        }
    }
    let mut c_rows: Vec<DVector<f64>> = Vec::new();
    let mut d_vals = Vec::new();
    let ed = dense(&net.e_d);
    for k in 0..t_len {
        let rhs = -(&ed * DVector::from_vec(sc.demand[k].clone()));
        for e in 0..net.n_e() {
            let mut row = DVector::zeros(n);
            for i in 0..nf {
                let eb = dense(&net.e_blocks[i]);
                for c in 0..net.n_u(i) {
                    row[var(i, k, c)] = eb[(e, c)];
                }
            }
            c_rows.push(row);
            d_vals.push(rhs[e]);
        }
    }
    let stack = |rows: &[DVector<f64>]| DMatrix::from_fn(rows.len(), n, |r, c| rows[r][c]);
    DenseQp {
        h,
        f,
        c0,
        c: stack(&c_rows),
        d: DVector::from_vec(d_vals),
        g: stack(&g_rows),
        hv: DVector::from_vec(h_vals),
    }
}

fn step_to_boundary(v: &DVector<f64>, dv: &DVector<f64>) -> f64 {
    v.iter()
        .zip(dv.iter())
        .filter(|(_, d)| **d < 0.0)
        .map(|(x, d)| -x / d)
        .fold(1.0, f64::min)
}

/// Mehrotra predictor-corrector interior point method on the dense KKT
/// system. Returns the minimizer and the objective including `c0`.
pub fn interior_point(qp: &DenseQp) -> (DVector<f64>, f64) {
    let n = qp.f.len();
    let me = qp.d.len();
    let mi = qp.hv.len();
    let mut z = DVector::zeros(n);
    let mut y = DVector::zeros(me);
    let mut s = (&qp.hv - &qp.g * &z).map(|v| v.max(1.0));
    let mut lam = DVector::from_element(mi, 1.0);
    let scale = 1.0 + qp.f.amax() + qp.hv.amax();
    for _ in 0..200 {
        let rd = &qp.h * &z + &qp.f + qp.c.transpose() * &y + qp.g.transpose() * &lam;
        let rp = &qp.c * &z - &qp.d;
        let rg = &qp.g * &z + &s - &qp.hv;
        let mu = s.dot(&lam) / mi as f64;
        if rd.amax() < 1e-10 * scale && rp.amax().max(rg.amax()) < 1e-10 * scale && mu < 1e-13 * scale {
            break;
        }
        let w = lam.component_div(&s);
        let mut k = DMatrix::zeros(n + me, n + me);
        let gw = DMatrix::from_fn(mi, n, |r, c| qp.g[(r, c)] * w[r]);
        k.view_mut((0, 0), (n, n)).copy_from(&(&qp.h + qp.g.transpose() * gw));
        k.view_mut((0, n), (n, me)).copy_from(&qp.c.transpose());
        k.view_mut((n, 0), (me, n)).copy_from(&qp.c);
        for e in 0..me {
            k[(n + e, n + e)] = -1e-14;
        }
        let lu = k.lu();
        let solve = |rc: &DVector<f64>| {
            let mut rhs = DVector::zeros(n + me);
            let top = -&rd - qp.g.transpose() * (w.component_mul(&rg) + rc.component_div(&s));
            rhs.rows_mut(0, n).copy_from(&top);
            rhs.rows_mut(n, me).copy_from(&(-&rp));
            let sol = lu.solve(&rhs).expect("singular KKT system");
            let dz = sol.rows(0, n).into_owned();
            let dy = sol.rows(n, me).into_owned();
            let dlam = w.component_mul(&(&qp.g * &dz + &rg)) + rc.component_div(&s);
            let ds = (rc - s.component_mul(&dlam)).component_div(&lam);
            (dz, dy, dlam, ds)
        };
        let sl = s.component_mul(&lam);
        let (_, _, dlam_a, ds_a) = solve(&(-&sl));
        let alpha_a = step_to_boundary(&s, &ds_a).min(step_to_boundary(&lam, &dlam_a));
        let mu_a = (&s + alpha_a * &ds_a).dot(&(&lam + alpha_a * &dlam_a)) / mi as f64;
        let sigma = (mu_a / mu).powi(3);
        let rc = DVector::from_element(mi, sigma * mu) - &sl - ds_a.component_mul(&dlam_a);
        let (dz, dy, dlam, ds) = solve(&rc);
        let alpha = (0.99 * step_to_boundary(&s, &ds).min(step_to_boundary(&lam, &dlam))).min(1.0);
        z += alpha * dz;
        y += alpha * dy;
        lam += alpha * dlam;
        s += alpha * ds;
    }
    let obj = 0.5 * z.dot(&(&qp.h * &z)) + qp.f.dot(&z) + qp.c0;
    (z, obj)
}

/// Splits an oracle solution into `[follower][k][input]`.
pub fn unpack_inputs(p: &Problem, z: &DVector<f64>) -> Vec<Vec<Vec<f64>>> {
    let net = &p.network;
    let t_len = p.scenario.horizon;
    let mut at = 0;
    (0..net.n_followers())
        .map(|i| {
            (0..t_len)
                .map(|_| {
                    let row = z.rows(at, net.n_u(i)).iter().copied().collect();
                    at += net.n_u(i);
                    row
                })
                .collect()
        })
        .collect()
}
