use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use stackgame_core::sparse::SparseMatrix;
use stackgame_core::{check_kkt, solve_qp, DualSet, Matrix, QpSettings, QpStatus, QuadProgram};

const INF: f64 = f64::INFINITY;

fn dense(rows: &[Vec<f64>]) -> SparseMatrix {
    SparseMatrix::from_dense(&Matrix::from_rows(rows).unwrap())
}

fn program(p: &DMatrix<f64>, q: &[f64], a: &DMatrix<f64>, b: &[f64], lb: &[f64], ub: &[f64]) -> QuadProgram {
    let rows = |m: &DMatrix<f64>| -> Vec<Vec<f64>> {
        (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect()).collect()
    };
    let aeq = if a.nrows() == 0 {
        SparseMatrix::zeros(0, q.len())
    } else {
        dense(&rows(a))
    };
    QuadProgram::new(dense(&rows(p)), q.to_vec(), aeq, b.to_vec(), lb.to_vec(), ub.to_vec()).unwrap()
}

/// Strictly convex `P = MᵀM + shift·I`.
fn random_pd(rng: &mut ChaCha8Rng, n: usize, shift: f64) -> DMatrix<f64> {
    let m = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    m.transpose() * &m + DMatrix::identity(n, n) * shift
}

/// Solution of the equality-constrained KKT system
/// `[P Aᵀ; A 0] [z; y] = [-q; b]`.
fn kkt_oracle(p: &DMatrix<f64>, q: &[f64], a: &DMatrix<f64>, b: &[f64]) -> Option<DVector<f64>> {
    let n = q.len();
    let m = b.len();
    let mut k = DMatrix::zeros(n + m, n + m);
    k.view_mut((0, 0), (n, n)).copy_from(p);
    if m > 0 {
        k.view_mut((0, n), (n, m)).copy_from(&a.transpose());
        k.view_mut((n, 0), (m, n)).copy_from(a);
    }
    let mut rhs = DVector::zeros(n + m);
    for i in 0..n {
        rhs[i] = -q[i];
    }
    for i in 0..m {
        rhs[n + i] = b[i];
    }
    let sol = k.lu().solve(&rhs)?;
    Some(sol.rows(0, n).into_owned())
}

/// Exact minimizer of a strictly convex box-and-equality QP by enumerating
/// every assignment of each variable to free, lower or upper.
fn active_set_oracle(p: &DMatrix<f64>, q: &[f64], a: &DMatrix<f64>, b: &[f64], lb: &[f64], ub: &[f64]) -> Option<Vec<f64>> {
    let n = q.len();
    let m = b.len();
    let tol = 1e-9;
    for code in 0..3usize.pow(n as u32) {
        let mut state = vec![0u8; n];
        let mut c = code;
        for s in state.iter_mut() {
            *s = (c % 3) as u8;
            c /= 3;
        }
        let free: Vec<usize> = (0..n).filter(|&i| state[i] == 0).collect();
        let mut z = vec![0.0; n];
        for i in 0..n {
            match state[i] {
                1 => z[i] = lb[i],
                2 => z[i] = ub[i],
                _ => {}
            }
        }
        let nf = free.len();
        let mut k = DMatrix::zeros(nf + m, nf + m);
        let mut rhs = DVector::zeros(nf + m);
        for (r, &i) in free.iter().enumerate() {
            for (c, &j) in free.iter().enumerate() {
                k[(r, c)] = p[(i, j)];
            }
            for e in 0..m {
                k[(r, nf + e)] = a[(e, i)];
                k[(nf + e, r)] = a[(e, i)];
            }
            rhs[r] = -q[i] - (0..n).filter(|&j| state[j] != 0).map(|j| p[(i, j)] * z[j]).sum::<f64>();
        }
        for e in 0..m {
            rhs[nf + e] = b[e] - (0..n).filter(|&j| state[j] != 0).map(|j| a[(e, j)] * z[j]).sum::<f64>();
        }
        let sol = if nf + m == 0 {
            DVector::zeros(0)
        } else {
            let Some(sol) = k.clone().lu().solve(&rhs) else { continue };
            sol
        };
        if (&k * &sol - &rhs).amax() > 1e-8 {
            continue;
        }
        for (r, &i) in free.iter().enumerate() {
            z[i] = sol[r];
        }
        if (0..n).any(|i| z[i] < lb[i] - tol || z[i] > ub[i] + tol) {
            continue;
        }
        let y: Vec<f64> = (0..m).map(|e| sol[nf + e]).collect();
        let grad: Vec<f64> = (0..n)
            .map(|i| {
                (0..n).map(|j| p[(i, j)] * z[j]).sum::<f64>() + q[i] + (0..m).map(|e| a[(e, i)] * y[e]).sum::<f64>()
            })
            .collect();
        let dual_ok = (0..n).all(|i| match state[i] {
            1 => grad[i] >= -1e-9,
            2 => grad[i] <= 1e-9,
            _ => true,
        });
        if dual_ok {
            return Some(z);
        }
    }
    None
}

fn max_rel(a: &[f64], b: &[f64]) -> f64 {
    let scale = b.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max) / scale
}

#[test]
fn unconstrained_minimum_at_origin() {
    let qp = QuadProgram::boxed(dense(&[vec![2.0]]), vec![0.0], vec![-INF], vec![INF]).unwrap();
    let sol = solve_qp(&qp, &QpSettings::default());
    assert_eq!(sol.status, QpStatus::Optimal);
    assert!(sol.z[0].abs() < 1e-12);
    assert!(sol.objective.abs() < 1e-12);
}

#[test]
fn box_clamps_the_unconstrained_minimizer() {
    let qp = QuadProgram::boxed(dense(&[vec![2.0]]), vec![-2.0], vec![2.0], vec![3.0]).unwrap();
    let sol = solve_qp(&qp, &QpSettings::default());
    assert_eq!(sol.status, QpStatus::Optimal);
    // The objective z² - 2z is increasing on [2, 3]; its endpoint values are 0 and 3.
    let endpoints = [qp.objective(&[2.0]), qp.objective(&[3.0])];
    assert_eq!(endpoints, [0.0, 3.0]);
    assert!((sol.z[0] - 2.0).abs() < 1e-8);
    assert!((sol.objective - 0.0).abs() < 1e-8);
}

#[test]
fn linear_objective_on_a_simplex_edge() {
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
    // Constant on the feasible set: both vertices give 1.
    assert_eq!(qp.objective(&[1.0, 0.0]), 1.0);
    assert_eq!(qp.objective(&[0.0, 1.0]), 1.0);
    assert!((sol.objective - 1.0).abs() < 1e-6);
    assert!(sol.kkt_residuals.within(1e-6));
}

#[test]
fn kkt_residuals_of_exact_and_perturbed_points() {
    let qp = QuadProgram::boxed(dense(&[vec![2.0]]), vec![0.0], vec![-INF], vec![INF]).unwrap();
    let r = check_kkt(&qp, &[0.0], &DualSet::zeros(1, 0)).unwrap();
    assert_eq!(r.max(), 0.0);

    let boxed = QuadProgram::boxed(dense(&[vec![2.0]]), vec![-2.0], vec![2.0], vec![3.0]).unwrap();
    let sol = solve_qp(&boxed, &QpSettings::default());
    let moved = [sol.z[0] + 1e-3];
    let r = check_kkt(&boxed, &moved, &sol.duals).unwrap();
    // Stationarity moves by P·1e-3 = 2e-3 and the bound dual loses complementarity.
    assert!(r.stationarity >= 1e-4 || r.complementarity >= 1e-4, "{r:?}");

    let r = check_kkt(&boxed, &[3.5], &DualSet::zeros(1, 0)).unwrap();
    assert_eq!(r.bound_violation, 0.5);
    let r = check_kkt(&boxed, &[1.25], &DualSet::zeros(1, 0)).unwrap();
    assert_eq!(r.bound_violation, 0.75);
}

#[test]
fn equality_constrained_instances_match_dense_kkt() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let settings = QpSettings::default();
    let mut checked = 0;
    for case in 0..140 {
        let n: usize = rng.random_range(2..=20);
        let m = rng.random_range(0..=n / 2);
        let p = random_pd(&mut rng, n, 0.5);
        let q: Vec<f64> = (0..n).map(|_| rng.random_range(-5.0..5.0)).collect();
        let a = DMatrix::from_fn(m, n, |_, _| rng.random_range(-1.0..1.0));
        let b: Vec<f64> = (0..m).map(|_| rng.random_range(-2.0..2.0)).collect();
        let z_star = kkt_oracle(&p, &q, &a, &b).expect("oracle KKT system singular");
        // Half the cases carry finite bounds far from the oracle solution so
        // the iterative path runs; the rest take the direct KKT path.
        let (lb, ub) = if case % 2 == 0 {
            (vec![-INF; n], vec![INF; n])
        } else {
            let r = z_star.amax() + 10.0;
            (vec![-r; n], vec![r; n])
        };
        let qp = program(&p, &q, &a, &b, &lb, &ub);
        let sol = solve_qp(&qp, &settings);
        assert_eq!(sol.status, QpStatus::Optimal, "case {case}");
        // No bound is active at the oracle solution.
        assert!((0..n).all(|i| z_star[i] > lb[i] + 1.0 && z_star[i] < ub[i] - 1.0));
        let err = max_rel(&sol.z, z_star.as_slice());
        assert!(err <= 1e-6, "case {case}: relative error {err:e}");
        assert!(sol.kkt_residuals.within(1e-6), "case {case}: {:?}", sol.kkt_residuals);
        let again = check_kkt(&qp, &sol.z, &sol.duals).unwrap();
        assert!(again.within(1e-6), "case {case}: {again:?}");
        checked += 1;
    }
    assert!(checked >= 100);
}

#[test]
fn bounded_instances_match_active_set_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let settings = QpSettings::default();
    for case in 0..60 {
        let n: usize = rng.random_range(1..=6);
        let m = rng.random_range(0..=n.saturating_sub(1).min(2));
        let p = random_pd(&mut rng, n, 0.2);
        let q: Vec<f64> = (0..n).map(|_| rng.random_range(-4.0..4.0)).collect();
        let x0: Vec<f64> = (0..n).map(|_| rng.random_range(-0.5..0.5)).collect();
        let a = DMatrix::from_fn(m, n, |_, _| rng.random_range(-1.0..1.0));
        // Right-hand side through an interior point keeps the set non-empty.
        let b: Vec<f64> = (0..m).map(|e| (0..n).map(|j| a[(e, j)] * x0[j]).sum()).collect();
        let lb = vec![-1.0; n];
        let ub = vec![1.0; n];
        let z_star = active_set_oracle(&p, &q, &a, &b, &lb, &ub).expect("oracle found no KKT point");
        let qp = program(&p, &q, &a, &b, &lb, &ub);
        let sol = solve_qp(&qp, &settings);
        assert_eq!(sol.status, QpStatus::Optimal, "case {case}");
        let err = max_rel(&sol.z, &z_star);
        assert!(err <= 1e-6, "case {case}: relative error {err:e}");
        assert!((sol.objective - qp.objective(&z_star)).abs() <= 1e-6 * qp.objective(&z_star).abs().max(1.0));
    }
}

#[test]
fn contradictory_constraints_are_infeasible() {
    let qp = QuadProgram::new(
        dense(&[vec![1.0, 0.0], vec![0.0, 1.0]]),
        vec![0.0, 0.0],
        dense(&[vec![1.0, 1.0]]),
        vec![5.0],
        vec![0.0, 0.0],
        vec![1.0, 1.0],
    )
    .unwrap();
    assert_eq!(solve_qp(&qp, &QpSettings::default()).status, QpStatus::Infeasible);
}

#[test]
fn malformed_programs_are_rejected() {
    assert!(QuadProgram::boxed(dense(&[vec![1.0, 2.0], vec![0.0, 1.0]]), vec![0.0; 2], vec![-1.0; 2], vec![1.0; 2]).is_err());
    assert!(QuadProgram::boxed(dense(&[vec![1.0]]), vec![0.0], vec![1.0], vec![0.0]).is_err());
    assert!(QuadProgram::boxed(dense(&[vec![1.0]]), vec![0.0, 0.0], vec![0.0], vec![1.0]).is_err());
}

fn psd_program(seed: u64, n: usize) -> (DMatrix<f64>, Vec<f64>, Vec<f64>, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // Rank-deficient factor, so P is only semidefinite.
    let k = rng.random_range(1..=n);
    let f = DMatrix::from_fn(k, n, |_, _| rng.random_range(-1.0..1.0));
    let p = f.transpose() * f;
    let q = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
    let lb = (0..n).map(|_| rng.random_range(-2.0..-0.5)).collect();
    let ub = (0..n).map(|_| rng.random_range(0.5..2.0)).collect();
    (p, q, lb, ub)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn shrinking_the_box_never_lowers_the_optimum(seed in any::<u64>(), n in 1usize..=12, shrink in 0.0f64..0.9) {
        let (p, q, lb, ub) = psd_program(seed, n);
        let none = DMatrix::zeros(0, n);
        let wide = program(&p, &q, &none, &[], &lb, &ub);
        let lb2: Vec<f64> = lb.iter().map(|v| v * (1.0 - shrink)).collect();
        let ub2: Vec<f64> = ub.iter().map(|v| v * (1.0 - shrink)).collect();
        let narrow = program(&p, &q, &none, &[], &lb2, &ub2);
        let s = QpSettings::default();
        let a = solve_qp(&wide, &s);
        let b = solve_qp(&narrow, &s);
        prop_assert_eq!(a.status, QpStatus::Optimal);
        prop_assert_eq!(b.status, QpStatus::Optimal);
        prop_assert!(b.objective >= a.objective - 1e-6 * a.objective.abs().max(1.0));
    }

    #[test]
    fn identical_inputs_give_identical_solutions(seed in any::<u64>(), n in 1usize..=12) {
        let (p, q, lb, ub) = psd_program(seed, n);
        let qp = program(&p, &q, &DMatrix::zeros(0, n), &[], &lb, &ub);
        let s = QpSettings::default();
        let a = solve_qp(&qp, &s);
        let b = solve_qp(&qp, &s);
        prop_assert_eq!(a.z.iter().map(|v| v.to_bits()).collect::<Vec<_>>(), b.z.iter().map(|v| v.to_bits()).collect::<Vec<_>>());
        prop_assert_eq!(a.status, b.status);
    }
}
