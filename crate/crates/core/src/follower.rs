//! Follower layer: transcription of the follower problems into QPs, the
//! cooperative joint solve, unilateral best responses and Gauss–Seidel
//! best-response dynamics with an ε-Nash certificate.
//!
//! Decision vector of a QP over a follower subset `S`:
//! `[u_0; …; u_{T-1}; x_0; …; x_T]`, where each `u_k` stacks the inputs of the
//! members of `S` in ascending follower order. `x_0` is pinned by equal bounds.
//! The same builder serves the joint problem (`S` = everyone) and a best
//! response (`S` = one follower), so a one-follower best response is the
//! joint problem, bit for bit.

use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::model::Problem;
use crate::qp::{DualSet, QpSettings, QpSolution, QpSolver, QpStatus, QuadProgram};
use crate::sparse::SparseMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum FollowerBehavior {
    Cooperative,
    NonCooperative,
}

/// Starting profile of the best-response dynamics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NashStart {
    /// The cooperative optimum. With shared state constraints and separable
    /// costs it is already an equilibrium, so the dynamics only certify it.
    Cooperative,
    /// Joint solve under seeded random prices: each input pays, at every
    /// step, a price drawn uniformly from the range of its true prices. The
    /// dynamics can then settle at a different equilibrium.
    RandomPrices { seed: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GameConfig {
    /// Relative-absolute follower tolerance: follower `i` may gain at most
    /// `epsilon_follower · max(1, |V_i|)`.
    pub epsilon_follower: f64,
    pub max_sweeps: usize,
    /// Absolute tolerance on leader cost improvements.
    pub epsilon_leader: f64,
    pub max_rounds: usize,
    /// Largest lattice the leader layer is allowed to enumerate.
    pub enumeration_cap: usize,
    pub nash_start: NashStart,
    pub qp: QpSettings,
}

impl Default for GameConfig {
    fn default() -> Self {
        GameConfig {
            epsilon_follower: 1e-4,
            max_sweeps: 100,
            epsilon_leader: 0.0,
            max_rounds: 100,
            enumeration_cap: 10_000,
            nash_start: NashStart::Cooperative,
            qp: QpSettings::default(),
        }
    }
}

/// Inputs, induced states and costs of every follower.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FollowerTrajectorySet {
    /// Indexed `[follower][k][input]`, `k < T`.
    pub inputs: Vec<Vec<Vec<f64>>>,
    /// Indexed `[k][state]`, `k ≤ T`.
    pub states: Vec<Vec<f64>>,
    pub costs: Vec<f64>,
    pub total: f64,
}

/// Worst violations of the trajectory invariants.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct TrajectoryResiduals {
    pub dynamics: f64,
    pub balance: f64,
    pub input_bounds: f64,
    pub state_bounds: f64,
}

impl FollowerTrajectorySet {
    /// Simulates the states from `inputs` and evaluates every follower cost.
    pub fn from_inputs(problem: &Problem, inputs: Vec<Vec<Vec<f64>>>) -> Self {
        let states = simulate(problem, &inputs);
        let costs: Vec<f64> = (0..inputs.len())
            .map(|i| follower_cost(problem, i, &inputs[i]))
            .collect();
        let total = costs.iter().sum();
        FollowerTrajectorySet {
            inputs,
            states,
            costs,
            total,
        }
    }

    pub fn residuals(&self, problem: &Problem, xmax: &[f64]) -> TrajectoryResiduals {
        let net = &problem.network;
        let sc = &problem.scenario;
        let mut r = TrajectoryResiduals::default();
        for k in 0..sc.horizon {
            let mut next = net.a.mul_vec(&self.states[k]);
            net.b_l.mul_vec_acc(&sc.demand[k], &mut next);
            let mut bal = net.e_d.mul_vec(&sc.demand[k]);
            for i in 0..net.n_followers() {
                net.b_blocks[i].mul_vec_acc(&self.inputs[i][k], &mut next);
                net.e_blocks[i].mul_vec_acc(&self.inputs[i][k], &mut bal);
                for (c, &u) in self.inputs[i][k].iter().enumerate() {
                    let over = (net.u_min_blocks[i][c] - u).max(u - net.u_max_blocks[i][c]);
                    r.input_bounds = r.input_bounds.max(over);
                }
            }
            for (a, b) in next.iter().zip(&self.states[k + 1]) {
                r.dynamics = r.dynamics.max(libm::fabs(a - b));
            }
            for v in bal {
                r.balance = r.balance.max(libm::fabs(v));
            }
        }
        for x in &self.states {
            for s in 0..net.n_x {
                r.state_bounds = r.state_bounds.max(net.x_min[s] - x[s]).max(x[s] - xmax[s]);
            }
        }
        r
    }
}

/// Forward simulation of the dynamics from the scenario's initial state.
pub fn simulate(problem: &Problem, inputs: &[Vec<Vec<f64>>]) -> Vec<Vec<f64>> {
    let net = &problem.network;
    let sc = &problem.scenario;
    let mut states = Vec::with_capacity(sc.horizon + 1);
    states.push(sc.x0.clone());
    for k in 0..sc.horizon {
        let mut next = net.a.mul_vec(&states[k]);
        for (i, u) in inputs.iter().enumerate() {
            net.b_blocks[i].mul_vec_acc(&u[k], &mut next);
        }
        net.b_l.mul_vec_acc(&sc.demand[k], &mut next);
        states.push(next);
    }
    states
}

/// `V_i = Σ_k α_{i,k}ᵀu_{i,k} + Δu_{i,k}ᵀ R_i Δu_{i,k}` with the scenario's
/// prior input defining `Δu_{i,0}`.
pub fn follower_cost(problem: &Problem, i: usize, u: &[Vec<f64>]) -> f64 {
    let r = &problem.costs.r_blocks[i];
    let mut prev = problem.scenario.prior_input(&problem.network, i);
    let mut v = 0.0;
    for (k, uk) in u.iter().enumerate() {
        v += crate::linalg::dot(&problem.costs.alpha[i][k], uk);
        let du: Vec<f64> = uk.iter().zip(&prev).map(|(a, b)| a - b).collect();
        v += r.quad_form(&du);
        prev.clone_from(uk);
    }
    v
}

/// Certificate of the best-response dynamics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FollowerEquilibriumCert {
    pub epsilon: f64,
    /// Largest improvement of any follower relative to `max(1, |V_i|)`;
    /// comparable with `epsilon`.
    pub max_gain: f64,
    /// Improvement each follower found in the last pass.
    pub gains: Vec<f64>,
    /// Improvement each follower was allowed, `epsilon · max(1, |V_i|)`.
    pub thresholds: Vec<f64>,
    pub sweeps: usize,
    pub converged: bool,
    /// QP solves spent.
    pub solves: usize,
}

impl FollowerEquilibriumCert {
    /// Certificate of a cooperative (single optimization) response.
    pub fn cooperative(n_followers: usize) -> Self {
        FollowerEquilibriumCert {
            epsilon: 0.0,
            max_gain: 0.0,
            gains: vec![0.0; n_followers],
            thresholds: vec![0.0; n_followers],
            sweeps: 0,
            converged: true,
            solves: 1,
        }
    }
}

/// Unilateral best response of one follower.
#[derive(Debug, Clone, PartialEq)]
pub struct BestResponse {
    /// Indexed `[k][input]`.
    pub inputs: Vec<Vec<f64>>,
    pub cost: f64,
}

/// Reusable QP solvers, one for the joint problem and one per follower.
pub struct FollowerWorkspace {
    joint: QpSolver,
    single: Vec<QpSolver>,
    last_single: Vec<Option<QpSolution>>,
}

impl FollowerWorkspace {
    pub fn new(settings: QpSettings, n_followers: usize) -> Self {
        FollowerWorkspace {
            joint: QpSolver::new(settings),
            single: (0..n_followers).map(|_| QpSolver::new(settings)).collect(),
            last_single: vec![None; n_followers],
        }
    }
}

struct Layout {
    members: Vec<usize>,
    offset: Vec<usize>,
    per_step: usize,
    n_x: usize,
    horizon: usize,
}

impl Layout {
    fn new(problem: &Problem, members: Vec<usize>) -> Self {
        let mut offset = Vec::with_capacity(members.len());
        let mut per_step = 0;
        for &f in &members {
            offset.push(per_step);
            per_step += problem.network.n_u(f);
        }
        Layout {
            members,
            offset,
            per_step,
            n_x: problem.network.n_x,
            horizon: problem.scenario.horizon,
        }
    }

    fn u(&self, k: usize, local: usize, c: usize) -> usize {
        k * self.per_step + self.offset[local] + c
    }

    fn x(&self, k: usize, s: usize) -> usize {
        self.horizon * self.per_step + k * self.n_x + s
    }

    fn n(&self) -> usize {
        self.horizon * self.per_step + (self.horizon + 1) * self.n_x
    }

    fn pack(&self, inputs: &[Vec<Vec<f64>>], states: &[Vec<f64>]) -> Vec<f64> {
        let mut z = vec![0.0; self.n()];
        for k in 0..self.horizon {
            for (local, &f) in self.members.iter().enumerate() {
                for (c, &v) in inputs[f][k].iter().enumerate() {
                    z[self.u(k, local, c)] = v;
                }
            }
        }
        for (k, x) in states.iter().enumerate() {
            for (s, &v) in x.iter().enumerate() {
                z[self.x(k, s)] = v;
            }
        }
        z
    }

    fn unpack(&self, problem: &Problem, z: &[f64], local: usize) -> Vec<Vec<f64>> {
        let nu = problem.network.n_u(self.members[local]);
        (0..self.horizon)
            .map(|k| (0..nu).map(|c| z[self.u(k, local, c)]).collect())
            .collect()
    }
}

struct Infeasible;

fn build_qp(
    problem: &Problem,
    xmax: &[f64],
    layout: &Layout,
    profile: Option<&[Vec<Vec<f64>>]>,
    prices: &[Vec<Vec<f64>>],
) -> Result<QuadProgram, Infeasible> {
    let net = &problem.network;
    let sc = &problem.scenario;
    let costs = &problem.costs;
    let t_len = layout.horizon;
    let n_x = net.n_x;
    let n = layout.n();
    let is_member: Vec<bool> = (0..net.n_followers())
        .map(|f| layout.members.contains(&f))
        .collect();

    let mut p_trip = Vec::new();
    let mut q = vec![0.0; n];
    for (local, &f) in layout.members.iter().enumerate() {
        let r = &costs.r_blocks[f];
        let nu = net.n_u(f);
        let prev = sc.prior_input(net, f);
        for k in 0..t_len {
            let diag_weight = if k + 1 < t_len { 4.0 } else { 2.0 };
            for a in 0..nu {
                for b in 0..nu {
                    let w = r[(a, b)];
                    if w != 0.0 {
                        p_trip.push((layout.u(k, local, a), layout.u(k, local, b), diag_weight * w));
                        if k + 1 < t_len {
                            p_trip.push((layout.u(k, local, a), layout.u(k + 1, local, b), -2.0 * w));
                            p_trip.push((layout.u(k + 1, local, a), layout.u(k, local, b), -2.0 * w));
                        }
                    }
                }
                q[layout.u(k, local, a)] += prices[f][k][a];
            }
        }
        if t_len > 0 {
            let rp = r.mul_vec(&prev);
            for a in 0..nu {
                q[layout.u(0, local, a)] -= 2.0 * rp[a];
            }
        }
    }

    let mut a_trip = Vec::new();
    let mut beq = Vec::new();
    for k in 0..t_len {
        for s in 0..n_x {
            let row = beq.len();
            a_trip.push((row, layout.x(k + 1, s), 1.0));
            for c in 0..n_x {
                let v = net.a[(s, c)];
                if v != 0.0 {
                    a_trip.push((row, layout.x(k, c), -v));
                }
            }
            let mut rhs = crate::linalg::dot(net.b_l.row(s), &sc.demand[k]);
            for f in 0..net.n_followers() {
                let b = net.b_blocks[f].row(s);
                if let Some(local) = layout.members.iter().position(|&m| m == f) {
                    for (c, &v) in b.iter().enumerate() {
                        if v != 0.0 {
                            a_trip.push((row, layout.u(k, local, c), -v));
                        }
                    }
                } else if let Some(prof) = profile {
                    rhs += crate::linalg::dot(b, &prof[f][k]);
                }
            }
            beq.push(rhs);
        }
        for e in 0..net.n_e() {
            let touches = (0..net.n_followers()).any(|f| is_member[f] && !net.e_blocks[f].row_is_zero(e));
            let mut rhs = -crate::linalg::dot(net.e_d.row(e), &sc.demand[k]);
            if !touches {
                // a row no member can move: only the joint problem can be
                // inconsistent here, best responses leave it to the others
                if layout.members.len() == net.n_followers() && libm::fabs(rhs) > 1e-9 * (1.0 + libm::fabs(rhs)) {
                    return Err(Infeasible);
                }
                continue;
            }
            let row = beq.len();
            for f in 0..net.n_followers() {
                let erow = net.e_blocks[f].row(e);
                if let Some(local) = layout.members.iter().position(|&m| m == f) {
                    for (c, &v) in erow.iter().enumerate() {
                        if v != 0.0 {
                            a_trip.push((row, layout.u(k, local, c), v));
                        }
                    }
                } else if let Some(prof) = profile {
                    rhs -= crate::linalg::dot(erow, &prof[f][k]);
                }
            }
            beq.push(rhs);
        }
    }

    let mut lb = vec![0.0; n];
    let mut ub = vec![0.0; n];
    for k in 0..t_len {
        for (local, &f) in layout.members.iter().enumerate() {
            for c in 0..net.n_u(f) {
                lb[layout.u(k, local, c)] = net.u_min_blocks[f][c];
                ub[layout.u(k, local, c)] = net.u_max_blocks[f][c];
            }
        }
    }
    for s in 0..n_x {
        if sc.x0[s] < net.x_min[s] || sc.x0[s] > xmax[s] || net.x_min[s] > xmax[s] {
            return Err(Infeasible);
        }
        lb[layout.x(0, s)] = sc.x0[s];
        ub[layout.x(0, s)] = sc.x0[s];
        for k in 1..=t_len {
            lb[layout.x(k, s)] = net.x_min[s];
            ub[layout.x(k, s)] = xmax[s];
        }
    }

    let p = SparseMatrix::from_triplets(n, n, &p_trip);
    let aeq = SparseMatrix::from_triplets(beq.len(), n, &a_trip);
    QuadProgram::new(p, q, aeq, beq, lb, ub).map_err(|_| Infeasible)
}

fn all_followers(problem: &Problem) -> Vec<usize> {
    (0..problem.network.n_followers()).collect()
}

/// The joint QP of all followers at leader profile `a`.
pub fn build_cooperative_qp(problem: &Problem, a: &[f64]) -> Result<QuadProgram, Error> {
    let xmax = problem.state_upper_bound(a)?;
    let layout = Layout::new(problem, all_followers(problem));
    build_qp(problem, &xmax, &layout, None, &problem.costs.alpha).map_err(|_| Error::FollowerInfeasible { profile: a.to_vec() })
}

/// The best-response QP of follower `i` against `profile` (`[follower][k][input]`).
pub fn build_best_response_qp(
    problem: &Problem,
    a: &[f64],
    i: usize,
    profile: &[Vec<Vec<f64>>],
) -> Result<QuadProgram, Error> {
    let xmax = problem.state_upper_bound(a)?;
    let layout = Layout::new(problem, vec![i]);
    build_qp(problem, &xmax, &layout, Some(profile), &problem.costs.alpha).map_err(|_| Error::BestResponseInfeasible {
        profile: a.to_vec(),
        follower: i,
    })
}

fn solve_joint(
    problem: &Problem,
    xmax: &[f64],
    a: &[f64],
    prices: &[Vec<Vec<f64>>],
    ws: &mut FollowerWorkspace,
) -> Result<FollowerTrajectorySet, Error> {
    let layout = Layout::new(problem, all_followers(problem));
    let infeasible = || Error::FollowerInfeasible { profile: a.to_vec() };
    let qp = build_qp(problem, xmax, &layout, None, prices).map_err(|_| infeasible())?;
    let sol = ws.joint.solve(&qp, None);
    match sol.status {
        QpStatus::Optimal => {}
        QpStatus::Infeasible => return Err(infeasible()),
        QpStatus::MaxIter => return Err(Error::Solver(QpStatus::MaxIter)),
    }
    let inputs = (0..layout.members.len())
        .map(|local| layout.unpack(problem, &sol.z, local))
        .collect();
    Ok(FollowerTrajectorySet::from_inputs(problem, inputs))
}

/// Cooperative response: the joint minimizer of `Σ_i V_i` at profile `a`.
pub fn solve_cooperative(problem: &Problem, a: &[f64], cfg: &GameConfig) -> Result<FollowerTrajectorySet, Error> {
    let mut ws = FollowerWorkspace::new(cfg.qp, problem.network.n_followers());
    solve_cooperative_with(problem, a, &mut ws)
}

pub fn solve_cooperative_with(
    problem: &Problem,
    a: &[f64],
    ws: &mut FollowerWorkspace,
) -> Result<FollowerTrajectorySet, Error> {
    let xmax = problem.state_upper_bound(a)?;
    solve_joint(problem, &xmax, a, &problem.costs.alpha, ws)
}

/// Best response of follower `i` with every other follower's inputs taken
/// from `profile`; the state box is shared.
pub fn best_response(
    problem: &Problem,
    a: &[f64],
    i: usize,
    profile: &[Vec<Vec<f64>>],
    cfg: &GameConfig,
) -> Result<BestResponse, Error> {
    let mut ws = FollowerWorkspace::new(cfg.qp, problem.network.n_followers());
    let xmax = problem.state_upper_bound(a)?;
    best_response_with(problem, &xmax, a, i, profile, None, &mut ws)
}

fn best_response_with(
    problem: &Problem,
    xmax: &[f64],
    a: &[f64],
    i: usize,
    profile: &[Vec<Vec<f64>>],
    states: Option<&[Vec<f64>]>,
    ws: &mut FollowerWorkspace,
) -> Result<BestResponse, Error> {
    if i >= problem.network.n_followers() || profile.len() != problem.network.n_followers() {
        return Err(Error::DimensionMismatch("follower index or profile size".into()));
    }
    let infeasible = || Error::BestResponseInfeasible {
        profile: a.to_vec(),
        follower: i,
    };
    let layout = Layout::new(problem, vec![i]);
    let qp = build_qp(problem, xmax, &layout, Some(profile), &problem.costs.alpha).map_err(|_| infeasible())?;
    let hint = states.map(|x| layout.pack(profile, x));
    let duals: Option<DualSet> = ws.last_single[i].as_ref().map(|s| s.duals.clone());
    let sol = ws.single[i].solve_warm(&qp, hint.as_deref(), duals.as_ref());
    match sol.status {
        QpStatus::Optimal => {}
        QpStatus::Infeasible => return Err(infeasible()),
        QpStatus::MaxIter => return Err(Error::Solver(QpStatus::MaxIter)),
    }
    let inputs = layout.unpack(problem, &sol.z, 0);
    let cost = follower_cost(problem, i, &inputs);
    ws.last_single[i] = Some(sol);
    Ok(BestResponse { inputs, cost })
}

/// Gauss–Seidel best-response dynamics in ascending follower order.
///
/// A follower adopts its best response only when it improves by more than its
/// tolerance. A pass in which nobody moves was computed against one frozen
/// profile and is therefore the ε-Nash test itself; it ends the dynamics with
/// `converged = true`. If the sweep cap is hit first, one extra frozen pass
/// measures the remaining gains.
pub fn follower_nash(
    problem: &Problem,
    a: &[f64],
    cfg: &GameConfig,
) -> Result<(FollowerTrajectorySet, FollowerEquilibriumCert), Error> {
    let mut ws = FollowerWorkspace::new(cfg.qp, problem.network.n_followers());
    follower_nash_with(problem, a, cfg, &mut ws)
}

pub fn follower_nash_with(
    problem: &Problem,
    a: &[f64],
    cfg: &GameConfig,
    ws: &mut FollowerWorkspace,
) -> Result<(FollowerTrajectorySet, FollowerEquilibriumCert), Error> {
    let xmax = problem.state_upper_bound(a)?;
    let m = problem.network.n_followers();
    let start_prices = match cfg.nash_start {
        NashStart::RandomPrices { seed } if m > 1 => Some(random_prices(problem, seed)),
        _ => None,
    };
    let prices = start_prices.as_deref().unwrap_or(&problem.costs.alpha);
    let start = match solve_joint(problem, &xmax, a, prices, ws) {
        Ok(t) => t,
        Err(Error::Solver(_)) => {
            let zero = (0..m)
                .map(|i| vec![vec![0.0; problem.network.n_u(i)]; problem.scenario.horizon])
                .collect();
            FollowerTrajectorySet::from_inputs(problem, zero)
        }
        Err(e) => return Err(e),
    };
    let (eq, mut cert) = best_response_dynamics(problem, &xmax, a, cfg, start, ws)?;
    cert.solves += 1;
    Ok((eq, cert))
}

/// Best-response dynamics from a caller-supplied starting profile, e.g. a
/// cooperative response computed earlier. `cfg.nash_start` is ignored.
pub fn follower_nash_from(
    problem: &Problem,
    a: &[f64],
    cfg: &GameConfig,
    start: FollowerTrajectorySet,
    ws: &mut FollowerWorkspace,
) -> Result<(FollowerTrajectorySet, FollowerEquilibriumCert), Error> {
    let xmax = problem.state_upper_bound(a)?;
    let m = problem.network.n_followers();
    if start.inputs.len() != m {
        return Err(Error::DimensionMismatch("starting profile size".into()));
    }
    best_response_dynamics(problem, &xmax, a, cfg, start, ws)
}

fn best_response_dynamics(
    problem: &Problem,
    xmax: &[f64],
    a: &[f64],
    cfg: &GameConfig,
    mut current: FollowerTrajectorySet,
    ws: &mut FollowerWorkspace,
) -> Result<(FollowerTrajectorySet, FollowerEquilibriumCert), Error> {
    let m = problem.network.n_followers();
    let eps = cfg.epsilon_follower;
    ws.last_single.iter_mut().for_each(|s| *s = None);
    let mut solves = 0;

    let threshold = |v: f64| eps * libm::fabs(v).max(1.0);
    let mut gains = vec![0.0; m];
    let mut thresholds = vec![0.0; m];
    let mut sweeps = 0;
    let mut converged = false;
    while sweeps < cfg.max_sweeps.max(1) {
        sweeps += 1;
        let mut moved = false;
        for i in 0..m {
            let br = best_response_with(problem, xmax, a, i, &current.inputs, Some(&current.states), ws)?;
            solves += 1;
            gains[i] = current.costs[i] - br.cost;
            thresholds[i] = threshold(current.costs[i]);
            if gains[i] > thresholds[i] {
                let mut inputs = current.inputs;
                inputs[i] = br.inputs;
                current = FollowerTrajectorySet::from_inputs(problem, inputs);
                moved = true;
            }
        }
        if !moved {
            converged = true;
            break;
        }
    }
    if !converged {
        for i in 0..m {
            let br = best_response_with(problem, xmax, a, i, &current.inputs, Some(&current.states), ws)?;
            solves += 1;
            gains[i] = current.costs[i] - br.cost;
            thresholds[i] = threshold(current.costs[i]);
        }
        converged = (0..m).all(|i| gains[i] <= thresholds[i]);
    }
    let max_gain = (0..m)
        .map(|i| gains[i] / libm::fabs(current.costs[i]).max(1.0))
        .fold(f64::NEG_INFINITY, f64::max)
        .max(0.0);
    let cert = FollowerEquilibriumCert {
        epsilon: eps,
        max_gain,
        gains,
        thresholds,
        sweeps,
        converged,
        solves,
    };
    Ok((current, cert))
}

fn random_prices(problem: &Problem, seed: u64) -> Vec<Vec<Vec<f64>>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    problem
        .costs
        .alpha
        .iter()
        .map(|rows| {
            let nu = rows.first().map_or(0, Vec::len);
            let lo: Vec<f64> = (0..nu).map(|c| rows.iter().map(|r| r[c]).fold(f64::INFINITY, f64::min)).collect();
            let hi: Vec<f64> = (0..nu).map(|c| rows.iter().map(|r| r[c]).fold(f64::NEG_INFINITY, f64::max)).collect();
            rows.iter()
                .map(|_| (0..nu).map(|c| lo[c] + (hi[c] - lo[c]) * rng.random::<f64>()).collect())
                .collect()
        })
        .collect()
}

/// Checks that the joint problem is feasible at the componentwise smallest and
/// largest leader profiles.
pub fn feasibility_probe(problem: &Problem, cfg: &GameConfig) -> Result<(), Error> {
    let d = &problem.design;
    let pick = |largest: bool| -> Vec<f64> {
        d.action_sets
            .iter()
            .map(|s| {
                s.iter()
                    .copied()
                    .fold(if largest { f64::NEG_INFINITY } else { f64::INFINITY }, |acc, v| {
                        if largest {
                            acc.max(v)
                        } else {
                            acc.min(v)
                        }
                    })
            })
            .collect()
    };
    let mut ws = FollowerWorkspace::new(cfg.qp, problem.network.n_followers());
    for a in [pick(false), pick(true)] {
        solve_cooperative_with(problem, &a, &mut ws)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Matrix;
    use crate::model::{CostParams, DesignSpace, NetworkModel, Scenario, Units};

    fn single_tank(horizon: usize, alpha: f64) -> Problem {
        Problem {
            network: NetworkModel {
                n_x: 1,
                n_d: 1,
                followers: vec!["f0".into()],
                a: Matrix::identity(1),
                b_blocks: vec![Matrix::identity(1)],
                b_l: Matrix::from_diagonal(&[-1.0]),
                e_blocks: vec![Matrix::zeros(0, 1)],
                e_d: Matrix::zeros(0, 1),
                x_min: vec![0.0],
                x_bar_max: vec![10.0],
                u_min_blocks: vec![vec![0.0]],
                u_max_blocks: vec![vec![1.0]],
                designed_states: vec![0],
            },
            design: DesignSpace {
                leaders: vec!["l0".into()],
                action_sets: vec![vec![0.5, 1.0]],
                state_of_leader: vec![0],
            },
            costs: CostParams {
                r_blocks: vec![Matrix::identity(1)],
                alpha: vec![vec![vec![alpha]; horizon]],
                q_leader: Matrix::zeros(1, 1),
                v_leader: vec![0.01],
                leader_overrides: vec![],
            },
            scenario: Scenario {
                horizon,
                dt: 1.0,
                x0: vec![5.0],
                demand: vec![vec![0.0]; horizon],
                u_prev: vec![],
            },
            units: Units::default(),
        }
    }

    #[test]
    fn qp_cost_matches_follower_cost() {
        let mut p = single_tank(3, 0.7);
        p.scenario.u_prev = vec![vec![0.4]];
        let qp = build_cooperative_qp(&p, &[1.0]).unwrap();
        let u = vec![vec![0.2], vec![0.9], vec![0.5]];
        let traj = FollowerTrajectorySet::from_inputs(&p, vec![u]);
        let layout = Layout::new(&p, vec![0]);
        let z = layout.pack(&traj.inputs, &traj.states);
        let constant = 0.4 * 0.4;
        assert!((qp.objective(&z) + constant - traj.total).abs() < 1e-12);
    }

    #[test]
    fn positive_price_drives_inputs_to_lower_corner() {
        let p = single_tank(2, 1.0);
        let t = solve_cooperative(&p, &[1.0], &GameConfig::default()).unwrap();
        for k in 0..2 {
            assert!(t.inputs[0][k][0].abs() < 1e-7);
        }
        assert!(t.total.abs() < 1e-7);
    }

    #[test]
    fn single_follower_nash_is_cooperative() {
        let mut p = single_tank(4, -1.0);
        p.scenario.demand = vec![vec![0.3]; 4];
        let cfg = GameConfig::default();
        let coop = solve_cooperative(&p, &[0.5], &cfg).unwrap();
        let (nash, cert) = follower_nash(&p, &[0.5], &cfg).unwrap();
        assert!(cert.converged);
        assert_eq!(cert.sweeps, 1);
        assert_eq!(nash, coop);
    }

    #[test]
    fn infeasible_initial_state_is_reported() {
        let p = single_tank(2, 1.0);
        let mut q = p.clone();
        q.scenario.x0 = vec![6.0];
        assert_eq!(
            solve_cooperative(&q, &[0.5], &GameConfig::default()),
            Err(Error::FollowerInfeasible { profile: vec![0.5] })
        );
    }
}
