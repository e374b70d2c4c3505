//! Leader layer: leader costs over the finite design lattice, memoized
//! follower responses, leader best-response dynamics, exhaustive cooperative
//! minimization and pure-equilibrium enumeration.
//!
//! Profiles are addressed by [`ProfileIndex`] (one action index per leader);
//! every lattice walk runs in lexicographic index order, which is also the
//! tie-break order of every argmin.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::sync::Arc;
use alloc::vec::Vec;
use core::cell::{Cell, RefCell};

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::follower::{
    follower_nash_with, solve_cooperative_with, FollowerBehavior, FollowerEquilibriumCert, FollowerTrajectorySet,
    FollowerWorkspace, GameConfig,
};
use crate::linalg::dot;
use crate::model::{DesignSpace, LeaderProfile, Problem, ProfileIndex};

/// Follower result at one leader profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FollowerResponse {
    pub trajectories: FollowerTrajectorySet,
    pub cert: FollowerEquilibriumCert,
}

/// Everything the leader layer knows about one profile. Infeasible profiles
/// carry `+∞` leader costs and no response.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileOutcome {
    pub index: ProfileIndex,
    pub profile: LeaderProfile,
    pub feasible: bool,
    pub leader_costs: Vec<f64>,
    pub total_leader_cost: f64,
    pub total_follower_cost: f64,
    pub response: Option<FollowerResponse>,
}

impl ProfileOutcome {
    pub fn infeasible(design: &DesignSpace, index: ProfileIndex) -> Self {
        ProfileOutcome {
            profile: design.profile(&index),
            index,
            feasible: false,
            leader_costs: alloc::vec![f64::INFINITY; design.n_leaders()],
            total_leader_cost: f64::INFINITY,
            total_follower_cost: f64::INFINITY,
            response: None,
        }
    }

    /// Outcome with given leader costs and no follower data, for cost tables
    /// that do not come from a follower game.
    pub fn from_costs(design: &DesignSpace, index: ProfileIndex, leader_costs: Vec<f64>) -> Self {
        let feasible = leader_costs.iter().all(|c| c.is_finite());
        ProfileOutcome {
            profile: design.profile(&index),
            index,
            feasible,
            total_leader_cost: leader_costs.iter().sum(),
            leader_costs,
            total_follower_cost: if feasible { 0.0 } else { f64::INFINITY },
            response: None,
        }
    }

    fn from_response(problem: &Problem, index: ProfileIndex, response: FollowerResponse) -> Self {
        let profile = problem.design.profile(&index);
        let leader_costs: Vec<f64> = (0..problem.design.n_leaders())
            .map(|j| leader_cost(problem, j, &profile, &response.trajectories))
            .collect();
        ProfileOutcome {
            total_leader_cost: leader_costs.iter().sum(),
            total_follower_cost: response.trajectories.total,
            index,
            profile,
            feasible: true,
            leader_costs,
            response: Some(response),
        }
    }
}

/// `J_j = aᵀQ_j a + v_jᵀa + Σ_i Σ_{k<T} α_{i,k}ᵀu_{i,k}`.
pub fn leader_cost(problem: &Problem, j: usize, a: &[f64], trajectories: &FollowerTrajectorySet) -> f64 {
    let costs = &problem.costs;
    let design = costs.leader_q(j).quad_form(a) + dot(costs.leader_v(j), a);
    let operating: f64 = trajectories
        .inputs
        .iter()
        .zip(&costs.alpha)
        .map(|(u, alpha)| u.iter().zip(alpha).map(|(uk, ak)| dot(ak, uk)).sum::<f64>())
        .sum();
    design + operating
}

/// Solves the follower layer at one profile and evaluates the leader costs.
/// Follower infeasibility becomes an infeasible outcome; other errors pass
/// through.
pub fn evaluate_profile(
    problem: &Problem,
    cfg: &GameConfig,
    behavior: FollowerBehavior,
    index: &[usize],
    ws: &mut FollowerWorkspace,
) -> Result<ProfileOutcome, Error> {
    let a = problem.design.profile(index);
    let result = match behavior {
        FollowerBehavior::Cooperative => solve_cooperative_with(problem, &a, ws).map(|t| FollowerResponse {
            trajectories: t,
            cert: FollowerEquilibriumCert::cooperative(problem.network.n_followers()),
        }),
        FollowerBehavior::NonCooperative => {
            follower_nash_with(problem, &a, cfg, ws).map(|(trajectories, cert)| FollowerResponse { trajectories, cert })
        }
    };
    match result {
        Ok(response) => Ok(ProfileOutcome::from_response(problem, index.to_vec(), response)),
        Err(Error::FollowerInfeasible { .. } | Error::BestResponseInfeasible { .. }) => {
            Ok(ProfileOutcome::infeasible(&problem.design, index.to_vec()))
        }
        Err(e) => Err(e),
    }
}

/// Read-through access to profile outcomes.
pub trait ResponseSource {
    fn design(&self) -> &DesignSpace;
    fn behavior(&self) -> FollowerBehavior;
    /// Outcome at `index`. Feasible outcomes may omit the follower response
    /// when the costs were restored from elsewhere.
    fn outcome(&self, index: &[usize]) -> Result<Arc<ProfileOutcome>, Error>;
    /// Outcome at `index` with the follower response present when feasible.
    fn full_outcome(&self, index: &[usize]) -> Result<Arc<ProfileOutcome>, Error> {
        self.outcome(index)
    }
}

/// Single-threaded memo of follower responses for one follower behavior.
pub struct ResponseCache<'p> {
    problem: &'p Problem,
    cfg: GameConfig,
    behavior: FollowerBehavior,
    entries: RefCell<BTreeMap<ProfileIndex, Arc<ProfileOutcome>>>,
    workspace: RefCell<FollowerWorkspace>,
    evaluations: Cell<usize>,
}

impl<'p> ResponseCache<'p> {
    pub fn new(problem: &'p Problem, cfg: &GameConfig, behavior: FollowerBehavior) -> Self {
        ResponseCache {
            problem,
            cfg: *cfg,
            behavior,
            entries: RefCell::new(BTreeMap::new()),
            workspace: RefCell::new(FollowerWorkspace::new(cfg.qp, problem.network.n_followers())),
            evaluations: Cell::new(0),
        }
    }

    pub fn problem(&self) -> &'p Problem {
        self.problem
    }

    pub fn len(&self) -> usize {
        self.entries.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.borrow().is_empty()
    }

    /// Follower-layer solves performed so far.
    pub fn evaluations(&self) -> usize {
        self.evaluations.get()
    }

    /// Cached outcomes in lexicographic profile order.
    pub fn entries(&self) -> Vec<Arc<ProfileOutcome>> {
        self.entries.borrow().values().cloned().collect()
    }

    pub fn clear(&self) {
        self.entries.borrow_mut().clear();
    }
}

impl ResponseSource for ResponseCache<'_> {
    fn design(&self) -> &DesignSpace {
        &self.problem.design
    }

    fn behavior(&self) -> FollowerBehavior {
        self.behavior
    }

    fn outcome(&self, index: &[usize]) -> Result<Arc<ProfileOutcome>, Error> {
        check_index(&self.problem.design, index)?;
        if let Some(hit) = self.entries.borrow().get(index) {
            return Ok(hit.clone());
        }
        let outcome = evaluate_profile(
            self.problem,
            &self.cfg,
            self.behavior,
            index,
            &mut self.workspace.borrow_mut(),
        )?;
        self.evaluations.set(self.evaluations.get() + 1);
        let outcome = Arc::new(outcome);
        self.entries.borrow_mut().insert(index.to_vec(), outcome.clone());
        Ok(outcome)
    }
}

pub fn check_index(design: &DesignSpace, index: &[usize]) -> Result<(), Error> {
    if index.len() != design.n_leaders() {
        return Err(Error::ProfileLength {
            expected: design.n_leaders(),
            got: index.len(),
        });
    }
    for (j, (&k, set)) in index.iter().zip(&design.action_sets).enumerate() {
        if k >= set.len() {
            return Err(Error::Invalid(alloc::format!("action index {k} out of range for leader {j}")));
        }
    }
    Ok(())
}

/// Why the best-response dynamics stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LeaderTermination {
    /// A full round in which no leader moved.
    Converged,
    /// A move led back to a profile visited earlier.
    Cycle,
    RoundCap,
    /// The whole lattice was searched (cooperative leaders).
    Exhaustive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeaderEquilibriumCert {
    pub epsilon: f64,
    /// Largest unilateral improvement available at the returned profile
    /// (`+∞` when an infeasible profile is returned and a feasible deviation
    /// exists). For cooperative leaders this is the improvement of the total
    /// cost over the lattice, which is zero.
    pub max_gain: f64,
    pub rounds: usize,
    pub converged: bool,
    /// Distinct profiles whose outcome was queried.
    pub visited_profiles: usize,
    pub termination: LeaderTermination,
    /// The dynamics did not converge and the returned profile came from
    /// exhaustive enumeration.
    pub fallback: bool,
}

// Improvement of moving from `from` to `to`, with infeasible profiles at +∞.
fn improvement(from: f64, to: f64) -> f64 {
    match (from.is_finite(), to.is_finite()) {
        (true, true) => from - to,
        (false, true) => f64::INFINITY,
        (true, false) => f64::NEG_INFINITY,
        (false, false) => 0.0,
    }
}

struct Tracker<'s, S: ResponseSource + ?Sized> {
    source: &'s S,
    seen: BTreeSet<ProfileIndex>,
}

impl<S: ResponseSource + ?Sized> Tracker<'_, S> {
    fn get(&mut self, index: &[usize]) -> Result<Arc<ProfileOutcome>, Error> {
        if !self.seen.contains(index) {
            self.seen.insert(index.to_vec());
        }
        self.source.outcome(index)
    }

    // Lowest-index minimizer of leader j's cost over its actions, with its
    // improvement over the current action.
    fn best_action(&mut self, j: usize, current: &[usize]) -> Result<(usize, f64), Error> {
        let here = self.get(current)?.leader_costs[j];
        let mut probe = current.to_vec();
        let mut best = (current[j], here);
        for k in 0..self.source.design().action_sets[j].len() {
            probe[j] = k;
            let c = self.get(&probe)?.leader_costs[j];
            if improvement(best.1, c) > 0.0 || (c == best.1 && k < best.0) {
                best = (k, c);
            }
        }
        Ok((best.0, improvement(here, best.1)))
    }

    fn max_gain(&mut self, at: &[usize]) -> Result<f64, Error> {
        let mut gain: f64 = 0.0;
        for j in 0..self.source.design().n_leaders() {
            gain = gain.max(self.best_action(j, at)?.1);
        }
        Ok(gain)
    }
}

/// Cyclic leader best-response dynamics from `start` (nominal profile when
/// `None`). A leader moves to its lowest-index best action only when that
/// improves its cost by more than `cfg.epsilon_leader`. Stops after a round
/// without moves, on revisiting a profile, or at `cfg.max_rounds`. Without
/// convergence and with a lattice of at most `cfg.enumeration_cap` profiles,
/// the pure equilibrium of least total cost is returned instead, if any.
pub fn leader_nash<S: ResponseSource + ?Sized>(
    source: &S,
    cfg: &GameConfig,
    start: Option<&[usize]>,
) -> Result<(ProfileIndex, LeaderEquilibriumCert), Error> {
    let design = source.design();
    let eps = cfg.epsilon_leader;
    if !(eps >= 0.0) {
        return Err(Error::Invalid("epsilon_leader must be non-negative".into()));
    }
    let mut current = match start {
        Some(s) => {
            check_index(design, s)?;
            s.to_vec()
        }
        None => design.nominal_index(),
    };
    let mut tracker = Tracker {
        source,
        seen: BTreeSet::new(),
    };
    let mut path: BTreeSet<ProfileIndex> = BTreeSet::new();
    path.insert(current.clone());
    let mut rounds = 0;
    let mut termination = LeaderTermination::RoundCap;
    'rounds: while rounds < cfg.max_rounds.max(1) {
        rounds += 1;
        let mut moved = false;
        for j in 0..design.n_leaders() {
            let (k, gain) = tracker.best_action(j, &current)?;
            if gain > eps {
                current[j] = k;
                moved = true;
                if !path.insert(current.clone()) {
                    termination = LeaderTermination::Cycle;
                    break 'rounds;
                }
            }
        }
        if !moved {
            termination = LeaderTermination::Converged;
            break;
        }
    }

    let mut max_gain = tracker.max_gain(&current)?;
    let mut converged = termination == LeaderTermination::Converged;
    let mut fallback = false;
    if !converged && design.lattice_size() <= cfg.enumeration_cap {
        let equilibria = enumerate_pure_nash(source, eps, cfg.enumeration_cap)?;
        let mut best: Option<(f64, ProfileIndex)> = None;
        for idx in equilibria {
            let total = tracker.get(&idx)?.total_leader_cost;
            if best.as_ref().is_none_or(|(t, _)| total < *t) {
                best = Some((total, idx));
            }
        }
        if let Some((_, idx)) = best {
            current = idx;
            max_gain = tracker.max_gain(&current)?;
            converged = true;
            fallback = true;
        }
    }
    let feasible = tracker.get(&current)?.feasible;
    let cert = LeaderEquilibriumCert {
        epsilon: eps,
        max_gain,
        rounds,
        converged: converged && feasible && max_gain <= eps,
        visited_profiles: tracker.seen.len(),
        termination,
        fallback,
    };
    Ok((current, cert))
}

/// Exact minimizer of the total leader cost over the lattice; ties go to the
/// lexicographically smallest index.
pub fn leader_cooperative<S: ResponseSource + ?Sized>(
    source: &S,
    cap: usize,
) -> Result<(ProfileIndex, LeaderEquilibriumCert), Error> {
    let design = source.design();
    let size = design.lattice_size();
    if size > cap {
        return Err(Error::LatticeTooLarge { size, cap });
    }
    let mut best: Option<(f64, ProfileIndex)> = None;
    for idx in design.lattice() {
        let total = source.outcome(&idx)?.total_leader_cost;
        if total.is_finite() && best.as_ref().is_none_or(|(t, _)| total < *t) {
            best = Some((total, idx));
        }
    }
    let (_, idx) = best.ok_or(Error::AllProfilesInfeasible)?;
    let cert = LeaderEquilibriumCert {
        epsilon: 0.0,
        max_gain: 0.0,
        rounds: 0,
        converged: true,
        visited_profiles: size,
        termination: LeaderTermination::Exhaustive,
        fallback: false,
    };
    Ok((idx, cert))
}

/// Every feasible profile at which no leader can improve its own cost by more
/// than `epsilon` through a unilateral change, in lexicographic order.
pub fn enumerate_pure_nash<S: ResponseSource + ?Sized>(
    source: &S,
    epsilon: f64,
    cap: usize,
) -> Result<Vec<ProfileIndex>, Error> {
    let design = source.design();
    let size = design.lattice_size();
    if size > cap {
        return Err(Error::LatticeTooLarge { size, cap });
    }
    let costs: Vec<Arc<ProfileOutcome>> = design.lattice().map(|idx| source.outcome(&idx)).collect::<Result<_, _>>()?;
    let strides: Vec<usize> = (0..design.n_leaders())
        .map(|j| design.action_sets[j + 1..].iter().map(Vec::len).product())
        .collect();
    let mut out = Vec::new();
    for (rank, here) in costs.iter().enumerate() {
        if !here.feasible {
            continue;
        }
        let stable = (0..design.n_leaders()).all(|j| {
            let base = rank - here.index[j] * strides[j];
            (0..design.action_sets[j].len())
                .all(|k| improvement(here.leader_costs[j], costs[base + k * strides[j]].leader_costs[j]) <= epsilon)
        });
        if stable {
            out.push(here.index.clone());
        }
    }
    Ok(out)
}
