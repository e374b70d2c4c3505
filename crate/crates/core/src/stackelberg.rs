//! The four Stackelberg classes and the prices of anarchy of both layers.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::follower::{
    follower_nash_with, FollowerBehavior, FollowerEquilibriumCert, FollowerTrajectorySet, FollowerWorkspace,
    GameConfig, NashStart,
};
use crate::leader::{
    enumerate_pure_nash, leader_cooperative, leader_nash, LeaderEquilibriumCert, ResponseCache, ResponseSource,
};
use crate::model::{LeaderProfile, Problem, ProfileIndex};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum LeaderBehavior {
    Cooperative,
    NonCooperative,
}

/// Classes by leader/follower behavior: I = NC/NC, II = C/C, III = NC/C,
/// IV = C/NC.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum StackelbergClass {
    I,
    II,
    III,
    IV,
}

impl StackelbergClass {
    pub const ALL: [StackelbergClass; 4] = [Self::I, Self::II, Self::III, Self::IV];

    pub fn from_behaviors(leaders: LeaderBehavior, followers: FollowerBehavior) -> Self {
        match (leaders, followers) {
            (LeaderBehavior::NonCooperative, FollowerBehavior::NonCooperative) => Self::I,
            (LeaderBehavior::Cooperative, FollowerBehavior::Cooperative) => Self::II,
            (LeaderBehavior::NonCooperative, FollowerBehavior::Cooperative) => Self::III,
            (LeaderBehavior::Cooperative, FollowerBehavior::NonCooperative) => Self::IV,
        }
    }

    pub fn leader_behavior(self) -> LeaderBehavior {
        match self {
            Self::I | Self::III => LeaderBehavior::NonCooperative,
            Self::II | Self::IV => LeaderBehavior::Cooperative,
        }
    }

    pub fn follower_behavior(self) -> FollowerBehavior {
        match self {
            Self::I | Self::IV => FollowerBehavior::NonCooperative,
            Self::II | Self::III => FollowerBehavior::Cooperative,
        }
    }

    pub fn tag(self) -> &'static str {
        match self {
            Self::I => "I",
            Self::II => "II",
            Self::III => "III",
            Self::IV => "IV",
        }
    }
}

impl fmt::Display for StackelbergClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for StackelbergClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s.trim().to_ascii_uppercase().as_str() {
            "I" | "1" => Ok(Self::I),
            "II" | "2" => Ok(Self::II),
            "III" | "3" => Ok(Self::III),
            "IV" | "4" => Ok(Self::IV),
            other => Err(Error::Invalid(alloc::format!("unknown class {other:?}"))),
        }
    }
}

/// Outcome of one class. Contains no timing data, so repeated solves
/// serialize identically.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumReport {
    pub class: StackelbergClass,
    pub leader_behavior: LeaderBehavior,
    pub follower_behavior: FollowerBehavior,
    pub profile: LeaderProfile,
    pub profile_index: ProfileIndex,
    pub leader_costs: Vec<f64>,
    pub total_leader_cost: f64,
    pub follower_costs: Vec<f64>,
    pub total_follower_cost: f64,
    pub trajectories: FollowerTrajectorySet,
    pub leader_cert: LeaderEquilibriumCert,
    pub follower_cert: FollowerEquilibriumCert,
    /// Distinct profiles whose follower response the class consulted.
    pub profiles_evaluated: usize,
}

/// Solves `class` with a fresh cache.
pub fn solve_class(class: StackelbergClass, problem: &Problem, cfg: &GameConfig) -> Result<EquilibriumReport, Error> {
    let cache = ResponseCache::new(problem, cfg, class.follower_behavior());
    solve_class_with(class, &cache, cfg)
}

/// Solves `class` on top of an existing response source, which must hold
/// responses of the class's follower behavior.
pub fn solve_class_with<S: ResponseSource + ?Sized>(
    class: StackelbergClass,
    source: &S,
    cfg: &GameConfig,
) -> Result<EquilibriumReport, Error> {
    if source.behavior() != class.follower_behavior() {
        return Err(Error::Invalid(alloc::format!(
            "class {class} needs {:?} follower responses",
            class.follower_behavior()
        )));
    }
    let (index, leader_cert) = match class.leader_behavior() {
        LeaderBehavior::NonCooperative => leader_nash(source, cfg, None)?,
        LeaderBehavior::Cooperative => leader_cooperative(source, cfg.enumeration_cap)?,
    };
    let outcome = source.full_outcome(&index)?;
    if !outcome.feasible {
        return Err(Error::AllProfilesInfeasible);
    }
    let response = outcome
        .response
        .clone()
        .ok_or_else(|| Error::Invalid("response source returned no follower data".into()))?;
    Ok(EquilibriumReport {
        class,
        leader_behavior: class.leader_behavior(),
        follower_behavior: class.follower_behavior(),
        profile: outcome.profile.clone(),
        profile_index: index,
        leader_costs: outcome.leader_costs.clone(),
        total_leader_cost: outcome.total_leader_cost,
        follower_costs: response.trajectories.costs.clone(),
        total_follower_cost: response.trajectories.total,
        trajectories: response.trajectories,
        profiles_evaluated: leader_cert.visited_profiles,
        leader_cert,
        follower_cert: response.cert,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PoALayer {
    Leader,
    Follower,
}

/// What a price of anarchy is taken over.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum PoARequest {
    /// Worst pure leader equilibrium over the leader optimum, with followers
    /// of the given behavior.
    Leader { followers: FollowerBehavior },
    /// Worst follower equilibrium over the follower optimum at the profile
    /// chosen by leaders of the given behavior facing non-cooperative
    /// followers (class I or IV).
    Follower { leaders: LeaderBehavior, starts: usize, seed: u64 },
    /// As `Follower`, at a fixed profile.
    FollowerAt { profile: ProfileIndex, starts: usize, seed: u64 },
}

/// How completely the equilibrium set behind the numerator was explored.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Multiplicity {
    /// Every pure equilibrium of the finite leader game was enumerated.
    Exhaustive,
    /// One follower equilibrium from the deterministic start; others may exist.
    Unexplored,
    /// The deterministic start plus `starts` seeded random starts.
    MultiStart { starts: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoAReport {
    pub layer: PoALayer,
    /// Behavior of the layer held fixed.
    pub context: String,
    pub ratio: f64,
    pub numerator: f64,
    pub denominator: f64,
    pub numerator_profile: LeaderProfile,
    pub denominator_profile: LeaderProfile,
    /// Distinct equilibria found.
    pub equilibria: usize,
    pub multiplicity: Multiplicity,
}

fn ratio(numerator: f64, denominator: f64) -> Result<f64, Error> {
    if !(denominator > 0.0 && denominator.is_finite()) {
        return Err(Error::Invalid("price of anarchy needs a positive finite optimum".into()));
    }
    Ok(numerator / denominator)
}

/// Price of anarchy for `request`. `cooperative` and `non_cooperative` hold
/// follower responses of the matching behavior.
pub fn price_of_anarchy<C, N>(
    problem: &Problem,
    cfg: &GameConfig,
    request: &PoARequest,
    cooperative: &C,
    non_cooperative: &N,
) -> Result<PoAReport, Error>
where
    C: ResponseSource + ?Sized,
    N: ResponseSource + ?Sized,
{
    if cooperative.behavior() != FollowerBehavior::Cooperative
        || non_cooperative.behavior() != FollowerBehavior::NonCooperative
    {
        return Err(Error::Invalid("response sources passed in the wrong order".into()));
    }
    match request {
        PoARequest::Leader { followers } => match followers {
            FollowerBehavior::Cooperative => leader_poa(problem, cfg, cooperative),
            FollowerBehavior::NonCooperative => leader_poa(problem, cfg, non_cooperative),
        },
        PoARequest::Follower { leaders, starts, seed } => {
            let class = StackelbergClass::from_behaviors(*leaders, FollowerBehavior::NonCooperative);
            let report = solve_class_with(class, non_cooperative, cfg)?;
            let mut out = follower_poa(problem, cfg, &report.profile_index, *starts, *seed, cooperative, non_cooperative)?;
            out.context = alloc::format!("leaders {leaders:?} (class {class})");
            Ok(out)
        }
        PoARequest::FollowerAt { profile, starts, seed } => {
            follower_poa(problem, cfg, profile, *starts, *seed, cooperative, non_cooperative)
        }
    }
}

fn leader_poa<S: ResponseSource + ?Sized>(problem: &Problem, cfg: &GameConfig, source: &S) -> Result<PoAReport, Error> {
    let equilibria = enumerate_pure_nash(source, cfg.epsilon_leader, cfg.enumeration_cap)?;
    let mut worst: Option<(f64, &ProfileIndex)> = None;
    for idx in &equilibria {
        let total = source.outcome(idx)?.total_leader_cost;
        if worst.is_none_or(|(t, _)| total > t) {
            worst = Some((total, idx));
        }
    }
    let (numerator, worst_idx) = worst.ok_or(Error::NoEquilibriumFound)?;
    let (best_idx, _) = leader_cooperative(source, cfg.enumeration_cap)?;
    let denominator = source.outcome(&best_idx)?.total_leader_cost;
    Ok(PoAReport {
        layer: PoALayer::Leader,
        context: alloc::format!("followers {:?}", source.behavior()),
        ratio: ratio(numerator, denominator)?,
        numerator,
        denominator,
        numerator_profile: problem.design.profile(worst_idx),
        denominator_profile: problem.design.profile(&best_idx),
        equilibria: equilibria.len(),
        multiplicity: Multiplicity::Exhaustive,
    })
}

fn follower_poa<C, N>(
    problem: &Problem,
    cfg: &GameConfig,
    index: &[usize],
    starts: usize,
    seed: u64,
    cooperative: &C,
    non_cooperative: &N,
) -> Result<PoAReport, Error>
where
    C: ResponseSource + ?Sized,
    N: ResponseSource + ?Sized,
{
    let coop = cooperative.full_outcome(index)?;
    let nash = non_cooperative.full_outcome(index)?;
    if !coop.feasible || !nash.feasible {
        return Err(Error::FollowerInfeasible {
            profile: coop.profile.clone(),
        });
    }
    let mut found: Vec<f64> = Vec::new();
    let converged = nash.response.as_ref().is_some_and(|r| r.cert.converged);
    if converged {
        found.push(nash.total_follower_cost);
    }
    let a = problem.design.profile(index);
    let mut ws = FollowerWorkspace::new(cfg.qp, problem.network.n_followers());
    for s in 0..starts as u64 {
        let start_cfg = GameConfig {
            nash_start: NashStart::RandomPrices {
                seed: seed.wrapping_add(s),
            },
            ..*cfg
        };
        let (eq, cert) = follower_nash_with(problem, &a, &start_cfg, &mut ws)?;
        if cert.converged {
            found.push(eq.total);
        }
    }
    let numerator = found.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if found.is_empty() {
        return Err(Error::NoEquilibriumFound);
    }
    // equilibria closer than the follower tolerance count once
    found.sort_by(f64::total_cmp);
    let tol = cfg.epsilon_follower * numerator.abs().max(1.0);
    let distinct = 1 + found.windows(2).filter(|w| w[1] - w[0] > tol).count();
    let denominator = coop.total_follower_cost;
    Ok(PoAReport {
        layer: PoALayer::Follower,
        context: alloc::format!("profile {a:?}"),
        ratio: ratio(numerator, denominator)?,
        numerator,
        denominator,
        numerator_profile: a.clone(),
        denominator_profile: a,
        equilibria: distinct,
        multiplicity: if starts == 0 {
            Multiplicity::Unexplored
        } else {
            Multiplicity::MultiStart { starts }
        },
    })
}

/// Solves the four classes over one pair of shared caches.
pub fn solve_all_classes(problem: &Problem, cfg: &GameConfig) -> Result<Vec<EquilibriumReport>, Error> {
    let coop = ResponseCache::new(problem, cfg, FollowerBehavior::Cooperative);
    let nash = ResponseCache::new(problem, cfg, FollowerBehavior::NonCooperative);
    StackelbergClass::ALL
        .iter()
        .map(|&class| match class.follower_behavior() {
            FollowerBehavior::Cooperative => solve_class_with(class, &coop, cfg),
            FollowerBehavior::NonCooperative => solve_class_with(class, &nash, cfg),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn class_table() {
        use FollowerBehavior as F;
        use LeaderBehavior as L;
        let expect = [
            (StackelbergClass::I, L::NonCooperative, F::NonCooperative),
            (StackelbergClass::II, L::Cooperative, F::Cooperative),
            (StackelbergClass::III, L::NonCooperative, F::Cooperative),
            (StackelbergClass::IV, L::Cooperative, F::NonCooperative),
        ];
        for (c, l, f) in expect {
            assert_eq!(c.leader_behavior(), l);
            assert_eq!(c.follower_behavior(), f);
            assert_eq!(StackelbergClass::from_behaviors(l, f), c);
            assert_eq!(c.tag().parse::<StackelbergClass>().unwrap(), c);
        }
        assert!("V".parse::<StackelbergClass>().is_err());
    }
}
