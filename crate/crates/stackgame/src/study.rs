//! The full experiment: all four classes over two shared caches, then the
//! price-of-anarchy table.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use stackgame_core::{
    price_of_anarchy, solve_class_with, EquilibriumReport, FollowerBehavior, GameConfig, LeaderBehavior, PoALayer,
    PoAReport, PoARequest, Problem, ResponseSource, StackelbergClass,
};

use crate::cache::SharedResponseCache;
use crate::error::Result;

#[derive(Debug, Clone, PartialEq)]
pub struct StudyOptions {
    pub jobs: usize,
    /// Random starts per follower price of anarchy on top of the
    /// deterministic one.
    pub starts: usize,
    pub seed: u64,
    /// Directory for cache spill files (`cache_cooperative.csv`,
    /// `cache_noncooperative.csv`).
    pub spill_dir: Option<PathBuf>,
    /// Restore spilled records before solving.
    pub resume: bool,
}

impl Default for StudyOptions {
    fn default() -> Self {
        StudyOptions {
            jobs: 1,
            starts: 4,
            seed: 0,
            spill_dir: None,
            resume: false,
        }
    }
}

/// One row of the price-of-anarchy table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoARow {
    pub poa: PoAReport,
    /// Same layer compared across classes: the non-cooperative class over
    /// the cooperative one with the other layer's behavior fixed.
    pub cross_class_ratio: f64,
    pub cross_classes: (StackelbergClass, StackelbergClass),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyResult {
    /// Classes I to IV in order.
    pub reports: Vec<EquilibriumReport>,
    pub poa: Vec<PoARow>,
}

fn spill_name(behavior: FollowerBehavior) -> &'static str {
    match behavior {
        FollowerBehavior::Cooperative => "cache_cooperative.csv",
        FollowerBehavior::NonCooperative => "cache_noncooperative.csv",
    }
}

/// The caches of one study, for callers that want to reuse them.
pub struct StudyCaches<'p> {
    pub cooperative: SharedResponseCache<'p>,
    pub non_cooperative: SharedResponseCache<'p>,
}

impl<'p> StudyCaches<'p> {
    pub fn new(problem: &'p Problem, cfg: &GameConfig) -> Self {
        StudyCaches {
            cooperative: SharedResponseCache::new(problem, cfg, FollowerBehavior::Cooperative),
            non_cooperative: SharedResponseCache::new(problem, cfg, FollowerBehavior::NonCooperative),
        }
    }

    pub fn get(&self, behavior: FollowerBehavior) -> &SharedResponseCache<'p> {
        match behavior {
            FollowerBehavior::Cooperative => &self.cooperative,
            FollowerBehavior::NonCooperative => &self.non_cooperative,
        }
    }

    /// Restores spilled records, fills the lattices of the given follower
    /// behaviors and spills them again. A failed fill still spills what was
    /// computed.
    pub fn fill(&self, behaviors: &[FollowerBehavior], opts: &StudyOptions) -> Result<()> {
        for &behavior in behaviors {
            let cache = self.get(behavior);
            let spill = opts.spill_dir.as_ref().map(|d| d.join(spill_name(behavior)));
            if let (true, Some(path)) = (opts.resume, &spill) {
                if path.exists() {
                    let n = cache.restore(path)?;
                    log::info!("{behavior:?} followers: restored {n} profiles from {}", path.display());
                }
            }
            let filled = cache.prefill(opts.jobs);
            if let Some(path) = &spill {
                cache.spill(path)?;
            }
            filled?;
            log::info!("{behavior:?} followers: {} follower solves", cache.evaluations());
        }
        Ok(())
    }
}

pub fn solve_class_shared(class: StackelbergClass, caches: &StudyCaches<'_>, cfg: &GameConfig) -> Result<EquilibriumReport> {
    Ok(solve_class_with(class, caches.get(class.follower_behavior()), cfg)?)
}

/// The layer a price of anarchy measures and the behavior of the other layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PoAScenario {
    Leaders { followers: FollowerBehavior },
    Followers { leaders: LeaderBehavior },
}

impl PoAScenario {
    /// Table order: leaders with cooperative then non-cooperative followers,
    /// followers under non-cooperative then cooperative leaders.
    pub const ALL: [PoAScenario; 4] = [
        PoAScenario::Leaders { followers: FollowerBehavior::Cooperative },
        PoAScenario::Leaders { followers: FollowerBehavior::NonCooperative },
        PoAScenario::Followers { leaders: LeaderBehavior::NonCooperative },
        PoAScenario::Followers { leaders: LeaderBehavior::Cooperative },
    ];

    /// Non-cooperative and cooperative class with the other layer fixed.
    pub fn classes(self) -> (StackelbergClass, StackelbergClass) {
        use StackelbergClass::*;
        match self {
            PoAScenario::Leaders { followers: FollowerBehavior::Cooperative } => (III, II),
            PoAScenario::Leaders { followers: FollowerBehavior::NonCooperative } => (I, IV),
            PoAScenario::Followers { leaders: LeaderBehavior::NonCooperative } => (I, III),
            PoAScenario::Followers { leaders: LeaderBehavior::Cooperative } => (IV, II),
        }
    }

    fn context(self) -> String {
        let word = |c: bool| if c { "cooperative" } else { "non-cooperative" };
        match self {
            PoAScenario::Leaders { followers } => format!("followers {}", word(followers == FollowerBehavior::Cooperative)),
            PoAScenario::Followers { leaders } => format!(
                "leaders {} (class {} profile)",
                word(leaders == LeaderBehavior::Cooperative),
                self.classes().0
            ),
        }
    }
}

/// One price-of-anarchy row. The follower layer is evaluated at the profile
/// of the class with non-cooperative followers.
pub fn poa_row(
    problem: &Problem,
    cfg: &GameConfig,
    caches: &StudyCaches<'_>,
    scenario: PoAScenario,
    opts: &StudyOptions,
) -> Result<PoARow> {
    let (num, den) = scenario.classes();
    let num_report = solve_class_shared(num, caches, cfg)?;
    let den_report = solve_class_shared(den, caches, cfg)?;
    let request = match scenario {
        PoAScenario::Leaders { followers } => PoARequest::Leader { followers },
        PoAScenario::Followers { .. } => PoARequest::FollowerAt {
            profile: num_report.profile_index.clone(),
            starts: opts.starts,
            seed: opts.seed,
        },
    };
    let mut poa = price_of_anarchy(problem, cfg, &request, &caches.cooperative, &caches.non_cooperative)?;
    poa.context = scenario.context();
    let cross = match poa.layer {
        PoALayer::Leader => num_report.total_leader_cost / den_report.total_leader_cost,
        PoALayer::Follower => num_report.total_follower_cost / den_report.total_follower_cost,
    };
    Ok(PoARow {
        poa,
        cross_class_ratio: cross,
        cross_classes: (num, den),
    })
}

/// Solves classes I–IV and the price-of-anarchy table.
pub fn run_study(problem: &Problem, cfg: &GameConfig, opts: &StudyOptions) -> Result<StudyResult> {
    run_study_with(problem, cfg, &StudyCaches::new(problem, cfg), opts)
}

/// [`run_study`] over caller-owned caches, which end up filled.
pub fn run_study_with(problem: &Problem, cfg: &GameConfig, caches: &StudyCaches<'_>, opts: &StudyOptions) -> Result<StudyResult> {
    caches.fill(&[FollowerBehavior::Cooperative, FollowerBehavior::NonCooperative], opts)?;
    let reports = StackelbergClass::ALL
        .iter()
        .map(|&c| {
            let r = solve_class_shared(c, caches, cfg)?;
            log::info!("class {c}: profile {:?}, total J {}", r.profile, r.total_leader_cost);
            Ok(r)
        })
        .collect::<Result<Vec<_>>>()?;
    let poa = PoAScenario::ALL
        .iter()
        .map(|&sc| poa_row(problem, cfg, caches, sc, opts))
        .collect::<Result<Vec<_>>>()?;
    Ok(StudyResult { reports, poa })
}

/// Follower responses of one behavior for every lattice profile, in
/// lexicographic order; fills the cache as needed.
pub fn lattice_outcomes(cache: &SharedResponseCache<'_>) -> Result<Vec<std::sync::Arc<stackgame_core::ProfileOutcome>>> {
    cache
        .design()
        .lattice()
        .map(|idx| Ok(cache.outcome(&idx)?))
        .collect()
}
