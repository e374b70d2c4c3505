//! Thread-safe response cache. Each profile is evaluated at most once: the
//! first caller fills a per-key slot while later callers for the same key
//! wait on it. Because evaluation is a pure function of the profile, the
//! contents do not depend on fill order or thread count.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex, OnceLock};

use rayon::prelude::*;
use stackgame_core::leader::check_index;
use stackgame_core::{
    evaluate_profile, DesignSpace, FollowerBehavior, FollowerWorkspace, GameConfig, Problem, ProfileIndex,
    ProfileOutcome, ResponseSource,
};

use crate::error::{Error, Result};
use crate::table::{self, num};

type Slot = Arc<OnceLock<std::result::Result<Arc<ProfileOutcome>, stackgame_core::Error>>>;

pub struct SharedResponseCache<'p> {
    problem: &'p Problem,
    cfg: GameConfig,
    behavior: FollowerBehavior,
    slots: Mutex<BTreeMap<ProfileIndex, Slot>>,
    workspaces: Mutex<Vec<FollowerWorkspace>>,
    evaluations: AtomicUsize,
}

impl<'p> SharedResponseCache<'p> {
    pub fn new(problem: &'p Problem, cfg: &GameConfig, behavior: FollowerBehavior) -> Self {
        SharedResponseCache {
            problem,
            cfg: *cfg,
            behavior,
            slots: Mutex::new(BTreeMap::new()),
            workspaces: Mutex::new(Vec::new()),
            evaluations: AtomicUsize::new(0),
        }
    }

    /// Follower-layer solves performed by this cache.
    pub fn evaluations(&self) -> usize {
        self.evaluations.load(Ordering::Relaxed)
    }

    fn slot(&self, index: &[usize]) -> Slot {
        let mut slots = self.slots.lock().expect("cache lock poisoned");
        slots.entry(index.to_vec()).or_default().clone()
    }

    fn evaluate(&self, index: &[usize]) -> std::result::Result<Arc<ProfileOutcome>, stackgame_core::Error> {
        let mut ws = self
            .workspaces
            .lock()
            .expect("cache lock poisoned")
            .pop()
            .unwrap_or_else(|| FollowerWorkspace::new(self.cfg.qp, self.problem.network.n_followers()));
        let outcome = evaluate_profile(self.problem, &self.cfg, self.behavior, index, &mut ws);
        self.workspaces.lock().expect("cache lock poisoned").push(ws);
        let n = self.evaluations.fetch_add(1, Ordering::Relaxed) + 1;
        log::debug!("{:?} followers: evaluated profile {index:?} ({n} so far)", self.behavior);
        outcome.map(Arc::new)
    }

    /// Evaluates every lattice profile on `jobs` threads.
    pub fn prefill(&self, jobs: usize) -> Result<()> {
        let lattice: Vec<ProfileIndex> = self.problem.design.lattice().collect();
        let total = lattice.len();
        let done = AtomicUsize::new(0);
        let step = (total / 10).max(1);
        let run = || {
            lattice.par_iter().try_for_each(|idx| -> std::result::Result<(), stackgame_core::Error> {
                self.outcome(idx)?;
                let d = done.fetch_add(1, Ordering::Relaxed) + 1;
                if d % step == 0 || d == total {
                    log::info!("{:?} followers: {d}/{total} profiles", self.behavior);
                }
                Ok(())
            })
        };
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs.max(1))
            .build()
            .map_err(|e| Error::Spec(format!("thread pool: {e}")))?;
        pool.install(run)?;
        Ok(())
    }

    /// Filled outcomes in lexicographic profile order.
    pub fn entries(&self) -> Vec<Arc<ProfileOutcome>> {
        let slots = self.slots.lock().expect("cache lock poisoned");
        slots
            .values()
            .filter_map(|s| s.get().and_then(|r| r.as_ref().ok()).cloned())
            .collect()
    }

    /// Writes one record per filled profile.
    pub fn spill(&self, path: &Path) -> Result<()> {
        let design = &self.problem.design;
        let mut header: Vec<String> = design.leaders.iter().map(|l| format!("index_{l}")).collect();
        header.extend(design.leaders.iter().map(|l| format!("a_{l}")));
        header.push("feasible".into());
        header.extend(design.leaders.iter().map(|l| format!("J_{l}")));
        for h in ["total_J", "total_V", "sweeps", "converged", "max_gain"] {
            header.push(h.into());
        }
        let rows: Vec<Vec<String>> = self
            .entries()
            .iter()
            .map(|o| {
                let mut row: Vec<String> = o.index.iter().map(|k| k.to_string()).collect();
                row.extend(o.profile.iter().map(|&a| num(a)));
                row.push(o.feasible.to_string());
                row.extend(o.leader_costs.iter().map(|&c| num(c)));
                row.push(num(o.total_leader_cost));
                row.push(num(o.total_follower_cost));
                match &o.response {
                    Some(r) => {
                        row.push(r.cert.sweeps.to_string());
                        row.push(r.cert.converged.to_string());
                        row.push(num(r.cert.max_gain));
                    }
                    None => row.extend(["".to_string(), "".to_string(), "".to_string()]),
                }
                row
            })
            .collect();
        table::write_csv(path, &header, &rows)
    }

    /// Loads records written by [`spill`](Self::spill). Restored feasible
    /// profiles carry costs only; their responses are recomputed on demand.
    pub fn restore(&self, path: &Path) -> Result<usize> {
        let design = &self.problem.design;
        let l = design.n_leaders();
        let (header, rows) = table::read_csv(path)?;
        if header.len() != 3 * l + 6 {
            return Err(Error::parse(path, "column count does not match the design"));
        }
        let mut slots = self.slots.lock().expect("cache lock poisoned");
        for (r, row) in rows.iter().enumerate() {
            let bad = |what: &str| Error::parse(path, format!("row {r}: {what}"));
            let index: ProfileIndex = row[..l]
                .iter()
                .map(|v| v.parse::<usize>().map_err(|_| bad("bad action index")))
                .collect::<Result<_>>()?;
            check_index(design, &index).map_err(|e| bad(&e.to_string()))?;
            let profile: Vec<f64> = row[l..2 * l]
                .iter()
                .map(|v| v.parse::<f64>().map_err(|_| bad("bad action")))
                .collect::<Result<_>>()?;
            if profile != design.profile(&index) {
                return Err(bad("actions do not match the design"));
            }
            let feasible: bool = row[2 * l].parse().map_err(|_| bad("bad feasibility flag"))?;
            let costs: Vec<f64> = row[2 * l + 1..3 * l + 3]
                .iter()
                .map(|v| v.parse::<f64>().map_err(|_| bad("bad cost")))
                .collect::<Result<_>>()?;
            let outcome = ProfileOutcome {
                index: index.clone(),
                profile,
                feasible,
                leader_costs: costs[..l].to_vec(),
                total_leader_cost: costs[l],
                total_follower_cost: costs[l + 1],
                response: None,
            };
            let slot: Slot = Arc::new(OnceLock::new());
            let _ = slot.set(Ok(Arc::new(outcome)));
            slots.insert(index, slot);
        }
        Ok(rows.len())
    }
}

impl ResponseSource for SharedResponseCache<'_> {
    fn design(&self) -> &DesignSpace {
        &self.problem.design
    }

    fn behavior(&self) -> FollowerBehavior {
        self.behavior
    }

    fn outcome(&self, index: &[usize]) -> std::result::Result<Arc<ProfileOutcome>, stackgame_core::Error> {
        check_index(&self.problem.design, index)?;
        self.slot(index).get_or_init(|| self.evaluate(index)).clone()
    }

    fn full_outcome(&self, index: &[usize]) -> std::result::Result<Arc<ProfileOutcome>, stackgame_core::Error> {
        let hit = self.outcome(index)?;
        if !hit.feasible || hit.response.is_some() {
            return Ok(hit);
        }
        let fresh = self.evaluate(index)?;
        if fresh.leader_costs != hit.leader_costs {
            log::warn!("profile {index:?}: recomputed costs differ from the restored record");
        }
        let slot: Slot = Arc::new(OnceLock::new());
        let _ = slot.set(Ok(fresh.clone()));
        self.slots
            .lock()
            .expect("cache lock poisoned")
            .insert(index.to_vec(), slot);
        Ok(fresh)
    }
}
