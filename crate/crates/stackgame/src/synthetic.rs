//! Synthetic tank networks with daily demand and price cycles.
//!
//! Every tank belongs to one follower (contiguous blocks) and is refilled by
//! its own supply pumps. Tanks of one follower may be chained by transfer
//! links. Followers meet at junctions: the upstream follower pushes water into
//! the junction, the downstream follower draws it into one of its tanks, and
//! the junction's own demand must be met in between (a balance row). Leaders
//! scale the capacity of `n_leaders` tanks picked round-robin over followers.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use stackgame_core::{
    feasibility_probe, CostParams, DesignSpace, GameConfig, LeaderOverride, Matrix, NetworkModel, Problem, Scenario, Units,
};

use crate::error::{Error, Result};

const PERIOD: usize = 24;
const MAX_ATTEMPTS: u64 = 8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticSpec {
    pub n_tanks: usize,
    pub n_followers: usize,
    pub n_leaders: usize,
    pub horizon: usize,
    pub seed: u64,
    /// Explicit tank split; an even split is used when absent.
    pub tanks_per_follower: Option<Vec<usize>>,
    pub supplies_per_tank: usize,
    /// Fraction of neighbouring same-follower tank pairs joined by a link.
    pub link_density: f64,
    /// Junction count; at least `n_followers - 1` so the followers form a chain.
    pub junctions: usize,
    pub demand_base: f64,
    /// Relative daily swing of the demand around its mean.
    pub demand_amplitude: f64,
    pub price_base: f64,
    /// Peak to off-peak price ratio.
    pub price_peak_ratio: f64,
    /// Leader cost per unit of nominal tank volume and unit of scale.
    pub design_cost: f64,
    /// Each leader pays only for its own tank; otherwise every leader pays
    /// for all designed tanks.
    pub private_design_costs: bool,
    pub actions: Vec<f64>,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            n_tanks: 3,
            n_followers: 2,
            n_leaders: 2,
            horizon: 24,
            seed: 42,
            tanks_per_follower: None,
            supplies_per_tank: 1,
            link_density: 0.5,
            junctions: 0,
            demand_base: 6.0,
            demand_amplitude: 0.5,
            price_base: 1.0,
            price_peak_ratio: 3.0,
            design_cost: 0.3,
            private_design_costs: true,
            actions: vec![0.5, 0.75, 1.0, 1.25, 1.5],
        }
    }
}

impl SyntheticSpec {
    /// 17 tanks split 4/8/3/2 over four followers, four leaders, 72 hourly
    /// steps, 8 junctions and about 61 controllable flows.
    pub fn barcelona(seed: u64) -> Self {
        SyntheticSpec {
            n_tanks: 17,
            n_followers: 4,
            n_leaders: 4,
            horizon: 72,
            seed,
            tanks_per_follower: Some(vec![4, 8, 3, 2]),
            supplies_per_tank: 2,
            link_density: 0.85,
            junctions: 8,
            demand_base: 3.0,
            design_cost: 1.0,
            ..SyntheticSpec::default()
        }
    }

    fn check(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Spec(m.to_string()));
        if self.n_tanks == 0 || self.n_followers == 0 || self.n_leaders == 0 {
            return bad("tank, follower and leader counts must be at least 1");
        }
        if self.n_leaders > self.n_tanks {
            return bad("more leaders than tanks");
        }
        if self.n_followers > self.n_tanks {
            return bad("more followers than tanks");
        }
        if self.supplies_per_tank == 0 {
            return bad("every tank needs a supply");
        }
        if let Some(split) = &self.tanks_per_follower {
            if split.len() != self.n_followers || split.iter().sum::<usize>() != self.n_tanks || split.contains(&0) {
                return bad("tanks_per_follower must list a positive count per follower summing to n_tanks");
            }
        }
        if !(0.0..=1.0).contains(&self.link_density) {
            return bad("link_density must lie in [0, 1]");
        }
        if !(0.0..1.0).contains(&self.demand_amplitude) {
            return bad("demand_amplitude must lie in [0, 1)");
        }
        if !(self.demand_base > 0.0 && self.price_base > 0.0 && self.price_peak_ratio >= 1.0) {
            return bad("demand_base and price_base must be positive, price_peak_ratio at least 1");
        }
        if !(self.design_cost >= 0.0) {
            return bad("design_cost must be non-negative");
        }
        if self.actions.is_empty() || self.actions.iter().any(|&a| !(a.is_finite() && a > 0.0)) {
            return bad("actions must be finite and positive");
        }
        if self.actions.iter().any(|&a| a < 0.3) {
            return bad("actions below 0.3 make the initial volume infeasible");
        }
        Ok(())
    }
}

/// Generates a bundle that validates and passes the feasibility probe at the
/// smallest and largest leader profiles. Failed attempts are retried with a
/// derived seed.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<Problem> {
    spec.check()?;
    let cfg = GameConfig::default();
    for attempt in 0..MAX_ATTEMPTS {
        let seed = spec.seed.wrapping_add(attempt.wrapping_mul(0x9E37_79B9_7F4A_7C15));
        let problem = build(spec, seed);
        if !problem.validate().is_ok() {
            continue;
        }
        if feasibility_probe(&problem, &cfg).is_ok() {
            return Ok(problem);
        }
    }
    Err(Error::InfeasibleSpec { attempts: MAX_ATTEMPTS })
}

struct Junction {
    upstream: usize,
    downstream: usize,
}

fn round2(v: f64) -> f64 {
    (v * 100.0).round() / 100.0
}

// Daily cycle in [-1, 1], peaking at `peak_hour`; periodic by construction.
fn cycle(k: usize, peak_hour: f64) -> f64 {
    let h = (k % PERIOD) as f64;
    (2.0 * std::f64::consts::PI * (h - peak_hour) / PERIOD as f64).cos()
}

fn build(spec: &SyntheticSpec, seed: u64) -> Problem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_t = spec.n_tanks;
    let m = spec.n_followers;
    let t_len = spec.horizon;

    let split = spec.tanks_per_follower.clone().unwrap_or_else(|| {
        (0..m)
            .map(|f| n_t / m + usize::from(f < n_t % m))
            .collect()
    });
    let mut owner = Vec::with_capacity(n_t);
    let mut first_tank = Vec::with_capacity(m);
    for (f, &c) in split.iter().enumerate() {
        first_tank.push(owner.len());
        owner.extend(std::iter::repeat_n(f, c));
    }
    let tanks_of = |f: usize| first_tank[f]..first_tank[f] + split[f];

    let x_bar_max: Vec<f64> = (0..n_t).map(|_| round2(rng.random_range(30.0..60.0))).collect();
    let x_min: Vec<f64> = x_bar_max.iter().map(|v| round2(0.1 * v)).collect();
    let x0: Vec<f64> = x_bar_max.iter().map(|v| round2(0.3 * v)).collect();

    let mut junctions: Vec<Junction> = Vec::new();
    for f in 0..m.saturating_sub(1) {
        junctions.push(Junction {
            upstream: tanks_of(f).end - 1,
            downstream: tanks_of(f + 1).start,
        });
    }
    while m > 1 && junctions.len() < spec.junctions {
        let f = rng.random_range(0..m);
        let mut g = rng.random_range(0..m - 1);
        if g >= f {
            g += 1;
        }
        junctions.push(Junction {
            upstream: rng.random_range(tanks_of(f)),
            downstream: rng.random_range(tanks_of(g)),
        });
    }

    let mut candidates: Vec<usize> = (0..n_t.saturating_sub(1)).filter(|&s| owner[s] == owner[s + 1]).collect();
    let n_links = (spec.link_density * candidates.len() as f64).round() as usize;
    candidates.shuffle(&mut rng);
    let mut links: Vec<usize> = candidates[..n_links].to_vec();
    links.sort_unstable();

    let n_j = junctions.len();
    let n_d = n_t + n_j;
    let demand_peak = 13.0;
    let price_peak = demand_peak + 12.0;
    let mut node_mean: Vec<f64> = (0..n_t).map(|_| spec.demand_base * rng.random_range(0.5..1.5)).collect();
    node_mean.extend((0..n_j).map(|_| spec.demand_base * rng.random_range(0.2..0.6)));
    let node_phase: Vec<f64> = (0..n_d).map(|_| rng.random_range(-2.0..2.0)).collect();
    let day: Vec<Vec<f64>> = (0..PERIOD)
        .map(|h| {
            (0..n_d)
                .map(|d| round2(node_mean[d] * (1.0 + spec.demand_amplitude * cycle(h, demand_peak + node_phase[d]))))
                .collect()
        })
        .collect();
    let demand: Vec<Vec<f64>> = (0..t_len).map(|k| day[k % PERIOD].clone()).collect();
    let peak = |d: usize| day.iter().map(|row| row[d]).fold(0.0, f64::max);

    let price_day: Vec<f64> = (0..PERIOD)
        .map(|h| {
            let r = spec.price_peak_ratio;
            spec.price_base * (1.0 + (r - 1.0) * (1.0 + cycle(h, price_peak)) / 2.0)
        })
        .collect();

    // Inputs per follower, as (column in B, B entries, E entries, bounds, price factor).
    struct Input {
        b: Vec<(usize, f64)>,
        e: Option<(usize, f64)>,
        max: f64,
        price: f64,
    }
    let mut inputs: Vec<Vec<Input>> = (0..m).map(|_| Vec::new()).collect();
    for s in 0..n_t {
        let need = peak(s)
            + junctions
                .iter()
                .enumerate()
                .filter(|(_, j)| j.upstream == s)
                .map(|(jx, _)| peak(n_t + jx))
                .sum::<f64>();
        for _ in 0..spec.supplies_per_tank {
            inputs[owner[s]].push(Input {
                b: vec![(s, 1.0)],
                e: None,
                max: round2(2.5 * need / spec.supplies_per_tank as f64 * rng.random_range(0.9..1.3)),
                price: round2(rng.random_range(0.8..1.2)),
            });
        }
        if links.binary_search(&s).is_ok() {
            inputs[owner[s]].push(Input {
                b: vec![(s, -1.0), (s + 1, 1.0)],
                e: None,
                max: round2(need * rng.random_range(0.5..1.0)),
                price: round2(0.2 * rng.random_range(0.8..1.2)),
            });
        }
    }
    for (jx, j) in junctions.iter().enumerate() {
        let through = round2(spec.demand_base * rng.random_range(1.0..2.0));
        inputs[owner[j.upstream]].push(Input {
            b: vec![(j.upstream, -1.0)],
            e: Some((jx, 1.0)),
            max: round2(peak(n_t + jx) + through),
            price: round2(0.5 * rng.random_range(0.8..1.2)),
        });
        inputs[owner[j.downstream]].push(Input {
            b: vec![(j.downstream, 1.0)],
            e: Some((jx, -1.0)),
            max: through,
            price: round2(0.1 * rng.random_range(0.8..1.2)),
        });
    }

    let dt = 1.0;
    let mut b_blocks = Vec::with_capacity(m);
    let mut e_blocks = Vec::with_capacity(m);
    let mut u_min_blocks = Vec::with_capacity(m);
    let mut u_max_blocks = Vec::with_capacity(m);
    let mut r_blocks = Vec::with_capacity(m);
    let mut alpha = Vec::with_capacity(m);
    for list in &inputs {
        let nu = list.len();
        let mut b = Matrix::zeros(n_t, nu);
        let mut e = Matrix::zeros(n_j, nu);
        for (c, inp) in list.iter().enumerate() {
            for &(s, v) in &inp.b {
                b[(s, c)] = v * dt;
            }
            if let Some((row, v)) = inp.e {
                e[(row, c)] = v;
            }
        }
        b_blocks.push(b);
        e_blocks.push(e);
        u_min_blocks.push(vec![0.0; nu]);
        u_max_blocks.push(list.iter().map(|i| i.max).collect());
        let w = round2(rng.random_range(0.05..0.2));
        r_blocks.push(Matrix::from_diagonal(&vec![w; nu]));
        alpha.push(
            (0..t_len)
                .map(|k| list.iter().map(|i| i.price * price_day[k % PERIOD]).collect())
                .collect(),
        );
    }

    let mut b_l = Matrix::zeros(n_t, n_d);
    for s in 0..n_t {
        b_l[(s, s)] = -dt;
    }
    let mut e_d = Matrix::zeros(n_j, n_d);
    for jx in 0..n_j {
        e_d[(jx, n_t + jx)] = -1.0;
    }

    let l = spec.n_leaders;
    // round-robin over followers so every follower owns designed capacity
    let depth = split.iter().copied().max().unwrap_or(0);
    let mut designed = Vec::with_capacity(l);
    for r in 0..depth {
        designed.extend((0..m).filter(|&f| r < split[f]).map(|f| first_tank[f] + r));
    }
    designed.truncate(l);
    let v_leader: Vec<f64> = designed
        .iter()
        .map(|&s| round2(spec.design_cost * x_bar_max[s]) * spec.price_base)
        .collect();

    let leader_overrides = if spec.private_design_costs {
        (0..l)
            .map(|j| {
                let mut v = vec![0.0; l];
                v[j] = v_leader[j];
                LeaderOverride {
                    leader: j,
                    q: None,
                    v: Some(v),
                }
            })
            .collect()
    } else {
        Vec::new()
    };

    Problem {
        network: NetworkModel {
            n_x: n_t,
            n_d,
            followers: (1..=m).map(|f| format!("F{f}")).collect(),
            a: Matrix::identity(n_t),
            b_blocks,
            b_l,
            e_blocks,
            e_d,
            x_min,
            x_bar_max,
            u_min_blocks,
            u_max_blocks,
            designed_states: designed.clone(),
        },
        design: DesignSpace {
            leaders: (1..=l).map(|j| format!("L{j}")).collect(),
            action_sets: vec![spec.actions.clone(); l],
            state_of_leader: designed,
        },
        costs: CostParams {
            r_blocks,
            alpha,
            q_leader: Matrix::zeros(l, l),
            v_leader,
            leader_overrides,
        },
        scenario: Scenario {
            horizon: t_len,
            dt,
            x0,
            demand,
            u_prev: Vec::new(),
        },
        units: Units::default(),
    }
}
