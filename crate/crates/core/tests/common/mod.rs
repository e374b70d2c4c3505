//! Hand-built tank networks shared by the integration tests.
#![allow(dead_code)]

use stackgame_core::{
    CostParams, DesignSpace, LeaderOverride, Matrix, NetworkModel, Problem, Scenario, Units,
};

pub const ACTIONS: [f64; 5] = [0.5, 0.75, 1.0, 1.25, 1.5];

/// One tank per follower. Follower `i` owns a supply into tank `i` and, when
/// `coupled` and there are at least two followers, a transfer from tank `i`
/// into tank `i + 1` (cyclically). Leader `j` scales tank `j` and pays
/// `design_weight · a_j`.
#[derive(Debug, Clone)]
pub struct Tanks {
    pub followers: usize,
    pub leaders: usize,
    pub horizon: usize,
    pub coupled: bool,
    pub design_weight: f64,
    pub actions: Vec<f64>,
    pub price_scale: f64,
}

impl Default for Tanks {
    fn default() -> Self {
        Tanks {
            followers: 2,
            leaders: 2,
            horizon: 12,
            coupled: true,
            design_weight: 0.5,
            actions: ACTIONS.to_vec(),
            price_scale: 1.0,
        }
    }
}

fn price(k: usize, i: usize) -> f64 {
    let phase = 2.0 * std::f64::consts::PI * (k as f64) / 12.0;
    1.0 + 0.8 * phase.sin() + 0.1 * i as f64
}

fn demand(k: usize, i: usize) -> f64 {
    let phase = 2.0 * std::f64::consts::PI * (k as f64) / 12.0 + i as f64;
    1.0 + 0.5 * phase.sin()
}

impl Tanks {
    pub fn build(&self) -> Problem {
        let m = self.followers;
        let l = self.leaders;
        let transfers = self.coupled && m > 1;
        let nu = if transfers { 2 } else { 1 };
        let mut b_blocks = Vec::new();
        for i in 0..m {
            let mut b = Matrix::zeros(m, nu);
            b[(i, 0)] = 1.0;
            if transfers {
                b[(i, 1)] = -1.0;
                b[((i + 1) % m, 1)] += 1.0;
            }
            b_blocks.push(b);
        }
        let mut b_l = Matrix::zeros(m, m);
        for i in 0..m {
            b_l[(i, i)] = -1.0;
        }
        let u_max: Vec<f64> = if transfers { vec![3.0, 1.0] } else { vec![3.0] };
        let network = NetworkModel {
            n_x: m,
            n_d: m,
            followers: (0..m).map(|i| format!("F{i}")).collect(),
            a: Matrix::identity(m),
            b_blocks,
            b_l,
            e_blocks: (0..m).map(|_| Matrix::zeros(0, nu)).collect(),
            e_d: Matrix::zeros(0, m),
            x_min: vec![0.5; m],
            x_bar_max: vec![6.0; m],
            u_min_blocks: vec![vec![0.0; nu]; m],
            u_max_blocks: vec![u_max; m],
            designed_states: (0..l).collect(),
        };
        let design = DesignSpace {
            leaders: (0..l).map(|j| format!("L{j}")).collect(),
            action_sets: vec![self.actions.clone(); l],
            state_of_leader: (0..l).collect(),
        };
        let alpha = (0..m)
            .map(|i| {
                (0..self.horizon)
                    .map(|k| {
                        let mut row = vec![self.price_scale * price(k, i)];
                        if transfers {
                            row.push(self.price_scale * 0.01);
                        }
                        row
                    })
                    .collect()
            })
            .collect();
        let leader_overrides = (0..l)
            .map(|j| {
                let mut v = vec![0.0; l];
                v[j] = self.design_weight;
                LeaderOverride {
                    leader: j,
                    q: None,
                    v: Some(v),
                }
            })
            .collect();
        let costs = CostParams {
            r_blocks: (0..m).map(|_| Matrix::from_diagonal(&vec![0.05; nu])).collect(),
            alpha,
            q_leader: Matrix::zeros(l, l),
            v_leader: CostParams::default_v_leader(l),
            leader_overrides,
        };
        let scenario = Scenario {
            horizon: self.horizon,
            dt: 1.0,
            x0: vec![2.5; m],
            demand: (0..self.horizon).map(|k| (0..m).map(|i| demand(k, i)).collect()).collect(),
            u_prev: Vec::new(),
        };
        Problem {
            network,
            design,
            costs,
            scenario,
            units: Units::default(),
        }
    }
}

/// Followers without states: each owns a single input `u ∈ [lo, hi]`.
pub fn stateless(followers: usize, horizon: usize, alpha: f64, r: f64, lo: f64, hi: f64) -> Problem {
    let m = followers;
    let network = NetworkModel {
        n_x: 0,
        n_d: 0,
        followers: (0..m).map(|i| format!("F{i}")).collect(),
        a: Matrix::zeros(0, 0),
        b_blocks: (0..m).map(|_| Matrix::zeros(0, 1)).collect(),
        b_l: Matrix::zeros(0, 0),
        e_blocks: (0..m).map(|_| Matrix::zeros(0, 1)).collect(),
        e_d: Matrix::zeros(0, 0),
        x_min: Vec::new(),
        x_bar_max: Vec::new(),
        u_min_blocks: vec![vec![lo]; m],
        u_max_blocks: vec![vec![hi]; m],
        designed_states: Vec::new(),
    };
    let design = DesignSpace {
        leaders: Vec::new(),
        action_sets: Vec::new(),
        state_of_leader: Vec::new(),
    };
    let costs = CostParams {
        r_blocks: (0..m).map(|_| Matrix::from_diagonal(&[r])).collect(),
        alpha: vec![vec![vec![alpha]; horizon]; m],
        q_leader: Matrix::zeros(0, 0),
        v_leader: Vec::new(),
        leader_overrides: Vec::new(),
    };
    let scenario = Scenario {
        horizon,
        dt: 1.0,
        x0: Vec::new(),
        demand: vec![Vec::new(); horizon],
        u_prev: Vec::new(),
    };
    Problem {
        network,
        design,
        costs,
        scenario,
        units: Units::default(),
    }
}
