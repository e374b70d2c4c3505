//! Problem data: the networked linear system, the leaders' design space, cost
//! weights and the scenario, plus structural validation.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::linalg::Matrix;

/// One chosen scale factor per leader.
pub type LeaderProfile = Vec<f64>;

/// Position of each leader's action inside its action set.
pub type ProfileIndex = Vec<usize>;

/// Linear network `x⁺ = A x + Σ B_i u_i + B_l d` with balance rows
/// `Σ E_i u_i + E_d d = 0` and box bounds on states and inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkModel {
    pub n_x: usize,
    pub n_d: usize,
    pub followers: Vec<String>,
    pub a: Matrix,
    pub b_blocks: Vec<Matrix>,
    pub b_l: Matrix,
    pub e_blocks: Vec<Matrix>,
    pub e_d: Matrix,
    pub x_min: Vec<f64>,
    pub x_bar_max: Vec<f64>,
    pub u_min_blocks: Vec<Vec<f64>>,
    pub u_max_blocks: Vec<Vec<f64>>,
    pub designed_states: Vec<usize>,
}

impl NetworkModel {
    pub fn n_followers(&self) -> usize {
        self.followers.len()
    }

    /// Input count of follower `i`.
    pub fn n_u(&self, i: usize) -> usize {
        self.b_blocks[i].cols()
    }

    pub fn n_u_total(&self) -> usize {
        (0..self.n_followers()).map(|i| self.n_u(i)).sum()
    }

    /// Number of balance rows.
    pub fn n_e(&self) -> usize {
        self.e_d.rows()
    }

    /// Gives empty balance matrices the column counts implied by the rest of
    /// the model. Serialized empty matrices lose their column count.
    pub fn normalize_shapes(&mut self) {
        if self.e_d.rows() == 0 {
            self.e_d = Matrix::zeros(0, self.n_d);
        }
        for i in 0..self.e_blocks.len() {
            if self.e_blocks[i].rows() == 0 && i < self.b_blocks.len() {
                self.e_blocks[i] = Matrix::zeros(0, self.b_blocks[i].cols());
            }
        }
        for i in 0..self.b_blocks.len() {
            if self.b_blocks[i].rows() == 0 {
                self.b_blocks[i] = Matrix::zeros(0, self.u_min_blocks.get(i).map_or(0, Vec::len));
            }
        }
        if self.b_l.rows() == 0 {
            self.b_l = Matrix::zeros(0, self.n_d);
        }
    }
}

/// Leaders, their finite action sets and the state each one scales.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignSpace {
    pub leaders: Vec<String>,
    pub action_sets: Vec<Vec<f64>>,
    pub state_of_leader: Vec<usize>,
}

impl DesignSpace {
    pub fn n_leaders(&self) -> usize {
        self.leaders.len()
    }

    /// Number of joint profiles, saturating at `usize::MAX`.
    pub fn lattice_size(&self) -> usize {
        self.action_sets
            .iter()
            .fold(1usize, |acc, s| acc.saturating_mul(s.len()))
    }

    pub fn profile(&self, idx: &[usize]) -> LeaderProfile {
        idx.iter()
            .zip(&self.action_sets)
            .map(|(&k, set)| set[k])
            .collect()
    }

    pub fn index_of(&self, a: &[f64]) -> Result<ProfileIndex, Error> {
        if a.len() != self.n_leaders() {
            return Err(Error::ProfileLength {
                expected: self.n_leaders(),
                got: a.len(),
            });
        }
        a.iter()
            .enumerate()
            .map(|(j, &v)| {
                self.action_sets[j]
                    .iter()
                    .position(|&s| s == v)
                    .ok_or(Error::ActionNotInSet { leader: j, value: v })
            })
            .collect()
    }

    /// Profile with the given rank in lexicographic order (last leader varies
    /// fastest).
    pub fn index_at(&self, mut rank: usize) -> ProfileIndex {
        let mut idx = vec![0; self.n_leaders()];
        for j in (0..self.n_leaders()).rev() {
            let n = self.action_sets[j].len();
            idx[j] = rank % n;
            rank /= n;
        }
        idx
    }

    /// Every profile in lexicographic order.
    pub fn lattice(&self) -> impl Iterator<Item = ProfileIndex> + '_ {
        (0..self.lattice_size()).map(move |r| self.index_at(r))
    }

    /// Index of the nominal action 1.0 per leader, or the action closest to
    /// it when 1.0 is not offered (lowest index on ties).
    pub fn nominal_index(&self) -> ProfileIndex {
        self.action_sets
            .iter()
            .map(|set| {
                let mut best = 0;
                for (k, &v) in set.iter().enumerate() {
                    if libm::fabs(v - 1.0) < libm::fabs(set[best] - 1.0) {
                        best = k;
                    }
                }
                best
            })
            .collect()
    }
}

/// Per-leader replacement of the shared leader weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeaderOverride {
    pub leader: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q: Option<Matrix>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostParams {
    /// Smoothing weight per follower.
    pub r_blocks: Vec<Matrix>,
    /// Prices indexed `[follower][k][input]`.
    pub alpha: Vec<Vec<Vec<f64>>>,
    pub q_leader: Matrix,
    pub v_leader: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub leader_overrides: Vec<LeaderOverride>,
}

impl CostParams {
    /// Default linear leader weight for `l` leaders.
    pub fn default_v_leader(l: usize) -> Vec<f64> {
        vec![0.01; l]
    }

    pub fn leader_q(&self, j: usize) -> &Matrix {
        self.leader_overrides
            .iter()
            .rev()
            .find(|o| o.leader == j && o.q.is_some())
            .and_then(|o| o.q.as_ref())
            .unwrap_or(&self.q_leader)
    }

    pub fn leader_v(&self, j: usize) -> &[f64] {
        self.leader_overrides
            .iter()
            .rev()
            .find(|o| o.leader == j && o.v.is_some())
            .and_then(|o| o.v.as_deref())
            .unwrap_or(&self.v_leader)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub horizon: usize,
    pub dt: f64,
    pub x0: Vec<f64>,
    /// Demand indexed `[k][node]`.
    pub demand: Vec<Vec<f64>>,
    /// Input before the horizon per follower; empty means zeros.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub u_prev: Vec<Vec<f64>>,
}

impl Scenario {
    pub fn prior_input(&self, model: &NetworkModel, i: usize) -> Vec<f64> {
        self.u_prev
            .get(i)
            .cloned()
            .unwrap_or_else(|| vec![0.0; model.n_u(i)])
    }
}

/// Unit labels. Informational only.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Units {
    pub volume: String,
    pub flow: String,
    pub time: String,
    pub cost: String,
}

impl Default for Units {
    fn default() -> Self {
        Units {
            volume: "m3".to_string(),
            flow: "m3/h".to_string(),
            time: "h".to_string(),
            cost: "e.u.".to_string(),
        }
    }
}

/// Everything needed to pose the game.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Problem {
    pub network: NetworkModel,
    pub design: DesignSpace,
    pub costs: CostParams,
    pub scenario: Scenario,
    #[serde(default)]
    pub units: Units,
}

impl Problem {
    pub fn validate(&self) -> ValidationReport {
        validate_model(&self.network, &self.design, &self.costs, &self.scenario)
    }

    pub fn state_upper_bound(&self, a: &[f64]) -> Result<Vec<f64>, Error> {
        state_upper_bound(&self.network, &self.design, a)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub field: String,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl core::fmt::Display for ValidationReport {
    /// One `field: message` line per violation.
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        for v in &self.violations {
            writeln!(f, "{}: {}", v.field, v.message)?;
        }
        Ok(())
    }
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }

    fn push(&mut self, field: impl Into<String>, message: impl Into<String>) {
        self.violations.push(Violation {
            field: field.into(),
            message: message.into(),
        });
    }

    /// `Err(Error::Invalid)` listing every violation, or `Ok`.
    pub fn into_result(self) -> Result<(), Error> {
        if self.is_ok() {
            return Ok(());
        }
        let text: Vec<String> = self
            .violations
            .iter()
            .map(|v| format!("{}: {}", v.field, v.message))
            .collect();
        Err(Error::Invalid(text.join("; ")))
    }
}

/// `x^max(a)`: the nominal upper bound with every designed state scaled by its
/// leader's action.
pub fn state_upper_bound(model: &NetworkModel, design: &DesignSpace, a: &[f64]) -> Result<Vec<f64>, Error> {
    design.index_of(a)?;
    let mut xmax = model.x_bar_max.clone();
    for (j, &s) in design.state_of_leader.iter().enumerate() {
        if s >= xmax.len() {
            return Err(Error::DimensionMismatch(format!(
                "leader {j} scales state {s}, model has {}",
                xmax.len()
            )));
        }
        xmax[s] = a[j] * model.x_bar_max[s];
    }
    Ok(xmax)
}

fn all_finite(v: &[f64]) -> bool {
    v.iter().all(|x| x.is_finite())
}

fn matrix_finite(m: &Matrix) -> bool {
    (0..m.rows()).all(|i| all_finite(m.row(i)))
}

fn check_shape(r: &mut ValidationReport, field: &str, m: &Matrix, rows: usize, cols: usize) {
    if m.shape() != (rows, cols) {
        r.push(
            field,
            format!("expected {rows}x{cols}, got {}x{}", m.rows(), m.cols()),
        );
    } else if !matrix_finite(m) {
        r.push(field, "non-finite entry");
    }
}

fn check_len(r: &mut ValidationReport, field: &str, v: &[f64], len: usize) -> bool {
    if v.len() != len {
        r.push(field, format!("expected length {len}, got {}", v.len()));
        false
    } else if !all_finite(v) {
        r.push(field, "non-finite entry");
        false
    } else {
        true
    }
}

/// Lists every structural inconsistency; an empty report means well formed.
pub fn validate_model(
    model: &NetworkModel,
    design: &DesignSpace,
    costs: &CostParams,
    scenario: &Scenario,
) -> ValidationReport {
    let mut r = ValidationReport::default();
    let n_x = model.n_x;
    let n_d = model.n_d;
    let m = model.n_followers();
    let n_e = model.e_d.rows();

    if m == 0 {
        r.push("network.followers", "at least one follower required");
    }
    check_shape(&mut r, "network.a", &model.a, n_x, n_x);
    check_shape(&mut r, "network.b_l", &model.b_l, n_x, n_d);
    if n_e > 0 {
        check_shape(&mut r, "network.e_d", &model.e_d, n_e, n_d);
    }
    let blocks_ok = [
        ("network.b_blocks", model.b_blocks.len()),
        ("network.e_blocks", model.e_blocks.len()),
        ("network.u_min_blocks", model.u_min_blocks.len()),
        ("network.u_max_blocks", model.u_max_blocks.len()),
        ("costs.r_blocks", costs.r_blocks.len()),
        ("costs.alpha", costs.alpha.len()),
    ]
    .iter()
    .fold(true, |ok, &(field, len)| {
        if len != m {
            r.push(field, format!("expected {m} follower blocks, got {len}"));
            false
        } else {
            ok
        }
    });

    if blocks_ok {
        for i in 0..m {
            let nu = model.b_blocks[i].cols();
            if nu == 0 {
                r.push(format!("network.b_blocks[{i}]"), "follower has no inputs");
            }
            check_shape(&mut r, &format!("network.b_blocks[{i}]"), &model.b_blocks[i], n_x, nu);
            if n_e > 0 || model.e_blocks[i].rows() > 0 {
                check_shape(&mut r, &format!("network.e_blocks[{i}]"), &model.e_blocks[i], n_e, nu);
            }
            let lo_ok = check_len(&mut r, &format!("network.u_min_blocks[{i}]"), &model.u_min_blocks[i], nu);
            let hi_ok = check_len(&mut r, &format!("network.u_max_blocks[{i}]"), &model.u_max_blocks[i], nu);
            if lo_ok && hi_ok && model.u_min_blocks[i].iter().zip(&model.u_max_blocks[i]).any(|(l, u)| l > u) {
                r.push(format!("network.u_min_blocks[{i}]"), "u_min exceeds u_max");
            }

            let field = format!("costs.r_blocks[{i}]");
            let rb = &costs.r_blocks[i];
            if rb.shape() != (nu, nu) {
                r.push(field, format!("expected {nu}x{nu}, got {}x{}", rb.rows(), rb.cols()));
            } else if !matrix_finite(rb) {
                r.push(field, "non-finite entry");
            } else if rb.max_asymmetry() > 1e-9 {
                r.push(field, "R not symmetric");
            } else if nu > 0 && rb.symmetric_eigenvalues()[0] <= 0.0 {
                r.push(field, "R not positive definite");
            }

            let field = format!("costs.alpha[{i}]");
            if costs.alpha[i].len() != scenario.horizon {
                r.push(
                    field,
                    format!("price series has {} steps, horizon is {}", costs.alpha[i].len(), scenario.horizon),
                );
            } else if let Some(k) = costs.alpha[i].iter().position(|row| row.len() != nu || !all_finite(row)) {
                r.push(field, format!("step {k} must hold {nu} finite prices"));
            }
        }
    }

    let xmin_ok = check_len(&mut r, "network.x_min", &model.x_min, n_x);
    let xmax_ok = check_len(&mut r, "network.x_bar_max", &model.x_bar_max, n_x);
    let bounds_ok = xmin_ok && xmax_ok;
    if bounds_ok && model.x_min.iter().zip(&model.x_bar_max).any(|(l, u)| l > u) {
        r.push("network.x_min", "x_min exceeds x_bar_max");
    }

    let l = design.n_leaders();
    if model.designed_states.len() != l {
        r.push(
            "network.designed_states",
            format!(
                "leader/state count mismatch: {} designed states, {l} leaders",
                model.designed_states.len()
            ),
        );
    }
    let mut seen = vec![false; n_x];
    for &s in &model.designed_states {
        if s >= n_x {
            r.push("network.designed_states", format!("state {s} out of range"));
        } else if seen[s] {
            r.push("network.designed_states", format!("state {s} listed twice"));
        } else {
            seen[s] = true;
        }
    }

    if design.action_sets.len() != l || design.state_of_leader.len() != l {
        r.push(
            "design",
            format!(
                "{l} leaders but {} action sets and {} state assignments",
                design.action_sets.len(),
                design.state_of_leader.len()
            ),
        );
        return r;
    }
    for (j, set) in design.action_sets.iter().enumerate() {
        let field = format!("design.action_sets[{j}]");
        if set.is_empty() {
            r.push(field, "empty action set");
        } else if set.iter().any(|&v| !(v.is_finite() && v > 0.0)) {
            r.push(field, "actions must be finite and positive");
        } else if (1..set.len()).any(|k| set[..k].contains(&set[k])) {
            r.push(field, "duplicate action");
        }
    }
    let mut assigned: Vec<usize> = design.state_of_leader.clone();
    let mut designed: Vec<usize> = model.designed_states.clone();
    assigned.sort_unstable();
    designed.sort_unstable();
    if assigned != designed {
        r.push(
            "design.state_of_leader",
            "leader-to-state map is not a bijection onto designed_states",
        );
    }

    if bounds_ok && r.is_ok() {
        for (j, &s) in design.state_of_leader.iter().enumerate() {
            let smallest = design.action_sets[j].iter().copied().fold(f64::INFINITY, f64::min);
            if smallest * model.x_bar_max[s] < model.x_min[s] {
                r.push(
                    format!("design.action_sets[{j}]"),
                    format!("design can produce empty feasible set: state {s} upper bound {} below x_min {}",
                        smallest * model.x_bar_max[s], model.x_min[s]),
                );
            }
        }
    }

    let qf = "costs.q_leader";
    if costs.q_leader.shape() != (l, l) {
        r.push(qf, format!("expected {l}x{l}, got {}x{}", costs.q_leader.rows(), costs.q_leader.cols()));
    } else {
        check_psd(&mut r, qf, &costs.q_leader);
    }
    check_len(&mut r, "costs.v_leader", &costs.v_leader, l);
    for (k, o) in costs.leader_overrides.iter().enumerate() {
        let field = format!("costs.leader_overrides[{k}]");
        if o.leader >= l {
            r.push(field.clone(), format!("leader {} out of range", o.leader));
        }
        if let Some(q) = &o.q {
            if q.shape() != (l, l) {
                r.push(field.clone(), format!("Q must be {l}x{l}"));
            } else {
                check_psd(&mut r, &field, q);
            }
        }
        if let Some(v) = &o.v {
            check_len(&mut r, &field, v, l);
        }
    }

    if !(scenario.dt.is_finite() && scenario.dt > 0.0) {
        r.push("scenario.dt", "time step must be positive");
    }
    if check_len(&mut r, "scenario.x0", &scenario.x0, n_x) && bounds_ok {
        if let Some(s) = (0..n_x).find(|&s| scenario.x0[s] < model.x_min[s] || scenario.x0[s] > model.x_bar_max[s]) {
            r.push("scenario.x0", format!("state {s} starts outside [x_min, x_bar_max]"));
        }
    }
    if scenario.demand.len() != scenario.horizon {
        r.push(
            "scenario.demand",
            format!("demand series has {} steps, horizon is {}", scenario.demand.len(), scenario.horizon),
        );
    } else if let Some(k) = scenario.demand.iter().position(|row| row.len() != n_d || !all_finite(row)) {
        r.push("scenario.demand", format!("step {k} must hold {n_d} finite demands"));
    }
    if !scenario.u_prev.is_empty() {
        if scenario.u_prev.len() != m {
            r.push("scenario.u_prev", format!("expected {m} follower blocks"));
        } else if blocks_ok {
            for i in 0..m {
                check_len(&mut r, &format!("scenario.u_prev[{i}]"), &scenario.u_prev[i], model.b_blocks[i].cols());
            }
        }
    }
    r
}

fn check_psd(r: &mut ValidationReport, field: &str, q: &Matrix) {
    if !matrix_finite(q) {
        r.push(field, "non-finite entry");
    } else if q.max_asymmetry() > 1e-9 {
        r.push(field, "Q not symmetric");
    } else if q.rows() > 0 && q.symmetric_eigenvalues()[0] < -1e-12 {
        r.push(field, "Q not positive semidefinite");
    }
}
