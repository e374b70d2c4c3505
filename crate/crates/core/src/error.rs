use alloc::string::String;
use alloc::vec::Vec;

use crate::qp::QpStatus;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("action {value} is not in the action set of leader {leader}")]
    ActionNotInSet { leader: usize, value: f64 },

    #[error("leader profile has {got} actions, expected {expected}")]
    ProfileLength { expected: usize, got: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("followers infeasible at leader profile {profile:?}")]
    FollowerInfeasible { profile: Vec<f64> },

    #[error("best response of follower {follower} infeasible at leader profile {profile:?}")]
    BestResponseInfeasible { profile: Vec<f64>, follower: usize },

    #[error("QP solver stopped with status {0:?}")]
    Solver(QpStatus),

    #[error("every leader profile is infeasible")]
    AllProfilesInfeasible,

    #[error("lattice has {size} profiles, enumeration cap is {cap}")]
    LatticeTooLarge { size: usize, cap: usize },

    #[error("no equilibrium found")]
    NoEquilibriumFound,

    #[error("invalid problem: {0}")]
    Invalid(String),
}
