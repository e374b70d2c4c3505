//! Two-layer Stackelberg co-design of networked linear systems.
//!
//! Leaders pick discrete scale factors for selected state upper bounds; followers
//! then play a constrained linear-quadratic difference game (or solve it jointly)
//! on the resulting feasible set. This crate holds the numerical core: the model
//! types, a box/equality constrained QP engine, follower best-response dynamics,
//! the leader layer over the finite design lattice, and the four class
//! orchestrations together with prices of anarchy.
//!
//! The crate is `no_std` (it needs `alloc`). File formats, the CLI and the
//! concurrent response cache live in the `stackgame` crate.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod error;
pub mod follower;
pub mod leader;
pub mod linalg;
pub mod model;
pub mod qp;
pub mod sparse;
pub mod stackelberg;

pub use error::Error;
pub use follower::{
    best_response, build_best_response_qp, build_cooperative_qp, feasibility_probe, follower_nash, follower_nash_from,
    follower_nash_with, solve_cooperative, solve_cooperative_with, BestResponse, FollowerBehavior,
    FollowerEquilibriumCert, FollowerTrajectorySet, FollowerWorkspace, GameConfig, NashStart,
    TrajectoryResiduals,
};
pub use leader::{
    enumerate_pure_nash, evaluate_profile, leader_cooperative, leader_cost, leader_nash, FollowerResponse,
    LeaderEquilibriumCert, LeaderTermination, ProfileOutcome, ResponseCache, ResponseSource,
};
pub use linalg::Matrix;
pub use model::{
    state_upper_bound, validate_model, CostParams, DesignSpace, LeaderOverride, LeaderProfile,
    NetworkModel, Problem, ProfileIndex, Scenario, Units, ValidationReport, Violation,
};
pub use qp::{check_kkt, solve_qp, solve_qp_with_hint, DualSet, KktResiduals, QpSettings, QpSolution, QpSolver, QpStatus, QuadProgram};
pub use stackelberg::{
    price_of_anarchy, solve_all_classes, solve_class, solve_class_with, EquilibriumReport, LeaderBehavior,
    Multiplicity, PoALayer, PoAReport, PoARequest, StackelbergClass,
};

pub type Result<T> = core::result::Result<T, Error>;
