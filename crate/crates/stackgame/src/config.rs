//! Run settings with layered sources: built-in defaults, then an optional
//! JSON config file, then overrides (the CLI feeds environment variables and
//! flags into the overrides, flags winning).

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use stackgame_core::GameConfig;

use crate::error::{Error, Result};
use crate::study::StudyOptions;

/// Every setting is optional; absent ones leave the lower layer in place.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Overrides {
    pub eps_follower: Option<f64>,
    pub eps_leader: Option<f64>,
    pub max_sweeps: Option<usize>,
    pub max_rounds: Option<usize>,
    pub enumeration_cap: Option<usize>,
    pub qp_tolerance: Option<f64>,
    pub qp_max_iter: Option<usize>,
    pub jobs: Option<usize>,
    pub starts: Option<usize>,
    pub seed: Option<u64>,
}

impl Overrides {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let de = &mut serde_json::Deserializer::from_str(&text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let at = e.path().to_string();
            Error::parse(path, format!("at `{at}`: {}", e.into_inner()))
        })
    }

    /// `self` with every setting present in `top` replaced.
    pub fn then(self, top: &Overrides) -> Overrides {
        Overrides {
            eps_follower: top.eps_follower.or(self.eps_follower),
            eps_leader: top.eps_leader.or(self.eps_leader),
            max_sweeps: top.max_sweeps.or(self.max_sweeps),
            max_rounds: top.max_rounds.or(self.max_rounds),
            enumeration_cap: top.enumeration_cap.or(self.enumeration_cap),
            qp_tolerance: top.qp_tolerance.or(self.qp_tolerance),
            qp_max_iter: top.qp_max_iter.or(self.qp_max_iter),
            jobs: top.jobs.or(self.jobs),
            starts: top.starts.or(self.starts),
            seed: top.seed.or(self.seed),
        }
    }

    pub fn game_config(&self) -> Result<GameConfig> {
        let mut cfg = GameConfig::default();
        if let Some(v) = self.eps_follower {
            cfg.epsilon_follower = v;
        }
        if let Some(v) = self.eps_leader {
            cfg.epsilon_leader = v;
        }
        if let Some(v) = self.max_sweeps {
            cfg.max_sweeps = v;
        }
        if let Some(v) = self.max_rounds {
            cfg.max_rounds = v;
        }
        if let Some(v) = self.enumeration_cap {
            cfg.enumeration_cap = v;
        }
        if let Some(v) = self.qp_tolerance {
            cfg.qp.tolerance = v;
        }
        if let Some(v) = self.qp_max_iter {
            cfg.qp.max_iter = v;
        }
        if !(cfg.epsilon_follower >= 0.0 && cfg.epsilon_leader >= 0.0) {
            return Err(Error::Spec("tolerances must be non-negative".into()));
        }
        if !(cfg.qp.tolerance > 0.0) {
            return Err(Error::Spec("QP tolerance must be positive".into()));
        }
        Ok(cfg)
    }

    pub fn study_options(&self) -> StudyOptions {
        let d = StudyOptions::default();
        StudyOptions {
            jobs: self.jobs.unwrap_or(d.jobs).max(1),
            starts: self.starts.unwrap_or(d.starts),
            seed: self.seed.unwrap_or(d.seed),
            ..d
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn later_layers_win() {
        let file = Overrides {
            eps_follower: Some(1e-3),
            jobs: Some(2),
            ..Overrides::default()
        };
        let flags = Overrides {
            jobs: Some(4),
            ..Overrides::default()
        };
        let merged = file.then(&flags);
        assert_eq!(merged.jobs, Some(4));
        assert_eq!(merged.eps_follower, Some(1e-3));
        assert_eq!(merged.game_config().unwrap().epsilon_follower, 1e-3);
        assert_eq!(merged.study_options().jobs, 4);
    }

    #[test]
    fn negative_tolerance_is_rejected() {
        let o = Overrides {
            eps_leader: Some(-1.0),
            ..Overrides::default()
        };
        assert!(o.game_config().is_err());
    }
}
