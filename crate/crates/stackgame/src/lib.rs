//! File formats, synthetic instances, a concurrent response cache, study
//! orchestration and report export around `stackgame-core`.

pub mod cache;
pub mod config;
pub mod error;
pub mod export;
pub mod problem_file;
pub mod study;
pub mod synthetic;
pub mod table;

pub use cache::SharedResponseCache;
pub use config::Overrides;
pub use error::{Error, Result};
pub use export::{export_poa, export_report, export_study, tables_text};
pub use problem_file::{load_problem, read_problem, read_series, save_problem, SeriesLayout};
pub use study::{poa_row, run_study, run_study_with, PoARow, PoAScenario, StudyCaches, StudyOptions, StudyResult};
pub use synthetic::{generate_synthetic, SyntheticSpec};
