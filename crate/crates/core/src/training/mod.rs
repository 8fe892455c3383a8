//! Episode replay, double-Q learning and evaluation.

pub mod episode;
pub mod learner;
pub mod metrics;
pub mod trainer;

pub use episode::{collect_episode, EpisodeRecord, ReplayBuffer};
pub use learner::{sync_target, Learner, DIVERGENCE_LIMIT};
pub use metrics::{append_row, fmt_g, MetricsRow, CSV_HEADER};
pub use trainer::{derive_seed, evaluate, evaluate_seeded, EvalSummary, Progress, TrainConfig, Trainer};
