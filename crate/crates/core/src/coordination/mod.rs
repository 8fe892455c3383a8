//! Factored values, joint action selection and the value networks.

pub mod encoder;
pub mod factored;
pub mod maxsum;
pub mod network;

pub use encoder::AgentEncoder;
pub use factored::{Aggregation, FactoredQ, JointAction, PairPayoff};
pub use maxsum::{greedy_action, greedy_action_trace, MaxSumTrace};
pub use network::{build_factored_q, Algo, Heads, NetworkConfig, PayoffHead, QGrad, QNetwork};
