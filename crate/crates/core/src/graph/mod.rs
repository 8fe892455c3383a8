//! Typed interaction graphs: adjacency tensors, topology generators, soft
//! edge-type selection and meta-path composition.

pub mod adjacency;
pub mod metapath;
pub mod select;

pub use adjacency::{make_topology, AdjacencyTensor, TopologyKind};
pub use metapath::{
    compose_metapath, compose_metapath_backward, extract_edges, normalize, normalize_backward, Edge,
};
pub use select::{soft_select, soft_select_backward, SelectionWeights};
