//! Stochastic multi-agent dynamics on a dynamic triadic hypergraph.
//!
//! Agents carry a knowledge distribution, a spin opinion vector, a local
//! temperature, a formation field, a phase and a node memory. Triads of agents
//! carry adversarial parameter blocks and incidence roles. The crate provides
//! the state model, energies, a conservative operator-split simulator, the
//! usual observables, and an exact-enumeration oracle for small instances.

pub mod agentstate;
pub mod dynamics;
pub mod energy;
pub mod error;
pub mod exactlab;
pub mod hypergraph;
pub mod memory;
pub mod observables;
pub mod params;
pub mod simcli;

pub use agentstate::{AgentState, Configuration, GanBlock, KnowledgeState, Role, RoleAssignment};
pub use error::{Error, Result};
pub use hypergraph::{Triad, TriadNeighborhood, TriadicHypergraph};
pub use memory::{Embedding, Embeddings, KernelSpec};
pub use params::ModelParams;
