//! The predefined neural schema and network dynamics.

mod dynamics;
pub mod natives;
mod schema;
mod topology;

pub use dynamics::{
    backward_pass, evaluate, forward_pass, learn, output_data, random_weights, set_all_weights, EvalContext, LearnMode,
    TrainingReport,
};
pub use natives::{ident, sigmoid};
pub use schema::{install_schema, schema_types};
pub use topology::{
    connect, connect_all, flatten, hull_resolve, learn_sequence, link_owner, members, net_links, parent, predecessors,
    root,
};

pub(crate) use dynamics::{foreign_get, foreign_set};
pub(crate) use topology::check_containment;
