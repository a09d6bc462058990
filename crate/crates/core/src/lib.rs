//! An embedded object database whose query language defines, trains and
//! evaluates neural networks stored as ordinary objects.

pub mod database;
pub mod envops;
pub mod error;
pub mod import;
pub mod netcore;
pub mod object_store;
pub mod osql;
pub mod paradigms;
pub mod value;

pub use database::{Database, Outcome, Settings, Trace};
pub use error::{Error, Position, Result};
pub use netcore::{LearnMode, TrainingReport};
pub use object_store::{ObjectId, ObjectStore};
pub use value::{Stream, Value, ValueType};
