//! Grid diagrams of knots, Dynnikov moves, unknot recognition by monotone
//! simplification, labeled dataset generation, and a bidirectional LSTM
//! classifier trained with hand-written backpropagation.

pub mod eval;
pub mod generator;
pub mod grid;
pub mod knot_table;
pub mod learner;
pub mod moves;
pub mod scalar;
pub mod search;

pub use grid::{GridDiagram, GridError, Marker};
pub use knot_table::{ClassLabel, ClassRegistry};
pub use moves::{Corner, Move, MoveSet};
pub use scalar::Scalar;
pub use search::{decide, SearchBudget, SearchOutcome, Verdict};

pub type Classifier64 = learner::Classifier<f64>;
pub type Classifier32 = learner::Classifier<f32>;
pub type LearnerParams64 = learner::LearnerParams<f64>;
pub type LearnerParams32 = learner::LearnerParams<f32>;
