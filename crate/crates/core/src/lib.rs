//! Probabilistic reasoning over object stacking hierarchies.
//!
//! A cluttered scene is modelled as a weighted directed graph whose adjacency
//! matrix holds, at entry `(i, j)`, the probability that object `i` rests
//! directly on object `j`. On top of that representation this crate provides:
//!
//! * [`adjacency`]: construction, matrix moments, safe-grasp probabilities,
//!   Bayesian multi-view fusion, grasp-vs-view entropy and layer extraction.
//! * [`geometry`] and [`assignment`]: box overlap measures and an optimal
//!   Hungarian solver used to pair predicted and ground-truth detections.
//! * [`losses`] and [`metrics`]: set-prediction losses as pure evaluators and
//!   the relationship precision / recall / image-accuracy benchmarks.
//! * [`sim`]: a seeded bin-clearing simulator comparing an entropy-gated
//!   grasp policy against a grasp-quality-only baseline.
//!
//! All logarithms are natural logarithms. Entropy thresholds (for example the
//! default `0.45` switching threshold) are therefore expressed in nats, and the
//! largest attainable binary entropy is `ln 2 ≈ 0.693`.

pub mod adjacency;
pub mod assignment;
pub mod detection;
pub mod geometry;
pub mod io;
pub mod losses;
pub mod matrix;
pub mod metrics;
pub mod par;
pub mod sim;

pub use adjacency::{AdjacencyError, AdjacencyMatrix, EdgeProbability, SafeGraspVector};
pub use assignment::{hungarian, AssignmentError, Matching};
pub use geometry::{giou, iou, BBox};
pub use matrix::SquareMatrix;
