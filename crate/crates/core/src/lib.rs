//! Vietoris-Rips persistent homology of sampled point clouds, parametric
//! fitting of H0 death times and replication-based inference.
//!
//! The pipeline is:
//!
//! 1. [`geometry`] draws seeded samples from a handful of test shapes and
//!    optionally perturbs a fraction of the points with Gaussian noise.
//! 2. [`rips`] computes the persistence diagram (fast H0 path through a
//!    minimum spanning tree, boundary-matrix reduction for H1/H2).
//! 3. [`diagrams`] summarizes diagrams: finite deaths, short/long bar
//!    classification, percentiles, moments and bottleneck distance.
//! 4. [`distfit`] fits finite-support distributions (beta, generalized Pareto)
//!    to the death times and picks one by BIC/AIC.
//! 5. [`inference`] replicates diagrams from the fitted model and tests the
//!    order statistics `T_j` of the observed deaths.
//!
//! Filtration convention: an edge enters the filtration at its Euclidean
//! length (diameter convention). The radius convention used by some other
//! tools differs by a factor of two.

pub mod diagrams;
pub mod distfit;
pub mod error;
pub mod geometry;
pub mod inference;
pub mod io;
pub mod rips;
pub mod rng;
pub mod special;

pub use diagrams::{BarClassification, PercentileTable};
pub use distfit::{Family, FittedDistribution};
pub use error::{Error, Result};
pub use geometry::{CloudMeta, PointCloud, ShapeSpec};
pub use inference::{InferenceReport, SignalCount};
pub use rips::{DistanceMatrix, PersistenceDiagram, PersistencePair};
