//! Relative arc density of r-factor proximity catch digraphs: construction,
//! null and alternative moments, efficacies and Monte Carlo experiments.

pub mod alternatives;
pub mod delaunay;
pub mod efficacy;
pub mod geometry;
pub mod montecarlo;
pub mod normal;
pub mod nulldist;
pub mod pcd;

pub use alternatives::{AltError, AltKind, AltSpec};
pub use delaunay::{DelaunayError, Triangulation};
pub use efficacy::{Efficacy, EfficacyError, VarianceSource};
pub use geometry::{GeometryError, Point, RFactor, Triangle};
pub use montecarlo::{ExperimentConfig, ExperimentResult, McError, Mode, Region};
pub use nulldist::{NullDistError, TestResult, Weights};
pub use pcd::{OutsidePolicy, Partition, PcDigraph, PcdError};
