//! Local tests of the manifold and fiber-bundle hypotheses for point clouds
//! such as LLM token-embedding matrices.
//!
//! The pipeline: for every point, find the radii at which the ball around it
//! contains `v` other points ([`geometry`]), turn the log-volume/log-radius
//! curve into local dimension estimates ([`dimension`]), then look for
//! significant slope changes between adjacent windows with Welch t-tests
//! ([`engine`], [`stats`]). Rejections are corrected across all points with
//! Holm-Bonferroni.

pub mod dimension;
pub mod engine;
pub mod error;
pub mod geometry;
mod npy;
pub mod pca;
pub mod persistence;
pub mod pointcloud;
pub mod report;
pub mod stats;
pub mod synthetic;

pub use dimension::{dimension_quartiles, loglog_slopes, quartiles, Quartiles, SlopeEntry, SlopeSeries};
pub use engine::{fiber_bundle_test, manifold_test, run_study, Regime, SplitOutcome, TestConfig, TokenTestResult};
pub use error::{Error, Result};
pub use geometry::{neighbor_radii, neighbor_radii_with, pairwise_distance_block, NeighborConfig, NeighborProfile};
pub use persistence::{theorem2_check, PersistenceCheck};
pub use pointcloud::{load_csv, load_labels, load_npy, save_csv, save_npy, PointCloud};
pub use report::{
    export_neighborhood, export_results, read_results, summarize, write_neighborhood, Center, ExportFormat, ResultRow,
    StudySummary,
};
pub use stats::{holm_bonferroni, student_t_cdf, welch_t_test, Alternative, TTestOutcome};
