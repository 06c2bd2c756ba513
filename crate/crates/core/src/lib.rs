//! Data acquisition over a marketplace of relational instances.
//!
//! Instances are profiled with approximate functional dependencies, priced by
//! partition entropy and linked in a two-layer join graph. A request names
//! source and target attributes plus a budget, a join-informativeness cap and
//! a quality floor; the search returns the projections to buy.
//!
//! ```
//! use datamarket::prelude::*;
//!
//! let rel = Relation::from_strings("d", &["A", "B"], &[&["a1", "b1"], &["a1", "b1"], &["a1", "b2"], &["a2", "b2"]]).unwrap();
//! let fd: Fd = "A->B".parse().unwrap();
//! assert_eq!(quality_fd(&rel, &fd).unwrap(), 0.75);
//! ```

pub mod attrs;
pub mod error;
pub mod graph;
pub mod info;
pub mod partition;
pub mod purchase;
pub mod relation;
pub mod sampling;
pub mod search;
pub mod synth;

pub use attrs::AttrSet;
pub use error::{Error, Result};

/// The commonly used items in one import.
pub mod prelude {
    pub use crate::attrs::AttrSet;
    pub use crate::error::{Error, Result};
    pub use crate::graph::{
        default_landmark_count, enumerate_target_vertex_sets, precompute_landmarks, AsLattice, AsVertex, GraphConfig,
        JoinGraph, LandmarkIndex,
    };
    pub use crate::info::{
        correlation, cumulative_entropy, join_informativeness, mutual_information, price_projection, shannon_entropy,
        DiscreteDistribution, PriceModel,
    };
    pub use crate::partition::{
        compute_partition, correct_rows, discover_afds, g3_error, quality_fd, quality_join, AfdConfig, Fd, Partition,
    };
    pub use crate::purchase::{brute_force_bcqd, mcmc_purchase, Pricing, PurchaseProblem};
    pub use crate::relation::{
        equi_join, full_outer_join_pairs, inject_inconsistency, load_csv, natural_join, Catalog, DirtSpec, Relation,
        Value,
    };
    pub use crate::sampling::{
        correlated_sample, estimate_corr_quality, estimate_ji, resampled_join, ChainStep, HashSampler, ResampleConfig,
    };
    pub use crate::search::{
        acquire, brute_force_gp, brute_force_lp, correlation_difference, find_min_igraph, find_target_graph,
        AcquisitionRequest, ExactEstimator, OracleGuard, SampleEstimator, SearchReport, TargetGraph,
    };
}

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/quality.md")]
    mod quality {}
    #[doc = include_str!("../../../book/src/measures.md")]
    mod measures {}
    #[doc = include_str!("../../../book/src/sampling.md")]
    mod sampling {}
    #[doc = include_str!("../../../book/src/join-graph.md")]
    mod join_graph {}
    #[doc = include_str!("../../../book/src/acquisition.md")]
    mod acquisition {}
    #[doc = include_str!("../../../book/src/single-purchase.md")]
    mod single_purchase {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
    #[doc = include_str!("../../../README.md")]
    mod readme {}
}
