//! Joint location and beamforming optimization for STAR-RIS assisted NOMA
//! downlinks.
//!
//! The crate models a base station serving users on both sides of a
//! simultaneously transmitting and reflecting surface (energy-splitting
//! protocol) and maximizes the weighted sum-rate by alternating between
//! active beamforming, passive surface configuration, and the surface
//! deployment location. Two multiple-access schemes are supported:
//! per-user beamformers with full SIC, and cluster-shared beamformers
//! with intra-cluster power allocation.

pub mod bf_noma;
pub mod channel;
pub mod cluster_noma;
pub mod cli;
pub mod conic;
pub mod oracle;
pub mod rates;
pub mod scene;
pub mod starris;

pub use cli::run;

