//! Homotopy-aware multi-agent path planning on planar grids.
//!
//! Solutions of a grid multi-agent pathfinding instance are labeled by
//! braid-group elements held in Dynnikov coordinates, so that homotopy
//! classes of solutions can be compared exactly and cheaply. On top of
//! that labeling sit:
//!
//! - [`braid`]: braid words, Dynnikov coordinates, strand projections;
//! - [`dehornoy`]: a handle-reduction word-problem baseline used for
//!   benchmark comparison;
//! - [`map`]: grid maps, obstacle components, instances, Moving-AI I/O;
//! - [`trace`]: the swap-event sweep converting grid motion into braid
//!   generators;
//! - [`planner`]: homotopy-aware revised prioritized planning, producing
//!   up to `K` pairwise non-homotopic solutions, plus a targeted variant;
//! - [`jointbfs`]: exhaustive joint-space enumeration of homotopy classes
//!   (oracle-grade, tiny instances only);
//! - [`opt`]: penalty-based trajectory smoothing with a damped
//!   least-squares loop;
//! - [`bench`]: experiment harness behind the CLI.

pub mod bench;
pub mod braid;
pub mod dehornoy;
pub mod jointbfs;
pub mod map;
pub mod opt;
pub mod planner;
pub mod trace;
