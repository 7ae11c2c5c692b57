//! Multi-robot simultaneous exploration and localization.
//!
//! A team of range-sensing robots explores an unknown floor plan. Every robot
//! fuses its own Gaussian-process occupancy evidence with the models its
//! peers share, localizes itself against a graph of RSSI range estimates,
//! refines pose and map jointly with a Rao-Blackwellized update, and steers
//! toward unexplored space predicted by a convex hull of what it has seen.
//!
//! | module | contents |
//! |---|---|
//! | [`world`] | ground-truth grid, lidar, RSSI channel, unicycle kinematics |
//! | [`gp`] | GP regression, mixture fusion, exploration belief |
//! | [`rloc`] | RSSI ranging, range graph, candidate expansion, graph optimization |
//! | [`raoblackwell`] | particle pose belief, occupancy belief, joint update |
//! | [`hull`] | convex hull, Hough lines, corners, inflation, goal selection |
//! | [`agent`] | per-robot loop, message bus, scenario files, simulation |
//! | [`metrics`] | SSIM, ATE, ALE, coverage, run reports |

pub mod agent;
pub mod geometry;
pub mod gp;
pub mod hull;
pub mod io;
pub mod metrics;
pub mod raoblackwell;
pub mod rloc;
pub mod world;

/// Seedable generator used for every stochastic component.
pub type SimRng = rand_chacha::ChaCha8Rng;

// Book chapters are compiled as doctests so their snippets stay in sync.
#[cfg(doctest)]
#[doc = include_str!("../../../book/src/introduction.md")]
mod book_introduction {}
#[cfg(doctest)]
#[doc = include_str!("../../../book/src/world.md")]
mod book_world {}
#[cfg(doctest)]
#[doc = include_str!("../../../book/src/gp.md")]
mod book_gp {}
#[cfg(doctest)]
#[doc = include_str!("../../../book/src/rloc.md")]
mod book_rloc {}
#[cfg(doctest)]
#[doc = include_str!("../../../book/src/raoblackwell.md")]
mod book_raoblackwell {}
#[cfg(doctest)]
#[doc = include_str!("../../../book/src/hull.md")]
mod book_hull {}
#[cfg(doctest)]
#[doc = include_str!("../../../book/src/agent.md")]
mod book_agent {}
#[cfg(doctest)]
#[doc = include_str!("../../../book/src/metrics.md")]
mod book_metrics {}
#[cfg(doctest)]
#[doc = include_str!("../../../book/src/cli.md")]
mod book_cli {}
