//! End-to-end network slicing simulator: an OFDMA radio access segment and a
//! VNF-chain core segment priced into a single infrastructure utility, plus
//! the learning machinery to optimize it slot by slot under channel and
//! demand uncertainty.
//!
//! Layering, bottom up:
//!
//! * [`topology`]: physical core graphs and candidate path enumeration.
//! * [`radio`]: channels, worst-case rates under bounded estimation error,
//!   access-side delay and feasibility checks.
//! * [`corenet`]: VM placement, chain routing, processing/transport delays,
//!   robust link loads.
//! * [`economics`]: tariffs and resource prices rolled into per-slice
//!   utility.
//! * [`config`] / [`scenario`]: declarative experiment setup and its
//!   deterministic materialization.
//! * [`env`]: the per-slot decision process gluing all of the above into
//!   observations, structural action decoding, and graded rewards.

pub mod agents;
pub mod config;
pub mod corenet;
pub mod economics;
pub mod env;
pub mod harness;
pub mod nn;
pub mod oracle;
pub mod radio;
pub mod scenario;
pub mod topology;
