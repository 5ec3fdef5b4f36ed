//! Performance of a transmit-only sensor network around one receiver.
//!
//! The receiver is an Erlang M/D/1/1 loss system whose accepted packets are
//! decoded against the time-averaged interference of every other packet in
//! the air. The crate evaluates the closed forms of that model, builds the
//! admission policies derived from it, optimizes the sensor/cluster-head mix
//! and ships a discrete-event simulator that checks all of it.

pub mod cost;
pub mod error;
pub mod geometry;
pub mod loss_model;
pub mod policies;
pub mod quadrature;
pub mod sim;

pub use cost::{CellPolicy, CostCurve, CostParams, CostSample, GainPoint};
pub use error::{Error, Result};
pub use geometry::{phi, PathLoss, RadialStep, Site, SpatialDensity, WeightFunction};
pub use loss_model::{
    erlang_pi, p_free, BoundKind, ChannelParams, ExternalInterference, Network, Policy,
    PowerDistribution, RadialTable, ReceptionCurve, RecBounds, RhoValue, Transforms,
};
pub use policies::{MaxMinSolution, PolicyRadii, Throughput, WaterfillSolution};
pub use quadrature::QuadConfig;
pub use sim::{PacketEvent, SimConfig, SimResult};
