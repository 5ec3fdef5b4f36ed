//! Discrete-event Monte Carlo simulation of the Poisson rain of packets
//! through the loss receiver, used as an independent check of the closed
//! forms.
//!
//! A run is strictly sequential: generate the marked arrivals, push them
//! through the receiver state machine, then compute time-averaged
//! interference for every accepted packet from exact interval overlaps.
//! Independent replications (seeds `s, s + 1, ...`) can run in parallel and
//! their results merged.

mod rain;
mod receiver;
pub mod stats;
mod trace;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use rain::{generate_generic, generate_rain, generate_schedule};
pub use receiver::{
    brute_force_interference, conditional_laplace_batches, estimate_conditional_laplace,
    estimate_rho, idle_gap_test, laplace_from_batches, run_loss_system, AnnulusBatches,
    AnnulusRate, InterferenceScope, LaplaceEstimate, SimResult,
};
pub use stats::{ks_exponential, Estimate, KsOutcome, RatioBatches};
pub use trace::{write_trace, TRACE_HEADER};

/// Horizon and bookkeeping of one replication.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    /// Length of the observed window `[0, duration)` (s).
    pub duration: f64,
    /// Simulated time before the window, discarded from statistics (s).
    pub warmup: f64,
    /// Emitters are drawn from the density restricted to this disk (m).
    pub domain_radius: f64,
    pub seed: u64,
    /// Equal-width annuli over `[0, domain_radius]` for spatial estimates.
    pub annulus_bins: usize,
    /// Time batches for standard errors.
    pub batches: usize,
}

impl SimConfig {
    pub fn validate(&self, b: f64) -> Result<()> {
        if !(self.duration > 0.0 && self.duration.is_finite()) {
            return Err(Error::InvalidParameter("duration must be positive".into()));
        }
        if !(self.duration > self.warmup && self.warmup >= 2.0 * b) {
            return Err(Error::InvalidParameter(
                "need duration > warmup >= 2 * packet duration".into(),
            ));
        }
        if !(self.domain_radius > 0.0 && self.domain_radius.is_finite()) {
            return Err(Error::InvalidParameter("domain_radius must be positive".into()));
        }
        if self.annulus_bins < 1 {
            return Err(Error::InvalidParameter("annulus_bins must be >= 1".into()));
        }
        if self.batches < 2 {
            return Err(Error::InvalidParameter("batches must be >= 2".into()));
        }
        Ok(())
    }

    /// Same configuration with the seed of replication `k`.
    pub fn replication(&self, k: u64) -> Self {
        Self { seed: self.seed.wrapping_add(k), ..*self }
    }
}

/// One emitted packet.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PacketEvent {
    /// Arrival (emission) time (s).
    pub t: f64,
    /// Emitter distance; absent for packets drawn from a power distribution.
    pub r: Option<f64>,
    pub angle: f64,
    /// Index of the emitting site for atomic densities.
    pub site: Option<u32>,
    /// Mean received power `P L(r)` (W).
    pub power: f64,
    /// Rayleigh fading power gain.
    pub h: f64,
    pub admissible: bool,
    pub accepted: bool,
    /// Time-averaged power of all other packets over `[t, t + B)` (W).
    pub interference: f64,
    /// The same restricted to admissible packets (W).
    pub interference_admissible: f64,
    pub success: bool,
}

impl PacketEvent {
    pub(crate) fn arrival(t: f64, power: f64, h: f64, admissible: bool) -> Self {
        Self {
            t,
            r: None,
            angle: 0.0,
            site: None,
            power,
            h,
            admissible,
            accepted: false,
            interference: 0.0,
            interference_admissible: 0.0,
            success: false,
        }
    }

    /// Received power including fading.
    pub fn received(&self) -> f64 {
        self.h * self.power
    }
}
