//! Fixtures shared by the benchmarks.

use erlang_rain::sim::SimConfig;
use erlang_rain::{ChannelParams, Network, PathLoss, SpatialDensity};

/// Single receiver with 10 sensors per m^2 on a 50 m disk.
pub fn canonical_network() -> Network {
    Network::new(
        PathLoss::new(10f64.powf(-5.5), 3.3).expect("valid path loss"),
        SpatialDensity::uniform(10.0, 50.0),
        ChannelParams { p_bar: 1e-3, noise_w: 1e-16, gamma: 1.0, b: 1e-3, lambda_e: 0.125 },
    )
    .expect("valid network")
}

/// One second of traffic, about 10^4 packets on the canonical network.
pub fn short_run(seed: u64) -> SimConfig {
    SimConfig {
        duration: 1.0,
        warmup: 0.02,
        domain_radius: 50.0,
        seed,
        annulus_bins: 50,
        batches: 20,
    }
}
