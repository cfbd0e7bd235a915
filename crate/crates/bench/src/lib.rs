//! Shared fixtures for the benchmark targets.

use jscc_core::models::{Enhancer, EnhancerConfig, Order, System, TransNet, TransNetConfig};
use jscc_core::rng::GaussianSource;

/// Desk-scale system at a given latency, untrained weights (benchmarks
/// measure arithmetic, not quality).
pub fn desk_system(latency_ms: u32, c_last: usize, seed: u64) -> System {
    let enh = Enhancer::new(EnhancerConfig::desk_default(latency_ms).unwrap(), seed).unwrap();
    let tn = TransNet::new(
        TransNetConfig::desk_default(latency_ms, c_last).unwrap(),
        seed + 1,
    )
    .unwrap();
    System::new(enh, tn, Order::EnhanceTransmit).unwrap()
}

pub fn noise_frames(n: usize, frames: usize, seed: u64) -> Vec<f64> {
    let mut g = GaussianSource::new(seed);
    (0..n * frames).map(|_| g.next() * 0.1).collect()
}
