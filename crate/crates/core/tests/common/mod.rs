//! Shared test oracles and fixtures, independent of the library's own
//! computation paths.
//!
//! Each integration-test target uses its own subset of these helpers.
#![allow(dead_code)]

use siglink::isc::Frame;

/// Stationary distribution of the explicit birth–death chain: arrivals at
/// rate `lambda`, departures at rate `min(m, channels)·mu`, truncated at
/// `cap` states. Solved by detailed balance, not by the closed forms under
/// test.
pub fn chain_stationary(channels: u32, lambda: f64, mu: f64, cap: usize) -> Vec<f64> {
    let mut pi = vec![0.0f64; cap + 1];
    pi[0] = 1.0;
    let mut cur = 1.0f64;
    for (m, p) in pi.iter_mut().enumerate().skip(1) {
        let departure = (m.min(channels as usize)) as f64 * mu;
        cur *= lambda / departure;
        *p = cur;
    }
    let total: f64 = pi.iter().sum();
    for p in pi.iter_mut() {
        *p /= total;
    }
    pi
}

pub fn chain_idle_probability(channels: u32, lambda: f64, mu: f64, cap: usize) -> f64 {
    chain_stationary(channels, lambda, mu, cap)[0]
}

pub fn chain_waiting_probability(channels: u32, lambda: f64, mu: f64, cap: usize) -> f64 {
    chain_stationary(channels, lambda, mu, cap)[channels as usize..]
        .iter()
        .sum()
}

/// Small deterministic generator for test inputs (xorshift64*).
pub struct TestRng(u64);

impl TestRng {
    pub fn new(seed: u64) -> Self {
        TestRng(seed.max(1))
    }

    pub fn next_u64(&mut self) -> u64 {
        let mut x = self.0;
        x ^= x >> 12;
        x ^= x << 25;
        x ^= x >> 27;
        self.0 = x;
        x.wrapping_mul(0x2545_F491_4F6C_DD1D)
    }

    /// Uniform in [0, 1).
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }

    pub fn next_range(&mut self, lo: u64, hi: u64) -> u64 {
        lo + self.next_u64() % (hi - lo + 1)
    }

    pub fn next_bit(&mut self) -> bool {
        self.next_u64() & 1 == 1
    }
}

/// Deterministic photographic-style test frame: smooth low-frequency
/// structure plus fine texture, with every sample kept inside [16, 239] so
/// embedding never clips.
pub fn photographic_frame(width: u32, height: u32, seed: u64) -> Frame {
    let mut samples = Vec::with_capacity(width as usize * height as usize * 3);
    let mut rng = TestRng::new(seed);
    let (phase_r, phase_g, phase_b) = (rng.next_f64(), rng.next_f64(), rng.next_f64());
    for y in 0..height {
        for x in 0..width {
            let fx = x as f64 / width as f64;
            let fy = y as f64 / height as f64;
            let base = |phase: f64, kx: f64, ky: f64| -> f64 {
                128.0
                    + 55.0 * ((kx * fx + phase) * std::f64::consts::TAU).sin()
                    + 35.0 * ((ky * fy + 2.0 * phase) * std::f64::consts::TAU).cos()
            };
            let texture = (rng.next_f64() - 0.5) * 16.0;
            for (phase, kx, ky) in [
                (phase_r, 1.7, 2.3),
                (phase_g, 2.9, 1.1),
                (phase_b, 1.3, 3.1),
            ] {
                let v = (base(phase, kx, ky) + texture).clamp(16.0, 239.0);
                samples.push(v.round() as u8);
            }
        }
    }
    Frame::new(width, height, samples).unwrap()
}
