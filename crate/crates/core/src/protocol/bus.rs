use std::collections::VecDeque;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BusConfig {
    /// Probability that a whole write is lost.
    pub loss_rate: f64,
    /// Independent per-bit flip probability.
    pub bit_error_rate: f64,
    #[serde(rename = "latency_s")]
    pub latency: f64,
    pub seed: u64,
}

impl Default for BusConfig {
    fn default() -> Self {
        Self {
            loss_rate: 0.0,
            bit_error_rate: 0.0,
            latency: 0.0,
            seed: 0,
        }
    }
}

impl BusConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, r) in [
            ("loss_rate", self.loss_rate),
            ("bit_error_rate", self.bit_error_rate),
        ] {
            if !(0.0..1.0).contains(&r) {
                return Err(Error::Config(format!("{name} {r} outside [0, 1)")));
            }
        }
        if !(self.latency >= 0.0) || !self.latency.is_finite() {
            return Err(Error::Config("latency must be non-negative".into()));
        }
        Ok(())
    }
}

/// Probability that a frame of `frame_bytes` suffers at least one bit flip.
pub fn frame_loss_probability(bit_error_rate: f64, frame_bytes: usize) -> f64 {
    1.0 - (1.0 - bit_error_rate).powi(8 * frame_bytes as i32)
}

/// One direction of a lossy serial link.
#[derive(Debug, Clone)]
pub struct SimulatedBus {
    config: BusConfig,
    rng: ChaCha8Rng,
    in_flight: VecDeque<(f64, Vec<u8>)>,
    pub writes_dropped: u64,
    pub bits_flipped: u64,
}

impl SimulatedBus {
    pub fn new(config: BusConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            rng: ChaCha8Rng::seed_from_u64(config.seed),
            config,
            in_flight: VecDeque::new(),
            writes_dropped: 0,
            bits_flipped: 0,
        })
    }

    pub fn config(&self) -> &BusConfig {
        &self.config
    }

    pub fn write(&mut self, bytes: &[u8], t: f64) {
        if bytes.is_empty() {
            return;
        }
        if self.config.loss_rate > 0.0 && self.rng.random::<f64>() < self.config.loss_rate {
            self.writes_dropped += 1;
            return;
        }
        let mut data = bytes.to_vec();
        if self.config.bit_error_rate > 0.0 {
            for byte in data.iter_mut() {
                for bit in 0..8 {
                    if self.rng.random::<f64>() < self.config.bit_error_rate {
                        *byte ^= 1 << bit;
                        self.bits_flipped += 1;
                    }
                }
            }
        }
        self.in_flight.push_back((t + self.config.latency, data));
    }

    /// Everything due by time `t`, in write order.
    pub fn read(&mut self, t: f64) -> Vec<u8> {
        let mut out = Vec::new();
        while let Some((due, _)) = self.in_flight.front() {
            if *due > t {
                break;
            }
            out.extend(self.in_flight.pop_front().unwrap().1);
        }
        out
    }

    pub fn pending(&self) -> usize {
        self.in_flight.len()
    }
}

/// Host-to-device and device-to-host links with independent noise.
#[derive(Debug, Clone)]
pub struct DuplexBus {
    pub to_device: SimulatedBus,
    pub to_host: SimulatedBus,
}

impl DuplexBus {
    pub fn new(config: BusConfig) -> Result<Self> {
        let back = BusConfig {
            seed: config.seed ^ 0x5DEE_CE66_D1CE_B00C,
            ..config
        };
        Ok(Self {
            to_device: SimulatedBus::new(config)?,
            to_host: SimulatedBus::new(back)?,
        })
    }
}
