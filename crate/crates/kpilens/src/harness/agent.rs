//! The scripted reactive agent: a deliberately myopic baseline that
//! reacts to measured throughput and buffer level only — it never looks
//! at the bandwidth forecast, which is exactly the blind spot the
//! forecast-aware refiner exploits.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReactiveAgent {
    /// Below this buffer level the agent always picks the lowest rung.
    pub safety_buffer_seconds: f64,
}

impl Default for ReactiveAgent {
    fn default() -> Self {
        ReactiveAgent {
            safety_buffer_seconds: 8.0,
        }
    }
}

impl ReactiveAgent {
    /// Choose a ladder bitrate: panic to the lowest rung when the buffer
    /// is thin, otherwise the highest rung the last measured throughput
    /// can sustain.
    pub fn propose(&self, ladder_kbps: &[f64], tput_kbps: f64, buffer_seconds: f64) -> f64 {
        assert!(!ladder_kbps.is_empty(), "ladder must not be empty");
        if buffer_seconds < self.safety_buffer_seconds {
            return ladder_kbps[0];
        }
        ladder_kbps
            .iter()
            .rev()
            .find(|r| **r <= tput_kbps)
            .copied()
            .unwrap_or(ladder_kbps[0])
    }
}
