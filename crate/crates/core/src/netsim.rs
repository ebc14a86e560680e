//! Discrete-event engine and the link model that produces message delays.
//!
//! One [`EventQueue`] drives one run. Events fire in `(time, sequence)`
//! order, so events posted for the same instant fire in insertion order.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use rand::{Rng as _, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Normal};

use crate::error::SimError;
use crate::model::{Micros, SimTime, MICROS_PER_SEC};

/// Seeded random stream. ChaCha8 keeps the stream stable across platforms
/// and releases of this crate.
#[derive(Debug, Clone)]
pub struct SimRng {
    seed: u64,
    inner: ChaCha8Rng,
}

impl SimRng {
    pub fn new(seed: u64) -> Self {
        SimRng {
            seed,
            inner: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// Independent stream derived from this rng's seed and a label.
    pub fn derive(seed: u64, stream: u64) -> Self {
        // splitmix64 finaliser over the pair
        let mut z = seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        SimRng::new(z ^ (z >> 31))
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Normal sample; a zero standard deviation returns the mean exactly.
    pub fn normal(&mut self, mean: f64, stddev: f64) -> f64 {
        if stddev <= 0.0 {
            return mean;
        }
        Normal::new(mean, stddev)
            .expect("finite positive stddev")
            .sample(&mut self.inner)
    }

    /// Exponential sample with the given rate (events per unit).
    pub fn exponential(&mut self, rate: f64) -> f64 {
        Exp::new(rate)
            .expect("positive rate")
            .sample(&mut self.inner)
    }

    pub fn uniform_u64(&mut self, lo: u64, hi_inclusive: u64) -> u64 {
        self.inner.random_range(lo..=hi_inclusive)
    }
}

pub const DEFAULT_MIN_LATENCY: Micros = 1_000;

/// Delay model of one kind of link.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkModel {
    pub one_way_mean: Micros,
    pub one_way_stddev: Micros,
    pub min_latency: Micros,
    /// Bytes per second; `None` means size does not affect delay.
    pub bandwidth: Option<u64>,
}

impl LinkModel {
    /// Client ↔ infrastructure radio link.
    pub fn wireless(mean: Micros, stddev: Micros) -> Self {
        LinkModel {
            one_way_mean: mean,
            one_way_stddev: stddev,
            min_latency: DEFAULT_MIN_LATENCY.min(mean),
            bandwidth: None,
        }
    }

    /// Scheduler ↔ worker LAN link.
    pub fn wired(mean: Micros, stddev: Micros) -> Self {
        LinkModel {
            one_way_mean: mean,
            one_way_stddev: stddev,
            min_latency: 1.min(mean),
            bandwidth: None,
        }
    }

    pub fn with_bandwidth(mut self, bytes_per_sec: u64) -> Self {
        self.bandwidth = Some(bytes_per_sec);
        self
    }

    pub fn is_deterministic(&self) -> bool {
        self.one_way_stddev == 0
    }

    pub fn sample_one_way(&self, rng: &mut SimRng) -> Micros {
        let raw = rng.normal(self.one_way_mean as f64, self.one_way_stddev as f64);
        let rounded = if raw <= 0.0 { 0 } else { raw.round() as u64 };
        rounded.max(self.min_latency)
    }

    /// One-way delay plus serialisation time of `payload_bytes`.
    pub fn transfer_time(&self, payload_bytes: u64, rng: &mut SimRng) -> Micros {
        let latency = self.sample_one_way(rng);
        match self.bandwidth {
            Some(bw) if bw > 0 && payload_bytes > 0 => {
                latency
                    + (payload_bytes as u128 * MICROS_PER_SEC as u128).div_ceil(bw as u128) as u64
            }
            _ => latency,
        }
    }

    /// SYN plus SYN-ACK, as seen by the initiator before it can send data.
    pub fn connection_setup_time(&self, rng: &mut SimRng) -> Micros {
        let syn = self.sample_one_way(rng);
        let syn_ack = self.sample_one_way(rng);
        syn + syn_ack
    }
}

#[derive(Debug)]
struct Scheduled<E> {
    at: SimTime,
    seq: u64,
    event: E,
}

impl<E> PartialEq for Scheduled<E> {
    fn eq(&self, other: &Self) -> bool {
        (self.at, self.seq) == (other.at, other.seq)
    }
}

impl<E> Eq for Scheduled<E> {}

impl<E> PartialOrd for Scheduled<E> {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl<E> Ord for Scheduled<E> {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        (self.at, self.seq).cmp(&(other.at, other.seq))
    }
}

pub struct EventQueue<E> {
    pending: BinaryHeap<Reverse<Scheduled<E>>>,
    now: SimTime,
    next_seq: u64,
    posted: u64,
    fired: u64,
    closed: bool,
}

impl<E> Default for EventQueue<E> {
    fn default() -> Self {
        Self::new()
    }
}

impl<E> EventQueue<E> {
    pub fn new() -> Self {
        EventQueue {
            pending: BinaryHeap::new(),
            now: SimTime::ZERO,
            next_seq: 0,
            posted: 0,
            fired: 0,
            closed: false,
        }
    }

    pub fn now(&self) -> SimTime {
        self.now
    }

    pub fn post(&mut self, delay: Micros, event: E) -> Result<(), SimError> {
        let at = self.now + delay;
        self.post_at(at, event)
    }

    pub fn post_at(&mut self, at: SimTime, event: E) -> Result<(), SimError> {
        if self.closed {
            return Err(SimError::QueueClosed);
        }
        if at < self.now {
            return Err(SimError::Consistency(format!(
                "event scheduled at {at} before current time {}",
                self.now
            )));
        }
        let seq = self.next_seq;
        self.next_seq += 1;
        self.posted += 1;
        self.pending.push(Reverse(Scheduled { at, seq, event }));
        Ok(())
    }

    /// Pop the next event if it fires no later than `t_end`.
    pub fn pop_until(&mut self, t_end: SimTime) -> Option<(SimTime, E)> {
        match self.pending.peek() {
            Some(Reverse(head)) if head.at <= t_end => {}
            _ => return None,
        }
        let Reverse(next) = self.pending.pop()?;
        self.now = next.at;
        self.fired += 1;
        Some((next.at, next.event))
    }

    /// Fire every event up to and including `t_end`, then advance the clock
    /// to `t_end`. The handler may post further events.
    pub fn run_until<F>(&mut self, t_end: SimTime, mut handler: F) -> Result<(), SimError>
    where
        F: FnMut(&mut EventQueue<E>, SimTime, E) -> Result<(), SimError>,
    {
        while let Some((at, ev)) = self.pop_until(t_end) {
            handler(self, at, ev)?;
        }
        if t_end > self.now {
            self.now = t_end;
        }
        Ok(())
    }

    /// Refuse any further posts.
    pub fn close(&mut self) {
        self.closed = true;
    }

    pub fn is_empty(&self) -> bool {
        self.pending.is_empty()
    }

    pub fn len(&self) -> usize {
        self.pending.len()
    }

    pub fn posted(&self) -> u64 {
        self.posted
    }

    pub fn fired(&self) -> u64 {
        self.fired
    }

    pub fn peek_time(&self) -> Option<SimTime> {
        self.pending.peek().map(|Reverse(s)| s.at)
    }
}
