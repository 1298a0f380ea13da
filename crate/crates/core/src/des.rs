//! Discrete-event simulation of the cloud link pool.
//!
//! Two allocation policies are compared: `StaticPartition`, where each
//! display's users may only occupy that display's reserved channels, and
//! `DynamicBorrow`, where an arriving request may be served on another
//! display's idle channel and a freed channel serves the globally
//! longest-waiting request.
//!
//! Arrivals are Poisson per display, service times exponential, one logical
//! clock, events processed in timestamp order with insertion-order
//! tie-breaking. Identical inputs reproduce identical metrics.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, VecDeque};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::queueing::CloudSystemConfig;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DesError {
    #[error("InvalidParams: {0}")]
    InvalidParams(String),
}

/// Channel allocation policy.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Policy {
    /// IP-style partition: a display's users use only its own channels.
    StaticPartition,
    /// SDN borrowing: idle channels of other displays may be seized.
    DynamicBorrow,
}

impl std::fmt::Display for Policy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Policy::StaticPartition => write!(f, "static"),
            Policy::DynamicBorrow => write!(f, "dynamic"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimParams {
    pub seed: u64,
    /// Simulation horizon in arrivals, counted across all displays.
    pub total_arrivals: u64,
    /// Per-display waiting-room size; `None` is an unbounded queue.
    pub queue_capacity: Option<usize>,
    /// Fraction of arrivals discarded from statistics, in [0, 1).
    pub warmup_fraction: f64,
}

impl SimParams {
    pub fn validate(&self) -> Result<(), DesError> {
        if self.total_arrivals < 1 {
            return Err(DesError::InvalidParams("total_arrivals must be >= 1".into()));
        }
        if !(0.0..1.0).contains(&self.warmup_fraction) {
            return Err(DesError::InvalidParams(format!(
                "warmup_fraction must be in [0, 1), got {}",
                self.warmup_fraction
            )));
        }
        Ok(())
    }
}

/// A user request, tagged with whether it falls inside the measured window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Request {
    pub display: usize,
    pub arrival_time: f64,
    pub counted: bool,
}

/// Outcome of an allocation attempt at arrival.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AllocationOutcome {
    OwnChannel(usize),
    BorrowedChannel { channel: usize, owner: usize },
    Enqueued,
    Dropped,
}

/// Outcome of a service completion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ReleaseOutcome {
    /// The freed channel immediately serves this request.
    Serve { request: Request, channel: usize },
    /// The channel returns to its owner's idle set.
    Idle,
}

/// Channels and waiting queues of the pool.
///
/// Channels are numbered display-major: display d owns a contiguous id
/// range, so "lowest display_id first" borrowing is a single forward scan.
#[derive(Debug, Clone)]
pub struct ChannelPoolState {
    owner: Vec<usize>,
    serving: Vec<Option<Request>>,
    own_range: Vec<(usize, usize)>,
    queues: Vec<VecDeque<Request>>,
    queue_capacity: Option<usize>,
}

impl ChannelPoolState {
    pub fn new(channels_per_display: &[u32], queue_capacity: Option<usize>) -> Self {
        let mut owner = Vec::new();
        let mut own_range = Vec::new();
        for (d, &u) in channels_per_display.iter().enumerate() {
            let start = owner.len();
            owner.extend(std::iter::repeat_n(d, u as usize));
            own_range.push((start, owner.len()));
        }
        let n = owner.len();
        Self {
            owner,
            serving: vec![None; n],
            own_range,
            queues: vec![VecDeque::new(); channels_per_display.len()],
            queue_capacity,
        }
    }

    pub fn busy_count(&self) -> usize {
        self.serving.iter().filter(|s| s.is_some()).count()
    }

    pub fn queue_len(&self, display: usize) -> usize {
        self.queues[display].len()
    }

    pub fn total_queue_len(&self) -> usize {
        self.queues.iter().map(|q| q.len()).sum()
    }

    pub fn channel_owner(&self, channel: usize) -> usize {
        self.owner[channel]
    }

    fn idle_in_range(&self, range: (usize, usize)) -> Option<usize> {
        (range.0..range.1).find(|&c| self.serving[c].is_none())
    }

    /// Decide and commit the fate of an arriving request.
    pub fn try_allocate(&mut self, request: Request, policy: Policy) -> AllocationOutcome {
        let d = request.display;
        if let Some(ch) = self.idle_in_range(self.own_range[d]) {
            self.serving[ch] = Some(request);
            return AllocationOutcome::OwnChannel(ch);
        }
        if policy == Policy::DynamicBorrow {
            // lowest display_id first among lenders
            for lender in 0..self.own_range.len() {
                if lender == d {
                    continue;
                }
                if let Some(ch) = self.idle_in_range(self.own_range[lender]) {
                    self.serving[ch] = Some(request);
                    return AllocationOutcome::BorrowedChannel {
                        channel: ch,
                        owner: lender,
                    };
                }
            }
        }
        match self.queue_capacity {
            Some(cap) if self.queues[d].len() >= cap => AllocationOutcome::Dropped,
            _ => {
                self.queues[d].push_back(request);
                AllocationOutcome::Enqueued
            }
        }
    }

    /// Handle a service completion on `channel`.
    pub fn on_release(&mut self, channel: usize, policy: Policy) -> ReleaseOutcome {
        self.serving[channel] = None;
        let next = match policy {
            Policy::StaticPartition => {
                let owner = self.owner[channel];
                self.queues[owner].pop_front()
            }
            Policy::DynamicBorrow => {
                // globally longest-waiting request; ties to the lowest display
                let best = self
                    .queues
                    .iter()
                    .enumerate()
                    .filter_map(|(d, q)| q.front().map(|r| (d, r.arrival_time)))
                    .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)))
                    .map(|(d, _)| d);
                best.and_then(|d| self.queues[d].pop_front())
            }
        };
        match next {
            Some(request) => {
                self.serving[channel] = Some(request);
                ReleaseOutcome::Serve { request, channel }
            }
            None => ReleaseOutcome::Idle,
        }
    }
}

/// Measured performance of one simulation run.
#[derive(Debug, Clone, PartialEq)]
pub struct QueueMetrics {
    pub arrivals: u64,
    pub served: u64,
    pub dropped: u64,
    pub wait_probability: f64,
    pub drop_probability: f64,
    pub mean_wait_s: f64,
    pub mean_queue_len: f64,
    pub busy_fraction: f64,
    pub per_display: Vec<DisplayMetrics>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DisplayMetrics {
    pub arrivals: u64,
    pub served: u64,
    pub dropped: u64,
    pub wait_probability: f64,
    pub drop_probability: f64,
    pub mean_wait_s: f64,
    pub mean_queue_len: f64,
    /// Time-averaged channels serving this display's traffic over U_d.
    pub busy_fraction: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum EventKind {
    Arrival { display: usize },
    Departure { channel: usize },
}

#[derive(Debug, Clone, Copy)]
struct Event {
    time: f64,
    seq: u64,
    kind: EventKind,
}

impl PartialEq for Event {
    fn eq(&self, other: &Self) -> bool {
        self.time == other.time && self.seq == other.seq
    }
}
impl Eq for Event {}
impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Event {
    // BinaryHeap is a max-heap; invert so the earliest (time, seq) pops first
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .time
            .total_cmp(&self.time)
            .then(other.seq.cmp(&self.seq))
    }
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// One independent substream per display per purpose (0 = arrivals,
/// 1 = services), derived from the master seed by fixed counters.
fn substream(seed: u64, display: usize, purpose: u64) -> ChaCha8Rng {
    let key = splitmix64(seed ^ splitmix64((display as u64) << 1 | purpose));
    ChaCha8Rng::seed_from_u64(key)
}

/// Exponential variate via inverse CDF.
fn exp_variate<R: Rng>(rng: &mut R, rate: f64) -> f64 {
    let u: f64 = rng.random();
    -(1.0 - u).ln() / rate
}

struct Tally {
    arrivals: u64,
    waited: u64,
    dropped: u64,
    served: u64,
    wait_sum: f64,
    busy_time: f64,
    qlen_time: f64,
}

impl Tally {
    fn new() -> Self {
        Tally {
            arrivals: 0,
            waited: 0,
            dropped: 0,
            served: 0,
            wait_sum: 0.0,
            busy_time: 0.0,
            qlen_time: 0.0,
        }
    }
}

/// Run one simulation to completion and return its metrics.
///
/// The horizon is `params.total_arrivals` arrivals in global time order;
/// after the last arrival the system drains so every accepted request's
/// waiting time is observed. Time-averaged quantities are measured between
/// the first post-warmup arrival and the last arrival.
pub fn simulate(
    sys: &CloudSystemConfig,
    policy: Policy,
    params: &SimParams,
) -> Result<QueueMetrics, DesError> {
    params.validate()?;
    let displays = sys.displays();
    let d_count = displays.len();
    let channels: Vec<u32> = displays.iter().map(|d| d.reserved_channels).collect();
    let total_channels: u32 = channels.iter().sum();

    let mut arrival_rngs: Vec<ChaCha8Rng> = (0..d_count)
        .map(|d| substream(params.seed, d, 0))
        .collect();
    let mut service_rngs: Vec<ChaCha8Rng> = (0..d_count)
        .map(|d| substream(params.seed, d, 1))
        .collect();

    let mut heap: BinaryHeap<Event> = BinaryHeap::new();
    let mut seq: u64 = 0;
    let push = |heap: &mut BinaryHeap<Event>, seq: &mut u64, time: f64, kind: EventKind| {
        heap.push(Event {
            time,
            seq: *seq,
            kind,
        });
        *seq += 1;
    };

    for (d, cfg) in displays.iter().enumerate() {
        if cfg.arrival_rate > 0.0 {
            let t = exp_variate(&mut arrival_rngs[d], cfg.arrival_rate);
            push(&mut heap, &mut seq, t, EventKind::Arrival { display: d });
        }
    }

    let mut state = ChannelPoolState::new(&channels, params.queue_capacity);
    let warmup_count = (params.warmup_fraction * params.total_arrivals as f64).floor() as u64;

    let mut total = Tally::new();
    let mut per: Vec<Tally> = (0..d_count).map(|_| Tally::new()).collect();
    // channels currently serving each display's traffic
    let mut serving_count: Vec<usize> = vec![0; d_count];

    let mut arrivals_seen: u64 = 0;
    let mut window_start: Option<f64> = None;
    let mut window_end: Option<f64> = None;
    let mut last_time = 0.0_f64;

    while let Some(ev) = heap.pop() {
        // advance time-average integrals inside the measurement window
        if window_start.is_some() && window_end.is_none() {
            let dt = ev.time - last_time;
            let busy: usize = serving_count.iter().sum();
            total.busy_time += dt * busy as f64;
            total.qlen_time += dt * state.total_queue_len() as f64;
            for d in 0..d_count {
                per[d].busy_time += dt * serving_count[d] as f64;
                per[d].qlen_time += dt * state.queue_len(d) as f64;
            }
        }
        last_time = ev.time;

        match ev.kind {
            EventKind::Arrival { display } => {
                if arrivals_seen >= params.total_arrivals {
                    continue;
                }
                let idx = arrivals_seen;
                arrivals_seen += 1;
                if arrivals_seen < params.total_arrivals {
                    let gap =
                        exp_variate(&mut arrival_rngs[display], displays[display].arrival_rate);
                    push(
                        &mut heap,
                        &mut seq,
                        ev.time + gap,
                        EventKind::Arrival { display },
                    );
                }
                let counted = idx >= warmup_count;
                if counted && window_start.is_none() {
                    window_start = Some(ev.time);
                }
                if counted {
                    total.arrivals += 1;
                    per[display].arrivals += 1;
                }
                let req = Request {
                    display,
                    arrival_time: ev.time,
                    counted,
                };
                match state.try_allocate(req, policy) {
                    AllocationOutcome::OwnChannel(ch)
                    | AllocationOutcome::BorrowedChannel { channel: ch, .. } => {
                        serving_count[display] += 1;
                        if counted {
                            total.served += 1;
                            per[display].served += 1;
                        }
                        let s = exp_variate(
                            &mut service_rngs[display],
                            displays[display].service_rate,
                        );
                        push(
                            &mut heap,
                            &mut seq,
                            ev.time + s,
                            EventKind::Departure { channel: ch },
                        );
                    }
                    AllocationOutcome::Enqueued => {
                        if counted {
                            total.waited += 1;
                            per[display].waited += 1;
                        }
                    }
                    AllocationOutcome::Dropped => {
                        if counted {
                            total.waited += 1;
                            total.dropped += 1;
                            per[display].waited += 1;
                            per[display].dropped += 1;
                        }
                    }
                }
                if arrivals_seen == params.total_arrivals {
                    window_end = Some(ev.time);
                }
            }
            EventKind::Departure { channel } => {
                let done = state.serving[channel].expect("departure on idle channel");
                serving_count[done.display] -= 1;
                if let ReleaseOutcome::Serve { request, channel } =
                    state.on_release(channel, policy)
                {
                    serving_count[request.display] += 1;
                    let wait = ev.time - request.arrival_time;
                    if request.counted {
                        total.served += 1;
                        total.wait_sum += wait;
                        per[request.display].served += 1;
                        per[request.display].wait_sum += wait;
                    }
                    let s = exp_variate(
                        &mut service_rngs[request.display],
                        displays[request.display].service_rate,
                    );
                    push(
                        &mut heap,
                        &mut seq,
                        ev.time + s,
                        EventKind::Departure { channel },
                    );
                }
            }
        }
    }

    let measured = match (window_start, window_end) {
        (Some(a), Some(b)) if b > a => b - a,
        _ => 0.0,
    };
    let finish = |t: &Tally, channels: f64| -> (f64, f64, f64, f64, f64) {
        let n = t.arrivals as f64;
        let wait_p = if t.arrivals > 0 { t.waited as f64 / n } else { 0.0 };
        let drop_p = if t.arrivals > 0 { t.dropped as f64 / n } else { 0.0 };
        let mean_wait = if t.served > 0 {
            t.wait_sum / t.served as f64
        } else {
            0.0
        };
        let (qlen, busy) = if measured > 0.0 {
            (t.qlen_time / measured, t.busy_time / (measured * channels))
        } else {
            (0.0, 0.0)
        };
        (wait_p, drop_p, mean_wait, qlen, busy)
    };

    let (wait_probability, drop_probability, mean_wait_s, mean_queue_len, busy_fraction) =
        finish(&total, total_channels as f64);
    let per_display = per
        .iter()
        .enumerate()
        .map(|(d, t)| {
            let (wait_p, drop_p, mean_wait, qlen, busy) = finish(t, channels[d] as f64);
            DisplayMetrics {
                arrivals: t.arrivals,
                served: t.served,
                dropped: t.dropped,
                wait_probability: wait_p,
                drop_probability: drop_p,
                mean_wait_s: mean_wait,
                mean_queue_len: qlen,
                busy_fraction: busy,
            }
        })
        .collect();

    Ok(QueueMetrics {
        arrivals: total.arrivals,
        served: total.served,
        dropped: total.dropped,
        wait_probability,
        drop_probability,
        mean_wait_s,
        mean_queue_len,
        busy_fraction,
        per_display,
    })
}

/// Mean, sample standard deviation, and 95% normal-approximation confidence
/// half-width of one metric over independent replications.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricSummary {
    pub mean: f64,
    pub std_dev: f64,
    pub ci_halfwidth: f64,
}

impl MetricSummary {
    fn from_samples(samples: &[f64]) -> Self {
        let n = samples.len() as f64;
        let mean = samples.iter().sum::<f64>() / n;
        let var = if samples.len() >= 2 {
            samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        let std_dev = var.sqrt();
        MetricSummary {
            mean,
            std_dev,
            ci_halfwidth: 1.96 * std_dev / n.sqrt(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplicationReport {
    pub n: usize,
    pub wait_probability: MetricSummary,
    pub drop_probability: MetricSummary,
    pub mean_wait_s: MetricSummary,
    pub mean_queue_len: MetricSummary,
    pub busy_fraction: MetricSummary,
}

impl ReplicationReport {
    pub fn from_runs(runs: &[QueueMetrics]) -> Result<Self, DesError> {
        if runs.len() < 2 {
            return Err(DesError::InvalidParams(
                "at least 2 replications required for a confidence interval".into(),
            ));
        }
        let pick = |f: fn(&QueueMetrics) -> f64| {
            MetricSummary::from_samples(&runs.iter().map(f).collect::<Vec<_>>())
        };
        Ok(ReplicationReport {
            n: runs.len(),
            wait_probability: pick(|m| m.wait_probability),
            drop_probability: pick(|m| m.drop_probability),
            mean_wait_s: pick(|m| m.mean_wait_s),
            mean_queue_len: pick(|m| m.mean_queue_len),
            busy_fraction: pick(|m| m.busy_fraction),
        })
    }
}

/// Seed for replication `index` of a run with master seed `seed`.
pub fn replication_seed(seed: u64, index: u64) -> u64 {
    splitmix64(seed.wrapping_add(splitmix64(index.wrapping_add(1))))
}

/// Run `n_seeds` independent replications (in parallel) and aggregate.
pub fn replicate(
    sys: &CloudSystemConfig,
    policy: Policy,
    params: &SimParams,
    n_seeds: u64,
) -> Result<ReplicationReport, DesError> {
    if n_seeds < 2 {
        return Err(DesError::InvalidParams("n_seeds must be >= 2".into()));
    }
    params.validate()?;
    let runs: Result<Vec<QueueMetrics>, DesError> = (0..n_seeds)
        .into_par_iter()
        .map(|i| {
            let p = SimParams {
                seed: replication_seed(params.seed, i),
                ..params.clone()
            };
            simulate(sys, policy, &p)
        })
        .collect();
    ReplicationReport::from_runs(&runs?)
}
