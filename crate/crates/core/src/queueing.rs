//! Closed-form M/M/c link-channel analysis for the signage cloud.
//!
//! Every display `d` owns `U_d` reserved link channels; user requests arrive
//! at rate `λ_d` and occupy a channel for an exponential holding time with
//! rate `μ_d`. The state probabilities, waiting (rejection) probability, and
//! the system-level rejection and utilization quantities are evaluated here.
//!
//! The system-level formulas exist in two flavours selected by
//! [`EvaluationMode`]: `Verbatim` reproduces the published formulas exactly
//! as printed (which yield 1.0 at zero load), while `Corrected` uses the
//! standards-consistent traffic-weighted waiting probability and carried-load
//! utilization.

use statrs::function::gamma::ln_gamma;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QueueError {
    #[error("UnstableQueue: display {display_id}: arrival rate {arrival_rate} >= capacity {capacity} (channels x service rate)")]
    UnstableQueue {
        display_id: u32,
        arrival_rate: f64,
        capacity: f64,
    },
    #[error("InvalidConfig: {0}")]
    InvalidConfig(String),
    #[error("DimensionMismatch: expected length {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
}

/// One display's share of the cloud link pool.
#[derive(Debug, Clone, PartialEq)]
pub struct DisplayQueueConfig {
    pub display_id: u32,
    pub reserved_channels: u32,
    pub arrival_rate: f64,
    pub service_rate: f64,
}

impl DisplayQueueConfig {
    pub fn new(
        display_id: u32,
        reserved_channels: u32,
        arrival_rate: f64,
        service_rate: f64,
    ) -> Result<Self, QueueError> {
        if reserved_channels < 1 {
            return Err(QueueError::InvalidConfig(format!(
                "display {display_id}: reserved_channels must be >= 1"
            )));
        }
        if service_rate.is_nan() || service_rate <= 0.0 {
            return Err(QueueError::InvalidConfig(format!(
                "display {display_id}: service_rate must be > 0, got {service_rate}"
            )));
        }
        if arrival_rate.is_nan() || arrival_rate < 0.0 {
            return Err(QueueError::InvalidConfig(format!(
                "display {display_id}: arrival_rate must be >= 0, got {arrival_rate}"
            )));
        }
        Ok(Self {
            display_id,
            reserved_channels,
            arrival_rate,
            service_rate,
        })
    }

    /// Offered load a = λ/μ in erlangs.
    pub fn offered_load(&self) -> f64 {
        self.arrival_rate / self.service_rate
    }

    /// Total service capacity U·μ.
    pub fn capacity(&self) -> f64 {
        self.reserved_channels as f64 * self.service_rate
    }

    pub fn is_stable(&self) -> bool {
        self.arrival_rate < self.capacity()
    }

    pub fn check_stable(&self) -> Result<(), QueueError> {
        if self.is_stable() {
            Ok(())
        } else {
            Err(QueueError::UnstableQueue {
                display_id: self.display_id,
                arrival_rate: self.arrival_rate,
                capacity: self.capacity(),
            })
        }
    }
}

/// The whole cloud: D displays sharing one server pool.
#[derive(Debug, Clone, PartialEq)]
pub struct CloudSystemConfig {
    displays: Vec<DisplayQueueConfig>,
}

impl CloudSystemConfig {
    /// Display ids must be unique and contiguous from 1.
    pub fn new(displays: Vec<DisplayQueueConfig>) -> Result<Self, QueueError> {
        if displays.is_empty() {
            return Err(QueueError::InvalidConfig(
                "at least one display required".into(),
            ));
        }
        for (i, d) in displays.iter().enumerate() {
            if d.display_id != (i + 1) as u32 {
                return Err(QueueError::InvalidConfig(format!(
                    "display ids must be contiguous from 1; position {i} has id {}",
                    d.display_id
                )));
            }
        }
        Ok(Self { displays })
    }

    pub fn displays(&self) -> &[DisplayQueueConfig] {
        &self.displays
    }

    pub fn total_arrival_rate(&self) -> f64 {
        self.displays.iter().map(|d| d.arrival_rate).sum()
    }

    pub fn total_channels(&self) -> u32 {
        self.displays.iter().map(|d| d.reserved_channels).sum()
    }

    pub fn total_capacity(&self) -> f64 {
        self.displays.iter().map(|d| d.capacity()).sum()
    }

    pub fn check_stable(&self) -> Result<(), QueueError> {
        for d in &self.displays {
            d.check_stable()?;
        }
        Ok(())
    }
}

/// Which reading of the system-level formulas to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvaluationMode {
    /// The published formulas exactly as printed.
    Verbatim,
    /// Traffic-weighted waiting probability and carried-load utilization.
    Corrected,
}

impl std::fmt::Display for EvaluationMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            EvaluationMode::Verbatim => write!(f, "verbatim"),
            EvaluationMode::Corrected => write!(f, "corrected"),
        }
    }
}

/// ln of the idle probability R(0).
///
/// All factorial/power terms are kept in log space so channel counts past
/// 170 do not overflow.
fn ln_idle_probability(cfg: &DisplayQueueConfig) -> Result<f64, QueueError> {
    cfg.check_stable()?;
    let a = cfg.offered_load();
    if a == 0.0 {
        return Ok(0.0);
    }
    let u = cfg.reserved_channels as f64;
    let rho = a / u;
    let ln_a = a.ln();
    // log-sum-exp over the U erlang-B style terms plus the queueing tail term
    let mut ln_terms: Vec<f64> = (0..cfg.reserved_channels)
        .map(|m| m as f64 * ln_a - ln_gamma(m as f64 + 1.0))
        .collect();
    ln_terms.push(u * ln_a - ln_gamma(u + 1.0) - (1.0 - rho).ln());
    let max = ln_terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = ln_terms.iter().map(|t| (t - max).exp()).sum();
    Ok(-(max + sum.ln()))
}

/// Stationary probability of m requests in display d's queue system.
pub fn state_probability(cfg: &DisplayQueueConfig, m: u32) -> Result<f64, QueueError> {
    let ln_r0 = ln_idle_probability(cfg)?;
    let a = cfg.offered_load();
    if a == 0.0 {
        return Ok(if m == 0 { 1.0 } else { 0.0 });
    }
    let u = cfg.reserved_channels;
    let ln_p = if m <= u {
        m as f64 * a.ln() - ln_gamma(m as f64 + 1.0) + ln_r0
    } else {
        m as f64 * a.ln()
            - ln_gamma(u as f64 + 1.0)
            - (m - u) as f64 * (u as f64).ln()
            + ln_r0
    };
    Ok(ln_p.exp())
}

/// Probability the system is empty, R(0).
pub fn idle_probability(cfg: &DisplayQueueConfig) -> Result<f64, QueueError> {
    Ok(ln_idle_probability(cfg)?.exp())
}

/// Erlang-C waiting probability: the summed tail Σ_{m>=U} R(m).
///
/// An arriving request that finds all U channels busy must wait; with the
/// infinite waiting room of the model this is the "rejection" probability
/// of a single display.
pub fn waiting_probability(cfg: &DisplayQueueConfig) -> Result<f64, QueueError> {
    let ln_r0 = ln_idle_probability(cfg)?;
    let a = cfg.offered_load();
    if a == 0.0 {
        return Ok(0.0);
    }
    let u = cfg.reserved_channels as f64;
    let rho = a / u;
    let ln_tail = u * a.ln() - ln_gamma(u + 1.0) - (1.0 - rho).ln() + ln_r0;
    Ok(ln_tail.exp())
}

/// System-wide rejection probability.
///
/// Verbatim: `1 - Σ λ_d [1 - R_c(d)] / Σ U_d` exactly as printed; the result
/// may leave [0, 1] (it is 1.0 at zero load). Corrected: the traffic-weighted
/// waiting probability `Σ λ_d R_c(d) / Σ λ_d`, defined as 0 when Σλ = 0.
pub fn system_rejection_probability(
    sys: &CloudSystemConfig,
    mode: EvaluationMode,
) -> Result<f64, QueueError> {
    let total_lambda = sys.total_arrival_rate();
    match mode {
        EvaluationMode::Verbatim => {
            let mut carried = 0.0;
            for d in sys.displays() {
                carried += d.arrival_rate * (1.0 - waiting_probability(d)?);
            }
            Ok(1.0 - carried / sys.total_channels() as f64)
        }
        EvaluationMode::Corrected => {
            if total_lambda == 0.0 {
                // 0/0 case: no request can be rejected
                for d in sys.displays() {
                    d.check_stable()?;
                }
                return Ok(0.0);
            }
            let mut weighted = 0.0;
            for d in sys.displays() {
                weighted += d.arrival_rate * waiting_probability(d)?;
            }
            Ok(weighted / total_lambda)
        }
    }
}

/// Link utilization factor.
///
/// Verbatim: `1 - [1 - R_C] Σλ_d / Σ U_d μ_d` with R_C taken verbatim.
/// Corrected: the carried-load fraction `(1 - R_C) Σλ_d / Σ U_d μ_d` with the
/// corrected R_C, clamped to [0, 1].
pub fn link_utilization(sys: &CloudSystemConfig, mode: EvaluationMode) -> Result<f64, QueueError> {
    let total_lambda = sys.total_arrival_rate();
    let total_capacity = sys.total_capacity();
    let rc = system_rejection_probability(sys, mode)?;
    match mode {
        EvaluationMode::Verbatim => Ok(1.0 - (1.0 - rc) * total_lambda / total_capacity),
        EvaluationMode::Corrected => {
            Ok(((1.0 - rc) * total_lambda / total_capacity).clamp(0.0, 1.0))
        }
    }
}

/// One analytic sweep point. `rejection`/`utilization` are `None` when any
/// display is unstable at this total rate.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub total_arrival_rate: f64,
    pub per_display_rates: Vec<f64>,
    pub rejection: Option<f64>,
    pub utilization: Option<f64>,
    pub mode: EvaluationMode,
}

impl SweepRow {
    pub fn is_unstable(&self) -> bool {
        self.rejection.is_none()
    }
}

/// Split each total arrival rate across displays by `ratio` and evaluate the
/// system rejection and utilization in the requested mode. Unstable totals
/// are emitted as marked rows, not errors.
pub fn sweep_rates(
    sys_template: &CloudSystemConfig,
    total_rates: &[f64],
    ratio: &[f64],
    mode: EvaluationMode,
) -> Result<Vec<SweepRow>, QueueError> {
    let d = sys_template.displays().len();
    if ratio.len() != d {
        return Err(QueueError::DimensionMismatch {
            expected: d,
            got: ratio.len(),
        });
    }
    if ratio.iter().any(|&r| r.is_nan() || r <= 0.0) {
        return Err(QueueError::InvalidConfig(
            "ratio entries must be positive".into(),
        ));
    }
    let ratio_sum: f64 = ratio.iter().sum();
    let mut rows = Vec::with_capacity(total_rates.len());
    for &total in total_rates {
        let rates: Vec<f64> = ratio.iter().map(|r| total * r / ratio_sum).collect();
        let displays: Result<Vec<_>, _> = sys_template
            .displays()
            .iter()
            .zip(&rates)
            .map(|(tpl, &lambda)| {
                DisplayQueueConfig::new(
                    tpl.display_id,
                    tpl.reserved_channels,
                    lambda,
                    tpl.service_rate,
                )
            })
            .collect();
        let sys = CloudSystemConfig::new(displays?)?;
        let (rejection, utilization) = if sys.check_stable().is_ok() {
            (
                Some(system_rejection_probability(&sys, mode)?),
                Some(link_utilization(&sys, mode)?),
            )
        } else {
            (None, None)
        };
        rows.push(SweepRow {
            total_arrival_rate: total,
            per_display_rates: rates,
            rejection,
            utilization,
            mode,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(u: u32, lambda: f64, mu: f64) -> DisplayQueueConfig {
        DisplayQueueConfig::new(1, u, lambda, mu).unwrap()
    }

    #[test]
    fn empty_system_certain_at_zero_load() {
        assert_eq!(state_probability(&cfg(1, 0.0, 1.0), 0).unwrap(), 1.0);
        assert_eq!(idle_probability(&cfg(1, 0.0, 1.0)).unwrap(), 1.0);
        assert_eq!(waiting_probability(&cfg(5, 0.0, 1.0)).unwrap(), 0.0);
    }

    #[test]
    fn mm1_matches_geometric_distribution() {
        // M/M/1 with rho = 0.5: P(m) = (1 - rho) rho^m
        let c = cfg(1, 0.5, 1.0);
        assert!((state_probability(&c, 2).unwrap() - 0.125).abs() < 1e-12);
        assert!((idle_probability(&c).unwrap() - 0.5).abs() < 1e-12);
        assert!((waiting_probability(&c).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn two_channel_hand_evaluation() {
        // U=2, a=1: R(0) = (1 + 1 + 1)^-1 = 1/3, waiting = 1 * R(0) = 1/3
        let c = cfg(2, 1.0, 1.0);
        assert!((idle_probability(&c).unwrap() - 1.0 / 3.0).abs() < 1e-12);
        assert!((waiting_probability(&c).unwrap() - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn unstable_config_rejected() {
        let c = cfg(1, 2.0, 1.0);
        assert!(matches!(
            waiting_probability(&c),
            Err(QueueError::UnstableQueue { .. })
        ));
        let boundary = cfg(2, 2.0, 1.0);
        assert!(matches!(
            idle_probability(&boundary),
            Err(QueueError::UnstableQueue { .. })
        ));
    }

    #[test]
    fn single_channel_identity() {
        for &(lambda, mu) in &[(0.1, 1.0), (0.5, 1.0), (0.9, 1.0), (0.3, 0.7)] {
            let w = waiting_probability(&cfg(1, lambda, mu)).unwrap();
            assert!((w - lambda / mu).abs() / (lambda / mu) < 1e-12);
        }
    }

    #[test]
    fn waiting_probability_monotone_in_arrival_rate() {
        let mut prev = -1.0;
        for i in 1..100 {
            let lambda = i as f64 * 0.01 * 3.0; // up to just under U*mu = 3
            let w = waiting_probability(&cfg(3, lambda * 0.99, 1.0)).unwrap();
            assert!(w > prev, "not increasing at lambda={lambda}");
            prev = w;
        }
    }

    #[test]
    fn large_channel_count_does_not_overflow() {
        // U = 200 exceeds the f64 factorial range; log-space evaluation holds
        let c = cfg(200, 150.0, 1.0);
        let w = waiting_probability(&c).unwrap();
        assert!(w.is_finite() && (0.0..=1.0).contains(&w));
        let r0 = idle_probability(&c).unwrap();
        assert!(r0.is_finite() && r0 > 0.0);
    }

    #[test]
    fn verbatim_zero_load_returns_one() {
        let sys = CloudSystemConfig::new(vec![
            DisplayQueueConfig::new(1, 10, 0.0, 0.1).unwrap()
        ])
        .unwrap();
        assert_eq!(
            system_rejection_probability(&sys, EvaluationMode::Verbatim).unwrap(),
            1.0
        );
        assert_eq!(link_utilization(&sys, EvaluationMode::Verbatim).unwrap(), 1.0);
        assert_eq!(
            system_rejection_probability(&sys, EvaluationMode::Corrected).unwrap(),
            0.0
        );
        assert_eq!(
            link_utilization(&sys, EvaluationMode::Corrected).unwrap(),
            0.0
        );
    }

    #[test]
    fn corrected_single_display_reduces_to_waiting_probability() {
        let sys = CloudSystemConfig::new(vec![
            DisplayQueueConfig::new(1, 1, 0.5, 1.0).unwrap()
        ])
        .unwrap();
        let rc = system_rejection_probability(&sys, EvaluationMode::Corrected).unwrap();
        assert!((rc - 0.5).abs() < 1e-12);
    }

    #[test]
    fn sweep_marks_unstable_rows() {
        let tpl = CloudSystemConfig::new(
            (1..=3)
                .map(|id| DisplayQueueConfig::new(id, 10, 0.0, 0.1).unwrap())
                .collect(),
        )
        .unwrap();
        let rows = sweep_rates(
            &tpl,
            &[0.0, 1.0, 10.0],
            &[5.0, 3.0, 2.0],
            EvaluationMode::Corrected,
        )
        .unwrap();
        assert_eq!(rows.len(), 3);
        assert_eq!(rows[0].rejection, Some(0.0));
        assert_eq!(rows[0].utilization, Some(0.0));
        assert!((rows[1].per_display_rates[0] - 0.5).abs() < 1e-12);
        assert!((rows[1].per_display_rates[1] - 0.3).abs() < 1e-12);
        assert!((rows[1].per_display_rates[2] - 0.2).abs() < 1e-12);
        // lambda_1 = 5.0 > U*mu = 1.0
        assert!(rows[2].is_unstable());
    }

    #[test]
    fn sweep_ratio_length_mismatch() {
        let tpl = CloudSystemConfig::new(vec![
            DisplayQueueConfig::new(1, 10, 0.0, 0.1).unwrap()
        ])
        .unwrap();
        assert!(matches!(
            sweep_rates(&tpl, &[1.0], &[5.0, 3.0], EvaluationMode::Corrected),
            Err(QueueError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn sweep_row_rates_sum_to_total() {
        let tpl = CloudSystemConfig::new(
            (1..=3)
                .map(|id| DisplayQueueConfig::new(id, 10, 0.0, 0.1).unwrap())
                .collect(),
        )
        .unwrap();
        let rows = sweep_rates(
            &tpl,
            &[0.7, 1.3, 2.9],
            &[5.0, 3.0, 2.0],
            EvaluationMode::Corrected,
        )
        .unwrap();
        for row in rows {
            let sum: f64 = row.per_display_rates.iter().sum();
            assert!((sum - row.total_arrival_rate).abs() < 1e-9);
        }
    }

    #[test]
    fn display_ids_must_be_contiguous() {
        let displays = vec![
            DisplayQueueConfig::new(1, 1, 0.1, 1.0).unwrap(),
            DisplayQueueConfig::new(3, 1, 0.1, 1.0).unwrap(),
        ];
        assert!(CloudSystemConfig::new(displays).is_err());
    }
}
