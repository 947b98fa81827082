//! Time-synchronization attack signals and injection.
//!
//! Two attack shapes are modeled. Type I adds an abrupt common-mode step to
//! every pseudorange; Type II ramps the bias gradually through
//! `s_pr[k] = s_pr[k-1] + s_prr[k] * dt`. Both act on epochs `alpha < k <= end`
//! (`alpha` is the last clean epoch); after `end` a Type II ramp holds its
//! final value and the rate returns to zero. Injection is common-mode across
//! satellites: only common-mode components alias into the clock states, since
//! the receiver position is a known constant.

use nalgebra::Vector2;

use crate::error::{Error, Result};
use crate::scenario::MeasurementEpoch;

/// Distance-equivalent bias displacement deemed an infringing attack by the
/// IEEE C37.118 total-variation-error limit (26.65 us of clock bias).
pub const COMPLIANCE_THRESHOLD_M: f64 = 7989.0;

/// Attack shape.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AttackKind {
    None,
    TypeI,
    TypeII,
}

/// Description of one attack run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AttackSpec {
    pub kind: AttackKind,
    /// Last clean epoch; the attack signal is nonzero for `alpha < k <= end`.
    pub alpha: usize,
    /// Last attacked epoch (inclusive).
    pub end: usize,
    /// Step size for Type I (meters).
    pub magnitude_m: f64,
    /// Per-epoch drift injection for Type II (m/s).
    pub ramp_rate_mps: f64,
}

impl AttackSpec {
    pub fn none() -> Self {
        Self { kind: AttackKind::None, alpha: 0, end: 0, magnitude_m: 0.0, ramp_rate_mps: 0.0 }
    }

    pub fn type1(alpha: usize, end: usize, magnitude_m: f64) -> Result<Self> {
        let spec = Self { kind: AttackKind::TypeI, alpha, end, magnitude_m, ramp_rate_mps: 0.0 };
        spec.validate()?;
        Ok(spec)
    }

    pub fn type2(alpha: usize, end: usize, ramp_rate_mps: f64) -> Result<Self> {
        let spec = Self { kind: AttackKind::TypeII, alpha, end, magnitude_m: 0.0, ramp_rate_mps };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.alpha > self.end {
            return Err(Error::InvalidArgument(format!(
                "attack window start {} exceeds end {}",
                self.alpha, self.end
            )));
        }
        if !self.magnitude_m.is_finite() || !self.ramp_rate_mps.is_finite() {
            return Err(Error::InvalidArgument("non-finite attack parameters".into()));
        }
        Ok(())
    }

    /// Closed-form attack signal `(s_pr, s_prr)` at epoch `k`.
    pub fn signal_at(&self, k: usize, dt_s: f64) -> (f64, f64) {
        match self.kind {
            AttackKind::None => (0.0, 0.0),
            AttackKind::TypeI => {
                if k > self.alpha && k <= self.end {
                    (self.magnitude_m, 0.0)
                } else {
                    (0.0, 0.0)
                }
            }
            AttackKind::TypeII => {
                if k <= self.alpha {
                    (0.0, 0.0)
                } else {
                    let steps = k.min(self.end) - self.alpha;
                    let s_pr = self.ramp_rate_mps * dt_s * steps as f64;
                    let s_prr = if k <= self.end { self.ramp_rate_mps } else { 0.0 };
                    (s_pr, s_prr)
                }
            }
        }
    }
}

/// Per-epoch state-space disturbance derived from an attack signal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DisturbanceSample {
    pub k: usize,
    pub d: Vector2<f64>,
}

/// Type I signal value at epoch `k`: the step `magnitude_m` inside the
/// attack window, zero rate everywhere (an instantaneous step has no
/// sustained rate).
pub fn type1_signal(k: usize, spec: &AttackSpec) -> Result<(f64, f64)> {
    if spec.kind != AttackKind::TypeI {
        return Err(Error::InvalidArgument("type1_signal requires a Type I spec".into()));
    }
    Ok(spec.signal_at(k, 1.0))
}

/// One recursion step of the Type II ramp: inside the window the rate is
/// injected and the bias signal grows by `rate * dt`; outside, the bias
/// holds its previous value and the rate is zero.
pub fn type2_signal_step(
    prev_s_pr: f64,
    spec: &AttackSpec,
    k: usize,
    dt_s: f64,
) -> Result<(f64, f64)> {
    if spec.kind != AttackKind::TypeII {
        return Err(Error::InvalidArgument("type2_signal_step requires a Type II spec".into()));
    }
    if k > spec.alpha && k <= spec.end {
        Ok((prev_s_pr + spec.ramp_rate_mps * dt_s, spec.ramp_rate_mps))
    } else {
        Ok((prev_s_pr, 0.0))
    }
}

/// Add a common-mode attack signal to every pseudorange and rate.
pub fn inject(meas: &MeasurementEpoch, s_pr: f64, s_prr: f64) -> MeasurementEpoch {
    MeasurementEpoch {
        k: meas.k,
        pr_m: meas.pr_m.iter().map(|v| v + s_pr).collect(),
        prr_mps: meas.prr_mps.iter().map(|v| v + s_prr).collect(),
    }
}

/// Per-epoch increment of the attack signal, viewed as a state-space
/// disturbance: `d[k] = (s_pr[k] - s_pr[k-1], s_prr[k] - s_prr[k-1])`.
/// Summing the increments over epochs reproduces the signal exactly.
pub fn attack_as_state_disturbance(spec: &AttackSpec, k: usize, dt_s: f64) -> DisturbanceSample {
    let (s_pr, s_prr) = spec.signal_at(k, dt_s);
    let (p_pr, p_prr) = if k == 0 { (0.0, 0.0) } else { spec.signal_at(k - 1, dt_s) };
    DisturbanceSample { k, d: Vector2::new(s_pr - p_pr, s_prr - p_prr) }
}

/// True iff the final bias displacement meets the IEEE C37.118 infringement
/// threshold (inclusive at 7989 m).
pub fn compliance_check(s_pr_final: f64) -> bool {
    s_pr_final.abs() >= COMPLIANCE_THRESHOLD_M
}
