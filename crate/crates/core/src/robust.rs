//! Online robust estimator: joint state/disturbance recursion, cumulative
//! disturbance correction and state/output correction.
//!
//! Per epoch the recursion reads
//!
//! ```text
//! y_hat[k]   = C x_m[k] + c_l[k] + C d[k-1]
//! e[k]       = y[k] - y_hat[k]
//! x_m[k+1]   = A x_m[k] + A d[k-1] + L1 e[k]
//! d[k]       = d[k-1] + L2 C' e[k]
//! ```
//!
//! (hats dropped; the disturbance update uses the current innovation, the
//! state update the pre-update disturbance). The per-step estimate `d[k]`
//! tracks the one-epoch-lagged disturbance increment, so the displacement
//! accumulated in the state is recovered by the weighted sums
//!
//! ```text
//! d_c[k] = [ sum_{l=1..k} d1[l] + dt * sum_{l=1..k-1} (k-l) d2[l] ,
//!            sum_{l=1..k-1} d2[l] ]
//! ```
//!
//! maintained in O(1) memory by three scalars: `s1`, `s2` and the weighted
//! sum `s2w`, with `s2w[k] - s2w[k-1] = s2[k-1] * dt`. The first update
//! (l = 0) is excluded from the sums. Subtracting `d_c` from the modified
//! state recovers the attack-free state and output.
//!
//! The `dt` factor in the weighted term keeps the correction dimensionally
//! consistent for epoch intervals other than one second.

use nalgebra::{DVector, Vector2};

use crate::clock::{ClockState, KnownOffsetVector, ObservationMatrix, StateTransition};
use crate::error::{Error, Result};
use crate::lmi::GainPair;
use crate::scenario::MeasurementEpoch;

/// Recursion state of the robust estimator.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorState {
    /// Modified-state estimate `x_m[k]`.
    pub x_m_hat: ClockState,
    /// Disturbance estimate `d[k-1]` (lagged one step).
    pub d_hat: Vector2<f64>,
    /// Running sum of d1 updates (meters).
    pub s1: f64,
    /// Running sum of d2 updates through the current epoch (m/s).
    pub s2: f64,
    /// Running weighted sum `dt * sum (k-l) d2[l]` (meters).
    pub s2w: f64,
    /// Number of estimator updates performed.
    pub k: usize,
}

/// Corrected estimate for one epoch.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrectedOutput {
    pub k: usize,
    /// Attack-free state estimate `x_c = x_m - d_c`.
    pub x_c_hat: ClockState,
    /// Cumulative disturbance estimate `d_c`.
    pub d_c_hat: Vector2<f64>,
    /// Corrected output `y_c = y_hat - C d_c`.
    pub y_c_hat: DVector<f64>,
    /// Innovation `e = y - y_hat`.
    pub innovation: DVector<f64>,
}

/// Result of one estimator step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutput {
    /// Innovation `e[k]`.
    pub innovation: DVector<f64>,
    /// Output estimate `y_hat[k]`.
    pub y_hat: DVector<f64>,
    /// Modified-state estimate `x_m[k]` that produced `y_hat[k]` (the state
    /// field already holds `x_m[k+1]` after the step).
    pub x_m: ClockState,
}

/// Initialize the recursion; the sums start empty and initial conditions
/// are arbitrary.
pub fn init_estimator(x0: ClockState, d0: Vector2<f64>) -> Result<EstimatorState> {
    if !d0.iter().all(|v| v.is_finite()) {
        return Err(Error::InvalidArgument("non-finite initial disturbance".into()));
    }
    ClockState::new(x0.bias_m, x0.drift_mps)?;
    Ok(EstimatorState { x_m_hat: x0, d_hat: d0, s1: 0.0, s2: 0.0, s2w: 0.0, k: 0 })
}

impl EstimatorState {
    /// Record one disturbance update in the cumulative sums. The very first
    /// update (index 0) only seeds `d_hat`; the sums run from index 1, as in
    /// the correction formula.
    pub fn push_disturbance(&mut self, d: Vector2<f64>, dt_s: f64) {
        if self.k >= 1 {
            self.s2w += dt_s * self.s2;
            self.s1 += d.x;
            self.s2 += d.y;
        }
        self.d_hat = d;
        self.k += 1;
    }
}

/// One estimator update. Advances the state to epoch `k+1` and returns the
/// innovation alongside the epoch-`k` quantities needed for correction.
pub fn estimator_step(
    st: &mut EstimatorState,
    gains: &GainPair,
    a: &StateTransition,
    c: &ObservationMatrix,
    cl: &KnownOffsetVector,
    y: &MeasurementEpoch,
) -> Result<StepOutput> {
    let n = c.n_sats;
    if y.n_sats() != n || cl.values.len() != 2 * n || gains.l1.ncols() != 2 * n {
        return Err(Error::InvalidArgument(format!(
            "estimator_step dimension mismatch at k={}",
            y.k
        )));
    }

    let x_m = st.x_m_hat;
    let y_hat = &c.c * (x_m.as_vector() + st.d_hat) + &cl.values;
    let innovation = y.stacked() - &y_hat;

    let l1e = &gains.l1 * &innovation;
    let x_next = a.a * (x_m.as_vector() + st.d_hat) + Vector2::new(l1e[0], l1e[1]);

    let cte = c.c.transpose() * &innovation;
    let d_next = st.d_hat + gains.l2 * Vector2::new(cte[0], cte[1]);

    st.x_m_hat = ClockState::from_vector(x_next)?;
    st.push_disturbance(d_next, a.dt_s);

    Ok(StepOutput { innovation, y_hat, x_m })
}

/// Cumulative disturbance estimate realizing the correction sums from the
/// O(1) running state: bias term `s1 + s2w`, drift term `s2` lagged by one
/// update (the current epoch's d2 is excluded).
pub fn correct_disturbance(st: &EstimatorState) -> Vector2<f64> {
    let s2_lagged = if st.k >= 2 { st.s2 - st.d_hat.y } else { 0.0 };
    Vector2::new(st.s1 + st.s2w, s2_lagged)
}

/// State and output correction: `x_c = x_m - d_c`, `y_c = y_hat - C d_c`.
pub fn correct_state_output(
    x_m: &ClockState,
    d_c_hat: Vector2<f64>,
    c: &ObservationMatrix,
    y_hat: &DVector<f64>,
    innovation: &DVector<f64>,
    k: usize,
) -> Result<CorrectedOutput> {
    if y_hat.len() != 2 * c.n_sats {
        return Err(Error::InvalidArgument("correct_state_output dimension mismatch".into()));
    }
    let x_c = ClockState::from_vector(x_m.as_vector() - d_c_hat)?;
    let y_c = y_hat - &c.c * d_c_hat;
    Ok(CorrectedOutput {
        k,
        x_c_hat: x_c,
        d_c_hat,
        y_c_hat: y_c,
        innovation: innovation.clone(),
    })
}

/// Run the full online stage over a measurement stream: estimator step,
/// disturbance correction and state/output correction per epoch, in that
/// order, to the end of the stream (there is no stopping criterion).
pub fn run_algorithm1(
    measurements: &[MeasurementEpoch],
    known_offsets: &[KnownOffsetVector],
    gains: &GainPair,
    a: &StateTransition,
    c: &ObservationMatrix,
    init: (ClockState, Vector2<f64>),
) -> Result<Vec<CorrectedOutput>> {
    if measurements.len() != known_offsets.len() {
        return Err(Error::InvalidArgument(
            "measurement and known-offset streams differ in length".into(),
        ));
    }
    let mut st = init_estimator(init.0, init.1)?;
    let mut trace = Vec::with_capacity(measurements.len());
    for (meas, cl) in measurements.iter().zip(known_offsets) {
        if meas.n_sats() != c.n_sats {
            return Err(Error::IncompleteEpoch {
                k: meas.k,
                msg: format!("expected {} satellites, got {}", c.n_sats, meas.n_sats()),
            });
        }
        let step = estimator_step(&mut st, gains, a, c, cl, meas)?;
        let d_c = correct_disturbance(&st);
        trace.push(correct_state_output(&step.x_m, d_c, c, &step.y_hat, &step.innovation, meas.k)?);
    }
    Ok(trace)
}
