//! Kalman-filter and Luenberger-observer baselines.
//!
//! With the receiver position fixed, the measurement model is linear in the
//! clock states, so the conventional extended Kalman filter reduces to a
//! linear Kalman filter with identical arithmetic; no linearization point is
//! involved. The Kalman filter on the clean stream also supplies the
//! ground-truth clock trace for the evaluation harness.

use nalgebra::{DMatrix, DVector, Matrix2, Vector2};

use crate::clock::{ClockState, KnownOffsetVector, ObservationMatrix, StateTransition};
use crate::error::{Error, Result};
use crate::scenario::{compute_known_offset, MeasurementEpoch, ReceiverTruth, SatelliteEpoch};

/// Kalman filter configuration. The measurement covariance is diagonal,
/// split per measurement class: `r_pr_var` on the N pseudorange rows and
/// `r_prr_var` on the N rate rows.
#[derive(Debug, Clone, PartialEq)]
pub struct KalmanConfig {
    pub q: Matrix2<f64>,
    pub r_pr_var: f64,
    pub r_prr_var: f64,
    pub x0: ClockState,
    pub p0: Matrix2<f64>,
}

impl Default for KalmanConfig {
    fn default() -> Self {
        Self {
            q: Matrix2::new(1.0, 0.0, 0.0, 0.01),
            r_pr_var: 25.0,
            r_prr_var: 0.01,
            x0: ClockState::zero(),
            p0: Matrix2::identity() * 1e6,
        }
    }
}

impl KalmanConfig {
    pub fn validate(&self) -> Result<()> {
        if self.r_pr_var <= 0.0 || self.r_prr_var <= 0.0 {
            return Err(Error::InvalidArgument("measurement variances must be positive".into()));
        }
        for (name, m) in [("q", &self.q), ("p0", &self.p0)] {
            if (m[(0, 1)] - m[(1, 0)]).abs() > 1e-9 {
                return Err(Error::InvalidArgument(format!("{name} must be symmetric")));
            }
            let tr = m[(0, 0)] + m[(1, 1)];
            let det = m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)];
            if tr < -1e-12 || det < -1e-12 {
                return Err(Error::InvalidArgument(format!("{name} must be PSD")));
            }
        }
        Ok(())
    }
}

/// Filter state: estimate and covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct KalmanState {
    pub x: ClockState,
    pub p: Matrix2<f64>,
}

impl KalmanState {
    pub fn from_config(cfg: &KalmanConfig) -> Self {
        Self { x: cfg.x0, p: cfg.p0 }
    }
}

/// One predict-update cycle: `x- = A x`, `P- = A P A' + Q`, then the
/// standard update with innovation `y - C x- - c_l` and gain
/// `K = P- C' (C P- C' + R)^-1`. The posterior covariance is symmetrized.
pub fn kalman_step(
    state: &KalmanState,
    a: &StateTransition,
    c: &ObservationMatrix,
    cl: &KnownOffsetVector,
    y: &MeasurementEpoch,
    cfg: &KalmanConfig,
) -> Result<KalmanState> {
    let n = c.n_sats;
    if y.n_sats() != n || cl.values.len() != 2 * n {
        return Err(Error::InvalidArgument("kalman_step dimension mismatch".into()));
    }

    let x_pred = a.a * state.x.as_vector();
    let p_pred = a.a * state.p * a.a.transpose() + cfg.q;

    let r_diag = DVector::from_fn(2 * n, |i, _| if i < n { cfg.r_pr_var } else { cfg.r_prr_var });
    let mut s = &c.c * p_pred * c.c.transpose();
    for i in 0..2 * n {
        s[(i, i)] += r_diag[i];
    }
    let chol = nalgebra::Cholesky::new(s)
        .ok_or_else(|| Error::Numerical("singular innovation covariance".into()))?;

    let innovation = y.stacked() - &c.c * x_pred - &cl.values;
    // K = P- C' S^-1, applied as solves against the Cholesky factor.
    let pct = p_pred * c.c.transpose(); // 2 x 2N
    let k_t = chol.solve(&pct.transpose()); // 2N x 2
    let gain = k_t.transpose();

    let x_new = x_pred + &gain * innovation;
    let kc = &gain * &c.c; // 2 x 2
    let ikc = Matrix2::identity() - Matrix2::new(kc[(0, 0)], kc[(0, 1)], kc[(1, 0)], kc[(1, 1)]);
    let p_new = ikc * p_pred;
    let p_sym = (p_new + p_new.transpose()) * 0.5;

    Ok(KalmanState { x: ClockState::from_vector(Vector2::new(x_new[0], x_new[1]))?, p: p_sym })
}

/// Luenberger observer gain with its design poles.
#[derive(Debug, Clone, PartialEq)]
pub struct LuenbergerGain {
    pub l1: DMatrix<f64>,
    pub poles: [f64; 2],
}

/// Place the observer poles. The gain factors through the row-averaging
/// matrix `W = (1/N) C'` (so `W C = I`): with `F = [p1 dt; 0 p2]` and
/// `K = A - F`, the gain `L1 = K W` gives `A - L1 C = F`, whose eigenvalues
/// are exactly the requested poles.
pub fn design_luenberger(
    a: &StateTransition,
    c: &ObservationMatrix,
    poles: [f64; 2],
) -> Result<LuenbergerGain> {
    for p in poles {
        if !p.is_finite() || p.abs() >= 1.0 {
            return Err(Error::InvalidArgument(format!(
                "pole {p} outside the open unit disk"
            )));
        }
    }
    let f = Matrix2::new(poles[0], a.dt_s, 0.0, poles[1]);
    let k_tilde = a.a - f;
    let l1 = k_tilde * c.averaging();

    // The construction is exact; verify the closed loop anyway.
    let l1c = &l1 * &c.c;
    let closed = a.a - Matrix2::new(l1c[(0, 0)], l1c[(0, 1)], l1c[(1, 0)], l1c[(1, 1)]);
    let mut eigs: Vec<f64> = closed
        .complex_eigenvalues()
        .iter()
        .map(|z| z.re)
        .collect();
    eigs.sort_by(|x, y| x.partial_cmp(y).unwrap());
    let mut want = poles;
    want.sort_by(|x, y| x.partial_cmp(y).unwrap());
    if (eigs[0] - want[0]).abs() > 1e-9 || (eigs[1] - want[1]).abs() > 1e-9 {
        return Err(Error::Numerical(format!(
            "pole placement drifted: requested {want:?}, achieved {eigs:?}"
        )));
    }
    Ok(LuenbergerGain { l1, poles })
}

/// One observer step: `x' = A x + L1 (y - C x - c_l)`.
pub fn luenberger_step(
    x: &ClockState,
    gain: &LuenbergerGain,
    a: &StateTransition,
    c: &ObservationMatrix,
    cl: &KnownOffsetVector,
    y: &MeasurementEpoch,
) -> Result<ClockState> {
    if y.n_sats() != c.n_sats || cl.values.len() != 2 * c.n_sats {
        return Err(Error::InvalidArgument("luenberger_step dimension mismatch".into()));
    }
    let innovation = y.stacked() - &c.c * x.as_vector() - &cl.values;
    let corr = &gain.l1 * innovation;
    let next = a.a * x.as_vector() + Vector2::new(corr[0], corr[1]);
    ClockState::from_vector(next)
}

/// Kalman ground-truth trace from a clean (unattacked) stream; the returned
/// trace holds the posterior estimate at each epoch.
pub fn ground_truth_from_clean(
    measurements: &[MeasurementEpoch],
    satellites: &[Vec<SatelliteEpoch>],
    receiver: &ReceiverTruth,
    a: &StateTransition,
    c: &ObservationMatrix,
    cfg: &KalmanConfig,
) -> Result<Vec<ClockState>> {
    cfg.validate()?;
    if measurements.len() != satellites.len() {
        return Err(Error::InvalidArgument(
            "measurement and ephemeris streams differ in length".into(),
        ));
    }
    let mut state = KalmanState::from_config(cfg);
    let mut trace = Vec::with_capacity(measurements.len());
    for (meas, sats) in measurements.iter().zip(satellites) {
        if meas.n_sats() != c.n_sats {
            return Err(Error::IncompleteEpoch {
                k: meas.k,
                msg: format!("expected {} satellites, got {}", c.n_sats, meas.n_sats()),
            });
        }
        let cl = compute_known_offset(sats, receiver, meas.k)?;
        state = kalman_step(&state, a, c, &cl, meas, cfg)?;
        trace.push(state.x);
    }
    Ok(trace)
}
