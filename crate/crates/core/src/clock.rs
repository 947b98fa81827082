//! Linear state-space model of a stationary receiver clock.
//!
//! The state is the two-vector of distance-equivalent clock bias and drift
//! `x = [c*b_u, c*b_u_dot]` (meters, meters/second). With epoch interval
//! `dt` the dynamics and observation model are
//!
//! ```text
//! x[k+1] = A x[k] + d[k],        A = [1 dt; 0 1]
//! y[k]   = C x[k] + c_l[k] + eps[k]
//! ```
//!
//! where `C` stacks N rows of `[1 0]` (pseudoranges) over N rows of `[0 1]`
//! (pseudorange rates), `c_l` is the known satellite-dependent offset and
//! `d` lumps spoofing attacks and process noise. Position states are fixed
//! constants for a stationary receiver, so only the clock pair is modeled.

use nalgebra::{DMatrix, DVector, Matrix2, Vector2};

use crate::error::{Error, Result};
use crate::scenario::MeasurementEpoch;

/// Speed of light in vacuum (m/s); converts clock seconds to meters.
pub const SPEED_OF_LIGHT_MPS: f64 = 299_792_458.0;

/// Distance-equivalent clock state: bias in meters, drift in meters/second.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClockState {
    pub bias_m: f64,
    pub drift_mps: f64,
}

impl ClockState {
    pub fn new(bias_m: f64, drift_mps: f64) -> Result<Self> {
        if !bias_m.is_finite() || !drift_mps.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "non-finite clock state ({bias_m}, {drift_mps})"
            )));
        }
        Ok(Self { bias_m, drift_mps })
    }

    pub fn zero() -> Self {
        Self { bias_m: 0.0, drift_mps: 0.0 }
    }

    /// Clock bias in seconds (derived view of the distance-equivalent state).
    pub fn bias_s(&self) -> f64 {
        self.bias_m / SPEED_OF_LIGHT_MPS
    }

    pub fn as_vector(&self) -> Vector2<f64> {
        Vector2::new(self.bias_m, self.drift_mps)
    }

    pub fn from_vector(v: Vector2<f64>) -> Result<Self> {
        Self::new(v.x, v.y)
    }
}

/// State-transition matrix `A = [1 dt; 0 1]` for one epoch interval.
#[derive(Debug, Clone, PartialEq)]
pub struct StateTransition {
    pub dt_s: f64,
    pub a: Matrix2<f64>,
}

/// Stacked observation matrix `C` (2N x 2): N rows `[1 0]`, then N rows `[0 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationMatrix {
    pub n_sats: usize,
    pub c: DMatrix<f64>,
}

impl ObservationMatrix {
    /// Row-averaging left inverse `W = (1/N) C^T`, so `W C = I`.
    pub fn averaging(&self) -> DMatrix<f64> {
        self.c.transpose() / self.n_sats as f64
    }
}

/// Known offset vector `c_l[k]` (2N): geometric range minus satellite clock
/// bias term, then line-of-sight velocity minus satellite clock drift term.
#[derive(Debug, Clone, PartialEq)]
pub struct KnownOffsetVector {
    pub k: usize,
    pub values: DVector<f64>,
}

/// Process and measurement noise drawn for one epoch of simulation.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSample {
    pub w: Vector2<f64>,
    pub eps: DVector<f64>,
}

impl NoiseSample {
    pub fn zero(n_sats: usize) -> Self {
        Self { w: Vector2::zeros(), eps: DVector::zeros(2 * n_sats) }
    }
}

/// Build `A = [1 dt; 0 1]`.
pub fn build_state_transition(dt_s: f64) -> Result<StateTransition> {
    if !dt_s.is_finite() || dt_s <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "epoch interval must be positive and finite, got {dt_s}"
        )));
    }
    Ok(StateTransition { dt_s, a: Matrix2::new(1.0, dt_s, 0.0, 1.0) })
}

/// Build the 2N x 2 stacked observation matrix. `C^T C = N I`.
pub fn build_observation_matrix(n_sats: usize) -> Result<ObservationMatrix> {
    if n_sats == 0 {
        return Err(Error::InvalidArgument("n_sats must be at least 1".into()));
    }
    let mut c = DMatrix::zeros(2 * n_sats, 2);
    for i in 0..n_sats {
        c[(i, 0)] = 1.0;
        c[(n_sats + i, 1)] = 1.0;
    }
    Ok(ObservationMatrix { n_sats, c })
}

/// Propagate one epoch: `A x + d`. The disturbance `d` lumps attack and
/// process noise at the plant level.
pub fn propagate(x: &ClockState, a: &StateTransition, d: &Vector2<f64>) -> Result<ClockState> {
    if !d.iter().all(|v| v.is_finite()) {
        return Err(Error::InvalidArgument("non-finite disturbance".into()));
    }
    let next = a.a * x.as_vector() + d;
    ClockState::from_vector(next)
}

/// Form a measurement epoch: `y = C x + c_l + eps`.
pub fn observe(
    x: &ClockState,
    c: &ObservationMatrix,
    cl: &KnownOffsetVector,
    eps: &DVector<f64>,
) -> Result<MeasurementEpoch> {
    let m = 2 * c.n_sats;
    if cl.values.len() != m || eps.len() != m {
        return Err(Error::InvalidArgument(format!(
            "dimension mismatch: expected 2N={m}, got c_l={} eps={}",
            cl.values.len(),
            eps.len()
        )));
    }
    let y = &c.c * x.as_vector() + &cl.values + eps;
    Ok(MeasurementEpoch::from_stacked(cl.k, &y))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn state_transition_matches_definition() {
        let a = build_state_transition(1.0).unwrap();
        assert_eq!(a.a, Matrix2::new(1.0, 1.0, 0.0, 1.0));
        let a = build_state_transition(0.5).unwrap();
        assert_eq!(a.a, Matrix2::new(1.0, 0.5, 0.0, 1.0));
    }

    #[test]
    fn state_transition_rejects_bad_dt() {
        assert!(build_state_transition(0.0).is_err());
        assert!(build_state_transition(-1.0).is_err());
        assert!(build_state_transition(f64::NAN).is_err());
    }

    #[test]
    fn observation_matrix_n1_is_identity() {
        let c = build_observation_matrix(1).unwrap();
        assert_eq!(c.c, DMatrix::identity(2, 2));
    }

    #[test]
    fn observation_matrix_gram_is_n_times_identity() {
        for n in [1usize, 4, 8] {
            let c = build_observation_matrix(n).unwrap();
            let gram = c.c.transpose() * &c.c;
            assert_relative_eq!(gram[(0, 0)], n as f64);
            assert_relative_eq!(gram[(1, 1)], n as f64);
            assert_relative_eq!(gram[(0, 1)], 0.0);
            assert_eq!(c.c.rank(1e-12), 2);
        }
    }

    #[test]
    fn observation_matrix_rejects_zero_sats() {
        assert!(build_observation_matrix(0).is_err());
    }

    #[test]
    fn propagate_zero_fixed_point() {
        let a = build_state_transition(1.0).unwrap();
        let x = propagate(&ClockState::zero(), &a, &Vector2::zeros()).unwrap();
        assert_eq!(x, ClockState::zero());
    }

    #[test]
    fn propagate_hand_arithmetic() {
        let a = build_state_transition(1.0).unwrap();
        let x0 = ClockState::new(10.0, 2.0).unwrap();
        let x1 = propagate(&x0, &a, &Vector2::zeros()).unwrap();
        assert_eq!(x1.bias_m, 12.0);
        assert_eq!(x1.drift_mps, 2.0);
    }

    #[test]
    fn drift_integrates_into_bias_closed_form() {
        // With d = 0 and dt = 1, bias after k steps is b0 + k*drift0.
        let a = build_state_transition(1.0).unwrap();
        let mut x = ClockState::new(3.0, -0.5).unwrap();
        for _ in 0..17 {
            x = propagate(&x, &a, &Vector2::zeros()).unwrap();
        }
        assert_relative_eq!(x.bias_m, 3.0 - 0.5 * 17.0, epsilon = 1e-12);
        assert_relative_eq!(x.drift_mps, -0.5);
    }

    #[test]
    fn observe_zero_state() {
        let c = build_observation_matrix(2).unwrap();
        let cl = KnownOffsetVector { k: 0, values: DVector::zeros(4) };
        let y = observe(&ClockState::zero(), &c, &cl, &DVector::zeros(4)).unwrap();
        assert!(y.stacked().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn observe_stacked_structure() {
        let c = build_observation_matrix(2).unwrap();
        let cl = KnownOffsetVector { k: 3, values: DVector::zeros(4) };
        let x = ClockState::new(5.0, 1.0).unwrap();
        let y = observe(&x, &c, &cl, &DVector::zeros(4)).unwrap();
        assert_eq!(y.stacked().as_slice(), &[5.0, 5.0, 1.0, 1.0]);
        assert_eq!(y.k, 3);
    }

    #[test]
    fn observe_rejects_dimension_mismatch() {
        let c = build_observation_matrix(2).unwrap();
        let cl = KnownOffsetVector { k: 0, values: DVector::zeros(6) };
        assert!(observe(&ClockState::zero(), &c, &cl, &DVector::zeros(4)).is_err());
    }

    #[test]
    fn detectability_for_small_n() {
        // Observability matrix [C; CA] has rank 2 for every N >= 1.
        for n in 1..=8 {
            let a = build_state_transition(1.0).unwrap();
            let c = build_observation_matrix(n).unwrap();
            let ca = &c.c * a.a;
            let mut obs = DMatrix::zeros(4 * n, 2);
            obs.rows_mut(0, 2 * n).copy_from(&c.c);
            obs.rows_mut(2 * n, 2 * n).copy_from(&ca);
            assert_eq!(obs.rank(1e-12), 2, "rank defect at N={n}");
        }
    }

    proptest! {
        // propagate is linear in (x, d).
        #[test]
        fn propagate_linearity(
            x1 in -1e6f64..1e6, v1 in -1e3f64..1e3,
            x2 in -1e6f64..1e6, v2 in -1e3f64..1e3,
            d1 in -1e4f64..1e4, d2 in -1e4f64..1e4,
            alpha in -10.0f64..10.0, beta in -10.0f64..10.0,
        ) {
            let a = build_state_transition(1.0).unwrap();
            let s1 = ClockState::new(x1, v1).unwrap();
            let s2 = ClockState::new(x2, v2).unwrap();
            let da = Vector2::new(d1, d2);
            let db = Vector2::new(d2, d1);
            let combined = ClockState::from_vector(alpha * s1.as_vector() + beta * s2.as_vector()).unwrap();
            let lhs = propagate(&combined, &a, &(alpha * da + beta * db)).unwrap();
            let rhs = alpha * propagate(&s1, &a, &da).unwrap().as_vector()
                + beta * propagate(&s2, &a, &db).unwrap().as_vector();
            prop_assert!((lhs.as_vector() - rhs).norm() <= 1e-6 * (1.0 + rhs.norm()));
        }

        // observe agrees with a dense matrix-vector oracle.
        #[test]
        fn observe_matches_dense_oracle(
            bias in -1e5f64..1e5, drift in -1e2f64..1e2,
            seed in 0u64..1000,
        ) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let n = 1 + (seed as usize % 6);
            let c = build_observation_matrix(n).unwrap();
            let cl = KnownOffsetVector {
                k: 0,
                values: DVector::from_fn(2 * n, |_, _| rng.random_range(-1e7..1e7)),
            };
            let eps = DVector::from_fn(2 * n, |_, _| rng.random_range(-10.0..10.0));
            let x = ClockState::new(bias, drift).unwrap();
            let y = observe(&x, &c, &cl, &eps).unwrap();
            let oracle = &c.c * x.as_vector() + &cl.values + &eps;
            prop_assert!((y.stacked() - oracle).norm() == 0.0);
        }
    }
}
