//! Measurement stream production: synthetic constellation simulation,
//! pseudorange/rate synthesis, known-offset computation and CSV ingestion.
//!
//! Synthetic satellites move on circular orbits at GPS-like radius with
//! distinct planes and phases. Geometry realism is secondary here: the
//! known offset `c_l` is subtracted before estimation, so only the clock
//! terms survive. Recorded data enters through three CSV files
//! (measurements, ephemeris, receiver) documented in the README.
//!
//! All randomness comes from a seeded ChaCha8 stream, so identical
//! configurations produce identical byte-level output on every platform.

use std::fmt::Write as _;
use std::fs;
use std::io::{BufRead, BufReader};
use std::path::Path;

use nalgebra::{DVector, Vector2, Vector3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::clock::{
    build_state_transition, propagate, ClockState, KnownOffsetVector, SPEED_OF_LIGHT_MPS,
};
use crate::error::{Error, Result};

/// Gravitational parameter of Earth (m^3/s^2), sets the orbital rate.
const MU_EARTH: f64 = 3.986_004_418e14;
/// Orbit radius for synthetic satellites (m); GPS semi-major axis scale.
const ORBIT_RADIUS_M: f64 = 2.66e7;
/// Inclination shared by the synthetic planes (55 degrees, GPS-like).
const INCLINATION_RAD: f64 = 0.959_931_088_596_881_5;

/// One satellite's position, velocity and clock state at one epoch.
#[derive(Debug, Clone, PartialEq)]
pub struct SatelliteEpoch {
    pub sat_id: u32,
    pub k: usize,
    pub position_m: Vector3<f64>,
    pub velocity_mps: Vector3<f64>,
    pub clock_bias_s: f64,
    pub clock_drift_ss: f64,
}

/// Ground-truth receiver description: fixed position, zero velocity and the
/// simulated clock trace.
#[derive(Debug, Clone, PartialEq)]
pub struct ReceiverTruth {
    pub position_m: Vector3<f64>,
    pub velocity_mps: Vector3<f64>,
    pub clock: Vec<ClockState>,
}

/// Pseudoranges and pseudorange rates for N satellites at one epoch.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementEpoch {
    pub k: usize,
    pub pr_m: Vec<f64>,
    pub prr_mps: Vec<f64>,
}

impl MeasurementEpoch {
    pub fn n_sats(&self) -> usize {
        self.pr_m.len()
    }

    /// Stack into the 2N observation vector `y = [pr; prr]`.
    pub fn stacked(&self) -> DVector<f64> {
        let n = self.pr_m.len();
        DVector::from_fn(2 * n, |i, _| if i < n { self.pr_m[i] } else { self.prr_mps[i - n] })
    }

    pub fn from_stacked(k: usize, y: &DVector<f64>) -> Self {
        let n = y.len() / 2;
        Self {
            k,
            pr_m: y.rows(0, n).iter().copied().collect(),
            prr_mps: y.rows(n, n).iter().copied().collect(),
        }
    }
}

/// Scenario generator configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub n_sats: usize,
    pub n_epochs: usize,
    pub dt_s: f64,
    pub seed: u64,
    /// Pseudorange measurement noise std dev (m).
    pub sigma_pr_m: f64,
    /// Pseudorange-rate measurement noise std dev (m/s).
    pub sigma_prr_mps: f64,
    /// Clock bias process noise std dev per epoch (m).
    pub sigma_bias_m: f64,
    /// Clock drift process noise std dev per epoch (m/s).
    pub sigma_drift_mps: f64,
    pub receiver_position_m: Vector3<f64>,
    pub init_bias_m: f64,
    pub init_drift_mps: f64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            n_sats: 4,
            n_epochs: 400,
            dt_s: 1.0,
            seed: 7,
            sigma_pr_m: 5.0,
            sigma_prr_mps: 0.1,
            sigma_bias_m: 1.0,
            sigma_drift_mps: 0.1,
            // Mid-latitude site (ECEF, spherical-earth approximation).
            receiver_position_m: Vector3::new(-831_600.0, -5_484_700.0, 3_148_000.0),
            init_bias_m: 0.0,
            init_drift_mps: 0.0,
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_sats == 0 {
            return Err(Error::InvalidArgument("n_sats must be at least 1".into()));
        }
        if self.n_epochs == 0 {
            return Err(Error::InvalidArgument("n_epochs must be at least 1".into()));
        }
        if !self.dt_s.is_finite() || self.dt_s <= 0.0 {
            return Err(Error::InvalidArgument("dt_s must be positive".into()));
        }
        for (name, v) in [
            ("sigma_pr_m", self.sigma_pr_m),
            ("sigma_prr_mps", self.sigma_prr_mps),
            ("sigma_bias_m", self.sigma_bias_m),
            ("sigma_drift_mps", self.sigma_drift_mps),
        ] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::InvalidArgument(format!("{name} must be >= 0, got {v}")));
            }
        }
        Ok(())
    }
}

/// Full synthetic scenario: per-epoch satellite sets, receiver truth and
/// the clean (unattacked) measurement stream.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub satellites: Vec<Vec<SatelliteEpoch>>,
    pub receiver: ReceiverTruth,
    pub measurements: Vec<MeasurementEpoch>,
}

/// Pseudorange per the ranging equation: geometric range plus the receiver
/// clock bias (distance-equivalent) minus the satellite clock bias term.
pub fn compute_pseudorange(
    sat: &SatelliteEpoch,
    rcv_pos: &Vector3<f64>,
    bias_m: f64,
    eps: f64,
) -> Result<f64> {
    if !bias_m.is_finite() || !eps.is_finite() {
        return Err(Error::InvalidArgument("non-finite pseudorange inputs".into()));
    }
    let range = (sat.position_m - rcv_pos).norm();
    Ok(range + bias_m - SPEED_OF_LIGHT_MPS * sat.clock_bias_s + eps)
}

/// Pseudorange rate: relative velocity projected on the line of sight plus
/// the receiver clock drift (distance-equivalent) minus the satellite clock
/// drift term.
pub fn compute_pseudorange_rate(
    sat: &SatelliteEpoch,
    rcv_pos: &Vector3<f64>,
    rcv_vel: &Vector3<f64>,
    drift_mps: f64,
    eps: f64,
) -> Result<f64> {
    let dp = sat.position_m - rcv_pos;
    let range = dp.norm();
    if range <= 0.0 {
        return Err(Error::DegenerateGeometry(
            "satellite and receiver positions coincide".into(),
        ));
    }
    let los = dp / range;
    let rel_vel = sat.velocity_mps - rcv_vel;
    Ok(rel_vel.dot(&los) + drift_mps - SPEED_OF_LIGHT_MPS * sat.clock_drift_ss + eps)
}

/// Known offset vector `c_l[k]` from satellite ephemeris and clocks:
/// entry i is the geometric range minus `c*b_i`, entry N+i the line-of-sight
/// velocity minus `c*b_i_dot`.
pub fn compute_known_offset(
    sats: &[SatelliteEpoch],
    rcv: &ReceiverTruth,
    k: usize,
) -> Result<KnownOffsetVector> {
    let n = sats.len();
    if n == 0 {
        return Err(Error::IncompleteEpoch { k, msg: "no satellites in epoch".into() });
    }
    let mut values = DVector::zeros(2 * n);
    for (i, sat) in sats.iter().enumerate() {
        if sat.k != k {
            return Err(Error::IncompleteEpoch {
                k,
                msg: format!("satellite {} carries epoch {}", sat.sat_id, sat.k),
            });
        }
        let dp = sat.position_m - rcv.position_m;
        let range = dp.norm();
        if range <= 0.0 {
            return Err(Error::DegenerateGeometry(format!(
                "satellite {} coincides with receiver",
                sat.sat_id
            )));
        }
        let los = dp / range;
        values[i] = range - SPEED_OF_LIGHT_MPS * sat.clock_bias_s;
        values[n + i] = (sat.velocity_mps - rcv.velocity_mps).dot(&los)
            - SPEED_OF_LIGHT_MPS * sat.clock_drift_ss;
    }
    Ok(KnownOffsetVector { k, values })
}

fn orbital_basis(raan: f64, incl: f64) -> (Vector3<f64>, Vector3<f64>) {
    let u = Vector3::new(raan.cos(), raan.sin(), 0.0);
    let v = Vector3::new(-raan.sin() * incl.cos(), raan.cos() * incl.cos(), incl.sin());
    (u, v)
}

fn satellite_at(i: usize, n_sats: usize, t_s: f64, bias0_s: f64, drift_ss: f64, k: usize) -> SatelliteEpoch {
    let omega = (MU_EARTH / ORBIT_RADIUS_M.powi(3)).sqrt();
    let raan = 2.0 * std::f64::consts::PI * i as f64 / n_sats as f64;
    let phase = 0.4 * i as f64 + 0.2;
    let (u, v) = orbital_basis(raan, INCLINATION_RAD);
    let th = omega * t_s + phase;
    SatelliteEpoch {
        sat_id: i as u32 + 1,
        k,
        position_m: ORBIT_RADIUS_M * (th.cos() * u + th.sin() * v),
        velocity_mps: ORBIT_RADIUS_M * omega * (-th.sin() * u + th.cos() * v),
        clock_bias_s: bias0_s + drift_ss * t_s,
        clock_drift_ss: drift_ss,
    }
}

/// Simulate a clean scenario. Deterministic for a given config: the same
/// seed yields bit-identical streams.
pub fn synth_scenario(cfg: &ScenarioConfig) -> Result<Scenario> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let a = build_state_transition(cfg.dt_s)?;
    let n = cfg.n_sats;

    // Satellite clock constants drawn once per satellite.
    let std_bias = Normal::new(0.0, 1e-4).map_err(|e| Error::Numerical(e.to_string()))?;
    let std_drift = Normal::new(0.0, 1e-11).map_err(|e| Error::Numerical(e.to_string()))?;
    let sat_bias0: Vec<f64> = (0..n).map(|_| std_bias.sample(&mut rng)).collect();
    let sat_drift: Vec<f64> = (0..n).map(|_| std_drift.sample(&mut rng)).collect();

    let noise = |sigma: f64, rng: &mut ChaCha8Rng| -> Result<f64> {
        if sigma == 0.0 {
            return Ok(0.0);
        }
        let dist = Normal::new(0.0, sigma).map_err(|e| Error::Numerical(e.to_string()))?;
        Ok(dist.sample(rng))
    };

    let mut clock = ClockState::new(cfg.init_bias_m, cfg.init_drift_mps)?;
    let mut satellites = Vec::with_capacity(cfg.n_epochs);
    let mut clock_trace = Vec::with_capacity(cfg.n_epochs);
    let mut measurements = Vec::with_capacity(cfg.n_epochs);

    for k in 0..cfg.n_epochs {
        let t = k as f64 * cfg.dt_s;
        let sats: Vec<SatelliteEpoch> =
            (0..n).map(|i| satellite_at(i, n, t, sat_bias0[i], sat_drift[i], k)).collect();

        let mut pr = Vec::with_capacity(n);
        let mut prr = Vec::with_capacity(n);
        for sat in &sats {
            let e_pr = noise(cfg.sigma_pr_m, &mut rng)?;
            let e_prr = noise(cfg.sigma_prr_mps, &mut rng)?;
            pr.push(compute_pseudorange(sat, &cfg.receiver_position_m, clock.bias_m, e_pr)?);
            prr.push(compute_pseudorange_rate(
                sat,
                &cfg.receiver_position_m,
                &Vector3::zeros(),
                clock.drift_mps,
                e_prr,
            )?);
        }

        satellites.push(sats);
        clock_trace.push(clock);
        measurements.push(MeasurementEpoch { k, pr_m: pr, prr_mps: prr });

        let w = Vector2::new(noise(cfg.sigma_bias_m, &mut rng)?, noise(cfg.sigma_drift_mps, &mut rng)?);
        clock = propagate(&clock, &a, &w)?;
    }

    Ok(Scenario {
        satellites,
        receiver: ReceiverTruth {
            position_m: cfg.receiver_position_m,
            velocity_mps: Vector3::zeros(),
            clock: clock_trace,
        },
        measurements,
    })
}

/// How to handle an epoch whose satellite count differs from the configured N.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SurplusPolicy {
    /// Keep the first N satellites ordered by sat_id.
    SelectFirstN,
    /// Drop the whole epoch.
    DropEpoch,
}

/// Outcome notes from CSV ingestion.
#[derive(Debug, Clone, Default)]
pub struct IngestReport {
    /// Epochs rejected for having fewer than N satellites (or any mismatch
    /// under [`SurplusPolicy::DropEpoch`]).
    pub dropped_epochs: Vec<usize>,
    pub n_epochs: usize,
}

/// Data loaded from the three-file CSV layout.
#[derive(Debug, Clone)]
pub struct IngestedData {
    pub satellites: Vec<Vec<SatelliteEpoch>>,
    pub measurements: Vec<MeasurementEpoch>,
    pub receiver_position_m: Vector3<f64>,
    pub report: IngestReport,
}

fn parse_f64(field: &str, path: &str, line: usize) -> Result<f64> {
    field.trim().parse::<f64>().map_err(|_| Error::Parse {
        path: path.to_string(),
        line,
        msg: format!("expected a number, got {field:?}"),
    })
}

fn parse_usize(field: &str, path: &str, line: usize) -> Result<usize> {
    field.trim().parse::<usize>().map_err(|_| Error::Parse {
        path: path.to_string(),
        line,
        msg: format!("expected an integer, got {field:?}"),
    })
}

fn read_rows(path: &Path, header: &str, n_fields: usize) -> Result<Vec<(usize, Vec<String>)>> {
    let display = path.display().to_string();
    let file = fs::File::open(path)?;
    let mut rows = Vec::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        let lineno = idx + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        if idx == 0 {
            if trimmed != header {
                return Err(Error::Parse {
                    path: display,
                    line: lineno,
                    msg: format!("expected header {header:?}, got {trimmed:?}"),
                });
            }
            continue;
        }
        let fields: Vec<String> = trimmed.split(',').map(|s| s.to_string()).collect();
        if fields.len() != n_fields {
            return Err(Error::Parse {
                path: display,
                line: lineno,
                msg: format!("expected {n_fields} fields, got {}", fields.len()),
            });
        }
        rows.push((lineno, fields));
    }
    Ok(rows)
}

pub const MEASUREMENTS_HEADER: &str = "k,sat_id,pr_m,prr_mps";
pub const EPHEMERIS_HEADER: &str =
    "k,sat_id,x_m,y_m,z_m,vx_mps,vy_mps,vz_mps,clk_bias_s,clk_drift_ss";
pub const RECEIVER_HEADER: &str = "x_m,y_m,z_m";

/// Ingest recorded data from the documented CSV layout. Epochs are grouped
/// by `k` with satellites sorted by `sat_id`; epochs with fewer than
/// `n_sats` satellites are rejected and reported, surplus satellites are
/// handled per `policy`.
pub fn ingest_csv(
    measurements_path: &Path,
    ephemeris_path: &Path,
    receiver_path: &Path,
    n_sats: usize,
    policy: SurplusPolicy,
) -> Result<IngestedData> {
    if n_sats == 0 {
        return Err(Error::InvalidArgument("n_sats must be at least 1".into()));
    }

    let rcv_rows = read_rows(receiver_path, RECEIVER_HEADER, 3)?;
    let rcv_display = receiver_path.display().to_string();
    if rcv_rows.len() != 1 {
        return Err(Error::Parse {
            path: rcv_display,
            line: rcv_rows.last().map(|r| r.0).unwrap_or(1),
            msg: format!("expected exactly one receiver row, got {}", rcv_rows.len()),
        });
    }
    let (line, f) = &rcv_rows[0];
    let receiver_position_m = Vector3::new(
        parse_f64(&f[0], &rcv_display, *line)?,
        parse_f64(&f[1], &rcv_display, *line)?,
        parse_f64(&f[2], &rcv_display, *line)?,
    );

    // Measurements keyed by (k, sat_id).
    let meas_display = measurements_path.display().to_string();
    let mut meas_by_epoch: std::collections::BTreeMap<usize, Vec<(u32, f64, f64)>> =
        std::collections::BTreeMap::new();
    for (line, f) in read_rows(measurements_path, MEASUREMENTS_HEADER, 4)? {
        let k = parse_usize(&f[0], &meas_display, line)?;
        let sat_id = parse_usize(&f[1], &meas_display, line)? as u32;
        let pr = parse_f64(&f[2], &meas_display, line)?;
        let prr = parse_f64(&f[3], &meas_display, line)?;
        meas_by_epoch.entry(k).or_default().push((sat_id, pr, prr));
    }

    let eph_display = ephemeris_path.display().to_string();
    let mut eph_by_epoch: std::collections::BTreeMap<usize, Vec<SatelliteEpoch>> =
        std::collections::BTreeMap::new();
    for (line, f) in read_rows(ephemeris_path, EPHEMERIS_HEADER, 10)? {
        let k = parse_usize(&f[0], &eph_display, line)?;
        let sat_id = parse_usize(&f[1], &eph_display, line)? as u32;
        let nums: Vec<f64> =
            f[2..].iter().map(|s| parse_f64(s, &eph_display, line)).collect::<Result<_>>()?;
        eph_by_epoch.entry(k).or_default().push(SatelliteEpoch {
            sat_id,
            k,
            position_m: Vector3::new(nums[0], nums[1], nums[2]),
            velocity_mps: Vector3::new(nums[3], nums[4], nums[5]),
            clock_bias_s: nums[6],
            clock_drift_ss: nums[7],
        });
    }

    let mut report = IngestReport::default();
    let mut satellites = Vec::new();
    let mut measurements = Vec::new();
    for (k, mut rows) in meas_by_epoch {
        rows.sort_by_key(|r| r.0);
        let mut eph = eph_by_epoch.remove(&k).unwrap_or_default();
        eph.sort_by_key(|s| s.sat_id);

        // Keep only satellites present in both files for this epoch.
        let ids: Vec<u32> = rows
            .iter()
            .map(|r| r.0)
            .filter(|id| eph.iter().any(|s| s.sat_id == *id))
            .collect();

        if ids.len() < n_sats || (ids.len() != n_sats && policy == SurplusPolicy::DropEpoch) {
            report.dropped_epochs.push(k);
            continue;
        }
        let take: Vec<u32> = ids.into_iter().take(n_sats).collect();

        let sats: Vec<SatelliteEpoch> =
            take.iter().map(|id| eph.iter().find(|s| s.sat_id == *id).unwrap().clone()).collect();
        let pr: Vec<f64> = take
            .iter()
            .map(|id| rows.iter().find(|r| r.0 == *id).unwrap().1)
            .collect();
        let prr: Vec<f64> = take
            .iter()
            .map(|id| rows.iter().find(|r| r.0 == *id).unwrap().2)
            .collect();

        satellites.push(sats);
        measurements.push(MeasurementEpoch { k, pr_m: pr, prr_mps: prr });
    }
    report.n_epochs = measurements.len();

    Ok(IngestedData { satellites, measurements, receiver_position_m, report })
}

/// Shortest round-trip float formatting; parsing the text recovers the
/// exact f64 value.
fn fmt_f64(v: f64) -> String {
    let mut s = String::new();
    write!(s, "{v}").unwrap();
    s
}

pub fn emit_measurements_csv(measurements: &[MeasurementEpoch], sats: &[Vec<SatelliteEpoch>]) -> String {
    let mut out = String::from(MEASUREMENTS_HEADER);
    out.push('\n');
    for (meas, sat_row) in measurements.iter().zip(sats) {
        for (i, sat) in sat_row.iter().enumerate() {
            let _ = writeln!(
                out,
                "{},{},{},{}",
                meas.k,
                sat.sat_id,
                fmt_f64(meas.pr_m[i]),
                fmt_f64(meas.prr_mps[i])
            );
        }
    }
    out
}

pub fn emit_ephemeris_csv(sats: &[Vec<SatelliteEpoch>]) -> String {
    let mut out = String::from(EPHEMERIS_HEADER);
    out.push('\n');
    for row in sats {
        for s in row {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{}",
                s.k,
                s.sat_id,
                fmt_f64(s.position_m.x),
                fmt_f64(s.position_m.y),
                fmt_f64(s.position_m.z),
                fmt_f64(s.velocity_mps.x),
                fmt_f64(s.velocity_mps.y),
                fmt_f64(s.velocity_mps.z),
                fmt_f64(s.clock_bias_s),
                fmt_f64(s.clock_drift_ss)
            );
        }
    }
    out
}

pub fn emit_receiver_csv(position_m: &Vector3<f64>) -> String {
    format!(
        "{}\n{},{},{}\n",
        RECEIVER_HEADER,
        fmt_f64(position_m.x),
        fmt_f64(position_m.y),
        fmt_f64(position_m.z)
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clock::{build_observation_matrix, observe};
    use approx::assert_relative_eq;

    fn test_sat(pos: Vector3<f64>, vel: Vector3<f64>, bias_s: f64, drift_ss: f64) -> SatelliteEpoch {
        SatelliteEpoch {
            sat_id: 1,
            k: 0,
            position_m: pos,
            velocity_mps: vel,
            clock_bias_s: bias_s,
            clock_drift_ss: drift_ss,
        }
    }

    #[test]
    fn pseudorange_pure_geometry() {
        let d = 2.2e7;
        let sat = test_sat(Vector3::new(d, 0.0, 0.0), Vector3::zeros(), 0.0, 0.0);
        let pr = compute_pseudorange(&sat, &Vector3::zeros(), 0.0, 0.0).unwrap();
        assert_relative_eq!(pr, d);
        let pr = compute_pseudorange(&sat, &Vector3::zeros(), 100.0, 0.0).unwrap();
        assert_relative_eq!(pr, d + 100.0);
    }

    #[test]
    fn pseudorange_matches_norm_plus_offset_oracle() {
        use rand::{Rng, SeedableRng};
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let p = Vector3::new(
                rng.random_range(-3e7..3e7),
                rng.random_range(-3e7..3e7),
                rng.random_range(-3e7..3e7),
            );
            let r = Vector3::new(
                rng.random_range(-6e6..6e6),
                rng.random_range(-6e6..6e6),
                rng.random_range(-6e6..6e6),
            );
            let bias = rng.random_range(-1e5..1e5);
            let b_s = rng.random_range(-1e-3..1e-3);
            let eps = rng.random_range(-10.0..10.0);
            let sat = test_sat(p, Vector3::zeros(), b_s, 0.0);
            let got = compute_pseudorange(&sat, &r, bias, eps).unwrap();
            let want = ((p.x - r.x).powi(2) + (p.y - r.y).powi(2) + (p.z - r.z).powi(2)).sqrt()
                + bias
                - SPEED_OF_LIGHT_MPS * b_s
                + eps;
            assert_relative_eq!(got, want, max_relative = 1e-14);
        }
       }

    #[test]
    fn rate_parallel_and_orthogonal_velocity() {
        let sat = test_sat(Vector3::new(2.2e7, 0.0, 0.0), Vector3::new(-700.0, 0.0, 0.0), 0.0, 0.0);
        let v = compute_pseudorange_rate(&sat, &Vector3::zeros(), &Vector3::zeros(), 0.0, 0.0).unwrap();
        assert_relative_eq!(v, -700.0);

        let sat = test_sat(Vector3::new(2.2e7, 0.0, 0.0), Vector3::new(0.0, 900.0, 0.0), 0.0, 0.0);
        let v = compute_pseudorange_rate(&sat, &Vector3::zeros(), &Vector3::zeros(), 2.0, 0.0).unwrap();
        assert_relative_eq!(v, 2.0);
    }

    #[test]
    fn rate_rejects_coincident_positions() {
        let sat = test_sat(Vector3::zeros(), Vector3::zeros(), 0.0, 0.0);
        assert!(compute_pseudorange_rate(&sat, &Vector3::zeros(), &Vector3::zeros(), 0.0, 0.0).is_err());
    }

    #[test]
    fn rate_matches_dot_product_oracle() {
        use rand::{Rng, SeedableRng};
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..200 {
            let p = Vector3::new(2.0e7 + rng.random_range(0.0..1e7), rng.random_range(-1e7..1e7), 1e6);
            let vel = Vector3::new(
                rng.random_range(-3e3..3e3),
                rng.random_range(-3e3..3e3),
                rng.random_range(-3e3..3e3),
            );
            let drift = rng.random_range(-100.0..100.0);
            let d_ss = rng.random_range(-1e-9..1e-9);
            let sat = test_sat(p, vel, 0.0, d_ss);
            let got =
                compute_pseudorange_rate(&sat, &Vector3::zeros(), &Vector3::zeros(), drift, 0.0)
                    .unwrap();
            let want = vel.dot(&(p / p.norm())) + drift - SPEED_OF_LIGHT_MPS * d_ss;
            assert_relative_eq!(got, want, max_relative = 1e-12);
        }
    }

    #[test]
    fn known_offset_zero_clock_is_geometry_only() {
        let sats = vec![
            SatelliteEpoch { sat_id: 1, k: 0, ..test_sat(Vector3::new(2.5e7, 0.0, 0.0), Vector3::new(0.0, 1000.0, 0.0), 0.0, 0.0) },
            SatelliteEpoch { sat_id: 2, k: 0, ..test_sat(Vector3::new(0.0, 2.5e7, 0.0), Vector3::new(-1000.0, 0.0, 0.0), 0.0, 0.0) },
        ];
        let rcv = ReceiverTruth {
            position_m: Vector3::zeros(),
            velocity_mps: Vector3::zeros(),
            clock: vec![],
        };
        let cl = compute_known_offset(&sats, &rcv, 0).unwrap();
        assert_relative_eq!(cl.values[0], 2.5e7);
        assert_relative_eq!(cl.values[1], 2.5e7);
        assert_relative_eq!(cl.values[2], 0.0); // velocity orthogonal to LOS
        assert_relative_eq!(cl.values[3], 0.0);
    }

    #[test]
    fn known_offset_rejects_wrong_epoch() {
        let mut sat = test_sat(Vector3::new(2.5e7, 0.0, 0.0), Vector3::zeros(), 0.0, 0.0);
        sat.k = 3;
        let rcv = ReceiverTruth {
            position_m: Vector3::zeros(),
            velocity_mps: Vector3::zeros(),
            clock: vec![],
        };
        assert!(matches!(
            compute_known_offset(&[sat], &rcv, 0),
            Err(Error::IncompleteEpoch { k: 0, .. })
        ));
    }

    #[test]
    fn reconstruction_identity_on_synthetic_data() {
        // y - c_l - C x == eps; noiseless, so exactly zero after unit scaling.
        let cfg = ScenarioConfig {
            sigma_pr_m: 0.0,
            sigma_prr_mps: 0.0,
            sigma_bias_m: 0.0,
            sigma_drift_mps: 0.0,
            init_bias_m: 42.0,
            init_drift_mps: -1.5,
            n_epochs: 50,
            ..Default::default()
        };
        let scn = synth_scenario(&cfg).unwrap();
        let c = build_observation_matrix(cfg.n_sats).unwrap();
        for k in 0..cfg.n_epochs {
            let cl = compute_known_offset(&scn.satellites[k], &scn.receiver, k).unwrap();
            let y = scn.measurements[k].stacked();
            let resid = &y - &cl.values - &c.c * scn.receiver.clock[k].as_vector();
            assert!(resid.amax() <= 1e-6, "residual {} at k={k}", resid.amax());

            // observe() with the truth state reproduces the synthetic stream.
            let y2 = observe(&scn.receiver.clock[k], &c, &cl, &DVector::zeros(2 * cfg.n_sats))
                .unwrap();
            assert!((y2.stacked() - &y).amax() <= 1e-6);
        }
    }

    #[test]
    fn synthesis_is_deterministic() {
        let cfg = ScenarioConfig::default();
        let a = synth_scenario(&cfg).unwrap();
        let b = synth_scenario(&cfg).unwrap();
        assert_eq!(a.measurements, b.measurements);
        assert_eq!(a.receiver, b.receiver);
        assert_eq!(a.satellites.len(), b.satellites.len());
        let ca = emit_measurements_csv(&a.measurements, &a.satellites);
        let cb = emit_measurements_csv(&b.measurements, &b.satellites);
        assert_eq!(ca, cb);
    }

    #[test]
    fn synthesis_shape_matches_config() {
        let cfg = ScenarioConfig { n_sats: 4, n_epochs: 400, ..Default::default() };
        let scn = synth_scenario(&cfg).unwrap();
        assert_eq!(scn.measurements.len(), 400);
        assert!(scn.measurements.iter().all(|m| m.n_sats() == 4));
        assert!(scn.measurements.iter().all(|m| m.stacked().len() == 8));
        for sats in &scn.satellites {
            for s in sats {
                let r = s.position_m.norm();
                assert!((2.0e7..=3.0e7).contains(&r), "orbit radius {r}");
            }
        }
    }

    #[test]
    fn csv_round_trip() {
        let cfg = ScenarioConfig { n_epochs: 5, ..Default::default() };
        let scn = synth_scenario(&cfg).unwrap();
        let dir = std::env::temp_dir().join(format!("tsa_csv_{}", std::process::id()));
        fs::create_dir_all(&dir).unwrap();
        let mp = dir.join("meas.csv");
        let ep = dir.join("eph.csv");
        let rp = dir.join("rcv.csv");
        fs::write(&mp, emit_measurements_csv(&scn.measurements, &scn.satellites)).unwrap();
        fs::write(&ep, emit_ephemeris_csv(&scn.satellites)).unwrap();
        fs::write(&rp, emit_receiver_csv(&scn.receiver.position_m)).unwrap();

        let back = ingest_csv(&mp, &ep, &rp, cfg.n_sats, SurplusPolicy::SelectFirstN).unwrap();
        assert_eq!(back.measurements, scn.measurements);
        assert_eq!(back.satellites, scn.satellites);
        assert_eq!(back.receiver_position_m, scn.receiver.position_m);
        assert!(back.report.dropped_epochs.is_empty());

        // Emitting the ingested data reproduces the files byte for byte.
        assert_eq!(
            emit_measurements_csv(&back.measurements, &back.satellites),
            fs::read_to_string(&mp).unwrap()
        );
        fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn csv_parse_error_names_line() {
        let dir = std::env::temp_dir().join(format!("tsa_csv_bad_{}", std::process::id()));
        fs::create_dir_all(&dir).unwrap();
        let mp = dir.join("meas.csv");
        fs::write(&mp, "k,sat_id,pr_m,prr_mps\n0,1,2.0e7,12.0\n0,2,not_a_number,9.0\n").unwrap();
        let ep = dir.join("eph.csv");
        fs::write(&ep, format!("{EPHEMERIS_HEADER}\n")).unwrap();
        let rp = dir.join("rcv.csv");
        fs::write(&rp, "x_m,y_m,z_m\n0,0,0\n").unwrap();
        match ingest_csv(&mp, &ep, &rp, 1, SurplusPolicy::SelectFirstN) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("expected parse error, got {other:?}"),
        }
        fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn surplus_satellites_select_first_n() {
        // 5 satellites recorded, N=4 configured: first 4 by sat_id retained.
        let cfg = ScenarioConfig { n_sats: 5, n_epochs: 2, ..Default::default() };
        let scn = synth_scenario(&cfg).unwrap();
        let dir = std::env::temp_dir().join(format!("tsa_csv_sel_{}", std::process::id()));
        fs::create_dir_all(&dir).unwrap();
        let mp = dir.join("meas.csv");
        let ep = dir.join("eph.csv");
        let rp = dir.join("rcv.csv");
        fs::write(&mp, emit_measurements_csv(&scn.measurements, &scn.satellites)).unwrap();
        fs::write(&ep, emit_ephemeris_csv(&scn.satellites)).unwrap();
        fs::write(&rp, emit_receiver_csv(&scn.receiver.position_m)).unwrap();

        let back = ingest_csv(&mp, &ep, &rp, 4, SurplusPolicy::SelectFirstN).unwrap();
        assert_eq!(back.measurements[0].n_sats(), 4);
        let ids: Vec<u32> = back.satellites[0].iter().map(|s| s.sat_id).collect();
        assert_eq!(ids, vec![1, 2, 3, 4]);

        let dropped = ingest_csv(&mp, &ep, &rp, 4, SurplusPolicy::DropEpoch).unwrap();
        assert_eq!(dropped.report.dropped_epochs, vec![0, 1]);
        assert!(dropped.measurements.is_empty());

        // Fewer than N satellites: epoch rejected with a report.
        let scant = ingest_csv(&mp, &ep, &rp, 6, SurplusPolicy::SelectFirstN).unwrap();
        assert_eq!(scant.report.dropped_epochs, vec![0, 1]);
        fs::remove_dir_all(&dir).unwrap();
    }
}
