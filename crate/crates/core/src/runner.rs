//! Scenario orchestration: configuration file, end-to-end pipeline and
//! plot-ready trace emission.
//!
//! The pipeline is: produce a clean stream (synthesis or CSV ingestion),
//! extract the ground-truth clock trace from it, inject the configured
//! attack, run each selected estimator on the spoofed stream, and score
//! everything against the ground truth. All stages are deterministic for a
//! given configuration, so two runs produce byte-identical outputs.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::{Vector2, Vector3};

use crate::attack::{compliance_check, inject, AttackKind, AttackSpec};
use crate::baseline::{
    design_luenberger, ground_truth_from_clean, kalman_step, luenberger_step, KalmanConfig,
    KalmanState,
};
use crate::clock::{
    build_observation_matrix, build_state_transition, ClockState, KnownOffsetVector,
};
use crate::error::{Error, Result};
use crate::lmi::{
    extract_gains, load_gains, save_gains, solve_feasibility, GainPair, LmiOptions,
};
use crate::metrics::{
    relative_error, rmse, EstimatorMetrics, MetricsReport, RE_GUARD_BIAS_M, RE_GUARD_DRIFT_MPS,
};
use crate::robust::run_algorithm1;
use crate::scenario::{
    compute_known_offset, emit_ephemeris_csv, emit_measurements_csv, emit_receiver_csv,
    ingest_csv, synth_scenario, MeasurementEpoch, ReceiverTruth, SatelliteEpoch, ScenarioConfig,
    SurplusPolicy,
};

/// Where the clean measurement stream comes from.
#[derive(Debug, Clone)]
pub enum ScenarioSource {
    Synth(ScenarioConfig),
    Files { measurements: PathBuf, ephemeris: PathBuf, receiver: PathBuf },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EstimatorKind {
    Kalman,
    Luenberger,
    Robust,
}

impl EstimatorKind {
    pub fn name(&self) -> &'static str {
        match self {
            EstimatorKind::Kalman => "kalman",
            EstimatorKind::Luenberger => "luenberger",
            EstimatorKind::Robust => "robust",
        }
    }
}

/// Full run configuration; mirrors the `run.cfg` key-value file.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub label: String,
    pub scenario: ScenarioSource,
    pub n_sats: usize,
    pub dt_s: f64,
    pub attack: AttackSpec,
    pub estimators: Vec<EstimatorKind>,
    pub kalman: KalmanConfig,
    pub poles: [f64; 2],
    pub lmi: LmiOptions,
    pub gains_file: Option<PathBuf>,
    /// Design gains inline when no gains file is given.
    pub design_gains: bool,
    pub robust_init: (ClockState, Vector2<f64>),
    pub out_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        let scenario = ScenarioConfig::default();
        Self {
            label: "run".into(),
            n_sats: scenario.n_sats,
            dt_s: scenario.dt_s,
            scenario: ScenarioSource::Synth(scenario),
            attack: AttackSpec::none(),
            estimators: vec![EstimatorKind::Kalman, EstimatorKind::Luenberger, EstimatorKind::Robust],
            kalman: KalmanConfig::default(),
            poles: [0.5, 0.7],
            lmi: LmiOptions::default(),
            gains_file: None,
            design_gains: true,
            robust_init: (ClockState::zero(), Vector2::zeros()),
            out_dir: PathBuf::from("out"),
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.estimators.is_empty() {
            return Err(Error::Config("at least one estimator must be selected".into()));
        }
        self.attack.validate()?;
        self.kalman.validate()?;
        if let ScenarioSource::Synth(cfg) = &self.scenario {
            cfg.validate()?;
            if self.attack.kind != AttackKind::None && self.attack.alpha >= cfg.n_epochs {
                return Err(Error::Config(format!(
                    "attack window starts at {} but the run has {} epochs",
                    self.attack.alpha, cfg.n_epochs
                )));
            }
        }
        Ok(())
    }
}

/// Parse the plain-text `key = value` configuration format (one pair per
/// line, `#` starts a comment). Unknown keys are rejected.
pub fn parse_run_cfg(path: &Path) -> Result<RunConfig> {
    let display = path.display().to_string();
    let text = fs::read_to_string(path)?;
    let mut cfg = RunConfig::default();
    let mut scenario = ScenarioConfig::default();
    let mut meas_path: Option<PathBuf> = None;
    let mut eph_path: Option<PathBuf> = None;
    let mut rcv_path: Option<PathBuf> = None;
    let mut attack_kind = AttackKind::None;
    let mut attack_start = 30usize;
    let mut attack_end: Option<usize> = None;
    let mut attack_magnitude = 8000.0;
    let mut attack_ramp = 25.0;

    let err = |line: usize, msg: String| Error::Parse { path: display.clone(), line, msg };

    for (idx, raw) in text.lines().enumerate() {
        let lineno = idx + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| err(lineno, "expected key = value".into()))?;
        let key = key.trim();
        let value = value.trim();
        let p_f64 = |v: &str| -> Result<f64> {
            v.parse::<f64>().map_err(|_| err(lineno, format!("bad number {v:?}")))
        };
        let p_usize = |v: &str| -> Result<usize> {
            v.parse::<usize>().map_err(|_| err(lineno, format!("bad integer {v:?}")))
        };
        let p_bool = |v: &str| -> Result<bool> {
            match v {
                "true" | "1" | "yes" => Ok(true),
                "false" | "0" | "no" => Ok(false),
                _ => Err(err(lineno, format!("bad boolean {v:?}"))),
            }
        };
        match key {
            "label" => cfg.label = value.to_string(),
            "n_sats" => scenario.n_sats = p_usize(value)?,
            "n_epochs" => scenario.n_epochs = p_usize(value)?,
            "dt_s" => scenario.dt_s = p_f64(value)?,
            "seed" => {
                scenario.seed =
                    value.parse::<u64>().map_err(|_| err(lineno, format!("bad seed {value:?}")))?
            }
            "sigma_pr_m" => scenario.sigma_pr_m = p_f64(value)?,
            "sigma_prr_mps" => scenario.sigma_prr_mps = p_f64(value)?,
            "sigma_bias_m" => scenario.sigma_bias_m = p_f64(value)?,
            "sigma_drift_mps" => scenario.sigma_drift_mps = p_f64(value)?,
            "receiver_x_m" => scenario.receiver_position_m.x = p_f64(value)?,
            "receiver_y_m" => scenario.receiver_position_m.y = p_f64(value)?,
            "receiver_z_m" => scenario.receiver_position_m.z = p_f64(value)?,
            "init_bias_m" => scenario.init_bias_m = p_f64(value)?,
            "init_drift_mps" => scenario.init_drift_mps = p_f64(value)?,
            "measurements_csv" => meas_path = Some(PathBuf::from(value)),
            "ephemeris_csv" => eph_path = Some(PathBuf::from(value)),
            "receiver_csv" => rcv_path = Some(PathBuf::from(value)),
            "attack" => {
                attack_kind = match value {
                    "none" => AttackKind::None,
                    "type1" => AttackKind::TypeI,
                    "type2" => AttackKind::TypeII,
                    _ => return Err(err(lineno, format!("unknown attack kind {value:?}"))),
                }
            }
            "attack_start" => attack_start = p_usize(value)?,
            "attack_end" => attack_end = Some(p_usize(value)?),
            "attack_magnitude_m" => attack_magnitude = p_f64(value)?,
            "attack_ramp_mps" => attack_ramp = p_f64(value)?,
            "estimators" => {
                cfg.estimators = value
                    .split(',')
                    .map(|s| match s.trim() {
                        "kalman" => Ok(EstimatorKind::Kalman),
                        "luenberger" => Ok(EstimatorKind::Luenberger),
                        "robust" => Ok(EstimatorKind::Robust),
                        other => Err(err(lineno, format!("unknown estimator {other:?}"))),
                    })
                    .collect::<Result<Vec<_>>>()?;
            }
            "kalman_q_bias" => cfg.kalman.q[(0, 0)] = p_f64(value)?,
            "kalman_q_drift" => cfg.kalman.q[(1, 1)] = p_f64(value)?,
            "kalman_r_pr_var" => cfg.kalman.r_pr_var = p_f64(value)?,
            "kalman_r_prr_var" => cfg.kalman.r_prr_var = p_f64(value)?,
            "kalman_p0" => {
                let v = p_f64(value)?;
                cfg.kalman.p0 = nalgebra::Matrix2::identity() * v;
            }
            "luenberger_pole_1" => cfg.poles[0] = p_f64(value)?,
            "luenberger_pole_2" => cfg.poles[1] = p_f64(value)?,
            "lmi_margin" => cfg.lmi.margin = p_f64(value)?,
            "lmi_max_iter" => cfg.lmi.max_iter = p_usize(value)?,
            "lmi_tol" => cfg.lmi.tol = p_f64(value)?,
            "gains_file" => cfg.gains_file = Some(PathBuf::from(value)),
            "design_gains" => cfg.design_gains = p_bool(value)?,
            "robust_init_bias_m" => cfg.robust_init.0.bias_m = p_f64(value)?,
            "robust_init_drift_mps" => cfg.robust_init.0.drift_mps = p_f64(value)?,
            "out_dir" => cfg.out_dir = PathBuf::from(value),
            other => return Err(err(lineno, format!("unknown key {other:?}"))),
        }
    }

    let end = attack_end.unwrap_or_else(|| scenario.n_epochs.saturating_sub(1));
    cfg.attack = match attack_kind {
        AttackKind::None => AttackSpec::none(),
        AttackKind::TypeI => AttackSpec::type1(attack_start, end, attack_magnitude)?,
        AttackKind::TypeII => AttackSpec::type2(attack_start, end, attack_ramp)?,
    };
    cfg.n_sats = scenario.n_sats;
    cfg.dt_s = scenario.dt_s;
    cfg.scenario = match (meas_path, eph_path, rcv_path) {
        (Some(m), Some(e), Some(r)) => {
            ScenarioSource::Files { measurements: m, ephemeris: e, receiver: r }
        }
        (None, None, None) => ScenarioSource::Synth(scenario),
        _ => {
            return Err(Error::Config(
                "measurements_csv, ephemeris_csv and receiver_csv must be given together".into(),
            ))
        }
    };
    cfg.validate()?;
    Ok(cfg)
}

/// Clean stream plus everything needed to run estimators on it.
pub struct PreparedData {
    pub satellites: Vec<Vec<SatelliteEpoch>>,
    pub measurements: Vec<MeasurementEpoch>,
    pub receiver: ReceiverTruth,
    pub known_offsets: Vec<KnownOffsetVector>,
}

/// Load or synthesize the clean stream and precompute the known offsets.
pub fn prepare_data(cfg: &RunConfig) -> Result<PreparedData> {
    let (satellites, measurements, receiver) = match &cfg.scenario {
        ScenarioSource::Synth(sc) => {
            let scn = synth_scenario(sc)?;
            (scn.satellites, scn.measurements, scn.receiver)
        }
        ScenarioSource::Files { measurements, ephemeris, receiver } => {
            let data = ingest_csv(
                measurements,
                ephemeris,
                receiver,
                cfg.n_sats,
                SurplusPolicy::SelectFirstN,
            )?;
            let rcv = ReceiverTruth {
                position_m: data.receiver_position_m,
                velocity_mps: Vector3::zeros(),
                clock: Vec::new(),
            };
            (data.satellites, data.measurements, rcv)
        }
    };
    let mut known_offsets = Vec::with_capacity(measurements.len());
    for (sats, meas) in satellites.iter().zip(&measurements) {
        known_offsets.push(compute_known_offset(sats, &receiver, meas.k)?);
    }
    Ok(PreparedData { satellites, measurements, receiver, known_offsets })
}

/// Obtain robust gains per the configuration: from a gains file when given,
/// otherwise by running the offline design stage.
pub fn obtain_gains(cfg: &RunConfig) -> Result<(GainPair, f64)> {
    let a = build_state_transition(cfg.dt_s)?;
    let c = build_observation_matrix(cfg.n_sats)?;
    if let Some(path) = &cfg.gains_file {
        let stored = load_gains(path)?;
        if stored.n_sats != cfg.n_sats {
            return Err(Error::Config(format!(
                "gains file is for N={}, run uses N={}",
                stored.n_sats, cfg.n_sats
            )));
        }
        let radius = crate::lmi::verify_stability(&stored.gains, &a, &c);
        return Ok((stored.gains, radius));
    }
    if !cfg.design_gains {
        return Err(Error::Config(
            "robust estimator selected but no gains file given and design_gains = false".into(),
        ));
    }
    let cert = solve_feasibility(&a, &c, cfg.lmi.margin, cfg.lmi.max_iter, cfg.lmi.tol)?;
    let gains = extract_gains(&cert.vars)?;
    let radius = crate::lmi::verify_stability(&gains, &a, &c);
    Ok((gains, radius))
}

/// Per-estimator traces produced by one run.
#[derive(Debug, Clone, Default)]
pub struct RunTraces {
    pub truth: Vec<ClockState>,
    pub kalman: Option<Vec<ClockState>>,
    pub luenberger: Option<Vec<ClockState>>,
    pub robust: Option<Vec<crate::robust::CorrectedOutput>>,
}

/// Outcome of a full scenario run.
pub struct RunOutcome {
    pub report: MetricsReport,
    pub traces: RunTraces,
}

/// Execute the pipeline and write traces to `out_dir`.
pub fn run_scenario(cfg: &RunConfig) -> Result<RunOutcome> {
    cfg.validate()?;
    let data = prepare_data(cfg)?;
    let a = build_state_transition(cfg.dt_s)?;
    let c = build_observation_matrix(cfg.n_sats)?;

    // Ground truth from the clean stream, then inject the attack.
    let truth = ground_truth_from_clean(
        &data.measurements,
        &data.satellites,
        &data.receiver,
        &a,
        &c,
        &cfg.kalman,
    )?;
    let spoofed: Vec<MeasurementEpoch> = data
        .measurements
        .iter()
        .map(|m| {
            let (s_pr, s_prr) = cfg.attack.signal_at(m.k, cfg.dt_s);
            inject(m, s_pr, s_prr)
        })
        .collect();

    let truth_bias: Vec<f64> = truth.iter().map(|x| x.bias_m).collect();
    let truth_drift: Vec<f64> = truth.iter().map(|x| x.drift_mps).collect();
    let mut traces = RunTraces { truth: truth.clone(), ..Default::default() };
    let mut estimators = Vec::new();

    for kind in &cfg.estimators {
        match kind {
            EstimatorKind::Kalman => {
                let mut st = KalmanState::from_config(&cfg.kalman);
                let mut tr = Vec::with_capacity(spoofed.len());
                for (meas, cl) in spoofed.iter().zip(&data.known_offsets) {
                    st = kalman_step(&st, &a, &c, cl, meas, &cfg.kalman)?;
                    tr.push(st.x);
                }
                let bias: Vec<f64> = tr.iter().map(|x| x.bias_m).collect();
                estimators.push(metrics_for("kalman", &bias, &truth_bias)?);
                traces.kalman = Some(tr);
            }
            EstimatorKind::Luenberger => {
                let gain = design_luenberger(&a, &c, cfg.poles)?;
                let mut x = ClockState::zero();
                let mut tr = Vec::with_capacity(spoofed.len());
                for (meas, cl) in spoofed.iter().zip(&data.known_offsets) {
                    x = luenberger_step(&x, &gain, &a, &c, cl, meas)?;
                    tr.push(x);
                }
                let bias: Vec<f64> = tr.iter().map(|x| x.bias_m).collect();
                estimators.push(metrics_for("luenberger", &bias, &truth_bias)?);
                traces.luenberger = Some(tr);
            }
            EstimatorKind::Robust => {
                let (gains, _radius) = obtain_gains(cfg)?;
                let tr = run_algorithm1(
                    &spoofed,
                    &data.known_offsets,
                    &gains,
                    &a,
                    &c,
                    cfg.robust_init,
                )?;
                let bias: Vec<f64> = tr.iter().map(|o| o.x_c_hat.bias_m).collect();
                estimators.push(metrics_for("robust", &bias, &truth_bias)?);
                traces.robust = Some(tr);
            }
        }
    }

    let (re_bias, re_drift) = if let Some(tr) = &traces.robust {
        let bias: Vec<f64> = tr.iter().map(|o| o.x_c_hat.bias_m).collect();
        let drift: Vec<f64> = tr.iter().map(|o| o.x_c_hat.drift_mps).collect();
        (
            relative_error(&bias, &truth_bias, RE_GUARD_BIAS_M)?,
            relative_error(&drift, &truth_drift, RE_GUARD_DRIFT_MPS)?,
        )
    } else {
        (Vec::new(), Vec::new())
    };

    let final_epoch = data.measurements.last().map(|m| m.k).unwrap_or(0);
    let final_s_pr = cfg.attack.signal_at(final_epoch, cfg.dt_s).0;

    let report = MetricsReport {
        label: cfg.label.clone(),
        n_epochs: data.measurements.len(),
        estimators,
        re_bias,
        re_drift,
        attack_compliant: compliance_check(final_s_pr),
    };

    write_outputs(cfg, &report, &traces)?;
    Ok(RunOutcome { report, traces })
}

fn metrics_for(name: &str, bias: &[f64], truth_bias: &[f64]) -> Result<EstimatorMetrics> {
    let max_abs = bias
        .iter()
        .zip(truth_bias)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0f64, f64::max);
    Ok(EstimatorMetrics {
        name: name.to_string(),
        rmse_bias_m: rmse(bias, truth_bias)?,
        max_abs_bias_err_m: max_abs,
    })
}

fn write_clock_trace(path: &Path, trace: &[ClockState]) -> Result<()> {
    let mut out = String::from("k,bias_m,drift_mps\n");
    for (k, x) in trace.iter().enumerate() {
        let _ = writeln!(out, "{k},{},{}", x.bias_m, x.drift_mps);
    }
    fs::write(path, out)?;
    Ok(())
}

fn write_outputs(cfg: &RunConfig, report: &MetricsReport, traces: &RunTraces) -> Result<()> {
    let dir = &cfg.out_dir;
    fs::create_dir_all(dir)?;
    write_clock_trace(&dir.join("trace_truth.csv"), &traces.truth)?;
    if let Some(tr) = &traces.kalman {
        write_clock_trace(&dir.join("trace_kalman.csv"), tr)?;
    }
    if let Some(tr) = &traces.luenberger {
        write_clock_trace(&dir.join("trace_luenberger.csv"), tr)?;
    }
    if let Some(tr) = &traces.robust {
        let mut out = String::from("k,bias_c_m,drift_c_mps,d_c1_m,d_c2_mps,innov_norm\n");
        for o in tr {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                o.k,
                o.x_c_hat.bias_m,
                o.x_c_hat.drift_mps,
                o.d_c_hat.x,
                o.d_c_hat.y,
                o.innovation.norm()
            );
        }
        fs::write(dir.join("trace_robust.csv"), out)?;
    }

    // Plot-ready figure files: baseline comparison and corrected estimates
    // against the ground truth, plus the relative-error traces.
    if traces.kalman.is_some() || traces.luenberger.is_some() {
        for (fname, pick) in [
            ("fig_bias_comparison.csv", 0usize),
            ("fig_drift_comparison.csv", 1usize),
        ] {
            let mut out = String::from("k,truth,kalman,luenberger\n");
            for k in 0..traces.truth.len() {
                let t = sel(&traces.truth[k], pick);
                let kal = traces.kalman.as_ref().map(|tr| sel(&tr[k], pick));
                let luen = traces.luenberger.as_ref().map(|tr| sel(&tr[k], pick));
                let _ = writeln!(out, "{k},{t},{},{}", opt(kal), opt(luen));
            }
            fs::write(dir.join(fname), out)?;
        }
    }
    if let Some(tr) = &traces.robust {
        for (fname, pick) in [
            ("fig_bias_corrected.csv", 0usize),
            ("fig_drift_corrected.csv", 1usize),
        ] {
            let mut out = String::from("k,truth,robust\n");
            for k in 0..traces.truth.len() {
                let _ = writeln!(
                    out,
                    "{k},{},{}",
                    sel(&traces.truth[k], pick),
                    sel(&tr[k].x_c_hat, pick)
                );
            }
            fs::write(dir.join(fname), out)?;
        }
        let mut out = String::from("k,re_bias,re_drift\n");
        for k in 0..report.re_bias.len() {
            let _ = writeln!(out, "{k},{},{}", report.re_bias[k], report.re_drift[k]);
        }
        fs::write(dir.join("fig_relative_error.csv"), out)?;
    }

    let (_, csv) = crate::metrics::compare_table(std::slice::from_ref(report))?;
    fs::write(dir.join("metrics.csv"), csv)?;
    Ok(())
}

fn sel(x: &ClockState, pick: usize) -> f64 {
    if pick == 0 {
        x.bias_m
    } else {
        x.drift_mps
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Write the synthetic scenario produced by the configuration to CSV files.
pub fn synth_to_files(cfg: &RunConfig) -> Result<()> {
    let sc = match &cfg.scenario {
        ScenarioSource::Synth(sc) => sc,
        ScenarioSource::Files { .. } => {
            return Err(Error::Config("synth requires a synthetic scenario config".into()))
        }
    };
    let scn = synth_scenario(sc)?;
    fs::create_dir_all(&cfg.out_dir)?;
    fs::write(
        cfg.out_dir.join("measurements.csv"),
        emit_measurements_csv(&scn.measurements, &scn.satellites),
    )?;
    fs::write(cfg.out_dir.join("ephemeris.csv"), emit_ephemeris_csv(&scn.satellites))?;
    fs::write(cfg.out_dir.join("receiver.csv"), emit_receiver_csv(&scn.receiver.position_m))?;
    write_clock_trace(&cfg.out_dir.join("truth_clock.csv"), &scn.receiver.clock)?;
    Ok(())
}

/// Inject the configured attack into a measurements CSV, writing the spoofed
/// stream in the same format.
pub fn inject_to_file(cfg: &RunConfig, input: &Path, output: &Path) -> Result<()> {
    // Reuse the measurement parser by pairing rows back up per epoch.
    let text = fs::read_to_string(input)?;
    let display = input.display().to_string();
    let mut out = String::new();
    for (idx, raw) in text.lines().enumerate() {
        let lineno = idx + 1;
        let line = raw.trim();
        if idx == 0 {
            if line != crate::scenario::MEASUREMENTS_HEADER {
                return Err(Error::Parse {
                    path: display,
                    line: lineno,
                    msg: format!("expected header {:?}", crate::scenario::MEASUREMENTS_HEADER),
                });
            }
            out.push_str(line);
            out.push('\n');
            continue;
        }
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 4 {
            return Err(Error::Parse {
                path: display,
                line: lineno,
                msg: format!("expected 4 fields, got {}", fields.len()),
            });
        }
        let k: usize = fields[0].trim().parse().map_err(|_| Error::Parse {
            path: display.clone(),
            line: lineno,
            msg: format!("bad epoch {:?}", fields[0]),
        })?;
        let pr: f64 = fields[2].trim().parse().map_err(|_| Error::Parse {
            path: display.clone(),
            line: lineno,
            msg: format!("bad pseudorange {:?}", fields[2]),
        })?;
        let prr: f64 = fields[3].trim().parse().map_err(|_| Error::Parse {
            path: display.clone(),
            line: lineno,
            msg: format!("bad rate {:?}", fields[3]),
        })?;
        let (s_pr, s_prr) = cfg.attack.signal_at(k, cfg.dt_s);
        let _ = writeln!(out, "{},{},{},{}", k, fields[1].trim(), pr + s_pr, prr + s_prr);
    }
    fs::write(output, out)?;
    Ok(())
}

/// Run the scenario once per attack kind (clean control, Type I, Type II)
/// and produce the comparison table.
pub fn compare_runs(cfg: &RunConfig) -> Result<(String, Vec<MetricsReport>)> {
    let base_end = cfg.attack.end.max(match &cfg.scenario {
        ScenarioSource::Synth(sc) => sc.n_epochs.saturating_sub(1),
        ScenarioSource::Files { .. } => cfg.attack.end,
    });
    let magnitude = if cfg.attack.kind == AttackKind::TypeI && cfg.attack.magnitude_m != 0.0 {
        cfg.attack.magnitude_m
    } else {
        8000.0
    };
    let ramp = if cfg.attack.kind == AttackKind::TypeII && cfg.attack.ramp_rate_mps != 0.0 {
        cfg.attack.ramp_rate_mps
    } else {
        25.0
    };
    let alpha = if cfg.attack.kind == AttackKind::None { 30 } else { cfg.attack.alpha };

    let mut reports = Vec::new();
    for (label, attack) in [
        ("clean".to_string(), AttackSpec::none()),
        ("type1".to_string(), AttackSpec::type1(alpha, base_end, magnitude)?),
        ("type2".to_string(), AttackSpec::type2(alpha, base_end, ramp)?),
    ] {
        let mut sub = cfg.clone();
        sub.label = label.clone();
        sub.attack = attack;
        sub.out_dir = cfg.out_dir.join(&label);
        reports.push(run_scenario(&sub)?.report);
    }
    let (text, csv) = crate::metrics::compare_table(&reports)?;
    fs::create_dir_all(&cfg.out_dir)?;
    fs::write(cfg.out_dir.join("compare.csv"), csv)?;
    Ok((text, reports))
}

/// Offline stage: design gains for the configured plant and store them.
pub fn design_gains_to_file(
    n_sats: usize,
    dt_s: f64,
    lmi: &LmiOptions,
    path: &Path,
) -> Result<(GainPair, f64, usize)> {
    let a = build_state_transition(dt_s)?;
    let c = build_observation_matrix(n_sats)?;
    let cert = solve_feasibility(&a, &c, lmi.margin, lmi.max_iter, lmi.tol)?;
    let gains = extract_gains(&cert.vars)?;
    let radius = crate::lmi::verify_stability(&gains, &a, &c);
    save_gains(path, &gains, n_sats, dt_s, cert.margin, radius)?;
    Ok((gains, radius, cert.iterations))
}
