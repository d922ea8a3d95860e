//! Scenario execution, calibration and trace/report output.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use serde::{Deserialize, Serialize};

use crate::attacks::{find_scenario, install_attack, PlantKind, Scenario};
use crate::control::{
    controller_lti_model, lqg_controller_model, lqr_gain, pid_lti_model, LqrWeights, LtiController, PidConfig,
    PidState,
};
use crate::error::{Error, Result};
use crate::estimation::steady_state_gain;
use crate::ids::{
    baseline_and_margin, fit_gain_line, threshold_slope, ContextMode, ControllerModel, DetectorConfig, Diagnosis,
    Ids, IdsModels, Label, WindowRecord,
};
use crate::netsim::{
    ActuatorNode, ActuatorPolicy, BusSchedule, ControlLaw, ControllerNode, CurrentChannel, Network, PeriodRecord,
    PlantProcess, Quantizer,
};
use crate::plants::{dc_current_model, dc_motor_model, lane_keeping_discrete, LoadDisturbance, VehicleParams, LANE_KEEPING_TS};
use crate::statespace::{Mat, SimRng};

/// Speed set-point of the motor loop, encoder counts per window.
pub const DC_REFERENCE: f64 = 100.0;
/// Measurement-noise variance assumed for the controller output. The
/// command is computed exactly, so this only keeps the filter well posed.
pub const CONTROLLER_OUTPUT_VARIANCE: f64 = 1e-6;
pub const LK_CONTROLLER_OUTPUT_VARIANCE: f64 = 1e-10;
/// Windows skipped at the start of calibration runs.
const CALIBRATION_SETTLE: usize = 40;

pub const TRACE_FILE: &str = "trace.csv";
pub const REPORT_FILE: &str = "report.json";
pub const CALIBRATION_FILE: &str = "calibration.json";

pub const TRACE_COLUMNS: [&str; 15] = [
    "t",
    "reference",
    "y_true",
    "y_reported",
    "u_applied",
    "i_dc",
    "r_speed_pow",
    "r_ctrl_pow",
    "r_dc_pow",
    "g_speed",
    "f_speed",
    "f_ctrl",
    "f_dc_load",
    "f_dc_res",
    "label",
];

/// The assembled loop and its detector.
pub struct Assembly {
    pub network: Network,
    pub ids: Ids,
    pub reference: f64,
}

fn rng_for(seed: u64) -> SimRng {
    SimRng::seed_from_u64(seed)
}

/// Motor loop started at its operating point: speed at the set-point,
/// integral pre-loaded with the holding command.
pub fn dc_motor_loop(scenario: &Scenario, detector: &DetectorConfig) -> Result<Assembly> {
    let model = dc_motor_model();
    let pid = PidConfig::dc_motor();
    let schedule = BusSchedule::with_period(model.ts());
    let policy = ActuatorPolicy::for_period(model.ts());
    let u_hold = (1.0 - model.a()[0]) * DC_REFERENCE / model.b()[0];
    let current = dc_current_model();
    let i0 = current.equilibrium(&Mat::scalar(u_hold))?;
    let substeps = schedule.ticks_per_period();
    let plant = PlantProcess::new(model.clone(), Mat::scalar(DC_REFERENCE), substeps)?
        .with_current(CurrentChannel::new(current.clone(), i0, substeps)?)
        .with_load(scenario.load);
    let controller = ControllerNode::new(ControlLaw::Pid {
        config: pid,
        state: PidState {
            integral: u_hold,
            prev_error: 0.0,
        },
        reference: DC_REFERENCE,
    });
    let actuator = ActuatorNode::new(policy, Some(Quantizer::PWM8), Mat::scalar(Quantizer::PWM8.apply(u_hold)));
    let mut network = Network::new(schedule, plant, controller, actuator, rng_for(scenario.seed))?;
    if let Some(spec) = &scenario.attack {
        install_attack(&mut network, spec)?;
    }
    let controller_model = match detector.controller_model {
        ControllerModel::Derived => pid_lti_model(&pid, 0.0, CONTROLLER_OUTPUT_VARIANCE)?,
        ControllerModel::Published => controller_lti_model(),
    };
    let ids = Ids::new(
        detector.clone(),
        IdsModels {
            plant: model,
            controller: controller_model,
            current: Some(current),
            schedule,
            policy,
            quantizer: Some(Quantizer::PWM8),
            reference: Mat::scalar(DC_REFERENCE),
        },
    )?;
    Ok(Assembly {
        network,
        ids,
        reference: DC_REFERENCE,
    })
}

/// Lane keeping with an observer-based LQR steering controller.
pub fn lane_keeping_loop(scenario: &Scenario, detector: &DetectorConfig, params: &VehicleParams) -> Result<Assembly> {
    let plant_model = lane_keeping_discrete(params, LANE_KEEPING_TS)?;
    let (k, _) = lqr_gain(plant_model.a(), plant_model.b(), &LqrWeights::lane_keeping(), 100_000, 1e-12)?;
    let (l, _) = steady_state_gain(&plant_model, 100_000, 1e-14)?;
    let n = plant_model.n_states();
    let lqg = lqg_controller_model(
        &plant_model,
        &k,
        &l,
        Mat::zeros(n, n),
        Mat::scalar(LK_CONTROLLER_OUTPUT_VARIANCE),
    )?;
    let schedule = BusSchedule::with_period(plant_model.ts());
    let policy = ActuatorPolicy::for_period(plant_model.ts());
    let plant = PlantProcess::new(plant_model.clone(), Mat::zeros(n, 1), schedule.ticks_per_period())?;
    let controller = ControllerNode::new(ControlLaw::Lti {
        controller: LtiController::new(lqg.clone(), Mat::zeros(n, 1))?,
        reference: Mat::zeros(2, 1),
    });
    let actuator = ActuatorNode::new(policy, None, Mat::zeros(1, 1));
    let mut network = Network::new(schedule, plant, controller, actuator, rng_for(scenario.seed))?;
    if let Some(spec) = &scenario.attack {
        install_attack(&mut network, spec)?;
    }
    let ids = Ids::new(
        detector.clone(),
        IdsModels {
            plant: plant_model,
            controller: lqg,
            current: None,
            schedule,
            policy,
            quantizer: None,
            reference: Mat::zeros(2, 1),
        },
    )?;
    Ok(Assembly {
        network,
        ids,
        reference: 0.0,
    })
}

pub fn build_loop(scenario: &Scenario, detector: &DetectorConfig) -> Result<Assembly> {
    scenario.validate()?;
    match scenario.plant {
        PlantKind::DcMotor => dc_motor_loop(scenario, detector),
        PlantKind::LaneKeeping => lane_keeping_loop(scenario, detector, &VehicleParams::default()),
    }
}

/// Default detector settings for a plant.
pub fn default_detector(plant: PlantKind) -> DetectorConfig {
    match plant {
        PlantKind::DcMotor => DetectorConfig::dc_motor(),
        PlantKind::LaneKeeping => DetectorConfig::lane_keeping(),
    }
}

/// Number of sampling periods in `duration` seconds.
pub fn period_count(duration: f64, ts: f64) -> usize {
    (duration / ts - 1e-9).ceil().max(1.0) as usize
}

#[derive(Debug, Clone)]
pub struct SimOutput {
    pub reference: f64,
    pub periods: Vec<PeriodRecord>,
    pub windows: Vec<WindowRecord>,
}

/// Run a scenario without touching the file system.
pub fn simulate(scenario: &Scenario, detector: &DetectorConfig) -> Result<SimOutput> {
    let Assembly {
        mut network,
        mut ids,
        reference,
    } = build_loop(scenario, detector)?;
    network = network.without_trace();
    let n = period_count(scenario.duration, network.schedule().ts());
    let mut periods = Vec::with_capacity(n);
    let mut windows = Vec::with_capacity(n);
    for _ in 0..n {
        periods.push(network.run_period(&mut ids)?);
        windows.push(ids.evaluate_window()?);
    }
    Ok(SimOutput {
        reference,
        periods,
        windows,
    })
}

/// C-style `%.<sig>g`.
pub fn format_sig(x: f64, sig: usize) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return if x.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    let sci = format!("{:.*e}", sig - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("exponent");
    let trim = |s: &str| -> String {
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s.to_string()
        }
    };
    if exp < -4 || exp >= sig as i32 {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{}{:02}", trim(mantissa), sign, exp.abs())
    } else {
        let decimals = (sig as i32 - 1 - exp).max(0) as usize;
        trim(&format!("{:.*}", decimals, x))
    }
}

fn real(x: f64) -> String {
    format_sig(x, 9)
}

fn flag(b: bool) -> &'static str {
    if b {
        "1"
    } else {
        "0"
    }
}

pub fn write_trace_csv<W: Write>(out: W, sim: &SimOutput) -> Result<()> {
    let mut w = BufWriter::new(out);
    writeln!(w, "{}", TRACE_COLUMNS.join(","))?;
    for (p, win) in sim.periods.iter().zip(&sim.windows) {
        let y_rep = p.y_reported.as_ref().map_or(f64::NAN, |v| v[0]);
        let cells = [
            real(p.t),
            real(sim.reference),
            real(p.y_true[0]),
            real(y_rep),
            real(p.u_applied[0]),
            real(win.i_dc.unwrap_or(f64::NAN)),
            real(win.r_speed_pow),
            real(win.r_ctrl_pow),
            real(win.r_dc_pow),
            real(win.g_speed),
            flag(win.flags.f_speed).into(),
            flag(win.flags.f_ctrl).into(),
            flag(win.flags.f_dc_load).into(),
            flag(win.flags.f_dc_res).into(),
            win.label.as_str().into(),
        ];
        writeln!(w, "{}", cells.join(","))?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationConstants {
    pub p_fa: f64,
    pub a: f64,
    pub b: f64,
    pub d: f64,
    pub e: f64,
    pub dc_baseline: f64,
    pub dc_load_margin: f64,
}

impl CalibrationConstants {
    pub fn from_detector(cfg: &DetectorConfig, b_default: f64) -> Self {
        Self {
            p_fa: cfg.p_fa,
            a: cfg.a,
            b: cfg.b.unwrap_or(b_default),
            d: cfg.d,
            e: cfg.e,
            dc_baseline: cfg.dc_baseline,
            dc_load_margin: cfg.dc_load_margin,
        }
    }

    pub fn apply_to(&self, cfg: &mut DetectorConfig) {
        cfg.a = self.a;
        cfg.b = Some(self.b);
        cfg.d = self.d;
        cfg.e = self.e;
        cfg.dc_baseline = self.dc_baseline;
        cfg.dc_load_margin = self.dc_load_margin;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub scenario_id: String,
    pub seed: u64,
    pub duration: f64,
    pub detector_mode: ContextMode,
    pub windows: Vec<Diagnosis>,
    pub first_detection_time: Option<f64>,
    pub final_classification: Label,
    pub calibration_constants: CalibrationConstants,
    pub trace_files: Vec<String>,
}

/// Start and end of the attack, or of the load for load-only scenarios.
pub fn evaluation_window(scenario: &Scenario) -> Option<(f64, f64)> {
    let end = scenario.duration;
    if let Some(a) = &scenario.attack {
        return Some((a.start, a.stop.unwrap_or(end).min(end)));
    }
    scenario
        .load
        .map(|l| (l.t_on, l.t_off.unwrap_or(end).min(end)))
}

/// Most frequent label among windows starting inside `[start, end)`.
pub fn majority_label(windows: &[WindowRecord], start: f64, end: f64) -> Option<Label> {
    let mut counts: BTreeMap<Label, usize> = BTreeMap::new();
    for w in windows.iter().filter(|w| w.t >= start - 1e-9 && w.t < end - 1e-9) {
        *counts.entry(w.label).or_default() += 1;
    }
    counts
        .into_iter()
        .max_by(|a, b| a.1.cmp(&b.1).then(b.0.cmp(&a.0)))
        .map(|(l, _)| l)
}

/// First window with a residual flag, not earlier than the attack start.
pub fn first_detection(windows: &[WindowRecord], not_before: f64) -> Option<f64> {
    windows
        .iter()
        .find(|w| w.t >= not_before - 1e-9 && w.flags.any_residual())
        .map(|w| w.t)
}

pub fn build_report(scenario: &Scenario, detector: &DetectorConfig, sim: &SimOutput, files: Vec<String>) -> RunReport {
    let ts = sim.windows.get(1).map_or(0.0, |w| w.t) - sim.windows.first().map_or(0.0, |w| w.t);
    let dof = sim.windows.iter().find_map(|w| w.y_observed.as_ref().map(|y| y.len())).unwrap_or(1);
    let b_default = crate::estimation::chi2_quantile(1.0 - detector.p_fa, dof as u32).unwrap_or(f64::NAN);
    let (start, end) = evaluation_window(scenario).unwrap_or((0.0, scenario.duration));
    let not_before = scenario.attack.as_ref().map_or(0.0, |a| a.start);
    RunReport {
        scenario_id: scenario.id.clone(),
        seed: scenario.seed,
        duration: scenario.duration,
        detector_mode: detector.context_mode,
        windows: sim
            .windows
            .iter()
            .map(|w| Diagnosis {
                label: w.label,
                window: (w.t, w.t + ts),
                flags: w.flags,
            })
            .collect(),
        first_detection_time: first_detection(&sim.windows, not_before),
        final_classification: majority_label(&sim.windows, start, end).unwrap_or(Label::Nominal),
        calibration_constants: CalibrationConstants::from_detector(detector, b_default),
        trace_files: files,
    }
}

/// Everything a single run needs.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub scenario: Scenario,
    pub detector: DetectorConfig,
    pub out_dir: PathBuf,
}

/// Inline scenario or a catalog id in a config document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ScenarioRef {
    Id(String),
    Inline(Scenario),
}

/// JSON run configuration; every key is optional and unknown keys fail.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    #[serde(default)]
    pub scenario: Option<ScenarioRef>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub duration: Option<f64>,
    /// Detector fields overriding the plant's defaults.
    #[serde(default)]
    pub detector: Option<serde_json::Map<String, serde_json::Value>>,
    #[serde(default)]
    pub calibration: Option<CalibrationConstants>,
    #[serde(default)]
    pub out: Option<PathBuf>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    /// Plant defaults with the document's `detector` and `calibration`
    /// entries laid over them.
    pub fn detector_for(&self, plant: PlantKind) -> Result<DetectorConfig> {
        let mut detector = default_detector(plant);
        if let Some(over) = &self.detector {
            let mut base = match serde_json::to_value(&detector) {
                Ok(serde_json::Value::Object(m)) => m,
                _ => return Err(Error::Config("detector defaults are not serializable".into())),
            };
            base.extend(over.clone());
            detector = serde_json::from_value(serde_json::Value::Object(base))
                .map_err(|e| Error::Config(format!("detector: {e}")))?;
        }
        if let Some(cal) = &self.calibration {
            cal.apply_to(&mut detector);
        }
        Ok(detector)
    }
}

pub fn resolve_scenario(r: &ScenarioRef) -> Result<Scenario> {
    match r {
        ScenarioRef::Id(id) => find_scenario(id),
        ScenarioRef::Inline(s) => {
            s.validate()?;
            Ok(s.clone())
        }
    }
}

pub fn load_calibration(path: &Path) -> Result<CalibrationConstants> {
    let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::Config(format!("cannot create output directory {}: {e}", dir.display())))
}

/// Simulate, then write `trace.csv` and `report.json` under `out_dir`.
pub fn execute(cfg: &RunConfig) -> Result<RunReport> {
    cfg.scenario.validate()?;
    cfg.detector.validate()?;
    ensure_dir(&cfg.out_dir)?;
    let sim = simulate(&cfg.scenario, &cfg.detector)?;
    let trace_path = cfg.out_dir.join(TRACE_FILE);
    let file = fs::File::create(&trace_path)
        .map_err(|e| Error::Config(format!("cannot write {}: {e}", trace_path.display())))?;
    write_trace_csv(file, &sim)?;
    let report = build_report(&cfg.scenario, &cfg.detector, &sim, vec![trace_path.display().to_string()]);
    let report_path = cfg.out_dir.join(REPORT_FILE);
    let text = serde_json::to_string_pretty(&report).map_err(|e| Error::Config(e.to_string()))?;
    fs::write(&report_path, text + "\n")
        .map_err(|e| Error::Config(format!("cannot write {}: {e}", report_path.display())))?;
    Ok(report)
}

/// Run several configurations on separate threads.
pub fn batch(configs: &[RunConfig]) -> Vec<Result<RunReport>> {
    std::thread::scope(|s| {
        let handles: Vec<_> = configs.iter().map(|c| s.spawn(move || execute(c))).collect();
        handles
            .into_iter()
            .map(|h| h.join().unwrap_or_else(|_| Err(Error::Config("worker thread panicked".into()))))
            .collect()
    })
}

/// Speed drag of each step of the calibration staircase.
pub const STAIRCASE_DRAGS: [f64; 6] = [0.0, -0.2, -0.4, -0.6, -0.8, -1.0];
const STAIRCASE_STEP_SECONDS: f64 = 10.0;

fn scaled_load(drag: f64, t_on: f64) -> Option<LoadDisturbance> {
    if drag == 0.0 {
        return None;
    }
    let reference = LoadDisturbance::default_from(t_on);
    let k = drag / reference.speed_drag;
    Some(LoadDisturbance {
        speed_drag: drag,
        current_rise: k * reference.current_rise,
        ..reference
    })
}

fn settled(windows: &[WindowRecord]) -> &[WindowRecord] {
    &windows[CALIBRATION_SETTLE.min(windows.len())..]
}

/// Seeded calibration of the motor detector.
///
/// 1. A nominal run fixes the current baseline and the load margin.
/// 2. A load staircase gives `(context, effective input gain)` pairs for
///    the least-squares fit of `d` and `e`.
/// 3. A load-only run gives the threshold slope `a` for `b` equal to the
///    chi-squared threshold.
pub fn calibrate_dc_motor(seed: u64, p_fa: f64) -> Result<CalibrationConstants> {
    calibrate_dc_motor_from(
        &DetectorConfig {
            p_fa,
            ..DetectorConfig::dc_motor()
        },
        seed,
    )
}

/// Calibration keeping the non-calibrated settings of `detector` (false-alarm
/// target, context smoothing, debounce).
pub fn calibrate_dc_motor_from(detector: &DetectorConfig, seed: u64) -> Result<CalibrationConstants> {
    let p_fa = detector.p_fa;
    let base = DetectorConfig {
        context_mode: ContextMode::Off,
        ..detector.clone()
    };
    base.validate()?;
    let nominal = Scenario {
        id: "calibration-nominal".into(),
        plant: PlantKind::DcMotor,
        description: String::new(),
        attack: None,
        load: None,
        duration: 60.0,
        seed,
    };
    let sim = simulate(&nominal, &base)?;
    let ctx: Vec<f64> = settled(&sim.windows).iter().filter_map(|w| w.i_dc).collect();
    let (dc_baseline, dc_load_margin) = baseline_and_margin(&ctx, 4.0)?;

    // Staircase: one network, load stepped every few seconds.
    let mut asm = dc_motor_loop(&nominal, &base)?;
    asm.network = asm.network.without_trace();
    let model = dc_motor_model();
    let a_nom = model.a()[0];
    let per_step = period_count(STAIRCASE_STEP_SECONDS, model.ts());
    let mut samples = Vec::new();
    for (i, drag) in STAIRCASE_DRAGS.iter().enumerate() {
        let t_on = asm.network.time();
        asm.network.plant_mut().set_load(scaled_load(*drag, t_on));
        let mut win: Vec<WindowRecord> = Vec::with_capacity(per_step);
        for _ in 0..per_step {
            asm.network.run_period(&mut asm.ids)?;
            win.push(asm.ids.evaluate_window()?);
        }
        let skip = if i == 0 { CALIBRATION_SETTLE } else { CALIBRATION_SETTLE / 2 };
        for pair in win[skip.min(win.len())..].windows(2) {
            let (w0, w1) = (&pair[0], &pair[1]);
            if let (Some(y0), Some(y1), Some(i_dc)) = (&w0.y_observed, &w1.y_observed, w0.i_dc) {
                let u = w0.u_attributed[0];
                if u > 1.0 {
                    samples.push((i_dc, (y1[0] - a_nom * y0[0]) / u));
                }
            }
        }
    }
    let (d, e) = fit_gain_line(&samples)?;
    let d = d.min(0.0);

    let b = crate::estimation::chi2_quantile(1.0 - p_fa, 1)?;
    let loaded = Scenario {
        id: "calibration-load".into(),
        load: Some(LoadDisturbance::default_from(5.0)),
        seed: seed.wrapping_add(1),
        ..nominal
    };
    let sim = simulate(&loaded, &base)?;
    let pairs: Vec<(f64, f64)> = settled(&sim.windows)
        .iter()
        .filter(|w| w.t >= 5.0)
        .filter_map(|w| w.i_dc.map(|i| (i - dc_baseline, w.r_speed_pow)))
        .filter(|&(excess, _)| excess > dc_load_margin)
        .collect();
    let a = threshold_slope(&pairs, b, 0.2);
    let out = CalibrationConstants {
        p_fa,
        a,
        b,
        d,
        e,
        dc_baseline,
        dc_load_margin,
    };
    if [a, b, d, e, dc_baseline, dc_load_margin].iter().any(|v| !v.is_finite()) {
        return Err(Error::NoConvergence {
            what: "calibration produced non-finite constants".into(),
            iters: 0,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sig_format_matches_c() {
        assert_eq!(format_sig(0.0, 9), "0");
        assert_eq!(format_sig(100.0, 9), "100");
        assert_eq!(format_sig(0.05, 9), "0.05");
        assert_eq!(format_sig(1.0 / 3.0, 9), "0.333333333");
        assert_eq!(format_sig(123456789.0, 9), "123456789");
        assert_eq!(format_sig(1234567890.0, 9), "1.23456789e+09");
        assert_eq!(format_sig(1.5e-7, 9), "1.5e-07");
        assert_eq!(format_sig(-2.5, 9), "-2.5");
        assert_eq!(format_sig(0.0001, 9), "0.0001");
        assert_eq!(format_sig(9.9999999999, 9), "10");
    }

    #[test]
    fn period_counting() {
        assert_eq!(period_count(30.0, 0.05), 600);
        assert_eq!(period_count(0.01, 0.05), 1);
    }

    #[test]
    fn majority_prefers_most_frequent() {
        let mk = |t: f64, label| WindowRecord {
            window: 0,
            t,
            i_dc: None,
            r_speed_pow: 0.0,
            r_ctrl_pow: 0.0,
            r_dc_pow: 0.0,
            g_speed: 0.0,
            g_ctrl: 0.0,
            g_dc: 0.0,
            raw: Default::default(),
            flags: Default::default(),
            label,
            u_attributed: vec![],
            y_observed: None,
            inhibited: false,
        };
        let w = vec![
            mk(0.0, Label::Nominal),
            mk(1.0, Label::ExternalController),
            mk(2.0, Label::ExternalController),
            mk(3.0, Label::Unclassified),
        ];
        assert_eq!(majority_label(&w, 1.0, 4.0), Some(Label::ExternalController));
        assert_eq!(majority_label(&w, 10.0, 20.0), None);
    }
}
