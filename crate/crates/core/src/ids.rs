//! Network-attached intrusion detector.
//!
//! The detector only sees bus frames. It runs three Kalman estimators (the
//! plant, the controller and the motor-current channel), thresholds their
//! residual powers once per sampling period and maps the resulting flag
//! pattern to an attack class.

use std::collections::VecDeque;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimation::{residual_power, Chi2Detector, InitialEstimate, KalmanFilter, STARTUP_INHIBIT_STEPS};
use crate::netsim::{msg, ActuatorPolicy, BusSchedule, BusTap, FrameView, Quantizer};
use crate::statespace::{LtiModel, Mat, Vector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Attribution {
    /// The command sent in the legitimate slot drives the plant estimator.
    ScheduledSlot,
    /// Replay the actuator's rejection rule over every command seen and use
    /// the tick-weighted mean of what it would have held.
    AsApplied,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ContextMode {
    Off,
    AdaptiveThreshold,
    AdaptiveEstimation,
}

impl std::str::FromStr for ContextMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "off" => Ok(Self::Off),
            "adaptive-threshold" => Ok(Self::AdaptiveThreshold),
            "adaptive-estimation" => Ok(Self::AdaptiveEstimation),
            _ => Err(Error::Config(format!(
                "unknown detector mode '{s}' (expected off, adaptive-threshold or adaptive-estimation)"
            ))),
        }
    }
}

impl std::str::FromStr for Attribution {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "scheduled-slot" => Ok(Self::ScheduledSlot),
            "as-applied" => Ok(Self::AsApplied),
            _ => Err(Error::Config(format!(
                "unknown attribution '{s}' (expected scheduled-slot or as-applied)"
            ))),
        }
    }
}

/// Which controller model the detector tracks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ControllerModel {
    /// Rebuilt from the PID gains and sampling period.
    Derived,
    /// The identified first-order model with its own noise levels.
    Published,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DetectorConfig {
    pub p_fa: f64,
    pub attribution: Attribution,
    pub context_mode: ContextMode,
    /// Threshold slope on the current drawn above `dc_baseline`.
    pub a: f64,
    /// Threshold intercept; `None` uses the chi-squared threshold.
    pub b: Option<f64>,
    /// Input-gain slope on the current context (non-positive).
    pub d: f64,
    /// Input-gain intercept.
    pub e: f64,
    pub debounce_k: usize,
    pub debounce_n: usize,
    /// Mean current context in nominal operation, amperes.
    pub dc_baseline: f64,
    /// Current above the baseline that signals a load, amperes.
    pub dc_load_margin: f64,
    /// Weight of a new current sample in the exponentially smoothed context.
    pub context_smoothing: f64,
    pub controller_model: ControllerModel,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self::dc_motor()
    }
}

impl DetectorConfig {
    /// Motor defaults, produced by `cps-ids calibrate --seed 2024`.
    pub fn dc_motor() -> Self {
        Self {
            p_fa: 1e-3,
            attribution: Attribution::ScheduledSlot,
            context_mode: ContextMode::AdaptiveEstimation,
            a: 67.35,
            b: None,
            d: -0.003263,
            e: 0.1284,
            debounce_k: 3,
            debounce_n: 5,
            dc_baseline: 10.329,
            dc_load_margin: 0.5631,
            context_smoothing: 0.2,
            controller_model: ControllerModel::Derived,
        }
    }

    pub fn lane_keeping() -> Self {
        Self {
            p_fa: 1e-6,
            attribution: Attribution::AsApplied,
            context_mode: ContextMode::Off,
            ..Self::dc_motor()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.p_fa > 0.0 && self.p_fa < 1.0) {
            return Err(Error::Config(format!("p_fa must lie in (0, 1), got {}", self.p_fa)));
        }
        if !(self.d <= 0.0) {
            return Err(Error::Config(format!("d must be <= 0, got {}", self.d)));
        }
        if !(self.debounce_k >= 1 && self.debounce_k <= self.debounce_n) {
            return Err(Error::Config(format!(
                "debounce needs 1 <= k <= N, got k={} N={}",
                self.debounce_k, self.debounce_n
            )));
        }
        if !(self.context_smoothing > 0.0 && self.context_smoothing <= 1.0) {
            return Err(Error::Config("context_smoothing must lie in (0, 1]".into()));
        }
        if self.dc_load_margin.is_nan() || self.a.is_nan() || self.e.is_nan() {
            return Err(Error::Config("detector parameters must not be NaN".into()));
        }
        Ok(())
    }
}

/// Input gain of the plant model for a given current context, clamped to
/// `(0, nominal]`.
pub fn adaptive_b(config: &DetectorConfig, i_dc: f64, nominal: f64) -> f64 {
    let b = config.d * i_dc.max(0.0) + config.e;
    b.clamp(nominal * 1e-3, nominal)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct FlagVector {
    pub f_speed: bool,
    pub f_ctrl: bool,
    pub f_dc_load: bool,
    pub f_dc_res: bool,
}

impl FlagVector {
    pub const fn new(f_speed: bool, f_ctrl: bool, f_dc_load: bool, f_dc_res: bool) -> Self {
        Self {
            f_speed,
            f_ctrl,
            f_dc_load,
            f_dc_res,
        }
    }

    pub fn any_residual(&self) -> bool {
        self.f_speed || self.f_ctrl || self.f_dc_res
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Label {
    #[serde(rename = "nominal")]
    Nominal,
    #[serde(rename = "load only")]
    LoadOnly,
    #[serde(rename = "internal sensor or internal actuator attack w/o load")]
    InternalSensorOrActuator,
    #[serde(rename = "internal sensor or internal actuator attack w/ load")]
    InternalSensorOrActuatorLoaded,
    #[serde(rename = "external sensor attack w/o load")]
    ExternalSensor,
    #[serde(rename = "external sensor attack w/ load")]
    ExternalSensorLoaded,
    #[serde(rename = "internal controller attack w/o load")]
    InternalController,
    #[serde(rename = "internal controller attack w/ load")]
    InternalControllerLoaded,
    #[serde(rename = "external controller attack w/o load")]
    ExternalController,
    #[serde(rename = "external controller attack w/ load")]
    ExternalControllerLoaded,
    #[serde(rename = "unclassified anomaly")]
    Unclassified,
}

impl Label {
    pub fn as_str(&self) -> &'static str {
        match self {
            Label::Nominal => "nominal",
            Label::LoadOnly => "load only",
            Label::InternalSensorOrActuator => "internal sensor or internal actuator attack w/o load",
            Label::InternalSensorOrActuatorLoaded => "internal sensor or internal actuator attack w/ load",
            Label::ExternalSensor => "external sensor attack w/o load",
            Label::ExternalSensorLoaded => "external sensor attack w/ load",
            Label::InternalController => "internal controller attack w/o load",
            Label::InternalControllerLoaded => "internal controller attack w/ load",
            Label::ExternalController => "external controller attack w/o load",
            Label::ExternalControllerLoaded => "external controller attack w/ load",
            Label::Unclassified => "unclassified anomaly",
        }
    }

    pub fn is_attack(&self) -> bool {
        !matches!(self, Label::Nominal | Label::LoadOnly | Label::Unclassified)
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Flag pattern (speed, controller, load, current residual) of each class.
pub const CHARACTERIZATION: [(FlagVector, Label); 10] = [
    (FlagVector::new(true, false, false, false), Label::InternalSensorOrActuator),
    (FlagVector::new(true, false, true, false), Label::InternalSensorOrActuatorLoaded),
    (FlagVector::new(false, true, false, true), Label::ExternalSensor),
    (FlagVector::new(false, true, true, true), Label::ExternalSensorLoaded),
    (FlagVector::new(false, true, false, false), Label::InternalController),
    (FlagVector::new(true, true, true, false), Label::InternalControllerLoaded),
    (FlagVector::new(true, true, false, true), Label::ExternalController),
    (FlagVector::new(true, true, true, true), Label::ExternalControllerLoaded),
    (FlagVector::new(false, false, false, false), Label::Nominal),
    (FlagVector::new(false, false, true, false), Label::LoadOnly),
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Diagnosis {
    pub label: Label,
    /// Evaluation window `[start, end)` in seconds.
    pub window: (f64, f64),
    pub flags: FlagVector,
}

pub fn classify_flags(flags: FlagVector) -> Label {
    CHARACTERIZATION
        .iter()
        .find(|(f, _)| *f == flags)
        .map(|(_, l)| *l)
        .unwrap_or(Label::Unclassified)
}

pub fn classify(flags: FlagVector, window: (f64, f64)) -> Diagnosis {
    Diagnosis {
        label: classify_flags(flags),
        window,
        flags,
    }
}

/// k-of-N persistence filter.
#[derive(Debug, Clone)]
pub struct Debouncer {
    k: usize,
    n: usize,
    history: VecDeque<bool>,
}

impl Debouncer {
    pub fn new(k: usize, n: usize) -> Result<Self> {
        if !(1 <= k && k <= n) {
            return Err(Error::Config(format!("debounce needs 1 <= k <= N, got k={k} N={n}")));
        }
        Ok(Self {
            k,
            n,
            history: VecDeque::with_capacity(n),
        })
    }

    pub fn push(&mut self, raw: bool) -> bool {
        if self.history.len() == self.n {
            self.history.pop_front();
        }
        self.history.push_back(raw);
        self.history.iter().filter(|&&b| b).count() >= self.k
    }
}

/// What the detector knows about the loop it watches. All of it is design
/// information; none of it is read from the running nodes.
#[derive(Debug, Clone)]
pub struct IdsModels {
    pub plant: LtiModel,
    /// Controller as an LTI system from tracking error to command.
    pub controller: LtiModel,
    pub current: Option<LtiModel>,
    pub schedule: BusSchedule,
    pub policy: ActuatorPolicy,
    pub quantizer: Option<Quantizer>,
    pub reference: Vector,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowRecord {
    pub window: u64,
    pub t: f64,
    pub i_dc: Option<f64>,
    pub r_speed_pow: f64,
    pub r_ctrl_pow: f64,
    pub r_dc_pow: f64,
    pub g_speed: f64,
    pub g_ctrl: f64,
    pub g_dc: f64,
    /// Threshold comparisons before persistence filtering.
    pub raw: FlagVector,
    pub flags: FlagVector,
    pub label: Label,
    pub u_attributed: Vec<f64>,
    pub y_observed: Option<Vec<f64>>,
    pub inhibited: bool,
}

#[derive(Debug, Clone, Default)]
struct PeriodFrames {
    sensor: Option<Vec<f64>>,
    actuation: Vec<(u64, Vec<f64>)>,
    current: Option<f64>,
    extra_sensor: u32,
}

#[derive(Debug, Clone)]
pub struct Ids {
    config: DetectorConfig,
    models: IdsModels,
    plant_kf: KalmanFilter,
    ctrl_kf: KalmanFilter,
    dc_kf: Option<KalmanFilter>,
    nominal_b: f64,
    g_plant: f64,
    g_ctrl: f64,
    g_dc: f64,
    frames: PeriodFrames,
    held: Option<Vector>,
    last_accepted: Option<u64>,
    prev_error: Option<Vector>,
    i_dc: Option<f64>,
    debounce: [Debouncer; 4],
    window: u64,
    ignored_frames: u64,
}

fn ensure_pending(kf: &mut KalmanFilter) -> Result<()> {
    if kf.predicted_output().is_none() {
        let z = Mat::zeros(kf.model().n_inputs(), 1);
        kf.predict(&z)?;
    }
    Ok(())
}

impl Ids {
    pub fn new(config: DetectorConfig, models: IdsModels) -> Result<Self> {
        config.validate()?;
        let plant = &models.plant;
        if models.controller.n_inputs() != plant.n_outputs() || models.controller.n_outputs() != plant.n_inputs() {
            return Err(Error::dims(
                "controller model",
                format!("{} inputs, {} outputs", plant.n_outputs(), plant.n_inputs()),
                format!("{} inputs, {} outputs", models.controller.n_inputs(), models.controller.n_outputs()),
            ));
        }
        if models.reference.shape() != (plant.n_outputs(), 1) {
            return Err(Error::dims("reference", plant.n_outputs(), models.reference.rows()));
        }
        let nominal_b = if plant.n_states() == 1 && plant.n_inputs() == 1 {
            plant.b()[0]
        } else {
            f64::NAN
        };
        if config.context_mode == ContextMode::AdaptiveEstimation && nominal_b.is_nan() {
            return Err(Error::Config("adaptive estimation needs a scalar plant model".into()));
        }
        let g_plant = Chi2Detector::new(config.p_fa, plant.n_outputs() as u32)?.threshold();
        let g_ctrl = Chi2Detector::new(config.p_fa, models.controller.n_outputs() as u32)?.threshold();
        let g_dc = Chi2Detector::new(config.p_fa, 1)?.threshold();
        let deb = || Debouncer::new(config.debounce_k, config.debounce_n);
        Ok(Self {
            plant_kf: KalmanFilter::new(models.plant.clone(), InitialEstimate::Unknown)?,
            ctrl_kf: KalmanFilter::new(models.controller.clone(), InitialEstimate::Unknown)?,
            dc_kf: models
                .current
                .clone()
                .map(|m| KalmanFilter::new(m, InitialEstimate::Unknown))
                .transpose()?,
            debounce: [deb()?, deb()?, deb()?, deb()?],
            nominal_b,
            g_plant,
            g_ctrl,
            g_dc,
            config,
            models,
            frames: PeriodFrames::default(),
            held: None,
            last_accepted: None,
            prev_error: None,
            i_dc: None,
            window: 0,
            ignored_frames: 0,
        })
    }

    pub fn config(&self) -> &DetectorConfig {
        &self.config
    }

    pub fn models(&self) -> &IdsModels {
        &self.models
    }

    pub fn ignored_frames(&self) -> u64 {
        self.ignored_frames
    }

    pub fn plant_filter(&self) -> &KalmanFilter {
        &self.plant_kf
    }

    pub fn controller_filter(&self) -> &KalmanFilter {
        &self.ctrl_kf
    }

    pub fn speed_threshold_base(&self) -> f64 {
        self.config.b.unwrap_or(self.g_plant)
    }

    fn quantize(&self, payload: &[f64]) -> Vector {
        match self.models.quantizer {
            Some(q) => Mat::col(&payload.iter().map(|&v| q.apply(v)).collect::<Vec<_>>()),
            None => Mat::col(payload),
        }
    }

    fn legit_actuation(&self) -> Option<&Vec<f64>> {
        let s = &self.models.schedule;
        self.frames
            .actuation
            .iter()
            .find(|(tick, _)| s.is_sensor_slot(*tick))
            .map(|(_, p)| p)
    }

    fn attributed_input(&mut self) -> Vector {
        let m = self.models.plant.n_inputs();
        match self.config.attribution {
            Attribution::ScheduledSlot => {
                if let Some(p) = self.legit_actuation() {
                    let u = self.quantize(p);
                    self.held = Some(u);
                }
                self.held.clone().unwrap_or_else(|| Mat::zeros(m, 1))
            }
            Attribution::AsApplied => {
                let s = self.models.schedule;
                let tpp = s.ticks_per_period() as u64;
                let start = self.window * tpp;
                let mut cursor = start;
                let mut sum = Mat::zeros(m, 1);
                let frames = std::mem::take(&mut self.frames.actuation);
                let mut held = self.held.clone();
                for (tick, payload) in &frames {
                    if payload.len() != m || !self.models.policy.accepts(&s, self.last_accepted, *tick) {
                        continue;
                    }
                    let span = tick.saturating_sub(cursor) as f64;
                    let prev = held.clone().unwrap_or_else(|| self.quantize(payload));
                    sum = &sum + &prev.scale(span);
                    cursor = (*tick).max(cursor);
                    held = Some(self.quantize(payload));
                    self.last_accepted = Some(*tick);
                }
                self.frames.actuation = frames;
                let held = held.unwrap_or_else(|| Mat::zeros(m, 1));
                sum = &sum + &held.scale((start + tpp).saturating_sub(cursor) as f64);
                self.held = Some(held);
                sum.scale(1.0 / tpp as f64)
            }
        }
    }

    /// Close the current sampling period: run the estimators, threshold,
    /// debounce and classify.
    pub fn evaluate_window(&mut self) -> Result<WindowRecord> {
        let t = self.models.schedule.time_of(self.window * self.models.schedule.ticks_per_period() as u64);
        let ts = self.models.schedule.ts();

        if let Some(i) = self.frames.current {
            let alpha = self.config.context_smoothing;
            self.i_dc = Some(match self.i_dc {
                None => i,
                Some(prev) => prev + alpha * (i - prev),
            });
        }
        let u = self.attributed_input();
        let y = self.frames.sensor.clone();

        // Plant.
        ensure_pending(&mut self.plant_kf)?;
        let r_speed_pow = match &y {
            Some(y) => {
                let r = self.plant_kf.update(&Mat::col(y))?;
                residual_power(&r, self.plant_kf.last_sigma())?
            }
            None => {
                self.plant_kf.skip_update()?;
                0.0
            }
        };
        if self.config.context_mode == ContextMode::AdaptiveEstimation {
            if let Some(i) = self.i_dc {
                let b = adaptive_b(&self.config, i, self.nominal_b);
                let model = self.plant_kf.model().with_b(Mat::scalar(b))?;
                self.plant_kf.set_model(model)?;
            }
        }
        self.plant_kf.predict(&u)?;

        // Controller.
        let mut r_ctrl_pow = 0.0;
        if let Some(y) = &y {
            let e = &self.models.reference - &Mat::col(y);
            let e_prev = self
                .prev_error
                .clone()
                .unwrap_or_else(|| Mat::zeros(e.rows(), 1));
            self.ctrl_kf.predict_with(&e_prev, &e)?;
            for (_, p) in &self.frames.actuation {
                if p.len() == self.models.controller.n_outputs() {
                    let (_, pow) = self.ctrl_kf.evaluate(&Mat::col(p))?;
                    r_ctrl_pow = f64::max(r_ctrl_pow, pow);
                }
            }
            match self.legit_actuation().cloned() {
                Some(p) if p.len() == self.models.controller.n_outputs() => {
                    self.ctrl_kf.update(&Mat::col(&p))?;
                }
                _ => self.ctrl_kf.skip_update()?,
            }
            self.prev_error = Some(e);
        }

        // Motor current.
        let mut r_dc_pow = 0.0;
        if let Some(kf) = self.dc_kf.as_mut() {
            ensure_pending(kf)?;
            match self.frames.current {
                Some(i) => {
                    let r = kf.update(&Mat::scalar(i))?;
                    r_dc_pow = residual_power(&r, kf.last_sigma())?;
                }
                None => kf.skip_update()?,
            }
            kf.predict(&u)?;
        }

        let i_ctx = self.i_dc;
        let g_speed = match (self.config.context_mode, i_ctx) {
            (ContextMode::AdaptiveThreshold, Some(i)) => {
                self.config.a * (i - self.config.dc_baseline).max(0.0) + self.speed_threshold_base()
            }
            (ContextMode::AdaptiveThreshold, None) => self.speed_threshold_base(),
            _ => self.g_plant,
        };
        let inhibited = self.window < STARTUP_INHIBIT_STEPS
            || self.plant_kf.in_startup()
            || self.ctrl_kf.in_startup()
            || self.dc_kf.as_ref().is_some_and(|k| k.in_startup());
        let raw = if inhibited {
            FlagVector::default()
        } else {
            FlagVector {
                f_speed: r_speed_pow > g_speed,
                f_ctrl: r_ctrl_pow > self.g_ctrl,
                f_dc_load: i_ctx.is_some_and(|i| i > self.config.dc_baseline + self.config.dc_load_margin),
                f_dc_res: r_dc_pow > self.g_dc,
            }
        };
        let flags = FlagVector {
            f_speed: self.debounce[0].push(raw.f_speed),
            f_ctrl: self.debounce[1].push(raw.f_ctrl),
            f_dc_load: self.debounce[2].push(raw.f_dc_load),
            f_dc_res: self.debounce[3].push(raw.f_dc_res),
        };
        let record = WindowRecord {
            window: self.window,
            t,
            i_dc: i_ctx,
            r_speed_pow,
            r_ctrl_pow,
            r_dc_pow,
            g_speed,
            g_ctrl: self.g_ctrl,
            g_dc: self.g_dc,
            raw,
            flags,
            label: classify(flags, (t, t + ts)).label,
            u_attributed: u.into_vec(),
            y_observed: y,
            inhibited,
        };
        self.frames = PeriodFrames::default();
        self.window += 1;
        Ok(record)
    }
}

impl BusTap for Ids {
    fn on_frame(&mut self, frame: FrameView<'_>) {
        match frame.msg_id {
            msg::SENSOR => {
                if self.models.schedule.is_sensor_slot(frame.tick) && self.frames.sensor.is_none() {
                    self.frames.sensor = Some(frame.payload.to_vec());
                } else {
                    self.frames.extra_sensor += 1;
                }
            }
            msg::ACTUATION => self.frames.actuation.push((frame.tick, frame.payload.to_vec())),
            msg::CURRENT => {
                if self.frames.current.is_none() {
                    self.frames.current = frame.payload.first().copied();
                }
            }
            _ => self.ignored_frames += 1,
        }
    }
}

/// Smallest non-negative slope keeping every `(context, power)` sample at
/// least `headroom` below `slope * context + intercept`.
pub fn threshold_slope(samples: &[(f64, f64)], intercept: f64, headroom: f64) -> f64 {
    let scale = 1.0 - headroom;
    samples
        .iter()
        .filter(|(i, _)| *i > 0.0)
        .map(|&(i, p)| (p / scale - intercept) / i)
        .fold(0.0, f64::max)
}

/// Least-squares line `gain = d * context + e`.
pub fn fit_gain_line(samples: &[(f64, f64)]) -> Result<(f64, f64)> {
    let n = samples.len() as f64;
    if samples.len() < 2 {
        return Err(Error::InvalidArgument("need at least two samples for a line fit".into()));
    }
    let mx = samples.iter().map(|s| s.0).sum::<f64>() / n;
    let my = samples.iter().map(|s| s.1).sum::<f64>() / n;
    let sxx: f64 = samples.iter().map(|s| (s.0 - mx).powi(2)).sum();
    let sxy: f64 = samples.iter().map(|s| (s.0 - mx) * (s.1 - my)).sum();
    if sxx <= f64::EPSILON * n * (1.0 + mx * mx) {
        return Err(Error::NoConvergence {
            what: "gain fit: context does not vary".into(),
            iters: 0,
        });
    }
    let d = sxy / sxx;
    Ok((d, my - d * mx))
}

/// Mean and `k_sigma` standard deviations of a nominal context signal.
pub fn baseline_and_margin(values: &[f64], k_sigma: f64) -> Result<(f64, f64)> {
    if values.len() < 2 {
        return Err(Error::InvalidArgument("need at least two samples for a baseline".into()));
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Ok((mean, k_sigma * var.sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn characterization_patterns_are_distinct() {
        for (i, (a, _)) in CHARACTERIZATION.iter().enumerate() {
            for (b, _) in &CHARACTERIZATION[i + 1..] {
                assert_ne!(a, b);
            }
        }
    }

    #[test]
    fn classify_examples() {
        assert_eq!(classify_flags(FlagVector::new(true, false, false, false)), Label::InternalSensorOrActuator);
        assert_eq!(classify_flags(FlagVector::default()), Label::Nominal);
        assert_eq!(classify_flags(FlagVector::new(true, true, true, true)), Label::ExternalControllerLoaded);
        assert_eq!(classify_flags(FlagVector::new(false, false, false, true)), Label::Unclassified);
        let all: Vec<Label> = (0..16)
            .map(|m| classify_flags(FlagVector::new(m & 1 != 0, m & 2 != 0, m & 4 != 0, m & 8 != 0)))
            .collect();
        assert_eq!(all.iter().filter(|l| **l == Label::Unclassified).count(), 6);
    }

    #[test]
    fn label_strings_match_serde() {
        for (_, l) in CHARACTERIZATION {
            assert_eq!(serde_json::to_string(&l).unwrap(), format!("\"{}\"", l.as_str()));
        }
    }

    #[test]
    fn debounce_three_of_five() {
        let mut d = Debouncer::new(3, 5).unwrap();
        let out: Vec<bool> = [true, false, true, false, true, false, false, true]
            .iter()
            .map(|&b| d.push(b))
            .collect();
        assert_eq!(out, vec![false, false, false, false, true, false, false, false]);
        assert!(Debouncer::new(0, 5).is_err());
        assert!(Debouncer::new(6, 5).is_err());
    }

    #[test]
    fn adaptive_b_examples() {
        let mut c = DetectorConfig {
            d: 0.0,
            e: 0.095,
            ..DetectorConfig::dc_motor()
        };
        assert_eq!(adaptive_b(&c, 12.0, 0.095), 0.095);
        c.d = -0.002;
        c.e = 0.12;
        assert!(adaptive_b(&c, 14.0, 0.095) > adaptive_b(&c, 16.0, 0.095));
        assert_eq!(adaptive_b(&c, 0.0, 0.095), 0.095);
        assert!(adaptive_b(&c, 1e6, 0.095) > 0.0);
    }

    #[test]
    fn config_validation() {
        let bad = |f: fn(&mut DetectorConfig)| {
            let mut c = DetectorConfig::dc_motor();
            f(&mut c);
            c.validate().is_err()
        };
        assert!(bad(|c| c.p_fa = 0.0));
        assert!(bad(|c| c.p_fa = 1.0));
        assert!(bad(|c| c.d = 0.1));
        assert!(bad(|c| c.debounce_k = 0));
        assert!(bad(|c| c.debounce_k = 6));
        assert!(DetectorConfig::dc_motor().validate().is_ok());
        assert!(serde_json::from_str::<DetectorConfig>(r#"{"p_fa":0.01,"bogus":1}"#).is_err());
        let c: DetectorConfig = serde_json::from_str(r#"{"context_mode":"adaptive-threshold"}"#).unwrap();
        assert_eq!(c.context_mode, ContextMode::AdaptiveThreshold);
    }

    #[test]
    fn threshold_slope_keeps_headroom() {
        let s = [(10.0, 20.0), (12.0, 30.0), (0.0, 100.0)];
        let a = threshold_slope(&s, 10.0, 0.2);
        for &(i, p) in &s[..2] {
            assert!(p <= 0.8 * (a * i + 10.0) + 1e-12);
        }
        assert_eq!(threshold_slope(&[(5.0, 1.0)], 10.0, 0.2), 0.0);
    }

    #[test]
    fn gain_line_recovers_exact_line() {
        let s: Vec<(f64, f64)> = (0..10).map(|i| (i as f64, 0.1 - 0.003 * i as f64)).collect();
        let (d, e) = fit_gain_line(&s).unwrap();
        assert!((d + 0.003).abs() < 1e-12 && (e - 0.1).abs() < 1e-12);
        assert!(fit_gain_line(&[(1.0, 1.0), (1.0, 2.0)]).is_err());
    }
}
