//! Deterministic broadcast-bus simulation of a sensor / controller /
//! actuator loop, with optional attacker nodes and a promiscuous tap.
//!
//! Time advances in integer ticks. Each sampling period holds
//! `ticks_per_period` ticks; the sensor samples at a fixed slot, the
//! controller reacts to every sensor frame it receives and the actuator
//! holds the last accepted command. Between ticks the physical plant
//! advances with matrices rescaled so that a whole period under a constant
//! command reproduces the sampled model exactly.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::control::{pid_step, LtiController, PidConfig, PidState};
use crate::error::{Error, Result};
use crate::plants::{apply_load, LoadDisturbance, MotorStates};
use crate::statespace::{rescale_period, GaussianSource, LtiModel, Mat, SimRng, Vector};

pub type MsgId = u32;
pub type NodeId = usize;

/// Message identifiers. Lower ids win arbitration on exact ties.
pub mod msg {
    use super::MsgId;
    pub const SENSOR: MsgId = 0x101;
    pub const ACTUATION: MsgId = 0x201;
    pub const CURRENT: MsgId = 0x301;
}

/// Fixed node indices; attacker nodes follow `FIRST_ATTACKER`.
pub mod node {
    use super::NodeId;
    pub const SENSOR: NodeId = 0;
    pub const CONTROLLER: NodeId = 1;
    pub const ACTUATOR: NodeId = 2;
    pub const CURRENT_SENSOR: NodeId = 3;
    pub const TAP: NodeId = 4;
    pub const FIRST_ATTACKER: NodeId = 5;
}

/// A bus message with its ground-truth sender.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub msg_id: MsgId,
    pub sender: NodeId,
    pub payload: Vec<f64>,
    pub t: f64,
    pub tick: u64,
}

/// What a receiver sees: everything except the sender.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameView<'a> {
    pub msg_id: MsgId,
    pub payload: &'a [f64],
    pub t: f64,
    pub tick: u64,
}

impl Frame {
    pub fn view(&self) -> FrameView<'_> {
        FrameView {
            msg_id: self.msg_id,
            payload: &self.payload,
            t: self.t,
            tick: self.tick,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BusSchedule {
    ts: f64,
    ticks_per_period: u32,
    sensor_slot: u32,
}

impl BusSchedule {
    pub const DEFAULT_TICKS_PER_PERIOD: u32 = 20;

    pub fn new(ts: f64, ticks_per_period: u32, sensor_slot: u32) -> Result<Self> {
        if !(ts > 0.0 && ts.is_finite()) {
            return Err(Error::InvalidArgument(format!("sampling period must be positive, got {ts}")));
        }
        if ticks_per_period < 10 {
            return Err(Error::InvalidArgument(format!(
                "need at least 10 ticks per period to resolve 10x injection, got {ticks_per_period}"
            )));
        }
        if sensor_slot >= ticks_per_period {
            return Err(Error::InvalidArgument("sensor slot must lie inside the period".into()));
        }
        Ok(Self {
            ts,
            ticks_per_period,
            sensor_slot,
        })
    }

    pub fn with_period(ts: f64) -> Self {
        Self::new(ts, Self::DEFAULT_TICKS_PER_PERIOD, 0).expect("default schedule")
    }

    pub fn ts(&self) -> f64 {
        self.ts
    }

    pub fn tick_len(&self) -> f64 {
        self.ts / self.ticks_per_period as f64
    }

    pub fn ticks_per_period(&self) -> u32 {
        self.ticks_per_period
    }

    pub fn sensor_slot(&self) -> u32 {
        self.sensor_slot
    }

    pub fn time_of(&self, tick: u64) -> f64 {
        tick as f64 * self.ts / self.ticks_per_period as f64
    }

    pub fn period_of(&self, tick: u64) -> u64 {
        tick / self.ticks_per_period as u64
    }

    pub fn slot_of(&self, tick: u64) -> u32 {
        (tick % self.ticks_per_period as u64) as u32
    }

    pub fn is_sensor_slot(&self, tick: u64) -> bool {
        self.slot_of(tick) == self.sensor_slot
    }

    /// Number of ticks in `seconds`, rounded to the nearest tick.
    pub fn ticks_in(&self, seconds: f64) -> u64 {
        (seconds / self.tick_len()).round().max(0.0) as u64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActuatorPolicy {
    /// Commands arriving closer than this to the last accepted one are dropped.
    pub min_interarrival: f64,
}

impl ActuatorPolicy {
    pub fn new(min_interarrival: f64) -> Result<Self> {
        if !(min_interarrival >= 0.0 && min_interarrival.is_finite()) {
            return Err(Error::InvalidArgument("min_interarrival must be >= 0".into()));
        }
        Ok(Self { min_interarrival })
    }

    /// Default policy: reject anything faster than ten times the loop rate.
    pub fn for_period(ts: f64) -> Self {
        Self {
            min_interarrival: ts / 10.0,
        }
    }

    pub fn accepts(&self, schedule: &BusSchedule, last_accepted: Option<u64>, tick: u64) -> bool {
        match last_accepted {
            None => true,
            Some(last) => {
                let gap = tick.saturating_sub(last) as f64 * schedule.tick_len();
                gap >= self.min_interarrival - 1e-9 * schedule.tick_len()
            }
        }
    }
}

/// Round-and-clamp stage of an actuator (e.g. an 8-bit PWM register).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Quantizer {
    pub min: f64,
    pub max: f64,
    pub round: bool,
}

impl Quantizer {
    pub const PWM8: Quantizer = Quantizer {
        min: 0.0,
        max: 255.0,
        round: true,
    };

    pub fn apply(&self, v: f64) -> f64 {
        let v = if self.round { v.round() } else { v };
        v.clamp(self.min, self.max)
    }
}

/// Half-open activity window `[start, stop)`; `stop = None` means open.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttackWindow {
    pub start: f64,
    #[serde(default)]
    pub stop: Option<f64>,
}

impl AttackWindow {
    pub fn contains(&self, t: f64) -> bool {
        t >= self.start && self.stop.is_none_or(|s| t < s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Bias {
    /// Multiply every payload element.
    Scale(f64),
    /// Add `value` to one payload element.
    Offset { component: usize, value: f64 },
}

impl Bias {
    pub fn apply(&self, values: &mut [f64]) {
        match *self {
            Bias::Scale(k) => values.iter_mut().for_each(|v| *v *= k),
            Bias::Offset { component, value } => {
                if let Some(v) = values.get_mut(component) {
                    *v += value;
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TamperAction {
    Bias(Bias),
    /// Suppress the frame or command entirely.
    Block,
}

/// An internal-attack hook on one node's data path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tamper {
    pub window: AttackWindow,
    pub action: TamperAction,
}

/// Applies every active hook; returns `None` if one of them blocks.
fn run_hooks(hooks: &[Tamper], t: f64, mut values: Vec<f64>) -> Option<Vec<f64>> {
    for h in hooks.iter().filter(|h| h.window.contains(t)) {
        match h.action {
            TamperAction::Bias(b) => b.apply(&mut values),
            TamperAction::Block => return None,
        }
    }
    Some(values)
}

/// Anything that listens to the bus without transmitting.
pub trait BusTap {
    fn on_frame(&mut self, frame: FrameView<'_>);
}

/// A tap that ignores everything.
#[derive(Debug, Default, Clone, Copy)]
pub struct NullTap;

impl BusTap for NullTap {
    fn on_frame(&mut self, _frame: FrameView<'_>) {}
}

/// Append-only record of every frame with its true sender.
#[derive(Debug, Clone, Default)]
pub struct Bus {
    now: u64,
    trace: Vec<Frame>,
}

impl Bus {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn now(&self) -> u64 {
        self.now
    }

    pub fn trace(&self) -> &[Frame] {
        &self.trace
    }

    pub fn advance_to(&mut self, tick: u64) {
        self.now = tick;
    }

    /// Record a frame; delivery is done by the owner of the nodes.
    pub fn broadcast(&mut self, frame: Frame) -> Result<&Frame> {
        if frame.tick != self.now {
            return Err(Error::InvalidArgument(format!(
                "frame stamped at tick {} sent at tick {}",
                frame.tick, self.now
            )));
        }
        self.trace.push(frame);
        Ok(self.trace.last().expect("just pushed"))
    }
}

#[derive(Debug, Clone, Default)]
pub struct SensorNode {
    pub hooks: Vec<Tamper>,
}

impl SensorNode {
    /// Payload to transmit for a measurement taken at time `t`.
    pub fn on_sample(&self, t: f64, measurement: &Vector) -> Option<Vec<f64>> {
        run_hooks(&self.hooks, t, measurement.as_slice().to_vec())
    }
}

#[derive(Debug, Clone)]
pub enum ControlLaw {
    Pid {
        config: PidConfig,
        state: PidState,
        reference: f64,
    },
    /// Dynamic output-feedback controller driven by `reference - y`.
    Lti {
        controller: LtiController,
        reference: Vector,
    },
}

impl ControlLaw {
    pub fn reference(&self) -> Vector {
        match self {
            ControlLaw::Pid { reference, .. } => Mat::scalar(*reference),
            ControlLaw::Lti { reference, .. } => reference.clone(),
        }
    }

    fn compute(&mut self, measurement: &[f64]) -> Vec<f64> {
        match self {
            ControlLaw::Pid {
                config,
                state,
                reference,
            } => {
                let (u, next) = pid_step(config, state, *reference - measurement[0]);
                *state = next;
                vec![u]
            }
            ControlLaw::Lti { controller, reference } => {
                let e = Mat::col(
                    &reference
                        .as_slice()
                        .iter()
                        .zip(measurement)
                        .map(|(r, y)| r - y)
                        .collect::<Vec<_>>(),
                );
                controller.step(&e).into_vec()
            }
        }
    }
}

/// Event-driven controller: one command per consumed sensor frame.
#[derive(Debug, Clone)]
pub struct ControllerNode {
    pub law: ControlLaw,
    pub input_hooks: Vec<Tamper>,
    pub output_hooks: Vec<Tamper>,
}

impl ControllerNode {
    pub fn new(law: ControlLaw) -> Self {
        Self {
            law,
            input_hooks: Vec::new(),
            output_hooks: Vec::new(),
        }
    }

    pub fn on_frame(&mut self, frame: FrameView<'_>) -> Option<Vec<f64>> {
        if frame.msg_id != msg::SENSOR {
            return None;
        }
        let y = run_hooks(&self.input_hooks, frame.t, frame.payload.to_vec())?;
        let u = self.law.compute(&y);
        run_hooks(&self.output_hooks, frame.t, u)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Actuation {
    Applied,
    Rejected,
    Ignored,
}

#[derive(Debug, Clone)]
pub struct ActuatorNode {
    pub policy: ActuatorPolicy,
    pub quantizer: Option<Quantizer>,
    pub hooks: Vec<Tamper>,
    held: Vector,
    last_accepted: Option<u64>,
    accepted: u64,
    rejected: u64,
}

impl ActuatorNode {
    pub fn new(policy: ActuatorPolicy, quantizer: Option<Quantizer>, initial: Vector) -> Self {
        Self {
            policy,
            quantizer,
            hooks: Vec::new(),
            held: initial,
            last_accepted: None,
            accepted: 0,
            rejected: 0,
        }
    }

    pub fn held(&self) -> &Vector {
        &self.held
    }

    pub fn accepted(&self) -> u64 {
        self.accepted
    }

    pub fn rejected(&self) -> u64 {
        self.rejected
    }

    pub fn on_frame(&mut self, frame: FrameView<'_>, schedule: &BusSchedule) -> Actuation {
        if frame.msg_id != msg::ACTUATION || frame.payload.len() != self.held.rows() {
            return Actuation::Ignored;
        }
        if !self.policy.accepts(schedule, self.last_accepted, frame.tick) {
            self.rejected += 1;
            return Actuation::Rejected;
        }
        self.last_accepted = Some(frame.tick);
        self.accepted += 1;
        if let Some(cmd) = run_hooks(&self.hooks, frame.t, frame.payload.to_vec()) {
            let cmd: Vec<f64> = match self.quantizer {
                Some(q) => cmd.into_iter().map(|v| q.apply(v)).collect(),
                None => cmd,
            };
            self.held = Mat::col(&cmd);
        }
        Actuation::Applied
    }
}

/// External attacker: sniffs the victim message and injects biased
/// copies `rate_multiplier` times per period, between legitimate slots.
#[derive(Debug, Clone)]
pub struct AttackerNode {
    pub victim: MsgId,
    pub bias: Bias,
    pub window: AttackWindow,
    pub rate_multiplier: u32,
    last_seen: Option<Vec<f64>>,
}

impl AttackerNode {
    pub fn new(victim: MsgId, bias: Bias, window: AttackWindow, rate_multiplier: u32) -> Result<Self> {
        if rate_multiplier == 0 {
            return Err(Error::InvalidAttack("rate_multiplier must be at least 1".into()));
        }
        Ok(Self {
            victim,
            bias,
            window,
            rate_multiplier,
            last_seen: None,
        })
    }

    pub fn observe(&mut self, frame: FrameView<'_>) {
        if frame.msg_id == self.victim {
            self.last_seen = Some(frame.payload.to_vec());
        }
    }

    /// Injection slots are evenly spaced and offset by half a spacing so
    /// they never coincide with the legitimate slot.
    pub fn injects_at(&self, schedule: &BusSchedule, tick: u64) -> bool {
        let spacing = (schedule.ticks_per_period() / self.rate_multiplier).max(1);
        let offset = (schedule.sensor_slot() + spacing / 2) % spacing;
        let slot = schedule.slot_of(tick);
        slot % spacing == offset && slot / spacing < self.rate_multiplier
    }

    pub fn on_tick(&self, schedule: &BusSchedule, tick: u64) -> Option<Vec<f64>> {
        if !self.window.contains(schedule.time_of(tick)) || !self.injects_at(schedule, tick) {
            return None;
        }
        let mut payload = self.last_seen.clone()?;
        self.bias.apply(&mut payload);
        Some(payload)
    }
}

/// Secondary measured channel driven by the same command (motor current).
#[derive(Debug, Clone)]
pub struct CurrentChannel {
    model: LtiModel,
    a_tick: Mat,
    b_tick: Mat,
    x: Vector,
    process: GaussianSource,
    measurement: GaussianSource,
}

impl CurrentChannel {
    pub fn new(model: LtiModel, x0: Vector, substeps: u32) -> Result<Self> {
        let (a_tick, b_tick) = rescale_period(model.a(), model.b(), substeps as usize)?;
        Ok(Self {
            process: GaussianSource::new(model.q())?,
            measurement: GaussianSource::new(model.r())?,
            model,
            a_tick,
            b_tick,
            x: x0,
        })
    }

    pub fn state(&self) -> &Vector {
        &self.x
    }
}

/// The physical process: tick-rate dynamics, period-rate noise and load.
#[derive(Debug, Clone)]
pub struct PlantProcess {
    model: LtiModel,
    a_tick: Mat,
    b_tick: Mat,
    x: Vector,
    process: GaussianSource,
    measurement: GaussianSource,
    current: Option<CurrentChannel>,
    load: Option<LoadDisturbance>,
}

impl PlantProcess {
    pub fn new(model: LtiModel, x0: Vector, substeps: u32) -> Result<Self> {
        if x0.shape() != (model.n_states(), 1) {
            return Err(Error::dims("initial plant state", model.n_states(), x0.rows()));
        }
        let (a_tick, b_tick) = rescale_period(model.a(), model.b(), substeps as usize)?;
        Ok(Self {
            process: GaussianSource::new(model.q())?,
            measurement: GaussianSource::new(model.r())?,
            model,
            a_tick,
            b_tick,
            x: x0,
            current: None,
            load: None,
        })
    }

    pub fn with_current(mut self, channel: CurrentChannel) -> Self {
        self.current = Some(channel);
        self
    }

    pub fn with_load(mut self, load: Option<LoadDisturbance>) -> Self {
        self.load = load;
        self
    }

    pub fn set_load(&mut self, load: Option<LoadDisturbance>) {
        self.load = load;
    }

    pub fn model(&self) -> &LtiModel {
        &self.model
    }

    pub fn state(&self) -> &Vector {
        &self.x
    }

    pub fn current(&self) -> Option<&CurrentChannel> {
        self.current.as_ref()
    }

    pub fn load(&self) -> Option<&LoadDisturbance> {
        self.load.as_ref()
    }

    /// Process noise and load for the period starting at `t`.
    fn period_boundary(&mut self, t: f64, rng: &mut SimRng) {
        let w = self.process.sample(rng);
        self.x = &self.x + &w;
        if let Some(ch) = self.current.as_mut() {
            let w = ch.process.sample(rng);
            ch.x = &ch.x + &w;
        }
        if let (Some(load), Some(ch)) = (self.load.as_ref(), self.current.as_mut()) {
            let s = apply_load(
                load,
                t,
                &MotorStates {
                    speed: self.x[0],
                    current: ch.x.clone(),
                },
            );
            self.x[0] = s.speed;
            ch.x = s.current;
        } else if let Some(load) = self.load.as_ref() {
            if load.is_active(t) {
                self.x[0] += load.speed_drag;
            }
        }
    }

    fn true_output(&self, u: &Vector) -> Vector {
        self.model.output(&self.x, u)
    }

    fn sample(&mut self, u: &Vector, rng: &mut SimRng) -> (Vector, Option<f64>) {
        let y = &self.true_output(u) + &self.measurement.sample(rng);
        let i = self.current.as_ref().map(|ch| {
            let v = ch.measurement.sample(rng);
            (&(ch.model.c() * &ch.x) + &v)[0]
        });
        (y, i)
    }

    fn advance_tick(&mut self, u: &Vector) {
        self.x = &(&self.a_tick * &self.x) + &(&self.b_tick * u);
        if let Some(ch) = self.current.as_mut() {
            ch.x = &(&ch.a_tick * &ch.x) + &(&ch.b_tick * u);
        }
    }
}

/// Ground truth for one sampling period.
#[derive(Debug, Clone, PartialEq)]
pub struct PeriodRecord {
    pub period: u64,
    pub t: f64,
    /// Noise-free plant output at the sampling instant.
    pub y_true: Vector,
    /// Payload of the sensor node's frame, if one was sent.
    pub y_reported: Option<Vec<f64>>,
    /// Tick-weighted mean of the command held by the actuator.
    pub u_applied: Vector,
    pub i_dc: Option<f64>,
    pub sensor_frames: u32,
    pub actuation_frames: u32,
    pub rejected: u32,
    pub total_frames: u32,
}

/// The whole networked loop.
#[derive(Debug, Clone)]
pub struct Network {
    schedule: BusSchedule,
    bus: Bus,
    pub sensor: SensorNode,
    pub controller: ControllerNode,
    pub actuator: ActuatorNode,
    /// Whether a current-sensor node transmits the plant's current channel.
    pub current_sensor: bool,
    pub attackers: Vec<AttackerNode>,
    plant: PlantProcess,
    rng: SimRng,
    tick: u64,
    keep_trace: bool,
}

impl Network {
    pub fn new(
        schedule: BusSchedule,
        plant: PlantProcess,
        controller: ControllerNode,
        actuator: ActuatorNode,
        rng: SimRng,
    ) -> Result<Self> {
        if actuator.held().rows() != plant.model().n_inputs() {
            return Err(Error::dims("actuator command", plant.model().n_inputs(), actuator.held().rows()));
        }
        let current_sensor = plant.current().is_some();
        Ok(Self {
            schedule,
            bus: Bus::new(),
            sensor: SensorNode::default(),
            controller,
            actuator,
            current_sensor,
            attackers: Vec::new(),
            plant,
            rng,
            tick: 0,
            keep_trace: true,
        })
    }

    /// Disable the global frame trace (long Monte-Carlo runs).
    pub fn without_trace(mut self) -> Self {
        self.keep_trace = false;
        self
    }

    pub fn schedule(&self) -> &BusSchedule {
        &self.schedule
    }

    pub fn plant(&self) -> &PlantProcess {
        &self.plant
    }

    pub fn plant_mut(&mut self) -> &mut PlantProcess {
        &mut self.plant
    }

    pub fn bus(&self) -> &Bus {
        &self.bus
    }

    pub fn tick(&self) -> u64 {
        self.tick
    }

    pub fn time(&self) -> f64 {
        self.schedule.time_of(self.tick)
    }

    fn sender_index(&self, attacker: usize) -> NodeId {
        node::FIRST_ATTACKER + attacker
    }

    /// Deliver queued frames (and whatever they trigger) in FIFO order.
    fn deliver(
        &mut self,
        mut queue: VecDeque<Frame>,
        tap: &mut dyn BusTap,
        rec: &mut PeriodRecord,
    ) -> Result<()> {
        while let Some(frame) = queue.pop_front() {
            rec.total_frames += 1;
            match frame.msg_id {
                msg::SENSOR => rec.sensor_frames += 1,
                msg::ACTUATION => rec.actuation_frames += 1,
                _ => {}
            }
            let view = frame.view();
            // Receivers in node-index order; the sender never hears itself.
            if frame.sender != node::CONTROLLER {
                if let Some(u) = self.controller.on_frame(view) {
                    queue.push_back(Frame {
                        msg_id: msg::ACTUATION,
                        sender: node::CONTROLLER,
                        payload: u,
                        t: frame.t,
                        tick: frame.tick,
                    });
                }
            }
            if frame.sender != node::ACTUATOR
                && self.actuator.on_frame(view, &self.schedule) == Actuation::Rejected
            {
                rec.rejected += 1;
            }
            tap.on_frame(view);
            for i in 0..self.attackers.len() {
                if frame.sender != self.sender_index(i) {
                    self.attackers[i].observe(view);
                }
            }
            if self.keep_trace {
                self.bus.broadcast(frame)?;
            }
        }
        Ok(())
    }

    /// Run one full sampling period.
    pub fn run_period(&mut self, tap: &mut dyn BusTap) -> Result<PeriodRecord> {
        let tpp = self.schedule.ticks_per_period() as u64;
        let period = self.tick / tpp;
        let t0 = self.schedule.time_of(self.tick);
        self.plant.period_boundary(t0, &mut self.rng);
        let mut rec = PeriodRecord {
            period,
            t: t0,
            y_true: Mat::zeros(self.plant.model().n_outputs(), 1),
            y_reported: None,
            u_applied: Mat::zeros(self.actuator.held().rows(), 1),
            i_dc: None,
            sensor_frames: 0,
            actuation_frames: 0,
            rejected: 0,
            total_frames: 0,
        };
        let mut u_sum = Mat::zeros(self.actuator.held().rows(), 1);
        for _ in 0..tpp {
            let tick = self.tick;
            let t = self.schedule.time_of(tick);
            self.bus.advance_to(tick);
            let mut emitted: Vec<Frame> = Vec::new();
            if self.schedule.is_sensor_slot(tick) {
                let u = self.actuator.held().clone();
                rec.y_true = self.plant.true_output(&u);
                let (y, i) = self.plant.sample(&u, &mut self.rng);
                rec.i_dc = i;
                if let Some(payload) = self.sensor.on_sample(t, &y) {
                    rec.y_reported = Some(payload.clone());
                    emitted.push(Frame {
                        msg_id: msg::SENSOR,
                        sender: node::SENSOR,
                        payload,
                        t,
                        tick,
                    });
                }
                if let (true, Some(i)) = (self.current_sensor, i) {
                    emitted.push(Frame {
                        msg_id: msg::CURRENT,
                        sender: node::CURRENT_SENSOR,
                        payload: vec![i],
                        t,
                        tick,
                    });
                }
            }
            for (i, a) in self.attackers.iter().enumerate() {
                if let Some(payload) = a.on_tick(&self.schedule, tick) {
                    emitted.push(Frame {
                        msg_id: a.victim,
                        sender: node::FIRST_ATTACKER + i,
                        payload,
                        t,
                        tick,
                    });
                }
            }
            emitted.sort_by_key(|f| f.msg_id);
            self.deliver(emitted.into(), tap, &mut rec)?;
            let u = self.actuator.held().clone();
            u_sum = &u_sum + &u;
            self.plant.advance_tick(&u);
            self.tick += 1;
        }
        rec.u_applied = u_sum.scale(1.0 / tpp as f64);
        Ok(rec)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::control::PidConfig;
    use crate::plants::dc_motor_model;
    use rand::SeedableRng;

    fn quiet_motor() -> LtiModel {
        dc_motor_model().with_noise(Mat::scalar(0.0), Mat::scalar(1e-12)).unwrap()
    }

    fn network(model: LtiModel, seed: u64) -> Network {
        let schedule = BusSchedule::with_period(model.ts());
        let plant = PlantProcess::new(model, Mat::scalar(0.0), 20).unwrap();
        let pid = ControllerNode::new(ControlLaw::Pid {
            config: PidConfig::dc_motor(),
            state: PidState::default(),
            reference: 50.0,
        });
        let act = ActuatorNode::new(ActuatorPolicy::for_period(0.05), Some(Quantizer::PWM8), Mat::scalar(0.0));
        Network::new(schedule, plant, pid, act, SimRng::seed_from_u64(seed)).unwrap()
    }

    #[derive(Default)]
    struct Recorder(Vec<(MsgId, u64)>);

    impl BusTap for Recorder {
        fn on_frame(&mut self, f: FrameView<'_>) {
            self.0.push((f.msg_id, f.tick));
        }
    }

    #[test]
    fn schedule_validation() {
        assert!(BusSchedule::new(0.05, 5, 0).is_err());
        assert!(BusSchedule::new(0.05, 20, 20).is_err());
        assert!(BusSchedule::new(0.0, 20, 0).is_err());
        let s = BusSchedule::with_period(0.05);
        assert!((s.tick_len() - 0.0025).abs() < 1e-15);
        assert_eq!(s.period_of(41), 2);
        assert_eq!(s.slot_of(41), 1);
    }

    #[test]
    fn policy_rejects_every_other_frame_at_twenty_times_rate() {
        let s = BusSchedule::with_period(0.05);
        let p = ActuatorPolicy::for_period(0.05);
        let mut last = None;
        let mut accepted = 0;
        for tick in 0..20 {
            if p.accepts(&s, last, tick) {
                last = Some(tick);
                accepted += 1;
            }
        }
        assert_eq!(accepted, 10);
    }

    #[test]
    fn nominal_period_has_one_sensor_and_one_actuation_frame() {
        let mut net = network(quiet_motor(), 1);
        let mut tap = Recorder::default();
        for _ in 0..10 {
            let rec = net.run_period(&mut tap).unwrap();
            assert_eq!(rec.sensor_frames, 1);
            assert_eq!(rec.actuation_frames, 1);
            assert_eq!(rec.rejected, 0);
        }
        assert_eq!(tap.0.len(), 20);
        assert_eq!(net.bus().trace().len(), 20);
        assert!(tap.0.iter().all(|&(_, tick)| tick % 20 == 0));
    }

    #[test]
    fn controller_answers_in_the_same_tick() {
        let mut net = network(quiet_motor(), 1);
        net.run_period(&mut NullTap).unwrap();
        let trace = net.bus().trace();
        assert_eq!(trace[0].msg_id, msg::SENSOR);
        assert_eq!(trace[0].sender, node::SENSOR);
        assert_eq!(trace[1].msg_id, msg::ACTUATION);
        assert_eq!(trace[1].sender, node::CONTROLLER);
        assert_eq!(trace[1].tick, trace[0].tick);
    }

    #[test]
    fn whole_period_matches_sampled_model() {
        let model = quiet_motor();
        let mut net = network(model.clone(), 3);
        let mut x = 0.0;
        for _ in 0..30 {
            let rec = net.run_period(&mut NullTap).unwrap();
            assert!((rec.y_true[0] - x).abs() < 1e-9);
            x = 0.91 * x + 0.095 * rec.u_applied[0];
        }
    }

    #[test]
    fn sensor_hook_scales_payload() {
        let mut net = network(quiet_motor(), 3);
        net.sensor.hooks.push(Tamper {
            window: AttackWindow { start: 0.5, stop: None },
            action: TamperAction::Bias(Bias::Scale(1.1)),
        });
        for _ in 0..20 {
            let rec = net.run_period(&mut NullTap).unwrap();
            let y = rec.y_reported.unwrap()[0];
            if rec.t >= 0.5 && rec.y_true[0] > 1.0 {
                assert!((y / rec.y_true[0] - 1.1).abs() < 1e-3);
            }
        }
    }

    #[test]
    fn blocking_hook_suppresses_frames() {
        let mut net = network(quiet_motor(), 3);
        net.sensor.hooks.push(Tamper {
            window: AttackWindow { start: 0.0, stop: None },
            action: TamperAction::Block,
        });
        let rec = net.run_period(&mut NullTap).unwrap();
        assert_eq!(rec.sensor_frames, 0);
        assert_eq!(rec.actuation_frames, 0);
        assert!(rec.y_reported.is_none());
    }

    #[test]
    fn attacker_injects_between_slots() {
        let s = BusSchedule::with_period(0.05);
        let a = AttackerNode::new(
            msg::ACTUATION,
            Bias::Scale(1.1),
            AttackWindow { start: 0.0, stop: None },
            10,
        )
        .unwrap();
        let slots: Vec<u64> = (0..20).filter(|&t| a.injects_at(&s, t)).collect();
        assert_eq!(slots, vec![1, 3, 5, 7, 9, 11, 13, 15, 17, 19]);
        assert!(a.on_tick(&s, 1).is_none(), "nothing sniffed yet");
    }

    #[test]
    fn injected_commands_take_over_the_actuator() {
        let mut net = network(quiet_motor(), 3);
        for _ in 0..5 {
            net.run_period(&mut NullTap).unwrap();
        }
        net.attackers.push(
            AttackerNode::new(msg::ACTUATION, Bias::Scale(1.1), AttackWindow { start: 0.0, stop: None }, 10)
                .unwrap(),
        );
        net.run_period(&mut NullTap).unwrap();
        let rec = net.run_period(&mut NullTap).unwrap();
        assert_eq!(rec.actuation_frames, 11);
        assert_eq!(rec.rejected, 1, "the legitimate command lands one tick after an injected one");
        for f in net.bus().trace().iter().rev().take(rec.total_frames as usize) {
            if f.msg_id == msg::ACTUATION && f.sender != node::CONTROLLER {
                assert!(f.sender >= node::FIRST_ATTACKER);
            }
        }
    }

    #[test]
    fn same_seed_same_trace() {
        let run = |seed| {
            let mut net = network(dc_motor_model(), seed);
            for _ in 0..50 {
                net.run_period(&mut NullTap).unwrap();
            }
            net.bus().trace().to_vec()
        };
        assert_eq!(run(9), run(9));
        assert_ne!(run(9), run(10));
    }
}
