//! Attack descriptions, their installation on a network, and the
//! scenario catalog.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::netsim::{msg, AttackWindow, AttackerNode, Bias, Network, Tamper, TamperAction};
use crate::plants::LoadDisturbance;

pub const DEFAULT_BIAS: f64 = 1.10;
pub const DEFAULT_RATE_MULTIPLIER: u32 = 10;
/// Default attack onset in the motor scenarios, seconds.
pub const DC_ATTACK_START: f64 = 10.0;
/// Default load onset in the motor scenarios, seconds.
pub const DC_LOAD_START: f64 = 5.0;
pub const DC_DURATION: f64 = 30.0;
pub const LK_ATTACK_START: f64 = 5.0;
pub const LK_DURATION: f64 = 20.0;
/// Lateral-measurement offset of the lane-keeping sensor attack, metres.
pub const LK_SENSOR_OFFSET: f64 = 0.2;
/// Steering offset added by the lane-keeping injection attack, radians.
pub const LK_STEERING_OFFSET: f64 = 0.003;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Target {
    Sensor,
    Controller,
    Actuator,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttackClass {
    /// Code running on a legitimate loop node tampers with its data.
    Internal,
    /// A foreign node masquerades on the bus.
    External,
}

/// Where an internal controller attack tampers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TamperPoint {
    Input,
    Output,
}

fn default_bias() -> Bias {
    Bias::Scale(DEFAULT_BIAS)
}

fn default_rate() -> u32 {
    DEFAULT_RATE_MULTIPLIER
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttackSpec {
    pub target: Target,
    pub class: AttackClass,
    pub start: f64,
    #[serde(default)]
    pub stop: Option<f64>,
    #[serde(default = "default_bias")]
    pub bias: Bias,
    #[serde(default = "default_rate")]
    pub rate_multiplier: u32,
    #[serde(default)]
    pub tamper_point: Option<TamperPoint>,
    /// Suppress frames instead of biasing them (internal attacks only).
    #[serde(default)]
    pub block: bool,
}

impl AttackSpec {
    pub fn internal(target: Target, start: f64) -> Self {
        Self {
            target,
            class: AttackClass::Internal,
            start,
            stop: None,
            bias: default_bias(),
            rate_multiplier: 1,
            tamper_point: (target == Target::Controller).then_some(TamperPoint::Output),
            block: false,
        }
    }

    pub fn external(target: Target, start: f64) -> Self {
        Self {
            target,
            class: AttackClass::External,
            start,
            stop: None,
            bias: default_bias(),
            rate_multiplier: DEFAULT_RATE_MULTIPLIER,
            tamper_point: None,
            block: false,
        }
    }

    pub fn with_bias(mut self, bias: Bias) -> Self {
        self.bias = bias;
        self
    }

    pub fn with_tamper_point(mut self, point: TamperPoint) -> Self {
        self.tamper_point = Some(point);
        self
    }

    pub fn until(mut self, stop: f64) -> Self {
        self.stop = Some(stop);
        self
    }

    pub fn window(&self) -> AttackWindow {
        AttackWindow {
            start: self.start,
            stop: self.stop,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.class == AttackClass::External && self.target == Target::Actuator {
            return Err(Error::InvalidAttack(
                "external attacks cannot target the actuator: it has no outgoing message to spoof".into(),
            ));
        }
        if !(self.start >= 0.0 && self.start.is_finite()) {
            return Err(Error::InvalidAttack(format!("start must be >= 0, got {}", self.start)));
        }
        if let Some(stop) = self.stop {
            // start == stop is accepted as an inert attack.
            if !(stop >= self.start) {
                return Err(Error::InvalidAttack(format!(
                    "stop ({stop}) must not precede start ({})",
                    self.start
                )));
            }
        }
        if self.rate_multiplier == 0 {
            return Err(Error::InvalidAttack("rate_multiplier must be >= 1".into()));
        }
        if self.class == AttackClass::External && self.block {
            return Err(Error::InvalidAttack("an external node cannot block another node's frames".into()));
        }
        let (Bias::Scale(k) | Bias::Offset { value: k, .. }) = self.bias;
        if !k.is_finite() {
            return Err(Error::InvalidAttack("bias must be finite".into()));
        }
        Ok(())
    }
}

/// Install hooks or an attacker node for `spec` on `net`.
pub fn install_attack(net: &mut Network, spec: &AttackSpec) -> Result<()> {
    spec.validate()?;
    let action = if spec.block {
        TamperAction::Block
    } else {
        TamperAction::Bias(spec.bias)
    };
    let hook = Tamper {
        window: spec.window(),
        action,
    };
    match (spec.class, spec.target) {
        (AttackClass::Internal, Target::Sensor) => net.sensor.hooks.push(hook),
        (AttackClass::Internal, Target::Actuator) => net.actuator.hooks.push(hook),
        (AttackClass::Internal, Target::Controller) => match spec.tamper_point.unwrap_or(TamperPoint::Output) {
            TamperPoint::Input => net.controller.input_hooks.push(hook),
            TamperPoint::Output => net.controller.output_hooks.push(hook),
        },
        (AttackClass::External, target) => {
            let victim = match target {
                Target::Sensor => msg::SENSOR,
                Target::Controller => msg::ACTUATION,
                Target::Actuator => unreachable!("rejected by validate"),
            };
            let rate = spec.rate_multiplier;
            if net.schedule().ticks_per_period() % rate != 0 {
                return Err(Error::InvalidAttack(format!(
                    "rate_multiplier {rate} does not divide the {} ticks of a period",
                    net.schedule().ticks_per_period()
                )));
            }
            net.attackers
                .push(AttackerNode::new(victim, spec.bias, spec.window(), rate)?);
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlantKind {
    DcMotor,
    LaneKeeping,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub id: String,
    #[serde(default = "default_plant")]
    pub plant: PlantKind,
    #[serde(default)]
    pub description: String,
    #[serde(default)]
    pub attack: Option<AttackSpec>,
    #[serde(default)]
    pub load: Option<LoadDisturbance>,
    pub duration: f64,
    #[serde(default)]
    pub seed: u64,
}

fn default_plant() -> PlantKind {
    PlantKind::DcMotor
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        if !(self.duration > 0.0 && self.duration.is_finite()) {
            return Err(Error::Config(format!("duration must be positive, got {}", self.duration)));
        }
        if let Some(a) = &self.attack {
            a.validate()?;
        }
        if let Some(l) = &self.load {
            l.validate()?;
            if self.plant == PlantKind::LaneKeeping {
                return Err(Error::Config("load disturbances only apply to the DC motor".into()));
            }
        }
        Ok(())
    }

    pub fn has_load(&self) -> bool {
        self.load.is_some()
    }
}

/// The thirteen motor scenarios: S1 is load only, even ids up to S12 are
/// the six attacks without load and each following odd id adds the load.
pub fn scenario_catalog() -> Vec<Scenario> {
    let attacks: [(AttackSpec, &str); 6] = [
        (
            AttackSpec::internal(Target::Sensor, DC_ATTACK_START),
            "Speed measurement biased on the sensor node before transmission",
        ),
        (
            AttackSpec::external(Target::Sensor, DC_ATTACK_START),
            "Biased speed measurements injected on the bus by a foreign node",
        ),
        (
            AttackSpec::internal(Target::Actuator, DC_ATTACK_START),
            "Actuation command biased on the actuator node before it drives the motor",
        ),
        (
            AttackSpec::external(Target::Controller, DC_ATTACK_START),
            "Biased actuation commands injected on the bus by a foreign node",
        ),
        (
            AttackSpec::internal(Target::Controller, DC_ATTACK_START).with_tamper_point(TamperPoint::Input),
            "Speed measurement biased on the controller node after reception",
        ),
        (
            AttackSpec::internal(Target::Controller, DC_ATTACK_START).with_tamper_point(TamperPoint::Output),
            "Actuation command biased on the controller node before transmission",
        ),
    ];
    let load = LoadDisturbance::default_from(DC_LOAD_START);
    let mut out = vec![Scenario {
        id: "S1".into(),
        plant: PlantKind::DcMotor,
        description: "Motor shaft under load".into(),
        attack: None,
        load: Some(load),
        duration: DC_DURATION,
        seed: 1,
    }];
    for (i, (spec, text)) in attacks.into_iter().enumerate() {
        let n = 2 + 2 * i;
        out.push(Scenario {
            id: format!("S{n}"),
            plant: PlantKind::DcMotor,
            description: text.into(),
            attack: Some(spec),
            load: None,
            duration: DC_DURATION,
            seed: n as u64,
        });
        out.push(Scenario {
            id: format!("S{}", n + 1),
            plant: PlantKind::DcMotor,
            description: format!("S1 and S{n} together"),
            attack: Some(spec),
            load: Some(load),
            duration: DC_DURATION,
            seed: n as u64 + 1,
        });
    }
    out
}

pub fn lane_keeping_attacks() -> Vec<Scenario> {
    vec![
        Scenario {
            id: "LK-internal-sensor".into(),
            plant: PlantKind::LaneKeeping,
            description: "Lane keeping: lateral-position measurement offset by 0.2 m on the camera node".into(),
            attack: Some(AttackSpec::internal(Target::Sensor, LK_ATTACK_START).with_bias(Bias::Offset {
                component: 0,
                value: LK_SENSOR_OFFSET,
            })),
            load: None,
            duration: LK_DURATION,
            seed: 101,
        },
        Scenario {
            id: "LK-external-controller".into(),
            plant: PlantKind::LaneKeeping,
            description: "Lane keeping: offset steering commands injected on the bus at 10x the loop rate".into(),
            attack: Some(AttackSpec::external(Target::Controller, LK_ATTACK_START).with_bias(Bias::Offset {
                component: 0,
                value: LK_STEERING_OFFSET,
            })),
            load: None,
            duration: LK_DURATION,
            seed: 102,
        },
    ]
}

/// Every built-in scenario: the motor catalog then the lane-keeping pair.
pub fn all_scenarios() -> Vec<Scenario> {
    let mut v = scenario_catalog();
    v.extend(lane_keeping_attacks());
    v
}

pub fn find_scenario(id: &str) -> Result<Scenario> {
    let all = all_scenarios();
    all.iter().find(|s| s.id.eq_ignore_ascii_case(id)).cloned().ok_or_else(|| Error::UnknownScenario {
        id: id.to_string(),
        valid: all.iter().map(|s| s.id.clone()).collect::<Vec<_>>().join(", "),
    })
}
