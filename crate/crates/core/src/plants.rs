//! Plant models: DC-motor speed, DC-current context channel, lane keeping,
//! and the shaft-load disturbance.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::statespace::{discretize_euler_zoh, LtiModel, Mat, Vector, DEFAULT_SERIES_ORDER};

/// Sampling period of the DC-motor loop, seconds.
pub const DC_MOTOR_TS: f64 = 0.05;
/// Sampling period of the lane-keeping loop, seconds.
pub const LANE_KEEPING_TS: f64 = 0.1;

/// First-order speed model identified on the motor testbed. Speed is in
/// encoder counts per sampling window, the input is the 8-bit PWM command.
pub fn dc_motor_model() -> LtiModel {
    LtiModel::scalar(0.91, 0.095, 1.0, 0.0, 0.005, 0.1, DC_MOTOR_TS).expect("valid DC-motor model")
}

/// Second-order DC-current model; the first state is the measured current.
pub fn dc_current_model() -> LtiModel {
    LtiModel::new(
        Mat::from_rows(&[&[0.0, 1.0], &[-0.6349, 1.6148]]).unwrap(),
        Mat::col(&[0.0602, 0.0392]),
        Mat::from_rows(&[&[1.0, 0.0]]).unwrap(),
        Mat::zeros(1, 1),
        Mat::diag(&[1e-5, 1e-5]),
        Mat::scalar(0.2),
        DC_MOTOR_TS,
    )
    .expect("valid DC-current model")
}

/// Steady-state current per unit PWM command.
pub fn dc_current_gain() -> f64 {
    let m = dc_current_model();
    let x = m.equilibrium(&Mat::scalar(1.0)).expect("A has no unit eigenvalue");
    x[0]
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VehicleParams {
    /// Total mass, kg.
    pub m: f64,
    /// CG to front axle, m.
    pub lf: f64,
    /// CG to rear axle, m.
    pub lr: f64,
    /// Front cornering stiffness, N/rad.
    pub cf: f64,
    /// Rear cornering stiffness, N/rad.
    pub cr: f64,
    /// Yaw moment of inertia, kg m^2.
    pub iz: f64,
    /// Longitudinal speed, m/s.
    pub vx: f64,
}

impl Default for VehicleParams {
    fn default() -> Self {
        Self {
            m: 1575.0,
            lf: 1.2,
            lr: 1.6,
            cf: 80_000.0,
            cr: 80_000.0,
            iz: 2875.0,
            vx: 30.0,
        }
    }
}

impl VehicleParams {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("m", self.m),
            ("lf", self.lf),
            ("lr", self.lr),
            ("cf", self.cf),
            ("cr", self.cr),
            ("iz", self.iz),
            ("vx", self.vx),
        ];
        for (name, v) in fields {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidArgument(format!("vehicle parameter {name} must be positive, got {v}")));
            }
        }
        Ok(())
    }

    pub fn wheelbase(&self) -> f64 {
        self.lf + self.lr
    }

    /// Mass carried on the rear axle.
    pub fn rear_mass(&self) -> f64 {
        self.m * self.lf / self.wheelbase()
    }

    /// Mass carried on the front axle.
    pub fn front_mass(&self) -> f64 {
        self.m * self.lr / self.wheelbase()
    }
}

/// Continuous-time lateral error dynamics. States: lateral error, its rate,
/// heading error, its rate. Input: front steering angle. Outputs: lateral
/// and heading error.
pub fn lane_keeping_model(params: &VehicleParams) -> Result<(Mat, Mat, Mat)> {
    params.validate()?;
    let VehicleParams { m, lf, lr, cf, cr, iz, vx } = *params;
    let ac = Mat::from_rows(&[
        &[0.0, 1.0, 0.0, 0.0],
        &[
            0.0,
            -(2.0 * cf + 2.0 * cr) / (m * vx),
            (2.0 * cf + 2.0 * cr) / m,
            (-2.0 * cf * lf + 2.0 * cr * lr) / (m * vx),
        ],
        &[0.0, 0.0, 0.0, 1.0],
        &[
            0.0,
            -(2.0 * cf * lf - 2.0 * cr * lr) / (iz * vx),
            (2.0 * cf * lf - 2.0 * cr * lr) / iz,
            -(2.0 * cf * lf * lf + 2.0 * cr * lr * lr) / (iz * vx),
        ],
    ])?;
    let bc = Mat::col(&[0.0, 2.0 * cf / m, 0.0, 2.0 * cf * lf / iz]);
    let c = Mat::from_rows(&[&[1.0, 0.0, 0.0, 0.0], &[0.0, 0.0, 1.0, 0.0]])?;
    Ok((ac, bc, c))
}

/// Process noise of the lane-keeping plant (per 100 ms step).
pub fn lane_keeping_process_noise() -> Mat {
    Mat::diag(&[1e-6, 1e-5, 1e-7, 1e-6])
}

/// Camera noise: 2 cm lateral, 3 mrad heading.
pub fn lane_keeping_measurement_noise() -> Mat {
    Mat::diag(&[4e-4, 9e-6])
}

/// Discretized lane-keeping plant with sampling period `ts`.
pub fn lane_keeping_discrete(params: &VehicleParams, ts: f64) -> Result<LtiModel> {
    let (ac, bc, c) = lane_keeping_model(params)?;
    let (ad, bd) = discretize_euler_zoh(&ac, &bc, ts, DEFAULT_SERIES_ORDER)?;
    LtiModel::new(
        ad,
        bd,
        c,
        Mat::zeros(2, 1),
        lane_keeping_process_noise(),
        lane_keeping_measurement_noise(),
        ts,
    )
}

/// Shaft load: while active the speed loses `speed_drag` every sampling
/// step and the current dynamics receive an extra drive whose steady-state
/// effect is `current_rise` amperes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoadDisturbance {
    pub t_on: f64,
    /// `None` keeps the load on until the end of the run.
    #[serde(default)]
    pub t_off: Option<f64>,
    pub speed_drag: f64,
    pub current_rise: f64,
}

impl LoadDisturbance {
    pub const DEFAULT_SPEED_DRAG: f64 = -0.3;
    pub const DEFAULT_CURRENT_RISE: f64 = 0.5;

    pub fn new(t_on: f64, t_off: Option<f64>, speed_drag: f64, current_rise: f64) -> Result<Self> {
        let d = Self {
            t_on,
            t_off,
            speed_drag,
            current_rise,
        };
        d.validate()?;
        Ok(d)
    }

    /// Default load switched on at `t_on` and held.
    pub fn default_from(t_on: f64) -> Self {
        Self {
            t_on,
            t_off: None,
            speed_drag: Self::DEFAULT_SPEED_DRAG,
            current_rise: Self::DEFAULT_CURRENT_RISE,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t_on >= 0.0) {
            return Err(Error::InvalidArgument("load t_on must be non-negative".into()));
        }
        if let Some(off) = self.t_off {
            if !(self.t_on < off) {
                return Err(Error::InvalidArgument("load interval must satisfy t_on < t_off".into()));
            }
        }
        if self.speed_drag > 0.0 {
            return Err(Error::InvalidArgument("speed_drag must be <= 0".into()));
        }
        if self.current_rise < 0.0 {
            return Err(Error::InvalidArgument("current_rise must be >= 0".into()));
        }
        Ok(())
    }

    pub fn is_active(&self, t: f64) -> bool {
        t >= self.t_on && self.t_off.is_none_or(|off| t < off)
    }

    /// Per-step addition to the DC-current state.
    pub fn current_increment(&self) -> Vector {
        let m = dc_current_model();
        m.b().scale(self.current_rise / dc_current_gain())
    }
}

/// Physical states touched by the load.
#[derive(Debug, Clone, PartialEq)]
pub struct MotorStates {
    pub speed: f64,
    pub current: Vector,
}

pub fn apply_load(disturbance: &LoadDisturbance, t: f64, states: &MotorStates) -> MotorStates {
    if !disturbance.is_active(t) {
        return states.clone();
    }
    MotorStates {
        speed: states.speed + disturbance.speed_drag,
        current: &states.current + &disturbance.current_increment(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::statespace::{lti_step, SimState};

    #[test]
    fn dc_motor_steady_state() {
        let m = dc_motor_model();
        let x = m.equilibrium(&Mat::scalar(100.0)).unwrap();
        assert!((x[0] - 0.095 * 100.0 / 0.09).abs() < 1e-9);
        assert!((x[0] - 105.56).abs() < 0.01);
    }

    #[test]
    fn dc_motor_rest_stays_at_rest() {
        let m = dc_motor_model();
        let z = Mat::zeros(1, 1);
        let (s, _) = lti_step(&m, &SimState::zero(&m), &z, &z, &z).unwrap();
        assert_eq!(s.x[0], 0.0);
    }

    #[test]
    fn dc_current_first_step() {
        let m = dc_current_model();
        let (s, y) = lti_step(
            &m,
            &SimState::zero(&m),
            &Mat::scalar(100.0),
            &Mat::zeros(2, 1),
            &Mat::zeros(1, 1),
        )
        .unwrap();
        assert!((s.x[0] - 6.02).abs() < 1e-12 && (s.x[1] - 3.92).abs() < 1e-12);
        assert_eq!(y[0], 0.0);
        assert_eq!(m.c().as_slice(), &[1.0, 0.0]);
    }

    #[test]
    fn dc_current_is_stable() {
        assert!(dc_current_model().a().spectral_radius().unwrap() < 1.0);
    }

    #[test]
    fn lane_keeping_structure() {
        let p = VehicleParams::default();
        let (ac, bc, c) = lane_keeping_model(&p).unwrap();
        assert_eq!(ac[(0, 1)], 1.0);
        assert_eq!(ac[(2, 3)], 1.0);
        assert_eq!(bc[1], 2.0 * p.cf / p.m);
        assert_eq!(bc[3], 2.0 * p.cf * p.lf / p.iz);
        assert_eq!(c.shape(), (2, 4));
    }

    #[test]
    fn lane_keeping_symmetric_vehicle_has_no_coupling_term() {
        let p = VehicleParams {
            lf: 1.4,
            lr: 1.4,
            ..VehicleParams::default()
        };
        let (ac, _, _) = lane_keeping_model(&p).unwrap();
        assert_eq!(ac[(1, 3)], 0.0);
    }

    #[test]
    fn lane_keeping_speed_dependence() {
        let p = VehicleParams::default();
        let fast = VehicleParams { vx: 2.0 * p.vx, ..p };
        let (a1, b1, _) = lane_keeping_model(&p).unwrap();
        let (a2, b2, _) = lane_keeping_model(&fast).unwrap();
        assert_eq!(b1, b2);
        for i in 0..4 {
            for j in 0..4 {
                let vx_dependent = matches!((i, j), (1, 1) | (1, 3) | (3, 1) | (3, 3));
                if vx_dependent {
                    assert!((a2[(i, j)] - a1[(i, j)] / 2.0).abs() < 1e-12);
                } else {
                    assert_eq!(a1[(i, j)], a2[(i, j)]);
                }
            }
        }
    }

    #[test]
    fn lane_keeping_rejects_zero_speed() {
        let p = VehicleParams {
            vx: 0.0,
            ..VehicleParams::default()
        };
        assert!(lane_keeping_model(&p).is_err());
    }

    #[test]
    fn load_outside_interval_is_identity() {
        let d = LoadDisturbance::new(5.0, Some(10.0), -2.0, 1.0).unwrap();
        let s = MotorStates {
            speed: 100.0,
            current: Mat::col(&[10.0, 10.0]),
        };
        assert_eq!(apply_load(&d, 1.0, &s), s);
        assert_eq!(apply_load(&d, 10.0, &s), s);
        let inside = apply_load(&d, 5.0, &s);
        assert_eq!(inside.speed, 98.0);
        assert!(inside.current[0] > 10.0);
    }

    #[test]
    fn zero_load_is_identity() {
        let d = LoadDisturbance::new(0.0, None, 0.0, 0.0).unwrap();
        let s = MotorStates {
            speed: 3.0,
            current: Mat::col(&[1.0, 2.0]),
        };
        assert_eq!(apply_load(&d, 7.0, &s), s);
    }

    #[test]
    fn load_validation() {
        assert!(LoadDisturbance::new(5.0, Some(5.0), -1.0, 0.0).is_err());
        assert!(LoadDisturbance::new(0.0, None, 1.0, 0.0).is_err());
        assert!(LoadDisturbance::new(0.0, None, -1.0, -0.5).is_err());
    }

    #[test]
    fn held_current_drive_settles_at_rise() {
        let d = LoadDisturbance::new(0.0, None, 0.0, 1.5).unwrap();
        let m = dc_current_model();
        let mut x = Mat::zeros(2, 1);
        for _ in 0..2000 {
            x = &(&(m.a() * &x) + &d.current_increment()) + &Mat::zeros(2, 1);
        }
        assert!((x[0] - 1.5).abs() < 1e-9);
    }
}
