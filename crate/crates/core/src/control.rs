//! Loop controllers and their state-space descriptions.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::statespace::{check_psd, LtiModel, Mat, Vector};

/// Parallel PID with back-calculation anti-windup.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PidConfig {
    pub kp: f64,
    pub ki: f64,
    pub kd: f64,
    /// Back-calculation gain.
    pub kb: f64,
    pub ts: f64,
    pub u_min: f64,
    pub u_max: f64,
}

impl PidConfig {
    /// Speed controller gains of the DC-motor testbed; output limited to the
    /// 8-bit PWM range.
    pub fn dc_motor() -> Self {
        Self {
            kp: 2.5,
            ki: 15.5,
            kd: 0.0,
            kb: 0.01,
            ts: 0.05,
            u_min: 0.0,
            u_max: 255.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.ts > 0.0) {
            return Err(Error::InvalidArgument(format!("PID ts must be positive, got {}", self.ts)));
        }
        if !(self.u_min < self.u_max) {
            return Err(Error::InvalidArgument(format!(
                "PID limits must satisfy u_min < u_max, got [{}, {}]",
                self.u_min, self.u_max
            )));
        }
        Ok(())
    }

    /// Same gains without output saturation.
    pub fn unsaturated(&self) -> Self {
        Self {
            u_min: f64::NEG_INFINITY,
            u_max: f64::INFINITY,
            ..*self
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PidState {
    pub integral: f64,
    pub prev_error: f64,
}

/// One controller step: forward-Euler integral updated before the output,
/// backward-difference derivative, clamp, then back-calculation.
pub fn pid_step(config: &PidConfig, state: &PidState, error: f64) -> (f64, PidState) {
    let integral = state.integral + config.ki * config.ts * error;
    let derivative = config.kd * (error - state.prev_error) / config.ts;
    let u_raw = config.kp * error + integral + derivative;
    let u = u_raw.clamp(config.u_min, config.u_max);
    let integral = integral + config.kb * (u - u_raw);
    (
        u,
        PidState {
            integral,
            prev_error: error,
        },
    )
}

/// Controller model published for the DC-motor testbed.
pub fn controller_lti_model() -> LtiModel {
    LtiModel::scalar(1.0, 1.0, 5.775, 3.725, 0.5, 0.0005, 0.05).expect("published controller model is valid")
}

/// Controller model obtained from the PID implementation itself (input is
/// the control error, output the unsaturated command).
///
/// With `kd == 0` this is the one-state integrator `x+ = x + ki*ts*e`,
/// `u = x + (kp + ki*ts) e`; otherwise the previous error is a second state.
pub fn pid_lti_model(config: &PidConfig, q: f64, r: f64) -> Result<LtiModel> {
    config.validate()?;
    let (kp, ki, kd, ts) = (config.kp, config.ki, config.kd, config.ts);
    if kd == 0.0 {
        return LtiModel::scalar(1.0, ki * ts, 1.0, kp + ki * ts, q, r, ts);
    }
    LtiModel::new(
        Mat::from_rows(&[&[1.0, 0.0], &[0.0, 0.0]])?,
        Mat::col(&[ki * ts, 1.0]),
        Mat::from_rows(&[&[1.0, -kd / ts]])?,
        Mat::scalar(kp + ki * ts + kd / ts),
        Mat::diag(&[q, q]),
        Mat::scalar(r),
        ts,
    )
}

#[derive(Debug, Clone, PartialEq)]
pub struct LqrWeights {
    pub qw: Mat,
    pub rw: Mat,
}

impl LqrWeights {
    pub fn new(qw: Mat, rw: Mat) -> Result<Self> {
        check_psd(&qw, "Qw")?;
        if !rw.is_symmetric(1e-12) {
            return Err(Error::NotSymmetric("Rw".into()));
        }
        rw.cholesky().map_err(|_| Error::NotPd("Rw".into()))?;
        Ok(Self { qw, rw })
    }

    /// Penalize lateral and heading errors of the lane-keeping model.
    pub fn lane_keeping() -> Self {
        Self::new(Mat::diag(&[1.0, 0.0, 1.0, 0.0]), Mat::scalar(1.0)).expect("valid default weights")
    }
}

/// Infinite-horizon discrete LQR by Riccati iteration. Returns `(K, P)`
/// with the control law `u = -K x`.
pub fn lqr_gain(a: &Mat, b: &Mat, weights: &LqrWeights, iters: usize, tol: f64) -> Result<(Mat, Mat)> {
    let n = a.rows();
    if !a.is_square() {
        return Err(Error::NotSquare {
            what: "A".into(),
            rows: a.rows(),
            cols: a.cols(),
        });
    }
    if b.rows() != n {
        return Err(Error::dims("B", format!("{n} rows"), b.rows()));
    }
    if weights.qw.shape() != (n, n) || weights.rw.shape() != (b.cols(), b.cols()) {
        return Err(Error::dims("LQR weights", format!("{n}x{n} and {m}x{m}", m = b.cols()), "other"));
    }
    let at = a.transpose();
    let bt = b.transpose();
    let gain = |p: &Mat| -> Result<Mat> {
        let s = &weights.rw + &(&(&bt * p) * b);
        Ok(&s.inverse_spd()? * &(&(&bt * p) * a))
    };
    let mut p = weights.qw.clone();
    for _ in 0..iters {
        let k = gain(&p)?;
        // P <- Qw + A^T P (A - B K)
        let closed = a - &(b * &k);
        let next = (&weights.qw + &(&(&at * &p) * &closed)).symmetrize();
        let delta = (&next - &p).norm_inf();
        p = next.check_finite("lqr iteration")?;
        if delta < tol {
            return Ok((gain(&p)?, p));
        }
    }
    Err(Error::NoConvergence {
        what: "discrete Riccati iteration".into(),
        iters,
    })
}

/// Residual of the discrete algebraic Riccati equation at `P`.
pub fn riccati_residual(a: &Mat, b: &Mat, weights: &LqrWeights, p: &Mat) -> Result<f64> {
    let at = a.transpose();
    let bt = b.transpose();
    let s = &weights.rw + &(&(&bt * p) * b);
    let apb = &(&at * p) * b;
    let correction = &(&apb * &s.inverse_spd()?) * &(&(&bt * p) * a);
    let rhs = &(&weights.qw + &(&(&at * p) * a)) - &correction;
    Ok((p - &rhs).norm_inf())
}

/// Observer-based state feedback `u = -K x_hat` running a steady-state
/// Kalman filter in predictor form. Its input is the tracking error
/// `e = reference - y` with a zero reference.
#[derive(Debug, Clone)]
pub struct LtiController {
    model: LtiModel,
    z: Vector,
}

impl LtiController {
    pub fn new(model: LtiModel, z0: Vector) -> Result<Self> {
        if z0.shape() != (model.n_states(), 1) {
            return Err(Error::dims("controller state", model.n_states(), z0.rows()));
        }
        Ok(Self { model, z: z0 })
    }

    pub fn model(&self) -> &LtiModel {
        &self.model
    }

    pub fn state(&self) -> &Vector {
        &self.z
    }

    /// Output for error `e`, then advance the internal state.
    pub fn step(&mut self, e: &Vector) -> Vector {
        let u = self.model.output(&self.z, e);
        self.z = &(self.model.a() * &self.z) + &(self.model.b() * e);
        u
    }
}

/// State-space form of the observer-based controller built from plant
/// `plant`, feedback gain `k` and estimator gain `l`:
/// `z+ = (A-BK)(I-LC) z - (A-BK) L e`, `u = -K(I-LC) z + K L e`.
pub fn lqg_controller_model(plant: &LtiModel, k: &Mat, l: &Mat, q: Mat, r: Mat) -> Result<LtiModel> {
    let n = plant.n_states();
    let a_cl = plant.a() - &(plant.b() * k);
    let i_lc = &Mat::identity(n) - &(l * plant.c());
    LtiModel::new(
        &a_cl * &i_lc,
        -&(&a_cl * l),
        -&(k * &i_lc),
        k * l,
        q,
        r,
        plant.ts(),
    )
}
