//! Kalman filtering, residual generation and the chi-squared residual test.

use crate::error::{Error, Result};
use crate::statespace::{check_psd, LtiModel, Mat, Vector};

/// Initial covariance used when the initial state is unknown.
pub const UNKNOWN_STATE_VARIANCE: f64 = 1e6;

/// Number of filter steps during which residual flags are inhibited.
pub const STARTUP_INHIBIT_STEPS: u64 = 20;

#[derive(Debug, Clone, PartialEq)]
pub enum InitialEstimate {
    Known { x0: Vector, p0: Mat },
    /// Zero state with a very large diagonal covariance.
    Unknown,
}

#[derive(Debug, Clone)]
struct Prediction {
    x: Vector,
    p: Mat,
    y: Vector,
    sigma: Mat,
    sigma_inv: Mat,
}

/// Two-step (predict/update) linear Kalman filter that records its
/// innovation and innovation covariance.
#[derive(Debug, Clone)]
pub struct KalmanFilter {
    model: LtiModel,
    x_hat: Vector,
    p: Mat,
    gain: Mat,
    pending: Option<Prediction>,
    last_residual: Vector,
    last_sigma: Mat,
    updates: u64,
}

impl KalmanFilter {
    pub fn new(model: LtiModel, init: InitialEstimate) -> Result<Self> {
        let n = model.n_states();
        let (x0, p0) = match init {
            InitialEstimate::Known { x0, p0 } => (x0, p0),
            InitialEstimate::Unknown => (
                Mat::zeros(n, 1),
                Mat::identity(n).scale(UNKNOWN_STATE_VARIANCE),
            ),
        };
        if x0.shape() != (n, 1) {
            return Err(Error::dims("x0", n, x0.rows()));
        }
        if p0.shape() != (n, n) {
            return Err(Error::dims("P0", format!("{n}x{n}"), format!("{}x{}", p0.rows(), p0.cols())));
        }
        check_psd(&p0, "P0")?;
        let p = model.n_outputs();
        Ok(Self {
            gain: Mat::zeros(n, p),
            last_residual: Mat::zeros(p, 1),
            last_sigma: model.r().clone(),
            model,
            x_hat: x0,
            p: p0,
            pending: None,
            updates: 0,
        })
    }

    pub fn model(&self) -> &LtiModel {
        &self.model
    }

    /// Swap the model (same dimensions) before the next prediction, e.g.
    /// for context-dependent input gains.
    pub fn set_model(&mut self, model: LtiModel) -> Result<()> {
        if (model.n_states(), model.n_inputs(), model.n_outputs())
            != (self.model.n_states(), self.model.n_inputs(), self.model.n_outputs())
        {
            return Err(Error::dims("replacement model", "same dimensions", "different dimensions"));
        }
        self.model = model;
        Ok(())
    }

    pub fn x_hat(&self) -> &Vector {
        &self.x_hat
    }

    pub fn covariance(&self) -> &Mat {
        &self.p
    }

    pub fn gain(&self) -> &Mat {
        &self.gain
    }

    pub fn last_residual(&self) -> &Vector {
        &self.last_residual
    }

    pub fn last_sigma(&self) -> &Mat {
        &self.last_sigma
    }

    pub fn updates(&self) -> u64 {
        self.updates
    }

    /// True while residual flags should still be inhibited.
    pub fn in_startup(&self) -> bool {
        self.updates <= STARTUP_INHIBIT_STEPS
    }

    pub fn predicted_output(&self) -> Option<&Vector> {
        self.pending.as_ref().map(|p| &p.y)
    }

    pub fn predicted_sigma(&self) -> Option<&Mat> {
        self.pending.as_ref().map(|p| &p.sigma)
    }

    /// Predict with the same input driving the state and the feedthrough.
    pub fn predict(&mut self, u: &Vector) -> Result<Vector> {
        self.predict_with(u, u)
    }

    /// Predict with `u_state` driving `A x + B u` and `u_out` entering the
    /// predicted output through `D`. For controllers the two differ by one
    /// sample: the state advances with the previous error while the output
    /// responds to the current one.
    pub fn predict_with(&mut self, u_state: &Vector, u_out: &Vector) -> Result<Vector> {
        let m = self.model.n_inputs();
        for u in [u_state, u_out] {
            if u.shape() != (m, 1) {
                return Err(Error::dims("filter input", m, u.rows()));
            }
        }
        let a = self.model.a();
        let x = &(a * &self.x_hat) + &(self.model.b() * u_state);
        let p = &(&(a * &self.p) * &a.transpose()) + self.model.q();
        let p = p.symmetrize();
        let y = self.model.output(&x, u_out);
        let c = self.model.c();
        let sigma = (&(&(c * &p) * &c.transpose()) + self.model.r()).symmetrize();
        let sigma_inv = sigma
            .inverse_spd()
            .map_err(|_| Error::Singular("residual covariance".into()))?;
        self.pending = Some(Prediction {
            x: x.check_finite("kalman predict")?,
            p,
            y: y.clone(),
            sigma,
            sigma_inv,
        });
        Ok(y)
    }

    /// Residual and its power for a candidate measurement against the
    /// pending prediction, without updating.
    pub fn evaluate(&self, y: &Vector) -> Result<(Vector, f64)> {
        let pred = self.pending.as_ref().ok_or(Error::UpdateWithoutPredict)?;
        if y.shape() != pred.y.shape() {
            return Err(Error::dims("measurement", pred.y.rows(), y.rows()));
        }
        let r = y - &pred.y;
        let power = r.dot(&(&pred.sigma_inv * &r));
        Ok((r, power))
    }

    /// Correct the pending prediction with measurement `y`; returns the residual.
    pub fn update(&mut self, y: &Vector) -> Result<Vector> {
        let pred = self.pending.take().ok_or(Error::UpdateWithoutPredict)?;
        if y.shape() != pred.y.shape() {
            let rows = pred.y.rows();
            self.pending = Some(pred);
            return Err(Error::dims("measurement", rows, y.rows()));
        }
        let c = self.model.c();
        let k = &(&pred.p * &c.transpose()) * &pred.sigma_inv;
        let r = y - &pred.y;
        let x = &pred.x + &(&k * &r);
        let n = self.model.n_states();
        let p = (&(&Mat::identity(n) - &(&k * c)) * &pred.p).symmetrize();
        self.x_hat = x.check_finite("kalman update")?;
        self.p = p;
        self.gain = k;
        self.last_residual = r.clone();
        self.last_sigma = pred.sigma;
        self.updates += 1;
        Ok(r)
    }

    /// Accept the prediction as the new estimate (no measurement arrived).
    pub fn skip_update(&mut self) -> Result<()> {
        let pred = self.pending.take().ok_or(Error::UpdateWithoutPredict)?;
        self.x_hat = pred.x;
        self.p = pred.p;
        Ok(())
    }
}

/// `r^T Sigma^-1 r`.
pub fn residual_power(r: &Vector, sigma: &Mat) -> Result<f64> {
    if sigma.shape() != (r.rows(), r.rows()) || r.cols() != 1 {
        return Err(Error::dims("residual covariance", r.rows(), sigma.rows()));
    }
    let inv = sigma
        .inverse_spd()
        .map_err(|_| Error::Singular("residual covariance".into()))?;
    Ok(r.dot(&(&inv * r)).max(0.0))
}

// ---------------------------------------------------------------------------
// chi-squared distribution

fn ln_gamma(x: f64) -> f64 {
    // Lanczos, g = 7, n = 9
    const COEF: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let t = x + 7.5;
    let mut sum = COEF[0];
    for (i, c) in COEF.iter().enumerate().skip(1) {
        sum += c / (x + i as f64);
    }
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + sum.ln()
}

/// Regularized incomplete gamma functions `(P(a, x), Q(a, x))`.
fn incomplete_gamma(a: f64, x: f64) -> (f64, f64) {
    if x <= 0.0 {
        return (0.0, 1.0);
    }
    let log_prefactor = a * x.ln() - x - ln_gamma(a);
    if x < a + 1.0 {
        let mut term = 1.0 / a;
        let mut sum = term;
        let mut ap = a;
        for _ in 0..10_000 {
            ap += 1.0;
            term *= x / ap;
            sum += term;
            if term.abs() < sum.abs() * 1e-17 {
                break;
            }
        }
        let p = (sum.ln() + log_prefactor).exp().min(1.0);
        (p, 1.0 - p)
    } else {
        // modified Lentz continued fraction for Q
        let tiny = 1e-300;
        let mut b = x + 1.0 - a;
        let mut c = 1.0 / tiny;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..10_000 {
            let an = -(i as f64) * (i as f64 - a);
            b += 2.0;
            d = an * d + b;
            if d.abs() < tiny {
                d = tiny;
            }
            c = b + an / c;
            if c.abs() < tiny {
                c = tiny;
            }
            d = 1.0 / d;
            let delta = d * c;
            h *= delta;
            if (delta - 1.0).abs() < 1e-17 {
                break;
            }
        }
        let q = (h.ln() + log_prefactor).exp().min(1.0);
        (1.0 - q, q)
    }
}

/// CDF of the chi-squared distribution with `dof` degrees of freedom.
pub fn chi2_cdf(x: f64, dof: u32) -> f64 {
    incomplete_gamma(dof as f64 / 2.0, x / 2.0).0
}

/// Upper tail `1 - CDF`, computed without cancellation.
pub fn chi2_sf(x: f64, dof: u32) -> f64 {
    incomplete_gamma(dof as f64 / 2.0, x / 2.0).1
}

/// `g` with `CDF(g) = prob`.
pub fn chi2_quantile(prob: f64, dof: u32) -> Result<f64> {
    if !(prob > 0.0 && prob < 1.0) {
        return Err(Error::InvalidArgument(format!("probability must lie in (0, 1), got {prob}")));
    }
    if dof == 0 {
        return Err(Error::InvalidArgument("degrees of freedom must be at least 1".into()));
    }
    let k = dof as f64;
    // Wilson-Hilferty seed
    let z = standard_normal_quantile_approx(prob);
    let h = 2.0 / (9.0 * k);
    let seed = (k * (1.0 - h + z * h.sqrt()).powi(3)).max(1e-8);

    // work on whichever tail is small so precision stays relative
    let upper = prob > 0.5;
    let target = if upper { 1.0 - prob } else { prob };
    let below = |x: f64| -> bool {
        // true when x is below the quantile
        if upper {
            chi2_sf(x, dof) > target
        } else {
            chi2_cdf(x, dof) < target
        }
    };
    let (mut lo, mut hi) = (seed, seed);
    while lo > 0.0 && !below(lo) {
        lo *= 0.5;
        if lo < 1e-300 {
            lo = 0.0;
        }
    }
    while below(hi) {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if below(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Acklam's rational approximation; only used to seed the bracket.
fn standard_normal_quantile_approx(p: f64) -> f64 {
    const A: [f64; 6] = [
        -3.969_683_028_665_376e1,
        2.209_460_984_245_205e2,
        -2.759_285_104_469_687e2,
        1.383_577_518_672_69e2,
        -3.066_479_806_614_716e1,
        2.506_628_277_459_239,
    ];
    const B: [f64; 5] = [
        -5.447_609_879_822_406e1,
        1.615_858_368_580_409e2,
        -1.556_989_798_598_866e2,
        6.680_131_188_771_972e1,
        -1.328_068_155_288_572e1,
    ];
    const C: [f64; 6] = [
        -7.784_894_002_430_293e-3,
        -3.223_964_580_411_365e-1,
        -2.400_758_277_161_838,
        -2.549_732_539_343_734,
        4.374_664_141_464_968,
        2.938_163_982_698_783,
    ];
    const D: [f64; 4] = [
        7.784_695_709_041_462e-3,
        3.224_671_290_700_398e-1,
        2.445_134_137_142_996,
        3.754_408_661_907_416,
    ];
    let tail = |q: f64| {
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    };
    if p < 0.02425 {
        tail((-2.0 * p.ln()).sqrt())
    } else if p > 1.0 - 0.02425 {
        -tail((-2.0 * (1.0 - p).ln()).sqrt())
    } else {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    }
}

/// Fixed-threshold residual test.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Chi2Detector {
    p_fa: f64,
    dof: u32,
    g: f64,
}

impl Chi2Detector {
    pub fn new(p_fa: f64, dof: u32) -> Result<Self> {
        if !(p_fa > 0.0 && p_fa < 1.0) {
            return Err(Error::InvalidArgument(format!("false-alarm probability must lie in (0, 1), got {p_fa}")));
        }
        Ok(Self {
            p_fa,
            dof,
            g: chi2_quantile(1.0 - p_fa, dof)?,
        })
    }

    pub fn p_fa(&self) -> f64 {
        self.p_fa
    }

    pub fn dof(&self) -> u32 {
        self.dof
    }

    pub fn threshold(&self) -> f64 {
        self.g
    }

    pub fn exceeds(&self, power: f64) -> bool {
        power > self.g
    }
}

/// Iterate the covariance recursion to its fixed point. Returns the
/// steady-state gain and the steady-state predicted covariance.
pub fn steady_state_gain(model: &LtiModel, iters: usize, tol: f64) -> Result<(Mat, Mat)> {
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument("tolerance must be positive".into()));
    }
    let a = model.a();
    let c = model.c();
    let n = model.n_states();
    let gain_for = |p_prior: &Mat| -> Result<Mat> {
        let sigma = &(&(c * p_prior) * &c.transpose()) + model.r();
        let inv = sigma
            .inverse_spd()
            .map_err(|_| Error::Singular("residual covariance".into()))?;
        Ok(&(p_prior * &c.transpose()) * &inv)
    };
    let mut p_prior = model.q().clone();
    for _ in 0..iters {
        let k = gain_for(&p_prior)?;
        let p_post = &(&Mat::identity(n) - &(&k * c)) * &p_prior;
        let next = (&(&(a * &p_post) * &a.transpose()) + model.q()).symmetrize();
        let delta = (&next - &p_prior).norm_inf();
        p_prior = next;
        if delta < tol {
            let k = gain_for(&p_prior)?;
            return Ok((k, p_prior));
        }
    }
    Err(Error::NoConvergence {
        what: "steady-state Kalman covariance".into(),
        iters,
    })
}
