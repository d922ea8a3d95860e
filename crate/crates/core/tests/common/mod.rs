//! Reference implementations used as test oracles. They share no code with
//! the library beyond the matrix container.

#![allow(dead_code)]

use cps_ids::control::PidConfig;
use cps_ids::statespace::{LtiModel, Mat};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

pub fn to_na(m: &Mat) -> DMatrix<f64> {
    DMatrix::from_row_slice(m.rows(), m.cols(), m.as_slice())
}

pub fn from_na(m: &DMatrix<f64>) -> Mat {
    let rows: Vec<f64> = (0..m.nrows()).flat_map(|i| (0..m.ncols()).map(move |j| (i, j))).map(|(i, j)| m[(i, j)]).collect();
    Mat::new(m.nrows(), m.ncols(), rows).unwrap()
}

/// Relative difference in the max norm, with the oracle as reference.
pub fn rel_err(got: &DMatrix<f64>, want: &DMatrix<f64>) -> f64 {
    let scale = want.amax().max(1e-300);
    (got - want).amax() / scale
}

/// Predict/update Kalman filter written straight from the textbook.
pub struct TextbookKf {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub c: DMatrix<f64>,
    pub d: DMatrix<f64>,
    pub q: DMatrix<f64>,
    pub r: DMatrix<f64>,
    pub x: DMatrix<f64>,
    pub p: DMatrix<f64>,
}

impl TextbookKf {
    pub fn step(&mut self, u: &DMatrix<f64>, y: &DMatrix<f64>) {
        let x_pred = &self.a * &self.x + &self.b * u;
        let p_pred = &self.a * &self.p * self.a.transpose() + &self.q;
        let s = &self.c * &p_pred * self.c.transpose() + &self.r;
        let s_inv = s.clone().try_inverse().expect("innovation covariance invertible");
        let k = &p_pred * self.c.transpose() * s_inv;
        let innovation = y - (&self.c * &x_pred + &self.d * u);
        let n = self.a.nrows();
        self.x = &x_pred + &k * innovation;
        self.p = (DMatrix::identity(n, n) - &k * &self.c) * p_pred;
    }
}

pub struct RandomSystem {
    pub model: LtiModel,
    pub x0: Mat,
    pub p0: Mat,
}

fn random_matrix(rng: &mut ChaCha20Rng, r: usize, c: usize) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| rng.random_range(-1.0..1.0))
}

fn random_spd(rng: &mut ChaCha20Rng, n: usize, floor: f64) -> DMatrix<f64> {
    let g = random_matrix(rng, n, n);
    let m = &g * g.transpose() + DMatrix::identity(n, n) * floor;
    (&m + m.transpose()) * 0.5
}

/// Stable system with `n <= 4` states, `p <= 2` outputs and `m <= 2` inputs.
pub fn random_stable_system(seed: u64) -> RandomSystem {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let n = rng.random_range(1..=4);
    let p = rng.random_range(1..=2);
    let m = rng.random_range(1..=2);
    let mut a = random_matrix(&mut rng, n, n);
    let radius = a
        .complex_eigenvalues()
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max);
    let target = rng.random_range(0.3..0.95);
    if radius > 0.0 {
        a *= target / radius;
    }
    let b = random_matrix(&mut rng, n, m);
    let c = random_matrix(&mut rng, p, n);
    let d = if rng.random_bool(0.5) {
        random_matrix(&mut rng, p, m) * 0.1
    } else {
        DMatrix::zeros(p, m)
    };
    let q = random_spd(&mut rng, n, 0.01) * 0.1;
    let r = random_spd(&mut rng, p, 0.05) * 0.1;
    let x0 = random_matrix(&mut rng, n, 1);
    let p0 = random_spd(&mut rng, n, 0.1);
    let model = LtiModel::new(
        from_na(&a),
        from_na(&b),
        from_na(&c),
        from_na(&d),
        from_na(&q),
        from_na(&r),
        0.1,
    )
    .unwrap();
    RandomSystem {
        model,
        x0: from_na(&x0),
        p0: from_na(&p0),
    }
}

/// Closed motor speed loop driven by a set-point step, simulated without
/// any library code. Returns the integrator value after every step.
pub fn pid_integral_trajectory(cfg: &PidConfig, reference: f64, steps: usize) -> Vec<f64> {
    let (a, b) = (0.91, 0.095);
    let mut speed = 0.0;
    let mut integ = 0.0;
    let mut out = Vec::with_capacity(steps);
    for _ in 0..steps {
        let e = reference - speed;
        let pre = integ + cfg.ki * cfg.ts * e;
        let wanted = cfg.kp * e + pre;
        let applied = if wanted > cfg.u_max {
            cfg.u_max
        } else if wanted < cfg.u_min {
            cfg.u_min
        } else {
            wanted
        };
        // (1 - kb) * pre + kb * (applied - kp * e), same as pre + kb * (applied - wanted)
        integ = (1.0 - cfg.kb) * pre + cfg.kb * (applied - cfg.kp * e);
        out.push(integ);
        speed = a * speed + b * applied;
    }
    out
}

/// Integrator value at which back-calculation balances the integral action
/// for a constant error `e` with the output pinned at `u_sat`.
pub fn windup_fixed_point(cfg: &PidConfig, e: f64, u_sat: f64) -> f64 {
    u_sat - cfg.kp * e + (1.0 - cfg.kb) * cfg.ki * cfg.ts * e / cfg.kb
}

/// Drive the library filter and the textbook filter with the same inputs
/// and measurements; returns the worst relative error on (x_hat, P).
pub fn compare_with_textbook(seed: u64, steps: usize) -> (f64, f64) {
    use cps_ids::estimation::{InitialEstimate, KalmanFilter};
    let sys = random_stable_system(seed);
    let m = &sys.model;
    let mut kf = KalmanFilter::new(
        m.clone(),
        InitialEstimate::Known {
            x0: sys.x0.clone(),
            p0: sys.p0.clone(),
        },
    )
    .unwrap();
    let mut oracle = TextbookKf {
        a: to_na(m.a()),
        b: to_na(m.b()),
        c: to_na(m.c()),
        d: to_na(m.d()),
        q: to_na(m.q()),
        r: to_na(m.r()),
        x: to_na(&sys.x0),
        p: to_na(&sys.p0),
    };
    let mut rng = ChaCha20Rng::seed_from_u64(seed ^ 0x5eed);
    let mut truth = to_na(&sys.x0);
    let (mut ex, mut ep) = (0.0f64, 0.0f64);
    for _ in 0..steps {
        let u = random_matrix(&mut rng, m.n_inputs(), 1);
        truth = &oracle.a * &truth + &oracle.b * &u + random_matrix(&mut rng, m.n_states(), 1) * 0.1;
        let y = &oracle.c * &truth + &oracle.d * &u + random_matrix(&mut rng, m.n_outputs(), 1) * 0.1;
        kf.predict(&from_na(&u)).unwrap();
        kf.update(&from_na(&y)).unwrap();
        oracle.step(&u, &y);
        ex = ex.max(rel_err(&to_na(kf.x_hat()), &oracle.x));
        ep = ep.max(rel_err(&to_na(kf.covariance()), &oracle.p));
    }
    (ex, ep)
}
