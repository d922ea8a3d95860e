//! Discrete-time LTI models, one-step simulation, discretization and
//! seeded Gaussian noise.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
pub use crate::linalg::{Mat, Vector};

/// Deterministic generator used for every stochastic quantity in a run.
pub type SimRng = ChaCha8Rng;

/// Tolerance for the symmetry checks on covariances.
pub const SYMMETRY_TOL: f64 = 1e-12;
/// Zero-pivot tolerance used when factoring a PSD covariance.
pub const PSD_JITTER: f64 = 1e-12;

/// Default truncation order of the matrix-exponential series.
pub const DEFAULT_SERIES_ORDER: usize = 12;

/// `x[k+1] = A x[k] + B u[k] + w[k]`, `y[k] = C x[k] + D u[k] + v[k]`
/// with `w ~ N(0, Q)`, `v ~ N(0, R)` and sampling period `ts`.
#[derive(Debug, Clone, PartialEq)]
pub struct LtiModel {
    a: Mat,
    b: Mat,
    c: Mat,
    d: Mat,
    q: Mat,
    r: Mat,
    ts: f64,
}

impl LtiModel {
    pub fn new(a: Mat, b: Mat, c: Mat, d: Mat, q: Mat, r: Mat, ts: f64) -> Result<Self> {
        if !a.is_square() {
            return Err(Error::NotSquare {
                what: "A".into(),
                rows: a.rows(),
                cols: a.cols(),
            });
        }
        let n = a.rows();
        if b.rows() != n {
            return Err(Error::dims("B", format!("{n} rows"), format!("{}x{}", b.rows(), b.cols())));
        }
        let m = b.cols();
        if c.cols() != n {
            return Err(Error::dims("C", format!("{n} columns"), format!("{}x{}", c.rows(), c.cols())));
        }
        let p = c.rows();
        if d.shape() != (p, m) {
            return Err(Error::dims("D", format!("{p}x{m}"), format!("{}x{}", d.rows(), d.cols())));
        }
        if q.shape() != (n, n) {
            return Err(Error::dims("Q", format!("{n}x{n}"), format!("{}x{}", q.rows(), q.cols())));
        }
        if r.shape() != (p, p) {
            return Err(Error::dims("R", format!("{p}x{p}"), format!("{}x{}", r.rows(), r.cols())));
        }
        if !(ts > 0.0 && ts.is_finite()) {
            return Err(Error::InvalidArgument(format!("sampling period must be positive, got {ts}")));
        }
        check_psd(&q, "Q")?;
        if !r.is_symmetric(SYMMETRY_TOL) {
            return Err(Error::NotSymmetric("R".into()));
        }
        r.cholesky().map_err(|_| Error::NotPd("R".into()))?;
        Ok(Self { a, b, c, d, q, r, ts })
    }

    /// Scalar convenience constructor.
    pub fn scalar(a: f64, b: f64, c: f64, d: f64, q: f64, r: f64, ts: f64) -> Result<Self> {
        Self::new(
            Mat::scalar(a),
            Mat::scalar(b),
            Mat::scalar(c),
            Mat::scalar(d),
            Mat::scalar(q),
            Mat::scalar(r),
            ts,
        )
    }

    pub fn a(&self) -> &Mat {
        &self.a
    }
    pub fn b(&self) -> &Mat {
        &self.b
    }
    pub fn c(&self) -> &Mat {
        &self.c
    }
    pub fn d(&self) -> &Mat {
        &self.d
    }
    pub fn q(&self) -> &Mat {
        &self.q
    }
    pub fn r(&self) -> &Mat {
        &self.r
    }
    pub fn ts(&self) -> f64 {
        self.ts
    }
    pub fn n_states(&self) -> usize {
        self.a.rows()
    }
    pub fn n_inputs(&self) -> usize {
        self.b.cols()
    }
    pub fn n_outputs(&self) -> usize {
        self.c.rows()
    }

    pub fn has_feedthrough(&self) -> bool {
        self.d.max_abs() != 0.0
    }

    /// Same model with the input matrix replaced.
    pub fn with_b(&self, b: Mat) -> Result<Self> {
        if b.shape() != self.b.shape() {
            return Err(Error::dims(
                "B",
                format!("{}x{}", self.b.rows(), self.b.cols()),
                format!("{}x{}", b.rows(), b.cols()),
            ));
        }
        Ok(Self { b, ..self.clone() })
    }

    pub fn with_noise(&self, q: Mat, r: Mat) -> Result<Self> {
        Self::new(
            self.a.clone(),
            self.b.clone(),
            self.c.clone(),
            self.d.clone(),
            q,
            r,
            self.ts,
        )
    }

    /// Noiseless output for state `x` and input `u`.
    pub fn output(&self, x: &Vector, u: &Vector) -> Vector {
        &(&self.c * x) + &(&self.d * u)
    }

    /// Equilibrium state for a constant input, `(I - A)^-1 B u`.
    pub fn equilibrium(&self, u: &Vector) -> Result<Vector> {
        let n = self.n_states();
        let lhs = &Mat::identity(n) - &self.a;
        Ok(&lhs.inverse()? * &(&self.b * u))
    }
}

/// Errors if `m` is not symmetric positive semi-definite.
pub fn check_psd(m: &Mat, name: &str) -> Result<()> {
    if !m.is_symmetric(SYMMETRY_TOL) {
        return Err(Error::NotSymmetric(name.into()));
    }
    psd_factor(m).map(|_| ()).map_err(|_| Error::NotPsd(name.into()))
}

/// Lower factor `L` with `L L^T = m` for symmetric PSD `m`; pivots below
/// [`PSD_JITTER`] (relative to the largest diagonal entry) become zero
/// columns, so a zero covariance factors to exactly zero.
pub fn psd_factor(m: &Mat) -> Result<Mat> {
    if !m.is_square() {
        return Err(Error::NotSquare {
            what: "covariance".into(),
            rows: m.rows(),
            cols: m.cols(),
        });
    }
    let n = m.rows();
    let tol = PSD_JITTER * (0..n).map(|i| m[(i, i)].abs()).fold(1.0, f64::max);
    let mut l = Mat::zeros(n, n);
    for j in 0..n {
        let mut d = m[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if d < -tol {
            return Err(Error::NotPsd("covariance".into()));
        }
        if d <= tol {
            // the rest of this column must vanish for a PSD matrix
            for i in (j + 1)..n {
                let mut s = m[(i, j)];
                for k in 0..j {
                    s -= l[(i, k)] * l[(j, k)];
                }
                if s.abs() > tol.sqrt() {
                    return Err(Error::NotPsd("covariance".into()));
                }
            }
            continue;
        }
        let d = d.sqrt();
        l[(j, j)] = d;
        for i in (j + 1)..n {
            let mut s = m[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / d;
        }
    }
    Ok(l)
}

/// State of a simulated model.
#[derive(Debug, Clone, PartialEq)]
pub struct SimState {
    pub x: Vector,
    pub k: u64,
}

impl SimState {
    pub fn new(model: &LtiModel, x: Vector) -> Result<Self> {
        if x.shape() != (model.n_states(), 1) {
            return Err(Error::dims("initial state", model.n_states(), x.rows()));
        }
        Ok(Self { x, k: 0 })
    }

    pub fn zero(model: &LtiModel) -> Self {
        Self {
            x: Mat::zeros(model.n_states(), 1),
            k: 0,
        }
    }
}

/// One step. `y` uses the pre-step state.
pub fn lti_step(
    model: &LtiModel,
    state: &SimState,
    u: &Vector,
    w: &Vector,
    v: &Vector,
) -> Result<(SimState, Vector)> {
    let (n, m, p) = (model.n_states(), model.n_inputs(), model.n_outputs());
    if state.x.shape() != (n, 1) {
        return Err(Error::dims("state", n, state.x.rows()));
    }
    if u.shape() != (m, 1) {
        return Err(Error::dims("input u", m, u.rows()));
    }
    if w.shape() != (n, 1) {
        return Err(Error::dims("process noise w", n, w.rows()));
    }
    if v.shape() != (p, 1) {
        return Err(Error::dims("measurement noise v", p, v.rows()));
    }
    let y = &model.output(&state.x, u) + v;
    let x = &(&(&model.a * &state.x) + &(&model.b * u)) + w;
    let x = x.check_finite("lti_step")?;
    Ok((SimState { x, k: state.k + 1 }, y))
}

/// Zero-order-hold discretization through the truncated exponential series.
pub fn discretize_euler_zoh(ac: &Mat, bc: &Mat, ts: f64, order: usize) -> Result<(Mat, Mat)> {
    if !ac.is_square() {
        return Err(Error::NotSquare {
            what: "Ac".into(),
            rows: ac.rows(),
            cols: ac.cols(),
        });
    }
    if bc.rows() != ac.rows() {
        return Err(Error::dims("Bc", format!("{} rows", ac.rows()), bc.rows()));
    }
    if !(ts > 0.0) {
        return Err(Error::InvalidArgument(format!("ts must be positive, got {ts}")));
    }
    if order == 0 {
        return Err(Error::InvalidArgument("series order must be at least 1".into()));
    }
    let n = ac.rows();
    // term_i = Ac^i ts^i / i!; the input integral uses Ac^(i-1) ts^i / i! = term_(i-1) * ts / i
    let mut ad = Mat::identity(n);
    let mut integral = Mat::zeros(n, n);
    let mut term = Mat::identity(n);
    for i in 1..=order {
        integral = &integral + &term.scale(ts / i as f64);
        term = (&term * ac).scale(ts / i as f64);
        ad = &ad + &term;
    }
    let bd = &integral * bc;
    Ok((ad.check_finite("discretize")?, bd.check_finite("discretize")?))
}

/// Sub-step matrices for a model given only in discrete time: `(A_s, B_s)`
/// such that `substeps` steps of `(A_s, B_s)` under a held input reproduce
/// one step of `(A, B)` exactly.
pub fn rescale_period(a: &Mat, b: &Mat, substeps: usize) -> Result<(Mat, Mat)> {
    if substeps == 0 {
        return Err(Error::InvalidArgument("substeps must be positive".into()));
    }
    if substeps == 1 {
        return Ok((a.clone(), b.clone()));
    }
    let n = a.rows();
    let a_s = a.logm()?.scale(1.0 / substeps as f64).expm()?;
    let mut sum = Mat::zeros(n, n);
    let mut pow = Mat::identity(n);
    for _ in 0..substeps {
        sum = &sum + &pow;
        pow = &pow * &a_s;
    }
    let b_s = &sum.inverse()? * b;
    Ok((a_s, b_s))
}

/// Pre-factored zero-mean Gaussian source.
#[derive(Debug, Clone)]
pub struct GaussianSource {
    factor: Mat,
}

impl GaussianSource {
    pub fn new(cov: &Mat) -> Result<Self> {
        check_psd(cov, "noise covariance")?;
        Ok(Self {
            factor: psd_factor(cov)?,
        })
    }

    pub fn dim(&self) -> usize {
        self.factor.rows()
    }

    pub fn sample(&self, rng: &mut SimRng) -> Vector {
        let n = self.factor.rows();
        let z: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        &self.factor * &Mat::col(&z)
    }
}

/// One zero-mean sample with covariance `cov`.
pub fn gaussian_noise(rng: &mut SimRng, cov: &Mat) -> Result<Vector> {
    Ok(GaussianSource::new(cov)?.sample(rng))
}

/// Serializable plain matrix, used in config and calibration files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatRows(pub Vec<Vec<f64>>);

impl TryFrom<&MatRows> for Mat {
    type Error = Error;

    fn try_from(m: &MatRows) -> Result<Mat> {
        let rows: Vec<&[f64]> = m.0.iter().map(|r| r.as_slice()).collect();
        Mat::from_rows(&rows)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn dc_motor() -> LtiModel {
        LtiModel::scalar(0.91, 0.095, 1.0, 0.0, 0.005, 0.1, 0.05).unwrap()
    }

    #[test]
    fn scalar_dc_motor_is_valid() {
        let m = dc_motor();
        assert_eq!((m.n_states(), m.n_inputs(), m.n_outputs()), (1, 1, 1));
    }

    #[test]
    fn inconsistent_b_is_rejected() {
        let err = LtiModel::new(
            Mat::identity(2),
            Mat::zeros(3, 1),
            Mat::from_rows(&[&[1.0, 0.0]]).unwrap(),
            Mat::zeros(1, 1),
            Mat::zeros(2, 2),
            Mat::scalar(1.0),
            0.1,
        )
        .unwrap_err();
        match err {
            Error::DimensionMismatch { what, .. } => assert_eq!(what, "B"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn zero_r_is_not_pd() {
        let err = LtiModel::scalar(0.91, 0.095, 1.0, 0.0, 0.005, 0.0, 0.05).unwrap_err();
        assert!(matches!(err, Error::NotPd(_)));
    }

    #[test]
    fn negative_q_is_not_psd() {
        let err = LtiModel::scalar(0.91, 0.095, 1.0, 0.0, -0.1, 0.1, 0.05).unwrap_err();
        assert!(matches!(err, Error::NotPsd(_)));
    }

    #[test]
    fn dc_motor_one_step() {
        let m = dc_motor();
        let s = SimState::zero(&m);
        let z = Mat::zeros(1, 1);
        let (next, y) = lti_step(&m, &s, &Mat::scalar(100.0), &z, &z).unwrap();
        assert!((next.x[0] - 9.5).abs() < 1e-12);
        assert_eq!(y[0], 0.0);
        assert_eq!(next.k, 1);
    }

    #[test]
    fn identity_dynamics_hold_state() {
        let m = LtiModel::new(
            Mat::identity(2),
            Mat::zeros(2, 1),
            Mat::identity(2),
            Mat::zeros(2, 1),
            Mat::zeros(2, 2),
            Mat::identity(2),
            1.0,
        )
        .unwrap();
        let s = SimState::new(&m, Mat::col(&[3.0, -4.0])).unwrap();
        let (next, _) = lti_step(&m, &s, &Mat::scalar(7.0), &Mat::zeros(2, 1), &Mat::zeros(2, 1)).unwrap();
        assert_eq!(next.x, s.x);
    }

    #[test]
    fn feedthrough_first_output() {
        let m = LtiModel::scalar(1.0, 1.0, 5.775, 3.725, 0.5, 0.0005, 0.05).unwrap();
        let (_, y) = lti_step(&m, &SimState::zero(&m), &Mat::scalar(1.0), &Mat::zeros(1, 1), &Mat::zeros(1, 1)).unwrap();
        assert!((y[0] - 3.725).abs() < 1e-12);
    }

    #[test]
    fn step_rejects_wrong_input_length() {
        let m = dc_motor();
        assert!(lti_step(&m, &SimState::zero(&m), &Mat::col(&[1.0, 2.0]), &Mat::zeros(1, 1), &Mat::zeros(1, 1)).is_err());
    }

    #[test]
    fn zoh_of_zero_dynamics_integrates_input() {
        let (ad, bd) = discretize_euler_zoh(&Mat::zeros(2, 2), &Mat::col(&[1.0, 2.0]), 0.1, 12).unwrap();
        assert_eq!(ad, Mat::identity(2));
        assert!((bd[0] - 0.1).abs() < 1e-15 && (bd[1] - 0.2).abs() < 1e-15);
    }

    #[test]
    fn zoh_scalar_matches_exponential() {
        let (ad, bd) = discretize_euler_zoh(&Mat::scalar(-1.0), &Mat::scalar(1.0), 0.01, 10).unwrap();
        assert!((ad[0] - (-0.01f64).exp()).abs() < 1e-12);
        // ZOH input gain for a=-1: (1 - e^-ts)
        assert!((bd[0] - (1.0 - (-0.01f64).exp())).abs() < 1e-12);
    }

    #[test]
    fn zoh_nilpotent_series_terminates() {
        let ac = Mat::from_rows(&[&[0.0, 1.0], &[0.0, 0.0]]).unwrap();
        let (ad, _) = discretize_euler_zoh(&ac, &Mat::col(&[0.0, 1.0]), 0.1, 2).unwrap();
        assert_eq!(ad, Mat::from_rows(&[&[1.0, 0.1], &[0.0, 1.0]]).unwrap());
    }

    #[test]
    fn zoh_rejects_non_square() {
        assert!(discretize_euler_zoh(&Mat::zeros(2, 3), &Mat::zeros(2, 1), 0.1, 4).is_err());
    }

    #[test]
    fn rescaled_substeps_reproduce_period() {
        let a = Mat::from_rows(&[&[0.0, 1.0], &[-0.6349, 1.6148]]).unwrap();
        let b = Mat::col(&[0.0602, 0.0392]);
        let (a_s, b_s) = rescale_period(&a, &b, 20).unwrap();
        let mut x = Mat::col(&[1.0, -2.0]);
        let mut x_ref = x.clone();
        let u = Mat::scalar(37.0);
        for _ in 0..3 {
            for _ in 0..20 {
                x = &(&a_s * &x) + &(&b_s * &u);
            }
            x_ref = &(&a * &x_ref) + &(&b * &u);
        }
        assert!((&x - &x_ref).max_abs() < 1e-9);
    }

    #[test]
    fn zero_covariance_gives_zero_noise() {
        let mut rng = SimRng::seed_from_u64(1);
        for _ in 0..100 {
            let v = gaussian_noise(&mut rng, &Mat::zeros(2, 2)).unwrap();
            assert_eq!(v.max_abs(), 0.0);
        }
    }

    #[test]
    fn same_seed_same_sequence() {
        let cov = Mat::from_rows(&[&[2.0, 0.3], &[0.3, 1.0]]).unwrap();
        let src = GaussianSource::new(&cov).unwrap();
        let mut r1 = SimRng::seed_from_u64(99);
        let mut r2 = SimRng::seed_from_u64(99);
        for _ in 0..50 {
            assert_eq!(src.sample(&mut r1), src.sample(&mut r2));
        }
    }

    #[test]
    fn non_psd_covariance_is_rejected() {
        let cov = Mat::from_rows(&[&[1.0, 2.0], &[2.0, 1.0]]).unwrap();
        assert!(GaussianSource::new(&cov).is_err());
    }

    #[test]
    fn scalar_sample_variance() {
        let mut rng = SimRng::seed_from_u64(2024);
        let src = GaussianSource::new(&Mat::scalar(0.1)).unwrap();
        let n = 1_000_000;
        let (mut s, mut s2) = (0.0, 0.0);
        for _ in 0..n {
            let v = src.sample(&mut rng)[0];
            s += v;
            s2 += v * v;
        }
        let mean = s / n as f64;
        let var = s2 / n as f64 - mean * mean;
        assert!((0.098..=0.102).contains(&var), "variance {var}");
    }
}
