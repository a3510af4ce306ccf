//! Exact simulation of the Ornstein-Uhlenbeck short rate and its running
//! integral.
//!
//! The pair `(r_{t+h}, int_t^{t+h} r_s ds)` given `r_t` is bivariate normal
//! with moments available in closed form, so paths can be advanced on any
//! step size without discretisation error in the state itself. Only path
//! functionals that depend on the *continuous* trajectory between grid
//! points (e.g. first hitting times) retain an O(sqrt(h)) bias.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use std::io::Write as IoWrite;

use crate::model::ModelParams;
use crate::{Error, Result};

/// Moments of the joint Gaussian transition over one step.
///
/// `du` refers to the increment of the running integral `U_t = int_0^t r ds`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JointMoments {
    pub mean_r: f64,
    pub var_r: f64,
    pub mean_du: f64,
    pub var_du: f64,
    pub cov: f64,
}

/// `x - 2(1-e^{-x}) + (1-e^{-2x})/2`, the dimensionless factor in
/// `Var[dU]`, evaluated without cancellation for small `x`.
///
/// The three terms cancel to `O(x^3)`; for small arguments we switch to the
/// Taylor series `x^3/3 - x^4/4 + 7x^5/60 - x^6/24 + ...`.
fn var_du_factor(x: f64) -> f64 {
    if x > 1e-2 {
        let em1 = (-x).exp_m1(); // e^{-x} - 1
        let em2 = (-2.0 * x).exp_m1();
        x + 2.0 * em1 - 0.5 * em2
    } else {
        // Coefficients of x^3/3 - x^4/4 + 7x^5/60 - x^6/24 + 31x^7/2520.
        let c = [
            1.0 / 3.0,
            -0.25,
            7.0 / 60.0,
            -1.0 / 24.0,
            31.0 / 2520.0,
            -1.0 / 360.0,
        ];
        let mut acc = 0.0;
        for &ck in c.iter().rev() {
            acc = acc * x + ck;
        }
        acc * x * x * x
    }
}

/// Closed-form moments of `(r_{t+h}, U_{t+h} - U_t)` given `r_t = r`.
pub fn joint_moments(params: &ModelParams, r: f64, h: f64) -> Result<JointMoments> {
    if !(h > 0.0) || !h.is_finite() {
        return Err(Error::Validation(format!("step size must be positive, got {h}")));
    }
    let a = params.a;
    let st2 = params.sigma_tilde * params.sigma_tilde;
    let ah = a * h;
    let decay = (-ah).exp();
    let one_minus = -(-ah).exp_m1(); // 1 - e^{-ah}, accurate for small ah

    let mean_r = params.b_tilde + (r - params.b_tilde) * decay;
    let var_r = st2 * -(-2.0 * ah).exp_m1() / (2.0 * a);
    let mean_du = params.b_tilde * h + (r - params.b_tilde) * one_minus / a;
    let var_du = st2 / (a * a * a) * var_du_factor(ah);
    let cov = st2 * one_minus * one_minus / (2.0 * a * a);
    Ok(JointMoments { mean_r, var_r, mean_du, var_du, cov })
}

/// Deterministic stream of standard normals: one independent stream per
/// path index on top of a single seed, so results do not depend on how
/// paths are scheduled across threads.
pub struct RngStream {
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64, path_index: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(path_index);
        RngStream { rng }
    }

    #[inline]
    pub fn standard_normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.rng)
    }
}

/// Draw `(r_{t+h}, dU)` exactly via the Cholesky factor of the 2x2
/// covariance. Degenerate (zero-volatility) transitions collapse to the
/// deterministic mean.
pub fn sample_joint(m: &JointMoments, rng: &mut RngStream) -> (f64, f64) {
    if m.var_r <= 0.0 {
        return (m.mean_r, m.mean_du);
    }
    let z1 = rng.standard_normal();
    let z2 = rng.standard_normal();
    let sd_r = m.var_r.sqrt();
    let c21 = m.cov / sd_r;
    let resid = (m.var_du - c21 * c21).max(0.0);
    let r_next = m.mean_r + sd_r * z1;
    let du = m.mean_du + c21 * z1 + resid.sqrt() * z2;
    (r_next, du)
}

/// Marginal transition draw for `r` alone (used by the measure-changed
/// estimator, which never needs the integral).
pub fn sample_transition(params: &ModelParams, r: f64, h: f64, rng: &mut RngStream) -> Result<f64> {
    let m = joint_moments(params, r, h)?;
    if m.var_r <= 0.0 {
        return Ok(m.mean_r);
    }
    Ok(m.mean_r + m.var_r.sqrt() * rng.standard_normal())
}

/// One simulated trajectory on the uniform grid `t_k = k h`, carrying the
/// rate and the accumulated discount exponent.
///
/// Invariants: `t[0] = 0`, `u[0] = 0`, all three vectors share one length.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PathGrid {
    pub t: Vec<f64>,
    pub r: Vec<f64>,
    pub u: Vec<f64>,
}

impl PathGrid {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }
}

/// Simulate `(r, U)` exactly on a uniform grid of step `h` out to horizon
/// `t_max` (the last grid point is `round(t_max/h)` steps out). `t_max = 0`
/// yields the single initial point.
pub fn simulate_path(
    params: &ModelParams,
    r0: f64,
    h: f64,
    t_max: f64,
    rng: &mut RngStream,
) -> Result<PathGrid> {
    if !r0.is_finite() {
        return Err(Error::Validation(format!("initial rate must be finite, got {r0}")));
    }
    if !(t_max >= 0.0) || !t_max.is_finite() {
        return Err(Error::Validation(format!("horizon must be non-negative, got {t_max}")));
    }
    if t_max == 0.0 {
        return Ok(PathGrid { t: vec![0.0], r: vec![r0], u: vec![0.0] });
    }
    if !(h > 0.0) || !h.is_finite() {
        return Err(Error::Validation(format!("step size must be positive, got {h}")));
    }
    let n_steps = (t_max / h).round().max(1.0) as usize;
    let m = joint_moments(params, 0.0, h)?;
    // Only the mean of the transition depends on the current rate, and it
    // does so affinely; precompute the rate-independent pieces.
    let decay = (-params.a * h).exp();
    let one_minus = -(-params.a * h).exp_m1();
    let mut t = Vec::with_capacity(n_steps + 1);
    let mut r = Vec::with_capacity(n_steps + 1);
    let mut u = Vec::with_capacity(n_steps + 1);
    t.push(0.0);
    r.push(r0);
    u.push(0.0);
    let mut r_cur = r0;
    let mut u_cur = 0.0;
    for k in 1..=n_steps {
        let step = JointMoments {
            mean_r: params.b_tilde + (r_cur - params.b_tilde) * decay,
            mean_du: params.b_tilde * h + (r_cur - params.b_tilde) * one_minus / params.a,
            ..m
        };
        let (r_next, du) = sample_joint(&step, rng);
        r_cur = r_next;
        u_cur += du;
        t.push(k as f64 * h);
        r.push(r_cur);
        u.push(u_cur);
    }
    Ok(PathGrid { t, r, u })
}

/// Write a path as CSV rows `t,r,u` (with header) to any writer.
pub fn write_path_csv<W: IoWrite>(path: &PathGrid, mut w: W) -> Result<()> {
    writeln!(w, "t,r,u").map_err(|e| Error::Numerical(format!("csv write failed: {e}")))?;
    for i in 0..path.len() {
        writeln!(w, "{:.12},{:.17e},{:.17e}", path.t[i], path.r[i], path.u[i])
            .map_err(|e| Error::Numerical(format!("csv write failed: {e}")))?;
    }
    Ok(())
}

/// `E[e^{-U_T} | r_0 = r]` for the OU integral, from the Gaussian law of
/// `U_T`: `exp(-mean + var/2)`. Used as an independent check on sampled
/// discount factors.
pub fn discount_expectation(params: &ModelParams, r: f64, t: f64) -> Result<f64> {
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::Validation(format!("horizon must be non-negative, got {t}")));
    }
    if t == 0.0 {
        return Ok(1.0);
    }
    let m = joint_moments(params, r, t)?;
    Ok((-m.mean_du + 0.5 * m.var_du).exp())
}
