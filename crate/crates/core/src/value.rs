//! Assembly of the piecewise value function and its verification
//! diagnostics: the pasting constant, the two branches, smooth pasting at
//! the barrier, and pointwise residuals of the variational inequality
//! `max{L(v), 1 - v_x} = 0` with `L(v) = mu v_x + a(b~-r) v_r +
//! (sigma~^2/2) v_rr - r v`.

use std::io::Write as IoWrite;

use serde::{Deserialize, Serialize};

use crate::functionals::{
    default_domain_pad, solve_barrier, solve_functional_ode, BarrierSolution, FunctionalCurve,
    FunctionalKind, DEFAULT_N_ELEMENTS,
};
use crate::model::ModelParams;
use crate::{Error, Result};

/// Knobs for building a [`ValueFunction`]; defaults match the accuracy
/// targets of the verification suite.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SolverSettings {
    pub barrier_tol: f64,
    /// Half-line truncation length; `None` selects the parameter-dependent
    /// default.
    pub domain_pad: Option<f64>,
    pub n_elements: usize,
    /// Order cap for the psi2 series cross-check route.
    pub series_n_max: usize,
}

impl Default for SolverSettings {
    fn default() -> Self {
        SolverSettings {
            barrier_tol: 1e-12,
            domain_pad: None,
            n_elements: DEFAULT_N_ELEMENTS,
            series_n_max: 60,
        }
    }
}

/// One row of the smooth-pasting diagnostics at the barrier.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct PastingRow {
    pub x: f64,
    /// |G - F|
    pub value_gap: f64,
    /// |G_x - 1|
    pub gx_gap: f64,
    /// |F_x - 1|
    pub fx_gap: f64,
    /// |G_r - F_r|
    pub gr_gap: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PastingReport {
    pub rows: Vec<PastingRow>,
    /// max - min of G_r(r*, x) across the x grid; zero iff the barrier
    /// derivative of psi1 vanishes, which is the optimality signature.
    pub gr_spread: f64,
}

impl PastingReport {
    pub fn worst_gap(&self) -> f64 {
        self.rows.iter().fold(0.0f64, |m, row| {
            m.max(row.value_gap).max(row.gx_gap).max(row.fx_gap).max(row.gr_gap)
        })
    }
}

/// One evaluated point of the variational-inequality check.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct HjbSample {
    pub r: f64,
    pub x: f64,
    /// Raw generator residual L(v).
    pub lv: f64,
    /// `1 - v_x`.
    pub grad_slack: f64,
    /// `L(v) + r x` on the consumption side, `L(v)` on the waiting side:
    /// the quantity that should vanish branch-wise.
    pub branch_residual: f64,
    /// `max{L(v) + r x [r > r*], 1 - v_x}`: should be 0 up to tolerance.
    pub variational: f64,
}

/// The value function `v`: `G(r,x) = (x + delta) psi1(r) + mu psi2(r)` for
/// `r <= r*`, `F(r,x) = x + mu phi2(r) + delta phi1(r)` for `r > r*`.
#[derive(Debug, Clone)]
pub struct ValueFunction {
    pub params: ModelParams,
    pub barrier: BarrierSolution,
    pub delta: f64,
    pub psi1: FunctionalCurve,
    pub psi2: FunctionalCurve,
    pub phi1: FunctionalCurve,
    pub phi2: FunctionalCurve,
    pub pasting_report: PastingReport,
}

/// `delta = mu (psi2'(r*) - phi2'(r*)) / phi1'(r*)`, the value of the
/// problem at the barrier with zero capital.
pub fn delta_const(
    params: &ModelParams,
    psi2: &FunctionalCurve,
    phi1: &FunctionalCurve,
    phi2: &FunctionalCurve,
) -> Result<f64> {
    let d_psi2 = psi2.derivative_at_barrier();
    let d_phi1 = phi1.derivative_at_barrier();
    let d_phi2 = phi2.derivative_at_barrier();
    if d_phi1 == 0.0 {
        return Err(Error::Numerical("phi1 has zero derivative at the barrier".into()));
    }
    let delta = params.mu * (d_psi2 - d_phi2) / d_phi1;
    if !(delta > 0.0) || !delta.is_finite() {
        return Err(Error::Numerical(format!(
            "pasting constant must be positive and finite, got {delta} \
             (wrong barrier or curve failure)"
        )));
    }
    Ok(delta)
}

impl ValueFunction {
    /// Solve the barrier, the four functional curves, and the pasting
    /// constant for one parameter set.
    pub fn build(params: &ModelParams, settings: &SolverSettings) -> Result<ValueFunction> {
        params.validate()?;
        let barrier = solve_barrier(params, settings.barrier_tol)?;
        Self::build_at_barrier(params, barrier, settings)
    }

    /// Same assembly with an externally chosen barrier solution; used by
    /// diagnostics that compare candidate barriers.
    pub fn build_at_barrier(
        params: &ModelParams,
        barrier: BarrierSolution,
        settings: &SolverSettings,
    ) -> Result<ValueFunction> {
        let pad = settings.domain_pad.unwrap_or_else(|| default_domain_pad(params));
        let r_star = barrier.r_star;
        let n = settings.n_elements;
        let psi1 = solve_functional_ode(params, FunctionalKind::Psi1, r_star, pad, n, None)?;
        let psi2 =
            solve_functional_ode(params, FunctionalKind::Psi2, r_star, pad, n, Some(&psi1))?;
        let phi1 = solve_functional_ode(params, FunctionalKind::Phi1, r_star, pad, n, None)?;
        let phi2 = solve_functional_ode(params, FunctionalKind::Phi2, r_star, pad, n, None)?;
        let delta = delta_const(params, &psi2, &phi1, &phi2)?;
        let mut vf = ValueFunction {
            params: *params,
            barrier,
            delta,
            psi1,
            psi2,
            phi1,
            phi2,
            pasting_report: PastingReport { rows: Vec::new(), gr_spread: 0.0 },
        };
        vf.pasting_report = smooth_pasting_report(&vf, &[0.0, 1.0, 5.0])?;
        Ok(vf)
    }

    pub fn r_star(&self) -> f64 {
        self.barrier.r_star
    }

    fn g_value(&self, r: f64, x: f64) -> Result<f64> {
        Ok((x + self.delta) * self.psi1.value(r)? + self.params.mu * self.psi2.value(r)?)
    }

    fn f_value(&self, r: f64, x: f64) -> Result<f64> {
        Ok(x + self.params.mu * self.phi2.value(r)? + self.delta * self.phi1.value(r)?)
    }

    fn g_r(&self, r: f64, x: f64) -> Result<f64> {
        Ok((x + self.delta) * self.psi1.derivative(r)?
            + self.params.mu * self.psi2.derivative(r)?)
    }

    fn f_r(&self, r: f64) -> Result<f64> {
        Ok(self.params.mu * self.phi2.derivative(r)? + self.delta * self.phi1.derivative(r)?)
    }

    /// `v(r, x)`; waiting branch G for `r <= r*`, consumption branch F
    /// beyond.
    pub fn value_at(&self, r: f64, x: f64) -> Result<f64> {
        self.check_x(x)?;
        if r <= self.r_star() {
            self.g_value(r, x)
        } else {
            self.f_value(r, x)
        }
    }

    /// `v_x(r, x)`: psi1 on the waiting side, exactly 1 on the consumption
    /// side.
    pub fn value_x(&self, r: f64) -> Result<f64> {
        if r <= self.r_star() {
            self.psi1.value(r)
        } else {
            Ok(1.0)
        }
    }

    /// `v_r(r, x)` from the curves' derivative state.
    pub fn value_r(&self, r: f64, x: f64) -> Result<f64> {
        self.check_x(x)?;
        if r <= self.r_star() {
            self.g_r(r, x)
        } else {
            self.f_r(r)
        }
    }

    fn check_x(&self, x: f64) -> Result<()> {
        if !(x >= 0.0) || !x.is_finite() {
            return Err(Error::Validation(format!("capital must be non-negative, got {x}")));
        }
        Ok(())
    }

    /// Generator and gradient residuals at one off-barrier point.
    ///
    /// Returns `(L(v), 1 - v_x)`. The second derivative comes from a
    /// central difference of the curves' first-derivative state with step
    /// `1e-4 sigma`, shrunk near the barrier so the stencil never
    /// straddles the kink in `v_rr`.
    pub fn hjb_residual(&self, r: f64, x: f64) -> Result<(f64, f64)> {
        self.check_x(x)?;
        let r_star = self.r_star();
        if (r - r_star).abs() < 1e-4 {
            return Err(Error::Domain(format!(
                "v_rr is discontinuous at the barrier; r = {r} is within 1e-4 of r* = {r_star}"
            )));
        }
        let p = &self.params;
        let sigma = p.derived().sigma;
        let step = (1e-4 * sigma).min(0.5 * (r - r_star).abs());
        let (v, v_r, v_rr, v_x) = if r < r_star {
            let v_rr =
                (self.g_r(r + step, x)? - self.g_r(r - step, x)?) / (2.0 * step);
            (self.g_value(r, x)?, self.g_r(r, x)?, v_rr, self.psi1.value(r)?)
        } else {
            let v_rr = (self.f_r(r + step)? - self.f_r(r - step)?) / (2.0 * step);
            (self.f_value(r, x)?, self.f_r(r)?, v_rr, 1.0)
        };
        let lv = p.mu * v_x + p.a * (p.b_tilde - r) * v_r
            + 0.5 * p.sigma_tilde * p.sigma_tilde * v_rr
            - r * v;
        Ok((lv, 1.0 - v_x))
    }

    /// Evaluate the variational inequality on a grid, excluding the
    /// barrier band.
    pub fn hjb_report(&self, r_grid: &[f64], x_grid: &[f64]) -> Result<Vec<HjbSample>> {
        let mut out = Vec::with_capacity(r_grid.len() * x_grid.len());
        for &r in r_grid {
            for &x in x_grid {
                let (lv, grad_slack) = self.hjb_residual(r, x)?;
                let branch_residual = if r > self.r_star() { lv + r * x } else { lv };
                out.push(HjbSample {
                    r,
                    x,
                    lv,
                    grad_slack,
                    branch_residual,
                    variational: branch_residual.max(grad_slack),
                });
            }
        }
        Ok(out)
    }

    /// CSV rows `r,x,v,branch` over the product grid; branch names the
    /// strategy region (`consume` where `r >= r*`).
    pub fn write_surface_csv<W: IoWrite>(
        &self,
        r_grid: &[f64],
        x_grid: &[f64],
        mut w: W,
    ) -> Result<()> {
        writeln!(w, "r,x,v,branch").map_err(|e| Error::Numerical(format!("csv write: {e}")))?;
        for &r in r_grid {
            for &x in x_grid {
                let v = self.value_at(r, x)?;
                let branch = if r >= self.r_star() { "consume" } else { "wait" };
                writeln!(w, "{r:.17e},{x:.17e},{v:.17e},{branch}")
                    .map_err(|e| Error::Numerical(format!("csv write: {e}")))?;
            }
        }
        Ok(())
    }
}

/// Pasting diagnostics at the barrier for a given capital grid.
pub fn smooth_pasting_report(vf: &ValueFunction, x_grid: &[f64]) -> Result<PastingReport> {
    pasting_with_delta(vf, vf.delta, x_grid)
}

/// Same diagnostics with an overridden pasting constant; perturbing delta
/// away from its computed value must break the derivative match, which is
/// the negative control for the whole construction.
pub fn pasting_with_delta(
    vf: &ValueFunction,
    delta: f64,
    x_grid: &[f64],
) -> Result<PastingReport> {
    if x_grid.is_empty() {
        return Err(Error::Validation("pasting report needs a non-empty x grid".into()));
    }
    let r_star = vf.r_star();
    let mu = vf.params.mu;
    let psi1_v = vf.psi1.value(r_star)?;
    let psi2_v = vf.psi2.value(r_star)?;
    let phi1_v = vf.phi1.value(r_star)?;
    let phi2_v = vf.phi2.value(r_star)?;
    let psi1_d = vf.psi1.derivative_at_barrier();
    let psi2_d = vf.psi2.derivative_at_barrier();
    let phi1_d = vf.phi1.derivative_at_barrier();
    let phi2_d = vf.phi2.derivative_at_barrier();

    let mut rows = Vec::with_capacity(x_grid.len());
    let mut gr_min = f64::INFINITY;
    let mut gr_max = f64::NEG_INFINITY;
    for &x in x_grid {
        if !(x >= 0.0) {
            return Err(Error::Validation(format!("pasting grid needs x >= 0, got {x}")));
        }
        let g = (x + delta) * psi1_v + mu * psi2_v;
        let f = x + mu * phi2_v + delta * phi1_v;
        let g_x = psi1_v;
        let g_r = (x + delta) * psi1_d + mu * psi2_d;
        let f_r = mu * phi2_d + delta * phi1_d;
        gr_min = gr_min.min(g_r);
        gr_max = gr_max.max(g_r);
        rows.push(PastingRow {
            x,
            value_gap: (g - f).abs(),
            gx_gap: (g_x - 1.0).abs(),
            fx_gap: 0.0,
            gr_gap: (g_r - f_r).abs(),
        });
    }
    Ok(PastingReport { rows, gr_spread: gr_max - gr_min })
}
