//! Release checks: the fixed battery that certifies a build of the solver.
//!
//! Each check is a standalone function returning a [`CriterionResult`], so
//! the `verify` CLI subcommand and the integration test target share one
//! implementation. A check never panics on an internal error; the error is
//! folded into a failing result so the remaining checks still run.
//!
//! The battery ends with a negative control: a deliberately coarse-stepped
//! policy run whose naive statistical budget must be violated, proving the
//! bias-budget machinery actually detects discretization error.

use std::fmt::Write as _;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::functionals::{
    alternate_target, phi1_closed, primary_target, psi1_closed, psi2_series,
    solve_barrier_for_target,
};
use crate::mc_oracle::{
    calibrate_hit_bias, calibrate_policy_bias, comparison_budget, estimate_discounted_hit,
    estimate_via_measure_change, evaluate_barrier_policy, optimality_scan, simulate_policy_paths,
    truncation_bound, HitDirection, HitWeight, McParams, TailEnvelope,
};
use crate::model::ModelParams;
use crate::policy::{PolicyArgs, PolicyRegistry, PolicySpec};
use crate::special_fn::{h_ratio, h_ratio_deriv, pcf_dtilde};
use crate::value::{smooth_pasting_report, SolverSettings, ValueFunction};
use crate::Result;

/// Outcome of one check.
#[derive(Debug, Clone, Serialize)]
pub struct CriterionResult {
    pub id: u32,
    pub name: &'static str,
    pub pass: bool,
    /// One-line account of what was measured, tight enough to be a record
    /// of the run, not just a verdict.
    pub details: String,
    pub elapsed_s: f64,
}

/// Monte Carlo scale shared by the stochastic checks.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct AcceptanceConfig {
    pub n: u64,
    pub h: f64,
    pub seed: u64,
}

impl Default for AcceptanceConfig {
    fn default() -> Self {
        AcceptanceConfig { n: 100_000, h: 1e-3, seed: 0x0c0ffee }
    }
}

impl AcceptanceConfig {
    /// Simulation parameters at this scale; the horizon keeps the a-priori
    /// truncation bound below 1e-8 of the value scale.
    pub fn mc_params(&self, params: &ModelParams) -> McParams {
        McParams {
            n: self.n,
            h: self.h,
            t_max: 40.0 / params.derived().b,
            seed: self.seed,
            truncated_cap: None,
        }
    }
}

fn run<F>(id: u32, name: &'static str, limit_s: f64, body: F) -> CriterionResult
where
    F: FnOnce() -> Result<(bool, String)>,
{
    let t0 = Instant::now();
    let (mut pass, mut details) = match body() {
        Ok(pd) => pd,
        Err(e) => (false, format!("aborted: {e}")),
    };
    let elapsed_s = t0.elapsed().as_secs_f64();
    if elapsed_s > limit_s {
        pass = false;
        let _ = write!(details, "; over the {limit_s:.0} s time limit ({elapsed_s:.1} s)");
    }
    CriterionResult { id, name, pass, details, elapsed_s }
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let m = (n.max(2) - 1) as f64;
    (0..n).map(|i| lo + (hi - lo) * i as f64 / m).collect()
}

/// 1: solve both candidate pasting targets and let the Monte Carlo barrier
/// scan arbitrate. The argmax over a 0.25-spaced grid around both roots
/// must land within 0.25 of exactly one of them.
pub fn criterion_1(vf: &ValueFunction, cfg: &AcceptanceConfig) -> CriterionResult {
    run(1, "barrier identification by policy scan", 600.0, || {
        let params = &vf.params;
        let primary = solve_barrier_for_target(params, primary_target(params), 1e-12)?;
        let alternate = solve_barrier_for_target(params, alternate_target(params), 1e-12)?;
        let mut grid = Vec::with_capacity(10);
        for root in [primary.r_star, alternate.r_star] {
            for k in -2i32..=2 {
                grid.push(root + 0.25 * f64::from(k));
            }
        }
        grid.sort_by(f64::total_cmp);
        grid.dedup_by(|a, b| (*a - *b).abs() < 1e-12);

        let mc = cfg.mc_params(params);
        let env = TailEnvelope { r_star: vf.r_star(), delta: vf.delta };
        let scan = optimality_scan(params, 1.0, 1.0, &grid, &mc, &env)?;
        let am = scan.argmax_barrier;
        let best = &scan.rows[scan.argmax_index];

        let d_primary = (am - primary.r_star).abs();
        let d_alternate = (am - alternate.r_star).abs();
        let near_primary = d_primary <= 0.25 + 1e-9;
        let near_alternate = d_alternate <= 0.25 + 1e-9;
        let pass = near_primary != near_alternate;

        // 2.4936 is the barrier figure that circulates for this parameter
        // set; whether the scan reproduces it is recorded either way.
        let circulating = 2.4936_f64;
        let mut details = format!(
            "targets {:.6} -> root {:.6}, {:.6} -> root {:.6}; argmax {:.4} \
             (value {:.5} +- {:.5}) at distance {:.3}/{:.3} from the roots",
            primary.target,
            primary.r_star,
            alternate.target,
            alternate.r_star,
            am,
            best.mean,
            best.stderr,
            d_primary,
            d_alternate,
        );
        if (am - circulating).abs() <= 0.05 {
            let _ = write!(details, "; matches the circulating figure {circulating}");
        } else {
            let _ = write!(
                details,
                "; does not reproduce the circulating figure {circulating} (off by {:.3})",
                (am - circulating).abs()
            );
        }
        let _ = write!(details, "; paired scan [");
        for (i, row) in scan.rows.iter().enumerate() {
            let sep = if i == 0 { "" } else { " " };
            let _ = write!(details, "{sep}{:.3}:{:.4}+-{:.4}", row.barrier, row.diff_from_best, row.diff_se);
        }
        let _ = write!(details, "]");
        Ok((pass, details))
    })
}

/// 2: smooth pasting at the barrier. Value continuity to 1e-6 of scale,
/// the capital derivative equal to 1 to 1e-8, and an x-independent rate
/// derivative matched across the barrier to 1e-6.
pub fn criterion_2(vf: &ValueFunction, _cfg: &AcceptanceConfig) -> CriterionResult {
    run(2, "smooth pasting at the barrier", 60.0, || {
        let rep = smooth_pasting_report(vf, &[0.0, 1.0, 5.0])?;
        let mut pass = rep.gr_spread <= 1e-6;
        let mut worst_value = 0.0f64;
        let mut worst_gx = 0.0f64;
        let mut worst_gr = 0.0f64;
        for row in &rep.rows {
            let scale = 1.0 + (row.x + vf.delta).abs();
            pass &= row.value_gap <= 1e-6 * scale;
            pass &= row.gx_gap <= 1e-8;
            pass &= row.gr_gap <= 1e-6;
            worst_value = worst_value.max(row.value_gap / scale);
            worst_gx = worst_gx.max(row.gx_gap);
            worst_gr = worst_gr.max(row.gr_gap);
        }
        let details = format!(
            "x in {{0,1,5}}: scaled value gap {worst_value:.2e} (tol 1e-6), \
             |v_x - 1| {worst_gx:.2e} (tol 1e-8), rate-derivative gap {worst_gr:.2e} \
             and spread {:.2e} (tol 1e-6)",
            rep.gr_spread
        );
        Ok((pass, details))
    })
}

/// 3: the variational inequality on a 50 x 10 state grid spanning both
/// sides of the barrier.
pub fn criterion_3(vf: &ValueFunction, _cfg: &AcceptanceConfig) -> CriterionResult {
    run(3, "variational inequality on the state grid", 60.0, || {
        let r_star = vf.r_star();
        let r_grid: Vec<f64> = linspace(r_star - 4.0, r_star + 4.0, 50)
            .into_iter()
            .filter(|r| (r - r_star).abs() >= 1e-4)
            .collect();
        let x_grid = linspace(0.0, 5.0, 10);
        let samples = vf.hjb_report(&r_grid, &x_grid)?;
        let mut worst_branch = 0.0f64;
        let mut worst_slack = f64::NEG_INFINITY;
        let mut worst_vi = 0.0f64;
        for s in &samples {
            worst_branch = worst_branch.max(s.branch_residual.abs());
            worst_slack = worst_slack.max(s.grad_slack);
            worst_vi = worst_vi.max(s.variational.abs());
        }
        let pass = worst_branch <= 1e-6 && worst_slack <= 1e-8 && worst_vi <= 1e-6;
        let details = format!(
            "{} states: branch residual {worst_branch:.2e} (tol 1e-6), \
             1 - v_x at most {worst_slack:.2e} (tol 1e-8), \
             |max(generator, gradient)| {worst_vi:.2e} (tol 1e-6)",
            samples.len()
        );
        Ok((pass, details))
    })
}

/// 4: special-function identities. The order-0 normalization, the order-1
/// erfc closed form, and the Riccati equation the barrier ratio satisfies,
/// with the ratio derivative cross-checked against its recurrence form.
pub fn criterion_4(vf: &ValueFunction, _cfg: &AcceptanceConfig) -> CriterionResult {
    run(4, "cylinder-function identities", 60.0, || {
        let params = &vf.params;
        let mut worst0 = 0.0f64;
        for y in linspace(-10.0, 10.0, 401) {
            worst0 = worst0.max((pcf_dtilde(0.0, y)? - 1.0).abs());
        }

        // Order 1 in closed form via the complementary error function.
        let mut worst1 = 0.0f64;
        let half_pi_sqrt = (std::f64::consts::PI / 2.0).sqrt();
        for y in linspace(-5.0, 5.0, 401) {
            let reference = (0.5 * y * y).exp() * half_pi_sqrt * libm::erfc(y / 2f64.sqrt());
            let rel = (pcf_dtilde(1.0, y)? - reference).abs() / reference;
            worst1 = worst1.max(rel);
        }

        // K = (b / (sigma a)) H solves the Riccati equation
        // (sigma~^2/2) K' = b - a (m - r) K - (sigma~^2/2) K^2.
        // K' is taken by central difference so the check is independent of
        // the recurrence-based derivative, which is verified alongside.
        let d = params.derived();
        let mq = params.hit_measure_mean();
        let st2 = params.sigma_tilde * params.sigma_tilde;
        let scale_k = d.b / (d.sigma * params.a);
        let step = 1e-4;
        let mut worst_riccati = 0.0f64;
        let mut worst_deriv = 0.0f64;
        let r_star = vf.r_star();
        for r in linspace(r_star - 4.0, r_star + 4.0, 200) {
            let k = scale_k * h_ratio(params, r)?;
            let k_prime = scale_k * (h_ratio(params, r + step)? - h_ratio(params, r - step)?)
                / (2.0 * step);
            let lhs = 0.5 * st2 * k_prime;
            let rhs = d.b - params.a * (mq - r) * k - 0.5 * st2 * k * k;
            let rel = (lhs - rhs).abs() / lhs.abs().max(rhs.abs());
            worst_riccati = worst_riccati.max(rel);

            let closed = scale_k * h_ratio_deriv(params, r)?;
            worst_deriv = worst_deriv.max((closed - k_prime).abs() / closed.abs().max(1.0));
        }

        let pass = worst0 <= 1e-12 && worst1 <= 1e-10 && worst_riccati <= 1e-5
            && worst_deriv <= 1e-6;
        let details = format!(
            "order-0 normalization off by {worst0:.2e} (tol 1e-12); \
             order-1 erfc form rel {worst1:.2e} (tol 1e-10); \
             Riccati rel {worst_riccati:.2e} (tol 1e-5); \
             derivative recurrence vs difference {worst_deriv:.2e} (tol 1e-6)"
        );
        Ok((pass, details))
    })
}

/// 5: route agreement. Closed forms against the collocation curves for the
/// hit discounts, and the double series against the curve for the
/// time-weighted one. The series converges algebraically, so its order-60
/// partial sum is expected to miss the 1e-6 bar; the gap is reported, not
/// hidden.
pub fn criterion_5(vf: &ValueFunction, _cfg: &AcceptanceConfig) -> CriterionResult {
    run(5, "closed form vs collocation vs series", 60.0, || {
        let params = &vf.params;
        let r_star = vf.r_star();

        let mut worst_psi1 = 0.0f64;
        for r in linspace(r_star - 5.0, r_star, 400) {
            worst_psi1 = worst_psi1.max((psi1_closed(params, r_star, r)? - vf.psi1.value(r)?).abs());
        }
        let mut worst_phi1 = 0.0f64;
        for r in linspace(r_star, r_star + 5.0, 400) {
            worst_phi1 = worst_phi1.max((phi1_closed(params, r_star, r)? - vf.phi1.value(r)?).abs());
        }

        let mut worst_series = 0.0f64;
        let mut n_used_min = usize::MAX;
        let mut flagged = 0usize;
        for r in linspace(r_star - 3.0, r_star, 10) {
            let s = psi2_series(params, r_star, r, 60, 1e-6)?;
            worst_series = worst_series.max((s.value - vf.psi2.value(r)?).abs());
            n_used_min = n_used_min.min(s.n_used);
            if s.slow_convergence || s.noise_floor_hit {
                flagged += 1;
            }
        }

        let pass = worst_psi1 <= 1e-6 && worst_phi1 <= 1e-6 && worst_series <= 1e-6;
        let details = format!(
            "closed-vs-curve gaps {worst_psi1:.2e} below and {worst_phi1:.2e} above (tol 1e-6); \
             series-vs-curve gap {worst_series:.2e} (tol 1e-6) with >= {n_used_min} orders used \
             and {flagged}/10 points flagged as slow or noise-limited: the order-60 partial sum \
             of the algebraically convergent series cannot reach 1e-6 away from the barrier"
        );
        Ok((pass, details))
    })
}

/// 6: Monte Carlo confirmation of all four hit functionals at five points
/// each, against Richardson-calibrated step-bias budgets, plus agreement of
/// the two independent routes to the below-barrier discount.
pub fn criterion_6(vf: &ValueFunction, cfg: &AcceptanceConfig) -> CriterionResult {
    run(6, "hit functionals vs Monte Carlo", 600.0, || {
        let params = &vf.params;
        let r_star = vf.r_star();
        let base = cfg.mc_params(params);
        // Calibration runs at quarter resolution: coarse step 4h against
        // fine step h gives the sqrt(h) coefficient that budgets the main
        // runs at step h. The coefficient is calibrated at every comparison
        // point separately: hits against the drift (the phi legs) carry
        // several times the bias constant of hits with the drift, and near
        // the barrier it is larger again.
        let cal = McParams { n: 20_000, h: 4.0 * cfg.h, seed: cfg.seed ^ 0x5ca1e, ..base };

        use HitDirection::{FromAbove, FromBelow};
        use HitWeight::{One, RunningIntegral, Tau};
        let legs: [(&str, HitDirection, HitWeight); 4] = [
            ("psi1", FromBelow, One),
            ("psi2", FromBelow, Tau),
            ("phi1", FromAbove, One),
            ("phi2", FromAbove, RunningIntegral),
        ];
        let offsets = [0.3, 0.6, 1.0, 1.5, 2.0];

        let mut pass = true;
        let mut details = String::new();
        let mut dual_worst = 0.0f64;
        for (li, (label, direction, weight)) in legs.iter().enumerate() {
            let signed = |delta: f64| {
                if *direction == FromBelow { r_star - delta } else { r_star + delta }
            };
            let mut worst_margin = f64::NEG_INFINITY;
            let mut c_lo = f64::INFINITY;
            let mut c_hi = f64::NEG_INFINITY;
            for (pi, &delta) in offsets.iter().enumerate() {
                let r0 = signed(delta);
                let point_cal = McParams { seed: cal.seed + (li * 16 + pi) as u64, ..cal };
                let c_bias =
                    calibrate_hit_bias(params, r0, r_star, *direction, *weight, &point_cal)?
                        .c_bias;
                c_lo = c_lo.min(c_bias);
                c_hi = c_hi.max(c_bias);
                let mc = McParams { seed: base.seed + (li * 16 + pi) as u64, ..base };
                let est = estimate_discounted_hit(params, r0, r_star, *direction, *weight, &mc)?;
                let analytic = match li {
                    0 => vf.psi1.value(r0)?,
                    1 => vf.psi2.value(r0)?,
                    2 => vf.phi1.value(r0)?,
                    _ => vf.phi2.value(r0)?,
                };
                let gap = (est.mean - analytic).abs();
                let budget = comparison_budget(&est, c_bias);
                pass &= gap <= budget;
                worst_margin = worst_margin.max(gap - budget);

                if li == 0 {
                    let dual_mc = McParams { seed: base.seed + 96 + pi as u64, ..base };
                    let dual = estimate_via_measure_change(params, r0, r_star, &dual_mc)?;
                    let gap2 = (est.mean - dual.mean).abs();
                    let tol2 = 3.0 * (est.stderr.powi(2) + dual.stderr.powi(2)).sqrt()
                        + est.tail_bound
                        + dual.tail_bound;
                    pass &= gap2 <= tol2;
                    dual_worst = dual_worst.max(gap2 - tol2);
                }
            }
            let _ = write!(
                details,
                "{}{label}: worst gap-budget margin {worst_margin:.2e} (c_bias {c_lo:.3}..{c_hi:.3})",
                if li == 0 { "" } else { "; " }
            );
        }
        let _ = write!(
            details,
            "; dual below-barrier routes worst margin {dual_worst:.2e} vs combined 3 SE"
        );
        Ok((pass, details))
    })
}

/// 7: policy simulation against the value function on a 4 x 3 state grid,
/// with the optimal barrier beating shifted barriers, consume-always and
/// never-consume within statistical resolution, and the horizon tail bound
/// negligible at the default scale.
pub fn criterion_7(vf: &ValueFunction, cfg: &AcceptanceConfig) -> CriterionResult {
    run(7, "policy oracle vs value function", 900.0, || {
        let params = &vf.params;
        let r_star = vf.r_star();
        let base = cfg.mc_params(params);
        let env = TailEnvelope { r_star, delta: vf.delta };

        let registry = PolicyRegistry::builtin();
        let shifted = |s: f64| PolicyArgs { barrier_shift: s, ..PolicyArgs::default() };
        let mut specs: Vec<PolicySpec> = Vec::new();
        for args in
            [shifted(0.0), shifted(-1.0), shifted(-0.5), shifted(0.5), shifted(1.0)]
        {
            specs.push(registry.create("barrier", &args)?.spec(params, r_star)?);
        }
        specs.push(registry.create("consume-always", &PolicyArgs::default())?.spec(params, r_star)?);
        specs.push(registry.create("no-consumption", &PolicyArgs::default())?.spec(params, r_star)?);

        // One sqrt(h) coefficient for the optimal-policy comparisons,
        // calibrated on the consumption side.
        let cal = McParams { n: 20_000, h: 4.0 * cfg.h, seed: cfg.seed ^ 0xca11b, ..base };
        let c_pol = calibrate_policy_bias(params, 1.0, 1.0, specs[0], &cal, &env)?.c_bias;

        let r0_grid = [r_star - 2.0, r_star - 0.5, r_star + 0.5, r_star + 2.0];
        let x0_grid = [0.0, 1.0, 5.0];
        let mut pass = true;
        let mut worst_value_margin = f64::NEG_INFINITY;
        let mut worst_dominance = f64::NEG_INFINITY;
        let mut worst_tail = 0.0f64;
        for (ri, &r0) in r0_grid.iter().enumerate() {
            let mc = McParams { seed: base.seed ^ (0xbeef + 0x101 * ri as u64), ..base };
            let set = simulate_policy_paths(params, r0, 5.0, &specs, &mc, &env)?;
            for &x0 in &x0_grid {
                let v = vf.value_at(r0, x0)?;
                let est = set.estimate(0, x0)?;
                let gap = (est.mean - v).abs();
                let budget = comparison_budget(&est, c_pol);
                pass &= gap <= budget;
                worst_value_margin = worst_value_margin.max(gap - budget);

                for p in 1..set.n_policies() {
                    let alt = set.estimate(p, x0)?;
                    let excess = alt.mean - (v + 3.0 * alt.stderr);
                    pass &= excess <= 0.0;
                    worst_dominance = worst_dominance.max(excess);
                }

                let tail = truncation_bound(params, vf.delta, base.t_max, r0, x0)?;
                let rel_tail = tail / v.abs().max(1.0);
                pass &= rel_tail <= 1e-8;
                worst_tail = worst_tail.max(rel_tail);
            }
        }
        let details = format!(
            "12 states, 7 policies: optimal-policy worst gap-budget margin \
             {worst_value_margin:.2e} (c_bias {c_pol:.3}); worst dominance excess \
             {worst_dominance:.2e} (must be <= 0); horizon tail at most {worst_tail:.2e} \
             of scale (tol 1e-8)"
        );
        Ok((pass, details))
    })
}

/// 8: structural shape of the solution. Positive pasting constant,
/// monotone hit discounts on both sides, and the a-priori bounds on the
/// time-weighted functionals.
pub fn criterion_8(vf: &ValueFunction, _cfg: &AcceptanceConfig) -> CriterionResult {
    run(8, "shape and bounds of the functionals", 60.0, || {
        let params = &vf.params;
        let d = params.derived();
        let r_star = vf.r_star();
        let mut pass = vf.delta > 0.0;

        let left = linspace(r_star - 8.0, r_star, 200);
        let mut prev = f64::INFINITY;
        let mut psi1_ok = true;
        for &r in &left {
            let v = psi1_closed(params, r_star, r)?;
            // within ~1e-6 of the barrier the excess over 1 is below f64
            // resolution (the slope vanishes at r*), so only the strict
            // decrease is checkable there
            psi1_ok &= v < prev && (r >= r_star - 1e-6 || v > 1.0);
            prev = v;
        }

        let right = linspace(r_star, r_star + 8.0, 200);
        let mut prev = f64::INFINITY;
        let mut phi1_ok = true;
        for &r in &right {
            let v = phi1_closed(params, r_star, r)?;
            phi1_ok &= v < prev;
            prev = v;
        }

        let mut psi2_bound = true;
        let mut worst_psi2 = f64::NEG_INFINITY;
        for &r in &left {
            let excess = vf.psi2.value(r)? - (-(r - r_star) / params.a).exp() / d.b;
            psi2_bound &= excess <= 1e-9;
            worst_psi2 = worst_psi2.max(excess);
        }
        let mut phi2_bound = true;
        let mut worst_phi2 = f64::NEG_INFINITY;
        for &r in &right {
            let excess = vf.phi2.value(r)? - 1.0 / d.b;
            phi2_bound &= excess <= 1e-9;
            worst_phi2 = worst_phi2.max(excess);
        }

        pass &= psi1_ok && phi1_ok && psi2_bound && phi2_bound;
        let details = format!(
            "pasting constant {:.6} > 0; below-barrier discount > 1 and strictly \
             decreasing: {psi1_ok}; above-barrier discount strictly decreasing: {phi1_ok}; \
             time-weighted bounds exceeded by at most {worst_psi2:.2e} below and \
             {worst_phi2:.2e} above (tol 1e-9)",
            vf.delta
        );
        Ok((pass, details))
    })
}

/// Negative control: rerun one optimal-policy comparison with the step
/// coarsened to 0.5 and only the statistical part of the budget. The
/// discretization bias must now break the comparison; a pass here means the
/// budgets in criteria 6 and 7 are doing real work.
pub fn coarse_step_negative_control(vf: &ValueFunction, cfg: &AcceptanceConfig) -> CriterionResult {
    run(9, "negative control: coarse step breaks the naive budget", 600.0, || {
        let params = &vf.params;
        let env = TailEnvelope { r_star: vf.r_star(), delta: vf.delta };
        let mc = McParams {
            n: 20_000,
            h: 0.5,
            t_max: 40.0 / params.derived().b,
            seed: cfg.seed ^ 0xc0a45e,
            truncated_cap: None,
        };
        let spec = PolicySpec::barrier_lump_sum(vf.r_star());
        let est = evaluate_barrier_policy(params, 1.0, 1.0, spec, &mc, &env)?;
        let v = vf.value_at(1.0, 1.0)?;
        let gap = (est.mean - v).abs();
        let naive = 3.0 * est.stderr + est.tail_bound;
        let violated = gap > naive;
        let details = format!(
            "h = 0.5 estimate {:.5} +- {:.5} vs value {v:.5}: gap {gap:.2e} against \
             bias-free budget {naive:.2e}; {}",
            est.mean,
            est.stderr,
            if violated { "bias detected as required" } else { "bias went undetected" }
        );
        Ok((violated, details))
    })
}

type Criterion = fn(&ValueFunction, &AcceptanceConfig) -> CriterionResult;

const BATTERY: [Criterion; 9] = [
    criterion_1,
    criterion_2,
    criterion_3,
    criterion_4,
    criterion_5,
    criterion_6,
    criterion_7,
    criterion_8,
    coarse_step_negative_control,
];

/// Run the full battery, invoking `on_result` as each check completes.
pub fn run_all_with<F>(
    params: &ModelParams,
    cfg: &AcceptanceConfig,
    mut on_result: F,
) -> Result<Vec<CriterionResult>>
where
    F: FnMut(&CriterionResult),
{
    let vf = ValueFunction::build(params, &SolverSettings::default())?;
    let mut out = Vec::with_capacity(BATTERY.len());
    for criterion in BATTERY {
        let res = criterion(&vf, cfg);
        on_result(&res);
        out.push(res);
    }
    Ok(out)
}

/// Run the full battery silently.
pub fn run_all(params: &ModelParams, cfg: &AcceptanceConfig) -> Result<Vec<CriterionResult>> {
    run_all_with(params, cfg, |_| {})
}
