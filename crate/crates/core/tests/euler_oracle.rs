//! Brute-force oracles for the exact transition law: a fine-step
//! Euler-Maruyama simulation must reproduce the closed-form joint moments
//! of (r, dU) over a macroscopic step, and sampled discount factors must
//! match their Gaussian closed form at any step size.

use ou_consumption::model::ModelParams;
use ou_consumption::ou_engine::{
    discount_expectation, joint_moments, sample_joint, simulate_path, RngStream,
};

struct Sample2 {
    mean_a: f64,
    mean_b: f64,
    var_a: f64,
    var_b: f64,
    cov: f64,
    n: f64,
}

fn stats(pairs: &[(f64, f64)]) -> Sample2 {
    let n = pairs.len() as f64;
    let mean_a = pairs.iter().map(|p| p.0).sum::<f64>() / n;
    let mean_b = pairs.iter().map(|p| p.1).sum::<f64>() / n;
    let mut var_a = 0.0;
    let mut var_b = 0.0;
    let mut cov = 0.0;
    for &(a, b) in pairs {
        var_a += (a - mean_a) * (a - mean_a);
        var_b += (b - mean_b) * (b - mean_b);
        cov += (a - mean_a) * (b - mean_b);
    }
    Sample2 { mean_a, mean_b, var_a: var_a / (n - 1.0), var_b: var_b / (n - 1.0), cov: cov / (n - 1.0), n }
}

/// One macro step of length `h` walked with `k` Euler micro-steps; the
/// integral increment is accumulated with the trapezoid rule so its own
/// bias is O(dt^2), far below the Monte Carlo resolution of the test.
fn euler_macro_step(p: &ModelParams, r0: f64, h: f64, k: usize, rng: &mut RngStream) -> (f64, f64) {
    let dt = h / k as f64;
    let root_dt = dt.sqrt();
    let mut r = r0;
    let mut du = 0.0;
    for _ in 0..k {
        let r_next = r + p.a * (p.b_tilde - r) * dt + p.sigma_tilde * root_dt * rng.standard_normal();
        du += 0.5 * (r + r_next) * dt;
        r = r_next;
    }
    (r, du)
}

#[test]
fn euler_fine_steps_reproduce_exact_joint_moments() {
    let p = ModelParams::example();
    let r0 = 5.0;
    let h = 0.5;
    let m = joint_moments(&p, r0, h).unwrap();

    let n_paths = 20_000;
    let mut rng = RngStream::new(0xE11E7, 0);
    let pairs: Vec<(f64, f64)> =
        (0..n_paths).map(|_| euler_macro_step(&p, r0, h, 4000, &mut rng)).collect();
    let s = stats(&pairs);

    // 4-sigma gates; for the variances the sampling error of a Gaussian
    // sample variance is var * sqrt(2/(n-1)).
    let se_mean_r = (m.var_r / s.n).sqrt();
    let se_mean_du = (m.var_du / s.n).sqrt();
    assert!(
        (s.mean_a - m.mean_r).abs() <= 4.0 * se_mean_r,
        "mean r: euler {} vs exact {} (se {se_mean_r:.2e})",
        s.mean_a,
        m.mean_r
    );
    assert!(
        (s.mean_b - m.mean_du).abs() <= 4.0 * se_mean_du,
        "mean dU: euler {} vs exact {} (se {se_mean_du:.2e})",
        s.mean_b,
        m.mean_du
    );
    let se_var = (2.0 / (s.n - 1.0)).sqrt();
    assert!((s.var_a - m.var_r).abs() <= 4.0 * se_var * m.var_r, "var r: {} vs {}", s.var_a, m.var_r);
    assert!(
        (s.var_b - m.var_du).abs() <= 4.0 * se_var * m.var_du,
        "var dU: {} vs {}",
        s.var_b,
        m.var_du
    );
    let se_cov = ((m.var_r * m.var_du + m.cov * m.cov) / (s.n - 1.0)).sqrt();
    assert!((s.cov - m.cov).abs() <= 4.0 * se_cov, "cov: {} vs {}", s.cov, m.cov);
}

#[test]
fn sampled_discount_factor_matches_gaussian_closed_form_at_any_step() {
    let p = ModelParams::example();
    let r0 = 5.0;
    let t = 1.5;
    let exact = discount_expectation(&p, r0, t).unwrap();

    // The transition sampling is exact, so a single macro step and a fine
    // grid are both unbiased; each must match the closed form, at any h.
    let n_paths = 200_000u64;
    let mut single = Vec::with_capacity(n_paths as usize);
    let m = joint_moments(&p, r0, t).unwrap();
    let mut rng = RngStream::new(0xD15C0, 0);
    for _ in 0..n_paths {
        let (_, du) = sample_joint(&m, &mut rng);
        single.push((-du).exp());
    }
    let (mean_1, se_1) = mean_se(&single);
    assert!(
        (mean_1 - exact).abs() <= 4.0 * se_1,
        "one-step estimate {mean_1} vs closed form {exact} (se {se_1:.2e})"
    );

    let mut fine = Vec::with_capacity(n_paths as usize / 4);
    for k in 0..n_paths / 4 {
        let mut rng = RngStream::new(0xD15C1, k);
        let path = simulate_path(&p, r0, t / 64.0, t, &mut rng).unwrap();
        fine.push((-path.u.last().unwrap()).exp());
    }
    let (mean_64, se_64) = mean_se(&fine);
    assert!(
        (mean_64 - exact).abs() <= 4.0 * se_64,
        "64-step estimate {mean_64} vs closed form {exact} (se {se_64:.2e})"
    );

    // And the two estimators agree with each other within combined noise.
    let combined = (se_1 * se_1 + se_64 * se_64).sqrt();
    assert!((mean_1 - mean_64).abs() <= 4.0 * combined);
}

fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}
