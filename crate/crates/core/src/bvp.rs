//! Linear two-point boundary value problems by cubic Hermite collocation.
//!
//! Solves f'' = alpha(r) f' + beta(r) f + gamma(r) on [lo, hi] with Dirichlet
//! data, collocating at the two Gauss points of every element. Unknowns are
//! nodal (value, derivative) pairs, so the solution is C^1 by construction
//! and nodal values superconverge at O(h^4).

use crate::num::CompensatedSum;
use crate::{Error, Result};

/// C^1 piecewise-cubic solution on a uniform node grid.
#[derive(Debug, Clone)]
pub struct HermiteCurve {
    pub nodes: Vec<f64>,
    pub values: Vec<f64>,
    pub derivs: Vec<f64>,
}

impl HermiteCurve {
    fn locate(&self, r: f64) -> Result<usize> {
        let lo = self.nodes[0];
        let hi = *self.nodes.last().unwrap();
        // round-off slack so callers may pass endpoints they computed themselves
        let slack = (hi - lo) * 1e-12;
        if !(r >= lo - slack && r <= hi + slack) {
            return Err(Error::Domain(format!(
                "evaluation point {r} outside [{lo}, {hi}]"
            )));
        }
        let n = self.nodes.len();
        let h = (hi - lo) / (n - 1) as f64;
        let idx = (((r - lo) / h).max(0.0) as usize).min(n - 2);
        Ok(idx)
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.nodes[0], *self.nodes.last().unwrap())
    }

    pub fn eval(&self, r: f64) -> Result<f64> {
        let i = self.locate(r)?;
        let h = self.nodes[i + 1] - self.nodes[i];
        let s = (r - self.nodes[i]) / h;
        let (h00, h10, h01, h11) = hermite_basis(s);
        Ok(self.values[i] * h00
            + self.derivs[i] * h * h10
            + self.values[i + 1] * h01
            + self.derivs[i + 1] * h * h11)
    }

    pub fn eval_deriv(&self, r: f64) -> Result<f64> {
        let i = self.locate(r)?;
        let h = self.nodes[i + 1] - self.nodes[i];
        let s = (r - self.nodes[i]) / h;
        let (d00, d10, d01, d11) = hermite_basis_deriv(s);
        Ok((self.values[i] * d00 + self.values[i + 1] * d01) / h
            + self.derivs[i] * d10
            + self.derivs[i + 1] * d11)
    }
}

fn hermite_basis(s: f64) -> (f64, f64, f64, f64) {
    let s2 = s * s;
    let s3 = s2 * s;
    (
        2.0 * s3 - 3.0 * s2 + 1.0,
        s3 - 2.0 * s2 + s,
        -2.0 * s3 + 3.0 * s2,
        s3 - s2,
    )
}

/// d/ds of the basis; caller divides the value-basis parts by h.
fn hermite_basis_deriv(s: f64) -> (f64, f64, f64, f64) {
    let s2 = s * s;
    (
        6.0 * s2 - 6.0 * s,
        3.0 * s2 - 4.0 * s + 1.0,
        -6.0 * s2 + 6.0 * s,
        3.0 * s2 - 2.0 * s,
    )
}

fn hermite_basis_deriv2(s: f64) -> (f64, f64, f64, f64) {
    (
        12.0 * s - 6.0,
        6.0 * s - 4.0,
        -12.0 * s + 6.0,
        6.0 * s - 2.0,
    )
}

/// Coefficient callbacks for f'' = alpha f' + beta f + gamma.
pub struct LinearOde<'a> {
    pub alpha: &'a dyn Fn(f64) -> f64,
    pub beta: &'a dyn Fn(f64) -> f64,
    pub gamma: &'a dyn Fn(f64) -> f64,
}

/// Solve with f(lo) = value_lo, f(hi) = value_hi on n_elements uniform
/// elements. Returns the C^1 curve; fails if the collocation system is
/// singular to working precision.
pub fn solve_dirichlet(
    ode: &LinearOde,
    lo: f64,
    hi: f64,
    value_lo: f64,
    value_hi: f64,
    n_elements: usize,
) -> Result<HermiteCurve> {
    if !(hi > lo) || n_elements < 2 {
        return Err(Error::Validation(format!(
            "bad BVP domain [{lo}, {hi}] with {n_elements} elements"
        )));
    }
    let n_nodes = n_elements + 1;
    let n_unknowns = 2 * n_nodes;
    let h = (hi - lo) / n_elements as f64;

    // Gauss-Legendre points on (0,1)
    let g1 = 0.5 - 0.5 / 3.0f64.sqrt();
    let g2 = 0.5 + 0.5 / 3.0f64.sqrt();

    // band structure: row for collocation point c of element e is 2e + 1 + c,
    // boundary rows are 0 and 2*n_nodes - 1; unknown columns (f_i, d_i) are
    // (2i, 2i+1). Each collocation row touches columns 2e .. 2e+3.
    let mut band = BandMatrix::new(n_unknowns, 3, 3);
    let mut rhs = vec![0.0; n_unknowns];

    band.set(0, 0, 1.0);
    rhs[0] = value_lo;

    for e in 0..n_elements {
        let r0 = lo + e as f64 * h;
        for (c, s) in [g1, g2].into_iter().enumerate() {
            let row = 2 * e + 1 + c;
            let r = r0 + s * h;
            let (b0, b1, b2, b3) = hermite_basis(s);
            let (d0, d1, d2, d3) = hermite_basis_deriv(s);
            let (q0, q1, q2, q3) = hermite_basis_deriv2(s);
            let al = (ode.alpha)(r);
            let be = (ode.beta)(r);
            // (f'' - alpha f' - beta f)(r) = gamma(r), scaled by h^2 to keep
            // the band entries O(1)
            let coef = |basis: f64, dbasis: f64, ddbasis: f64, is_deriv: bool| -> f64 {
                let scale = if is_deriv { h } else { 1.0 };
                scale * (ddbasis / (h * h) - al * dbasis / h - be * basis) * h * h
            };
            band.set(row, 2 * e, coef(b0, d0, q0, false));
            band.set(row, 2 * e + 1, coef(b1, d1, q1, true));
            band.set(row, 2 * e + 2, coef(b2, d2, q2, false));
            band.set(row, 2 * e + 3, coef(b3, d3, q3, true));
            rhs[row] = (ode.gamma)(r) * h * h;
        }
    }

    let last = n_unknowns - 1;
    band.set(last, last - 1, 1.0);
    rhs[last] = value_hi;

    let solution = band.solve(rhs)?;
    let mut nodes: Vec<f64> = (0..n_nodes).map(|i| lo + i as f64 * h).collect();
    nodes[n_elements] = hi; // exact endpoint, not lo + n*h round-off
    let mut values: Vec<f64> = (0..n_nodes).map(|i| solution[2 * i]).collect();
    let derivs: Vec<f64> = (0..n_nodes).map(|i| solution[2 * i + 1]).collect();
    // the boundary rows are identities; pin the data to them exactly
    values[0] = value_lo;
    values[n_elements] = value_hi;
    Ok(HermiteCurve { nodes, values, derivs })
}

/// Residual f'' - alpha f' - beta f - gamma of a solved curve at r, with the
/// second derivative taken from the cubic interpolant.
pub fn residual_at(ode: &LinearOde, curve: &HermiteCurve, r: f64) -> Result<f64> {
    let i = curve.locate(r)?;
    let h = curve.nodes[i + 1] - curve.nodes[i];
    let s = (r - curve.nodes[i]) / h;
    let (q0, q1, q2, q3) = hermite_basis_deriv2(s);
    let f2 = (curve.values[i] * q0 + curve.values[i + 1] * q2) / (h * h)
        + (curve.derivs[i] * q1 + curve.derivs[i + 1] * q3) / h;
    let f1 = curve.eval_deriv(r)?;
    let f0 = curve.eval(r)?;
    Ok(f2 - (ode.alpha)(r) * f1 - (ode.beta)(r) * f0 - (ode.gamma)(r))
}

/// Rowwise band storage with partial pivoting, LAPACK-style: logical entry
/// (i, j) lives at [i][j - i + kl + ku] with kl extra superdiagonals for fill.
struct BandMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    // row-major, width kl + ku + 1 + kl
    data: Vec<f64>,
    width: usize,
}

impl BandMatrix {
    fn new(n: usize, kl: usize, ku: usize) -> Self {
        let width = 2 * kl + ku + 1;
        BandMatrix { n, kl, ku, data: vec![0.0; n * width], width }
    }

    fn set(&mut self, i: usize, j: usize, v: f64) {
        debug_assert!(j + self.kl >= i && j <= i + self.ku + self.kl);
        let off = j + self.kl - i;
        self.data[i * self.width + off] = v;
    }

    fn get(&self, i: usize, j: usize) -> f64 {
        let off = j + self.kl - i;
        self.data[i * self.width + off]
    }

    fn set_raw(&mut self, i: usize, j: usize, v: f64) {
        let off = j + self.kl - i;
        self.data[i * self.width + off] = v;
    }

    /// Gaussian elimination with partial pivoting over the band, solving in
    /// place. Row swaps stay within the band thanks to the kl fill columns.
    fn solve(mut self, mut rhs: Vec<f64>) -> Result<Vec<f64>> {
        let n = self.n;
        let kl = self.kl;
        let ku = self.ku;
        for col in 0..n {
            let row_end = (col + kl + 1).min(n);
            let mut piv_row = col;
            let mut piv_val = self.get(col, col).abs();
            for r in (col + 1)..row_end {
                let v = self.get(r, col).abs();
                if v > piv_val {
                    piv_val = v;
                    piv_row = r;
                }
            }
            if piv_val == 0.0 || !piv_val.is_finite() {
                return Err(Error::Numerical(format!(
                    "collocation system singular at column {col}"
                )));
            }
            if piv_row != col {
                let col_end = (col + ku + kl + 1).min(n);
                for j in col..col_end {
                    let a = self.get(col, j);
                    let b = self.get(piv_row, j);
                    self.set_raw(col, j, b);
                    self.set_raw(piv_row, j, a);
                }
                rhs.swap(col, piv_row);
            }
            let pivot = self.get(col, col);
            let col_end = (col + ku + kl + 1).min(n);
            for r in (col + 1)..row_end {
                let factor = self.get(r, col) / pivot;
                if factor == 0.0 {
                    continue;
                }
                for j in col..col_end {
                    let v = self.get(r, j) - factor * self.get(col, j);
                    self.set_raw(r, j, v);
                }
                rhs[r] -= factor * rhs[col];
            }
        }
        // back substitution
        let mut x = vec![0.0; n];
        for i in (0..n).rev() {
            let j_end = (i + ku + kl + 1).min(n);
            let mut acc = CompensatedSum::new();
            acc.add(rhs[i]);
            for j in (i + 1)..j_end {
                acc.add(-self.get(i, j) * x[j]);
            }
            x[i] = acc.value() / self.get(i, i);
        }
        Ok(x)
    }
}
