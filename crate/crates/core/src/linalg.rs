//! Stationary distributions and relative values of finite Markov chains.
//!
//! Systems up to [`DENSE_LIMIT`] states are solved by dense LU; larger ones by
//! iteration on the lazy chain `(P + I)/2` down to a `1e-12` residual.

use nalgebra::{DMatrix, DVector};

/// Largest chain solved by a direct dense factorization.
pub const DENSE_LIMIT: usize = 2000;
const ITER_TOL: f64 = 1e-12;
const ITER_MAX: usize = 10_000_000;

/// Sparse row-stochastic matrix: `rows[i]` lists `(j, P_ij)`.
pub type Rows = [Vec<(usize, f64)>];

/// Solves `A x = b` by LU; `None` if `A` is numerically singular.
pub fn lu_solve(a: DMatrix<f64>, b: &DVector<f64>) -> Option<DVector<f64>> {
    a.lu().solve(b)
}

fn dense(rows: &Rows) -> DMatrix<f64> {
    let n = rows.len();
    let mut p = DMatrix::zeros(n, n);
    for (i, row) in rows.iter().enumerate() {
        for &(j, v) in row {
            p[(i, j)] += v;
        }
    }
    p
}

/// Stationary distribution of a unichain chain: `ρ P = ρ`, `Σρ = 1`.
pub fn stationary(rows: &Rows, dense_limit: usize) -> Option<Vec<f64>> {
    let n = rows.len();
    if n == 0 {
        return Some(Vec::new());
    }
    if n <= dense_limit {
        let p = dense(rows);
        let mut a = p.transpose() - DMatrix::identity(n, n);
        for j in 0..n {
            a[(n - 1, j)] = 1.0;
        }
        let mut b = DVector::zeros(n);
        b[n - 1] = 1.0;
        let x = lu_solve(a, &b)?;
        return Some(x.iter().copied().collect());
    }
    let mut rho = vec![1.0 / n as f64; n];
    for _ in 0..ITER_MAX {
        let mut next = vec![0.0; n];
        for (i, row) in rows.iter().enumerate() {
            next[i] += 0.5 * rho[i];
            for &(j, v) in row {
                next[j] += 0.5 * rho[i] * v;
            }
        }
        let diff: f64 = next.iter().zip(&rho).map(|(a, b)| (a - b).abs()).sum();
        rho = next;
        if diff < ITER_TOL {
            return Some(rho);
        }
    }
    None
}

/// Relative values of a unichain chain with per-state reward `r`:
/// solves `h + g = r + P h` with `h[reference] = 0`, returning `(g, h)`.
pub fn relative_values(rows: &Rows, r: &[f64], reference: usize, dense_limit: usize) -> Option<(f64, Vec<f64>)> {
    let n = rows.len();
    if n <= dense_limit {
        // Unknowns: h_j for j != reference, and g in the reference column.
        let mut a = DMatrix::identity(n, n) - dense(rows);
        for i in 0..n {
            a[(i, reference)] = 1.0;
        }
        let b = DVector::from_column_slice(r);
        let x = lu_solve(a, &b)?;
        let g = x[reference];
        let mut h: Vec<f64> = x.iter().copied().collect();
        h[reference] = 0.0;
        return Some((g, h));
    }
    let mut h = vec![0.0; n];
    for _ in 0..ITER_MAX {
        let w: Vec<f64> = (0..n)
            .map(|i| 0.5 * r[i] + 0.5 * h[i] + 0.5 * rows[i].iter().map(|&(j, v)| v * h[j]).sum::<f64>())
            .collect();
        let offset = w[reference];
        let mut diff: f64 = 0.0;
        for i in 0..n {
            let v = w[i] - offset;
            diff = diff.max((v - h[i]).abs());
            h[i] = v;
        }
        if diff < ITER_TOL {
            // The lazy chain has gain g/2 and relative values h.
            return Some((2.0 * offset, h));
        }
    }
    None
}
