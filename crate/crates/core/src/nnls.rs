//! Nonnegative least squares by the Lawson-Hanson active-set method.
//!
//! Solves min ||A x - b|| subject to x >= 0 for small dense systems; the
//! least-squares subproblems on the passive set are solved through the
//! normal equations, which is ample for the 9 x 16 systems the projection
//! solver produces.

/// Row-major dense matrix view used by [`nnls`].
#[derive(Debug, Clone)]
pub struct DenseMatrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl DenseMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(rows * cols, data.len());
        DenseMatrix { rows, cols, data }
    }

    fn at(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }
}

#[derive(Debug, Clone)]
pub struct NnlsSolution {
    pub x: Vec<f64>,
    /// Euclidean norm of A x - b at the solution.
    pub residual_norm: f64,
    pub iterations: usize,
}

/// Solve min ||A x - b||, x >= 0.
pub fn nnls(a: &DenseMatrix, b: &[f64]) -> NnlsSolution {
    assert_eq!(a.rows, b.len());
    let (m, n) = (a.rows, a.cols);
    let scale = a.data.iter().fold(0.0f64, |acc, v| acc.max(v.abs())).max(1e-300);
    let tol = 1e-12 * scale * b.iter().fold(0.0f64, |acc, v| acc.max(v.abs())).max(1.0);

    let mut x = vec![0.0; n];
    let mut passive = vec![false; n];
    let mut iterations = 0usize;

    let residual = |x: &[f64]| -> Vec<f64> {
        (0..m)
            .map(|r| {
                let mut acc = -b[r];
                for c in 0..n {
                    if x[c] != 0.0 {
                        acc += a.at(r, c) * x[c];
                    }
                }
                acc
            })
            .collect()
    };

    let max_outer = 3 * n + 10;
    for _outer in 0..max_outer {
        iterations += 1;
        // dual vector w = A^T (b - A x)
        let res = residual(&x);
        let mut best = (usize::MAX, tol);
        for c in 0..n {
            if passive[c] {
                continue;
            }
            let mut w = 0.0;
            for r in 0..m {
                w -= a.at(r, c) * res[r];
            }
            if w > best.1 {
                best = (c, w);
            }
        }
        let Some(enter) = (best.0 != usize::MAX).then_some(best.0) else {
            break;
        };
        passive[enter] = true;

        // inner loop: restore feasibility on the passive set
        for _inner in 0..(3 * n + 10) {
            let p_idx: Vec<usize> = (0..n).filter(|&c| passive[c]).collect();
            let z = match solve_passive_ls(a, b, &p_idx) {
                Some(z) => z,
                None => {
                    // singular subproblem: drop the entering column and stop
                    passive[enter] = false;
                    break;
                }
            };
            if z.iter().all(|&v| v > 0.0) {
                for (&c, &v) in p_idx.iter().zip(&z) {
                    x[c] = v;
                }
                break;
            }
            // interpolate toward z until the first passive variable hits zero
            let mut alpha = f64::INFINITY;
            for (&c, &v) in p_idx.iter().zip(&z) {
                if v <= 0.0 {
                    let t = x[c] / (x[c] - v);
                    if t < alpha {
                        alpha = t;
                    }
                }
            }
            if !alpha.is_finite() {
                break;
            }
            for (&c, &v) in p_idx.iter().zip(&z) {
                x[c] += alpha * (v - x[c]);
            }
            for &c in &p_idx {
                if x[c] <= 1e-14 * scale {
                    x[c] = 0.0;
                    passive[c] = false;
                }
            }
        }
    }

    let res = residual(&x);
    let residual_norm = res.iter().map(|v| v * v).sum::<f64>().sqrt();
    NnlsSolution { x, residual_norm, iterations }
}

/// Least squares on the passive columns via normal equations with partial
/// pivoting; `None` when the Gram matrix is numerically singular.
fn solve_passive_ls(a: &DenseMatrix, b: &[f64], cols: &[usize]) -> Option<Vec<f64>> {
    let k = cols.len();
    if k == 0 {
        return Some(Vec::new());
    }
    let m = a.rows;
    let mut gram = vec![0.0; k * k];
    let mut rhs = vec![0.0; k];
    for (ci, &c1) in cols.iter().enumerate() {
        for (cj, &c2) in cols.iter().enumerate().skip(ci) {
            let mut acc = 0.0;
            for r in 0..m {
                acc += a.at(r, c1) * a.at(r, c2);
            }
            gram[ci * k + cj] = acc;
            gram[cj * k + ci] = acc;
        }
        let mut acc = 0.0;
        for r in 0..m {
            acc += a.at(r, c1) * b[r];
        }
        rhs[ci] = acc;
    }

    // Gaussian elimination with partial pivoting
    let mut order: Vec<usize> = (0..k).collect();
    for col in 0..k {
        let mut pivot = col;
        let mut best = gram[order[col] * k + col].abs();
        for row in col + 1..k {
            let v = gram[order[row] * k + col].abs();
            if v > best {
                best = v;
                pivot = row;
            }
        }
        if best < 1e-13 * (1.0 + gram.iter().fold(0.0f64, |a, v| a.max(v.abs()))) {
            return None;
        }
        order.swap(col, pivot);
        let prow = order[col];
        let d = gram[prow * k + col];
        for row in col + 1..k {
            let r = order[row];
            let f = gram[r * k + col] / d;
            if f == 0.0 {
                continue;
            }
            for j in col..k {
                gram[r * k + j] -= f * gram[prow * k + j];
            }
            rhs[r] -= f * rhs[prow];
        }
    }
    let mut z = vec![0.0; k];
    for col in (0..k).rev() {
        let prow = order[col];
        let mut acc = rhs[prow];
        for j in col + 1..k {
            acc -= gram[prow * k + j] * z[j];
        }
        z[col] = acc / gram[prow * k + col];
    }
    Some(z)
}
