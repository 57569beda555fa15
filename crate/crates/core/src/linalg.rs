//! Small dense complex linear algebra used across the crate.
//!
//! Everything here operates on `ndarray::Array2<C64>` at the modest
//! dimensions of this problem (at most 2^n x 2^n with n <= 8), so the
//! implementations favour clarity over asymptotic cleverness.

use ndarray::{Array1, Array2};

use crate::C64;

/// Conjugate transpose.
pub fn dagger(m: &Array2<C64>) -> Array2<C64> {
    m.t().mapv(|z| z.conj())
}

/// Identity matrix of dimension `n`.
pub fn identity(n: usize) -> Array2<C64> {
    Array2::from_diag(&Array1::from_elem(n, C64::new(1.0, 0.0)))
}

pub fn trace(m: &Array2<C64>) -> C64 {
    m.diag().sum()
}

pub fn frobenius_norm(m: &Array2<C64>) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Largest absolute entry of `a - b`.
pub fn max_abs_diff(a: &Array2<C64>, b: &Array2<C64>) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

/// Largest absolute entry of `m - m^dag`; zero for Hermitian matrices.
pub fn hermiticity_error(m: &Array2<C64>) -> f64 {
    max_abs_diff(m, &dagger(m))
}

/// Largest absolute entry of `u u^dag - I`.
pub fn unitarity_error(u: &Array2<C64>) -> f64 {
    let prod = u.dot(&dagger(u));
    max_abs_diff(&prod, &identity(u.nrows()))
}

/// Kronecker product, first factor on the most significant index.
pub fn kron(a: &Array2<C64>, b: &Array2<C64>) -> Array2<C64> {
    let (ar, ac) = a.dim();
    let (br, bc) = b.dim();
    let mut out = Array2::zeros((ar * br, ac * bc));
    for i in 0..ar {
        for j in 0..ac {
            let aij = a[[i, j]];
            if aij == C64::new(0.0, 0.0) {
                continue;
            }
            for k in 0..br {
                for l in 0..bc {
                    out[[i * br + k, j * bc + l]] = aij * b[[k, l]];
                }
            }
        }
    }
    out
}

/// Determinant by LU with partial pivoting.
pub fn determinant(m: &Array2<C64>) -> C64 {
    let n = m.nrows();
    assert_eq!(n, m.ncols());
    let mut a = m.clone();
    let mut det = C64::new(1.0, 0.0);
    for col in 0..n {
        let mut pivot = col;
        let mut best = a[[col, col]].norm();
        for row in col + 1..n {
            let v = a[[row, col]].norm();
            if v > best {
                best = v;
                pivot = row;
            }
        }
        if best == 0.0 {
            return C64::new(0.0, 0.0);
        }
        if pivot != col {
            for j in 0..n {
                let tmp = a[[col, j]];
                a[[col, j]] = a[[pivot, j]];
                a[[pivot, j]] = tmp;
            }
            det = -det;
        }
        let d = a[[col, col]];
        det *= d;
        for row in col + 1..n {
            let f = a[[row, col]] / d;
            for j in col..n {
                let v = a[[col, j]];
                a[[row, j]] -= f * v;
            }
        }
    }
    det
}

/// Numerical rank via row echelon with partial pivoting.
pub fn rank(m: &Array2<C64>, tol: f64) -> usize {
    let (rows, cols) = m.dim();
    let mut a = m.clone();
    let mut r = 0;
    for col in 0..cols {
        if r == rows {
            break;
        }
        let mut pivot = r;
        let mut best = a[[r, col]].norm();
        for row in r + 1..rows {
            let v = a[[row, col]].norm();
            if v > best {
                best = v;
                pivot = row;
            }
        }
        if best <= tol {
            continue;
        }
        if pivot != r {
            for j in 0..cols {
                let tmp = a[[r, j]];
                a[[r, j]] = a[[pivot, j]];
                a[[pivot, j]] = tmp;
            }
        }
        let d = a[[r, col]];
        for row in r + 1..rows {
            let f = a[[row, col]] / d;
            for j in col..cols {
                let v = a[[r, j]];
                a[[row, j]] -= f * v;
            }
        }
        r += 1;
    }
    r
}

/// Eigenvalues of a Hermitian matrix by cyclic complex Jacobi rotations.
///
/// Returns eigenvalues sorted ascending. Intended for validity checks on
/// density matrices; dimensions up to a few hundred are fine.
pub fn eigvalsh(m: &Array2<C64>) -> Vec<f64> {
    let n = m.nrows();
    assert_eq!(n, m.ncols());
    let mut a = m.clone();
    let scale = frobenius_norm(&a).max(1.0);
    let tol = 1e-14 * scale;

    for _sweep in 0..100 {
        let mut off = 0.0f64;
        for p in 0..n {
            for q in p + 1..n {
                off = off.max(a[[p, q]].norm());
            }
        }
        if off <= tol {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let g = a[[p, q]];
                let gn = g.norm();
                if gn <= tol * 1e-2 {
                    continue;
                }
                // Phase rotation makes the 2x2 block real, then a standard
                // Jacobi angle annihilates it.
                let u = g / gn;
                let alpha = a[[p, p]].re;
                let beta = a[[q, q]].re;
                let tau = (beta - alpha) / (2.0 * gn);
                let t = if tau >= 0.0 {
                    1.0 / (tau + (1.0 + tau * tau).sqrt())
                } else {
                    -1.0 / (-tau + (1.0 + tau * tau).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;

                // Column rotation: G = [[c, s*u], [-s*conj(u) ... ]] acting as
                // A <- G^dag A G with G mixing columns (p, q).
                let (cu, su) = (C64::new(c, 0.0), C64::new(s, 0.0) * u);
                for i in 0..n {
                    let aip = a[[i, p]];
                    let aiq = a[[i, q]];
                    a[[i, p]] = aip * cu - aiq * su.conj();
                    a[[i, q]] = aip * su + aiq * cu;
                }
                for j in 0..n {
                    let apj = a[[p, j]];
                    let aqj = a[[q, j]];
                    a[[p, j]] = apj * cu.conj() - aqj * su;
                    a[[q, j]] = apj * su.conj() + aqj * cu;
                }
            }
        }
    }

    let mut evals: Vec<f64> = a.diag().iter().map(|z| z.re).collect();
    evals.sort_by(|x, y| x.partial_cmp(y).unwrap());
    evals
}

/// Gauss-Legendre nodes and weights on [-1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for k in 0..n {
        // Chebyshev-based initial guess, then Newton on P_n.
        let mut x = (std::f64::consts::PI * (k as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre_with_derivative(n, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let (_, dp) = legendre_with_derivative(n, x);
        nodes[k] = x;
        weights[k] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn determinant_of_known_matrix() {
        let m = array![[c(1.0, 0.0), c(2.0, 0.0)], [c(3.0, 0.0), c(4.0, 0.0)]];
        let d = determinant(&m);
        assert_abs_diff_eq!(d.re, -2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(d.im, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn eigvalsh_pauli_x() {
        let m = array![[c(0.0, 0.0), c(1.0, 0.0)], [c(1.0, 0.0), c(0.0, 0.0)]];
        let e = eigvalsh(&m);
        assert_abs_diff_eq!(e[0], -1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(e[1], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn eigvalsh_complex_hermitian() {
        let m = array![
            [c(2.0, 0.0), c(0.0, -1.0), c(0.3, 0.2)],
            [c(0.0, 1.0), c(1.0, 0.0), c(0.5, 0.0)],
            [c(0.3, -0.2), c(0.5, 0.0), c(-1.0, 0.0)]
        ];
        let e = eigvalsh(&m);
        // trace and Frobenius norm are eigenvalue invariants
        assert_abs_diff_eq!(e.iter().sum::<f64>(), 2.0, epsilon = 1e-10);
        let sq: f64 = e.iter().map(|x| x * x).sum();
        assert_abs_diff_eq!(sq, frobenius_norm(&m).powi(2), epsilon = 1e-10);
    }

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let (x, w) = gauss_legendre(16);
        // integral of x^4 over [-1,1] = 2/5
        let got: f64 = x.iter().zip(&w).map(|(xi, wi)| wi * xi.powi(4)).sum();
        assert_abs_diff_eq!(got, 0.4, epsilon = 1e-13);
        let total: f64 = w.iter().sum();
        assert_abs_diff_eq!(total, 2.0, epsilon = 1e-13);
    }

    #[test]
    fn rank_detects_degeneracy() {
        let m = array![
            [c(1.0, 0.0), c(2.0, 0.0)],
            [c(2.0, 0.0), c(4.0, 0.0)]
        ];
        assert_eq!(rank(&m, 1e-12), 1);
    }
}
