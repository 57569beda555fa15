//! Off-diagonal positive-P kernel for spin-1/2.
//!
//! Built from unnormalized coherent states |psi>> = |0> + psi |1>:
//!
//!   Lambda(psi, phi) = (|0> + psi |1>)(<0| + phi <1|) / (1 + psi phi).
//!
//! The kernel is rank one with unit trace, generally non-Hermitian, and has
//! a pole on the manifold 1 + psi phi = 0. On the diagonal phi = conj(psi)
//! it reduces to the coherent projector at psi.

use ndarray::{array, Array2};

use super::KernelError;
use crate::C64;

/// Numerical pole threshold for |1 + psi.phi|.
const POLE_EPS: f64 = 1e-14;

/// A normalized positive-P kernel Lambda(psi, phi) at one site.
#[derive(Debug, Clone)]
pub struct PositivePKernel {
    pub psi: C64,
    pub phi: C64,
    pub matrix: Array2<C64>,
}

impl PositivePKernel {
    pub fn new(psi: C64, phi: C64) -> Result<Self, KernelError> {
        Ok(PositivePKernel {
            psi,
            phi,
            matrix: positive_p_matrix(psi, phi)?,
        })
    }
}

pub fn positive_p_matrix(psi: C64, phi: C64) -> Result<Array2<C64>, KernelError> {
    let denom = C64::new(1.0, 0.0) + psi * phi;
    if denom.norm() < POLE_EPS {
        return Err(KernelError::Pole(denom.norm()));
    }
    Ok(array![
        [C64::new(1.0, 0.0) / denom, phi / denom],
        [psi / denom, psi * phi / denom]
    ])
}

/// Tensor product of per-site kernels, site 0 on the most significant index.
pub fn product_kernel(psi: &[C64], phi: &[C64]) -> Result<Array2<C64>, KernelError> {
    assert_eq!(psi.len(), phi.len());
    let mut out = positive_p_matrix(psi[0], phi[0])?;
    for j in 1..psi.len() {
        out = crate::linalg::kron(&out, &positive_p_matrix(psi[j], phi[j])?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg;
    use approx::assert_abs_diff_eq;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn vacuum_kernel() {
        let k = PositivePKernel::new(c(0.0, 0.0), c(0.0, 0.0)).unwrap();
        assert_abs_diff_eq!(k.matrix[[0, 0]].re, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(k.matrix[[1, 1]].re, 0.0, epsilon = 1e-15);
    }

    #[test]
    fn x_polarized_point() {
        let k = PositivePKernel::new(c(1.0, 0.0), c(1.0, 0.0)).unwrap();
        for entry in k.matrix.iter() {
            assert_abs_diff_eq!(entry.re, 0.5, epsilon = 1e-15);
            assert_abs_diff_eq!(entry.im, 0.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn off_diagonal_point_is_non_hermitian_trace_one() {
        let k = PositivePKernel::new(c(1.0, 0.0), c(0.0, 0.0)).unwrap();
        assert_abs_diff_eq!(k.matrix[[0, 0]].re, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(k.matrix[[1, 0]].re, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(k.matrix[[0, 1]].norm(), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(k.matrix[[1, 1]].norm(), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(linalg::trace(&k.matrix).re, 1.0, epsilon = 1e-15);
        assert!(linalg::hermiticity_error(&k.matrix) > 0.5);
    }

    #[test]
    fn trace_is_exactly_one_everywhere() {
        let pts = [
            (c(0.3, 0.2), c(-0.5, 1.0)),
            (c(10.0, -4.0), c(0.01, 0.0)),
            (c(-2.0, 0.0), c(0.49, 0.0)),
        ];
        for (psi, phi) in pts {
            let k = PositivePKernel::new(psi, phi).unwrap();
            let t = linalg::trace(&k.matrix);
            assert_abs_diff_eq!(t.re, 1.0, epsilon = 1e-12);
            assert_abs_diff_eq!(t.im, 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn pole_is_reported() {
        assert!(matches!(
            PositivePKernel::new(c(1.0, 0.0), c(-1.0, 0.0)),
            Err(KernelError::Pole(_))
        ));
    }

    #[test]
    fn diagonal_manifold_gives_projector() {
        // Lambda(psi, conj(psi)) is the projector onto |0> + psi |1>; in the
        // mirrored convention of the continuous kernels that is the
        // coherent projector at conj(psi).
        let psi = c(0.8, -0.3);
        let k = PositivePKernel::new(psi, psi.conj()).unwrap();
        assert!(linalg::hermiticity_error(&k.matrix) < 1e-15);
        let p = super::super::coherent_projector(psi.conj());
        assert!(linalg::max_abs_diff(&k.matrix, &p) < 1e-14);
    }

    #[test]
    fn product_kernel_matches_kron() {
        let psi = [c(0.2, 0.1), c(-0.4, 0.6)];
        let phi = [c(0.3, 0.0), c(0.1, -0.2)];
        let k = product_kernel(&psi, &phi).unwrap();
        let k0 = positive_p_matrix(psi[0], phi[0]).unwrap();
        let k1 = positive_p_matrix(psi[1], phi[1]).unwrap();
        assert!(linalg::max_abs_diff(&k, &linalg::kron(&k0, &k1)) < 1e-15);
        assert_abs_diff_eq!(linalg::trace(&k).re, 1.0, epsilon = 1e-13);
    }
}
