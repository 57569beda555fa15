//! Discrete Heisenberg-Weyl group generators.

use ndarray::Array2;

use super::KernelError;
use crate::{linalg, C64};

/// The N^2 unitaries T_{alpha,beta} = X^alpha Z^beta of the discrete
/// Heisenberg-Weyl group, with X the cyclic shift |k> -> |k+1 mod N> and
/// Z = diag(omega^k), omega = exp(2 pi i / N).
///
/// Operators are indexed by the flat index `alpha * N + beta`.
#[derive(Debug, Clone)]
pub struct UnitarySet {
    dim: usize,
    ops: Vec<Array2<C64>>,
}

impl UnitarySet {
    /// Build the Weyl set for Hilbert dimension `dim`.
    pub fn build(dim: usize) -> Result<Self, KernelError> {
        if dim < 2 {
            return Err(KernelError::InvalidDimension(dim));
        }
        let omega = Self::omega_for(dim);
        let mut ops = Vec::with_capacity(dim * dim);
        for alpha in 0..dim {
            for beta in 0..dim {
                // T[(k + alpha) % N, k] = omega^(beta * k)
                let mut t = Array2::zeros((dim, dim));
                for k in 0..dim {
                    t[[(k + alpha) % dim, k]] = omega.powu((beta * k) as u32);
                }
                ops.push(t);
            }
        }
        Ok(UnitarySet { dim, ops })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn op(&self, alpha: usize, beta: usize) -> &Array2<C64> {
        &self.ops[alpha * self.dim + beta]
    }

    pub fn iter(&self) -> impl Iterator<Item = ((usize, usize), &Array2<C64>)> {
        let dim = self.dim;
        self.ops
            .iter()
            .enumerate()
            .map(move |(i, t)| ((i / dim, i % dim), t))
    }

    pub fn omega(&self) -> C64 {
        Self::omega_for(self.dim)
    }

    fn omega_for(dim: usize) -> C64 {
        C64::from_polar(1.0, 2.0 * std::f64::consts::PI / dim as f64)
    }

    /// Largest deviation from unitarity over the whole set.
    pub fn unitarity_error(&self) -> f64 {
        self.ops
            .iter()
            .map(linalg::unitarity_error)
            .fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;

    #[test]
    fn rejects_dimension_below_two() {
        assert!(matches!(
            UnitarySet::build(1),
            Err(KernelError::InvalidDimension(1))
        ));
    }

    #[test]
    fn n2_reproduces_pauli_x_and_z() {
        let set = UnitarySet::build(2).unwrap();
        let x = array![
            [C64::new(0.0, 0.0), C64::new(1.0, 0.0)],
            [C64::new(1.0, 0.0), C64::new(0.0, 0.0)]
        ];
        let z = array![
            [C64::new(1.0, 0.0), C64::new(0.0, 0.0)],
            [C64::new(0.0, 0.0), C64::new(-1.0, 0.0)]
        ];
        assert!(linalg::max_abs_diff(set.op(1, 0), &x) < 1e-15);
        assert!(linalg::max_abs_diff(set.op(0, 1), &z) < 1e-15);
    }

    #[test]
    fn n2_weyl_pair_anticommutes() {
        let set = UnitarySet::build(2).unwrap();
        let xz = set.op(1, 0).dot(set.op(0, 1));
        let zx = set.op(0, 1).dot(set.op(1, 0));
        assert!(linalg::max_abs_diff(&xz, &zx.mapv(|v| -v)) < 1e-15);
    }

    #[test]
    fn weyl_commutation_phase_is_a_primitive_root() {
        // T10 T01 = c T01 T10 with |c| = 1 and c^N = 1; for N = 2, c = -1.
        for dim in 2..=5 {
            let set = UnitarySet::build(dim).unwrap();
            let lhs = set.op(1, 0).dot(set.op(0, 1));
            let rhs = set.op(0, 1).dot(set.op(1, 0));
            // extract the scalar from a nonzero entry
            let (mut c, mut best) = (C64::new(0.0, 0.0), 0.0);
            for (l, r) in lhs.iter().zip(rhs.iter()) {
                if r.norm() > best {
                    best = r.norm();
                    c = l / r;
                }
            }
            assert_abs_diff_eq!(c.norm(), 1.0, epsilon = 1e-12);
            assert_abs_diff_eq!(c.powu(dim as u32).re, 1.0, epsilon = 1e-10);
            assert_abs_diff_eq!(c.powu(dim as u32).im, 0.0, epsilon = 1e-10);
            assert!((c - C64::new(1.0, 0.0)).norm() > 0.5, "phase must be nontrivial");
            // and the whole scaled relation holds entrywise
            assert!(linalg::max_abs_diff(&lhs, &rhs.mapv(|v| c * v)) < 1e-12);
        }
    }

    #[test]
    fn n3_operators_unitary_and_orthogonal() {
        let set = UnitarySet::build(3).unwrap();
        assert!(set.unitarity_error() < 1e-12);
        for ((a, b), t1) in set.iter() {
            for ((a2, b2), t2) in set.iter() {
                let overlap = linalg::trace(&linalg::dagger(t1).dot(t2));
                let expected = if (a, b) == (a2, b2) { 3.0 } else { 0.0 };
                assert_abs_diff_eq!(overlap.re, expected, epsilon = 1e-12);
                assert_abs_diff_eq!(overlap.im, 0.0, epsilon = 1e-12);
            }
        }
    }
}
