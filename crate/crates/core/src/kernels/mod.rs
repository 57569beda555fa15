//! Quasiprobability kernels: discrete phase-point operators for arbitrary
//! Hilbert dimension, the explicit spin-1/2 tetrahedron family, SU(2)
//! continuous kernels, and the off-diagonal positive-P kernel.

mod phase_point;
mod positive_p;
mod su2;
mod weyl;

pub use phase_point::{
    extended_kernel, reconstruct, weyl_symbol, DiscreteWeights, PhasePointSet,
};
pub(crate) use phase_point::distribution_over;
pub use positive_p::{positive_p_matrix, product_kernel, PositivePKernel};
pub use su2::{bloch_to_point, coherent_projector, point_to_bloch, su2_kernel, Spin12PointFamily};
pub use weyl::UnitarySet;

use thiserror::Error;

/// Operator ordering of a quasiprobability distribution.
///
/// `Normal` (s = +1) is the P-like ordering whose weights serve as sampling
/// probabilities, `Symmetric` (s = 0) the Wigner ordering, and `AntiNormal`
/// (s = -1) the Q ordering fixed by the coherent-projector boundary
/// condition. Orderings s and -s are trace-dual.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum KernelOrdering {
    Normal,
    Symmetric,
    AntiNormal,
}

impl KernelOrdering {
    pub fn s(self) -> i8 {
        match self {
            KernelOrdering::Normal => 1,
            KernelOrdering::Symmetric => 0,
            KernelOrdering::AntiNormal => -1,
        }
    }

    pub fn dual(self) -> KernelOrdering {
        match self {
            KernelOrdering::Normal => KernelOrdering::AntiNormal,
            KernelOrdering::Symmetric => KernelOrdering::Symmetric,
            KernelOrdering::AntiNormal => KernelOrdering::Normal,
        }
    }

    pub const ALL: [KernelOrdering; 3] = [
        KernelOrdering::AntiNormal,
        KernelOrdering::Symmetric,
        KernelOrdering::Normal,
    ];
}

impl std::fmt::Display for KernelOrdering {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            KernelOrdering::Normal => write!(f, "s=+1"),
            KernelOrdering::Symmetric => write!(f, "s=0"),
            KernelOrdering::AntiNormal => write!(f, "s=-1"),
        }
    }
}

#[derive(Debug, Error)]
pub enum KernelError {
    #[error("Hilbert dimension must be at least 2, got {0}")]
    InvalidDimension(usize),
    #[error("traciality system is singular for N={dim}, {ordering}: fiducial has vanishing Weyl overlap")]
    DegenerateKernel { dim: usize, ordering: KernelOrdering },
    #[error("rotation matrix is not unitary (deviation {0:.3e})")]
    InvalidRotation(f64),
    #[error("dimension mismatch: operator is {op}x{op}, kernel is {kernel}x{kernel}")]
    DimensionMismatch { op: usize, kernel: usize },
    #[error("positive-P kernel pole: |1 + psi*phi| = {0:.3e}")]
    Pole(f64),
}
