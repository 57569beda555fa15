//! Discrete phase-point operators and the Weyl symbol calculus.
//!
//! A phase-point set is generated from a fiducial state |v> by covariance,
//! Delta_{a,b} = T_{a,b} Delta_{0,0} T_{a,b}^dag. In the Weyl operator basis
//! the s-ordered family takes the diagonal form
//!
//!   Delta^(s)_{0,0} = (1/N) sum_{mu,nu} u_{mu,nu} q_{mu,nu}^(-s) T_{mu,nu},
//!
//! where q e^(i theta) = <v| T_{mu,nu}^dag |v> and u = e^(i theta). The s = -1
//! member is exactly |v><v| (the Q boundary condition) and the trace-duality
//! between s and -s reduces to a per-coefficient division, which is also how
//! the dual is solved here. The solve is singular precisely when some Weyl
//! overlap q vanishes, so the fiducial must have full Weyl support. A basis
//! vector never does (it is fixed by every power of Z), so the default
//! fiducial is drawn from a deterministic seeded search instead.

use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_pcg::Pcg64Mcg;

use super::{KernelError, KernelOrdering, UnitarySet};
use crate::{linalg, C64};

/// Seed for the deterministic fiducial search; fixed so that builds are
/// reproducible across runs and platforms.
const FIDUCIAL_SEED: u64 = 0x9e1c_e5a7_7f0d_4b21;

/// Minimum Weyl overlap magnitude accepted for a fiducial state.
const MIN_WEYL_SUPPORT: f64 = 1e-3;

/// The N^2 phase-point operators Delta^(s)_{alpha,beta} for one ordering,
/// together with the trace-dual set Delta^(-s).
///
/// Flat indexing is `alpha * N + beta`, matching [`UnitarySet`].
#[derive(Debug, Clone)]
pub struct PhasePointSet {
    dim: usize,
    ordering: KernelOrdering,
    ops: Vec<Array2<C64>>,
    dual: Vec<Array2<C64>>,
    fiducial: Array1<C64>,
}

impl PhasePointSet {
    /// Build the phase-point set of ordering `s` for Hilbert dimension `dim`
    /// with the default fiducial.
    pub fn build(dim: usize, ordering: KernelOrdering) -> Result<Self, KernelError> {
        let fiducial = default_fiducial(dim)?;
        Self::build_with_fiducial(dim, ordering, fiducial)
    }

    /// Build from an explicit fiducial (vacuum) state. The state is
    /// normalized; it must have nonvanishing overlap with every Weyl
    /// operator or the dual solve is singular.
    pub fn build_with_fiducial(
        dim: usize,
        ordering: KernelOrdering,
        fiducial: Array1<C64>,
    ) -> Result<Self, KernelError> {
        let weyl = UnitarySet::build(dim)?;
        let norm = fiducial.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        let fiducial = fiducial.mapv(|z| z / norm);

        let base = kernel_from_fiducial(&weyl, &fiducial, ordering)?;
        let base_dual = kernel_from_fiducial(&weyl, &fiducial, ordering.dual())?;

        let generate = |b: &Array2<C64>| -> Vec<Array2<C64>> {
            weyl.iter()
                .map(|(_, t)| t.dot(b).dot(&linalg::dagger(t)))
                .collect()
        };
        Ok(PhasePointSet {
            dim,
            ordering,
            ops: generate(&base),
            dual: generate(&base_dual),
            fiducial,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn ordering(&self) -> KernelOrdering {
        self.ordering
    }

    pub fn op(&self, alpha: usize, beta: usize) -> &Array2<C64> {
        &self.ops[alpha * self.dim + beta]
    }

    pub fn dual_op(&self, alpha: usize, beta: usize) -> &Array2<C64> {
        &self.dual[alpha * self.dim + beta]
    }

    pub fn ops(&self) -> &[Array2<C64>] {
        &self.ops
    }

    pub fn dual_ops(&self) -> &[Array2<C64>] {
        &self.dual
    }

    pub fn fiducial(&self) -> &Array1<C64> {
        &self.fiducial
    }

    /// Largest Hermiticity deviation over the set (property 1a).
    pub fn hermiticity_error(&self) -> f64 {
        self.ops
            .iter()
            .chain(self.dual.iter())
            .map(linalg::hermiticity_error)
            .fold(0.0, f64::max)
    }

    /// Largest |tr Delta - 1| over the set (property 2a).
    pub fn trace_error(&self) -> f64 {
        self.ops
            .iter()
            .chain(self.dual.iter())
            .map(|m| (linalg::trace(m) - C64::new(1.0, 0.0)).norm())
            .fold(0.0, f64::max)
    }

    /// Largest deviation from covariance under the standard Weyl set
    /// (property 3a).
    pub fn covariance_error(&self) -> f64 {
        let weyl = UnitarySet::build(self.dim).expect("dim validated at build");
        let base = self.op(0, 0);
        weyl.iter()
            .map(|((a, b), t)| {
                let rotated = t.dot(base).dot(&linalg::dagger(t));
                linalg::max_abs_diff(&rotated, self.op(a, b))
            })
            .fold(0.0, f64::max)
    }

    /// Largest deviation from tr(Delta^(s)_{ab} Delta^(-s)_{a'b'}) =
    /// N delta delta (property 4a).
    pub fn traciality_error(&self) -> f64 {
        let n = self.dim as f64;
        let mut worst = 0.0f64;
        for (i, op) in self.ops.iter().enumerate() {
            for (j, dual) in self.dual.iter().enumerate() {
                let t = linalg::trace(&op.dot(dual));
                let expected = if i == j { n } else { 0.0 };
                worst = worst.max((t - C64::new(expected, 0.0)).norm());
            }
        }
        worst
    }

    /// Quasiprobability weights of a density matrix over this set.
    pub fn distribution(&self, rho: &Array2<C64>) -> Result<DiscreteWeights, KernelError> {
        distribution_over(rho, &self.ops)
    }
}

/// Raw and normalized quasiprobability weights w_{alpha,beta} = tr(rho Delta).
///
/// Negativity is a flagged outcome, not an error: only nonnegative s = +1
/// weights can serve as sampling probabilities.
#[derive(Debug, Clone)]
pub struct DiscreteWeights {
    pub raw: Vec<f64>,
    /// `raw / sum(raw)` with entries in [-1e-12, 0) clamped to zero;
    /// `None` when any weight is more negative than that.
    pub normalized: Option<Vec<f64>>,
    pub negative: bool,
}

pub(crate) fn distribution_over(
    rho: &Array2<C64>,
    kernels: &[Array2<C64>],
) -> Result<DiscreteWeights, KernelError> {
    let dim = kernels[0].nrows();
    if rho.nrows() != dim || rho.ncols() != dim {
        return Err(KernelError::DimensionMismatch {
            op: rho.nrows(),
            kernel: dim,
        });
    }
    let raw: Vec<f64> = kernels
        .iter()
        .map(|k| linalg::trace(&rho.dot(k)).re)
        .collect();
    let negative = raw.iter().any(|&w| w < -1e-12);
    let normalized = if negative {
        None
    } else {
        let clamped: Vec<f64> = raw.iter().map(|&w| w.max(0.0)).collect();
        let total: f64 = clamped.iter().sum();
        Some(clamped.iter().map(|w| w / total).collect())
    };
    Ok(DiscreteWeights {
        raw,
        normalized,
        negative,
    })
}

/// The Weyl symbol tr(A . kernel); real whenever both arguments are
/// Hermitian.
pub fn weyl_symbol(a: &Array2<C64>, kernel: &Array2<C64>) -> Result<C64, KernelError> {
    if a.nrows() != kernel.nrows() || a.ncols() != kernel.ncols() || a.nrows() != a.ncols() {
        return Err(KernelError::DimensionMismatch {
            op: a.nrows(),
            kernel: kernel.nrows(),
        });
    }
    Ok(linalg::trace(&a.dot(kernel)))
}

/// Reconstruct an operator from its symbol over the dual set:
/// A = (1/N) sum_{ab} tr(Delta^(-s)_{ab} A) Delta^(s)_{ab}.
///
/// The 1/N prefactor is the self-consistent normalization fixed by the
/// round-trip identity under the traciality condition.
pub fn reconstruct(a: &Array2<C64>, set: &PhasePointSet) -> Result<Array2<C64>, KernelError> {
    if a.nrows() != set.dim() {
        return Err(KernelError::DimensionMismatch {
            op: a.nrows(),
            kernel: set.dim(),
        });
    }
    let mut out: Array2<C64> = Array2::zeros((set.dim(), set.dim()));
    for (op, dual) in set.ops().iter().zip(set.dual_ops()) {
        let coeff = linalg::trace(&dual.dot(a));
        out = out + op.mapv(|v| coeff * v);
    }
    Ok(out / C64::new(set.dim() as f64, 0.0))
}

/// Rotate a phase-point operator by a group element:
/// Delta^(s)_{alpha,beta}(Omega) = Lambda(Omega) Delta Lambda^dag(Omega).
pub fn extended_kernel(
    set: &PhasePointSet,
    index: (usize, usize),
    rotation: &Array2<C64>,
) -> Result<Array2<C64>, KernelError> {
    if rotation.nrows() != set.dim() || rotation.ncols() != set.dim() {
        return Err(KernelError::DimensionMismatch {
            op: rotation.nrows(),
            kernel: set.dim(),
        });
    }
    let err = linalg::unitarity_error(rotation);
    if err > 1e-10 {
        return Err(KernelError::InvalidRotation(err));
    }
    let (alpha, beta) = index;
    Ok(rotation.dot(set.op(alpha, beta)).dot(&linalg::dagger(rotation)))
}

fn kernel_from_fiducial(
    weyl: &UnitarySet,
    fiducial: &Array1<C64>,
    ordering: KernelOrdering,
) -> Result<Array2<C64>, KernelError> {
    let dim = weyl.dim();
    let s = ordering.s() as i32;
    let mut base: Array2<C64> = Array2::zeros((dim, dim));
    for (_, t) in weyl.iter() {
        // w = <v| T^dag |v>
        let tv = t.dot(fiducial);
        let w: C64 = tv
            .iter()
            .zip(fiducial.iter())
            .map(|(tvk, vk)| tvk.conj() * vk)
            .sum();
        let q = w.norm();
        if q < MIN_WEYL_SUPPORT {
            return Err(KernelError::DegenerateKernel { dim, ordering });
        }
        let coeff = (w / q) * q.powi(-s) / dim as f64;
        base = base + t.mapv(|v| coeff * v);
    }
    Ok(base)
}

/// Deterministic fiducial with full Weyl support: seeded complex Gaussian
/// vectors are drawn until every Weyl overlap clears the support threshold.
fn default_fiducial(dim: usize) -> Result<Array1<C64>, KernelError> {
    let weyl = UnitarySet::build(dim)?;
    let mut rng = Pcg64Mcg::seed_from_u64(FIDUCIAL_SEED ^ ((dim as u64) << 32));
    for _attempt in 0..256 {
        let v: Array1<C64> = (0..dim)
            .map(|_| C64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5))
            .collect();
        let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm < 1e-3 {
            continue;
        }
        let v = v.mapv(|z| z / norm);
        let min_support = weyl
            .iter()
            .map(|(_, t)| {
                let tv = t.dot(&v);
                tv.iter()
                    .zip(v.iter())
                    .map(|(tvk, vk)| tvk.conj() * vk)
                    .sum::<C64>()
                    .norm()
            })
            .fold(f64::INFINITY, f64::min);
        if min_support >= MIN_WEYL_SUPPORT {
            return Ok(v);
        }
    }
    Err(KernelError::DegenerateKernel {
        dim,
        ordering: KernelOrdering::Normal,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn random_hermitian(dim: usize, seed: u64) -> Array2<C64> {
        let mut rng = Pcg64Mcg::seed_from_u64(seed);
        let mut m: Array2<C64> = Array2::zeros((dim, dim));
        for i in 0..dim {
            for j in 0..dim {
                m[[i, j]] = c(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5);
            }
        }
        let md = linalg::dagger(&m);
        (m + md).mapv(|v| v / 2.0)
    }

    #[test]
    fn q_base_is_fiducial_projector() {
        let set = PhasePointSet::build(3, KernelOrdering::AntiNormal).unwrap();
        let v = set.fiducial().clone();
        let mut proj: Array2<C64> = Array2::zeros((3, 3));
        for i in 0..3 {
            for j in 0..3 {
                proj[[i, j]] = v[i] * v[j].conj();
            }
        }
        assert!(linalg::max_abs_diff(set.op(0, 0), &proj) < 1e-12);
    }

    #[test]
    fn all_axioms_hold_for_small_dims() {
        for dim in 2..=5 {
            for ordering in KernelOrdering::ALL {
                let set = PhasePointSet::build(dim, ordering).unwrap();
                assert!(set.hermiticity_error() < 1e-10, "1a at N={dim} {ordering}");
                assert!(set.trace_error() < 1e-10, "2a at N={dim} {ordering}");
                assert!(set.covariance_error() < 1e-10, "3a at N={dim} {ordering}");
                assert!(set.traciality_error() < 1e-10, "4a at N={dim} {ordering}");
            }
        }
    }

    #[test]
    fn basis_vector_fiducial_is_degenerate() {
        // Z fixes |0>, so the Weyl orbit of a basis vector collapses and the
        // dual solve must report a singular traciality system.
        let e0 = array![c(1.0, 0.0), c(0.0, 0.0)];
        let got = PhasePointSet::build_with_fiducial(2, KernelOrdering::AntiNormal, e0);
        assert!(matches!(got, Err(KernelError::DegenerateKernel { dim: 2, .. })));
    }

    #[test]
    fn n2_magic_fiducial_gives_sic_structure() {
        // Bloch vector (1,1,1)/sqrt(3): the Weyl orbit is a regular
        // tetrahedron and the Q kernels form a SIC with pairwise overlap 1/3.
        let theta = (1.0f64 / 3.0f64.sqrt()).acos();
        let v = array![
            c((theta / 2.0).cos(), 0.0),
            C64::from_polar((theta / 2.0).sin(), std::f64::consts::FRAC_PI_4)
        ];
        let set = PhasePointSet::build_with_fiducial(2, KernelOrdering::AntiNormal, v).unwrap();
        assert!(set.traciality_error() < 1e-10);
        for i in 0..4 {
            for j in 0..4 {
                let a = &set.ops()[i];
                let b = &set.ops()[j];
                let overlap = linalg::trace(&a.dot(b)).re;
                let expected = if i == j { 1.0 } else { 1.0 / 3.0 };
                assert_abs_diff_eq!(overlap, expected, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn symmetric_set_is_self_dual() {
        let set = PhasePointSet::build(4, KernelOrdering::Symmetric).unwrap();
        for (op, dual) in set.ops().iter().zip(set.dual_ops()) {
            assert!(linalg::max_abs_diff(op, dual) < 1e-12);
        }
    }

    #[test]
    fn n2_s0_coincident_traciality_is_two() {
        let set = PhasePointSet::build(2, KernelOrdering::Symmetric).unwrap();
        let t = linalg::trace(&set.op(0, 0).dot(set.op(0, 0)));
        assert_abs_diff_eq!(t.re, 2.0, epsilon = 1e-10);
        assert_abs_diff_eq!(t.im, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn symbol_of_identity_is_one() {
        let set = PhasePointSet::build(3, KernelOrdering::Normal).unwrap();
        for op in set.ops() {
            let w = weyl_symbol(&linalg::identity(3), op).unwrap();
            assert_abs_diff_eq!(w.re, 1.0, epsilon = 1e-12);
            assert_abs_diff_eq!(w.im, 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn symbol_of_maximally_mixed_is_half() {
        let set = PhasePointSet::build(2, KernelOrdering::Symmetric).unwrap();
        let rho = linalg::identity(2).mapv(|v| v / 2.0);
        for op in set.ops() {
            let w = weyl_symbol(&rho, op).unwrap();
            assert_abs_diff_eq!(w.re, 0.5, epsilon = 1e-12);
        }
    }

    #[test]
    fn symbol_imaginary_part_vanishes_for_hermitian_pairs() {
        let set = PhasePointSet::build(3, KernelOrdering::Normal).unwrap();
        let a = random_hermitian(3, 7);
        for op in set.ops() {
            let w = weyl_symbol(&a, op).unwrap();
            assert!(w.im.abs() < 1e-14);
        }
    }

    #[test]
    fn symbol_rejects_dimension_mismatch() {
        let set = PhasePointSet::build(2, KernelOrdering::Normal).unwrap();
        let a = linalg::identity(3);
        assert!(matches!(
            weyl_symbol(&a, set.op(0, 0)),
            Err(KernelError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn reconstruction_round_trip() {
        for dim in [2usize, 3, 4] {
            for ordering in KernelOrdering::ALL {
                let set = PhasePointSet::build(dim, ordering).unwrap();
                let a = random_hermitian(dim, 11 + dim as u64);
                let back = reconstruct(&a, &set).unwrap();
                assert!(
                    linalg::max_abs_diff(&a, &back) < 1e-10,
                    "round trip failed at N={dim} {ordering}"
                );
            }
        }
    }

    #[test]
    fn density_reconstruction_from_own_weights() {
        let set = PhasePointSet::build(2, KernelOrdering::Normal).unwrap();
        let rho = {
            let a = random_hermitian(2, 23);
            let t = linalg::trace(&a).re;
            a.mapv(|v| v / t)
        };
        let back = reconstruct(&rho, &set).unwrap();
        assert!(linalg::max_abs_diff(&rho, &back) < 1e-12);
    }

    #[test]
    fn maximally_mixed_distribution_is_uniform() {
        let set = PhasePointSet::build(2, KernelOrdering::Normal).unwrap();
        let rho = linalg::identity(2).mapv(|v| v / 2.0);
        let w = set.distribution(&rho).unwrap();
        for &raw in &w.raw {
            assert_abs_diff_eq!(raw, 0.5, epsilon = 1e-12);
        }
        let norm = w.normalized.unwrap();
        for &p in &norm {
            assert_abs_diff_eq!(p, 0.25, epsilon = 1e-12);
        }
        assert!(!w.negative);
    }

    #[test]
    fn extended_kernel_identity_and_trace() {
        let set = PhasePointSet::build(2, KernelOrdering::Symmetric).unwrap();
        let id = linalg::identity(2);
        let same = extended_kernel(&set, (1, 1), &id).unwrap();
        assert!(linalg::max_abs_diff(&same, set.op(1, 1)) < 1e-15);

        // a random unitary built from a Hermitian generator via Jacobi-free
        // cayley transform: U = (I - iH/2)(I + iH/2)^-1 is unitary
        let h = random_hermitian(2, 31);
        let i = C64::new(0.0, 1.0);
        let a = &linalg::identity(2) - &h.mapv(|v| i * v / 2.0);
        let b = &linalg::identity(2) + &h.mapv(|v| i * v / 2.0);
        // invert 2x2
        let det = b[[0, 0]] * b[[1, 1]] - b[[0, 1]] * b[[1, 0]];
        let binv = array![[b[[1, 1]] / det, -b[[0, 1]] / det], [-b[[1, 0]] / det, b[[0, 0]] / det]];
        let u = a.dot(&binv);
        assert!(linalg::unitarity_error(&u) < 1e-12);

        let rotated = extended_kernel(&set, (0, 1), &u).unwrap();
        let t = linalg::trace(&rotated);
        assert_abs_diff_eq!(t.re, 1.0, epsilon = 1e-12);
        assert!(linalg::hermiticity_error(&rotated) < 1e-12);
    }

    #[test]
    fn extended_kernel_rejects_nonunitary() {
        let set = PhasePointSet::build(2, KernelOrdering::Symmetric).unwrap();
        let bad = array![[c(1.0, 0.0), c(0.5, 0.0)], [c(0.0, 0.0), c(1.0, 0.0)]];
        assert!(matches!(
            extended_kernel(&set, (0, 0), &bad),
            Err(KernelError::InvalidRotation(_))
        ));
    }

    #[test]
    fn rotated_realisation_stays_covariant() {
        // property 3a holds for T(Omega) = U T U^dag acting on U Delta U^dag
        let set = PhasePointSet::build(2, KernelOrdering::Normal).unwrap();
        let weyl = UnitarySet::build(2).unwrap();
        let phase = C64::from_polar(1.0, 0.7);
        let u = array![
            [c(0.6, 0.0), phase * 0.8],
            [-phase.conj() * 0.8, c(0.6, 0.0)]
        ];
        assert!(linalg::unitarity_error(&u) < 1e-12);
        let ud = linalg::dagger(&u);
        let base = extended_kernel(&set, (0, 0), &u).unwrap();
        for ((a, b), t) in weyl.iter() {
            let t_rot = u.dot(t).dot(&ud);
            let expected = t_rot.dot(&base).dot(&linalg::dagger(&t_rot));
            let got = extended_kernel(&set, (a, b), &u).unwrap();
            assert!(linalg::max_abs_diff(&expected, &got) < 1e-10);
        }
    }
}
