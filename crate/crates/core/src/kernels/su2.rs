//! SU(2) quantization kernels and the spin-1/2 tetrahedron point family.
//!
//! Phase-space points are stereographic coordinates z = tan(theta/2) e^(i phi)
//! with z = 0 at the vacuum |0> (the sigma_z = +1 pole). The s-ordered kernel
//! at a point is
//!
//!   Delta^(s)(z) = c_s P(z) + (1 - c_s)/2 I,   c_s = 3^((s+1)/2),
//!
//! with P(z) the coherent projector; s = -1 gives P(z) itself, s = 0 the
//! Wigner kernel and s = +1 the trace-dual of the projector.

use ndarray::{array, Array2};

use super::{distribution_over, DiscreteWeights, KernelError, KernelOrdering};
use crate::{linalg, C64};

/// Coherent-state projector at stereographic point `z`.
///
/// Matrix convention matches the Wigner kernel: the (0,1) entry carries `z`,
/// so the Bloch vector is (2 Re z, -2 Im z, 1 - |z|^2) / (1 + |z|^2).
pub fn coherent_projector(z: C64) -> Array2<C64> {
    let r = z.norm_sqr();
    let d = 1.0 + r;
    array![
        [C64::new(1.0 / d, 0.0), z / d],
        [z.conj() / d, C64::new(r / d, 0.0)]
    ]
}

/// The s-ordered SU(2) kernel at point `z`; Hermitian with unit trace.
pub fn su2_kernel(z: C64, ordering: KernelOrdering) -> Array2<C64> {
    let scale = match ordering {
        KernelOrdering::AntiNormal => 1.0,
        KernelOrdering::Symmetric => 3.0f64.sqrt(),
        KernelOrdering::Normal => 3.0,
    };
    let p = coherent_projector(z);
    let offset = (1.0 - scale) / 2.0;
    let mut k = p.mapv(|v| v * scale);
    k[[0, 0]] += offset;
    k[[1, 1]] += offset;
    k
}

/// Bloch vector of the coherent state at `z`.
pub fn point_to_bloch(z: C64) -> [f64; 3] {
    let r = z.norm_sqr();
    let d = 1.0 + r;
    [2.0 * z.re / d, -2.0 * z.im / d, (1.0 - r) / d]
}

/// Inverse stereographic map; the south pole (0,0,-1) has no finite image.
pub fn bloch_to_point(v: [f64; 3]) -> Option<C64> {
    let d = 1.0 + v[2];
    if d.abs() < 1e-12 {
        return None;
    }
    Some(C64::new(v[0] / d, -v[1] / d))
}

/// Four spin-1/2 phase-point operators sitting at the vertices of a regular
/// tetrahedron on the Bloch sphere, one vertex at the vacuum pole.
///
/// `phi_rot` rotates the three lower vertices about the z axis; `y_rot`
/// tilts the whole tetrahedron about the y axis (used by the projection
/// rotation search). The stored operators are the Wigner (s = 0) kernels
/// evaluated at the four points.
#[derive(Debug, Clone)]
pub struct Spin12PointFamily {
    phi_rot: f64,
    y_rot: f64,
    zpoints: [C64; 4],
    ops: [Array2<C64>; 4],
}

impl Spin12PointFamily {
    /// Family with vertices at z = 0 and sqrt(2) e^(i phi_rot) omega^k,
    /// omega = e^(2 pi i / 3), k = 0, 1, 2.
    pub fn new(phi_rot: f64) -> Self {
        Self::with_rotation(phi_rot, 0.0)
    }

    /// Family additionally tilted about the y axis by `y_rot`.
    pub fn with_rotation(phi_rot: f64, y_rot: f64) -> Self {
        let zpoints = if y_rot == 0.0 {
            let sqrt2 = 2.0f64.sqrt();
            let base = C64::from_polar(sqrt2, phi_rot);
            let omega = C64::from_polar(1.0, 2.0 * std::f64::consts::PI / 3.0);
            [C64::new(0.0, 0.0), base, omega * base, omega * omega * base]
        } else {
            let (s, c) = (y_rot.sin(), y_rot.cos());
            let mut pts = [C64::new(0.0, 0.0); 4];
            for (k, pt) in pts.iter_mut().enumerate() {
                let v = Self::base_vertex(k, phi_rot);
                let rotated = [v[0] * c + v[2] * s, v[1], -v[0] * s + v[2] * c];
                // the search grid never puts a vertex exactly at the south
                // pole, but guard with a large finite point if it does
                *pt = bloch_to_point(rotated).unwrap_or(C64::new(1e8, 0.0));
            }
            pts
        };
        let ops = [
            su2_kernel(zpoints[0], KernelOrdering::Symmetric),
            su2_kernel(zpoints[1], KernelOrdering::Symmetric),
            su2_kernel(zpoints[2], KernelOrdering::Symmetric),
            su2_kernel(zpoints[3], KernelOrdering::Symmetric),
        ];
        Spin12PointFamily {
            phi_rot,
            y_rot,
            zpoints,
            ops,
        }
    }

    fn base_vertex(k: usize, phi_rot: f64) -> [f64; 3] {
        if k == 0 {
            return [0.0, 0.0, 1.0];
        }
        // |z| = sqrt(2) => cos(theta) = -1/3
        let zb = -1.0 / 3.0;
        let sin_theta = (8.0f64).sqrt() / 3.0;
        let azimuth = phi_rot + 2.0 * std::f64::consts::PI * (k as f64 - 1.0) / 3.0;
        // azimuth measured in the mirrored convention of point_to_bloch
        [sin_theta * azimuth.cos(), -sin_theta * azimuth.sin(), zb]
    }

    /// Family with vertex 0 along an arbitrary Bloch direction and the
    /// lower ring offset by `azimuth`; used by the steered projection
    /// dictionaries.
    pub fn oriented(direction: [f64; 3], azimuth: f64) -> Self {
        let norm = (direction[0] * direction[0]
            + direction[1] * direction[1]
            + direction[2] * direction[2])
            .sqrt();
        let w = [direction[0] / norm, direction[1] / norm, direction[2] / norm];
        // rotation taking z-hat onto w: Rodrigues about axis = z-hat x w
        let polar = w[2].clamp(-1.0, 1.0).acos();
        let (ax, ay) = {
            let len = (w[0] * w[0] + w[1] * w[1]).sqrt();
            if len < 1e-14 {
                (0.0, 1.0) // w parallel to z-hat: any axis in the plane
            } else {
                (-w[1] / len, w[0] / len)
            }
        };
        let (s, c) = (polar.sin(), polar.cos());
        let rotate = |v: [f64; 3]| -> [f64; 3] {
            // Rodrigues formula with unit axis (ax, ay, 0)
            let dot = ax * v[0] + ay * v[1];
            let cross = [ay * v[2], -ax * v[2], ax * v[1] - ay * v[0]];
            [
                v[0] * c + cross[0] * s + ax * dot * (1.0 - c),
                v[1] * c + cross[1] * s + ay * dot * (1.0 - c),
                v[2] * c + cross[2] * s,
            ]
        };
        let mut zpoints = [C64::new(0.0, 0.0); 4];
        for (k, pt) in zpoints.iter_mut().enumerate() {
            let v = rotate(Self::base_vertex(k, azimuth));
            *pt = bloch_to_point(v).unwrap_or(C64::new(1e8, 0.0));
        }
        let ops = [
            su2_kernel(zpoints[0], KernelOrdering::Symmetric),
            su2_kernel(zpoints[1], KernelOrdering::Symmetric),
            su2_kernel(zpoints[2], KernelOrdering::Symmetric),
            su2_kernel(zpoints[3], KernelOrdering::Symmetric),
        ];
        Spin12PointFamily { phi_rot: azimuth, y_rot: polar, zpoints, ops }
    }

    pub fn phi_rot(&self) -> f64 {
        self.phi_rot
    }

    pub fn y_rot(&self) -> f64 {
        self.y_rot
    }

    /// The four stereographic points indexed by (i, j) -> 2*i + j.
    pub fn zpoints(&self) -> &[C64; 4] {
        &self.zpoints
    }

    pub fn point(&self, i: usize, j: usize) -> C64 {
        self.zpoints[2 * i + j]
    }

    /// The Wigner-kernel matrices A_{i,j} indexed by (i, j) -> 2*i + j.
    pub fn ops(&self) -> &[Array2<C64>; 4] {
        &self.ops
    }

    pub fn op(&self, i: usize, j: usize) -> &Array2<C64> {
        &self.ops[2 * i + j]
    }

    /// Kernels of any ordering evaluated at the four family points.
    pub fn kernels(&self, ordering: KernelOrdering) -> [Array2<C64>; 4] {
        [
            su2_kernel(self.zpoints[0], ordering),
            su2_kernel(self.zpoints[1], ordering),
            su2_kernel(self.zpoints[2], ordering),
            su2_kernel(self.zpoints[3], ordering),
        ]
    }

    /// Quasiprobability weights of a single-site density matrix over the
    /// family kernels of the given ordering.
    pub fn distribution(
        &self,
        rho: &Array2<C64>,
        ordering: KernelOrdering,
    ) -> Result<DiscreteWeights, KernelError> {
        distribution_over(rho, &self.kernels(ordering))
    }

    /// Largest deviation of A_{i,j} from the Wigner kernel at z_{i,j}.
    pub fn kernel_identity_error(&self) -> f64 {
        self.zpoints
            .iter()
            .zip(self.ops.iter())
            .map(|(&z, a)| linalg::max_abs_diff(a, &su2_kernel(z, KernelOrdering::Symmetric)))
            .fold(0.0, f64::max)
    }

    /// Largest deviation of the pairwise Bloch angles from arccos(-1/3).
    pub fn tetrahedron_angle_error(&self) -> f64 {
        let vs: Vec<[f64; 3]> = self.zpoints.iter().map(|&z| point_to_bloch(z)).collect();
        let mut worst = 0.0f64;
        for i in 0..4 {
            for j in i + 1..4 {
                let dot = vs[i][0] * vs[j][0] + vs[i][1] * vs[j][1] + vs[i][2] * vs[j][2];
                worst = worst.max((dot + 1.0 / 3.0).abs());
            }
        }
        worst
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn wigner_kernel_at_origin() {
        let k = su2_kernel(c(0.0, 0.0), KernelOrdering::Symmetric);
        let s3 = 3.0f64.sqrt();
        assert_abs_diff_eq!(k[[0, 0]].re, (1.0 + s3) / 2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(k[[1, 1]].re, (1.0 - s3) / 2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(k[[0, 1]].norm(), 0.0, epsilon = 1e-15);
        // tr(sigma_z . kernel) = sqrt(3)
        assert_abs_diff_eq!(k[[0, 0]].re - k[[1, 1]].re, s3, epsilon = 1e-15);
    }

    #[test]
    fn q_kernel_at_origin_is_vacuum_projector() {
        let k = su2_kernel(c(0.0, 0.0), KernelOrdering::AntiNormal);
        assert_abs_diff_eq!(k[[0, 0]].re, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(k[[1, 1]].re, 0.0, epsilon = 1e-15);
    }

    #[test]
    fn kernels_hermitian_unit_trace() {
        let zs = [c(0.0, 0.0), c(0.3, -0.8), c(2.0, 1.0), c(-5.0, 0.1)];
        for &z in &zs {
            for ordering in KernelOrdering::ALL {
                let k = su2_kernel(z, ordering);
                assert!(linalg::hermiticity_error(&k) < 1e-14);
                assert_abs_diff_eq!(linalg::trace(&k).re, 1.0, epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn continuous_traciality_between_dual_pairs_at_coincident_points() {
        // tr(Delta^(s)(z) Delta^(-s)(z)) = 2 at every point
        let zs = [c(0.2, 0.4), c(1.5, -0.3)];
        for &z in &zs {
            for ordering in KernelOrdering::ALL {
                let a = su2_kernel(z, ordering);
                let b = su2_kernel(z, ordering.dual());
                assert_abs_diff_eq!(linalg::trace(&a.dot(&b)).re, 2.0, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn family_matches_printed_operators_at_phi_zero() {
        let fam = Spin12PointFamily::new(0.0);
        let s3 = 3.0f64.sqrt();
        let a00 = fam.op(0, 0);
        assert_abs_diff_eq!(a00[[0, 0]].re, (1.0 + s3) / 2.0, epsilon = 1e-14);
        assert_abs_diff_eq!(a00[[1, 1]].re, (1.0 - s3) / 2.0, epsilon = 1e-14);

        // A01: diagonal (3 -+ sqrt(3))/6, off-diagonal sqrt(2/3)
        let a01 = fam.op(0, 1);
        assert_abs_diff_eq!(a01[[0, 0]].re, (3.0 - s3) / 6.0, epsilon = 1e-14);
        assert_abs_diff_eq!(a01[[1, 1]].re, (3.0 + s3) / 6.0, epsilon = 1e-14);
        assert_abs_diff_eq!(a01[[0, 1]].re, (2.0f64 / 3.0).sqrt(), epsilon = 1e-14);
        assert_abs_diff_eq!(a01[[0, 1]].im, 0.0, epsilon = 1e-14);

        // A10 off-diagonal phase is the principal (-1)^(2/3)
        let a10 = fam.op(1, 0);
        let expected = C64::from_polar(1.0, 2.0 * std::f64::consts::PI / 3.0)
            * (2.0f64 / 3.0).sqrt();
        assert_abs_diff_eq!((a10[[0, 1]] - expected).norm(), 0.0, epsilon = 1e-14);

        // A11 off-diagonal phase is -(-1)^(1/3)
        let a11 = fam.op(1, 1);
        let expected = -C64::from_polar(1.0, std::f64::consts::PI / 3.0)
            * (2.0f64 / 3.0).sqrt();
        assert_abs_diff_eq!((a11[[0, 1]] - expected).norm(), 0.0, epsilon = 1e-14);
    }

    #[test]
    fn family_points_at_phi_zero() {
        let fam = Spin12PointFamily::new(0.0);
        assert_abs_diff_eq!(fam.point(0, 0).norm(), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!((fam.point(0, 1) - c(2.0f64.sqrt(), 0.0)).norm(), 0.0, epsilon = 1e-14);
        let zeta = C64::from_polar(1.0, 2.0 * std::f64::consts::PI / 3.0);
        assert_abs_diff_eq!((fam.point(1, 0) - zeta * 2.0f64.sqrt()).norm(), 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(
            (fam.point(1, 1) - zeta * zeta * 2.0f64.sqrt()).norm(),
            0.0,
            epsilon = 1e-14
        );
    }

    #[test]
    fn kernel_identity_and_geometry_across_rotations() {
        for &phi in &[0.0, std::f64::consts::PI / 7.0, 1.3] {
            for &y in &[0.0, 0.4, 1.1] {
                let fam = Spin12PointFamily::with_rotation(phi, y);
                assert!(fam.kernel_identity_error() < 1e-12);
                assert!(fam.tetrahedron_angle_error() < 1e-12);
            }
        }
    }

    #[test]
    fn bloch_round_trip() {
        let zs = [c(0.7, -0.2), c(3.0, 4.0), c(0.0, 0.0)];
        for &z in &zs {
            let v = point_to_bloch(z);
            let norm: f64 = v.iter().map(|x| x * x).sum();
            assert_abs_diff_eq!(norm, 1.0, epsilon = 1e-13);
            let back = bloch_to_point(v).unwrap();
            assert_abs_diff_eq!((back - z).norm(), 0.0, epsilon = 1e-12);
        }
    }
}
