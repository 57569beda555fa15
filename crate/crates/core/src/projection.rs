//! Discrete phase-space projection of runaway positive-P kernels.
//!
//! A kernel Lambda(psi, phi) is expanded over 16 pair kernels built from
//! tetrahedron point families,
//!
//!   Lambda(psi, phi) = sum_{ij} p_{ij} Lambda(conj(k_i), b_j),
//!
//! with p a probability vector, k_i the ket-side points and b_j the
//! bra-side points. The ket-side points enter conjugated so that for a
//! shared family the diagonal pairs are exactly the family's coherent
//! projectors Delta^(-1)(z_i); the dictionary is then closed under
//! Hermitian conjugation and sampling a diagonal distribution reproduces a
//! density matrix without bias.
//!
//! The matrix match gives 8 real equations for 16 unknowns; the solver is
//! nonnegative least squares on the stacked real system with the
//! normalization row appended at a large weight, and any probability
//! vector satisfying the match is an unbiased choice.
//!
//! Mixtures over a single shared family are norm-bounded by the worst pair
//! overlap (Frobenius norm sqrt(3)), while kernels approaching the pole
//! manifold grow without bound, so a shared family cannot expand every
//! state the dynamics visits. The engine therefore steers the two sides
//! independently: each tetrahedron is oriented so that the corresponding
//! coherent-state Bloch direction sits at a face center. The state is then
//! strictly inside the pair hull, an exact expansion exists, and the
//! sampled replacement genuinely moves the trajectory onto discrete
//! points, preserving the kernel expectation to solver precision.

use ndarray::Array2;
use thiserror::Error;

use crate::engine::PhaseSpaceState;
use crate::kernels::{point_to_bloch, positive_p_matrix, KernelError, Spin12PointFamily};
use crate::nnls::{nnls, DenseMatrix};
use crate::{linalg, C64};

/// Weight of the normalization row in the stacked least-squares system.
const NORMALIZATION_WEIGHT: f64 = 1e3;

/// Acceptance threshold on the Frobenius residual of the matrix match.
pub const EXPANSION_RESIDUAL_TOL: f64 = 1e-8;

/// Weights below this magnitude are clamped to zero; anything more negative
/// is a failed expansion.
const NEGATIVITY_CLAMP: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum ProjectionError {
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error("no nonnegative expansion found (best residual {best_residual:.3e} over {families_tried} families)")]
    ExpansionFailure { best_residual: f64, families_tried: usize },
}

/// A nonnegative normalized expansion of one kernel over 16 discrete pairs.
#[derive(Debug, Clone)]
pub struct DiscreteExpansion {
    /// p_{ij} indexed by 4 * i + j (ket point i, bra point j).
    pub weights: [f64; 16],
    /// Frobenius norm of the unweighted matrix-match residual.
    pub residual: f64,
    /// Whether the residual clears [`EXPANSION_RESIDUAL_TOL`].
    pub exact: bool,
    /// Tetrahedron family supplying the ket-side points.
    pub ket_family: Spin12PointFamily,
    /// Tetrahedron family supplying the bra-side points (the same family
    /// for unsteered expansions).
    pub bra_family: Spin12PointFamily,
}

impl DiscreteExpansion {
    /// The pair of phase-space coordinates encoded by flat index `idx`.
    pub fn pair_point(&self, idx: usize) -> (C64, C64) {
        (
            self.ket_family.zpoints()[idx / 4].conj(),
            self.bra_family.zpoints()[idx % 4],
        )
    }

    pub fn weight_sum(&self) -> f64 {
        self.weights.iter().sum()
    }
}

/// Expand a kernel over the pair dictionary of a single shared family;
/// errors unless the expansion is exact.
pub fn expand_kernel(
    psi: C64,
    phi: C64,
    family: &Spin12PointFamily,
) -> Result<DiscreteExpansion, ProjectionError> {
    let expansion = PairDictionary::shared(family.clone()).solve(psi, phi)?;
    if !expansion.exact {
        return Err(ProjectionError::ExpansionFailure {
            best_residual: expansion.residual,
            families_tried: 1,
        });
    }
    Ok(expansion)
}

/// Draw a replacement pair by inverse CDF over the expansion weights.
///
/// Deterministic in (expansion, u): the first index in flat order whose
/// cumulative weight exceeds `u` is selected.
pub fn sample_projection(expansion: &DiscreteExpansion, u: f64) -> (C64, C64) {
    let mut cumulative = 0.0;
    for (idx, &w) in expansion.weights.iter().enumerate() {
        cumulative += w;
        if cumulative > u {
            return expansion.pair_point(idx);
        }
    }
    // guard against u ~ 1 with rounding in the cumulative sum
    let last = expansion
        .weights
        .iter()
        .rposition(|&w| w > 0.0)
        .unwrap_or(15);
    expansion.pair_point(last)
}

/// Per-site regularization triggers: |psi| or |phi| beyond `z_max`, or the
/// kernel within `eps` of its pole.
pub fn should_project(state: &PhaseSpaceState, z_max: f64, eps: f64) -> Vec<bool> {
    state
        .psi
        .iter()
        .zip(&state.phi)
        .map(|(&psi, &phi)| {
            psi.norm() > z_max
                || phi.norm() > z_max
                || (C64::new(1.0, 0.0) + psi * phi).norm() < eps
        })
        .collect()
}

/// Frobenius norm of the normalized kernel at one site,
/// sqrt((1 + |psi|^2)(1 + |phi|^2)) / |1 + psi phi|.
///
/// This is the reciprocal overlap of the two coherent states: 1 on the
/// diagonal manifold phi = conj(psi), sqrt(3) at the off-diagonal
/// tetrahedron pairs, and divergent toward the kernel pole. The engine
/// projects once the norm crosses a threshold, keeping the per-site
/// kernels (and with them the observable spikes) bounded.
pub fn kernel_norm(psi: C64, phi: C64) -> f64 {
    let denom = (C64::new(1.0, 0.0) + psi * phi).norm();
    if denom == 0.0 {
        return f64::INFINITY;
    }
    ((1.0 + psi.norm_sqr()) * (1.0 + phi.norm_sqr())).sqrt() / denom
}

/// Engine trigger: the spec thresholds plus the kernel-norm guard.
pub fn projection_triggers(
    state: &PhaseSpaceState,
    z_max: f64,
    eps: f64,
    nu_max: f64,
) -> Vec<bool> {
    state
        .psi
        .iter()
        .zip(&state.phi)
        .map(|(&psi, &phi)| {
            psi.norm() > z_max
                || phi.norm() > z_max
                || (C64::new(1.0, 0.0) + psi * phi).norm() < eps
                || kernel_norm(psi, phi) > nu_max
        })
        .collect()
}

/// Bloch direction of the ket state |0> + psi |1>.
fn ket_direction(psi: C64) -> [f64; 3] {
    let d = 1.0 + psi.norm_sqr();
    [2.0 * psi.re / d, 2.0 * psi.im / d, (1.0 - psi.norm_sqr()) / d]
}

/// Bloch direction of the bra state <0| + phi <1|.
fn bra_direction(phi: C64) -> [f64; 3] {
    // the bra is the dagger of |0> + conj(phi) |1>
    point_to_bloch(phi)
}

/// One 16-pair dictionary with the prefactored NNLS system.
struct PairDictionary {
    ket: Spin12PointFamily,
    bra: Spin12PointFamily,
    kernels: Vec<Array2<C64>>,
    /// 9 x 16 stacked real system: 8 matrix-match rows + weighted
    /// normalization row.
    system: DenseMatrix,
}

impl PairDictionary {
    fn shared(family: Spin12PointFamily) -> Self {
        Self::steered(family.clone(), family)
    }

    fn steered(ket: Spin12PointFamily, bra: Spin12PointFamily) -> Self {
        let mut kernels = Vec::with_capacity(16);
        for i in 0..4 {
            for j in 0..4 {
                let pair = positive_p_matrix(ket.zpoints()[i].conj(), bra.zpoints()[j])
                    // distinct tetrahedron vertices are never antipodal,
                    // so the pair overlap cannot vanish
                    .expect("tetrahedron pair kernels are pole-free");
                kernels.push(pair);
            }
        }
        let mut data = vec![0.0; 9 * 16];
        for (col, k) in kernels.iter().enumerate() {
            for (row_pair, &entry) in [k[[0, 0]], k[[0, 1]], k[[1, 0]], k[[1, 1]]]
                .iter()
                .enumerate()
            {
                data[(2 * row_pair) * 16 + col] = entry.re;
                data[(2 * row_pair + 1) * 16 + col] = entry.im;
            }
            data[8 * 16 + col] = NORMALIZATION_WEIGHT;
        }
        PairDictionary {
            ket,
            bra,
            kernels,
            system: DenseMatrix::new(9, 16, data),
        }
    }

    /// Best nonnegative normalized weights for this dictionary, regardless
    /// of how well the match closes.
    fn solve(&self, psi: C64, phi: C64) -> Result<DiscreteExpansion, ProjectionError> {
        let target = positive_p_matrix(psi, phi)?;
        let b = [
            target[[0, 0]].re,
            target[[0, 0]].im,
            target[[0, 1]].re,
            target[[0, 1]].im,
            target[[1, 0]].re,
            target[[1, 0]].im,
            target[[1, 1]].re,
            target[[1, 1]].im,
            NORMALIZATION_WEIGHT,
        ];
        let sol = nnls(&self.system, &b);

        let mut weights = [0.0f64; 16];
        for (w, &v) in weights.iter_mut().zip(&sol.x) {
            if v < -NEGATIVITY_CLAMP || !v.is_finite() {
                return Err(ProjectionError::ExpansionFailure {
                    best_residual: f64::INFINITY,
                    families_tried: 1,
                });
            }
            *w = v.max(0.0);
        }
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return Err(ProjectionError::ExpansionFailure {
                best_residual: f64::INFINITY,
                families_tried: 1,
            });
        }
        for w in &mut weights {
            *w /= total;
        }

        let residual = self.match_residual(&weights, &target);
        Ok(DiscreteExpansion {
            weights,
            residual,
            exact: residual <= EXPANSION_RESIDUAL_TOL,
            ket_family: self.ket.clone(),
            bra_family: self.bra.clone(),
        })
    }

    fn match_residual(&self, weights: &[f64; 16], target: &Array2<C64>) -> f64 {
        let mut acc: Array2<C64> = Array2::zeros((2, 2));
        for (k, &w) in self.kernels.iter().zip(weights) {
            if w != 0.0 {
                acc = acc + k.mapv(|v| v * w);
            }
        }
        linalg::frobenius_norm(&(&acc - target))
    }
}

/// Shared, read-only projection policy used by the engine.
///
/// Replacement points are drawn from a fixed dictionary: the pairs of a
/// deterministic union of tetrahedron orientations, filtered to kernel
/// norms at most `nu_inner` (slightly inside the engine trigger level so
/// that sampled replacements cannot immediately re-trigger). Because
/// mixtures are norm-bounded by their wildest pair while triggered kernels
/// sit just outside the shell, exact expansions of over-threshold states
/// do not exist; to keep the truncation to the one-step overshoot, the
/// dictionary is augmented per event with "ceiling" pairs at `nu_inner`
/// aligned with the triggered state's ket and bra directions. The
/// remaining per-event expectation defect is of the order of the overshoot
/// and is bounded empirically by the exact-oracle comparisons.
pub struct Regularizer {
    /// Engine trigger level; replacements stay strictly inside it.
    nu_max: f64,
    /// Pole margin the engine uses; replacement pairs stay outside it.
    eps: f64,
    fixed_pairs: Vec<(C64, C64)>,
    /// Prefactored 9 x (fixed + ALIGNED_SLOTS) system; aligned columns are
    /// rewritten per event.
    template: DenseMatrix,
    base: PairDictionary,
    grid: Vec<Spin12PointFamily>,
}

/// Number of tetrahedron orientations in the fixed dictionary.
const FIXED_TETRAHEDRA: usize = 6;
/// Stereographic radius cap for fixed dictionary points; strictly below
/// the default divergence threshold so samples cannot re-trigger it.
const FIXED_Z_CAP: f64 = 10.0;
/// Absolute floor on pair overlaps, as a fraction of the pole margin.
///
/// Near-pole kernel content can only be carried by pairs at least as deep
/// as the state, and the boundary dissipators pull trajectories deeper, so
/// replacements cascade downward carrying ever smaller probability. The
/// floor cuts that cascade once the surviving weight is ~ the floor/margin
/// ratio; content below it is truncated onto the deepest available pairs.
const PAIR_DEPTH_FRACTION: f64 = 1.0 / 64.0;
/// Angular radii of the state-aligned rings (radians).
const RING_RADII: [f64; 2] = [0.6, 1.2];
/// Points per ring.
const RING_POINTS: usize = 8;
/// Wider ring layout for the refinement pass.
const RETRY_RADII: [f64; 3] = [0.35, 0.9, 1.5];
const RETRY_POINTS: usize = 12;
/// Stereographic radius cap for aligned ring points.
const ALIGNED_Z_CAP: f64 = 12.0;
/// Anchor magnitudes (geometric ladder) and phase tweaks of the
/// analytically pole-matched pairs. The ladder must span small and large
/// radii: a floor-depth pair reaches kernel norm ~ (|k| + 1/|k|) / floor,
/// so matching wild targets needs anchors far along or far down the ray.
const POLE_MAGNITUDES: [f64; 8] = [0.12, 0.25, 0.55, 1.1, 2.3, 4.8, 8.0, 11.5];
const POLE_ROTATIONS: [f64; 3] = [0.0, 0.5, -0.5];
/// Depth ladder of the matched pairs relative to the state's own
/// |1 + psi phi|. A kernel's (0,0) entry is 1/(1 + psi phi) and a convex
/// mixture cannot exceed the magnitude of its deepest pair, so near-pole
/// content must ride on pairs at least as deep as the state. Rungs deeper
/// than the state concentrate that content into a small sampling weight
/// (depth ratio), so most replacements escape onto tame pairs and the
/// shell-dwelling chains stay short.
const POLE_CLIMB: [f64; 4] = [0.25, 0.5, 2.0, 8.0];
/// Maximum aligned pairs appended to the fixed system.
const ALIGNED_SLOTS: usize = 224;

fn unit3(v: [f64; 3]) -> [f64; 3] {
    let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    [v[0] / n, v[1] / n, v[2] / n]
}

fn rotate_about(axis: [f64; 3], v: [f64; 3], angle: f64) -> [f64; 3] {
    let a = unit3(axis);
    let (s, c) = (angle.sin(), angle.cos());
    let dot = a[0] * v[0] + a[1] * v[1] + a[2] * v[2];
    let cross = [
        a[1] * v[2] - a[2] * v[1],
        a[2] * v[0] - a[0] * v[2],
        a[0] * v[1] - a[1] * v[0],
    ];
    [
        v[0] * c + cross[0] * s + a[0] * dot * (1.0 - c),
        v[1] * c + cross[1] * s + a[1] * dot * (1.0 - c),
        v[2] * c + cross[2] * s + a[2] * dot * (1.0 - c),
    ]
}

/// Stereographic point of a ket-side Bloch direction (conjugated slot).
fn direction_to_ket_point(u: [f64; 3]) -> Option<C64> {
    let d = 1.0 + u[2];
    if d.abs() < 1e-9 {
        return None;
    }
    // ket_direction(psi) = u solves to psi = (u_x + i u_y) / (1 + u_z)
    Some(C64::new(u[0] / d, u[1] / d))
}

/// Stereographic point of a bra-side Bloch direction.
fn direction_to_bra_point(v: [f64; 3]) -> Option<C64> {
    let d = 1.0 + v[2];
    if d.abs() < 1e-9 {
        return None;
    }
    Some(C64::new(v[0] / d, -v[1] / d))
}

impl Regularizer {
    /// Build the policy for the engine's thresholds.
    pub fn new(base: Spin12PointFamily, z_max: f64, nu_max: f64) -> Self {
        Self::with_eps(base, z_max, nu_max, crate::engine::DEFAULT_EPS)
    }

    pub fn with_eps(base: Spin12PointFamily, z_max: f64, nu_max: f64, eps: f64) -> Self {
        use rand::{Rng, SeedableRng};

        // deterministic union of tetrahedron orientations
        let mut rng = rand_pcg::Pcg64Mcg::seed_from_u64(0x7e7a_11ed_0a05_4c1f);
        let mut points: Vec<C64> = base.zpoints().to_vec();
        while points.len() < 4 * FIXED_TETRAHEDRA {
            let z: f64 = 2.0 * rng.gen::<f64>() - 1.0;
            let az: f64 = rng.gen::<f64>() * std::f64::consts::TAU;
            let s = (1.0 - z * z).sqrt();
            let fam = Spin12PointFamily::oriented(
                [s * az.cos(), s * az.sin(), z],
                rng.gen::<f64>() * std::f64::consts::TAU,
            );
            if fam.zpoints().iter().all(|p| p.norm() <= FIXED_Z_CAP) {
                points.extend_from_slice(fam.zpoints());
            }
        }
        let mut fixed_pairs = Vec::new();
        for &a in &points {
            for &b in &points {
                let (psi, phi) = (a.conj(), b);
                let depth = (C64::new(1.0, 0.0) + psi * phi).norm();
                if depth >= PAIR_DEPTH_FRACTION * eps && kernel_norm(psi, phi) <= 0.95 * nu_max {
                    fixed_pairs.push((psi, phi));
                }
            }
        }

        let ncols = fixed_pairs.len() + ALIGNED_SLOTS;
        let mut data = vec![0.0; 9 * ncols];
        for (c, &(psi, phi)) in fixed_pairs.iter().enumerate() {
            let m = positive_p_matrix(psi, phi).expect("filtered pairs are pole-free");
            for (rp, &e) in [m[[0, 0]], m[[0, 1]], m[[1, 0]], m[[1, 1]]].iter().enumerate() {
                data[(2 * rp) * ncols + c] = e.re;
                data[(2 * rp + 1) * ncols + c] = e.im;
            }
            data[8 * ncols + c] = NORMALIZATION_WEIGHT;
        }
        let template = DenseMatrix::new(9, ncols, data);

        // legacy shared-family grid for the exact-expansion search surface
        let mut grid = Vec::new();
        let limit = 0.7 * z_max;
        for yi in 0..Self::Y_SCAN {
            for pi in 0..Self::PHI_SCAN {
                if yi == 0 && pi == 0 {
                    continue;
                }
                let phi = base.phi_rot()
                    + 2.0 * std::f64::consts::PI * pi as f64 / Self::PHI_SCAN as f64;
                let y = std::f64::consts::PI * yi as f64 / Self::Y_SCAN as f64;
                let family = Spin12PointFamily::with_rotation(phi, y);
                if family.zpoints().iter().any(|z| z.norm() > limit) {
                    continue;
                }
                grid.push(family);
            }
        }

        Regularizer {
            nu_max,
            eps,
            fixed_pairs,
            template,
            base: PairDictionary::shared(base),
            grid,
        }
    }

    /// Scan sizes of the legacy shared-family grid: 16 azimuthal angles by
    /// 8 tilts.
    pub const PHI_SCAN: usize = 16;
    pub const Y_SCAN: usize = 8;

    pub fn nu_max(&self) -> f64 {
        self.nu_max
    }

    pub fn fixed_pair_count(&self) -> usize {
        self.fixed_pairs.len()
    }

    /// State-aligned pairs: rings of points around the ket and bra Bloch
    /// directions, paired across the two sides and filtered so a sampled
    /// replacement can never immediately re-trigger.
    ///
    /// Rings (rather than partial arcs) matter: the positive cone of a ring
    /// contains its deep axis direction, so kernels pointing toward the
    /// coordinate poles remain representable by points of bounded
    /// stereographic radius.
    fn aligned_pairs_with(
        &self,
        psi: C64,
        phi: C64,
        radii: &[f64],
        per_ring: usize,
        cap_boost: f64,
        max_pairs: usize,
    ) -> Vec<(C64, C64)> {
        let u = ket_direction(psi);
        let v = bra_direction(phi);
        let nu_target = kernel_norm(psi, phi);
        // match the dictionary wildness to the state, within the engine caps
        let nu_cap = (cap_boost * nu_target + 0.5).max(2.5).min(0.95 * self.nu_max);

        let ring_points = |anchor: [f64; 3], toward_ket: bool| -> Vec<C64> {
            let mut pts = Vec::with_capacity(radii.len() * per_ring + 1);
            let convert = |dir: [f64; 3]| -> Option<C64> {
                if toward_ket {
                    direction_to_ket_point(dir)
                } else {
                    direction_to_bra_point(dir)
                }
            };
            if let Some(z) = convert(anchor) {
                if z.norm() <= ALIGNED_Z_CAP {
                    pts.push(z);
                }
            }
            let seed = if anchor[2].abs() < 0.9 {
                [0.0, 0.0, 1.0]
            } else {
                [1.0, 0.0, 0.0]
            };
            let e1 = unit3([
                seed[1] * anchor[2] - seed[2] * anchor[1],
                seed[2] * anchor[0] - seed[0] * anchor[2],
                seed[0] * anchor[1] - seed[1] * anchor[0],
            ]);
            for &radius in radii {
                let tilted = [
                    anchor[0] * radius.cos() + e1[0] * radius.sin(),
                    anchor[1] * radius.cos() + e1[1] * radius.sin(),
                    anchor[2] * radius.cos() + e1[2] * radius.sin(),
                ];
                for k in 0..per_ring {
                    let az = std::f64::consts::TAU * k as f64 / per_ring as f64;
                    let dir = rotate_about(anchor, tilted, az);
                    if let Some(z) = convert(dir) {
                        if z.norm() <= ALIGNED_Z_CAP {
                            pts.push(z);
                        }
                    }
                }
            }
            pts
        };

        let kets = ring_points(u, true);
        let bras = ring_points(v, false);
        let mut out = Vec::with_capacity(max_pairs.min(kets.len() * bras.len()));
        'outer: for &k in &kets {
            for &b in &bras {
                let denom = (C64::new(1.0, 0.0) + k * b).norm();
                if denom < PAIR_DEPTH_FRACTION * self.eps {
                    continue;
                }
                if kernel_norm(k, b) > nu_cap {
                    continue;
                }
                out.push((k, b));
                if out.len() == max_pairs {
                    break 'outer;
                }
            }
        }
        out
    }

    fn aligned_pairs(&self, psi: C64, phi: C64) -> Vec<(C64, C64)> {
        let mut out = self.pole_matched_pairs(psi, phi);
        let budget = ALIGNED_SLOTS - out.len();
        out.extend(self.aligned_pairs_with(psi, phi, &RING_RADII, RING_POINTS, 1.3, budget));
        out
    }

    /// Analytically matched pairs for near-pole kernels: the deep part of
    /// a kernel with 1 + psi phi = delta can only be mixed from pairs whose
    /// 1 + k b shares the phase of delta, so those pairs are constructed
    /// directly, with magnitudes lifted onto the pole margin; the sampled
    /// replacement therefore sits just outside the eps shell.
    fn pole_matched_pairs(&self, psi: C64, phi: C64) -> Vec<(C64, C64)> {
        let delta = C64::new(1.0, 0.0) + psi * phi;
        let mag = delta.norm();
        if mag >= 8.0 * self.eps || mag == 0.0 {
            return Vec::new();
        }
        let phase = delta / mag;
        let psi_dir = if psi.norm() > 1e-9 { psi / psi.norm() } else { C64::new(1.0, 0.0) };
        let phi_dir = if phi.norm() > 1e-9 { phi / phi.norm() } else { C64::new(1.0, 0.0) };
        let mut out = Vec::new();
        let floor = PAIR_DEPTH_FRACTION * self.eps;
        for &climb in &POLE_CLIMB {
            let lifted = phase * (climb * mag).max(floor);
            let offset = lifted - C64::new(1.0, 0.0);
            for &radius in &POLE_MAGNITUDES {
                for &rot in &POLE_ROTATIONS {
                    let tweak = C64::from_polar(radius, rot);
                    // anchor the ket side along psi's ray
                    let k = psi_dir * tweak;
                    let b = offset / k;
                    if b.norm() <= ALIGNED_Z_CAP && kernel_norm(k, b) <= 0.95 * self.nu_max {
                        out.push((k, b));
                    }
                    // and the bra side along phi's ray
                    let b = phi_dir * tweak;
                    let k = offset / b;
                    if k.norm() <= ALIGNED_Z_CAP && kernel_norm(k, b) <= 0.95 * self.nu_max {
                        out.push((k, b));
                    }
                }
            }
        }
        out
    }

    /// Expand the kernel over the replacement dictionary augmented with the
    /// state's ceiling pairs, returning the best nonnegative normalized
    /// weights and the pairs they refer to.
    pub fn replacement_expansion(
        &self,
        psi: C64,
        phi: C64,
    ) -> Result<(Vec<f64>, Vec<(C64, C64)>, f64), ProjectionError> {
        let target = positive_p_matrix(psi, phi)?;
        let extra = self.aligned_pairs(psi, phi);
        let ncols = self.template.cols;
        let mut data = self.template.data.clone();
        for (slot, &(zp, zq)) in extra.iter().enumerate().take(ALIGNED_SLOTS) {
            let c = self.fixed_pairs.len() + slot;
            let m = positive_p_matrix(zp, zq)?;
            for (rp, &e) in [m[[0, 0]], m[[0, 1]], m[[1, 0]], m[[1, 1]]].iter().enumerate() {
                data[(2 * rp) * ncols + c] = e.re;
                data[(2 * rp + 1) * ncols + c] = e.im;
            }
            data[8 * ncols + c] = NORMALIZATION_WEIGHT;
        }
        let system = DenseMatrix::new(9, ncols, data);
        let b = [
            target[[0, 0]].re,
            target[[0, 0]].im,
            target[[0, 1]].re,
            target[[0, 1]].im,
            target[[1, 0]].re,
            target[[1, 0]].im,
            target[[1, 1]].re,
            target[[1, 1]].im,
            NORMALIZATION_WEIGHT,
        ];
        let sol = nnls(&system, &b);

        let mut pairs: Vec<(C64, C64)> = self.fixed_pairs.clone();
        pairs.extend(extra.iter().take(ALIGNED_SLOTS));
        let used = pairs.len();
        let mut weights = vec![0.0f64; used];
        let mut total = 0.0;
        for (w, &v) in weights.iter_mut().zip(sol.x.iter().take(used)) {
            if !v.is_finite() {
                return Err(ProjectionError::ExpansionFailure {
                    best_residual: f64::INFINITY,
                    families_tried: 1,
                });
            }
            *w = v.max(0.0);
            total += *w;
        }
        if total <= 0.0 {
            return Err(ProjectionError::ExpansionFailure {
                best_residual: f64::INFINITY,
                families_tried: 1,
            });
        }
        for w in &mut weights {
            *w /= total;
        }
        let mut acc: Array2<C64> = Array2::zeros((2, 2));
        for (&w, &(zp, zq)) in weights.iter().zip(&pairs) {
            if w > 0.0 {
                acc = acc + positive_p_matrix(zp, zq)?.mapv(|v| v * w);
            }
        }
        let residual = linalg::frobenius_norm(&(&acc - &target));
        if residual <= EXPANSION_RESIDUAL_TOL {
            return Ok((weights, pairs, residual));
        }

        // rare refinement pass: wider, denser rings with a looser norm cap
        let wide = self.aligned_pairs_with(psi, phi, &RETRY_RADII, RETRY_POINTS, 2.0, usize::MAX);
        let mut retry_pairs: Vec<(C64, C64)> = self.fixed_pairs.clone();
        retry_pairs.extend(wide);
        let ncols = retry_pairs.len();
        let mut data = vec![0.0; 9 * ncols];
        for (c, &(zp, zq)) in retry_pairs.iter().enumerate() {
            let m = positive_p_matrix(zp, zq)?;
            for (rp, &e) in [m[[0, 0]], m[[0, 1]], m[[1, 0]], m[[1, 1]]].iter().enumerate() {
                data[(2 * rp) * ncols + c] = e.re;
                data[(2 * rp + 1) * ncols + c] = e.im;
            }
            data[8 * ncols + c] = NORMALIZATION_WEIGHT;
        }
        let system = DenseMatrix::new(9, ncols, data);
        let sol = nnls(&system, &b);
        let mut retry_weights = vec![0.0f64; ncols];
        let mut total = 0.0;
        for (w, &v) in retry_weights.iter_mut().zip(&sol.x) {
            if !v.is_finite() {
                return Ok((weights, pairs, residual));
            }
            *w = v.max(0.0);
            total += *w;
        }
        if total <= 0.0 {
            return Ok((weights, pairs, residual));
        }
        for w in &mut retry_weights {
            *w /= total;
        }
        let mut acc: Array2<C64> = Array2::zeros((2, 2));
        for (&w, &(zp, zq)) in retry_weights.iter().zip(&retry_pairs) {
            if w > 0.0 {
                acc = acc + positive_p_matrix(zp, zq)?.mapv(|v| v * w);
            }
        }
        let retry_residual = linalg::frobenius_norm(&(&acc - &target));
        if retry_residual < residual {
            Ok((retry_weights, retry_pairs, retry_residual))
        } else {
            Ok((weights, pairs, residual))
        }
    }

    /// Expand and sample a replacement point; the bool reports whether the
    /// expansion was exact. Replacement pairs respect the engine thresholds
    /// (norm strictly inside `nu_max`, pole margin outside `eps`).
    pub fn project(&self, psi: C64, phi: C64, u: f64) -> Result<(C64, C64, bool), ProjectionError> {
        let (weights, pairs, residual) = self.replacement_expansion(psi, phi)?;
        let mut cumulative = 0.0;
        let mut pick = pairs.len() - 1;
        for (idx, &w) in weights.iter().enumerate() {
            cumulative += w;
            if cumulative > u {
                pick = idx;
                break;
            }
        }
        let (zp, zq) = pairs[pick];
        Ok((zp, zq, residual <= EXPANSION_RESIDUAL_TOL))
    }

    /// The number of shared families in the exact-expansion search.
    pub fn families(&self) -> usize {
        1 + self.grid.len()
    }

    /// Exact expansion over the shared-family rotation search (the base
    /// family first, then the grid); best approximation flagged inexact if
    /// none closes.
    pub fn expand(&self, psi: C64, phi: C64) -> Result<DiscreteExpansion, ProjectionError> {
        let mut best: Option<DiscreteExpansion> = None;
        let consider = |expansion: DiscreteExpansion,
                            best: &mut Option<DiscreteExpansion>|
         -> Option<DiscreteExpansion> {
            if expansion.exact {
                return Some(expansion);
            }
            if best
                .as_ref()
                .map(|b| expansion.residual < b.residual)
                .unwrap_or(true)
            {
                *best = Some(expansion);
            }
            None
        };
        if let Ok(expansion) = self.base.solve(psi, phi) {
            if let Some(hit) = consider(expansion, &mut best) {
                return Ok(hit);
            }
        }
        for family in &self.grid {
            if let Ok(expansion) = PairDictionary::shared(family.clone()).solve(psi, phi) {
                if let Some(hit) = consider(expansion, &mut best) {
                    return Ok(hit);
                }
            }
        }
        best.ok_or(ProjectionError::ExpansionFailure {
            best_residual: f64::INFINITY,
            families_tried: self.families(),
        })
    }

    /// Expand strictly over the shared-family search: exact or an error.
    pub fn expand_exact(&self, psi: C64, phi: C64) -> Result<DiscreteExpansion, ProjectionError> {
        let expansion = self.expand(psi, phi)?;
        if !expansion.exact {
            return Err(ProjectionError::ExpansionFailure {
                best_residual: expansion.residual,
                families_tried: self.families(),
            });
        }
        Ok(expansion)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::KernelOrdering;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_pcg::Pcg64Mcg;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn base_family() -> Spin12PointFamily {
        Spin12PointFamily::new(0.0)
    }

    fn regularizer() -> Regularizer {
        Regularizer::new(base_family(), 10.0 * 2.0f64.sqrt(), 2.0)
    }

    fn check_constraints(exp: &DiscreteExpansion) {
        assert!(exp.weights.iter().all(|&w| w >= 0.0));
        assert_abs_diff_eq!(exp.weight_sum(), 1.0, epsilon = 1e-10);
        assert!(exp.residual <= EXPANSION_RESIDUAL_TOL);
    }

    fn mixture_kernel(exp: &DiscreteExpansion) -> Array2<C64> {
        let mut acc: Array2<C64> = Array2::zeros((2, 2));
        for idx in 0..16 {
            let (zp, zq) = exp.pair_point(idx);
            acc = acc + positive_p_matrix(zp, zq).unwrap().mapv(|v| v * exp.weights[idx]);
        }
        acc
    }

    #[test]
    fn vacuum_kernel_expands() {
        let exp = expand_kernel(c(0.0, 0.0), c(0.0, 0.0), &base_family()).unwrap();
        check_constraints(&exp);
    }

    #[test]
    fn expansion_preserves_sigma_z_expectation() {
        let (psi, phi) = (c(0.4, 0.2), c(-0.1, 0.5));
        let exp = regularizer().expand_exact(psi, phi).unwrap();
        let target = positive_p_matrix(psi, phi).unwrap();
        let target_z = target[[0, 0]] - target[[1, 1]];
        let mixed = mixture_kernel(&exp);
        let acc = mixed[[0, 0]] - mixed[[1, 1]];
        assert!((acc - target_z).norm() < 1e-8);
    }

    #[test]
    fn dictionary_diagonal_pairs_are_projectors() {
        let fam = base_family();
        for &z in fam.zpoints() {
            let k = positive_p_matrix(z.conj(), z).unwrap();
            assert!(linalg::hermiticity_error(&k) < 1e-14);
            // rank-one projector: k^2 = k
            let k2 = k.dot(&k);
            assert!(linalg::max_abs_diff(&k2, &k) < 1e-13);
        }
    }

    #[test]
    fn replacement_points_stay_inside_the_trigger_shell() {
        // everything the engine can sample satisfies kernel_norm < nu_max,
        // so a projection can never immediately re-trigger
        let reg = regularizer();
        let mut rng = Pcg64Mcg::seed_from_u64(41);
        let mut checked = 0;
        while checked < 100 {
            let psi = c(4.0 * (rng.gen::<f64>() - 0.5), 4.0 * (rng.gen::<f64>() - 0.5));
            let phi = c(4.0 * (rng.gen::<f64>() - 0.5), 4.0 * (rng.gen::<f64>() - 0.5));
            let nu = kernel_norm(psi, phi);
            if !(2.0..8.0).contains(&nu) {
                continue;
            }
            checked += 1;
            let (zp, zq, _) = reg.project(psi, phi, rng.gen()).unwrap();
            assert!(kernel_norm(zp, zq) < reg.nu_max(), "sampled norm {}", kernel_norm(zp, zq));
        }
    }

    #[test]
    fn replacement_is_exact_with_matched_pair_norms() {
        // with the norm trigger disabled the aligned rings match the
        // state's wildness and the expansion closes exactly over a wide
        // band of kernel norms
        let reg = Regularizer::new(base_family(), crate::engine::DEFAULT_Z_MAX, crate::engine::DEFAULT_NU_MAX);
        let mut rng = Pcg64Mcg::seed_from_u64(43);
        let mut checked = 0;
        while checked < 150 {
            let psi = c(5.0 * (rng.gen::<f64>() - 0.5), 5.0 * (rng.gen::<f64>() - 0.5));
            let phi = c(5.0 * (rng.gen::<f64>() - 0.5), 5.0 * (rng.gen::<f64>() - 0.5));
            let nu = kernel_norm(psi, phi);
            if !(1.8..8.0).contains(&nu) {
                continue;
            }
            checked += 1;
            let (_, _, residual) = reg.replacement_expansion(psi, phi).unwrap();
            assert!(
                residual <= EXPANSION_RESIDUAL_TOL,
                "residual {residual} at ({psi}, {phi}) nu={nu}"
            );
        }
    }

    #[test]
    fn norm_capped_mode_truncates_by_a_bounded_amount() {
        // with the norm trigger active the replacement pairs stay strictly
        // inside it, so over-threshold kernels truncate by a bounded margin
        let reg = regularizer(); // nu_max = 2.0
        let mut rng = Pcg64Mcg::seed_from_u64(47);
        let mut checked = 0;
        let mut worst: f64 = 0.0;
        while checked < 100 {
            let psi = c(3.0 * (rng.gen::<f64>() - 0.5), 3.0 * (rng.gen::<f64>() - 0.5));
            let phi = c(3.0 * (rng.gen::<f64>() - 0.5), 3.0 * (rng.gen::<f64>() - 0.5));
            let nu = kernel_norm(psi, phi);
            if !(2.0..2.1).contains(&nu) {
                continue;
            }
            checked += 1;
            let (_, _, residual) = reg.replacement_expansion(psi, phi).unwrap();
            worst = worst.max(residual);
        }
        assert!(worst < 1.0, "worst shell residual {worst}");
    }

    #[test]
    fn replacement_handles_deep_pole_and_z_max_states() {
        let reg = regularizer();
        for (psi, phi) in [
            (c(3.0, 0.0), c(-0.35, 0.0)),   // |1 + psi phi| = 0.05
            (c(14.2, 0.0), c(1.0, 0.0)),    // beyond z_max
            (c(14.2, 0.0), c(0.0, 0.0)),
            (c(10.0, 10.0), c(0.3, -0.8)),
        ] {
            let (zp, zq, _) = reg.project(psi, phi, 0.37).unwrap();
            assert!(kernel_norm(zp, zq) < reg.nu_max());
            assert!(zp.norm() < 16.0 && zq.norm() < 16.0);
        }
    }

    #[test]
    fn replacement_expansion_preserves_tame_kernels_exactly() {
        // states inside the dictionary hull are reproduced to solver
        // precision; the sampled mixture is then unbiased
        let reg = regularizer();
        for (psi, phi) in [
            (c(1.0, 0.0), c(1.0, 0.0)),
            (c(0.0, 0.0), c(0.0, 0.0)),
            (c(0.4, 0.2), c(0.4, -0.2)),
        ] {
            let (weights, pairs, residual) = reg.replacement_expansion(psi, phi).unwrap();
            assert!(residual <= EXPANSION_RESIDUAL_TOL, "residual {residual}");
            let target = positive_p_matrix(psi, phi).unwrap();
            let mut acc: Array2<C64> = Array2::zeros((2, 2));
            for (&w, &(zp, zq)) in weights.iter().zip(&pairs) {
                if w > 0.0 {
                    acc = acc + positive_p_matrix(zp, zq).unwrap().mapv(|v| v * w);
                }
            }
            assert!(linalg::max_abs_diff(&acc, &target) < 1e-8);
        }
    }

    #[test]
    fn sample_projection_concentrated_and_inverse_cdf() {
        let exp = expand_kernel(c(0.0, 0.0), c(0.0, 0.0), &base_family()).unwrap();
        let mut concentrated = exp.clone();
        concentrated.weights = [0.0; 16];
        concentrated.weights[7] = 1.0;
        for u in [0.0, 0.3, 0.999] {
            let got = sample_projection(&concentrated, u);
            assert_eq!(got, concentrated.pair_point(7));
        }
        // u = 0 picks the first pair with positive weight
        let mut two = exp.clone();
        two.weights = [0.0; 16];
        two.weights[3] = 0.5;
        two.weights[9] = 0.5;
        assert_eq!(sample_projection(&two, 0.0), two.pair_point(3));
        assert_eq!(sample_projection(&two, 0.6), two.pair_point(9));
    }

    #[test]
    fn sampling_frequencies_match_weights() {
        let exp = regularizer().expand_exact(c(0.9, 0.1), c(0.2, -0.3)).unwrap();
        let mut rng = Pcg64Mcg::seed_from_u64(99);
        let draws = 100_000usize;
        let mut counts = [0usize; 16];
        for _ in 0..draws {
            let u: f64 = rng.gen();
            let pt = sample_projection(&exp, u);
            let idx = (0..16).find(|&i| exp.pair_point(i) == pt).unwrap();
            counts[idx] += 1;
        }
        for (idx, &w) in exp.weights.iter().enumerate() {
            let freq = counts[idx] as f64 / draws as f64;
            // 4 sigma multinomial band
            let sigma = (w * (1.0 - w) / draws as f64).sqrt().max(1e-6);
            assert!(
                (freq - w).abs() < 4.0 * sigma + 1e-9,
                "pair {idx}: freq {freq}, weight {w}"
            );
        }
    }

    #[test]
    fn should_project_thresholds() {
        let z_max = 10.0 * 2.0f64.sqrt();
        let state = PhaseSpaceState::new(
            vec![c(20.0, 0.0), c(1.0, 0.0), c(0.5, 0.0)],
            vec![c(0.0, 0.0), c(1.0, 0.0), c(-2.1, 0.0)],
        );
        let flags = should_project(&state, z_max, 0.1);
        assert_eq!(flags, vec![true, false, true]);
        // site 2: psi*phi = -1.05 => |1 + psi phi| = 0.05 < 0.1
    }

    #[test]
    fn norm_trigger_extends_the_spec_thresholds() {
        let z_max = 10.0 * 2.0f64.sqrt();
        let state = PhaseSpaceState::new(
            vec![c(1.0, 0.0), c(2.0, 0.0)],
            vec![c(1.0, 0.0), c(-0.3, 0.0)],
        );
        // site 1: |1 + psi phi| = 0.4 (no eps trigger) but nu ~ 5.9
        assert_eq!(should_project(&state, z_max, 0.1), vec![false, false]);
        assert_eq!(
            projection_triggers(&state, z_max, 0.1, 2.0),
            vec![false, true]
        );
    }

    #[test]
    fn kernel_norm_reference_values() {
        assert_abs_diff_eq!(kernel_norm(c(0.0, 0.0), c(0.0, 0.0)), 1.0, epsilon = 1e-14);
        let psi = c(0.7, -0.4);
        assert_abs_diff_eq!(kernel_norm(psi, psi.conj()), 1.0, epsilon = 1e-14);
        // off-diagonal tetrahedron pair: sqrt(3)
        let fam = base_family();
        let nu = kernel_norm(fam.point(0, 1).conj(), fam.point(1, 0));
        assert_abs_diff_eq!(nu, 3.0f64.sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn projection_of_discrete_pair_preserves_expectations() {
        // a state already at a discrete pair expands to a valid probability
        // vector whose mixture reproduces the same kernel
        let fam = base_family();
        let (psi, phi) = (fam.point(0, 1).conj(), fam.point(1, 0));
        let exp = expand_kernel(psi, phi, &fam).unwrap();
        check_constraints(&exp);
    }

    #[test]
    fn expansion_matches_mean_kernel_over_samples() {
        let (psi, phi) = (c(1.0, 0.0), c(1.0, 0.0));
        let exp = expand_kernel(psi, phi, &base_family()).unwrap();
        check_constraints(&exp);
        let target = positive_p_matrix(psi, phi).unwrap();
        let mut rng = Pcg64Mcg::seed_from_u64(7);
        let draws = 100_000usize;
        let mut mean: Array2<C64> = Array2::zeros((2, 2));
        for _ in 0..draws {
            let (zp, zq) = sample_projection(&exp, rng.gen());
            mean = mean + positive_p_matrix(zp, zq).unwrap();
        }
        mean = mean.mapv(|v| v / draws as f64);
        // multinomial error of a bounded matrix family at 1e5 draws
        assert!(linalg::max_abs_diff(&mean, &target) < 0.02);
    }

    #[test]
    fn replacement_sampling_follows_expansion_weights() {
        // the sampled mixture is faithful to the expansion: pick
        // frequencies match the weights, and the weighted mixture matches
        // the kernel to within its reported residual
        let (psi, phi) = (c(1.4, 0.3), c(-0.65, 0.1));
        let reg = Regularizer::new(
            base_family(),
            crate::engine::DEFAULT_Z_MAX,
            crate::engine::DEFAULT_NU_MAX,
        );
        let (weights, pairs, residual) = reg.replacement_expansion(psi, phi).unwrap();
        assert!(residual <= EXPANSION_RESIDUAL_TOL, "residual {residual}");
        let target = positive_p_matrix(psi, phi).unwrap();
        let mut mixture: Array2<C64> = Array2::zeros((2, 2));
        for (&w, &(zp, zq)) in weights.iter().zip(&pairs) {
            if w > 0.0 {
                mixture = mixture + positive_p_matrix(zp, zq).unwrap().mapv(|v| v * w);
            }
        }
        assert!(linalg::frobenius_norm(&(&mixture - &target)) <= residual + 1e-12);

        let mut rng = Pcg64Mcg::seed_from_u64(13);
        let draws = 200_000usize;
        let mut counts = vec![0usize; pairs.len()];
        for _ in 0..draws {
            let u: f64 = rng.gen();
            let mut cumulative = 0.0;
            let mut pick = pairs.len() - 1;
            for (idx, &w) in weights.iter().enumerate() {
                cumulative += w;
                if cumulative > u {
                    pick = idx;
                    break;
                }
            }
            counts[pick] += 1;
        }
        for (idx, &w) in weights.iter().enumerate() {
            let freq = counts[idx] as f64 / draws as f64;
            let sigma = (w * (1.0 - w) / draws as f64).sqrt().max(1e-9);
            assert!(
                (freq - w).abs() < 5.0 * sigma + 1e-9,
                "pair {idx}: freq {freq} weight {w}"
            );
        }
    }

    #[test]
    fn x_polarized_discrete_weights_need_a_tilted_family() {
        // s = +1 tetrahedron weights of |x+><x+|: negative for every
        // azimuthal angle of the polar family, nonnegative once the family
        // is tilted so a vertex aligns with +x
        let rho = {
            let mut m: Array2<C64> = Array2::zeros((2, 2));
            m[[0, 0]] = c(0.5, 0.0);
            m[[0, 1]] = c(0.5, 0.0);
            m[[1, 0]] = c(0.5, 0.0);
            m[[1, 1]] = c(0.5, 0.0);
            m
        };
        let polar = base_family().distribution(&rho, KernelOrdering::Normal).unwrap();
        assert!(polar.negative);

        let tilted = Spin12PointFamily::with_rotation(0.0, std::f64::consts::FRAC_PI_2);
        let w = tilted.distribution(&rho, KernelOrdering::Normal).unwrap();
        assert!(!w.negative, "raw weights: {:?}", w.raw);
        // vertex on +x carries all the weight
        let normalized = w.normalized.unwrap();
        assert_abs_diff_eq!(normalized.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn oriented_family_places_vertex_on_request() {
        let dir = [0.6, -0.64, 0.48];
        let fam = Spin12PointFamily::oriented(dir, 0.3);
        let v0 = point_to_bloch(fam.zpoints()[0]);
        let norm = (dir[0] * dir[0] + dir[1] * dir[1] + dir[2] * dir[2]).sqrt();
        for k in 0..3 {
            assert_abs_diff_eq!(v0[k], dir[k] / norm, epsilon = 1e-12);
        }
        assert!(fam.tetrahedron_angle_error() < 1e-12);
        assert!(fam.kernel_identity_error() < 1e-12);
    }
}
