//! Dense exact integration of the Lindblad equation for small chains.
//!
//! This is the ground truth the stochastic engine is compared against:
//! classical fourth-order Runge-Kutta on the vectorized density matrix,
//! with Hermitian symmetrization after every step. Intended for n <= 8.

use ndarray::{Array1, Array2};
use thiserror::Error;

use crate::model::{build_liouvillian, ModelError, ModelParams, ORACLE_MAX_SITES};
use crate::{linalg, C64};

#[derive(Debug, Error)]
pub enum ExactError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("initial state is not a valid density matrix: {0}")]
    InvalidInitialState(String),
    #[error("invariant violated at t = {t}: {what} = {value:.3e}; reduce dt")]
    StepSize { t: f64, what: &'static str, value: f64 },
    #[error("operator acts on {op} dimensions, state has {state}")]
    DimensionMismatch { op: usize, state: usize },
}

/// Dense density matrix with its time stamp.
#[derive(Debug, Clone)]
pub struct DensityMatrix {
    pub matrix: Array2<C64>,
    pub time: f64,
}

impl DensityMatrix {
    pub fn new(matrix: Array2<C64>, time: f64) -> Self {
        DensityMatrix { matrix, time }
    }

    /// Pure state |psi><psi| from an unnormalized ket.
    pub fn pure(ket: &Array1<C64>) -> Self {
        let norm2: f64 = ket.iter().map(|z| z.norm_sqr()).sum();
        let dim = ket.len();
        let mut m = Array2::zeros((dim, dim));
        for i in 0..dim {
            for j in 0..dim {
                m[[i, j]] = ket[i] * ket[j].conj() / norm2;
            }
        }
        DensityMatrix::new(m, 0.0)
    }

    /// Product state with every spin polarized along +x.
    pub fn all_x_plus(n: usize) -> Self {
        let dim = 1usize << n;
        let amp = C64::new(1.0 / (dim as f64).sqrt(), 0.0);
        DensityMatrix::pure(&Array1::from_elem(dim, amp))
    }

    pub fn maximally_mixed(n: usize) -> Self {
        let dim = 1usize << n;
        DensityMatrix::new(linalg::identity(dim).mapv(|v| v / dim as f64), 0.0)
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// Check Hermiticity, unit trace and positivity.
    ///
    /// The eigenvalue check runs for dimensions up to 64 (n <= 6); beyond
    /// that only the cheap invariants are verified.
    pub fn validate(&self) -> Result<(), ExactError> {
        let herm = linalg::hermiticity_error(&self.matrix);
        if herm > 1e-10 {
            return Err(ExactError::StepSize { t: self.time, what: "hermiticity", value: herm });
        }
        let tr = (linalg::trace(&self.matrix) - C64::new(1.0, 0.0)).norm();
        if tr > 1e-10 {
            return Err(ExactError::StepSize { t: self.time, what: "trace deviation", value: tr });
        }
        if self.dim() <= 64 {
            let min_eig = linalg::eigvalsh(&self.matrix)[0];
            if min_eig < -1e-8 {
                return Err(ExactError::StepSize {
                    t: self.time,
                    what: "minimum eigenvalue",
                    value: min_eig,
                });
            }
        }
        Ok(())
    }
}

/// Pauli axis for observable descriptors.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PauliAxis {
    X,
    Y,
    Z,
}

impl PauliAxis {
    pub const ALL: [PauliAxis; 3] = [PauliAxis::X, PauliAxis::Y, PauliAxis::Z];

    pub fn label(self) -> &'static str {
        match self {
            PauliAxis::X => "x",
            PauliAxis::Y => "y",
            PauliAxis::Z => "z",
        }
    }
}

/// A product of single-site Pauli operators, e.g. sigma^x_1 sigma^x_3.
#[derive(Debug, Clone, Default)]
pub struct PauliString {
    pub factors: Vec<(usize, PauliAxis)>,
}

impl PauliString {
    pub fn single(site: usize, axis: PauliAxis) -> Self {
        PauliString { factors: vec![(site, axis)] }
    }

    pub fn pair(site_a: usize, site_b: usize, axis: PauliAxis) -> Self {
        PauliString { factors: vec![(site_a, axis), (site_b, axis)] }
    }
}

/// tr(rho O) for a Pauli string, returning the real part and asserting the
/// imaginary part is negligible.
pub fn expectation(rho: &DensityMatrix, op: &PauliString) -> Result<f64, ExactError> {
    let dim = rho.dim();
    let n = dim.trailing_zeros() as usize;
    for &(site, _) in &op.factors {
        if site >= n {
            return Err(ExactError::DimensionMismatch { op: site + 1, state: n });
        }
    }
    let mut flip_mask = 0usize;
    for &(site, axis) in &op.factors {
        if matches!(axis, PauliAxis::X | PauliAxis::Y) {
            flip_mask ^= 1 << (n - 1 - site);
        }
    }
    let mut total = C64::new(0.0, 0.0);
    for b in 0..dim {
        let mut amp = C64::new(1.0, 0.0);
        for &(site, axis) in &op.factors {
            let bit_set = b & (1 << (n - 1 - site)) != 0;
            amp *= match (axis, bit_set) {
                (PauliAxis::X, _) => C64::new(1.0, 0.0),
                (PauliAxis::Y, false) => C64::new(0.0, 1.0),
                (PauliAxis::Y, true) => C64::new(0.0, -1.0),
                (PauliAxis::Z, false) => C64::new(1.0, 0.0),
                (PauliAxis::Z, true) => C64::new(-1.0, 0.0),
            };
        }
        total += amp * rho.matrix[[b, b ^ flip_mask]];
    }
    debug_assert!(total.im.abs() < 1e-10, "imaginary expectation {}", total.im);
    Ok(total.re)
}

/// Collective first and second moments (S^a, <S^a S^a>) for a = x, y, z,
/// with S^a = (1/2n) sum_j sigma^a_j.
pub fn collective_moments(rho: &DensityMatrix, n: usize) -> Result<[(f64, f64); 3], ExactError> {
    let mut out = [(0.0, 0.0); 3];
    for (idx, axis) in PauliAxis::ALL.iter().enumerate() {
        let mut first = 0.0;
        for j in 0..n {
            first += expectation(rho, &PauliString::single(j, *axis))?;
        }
        let mut second = n as f64; // on-site sigma^2 = identity
        for j in 0..n {
            for k in 0..n {
                if j != k {
                    second += expectation(rho, &PauliString::pair(j, k, *axis))?;
                }
            }
        }
        out[idx] = (first / (2.0 * n as f64), second / (4.0 * (n * n) as f64));
    }
    Ok(out)
}

/// Integrate the Lindblad equation, sampling at the requested output times.
///
/// Output times must be sorted and nonnegative; the integrator lands on each
/// exactly by shortening the final step. Halving `dt` is the caller's
/// convergence certificate.
pub fn evolve_exact(
    p: &ModelParams,
    rho0: &DensityMatrix,
    t_out: &[f64],
    dt: f64,
) -> Result<Vec<DensityMatrix>, ExactError> {
    if p.n > ORACLE_MAX_SITES {
        return Err(ExactError::Model(ModelError::OracleScale {
            n: p.n,
            max: ORACLE_MAX_SITES,
        }));
    }
    let dim = p.hilbert_dim();
    if rho0.dim() != dim {
        return Err(ExactError::InvalidInitialState(format!(
            "state dimension {} does not match 2^n = {}",
            rho0.dim(),
            dim
        )));
    }
    rho0.validate()
        .map_err(|e| ExactError::InvalidInitialState(e.to_string()))?;
    assert!(dt > 0.0, "dt must be positive");

    let liou = build_liouvillian(p)?;
    let sdim = dim * dim;
    let mut state = vec![C64::new(0.0, 0.0); sdim];
    for r in 0..dim {
        for c in 0..dim {
            state[r * dim + c] = rho0.matrix[[r, c]];
        }
    }

    let mut k1 = vec![C64::new(0.0, 0.0); sdim];
    let mut k2 = vec![C64::new(0.0, 0.0); sdim];
    let mut k3 = vec![C64::new(0.0, 0.0); sdim];
    let mut k4 = vec![C64::new(0.0, 0.0); sdim];
    let mut tmp = vec![C64::new(0.0, 0.0); sdim];

    let mut outputs = Vec::with_capacity(t_out.len());
    let mut t = 0.0f64;
    for &target in t_out {
        assert!(target >= t - 1e-12, "output times must be sorted");
        while target - t > 1e-12 {
            let step = dt.min(target - t);
            rk4_step(&liou, &mut state, step, &mut k1, &mut k2, &mut k3, &mut k4, &mut tmp);
            hermitian_symmetrize(&mut state, dim);
            t += step;
        }
        let mut m = Array2::zeros((dim, dim));
        for r in 0..dim {
            for c in 0..dim {
                m[[r, c]] = state[r * dim + c];
            }
        }
        let rho = DensityMatrix::new(m, target);
        rho.validate()?;
        outputs.push(rho);
    }
    Ok(outputs)
}

#[allow(clippy::too_many_arguments)]
fn rk4_step(
    liou: &crate::model::Liouvillian,
    state: &mut [C64],
    dt: f64,
    k1: &mut [C64],
    k2: &mut [C64],
    k3: &mut [C64],
    k4: &mut [C64],
    tmp: &mut [C64],
) {
    let n = state.len();
    liou.apply(state, k1);
    for i in 0..n {
        tmp[i] = state[i] + 0.5 * dt * k1[i];
    }
    liou.apply(tmp, k2);
    for i in 0..n {
        tmp[i] = state[i] + 0.5 * dt * k2[i];
    }
    liou.apply(tmp, k3);
    for i in 0..n {
        tmp[i] = state[i] + dt * k3[i];
    }
    liou.apply(tmp, k4);
    for i in 0..n {
        state[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
}

fn hermitian_symmetrize(state: &mut [C64], dim: usize) {
    for r in 0..dim {
        for c in r..dim {
            let a = state[r * dim + c];
            let b = state[c * dim + r];
            let sym = 0.5 * (a + b.conj());
            state[r * dim + c] = sym;
            state[c * dim + r] = sym.conj();
        }
    }
}
