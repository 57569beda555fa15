//! The dissipative long-range transverse-field Ising chain.
//!
//! H = sum_{j != k} J / (2 |j-k|^alpha) sigma^x_j sigma^x_k + h sum_j sigma^z_j
//!
//! with Kac-normalized coupling J = (sum_{j=1}^n j^-alpha)^-1, boundary
//! Lindblad operators L1 = sqrt(g1) sigma^+_1, L2 = sqrt(g2) sigma^-_1,
//! L3 = sqrt(g3) sigma^+_n, L4 = sqrt(g4) sigma^+_n (optionally sigma^-_n via
//! `l4_minus`), and bulk dephasing L_{4+j} = sqrt(gD) sigma^z_j.
//!
//! Conventions: |0> is the sigma_z = +1 state, sigma^+ = |1><0| and
//! sigma^- = |0><1|, so a sigma^- channel damps toward |0>. Site j of n
//! occupies bit (n-1-j) of the computational basis index.

use thiserror::Error;

use crate::C64;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("site count must be at least 1, got {0}")]
    InvalidSiteCount(usize),
    #[error("interaction exponent must be positive, got {0}")]
    InvalidExponent(f64),
    #[error("rate {name} must be nonnegative, got {value}")]
    NegativeRate { name: &'static str, value: f64 },
    #[error("dense oracle limited to n <= {max}, got n = {n}")]
    OracleScale { n: usize, max: usize },
}

/// Largest chain length for which the dense Liouvillian oracle is built.
pub const ORACLE_MAX_SITES: usize = 8;

/// Physical parameters of the chain plus the derived Kac coupling.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub n: usize,
    pub alpha: f64,
    pub h: f64,
    pub gamma1: f64,
    pub gamma2: f64,
    pub gamma3: f64,
    pub gamma4: f64,
    pub gamma_d: f64,
    /// Treat L4 as sigma^-_n instead of the sigma^+_n the model is written
    /// with; both variants are supported for comparison runs.
    pub l4_minus: bool,
    /// Kac-normalized coupling, derived from (alpha, n).
    pub j_kac: f64,
}

impl ModelParams {
    pub fn new(
        n: usize,
        alpha: f64,
        h: f64,
        rates: [f64; 4],
        gamma_d: f64,
    ) -> Result<Self, ModelError> {
        if n < 1 {
            return Err(ModelError::InvalidSiteCount(n));
        }
        if !(alpha > 0.0) {
            return Err(ModelError::InvalidExponent(alpha));
        }
        let names = ["gamma1", "gamma2", "gamma3", "gamma4"];
        for (name, &value) in names.iter().zip(rates.iter()) {
            if !(value >= 0.0) {
                return Err(ModelError::NegativeRate { name, value });
            }
        }
        if !(gamma_d >= 0.0) {
            return Err(ModelError::NegativeRate {
                name: "gammaD",
                value: gamma_d,
            });
        }
        Ok(ModelParams {
            n,
            alpha,
            h,
            gamma1: rates[0],
            gamma2: rates[1],
            gamma3: rates[2],
            gamma4: rates[3],
            gamma_d,
            l4_minus: false,
            j_kac: kac_norm(alpha, n),
        })
    }

    pub fn with_l4_minus(mut self, l4_minus: bool) -> Self {
        self.l4_minus = l4_minus;
        self
    }

    /// Hilbert dimension 2^n.
    pub fn hilbert_dim(&self) -> usize {
        1usize << self.n
    }

    /// Pairwise coupling J / |j-k|^alpha between distinct sites (0-based).
    pub fn coupling(&self, j: usize, k: usize) -> f64 {
        debug_assert_ne!(j, k);
        let d = (j as f64 - k as f64).abs();
        self.j_kac / d.powf(self.alpha)
    }

    /// Boundary channels at a site: (pump rate, decay rate).
    ///
    /// Site 0 carries (gamma1, gamma2); the last site carries gamma3 and
    /// gamma4, the latter as pump or decay depending on `l4_minus`. For a
    /// single-site chain both boundaries coincide.
    pub fn boundary_rates(&self, site: usize) -> (f64, f64) {
        let mut pump = 0.0;
        let mut decay = 0.0;
        if site == 0 {
            pump += self.gamma1;
            decay += self.gamma2;
        }
        if site == self.n - 1 {
            pump += self.gamma3;
            if self.l4_minus {
                decay += self.gamma4;
            } else {
                pump += self.gamma4;
            }
        }
        (pump, decay)
    }
}

/// Kac normalization (sum_{j=1}^n j^-alpha)^-1.
pub fn kac_norm(alpha: f64, n: usize) -> f64 {
    let sum: f64 = (1..=n).map(|j| (j as f64).powf(-alpha)).sum();
    1.0 / sum
}

/// One Lindblad channel: a jump operator with its rate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JumpKind {
    Raise,
    Lower,
    Dephase,
}

#[derive(Debug, Clone)]
pub struct JumpChannel {
    pub kind: JumpKind,
    pub site: usize,
    pub rate: f64,
}

/// The full channel list L_1 .. L_{n+4} in the model's order.
pub fn jump_channels(p: &ModelParams) -> Vec<JumpChannel> {
    let mut channels = vec![
        JumpChannel { kind: JumpKind::Raise, site: 0, rate: p.gamma1 },
        JumpChannel { kind: JumpKind::Lower, site: 0, rate: p.gamma2 },
        JumpChannel { kind: JumpKind::Raise, site: p.n - 1, rate: p.gamma3 },
        JumpChannel {
            kind: if p.l4_minus { JumpKind::Lower } else { JumpKind::Raise },
            site: p.n - 1,
            rate: p.gamma4,
        },
    ];
    for site in 0..p.n {
        channels.push(JumpChannel { kind: JumpKind::Dephase, site, rate: p.gamma_d });
    }
    channels
}

/// Sparse matrix in triplet-assembled CSR form over the Hilbert space.
#[derive(Debug, Clone)]
pub struct SparseMatrix {
    pub dim: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<C64>,
}

impl SparseMatrix {
    pub fn from_triplets(dim: usize, mut triplets: Vec<(usize, usize, C64)>) -> Self {
        triplets.sort_unstable_by_key(|&(r, c, _)| (r, c));
        let mut merged: Vec<(usize, usize, C64)> = Vec::with_capacity(triplets.len());
        for (r, c, v) in triplets {
            match merged.last_mut() {
                Some(last) if last.0 == r && last.1 == c => last.2 += v,
                _ => merged.push((r, c, v)),
            }
        }
        merged.retain(|&(_, _, v)| v != C64::new(0.0, 0.0));

        let mut row_ptr = vec![0usize; dim + 1];
        for &(r, _, _) in &merged {
            row_ptr[r + 1] += 1;
        }
        for r in 0..dim {
            row_ptr[r + 1] += row_ptr[r];
        }
        let col_idx = merged.iter().map(|&(_, c, _)| c).collect();
        let values = merged.iter().map(|&(_, _, v)| v).collect();
        SparseMatrix { dim, row_ptr, col_idx, values }
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn matvec(&self, x: &[C64], out: &mut [C64]) {
        debug_assert_eq!(x.len(), self.dim);
        debug_assert_eq!(out.len(), self.dim);
        for r in 0..self.dim {
            let mut acc = C64::new(0.0, 0.0);
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += self.values[k] * x[self.col_idx[k]];
            }
            out[r] = acc;
        }
    }

    /// y^T = x^T A, accumulating over stored entries; used for left-action
    /// residuals.
    pub fn left_apply(&self, x: &[C64]) -> Vec<C64> {
        let mut out = vec![C64::new(0.0, 0.0); self.dim];
        for r in 0..self.dim {
            let xr = x[r];
            if xr == C64::new(0.0, 0.0) {
                continue;
            }
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                out[self.col_idx[k]] += xr * self.values[k];
            }
        }
        out
    }

    pub fn iter_entries(&self) -> impl Iterator<Item = (usize, usize, C64)> + '_ {
        (0..self.dim).flat_map(move |r| {
            (self.row_ptr[r]..self.row_ptr[r + 1]).map(move |k| (r, self.col_idx[k], self.values[k]))
        })
    }

    pub fn to_dense(&self) -> ndarray::Array2<C64> {
        let mut m = ndarray::Array2::zeros((self.dim, self.dim));
        for (r, c, v) in self.iter_entries() {
            m[[r, c]] += v;
        }
        m
    }
}

/// Single-site Pauli-type operator embedded in the n-site Hilbert space,
/// as triplets.
fn site_operator_triplets(n: usize, site: usize, kind: JumpKind) -> Vec<(usize, usize, C64)> {
    let dim = 1usize << n;
    let mask = 1usize << (n - 1 - site);
    let one = C64::new(1.0, 0.0);
    let mut t = Vec::with_capacity(dim);
    for b in 0..dim {
        match kind {
            // sigma^+ = |1><0|: column has bit clear, row has bit set
            JumpKind::Raise => {
                if b & mask == 0 {
                    t.push((b | mask, b, one));
                }
            }
            JumpKind::Lower => {
                if b & mask != 0 {
                    t.push((b & !mask, b, one));
                }
            }
            JumpKind::Dephase => {
                let sign = if b & mask == 0 { 1.0 } else { -1.0 };
                t.push((b, b, C64::new(sign, 0.0)));
            }
        }
    }
    t
}

/// sigma^x_j sigma^x_k as triplets (j != k).
fn xx_triplets(n: usize, j: usize, k: usize, coeff: f64) -> Vec<(usize, usize, C64)> {
    let dim = 1usize << n;
    let mask = (1usize << (n - 1 - j)) | (1usize << (n - 1 - k));
    (0..dim)
        .map(|b| (b ^ mask, b, C64::new(coeff, 0.0)))
        .collect()
}

/// Dense-oracle Hamiltonian as a sparse matrix over 2^n.
pub fn hamiltonian(p: &ModelParams) -> SparseMatrix {
    let dim = p.hilbert_dim();
    let mut triplets = Vec::new();
    for j in 0..p.n {
        for k in j + 1..p.n {
            // double sum over ordered pairs with 1/2 => each unordered pair
            // once with the full coupling
            triplets.extend(xx_triplets(p.n, j, k, p.coupling(j, k)));
        }
    }
    for site in 0..p.n {
        for (r, c, v) in site_operator_triplets(p.n, site, JumpKind::Dephase) {
            triplets.push((r, c, v * p.h));
        }
    }
    SparseMatrix::from_triplets(dim, triplets)
}

/// The Lindblad superoperator over vectorized density matrices.
///
/// Row-major vectorization: vec(rho)[i * d + j] = rho[i, j], so
/// vec(A rho B) = (A kron B^T) vec(rho).
#[derive(Debug, Clone)]
pub struct Liouvillian {
    n: usize,
    matrix: SparseMatrix,
}

impl Liouvillian {
    pub fn dim_hilbert(&self) -> usize {
        1usize << self.n
    }

    /// Superoperator dimension 4^n.
    pub fn dim(&self) -> usize {
        self.matrix.dim
    }

    pub fn nnz(&self) -> usize {
        self.matrix.nnz()
    }

    pub fn apply(&self, vec_rho: &[C64], out: &mut [C64]) {
        self.matrix.matvec(vec_rho, out);
    }

    pub fn to_dense(&self) -> ndarray::Array2<C64> {
        self.matrix.to_dense()
    }

    /// Max-norm of vec(I)^T L; zero for a trace-preserving generator.
    pub fn trace_preservation_residual(&self) -> f64 {
        let d = self.dim_hilbert();
        let mut vec_id = vec![C64::new(0.0, 0.0); d * d];
        for i in 0..d {
            vec_id[i * d + i] = C64::new(1.0, 0.0);
        }
        self.matrix
            .left_apply(&vec_id)
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max)
    }
}

/// Assemble the Lindblad superoperator for the chain.
pub fn build_liouvillian(p: &ModelParams) -> Result<Liouvillian, ModelError> {
    if p.n > ORACLE_MAX_SITES {
        return Err(ModelError::OracleScale { n: p.n, max: ORACLE_MAX_SITES });
    }
    let d = p.hilbert_dim();
    let sdim = d * d;
    let mut triplets: Vec<(usize, usize, C64)> = Vec::new();
    let i_unit = C64::new(0.0, 1.0);

    // -i (H kron I - I kron H^T)
    let h = hamiltonian(p);
    for (r, c, v) in h.iter_entries() {
        for k in 0..d {
            triplets.push((r * d + k, c * d + k, -i_unit * v));
            // (I kron H^T)[(k,r'),(k,c')] with H^T[r', c'] = H[c', r']
            triplets.push((k * d + c, k * d + r, i_unit * v));
        }
    }

    // dissipators: L kron conj(L) - 1/2 (L^dag L kron I + I kron (L^dag L)^T)
    for channel in jump_channels(p) {
        if channel.rate == 0.0 {
            continue;
        }
        let l = SparseMatrix::from_triplets(
            d,
            site_operator_triplets(p.n, channel.site, channel.kind),
        );
        let rate = C64::new(channel.rate, 0.0);
        // L kron conj(L)
        for (r1, c1, v1) in l.iter_entries() {
            for (r2, c2, v2) in l.iter_entries() {
                triplets.push((r1 * d + r2, c1 * d + c2, rate * v1 * v2.conj()));
            }
        }
        // L^dag L: for these channels it is diagonal (projector or identity)
        let mut ldl_diag = vec![C64::new(0.0, 0.0); d];
        for (r, c, v) in l.iter_entries() {
            // (L^dag L)[c, c'] = sum_r conj(L[r, c]) L[r, c']; diagonal here
            let _ = r;
            ldl_diag[c] += v.conj() * v;
        }
        let half = C64::new(0.5, 0.0);
        for b in 0..d {
            if ldl_diag[b] == C64::new(0.0, 0.0) {
                continue;
            }
            for k in 0..d {
                triplets.push((b * d + k, b * d + k, -half * rate * ldl_diag[b]));
                triplets.push((k * d + b, k * d + b, -half * rate * ldl_diag[b]));
            }
        }
    }

    Ok(Liouvillian {
        n: p.n,
        matrix: SparseMatrix::from_triplets(sdim, triplets),
    })
}
