//! Drift and diffusion of the Fokker-Planck equation equivalent to the
//! chain's Lindblad dynamics in the positive-P representation.
//!
//! Acting on the product kernel Lambda(z), z = (psi_1..psi_n, phi_1..phi_n),
//! the generator takes the form
//!
//!   L_Lambda = sum_j A_j d_j + (1/2) sum_{jk} D_{jk} d_j d_k.
//!
//! The coefficient functions implemented here are derived directly from the
//! differential action of the Pauli operators on the coherent-state kernel;
//! where the closed forms admit more than one plausible sign or index
//! convention, [`verify_generator`] is the arbiter: it compares the
//! assembled differential operator against the exact matrix Liouvillian
//! applied to the kernel, with derivatives taken by central finite
//! differences (the kernel is holomorphic in each coordinate separately).
//!
//! With X_j = (psi_j + phi_j)/(1 + psi_j phi_j) and Z_j = (1 - psi_j phi_j)
//! / (1 + psi_j phi_j), the nonzero terms are
//!
//!   A_{psi_j} = 2 i h psi_j
//!             - i (1 - psi_j^2) sum_{k != j} J/|j-k|^alpha X_k
//!             + [gp (3 + psi phi) - gm (1 + 3 psi phi)] / (2 + 2 psi phi) psi_j
//!             - 2 gD Z_j psi_j,
//!   A_{phi_j} = the same with psi <-> phi and the field/interaction signs
//!               flipped,
//!   D_{psi_j psi_k} = -i J/|j-k|^alpha (1 - psi_j^2)(1 - psi_k^2),
//!   D_{phi_j phi_k} = +i J/|j-k|^alpha (1 - phi_j^2)(1 - phi_k^2),
//!   D_{psi_j phi_j} = gp + gm psi_j^2 phi_j^2 + 4 gD psi_j phi_j,
//!
//! where (gp, gm) are the boundary pump/decay rates at site j and the
//! interaction pairs run over all distances, not only nearest neighbours.

use thiserror::Error;

use crate::engine::PhaseSpaceState;
use crate::kernels::product_kernel;
use crate::model::{build_liouvillian, Liouvillian, ModelError, ModelParams};
use crate::{linalg, C64};

#[derive(Debug, Error)]
pub enum FpError {
    #[error("phase-space pole at site {site}: |1 + psi*phi| = {value:.3e}")]
    PoleAt { site: usize, value: f64 },
    #[error("state has {got} sites, parameters describe {expected}")]
    SiteMismatch { got: usize, expected: usize },
    #[error("generator oracle limited to n <= 3, got n = {0}")]
    OracleScale(usize),
    #[error("point rejected: site {site} within margin {margin} of a pole or psi,phi = +/-1")]
    MarginViolation { site: usize, margin: f64 },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Kernel(#[from] crate::kernels::KernelError),
}

/// One symmetric entry of the diffusion matrix: D[i][j] = D[j][i] = coeff.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairTerm {
    pub i: usize,
    pub j: usize,
    pub coeff: C64,
}

/// Drift vector and diffusion terms evaluated at one phase-space point.
#[derive(Debug, Clone)]
pub struct DriftDiffusion {
    /// Length 2n; entries 0..n drive psi, n..2n drive phi.
    pub drift: Vec<C64>,
    pub d_terms: Vec<PairTerm>,
}

fn check_poles(state: &PhaseSpaceState, p: &ModelParams) -> Result<(), FpError> {
    if state.psi.len() != p.n {
        return Err(FpError::SiteMismatch {
            got: state.psi.len(),
            expected: p.n,
        });
    }
    for site in 0..p.n {
        let denom = (C64::new(1.0, 0.0) + state.psi[site] * state.phi[site]).norm();
        if denom < 1e-14 {
            return Err(FpError::PoleAt { site, value: denom });
        }
    }
    Ok(())
}

/// The drift vector A(z).
pub fn drift(state: &PhaseSpaceState, p: &ModelParams) -> Result<Vec<C64>, FpError> {
    Ok(drift_diffusion(state, p)?.drift)
}

/// The diffusion pair terms D(z).
pub fn diffusion(state: &PhaseSpaceState, p: &ModelParams) -> Result<Vec<PairTerm>, FpError> {
    Ok(drift_diffusion(state, p)?.d_terms)
}

/// Drift and diffusion in one pass; the engine hot path.
pub fn drift_diffusion(
    state: &PhaseSpaceState,
    p: &ModelParams,
) -> Result<DriftDiffusion, FpError> {
    check_poles(state, p)?;
    let n = p.n;
    let i_unit = C64::new(0.0, 1.0);
    let one = C64::new(1.0, 0.0);

    // per-site symbols
    let mut x_sym = vec![C64::new(0.0, 0.0); n];
    let mut z_sym = vec![C64::new(0.0, 0.0); n];
    let mut pp = vec![C64::new(0.0, 0.0); n]; // psi_j * phi_j
    for j in 0..n {
        let prod = state.psi[j] * state.phi[j];
        let denom = one + prod;
        pp[j] = prod;
        x_sym[j] = (state.psi[j] + state.phi[j]) / denom;
        z_sym[j] = (one - prod) / denom;
    }

    let mut a = vec![C64::new(0.0, 0.0); 2 * n];
    for j in 0..n {
        let psi = state.psi[j];
        let phi = state.phi[j];

        // transverse field
        let mut a_psi = 2.0 * p.h * i_unit * psi;
        let mut a_phi = -2.0 * p.h * i_unit * phi;

        // long-range interaction, first order
        if n > 1 {
            let mut coupled = C64::new(0.0, 0.0);
            for k in 0..n {
                if k != j {
                    coupled += p.coupling(j, k) * x_sym[k];
                }
            }
            a_psi -= i_unit * (one - psi * psi) * coupled;
            a_phi += i_unit * (one - phi * phi) * coupled;
        }

        // boundary pump/decay and bulk dephasing
        let (gp, gm) = p.boundary_rates(j);
        let denom2 = 2.0 * (one + pp[j]);
        let diss =
            (gp * (C64::new(3.0, 0.0) + pp[j]) - gm * (one + 3.0 * pp[j])) / denom2
                - 2.0 * p.gamma_d * z_sym[j];
        a_psi += diss * psi;
        a_phi += diss * phi;

        a[j] = a_psi;
        a[n + j] = a_phi;
    }

    let mut d_terms = Vec::with_capacity(n * n + n);
    for j in 0..n {
        for k in j + 1..n {
            let c = p.coupling(j, k);
            d_terms.push(PairTerm {
                i: j,
                j: k,
                coeff: -i_unit * c * (one - state.psi[j] * state.psi[j])
                    * (one - state.psi[k] * state.psi[k]),
            });
            d_terms.push(PairTerm {
                i: n + j,
                j: n + k,
                coeff: i_unit * c * (one - state.phi[j] * state.phi[j])
                    * (one - state.phi[k] * state.phi[k]),
            });
        }
    }
    for j in 0..n {
        let (gp, gm) = p.boundary_rates(j);
        if gp == 0.0 && gm == 0.0 && p.gamma_d == 0.0 {
            continue;
        }
        let sq = pp[j] * pp[j];
        d_terms.push(PairTerm {
            i: j,
            j: n + j,
            coeff: C64::new(gp, 0.0) + gm * sq + 4.0 * p.gamma_d * pp[j],
        });
    }

    Ok(DriftDiffusion { drift: a, d_terms })
}

/// Result of one generator-consistency check.
#[derive(Debug, Clone, Copy)]
pub struct GeneratorReport {
    /// Relative Frobenius residual ||M1 - M2|| / ||M1|| at the requested step.
    pub residual: f64,
    /// The same residual with the finite-difference step halved (Richardson
    /// cross-check).
    pub half_step_residual: f64,
    pub m1_norm: f64,
}

/// Compares the exact Liouvillian action on the product kernel against the
/// assembled drift/diffusion differential operator.
pub struct GeneratorOracle {
    params: ModelParams,
    liouvillian: Liouvillian,
}

impl GeneratorOracle {
    pub fn new(params: ModelParams) -> Result<Self, FpError> {
        if params.n > 3 {
            return Err(FpError::OracleScale(params.n));
        }
        let liouvillian = build_liouvillian(&params)?;
        Ok(GeneratorOracle { params, liouvillian })
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    /// Reject points within `margin` of a kernel pole or of psi, phi = +/-1.
    pub fn check_margin(&self, state: &PhaseSpaceState, margin: f64) -> Result<(), FpError> {
        let one = C64::new(1.0, 0.0);
        for site in 0..self.params.n {
            let psi = state.psi[site];
            let phi = state.phi[site];
            let pole = (one + psi * phi).norm();
            let degen = [(psi - one).norm(), (psi + one).norm(), (phi - one).norm(),
                (phi + one).norm()]
            .into_iter()
            .fold(f64::INFINITY, f64::min);
            if pole < margin || degen < margin {
                return Err(FpError::MarginViolation { site, margin });
            }
        }
        Ok(())
    }

    pub fn report(&self, state: &PhaseSpaceState, step: f64) -> Result<GeneratorReport, FpError> {
        let residual = self.residual_at(state, step)?;
        let half = self.residual_at(state, step / 2.0)?;
        Ok(GeneratorReport {
            residual: residual.0,
            half_step_residual: half.0,
            m1_norm: residual.1,
        })
    }

    fn residual_at(&self, state: &PhaseSpaceState, step: f64) -> Result<(f64, f64), FpError> {
        let n = self.params.n;
        let dim = 1usize << n;
        check_poles(state, &self.params)?;

        let eval = |offsets: &[(usize, f64)]| -> Result<ndarray::Array2<C64>, FpError> {
            let mut psi = state.psi.clone();
            let mut phi = state.phi.clone();
            for &(idx, delta) in offsets {
                if idx < n {
                    psi[idx] += delta;
                } else {
                    phi[idx - n] += delta;
                }
            }
            Ok(product_kernel(&psi, &phi)?)
        };

        // M1 = Liouvillian applied to the kernel
        let lambda = eval(&[])?;
        let mut vec_lambda = vec![C64::new(0.0, 0.0); dim * dim];
        for r in 0..dim {
            for c in 0..dim {
                vec_lambda[r * dim + c] = lambda[[r, c]];
            }
        }
        let mut out = vec![C64::new(0.0, 0.0); dim * dim];
        self.liouvillian.apply(&vec_lambda, &mut out);
        let mut m1 = ndarray::Array2::zeros((dim, dim));
        for r in 0..dim {
            for c in 0..dim {
                m1[[r, c]] = out[r * dim + c];
            }
        }

        // M2 = sum A_j d_j Lambda + 1/2 sum D_jk d_j d_k Lambda
        let dd = drift_diffusion(state, &self.params)?;
        let two_h = C64::new(2.0 * step, 0.0);
        let mut m2: ndarray::Array2<C64> = ndarray::Array2::zeros((dim, dim));
        for (j, &aj) in dd.drift.iter().enumerate() {
            if aj == C64::new(0.0, 0.0) {
                continue;
            }
            let plus = eval(&[(j, step)])?;
            let minus = eval(&[(j, -step)])?;
            m2 = m2 + (plus - minus).mapv(|v| aj * v / two_h);
        }
        let h2 = C64::new(4.0 * step * step, 0.0);
        for term in &dd.d_terms {
            if term.coeff == C64::new(0.0, 0.0) {
                continue;
            }
            // symmetric pair contributes D_ij d_i d_j (both orders summed)
            let pp = eval(&[(term.i, step), (term.j, step)])?;
            let pm = eval(&[(term.i, step), (term.j, -step)])?;
            let mp = eval(&[(term.i, -step), (term.j, step)])?;
            let mm = eval(&[(term.i, -step), (term.j, -step)])?;
            let second = (pp - pm - mp + mm).mapv(|v| v / h2);
            m2 = m2 + second.mapv(|v| term.coeff * v);
        }

        let m1_norm = linalg::frobenius_norm(&m1);
        let diff = linalg::frobenius_norm(&(&m1 - &m2));
        let residual = if m1_norm < 1e-13 {
            diff
        } else {
            diff / m1_norm
        };
        Ok((residual, m1_norm))
    }
}

/// One-shot generator consistency check; see [`GeneratorOracle`].
pub fn verify_generator(
    p: &ModelParams,
    state: &PhaseSpaceState,
    step: f64,
) -> Result<GeneratorReport, FpError> {
    GeneratorOracle::new(p.clone())?.report(state, step)
}

/// Deterministic sampler of phase-space points respecting the oracle margin.
pub fn random_margin_state<R: rand::Rng>(
    n: usize,
    radius: f64,
    margin: f64,
    rng: &mut R,
) -> PhaseSpaceState {
    let one = C64::new(1.0, 0.0);
    let draw = |rng: &mut R| {
        C64::new(
            radius * (2.0 * rng.gen::<f64>() - 1.0),
            radius * (2.0 * rng.gen::<f64>() - 1.0),
        )
    };
    loop {
        let psi: Vec<C64> = (0..n).map(|_| draw(rng)).collect();
        let phi: Vec<C64> = (0..n).map(|_| draw(rng)).collect();
        let ok = (0..n).all(|j| {
            (one + psi[j] * phi[j]).norm() >= margin
                && (psi[j] - one).norm() >= margin
                && (psi[j] + one).norm() >= margin
                && (phi[j] - one).norm() >= margin
                && (phi[j] + one).norm() >= margin
        });
        if ok {
            return PhaseSpaceState::new(psi, phi);
        }
    }
}
