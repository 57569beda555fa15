//! Euler-Maruyama integration of the Ito equations with deterministic
//! seeding, parallel trajectory ensembles and projection-based
//! regularization.
//!
//! The diffusion matrix is factorized analytically term by term: a
//! symmetric pair entry (i, j, c) contributes the two sparse columns
//! sqrt(c/2) (e_i + e_j) and sqrt(-c/2) (e_i - e_j), which reconstruct
//! D exactly at every step. One standard normal draw per column drives the
//! step z <- z + A dt + sqrt(dt) sum_m b_m xi_m.
//!
//! Trajectory k is a pure function of (params, schedule, master_seed, k):
//! its generator is seeded from a splitmix hash, so ensembles are
//! reproducible at any degree of parallelism.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_distr::StandardNormal;
use rand_pcg::Pcg64Mcg;
use rayon::prelude::*;
use thiserror::Error;

use crate::fokker_planck::{drift_diffusion, DriftDiffusion, FpError, PairTerm};
use crate::kernels::{KernelOrdering, Spin12PointFamily};
use crate::model::ModelParams;
use crate::projection::{projection_triggers, ProjectionError, Regularizer};
use crate::C64;

/// Default divergence threshold on |psi|, |phi|.
pub const DEFAULT_Z_MAX: f64 = 14.142135623730951; // 10 sqrt(2)
/// Default pole margin on |1 + psi phi|.
pub const DEFAULT_EPS: f64 = 0.1;
/// Default kernel-norm trigger; see [`crate::projection::kernel_norm`].
pub const DEFAULT_NU_MAX: f64 = 1e6;

/// Which diffusion terms drive the stochastic step.
///
/// `Full` keeps every term of the Fokker-Planck diffusion and is exact in
/// law. `SemiclassicalInteraction` keeps the interaction's first-order
/// (drift) terms but drops its second-order noise, leaving only the
/// dissipative same-site noise; this is the long-time approximation used
/// for large chains, where the interaction noise would otherwise dominate
/// the sampling cost and variance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NoiseTreatment {
    #[default]
    Full,
    SemiclassicalInteraction,
}

#[derive(Debug, Error)]
pub enum EngineError {
    #[error(transparent)]
    Fp(#[from] FpError),
    #[error(transparent)]
    Projection(#[from] ProjectionError),
    #[error("noise vector has {got} entries, factorization needs {expected}")]
    NoiseMismatch { expected: usize, got: usize },
    #[error("non-finite phase-space value at t = {t}")]
    NonFinite { t: f64 },
    #[error("trajectory aborted at t = {t:.6}, site {site}: {reason}")]
    Aborted { t: f64, site: usize, reason: String },
    #[error("invalid schedule: {0}")]
    InvalidSchedule(String),
    #[error("initial state: site {site} has negative discrete weights")]
    NegativeWeights { site: usize },
    #[error("initial state describes {got} sites, parameters have {expected}")]
    SiteMismatch { got: usize, expected: usize },
}

/// The 2n complex trajectory variables at one time, with per-site
/// projection counters.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseSpaceState {
    pub psi: Vec<C64>,
    pub phi: Vec<C64>,
    pub t: f64,
    pub jumps: Vec<u64>,
}

impl PhaseSpaceState {
    pub fn new(psi: Vec<C64>, phi: Vec<C64>) -> Self {
        assert_eq!(psi.len(), phi.len());
        let n = psi.len();
        PhaseSpaceState { psi, phi, t: 0.0, jumps: vec![0; n] }
    }

    /// All spins coherent along +x: the positive-P distribution of the
    /// product state is a point mass at psi = phi = 1.
    pub fn coherent_x(n: usize) -> Self {
        PhaseSpaceState::new(vec![C64::new(1.0, 0.0); n], vec![C64::new(1.0, 0.0); n])
    }

    pub fn n_sites(&self) -> usize {
        self.psi.len()
    }

    pub fn total_jumps(&self) -> u64 {
        self.jumps.iter().sum()
    }

    pub fn is_finite(&self) -> bool {
        self.psi
            .iter()
            .chain(self.phi.iter())
            .all(|z| z.re.is_finite() && z.im.is_finite())
    }
}

/// Integration and output schedule of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSchedule {
    pub dt: f64,
    pub t_out: Vec<f64>,
    pub t_max: f64,
    pub z_max: f64,
    pub eps: f64,
    /// Kernel-norm trigger level; projections fire once the per-site
    /// kernel norm exceeds this, keeping states within reach of the
    /// discrete dictionary (whose mixtures are norm-bounded).
    pub nu_max: f64,
    pub noise: NoiseTreatment,
    pub trajectories: usize,
    pub master_seed: u64,
}

impl RunSchedule {
    /// Uniform output grid of `points` times spanning [0, t_max].
    pub fn uniform(t_max: f64, points: usize, dt: f64, trajectories: usize, seed: u64) -> Self {
        let t_out = if points <= 1 {
            vec![t_max]
        } else {
            (0..points)
                .map(|i| t_max * i as f64 / (points - 1) as f64)
                .collect()
        };
        RunSchedule {
            dt,
            t_out,
            t_max,
            z_max: DEFAULT_Z_MAX,
            eps: DEFAULT_EPS,
            nu_max: DEFAULT_NU_MAX,
            noise: NoiseTreatment::default(),
            trajectories,
            master_seed: seed,
        }
    }

    pub fn validate(&self) -> Result<(), EngineError> {
        if !(self.dt > 0.0) {
            return Err(EngineError::InvalidSchedule(format!("dt = {}", self.dt)));
        }
        if self.trajectories < 1 {
            return Err(EngineError::InvalidSchedule("trajectories < 1".into()));
        }
        if self.t_out.is_empty() {
            return Err(EngineError::InvalidSchedule("empty output grid".into()));
        }
        let mut prev = 0.0f64;
        for &t in &self.t_out {
            if t < prev - 1e-12 || t > self.t_max + 1e-12 {
                return Err(EngineError::InvalidSchedule(format!(
                    "output time {t} outside sorted [0, {}]",
                    self.t_max
                )));
            }
            prev = t;
        }
        if !(self.z_max > 0.0) || !(self.eps > 0.0) {
            return Err(EngineError::InvalidSchedule("z_max and eps must be positive".into()));
        }
        if !(self.nu_max > 3.0f64.sqrt()) {
            return Err(EngineError::InvalidSchedule(
                "nu_max must exceed sqrt(3), the norm of the discrete pairs".into(),
            ));
        }
        Ok(())
    }
}

/// Sparse noise columns b_m with sum_m b_m b_m^T = D.
#[derive(Debug, Clone)]
pub struct NoiseFactorization {
    pub columns: Vec<NoiseColumn>,
}

#[derive(Debug, Clone, Copy)]
pub struct NoiseColumn {
    pub entries: [(usize, C64); 2],
    pub len: usize,
}

impl NoiseFactorization {
    /// Frobenius norm of sum_m b_m b_m^T - D over a dense reconstruction.
    pub fn reconstruction_residual(&self, dim: usize, terms: &[PairTerm]) -> f64 {
        let mut d: Array2<C64> = Array2::zeros((dim, dim));
        for t in terms {
            d[[t.i, t.j]] += t.coeff;
            if t.i != t.j {
                d[[t.j, t.i]] += t.coeff;
            }
        }
        let mut rec: Array2<C64> = Array2::zeros((dim, dim));
        for col in &self.columns {
            for a in 0..col.len {
                for b in 0..col.len {
                    let (ia, va) = col.entries[a];
                    let (ib, vb) = col.entries[b];
                    rec[[ia, ib]] += va * vb;
                }
            }
        }
        crate::linalg::frobenius_norm(&(&rec - &d))
    }
}

/// Analytic per-term factorization of the diffusion matrix.
pub fn factorize_diffusion(terms: &[PairTerm]) -> NoiseFactorization {
    let mut columns = Vec::with_capacity(2 * terms.len());
    for t in terms {
        if t.i == t.j {
            let amp = t.coeff.sqrt();
            columns.push(NoiseColumn { entries: [(t.i, amp), (0, C64::new(0.0, 0.0))], len: 1 });
        } else {
            let half = t.coeff / 2.0;
            let plus = half.sqrt();
            let minus = (-half).sqrt();
            columns.push(NoiseColumn { entries: [(t.i, plus), (t.j, plus)], len: 2 });
            columns.push(NoiseColumn { entries: [(t.i, minus), (t.j, -minus)], len: 2 });
        }
    }
    NoiseFactorization { columns }
}

/// Number of noise draws one step consumes; fixed by the parameters and
/// the noise treatment alone.
pub fn noise_dim_with(p: &ModelParams, noise: NoiseTreatment) -> usize {
    let pair_terms = match noise {
        NoiseTreatment::Full => p.n * (p.n - 1), // psi-psi plus phi-phi pairs
        NoiseTreatment::SemiclassicalInteraction => 0,
    };
    let mut site_terms = 0;
    for site in 0..p.n {
        let (gp, gm) = p.boundary_rates(site);
        if gp != 0.0 || gm != 0.0 || p.gamma_d != 0.0 {
            site_terms += 1;
        }
    }
    2 * (pair_terms + site_terms)
}

/// Noise draws per step under the full treatment.
pub fn noise_dim(p: &ModelParams) -> usize {
    noise_dim_with(p, NoiseTreatment::Full)
}

fn select_terms(dd: &DriftDiffusion, p: &ModelParams, noise: NoiseTreatment) -> Vec<PairTerm> {
    match noise {
        NoiseTreatment::Full => dd.d_terms.clone(),
        NoiseTreatment::SemiclassicalInteraction => dd
            .d_terms
            .iter()
            .filter(|t| t.j == t.i + p.n) // same-site psi-phi cross terms
            .copied()
            .collect(),
    }
}

/// One Euler-Maruyama step in the Ito convention.
///
/// `noise` supplies one standard normal draw per factorization column; a
/// non-finite result is reported as an error for the caller's regularizer,
/// never silently propagated.
pub fn em_step(
    state: &PhaseSpaceState,
    p: &ModelParams,
    dt: f64,
    noise: &[f64],
) -> Result<PhaseSpaceState, EngineError> {
    em_step_with(state, p, dt, noise, NoiseTreatment::Full)
}

/// One Euler-Maruyama step under the chosen noise treatment.
pub fn em_step_with(
    state: &PhaseSpaceState,
    p: &ModelParams,
    dt: f64,
    noise: &[f64],
    treatment: NoiseTreatment,
) -> Result<PhaseSpaceState, EngineError> {
    let dd = drift_diffusion(state, p)?;
    let terms = select_terms(&dd, p, treatment);
    let fact = factorize_diffusion(&terms);
    if noise.len() != fact.columns.len() {
        return Err(EngineError::NoiseMismatch {
            expected: fact.columns.len(),
            got: noise.len(),
        });
    }
    let n = state.n_sites();
    let mut z: Vec<C64> = state.psi.iter().chain(state.phi.iter()).copied().collect();
    for (zi, ai) in z.iter_mut().zip(&dd.drift) {
        *zi += ai * dt;
    }
    let sqrt_dt = dt.sqrt();
    for (col, &xi) in fact.columns.iter().zip(noise) {
        let w = sqrt_dt * xi;
        for e in 0..col.len {
            let (idx, amp) = col.entries[e];
            z[idx] += amp * w;
        }
    }
    let next = PhaseSpaceState {
        psi: z[..n].to_vec(),
        phi: z[n..].to_vec(),
        t: state.t + dt,
        jumps: state.jumps.clone(),
    };
    if !next.is_finite() {
        return Err(EngineError::NonFinite { t: next.t });
    }
    Ok(next)
}

/// Samples of one trajectory at the scheduled output times.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectorySample {
    pub t: f64,
    pub psi: Vec<C64>,
    pub phi: Vec<C64>,
    /// Cumulative projection count up to this time.
    pub jumps: u64,
    /// How many of those projections used the best-approximation fallback
    /// (kernel outside the discrete hull, no exact expansion).
    pub fallback_jumps: u64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrajectoryRecord {
    pub samples: Vec<TrajectorySample>,
}

/// Integrate a single trajectory; a deterministic function of
/// (params, schedule, seed, init).
///
/// After every step each site violating the thresholds is projected onto a
/// sampled discrete pair, in ascending site order. A site whose kernel
/// admits no discrete expansion aborts the trajectory.
pub fn run_trajectory(
    p: &ModelParams,
    schedule: &RunSchedule,
    seed: u64,
    init: &PhaseSpaceState,
    regularizer: &Regularizer,
) -> Result<TrajectoryRecord, EngineError> {
    if init.n_sites() != p.n {
        return Err(EngineError::SiteMismatch { got: init.n_sites(), expected: p.n });
    }
    let mut rng = Pcg64Mcg::seed_from_u64(seed);
    run_trajectory_with_rng(p, schedule, &mut rng, init, regularizer)
}

fn regularize(
    state: &mut PhaseSpaceState,
    schedule: &RunSchedule,
    regularizer: &Regularizer,
    rng: &mut Pcg64Mcg,
    fallback: &mut u64,
) -> Result<(), EngineError> {
    let flags = projection_triggers(state, schedule.z_max, schedule.eps, schedule.nu_max);
    for (site, &flagged) in flags.iter().enumerate() {
        if !flagged {
            continue;
        }
        let u: f64 = rng.gen();
        match regularizer.project(state.psi[site], state.phi[site], u) {
            Ok((psi, phi, exact)) => {
                state.psi[site] = psi;
                state.phi[site] = phi;
                state.jumps[site] += 1;
                if !exact {
                    *fallback += 1;
                }
            }
            Err(e) => {
                return Err(EngineError::Aborted {
                    t: state.t,
                    site,
                    reason: e.to_string(),
                });
            }
        }
    }
    Ok(())
}

/// How each trajectory's initial phase-space point is drawn.
#[derive(Debug, Clone)]
pub enum InitialState {
    /// Deterministic point mass psi = phi = 1 (all spins along +x).
    CoherentX,
    /// Each site draws from the discrete pair expansion of the x-polarized
    /// kernel: an equally valid representation of the same product state
    /// whose spread seeds the ensemble with the initial quantum noise.
    DiscreteX,
    /// Each site draws a tetrahedron point from the s = +1 discrete
    /// distribution of its density matrix; `site_rho` holds one shared
    /// matrix or one per site.
    DiscreteSampled {
        site_rho: Vec<Array2<C64>>,
        family: Spin12PointFamily,
    },
}

/// Draw one initial state (deterministic for `CoherentX`).
pub fn initial_state<R: Rng>(
    kind: &InitialState,
    p: &ModelParams,
    rng: &mut R,
) -> Result<PhaseSpaceState, EngineError> {
    initial_state_with(kind, p, rng, None)
}

/// Draw one initial state; `DiscreteX` requires the regularizer whose
/// expansion supplies the discrete pairs.
pub fn initial_state_with<R: Rng>(
    kind: &InitialState,
    p: &ModelParams,
    rng: &mut R,
    regularizer: Option<&Regularizer>,
) -> Result<PhaseSpaceState, EngineError> {
    match kind {
        InitialState::CoherentX => Ok(PhaseSpaceState::coherent_x(p.n)),
        InitialState::DiscreteX => {
            let reg = regularizer.ok_or(EngineError::InvalidSchedule(
                "discrete-x initial sampling needs the projection policy".into(),
            ))?;
            let one = C64::new(1.0, 0.0);
            let mut psi = Vec::with_capacity(p.n);
            let mut phi = Vec::with_capacity(p.n);
            for _ in 0..p.n {
                let (zp, zq, _) = reg.project(one, one, rng.gen())?;
                psi.push(zp);
                phi.push(zq);
            }
            Ok(PhaseSpaceState::new(psi, phi))
        }
        InitialState::DiscreteSampled { site_rho, family } => {
            if site_rho.len() != 1 && site_rho.len() != p.n {
                return Err(EngineError::SiteMismatch { got: site_rho.len(), expected: p.n });
            }
            let mut psi = Vec::with_capacity(p.n);
            let mut phi = Vec::with_capacity(p.n);
            for site in 0..p.n {
                let rho = &site_rho[if site_rho.len() == 1 { 0 } else { site }];
                let weights = family
                    .distribution(rho, KernelOrdering::Normal)
                    .map_err(FpError::from)?;
                let probs = weights
                    .normalized
                    .ok_or(EngineError::NegativeWeights { site })?;
                let u: f64 = rng.gen();
                let mut cumulative = 0.0;
                let mut pick = probs.len() - 1;
                for (idx, &w) in probs.iter().enumerate() {
                    cumulative += w;
                    if cumulative > u {
                        pick = idx;
                        break;
                    }
                }
                let z = family.zpoints()[pick];
                psi.push(z.conj());
                phi.push(z);
            }
            Ok(PhaseSpaceState::new(psi, phi))
        }
    }
}

/// Raw ensemble output: per-trajectory records in index order plus abort
/// bookkeeping.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleResult {
    pub times: Vec<f64>,
    pub n_sites: usize,
    /// One entry per requested trajectory; `None` marks an abort.
    pub records: Vec<Option<TrajectoryRecord>>,
    pub abort_reasons: Vec<(usize, String)>,
}

impl EnsembleResult {
    pub fn aborted(&self) -> usize {
        self.abort_reasons.len()
    }

    pub fn completed(&self) -> usize {
        self.records.len() - self.aborted()
    }

    pub fn abort_fraction(&self) -> f64 {
        self.aborted() as f64 / self.records.len() as f64
    }
}

/// splitmix64 finalizer used for seed derivation.
pub fn splitmix64(seed: u64) -> u64 {
    let mut z = seed.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of trajectory `index` under `master_seed`.
pub fn trajectory_seed(master_seed: u64, index: u64) -> u64 {
    splitmix64(master_seed ^ splitmix64(index.wrapping_add(1)))
}

/// Integrate the full ensemble in parallel.
///
/// Results are independent of execution order and thread count: trajectory
/// k derives its generator from (master_seed, k) alone and writes only its
/// own slot.
pub fn run_ensemble(
    p: &ModelParams,
    schedule: &RunSchedule,
    init: &InitialState,
) -> Result<EnsembleResult, EngineError> {
    schedule.validate()?;
    let regularizer = Regularizer::with_eps(
        Spin12PointFamily::new(0.0),
        schedule.z_max,
        schedule.nu_max,
        schedule.eps,
    );

    let outcomes: Vec<Result<TrajectoryRecord, EngineError>> = (0..schedule.trajectories)
        .into_par_iter()
        .map(|k| {
            let seed = trajectory_seed(schedule.master_seed, k as u64);
            let mut rng = Pcg64Mcg::seed_from_u64(seed);
            let start = initial_state_with(init, p, &mut rng, Some(&regularizer))?;
            // the trajectory generator continues from the same stream the
            // initial draw consumed
            run_trajectory_with_rng(p, schedule, &mut rng, &start, &regularizer)
        })
        .collect();

    let mut records = Vec::with_capacity(outcomes.len());
    let mut abort_reasons = Vec::new();
    for (k, outcome) in outcomes.into_iter().enumerate() {
        match outcome {
            Ok(rec) => records.push(Some(rec)),
            Err(e) => {
                abort_reasons.push((k, e.to_string()));
                records.push(None);
            }
        }
    }
    Ok(EnsembleResult {
        times: schedule.t_out.clone(),
        n_sites: p.n,
        records,
        abort_reasons,
    })
}

fn run_trajectory_with_rng(
    p: &ModelParams,
    schedule: &RunSchedule,
    rng: &mut Pcg64Mcg,
    init: &PhaseSpaceState,
    regularizer: &Regularizer,
) -> Result<TrajectoryRecord, EngineError> {
    let mut state = init.clone();
    state.t = 0.0;
    let n_noise = noise_dim_with(p, schedule.noise);
    let mut noise = vec![0.0f64; n_noise];
    let mut record = TrajectoryRecord::default();
    let mut fallback = 0u64;

    for &target in &schedule.t_out {
        while target - state.t > 1e-12 {
            let step = schedule.dt.min(target - state.t);
            for xi in noise.iter_mut() {
                *xi = rng.sample(StandardNormal);
            }
            state = em_step_with(&state, p, step, &noise, schedule.noise).map_err(|e| match e {
                EngineError::NonFinite { t } => EngineError::Aborted {
                    t,
                    site: 0,
                    reason: "non-finite state".into(),
                },
                other => other,
            })?;
            if step < schedule.dt {
                state.t = target;
            }
            regularize(&mut state, schedule, regularizer, rng, &mut fallback)?;
        }
        record.samples.push(TrajectorySample {
            t: target,
            psi: state.psi.clone(),
            phi: state.phi.clone(),
            jumps: state.total_jumps(),
            fallback_jumps: fallback,
        });
    }
    Ok(record)
}
