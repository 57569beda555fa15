//! Phase-space simulation of open quantum spin chains.
//!
//! The crate unifies discrete and continuous quasiprobability
//! representations and uses them to integrate the positive-P stochastic
//! equations of a dissipative long-range transverse-field Ising chain:
//!
//! - [`kernels`]: discrete phase-point operators for any Hilbert dimension,
//!   the spin-1/2 tetrahedron family, SU(2) kernels and Weyl symbols;
//! - [`model`]: chain parameters, Lindblad channels and the sparse
//!   Liouvillian over vectorized density matrices;
//! - [`fokker_planck`]: the drift vector and diffusion matrix of the
//!   equivalent Fokker-Planck equation, with a finite-difference generator
//!   consistency oracle;
//! - [`engine`]: Euler-Maruyama integration of the Ito equations with
//!   deterministic seeding, parallel ensembles and projection-based
//!   regularization of runaway trajectories;
//! - [`projection`]: expansion of a positive-P kernel over discrete
//!   tetrahedron pairs and sampling of replacement phase-space points;
//! - [`exact`]: dense Runge-Kutta integration of the Lindblad equation as
//!   the small-system ground truth;
//! - [`observables`]: phase-space observable functions and ensemble
//!   reductions to collective-spin means, variances and error bars.

pub mod engine;
pub mod exact;
pub mod fokker_planck;
pub mod kernels;
pub mod linalg;
pub mod model;
pub mod nnls;
pub mod observables;
pub mod projection;

pub use num_complex::Complex64 as C64;

pub use engine::{
    em_step, em_step_with, factorize_diffusion, initial_state, initial_state_with, noise_dim,
    noise_dim_with,
    run_ensemble, run_trajectory, trajectory_seed, EngineError, EnsembleResult, InitialState,
    NoiseFactorization, NoiseTreatment, PhaseSpaceState, RunSchedule, TrajectoryRecord,
    TrajectorySample, DEFAULT_EPS, DEFAULT_NU_MAX, DEFAULT_Z_MAX,
};
pub use exact::{evolve_exact, expectation, DensityMatrix, ExactError, PauliAxis, PauliString};
pub use fokker_planck::{
    diffusion, drift, drift_diffusion, verify_generator, DriftDiffusion, FpError, GeneratorOracle,
    GeneratorReport, PairTerm,
};
pub use kernels::{
    coherent_projector, extended_kernel, positive_p_matrix, product_kernel, reconstruct,
    su2_kernel, weyl_symbol,
    DiscreteWeights, KernelError, KernelOrdering, PhasePointSet, PositivePKernel,
    Spin12PointFamily, UnitarySet,
};
pub use model::{
    build_liouvillian, hamiltonian, jump_channels, kac_norm, Liouvillian, ModelError, ModelParams,
};
pub use observables::{
    collective_estimates, phase_observable, phase_observable_with, ObservableSeries, SeriesStat,
    SigmaYConvention,
};
pub use projection::{
    expand_kernel, kernel_norm, projection_triggers, sample_projection, should_project,
    DiscreteExpansion, ProjectionError, Regularizer,
};
