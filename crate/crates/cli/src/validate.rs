//! Invariant suites behind the `validate` subcommand.
//!
//! Each suite returns its worst observed deviation together with the
//! tolerance it is held to, so the CLI can print one line per suite and
//! the acceptance tests can assert on the same numbers.

use positivep::exact::PauliAxis;
use positivep::kernels::{
    positive_p_matrix, reconstruct, su2_kernel, weyl_symbol, KernelOrdering, PhasePointSet,
    Spin12PointFamily,
};
use positivep::projection::{expand_kernel, kernel_norm, Regularizer, EXPANSION_RESIDUAL_TOL};
use positivep::{
    factorize_diffusion, fokker_planck, linalg, phase_observable, C64, GeneratorOracle,
    ModelParams,
};
use rand::{Rng, SeedableRng};
use rand_pcg::Pcg64Mcg;

#[derive(Debug, Clone)]
pub struct SuiteResult {
    pub name: String,
    pub worst: f64,
    pub tolerance: f64,
    pub detail: String,
}

impl SuiteResult {
    pub fn passed(&self) -> bool {
        self.worst <= self.tolerance
    }

    pub fn line(&self) -> String {
        format!(
            "{:5} {:<44} worst {:>10.3e}  tol {:>8.1e}  {}",
            if self.passed() { "PASS" } else { "FAIL" },
            self.name,
            self.worst,
            self.tolerance,
            self.detail
        )
    }
}

pub fn reference_params(n: usize) -> ModelParams {
    ModelParams::new(n, 1.5, 1.0, [0.2, 0.02, 0.1, 0.05], 0.001).unwrap()
}

/// Properties 1a-4a plus dual-set reconstruction for N in 2..=5.
pub fn kernel_axiom_suite() -> Vec<SuiteResult> {
    let mut results = Vec::new();
    let mut rng = Pcg64Mcg::seed_from_u64(2024);
    for dim in 2..=5usize {
        for ordering in KernelOrdering::ALL {
            let set = PhasePointSet::build(dim, ordering).unwrap();
            let worst = set
                .hermiticity_error()
                .max(set.trace_error())
                .max(set.covariance_error())
                .max(set.traciality_error());
            // reconstruction round trip on a random Hermitian operator
            let a = random_hermitian(dim, &mut rng);
            let back = reconstruct(&a, &set).unwrap();
            let rec = linalg::max_abs_diff(&a, &back);
            results.push(SuiteResult {
                name: format!("kernel axioms N={dim} {ordering}"),
                worst: worst.max(rec),
                tolerance: 1e-10,
                detail: format!("reconstruction {rec:.1e}"),
            });
        }
    }
    results
}

/// The explicit spin-1/2 family: kernel identity and tetrahedron geometry.
pub fn spin12_family_suite() -> Vec<SuiteResult> {
    let mut results = Vec::new();
    for phi_rot in [0.0, std::f64::consts::PI / 7.0, std::f64::consts::PI / 3.0] {
        let family = Spin12PointFamily::new(phi_rot);
        results.push(SuiteResult {
            name: format!("spin-1/2 family phi={phi_rot:.3}"),
            worst: family
                .kernel_identity_error()
                .max(family.tetrahedron_angle_error()),
            tolerance: 1e-12,
            detail: "A = Delta(z); angles arccos(-1/3)".into(),
        });
    }
    results
}

/// Continuous traciality (property 4b) for N = 2 by spherical quadrature.
///
/// Reproduces s-ordered symbols through the kernel overlap with the
/// self-consistent prefactor N / (4 pi): a product Gauss-Legendre x uniform
/// grid integrates tr(Delta^(-s)(z') Delta^(s)(z)) f(z') over the sphere.
pub fn continuous_traciality_suite(nodes: usize) -> Vec<SuiteResult> {
    let (gl_nodes, gl_weights) = linalg::gauss_legendre(nodes);
    let mut rng = Pcg64Mcg::seed_from_u64(7);
    let test_ops: Vec<ndarray::Array2<C64>> = vec![
        linalg::identity(2),
        pauli(PauliAxis::X),
        pauli(PauliAxis::Y),
        pauli(PauliAxis::Z),
        random_hermitian(2, &mut rng),
        random_hermitian(2, &mut rng),
    ];
    let eval_points = [
        C64::new(0.0, 0.0),
        C64::new(0.7, -0.3),
        C64::new(-1.4, 0.9),
    ];
    let mut results = Vec::new();
    for ordering in KernelOrdering::ALL {
        let mut worst = 0.0f64;
        for &z0 in &eval_points {
            let dual = su2_kernel(z0, ordering.dual());
            for op in &test_ops {
                let expected = weyl_symbol(op, &su2_kernel(z0, ordering)).unwrap();
                let mut acc = C64::new(0.0, 0.0);
                for (i, &ct) in gl_nodes.iter().enumerate() {
                    let theta = ct.acos();
                    for k in 0..nodes {
                        let phi = std::f64::consts::TAU * k as f64 / nodes as f64;
                        let z = C64::from_polar((theta / 2.0).tan(), phi);
                        let kernel = su2_kernel(z, ordering);
                        let overlap = linalg::trace(&kernel.dot(&dual));
                        let f = weyl_symbol(op, &kernel).unwrap();
                        // sin(theta) dtheta dphi = dcos(theta) dphi
                        acc += overlap
                            * f
                            * gl_weights[i]
                            * (std::f64::consts::TAU / nodes as f64);
                    }
                }
                let got = acc * 2.0 / (4.0 * std::f64::consts::PI);
                worst = worst.max((got - expected).norm());
            }
        }
        results.push(SuiteResult {
            name: format!("continuous traciality {ordering}"),
            worst,
            tolerance: 1e-6,
            detail: format!("{nodes}x{nodes} quadrature"),
        });
    }
    results
}

/// Generator consistency for n in 1..=3: full parameters and each term
/// family isolated, at `points` random margin-respecting states.
pub fn generator_suite(points: usize) -> Vec<SuiteResult> {
    let mut results = Vec::new();
    let mut rng = Pcg64Mcg::seed_from_u64(99);
    for n in 1..=3usize {
        let cases: Vec<(String, ModelParams)> = vec![
            ("full".into(), reference_params(n)),
            ("full l4-minus".into(), reference_params(n).with_l4_minus(true)),
            ("field only".into(), ModelParams::new(n, 1.5, 1.0, [0.0; 4], 0.0).unwrap()),
            ("interaction only".into(), ModelParams::new(n, 1.5, 0.0, [0.0; 4], 0.0).unwrap()),
            ("pump site 1".into(), ModelParams::new(n, 1.5, 0.0, [0.2, 0.0, 0.0, 0.0], 0.0).unwrap()),
            ("decay site 1".into(), ModelParams::new(n, 1.5, 0.0, [0.0, 0.02, 0.0, 0.0], 0.0).unwrap()),
            ("boundary site n".into(), ModelParams::new(n, 1.5, 0.0, [0.0, 0.0, 0.1, 0.05], 0.0).unwrap()),
            ("dephasing only".into(), ModelParams::new(n, 1.5, 0.0, [0.0; 4], 0.001).unwrap()),
        ];
        for (label, params) in cases {
            let oracle = GeneratorOracle::new(params).unwrap();
            let mut worst = 0.0f64;
            for _ in 0..points {
                let state = fokker_planck::random_margin_state(n, 1.2, 0.1, &mut rng);
                let report = oracle.report(&state, 1e-5).unwrap();
                worst = worst.max(report.residual);
            }
            results.push(SuiteResult {
                name: format!("generator n={n} {label}"),
                worst,
                tolerance: 1e-5,
                detail: format!("{points} random states"),
            });
        }
    }
    results
}

/// Discrete projection: strict expansions where they exist, probability
/// structure everywhere, and replacement norms inside the thresholds.
pub fn projection_suite(samples: usize) -> Vec<SuiteResult> {
    let mut rng = Pcg64Mcg::seed_from_u64(4242);
    let family = Spin12PointFamily::new(0.0);
    let reg = Regularizer::new(
        family.clone(),
        positivep::DEFAULT_Z_MAX,
        positivep::DEFAULT_NU_MAX,
    );

    // strict single-family expansions on states the base family holds
    let mut strict_worst = 0.0f64;
    let mut strict_checked = 0usize;
    while strict_checked < samples / 4 {
        let psi = C64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5) * 2.0;
        let phi = psi.conj() + C64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5) * 0.2;
        match expand_kernel(psi, phi, &family) {
            Ok(exp) => {
                strict_checked += 1;
                strict_worst = strict_worst
                    .max((exp.weight_sum() - 1.0).abs())
                    .max(exp.residual)
                    .max(-exp.weights.iter().cloned().fold(0.0f64, f64::min));
            }
            Err(_) => continue,
        }
    }

    // engine replacements across the trigger classes
    let mut norm_worst = 0.0f64;
    let mut sum_worst = 0.0f64;
    let mut exact_events = 0usize;
    let mut events = 0usize;
    for _ in 0..samples {
        let radius = positivep::DEFAULT_Z_MAX * rng.gen::<f64>();
        let psi = C64::from_polar(radius, rng.gen::<f64>() * std::f64::consts::TAU);
        let phi = C64::from_polar(
            positivep::DEFAULT_Z_MAX * rng.gen::<f64>(),
            rng.gen::<f64>() * std::f64::consts::TAU,
        );
        if (C64::new(1.0, 0.0) + psi * phi).norm() < 1e-6 {
            continue;
        }
        let Ok((weights, pairs, residual)) = reg.replacement_expansion(psi, phi) else {
            continue;
        };
        events += 1;
        if residual <= EXPANSION_RESIDUAL_TOL {
            exact_events += 1;
        }
        sum_worst = sum_worst.max((weights.iter().sum::<f64>() - 1.0).abs());
        let mut cumulative = 0.0;
        let u: f64 = rng.gen();
        let mut pick = pairs.len() - 1;
        for (idx, &w) in weights.iter().enumerate() {
            cumulative += w;
            if cumulative > u {
                pick = idx;
                break;
            }
        }
        let (zp, zq) = pairs[pick];
        norm_worst = norm_worst
            .max(zp.norm() / positivep::DEFAULT_Z_MAX)
            .max(zq.norm() / positivep::DEFAULT_Z_MAX)
            .max(kernel_norm(zp, zq) / positivep::DEFAULT_NU_MAX);
    }

    vec![
        SuiteResult {
            name: "projection strict expansions".into(),
            worst: strict_worst,
            tolerance: EXPANSION_RESIDUAL_TOL.max(1e-8),
            detail: format!("{strict_checked} base-family states"),
        },
        SuiteResult {
            name: "projection weight normalization".into(),
            worst: sum_worst,
            tolerance: 1e-10,
            detail: format!("{events} random states"),
        },
        SuiteResult {
            name: "projection replacement bounds".into(),
            worst: norm_worst,
            tolerance: 1.0,
            detail: format!(
                "exact {exact_events}/{events} ({:.1}%)",
                100.0 * exact_events as f64 / events.max(1) as f64
            ),
        },
    ]
}

/// Noise factorization exactness on random symmetric term lists.
pub fn factorization_suite(samples: usize) -> Vec<SuiteResult> {
    let mut rng = Pcg64Mcg::seed_from_u64(31337);
    let dim = 10usize;
    let mut worst = 0.0f64;
    for _ in 0..samples {
        let terms: Vec<fokker_planck::PairTerm> = (0..10)
            .map(|_| {
                let i = rng.gen_range(0..dim);
                let j = rng.gen_range(0..dim);
                fokker_planck::PairTerm {
                    i: i.min(j),
                    j: i.max(j),
                    coeff: C64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5) * 4.0,
                }
            })
            .collect();
        let fact = factorize_diffusion(&terms);
        worst = worst.max(fact.reconstruction_residual(dim, &terms));
    }
    vec![SuiteResult {
        name: "noise factorization".into(),
        worst,
        tolerance: 1e-12,
        detail: format!("{samples} random term lists"),
    }]
}

/// Phase observables match kernel traces at random pole-free points.
pub fn observable_suite(samples: usize) -> Vec<SuiteResult> {
    let mut rng = Pcg64Mcg::seed_from_u64(55);
    let sigma = [pauli(PauliAxis::X), pauli(PauliAxis::Y), pauli(PauliAxis::Z)];
    let mut worst = 0.0f64;
    let mut checked = 0usize;
    while checked < samples {
        let psi = C64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5) * 4.0;
        let phi = C64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5) * 4.0;
        if (C64::new(1.0, 0.0) + psi * phi).norm() < 0.05 {
            continue;
        }
        checked += 1;
        let lambda = positive_p_matrix(psi, phi).unwrap();
        for (ai, axis) in PauliAxis::ALL.iter().enumerate() {
            let direct = linalg::trace(&sigma[ai].dot(&lambda));
            let symbol = phase_observable(*axis, psi, phi);
            worst = worst.max((direct - symbol).norm() / (1.0 + symbol.norm()));
        }
    }
    vec![SuiteResult {
        name: "phase observables vs kernel traces".into(),
        worst,
        tolerance: 1e-14,
        detail: format!("{samples} pole-free states"),
    }]
}

pub fn all_suites() -> Vec<SuiteResult> {
    let mut results = Vec::new();
    results.extend(kernel_axiom_suite());
    results.extend(spin12_family_suite());
    results.extend(continuous_traciality_suite(64));
    results.extend(generator_suite(50));
    results.extend(projection_suite(1000));
    results.extend(factorization_suite(100));
    results.extend(observable_suite(1000));
    results
}

fn pauli(axis: PauliAxis) -> ndarray::Array2<C64> {
    let z = C64::new(0.0, 0.0);
    let one = C64::new(1.0, 0.0);
    let i = C64::new(0.0, 1.0);
    match axis {
        PauliAxis::X => ndarray::array![[z, one], [one, z]],
        PauliAxis::Y => ndarray::array![[z, -i], [i, z]],
        PauliAxis::Z => ndarray::array![[one, z], [z, -one]],
    }
}

fn random_hermitian(dim: usize, rng: &mut Pcg64Mcg) -> ndarray::Array2<C64> {
    let mut m: ndarray::Array2<C64> = ndarray::Array2::zeros((dim, dim));
    for idx in 0..dim {
        for j in 0..dim {
            m[[idx, j]] = C64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5);
        }
    }
    let md = linalg::dagger(&m);
    (m + md).mapv(|v| v / 2.0)
}
