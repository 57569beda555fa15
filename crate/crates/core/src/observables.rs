//! Phase-space observable functions and ensemble reductions.
//!
//! Per-site observables are the kernel symbols
//!
//!   sigma^x = (psi + phi) / (1 + psi phi),
//!   sigma^y = i (phi - psi) / (1 + psi phi),
//!   sigma^z = (1 - psi phi) / (1 + psi phi),
//!
//! each identical to tr(sigma Lambda(psi, phi)). Collective estimates use
//! the cross-site factorization of the product kernel: for j != k the
//! symbol of sigma_j sigma_k is the product of the site symbols, while
//! on-site squares reduce to the identity.

use crate::engine::EnsembleResult;
use crate::exact::PauliAxis;
use crate::C64;

/// The sigma^y symbol as printed in some references carries the opposite
/// sign of the trace-derived form; exposed for reproduction archaeology.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SigmaYConvention {
    /// i (phi - psi) / (1 + psi phi), equal to tr(sigma^y Lambda).
    #[default]
    TraceDerived,
    /// i (psi - phi) / (1 + psi phi).
    Printed,
}

/// Single-site observable symbol at a phase-space point.
pub fn phase_observable(axis: PauliAxis, psi: C64, phi: C64) -> C64 {
    phase_observable_with(axis, psi, phi, SigmaYConvention::TraceDerived)
}

pub fn phase_observable_with(
    axis: PauliAxis,
    psi: C64,
    phi: C64,
    y_convention: SigmaYConvention,
) -> C64 {
    let one = C64::new(1.0, 0.0);
    let denom = one + psi * phi;
    match axis {
        PauliAxis::X => (psi + phi) / denom,
        PauliAxis::Y => {
            let i = C64::new(0.0, 1.0);
            match y_convention {
                SigmaYConvention::TraceDerived => i * (phi - psi) / denom,
                SigmaYConvention::Printed => i * (psi - phi) / denom,
            }
        }
        PauliAxis::Z => (one - psi * phi) / denom,
    }
}

/// Mean and standard error of one scalar series over the output grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesStat {
    pub mean: Vec<f64>,
    pub se: Vec<f64>,
}

/// Ensemble-reduced collective observables.
///
/// `s[a]` holds S^a = (1/2n) sum_j sigma^a_j; `ds[a]` holds
/// Delta S^a = <S^a S^a> - <S^a>^2 with trajectory-jackknife standard
/// errors. With fewer than two completed trajectories the standard errors
/// are NaN (no error bars).
#[derive(Debug, Clone, PartialEq)]
pub struct ObservableSeries {
    pub times: Vec<f64>,
    pub s: [SeriesStat; 3],
    pub ds: [SeriesStat; 3],
    pub trajectories: usize,
    pub aborted: usize,
    /// Mean cumulative projections per trajectory at each output time.
    pub mean_jumps: Vec<f64>,
}

/// Reduce an ensemble to collective-spin estimates.
pub fn collective_estimates(result: &EnsembleResult, y_convention: SigmaYConvention) -> ObservableSeries {
    let n = result.n_sites;
    let t_count = result.times.len();
    let completed: Vec<_> = result.records.iter().flatten().collect();
    let m = completed.len();

    // per trajectory, per time, per axis: Re S and Re <SS>
    let mut first = vec![[0.0f64; 3]; m * t_count];
    let mut second = vec![[0.0f64; 3]; m * t_count];
    let mut jumps = vec![0.0f64; t_count];

    for (k, record) in completed.iter().enumerate() {
        for (ti, sample) in record.samples.iter().enumerate() {
            jumps[ti] += sample.jumps as f64;
            for (ai, axis) in PauliAxis::ALL.iter().enumerate() {
                let mut sum = C64::new(0.0, 0.0);
                let mut sum_sq = C64::new(0.0, 0.0);
                for j in 0..n {
                    let sym = phase_observable_with(*axis, sample.psi[j], sample.phi[j], y_convention);
                    sum += sym;
                    sum_sq += sym * sym;
                }
                let norm = 2.0 * n as f64;
                let s_est = sum / norm;
                // (1/4n^2) [ (sum_j sigma_j)^2 - sum_j sigma_j^2 + n ]
                let ss_est = (sum * sum - sum_sq + C64::new(n as f64, 0.0)) / (norm * norm);
                first[k * t_count + ti][ai] = s_est.re;
                second[k * t_count + ti][ai] = ss_est.re;
            }
        }
    }

    let nan_series = || SeriesStat { mean: vec![f64::NAN; t_count], se: vec![f64::NAN; t_count] };
    if m == 0 {
        return ObservableSeries {
            times: result.times.clone(),
            s: [nan_series(), nan_series(), nan_series()],
            ds: [nan_series(), nan_series(), nan_series()],
            trajectories: 0,
            aborted: result.aborted(),
            mean_jumps: vec![f64::NAN; t_count],
        };
    }

    let mut s_out = [nan_series(), nan_series(), nan_series()];
    let mut ds_out = [nan_series(), nan_series(), nan_series()];
    for ai in 0..3 {
        let mut mean = vec![0.0; t_count];
        let mut se = vec![f64::NAN; t_count];
        let mut ds_mean = vec![0.0; t_count];
        let mut ds_se = vec![f64::NAN; t_count];
        for ti in 0..t_count {
            let xs: Vec<f64> = (0..m).map(|k| first[k * t_count + ti][ai]).collect();
            let ys: Vec<f64> = (0..m).map(|k| second[k * t_count + ti][ai]).collect();
            let sx: f64 = xs.iter().sum();
            let sy: f64 = ys.iter().sum();
            let mx = sx / m as f64;
            let my = sy / m as f64;
            mean[ti] = mx;
            ds_mean[ti] = my - mx * mx;
            if m >= 2 {
                let var = xs.iter().map(|x| (x - mx) * (x - mx)).sum::<f64>() / (m as f64 - 1.0);
                se[ti] = (var / m as f64).sqrt();
                // jackknife over trajectories for the nonlinear estimator
                let mut jack = Vec::with_capacity(m);
                for k in 0..m {
                    let mx_k = (sx - xs[k]) / (m as f64 - 1.0);
                    let my_k = (sy - ys[k]) / (m as f64 - 1.0);
                    jack.push(my_k - mx_k * mx_k);
                }
                let jbar = jack.iter().sum::<f64>() / m as f64;
                let jvar = jack.iter().map(|j| (j - jbar) * (j - jbar)).sum::<f64>()
                    * (m as f64 - 1.0)
                    / m as f64;
                ds_se[ti] = jvar.sqrt();
            }
        }
        s_out[ai] = SeriesStat { mean, se };
        ds_out[ai] = SeriesStat { mean: ds_mean, se: ds_se };
    }

    ObservableSeries {
        times: result.times.clone(),
        s: s_out,
        ds: ds_out,
        trajectories: m,
        aborted: result.aborted(),
        mean_jumps: jumps.iter().map(|j| j / m as f64).collect(),
    }
}
