use positivep::exact::collective_moments;
use positivep::*;
use std::time::Instant;

fn main() {
    let n = 5;
    let p = ModelParams::new(n, 1.5, 1.0, [0.2, 0.02, 0.1, 0.05], 0.001).unwrap();
    let rho0 = DensityMatrix::all_x_plus(n);
    let mut schedule = RunSchedule::uniform(20.0, 21, 1e-3, 1000, 1);
    let exact = evolve_exact(&p, &rho0, &schedule.t_out, 2e-3).unwrap();
    let moments: Vec<_> = exact.iter().map(|r| collective_moments(r, n).unwrap()).collect();

    for (label, noise, init) in [
        ("full + discrete-x", NoiseTreatment::Full, InitialState::DiscreteX),
        ("semi + discrete-x", NoiseTreatment::SemiclassicalInteraction, InitialState::DiscreteX),
    ] {
        schedule.noise = noise;
        let t0 = Instant::now();
        let ens = run_ensemble(&p, &schedule, &init).unwrap();
        let series = collective_estimates(&ens, SigmaYConvention::TraceDerived);
        let tj: u64 = ens.records.iter().flatten().map(|r| r.samples.last().unwrap().jumps).sum();
        let mut worst = 0.0f64;
        let mut worst_at = (0, 0);
        let mut over3 = 0;
        for ti in 1..21 {
            for ax in 0..3 {
                let z = ((series.s[ax].mean[ti] - moments[ti][ax].0) / series.s[ax].se[ti].max(1e-12)).abs();
                if z > worst { worst = z; worst_at = (ti, ax); }
                if z > 3.0 { over3 += 1; }
            }
        }
        println!(
            "{label}: {:.0?} aborts {} jumps {:.0} | worst |z| {:.1} (t={},ax{}) over3 {}/60 | Sz(2) {:+.3}+-{:.3} ex {:+.3} | Sx(4) {:+.3}+-{:.3} ex {:+.3}",
            t0.elapsed(), ens.aborted(),
            tj as f64 / ens.completed().max(1) as f64,
            worst, series.times[worst_at.0], worst_at.1, over3,
            series.s[2].mean[2], series.s[2].se[2], moments[2][2].0,
            series.s[0].mean[4], series.s[0].se[4], moments[4][0].0,
        );
    }
}
