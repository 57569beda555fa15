//! Bit-stable CSV and JSON serialization.
//!
//! Floats are written with 17 significant digits, enough for exact f64
//! round trips, so identical configurations produce byte-identical series
//! files at any thread count.

use std::io::Write;
use std::path::Path;

use positivep::ObservableSeries;

pub fn fmt_f64(x: f64) -> String {
    if x.is_nan() {
        "nan".to_string()
    } else {
        format!("{:.16e}", x)
    }
}

pub const SERIES_HEADER: &str = "t,Sx_mean,Sx_se,Sy_mean,Sy_se,Sz_mean,Sz_se,\
dSx_mean,dSx_se,dSy_mean,dSy_se,dSz_mean,dSz_se,jumps_mean";

/// Stochastic series CSV in the fixed column order.
pub fn series_csv(series: &ObservableSeries) -> String {
    let mut out = String::with_capacity(series.times.len() * 256);
    out.push_str(SERIES_HEADER);
    out.push('\n');
    for (ti, &t) in series.times.iter().enumerate() {
        let mut row = vec![fmt_f64(t)];
        for ax in 0..3 {
            row.push(fmt_f64(series.s[ax].mean[ti]));
            row.push(fmt_f64(series.s[ax].se[ti]));
        }
        for ax in 0..3 {
            row.push(fmt_f64(series.ds[ax].mean[ti]));
            row.push(fmt_f64(series.ds[ax].se[ti]));
        }
        row.push(fmt_f64(series.mean_jumps[ti]));
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

/// Exact reference series: collective first moments and fluctuations.
pub fn exact_csv(times: &[f64], moments: &[[(f64, f64); 3]]) -> String {
    let mut out = String::new();
    out.push_str("t,Sx,Sy,Sz,dSx,dSy,dSz\n");
    for (ti, &t) in times.iter().enumerate() {
        let mut row = vec![fmt_f64(t)];
        for ax in 0..3 {
            row.push(fmt_f64(moments[ti][ax].0));
        }
        for ax in 0..3 {
            let (s, ss) = moments[ti][ax];
            row.push(fmt_f64(ss - s * s));
        }
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

/// Per-time deviations of the stochastic means from the exact reference in
/// units of the standard error.
pub fn zscores_csv(
    series: &ObservableSeries,
    moments: &[[(f64, f64); 3]],
) -> (String, f64, f64) {
    let mut out = String::new();
    out.push_str("t,zSx,zSy,zSz,zdSx,zdSy,zdSz\n");
    let mut max_s: f64 = 0.0;
    let mut max_ds: f64 = 0.0;
    for (ti, &t) in series.times.iter().enumerate() {
        let mut row = vec![fmt_f64(t)];
        for ax in 0..3 {
            let z = (series.s[ax].mean[ti] - moments[ti][ax].0)
                / series.s[ax].se[ti].max(f64::MIN_POSITIVE);
            if ti > 0 {
                max_s = max_s.max(z.abs());
            }
            row.push(fmt_f64(z));
        }
        for ax in 0..3 {
            let (s, ss) = moments[ti][ax];
            let z = (series.ds[ax].mean[ti] - (ss - s * s))
                / series.ds[ax].se[ti].max(f64::MIN_POSITIVE);
            if ti > 0 {
                max_ds = max_ds.max(z.abs());
            }
            row.push(fmt_f64(z));
        }
        out.push_str(&row.join(","));
        out.push('\n');
    }
    (out, max_s, max_ds)
}

pub fn write_file(path: &Path, contents: &str) -> std::io::Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    let mut f = std::fs::File::create(path)?;
    f.write_all(contents.as_bytes())
}
