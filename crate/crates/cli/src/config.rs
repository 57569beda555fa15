//! Run configuration: CLI flags, optional flat key-value config file, and
//! validation against the engine's invariants.

use clap::Parser;
use serde::Serialize;

use positivep::{EngineError, ModelError, ModelParams, NoiseTreatment, RunSchedule};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Validate,
    Exact,
    Simulate,
    Compare,
}

impl Mode {
    pub fn label(self) -> &'static str {
        match self {
            Mode::Validate => "validate",
            Mode::Exact => "exact",
            Mode::Simulate => "simulate",
            Mode::Compare => "compare",
        }
    }
}

/// Flag set shared by every subcommand; a config file holds the same
/// tokens (`--n 5 --alpha 1.5 ...`) and explicit CLI flags override it.
#[derive(Debug, Clone, Parser, Serialize)]
pub struct ConfigArgs {
    /// Flat key-value config file with the same flags as the CLI.
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<std::path::PathBuf>,

    /// Number of chain sites.
    #[arg(long)]
    pub n: Option<usize>,
    /// Interaction range exponent.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Transverse field.
    #[arg(long)]
    pub h: Option<f64>,
    /// Pump rate at the first site.
    #[arg(long)]
    pub gamma1: Option<f64>,
    /// Decay rate at the first site.
    #[arg(long)]
    pub gamma2: Option<f64>,
    /// First pump rate at the last site.
    #[arg(long)]
    pub gamma3: Option<f64>,
    /// Second pump rate at the last site (decay with --l4-minus).
    #[arg(long)]
    pub gamma4: Option<f64>,
    /// Bulk dephasing rate.
    #[arg(long, name = "gammaD")]
    pub gamma_d: Option<f64>,
    /// Treat the fourth Lindblad channel as decay instead of pump.
    #[arg(long)]
    pub l4_minus: bool,

    /// Final time.
    #[arg(long)]
    pub tmax: Option<f64>,
    /// Number of uniformly spaced output times spanning [0, tmax].
    #[arg(long)]
    pub points: Option<usize>,
    /// Integrator step.
    #[arg(long)]
    pub dt: Option<f64>,
    /// Trajectory count.
    #[arg(long)]
    pub trajectories: Option<usize>,
    /// Master seed; trajectory k derives its generator from (seed, k).
    #[arg(long)]
    pub seed: Option<u64>,
    /// Divergence threshold on |psi|, |phi|.
    #[arg(long)]
    pub zmax: Option<f64>,
    /// Pole margin on |1 + psi phi|.
    #[arg(long)]
    pub eps: Option<f64>,
    /// Kernel-norm trigger (effectively disabled by default).
    #[arg(long)]
    pub numax: Option<f64>,
    /// Drop the interaction noise terms, keeping only their drift (the
    /// long-time semiclassical treatment).
    #[arg(long)]
    pub semiclassical_interaction: bool,

    /// Initial state: coherent-x (point mass), discrete-x (per-site
    /// discrete expansion of the x kernel) or discrete-mixed (maximally
    /// mixed sites sampled at s = +1).
    #[arg(long, default_value = "coherent-x")]
    pub init: String,
    /// Use the printed sign convention for the sigma^y symbol.
    #[arg(long)]
    pub sigma_y_printed: bool,
    /// Integrator step of the exact reference solver.
    #[arg(long)]
    pub exact_dt: Option<f64>,

    /// Output path base; `<out>.csv`, and for compare also
    /// `<out>.exact.csv` and `<out>.zscores.csv`, plus `<out>.meta.json`.
    #[arg(long)]
    pub out: Option<std::path::PathBuf>,
}

impl ConfigArgs {
    /// Later sources win field-by-field; boolean flags are sticky.
    pub fn merge_over(mut self, base: ConfigArgs) -> ConfigArgs {
        macro_rules! take {
            ($field:ident) => {
                if self.$field.is_none() {
                    self.$field = base.$field;
                }
            };
        }
        take!(n);
        take!(alpha);
        take!(h);
        take!(gamma1);
        take!(gamma2);
        take!(gamma3);
        take!(gamma4);
        take!(gamma_d);
        take!(tmax);
        take!(points);
        take!(dt);
        take!(trajectories);
        take!(seed);
        take!(zmax);
        take!(eps);
        take!(numax);
        take!(exact_dt);
        take!(out);
        self.l4_minus |= base.l4_minus;
        self.semiclassical_interaction |= base.semiclassical_interaction;
        self.sigma_y_printed |= base.sigma_y_printed;
        if self.init == "coherent-x" && base.init != "coherent-x" {
            self.init = base.init;
        }
        self
    }

    /// Parse a flat config file containing the same `--flag value` tokens.
    pub fn from_file(path: &std::path::Path) -> Result<ConfigArgs, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::Io(path.display().to_string(), e))?;
        let tokens: Vec<String> = std::iter::once("config".to_string())
            .chain(text.split_whitespace().map(str::to_string))
            .collect();
        ConfigArgs::try_parse_from(tokens).map_err(|e| ConfigError::File(e.to_string()))
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config file {0}: {1}")]
    Io(String, std::io::Error),
    #[error("config file: {0}")]
    File(String),
    #[error("invalid field {field}: {message}")]
    Invalid { field: &'static str, message: String },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Engine(#[from] EngineError),
}

/// Fully resolved run configuration.
#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub mode: &'static str,
    pub n: usize,
    pub alpha: f64,
    pub h: f64,
    pub gamma1: f64,
    pub gamma2: f64,
    pub gamma3: f64,
    pub gamma4: f64,
    pub gamma_d: f64,
    pub l4_minus: bool,
    pub j_kac: f64,
    pub tmax: f64,
    pub points: usize,
    pub dt: f64,
    pub trajectories: usize,
    pub seed: u64,
    pub zmax: f64,
    pub eps: f64,
    pub numax: f64,
    pub semiclassical_interaction: bool,
    pub init: String,
    pub sigma_y_printed: bool,
    pub exact_dt: f64,
    #[serde(skip)]
    pub out: Option<std::path::PathBuf>,
}

impl RunConfig {
    /// Resolve defaults (the reference chain parameters) and validate.
    pub fn resolve(mode: Mode, args: ConfigArgs) -> Result<RunConfig, ConfigError> {
        let args = if let Some(path) = &args.config {
            let from_file = ConfigArgs::from_file(path)?;
            args.clone().merge_over(from_file)
        } else {
            args
        };
        let n = args.n.unwrap_or(5);
        let config = RunConfig {
            mode: mode.label(),
            n,
            alpha: args.alpha.unwrap_or(1.5),
            h: args.h.unwrap_or(1.0),
            gamma1: args.gamma1.unwrap_or(0.2),
            gamma2: args.gamma2.unwrap_or(0.02),
            gamma3: args.gamma3.unwrap_or(0.1),
            gamma4: args.gamma4.unwrap_or(0.05),
            gamma_d: args.gamma_d.unwrap_or(0.001),
            l4_minus: args.l4_minus,
            j_kac: 0.0, // filled below from the validated params
            tmax: args.tmax.unwrap_or(20.0),
            points: args.points.unwrap_or(200),
            dt: args.dt.unwrap_or(1e-3),
            trajectories: args.trajectories.unwrap_or(1000),
            seed: args.seed.unwrap_or(1),
            zmax: args.zmax.unwrap_or(positivep::DEFAULT_Z_MAX),
            eps: args.eps.unwrap_or(positivep::DEFAULT_EPS),
            numax: args.numax.unwrap_or(positivep::DEFAULT_NU_MAX),
            semiclassical_interaction: args.semiclassical_interaction,
            init: args.init,
            sigma_y_printed: args.sigma_y_printed,
            exact_dt: args.exact_dt.unwrap_or(2e-3),
            out: args.out,
        };
        let params = config.model_params()?;
        let mut config = config;
        config.j_kac = params.j_kac;
        if !["coherent-x", "discrete-x", "discrete-mixed"].contains(&config.init.as_str()) {
            return Err(ConfigError::Invalid {
                field: "init",
                message: format!(
                    "{} (expected coherent-x, discrete-x or discrete-mixed)",
                    config.init
                ),
            });
        }
        if matches!(mode, Mode::Exact | Mode::Compare) && config.n > 8 {
            return Err(ConfigError::Invalid {
                field: "n",
                message: format!("{} exceeds the dense-oracle limit of 8", config.n),
            });
        }
        config.schedule()?.validate()?;
        Ok(config)
    }

    pub fn model_params(&self) -> Result<ModelParams, ModelError> {
        Ok(ModelParams::new(
            self.n,
            self.alpha,
            self.h,
            [self.gamma1, self.gamma2, self.gamma3, self.gamma4],
            self.gamma_d,
        )?
        .with_l4_minus(self.l4_minus))
    }

    pub fn schedule(&self) -> Result<RunSchedule, ConfigError> {
        let mut schedule = RunSchedule::uniform(
            self.tmax,
            self.points,
            self.dt,
            self.trajectories,
            self.seed,
        );
        schedule.z_max = self.zmax;
        schedule.eps = self.eps;
        schedule.nu_max = self.numax;
        schedule.noise = if self.semiclassical_interaction {
            NoiseTreatment::SemiclassicalInteraction
        } else {
            NoiseTreatment::Full
        };
        Ok(schedule)
    }

    /// The flat key-value file body that reproduces this configuration.
    pub fn to_config_file(&self) -> String {
        let mut s = String::new();
        use std::fmt::Write;
        let _ = write!(
            s,
            "--n {} --alpha {} --h {} --gamma1 {} --gamma2 {} --gamma3 {} --gamma4 {} --gammaD {}",
            self.n, self.alpha, self.h, self.gamma1, self.gamma2, self.gamma3, self.gamma4,
            self.gamma_d
        );
        let _ = write!(
            s,
            " --tmax {} --points {} --dt {} --trajectories {} --seed {} --zmax {} --eps {} --numax {} --exact-dt {} --init {}",
            self.tmax, self.points, self.dt, self.trajectories, self.seed, self.zmax, self.eps,
            self.numax, self.exact_dt, self.init
        );
        if self.l4_minus {
            s.push_str(" --l4-minus");
        }
        if self.semiclassical_interaction {
            s.push_str(" --semiclassical-interaction");
        }
        if self.sigma_y_printed {
            s.push_str(" --sigma-y-printed");
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn args(tokens: &[&str]) -> ConfigArgs {
        ConfigArgs::try_parse_from(std::iter::once("t").chain(tokens.iter().copied())).unwrap()
    }

    #[test]
    fn defaults_are_the_reference_parameters() {
        let config = RunConfig::resolve(Mode::Simulate, args(&[])).unwrap();
        assert_eq!(config.n, 5);
        assert_eq!(config.alpha, 1.5);
        assert_eq!(config.h, 1.0);
        assert_eq!(config.gamma1, 0.2);
        assert_eq!(config.gamma2, 0.02);
        assert_eq!(config.gamma3, 0.1);
        assert_eq!(config.gamma4, 0.05);
        assert_eq!(config.gamma_d, 0.001);
        assert_eq!(config.points, 200);
        assert!(!config.l4_minus);
    }

    #[test]
    fn cli_overrides_file() {
        let dir = std::env::temp_dir().join("positivep-config-test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("base.cfg");
        std::fs::write(&path, "--n 3 --alpha 2.5 --seed 77").unwrap();
        let mut a = args(&["--alpha", "1.2"]);
        a.config = Some(path);
        let config = RunConfig::resolve(Mode::Simulate, a).unwrap();
        assert_eq!(config.n, 3); // from file
        assert_eq!(config.alpha, 1.2); // CLI wins
        assert_eq!(config.seed, 77);
    }

    #[test]
    fn config_round_trips_through_file_format() {
        let config = RunConfig::resolve(
            Mode::Simulate,
            args(&["--n", "4", "--gamma2", "0.5", "--l4-minus", "--trajectories", "17"]),
        )
        .unwrap();
        let body = config.to_config_file();
        let dir = std::env::temp_dir().join("positivep-config-test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("round.cfg");
        std::fs::write(&path, &body).unwrap();
        let mut fresh = args(&[]);
        fresh.config = Some(path);
        let back = RunConfig::resolve(Mode::Simulate, fresh).unwrap();
        assert_eq!(back.n, config.n);
        assert_eq!(back.gamma2, config.gamma2);
        assert_eq!(back.l4_minus, config.l4_minus);
        assert_eq!(back.trajectories, config.trajectories);
        assert_eq!(back.to_config_file(), body);
    }

    #[test]
    fn oracle_scale_is_rejected_for_compare() {
        let got = RunConfig::resolve(Mode::Compare, args(&["--n", "9"]));
        assert!(matches!(got, Err(ConfigError::Invalid { field: "n", .. })));
        RunConfig::resolve(Mode::Simulate, args(&["--n", "9"])).unwrap();
    }

    #[test]
    fn bad_init_is_rejected_with_field_name() {
        let got = RunConfig::resolve(Mode::Simulate, args(&["--init", "nonsense"]));
        assert!(matches!(got, Err(ConfigError::Invalid { field: "init", .. })));
    }
}
