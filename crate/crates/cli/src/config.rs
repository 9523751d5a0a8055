//! Run configuration: command-line flags merged over an optional key=value file.

use std::path::{Path, PathBuf};

use clap::Args;
use nurs::{Kernel, NursParams, Strategy, TruncationPolicy};

use crate::error::{config, CliError, Result};

/// Options shared by every subcommand. Each key can also be given in the
/// `--config` file as `key = value`, using the flag name without dashes.
#[derive(Args, Clone, Debug, Default, PartialEq)]
pub struct Opts {
    /// gaussian:diag=v1,v2,... | gaussian:dim=d | gaussian:cov=PATH | funnel:d=k
    #[arg(long)]
    pub target: Option<String>,
    /// nurs | nurs-progressive | rwm | har-gaussian | inf-orbit-uniform | inf-orbit-adjusted
    #[arg(long)]
    pub kernel: Option<String>,
    /// Lattice spacing (NURS, infinite-orbit) or step size (RWM)
    #[arg(long, allow_hyphen_values = true)]
    pub h: Option<f64>,
    /// No-Underrun threshold; 0 disables the stopping rule
    #[arg(long, allow_hyphen_values = true)]
    pub eps: Option<f64>,
    #[arg(long)]
    pub max_doublings: Option<u32>,
    /// Recorded steps per chain (or draws per experiment)
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long)]
    pub burn_in: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub chains: Option<usize>,
    /// Output directory
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Comma-separated spacings for sweeps
    #[arg(long)]
    pub h_values: Option<String>,
    /// Monte Carlo draws per sweep point
    #[arg(long)]
    pub draws: Option<usize>,
    /// Random states per sweep point
    #[arg(long)]
    pub states: Option<usize>,
    /// Keep every k-th state in scatter output
    #[arg(long)]
    pub thin: Option<usize>,
    /// Comma-separated initial state (default: origin)
    #[arg(long, allow_hyphen_values = true)]
    pub theta0: Option<String>,
    /// Lattice truncation tolerance for infinite-orbit kernels
    #[arg(long)]
    pub tail_tol: Option<f64>,
    /// key=value file; flags take precedence
    #[arg(long)]
    pub config: Option<PathBuf>,
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| config(format!("`{key}`: cannot parse `{value}`")))
}

impl Opts {
    /// Fills unset fields from `key = value` lines. Unknown keys are errors.
    pub fn merge_file_text(&mut self, text: &str, origin: &str) -> Result<()> {
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| config(format!("{origin}:{}: expected key = value", lineno + 1)))?;
            let key = key.trim().replace('_', "-");
            let value = value.trim();
            macro_rules! fill {
                ($field:ident) => {
                    if self.$field.is_none() {
                        self.$field = Some(parse(&key, value)?);
                    }
                };
            }
            match key.as_str() {
                "target" => fill!(target),
                "kernel" => fill!(kernel),
                "h" => fill!(h),
                "eps" => fill!(eps),
                "max-doublings" => fill!(max_doublings),
                "steps" => fill!(steps),
                "burn-in" => fill!(burn_in),
                "seed" => fill!(seed),
                "chains" => fill!(chains),
                "out" => fill!(out),
                "h-values" => fill!(h_values),
                "draws" => fill!(draws),
                "states" => fill!(states),
                "thin" => fill!(thin),
                "theta0" => fill!(theta0),
                "tail-tol" => fill!(tail_tol),
                other => return Err(config(format!("{origin}:{}: unknown key `{other}`", lineno + 1))),
            }
        }
        Ok(())
    }

    pub fn merge_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        self.merge_file_text(&text, &path.display().to_string())
    }

    /// Flags, then the config file, then the given subcommand defaults.
    pub fn resolve(mut self, defaults: &Opts) -> Result<Opts> {
        if let Some(path) = self.config.clone() {
            self.merge_file(&path)?;
        }
        macro_rules! default {
            ($($field:ident),*) => {
                $(if self.$field.is_none() {
                    self.$field = defaults.$field.clone();
                })*
            };
        }
        default!(target, kernel, h, eps, max_doublings, steps, burn_in, seed, chains, out, h_values, draws, states, thin, theta0, tail_tol);
        self.validate()?;
        Ok(self)
    }

    fn validate(&self) -> Result<()> {
        if let Some(h) = self.h {
            if !(h > 0.0 && h.is_finite()) {
                return Err(config(format!("`h` must be finite and > 0, got {h}")));
            }
        }
        if let Some(eps) = self.eps {
            if !(eps >= 0.0 && eps.is_finite()) {
                return Err(config(format!("`eps` must be finite and >= 0, got {eps}")));
            }
        }
        if let Some(m) = self.max_doublings {
            if m > nurs::kernel::MAX_DOUBLINGS_LIMIT {
                return Err(config(format!(
                    "`max-doublings` must be at most {}, got {m}",
                    nurs::kernel::MAX_DOUBLINGS_LIMIT
                )));
            }
        }
        for (name, v) in [("steps", self.steps), ("chains", self.chains), ("draws", self.draws), ("states", self.states), ("thin", self.thin)] {
            if v == Some(0) {
                return Err(config(format!("`{name}` must be positive")));
            }
        }
        if let Some(t) = self.tail_tol {
            if !(t > 0.0 && t < 1.0) {
                return Err(config(format!("`tail-tol` must lie in (0, 1), got {t}")));
            }
        }
        if let Some(list) = &self.h_values {
            for h in parse_f64_list(list, "h-values")? {
                if !(h > 0.0 && h.is_finite()) {
                    return Err(config(format!("`h-values` entries must be > 0, got {h}")));
                }
            }
        }
        if let Some(kernel) = &self.kernel {
            if !KERNELS.contains(&kernel.as_str()) {
                return Err(config(format!("unknown kernel `{kernel}`; expected one of {}", KERNELS.join(", "))));
            }
        }
        Ok(())
    }

    /// The resolved options in the config-file format, so a run can be replayed.
    pub fn to_config_text(&self) -> String {
        let mut lines = Vec::new();
        let mut put = |key: &str, value: Option<String>| {
            if let Some(v) = value {
                lines.push(format!("{key} = {v}"));
            }
        };
        put("target", self.target.clone());
        put("kernel", self.kernel.clone());
        put("h", self.h.map(|x| x.to_string()));
        put("eps", self.eps.map(|x| x.to_string()));
        put("max-doublings", self.max_doublings.map(|x| x.to_string()));
        put("steps", self.steps.map(|x| x.to_string()));
        put("burn-in", self.burn_in.map(|x| x.to_string()));
        put("seed", self.seed.map(|x| x.to_string()));
        put("chains", self.chains.map(|x| x.to_string()));
        put("h-values", self.h_values.clone());
        put("draws", self.draws.map(|x| x.to_string()));
        put("states", self.states.map(|x| x.to_string()));
        put("thin", self.thin.map(|x| x.to_string()));
        put("theta0", self.theta0.clone());
        put("tail-tol", self.tail_tol.map(|x| x.to_string()));
        lines.join("\n")
    }

    pub fn h(&self) -> f64 {
        self.h.expect("defaulted")
    }

    pub fn eps(&self) -> f64 {
        self.eps.expect("defaulted")
    }

    pub fn max_doublings(&self) -> u32 {
        self.max_doublings.expect("defaulted")
    }

    pub fn steps(&self) -> usize {
        self.steps.expect("defaulted")
    }

    pub fn seed(&self) -> u64 {
        self.seed.expect("defaulted")
    }

    pub fn out(&self) -> &Path {
        self.out.as_deref().expect("defaulted")
    }

    pub fn h_values(&self) -> Result<Vec<f64>> {
        parse_f64_list(self.h_values.as_deref().unwrap_or(""), "h-values")
    }

    pub fn theta0(&self, dim: usize) -> Result<Vec<f64>> {
        match &self.theta0 {
            None => Ok(vec![0.0; dim]),
            Some(s) => {
                let v = parse_f64_list(s, "theta0")?;
                if v.len() != dim {
                    return Err(config(format!("`theta0` has {} entries, target has dimension {dim}", v.len())));
                }
                Ok(v)
            }
        }
    }

    pub fn policy(&self) -> TruncationPolicy {
        TruncationPolicy {
            tail_mass_tol: self.tail_tol.unwrap_or(1e-6),
            ..TruncationPolicy::default()
        }
    }

    pub fn nurs_params(&self) -> Result<NursParams> {
        Ok(NursParams::new(self.h(), self.eps(), self.max_doublings())?)
    }

    pub fn kernel(&self) -> Result<Kernel> {
        let nurs = |strategy| -> Result<Kernel> {
            Ok(Kernel::Nurs {
                params: self.nurs_params()?,
                strategy,
            })
        };
        match self.kernel.as_deref().unwrap_or("nurs") {
            "nurs" => nurs(Strategy::default()),
            "nurs-progressive" => nurs(Strategy::Progressive),
            "rwm" => Ok(Kernel::Rwm { step: self.h() }),
            "har-gaussian" => Ok(Kernel::HitAndRunGaussian),
            "inf-orbit-uniform" => Ok(Kernel::InfiniteOrbitUniform {
                spacing: self.h(),
                policy: self.policy(),
            }),
            "inf-orbit-adjusted" => Ok(Kernel::InfiniteOrbitAdjusted {
                spacing: self.h(),
                policy: self.policy(),
            }),
            other => Err(config(format!("unknown kernel `{other}`"))),
        }
    }
}

pub const KERNELS: [&str; 6] = [
    "nurs",
    "nurs-progressive",
    "rwm",
    "har-gaussian",
    "inf-orbit-uniform",
    "inf-orbit-adjusted",
];

pub fn parse_f64_list(s: &str, what: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<f64>().map_err(|_| config(format!("`{what}`: `{t}` is not a number"))))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_file() {
        let mut o = Opts {
            h: Some(0.5),
            ..Opts::default()
        };
        o.merge_file_text("h = 0.1\nsteps=30 # comment\n\nmax_doublings = 4\n", "cfg").unwrap();
        assert_eq!(o.h, Some(0.5));
        assert_eq!(o.steps, Some(30));
        assert_eq!(o.max_doublings, Some(4));
    }

    #[test]
    fn unknown_and_malformed_keys_rejected() {
        let mut o = Opts::default();
        assert!(o.merge_file_text("stepz = 3\n", "cfg").is_err());
        assert!(o.merge_file_text("steps 3\n", "cfg").is_err());
        assert!(o.merge_file_text("steps = three\n", "cfg").is_err());
    }

    #[test]
    fn validation_before_running() {
        let bad = [
            Opts { h: Some(0.0), ..Opts::default() },
            Opts { eps: Some(-1.0), ..Opts::default() },
            Opts { steps: Some(0), ..Opts::default() },
            Opts { max_doublings: Some(99), ..Opts::default() },
            Opts { kernel: Some("hmc".into()), ..Opts::default() },
            Opts { h_values: Some("0.1,-2".into()), ..Opts::default() },
            Opts { tail_tol: Some(1.5), ..Opts::default() },
        ];
        for o in bad {
            assert!(o.clone().resolve(&Opts::default()).is_err(), "{o:?}");
        }
    }

    #[test]
    fn theta0_dimension_checked() {
        let o = Opts {
            theta0: Some("1,2".into()),
            ..Opts::default()
        };
        assert_eq!(o.theta0(2).unwrap(), vec![1.0, 2.0]);
        assert!(o.theta0(3).is_err());
    }
}
