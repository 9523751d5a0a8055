//! Parsing of `--target` specifications.

use std::path::Path;

use nalgebra::DMatrix;
use nurs::{make_funnel, Funnel, GaussianSpec, Model};

use crate::error::{config, CliError, Result};

#[allow(clippy::large_enum_variant)]
pub enum TargetSpec {
    Gaussian(GaussianSpec),
    Funnel(Funnel),
}

impl TargetSpec {
    pub fn model(&self) -> Model<'_> {
        match self {
            TargetSpec::Gaussian(g) => Model::Gaussian(g),
            TargetSpec::Funnel(f) => Model::General(f),
        }
    }

    pub fn dim(&self) -> usize {
        self.model().density().dim()
    }

    pub fn gaussian(&self) -> Result<&GaussianSpec> {
        match self {
            TargetSpec::Gaussian(g) => Ok(g),
            TargetSpec::Funnel(_) => Err(config("this subcommand needs a gaussian target")),
        }
    }
}

fn parse_list(s: &str, what: &str) -> Result<Vec<f64>> {
    s.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<f64>().map_err(|_| config(format!("{what}: `{t}` is not a number"))))
        .collect()
}

fn read_covariance(path: &Path) -> Result<DMatrix<f64>> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let rows: Vec<Vec<f64>> = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(|l| parse_list(l, "covariance"))
        .collect::<Result<_>>()?;
    let n = rows.len();
    if n == 0 || rows.iter().any(|r| r.len() != n) {
        return Err(config(format!("{}: covariance must be a square matrix, one row per line", path.display())));
    }
    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

/// `gaussian:diag=v1,v2,...`, `gaussian:dim=d`, `gaussian:cov=path` or `funnel:d=k`.
pub fn parse_target(spec: &str) -> Result<TargetSpec> {
    let (family, rest) = spec
        .split_once(':')
        .ok_or_else(|| config(format!("target `{spec}`: expected family:key=value")))?;
    let (key, value) = rest
        .split_once('=')
        .ok_or_else(|| config(format!("target `{spec}`: expected family:key=value")))?;
    match (family, key) {
        ("gaussian", "diag") => Ok(TargetSpec::Gaussian(GaussianSpec::diagonal(&parse_list(value, "diag")?)?)),
        ("gaussian", "dim") => {
            let d: usize = value.parse().map_err(|_| config(format!("gaussian dim `{value}` is not a count")))?;
            if d == 0 {
                return Err(config("gaussian dim must be positive"));
            }
            Ok(TargetSpec::Gaussian(GaussianSpec::isotropic(d)))
        }
        ("gaussian", "cov") => Ok(TargetSpec::Gaussian(GaussianSpec::new(read_covariance(Path::new(value))?)?)),
        ("funnel", "d") => {
            let d: usize = value.parse().map_err(|_| config(format!("funnel d `{value}` is not a count")))?;
            Ok(TargetSpec::Funnel(make_funnel(d)?))
        }
        _ => Err(config(format!(
            "target `{spec}`: expected gaussian:diag=..., gaussian:dim=..., gaussian:cov=PATH or funnel:d=..."
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_each_family() {
        assert_eq!(parse_target("gaussian:diag=1,0.25").unwrap().dim(), 2);
        assert_eq!(parse_target("gaussian:dim=10").unwrap().dim(), 10);
        assert_eq!(parse_target("funnel:d=10").unwrap().dim(), 11);
    }

    #[test]
    fn rejects_bad_specs() {
        assert!(parse_target("gaussian").is_err());
        assert!(parse_target("gaussian:diag=1,x").is_err());
        assert!(parse_target("gaussian:diag=1,-1").is_err());
        assert!(parse_target("funnel:d=0").is_err());
        assert!(parse_target("cauchy:d=1").is_err());
    }

    #[test]
    fn reads_covariance_file() {
        let dir = std::env::temp_dir().join(format!("nurs-cov-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let p = dir.join("cov.txt");
        std::fs::write(&p, "# 2x2\n2 0.5\n0.5 1\n").unwrap();
        let t = parse_target(&format!("gaussian:cov={}", p.display())).unwrap();
        assert_eq!(t.gaussian().unwrap().covariance()[(0, 1)], 0.5);
        std::fs::write(&p, "1 0\n").unwrap();
        assert!(parse_target(&format!("gaussian:cov={}", p.display())).is_err());
        std::fs::remove_dir_all(&dir).unwrap();
    }
}
