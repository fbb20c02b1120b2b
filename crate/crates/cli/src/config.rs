//! `key = value` experiment configuration with `#` comments.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use pdncg_core::solver::{DualInit, Preconditioning, SolverConfig};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`, got `{text}`")]
    Syntax { line: usize, text: String },
    #[error("unknown configuration key `{0}`")]
    UnknownKey(String),
    #[error("invalid value `{value}` for `{key}`: {reason}")]
    Value {
        key: String,
        value: String,
        reason: String,
    },
    #[error("flag `{0}` has no value")]
    MissingValue(String),
    #[error("cannot read config {path}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProblemKind {
    ItvPhantom,
    ItvImageFile,
    L1AnalysisTiny,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub problem: ProblemKind,
    /// Image side for iTV problems.
    pub p: usize,
    /// Signal length for the tiny analysis problem.
    pub n: usize,
    pub image: Option<PathBuf>,
    /// `m / n`
    pub ratio: f64,
    /// Measurement SNR in dB; `inf` disables noise.
    pub noise_db: f64,
    pub c: f64,
    pub mu: f64,
    pub continuation: bool,
    pub seed: u64,
    pub out: PathBuf,
    pub solver: SolverConfig,
    /// Optional PSNR (images) or SNR stop target in dB.
    pub target_db: Option<f64>,
    /// Smoothing parameters visited by `sweep`.
    pub sweep_mu: Vec<f64>,
    pub workers: usize,
    /// Relative error at which `ablation` runs stop.
    pub ablation_tol: f64,
    /// Gradient tolerance of the ablation reference solve.
    pub reference_grad_tol: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            problem: ProblemKind::ItvPhantom,
            p: 64,
            n: 32,
            image: None,
            ratio: 0.25,
            noise_db: 20.0,
            c: 2.29e-2,
            mu: 1e-5,
            continuation: true,
            seed: 1,
            out: PathBuf::from("out"),
            solver: SolverConfig {
                seed: 1,
                ..SolverConfig::default()
            },
            target_db: None,
            sweep_mu: vec![1e-2, 1e-4, 1e-7, 1e-10],
            workers: 1,
            ablation_tol: 0.1,
            reference_grad_tol: 1e-10,
        }
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, ConfigError>
where
    T::Err: std::fmt::Display,
{
    value.parse::<T>().map_err(|e| ConfigError::Value {
        key: key.into(),
        value: value.into(),
        reason: e.to_string(),
    })
}

fn parse_bool(key: &str, value: &str) -> Result<bool, ConfigError> {
    match value {
        "true" | "yes" | "on" | "1" => Ok(true),
        "false" | "no" | "off" | "0" => Ok(false),
        _ => Err(ConfigError::Value {
            key: key.into(),
            value: value.into(),
            reason: "expected true or false".into(),
        }),
    }
}

fn choice<T: Copy>(key: &str, value: &str, options: &[(&str, T)]) -> Result<T, ConfigError> {
    options
        .iter()
        .find(|(name, _)| *name == value)
        .map(|(_, v)| *v)
        .ok_or_else(|| ConfigError::Value {
            key: key.into(),
            value: value.into(),
            reason: format!(
                "expected one of {}",
                options.iter().map(|(n, _)| *n).collect::<Vec<_>>().join(", ")
            ),
        })
}

impl ExperimentConfig {
    /// Applies one `key = value` setting. Dashes and underscores in keys are
    /// interchangeable.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let key = key.trim().replace('-', "_");
        let value = value.trim();
        let k = key.as_str();
        match k {
            "problem" => {
                self.problem = choice(
                    k,
                    value,
                    &[
                        ("itv-phantom", ProblemKind::ItvPhantom),
                        ("itv-image-file", ProblemKind::ItvImageFile),
                        ("l1-analysis-tiny", ProblemKind::L1AnalysisTiny),
                    ],
                )?
            }
            "p" => self.p = parse_num(k, value)?,
            "n" => self.n = parse_num(k, value)?,
            "image" => self.image = Some(PathBuf::from(value)),
            "ratio" => {
                self.ratio = parse_num(k, value)?;
                if !(self.ratio > 0.0 && self.ratio <= 1.0) {
                    return Err(ConfigError::Value {
                        key: key.clone(),
                        value: value.into(),
                        reason: "sampling ratio must lie in (0, 1]".into(),
                    });
                }
            }
            "noise_db" => self.noise_db = parse_num(k, value)?,
            "c" => self.c = parse_num(k, value)?,
            "mu" => self.mu = parse_num(k, value)?,
            "continuation" => self.continuation = parse_bool(k, value)?,
            "seed" => {
                self.seed = parse_num(k, value)?;
                self.solver.seed = self.seed;
            }
            "out" => self.out = PathBuf::from(value),
            "target_db" => self.target_db = Some(parse_num(k, value)?),
            "sweep_mu" => {
                self.sweep_mu = value
                    .split(',')
                    .map(|v| parse_num(k, v.trim()))
                    .collect::<Result<_, _>>()?
            }
            "workers" => self.workers = parse_num::<usize>(k, value)?.max(1),
            "ablation_tol" => self.ablation_tol = parse_num(k, value)?,
            "reference_grad_tol" => self.reference_grad_tol = parse_num(k, value)?,
            "eta" => self.solver.eta = parse_num(k, value)?,
            "tau1" => self.solver.tau1 = parse_num(k, value)?,
            "tau2" => self.solver.tau2 = parse_num(k, value)?,
            "max_backtracks" => self.solver.max_backtracks = parse_num(k, value)?,
            "max_outer" => self.solver.max_outer = parse_num(k, value)?,
            "max_cg" => self.solver.max_cg = parse_num(k, value)?,
            "rho" => self.solver.rho = parse_num(k, value)?,
            "precond_activation_mu" => self.solver.precond_activation_mu = parse_num(k, value)?,
            "grad_tol" => self.solver.grad_tol = parse_num(k, value)?,
            "stage_grad_tol" => self.solver.stage_grad_tol = parse_num(k, value)?,
            "preconditioning" => {
                self.solver.preconditioning = choice(
                    k,
                    value,
                    &[
                        ("auto", Preconditioning::Auto),
                        ("always", Preconditioning::Always),
                        ("never", Preconditioning::Never),
                    ],
                )?
            }
            "dual_init" => {
                self.solver.dual_init = choice(
                    k,
                    value,
                    &[("carry", DualInit::Carry), ("consistent", DualInit::Consistent)],
                )?
            }
            _ => return Err(ConfigError::UnknownKey(key)),
        }
        Ok(())
    }

    /// Applies every setting of a config text in order.
    pub fn apply_text(&mut self, text: &str) -> Result<(), ConfigError> {
        for (k, v) in parse_text(text)? {
            self.set(&k, &v)?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<(), ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        self.apply_text(&text)
    }

    /// Applies `--key value` pairs (or `--key=value`).
    pub fn apply_flags(&mut self, args: &[String]) -> Result<(), ConfigError> {
        let mut it = args.iter();
        while let Some(arg) = it.next() {
            let Some(flag) = arg.strip_prefix("--") else {
                return Err(ConfigError::Syntax {
                    line: 0,
                    text: arg.clone(),
                });
            };
            if let Some((k, v)) = flag.split_once('=') {
                self.set(k, v)?;
            } else {
                let v = it
                    .next()
                    .ok_or_else(|| ConfigError::MissingValue(flag.to_string()))?;
                self.set(flag, v)?;
            }
        }
        Ok(())
    }

    /// The effective settings, one `key = value` per line.
    pub fn render(&self) -> String {
        let s = &self.solver;
        let problem = match self.problem {
            ProblemKind::ItvPhantom => "itv-phantom",
            ProblemKind::ItvImageFile => "itv-image-file",
            ProblemKind::L1AnalysisTiny => "l1-analysis-tiny",
        };
        let mut m = BTreeMap::new();
        m.insert("problem", problem.to_string());
        m.insert("p", self.p.to_string());
        m.insert("n", self.n.to_string());
        if let Some(img) = &self.image {
            m.insert("image", img.display().to_string());
        }
        m.insert("ratio", self.ratio.to_string());
        m.insert("noise_db", self.noise_db.to_string());
        m.insert("c", self.c.to_string());
        m.insert("mu", self.mu.to_string());
        m.insert("continuation", self.continuation.to_string());
        m.insert("seed", self.seed.to_string());
        m.insert("out", self.out.display().to_string());
        m.insert(
            "sweep_mu",
            self.sweep_mu.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(", "),
        );
        m.insert("workers", self.workers.to_string());
        m.insert("ablation_tol", self.ablation_tol.to_string());
        m.insert("reference_grad_tol", self.reference_grad_tol.to_string());
        if let Some(t) = self.target_db {
            m.insert("target_db", t.to_string());
        }
        m.insert("eta", s.eta.to_string());
        m.insert("tau1", s.tau1.to_string());
        m.insert("tau2", s.tau2.to_string());
        m.insert("max_backtracks", s.max_backtracks.to_string());
        m.insert("max_outer", s.max_outer.to_string());
        m.insert("max_cg", s.max_cg.to_string());
        m.insert("rho", s.rho.to_string());
        m.insert("precond_activation_mu", s.precond_activation_mu.to_string());
        m.insert("grad_tol", s.grad_tol.to_string());
        m.insert("stage_grad_tol", s.stage_grad_tol.to_string());
        m.insert("preconditioning", format!("{:?}", s.preconditioning).to_lowercase());
        m.insert("dual_init", format!("{:?}", s.dual_init).to_lowercase());
        m.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }
}

/// Splits config text into `(key, value)` pairs, dropping comments.
pub fn parse_text(text: &str) -> Result<Vec<(String, String)>, ConfigError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| ConfigError::Syntax {
            line: i + 1,
            text: raw.to_string(),
        })?;
        if k.trim().is_empty() || v.trim().is_empty() {
            return Err(ConfigError::Syntax {
                line: i + 1,
                text: raw.to_string(),
            });
        }
        out.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_text_with_comments() {
        let mut cfg = ExperimentConfig::default();
        cfg.apply_text("# header\np = 32  # side\nmu=1e-3\n\npreconditioning = never\n")
            .unwrap();
        assert_eq!(cfg.p, 32);
        assert_eq!(cfg.mu, 1e-3);
        assert_eq!(cfg.solver.preconditioning, Preconditioning::Never);
    }

    #[test]
    fn flags_override_and_accept_both_spellings() {
        let mut cfg = ExperimentConfig::default();
        cfg.apply_text("noise_db = 10").unwrap();
        let flags: Vec<String> = ["--noise-db", "inf", "--c=0.5", "--sweep_mu", "1e-2, 1e-3"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        cfg.apply_flags(&flags).unwrap();
        assert!(cfg.noise_db.is_infinite());
        assert_eq!(cfg.c, 0.5);
        assert_eq!(cfg.sweep_mu, vec![1e-2, 1e-3]);
    }

    #[test]
    fn rejects_bad_input() {
        let mut cfg = ExperimentConfig::default();
        assert!(matches!(cfg.apply_text("p 32"), Err(ConfigError::Syntax { line: 1, .. })));
        assert!(matches!(cfg.set("colour", "red"), Err(ConfigError::UnknownKey(_))));
        assert!(cfg.set("ratio", "0").is_err());
        assert!(cfg.set("ratio", "1.5").is_err());
        assert!(cfg.set("p", "many").is_err());
        assert!(cfg.apply_flags(&["--p".to_string()]).is_err());
    }

    #[test]
    fn render_round_trips() {
        let mut cfg = ExperimentConfig::default();
        cfg.apply_text("p = 16\nrho = 0.25\ndual_init = consistent\n").unwrap();
        let mut again = ExperimentConfig::default();
        again.apply_text(&cfg.render()).unwrap();
        assert_eq!(cfg, again);
    }
}
