//! Flat key=value experiment configuration with dotted section keys.
//!
//! The schema is documented in `configs/SCHEMA.txt`; every value is typed at
//! the access site so errors name the offending field.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use ndarray::Array2;
use thiserror::Error;

use crate::engine::{Algorithm, SolverConfig};
use crate::netgraph::{generate_erdos_renyi, GossipMatrix, NetworkGraph};
use crate::problems::{
    covariance_mle, default_gamma_schedule, elastic_net, logistic_l1, read_libsvm, split_dataset,
    synthetic_classification, LabelRule, ProblemInstance, TraceSign,
};
use crate::stepsize::BudgetRule;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config line {line}: expected `key = value`, got `{text}`")]
    Malformed { line: usize, text: String },
    #[error("field `{field}`: {reason}")]
    Field { field: String, reason: String },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

fn field_err(field: &str, reason: impl Into<String>) -> ConfigError {
    ConfigError::Field { field: field.into(), reason: reason.into() }
}

#[derive(Debug, Clone, Default)]
pub struct ExperimentConfig {
    map: BTreeMap<String, String>,
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut map = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap().trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| ConfigError::Malformed { line: idx + 1, text: raw.to_string() })?;
            map.insert(key.trim().to_string(), value.trim().to_string());
        }
        Ok(Self { map })
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        Self::parse(&fs::read_to_string(path)?)
    }

    pub fn set(&mut self, key: &str, value: impl ToString) {
        self.map.insert(key.to_string(), value.to_string());
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.map.get(key).map(String::as_str)
    }

    /// Sorted `key = value` lines for trace headers.
    pub fn echo_lines(&self) -> Vec<String> {
        self.map.iter().map(|(k, v)| format!("{k} = {v}")).collect()
    }

    fn f64_or(&self, key: &str, default: f64) -> Result<f64, ConfigError> {
        match self.map.get(key) {
            None => Ok(default),
            Some(v) => v.parse().map_err(|_| field_err(key, format!("`{v}` is not a number"))),
        }
    }

    fn usize_or(&self, key: &str, default: usize) -> Result<usize, ConfigError> {
        match self.map.get(key) {
            None => Ok(default),
            Some(v) => v.parse().map_err(|_| field_err(key, format!("`{v}` is not an integer"))),
        }
    }

    fn u64_or(&self, key: &str, default: u64) -> Result<u64, ConfigError> {
        match self.map.get(key) {
            None => Ok(default),
            Some(v) => {
                v.parse().map_err(|_| field_err(key, format!("`{v}` is not an unsigned integer")))
            }
        }
    }

    fn bool_or(&self, key: &str, default: bool) -> Result<bool, ConfigError> {
        match self.map.get(key).map(String::as_str) {
            None => Ok(default),
            Some("true") => Ok(true),
            Some("false") => Ok(false),
            Some(v) => Err(field_err(key, format!("`{v}` is not true/false"))),
        }
    }

    pub fn seed(&self) -> Result<u64, ConfigError> {
        self.u64_or("solver.seed", 0)
    }

    pub fn build_problem(&self) -> Result<ProblemInstance, ConfigError> {
        let family = self
            .get("problem.family")
            .ok_or_else(|| field_err("problem.family", "missing (elastic_net | logistic_l1 | covariance_mle)"))?;
        let m = self.usize_or("problem.m", 20)?;
        if m == 0 {
            return Err(field_err("problem.m", "must be positive"));
        }
        let seed = self.u64_or("problem.seed", 1)?;
        match family {
            "elastic_net" => {
                let n = self.usize_or("problem.n", 20)?;
                let d = self.usize_or("problem.d", 50)?;
                let lambda = self.f64_or("problem.lambda", 1e-5)?;
                Ok(elastic_net(seed, m, n, d, lambda, &default_gamma_schedule(m)))
            }
            "logistic_l1" => {
                let lambda = self.f64_or("problem.lambda", 1e-5)?;
                let data = if let Some(path) = self.get("problem.libsvm_path") {
                    let d = self.usize_or("problem.d", 0)?;
                    if d == 0 {
                        return Err(field_err("problem.d", "required with problem.libsvm_path"));
                    }
                    let limit = self.usize_or("problem.limit", usize::MAX)?;
                    let rule = match self.get("problem.label_rule").unwrap_or("digit_parity") {
                        "digit_parity" => LabelRule::DigitParity,
                        "sign" => LabelRule::Sign,
                        other => {
                            return Err(field_err(
                                "problem.label_rule",
                                format!("`{other}` is not digit_parity|sign"),
                            ))
                        }
                    };
                    let all = read_libsvm(path, d, limit, rule)
                        .map_err(|e| field_err("problem.libsvm_path", e.to_string()))?;
                    split_dataset(&all, m).0
                } else {
                    let n = self.usize_or("problem.n", 30)?;
                    let d = self.usize_or("problem.d", 40)?;
                    synthetic_classification(seed, m, n, d)
                };
                logistic_l1(data, lambda).map_err(|e| field_err("problem", e.to_string()))
            }
            "covariance_mle" => {
                let n = self.usize_or("problem.n", 100)?;
                let d_mat = self.usize_or("problem.d_mat", 5)?;
                let a = self.f64_or("problem.box_a", 0.1)?;
                let b = self.f64_or("problem.box_b", 10.0)?;
                if !(a > 0.0 && a <= b) {
                    return Err(field_err("problem.box_a", "needs 0 < box_a <= box_b"));
                }
                let trace_sign = match self.get("problem.trace_sign").unwrap_or("positive") {
                    "positive" => TraceSign::Positive,
                    "negative" => TraceSign::Negative,
                    other => {
                        return Err(field_err(
                            "problem.trace_sign",
                            format!("`{other}` is not positive|negative"),
                        ))
                    }
                };
                let sigma = Array2::eye(d_mat);
                covariance_mle(seed, m, n, d_mat, a, b, &sigma, trace_sign)
                    .map_err(|e| field_err("problem", e.to_string()))
            }
            other => Err(field_err("problem.family", format!("unknown family `{other}`"))),
        }
    }

    pub fn build_graph(&self) -> Result<(NetworkGraph, GossipMatrix), ConfigError> {
        let m = self.usize_or("graph.m", self.usize_or("problem.m", 20)?)?;
        let p = self.f64_or("graph.p", 0.5)?;
        if !(p > 0.0 && p <= 1.0) {
            return Err(field_err("graph.p", format!("{p} outside (0, 1]")));
        }
        let seed = self.u64_or("graph.seed", 0)?;
        let c = self.f64_or("gossip.c", 1.0 / 3.0)?;
        if !(c > 0.0 && c < 0.5) {
            return Err(field_err("gossip.c", format!("{c} outside (0, 1/2)")));
        }
        let draw =
            generate_erdos_renyi(m, p, seed).map_err(|e| field_err("graph", e.to_string()))?;
        let w = GossipMatrix::metropolis(&draw.graph, c)
            .map_err(|e| field_err("gossip.c", e.to_string()))?;
        Ok((draw.graph, w))
    }

    pub fn build_solver(&self) -> Result<SolverConfig, ConfigError> {
        let delta = self.f64_or("solver.delta", 0.9)?;
        if !(delta > 0.0 && delta < 1.0) {
            return Err(field_err("solver.delta", format!("{delta} outside (0, 1)")));
        }
        let eta = self.f64_or("solver.eta", 0.5)?;
        if !(eta > 0.0 && eta < 1.0) {
            return Err(field_err("solver.eta", format!("{eta} outside (0, 1)")));
        }
        let alpha_init = self.f64_or("solver.alpha_init", 10.0)?;
        if alpha_init <= 0.0 {
            return Err(field_err("solver.alpha_init", "must be positive"));
        }
        let beta = self.f64_or("solver.budget_beta", 1.0)?;
        let p = self.f64_or("solver.budget_p", 2.0)?;
        let budget = match self.get("solver.budget").unwrap_or("fixed") {
            "fixed" => BudgetRule::Fixed { beta, p },
            "drop_reset" => BudgetRule::DropReset {
                beta,
                p,
                q: self.f64_or("solver.budget_q", 2.0)?,
                eta_prime: self.f64_or("solver.budget_eta_prime", 0.7)?,
            },
            other => {
                return Err(field_err("solver.budget", format!("`{other}` is not fixed|drop_reset")))
            }
        };
        let stop = match self.map.get("solver.stop") {
            None => None,
            Some(v) => Some(
                v.parse()
                    .map_err(|_| field_err("solver.stop", format!("`{v}` is not a number")))?,
            ),
        };
        Ok(SolverConfig {
            alpha_init,
            delta,
            eta,
            max_trials: self.usize_or("solver.max_trials", 60)?,
            slack: self.f64_or("solver.slack", 1e-12)?,
            budget,
            k_max: self.usize_or("solver.k_max", 1000)?,
            stop,
            seed: self.seed()?,
        })
    }

    fn parse_algorithm(&self, name: &str) -> Result<Algorithm, ConfigError> {
        match name {
            "datos" => Ok(Algorithm::Datos),
            "local_datos" => Ok(Algorithm::LocalDatos {
                forced_global_min: self.bool_or("algorithm.forced_global_min", false)?,
            }),
            "adaptive_dys" => Ok(Algorithm::AdaptiveDys),
            "pg_extra" => {
                let alpha = self.f64_or("algorithm.pg_alpha", 0.01)?;
                if alpha <= 0.0 {
                    return Err(field_err("algorithm.pg_alpha", "must be positive"));
                }
                Ok(Algorithm::PgExtra { alpha })
            }
            other => Err(field_err(
                "algorithm",
                format!("`{other}` is not datos|local_datos|adaptive_dys|pg_extra"),
            )),
        }
    }

    pub fn algorithm(&self) -> Result<Algorithm, ConfigError> {
        let name = self.get("algorithm").unwrap_or("datos").to_string();
        self.parse_algorithm(&name)
    }

    /// Algorithms listed for `compare`, falling back to the single-run field.
    pub fn compare_algorithms(&self) -> Result<Vec<(String, Algorithm)>, ConfigError> {
        let listed = match self.get("compare.algorithms") {
            Some(list) => {
                list.split(',').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect()
            }
            None => vec![self.get("algorithm").unwrap_or("datos").to_string()],
        };
        if listed.is_empty() {
            return Err(field_err("compare.algorithms", "no algorithms listed"));
        }
        listed
            .into_iter()
            .map(|name| self.parse_algorithm(&name).map(|a| (name, a)))
            .collect()
    }

    pub fn reference_tol(&self) -> Result<f64, ConfigError> {
        self.f64_or("reference.tol", 1e-12)
    }

    pub fn reference_max_iter(&self) -> Result<usize, ConfigError> {
        self.usize_or("reference.max_iter", 2_000_000)
    }

    pub fn output_dir(&self) -> Option<&str> {
        self.get("output.dir")
    }

    /// Stable key for the reference cache: a hash of every field that shapes
    /// the problem instance.
    pub fn problem_cache_key(&self) -> String {
        let mut acc: u64 = 0xcbf2_9ce4_8422_2325;
        for (k, v) in &self.map {
            if k.starts_with("problem.") || k == "reference.tol" {
                for b in k.bytes().chain(v.bytes()) {
                    acc ^= b as u64;
                    acc = acc.wrapping_mul(0x100_0000_01b3);
                }
            }
        }
        format!("{acc:016x}")
    }
}
