//! Flat `key = value` run configuration.
//!
//! Blank lines and `#` comments are ignored. Vectors are comma-separated
//! triples; lists of vectors separate entries with `;`.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::cascade::{PhiHatPath, SolverOptions};
use crate::error::{Error, Result};
use crate::fock::FockBasis;
use crate::hamiltonian::ModelParams;
use crate::modes::{AngularSet, ModeGrid};
use crate::observables::ScanOptions;
use crate::spectral::DEFAULT_DENSE_LIMIT;
use crate::vec3::Vec3;

/// Keys that must be present.
pub const REQUIRED_KEYS: [&str; 9] =
    ["alpha", "epsilon", "lambda", "mu", "rho_minus", "rho_plus", "c_alpha", "p", "scales"];

const OPTIONAL_KEYS: [&str; 20] = [
    "ir_floor_c",
    "n_radial",
    "angular",
    "n_max",
    "c_max",
    "dense_limit",
    "basis_limit",
    "tol",
    "max_iter",
    "nodes",
    "neumann_terms",
    "phi_hat",
    "leak_bound",
    "alphas",
    "momenta",
    "scan_max_scale",
    "delta",
    "out",
    "allow_invalid",
    "deterministic",
];

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub params: ModelParams,
    pub n_radial: usize,
    pub angular: AngularSet,
    pub n_max: usize,
    pub c_max: usize,
    pub dense_limit: usize,
    pub solver: SolverOptions,
    pub alphas: Vec<f64>,
    pub momenta: Vec<Vec3>,
    /// Deepest scale evaluated by the mass scan.
    pub scan_max_scale: usize,
    /// Rate parameter used in reports.
    pub delta: f64,
    pub out: PathBuf,
}

struct Entry {
    line: usize,
    value: String,
}

fn parse_scalar<T: std::str::FromStr>(key: &str, e: &Entry) -> Result<T> {
    e.value.parse().map_err(|_| Error::Config {
        line: e.line,
        message: format!("cannot parse '{}' for key '{key}'", e.value),
    })
}

fn parse_vec3(key: &str, line: usize, text: &str) -> Result<Vec3> {
    let parts: Vec<&str> = text.split(',').map(str::trim).collect();
    let bad = || Error::Config { line, message: format!("key '{key}' expects three comma-separated numbers, got '{text}'") };
    if parts.len() != 3 {
        return Err(bad());
    }
    let mut v = [0.0; 3];
    for (slot, p) in v.iter_mut().zip(parts) {
        *slot = p.parse().map_err(|_| bad())?;
    }
    Ok(v)
}

fn parse_bool(key: &str, e: &Entry) -> Result<bool> {
    match e.value.as_str() {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        other => Err(Error::Config { line: e.line, message: format!("key '{key}' expects a boolean, got '{other}'") }),
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut entries: BTreeMap<String, Entry> = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content.split_once('=').ok_or_else(|| Error::Config {
                line,
                message: format!("expected 'key = value', got '{content}'"),
            })?;
            let key = key.trim();
            if !REQUIRED_KEYS.contains(&key) && !OPTIONAL_KEYS.contains(&key) {
                return Err(Error::Config { line, message: format!("unknown key '{key}'") });
            }
            if let Some(prev) = entries.get(key) {
                return Err(Error::Config {
                    line,
                    message: format!("duplicate key '{key}' (first set on line {})", prev.line),
                });
            }
            entries.insert(key.to_string(), Entry { line, value: value.trim().to_string() });
        }
        let last_line = text.lines().count().max(1);
        for key in REQUIRED_KEYS {
            if !entries.contains_key(key) {
                return Err(Error::Config { line: last_line, message: format!("missing required key '{key}'") });
            }
        }

        let req = |k: &str| &entries[k];
        let params = ModelParams {
            alpha: parse_scalar("alpha", req("alpha"))?,
            epsilon: parse_scalar("epsilon", req("epsilon"))?,
            lambda: parse_scalar("lambda", req("lambda"))?,
            mu: parse_scalar("mu", req("mu"))?,
            rho_minus: parse_scalar("rho_minus", req("rho_minus"))?,
            rho_plus: parse_scalar("rho_plus", req("rho_plus"))?,
            c_alpha_assumed: parse_scalar("c_alpha", req("c_alpha"))?,
            p: parse_vec3("p", req("p").line, &req("p").value)?,
            scales: parse_scalar("scales", req("scales"))?,
            ir_floor_c: match entries.get("ir_floor_c") {
                Some(e) => parse_scalar("ir_floor_c", e)?,
                None => ModelParams::default().ir_floor_c,
            },
        };

        macro_rules! opt {
            ($key:literal, $default:expr) => {
                match entries.get($key) {
                    Some(e) => parse_scalar($key, e)?,
                    None => $default,
                }
            };
        }

        let mut solver = SolverOptions::default();
        solver.lanczos.tol = opt!("tol", solver.lanczos.tol);
        solver.lanczos.max_iter = opt!("max_iter", solver.lanczos.max_iter);
        solver.projection.resolvent.tol = solver.lanczos.tol;
        solver.projection.resolvent.max_iter = solver.lanczos.max_iter;
        solver.nodes = opt!("nodes", solver.nodes);
        solver.neumann_terms = opt!("neumann_terms", solver.neumann_terms);
        solver.leak_bound = opt!("leak_bound", solver.leak_bound);
        solver.basis_limit = opt!("basis_limit", solver.basis_limit);
        let dense_limit = opt!("dense_limit", DEFAULT_DENSE_LIMIT);
        solver.projection.resolvent.dense_limit = dense_limit;
        if let Some(e) = entries.get("phi_hat") {
            solver.phi_hat_path = match e.value.as_str() {
                "direct" => PhiHatPath::Direct,
                "neumann" => PhiHatPath::Neumann,
                other => {
                    return Err(Error::Config {
                        line: e.line,
                        message: format!("phi_hat must be 'direct' or 'neumann', got '{other}'"),
                    })
                }
            };
        }
        if let Some(e) = entries.get("allow_invalid") {
            solver.allow_invalid = parse_bool("allow_invalid", e)?;
        }
        if let Some(e) = entries.get("deterministic") {
            if !parse_bool("deterministic", e)? {
                return Err(Error::Config { line: e.line, message: "deterministic output cannot be disabled".into() });
            }
        }

        let angular = match entries.get("angular") {
            Some(e) => AngularSet::from_name(&e.value).map_err(|err| Error::Config { line: e.line, message: err.to_string() })?,
            None => AngularSet::Octahedral6,
        };
        let alphas = match entries.get("alphas") {
            Some(e) if !e.value.is_empty() => e
                .value
                .split(',')
                .map(|s| {
                    s.trim().parse().map_err(|_| Error::Config {
                        line: e.line,
                        message: format!("cannot parse '{}' in 'alphas'", s.trim()),
                    })
                })
                .collect::<Result<Vec<f64>>>()?,
            _ => vec![params.alpha],
        };
        let momenta = match entries.get("momenta") {
            Some(e) => e
                .value
                .split(';')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(|s| parse_vec3("momenta", e.line, s))
                .collect::<Result<Vec<Vec3>>>()?,
            None => vec![params.p],
        };

        let cfg = RunConfig {
            n_radial: opt!("n_radial", 1),
            angular,
            n_max: opt!("n_max", 2),
            c_max: opt!("c_max", 2),
            dense_limit,
            solver,
            alphas,
            momenta,
            scan_max_scale: opt!("scan_max_scale", params.scales),
            delta: opt!("delta", 0.2),
            out: entries.get("out").map_or_else(|| PathBuf::from("out"), |e| PathBuf::from(&e.value)),
            params,
        };
        cfg.params.cutoffs()?;
        if cfg.c_max == 0 {
            return Err(Error::Config { line: entries.get("c_max").map_or(0, |e| e.line), message: "c_max must be at least 1".into() });
        }
        Ok(cfg)
    }

    pub fn grid(&self) -> Result<ModeGrid> {
        ModeGrid::build(self.params.cutoffs()?, self.n_radial, self.angular.clone())
    }

    pub fn basis(&self, grid: &ModeGrid) -> Result<FockBasis> {
        FockBasis::with_limit(grid.len(), self.n_max, self.c_max, self.solver.basis_limit)
    }

    pub fn scan_options(&self) -> ScanOptions {
        ScanOptions { nodes: self.solver.nodes, ..ScanOptions::default() }
    }
}
