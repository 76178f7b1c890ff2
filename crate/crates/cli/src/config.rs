//! Flat `key = value` run configuration with dotted sections.

use std::collections::BTreeMap;
use std::path::Path;

use serde::Serialize;
use spinsc::assembler::AmplitudeOptions;
use spinsc::branch::SearchConfig;
use spinsc::hamiltonian::{HamiltonianKind, HamiltonianSpec, PolyTerm, DEFAULT_MAX_DIM};
use spinsc::{SpinContext, C64};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("key '{key}': {msg}")]
    Value { key: String, msg: String },
    #[error("unknown key '{0}'")]
    UnknownKey(String),
    #[error("missing required key '{0}'")]
    Missing(&'static str),
    #[error("{0}")]
    Invalid(String),
}

type Result<T> = std::result::Result<T, ConfigError>;

const KNOWN_KEYS: &[&str] = &[
    "hamiltonian.kind",
    "hamiltonian.nu",
    "hamiltonian.kappa",
    "hamiltonian.terms",
    "spin.j",
    "state.z_i",
    "state.z_f",
    "time.tau_min",
    "time.tau_max",
    "time.samples",
    "search.grid_center",
    "search.grid_half_width",
    "search.grid_spacing",
    "search.capture_radius",
    "search.local_minima",
    "search.newton_tol",
    "search.max_newton",
    "search.max_newton_trace",
    "search.dedup_radius",
    "search.seed_taus",
    "search.pole_margin",
    "search.caustic_threshold",
    "search.caustic_reject",
    "search.max_halvings",
    "search.max_jump",
    "search.frequency_seeds",
    "search.frequency_max_n",
    "search.canonical_frequencies",
    "search.seed_tol",
    "ode.tol",
    "flags.mu_to_j2",
    "flags.stokes_guard",
    "flags.equator_mode",
    "flags.normalize",
    "report.contribution_threshold",
    "limits.max_dim",
];

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub hamiltonian: HamiltonianSpec,
    pub two_j: u32,
    pub z_i: C64,
    pub z_f: C64,
    pub tau_min: f64,
    pub tau_max: f64,
    pub samples: usize,
    pub search: SearchConfig,
    pub ode_tol: f64,
    pub mu_to_j2: bool,
    pub stokes_guard: Option<f64>,
    pub equator_mode: bool,
    pub normalize: bool,
    pub contribution_threshold: f64,
    pub max_dim: usize,
    /// The parsed key/value pairs, echoed into reports.
    pub echo: BTreeMap<String, String>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let pairs = parse_pairs(text)?;
        Self::from_pairs(pairs)
    }

    fn from_pairs(pairs: BTreeMap<String, String>) -> Result<Self> {
        let get = |k: &str| pairs.get(k).map(String::as_str);
        let req = |k: &'static str| get(k).ok_or(ConfigError::Missing(k));

        let nu = match get("hamiltonian.nu") {
            Some(v) => parse_f64("hamiltonian.nu", v)?,
            None => 1.0,
        };
        let kind = req("hamiltonian.kind")?;
        let hamiltonian = match kind {
            "linear_jz" => HamiltonianSpec::linear_jz(nu),
            "jz_squared" => HamiltonianSpec::jz_squared(nu),
            "anisotropic" => {
                let kappa = parse_f64("hamiltonian.kappa", req("hamiltonian.kappa")?)?;
                HamiltonianSpec::anisotropic(nu, kappa)
            }
            "polynomial" => {
                HamiltonianSpec::polynomial(nu, parse_terms(req("hamiltonian.terms")?)?)
            }
            other => {
                return Err(ConfigError::Value {
                    key: "hamiltonian.kind".into(),
                    msg: format!("unknown kind '{other}'"),
                })
            }
        };
        if hamiltonian.kind != HamiltonianKind::Anisotropic && get("hamiltonian.kappa").is_some() {
            return Err(ConfigError::Invalid(
                "hamiltonian.kappa only applies to the anisotropic kind".into(),
            ));
        }
        hamiltonian
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;

        let j = parse_f64("spin.j", req("spin.j")?)?;
        let two_j = SpinContext::from_j(j)
            .map_err(|e| ConfigError::Value {
                key: "spin.j".into(),
                msg: e.to_string(),
            })?
            .two_j();
        let z_i = parse_complex("state.z_i", req("state.z_i")?)?;
        let z_f = match get("state.z_f") {
            Some(v) => parse_complex("state.z_f", v)?,
            None => z_i,
        };
        let tau_min = match get("time.tau_min") {
            Some(v) => parse_f64("time.tau_min", v)?,
            None => 0.0,
        };
        let tau_max = parse_f64("time.tau_max", req("time.tau_max")?)?;
        let samples = parse_usize("time.samples", req("time.samples")?)?;
        if samples < 2 {
            return Err(ConfigError::Invalid(
                "time.samples must be at least 2".into(),
            ));
        }
        if !(tau_min < tau_max) || tau_min < 0.0 {
            return Err(ConfigError::Invalid(
                "time window needs 0 <= tau_min < tau_max".into(),
            ));
        }

        let mut search = SearchConfig::default();
        let opt_f = |k: &str| get(k).map(|v| parse_f64(k, v)).transpose();
        let opt_u = |k: &str| get(k).map(|v| parse_usize(k, v)).transpose();
        let opt_b = |k: &str| get(k).map(|v| parse_bool(k, v)).transpose();
        if let Some(v) = get("search.grid_center") {
            search.center = Some(parse_complex("search.grid_center", v)?);
        }
        if let Some(v) = opt_f("search.grid_half_width")? {
            search.half_width = Some(v);
        }
        if let Some(v) = opt_f("search.grid_spacing")? {
            search.spacing = v;
        }
        if let Some(v) = opt_f("search.capture_radius")? {
            search.capture_radius = v;
        }
        if let Some(v) = opt_b("search.local_minima")? {
            search.local_minima = v;
        }
        if let Some(v) = opt_f("search.newton_tol")? {
            search.newton_tol = v;
        }
        if let Some(v) = opt_u("search.max_newton")? {
            search.max_newton = v;
        }
        if let Some(v) = opt_u("search.max_newton_trace")? {
            search.max_newton_trace = v;
        }
        if let Some(v) = opt_f("search.dedup_radius")? {
            search.dedup_radius = v;
        }
        if let Some(v) = get("search.seed_taus") {
            search.seed_taus = v
                .split(',')
                .map(|s| parse_f64("search.seed_taus", s))
                .collect::<Result<_>>()?;
        }
        if let Some(v) = opt_f("search.pole_margin")? {
            search.pole_margin = v;
        }
        if let Some(v) = opt_f("search.caustic_threshold")? {
            search.caustic_threshold = v;
        }
        if let Some(v) = opt_f("search.caustic_reject")? {
            search.caustic_reject = v;
        }
        if let Some(v) = opt_u("search.max_halvings")? {
            search.max_halvings = v;
        }
        if let Some(v) = opt_f("search.max_jump")? {
            search.max_jump = v;
        }
        if let Some(v) = opt_b("search.frequency_seeds")? {
            search.frequency_seeds = v;
        }
        if let Some(v) = opt_u("search.frequency_max_n")? {
            search.frequency_max_n = Some(v);
        }
        if let Some(v) = opt_b("search.canonical_frequencies")? {
            search.canonical_frequencies = v;
        }
        if let Some(v) = opt_f("search.seed_tol")? {
            search.seed_tol = v;
        }
        search
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;

        let ode_tol = opt_f("ode.tol")?.unwrap_or(1e-10);
        if !(1e-13..=1e-6).contains(&ode_tol) {
            return Err(ConfigError::Value {
                key: "ode.tol".into(),
                msg: "must lie in [1e-13, 1e-6]".into(),
            });
        }
        let stokes_guard = match get("flags.stokes_guard") {
            None | Some("off") | Some("false") => None,
            Some(v) => {
                let m = parse_f64("flags.stokes_guard", v)?;
                if m < 0.0 {
                    return Err(ConfigError::Value {
                        key: "flags.stokes_guard".into(),
                        msg: "margin must be non-negative".into(),
                    });
                }
                Some(m)
            }
        };
        let equator_mode = opt_b("flags.equator_mode")?.unwrap_or(false);
        if equator_mode {
            if hamiltonian.kind != HamiltonianKind::JzSquared {
                return Err(ConfigError::Invalid(
                    "flags.equator_mode requires hamiltonian.kind = jz_squared".into(),
                ));
            }
            if (z_i.norm() - 1.0).abs() > 1e-9 || (z_f - z_i).norm() > 1e-12 {
                return Err(ConfigError::Invalid(
                    "flags.equator_mode requires z_i = z_f with |z_i| = 1".into(),
                ));
            }
        }
        let contribution_threshold = opt_f("report.contribution_threshold")?.unwrap_or(0.02);
        let max_dim = opt_u("limits.max_dim")?.unwrap_or(DEFAULT_MAX_DIM);

        Ok(Self {
            hamiltonian,
            two_j,
            z_i,
            z_f,
            tau_min,
            tau_max,
            samples,
            search,
            ode_tol,
            mu_to_j2: opt_b("flags.mu_to_j2")?.unwrap_or(false),
            stokes_guard,
            equator_mode,
            normalize: opt_b("flags.normalize")?.unwrap_or(true),
            contribution_threshold,
            max_dim,
            echo: pairs,
        })
    }

    pub fn ctx(&self) -> SpinContext {
        SpinContext::from_two_j(self.two_j).expect("validated at parse time")
    }

    pub fn taus(&self) -> Vec<f64> {
        spinsc::exact::tau_grid(self.tau_min, self.tau_max, self.samples)
    }

    pub fn amplitude_options(&self) -> AmplitudeOptions {
        AmplitudeOptions {
            mu_to_j2: self.mu_to_j2,
            caustic_threshold: self.search.caustic_threshold,
            stokes_guard: self.stokes_guard,
            equator_mode: self.equator_mode,
        }
    }

    /// Search settings with equator mode folded in.
    pub fn effective_search(&self) -> SearchConfig {
        let mut s = self.search.clone();
        if self.equator_mode {
            s.canonical_frequencies = true;
            s.frequency_seeds = true;
        }
        s
    }

    pub fn summary(&self) -> ConfigSummary {
        ConfigSummary {
            hamiltonian: self.hamiltonian.id(),
            j: self.two_j as f64 / 2.0,
            z_i: [self.z_i.re, self.z_i.im],
            z_f: [self.z_f.re, self.z_f.im],
            tau_window: [self.tau_min, self.tau_max],
            samples: self.samples,
            ode_tol: self.ode_tol,
            mu_to_j2: self.mu_to_j2,
            stokes_guard: self.stokes_guard,
            equator_mode: self.equator_mode,
            normalize: self.normalize,
            keys: self.echo.clone(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ConfigSummary {
    pub hamiltonian: String,
    pub j: f64,
    pub z_i: [f64; 2],
    pub z_f: [f64; 2],
    pub tau_window: [f64; 2],
    pub samples: usize,
    pub ode_tol: f64,
    pub mu_to_j2: bool,
    pub stokes_guard: Option<f64>,
    pub equator_mode: bool,
    pub normalize: bool,
    pub keys: BTreeMap<String, String>,
}

fn parse_pairs(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| ConfigError::Syntax {
            line: n + 1,
            msg: format!("expected 'key = value', got '{line}'"),
        })?;
        let (k, v) = (k.trim(), v.trim());
        if !KNOWN_KEYS.contains(&k) {
            return Err(ConfigError::UnknownKey(k.to_string()));
        }
        if v.is_empty() {
            return Err(ConfigError::Syntax {
                line: n + 1,
                msg: format!("empty value for '{k}'"),
            });
        }
        if out.insert(k.to_string(), v.to_string()).is_some() {
            return Err(ConfigError::Syntax {
                line: n + 1,
                msg: format!("duplicate key '{k}'"),
            });
        }
    }
    Ok(out)
}

/// Parses a real number; accepts `pi` and `pi/N`, `N*pi` forms.
fn parse_f64(key: &str, v: &str) -> Result<f64> {
    let v = v.trim();
    let err = || ConfigError::Value {
        key: key.into(),
        msg: format!("'{v}' is not a finite number"),
    };
    let pi = std::f64::consts::PI;
    let x = if let Some(rest) = v.strip_prefix("pi/") {
        pi / rest.trim().parse::<f64>().map_err(|_| err())?
    } else if let Some(rest) = v.strip_suffix("*pi") {
        rest.trim().parse::<f64>().map_err(|_| err())? * pi
    } else if v == "pi" {
        pi
    } else {
        v.parse::<f64>().map_err(|_| err())?
    };
    if x.is_finite() {
        Ok(x)
    } else {
        Err(err())
    }
}

fn parse_usize(key: &str, v: &str) -> Result<usize> {
    v.trim().parse().map_err(|_| ConfigError::Value {
        key: key.into(),
        msg: format!("'{v}' is not a non-negative integer"),
    })
}

fn parse_bool(key: &str, v: &str) -> Result<bool> {
    match v.trim() {
        "true" | "on" | "yes" | "1" => Ok(true),
        "false" | "off" | "no" | "0" => Ok(false),
        _ => Err(ConfigError::Value {
            key: key.into(),
            msg: format!("'{v}' is not a boolean"),
        }),
    }
}

/// `re,im` or a bare real.
fn parse_complex(key: &str, v: &str) -> Result<C64> {
    match v.split_once(',') {
        Some((re, im)) => Ok(C64::new(parse_f64(key, re)?, parse_f64(key, im)?)),
        None => Ok(C64::new(parse_f64(key, v)?, 0.0)),
    }
}

/// `re,im:word; re,im:word; ...`
fn parse_terms(v: &str) -> Result<Vec<PolyTerm>> {
    v.split(';')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|t| {
            let (c, w) = t.split_once(':').ok_or_else(|| ConfigError::Value {
                key: "hamiltonian.terms".into(),
                msg: format!("term '{t}' is not 're,im:word'"),
            })?;
            let word = PolyTerm::parse_word(w.trim()).map_err(|e| ConfigError::Value {
                key: "hamiltonian.terms".into(),
                msg: e.to_string(),
            })?;
            Ok(PolyTerm::new(parse_complex("hamiltonian.terms", c)?, word))
        })
        .collect()
}
