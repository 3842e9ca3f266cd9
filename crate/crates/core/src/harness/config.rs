//! Experiment configuration: `key = value` lines, `#` comments.
//!
//! ```text
//! dgp = 1
//! n = 500
//! p = 50
//! taus = 0.5, 0.8
//! reps = 500
//! collection = stratified
//! estimators = trace, cv, oracle, closed_form
//! cv_k = 10
//! seed = 2024
//! out = dgp1.csv
//! ```
//!
//! Optional keys: `oracle_reps` (default 1000), `oracle_eval` (5),
//! `oracle_max_size` (no limit), `kappa` (`sd`), `bandwidth_scale` (1).

use std::fmt;
use std::path::{Path, PathBuf};

use crate::dgp::DgpId;
use crate::error::{Error, Result};
use crate::model::ModelSpec;
use crate::optimism::KappaRule;

use super::build_collection_dgp1;

const REQUIRED: [&str; 10] = ["dgp", "n", "p", "taus", "reps", "collection", "estimators", "cv_k", "seed", "out"];
const OPTIONAL: [&str; 5] = ["oracle_reps", "oracle_eval", "oracle_max_size", "kappa", "bandwidth_scale"];

#[derive(Debug, Clone, PartialEq)]
pub enum Collection {
    /// Intercept-only plus `count` nested models per DGP1 stratum.
    Stratified {
        count: usize,
    },
    /// The four reference models: {1..4}, {1..10}, {1,2}, {1,2,5..15}.
    ModelsIToIv,
    Explicit(Vec<ModelSpec>),
}

impl Collection {
    pub fn models(&self, p: usize) -> Result<Vec<ModelSpec>> {
        let models = match self {
            Collection::Stratified { count } => build_collection_dgp1(*count, p)?,
            Collection::ModelsIToIv => models_i_to_iv(),
            Collection::Explicit(m) => m.clone(),
        };
        for m in &models {
            m.check_dimension(p)?;
        }
        if models.is_empty() {
            return Err(Error::InvalidInput("model collection is empty".into()));
        }
        Ok(models)
    }
}

/// Correct, over-fitted, under-fitted, and under-fitted plus noise.
pub fn models_i_to_iv() -> Vec<ModelSpec> {
    let iv: Vec<usize> = [1, 2].into_iter().chain(5..=15).collect();
    vec![
        ModelSpec::leading(4),
        ModelSpec::leading(10),
        ModelSpec::leading(2),
        ModelSpec::new(iv, true).expect("sorted"),
    ]
}

impl fmt::Display for Collection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Collection::Stratified { count } if *count == super::DEFAULT_PER_STRATUM => write!(f, "stratified"),
            Collection::Stratified { count } => write!(f, "stratified:{count}"),
            Collection::ModelsIToIv => write!(f, "models-i-iv"),
            Collection::Explicit(models) => {
                let groups: Vec<String> = models
                    .iter()
                    .map(|m| format!("{{{}}}", m.indices().iter().map(usize::to_string).collect::<Vec<_>>().join(",")))
                    .collect();
                write!(f, "{}", groups.join(","))
            }
        }
    }
}

fn parse_collection(text: &str) -> Result<Collection> {
    let text = text.trim();
    if text == "stratified" {
        return Ok(Collection::Stratified { count: super::DEFAULT_PER_STRATUM });
    }
    if let Some(count) = text.strip_prefix("stratified:") {
        let count = count.trim().parse().map_err(|_| Error::InvalidInput(format!("bad stratum count in {text:?}")))?;
        return Ok(Collection::Stratified { count });
    }
    if text == "models-i-iv" {
        return Ok(Collection::ModelsIToIv);
    }
    if !text.starts_with('{') {
        return Err(Error::InvalidInput(format!(
            "collection must be stratified, stratified:<count>, models-i-iv or brace groups, got {text:?}"
        )));
    }
    // Brace groups such as {1,2,3,4},{1,2},{}; every model has an intercept.
    let mut models = Vec::new();
    let mut rest = text;
    while !rest.is_empty() {
        let open = rest.strip_prefix('{').ok_or_else(|| Error::InvalidInput(format!("expected '{{' in {text:?}")))?;
        let close = open.find('}').ok_or_else(|| Error::InvalidInput(format!("unclosed '{{' in {text:?}")))?;
        let cols = crate::model::parse_columns(&open[..close])?;
        models.push(ModelSpec::from_unsorted(cols, true)?);
        rest = open[close + 1..].trim_start();
        if let Some(r) = rest.strip_prefix(',') {
            rest = r.trim_start();
        }
    }
    Ok(Collection::Explicit(models))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct EstimatorFlags {
    pub trace: bool,
    pub cv: bool,
    pub oracle: bool,
    pub closed_form: bool,
}

impl fmt::Display for EstimatorFlags {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<&str> =
            [(self.trace, "trace"), (self.cv, "cv"), (self.oracle, "oracle"), (self.closed_form, "closed_form")]
                .into_iter()
                .filter_map(|(on, name)| on.then_some(name))
                .collect();
        if names.is_empty() {
            write!(f, "none")
        } else {
            write!(f, "{}", names.join(", "))
        }
    }
}

fn parse_estimators(text: &str) -> Result<EstimatorFlags> {
    let mut flags = EstimatorFlags::default();
    for name in text.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        match name {
            "trace" => flags.trace = true,
            "cv" => flags.cv = true,
            "oracle" => flags.oracle = true,
            "closed_form" => flags.closed_form = true,
            "none" => {}
            other => return Err(Error::InvalidInput(format!("unknown estimator {other:?}"))),
        }
    }
    Ok(flags)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub dgp: DgpId,
    pub n: usize,
    pub p: usize,
    pub taus: Vec<f64>,
    pub reps: usize,
    pub collection: Collection,
    pub estimators: EstimatorFlags,
    pub cv_k: usize,
    pub seed: u64,
    /// Output file; `-` writes to standard output.
    pub out: PathBuf,
    pub oracle_reps: usize,
    pub oracle_eval: usize,
    /// Oracle columns are NA for larger models.
    pub oracle_max_size: Option<usize>,
    pub kappa: KappaRule,
    /// Multiplies the rule-of-thumb bandwidth.
    pub bandwidth_scale: f64,
}

impl ExperimentConfig {
    /// Desk-scale DGP1 run: 500 replications, oracle at 1000.
    pub fn desk_dgp1(seed: u64) -> Self {
        Self {
            dgp: DgpId::Dgp1,
            n: 500,
            p: 50,
            taus: vec![0.5, 0.8],
            reps: 500,
            collection: Collection::Stratified { count: super::DEFAULT_PER_STRATUM },
            estimators: EstimatorFlags { trace: true, cv: false, oracle: true, closed_form: true },
            cv_k: 10,
            seed,
            out: PathBuf::from("-"),
            oracle_reps: 1000,
            oracle_eval: 5,
            oracle_max_size: None,
            kappa: KappaRule::SampleSd,
            bandwidth_scale: 1.0,
        }
    }

    /// Full-scale run with 10,000 replications everywhere.
    pub fn full_dgp1(seed: u64) -> Self {
        Self {
            reps: 10_000,
            oracle_reps: 10_000,
            estimators: EstimatorFlags { trace: true, cv: true, oracle: true, closed_form: true },
            ..Self::desk_dgp1(seed)
        }
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut seen: Vec<(&str, &str, usize)> = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let lineno = idx + 1;
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Parse { line: lineno, message: format!("expected key = value, got {line:?}") })?;
            let key = key.trim();
            if !REQUIRED.contains(&key) && !OPTIONAL.contains(&key) {
                return Err(Error::Parse { line: lineno, message: format!("unknown key {key:?}") });
            }
            if seen.iter().any(|(k, _, _)| *k == key) {
                return Err(Error::Parse { line: lineno, message: format!("duplicate key {key:?}") });
            }
            seen.push((key, value.trim(), lineno));
        }
        let get = |key: &str| seen.iter().find(|(k, _, _)| *k == key).map(|(_, v, l)| (*v, *l));
        for key in REQUIRED {
            if get(key).is_none() {
                return Err(Error::Parse { line: 0, message: format!("missing required key {key:?}") });
            }
        }
        fn num<T: std::str::FromStr>(key: &str, (v, line): (&str, usize)) -> Result<T> {
            v.parse().map_err(|_| Error::Parse { line, message: format!("bad value for {key}: {v:?}") })
        }
        let at = |key: &str, e: Error, line: usize| match e {
            Error::Parse { .. } => e,
            other => Error::Parse { line, message: format!("{key}: {other}") },
        };
        let (dgp_text, dgp_line) = get("dgp").expect("checked");
        let dgp = dgp_text.parse::<DgpId>().map_err(|e| at("dgp", e, dgp_line))?;
        let (taus_text, taus_line) = get("taus").expect("checked");
        let taus =
            taus_text.split(',').map(|t| num::<f64>("taus", (t.trim(), taus_line))).collect::<Result<Vec<_>>>()?;
        let (coll_text, coll_line) = get("collection").expect("checked");
        let (est_text, est_line) = get("estimators").expect("checked");
        let mut cfg = Self {
            dgp,
            n: num("n", get("n").expect("checked"))?,
            p: num("p", get("p").expect("checked"))?,
            taus,
            reps: num("reps", get("reps").expect("checked"))?,
            collection: parse_collection(coll_text).map_err(|e| at("collection", e, coll_line))?,
            estimators: parse_estimators(est_text).map_err(|e| at("estimators", e, est_line))?,
            cv_k: num("cv_k", get("cv_k").expect("checked"))?,
            seed: num("seed", get("seed").expect("checked"))?,
            out: PathBuf::from(get("out").expect("checked").0),
            oracle_reps: 1000,
            oracle_eval: 5,
            oracle_max_size: None,
            kappa: KappaRule::SampleSd,
            bandwidth_scale: 1.0,
        };
        if let Some(v) = get("oracle_reps") {
            cfg.oracle_reps = num("oracle_reps", v)?;
        }
        if let Some(v) = get("oracle_eval") {
            cfg.oracle_eval = num("oracle_eval", v)?;
        }
        if let Some(v) = get("oracle_max_size") {
            cfg.oracle_max_size = Some(num("oracle_max_size", v)?);
        }
        if let Some((v, line)) = get("kappa") {
            cfg.kappa = v.parse().map_err(|e| at("kappa", e, line))?;
        }
        if let Some(v) = get("bandwidth_scale") {
            cfg.bandwidth_scale = num("bandwidth_scale", v)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidInput(m));
        if self.reps < 1 {
            return bad("reps must be at least 1".into());
        }
        if self.taus.is_empty() || self.taus.iter().any(|t| !(*t > 0.0 && *t < 1.0)) {
            return bad(format!("taus must be nonempty and inside (0, 1), got {:?}", self.taus));
        }
        if self.p < 4 {
            return bad(format!("p must be at least 4, got {}", self.p));
        }
        if self.estimators.cv && (self.cv_k < 2 || self.cv_k > self.n) {
            return bad(format!("cv_k must lie in 2..=n, got {}", self.cv_k));
        }
        if self.estimators.oracle && (self.oracle_reps < 2 || self.oracle_eval < 1) {
            return bad("oracle needs oracle_reps >= 2 and oracle_eval >= 1".into());
        }
        if !(self.bandwidth_scale.is_finite() && self.bandwidth_scale > 0.0) {
            return bad(format!("bandwidth_scale must be positive, got {}", self.bandwidth_scale));
        }
        let models = self.collection.models(self.p)?;
        if let Some(m) = models.iter().find(|m| self.n < m.size() + 2) {
            return bad(format!("n = {} is too small for model {m}", self.n));
        }
        Ok(())
    }

    /// The resolved configuration in the file format, every key present.
    pub fn to_text(&self) -> String {
        let taus: Vec<String> = self.taus.iter().map(|t| t.to_string()).collect();
        let mut s = String::new();
        let mut kv = |k: &str, v: String| s.push_str(&format!("{k} = {v}\n"));
        kv("dgp", self.dgp.number().to_string());
        kv("n", self.n.to_string());
        kv("p", self.p.to_string());
        kv("taus", taus.join(", "));
        kv("reps", self.reps.to_string());
        kv("collection", self.collection.to_string());
        kv("estimators", self.estimators.to_string());
        kv("cv_k", self.cv_k.to_string());
        kv("seed", self.seed.to_string());
        kv("out", self.out.display().to_string());
        kv("oracle_reps", self.oracle_reps.to_string());
        kv("oracle_eval", self.oracle_eval.to_string());
        if let Some(m) = self.oracle_max_size {
            kv("oracle_max_size", m.to_string());
        }
        kv("kappa", self.kappa.to_string());
        kv("bandwidth_scale", self.bandwidth_scale.to_string());
        s
    }
}
