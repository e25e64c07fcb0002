//! Experiment runner: JSON configs, parallel seeded runs, per-seed and
//! aggregate CSVs written atomically, and a verifier for output folders.

use crate::actinf::GridParams;
use crate::error::{Error, Result};
use crate::kripke::mamab::MamabParams;
use crate::motifnet::MotifParams;
use crate::ratelink::RateLinkParams;
use crate::series::Series;
use crate::stats::{mean, std_dev};
use crate::swarm::SwarmParams;
use crate::walks::WalkParams;
use crate::wncs::WncsParams;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use std::collections::BTreeSet;
use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UseCase {
    Wncs,
    Walks,
    Swarm,
    Motif,
    Ratelink,
    Mamab,
    Gridworld,
}

impl UseCase {
    pub const ALL: [UseCase; 7] =
        [UseCase::Wncs, UseCase::Walks, UseCase::Swarm, UseCase::Motif, UseCase::Ratelink, UseCase::Mamab, UseCase::Gridworld];

    pub fn name(self) -> &'static str {
        match self {
            UseCase::Wncs => "wncs",
            UseCase::Walks => "walks",
            UseCase::Swarm => "swarm",
            UseCase::Motif => "motif",
            UseCase::Ratelink => "ratelink",
            UseCase::Mamab => "mamab",
            UseCase::Gridworld => "gridworld",
        }
    }
}

impl fmt::Display for UseCase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for UseCase {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        UseCase::ALL
            .into_iter()
            .find(|u| u.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown use case `{s}`")))
    }
}

/// Typed parameter block, one variant per use case.
#[derive(Debug, Clone, PartialEq)]
pub enum UseCaseParams {
    Wncs(WncsParams),
    Walks(WalkParams),
    Swarm(SwarmParams),
    Motif(MotifParams),
    Ratelink(RateLinkParams),
    Mamab(MamabParams),
    Gridworld(GridParams),
}

impl UseCaseParams {
    /// Defaults for a tag, i.e. the paper's constants.
    pub fn defaults(tag: UseCase) -> Self {
        Self::from_value(tag, Value::Object(Default::default())).expect("defaults deserialize")
    }

    /// Parses a JSON block for `tag`, filling omitted fields with defaults.
    pub fn from_value(tag: UseCase, v: Value) -> Result<Self> {
        let wrap = |e: serde_json::Error| Error::Config(format!("{tag} params: {e}"));
        Ok(match tag {
            UseCase::Wncs => UseCaseParams::Wncs(serde_json::from_value(v).map_err(wrap)?),
            UseCase::Walks => UseCaseParams::Walks(serde_json::from_value(v).map_err(wrap)?),
            UseCase::Swarm => UseCaseParams::Swarm(serde_json::from_value(v).map_err(wrap)?),
            UseCase::Motif => UseCaseParams::Motif(serde_json::from_value(v).map_err(wrap)?),
            UseCase::Ratelink => UseCaseParams::Ratelink(serde_json::from_value(v).map_err(wrap)?),
            UseCase::Mamab => UseCaseParams::Mamab(serde_json::from_value(v).map_err(wrap)?),
            UseCase::Gridworld => UseCaseParams::Gridworld(serde_json::from_value(v).map_err(wrap)?),
        })
    }

    pub fn tag(&self) -> UseCase {
        match self {
            UseCaseParams::Wncs(_) => UseCase::Wncs,
            UseCaseParams::Walks(_) => UseCase::Walks,
            UseCaseParams::Swarm(_) => UseCase::Swarm,
            UseCaseParams::Motif(_) => UseCase::Motif,
            UseCaseParams::Ratelink(_) => UseCase::Ratelink,
            UseCaseParams::Mamab(_) => UseCase::Mamab,
            UseCaseParams::Gridworld(_) => UseCase::Gridworld,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            UseCaseParams::Wncs(p) => p.validate(),
            UseCaseParams::Walks(p) => p.validate(),
            UseCaseParams::Swarm(p) => p.validate(),
            UseCaseParams::Motif(p) => p.validate(),
            UseCaseParams::Ratelink(p) => p.validate(),
            UseCaseParams::Mamab(p) => p.validate(),
            UseCaseParams::Gridworld(p) => p.validate(),
        }
    }

    pub fn to_value(&self) -> Value {
        let v = match self {
            UseCaseParams::Wncs(p) => serde_json::to_value(p),
            UseCaseParams::Walks(p) => serde_json::to_value(p),
            UseCaseParams::Swarm(p) => serde_json::to_value(p),
            UseCaseParams::Motif(p) => serde_json::to_value(p),
            UseCaseParams::Ratelink(p) => serde_json::to_value(p),
            UseCaseParams::Mamab(p) => serde_json::to_value(p),
            UseCaseParams::Gridworld(p) => serde_json::to_value(p),
        };
        v.expect("params serialize")
    }

    /// Runs one seed.
    pub fn run(&self, seed: u64) -> Result<Series> {
        match self {
            UseCaseParams::Wncs(p) => crate::wncs::run_wncs_usecase(p, seed),
            UseCaseParams::Walks(p) => crate::walks::run_walk_experiment(p, seed),
            UseCaseParams::Swarm(p) => crate::swarm::run_swarm_usecase(p, seed),
            UseCaseParams::Motif(p) => crate::motifnet::run_motif_usecase(p, seed),
            UseCaseParams::Ratelink(p) => crate::ratelink::run_ratelink(p, seed),
            UseCaseParams::Mamab(p) => crate::kripke::mamab::run_mamab_usecase(p, seed),
            UseCaseParams::Gridworld(p) => crate::actinf::run_gridworld(p, seed),
        }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    tag: UseCase,
    seeds: Vec<u64>,
    #[serde(default)]
    params: Option<Value>,
    #[serde(default)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub params: UseCaseParams,
    pub seeds: Vec<u64>,
    pub out: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn new(params: UseCaseParams, seeds: Vec<u64>) -> Result<Self> {
        let c = ExperimentConfig { params, seeds, out: None };
        c.validate()?;
        Ok(c)
    }

    pub fn tag(&self) -> UseCase {
        self.params.tag()
    }

    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(Error::Config("seeds: at least one seed is required".into()));
        }
        if self.seeds.iter().collect::<BTreeSet<_>>().len() != self.seeds.len() {
            return Err(Error::Config("seeds: duplicates are not allowed".into()));
        }
        self.params.validate().map_err(|e| Error::Config(format!("{} params: {e}", self.tag())))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let raw: RawConfig = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        let block = raw.params.unwrap_or_else(|| Value::Object(Default::default()));
        let c = ExperimentConfig { params: UseCaseParams::from_value(raw.tag, block)?, seeds: raw.seeds, out: raw.out };
        c.validate()?;
        Ok(c)
    }

    /// Resolved config with every default spelled out.
    pub fn to_json(&self) -> Value {
        let mut m = serde_json::Map::new();
        m.insert("tag".into(), Value::String(self.tag().name().into()));
        m.insert("seeds".into(), serde_json::to_value(&self.seeds).expect("seeds serialize"));
        m.insert("params".into(), self.params.to_value());
        Value::Object(m)
    }
}

pub fn load_config(path: impl AsRef<Path>) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path.as_ref())?;
    ExperimentConfig::from_json(&text)
}

/// Column-wise mean and (population) standard deviation across seeds.
/// The first column is the shared time axis.
pub fn aggregate(runs: &[Series]) -> Result<Series> {
    let first = runs.first().ok_or_else(|| Error::InsufficientData("no runs to aggregate".into()))?;
    for r in runs {
        if r.columns != first.columns || r.len() != first.len() {
            return Err(Error::Config("per-seed outputs differ in shape".into()));
        }
        if r.rows.iter().zip(&first.rows).any(|(a, b)| a[0] != b[0]) {
            return Err(Error::Config("per-seed outputs differ in their time axis".into()));
        }
    }
    let mut names = vec![first.columns[0].clone()];
    for c in &first.columns[1..] {
        names.push(format!("{c}_mean"));
        names.push(format!("{c}_std"));
    }
    let mut out = Series::new(&names);
    for i in 0..first.len() {
        let mut row = vec![first.rows[i][0]];
        for j in 1..first.columns.len() {
            let xs: Vec<f64> = runs.iter().map(|r| r.rows[i][j]).collect();
            row.push(mean(&xs));
            row.push(std_dev(&xs));
        }
        out.push(row);
    }
    Ok(out)
}

fn check_time_axis(s: &Series) -> Result<()> {
    if s.columns.is_empty() || s.rows.iter().any(|r| r.len() != s.columns.len()) {
        return Err(Error::Config("output is not rectangular".into()));
    }
    if s.rows.windows(2).any(|w| !(w[1][0] > w[0][0])) {
        return Err(Error::Config("time column must be strictly increasing".into()));
    }
    Ok(())
}

/// Writes `bytes` to `path` via a temporary file in the same directory.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub config: Value,
    pub seed_files: Vec<(u64, String)>,
    pub aggregate: String,
}

pub fn seed_file(tag: UseCase, seed: u64) -> String {
    format!("{tag}_seed{seed}.csv")
}

pub fn manifest_file(tag: UseCase) -> String {
    format!("{tag}_manifest.json")
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub out_dir: PathBuf,
    pub files: Vec<PathBuf>,
    pub aggregate: Series,
}

/// Runs every seed (up to `jobs` at a time) and writes per-seed CSVs, the
/// aggregate CSV and a manifest into `out_dir`.
pub fn run(config: &ExperimentConfig, jobs: usize, out_dir: &Path) -> Result<RunReport> {
    config.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::Config(e.to_string()))?;
    let runs: Vec<Series> = pool.install(|| config.seeds.par_iter().map(|&s| config.params.run(s)).collect::<Result<_>>())?;
    runs.iter().try_for_each(check_time_axis)?;
    let agg = aggregate(&runs)?;

    std::fs::create_dir_all(out_dir)?;
    let tag = config.tag();
    let mut files = Vec::new();
    let mut seed_files = Vec::new();
    for (s, series) in config.seeds.iter().zip(&runs) {
        let name = seed_file(tag, *s);
        let path = out_dir.join(&name);
        write_atomic(&path, series.to_csv_string().as_bytes())?;
        files.push(path);
        seed_files.push((*s, name));
    }
    let agg_name = format!("{tag}_aggregate.csv");
    let agg_path = out_dir.join(&agg_name);
    write_atomic(&agg_path, agg.to_csv_string().as_bytes())?;
    files.push(agg_path);
    let manifest = Manifest { config: config.to_json(), seed_files, aggregate: agg_name };
    let man_path = out_dir.join(manifest_file(tag));
    let mut text = serde_json::to_string_pretty(&manifest)?;
    text.push('\n');
    write_atomic(&man_path, text.as_bytes())?;
    files.push(man_path);
    Ok(RunReport { out_dir: out_dir.to_path_buf(), files, aggregate: agg })
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerifyReport {
    pub checked: Vec<UseCase>,
    pub problems: Vec<String>,
}

impl VerifyReport {
    pub fn ok(&self) -> bool {
        self.problems.is_empty() && !self.checked.is_empty()
    }
}

/// Recomputes every aggregate in `dir` from its per-seed files.
pub fn verify(dir: &Path) -> Result<VerifyReport> {
    let mut report = VerifyReport { checked: Vec::new(), problems: Vec::new() };
    for tag in UseCase::ALL {
        let man_path = dir.join(manifest_file(tag));
        if !man_path.exists() {
            continue;
        }
        report.checked.push(tag);
        let manifest: Manifest = serde_json::from_str(&std::fs::read_to_string(&man_path)?)?;
        let mut runs = Vec::new();
        for (_, name) in &manifest.seed_files {
            match std::fs::File::open(dir.join(name)) {
                Ok(f) => runs.push(Series::read_csv(f)?),
                Err(e) => report.problems.push(format!("{name}: {e}")),
            }
        }
        if runs.len() != manifest.seed_files.len() {
            continue;
        }
        let stored = std::fs::read_to_string(dir.join(&manifest.aggregate))?;
        match aggregate(&runs) {
            Ok(agg) if agg.to_csv_string() == stored => {}
            Ok(_) => report.problems.push(format!("{}: does not match its per-seed files", manifest.aggregate)),
            Err(e) => report.problems.push(format!("{tag}: {e}")),
        }
    }
    if report.checked.is_empty() {
        report.problems.push(format!("no manifests found in {}", dir.display()));
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_gets_defaults() {
        let c = ExperimentConfig::from_json(r#"{"tag": "wncs", "seeds": [1]}"#).unwrap();
        match &c.params {
            UseCaseParams::Wncs(p) => {
                assert_eq!((p.a, p.b, p.sigma_initial), (1.1, -0.25, 0.02));
                assert_eq!(p, &WncsParams::default());
            }
            other => panic!("wrong params {other:?}"),
        }
        for tag in UseCase::ALL {
            assert_eq!(UseCaseParams::defaults(tag).tag(), tag);
            assert_eq!(tag.name().parse::<UseCase>().unwrap(), tag);
        }
    }

    #[test]
    fn rejects_bad_configs() {
        let err = ExperimentConfig::from_json(r#"{"tag": "wncs", "seeds": [1], "params": {"bogus": 1}}"#).unwrap_err();
        assert!(err.to_string().contains("bogus"), "{err}");
        let err = ExperimentConfig::from_json(r#"{"tag": "wncs", "seeds": [1], "extra": true}"#).unwrap_err();
        assert!(err.to_string().contains("extra"), "{err}");
        let err = ExperimentConfig::from_json(r#"{"tag": "nope", "seeds": [1]}"#).unwrap_err();
        assert!(err.to_string().contains("nope"), "{err}");
        let err = ExperimentConfig::from_json(r#"{"tag": "wncs", "seeds": []}"#).unwrap_err();
        assert!(err.to_string().contains("seeds"), "{err}");
        let err = ExperimentConfig::from_json(r#"{"tag": "wncs", "seeds": [1], "params": {"b": 0.0}}"#).unwrap_err();
        assert!(err.to_string().contains('b'), "{err}");
    }

    #[test]
    fn aggregate_is_columnwise_mean() {
        let mk = |v: f64| {
            let mut s = Series::new(&["t", "x"]);
            s.push(vec![0.0, v]);
            s.push(vec![1.0, 2.0 * v]);
            s
        };
        let agg = aggregate(&[mk(1.0), mk(2.0), mk(3.0)]).unwrap();
        assert_eq!(agg.columns, ["t", "x_mean", "x_std"]);
        assert_eq!(agg.column("x_mean").unwrap(), vec![2.0, 4.0]);
        assert!((agg.column("x_std").unwrap()[0] - (2.0f64 / 3.0).sqrt()).abs() < 1e-15);
        let mut bad = mk(1.0);
        bad.rows[1][0] = 5.0;
        assert!(aggregate(&[mk(1.0), bad]).is_err());
    }

    #[test]
    fn atomic_write_replaces_content() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.csv");
        write_atomic(&p, b"one").unwrap();
        write_atomic(&p, b"two").unwrap();
        assert_eq!(std::fs::read(&p).unwrap(), b"two");
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
    }
}
