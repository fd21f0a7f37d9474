//! Experiment configs, instance sources, sweeps and report files.

mod fit;
mod generate;
mod modes;

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::counting::{BoxZ, Weight};
use crate::util::{round9, sha256_hex};
use crate::variety::{DimensionOptions, Instance};
use crate::{Error, Result};

pub use fit::{fit_exponent, FitResult};
pub use generate::{generate_instance, monomials_of_degree, random_poly, GeneratorParams};

pub const SCHEMA_VERSION: u32 = 1;
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum RunMode {
    Count,
    FfPoints,
    SingDim,
    ExpSum,
    Audit,
    SelectPrimes,
    HooleySweep,
    KatzSweep,
    Thm2Sweep,
    Weighted,
}

impl RunMode {
    pub const ALL: [RunMode; 10] = [
        RunMode::Count,
        RunMode::FfPoints,
        RunMode::SingDim,
        RunMode::ExpSum,
        RunMode::Audit,
        RunMode::SelectPrimes,
        RunMode::HooleySweep,
        RunMode::KatzSweep,
        RunMode::Thm2Sweep,
        RunMode::Weighted,
    ];

    pub fn name(self) -> &'static str {
        match self {
            RunMode::Count => "count",
            RunMode::FfPoints => "ffpoints",
            RunMode::SingDim => "singdim",
            RunMode::ExpSum => "expsum",
            RunMode::Audit => "audit",
            RunMode::SelectPrimes => "select-primes",
            RunMode::HooleySweep => "hooley-sweep",
            RunMode::KatzSweep => "katz-sweep",
            RunMode::Thm2Sweep => "thm2-sweep",
            RunMode::Weighted => "weighted",
        }
    }
}

impl fmt::Display for RunMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for RunMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        RunMode::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| {
                let names: Vec<&str> = RunMode::ALL.iter().map(|m| m.name()).collect();
                Error::InvalidInput(format!("unknown mode {s:?}; expected one of {}", names.join(", ")))
            })
    }
}

/// Where the instance comes from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InstanceSource {
    /// Path to an instance JSON file, relative to the config file.
    File(String),
    Inline(Instance),
    Generator(GeneratorParams),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxSpec {
    pub center: Vec<i64>,
    pub half: Vec<i64>,
}

impl BoxSpec {
    pub fn to_box(&self) -> Result<BoxZ> {
        BoxZ::new(self.center.clone(), self.half.clone())
    }
}

/// One experiment. Every numeric CLI flag has a field here; flags win.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub mode: String,
    pub instance: Option<InstanceSource>,
    pub seed: Option<u64>,
    pub budget: Option<u64>,
    pub threads: Option<usize>,
    /// Half-widths `B` for sweeps.
    pub b_list: Vec<u64>,
    pub q_list: Vec<u64>,
    pub b: Option<u64>,
    pub p: Option<u64>,
    pub q: Option<u64>,
    #[serde(rename = "box")]
    pub box_spec: Option<BoxSpec>,
    /// Random instances in the `expsum` and `audit` suites.
    pub trials: Option<u64>,
    /// Random (F, p, y) triples for the leading-form law in `audit`.
    pub law_trials: Option<u64>,
    /// Random V-subspace cases in `expsum`.
    pub v_trials: Option<u64>,
    /// Character sums sampled per `q` (`katz-sweep`) or per check (`expsum`).
    pub samples: Option<u64>,
    /// Linear forms for the V-subspace identity.
    pub linear_forms: Vec<String>,
    /// `(n, r)` pairs for `select-primes`.
    pub pairs: Vec<(usize, usize)>,
    pub relaxed: bool,
    pub exact_identity: bool,
    /// Classify every difference vector in `audit`.
    pub census: bool,
    /// Compute the strata `S`, `T_s` in `singdim`.
    pub strata: bool,
    pub weight: Option<Weight>,
    pub dimension: Option<DimensionOptions>,
    /// Output directory; not part of the digest.
    pub out: Option<String>,
}

impl ExperimentConfig {
    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    /// Reads a config; instance file paths are resolved against its directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::from(e).context(path.display().to_string()))?;
        let mut cfg = Self::from_json(&text).map_err(|e| e.context(path.display().to_string()))?;
        if let Some(InstanceSource::File(f)) = &cfg.instance {
            let p = PathBuf::from(f);
            if p.is_relative() {
                let base = path.parent().unwrap_or(Path::new("."));
                cfg.instance = Some(InstanceSource::File(base.join(p).display().to_string()));
            }
        }
        Ok(cfg)
    }

    pub fn run_mode(&self) -> Result<RunMode> {
        self.mode.parse()
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }

    pub fn budget(&self) -> u64 {
        self.budget.unwrap_or(crate::DEFAULT_BUDGET)
    }

    pub fn dimension_options(&self) -> DimensionOptions {
        let mut d = self.dimension.clone().unwrap_or_default();
        if self.dimension.is_none() {
            d.seed = self.seed();
        }
        d
    }

    /// sha256 of the canonical JSON, ignoring the output directory and thread count.
    pub fn digest(&self) -> String {
        let mut c = self.clone();
        c.out = None;
        c.threads = None;
        if let Some(InstanceSource::File(f)) = &c.instance {
            // the same file reached through different relative paths
            let name = Path::new(f).file_name().map(|s| s.to_string_lossy().into_owned());
            c.instance = Some(InstanceSource::File(name.unwrap_or_default()));
        }
        sha256_hex(serde_json::to_string(&c).expect("config serializes").as_bytes())
    }

    /// Checks everything that can be checked before any work starts.
    pub fn validate(&self) -> Result<RunMode> {
        let mode = self.run_mode()?;
        let need = |ok: bool, what: &str| {
            if ok {
                Ok(())
            } else {
                Err(Error::InvalidInput(format!("mode {mode} needs {what}")))
            }
        };
        let suite = self.trials.is_some() || self.v_trials.is_some() || self.law_trials.is_some();
        match mode {
            RunMode::Count => {
                need(self.instance.is_some(), "an instance")?;
                need(!self.b_list.is_empty(), "a nonempty b_list")?;
            }
            RunMode::FfPoints | RunMode::SingDim | RunMode::HooleySweep | RunMode::KatzSweep => {
                need(self.instance.is_some(), "an instance")?;
                need(!self.q_list.is_empty(), "a nonempty q_list")?;
            }
            RunMode::ExpSum => {
                if !suite {
                    need(self.instance.is_some(), "an instance or trials")?;
                    need(!self.q_list.is_empty(), "a nonempty q_list")?;
                    need(self.box_spec.is_some(), "a box")?;
                }
            }
            RunMode::Audit => {
                if !suite {
                    need(self.instance.is_some(), "an instance or trials")?;
                    need(self.b.is_some() && self.p.is_some() && self.q.is_some(), "b, p and q")?;
                }
            }
            RunMode::SelectPrimes => {
                need(!self.pairs.is_empty(), "a nonempty list of (n, r) pairs")?;
            }
            RunMode::Thm2Sweep => {
                need(self.instance.is_some(), "an instance")?;
                need(!self.b_list.is_empty(), "a nonempty b_list")?;
            }
            RunMode::Weighted => {
                need(self.instance.is_some(), "an instance")?;
                need(self.weight.is_some(), "a weight")?;
                need(!self.b_list.is_empty(), "a nonempty b_list")?;
                need(self.q.is_some(), "q")?;
            }
        }
        if let Some(InstanceSource::Generator(g)) = &self.instance {
            need(g.seed.is_some() || self.seed.is_some(), "a seed for the generator")?;
        }
        if self.threads == Some(0) {
            return Err(Error::InvalidInput("threads must be positive".into()));
        }
        Ok(mode)
    }

    /// Resolves the instance source.
    pub fn instance(&self) -> Result<Option<Instance>> {
        match &self.instance {
            None => Ok(None),
            Some(InstanceSource::Inline(i)) => Ok(Some(i.clone())),
            Some(InstanceSource::File(f)) => Instance::load(f).map(Some).map_err(|e| e.context(f.clone())),
            Some(InstanceSource::Generator(g)) => {
                let mut g = g.clone();
                g.seed = g.seed.or(self.seed);
                generate_instance(&g, &self.dimension_options()).map(Some)
            }
        }
    }
}

/// Identifies an instance inside a report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InstanceSummary {
    pub digest: String,
    pub n: usize,
    pub r: usize,
    pub polys: Vec<String>,
}

impl InstanceSummary {
    pub fn of(inst: &Instance) -> Self {
        InstanceSummary {
            digest: inst.digest(),
            n: inst.n(),
            r: inst.r(),
            polys: inst.polys().iter().map(|p| p.to_string()).collect(),
        }
    }
}

/// The machine-readable report. Contains nothing that varies between runs
/// of the same config.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema: u32,
    pub mode: String,
    pub version: String,
    pub config_digest: String,
    pub seed: u64,
    pub instance: Option<InstanceSummary>,
    pub result: Value,
    /// Named pass/fail outcomes computed by the mode.
    pub checks: BTreeMap<String, bool>,
}

impl Report {
    pub fn passed(&self) -> bool {
        self.checks.values().all(|&v| v)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

/// A CSV table written next to the report.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub name: String,
    pub csv: String,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub steps: Vec<(String, f64)>,
    pub total: f64,
}

#[derive(Clone, Debug)]
pub struct RunOutput {
    pub report: Report,
    pub tables: Vec<Table>,
    pub summary: String,
    pub timings: Timings,
}

impl RunOutput {
    /// Writes `report.json`, the CSV tables, `summary.txt` and `timings.json`.
    pub fn write(&self, dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir)?;
        let mut written = Vec::new();
        let mut put = |name: &str, text: &str| -> Result<()> {
            let p = dir.join(name);
            std::fs::write(&p, text).map_err(|e| Error::from(e).context(p.display().to_string()))?;
            written.push(p);
            Ok(())
        };
        put("report.json", &self.report.to_json())?;
        for t in &self.tables {
            put(&t.name, &t.csv)?;
        }
        let mut summary = self.summary.clone();
        summary.push_str(&format!("\nwall clock: {:.3} s\n", self.timings.total));
        for (step, secs) in &self.timings.steps {
            summary.push_str(&format!("  {step}: {secs:.3} s\n"));
        }
        put("summary.txt", &summary)?;
        put(
            "timings.json",
            &(serde_json::to_string_pretty(&self.timings)? + "\n"),
        )?;
        Ok(written)
    }
}

/// Rounds every float in a JSON tree to 9 decimals.
pub fn round_floats(v: &mut Value) {
    match v {
        Value::Number(num) => {
            if num.is_f64() {
                let x = round9(num.as_f64().unwrap());
                if let Some(n) = serde_json::Number::from_f64(x) {
                    *num = n;
                }
            }
        }
        Value::Array(a) => a.iter_mut().for_each(round_floats),
        Value::Object(o) => o.values_mut().for_each(round_floats),
        _ => {}
    }
}

/// Records named wall-clock steps.
pub(crate) struct Clock {
    start: Instant,
    last: Instant,
    steps: Vec<(String, f64)>,
}

impl Clock {
    fn new() -> Self {
        let now = Instant::now();
        Clock {
            start: now,
            last: now,
            steps: Vec::new(),
        }
    }

    pub(crate) fn lap(&mut self, name: impl Into<String>) {
        let now = Instant::now();
        self.steps.push((name.into(), (now - self.last).as_secs_f64()));
        self.last = now;
    }

    fn finish(self) -> Timings {
        Timings {
            total: self.start.elapsed().as_secs_f64(),
            steps: self.steps,
        }
    }
}

/// What a mode hands back before the report is assembled.
pub(crate) struct ModeOutput {
    pub result: Value,
    pub checks: BTreeMap<String, bool>,
    pub tables: Vec<Table>,
    pub summary: String,
}

/// Validates the config, runs its mode and assembles the outputs.
pub fn run(config: &ExperimentConfig) -> Result<RunOutput> {
    let mode = config.validate()?;
    let work = || -> Result<RunOutput> {
        let mut clock = Clock::new();
        let inst = config.instance()?;
        clock.lap("instance");
        let out = modes::dispatch(mode, config, inst.as_ref(), &mut clock)?;
        let mut result = out.result;
        round_floats(&mut result);
        let report = Report {
            schema: SCHEMA_VERSION,
            mode: mode.name().to_string(),
            version: VERSION.to_string(),
            config_digest: config.digest(),
            seed: config.seed(),
            instance: inst.as_ref().map(InstanceSummary::of),
            result,
            checks: out.checks,
        };
        let mut summary = format!(
            "vdclab {VERSION} mode {mode}, seed {}, config {}\n",
            config.seed(),
            &report.config_digest[..12]
        );
        if let Some(i) = &inst {
            summary.push_str(&format!("instance: {i}\n"));
        }
        summary.push_str(&out.summary);
        for (name, ok) in &report.checks {
            summary.push_str(&format!("{} {name}\n", if *ok { "PASS" } else { "FAIL" }));
        }
        Ok(RunOutput {
            report,
            tables: out.tables,
            summary,
            timings: clock.finish(),
        })
    };
    match config.threads {
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build()
            .map_err(|e| Error::InvalidInput(e.to_string()))?
            .install(work),
        None => work(),
    }
}

/// Column documentation per mode, for `--help`.
pub const CSV_COLUMNS: &str = "\
CSV tables written next to report.json:
  count         counts.csv: b, q, count, ratio
  ffpoints      ffpoints.csv: q, affine, projective_z
  singdim       singdim.csv: q, dim_z, dim_sing, good
  expsum        fourier.csv: trial, n, r, q, lhs, rhs_re, rhs_im, abs_err, sampled
                vsubspace.csv: trial, q, k, lhs, rhs, abs_err
  audit         delta_table.csv: y1..yn, numerator, denominator
                audits.csv (suites): trial, n, r, b, p, q, N, count_x_fp, all_identities
  select-primes plans.csv: n, r, b, e_p, e_q, thm1, heath_brown, p, q
  hooley-sweep  hooley.csv: q, count, main, residual, bound, ratio
  katz-sweep    katz_q<q>.csv: a, abs_sum, delta, ratio
  thm2-sweep    thm2.csv: b, p, q, count, main, residual, error_sum, c
  weighted      weighted.csv: b, q, lhs, rhs_main, residual, error_term";

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_mode_is_rejected_before_work() {
        let cfg = ExperimentConfig {
            mode: "frobnicate".into(),
            ..ExperimentConfig::default()
        };
        let err = run(&cfg).unwrap_err();
        assert!(err.to_string().contains("unknown mode"), "{err}");
    }

    #[test]
    fn config_roundtrip_and_digest() {
        let text = r#"{"mode":"hooley-sweep","instance":{"inline":{"n":2,"r":1,"polys":[{"n":2,"terms":[[[3,0],"1"],[[0,3],"1"]]}]}},"q_list":[5,7],"out":"x"}"#;
        let cfg = ExperimentConfig::from_json(text).unwrap();
        assert_eq!(cfg.validate().unwrap(), RunMode::HooleySweep);
        let mut other = cfg.clone();
        other.out = Some("elsewhere".into());
        assert_eq!(cfg.digest(), other.digest());
        other.q_list.push(11);
        assert_ne!(cfg.digest(), other.digest());
        assert!(ExperimentConfig::from_json(r#"{"mode":"count","bogus":1}"#).is_err());
    }

    #[test]
    fn validation_messages() {
        let cfg = ExperimentConfig {
            mode: "count".into(),
            ..ExperimentConfig::default()
        };
        assert!(cfg.validate().unwrap_err().to_string().contains("instance"));
        let cfg = ExperimentConfig {
            mode: "select-primes".into(),
            ..ExperimentConfig::default()
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn float_rounding() {
        let mut v = serde_json::json!({"a": [0.1234567891234, 2], "b": {"c": -1e-12}});
        round_floats(&mut v);
        assert_eq!(v, serde_json::json!({"a": [0.123456789, 2], "b": {"c": 0.0}}));
    }
}
