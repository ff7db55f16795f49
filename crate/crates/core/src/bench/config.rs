//! Run configuration: a flat `key = value` text file.
//!
//! Blank lines and text after `#` are ignored. Keys:
//!
//! | key | values |
//! |---|---|
//! | `problem` | `lasso`, `svm_dual` |
//! | `data.libsvm` | path (exclusive with `data.synthetic.*`) |
//! | `data.synthetic.{n,d,density,noise,seed,sparsity,correlation,decay,margin}` | numbers |
//! | `lambda1` | `x` or `rel:x` (fraction of `max_i |A_i^T b|`) |
//! | `lambda_reg` | positive number |
//! | `k` | worker count |
//! | `gamma` | `1/k`, `1` or a number in `[1/K, 1]` |
//! | `sigma_prime` | `safe`, `estimate` or a number |
//! | `algorithm` | `acc`, `baseline`, `both` |
//! | `rounds` | outer rounds `T` |
//! | `local_solver` | `sdca`, `exact`, `schedule` |
//! | `h` | SDCA steps per round |
//! | `eps_schedule` | `constant:r` or `polynomial:r:p` |
//! | `seed` | base seed for partition and workers |
//! | `transport` | `in_process`, `loopback_socket` |
//! | `partition` | optional JSON sidecar to load blocks from |
//! | `output` | output directory |
//! | `reference` | `true`/`false`: compute `alpha*` and suboptimality |
//! | `reference_tol` | stationarity tolerance of the reference solve |
//! | `audit.lemma2`, `audit.theorem1` | `true`/`false` |
//! | `audit.eps_measure` | measure subproblem accuracy every N rounds (0 = off) |
//! | `wall_clock` | `true`/`false`; `false` writes zero timings |

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::bench::synth::SynthSpec;
use crate::cluster::Transport;
use crate::error::{Error, Result};
use crate::orchestrator::EpsSchedule;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProblemKind {
    Lasso,
    SvmDual,
}

#[derive(Debug, Clone, PartialEq)]
pub enum DataSource {
    Libsvm(PathBuf),
    Synthetic(SynthSpec),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Lambda1 {
    Absolute(f64),
    /// Fraction of the smallest value giving the all-zero solution.
    Relative(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GammaChoice {
    InverseK,
    One,
    Value(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SigmaChoice {
    Safe,
    Estimate,
    Value(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AlgorithmChoice {
    Acc,
    Baseline,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverKind {
    Sdca,
    Exact,
    Schedule,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub problem: ProblemKind,
    pub data: DataSource,
    pub lambda1: Lambda1,
    pub lambda_reg: f64,
    pub k: usize,
    pub gamma: GammaChoice,
    pub sigma_prime: SigmaChoice,
    pub algorithm: AlgorithmChoice,
    pub rounds: usize,
    pub local_solver: SolverKind,
    pub h: usize,
    pub eps_schedule: Option<EpsSchedule>,
    pub seed: u64,
    pub transport: Transport,
    pub partition: Option<PathBuf>,
    pub output: PathBuf,
    pub reference: bool,
    pub reference_tol: f64,
    pub audit_lemma2: bool,
    pub audit_theorem1: bool,
    pub audit_eps_measure: usize,
    pub wall_clock: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            problem: ProblemKind::Lasso,
            data: DataSource::Synthetic(SynthSpec::new(200, 50, 0)),
            lambda1: Lambda1::Relative(0.1),
            lambda_reg: 1e-2,
            k: 4,
            gamma: GammaChoice::One,
            sigma_prime: SigmaChoice::Safe,
            algorithm: AlgorithmChoice::Both,
            rounds: 100,
            local_solver: SolverKind::Sdca,
            h: 100,
            eps_schedule: None,
            seed: 0,
            transport: Transport::InProcess,
            partition: None,
            output: PathBuf::from("out"),
            reference: true,
            reference_tol: 1e-12,
            audit_lemma2: false,
            audit_theorem1: false,
            audit_eps_measure: 0,
            wall_clock: true,
        }
    }
}

fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidConfig(msg.into())
}

fn num<T: FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse()
        .map_err(|_| invalid(format!("{key}: cannot parse {v:?}")))
}

fn boolean(key: &str, v: &str) -> Result<bool> {
    match v {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(invalid(format!("{key}: expected true or false, got {v:?}"))),
    }
}

impl RunConfig {
    /// Applies one `key = value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        if let Some(field) = key.strip_prefix("data.synthetic.") {
            let mut spec = match &self.data {
                DataSource::Synthetic(s) => *s,
                DataSource::Libsvm(_) => SynthSpec::new(0, 0, 0),
            };
            match field {
                "n" => spec.n = num(key, v)?,
                "d" => spec.d = num(key, v)?,
                "density" => spec.density = num(key, v)?,
                "noise" => spec.noise = num(key, v)?,
                "seed" => spec.seed = num(key, v)?,
                "sparsity" => spec.sparsity = num(key, v)?,
                "correlation" => spec.correlation = num(key, v)?,
                "decay" => spec.decay = num(key, v)?,
                "margin" => spec.margin = num(key, v)?,
                _ => return Err(invalid(format!("unknown key {key:?}"))),
            }
            self.data = DataSource::Synthetic(spec);
            return Ok(());
        }
        match key {
            "problem" => {
                self.problem = match v {
                    "lasso" => ProblemKind::Lasso,
                    "svm_dual" => ProblemKind::SvmDual,
                    _ => return Err(invalid(format!("unknown problem {v:?}"))),
                }
            }
            "data.libsvm" => self.data = DataSource::Libsvm(PathBuf::from(v)),
            "lambda1" => {
                self.lambda1 = match v.strip_prefix("rel:") {
                    Some(r) => Lambda1::Relative(num(key, r)?),
                    None => Lambda1::Absolute(num(key, v)?),
                }
            }
            "lambda_reg" => self.lambda_reg = num(key, v)?,
            "k" => self.k = num(key, v)?,
            "gamma" => {
                self.gamma = match v {
                    "1/k" | "1/K" => GammaChoice::InverseK,
                    "1" => GammaChoice::One,
                    _ => GammaChoice::Value(num(key, v)?),
                }
            }
            "sigma_prime" => {
                self.sigma_prime = match v {
                    "safe" => SigmaChoice::Safe,
                    "estimate" => SigmaChoice::Estimate,
                    _ => SigmaChoice::Value(num(key, v)?),
                }
            }
            "algorithm" => {
                self.algorithm = match v {
                    "acc" => AlgorithmChoice::Acc,
                    "baseline" => AlgorithmChoice::Baseline,
                    "both" => AlgorithmChoice::Both,
                    _ => return Err(invalid(format!("unknown algorithm {v:?}"))),
                }
            }
            "rounds" => self.rounds = num(key, v)?,
            "local_solver" => {
                self.local_solver = match v {
                    "sdca" => SolverKind::Sdca,
                    "exact" => SolverKind::Exact,
                    "schedule" => SolverKind::Schedule,
                    _ => return Err(invalid(format!("unknown local solver {v:?}"))),
                }
            }
            "h" => self.h = num(key, v)?,
            "eps_schedule" => {
                self.eps_schedule = if v.is_empty() || v == "none" {
                    None
                } else {
                    Some(v.parse()?)
                }
            }
            "seed" => self.seed = num(key, v)?,
            "transport" => self.transport = v.parse()?,
            "partition" => self.partition = (!v.is_empty()).then(|| PathBuf::from(v)),
            "output" => self.output = PathBuf::from(v),
            "reference" => self.reference = boolean(key, v)?,
            "reference_tol" => self.reference_tol = num(key, v)?,
            "audit.lemma2" => self.audit_lemma2 = boolean(key, v)?,
            "audit.theorem1" => self.audit_theorem1 = boolean(key, v)?,
            "audit.eps_measure" => self.audit_eps_measure = num(key, v)?,
            "wall_clock" => self.wall_clock = boolean(key, v)?,
            _ => return Err(invalid(format!("unknown key {key:?}"))),
        }
        Ok(())
    }

    /// Applies a `key=value` override string.
    pub fn apply_override(&mut self, assignment: &str) -> Result<()> {
        let (k, v) = assignment
            .split_once('=')
            .ok_or_else(|| invalid(format!("override {assignment:?} is not key=value")))?;
        self.set(k.trim(), v)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        let mut seen: BTreeMap<String, usize> = BTreeMap::new();
        let mut libsvm = false;
        let mut synthetic = false;
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| invalid(format!("line {}: expected key = value", i + 1)))?;
            let k = k.trim();
            if let Some(prev) = seen.insert(k.to_string(), i + 1) {
                return Err(invalid(format!("line {}: {k} already set on line {prev}", i + 1)));
            }
            libsvm |= k == "data.libsvm";
            synthetic |= k.starts_with("data.synthetic.");
            cfg.set(k, v)?;
        }
        if libsvm && synthetic {
            return Err(invalid("both data.libsvm and data.synthetic.* given"));
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(invalid("k must be positive"));
        }
        if let GammaChoice::Value(g) = self.gamma {
            let lo = 1.0 / self.k as f64;
            if !(g >= lo * (1.0 - 1e-12) && g <= 1.0) {
                return Err(Error::InvalidGamma { gamma: g, k: self.k });
            }
        }
        if let SigmaChoice::Value(s) = self.sigma_prime {
            if !(s > 0.0 && s.is_finite()) {
                return Err(invalid(format!("sigma_prime {s} must be positive")));
            }
        }
        match self.lambda1 {
            Lambda1::Absolute(l) | Lambda1::Relative(l) if !(l > 0.0 && l.is_finite()) => {
                return Err(invalid(format!("lambda1 {l} must be positive")));
            }
            _ => {}
        }
        if !(self.lambda_reg > 0.0 && self.lambda_reg.is_finite()) {
            return Err(invalid(format!("lambda_reg {} must be positive", self.lambda_reg)));
        }
        if self.local_solver == SolverKind::Schedule && self.eps_schedule.is_none() {
            return Err(invalid("local_solver = schedule needs eps_schedule"));
        }
        if let DataSource::Synthetic(spec) = &self.data {
            spec.validate()?;
        }
        Ok(())
    }

    pub fn gamma_value(&self) -> f64 {
        match self.gamma {
            GammaChoice::InverseK => 1.0 / self.k as f64,
            GammaChoice::One => 1.0,
            GammaChoice::Value(g) => g,
        }
    }

    /// Canonical text form; [`RunConfig::parse`] reads it back unchanged.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        kv(
            "problem",
            match self.problem {
                ProblemKind::Lasso => "lasso",
                ProblemKind::SvmDual => "svm_dual",
            }
            .into(),
        );
        match &self.data {
            DataSource::Libsvm(p) => kv("data.libsvm", p.display().to_string()),
            DataSource::Synthetic(sp) => {
                kv("data.synthetic.n", sp.n.to_string());
                kv("data.synthetic.d", sp.d.to_string());
                kv("data.synthetic.density", format!("{:?}", sp.density));
                kv("data.synthetic.noise", format!("{:?}", sp.noise));
                kv("data.synthetic.seed", sp.seed.to_string());
                kv("data.synthetic.sparsity", format!("{:?}", sp.sparsity));
                kv("data.synthetic.correlation", format!("{:?}", sp.correlation));
                kv("data.synthetic.decay", format!("{:?}", sp.decay));
                kv("data.synthetic.margin", format!("{:?}", sp.margin));
            }
        }
        kv(
            "lambda1",
            match self.lambda1 {
                Lambda1::Absolute(l) => format!("{l:?}"),
                Lambda1::Relative(l) => format!("rel:{l:?}"),
            },
        );
        kv("lambda_reg", format!("{:?}", self.lambda_reg));
        kv("k", self.k.to_string());
        kv(
            "gamma",
            match self.gamma {
                GammaChoice::InverseK => "1/k".into(),
                GammaChoice::One => "1".into(),
                GammaChoice::Value(g) => format!("{g:?}"),
            },
        );
        kv(
            "sigma_prime",
            match self.sigma_prime {
                SigmaChoice::Safe => "safe".into(),
                SigmaChoice::Estimate => "estimate".into(),
                SigmaChoice::Value(v) => format!("{v:?}"),
            },
        );
        kv(
            "algorithm",
            match self.algorithm {
                AlgorithmChoice::Acc => "acc",
                AlgorithmChoice::Baseline => "baseline",
                AlgorithmChoice::Both => "both",
            }
            .into(),
        );
        kv("rounds", self.rounds.to_string());
        kv(
            "local_solver",
            match self.local_solver {
                SolverKind::Sdca => "sdca",
                SolverKind::Exact => "exact",
                SolverKind::Schedule => "schedule",
            }
            .into(),
        );
        kv("h", self.h.to_string());
        kv(
            "eps_schedule",
            self.eps_schedule.map_or("none".into(), |e| e.to_string()),
        );
        kv("seed", self.seed.to_string());
        kv("transport", self.transport.to_string());
        if let Some(p) = &self.partition {
            kv("partition", p.display().to_string());
        }
        kv("output", self.output.display().to_string());
        kv("reference", self.reference.to_string());
        kv("reference_tol", format!("{:?}", self.reference_tol));
        kv("audit.lemma2", self.audit_lemma2.to_string());
        kv("audit.theorem1", self.audit_theorem1.to_string());
        kv("audit.eps_measure", self.audit_eps_measure.to_string());
        kv("wall_clock", self.wall_clock.to_string());
        s
    }
}
