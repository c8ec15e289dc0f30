use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::envs::EnvKind;
use crate::error::{Error, Result};
use crate::qnet::Architecture;
use crate::rl::TrainConfig;
use crate::theory::{InputSource, LemmaConfig, SweepConfig, WeightDraw};

/// Environment variable naming the root under which runs without `--out` are written.
pub const OUT_DIR_ENV: &str = "SDQN_OUT_DIR";
/// Output root when neither `--out`, `out =` nor the environment variable is set.
pub const DEFAULT_OUT_ROOT: &str = "runs";
pub const RESOLVED_FILE: &str = "config.resolved";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    Train,
    Eval,
    VerifyLemma,
    VerifyTheorem,
    VerifyMoments,
    SweepFiring,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Train => "train",
            Command::Eval => "eval",
            Command::VerifyLemma => "verify-lemma",
            Command::VerifyTheorem => "verify-theorem",
            Command::VerifyMoments => "verify-moments",
            Command::SweepFiring => "sweep-firing",
        }
    }
}

impl FromStr for Command {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [
            Command::Train,
            Command::Eval,
            Command::VerifyLemma,
            Command::VerifyTheorem,
            Command::VerifyMoments,
            Command::SweepFiring,
        ]
        .into_iter()
        .find(|c| c.name() == s)
        .ok_or_else(|| Error::invalid(format!("unknown command `{s}`")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PbLnMode {
    On,
    Off,
    /// Run both arms with identical seeds and compare them.
    Both,
}

impl PbLnMode {
    pub fn name(self) -> &'static str {
        match self {
            PbLnMode::On => "on",
            PbLnMode::Off => "off",
            PbLnMode::Both => "both",
        }
    }

    /// The pbLN settings this mode runs, `on` first.
    pub fn arms(self) -> Vec<bool> {
        match self {
            PbLnMode::On => vec![true],
            PbLnMode::Off => vec![false],
            PbLnMode::Both => vec![true, false],
        }
    }
}

impl FromStr for PbLnMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "on" | "true" => Ok(PbLnMode::On),
            "off" | "false" => Ok(PbLnMode::Off),
            "both" => Ok(PbLnMode::Both),
            _ => Err(Error::invalid(format!("expected on, off or both, got `{s}`"))),
        }
    }
}

/// Network shape presets sized for 24×24 frames.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NetPreset {
    /// c8k3s1, c16k3s2, FC 64.
    Small,
    /// c32k8s2, c64k4s1, c64k3s1, FC 512.
    Deep,
}

impl NetPreset {
    pub fn name(self) -> &'static str {
        match self {
            NetPreset::Small => "small",
            NetPreset::Deep => "deep",
        }
    }

    pub fn build(self, n_actions: usize) -> Architecture {
        match self {
            NetPreset::Small => Architecture::desk_small(n_actions),
            NetPreset::Deep => Architecture::desk_deep(n_actions),
        }
    }
}

impl FromStr for NetPreset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "small" => Ok(NetPreset::Small),
            "deep" => Ok(NetPreset::Deep),
            _ => Err(Error::invalid(format!("expected small or deep, got `{s}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalSettings {
    pub episodes: usize,
    /// Checkpoint to evaluate; defaults to the one `train` writes into the output directory.
    pub checkpoint: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TheorySettings {
    /// `seed` is taken from the run seed.
    pub lemma: LemmaConfig,
    pub v_th: f64,
    pub sweep_k: Vec<f64>,
    pub sweep_p: Vec<f64>,
    pub moment_p: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepSettings {
    pub seeds: usize,
    /// `None` uses observations from the run's environment.
    pub source: Option<InputSource>,
    pub observations: usize,
    pub net: NetPreset,
}

/// Every effective setting of one command invocation.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub command: Command,
    pub env: EnvKind,
    pub seed: u64,
    pub pbln: PbLnMode,
    pub out: PathBuf,
    pub net: NetPreset,
    /// Its `seed` and `pbln` fields are overwritten from the run-level values.
    pub train: TrainConfig,
    pub eval: EvalSettings,
    pub theory: TheorySettings,
    pub sweep: SweepSettings,
}

impl RunConfig {
    pub fn defaults(command: Command, out: PathBuf) -> Self {
        Self {
            command,
            env: EnvKind::Catch,
            seed: 0,
            // The firing sweep exists to contrast the two arms.
            pbln: if command == Command::SweepFiring {
                PbLnMode::Both
            } else {
                PbLnMode::On
            },
            out,
            net: NetPreset::Small,
            train: TrainConfig::default(),
            eval: EvalSettings {
                episodes: 100,
                checkpoint: None,
            },
            theory: TheorySettings {
                lemma: LemmaConfig::default(),
                v_th: 1.0,
                sweep_k: vec![0.1, 0.5, 1.0],
                sweep_p: vec![0.1, 0.5, 0.9],
                moment_p: vec![0.0, 0.25, 0.5, 1.0],
            },
            sweep: SweepSettings {
                seeds: 10,
                source: None,
                observations: 8,
                net: NetPreset::Deep,
            },
        }
    }

    /// Training settings for one pbLN arm, with the run seed applied.
    pub fn train_config(&self, pbln: bool) -> TrainConfig {
        TrainConfig {
            seed: self.seed,
            pbln,
            ..self.train.clone()
        }
    }

    /// Training architecture for the run's environment (pbLN set per arm by [`TrainConfig::network`]).
    pub fn architecture(&self) -> Architecture {
        let n_actions = self.env.make(0).n_actions();
        self.net.build(n_actions)
    }

    pub fn lemma(&self) -> LemmaConfig {
        LemmaConfig {
            seed: self.seed,
            ..self.theory.lemma
        }
    }

    pub fn sweep_config(&self) -> SweepConfig {
        let n_actions = self.env.make(0).n_actions();
        let mut arch = self.sweep.net.build(n_actions).with_time_window(self.train.time_window);
        arch.lif = self.train.lif;
        arch.pbln.fc = self.train.pbln_fc;
        SweepConfig {
            arch,
            source: self.sweep.source.unwrap_or(InputSource::Env(self.env)),
            n_seeds: self.sweep.seeds,
            base_seed: self.seed,
            observations: self.sweep.observations,
        }
    }

    /// Sets one dotted key from its text value.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let t = &mut self.train;
        let th = &mut self.theory;
        match key {
            "env" => self.env = parse(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            "pbln" => self.pbln = parse(key, value)?,
            "out" => self.out = PathBuf::from(value),
            "lif.tau" => t.lif.tau = parse(key, value)?,
            "lif.v_th" => t.lif.v_th = parse(key, value)?,
            "lif.v_reset" => t.lif.v_reset = parse(key, value)?,
            "net.preset" => self.net = parse(key, value)?,
            "net.time_window" => t.time_window = parse(key, value)?,
            "net.pbln_fc" => t.pbln_fc = parse_bool(key, value)?,
            "train.gamma" => t.gamma = parse(key, value)?,
            "train.lr" => t.lr = parse(key, value)?,
            "train.frames" => t.frames = parse(key, value)?,
            "train.batch_size" => t.batch_size = parse(key, value)?,
            "train.replay_capacity" => t.replay_capacity = parse(key, value)?,
            "train.target_sync" => t.target_sync = parse(key, value)?,
            "train.train_every" => t.train_every = parse(key, value)?,
            "train.learning_starts" => t.learning_starts = parse(key, value)?,
            "train.eps_start" => t.epsilon.start = parse(key, value)?,
            "train.eps_end" => t.epsilon.end = parse(key, value)?,
            "train.eps_decay_frames" => t.epsilon.decay_frames = parse(key, value)?,
            "train.log_every" => t.log_every = parse(key, value)?,
            "train.eval_every" => t.eval_every = parse(key, value)?,
            "train.eval_episodes" => t.eval_episodes = parse(key, value)?,
            "train.stop_return" => t.stop_return = parse_opt(key, value)?,
            "train.grad_clip" => t.grad_clip = parse_opt(key, value)?,
            "eval.episodes" => self.eval.episodes = parse(key, value)?,
            "eval.checkpoint" => {
                self.eval.checkpoint = match value {
                    "" | "none" => None,
                    v => Some(PathBuf::from(v)),
                }
            }
            "theory.tau" => th.lemma.tau = parse(key, value)?,
            "theory.k" => th.lemma.k = parse(key, value)?,
            "theory.p" => th.lemma.p = parse(key, value)?,
            "theory.t" => th.lemma.t = parse(key, value)?,
            "theory.trials" => th.lemma.trials = parse(key, value)?,
            "theory.fan_in" => th.lemma.fan_in = parse(key, value)?,
            "theory.weights" => {
                th.lemma.weights = match value {
                    "per-step" => WeightDraw::PerStep,
                    "per-trial" => WeightDraw::PerTrial,
                    _ => return Err(mismatch(key, "per-step or per-trial", value)),
                }
            }
            "theory.v_th" => th.v_th = parse(key, value)?,
            "theory.sweep_k" => th.sweep_k = parse_list(key, value)?,
            "theory.sweep_p" => th.sweep_p = parse_list(key, value)?,
            "theory.moment_p" => th.moment_p = parse_list(key, value)?,
            "sweep.seeds" => self.sweep.seeds = parse(key, value)?,
            "sweep.source" => {
                self.sweep.source = match value {
                    "env" => None,
                    v => Some(parse(key, v)?),
                }
            }
            "sweep.observations" => self.sweep.observations = parse(key, value)?,
            "sweep.net" => self.sweep.net = parse(key, value)?,
            _ => return Err(Error::UnknownKey(key.to_string())),
        }
        Ok(())
    }

    /// Every key with its effective value, in a fixed order. Feeding these
    /// back through [`RunConfig::set`] reproduces the configuration exactly.
    pub fn entries(&self) -> Vec<(&'static str, String)> {
        let t = &self.train;
        let th = &self.theory;
        let opt = |v: Option<f64>| v.map_or("none".to_string(), |v| v.to_string());
        let list = |v: &[f64]| v.iter().map(f64::to_string).collect::<Vec<_>>().join(",");
        vec![
            ("env", self.env.name().to_string()),
            ("seed", self.seed.to_string()),
            ("pbln", self.pbln.name().to_string()),
            ("out", self.out.display().to_string()),
            ("lif.tau", t.lif.tau.to_string()),
            ("lif.v_th", t.lif.v_th.to_string()),
            ("lif.v_reset", t.lif.v_reset.to_string()),
            ("net.preset", self.net.name().to_string()),
            ("net.time_window", t.time_window.to_string()),
            ("net.pbln_fc", on_off(t.pbln_fc)),
            ("train.gamma", t.gamma.to_string()),
            ("train.lr", t.lr.to_string()),
            ("train.frames", t.frames.to_string()),
            ("train.batch_size", t.batch_size.to_string()),
            ("train.replay_capacity", t.replay_capacity.to_string()),
            ("train.target_sync", t.target_sync.to_string()),
            ("train.train_every", t.train_every.to_string()),
            ("train.learning_starts", t.learning_starts.to_string()),
            ("train.eps_start", t.epsilon.start.to_string()),
            ("train.eps_end", t.epsilon.end.to_string()),
            ("train.eps_decay_frames", t.epsilon.decay_frames.to_string()),
            ("train.log_every", t.log_every.to_string()),
            ("train.eval_every", t.eval_every.to_string()),
            ("train.eval_episodes", t.eval_episodes.to_string()),
            ("train.stop_return", opt(t.stop_return)),
            ("train.grad_clip", opt(t.grad_clip)),
            ("eval.episodes", self.eval.episodes.to_string()),
            (
                "eval.checkpoint",
                self.eval
                    .checkpoint
                    .as_ref()
                    .map_or("none".to_string(), |p| p.display().to_string()),
            ),
            ("theory.tau", th.lemma.tau.to_string()),
            ("theory.k", th.lemma.k.to_string()),
            ("theory.p", th.lemma.p.to_string()),
            ("theory.t", th.lemma.t.to_string()),
            ("theory.trials", th.lemma.trials.to_string()),
            ("theory.fan_in", th.lemma.fan_in.to_string()),
            (
                "theory.weights",
                match th.lemma.weights {
                    WeightDraw::PerStep => "per-step",
                    WeightDraw::PerTrial => "per-trial",
                }
                .to_string(),
            ),
            ("theory.v_th", th.v_th.to_string()),
            ("theory.sweep_k", list(&th.sweep_k)),
            ("theory.sweep_p", list(&th.sweep_p)),
            ("theory.moment_p", list(&th.moment_p)),
            ("sweep.seeds", self.sweep.seeds.to_string()),
            (
                "sweep.source",
                self.sweep.source.map_or("env", |s| s.name()).to_string(),
            ),
            ("sweep.observations", self.sweep.observations.to_string()),
            ("sweep.net", self.sweep.net.name().to_string()),
        ]
    }

    /// The `config.resolved` text, itself a valid config file.
    pub fn resolved(&self) -> String {
        let mut out = format!("# command: {}\n", self.command.name());
        for (k, v) in self.entries() {
            out.push_str(&format!("{k} = {}\n", toml_literal(k, &v)));
        }
        out
    }

    /// Applies a TOML config text. Tables and dotted keys both name settings,
    /// so `[train]` followed by `lr = 0.001` equals `train.lr = 0.001`.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        let table: toml::Table = text.parse().map_err(|e: toml::de::Error| Error::Config {
            key: "config".to_string(),
            msg: e.message().to_string(),
        })?;
        let mut flat = Vec::new();
        flatten("", &table, &mut flat)?;
        for (key, value) in flat {
            self.set(&key, &value)?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::from(e).context(format!("config file {}", path.display())))?;
        self.apply_text(&text)
    }

    /// Range checks of every section the command uses.
    pub fn validate(&self) -> Result<()> {
        self.train_config(true).validate()?;
        self.architecture().validate()?;
        if self.eval.episodes == 0 {
            return Err(Error::Config {
                key: "eval.episodes".into(),
                msg: "must be positive".into(),
            });
        }
        self.lemma().validate()?;
        if self.sweep.observations == 0 {
            return Err(Error::Config {
                key: "sweep.observations".into(),
                msg: "must be positive".into(),
            });
        }
        Ok(())
    }
}

fn on_off(b: bool) -> String {
    if b { "on" } else { "off" }.to_string()
}

/// Keys whose value is a comma-separated list.
const LIST_KEYS: [&str; 3] = ["theory.sweep_k", "theory.sweep_p", "theory.moment_p"];

fn toml_literal(key: &str, value: &str) -> String {
    if LIST_KEYS.contains(&key) {
        return format!(
            "[{}]",
            value
                .split(',')
                .filter(|v| !v.is_empty())
                .collect::<Vec<_>>()
                .join(", ")
        );
    }
    let bare = value == "true" || value == "false" || value.parse::<f64>().is_ok_and(f64::is_finite);
    if bare {
        value.to_string()
    } else {
        toml::Value::String(value.to_string()).to_string()
    }
}

/// Dotted keys and string values in document order.
fn flatten(prefix: &str, table: &toml::Table, out: &mut Vec<(String, String)>) -> Result<()> {
    for (k, v) in table {
        let key = if prefix.is_empty() {
            k.clone()
        } else {
            format!("{prefix}.{k}")
        };
        match v {
            toml::Value::Table(t) => flatten(&key, t, out)?,
            v => {
                let text = scalar_text(&key, v)?;
                out.push((key, text));
            }
        }
    }
    Ok(())
}

fn scalar_text(key: &str, v: &toml::Value) -> Result<String> {
    Ok(match v {
        toml::Value::String(s) => s.clone(),
        toml::Value::Integer(i) => i.to_string(),
        toml::Value::Float(f) => f.to_string(),
        toml::Value::Boolean(b) => b.to_string(),
        toml::Value::Array(items) => items
            .iter()
            .map(|i| scalar_text(key, i))
            .collect::<Result<Vec<_>>>()?
            .join(","),
        other => return Err(mismatch(key, "a number, string, boolean or list", &other.to_string())),
    })
}

fn mismatch(key: &str, want: &str, got: &str) -> Error {
    Error::Config {
        key: key.to_string(),
        msg: format!("expected {want}, got `{got}`"),
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: Display,
{
    value.parse().map_err(|e: T::Err| Error::Config {
        key: key.to_string(),
        msg: format!("cannot parse `{value}`: {e}"),
    })
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "on" | "true" => Ok(true),
        "off" | "false" => Ok(false),
        _ => Err(mismatch(key, "on or off", value)),
    }
}

fn parse_opt(key: &str, value: &str) -> Result<Option<f64>> {
    match value {
        "none" | "" => Ok(None),
        v => parse(key, v).map(Some),
    }
}

fn parse_list(key: &str, value: &str) -> Result<Vec<f64>> {
    let v: Vec<f64> = value.split(',').map(|s| parse(key, s.trim())).collect::<Result<_>>()?;
    Ok(v)
}

/// Command-line values that take precedence over the config file.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Overrides {
    pub config: Option<PathBuf>,
    pub seed: Option<u64>,
    pub pbln: Option<PbLnMode>,
    pub env: Option<EnvKind>,
    pub out: Option<PathBuf>,
    pub frames: Option<usize>,
    pub checkpoint: Option<PathBuf>,
    /// Extra `key=value` assignments, applied last.
    pub set: Vec<String>,
}

/// Defaults, then the config file, then the flags. Without any output
/// setting the run goes to `<out_root>/<command>`, where `out_root` is the
/// value of [`OUT_DIR_ENV`] if given, else [`DEFAULT_OUT_ROOT`].
pub fn resolve(command: Command, flags: &Overrides, out_root: Option<&str>) -> Result<RunConfig> {
    let root = PathBuf::from(out_root.filter(|r| !r.is_empty()).unwrap_or(DEFAULT_OUT_ROOT));
    let mut cfg = RunConfig::defaults(command, root.join(command.name()));
    if let Some(path) = &flags.config {
        cfg.apply_file(path)?;
    }
    if let Some(s) = flags.seed {
        cfg.seed = s;
    }
    if let Some(p) = flags.pbln {
        cfg.pbln = p;
    }
    if let Some(e) = flags.env {
        cfg.env = e;
    }
    if let Some(o) = &flags.out {
        cfg.out = o.clone();
    }
    if let Some(f) = flags.frames {
        cfg.train.frames = f;
    }
    if let Some(c) = &flags.checkpoint {
        cfg.eval.checkpoint = Some(c.clone());
    }
    for kv in &flags.set {
        let (k, v) = kv.split_once('=').ok_or_else(|| Error::Config {
            key: kv.clone(),
            msg: "expected key=value".into(),
        })?;
        cfg.set(k.trim(), v.trim())?;
    }
    cfg.validate()?;
    Ok(cfg)
}
