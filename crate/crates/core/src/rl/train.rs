use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{epsilon_greedy, evaluate, EpsilonSchedule, EvalPoint, EvalResult, MetricsRow, ReplayBuffer, RunSummary};
use crate::envs::{Environment, FrameStack, StackedFrames};
use crate::error::{Error, Result};
use crate::learn::{adam_step, td_gradients, AdamConfig, AdamState};
use crate::lif::LifParams;
use crate::qnet::{firing_stats, init_params, Architecture, NetworkParams, Simulator};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub gamma: f64,
    pub lr: f64,
    pub time_window: usize,
    pub lif: LifParams,
    /// pbLN on the conv layers.
    pub pbln: bool,
    /// pbLN on the FC layer as well.
    pub pbln_fc: bool,
    pub frames: usize,
    pub batch_size: usize,
    pub replay_capacity: usize,
    /// Frames between copies of the online network into the target network.
    pub target_sync: usize,
    /// Frames between gradient updates.
    pub train_every: usize,
    /// No updates before this many frames have been collected.
    pub learning_starts: usize,
    pub epsilon: EpsilonSchedule,
    pub log_every: usize,
    /// Frames between greedy evaluations; 0 disables them. An evaluation that
    /// falls due mid-episode runs when that episode ends.
    pub eval_every: usize,
    pub eval_episodes: usize,
    /// Stop as soon as a periodic evaluation reaches this mean return.
    pub stop_return: Option<f64>,
    pub grad_clip: Option<f64>,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            gamma: 0.99,
            lr: 1e-4,
            time_window: 16,
            lif: LifParams::default(),
            pbln: true,
            pbln_fc: false,
            frames: 50_000,
            batch_size: 32,
            replay_capacity: 50_000,
            target_sync: 1000,
            train_every: 4,
            learning_starts: 1000,
            epsilon: EpsilonSchedule {
                start: 1.0,
                end: 0.05,
                decay_frames: 20_000,
            },
            log_every: 1000,
            eval_every: 5000,
            eval_episodes: 100,
            stop_return: None,
            grad_clip: Some(10.0),
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("batch_size", self.batch_size),
            ("replay_capacity", self.replay_capacity),
            ("target_sync", self.target_sync),
            ("train_every", self.train_every),
            ("log_every", self.log_every),
            ("time_window", self.time_window),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(Error::invalid(format!("{name} must be positive")));
            }
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(Error::invalid(format!("gamma must lie in [0, 1], got {}", self.gamma)));
        }
        if self.eval_every > 0 && self.eval_episodes == 0 {
            return Err(Error::invalid("periodic evaluation needs eval_episodes ≥ 1"));
        }
        self.lif.validate()?;
        self.epsilon.validate()?;
        self.adam().validate()
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            lr: self.lr,
            clip_norm: self.grad_clip,
            ..AdamConfig::default()
        }
    }

    /// `base` with this configuration's window, neuron constants and pbLN placement.
    pub fn network(&self, base: &Architecture) -> Architecture {
        let mut arch = base.clone().with_time_window(self.time_window);
        arch.lif = self.lif;
        arch.pbln.conv = self.pbln;
        arch.pbln.fc = self.pbln_fc;
        arch
    }
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub arch: Architecture,
    pub params: NetworkParams,
    pub metrics: Vec<MetricsRow>,
    pub summary: RunSummary,
}

#[derive(Default)]
struct Window {
    returns: Vec<f64>,
    loss_sum: f64,
    loss_n: usize,
    fire_sum: Vec<f64>,
    fire_n: usize,
}

/// Step-at-a-time DQN loop over one environment.
pub struct Trainer<'e> {
    cfg: TrainConfig,
    arch: Architecture,
    env: &'e mut dyn Environment,
    online: NetworkParams,
    acting: Simulator,
    target: NetworkParams,
    adam: AdamState,
    replay: ReplayBuffer,
    stack: FrameStack,
    current: StackedFrames,
    act_rng: ChaCha8Rng,
    replay_rng: ChaCha8Rng,
    episode_rng: ChaCha8Rng,
    eval_seed: u64,
    frame: usize,
    episodes: usize,
    episode_return: f64,
    all_returns: Vec<f64>,
    updates: usize,
    target_syncs: usize,
    eval_pending: bool,
    window: Window,
    metrics: Vec<MetricsRow>,
    evals: Vec<EvalPoint>,
    stopped_early: bool,
}

impl<'e> Trainer<'e> {
    pub fn new(cfg: TrainConfig, base: &Architecture, env: &'e mut dyn Environment) -> Result<Self> {
        cfg.validate()?;
        let arch = cfg.network(base);
        arch.validate()?;
        let frame_shape = env.frame_shape();
        if frame_shape[1..] != arch.input_shape[1..] || env.n_actions() != arch.n_actions {
            return Err(Error::shape(
                "Trainer::new",
                format!(
                    "environment frames {frame_shape:?} with {} actions do not fit input {:?} with {} actions",
                    env.n_actions(),
                    arch.input_shape,
                    arch.n_actions
                ),
            ));
        }
        let mut master = ChaCha8Rng::seed_from_u64(cfg.seed);
        let online = init_params(&arch, master.next_u64())?;
        let env_seed = master.next_u64();
        let act_rng = ChaCha8Rng::seed_from_u64(master.next_u64());
        let replay_rng = ChaCha8Rng::seed_from_u64(master.next_u64());
        let episode_rng = ChaCha8Rng::seed_from_u64(master.next_u64());
        let eval_seed = master.next_u64();
        env.seed(env_seed);
        let mut stack = FrameStack::new(arch.input_shape[0])?;
        let current = stack.reset(env.reset())?;
        Ok(Self {
            adam: AdamState::new(&online),
            target: online.clone(),
            online,
            acting: Simulator::new(),
            replay: ReplayBuffer::new(cfg.replay_capacity)?,
            stack,
            current,
            act_rng,
            replay_rng,
            episode_rng,
            eval_seed,
            frame: 0,
            episodes: 0,
            episode_return: 0.0,
            all_returns: Vec::new(),
            updates: 0,
            target_syncs: 0,
            eval_pending: false,
            window: Window::default(),
            metrics: Vec::new(),
            evals: Vec::new(),
            stopped_early: false,
            env,
            arch,
            cfg,
        })
    }

    pub fn arch(&self) -> &Architecture {
        &self.arch
    }

    pub fn online(&self) -> &NetworkParams {
        &self.online
    }

    pub fn target(&self) -> &NetworkParams {
        &self.target
    }

    pub fn frame(&self) -> usize {
        self.frame
    }

    pub fn updates(&self) -> usize {
        self.updates
    }

    pub fn metrics(&self) -> &[MetricsRow] {
        &self.metrics
    }

    pub fn evals(&self) -> &[EvalPoint] {
        &self.evals
    }

    pub fn is_finished(&self) -> bool {
        self.stopped_early || self.frame >= self.cfg.frames
    }

    /// Acts for one frame, stores the transition, and performs whatever
    /// update, sync, logging and evaluation falls due on it.
    pub fn step(&mut self) -> Result<()> {
        if self.is_finished() {
            return Ok(());
        }
        let state = self.current.to_tensor();
        let trace = self
            .acting
            .forward(&state, &self.online, &self.arch)
            .map_err(|e| e.context("acting forward"))?;
        let q = trace.q.clone();
        let stats = firing_stats(trace);
        let w = &mut self.window;
        if w.fire_sum.is_empty() {
            w.fire_sum = vec![0.0; stats.layers.len()];
        }
        for (s, l) in w.fire_sum.iter_mut().zip(&stats.layers) {
            *s += l.active_fraction;
        }
        w.fire_n += 1;

        let epsilon = self.cfg.epsilon.value(self.frame);
        let action = epsilon_greedy(&q, epsilon, &mut self.act_rng)?;
        let step = self.env.step(action)?;
        let next = self.stack.push(step.observation)?;
        self.replay
            .push_stacked(self.current.clone(), action, step.reward, next.clone(), step.terminal);
        self.episode_return += step.reward;
        self.current = next;
        self.frame += 1;

        if self.frame >= self.cfg.learning_starts
            && self.frame.is_multiple_of(self.cfg.train_every)
            && self.replay.len() >= self.cfg.batch_size
        {
            self.update()?;
        }
        if self.frame.is_multiple_of(self.cfg.target_sync) {
            self.target = self.online.clone();
            self.target_syncs += 1;
        }
        if self.cfg.eval_every > 0 && self.frame.is_multiple_of(self.cfg.eval_every) {
            self.eval_pending = true;
        }
        if step.terminal {
            self.window.returns.push(self.episode_return);
            self.all_returns.push(self.episode_return);
            self.episodes += 1;
            self.episode_return = 0.0;
            if self.eval_pending {
                self.eval_pending = false;
                let result = self.evaluate(self.cfg.eval_episodes)?;
                let hit = self.cfg.stop_return.is_some_and(|s| result.mean >= s);
                self.evals.push(EvalPoint {
                    frame: self.frame,
                    result,
                });
                if hit {
                    self.stopped_early = true;
                }
            }
            self.env.seed(self.episode_rng.next_u64());
            self.current = self.stack.reset(self.env.reset())?;
        }
        if self.frame.is_multiple_of(self.cfg.log_every)
            || (self.is_finished() && self.metrics.last().map(|r| r.frame) != Some(self.frame))
        {
            self.log_row(epsilon);
        }
        Ok(())
    }

    fn update(&mut self) -> Result<()> {
        let batch = self.replay.sample(self.cfg.batch_size, &mut self.replay_rng)?;
        let (loss, grads) = td_gradients(&batch, &self.online, &self.target, &self.arch, self.cfg.gamma)
            .map_err(|e| self.diverged(format!("TD gradient failed: {e}")))?;
        if !loss.loss.is_finite() {
            let actions: Vec<usize> = batch.iter().map(|t| t.action).collect();
            let rewards: Vec<f64> = batch.iter().map(|t| t.reward).collect();
            let terminal: Vec<bool> = batch.iter().map(|t| t.terminal).collect();
            return Err(self.diverged(format!(
                "loss {}; batch actions {actions:?}, rewards {rewards:?}, terminal {terminal:?}, Q(s,a) {:?}, targets {:?}",
                loss.loss, loss.q_taken, loss.targets
            )));
        }
        adam_step(&mut self.online, &grads, &mut self.adam, &self.cfg.adam())
            .map_err(|e| self.diverged(e.to_string()))?;
        self.window.loss_sum += loss.loss;
        self.window.loss_n += 1;
        self.updates += 1;
        Ok(())
    }

    fn diverged(&self, detail: String) -> Error {
        Error::Diverged {
            frame: self.frame,
            detail,
        }
    }

    fn log_row(&mut self, epsilon: f64) {
        let w = std::mem::take(&mut self.window);
        let mean = |s: f64, n: usize| (n > 0).then(|| s / n as f64);
        let n_conv = self.arch.conv_specs.len();
        let frac = |l: usize| mean(*w.fire_sum.get(l)?, w.fire_n);
        let mut conv = [None; 3];
        for (l, c) in conv.iter_mut().enumerate().take(n_conv) {
            *c = frac(l);
        }
        self.metrics.push(MetricsRow {
            frame: self.frame,
            episode: self.episodes,
            episode_return: mean(w.returns.iter().sum(), w.returns.len()),
            loss: mean(w.loss_sum, w.loss_n),
            epsilon,
            fire_frac_conv: conv,
            fire_frac_fc: frac(n_conv),
        });
    }

    /// Greedy evaluation on the training environment with a fixed seed. The
    /// caller must be at an episode boundary.
    fn evaluate(&mut self, episodes: usize) -> Result<EvalResult> {
        evaluate(&self.online, &self.arch, &mut *self.env, episodes, self.eval_seed)
    }

    /// Runs the remaining frames and a final evaluation.
    pub fn run(mut self) -> Result<TrainOutcome> {
        while !self.is_finished() {
            self.step()?;
        }
        let final_eval = match (self.stopped_early, self.evals.last()) {
            (true, Some(p)) => Some(p.result.clone()),
            _ if self.frame > 0 && self.cfg.eval_episodes > 0 => Some(self.evaluate(self.cfg.eval_episodes)?),
            _ => None,
        };
        let tail = &self.all_returns[self.all_returns.len().saturating_sub(100)..];
        let summary = RunSummary {
            frames: self.frame,
            episodes: self.episodes,
            updates: self.updates,
            target_syncs: self.target_syncs,
            mean_train_return_last_100: (!tail.is_empty()).then(|| tail.iter().sum::<f64>() / tail.len() as f64),
            evals: self.evals,
            final_eval,
            stopped_early: self.stopped_early,
        };
        Ok(TrainOutcome {
            arch: self.arch,
            params: self.online,
            metrics: self.metrics,
            summary,
        })
    }
}

/// Trains from scratch for `cfg.frames` frames.
pub fn train(cfg: &TrainConfig, base: &Architecture, env: &mut dyn Environment) -> Result<TrainOutcome> {
    Trainer::new(cfg.clone(), base, env)?.run()
}
