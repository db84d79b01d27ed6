//! The round-by-round stochastic process: focal-player selection, the
//! neighborhood game, belief updates, convergence detection, and the
//! trajectory bookkeeping needed by the statistics layer.
//!
//! A single run is strictly sequential; distinct runs are independent and
//! may execute concurrently, each owning its state and random stream.

use thiserror::Error;

use crate::game::{
    self, decide_action, sample_lambda, update_belief, Action, Belief, PayoffModel, ParamError,
};
use crate::graph::{is_connected, Graph};
use crate::rng::{sim_rng, SimRng};
use rand::Rng;

pub const DEFAULT_ALPHA: f64 = 0.3;
pub const DEFAULT_EPS_STOP: f64 = 1e-4;
pub const DEFAULT_MAX_ROUNDS: u64 = 10_000_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error(transparent)]
    Param(#[from] ParamError),
    #[error("stopping threshold must lie in (0, 0.5), got {0}")]
    EpsStop(f64),
    #[error("max_rounds must be at least 1")]
    ZeroMaxRounds,
}

/// All parameters of a single run.
#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    /// Learning rate in (0, 1).
    pub alpha: f64,
    /// Reward distribution.
    pub payoff: PayoffModel,
    /// Corner half-width for the stopping rule, in (0, 0.5).
    pub eps_stop: f64,
    /// Round budget.
    pub max_rounds: u64,
    /// Seed of the run's random stream.
    pub seed: u64,
    /// Record the total belief every this many rounds; 0 disables the series.
    pub record_stride: u64,
}

impl SimConfig {
    pub fn new(
        alpha: f64,
        payoff_exponent: f64,
        eps_stop: f64,
        max_rounds: u64,
        seed: u64,
    ) -> Result<Self, ConfigError> {
        let alpha = game::validate_learning_rate(alpha)?;
        let payoff = PayoffModel::new(payoff_exponent)?;
        if !(eps_stop.is_finite() && 0.0 < eps_stop && eps_stop < 0.5) {
            return Err(ConfigError::EpsStop(eps_stop));
        }
        if max_rounds == 0 {
            return Err(ConfigError::ZeroMaxRounds);
        }
        Ok(Self { alpha, payoff, eps_stop, max_rounds, seed, record_stride: 0 })
    }

    pub fn with_record_stride(mut self, stride: u64) -> Self {
        self.record_stride = stride;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }
}

impl Default for SimConfig {
    fn default() -> Self {
        Self::new(
            DEFAULT_ALPHA,
            PayoffModel::DEFAULT_EXPONENT,
            DEFAULT_EPS_STOP,
            DEFAULT_MAX_ROUNDS,
            0,
        )
        .unwrap()
    }
}

/// Beliefs of the whole population plus the round counter.
#[derive(Debug, Clone, PartialEq)]
pub struct SimState {
    pub beliefs: Vec<Belief>,
    pub round: u64,
}

/// Fresh state: independent uniform beliefs, round 0.
pub fn init_state(n: usize, rng: &mut SimRng) -> SimState {
    assert!(n >= 1, "need at least one agent");
    SimState { beliefs: (0..n).map(|_| rng.gen()).collect(), round: 0 }
}

/// Sum of all beliefs; the quantity tracked by metastability analyses.
pub fn total_belief(beliefs: &[Belief]) -> f64 {
    beliefs.iter().sum()
}

/// Everything that happened in one round.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundOutcome {
    pub focal: usize,
    /// Participants in ascending id order; always contains `focal`.
    pub participants: Vec<usize>,
    pub group_size: usize,
    /// Per-participant actions, aligned with `participants`.
    pub actions: Vec<Action>,
    /// Per-participant reward draws, aligned with `participants`.
    pub lambdas: Vec<f64>,
    pub all_contributed: bool,
}

/// Reusable per-round buffers so the run loop does not allocate.
#[derive(Default)]
struct Scratch {
    participants: Vec<usize>,
    lambdas: Vec<f64>,
    contributed: Vec<bool>,
    old_beliefs: Vec<f64>,
}

/// Play one round in place.
///
/// Draw order is fixed: the focal index first, then one reward per
/// participant in ascending id order. Actions are deterministic given the
/// rewards and consume no randomness, and belief updates follow in the
/// same participant order, so a seed pins the whole trajectory.
fn play_round(
    beliefs: &mut [Belief],
    g: &Graph,
    cfg: &SimConfig,
    rng: &mut SimRng,
    s: &mut Scratch,
) -> usize {
    let focal = rng.gen_range(0..g.vertex_count());
    let adj = g.neighbors(focal);
    s.participants.clear();
    let pos = adj.partition_point(|&v| v < focal);
    s.participants.extend_from_slice(&adj[..pos]);
    s.participants.push(focal);
    s.participants.extend_from_slice(&adj[pos..]);
    let k = s.participants.len();
    assert!(k >= 2, "focal vertex {focal} is isolated; a game needs at least 2 players");

    // Rewards are drawn for every participant, even when a corner belief
    // forces the decision, to keep the stream consumption schedule fixed.
    s.lambdas.clear();
    for _ in 0..k {
        s.lambdas.push(sample_lambda(rng, &cfg.payoff));
    }

    s.contributed.clear();
    let mut contributors = 0usize;
    for (i, &v) in s.participants.iter().enumerate() {
        let c = decide_action(beliefs[v], k, s.lambdas[i]) == Action::Contribute;
        contributors += c as usize;
        s.contributed.push(c);
    }

    s.old_beliefs.clear();
    for (i, &v) in s.participants.iter().enumerate() {
        let x = beliefs[v];
        s.old_beliefs.push(x);
        let among_others = contributors - s.contributed[i] as usize;
        beliefs[v] = update_belief(x, cfg.alpha, among_others, k);
    }
    focal
}

/// Advance the state by one round and report what happened.
///
/// Agents outside the focal player's closed neighborhood keep their
/// beliefs bitwise unchanged.
pub fn step(state: &mut SimState, g: &Graph, cfg: &SimConfig, rng: &mut SimRng) -> RoundOutcome {
    debug_assert_eq!(state.beliefs.len(), g.vertex_count());
    let mut s = Scratch::default();
    let focal = play_round(&mut state.beliefs, g, cfg, rng, &mut s);
    state.round += 1;
    let all_contributed = s.contributed.iter().all(|&c| c);
    RoundOutcome {
        focal,
        group_size: s.participants.len(),
        participants: std::mem::take(&mut s.participants),
        actions: s
            .contributed
            .iter()
            .map(|&c| if c { Action::Contribute } else { Action::Defect })
            .collect(),
        lambdas: std::mem::take(&mut s.lambdas),
        all_contributed,
    }
}

/// The two absorbing consensus states.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Corner {
    Contribute,
    Defect,
}

/// Stopping rule: the defect corner once every belief is below `eps_stop`,
/// the contribute corner once every belief is above `1 - eps_stop`.
pub fn check_convergence(beliefs: &[Belief], eps_stop: f64) -> Option<Corner> {
    if beliefs.iter().all(|&x| x < eps_stop) {
        Some(Corner::Defect)
    } else if beliefs.iter().all(|&x| x > 1.0 - eps_stop) {
        Some(Corner::Contribute)
    } else {
        None
    }
}

/// Incremental version of [`check_convergence`]: counts how many beliefs
/// sit inside each corner band and is updated as participants change.
struct CornerTracker {
    eps: f64,
    hi_threshold: f64,
    below: usize,
    above: usize,
    n: usize,
}

impl CornerTracker {
    fn new(beliefs: &[Belief], eps_stop: f64) -> Self {
        let hi_threshold = 1.0 - eps_stop;
        Self {
            eps: eps_stop,
            hi_threshold,
            below: beliefs.iter().filter(|&&x| x < eps_stop).count(),
            above: beliefs.iter().filter(|&&x| x > hi_threshold).count(),
            n: beliefs.len(),
        }
    }

    #[inline]
    fn on_change(&mut self, old: f64, new: f64) {
        self.below = self.below + (new < self.eps) as usize - (old < self.eps) as usize;
        self.above =
            self.above + (new > self.hi_threshold) as usize - (old > self.hi_threshold) as usize;
    }

    fn corner(&self) -> Option<Corner> {
        if self.below == self.n {
            Some(Corner::Defect)
        } else if self.above == self.n {
            Some(Corner::Contribute)
        } else {
            None
        }
    }
}

/// Where a run ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunOutcome {
    ContributeCorner,
    DefectCorner,
    TimedOut,
}

impl RunOutcome {
    pub fn as_str(&self) -> &'static str {
        match self {
            RunOutcome::ContributeCorner => "contribute",
            RunOutcome::DefectCorner => "defect",
            RunOutcome::TimedOut => "timeout",
        }
    }
}

impl From<Corner> for RunOutcome {
    fn from(c: Corner) -> Self {
        match c {
            Corner::Contribute => RunOutcome::ContributeCorner,
            Corner::Defect => RunOutcome::DefectCorner,
        }
    }
}

/// Result of a complete run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub converged: RunOutcome,
    /// Number of completed rounds at the moment the stopping rule first
    /// fired; absent on timeout.
    pub tau: Option<u64>,
    pub final_beliefs: Vec<Belief>,
    /// `(round, total belief)` samples when recording was enabled.
    pub total_belief_series: Option<Vec<(u64, f64)>>,
    pub rounds_executed: u64,
}

impl RunResult {
    pub fn final_mean_belief(&self) -> f64 {
        total_belief(&self.final_beliefs) / self.final_beliefs.len() as f64
    }

    /// One-line record of the run, comma-separated:
    /// `run_id,graph_id,seed,converged,tau,rounds_executed,final_mean_belief`.
    pub fn record_line(&self, run_id: usize, graph_id: &str, seed: u64) -> String {
        let tau = self.tau.map(|t| t.to_string()).unwrap_or_default();
        format!(
            "{run_id},{graph_id},{seed},{},{tau},{},{}",
            self.converged.as_str(),
            self.rounds_executed,
            crate::report::fmt_f64(self.final_mean_belief()),
        )
    }
}

/// Run the process from freshly drawn uniform beliefs until a corner is
/// reached or the round budget is exhausted. Deterministic in
/// `(graph, config)`: the seed lives in the config.
pub fn run(g: &Graph, cfg: &SimConfig) -> RunResult {
    let mut rng = sim_rng(cfg.seed);
    let state = init_state(g.vertex_count(), &mut rng);
    run_from(g, cfg, state, rng)
}

/// Run the process from an explicit state and stream. The convergence
/// check also covers the initial state, so a state already in a corner
/// reports `tau` equal to its current round.
pub fn run_from(g: &Graph, cfg: &SimConfig, mut state: SimState, mut rng: SimRng) -> RunResult {
    assert_eq!(state.beliefs.len(), g.vertex_count(), "state size must match the graph");
    if !is_connected(g) {
        log::warn!("running on a disconnected graph; corner convergence is not guaranteed");
    }

    let mut tracker = CornerTracker::new(&state.beliefs, cfg.eps_stop);
    let mut series: Option<Vec<(u64, f64)>> = (cfg.record_stride > 0).then(Vec::new);
    if let Some(s) = series.as_mut() {
        s.push((state.round, total_belief(&state.beliefs)));
    }

    let mut scratch = Scratch::default();
    let mut corner = tracker.corner();
    while corner.is_none() && state.round < cfg.max_rounds {
        play_round(&mut state.beliefs, g, cfg, &mut rng, &mut scratch);
        state.round += 1;
        for (i, &v) in scratch.participants.iter().enumerate() {
            tracker.on_change(scratch.old_beliefs[i], state.beliefs[v]);
        }
        corner = tracker.corner();
        if let Some(s) = series.as_mut() {
            if state.round % cfg.record_stride == 0 && corner.is_none() {
                s.push((state.round, total_belief(&state.beliefs)));
            }
        }
    }

    if let Some(s) = series.as_mut() {
        if s.last().map(|&(r, _)| r) != Some(state.round) {
            s.push((state.round, total_belief(&state.beliefs)));
        }
    }

    let (converged, tau) = match corner {
        Some(c) => (c.into(), Some(state.round)),
        None => (RunOutcome::TimedOut, None),
    };
    RunResult {
        converged,
        tau,
        final_beliefs: state.beliefs,
        total_belief_series: series,
        rounds_executed: state.round,
    }
}

/// Rounds of all-defect play that are guaranteed to pull any belief below
/// `eps`: `ceil(log eps / log(1 - alpha))`.
pub fn absorption_horizon(alpha: f64, eps: f64) -> u64 {
    assert!(0.0 < alpha && alpha < 1.0, "alpha must lie in (0, 1)");
    assert!(0.0 < eps && eps < 1.0, "eps must lie in (0, 1)");
    (eps.ln() / (1.0 - alpha).ln()).ceil() as u64
}

/// Upper bound `alpha / d` on the corner half-width for which corner
/// absorption is guaranteed possible, where `d` is the maximum degree
/// minus one. Requires maximum degree at least 2.
pub fn corner_epsilon_bound(g: &Graph, alpha: f64) -> f64 {
    assert!(0.0 < alpha && alpha < 1.0, "alpha must lie in (0, 1)");
    let max_degree = g.max_degree();
    assert!(max_degree >= 2, "corner bound needs maximum degree >= 2, got {max_degree}");
    alpha / (max_degree - 1) as f64
}
