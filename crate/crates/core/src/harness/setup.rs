//! Resolved description of one game, from which replicas are built.

use serde::{Deserialize, Serialize};

use super::{run_game_with, GameTrace, PlayMode, TraceDetail};
use crate::environments::{Environment, EnvironmentSpec};
use crate::error::{FplError, Result};
use crate::experts::ExpertPool;
use crate::perturbation::Regime;
use crate::predictors::{
    DeterministicWeights, FollowTheLeader, FplOptions, FplPredictor, HierarchicalFpl, HierarchyMode, Learner,
    MetaLoss, PredictorKind,
};
use crate::schedules::Schedule;

/// How the expert pool is built.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum PoolSpec {
    /// `n` experts with `k_i = ln n`.
    Uniform { n: usize },
    /// The first `cap` experts of `k_i = 1/2 + 2 ln i`; with `finitized`,
    /// expert `i` enters at round `ceil(k_i)`.
    Countable {
        cap: usize,
        #[serde(default)]
        finitized: bool,
    },
    Explicit {
        k: Vec<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        entering_times: Option<Vec<usize>>,
    },
}

impl PoolSpec {
    pub fn build(&self) -> Result<ExpertPool> {
        match self {
            PoolSpec::Uniform { n } => ExpertPool::uniform(*n),
            PoolSpec::Countable { cap, finitized: false } => ExpertPool::countable(*cap),
            PoolSpec::Countable { cap, finitized: true } => ExpertPool::countable_finitized(*cap),
            PoolSpec::Explicit { k, entering_times } => {
                let pool = ExpertPool::new(k.clone())?;
                match entering_times {
                    Some(tau) => pool.with_entering_times(tau.clone()),
                    None => Ok(pool),
                }
            }
        }
    }
}

fn default_mc_samples() -> usize {
    FplOptions::DEFAULT_MC_SAMPLES
}

/// Predictor kind and its options.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PredictorSpec {
    #[serde(default)]
    pub kind: PredictorKind,
    #[serde(default)]
    pub regime: Regime,
    /// Schedules of the hierarchical predictor.
    #[serde(default)]
    pub hierarchy: HierarchyMode,
    #[serde(default)]
    pub meta_loss: MetaLoss,
    #[serde(default = "default_mc_samples")]
    pub mc_samples: usize,
}

impl Default for PredictorSpec {
    fn default() -> Self {
        Self {
            kind: PredictorKind::Fpl,
            regime: Regime::FreshPerStep,
            hierarchy: HierarchyMode::Dynamic,
            meta_loss: MetaLoss::Realized,
            mc_samples: default_mc_samples(),
        }
    }
}

/// Everything needed to play replica `r` of a game.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GameSetup {
    pub pool: PoolSpec,
    pub predictor: PredictorSpec,
    /// Required by every kind except `fl` and `hierarchical-fpl`.
    pub schedule: Option<Schedule>,
    pub environment: EnvironmentSpec,
    pub horizon: usize,
    pub mode: PlayMode,
    pub seed: u64,
}

impl GameSetup {
    /// Checks everything that can be checked without playing.
    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 {
            return Err(FplError::Config("horizon must be at least 1".into()));
        }
        let pool = self.pool.build()?;
        match (self.predictor.kind, &self.schedule) {
            (PredictorKind::Fpl | PredictorKind::Ifpl | PredictorKind::DeterministicWeights, None) => {
                return Err(FplError::Config(format!(
                    "predictor `{}` needs a [schedule]",
                    self.predictor.kind.name()
                )))
            }
            (_, Some(s)) => s.validate()?,
            _ => {}
        }
        if self.predictor.kind == PredictorKind::HierarchicalFpl && self.mode == PlayMode::ExactExpected {
            return Err(FplError::Config(
                "hierarchical-fpl has no exact expected loss; use mode = \"actual\"".into(),
            ));
        }
        // Dimension checks happen when the environment is built.
        self.environment.build(pool.n(), self.seed, 0).map(|_| ())
    }

    pub fn resolved_schedule(&self) -> Option<Schedule> {
        self.schedule.clone().map(|s| s.resolved(self.horizon))
    }

    pub fn build_learner(&self, replica: u64) -> Result<Box<dyn Learner>> {
        let pool = self.pool.build()?;
        let p = &self.predictor;
        let schedule = || {
            self.resolved_schedule()
                .ok_or_else(|| FplError::Config(format!("predictor `{}` needs a [schedule]", p.kind.name())))
        };
        let learner: Box<dyn Learner> = match p.kind {
            PredictorKind::Fpl | PredictorKind::Ifpl => {
                let options = FplOptions {
                    track_expected: self.mode == PlayMode::ExactExpected,
                    ifpl_diagnostic: p.kind == PredictorKind::Ifpl,
                    mc_samples: p.mc_samples,
                };
                Box::new(FplPredictor::seeded(pool, schedule()?, p.regime, self.seed, replica, options)?)
            }
            PredictorKind::Fl => Box::new(FollowTheLeader::new(pool)),
            PredictorKind::DeterministicWeights => Box::new(DeterministicWeights::new(pool, schedule()?)?),
            PredictorKind::HierarchicalFpl => Box::new(HierarchicalFpl::new(
                pool,
                p.hierarchy,
                p.regime,
                p.meta_loss,
                self.seed,
                replica,
            )?),
        };
        Ok(learner)
    }

    pub fn build_environment(&self, replica: u64) -> Result<Box<dyn Environment>> {
        let n = self.pool.build()?.n();
        self.environment.build(n, self.seed, replica)
    }

    pub fn run_replica(&self, replica: u64, detail: TraceDetail) -> Result<GameTrace> {
        let mut learner = self.build_learner(replica)?;
        let mut env = self.build_environment(replica)?;
        run_game_with(learner.as_mut(), env.as_mut(), self.horizon, self.mode, detail)
    }

    /// Same game with a different mode.
    pub fn with_mode(&self, mode: PlayMode) -> Self {
        Self { mode, ..self.clone() }
    }

    pub fn with_regime(&self, regime: Regime) -> Self {
        let mut s = self.clone();
        s.predictor.regime = regime;
        s
    }
}
