//! Two-level FPL over complexity classes.
//!
//! Expert `i` belongs to class `K = max(1, ceil(k_i))`. Each nonempty class
//! runs its own FPL over its members; a meta FPL with complexities
//! `1/2 + 2 ln K` picks a class every round and the learner follows that
//! class's choice. Every inner FPL plays every round, so that each class has a
//! realized loss to report to the meta level.

use serde::{Deserialize, Serialize};

use super::{FplOptions, FplPredictor, Learner, Play, RoundRecord};
use crate::error::{FplError, Result};
use crate::experts::{Decision, ExpertPool, GameState, LossVector};
use crate::perturbation::{lanes, substream, Perturbation, Regime};
use crate::schedules::{LossSource, Schedule};

/// Class index of an expert with complexity `k`.
pub fn class_of(k: f64) -> usize {
    (k.ceil() as usize).max(1)
}

/// Meta-level complexity of class `K`.
pub fn meta_complexity(class: usize) -> f64 {
    0.5 + 2.0 * (class as f64).ln()
}

/// Schedules of the inner and meta levels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum HierarchyMode {
    /// Inner `sqrt(K/2t)`, meta `1/sqrt(t)`.
    #[default]
    Dynamic,
    /// Inner `sqrt(K/2(l+1))`, meta `1/sqrt(2(l+1))`, both on exact expected losses.
    SelfConfident,
    /// Inner `sqrt(1/2) min(1, sqrt(K/s_min))`, meta the min-penalized rate.
    AdaptiveSmin,
}

/// Which class loss the meta level sees.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum MetaLoss {
    /// The realized loss `u_t^K` of each class.
    #[default]
    Realized,
    /// The expected loss `l_t^K` of each class.
    Expected,
}

#[derive(Debug, Clone)]
struct Class {
    id: usize,
    members: Vec<usize>,
    fpl: FplPredictor,
}

#[derive(Debug, Clone)]
pub struct HierarchicalFpl {
    pool: ExpertPool,
    mode: HierarchyMode,
    meta_loss: MetaLoss,
    classes: Vec<Class>,
    meta: FplPredictor,
    state: GameState,
    pending: Option<(usize, usize, f64)>,
}

impl HierarchicalFpl {
    pub fn new(
        pool: ExpertPool,
        mode: HierarchyMode,
        regime: Regime,
        meta_loss: MetaLoss,
        seed: u64,
        replica: u64,
    ) -> Result<Self> {
        if pool.has_entering_times() {
            return Err(FplError::Unsupported("hierarchical FPL with entering times".into()));
        }
        let mut by_class: Vec<(usize, Vec<usize>)> = Vec::new();
        for (i, &k) in pool.complexities().iter().enumerate() {
            let id = class_of(k);
            match by_class.binary_search_by_key(&id, |(c, _)| *c) {
                Ok(pos) => by_class[pos].1.push(i),
                Err(pos) => by_class.insert(pos, (id, vec![i])),
            }
        }
        let inner_options = FplOptions {
            track_expected: meta_loss == MetaLoss::Expected,
            ..Default::default()
        };
        let mut classes = Vec::with_capacity(by_class.len());
        for (id, members) in by_class {
            let k: Vec<f64> = members.iter().map(|&i| pool.complexities()[i]).collect();
            let sub = ExpertPool::new(k)?;
            let big_k = id as f64;
            let schedule = match mode {
                HierarchyMode::Dynamic => Schedule::DynamicKt { k: big_k },
                HierarchyMode::SelfConfident => Schedule::SelfConfidentK {
                    k: big_k,
                    source: LossSource::Exact,
                },
                HierarchyMode::AdaptiveSmin => Schedule::AdaptiveSminK { k: big_k },
            };
            let lane = lanes::CLASS_BASE + id as u64;
            let perturbation = Perturbation::seeded(regime, members.len(), seed, replica, lane)?;
            let estimate = substream(seed, replica, lane + (1 << 40));
            let fpl = FplPredictor::new(sub, schedule, perturbation, estimate, inner_options)?;
            classes.push(Class { id, members, fpl });
        }

        let meta_pool = ExpertPool::new(classes.iter().map(|c| meta_complexity(c.id)).collect())?;
        let meta_schedule = match mode {
            HierarchyMode::Dynamic => Schedule::DynamicT,
            HierarchyMode::SelfConfident => Schedule::SelfConfident {
                source: LossSource::Exact,
            },
            HierarchyMode::AdaptiveSmin => Schedule::AdaptiveMinPenalized,
        };
        let perturbation = Perturbation::seeded(regime, classes.len(), seed, replica, lanes::META)?;
        let estimate = substream(seed, replica, lanes::META + (1 << 40));
        let meta = FplPredictor::new(meta_pool, meta_schedule, perturbation, estimate, FplOptions::default())?;
        let n = pool.n();
        Ok(Self {
            pool,
            mode,
            meta_loss,
            classes,
            meta,
            state: GameState::new(n),
            pending: None,
        })
    }

    pub fn pool(&self) -> &ExpertPool {
        &self.pool
    }

    pub fn mode(&self) -> HierarchyMode {
        self.mode
    }

    /// Nonempty class ids in increasing order.
    pub fn class_ids(&self) -> Vec<usize> {
        self.classes.iter().map(|c| c.id).collect()
    }

    /// Members of class `id`, if nonempty.
    pub fn members(&self, id: usize) -> Option<&[usize]> {
        self.classes.iter().find(|c| c.id == id).map(|c| c.members.as_slice())
    }

    /// Complexities of the meta level, one per nonempty class.
    pub fn meta_complexities(&self) -> &[f64] {
        self.meta.pool().complexities()
    }
}

impl Learner for HierarchicalFpl {
    fn n_experts(&self) -> usize {
        self.pool.n()
    }

    fn decide(&mut self) -> Result<Play> {
        let meta_play = self.meta.decide()?;
        let slot = meta_play.chosen;
        let mut chosen = 0;
        for (j, class) in self.classes.iter_mut().enumerate() {
            let play = class.fpl.decide()?;
            if j == slot {
                chosen = class.members[play.chosen];
            }
        }
        let eta = meta_play.eta.unwrap_or(f64::NAN);
        self.pending = Some((slot, chosen, eta));
        Ok(Play {
            chosen,
            eta: meta_play.eta,
            decision: Decision::Expert(chosen),
        })
    }

    fn observe(&mut self, losses: &LossVector) -> Result<RoundRecord> {
        if losses.len() != self.pool.n() {
            return Err(FplError::DimensionMismatch {
                expected: self.pool.n(),
                got: losses.len(),
            });
        }
        let (slot, chosen, eta) = self.pending.take().ok_or(FplError::NoPendingDecision)?;
        let mut class_losses = Vec::with_capacity(self.classes.len());
        for class in &mut self.classes {
            let rec = class.fpl.observe(&losses.select(&class.members))?;
            class_losses.push(match self.meta_loss {
                MetaLoss::Realized => rec.actual_loss,
                MetaLoss::Expected => rec.expected_loss.unwrap_or(rec.actual_loss),
            });
        }
        self.meta.observe(&LossVector::new(class_losses)?)?;
        let u = losses.values()[chosen];
        debug_assert_eq!(self.classes[slot].fpl.state().t(), self.state.t() + 1);
        self.state.accumulate(losses)?;
        self.state.record_learner(u, None)?;
        Ok(RoundRecord {
            t: self.state.t(),
            eta: Some(eta),
            chosen,
            actual_loss: u,
            expected_loss: None,
            ifpl_loss: None,
            cum_best: self.state.cum_min(),
        })
    }

    fn state(&self) -> &GameState {
        &self.state
    }

    fn tracks_expected_loss(&self) -> bool {
        false
    }

    fn kind(&self) -> &'static str {
        "hierarchical-fpl"
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn class_assignment_examples() {
        let pool = ExpertPool::new(vec![0.5, 1.886]).unwrap();
        let h = HierarchicalFpl::new(pool, HierarchyMode::Dynamic, Regime::FreshPerStep, MetaLoss::Realized, 1, 0)
            .unwrap();
        assert_eq!(h.class_ids(), vec![1, 2]);
        assert_eq!(h.members(1).unwrap(), &[0]);
        assert_eq!(h.members(2).unwrap(), &[1]);
        let mk = h.meta_complexities();
        assert_eq!(mk[0], 0.5);
        assert!((mk[1] - (0.5 + 2.0 * 2f64.ln())).abs() < 1e-15);
    }

    #[test]
    fn countable_classes() {
        let pool = ExpertPool::countable(100).unwrap();
        assert_eq!(class_of(pool.complexities()[99]), 10);
        let h = HierarchicalFpl::new(pool, HierarchyMode::Dynamic, Regime::FreshPerStep, MetaLoss::Realized, 1, 0)
            .unwrap();
        let ids = h.class_ids();
        let total: usize = ids.iter().map(|&c| h.members(c).unwrap().len()).sum();
        assert_eq!(total, 100);
        // Each expert sits in exactly one class.
        let mut seen = vec![false; 100];
        for c in ids {
            for &i in h.members(c).unwrap() {
                assert!(!seen[i]);
                seen[i] = true;
            }
        }
        assert!(h.meta_complexities().iter().map(|k| (-k).exp()).sum::<f64>() <= 1.0);
    }

    #[test]
    fn zero_complexity_goes_to_first_class() {
        assert_eq!(class_of(0.0), 1);
        assert_eq!(class_of(1.0), 1);
        assert_eq!(class_of(1.0 + 1e-12), 2);
    }

    #[test]
    fn single_class_follows_inner_fpl() {
        let pool = ExpertPool::new(vec![0.95, 1.0]).unwrap();
        let seed = 5;
        let mut h =
            HierarchicalFpl::new(pool.clone(), HierarchyMode::Dynamic, Regime::FreshPerStep, MetaLoss::Realized, seed, 0)
                .unwrap();
        let lane = lanes::CLASS_BASE + 1;
        let perturbation = Perturbation::seeded(Regime::FreshPerStep, 2, seed, 0, lane).unwrap();
        let mut inner = FplPredictor::new(
            pool,
            Schedule::DynamicKt { k: 1.0 },
            perturbation,
            substream(seed, 0, lane + (1 << 40)),
            FplOptions::default(),
        )
        .unwrap();
        let rows = [[0.3, 0.9], [1.0, 0.0], [0.2, 0.2], [0.0, 1.0], [0.7, 0.1]];
        for r in rows {
            let a = h.decide().unwrap().chosen;
            let b = inner.decide().unwrap().chosen;
            assert_eq!(a, b);
            let l = LossVector::new(r.to_vec()).unwrap();
            h.observe(&l).unwrap();
            inner.observe(&l).unwrap();
        }
    }

    #[test]
    fn rejects_entering_times() {
        let pool = ExpertPool::countable_finitized(5).unwrap();
        assert!(HierarchicalFpl::new(pool, HierarchyMode::Dynamic, Regime::FreshPerStep, MetaLoss::Realized, 1, 0).is_err());
    }
}
