//! Off-policy training loop shared by SAC and DDPG.

use std::io::Write;

use rand::Rng;

use crate::agents::{ActMode, Agent, UpdateStats};
use crate::env::{map_action, ControlDecision, TrajectoryLog, WcseeEnv};
use crate::error::{Error, Result};
use crate::neural::ReplayBuffer;
use crate::rng::{RngStream, StreamTag};

#[derive(Debug, Clone, PartialEq)]
pub struct Schedule {
    pub episodes: usize,
    /// Environment steps taken with uniform random actions before learning.
    pub warmup_steps: usize,
    pub batch_size: usize,
    pub buffer_capacity: usize,
    /// Gradient phases per environment step once warm.
    pub updates_per_step: usize,
}

impl Default for Schedule {
    fn default() -> Self {
        Self {
            episodes: 100,
            warmup_steps: 1000,
            batch_size: 256,
            buffer_capacity: 100_000,
            updates_per_step: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeRecord {
    pub episode: usize,
    pub mean_reward: f64,
    pub temperature: f64,
    /// Averages over the episode's gradient phases; `NaN` when there were none.
    pub critic_loss: f64,
    pub actor_loss: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct LearningCurve {
    pub records: Vec<EpisodeRecord>,
}

impl LearningCurve {
    pub const HEADER: &'static str = "episode,mean_reward,beta,critic_loss,actor_loss";

    pub fn write_csv<W: Write>(&self, w: &mut W) -> Result<()> {
        writeln!(w, "{}", Self::HEADER)?;
        for r in &self.records {
            writeln!(
                w,
                "{},{:e},{:e},{:e},{:e}",
                r.episode, r.mean_reward, r.temperature, r.critic_loss, r.actor_loss
            )?;
        }
        Ok(())
    }

    /// Mean of the per-episode rewards over the last `n` episodes.
    pub fn tail_mean(&self, n: usize) -> f64 {
        let k = n.min(self.records.len()).max(1);
        let tail = &self.records[self.records.len().saturating_sub(k)..];
        tail.iter().map(|r| r.mean_reward).sum::<f64>() / tail.len().max(1) as f64
    }
}

/// Runs `schedule.episodes` episodes of interaction and learning.
pub fn train<A: Agent, W: Write>(
    env: &mut WcseeEnv,
    agent: &mut A,
    schedule: &Schedule,
    rng: &RngStream,
    mut traj: Option<&mut TrajectoryLog<W>>,
) -> Result<LearningCurve> {
    if schedule.batch_size == 0 || schedule.buffer_capacity < schedule.batch_size {
        return Err(Error::Config("replay capacity must be at least the batch size".into()));
    }
    let (s_dim, a_dim) = (env.state_dim(), env.action_dim());
    let horizon = env.options().horizon;
    let budget = (schedule.episodes * horizon).max(1) as f64;
    let mut buffer = ReplayBuffer::new(schedule.buffer_capacity, s_dim, a_dim);
    let mut explore = rng.substream(StreamTag::Exploration, 0);
    let mut sampler = rng.substream(StreamTag::Replay, 0);
    let mut total = 0usize;
    let mut curve = LearningCurve::default();
    for ep in 0..schedule.episodes {
        let mut s = env.reset(ep as u64);
        let mut reward_sum = 0.0;
        let mut acc = UpdateStats::default();
        let mut n_updates = 0usize;
        for t in 0..horizon {
            agent.set_progress(total as f64 / budget);
            let a: Vec<f64> = if total < schedule.warmup_steps {
                (0..a_dim).map(|_| explore.gen_range(-1.0..=1.0)).collect()
            } else {
                agent.act(&s, ActMode::Explore)
            };
            let (r, s2, _done, info) = env.step(&a)?;
            if let Some(log) = traj.as_deref_mut() {
                log.record(ep as u64, t, &info)?;
            }
            // horizon cuts are time limits, so the bootstrap is never cut
            buffer.push(&s, &a, r, &s2, false);
            reward_sum += r;
            s = s2;
            total += 1;
            if total >= schedule.warmup_steps {
                for _ in 0..schedule.updates_per_step {
                    if let Some(batch) = buffer.sample(schedule.batch_size, &mut sampler) {
                        let st = agent.update(&batch);
                        acc.critic_loss += st.critic_loss;
                        acc.actor_loss += st.actor_loss;
                        n_updates += 1;
                    }
                }
            }
        }
        let avg = |v: f64| if n_updates > 0 { v / n_updates as f64 } else { f64::NAN };
        curve.records.push(EpisodeRecord {
            episode: ep,
            mean_reward: reward_sum / horizon as f64,
            temperature: agent.temperature(),
            critic_loss: avg(acc.critic_loss),
            actor_loss: avg(acc.actor_loss),
        });
    }
    Ok(curve)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolicyEval {
    pub mean_reward: f64,
    pub best_reward: f64,
    pub best_decision: Option<ControlDecision>,
}

/// Greedy rollouts over the given episode indices.
pub fn evaluate_policy<A: Agent>(env: &mut WcseeEnv, agent: &mut A, episodes: &[u64]) -> Result<PolicyEval> {
    let horizon = env.options().horizon;
    let mut sum = 0.0;
    let mut best = f64::NEG_INFINITY;
    let mut best_decision = None;
    for ep in episodes {
        let mut s = env.reset(*ep);
        for _ in 0..horizon {
            let a = agent.act(&s, ActMode::Greedy);
            let (r, s2, _, _) = env.step(&a)?;
            if r > best {
                best = r;
                best_decision = Some(map_action(&a, env.config())?);
            }
            sum += r;
            s = s2;
        }
    }
    Ok(PolicyEval {
        mean_reward: sum / (horizon * episodes.len()).max(1) as f64,
        best_reward: best.max(0.0),
        best_decision,
    })
}
