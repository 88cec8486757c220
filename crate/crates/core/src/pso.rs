//! Global-best particle swarm minimizer over a box.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PsoConfig {
    pub particles: usize,
    pub iterations: usize,
    pub inertia: f64,
    pub cognitive: f64,
    pub social: f64,
    /// A particle whose personal best has not improved for this many
    /// iterations is re-initialized at a freshly sampled position, which also
    /// becomes its personal best. 0 disables.
    pub stall_reset: usize,
    pub seed: u64,
}

impl Default for PsoConfig {
    fn default() -> Self {
        PsoConfig {
            particles: 30,
            iterations: 200,
            inertia: 0.729,
            cognitive: 1.49,
            social: 1.49,
            stall_reset: 3,
            seed: 0,
        }
    }
}

impl PsoConfig {
    pub fn validate(&self) -> Result<()> {
        if self.particles < 2 {
            return Err(Error::Parameter("PSO needs at least 2 particles".into()));
        }
        if self.iterations < 1 {
            return Err(Error::Parameter("PSO needs at least 1 iteration".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct PsoOutcome {
    pub position: Vec<f64>,
    pub value: f64,
    pub evaluations: usize,
    /// Final personal best position of every particle.
    pub particle_bests: Vec<Vec<f64>>,
}

struct Particle {
    position: Vec<f64>,
    velocity: Vec<f64>,
    best_position: Vec<f64>,
    best_value: f64,
    stalled: usize,
}

/// Minimizes `objective` over `[lower, upper]`. `initial` positions are
/// used for the first particles; the rest start uniformly at random.
/// Velocities are clamped to `max_velocity` per coordinate. Stalled
/// particles are re-initialized per [`PsoConfig::stall_reset`].
pub fn minimize<F>(
    objective: F,
    lower: &[f64],
    upper: &[f64],
    initial: &[Vec<f64>],
    max_velocity: f64,
    config: &PsoConfig,
    rng: &mut ChaCha8Rng,
) -> PsoOutcome
where
    F: Fn(&[f64]) -> f64,
{
    let uniform = |rng: &mut ChaCha8Rng| -> Vec<f64> {
        lower.iter().zip(upper).map(|(&l, &u)| rng.gen_range(l..=u)).collect()
    };
    minimize_with_sampler(objective, lower, upper, initial, max_velocity, config, rng, uniform)
}

/// [`minimize`] with fresh particle positions (initial and re-initialized)
/// drawn from `sample` instead of uniformly over the box.
#[allow(clippy::too_many_arguments)]
pub fn minimize_with_sampler<F, S>(
    objective: F,
    lower: &[f64],
    upper: &[f64],
    initial: &[Vec<f64>],
    max_velocity: f64,
    config: &PsoConfig,
    rng: &mut ChaCha8Rng,
    sample: S,
) -> PsoOutcome
where
    F: Fn(&[f64]) -> f64,
    S: Fn(&mut ChaCha8Rng) -> Vec<f64>,
{
    let dim = lower.len();
    let mut evaluations = 0;
    let mut eval = |x: &[f64]| {
        evaluations += 1;
        objective(x)
    };

    let mut swarm: Vec<Particle> = (0..config.particles)
        .map(|i| {
            let position: Vec<f64> = match initial.get(i) {
                Some(p) => p.iter().zip(lower.iter().zip(upper)).map(|(&x, (&l, &u))| x.clamp(l, u)).collect(),
                None => sample(rng),
            };
            let velocity = (0..dim)
                .map(|d| {
                    let span = upper[d] - lower[d];
                    (rng.gen::<f64>() - 0.5) * span.min(2.0 * max_velocity)
                })
                .collect();
            Particle {
                best_position: position.clone(),
                position,
                velocity,
                best_value: f64::INFINITY,
                stalled: 0,
            }
        })
        .collect();

    let mut global_position = swarm[0].position.clone();
    let mut global_value = f64::INFINITY;
    for p in swarm.iter_mut() {
        p.best_value = eval(&p.position);
        if p.best_value < global_value {
            global_value = p.best_value;
            global_position = p.position.clone();
        }
    }

    for _ in 0..config.iterations {
        for p in swarm.iter_mut() {
            if config.stall_reset > 0 && p.stalled >= config.stall_reset {
                p.position = sample(rng);
                for d in 0..dim {
                    p.velocity[d] = (rng.gen::<f64>() - 0.5) * (upper[d] - lower[d]).min(2.0 * max_velocity);
                }
                p.best_value = eval(&p.position);
                p.best_position.clone_from(&p.position);
                p.stalled = 0;
                if p.best_value < global_value {
                    global_value = p.best_value;
                    global_position.clone_from(&p.position);
                }
                continue;
            }
            for d in 0..dim {
                let r1: f64 = rng.gen();
                let r2: f64 = rng.gen();
                let v = config.inertia * p.velocity[d]
                    + config.cognitive * r1 * (p.best_position[d] - p.position[d])
                    + config.social * r2 * (global_position[d] - p.position[d]);
                p.velocity[d] = v.clamp(-max_velocity, max_velocity);
                p.position[d] = (p.position[d] + p.velocity[d]).clamp(lower[d], upper[d]);
            }
            let value = eval(&p.position);
            if value < p.best_value {
                p.best_value = value;
                p.best_position.clone_from(&p.position);
                p.stalled = 0;
            } else {
                p.stalled += 1;
            }
            if value < global_value {
                global_value = value;
                global_position.clone_from(&p.position);
            }
        }
    }

    PsoOutcome {
        position: global_position,
        value: global_value,
        evaluations,
        particle_bests: swarm.into_iter().map(|p| p.best_position).collect(),
    }
}
