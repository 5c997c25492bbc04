//! Comparison planners: UCT without tree reuse, the cross-entropy method,
//! and the cross-entropy method hot-started from its previous solution.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::mdp::{Action, BoxBounds, MdpError, MdpSpec, State};
use crate::tree::{SearchParams, SearchTree, TreeError};

/// Below this the sampling distribution is considered collapsed.
pub const MIN_STD: f64 = 1e-9;

static COLLAPSE_WARNING: std::sync::Once = std::sync::Once::new();

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CemParams {
    /// Sequences sampled per iteration.
    pub population: usize,
    pub iterations: usize,
    pub elite_frac: f64,
    pub init_mean: Vec<Action>,
    pub init_std: Vec<f64>,
    pub horizon: usize,
}

impl CemParams {
    /// Budget-matched settings: `population = budget / iterations` (at least
    /// one), zero initial mean and half the action range as initial spread.
    pub fn for_budget(budget: usize, iterations: usize, elite_frac: f64, horizon: usize, bounds: &BoxBounds) -> Self {
        let iterations = iterations.max(1);
        Self {
            population: (budget / iterations).max(1),
            iterations,
            elite_frac,
            init_mean: vec![Action::zeros(bounds.dim()); horizon],
            init_std: bounds.widths().iter().map(|w| 0.5 * w).collect(),
            horizon,
        }
    }

    pub fn elite_count(&self) -> usize {
        ((self.population as f64 * self.elite_frac + 1e-9).floor() as usize).clamp(1, self.population)
    }

    pub fn rollouts(&self) -> u64 {
        (self.population * self.iterations) as u64
    }

    pub fn validate(&self) -> Result<(), MdpError> {
        if !(self.elite_frac > 0.0 && self.elite_frac <= 1.0) {
            return Err(MdpError::Invalid("elite_frac must lie in (0, 1]".into()));
        }
        if self.population == 0 || self.iterations == 0 || self.horizon == 0 {
            return Err(MdpError::Invalid("population, iterations and horizon must be >= 1".into()));
        }
        if self.population as f64 * self.elite_frac + 1e-9 < 1.0 {
            return Err(MdpError::Invalid("population * elite_frac must be >= 1".into()));
        }
        if self.init_mean.len() != self.horizon {
            return Err(MdpError::Invalid("init_mean length must equal the horizon".into()));
        }
        if self.init_std.iter().any(|s| !(*s >= 0.0)) {
            return Err(MdpError::Invalid("init_std must be nonnegative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct CemPlan {
    pub sequence: Vec<Action>,
    /// Rollout value of `sequence`.
    pub value: f64,
    /// Sampled rollouts, excluding the final evaluation of `sequence`.
    pub rollouts: u64,
}

/// Discounted return of an open-loop sequence under `mdp.dynamics`, with the
/// terminal value estimate added unless the rollout left the admissible set.
pub fn rollout_sequence(state: &State, mdp: &MdpSpec<'_>, sequence: &[Action]) -> Result<f64, MdpError> {
    let mut x = state.clone();
    let mut total = 0.0;
    let mut discount = 1.0;
    for u in sequence {
        let t = mdp.transition(&x, u)?;
        total += discount * t.reward;
        if t.terminal {
            return Ok(total);
        }
        discount *= mdp.gamma;
        x = t.next;
    }
    Ok(total + discount * mdp.value_estimate.value(&x))
}

/// Indices of the `count` highest scores; ties keep the lower index.
pub fn select_elites(scores: &[f64], count: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    order.truncate(count);
    order
}

/// One Gaussian sampling distribution over action sequences.
#[derive(Debug, Clone)]
pub struct CemOptimizer {
    mean: Vec<Action>,
    std: Vec<Action>,
    params: CemParams,
}

impl CemOptimizer {
    pub fn new(params: CemParams) -> Result<Self, MdpError> {
        params.validate()?;
        let std = Action::from_row_slice(&params.init_std);
        Ok(Self {
            mean: params.init_mean.clone(),
            std: vec![std; params.horizon],
            params,
        })
    }

    pub fn mean(&self) -> &[Action] {
        &self.mean
    }

    pub fn std(&self) -> &[Action] {
        &self.std
    }

    fn sample<R: Rng + ?Sized>(&self, bounds: &BoxBounds, rng: &mut R) -> Vec<Action> {
        self.mean
            .iter()
            .zip(&self.std)
            .map(|(m, s)| {
                let raw = Action::from_iterator(
                    m.len(),
                    m.iter().zip(s.iter()).map(|(mu, sd)| mu + sd * rng.sample::<f64, _>(StandardNormal)),
                );
                bounds.clamp(&raw)
            })
            .collect()
    }

    /// Sample, score and refit once. Returns the best score seen.
    pub fn iterate<R: Rng + ?Sized>(&mut self, state: &State, mdp: &MdpSpec<'_>, rng: &mut R) -> Result<f64, MdpError> {
        let samples: Vec<Vec<Action>> = (0..self.params.population)
            .map(|_| self.sample(&mdp.action_bounds, rng))
            .collect();
        let scores = samples
            .iter()
            .map(|seq| rollout_sequence(state, mdp, seq))
            .collect::<Result<Vec<f64>, _>>()?;
        let elites = select_elites(&scores, self.params.elite_count());
        let n = elites.len() as f64;
        let mut collapsed = false;
        for t in 0..self.params.horizon {
            let mean = elites.iter().map(|&i| &samples[i][t]).sum::<Action>() / n;
            let var = elites
                .iter()
                .map(|&i| (&samples[i][t] - &mean).map(|d| d * d))
                .sum::<Action>()
                / n;
            let std = var.map(|v| {
                let s = v.sqrt();
                if s < MIN_STD {
                    collapsed = true;
                    MIN_STD
                } else {
                    s
                }
            });
            self.mean[t] = mean;
            self.std[t] = std;
        }
        if collapsed {
            COLLAPSE_WARNING.call_once(|| {
                log::warn!("CEM sampling distribution collapsed; std floored at {MIN_STD:e} (reported once)");
            });
            log::debug!("CEM sampling distribution collapsed");
        }
        Ok(scores[elites[0]])
    }
}

pub fn cem_plan<R: Rng + ?Sized>(state: &State, mdp: &MdpSpec<'_>, params: &CemParams, rng: &mut R) -> Result<CemPlan, MdpError> {
    let mut opt = CemOptimizer::new(params.clone())?;
    for _ in 0..params.iterations {
        opt.iterate(state, mdp, rng)?;
    }
    let value = rollout_sequence(state, mdp, opt.mean())?;
    Ok(CemPlan {
        sequence: opt.mean,
        value,
        rollouts: params.rollouts(),
    })
}

/// `[a_1 .. a_H] -> [a_2 .. a_H, a_H]`.
pub fn shift_sequence(prev: &[Action]) -> Vec<Action> {
    let mut shifted: Vec<Action> = prev.iter().skip(1).cloned().collect();
    if let Some(last) = prev.last() {
        shifted.push(last.clone());
    }
    shifted
}

pub fn cem_reuse_plan<R: Rng + ?Sized>(
    state: &State,
    mdp: &MdpSpec<'_>,
    params: &CemParams,
    prev_solution: &[Action],
    rng: &mut R,
) -> Result<CemPlan, MdpError> {
    if prev_solution.len() != params.horizon {
        return Err(MdpError::Invalid(format!(
            "previous solution has length {}, horizon is {}",
            prev_solution.len(),
            params.horizon
        )));
    }
    let hot = CemParams {
        init_mean: shift_sequence(prev_solution),
        ..params.clone()
    };
    cem_plan(state, mdp, &hot, rng)
}

#[derive(Debug, Clone)]
pub struct UctPlan {
    pub action: Action,
    pub value: f64,
    pub root_visits: u64,
}

/// Fresh single-node tree at `state`, `L` rollouts, best child.
pub fn uct_noreuse_plan<R: Rng + ?Sized>(
    state: &State,
    mdp: &MdpSpec<'_>,
    params: &SearchParams,
    rng: &mut R,
) -> Result<UctPlan, TreeError> {
    let mut tree = SearchTree::new(state.clone(), mdp, *params)?;
    tree.uct_search(mdp, params.iterations, rng);
    let (action, id) = tree.best_child()?;
    Ok(UctPlan {
        action,
        value: tree.node(id).mean_value().unwrap_or(0.0),
        root_visits: tree.root().visits,
    })
}
