//! Uniform planner interface over the tree planners and the CEM baselines,
//! as driven by the receding-horizon loop.

use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::baselines::{cem_plan, cem_reuse_plan, CemParams};
use crate::mdp::{Action, MdpError, MdpSpec, State};
use crate::tree::{reset_check, NodeId, SearchParams, SearchTree, TreeError};

pub type SimRng = ChaCha8Rng;

#[derive(Debug, Error)]
pub enum PlanError {
    #[error(transparent)]
    Tree(#[from] TreeError),
    #[error(transparent)]
    Mdp(#[from] MdpError),
    #[error("planner produced no candidate action")]
    Starved,
    #[error("advance called before plan")]
    NoPlan,
}

/// The output of one planning step.
#[derive(Debug, Clone)]
pub struct Plan {
    /// `x^d_k`: the state the plan starts from.
    pub desired_state: State,
    /// `u^d_{k+1}`.
    pub desired_action: Action,
    /// Planner's value estimate of the chosen action.
    pub value: f64,
    /// Root visit count after planning (tree planners only).
    pub root_visits: u64,
    /// Root visit count carried in from the previous step.
    pub reused_visits: u64,
    /// Dynamics rollouts spent on this step.
    pub rollouts: u64,
}

pub trait Planner: Send {
    fn name(&self) -> &str;

    /// Prepare for an episode starting at `x0`.
    fn begin(&mut self, x0: &State, mdp: &MdpSpec<'_>) -> Result<(), PlanError>;

    fn plan(&mut self, measured: &State, mdp: &MdpSpec<'_>, rng: &mut SimRng) -> Result<Plan, PlanError>;

    /// Called after the real step with the new measurement. Returns true when
    /// the planner discarded its carried state because of a reset.
    fn advance(&mut self, measured: &State, mdp: &MdpSpec<'_>, tau: f64) -> Result<bool, PlanError>;
}

/// UCT planner. With reuse it is the model predictive tree; without, every
/// step starts from a fresh root at the measured state.
#[derive(Debug)]
pub struct TreePlanner {
    params: SearchParams,
    reuse: bool,
    tree: Option<SearchTree>,
    chosen: Option<NodeId>,
}

impl TreePlanner {
    pub fn new(params: SearchParams, reuse: bool) -> Result<Self, PlanError> {
        params.validate()?;
        Ok(Self {
            params,
            reuse,
            tree: None,
            chosen: None,
        })
    }

    pub fn tree(&self) -> Option<&SearchTree> {
        self.tree.as_ref()
    }
}

impl Planner for TreePlanner {
    fn name(&self) -> &str {
        if self.reuse {
            "mpt"
        } else {
            "uct"
        }
    }

    fn begin(&mut self, x0: &State, mdp: &MdpSpec<'_>) -> Result<(), PlanError> {
        self.tree = Some(SearchTree::new(x0.clone(), mdp, self.params)?);
        self.chosen = None;
        Ok(())
    }

    fn plan(&mut self, measured: &State, mdp: &MdpSpec<'_>, rng: &mut SimRng) -> Result<Plan, PlanError> {
        let tree = match &mut self.tree {
            Some(tree) => tree,
            None => self.tree.insert(SearchTree::new(measured.clone(), mdp, self.params)?),
        };
        if !self.reuse {
            tree.reset(measured.clone(), mdp)?;
        }
        let reused_visits = tree.root().visits;
        let stats = tree.uct_search(mdp, self.params.iterations, rng);
        let (action, id) = match tree.best_child() {
            Ok(best) => best,
            Err(TreeError::NoChildren) => return Err(PlanError::Starved),
            Err(e) => return Err(e.into()),
        };
        self.chosen = Some(id);
        Ok(Plan {
            desired_state: tree.root().state.clone(),
            desired_action: action,
            value: tree.node(id).mean_value().unwrap_or(0.0),
            root_visits: tree.root().visits,
            reused_visits,
            rollouts: stats.rollouts,
        })
    }

    fn advance(&mut self, measured: &State, mdp: &MdpSpec<'_>, tau: f64) -> Result<bool, PlanError> {
        let chosen = self.chosen.take().ok_or(PlanError::NoPlan)?;
        if !self.reuse {
            return Ok(false);
        }
        let tree = self.tree.as_mut().ok_or(PlanError::NoPlan)?;
        tree.re_root(chosen)?;
        if tree.root().terminal || reset_check(&tree.root().state, measured, tau)? {
            tree.reset(measured.clone(), mdp)?;
            return Ok(true);
        }
        Ok(false)
    }
}

/// Cross-entropy planner, optionally hot-started from its previous solution.
#[derive(Debug)]
pub struct CemPlanner {
    params: CemParams,
    reuse: bool,
    previous: Option<Vec<Action>>,
}

impl CemPlanner {
    pub fn new(params: CemParams, reuse: bool) -> Result<Self, PlanError> {
        params.validate()?;
        Ok(Self {
            params,
            reuse,
            previous: None,
        })
    }
}

impl Planner for CemPlanner {
    fn name(&self) -> &str {
        if self.reuse {
            "cem-reuse"
        } else {
            "cem"
        }
    }

    fn begin(&mut self, _x0: &State, _mdp: &MdpSpec<'_>) -> Result<(), PlanError> {
        self.previous = None;
        Ok(())
    }

    fn plan(&mut self, measured: &State, mdp: &MdpSpec<'_>, rng: &mut SimRng) -> Result<Plan, PlanError> {
        let plan = match (&self.previous, self.reuse) {
            (Some(prev), true) => cem_reuse_plan(measured, mdp, &self.params, prev, rng)?,
            _ => cem_plan(measured, mdp, &self.params, rng)?,
        };
        let first = plan.sequence.first().cloned().ok_or(PlanError::Starved)?;
        let out = Plan {
            desired_state: measured.clone(),
            desired_action: first,
            value: plan.value,
            root_visits: 0,
            reused_visits: 0,
            rollouts: plan.rollouts,
        };
        self.previous = Some(plan.sequence);
        Ok(out)
    }

    fn advance(&mut self, _measured: &State, _mdp: &MdpSpec<'_>, _tau: f64) -> Result<bool, PlanError> {
        Ok(false)
    }
}
