//! UCT search tree with subtree reuse.
//!
//! Nodes live in an index arena. Re-rooting frees the discarded part of the
//! tree slot by slot and never visits the retained subtree, so carrying a
//! subtree into the next planning step costs O(discarded nodes). Depths are
//! stored as absolute creation depths; the relative depth of a node is its
//! absolute depth minus the root's, which shifts every retained node by one
//! level on re-root without touching it.

use std::io::Write;

use rand::Rng;
use serde::Serialize;
use thiserror::Error;

use crate::mdp::{sample_action_unvisited, Action, ActionSet, MdpError, MdpSpec, State};

#[derive(Debug, Error)]
pub enum TreeError {
    #[error("cannot score an unvisited child")]
    UnvisitedChild,
    #[error("node has no children")]
    NoChildren,
    #[error("node {0} is not a child of the root")]
    NotRootChild(NodeId),
    #[error("node {0} is not live")]
    StaleNode(NodeId),
    #[error("state dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("invalid search parameters: {0}")]
    InvalidParams(String),
    #[error(transparent)]
    Mdp(#[from] MdpError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(transparent)]
pub struct NodeId(u32);

impl NodeId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl std::fmt::Display for NodeId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "#{}", self.0)
    }
}

#[derive(Debug, Clone)]
pub struct TreeNode {
    pub state: State,
    /// Action that produced this state; zero at a fresh root.
    pub action: Action,
    /// Index into a discrete action set.
    pub action_index: Option<usize>,
    /// `R(state, action)`, cached at creation.
    pub reward: f64,
    /// Left the admissible set; never expanded.
    pub terminal: bool,
    pub children: Vec<NodeId>,
    /// Sum of backpropagated returns.
    pub value: f64,
    pub visits: u64,
    depth: u32,
}

impl TreeNode {
    fn new(state: State, action: Action, action_index: Option<usize>, reward: f64, depth: u32) -> Self {
        Self {
            state,
            action,
            action_index,
            reward,
            terminal: false,
            children: Vec::new(),
            value: 0.0,
            visits: 0,
            depth,
        }
    }

    pub fn mean_value(&self) -> Option<f64> {
        (self.visits > 0).then(|| self.value / self.visits as f64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, serde::Deserialize)]
pub struct SearchParams {
    /// Rollouts per planning step (`L`).
    pub iterations: usize,
    /// Maximum children per node (`b`).
    pub branching: usize,
    /// Transitions per rollout below the current root (`K`).
    pub depth: usize,
    /// Exploration constant of the UCT score.
    pub exploration: f64,
}

impl SearchParams {
    pub fn validate(&self) -> Result<(), TreeError> {
        if self.iterations == 0 || self.branching == 0 || self.depth == 0 {
            return Err(TreeError::InvalidParams(
                "iterations, branching and depth must all be >= 1".into(),
            ));
        }
        if !(self.exploration >= 0.0) {
            return Err(TreeError::InvalidParams("exploration must be >= 0".into()));
        }
        Ok(())
    }
}

/// `V/N + eps * sqrt(ln(parent_N) / N)`.
pub fn uct_score(child: &TreeNode, parent_visits: u64, exploration: f64) -> Result<f64, TreeError> {
    if child.visits == 0 || parent_visits == 0 {
        return Err(TreeError::UnvisitedChild);
    }
    let n = child.visits as f64;
    Ok(child.value / n + exploration * ((parent_visits as f64).ln() / n).sqrt())
}

/// A rollout's node path; `error` is set when the dynamics failed and the
/// path was truncated at the last good node.
#[derive(Debug)]
pub struct Rollout {
    pub path: Vec<NodeId>,
    pub created: usize,
    pub error: Option<MdpError>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SearchStats {
    pub rollouts: u64,
    pub aborted: u64,
    pub nodes_created: u64,
}

#[derive(Debug)]
pub struct SearchTree {
    slots: Vec<Option<TreeNode>>,
    free: Vec<u32>,
    live: usize,
    root: NodeId,
    params: SearchParams,
}

impl SearchTree {
    /// Fresh tree `(x, 0, [], 0, 0)`.
    pub fn new(root_state: State, mdp: &MdpSpec<'_>, params: SearchParams) -> Result<Self, TreeError> {
        params.validate()?;
        if root_state.len() != mdp.state_dim() {
            return Err(TreeError::DimensionMismatch(root_state.len(), mdp.state_dim()));
        }
        let action = Action::zeros(mdp.action_dim());
        let reward = mdp.reward.reward(&root_state, &action)?;
        let root = TreeNode::new(root_state, action, None, reward, 0);
        Ok(Self {
            slots: vec![Some(root)],
            free: Vec::new(),
            live: 1,
            root: NodeId(0),
            params,
        })
    }

    /// Discard everything and start again from a fresh root at `state`.
    pub fn reset(&mut self, state: State, mdp: &MdpSpec<'_>) -> Result<(), TreeError> {
        *self = Self::new(state, mdp, self.params)?;
        Ok(())
    }

    pub fn params(&self) -> &SearchParams {
        &self.params
    }

    pub fn root_id(&self) -> NodeId {
        self.root
    }

    pub fn root(&self) -> &TreeNode {
        self.node(self.root)
    }

    /// Panics on a freed id; use [`SearchTree::get`] for a checked lookup.
    pub fn node(&self, id: NodeId) -> &TreeNode {
        self.get(id).expect("stale node id")
    }

    pub fn get(&self, id: NodeId) -> Option<&TreeNode> {
        self.slots.get(id.index()).and_then(Option::as_ref)
    }

    fn node_mut(&mut self, id: NodeId) -> &mut TreeNode {
        self.slots[id.index()].as_mut().expect("stale node id")
    }

    /// Number of live nodes.
    pub fn len(&self) -> usize {
        self.live
    }

    pub fn is_empty(&self) -> bool {
        self.live == 0
    }

    /// Depth of `id` below the current root.
    pub fn relative_depth(&self, id: NodeId) -> usize {
        (self.node(id).depth - self.root().depth) as usize
    }

    fn alloc(&mut self, node: TreeNode) -> NodeId {
        self.live += 1;
        match self.free.pop() {
            Some(slot) => {
                self.slots[slot as usize] = Some(node);
                NodeId(slot)
            }
            None => {
                self.slots.push(Some(node));
                NodeId((self.slots.len() - 1) as u32)
            }
        }
    }

    /// Preorder traversal of the subtree under `id`.
    pub fn subtree(&self, id: NodeId) -> Vec<NodeId> {
        let mut out = Vec::new();
        let mut stack = vec![id];
        while let Some(n) = stack.pop() {
            out.push(n);
            stack.extend(self.node(n).children.iter().rev());
        }
        out
    }

    /// Argmax of the UCT score over the children; ties go to the lowest index.
    pub fn select_child(&self, id: NodeId, exploration: f64) -> Result<NodeId, TreeError> {
        let node = self.node(id);
        let mut best: Option<(NodeId, f64)> = None;
        for &c in &node.children {
            let score = uct_score(self.node(c), node.visits, exploration)?;
            if best.is_none_or(|(_, s)| score > s) {
                best = Some((c, score));
            }
        }
        best.map(|(c, _)| c).ok_or(TreeError::NoChildren)
    }

    fn expansion_limit(&self, actions: &ActionSet) -> usize {
        match actions.len() {
            Some(n) => n.min(self.params.branching),
            None => self.params.branching,
        }
    }

    fn expand<R: Rng + ?Sized>(
        &mut self,
        parent: NodeId,
        mdp: &MdpSpec<'_>,
        rng: &mut R,
    ) -> Result<NodeId, MdpError> {
        let node = self.node(parent);
        let (action, action_index) = match &mdp.actions {
            ActionSet::Discrete(list) => {
                let visited: Vec<usize> = node
                    .children
                    .iter()
                    .filter_map(|&c| self.node(c).action_index)
                    .collect();
                let idx = sample_action_unvisited(&mdp.actions, &visited, rng)?;
                (list[idx].clone(), Some(idx))
            }
            ActionSet::ContinuousBox => (mdp.action_bounds.sample(rng), None),
        };
        let transition = mdp.transition(&node.state, &action)?;
        let mut child = TreeNode::new(transition.next, action, action_index, transition.reward, node.depth + 1);
        child.terminal = transition.terminal;
        let id = self.alloc(child);
        self.node_mut(parent).children.push(id);
        Ok(id)
    }

    /// Descend from the root for `depth` transitions, expanding a new child
    /// wherever a node has fewer than `b` children and following the UCT
    /// argmax otherwise.
    pub fn rollout_once<R: Rng + ?Sized>(&mut self, mdp: &MdpSpec<'_>, rng: &mut R) -> Rollout {
        let mut path = vec![self.root];
        let mut created = 0;
        let limit = self.expansion_limit(&mdp.actions);
        for _ in 0..self.params.depth {
            let current = *path.last().unwrap();
            let node = self.node(current);
            if node.terminal {
                break;
            }
            let next = if node.children.len() < limit {
                match self.expand(current, mdp, rng) {
                    Ok(id) => {
                        created += 1;
                        id
                    }
                    Err(error) => {
                        log::warn!("rollout aborted at depth {}: {error}", path.len() - 1);
                        return Rollout {
                            path,
                            created,
                            error: Some(error),
                        };
                    }
                }
            } else {
                self.select_child(current, self.params.exploration)
                    .expect("fully expanded nodes have visited children")
            };
            path.push(next);
        }
        Rollout {
            path,
            created,
            error: None,
        }
    }

    /// Leaf-to-root update: every node on the path gets `N += 1` and
    /// `V += r_node + gamma * (return below it)`, where the return below the
    /// leaf is `terminal_value`.
    pub fn backpropagate(&mut self, path: &[NodeId], rewards: &[f64], gamma: f64, terminal_value: f64) {
        assert_eq!(path.len(), rewards.len(), "rewards must align with the path");
        let mut cumulative = terminal_value;
        for (&id, &r) in path.iter().zip(rewards).rev() {
            cumulative = r + gamma * cumulative;
            let node = self.node_mut(id);
            node.visits += 1;
            node.value += cumulative;
        }
    }

    /// Run `iterations` rollout/backpropagate cycles on the current tree.
    pub fn uct_search<R: Rng + ?Sized>(
        &mut self,
        mdp: &MdpSpec<'_>,
        iterations: usize,
        rng: &mut R,
    ) -> SearchStats {
        let mut stats = SearchStats::default();
        let mut rewards = Vec::with_capacity(self.params.depth + 1);
        for _ in 0..iterations {
            let rollout = self.rollout_once(mdp, rng);
            stats.rollouts += 1;
            stats.nodes_created += rollout.created as u64;
            if rollout.error.is_some() {
                stats.aborted += 1;
            }
            rewards.clear();
            rewards.extend(rollout.path.iter().map(|&id| self.node(id).reward));
            let leaf = self.node(*rollout.path.last().unwrap());
            let terminal_value = if leaf.terminal || rollout.error.is_some() {
                0.0
            } else {
                mdp.value_estimate.value(&leaf.state)
            };
            self.backpropagate(&rollout.path, &rewards, mdp.gamma, terminal_value);
        }
        stats
    }

    /// First-level child with the highest mean value; ties go to the lowest
    /// index.
    pub fn best_child(&self) -> Result<(Action, NodeId), TreeError> {
        let mut best: Option<(NodeId, f64)> = None;
        for &c in &self.root().children {
            let Some(mean) = self.node(c).mean_value() else {
                continue;
            };
            if best.is_none_or(|(_, m)| mean > m) {
                best = Some((c, mean));
            }
        }
        let (id, _) = best.ok_or(TreeError::NoChildren)?;
        Ok((self.node(id).action.clone(), id))
    }

    /// Make `chosen` the root and free every node outside its subtree.
    /// Returns the number of freed nodes.
    pub fn re_root(&mut self, chosen: NodeId) -> Result<usize, TreeError> {
        if !self.root().children.contains(&chosen) {
            return Err(TreeError::NotRootChild(chosen));
        }
        let old_root = self.root;
        let siblings: Vec<NodeId> = std::mem::take(&mut self.node_mut(old_root).children)
            .into_iter()
            .filter(|&c| c != chosen)
            .collect();
        let mut stack = siblings;
        stack.push(old_root);
        let mut freed = 0;
        while let Some(id) = stack.pop() {
            let node = self.slots[id.index()].take().expect("tree nodes have one parent");
            stack.extend(node.children);
            self.free.push(id.0);
            freed += 1;
        }
        self.live -= freed;
        self.root = chosen;
        Ok(freed)
    }

    /// One JSON object per live node, in preorder from the root:
    /// `{"id", "parent_id", "state", "action", "V", "N"}`.
    pub fn export_json_lines<W: Write>(&self, mut out: W) -> Result<(), TreeError> {
        #[derive(Serialize)]
        struct Line<'a> {
            id: NodeId,
            parent_id: Option<NodeId>,
            state: &'a [f64],
            action: &'a [f64],
            #[serde(rename = "V")]
            value: f64,
            #[serde(rename = "N")]
            visits: u64,
        }
        let mut stack = vec![(self.root, None)];
        while let Some((id, parent)) = stack.pop() {
            let node = self.node(id);
            let line = Line {
                id,
                parent_id: parent,
                state: node.state.as_slice(),
                action: node.action.as_slice(),
                value: node.value,
                visits: node.visits,
            };
            serde_json::to_writer(&mut out, &line).map_err(std::io::Error::from)?;
            out.write_all(b"\n")?;
            stack.extend(node.children.iter().rev().map(|&c| (c, Some(id))));
        }
        Ok(())
    }
}

/// True iff `||root_state - measured|| > tau`.
pub fn reset_check(root_state: &State, measured: &State, tau: f64) -> Result<bool, TreeError> {
    if root_state.len() != measured.len() {
        return Err(TreeError::DimensionMismatch(root_state.len(), measured.len()));
    }
    Ok((root_state - measured).norm() > tau)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::{BoxBounds, DynamicsModel, RewardFn};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// 1-D walk: x' = x + u, reward 0.1 * (x' + 10) clipped to [0, 1].
    struct Walk;
    impl DynamicsModel for Walk {
        fn state_dim(&self) -> usize {
            1
        }
        fn action_dim(&self) -> usize {
            1
        }
        fn step(&self, x: &State, u: &Action) -> Result<State, MdpError> {
            Ok(x + u)
        }
    }
    struct WalkReward;
    impl RewardFn for WalkReward {
        fn reward(&self, x: &State, _u: &Action) -> Result<f64, MdpError> {
            Ok((0.05 * (x[0] + 10.0)).clamp(0.0, 1.0))
        }
    }

    fn walk_mdp(n_actions: usize) -> MdpSpec<'static> {
        let bounds = BoxBounds::symmetric(&[5.0]).unwrap();
        let actions = (0..n_actions)
            .map(|i| Action::from_element(1, i as f64 - (n_actions / 2) as f64))
            .collect();
        MdpSpec::new(
            BoxBounds::symmetric(&[100.0]).unwrap(),
            bounds.clone(),
            0.9,
            ActionSet::discrete(actions, &bounds).unwrap(),
            &Walk,
            &WalkReward,
        )
        .unwrap()
    }

    fn params(b: usize, k: usize) -> SearchParams {
        SearchParams {
            iterations: 1,
            branching: b,
            depth: k,
            exploration: 1.0,
        }
    }

    fn node(value: f64, visits: u64) -> TreeNode {
        let mut n = TreeNode::new(State::zeros(1), Action::zeros(1), None, 0.0, 1);
        n.value = value;
        n.visits = visits;
        n
    }

    #[test]
    fn uct_score_examples() {
        assert_eq!(uct_score(&node(0.0, 1), 1, 1.0).unwrap(), 0.0);
        let expected = 0.5 + (16f64.ln() / 4.0).sqrt();
        assert!((uct_score(&node(2.0, 4), 16, 1.0).unwrap() - expected).abs() < 1e-12);
        assert!((expected - 1.332555).abs() < 1e-6);
        assert_eq!(uct_score(&node(3.0, 4), 100, 0.0).unwrap(), 0.75);
        assert!(matches!(uct_score(&node(1.0, 0), 3, 1.0), Err(TreeError::UnvisitedChild)));
    }

    #[test]
    fn first_rollout_is_one_chain() {
        let mdp = walk_mdp(7);
        let mut tree = SearchTree::new(State::zeros(1), &mdp, params(7, 6)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        tree.uct_search(&mdp, 1, &mut rng);
        assert_eq!(tree.len(), 7);
        assert_eq!(tree.root().visits, 1);
        let path = tree.subtree(tree.root_id());
        assert!(path.iter().all(|&id| tree.node(id).children.len() <= 1));
    }

    #[test]
    fn root_saturates_before_selection() {
        let mdp = walk_mdp(7);
        let mut tree = SearchTree::new(State::zeros(1), &mdp, params(7, 4)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        tree.uct_search(&mdp, 7, &mut rng);
        let mut seen: Vec<usize> = tree
            .root()
            .children
            .iter()
            .map(|&c| tree.node(c).action_index.unwrap())
            .collect();
        seen.sort_unstable();
        assert_eq!(seen, (0..7).collect::<Vec<_>>());
    }

    #[test]
    fn search_with_zero_iterations_is_a_noop() {
        let mdp = walk_mdp(3);
        let mut tree = SearchTree::new(State::zeros(1), &mdp, params(3, 3)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let stats = tree.uct_search(&mdp, 0, &mut rng);
        assert_eq!(stats.rollouts, 0);
        assert_eq!(tree.len(), 1);
        assert_eq!(tree.root().visits, 0);
    }

    #[test]
    fn backpropagate_single_node() {
        let mdp = walk_mdp(3);
        let mut tree = SearchTree::new(State::zeros(1), &mdp, params(3, 3)).unwrap();
        let root = tree.root_id();
        tree.backpropagate(&[root], &[0.7], 0.9, 0.0);
        assert_eq!(tree.root().visits, 1);
        assert_eq!(tree.root().value, 0.7);
    }

    #[test]
    fn backpropagate_two_nodes_matches_hand_unroll() {
        let mdp = walk_mdp(3);
        let mut tree = SearchTree::new(State::zeros(1), &mdp, params(3, 1)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let rollout = tree.rollout_once(&mdp, &mut rng);
        assert_eq!(rollout.path.len(), 2);
        let (r1, r2, gamma) = (0.3, 0.8, 0.5);
        tree.backpropagate(&rollout.path, &[r1, r2], gamma, 0.0);
        // leaf: cumulative = r2; root: cumulative = r1 + gamma * r2
        assert_eq!(tree.node(rollout.path[1]).value, r2);
        assert_eq!(tree.root().value, r1 + gamma * r2);
        assert_eq!(tree.root().visits, 1);
        assert_eq!(tree.node(rollout.path[1]).visits, 1);
    }

    #[test]
    fn backpropagate_zero_rewards_only_counts() {
        let mdp = walk_mdp(3);
        let mut tree = SearchTree::new(State::zeros(1), &mdp, params(3, 2)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let rollout = tree.rollout_once(&mdp, &mut rng);
        tree.backpropagate(&rollout.path, &vec![0.0; rollout.path.len()], 0.9, 0.0);
        for &id in &rollout.path {
            assert_eq!(tree.node(id).visits, 1);
            assert_eq!(tree.node(id).value, 0.0);
        }
    }

    #[test]
    fn select_child_ties_and_forced() {
        let mdp = walk_mdp(3);
        let mut tree = SearchTree::new(State::zeros(1), &mdp, params(3, 1)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(matches!(tree.select_child(tree.root_id(), 1.0), Err(TreeError::NoChildren)));
        tree.uct_search(&mdp, 1, &mut rng);
        let only = tree.root().children[0];
        assert_eq!(tree.select_child(tree.root_id(), 1.0).unwrap(), only);
        tree.uct_search(&mdp, 2, &mut rng);
        let children = tree.root().children.clone();
        for &c in &children {
            let n = tree.node_mut(c);
            n.value = 1.0;
            n.visits = 1;
        }
        assert_eq!(tree.select_child(tree.root_id(), 1.0).unwrap(), children[0]);
        tree.node_mut(children[1]).value = 1.3;
        tree.node_mut(children[2]).value = 0.7;
        assert_eq!(tree.select_child(tree.root_id(), 1.0).unwrap(), children[1]);
    }

    #[test]
    fn best_child_uses_mean_not_uct() {
        let mdp = walk_mdp(3);
        let mut tree = SearchTree::new(State::zeros(1), &mdp, params(3, 1)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(matches!(tree.best_child(), Err(TreeError::NoChildren)));
        tree.uct_search(&mdp, 3, &mut rng);
        let children = tree.root().children.clone();
        for (&c, (v, n)) in children.iter().zip([(0.2, 1), (9.0, 10), (0.4, 1)]) {
            let node = tree.node_mut(c);
            node.value = v;
            node.visits = n;
        }
        // UCT would prefer the rarely visited children; the mean picks index 1.
        assert_eq!(tree.best_child().unwrap().1, children[1]);
        for &c in &children {
            let node = tree.node_mut(c);
            node.value = 1.0;
            node.visits = 2;
        }
        assert_eq!(tree.best_child().unwrap().1, children[0]);
    }

    #[test]
    fn re_root_rejects_non_children() {
        let mdp = walk_mdp(3);
        let mut tree = SearchTree::new(State::zeros(1), &mdp, params(3, 3)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        tree.uct_search(&mdp, 1, &mut rng);
        let grandchild = tree.node(tree.root().children[0]).children[0];
        assert!(matches!(tree.re_root(grandchild), Err(TreeError::NotRootChild(_))));
        assert!(matches!(tree.re_root(tree.root_id()), Err(TreeError::NotRootChild(_))));
    }

    #[test]
    fn re_root_to_leaf_keeps_statistics() {
        let mdp = walk_mdp(3);
        let mut tree = SearchTree::new(State::zeros(1), &mdp, params(3, 1)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        tree.uct_search(&mdp, 9, &mut rng);
        let (_, leaf) = tree.best_child().unwrap();
        let before = tree.node(leaf).clone();
        let freed = tree.re_root(leaf).unwrap();
        assert_eq!(freed, 3);
        assert_eq!(tree.len(), 1);
        assert_eq!(tree.root().visits, before.visits);
        assert_eq!(tree.root().value, before.value);
        assert_eq!(tree.relative_depth(leaf), 0);
    }

    #[test]
    fn freed_slots_are_reused() {
        let mdp = walk_mdp(3);
        let mut tree = SearchTree::new(State::zeros(1), &mdp, params(3, 3)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        tree.uct_search(&mdp, 30, &mut rng);
        let (_, child) = tree.best_child().unwrap();
        tree.re_root(child).unwrap();
        let slots = tree.slots.len();
        let live = tree.len();
        tree.uct_search(&mdp, 3, &mut rng);
        assert!(tree.slots.len() <= slots + 3);
        assert_eq!(tree.subtree(tree.root_id()).len(), tree.len());
        assert!(tree.len() > live);
    }

    #[test]
    fn reset_check_threshold() {
        let a = State::from_vec(vec![0.0, 0.0]);
        let b = State::from_vec(vec![0.6, 0.0]);
        assert!(!reset_check(&a, &a, 1e-9).unwrap());
        assert!(reset_check(&a, &b, 0.5).unwrap());
        assert!(!reset_check(&a, &b, 0.6).unwrap());
        assert!(reset_check(&a, &State::zeros(3), 1.0).is_err());
    }

    #[test]
    fn json_lines_export() {
        let mdp = walk_mdp(3);
        let mut tree = SearchTree::new(State::zeros(1), &mdp, params(3, 2)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        tree.uct_search(&mdp, 4, &mut rng);
        let mut buf = Vec::new();
        tree.export_json_lines(&mut buf).unwrap();
        let lines: Vec<serde_json::Value> = String::from_utf8(buf)
            .unwrap()
            .lines()
            .map(|l| serde_json::from_str(l).unwrap())
            .collect();
        assert_eq!(lines.len(), tree.len());
        assert!(lines[0]["parent_id"].is_null());
        assert_eq!(lines[0]["N"], 4);
        assert!(lines[1..].iter().all(|l| l["parent_id"].is_u64()));
    }
}
