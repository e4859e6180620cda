//! The episode loop and the backtrack ladder (inverse, checkpoint, replay).

use crate::dfs::{backtrack_target, choose_action, dfs_decide, DfsDecision};
use crate::plan::{apply_tracker_update, merge_replan, Plan};
use crate::policy::{BacktrackAct, PolicySet, StateView, TaskSpec};
use crate::sim_env::{CheckpointToken, Environment, Observation};
use crate::state_space::{
    unexplored_actions, ActionSpec, FailureLedger, Mode, NodeId, SearchTree, StateFingerprint, Trajectory,
    TrajectoryStep,
};
use crate::status::{BackStatus, ExecStatus};

use super::{
    dispatch_status, BacktrackScope, ConfigError, Directive, EpisodeConfig, EpisodeError, EpisodeEvent,
    EpisodeResult, Outcome, Snapshot, SnapshotStack,
};

/// Why the loop stopped.
enum Halt {
    Done,
    Fail(String),
    Budget,
}

impl From<EpisodeError> for Halt {
    fn from(e: EpisodeError) -> Self {
        Halt::Fail(e.to_string())
    }
}

fn policy_err(role: &'static str) -> impl FnOnce(crate::policy::PolicyError) -> Halt {
    move |source| EpisodeError::EpisodePolicyError { role, source }.into()
}

struct Runner<'a> {
    env: &'a mut dyn Environment,
    policies: &'a PolicySet,
    task: &'a TaskSpec,
    config: &'a EpisodeConfig,
    tree: SearchTree,
    ledger: FailureLedger,
    current: NodeId,
    plan: Plan,
    trajectory: Trajectory,
    mode: Mode,
    steps_used: u32,
    attempts: u32,
    successes: u32,
    backtrack_steps: u32,
    events: Vec<EpisodeEvent>,
    snapshots: SnapshotStack,
    initial_token: CheckpointToken,
}

/// Run one episode to DONE, FAIL or budget exhaustion.
///
/// The environment is reset first. Policy and environment errors end the
/// episode as FAIL with a diagnostic; only an invalid config is an `Err`.
pub fn run_episode(
    env: &mut dyn Environment,
    policies: &PolicySet,
    task: &TaskSpec,
    config: &EpisodeConfig,
    episode_id: impl Into<String>,
) -> Result<EpisodeResult, ConfigError> {
    config.validate()?;
    env.reset();
    let root_state = env.fingerprint();
    let tree = SearchTree::new(root_state, env.available_actions());
    let current = *tree.root();
    let initial_token = env.checkpoint();
    let mut runner = Runner {
        env,
        policies,
        task,
        config,
        tree,
        ledger: FailureLedger::default(),
        current,
        plan: Plan::default(),
        trajectory: Trajectory::new(),
        mode: Mode::Normal,
        steps_used: 0,
        attempts: 0,
        successes: 0,
        backtrack_steps: 0,
        events: Vec::new(),
        snapshots: SnapshotStack::new(config.snapshot_window),
        initial_token,
    };
    let halt = runner.run();
    let (outcome, diagnostic) = match halt {
        Halt::Done => (Outcome::Done, None),
        Halt::Fail(why) => (Outcome::Fail, Some(why)),
        Halt::Budget => (Outcome::BudgetExhausted, None),
    };
    let episode_id = episode_id.into();
    ::log::debug!(
        "{episode_id}: {outcome} after {} steps, {} backtracks ({} recovered)",
        runner.trajectory.len(),
        runner.attempts,
        runner.successes
    );
    for s in runner.snapshots.retain(|_| false) {
        runner.env.release(s.token);
    }
    runner.env.release(runner.initial_token);
    Ok(EpisodeResult {
        episode_id,
        outcome,
        steps_used: runner.steps_used,
        backtrack_attempts: runner.attempts,
        backtrack_successes: runner.successes,
        backtrack_steps_total: runner.backtrack_steps,
        final_state: runner.env.fingerprint(),
        final_mode: runner.mode,
        trajectory: runner.trajectory,
        final_plan: runner.plan,
        events: runner.events,
        diagnostic,
    })
}

impl Runner<'_> {
    fn run(&mut self) -> Halt {
        match self.run_inner() {
            Ok(never) => match never {},
            Err(halt) => halt,
        }
    }

    fn run_inner(&mut self) -> Result<std::convert::Infallible, Halt> {
        let (obs, available) = self.observe();
        self.plan = self
            .policies
            .planner
            .plan(&self.view(&obs, &available), self.task, &self.ledger)
            .map_err(policy_err("planner"))?;
        let mut skip_tracker = false;
        loop {
            let status = if skip_tracker {
                ExecStatus::Continue
            } else {
                self.track()?
            };
            skip_tracker = false;
            match dispatch_status(status, &self.config.ablation) {
                Directive::TerminateSuccess => return Err(Halt::Done),
                Directive::TerminateFail => {
                    return Err(Halt::Fail(match status {
                        ExecStatus::Backtrack => "dead branch detected with backtracking disabled".to_string(),
                        _ => "tracker reported FAIL".to_string(),
                    }))
                }
                Directive::EnterBacktrack => {
                    self.backtrack(false)?;
                    skip_tracker = true;
                }
                Directive::NextExecutorStep => match dfs_decide(&self.tree, &self.ledger, &self.current, false)
                    .map_err(EpisodeError::from)?
                {
                    DfsDecision::Descend(_) => self.descend()?,
                    DfsDecision::Backtrack { .. } => {
                        let flags = &self.config.ablation;
                        if !flags.enable_tracker || !flags.enable_backtrack {
                            return Err(Halt::Fail("dead end with no way back".to_string()));
                        }
                        self.backtrack(true)?;
                        skip_tracker = true;
                    }
                    DfsDecision::Exhausted | DfsDecision::Finish => {
                        return Err(Halt::Fail("search exhausted".to_string()))
                    }
                },
            }
        }
    }

    fn observe(&self) -> (Observation, Vec<ActionSpec>) {
        (self.env.observation(), self.env.available_actions())
    }

    fn view<'v>(&self, obs: &'v Observation, available: &'v [ActionSpec]) -> StateView<'v> {
        StateView {
            fingerprint: self.env.fingerprint(),
            observation: obs,
            available,
        }
    }

    fn check_budget(&self) -> Result<(), Halt> {
        if self.steps_used >= self.config.max_steps {
            Err(Halt::Budget)
        } else {
            Ok(())
        }
    }

    fn push(&mut self, from: StateFingerprint, action: Option<ActionSpec>, to: StateFingerprint, op: u64) {
        debug_assert_eq!(op, self.trajectory.len() as u64, "env op index and history index diverged");
        self.trajectory.push(TrajectoryStep {
            index: 0,
            mode: self.mode,
            from,
            action,
            to,
            exec_status: None,
            back_status: None,
            plan_revision: self.plan.revision,
        });
        self.steps_used += 1;
        if self.mode == Mode::Backtrack {
            self.backtrack_steps += 1;
        }
    }

    /// Consult the tracker (or the goal check when it is ablated) and fold in
    /// its plan update.
    fn track(&mut self) -> Result<ExecStatus, Halt> {
        let status = if self.config.ablation.enable_tracker {
            let (obs, available) = self.observe();
            let view = self.view(&obs, &available);
            let (proposed, status) = self
                .policies
                .tracker
                .track(&view, self.task, &self.plan, &self.trajectory, &self.ledger)
                .map_err(policy_err("tracker"))?;
            match apply_tracker_update(&self.plan, &proposed) {
                Ok(plan) => self.plan = plan,
                Err(e) => self.events.push(EpisodeEvent::PlanUpdateRejected {
                    at_step: self.trajectory.len() as u64,
                    reason: e.to_string(),
                }),
            }
            status
        } else if self.env.goal_satisfied() {
            ExecStatus::Done
        } else {
            ExecStatus::Continue
        };
        if let Some(last) = self.trajectory.last_mut() {
            if last.mode == Mode::Normal && last.exec_status.is_none() {
                last.exec_status = Some(status);
            }
        }
        Ok(status)
    }

    fn descend(&mut self) -> Result<(), Halt> {
        self.check_budget()?;
        let (obs, available) = self.observe();
        let hint = self
            .policies
            .executor
            .act(&self.view(&obs, &available), self.task, &self.plan, &self.trajectory)
            .map_err(policy_err("executor"))?;
        let unexplored = unexplored_actions(&self.tree, &self.ledger, &self.current).map_err(EpisodeError::from)?;
        let action = choose_action(&unexplored, Some(&hint)).expect("descend only with a nonempty unexplored set");
        let from = self.env.fingerprint();
        let out = self.env.step(&action).map_err(EpisodeError::from)?;
        self.push(from, Some(action.clone()), out.fingerprint, out.op);

        // A state already on the current root path closes a cycle; expanding
        // it again would only repeat that path.
        let on_path = self
            .tree
            .ancestors_inclusive(&self.current)
            .map_err(EpisodeError::from)?
            .iter()
            .any(|n| self.tree.get(n).is_some_and(|r| r.state == out.fingerprint));
        let next_available = if on_path { Vec::new() } else { self.env.available_actions() };
        self.current = self
            .tree
            .add_transition(&self.current, &action, &out.fingerprint, next_available)
            .map_err(EpisodeError::from)?;

        let token = self.env.checkpoint();
        if let Some(evicted) = self.snapshots.push(Snapshot {
            state: out.fingerprint,
            node: self.current,
            token,
            step_index: out.op,
        }) {
            self.env.release(evicted.token);
        }
        Ok(())
    }

    fn target_state(&self, node: &NodeId) -> StateFingerprint {
        self.tree.get(node).expect("backtrack target is a tree node").state
    }

    /// Choose where to climb back to; `None` means the search is exhausted
    /// for this scope.
    fn pick_target(&self) -> Result<Option<NodeId>, Halt> {
        match self.config.backtrack_scope {
            BacktrackScope::MultiLevel => {
                Ok(backtrack_target(&self.tree, &self.ledger, &self.current).map_err(EpisodeError::from)?)
            }
            BacktrackScope::SingleStep => {
                let record = self.tree.node(&self.current).map_err(EpisodeError::from)?;
                let Some((parent, _)) = &record.parent else {
                    return Ok(None);
                };
                let open = unexplored_actions(&self.tree, &self.ledger, parent).map_err(EpisodeError::from)?;
                Ok((!open.is_empty()).then_some(*parent))
            }
        }
    }

    fn verify(&mut self, target: &StateFingerprint, run_start: usize) -> Result<BackStatus, Halt> {
        let (obs, available) = self.observe();
        let status = self
            .policies
            .tracker
            .verify_backtrack(&self.view(&obs, &available), target, &self.trajectory)
            .map_err(policy_err("tracker"))?;
        if self.trajectory.len() > run_start {
            if let Some(last) = self.trajectory.last_mut() {
                last.back_status = Some(status);
            }
        }
        Ok(status)
    }

    fn recovered(&mut self, target: &StateFingerprint, run_start: usize) -> Result<bool, Halt> {
        let status = self.verify(target, run_start)?;
        Ok(status == BackStatus::Recovered && self.env.fingerprint() == *target)
    }

    /// Move `current` to the tree node the environment now sits at, searching
    /// the ancestors of the node we climbed from.
    fn relocate(&mut self, from: &NodeId) -> Result<bool, Halt> {
        let here = self.env.fingerprint();
        let ancestors = self.tree.ancestors_inclusive(from).map_err(EpisodeError::from)?;
        match ancestors.into_iter().find(|n| self.target_state(n) == here) {
            Some(n) => {
                self.current = n;
                Ok(true)
            }
            None => Ok(false),
        }
    }

    /// One backtrack attempt: inverse moves with retries, then a checkpoint
    /// restore, then reset-and-replay. On success the abandoned branch is
    /// recorded and the plan is revised.
    fn backtrack(&mut self, forced: bool) -> Result<(), Halt> {
        let Some(target) = self.pick_target()? else {
            return Err(Halt::Fail("search exhausted".to_string()));
        };
        self.check_budget()?;
        let target_fp = self.target_state(&target);
        let abandoned = self.current;
        let run_start = self.trajectory.len();
        self.attempts += 1;
        self.mode = Mode::Backtrack;
        self.events.push(EpisodeEvent::BacktrackStarted {
            at_step: run_start as u64,
            target: target_fp,
            forced,
        });

        let mut recovered = false;
        'retries: for _ in 0..self.config.max_backtrack_retries {
            while self.current != target {
                let request = self
                    .policies
                    .executor
                    .backtrack_act(&self.trajectory, &target_fp)
                    .map_err(policy_err("executor"))?;
                let BacktrackAct::Inverse(action) = request else {
                    break 'retries;
                };
                self.check_budget()?;
                let from = self.env.fingerprint();
                match self.env.step(&action) {
                    Ok(out) => {
                        self.push(from, Some(action), out.fingerprint, out.op);
                        let start = self.current;
                        if !self.relocate(&start)? {
                            // Landed somewhere off the tree path; only a
                            // restore can help now.
                            break 'retries;
                        }
                    }
                    Err(e) => {
                        self.events.push(EpisodeEvent::InverseRejected {
                            at_step: self.trajectory.len() as u64,
                            message: e.to_string(),
                        });
                        break;
                    }
                }
            }
            if self.recovered(&target_fp, run_start)? {
                recovered = true;
                break;
            }
        }

        if !recovered {
            if let Some(snap) = self.snapshots.find(&target).cloned() {
                self.check_budget()?;
                let from = self.env.fingerprint();
                let out = self.env.restore(snap.token).map_err(EpisodeError::from)?;
                self.push(from, None, out.fingerprint, out.op);
                self.current = target;
                self.events.push(EpisodeEvent::CheckpointRestored {
                    at_step: out.op,
                    state: out.fingerprint,
                });
                recovered = self.recovered(&target_fp, run_start)?;
            }
        }

        if !recovered && self.config.reset_replay {
            self.check_budget()?;
            let from = self.env.fingerprint();
            let out = self.env.restore(self.initial_token).map_err(EpisodeError::from)?;
            self.push(from, None, out.fingerprint, out.op);
            self.current = *self.tree.root();
            let path = self.tree.root_path(&target).map_err(EpisodeError::from)?;
            for edge in &path {
                self.check_budget()?;
                let from = self.env.fingerprint();
                let out = self.env.step(&edge.action).map_err(EpisodeError::from)?;
                self.push(from, Some(edge.action.clone()), out.fingerprint, out.op);
                let expected = self.target_state(&edge.child);
                if out.fingerprint != expected {
                    return Err(EpisodeError::ReplayMismatch {
                        expected,
                        got: out.fingerprint,
                    }
                    .into());
                }
                self.current = edge.child;
            }
            self.events.push(EpisodeEvent::PrefixReplayed {
                at_step: self.trajectory.len() as u64,
                edges: path.len(),
            });
            recovered = self.recovered(&target_fp, run_start)?;
        }

        self.events.push(EpisodeEvent::BacktrackFinished {
            at_step: self.trajectory.len() as u64,
            recovered,
        });
        if !recovered {
            return Err(EpisodeError::BacktrackIrrecoverable.into());
        }

        let abandoned_path = self.tree.root_path_pairs(&abandoned).map_err(EpisodeError::from)?;
        let newly = self
            .ledger
            .record_failure(&self.tree, &abandoned_path, &target)
            .map_err(EpisodeError::from)?;
        self.events.push(EpisodeEvent::FailureRecorded {
            at_step: self.trajectory.len() as u64,
            state: target_fp,
            newly,
        });
        self.successes += 1;

        let (obs, available) = self.observe();
        let fresh = self
            .policies
            .planner
            .plan(&self.view(&obs, &available), self.task, &self.ledger)
            .map_err(policy_err("planner"))?;
        self.plan = merge_replan(&self.plan, &fresh);
        self.events.push(EpisodeEvent::Replanned {
            at_step: self.trajectory.len() as u64,
            revision: self.plan.revision,
        });
        self.mode = Mode::Normal;

        let tree = &self.tree;
        let dropped = self
            .snapshots
            .retain(|s| tree.is_ancestor(&s.node, &target).unwrap_or(false));
        for s in dropped {
            self.env.release(s.token);
        }
        Ok(())
    }
}
