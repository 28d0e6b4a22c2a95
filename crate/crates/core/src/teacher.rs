//! The advice source: an exact value-iteration oracle, or a Q-network
//! loaded from a checkpoint.

use std::sync::Arc;

use crate::env::{EnvSpec, Observation, SimState, StateSpace, NUM_ACTIONS};
use crate::error::{Error, Result};
use crate::nn::{argmax, Network};

/// Default cap on enumerated states before the oracle refuses.
pub const DEFAULT_STATE_CAP: usize = 200_000;

/// Values within this distance of the row maximum count as tied.
const TIE_TOLERANCE: f64 = 1e-9;

/// Lowest action whose value is within [`TIE_TOLERANCE`] of the maximum.
pub fn greedy_action(row: &[f64]) -> usize {
    let best = row[argmax(row)];
    row.iter()
        .position(|&v| v >= best - TIE_TOLERANCE)
        .unwrap_or(0)
}

/// Optimal action values for every enumerated state.
#[derive(Debug, Clone)]
pub struct TabularQ {
    space: StateSpace,
    q: Vec<[f64; NUM_ACTIONS]>,
    gamma: f64,
    residual: f64,
    sweeps: usize,
}

fn backup(spec: &EnvSpec, space: &StateSpace, values: &[f64], gamma: f64, id: usize) -> [f64; NUM_ACTIONS] {
    let mut row = [0.0; NUM_ACTIONS];
    for (a, slot) in row.iter_mut().enumerate() {
        *slot = space
            .transitions(spec, id, a)
            .iter()
            .map(|t| {
                let cont = if t.terminal { 0.0 } else { values[t.next] };
                t.prob * (t.reward + gamma * cont)
            })
            .sum();
    }
    row
}

/// Synchronous Bellman optimality sweeps until the max-norm change in Q is
/// below `tol`. Expectations over sticky actions are exact.
pub fn value_iteration(spec: &EnvSpec, tol: f64) -> Result<TabularQ> {
    value_iteration_with(spec, spec.gamma, tol, DEFAULT_STATE_CAP)
}

/// [`value_iteration`] with an explicit discount and state cap.
pub fn value_iteration_with(spec: &EnvSpec, gamma: f64, tol: f64, cap: usize) -> Result<TabularQ> {
    if !(tol > 0.0) {
        return Err(Error::config("value iteration tolerance must be positive"));
    }
    let space = StateSpace::enumerate(spec, cap)?;
    let n = space.len();
    let mut q = vec![[0.0; NUM_ACTIONS]; n];
    let mut values = vec![0.0; n];
    let max_sweeps = 1_000_000;
    for sweep in 1..=max_sweeps {
        let mut residual: f64 = 0.0;
        let new_q: Vec<[f64; NUM_ACTIONS]> = (0..n)
            .map(|id| backup(spec, &space, &values, gamma, id))
            .collect();
        for (old, new) in q.iter().zip(&new_q) {
            for a in 0..NUM_ACTIONS {
                residual = residual.max((old[a] - new[a]).abs());
            }
        }
        q = new_q;
        for (v, row) in values.iter_mut().zip(&q) {
            *v = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        }
        if residual < tol {
            return Ok(TabularQ {
                space,
                q,
                gamma,
                residual,
                sweeps: sweep,
            });
        }
    }
    Err(Error::Numerical(format!(
        "value iteration on `{}` did not converge in {max_sweeps} sweeps",
        spec.name
    )))
}

impl TabularQ {
    pub fn space(&self) -> &StateSpace {
        &self.space
    }

    pub fn len(&self) -> usize {
        self.q.len()
    }

    pub fn is_empty(&self) -> bool {
        self.q.is_empty()
    }

    pub fn q(&self, id: usize) -> &[f64; NUM_ACTIONS] {
        &self.q[id]
    }

    pub fn value(&self, id: usize) -> f64 {
        self.q[id].iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn greedy(&self, id: usize) -> usize {
        greedy_action(&self.q[id])
    }

    pub fn residual(&self) -> f64 {
        self.residual
    }

    pub fn sweeps(&self) -> usize {
        self.sweeps
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// Max-norm change one further Bellman sweep would make.
    pub fn bellman_residual(&self, spec: &EnvSpec) -> f64 {
        let values: Vec<f64> = (0..self.len()).map(|id| self.value(id)).collect();
        (0..self.len())
            .map(|id| {
                let row = backup(spec, &self.space, &values, self.gamma, id);
                row.iter()
                    .zip(&self.q[id])
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max)
            })
            .fold(0.0, f64::max)
    }

    /// Expected optimal value at the start of an episode.
    pub fn start_value(&self, spec: &EnvSpec) -> f64 {
        self.space
            .start_distribution(spec)
            .iter()
            .map(|&(id, p)| p * self.value(id))
            .sum()
    }

    /// State id for an observation, using the canonical previous action
    /// (the greedy action does not depend on it).
    pub fn id_for(&self, spec: &EnvSpec, obs: &[f64]) -> Option<usize> {
        let pos = spec.identify(obs)?;
        self.space.id_of(SimState {
            pos,
            prev_action: 0,
        })
    }

    /// CSV table: `state_id,row,col,prev_action,q_up,q_right,q_down,q_left`.
    pub fn to_csv(&self, spec: &EnvSpec) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record([
            "state_id",
            "row",
            "col",
            "prev_action",
            "q_up",
            "q_right",
            "q_down",
            "q_left",
        ])?;
        for id in 0..self.len() {
            let s = self.space.state(id);
            let mut rec = vec![
                id.to_string(),
                (s.pos / spec.width).to_string(),
                (s.pos % spec.width).to_string(),
                s.prev_action.to_string(),
            ];
            rec.extend(self.q[id].iter().map(|v| format!("{v:.17e}")));
            w.write_record(&rec)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}

/// Where the teacher's greedy policy comes from.
#[derive(Debug, Clone)]
pub enum TeacherKind {
    Oracle {
        spec: Arc<EnvSpec>,
        table: Arc<TabularQ>,
    },
    Checkpoint(Network),
}

/// One entry of the teacher's query log.
#[derive(Debug, Clone, PartialEq)]
pub struct Query {
    pub step: u64,
    pub state: Observation,
    pub action: usize,
    /// Issued by the harness for accuracy bookkeeping; costs no budget.
    pub shadow: bool,
}

/// The competent peer `π_T`.
#[derive(Debug, Clone)]
pub struct Teacher {
    kind: TeacherKind,
    log: Vec<Query>,
    keep_log: bool,
    genuine: u64,
    shadow: u64,
}

impl Teacher {
    pub fn oracle(spec: Arc<EnvSpec>, table: Arc<TabularQ>) -> Self {
        Self {
            kind: TeacherKind::Oracle { spec, table },
            log: Vec::new(),
            keep_log: true,
            genuine: 0,
            shadow: 0,
        }
    }

    pub fn checkpoint(net: Network) -> Self {
        Self {
            kind: TeacherKind::Checkpoint(net),
            log: Vec::new(),
            keep_log: true,
            genuine: 0,
            shadow: 0,
        }
    }

    pub fn kind(&self) -> &TeacherKind {
        &self.kind
    }

    /// Greedy action for `obs`, without touching the log.
    pub fn policy(&self, obs: &[f64]) -> Result<usize> {
        match &self.kind {
            TeacherKind::Oracle { spec, table } => {
                let id = table.id_for(spec, obs).ok_or_else(|| {
                    Error::contract("oracle teacher cannot identify the observed state")
                })?;
                Ok(table.greedy(id))
            }
            TeacherKind::Checkpoint(net) => {
                if obs.len() != net.input_dim() {
                    return Err(Error::config("observation size does not match teacher network"));
                }
                Ok(argmax(&net.predict(obs)))
            }
        }
    }

    /// Greedy action for an enumerated state id (oracle only).
    pub fn policy_for_state(&self, id: usize) -> Result<usize> {
        match &self.kind {
            TeacherKind::Oracle { table, .. } if id < table.len() => Ok(table.greedy(id)),
            TeacherKind::Oracle { .. } => Err(Error::contract(format!("unknown state id {id}"))),
            TeacherKind::Checkpoint(_) => {
                Err(Error::contract("checkpoint teacher has no state ids"))
            }
        }
    }

    /// Stops storing queries; the counters keep running. Long sessions use
    /// this to avoid holding one observation per query.
    pub fn without_log(mut self) -> Self {
        self.keep_log = false;
        self.log.clear();
        self
    }

    /// Answers a query, counts it and, unless disabled, records it.
    pub fn advise(&mut self, step: u64, obs: &Observation, shadow: bool) -> Result<usize> {
        let action = self.policy(obs)?;
        if shadow {
            self.shadow += 1;
        } else {
            self.genuine += 1;
        }
        if self.keep_log {
            self.log.push(Query {
                step,
                state: obs.clone(),
                action,
                shadow,
            });
        }
        Ok(action)
    }

    /// Number of budget-spending queries answered so far.
    pub fn genuine_count(&self) -> u64 {
        self.genuine
    }

    /// Number of bookkeeping-only queries answered so far.
    pub fn shadow_count(&self) -> u64 {
        self.shadow
    }

    pub fn log(&self) -> &[Query] {
        &self.log
    }

    pub fn genuine_queries(&self) -> impl Iterator<Item = &Query> {
        self.log.iter().filter(|q| !q.shadow)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{EnvSpec, GridEnv};
    use crate::rng::stream;

    fn corridor3() -> EnvSpec {
        EnvSpec::parse("row = S.G\nstep_reward = 0\ngoal_reward = 1\ngamma = 0.9\n").unwrap()
    }

    #[test]
    fn bandit_values() {
        // One start cell between a zero-reward wall bump (up) and a goal.
        let spec = EnvSpec::parse(
            "row = SG\nstep_reward = 0\ngoal_reward = 1\ngamma = 0.99\nmax_steps = 1\n",
        )
        .unwrap();
        let table = value_iteration(&spec, 1e-12).unwrap();
        let start = table.space().id_of(SimState { pos: 0, prev_action: 0 }).unwrap();
        // right reaches the goal; left/up/down bump and then the best is 0.99.
        assert_eq!(table.q(start)[1], 1.0);
        assert!((table.q(start)[0] - 0.99).abs() < 1e-12);
    }

    #[test]
    fn terminal_bandit_has_no_successor_values() {
        // Left enters a zero-reward terminal cell, right the goal.
        let spec = EnvSpec::parse(
            "row = HSG\nhazard_reward = 0\nstep_reward = -0.5\ngamma = 0.99\n",
        )
        .unwrap();
        let table = value_iteration(&spec, 1e-12).unwrap();
        let start = table.space().id_of(SimState { pos: 1, prev_action: 0 }).unwrap();
        assert_eq!(table.q(start)[3], 0.0);
        assert_eq!(table.q(start)[1], 1.0);
        assert_eq!(table.greedy(start), 1);
    }

    #[test]
    fn corridor_values_by_hand() {
        let spec = corridor3();
        let table = value_iteration(&spec, 1e-12).unwrap();
        let id = |pos| table.space().id_of(SimState { pos, prev_action: 0 }).unwrap();
        // Middle: one step to goal.
        assert!((table.q(id(1))[1] - 1.0).abs() < 1e-12);
        // Start: step (reward 0) then goal: 0 + 0.9 * 1.
        assert!((table.q(id(0))[1] - 0.9).abs() < 1e-12);
        // Start, left: bump, then 0.9 * V(start) = 0.81.
        assert!((table.q(id(0))[3] - 0.81).abs() < 1e-12);
        assert_eq!(table.greedy(id(0)), 1);
    }

    #[test]
    fn converged_table_is_a_fixed_point() {
        for name in EnvSpec::builtin_names() {
            let spec = EnvSpec::builtin(name).unwrap();
            let tol = 1e-9;
            let table = value_iteration(&spec, tol).unwrap();
            assert!(table.residual() < tol);
            // One extra sweep moves Q by at most γ·tol.
            assert!(table.bellman_residual(&spec) < tol, "{name}");
        }
    }

    #[test]
    fn greedy_ties_go_to_lowest_action() {
        assert_eq!(greedy_action(&[0.2, 0.9, 0.9]), 1);
        assert_eq!(greedy_action(&[0.5, 0.5 + 1e-12, 0.1]), 0);
    }

    #[test]
    fn oracle_advises_right_at_corridor_start() {
        let spec = Arc::new(corridor3());
        let table = Arc::new(value_iteration(&spec, 1e-12).unwrap());
        let mut teacher = Teacher::oracle(spec.clone(), table);
        let obs = spec.observation(spec.start_cell());
        assert_eq!(teacher.advise(0, &obs, false).unwrap(), 1);
        assert_eq!(teacher.advise(1, &obs, true).unwrap(), 1);
        assert_eq!(teacher.log().len(), 2);
        assert_eq!(teacher.genuine_queries().count(), 1);
    }

    #[test]
    fn unidentifiable_state_is_refused() {
        let spec = Arc::new(corridor3());
        let table = Arc::new(value_iteration(&spec, 1e-12).unwrap());
        let mut teacher = Teacher::oracle(spec.clone(), table);
        let junk = Observation(vec![0.0; spec.observation_len()]);
        assert!(teacher.advise(0, &junk, false).is_err());
        assert!(teacher.log().is_empty());
    }

    #[test]
    fn oracle_advice_ignores_previous_action() {
        let spec = EnvSpec::builtin("hazard-lane").unwrap();
        let table = value_iteration(&spec, 1e-10).unwrap();
        let space = table.space();
        for id in 0..space.len() {
            let s = space.state(id);
            let canonical = space.id_of(SimState { pos: s.pos, prev_action: 0 }).unwrap();
            assert_eq!(table.greedy(id), table.greedy(canonical));
        }
    }

    /// Undiscounted greedy rollouts earn the optimal undiscounted return.
    #[test]
    fn oracle_rollouts_are_optimal_on_deterministic_specs() {
        for name in ["corridor", "open5"] {
            let spec = Arc::new(EnvSpec::builtin(name).unwrap());
            let table = Arc::new(value_iteration(&spec, 1e-12).unwrap());
            let undiscounted = value_iteration_with(&spec, 1.0, 1e-12, DEFAULT_STATE_CAP).unwrap();
            let teacher = Teacher::oracle(spec.clone(), table);
            let mut env = GridEnv::new(spec.clone());
            let mut rng = stream(0, "env");
            let mut obs = env.reset(&mut rng);
            let mut ret = 0.0;
            while env.is_active() {
                let r = env.step(teacher.policy(&obs).unwrap(), &mut rng).unwrap();
                ret += r.reward;
                obs = r.observation;
            }
            assert!((ret - undiscounted.start_value(&spec)).abs() < 1e-9, "{name}");
        }
    }

    #[test]
    fn oracle_rollouts_match_start_value_on_sticky_specs() {
        // Discounted return, Monte Carlo vs exact expectation.
        let spec = Arc::new(EnvSpec::builtin("hazard-lane").unwrap());
        let table = Arc::new(value_iteration(&spec, 1e-10).unwrap());
        let teacher = Teacher::oracle(spec.clone(), table.clone());
        let mut env = GridEnv::new(spec.clone());
        let mut rng = stream(5, "env");
        let n = 4000;
        let returns: Vec<f64> = (0..n)
            .map(|_| {
                let mut obs = env.reset(&mut rng);
                let (mut ret, mut disc) = (0.0, 1.0);
                while env.is_active() {
                    let r = env.step(teacher.policy(&obs).unwrap(), &mut rng).unwrap();
                    ret += disc * r.reward;
                    disc *= spec.gamma;
                    obs = r.observation;
                }
                ret
            })
            .collect();
        let mean = returns.iter().sum::<f64>() / n as f64;
        let var = returns.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        let half_width = 4.0 * (var / n as f64).sqrt();
        // Truncation at max_steps can only lower the return slightly.
        let exact = table.start_value(&spec);
        assert!((mean - exact).abs() < half_width + 1e-3, "{mean} vs {exact} ± {half_width}");
    }

    #[test]
    fn csv_export_has_a_row_per_state() {
        let spec = corridor3();
        let table = value_iteration(&spec, 1e-12).unwrap();
        let text = table.to_csv(&spec).unwrap();
        assert_eq!(text.lines().count(), table.len() + 1);
        assert!(text.starts_with("state_id,row,col,prev_action,q_up"));
    }
}
