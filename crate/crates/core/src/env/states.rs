use std::collections::{HashMap, VecDeque};

use super::{EnvSpec, Observation, SimState, NUM_ACTIONS};
use crate::error::{Error, Result};

/// One outcome of taking an action in an enumerated state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition {
    pub prob: f64,
    pub next: usize,
    pub reward: f64,
    pub terminal: bool,
}

/// Dense ids for simulator states.
///
/// With `sticky_p = 0` the previous action cannot influence anything, so
/// states are the positions reachable from a reset. Otherwise they are the
/// product of those positions with all previous actions; a few of these
/// pairs (e.g. a goal entered "upwards" from its top edge) never occur but
/// are harmless to carry.
#[derive(Debug, Clone)]
pub struct StateSpace {
    augmented: bool,
    states: Vec<SimState>,
    index: HashMap<SimState, usize>,
}

impl StateSpace {
    pub fn enumerate(spec: &EnvSpec, cap: usize) -> Result<Self> {
        let augmented = spec.sticky_p > 0.0;
        let canon = |s: SimState| {
            if augmented {
                s
            } else {
                SimState {
                    pos: s.pos,
                    prev_action: 0,
                }
            }
        };
        let mut states = Vec::new();
        let mut index = HashMap::new();
        let mut queue = VecDeque::new();
        for pos in spec.start_support() {
            for prev_action in 0..NUM_ACTIONS {
                let s = canon(SimState { pos, prev_action });
                if !index.contains_key(&s) {
                    index.insert(s, states.len());
                    states.push(s);
                    queue.push_back(s);
                }
            }
        }
        while let Some(s) = queue.pop_front() {
            if spec.cell(s.pos).is_terminal() {
                continue;
            }
            for a in 0..NUM_ACTIONS {
                let pos = spec.target(s.pos, a);
                for prev_action in 0..NUM_ACTIONS {
                    let next = canon(SimState { pos, prev_action });
                    if !index.contains_key(&next) {
                        if states.len() >= cap {
                            return Err(Error::config(format!(
                                "state space of `{}` exceeds the cap of {cap}",
                                spec.name
                            )));
                        }
                        index.insert(next, states.len());
                        states.push(next);
                        queue.push_back(next);
                    }
                }
            }
        }
        Ok(Self {
            augmented,
            states,
            index,
        })
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn is_augmented(&self) -> bool {
        self.augmented
    }

    pub fn state(&self, id: usize) -> SimState {
        self.states[id]
    }

    pub fn id_of(&self, s: SimState) -> Option<usize> {
        let key = if self.augmented {
            s
        } else {
            SimState {
                pos: s.pos,
                prev_action: 0,
            }
        };
        self.index.get(&key).copied()
    }

    /// `(id, observation)` for every state.
    pub fn observations<'a>(
        &'a self,
        spec: &'a EnvSpec,
    ) -> impl Iterator<Item = (usize, Observation)> + 'a {
        self.states
            .iter()
            .enumerate()
            .map(move |(id, s)| (id, spec.observation(s.pos)))
    }

    pub fn is_terminal(&self, spec: &EnvSpec, id: usize) -> bool {
        spec.cell(self.states[id].pos).is_terminal()
    }

    /// Exact one-step model: requested `action` in state `id`. Empty for
    /// terminal states.
    pub fn transitions(&self, spec: &EnvSpec, id: usize, action: usize) -> Vec<Transition> {
        let s = self.states[id];
        if spec.cell(s.pos).is_terminal() {
            return Vec::new();
        }
        let outcome = |executed: usize, prob: f64| {
            let pos = spec.target(s.pos, executed);
            let (reward, terminal) = spec.arrival(pos);
            let next = self
                .id_of(SimState {
                    pos,
                    prev_action: executed,
                })
                .expect("successor enumerated");
            Transition {
                prob,
                next,
                reward,
                terminal,
            }
        };
        let p = spec.sticky_p;
        if !self.augmented || p == 0.0 || s.prev_action == action {
            vec![outcome(action, 1.0)]
        } else if p == 1.0 {
            vec![outcome(s.prev_action, 1.0)]
        } else {
            vec![outcome(action, 1.0 - p), outcome(s.prev_action, p)]
        }
    }

    /// Exact distribution over states right after a reset.
    pub fn start_distribution(&self, spec: &EnvSpec) -> Vec<(usize, f64)> {
        let n = spec.num_cells();
        let mut dist = vec![0.0; n];
        dist[spec.start_cell()] = 1.0;
        let span = (spec.noop_max - spec.noop_min + 1) as f64;
        let mut pos_dist = vec![0.0; n];
        for k in 0..=spec.noop_max {
            if k >= spec.noop_min {
                for (acc, d) in pos_dist.iter_mut().zip(&dist) {
                    *acc += d / span;
                }
            }
            let mut next = vec![0.0; n];
            for (p, &mass) in dist.iter().enumerate() {
                if mass > 0.0 {
                    for a in 0..NUM_ACTIONS {
                        next[spec.drift_target(p, a)] += mass / NUM_ACTIONS as f64;
                    }
                }
            }
            dist = next;
        }
        let mut out: HashMap<usize, f64> = HashMap::new();
        for (pos, &mass) in pos_dist.iter().enumerate() {
            if mass == 0.0 {
                continue;
            }
            for prev_action in 0..NUM_ACTIONS {
                let id = self
                    .id_of(SimState { pos, prev_action })
                    .expect("start state enumerated");
                *out.entry(id).or_default() += mass / NUM_ACTIONS as f64;
            }
        }
        let mut v: Vec<(usize, f64)> = out.into_iter().collect();
        v.sort_by_key(|&(id, _)| id);
        v
    }
}
