use std::collections::VecDeque;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::kv;

use super::{Observation, NUM_ACTIONS};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Cell {
    Wall,
    Free,
    Start,
    Goal,
    Hazard,
}

impl Cell {
    fn from_char(c: char) -> Option<Self> {
        Some(match c {
            '#' => Cell::Wall,
            '.' => Cell::Free,
            'S' => Cell::Start,
            'G' => Cell::Goal,
            'H' => Cell::Hazard,
            _ => return None,
        })
    }

    fn to_char(self) -> char {
        match self {
            Cell::Wall => '#',
            Cell::Free => '.',
            Cell::Start => 'S',
            Cell::Goal => 'G',
            Cell::Hazard => 'H',
        }
    }

    pub fn is_terminal(self) -> bool {
        matches!(self, Cell::Goal | Cell::Hazard)
    }

    /// Cells the start-phase drift may move into.
    fn is_open(self) -> bool {
        matches!(self, Cell::Free | Cell::Start)
    }
}

/// A gridworld MDP: layout, rewards, discount and stochasticity.
///
/// Actions are `0 = up, 1 = right, 2 = down, 3 = left`. Moving off the grid
/// or into a wall leaves the agent in place.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvSpec {
    pub name: String,
    pub width: usize,
    pub height: usize,
    pub cells: Vec<Cell>,
    pub gamma: f64,
    pub max_steps: usize,
    pub sticky_p: f64,
    pub noop_min: usize,
    pub noop_max: usize,
    pub step_reward: f64,
    pub goal_reward: f64,
    pub hazard_reward: f64,
    pub reward_min: f64,
    pub reward_max: f64,
    start: usize,
    layout: Vec<f64>,
}

const BUILTINS: &[(&str, &str)] = &[
    ("corridor", include_str!("../../envs/corridor.env")),
    ("four-rooms", include_str!("../../envs/four-rooms.env")),
    ("hazard-lane", include_str!("../../envs/hazard-lane.env")),
    ("open5", include_str!("../../envs/open5.env")),
];

impl EnvSpec {
    /// One of the bundled layouts: `corridor`, `four-rooms`, `hazard-lane`,
    /// `open5`.
    pub fn builtin(name: &str) -> Result<Self> {
        BUILTINS
            .iter()
            .find(|(n, _)| *n == name)
            .map(|(_, text)| Self::parse(text))
            .unwrap_or_else(|| Err(Error::config(format!("no built-in environment `{name}`"))))
    }

    pub fn builtin_names() -> impl Iterator<Item = &'static str> {
        BUILTINS.iter().map(|(n, _)| *n)
    }

    /// Loads `builtin:<name>` or a spec file path.
    pub fn load(reference: &str) -> Result<Self> {
        match reference.strip_prefix("builtin:") {
            Some(name) => Self::builtin(name),
            None => Self::parse(&std::fs::read_to_string(Path::new(reference))?),
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut name = String::from("unnamed");
        let mut rows: Vec<String> = Vec::new();
        let mut gamma = 0.99;
        let mut max_steps = 100;
        let mut sticky_p = 0.0;
        let mut noop_min = 0;
        let mut noop_max = 0;
        let mut step_reward = 0.0;
        let mut goal_reward = 1.0;
        let mut hazard_reward = -1.0;
        let mut reward_min = -1.0;
        let mut reward_max = 1.0;
        for e in kv::parse(text)? {
            match e.key.as_str() {
                "name" => name = e.value.clone(),
                "row" => rows.push(e.value.clone()),
                "gamma" => gamma = e.parse()?,
                "max_steps" => max_steps = e.parse()?,
                "sticky_p" => sticky_p = e.parse()?,
                "noop_min" => noop_min = e.parse()?,
                "noop_max" => noop_max = e.parse()?,
                "step_reward" => step_reward = e.parse()?,
                "goal_reward" => goal_reward = e.parse()?,
                "hazard_reward" => hazard_reward = e.parse()?,
                "reward_min" => reward_min = e.parse()?,
                "reward_max" => reward_max = e.parse()?,
                _ => return Err(e.unknown()),
            }
        }
        let height = rows.len();
        let width = rows.first().map(|r| r.chars().count()).unwrap_or(0);
        if height == 0 || width == 0 {
            return Err(Error::config("environment has no grid rows"));
        }
        let mut cells = Vec::with_capacity(width * height);
        for (r, row) in rows.iter().enumerate() {
            if row.chars().count() != width {
                return Err(Error::config(format!("grid row {r} has a different width")));
            }
            for c in row.chars() {
                cells.push(Cell::from_char(c).ok_or_else(|| {
                    Error::config(format!("grid row {r}: unknown cell character `{c}`"))
                })?);
            }
        }
        Self::new(
            name,
            width,
            height,
            cells,
            Dynamics {
                gamma,
                max_steps,
                sticky_p,
                noop_min,
                noop_max,
            },
            Rewards {
                step: step_reward,
                goal: goal_reward,
                hazard: hazard_reward,
                min: reward_min,
                max: reward_max,
            },
        )
    }

    pub fn new(
        name: String,
        width: usize,
        height: usize,
        cells: Vec<Cell>,
        dynamics: Dynamics,
        rewards: Rewards,
    ) -> Result<Self> {
        if cells.len() != width * height {
            return Err(Error::config("cell count does not match grid size"));
        }
        let starts: Vec<usize> = (0..cells.len()).filter(|&i| cells[i] == Cell::Start).collect();
        if starts.len() != 1 {
            return Err(Error::config(format!(
                "grid needs exactly one start cell, found {}",
                starts.len()
            )));
        }
        if !(0.0..=1.0).contains(&dynamics.gamma) {
            return Err(Error::config("gamma must lie in [0, 1]"));
        }
        if !(0.0..=1.0).contains(&dynamics.sticky_p) {
            return Err(Error::config("sticky_p must lie in [0, 1]"));
        }
        if dynamics.max_steps == 0 {
            return Err(Error::config("max_steps must be positive"));
        }
        if dynamics.noop_min > dynamics.noop_max {
            return Err(Error::config("noop_min exceeds noop_max"));
        }
        for (key, r) in [
            ("step_reward", rewards.step),
            ("goal_reward", rewards.goal),
            ("hazard_reward", rewards.hazard),
        ] {
            if !r.is_finite() || r < rewards.min || r > rewards.max {
                return Err(Error::config(format!(
                    "{key} = {r} outside declared bounds [{}, {}]",
                    rewards.min, rewards.max
                )));
            }
        }
        let n = cells.len();
        let mut layout = vec![0.0; 3 * n];
        for (i, c) in cells.iter().enumerate() {
            match c {
                Cell::Wall => layout[i] = 1.0,
                Cell::Goal => layout[n + i] = 1.0,
                Cell::Hazard => layout[2 * n + i] = 1.0,
                _ => {}
            }
        }
        let spec = Self {
            name,
            width,
            height,
            cells,
            gamma: dynamics.gamma,
            max_steps: dynamics.max_steps,
            sticky_p: dynamics.sticky_p,
            noop_min: dynamics.noop_min,
            noop_max: dynamics.noop_max,
            step_reward: rewards.step,
            goal_reward: rewards.goal,
            hazard_reward: rewards.hazard,
            reward_min: rewards.min,
            reward_max: rewards.max,
            start: starts[0],
            layout,
        };
        spec.check_goal_reachable()?;
        Ok(spec)
    }

    /// Writes the spec back in the file format.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        writeln!(out, "name = {}", self.name).unwrap();
        writeln!(out, "gamma = {}", self.gamma).unwrap();
        writeln!(out, "max_steps = {}", self.max_steps).unwrap();
        writeln!(out, "sticky_p = {}", self.sticky_p).unwrap();
        writeln!(out, "noop_min = {}", self.noop_min).unwrap();
        writeln!(out, "noop_max = {}", self.noop_max).unwrap();
        writeln!(out, "step_reward = {}", self.step_reward).unwrap();
        writeln!(out, "goal_reward = {}", self.goal_reward).unwrap();
        writeln!(out, "hazard_reward = {}", self.hazard_reward).unwrap();
        writeln!(out, "reward_min = {}", self.reward_min).unwrap();
        writeln!(out, "reward_max = {}", self.reward_max).unwrap();
        for row in self.cells.chunks(self.width) {
            let s: String = row.iter().map(|c| c.to_char()).collect();
            writeln!(out, "row = {s}").unwrap();
        }
        out
    }

    pub fn num_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn start_cell(&self) -> usize {
        self.start
    }

    pub fn cell(&self, pos: usize) -> Cell {
        self.cells[pos]
    }

    /// Observation length: one-hot position plus wall, goal and hazard
    /// channels.
    pub fn observation_len(&self) -> usize {
        4 * self.cells.len()
    }

    pub fn observation(&self, pos: usize) -> Observation {
        let n = self.cells.len();
        let mut v = vec![0.0; 4 * n];
        v[pos] = 1.0;
        v[n..].copy_from_slice(&self.layout);
        Observation(v)
    }

    /// Recovers the agent position from an observation of this spec, or
    /// `None` if the vector could not have been emitted by it.
    pub fn identify(&self, obs: &[f64]) -> Option<usize> {
        let n = self.cells.len();
        if obs.len() != 4 * n || obs[n..] != self.layout[..] {
            return None;
        }
        let mut pos = None;
        for (i, &v) in obs[..n].iter().enumerate() {
            if v == 1.0 && pos.is_none() {
                pos = Some(i);
            } else if v != 0.0 {
                return None;
            }
        }
        pos.filter(|&p| self.cells[p] != Cell::Wall)
    }

    /// Cell reached by moving from `pos` with `action`, ignoring what the
    /// target cell contains except walls and the grid border.
    pub fn target(&self, pos: usize, action: usize) -> usize {
        debug_assert!(action < NUM_ACTIONS);
        let (r, c) = (pos / self.width, pos % self.width);
        let next = match action {
            0 if r > 0 => Some(pos - self.width),
            1 if c + 1 < self.width => Some(pos + 1),
            2 if r + 1 < self.height => Some(pos + self.width),
            3 if c > 0 => Some(pos - 1),
            _ => None,
        };
        match next {
            Some(p) if self.cells[p] != Cell::Wall => p,
            _ => pos,
        }
    }

    /// Start-phase drift move: only into free cells.
    pub fn drift_target(&self, pos: usize, action: usize) -> usize {
        let t = self.target(pos, action);
        if self.cells[t].is_open() {
            t
        } else {
            pos
        }
    }

    /// Reward and terminal flag for arriving at `pos`.
    pub fn arrival(&self, pos: usize) -> (f64, bool) {
        match self.cells[pos] {
            Cell::Goal => (self.goal_reward, true),
            Cell::Hazard => (self.hazard_reward, true),
            _ => (self.step_reward, false),
        }
    }

    /// Cells the agent can occupy right after a reset.
    pub fn start_support(&self) -> Vec<usize> {
        let mut seen = vec![false; self.cells.len()];
        let mut frontier = vec![self.start];
        seen[self.start] = true;
        for _ in 0..self.noop_max {
            let mut next = Vec::new();
            for &p in &frontier {
                for a in 0..NUM_ACTIONS {
                    let t = self.drift_target(p, a);
                    if !seen[t] {
                        seen[t] = true;
                        next.push(t);
                    }
                }
            }
            frontier.extend(next);
        }
        (0..self.cells.len()).filter(|&i| seen[i]).collect()
    }

    fn check_goal_reachable(&self) -> Result<()> {
        for s in self.start_support() {
            let mut seen = vec![false; self.cells.len()];
            let mut queue = VecDeque::from([s]);
            seen[s] = true;
            let mut found = false;
            while let Some(p) = queue.pop_front() {
                match self.cells[p] {
                    Cell::Goal => {
                        found = true;
                        break;
                    }
                    Cell::Hazard => continue,
                    _ => {}
                }
                for a in 0..NUM_ACTIONS {
                    let t = self.target(p, a);
                    if !seen[t] {
                        seen[t] = true;
                        queue.push_back(t);
                    }
                }
            }
            if !found {
                return Err(Error::config(format!(
                    "no goal reachable from start cell ({}, {})",
                    s / self.width,
                    s % self.width
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dynamics {
    pub gamma: f64,
    pub max_steps: usize,
    pub sticky_p: f64,
    pub noop_min: usize,
    pub noop_max: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rewards {
    pub step: f64,
    pub goal: f64,
    pub hazard: f64,
    pub min: f64,
    pub max: f64,
}
