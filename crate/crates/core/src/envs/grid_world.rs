//! Deterministic grid world with blocked-by-wall movement.
//!
//! Observations are one-hot cell encodings. Entering the goal pays
//! `goal_reward` and ends the episode; every other move pays `step_reward`.
//! Episodes truncate after `max_steps` moves. `solve_grid` computes the
//! exact finite-horizon solution by value iteration; its argmax sets define
//! the ground-truth "was this action optimal" annotation.

use serde::{Deserialize, Serialize};

use super::{Environment, StepInfo, StepResult};
use crate::error::CoreError;
use crate::Result;

pub const ACTIONS: usize = 4; // up, down, left, right

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GridWorldConfig {
    pub width: usize,
    pub height: usize,
    pub start: (usize, usize),
    pub goal: (usize, usize),
    pub step_reward: f64,
    pub goal_reward: f64,
    pub max_steps: usize,
    pub walls: Vec<(usize, usize)>,
    pub seed: u64,
}

impl Default for GridWorldConfig {
    fn default() -> Self {
        Self {
            width: 5,
            height: 5,
            start: (0, 0),
            goal: (4, 4),
            step_reward: -0.01,
            goal_reward: 1.0,
            max_steps: 50,
            walls: Vec::new(),
            seed: 0,
        }
    }
}

impl GridWorldConfig {
    pub fn cells(&self) -> usize {
        self.width * self.height
    }

    pub fn cell_index(&self, (x, y): (usize, usize)) -> usize {
        y * self.width + x
    }

    pub fn validate(&self) -> Result<()> {
        let mut violations = Vec::new();
        if self.width == 0 || self.height == 0 {
            violations.push("width and height must be positive".into());
        }
        if self.max_steps == 0 {
            violations.push("max_steps must be positive".into());
        }
        let inside = |(x, y): (usize, usize)| x < self.width && y < self.height;
        if !inside(self.start) {
            violations.push(format!("start {:?} is outside the grid", self.start));
        }
        if !inside(self.goal) {
            violations.push(format!("goal {:?} is outside the grid", self.goal));
        }
        if self.start == self.goal {
            violations.push("start must differ from goal".into());
        }
        if self.walls.contains(&self.start) {
            violations.push("start cell is a wall".into());
        }
        if self.walls.contains(&self.goal) {
            violations.push("goal cell is a wall".into());
        }
        if violations.is_empty() && !self.goal_reachable() {
            violations.push("goal is not reachable from start".into());
        }
        if violations.is_empty() {
            Ok(())
        } else {
            Err(CoreError::invalid_config(violations))
        }
    }

    /// Breadth-first search from start to goal around walls.
    fn goal_reachable(&self) -> bool {
        let mut seen = vec![false; self.cells()];
        let mut queue = std::collections::VecDeque::from([self.start]);
        seen[self.cell_index(self.start)] = true;
        while let Some(cell) = queue.pop_front() {
            if cell == self.goal {
                return true;
            }
            for action in 0..ACTIONS {
                let next = self.apply_move(cell, action);
                if !seen[self.cell_index(next)] {
                    seen[self.cell_index(next)] = true;
                    queue.push_back(next);
                }
            }
        }
        false
    }

    /// Deterministic move; walls and edges leave the agent in place.
    pub fn apply_move(&self, (x, y): (usize, usize), action: usize) -> (usize, usize) {
        let candidate = match action {
            0 => (x, y.saturating_sub(1)),                    // up
            1 => (x, (y + 1).min(self.height - 1)),           // down
            2 => (x.saturating_sub(1), y),                    // left
            3 => ((x + 1).min(self.width - 1), y),            // right
            _ => (x, y),
        };
        if self.walls.contains(&candidate) {
            (x, y)
        } else {
            candidate
        }
    }
}

/// Exact solution of the truncated-horizon control problem.
#[derive(Debug, Clone)]
pub struct GridSolution {
    /// Optimal value per cell at full horizon.
    pub values: Vec<f64>,
    /// Optimal action values per cell.
    pub q: Vec<[f64; ACTIONS]>,
    /// All actions within 1e-9 of the per-cell maximum.
    pub optimal_actions: Vec<Vec<usize>>,
}

/// Finite-horizon value iteration over `max_steps` stages. The horizon
/// truncation means this always terminates, even for cells that cannot
/// reach the goal.
pub fn solve_grid(cfg: &GridWorldConfig) -> GridSolution {
    let n = cfg.cells();
    let goal = cfg.cell_index(cfg.goal);
    let mut values = vec![0.0; n];
    let mut q = vec![[0.0; ACTIONS]; n];
    for _ in 0..cfg.max_steps {
        let mut next_values = vec![0.0; n];
        for y in 0..cfg.height {
            for x in 0..cfg.width {
                let cell = cfg.cell_index((x, y));
                if cell == goal || cfg.walls.contains(&(x, y)) {
                    continue;
                }
                for action in 0..ACTIONS {
                    let dest = cfg.cell_index(cfg.apply_move((x, y), action));
                    q[cell][action] = if dest == goal {
                        cfg.goal_reward
                    } else {
                        cfg.step_reward + values[dest]
                    };
                }
                next_values[cell] = q[cell].iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            }
        }
        values = next_values;
    }
    let optimal_actions = q
        .iter()
        .enumerate()
        .map(|(cell, qs)| {
            if cell == goal {
                return (0..ACTIONS).collect();
            }
            let best = qs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            (0..ACTIONS).filter(|&a| qs[a] >= best - 1e-9).collect()
        })
        .collect();
    GridSolution {
        values,
        q,
        optimal_actions,
    }
}

#[derive(Debug, Clone)]
pub struct GridWorld {
    cfg: GridWorldConfig,
    solution: GridSolution,
    position: (usize, usize),
    steps_taken: usize,
    terminal: bool,
}

impl GridWorld {
    pub fn new(cfg: GridWorldConfig) -> Result<Self> {
        cfg.validate()?;
        let solution = solve_grid(&cfg);
        Ok(Self {
            position: cfg.start,
            solution,
            cfg,
            steps_taken: 0,
            terminal: true,
        })
    }

    pub fn config(&self) -> &GridWorldConfig {
        &self.cfg
    }

    pub fn solution(&self) -> &GridSolution {
        &self.solution
    }

    pub fn position(&self) -> (usize, usize) {
        self.position
    }

    fn encode(&self, cell: usize) -> Vec<f64> {
        let mut obs = vec![0.0; self.cfg.cells()];
        obs[cell] = 1.0;
        obs
    }
}

impl Environment for GridWorld {
    fn observation_dim(&self) -> usize {
        self.cfg.cells()
    }

    fn action_count(&self) -> usize {
        ACTIONS
    }

    fn reset(&mut self, _episode_seed: u64) -> Vec<f64> {
        self.position = self.cfg.start;
        self.steps_taken = 0;
        self.terminal = false;
        self.encode(self.cfg.cell_index(self.position))
    }

    fn step(&mut self, action: usize) -> Result<StepResult> {
        if self.terminal {
            return Err(CoreError::EpisodeFinished);
        }
        if action >= ACTIONS {
            return Err(CoreError::InvalidAction {
                action,
                reason: "grid world actions are up, down, left, right".into(),
            });
        }
        let cell = self.cfg.cell_index(self.position);
        let optimal = self.solution.optimal_actions[cell].contains(&action);
        let next = self.cfg.apply_move(self.position, action);
        self.position = next;
        self.steps_taken += 1;

        let reached_goal = next == self.cfg.goal;
        let truncated = self.steps_taken >= self.cfg.max_steps;
        self.terminal = reached_goal || truncated;
        Ok(StepResult {
            observation: if reached_goal {
                vec![0.0; self.cfg.cells()]
            } else {
                self.encode(self.cfg.cell_index(next))
            },
            reward: if reached_goal {
                self.cfg.goal_reward
            } else {
                self.cfg.step_reward
            },
            terminal: self.terminal,
            info: StepInfo {
                correct: Some(optimal),
                signal_side: None,
                cell: Some(cell),
            },
        })
    }

    fn is_terminal(&self) -> bool {
        self.terminal
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reset_encodes_the_start_cell() {
        let mut env = GridWorld::new(GridWorldConfig::default()).unwrap();
        let obs = env.reset(0);
        assert_eq!(obs[0], 1.0);
        assert_eq!(obs.iter().sum::<f64>(), 1.0);
    }

    #[test]
    fn reaching_the_goal_pays_and_terminates() {
        let cfg = GridWorldConfig {
            width: 2,
            height: 1,
            start: (0, 0),
            goal: (1, 0),
            ..GridWorldConfig::default()
        };
        let mut env = GridWorld::new(cfg).unwrap();
        env.reset(0);
        let r = env.step(3).unwrap(); // right, into the goal
        assert_eq!(r.reward, 1.0);
        assert!(r.terminal);
        assert_eq!(r.info.correct, Some(true));
    }

    #[test]
    fn walls_and_edges_block_movement() {
        let cfg = GridWorldConfig {
            walls: vec![(1, 0)],
            ..GridWorldConfig::default()
        };
        let mut env = GridWorld::new(cfg).unwrap();
        env.reset(0);
        let r = env.step(3).unwrap(); // right into the wall
        assert_eq!(r.observation[0], 1.0, "agent should not have moved");
        assert_eq!(r.reward, -0.01);
        let r = env.step(0).unwrap(); // up off the edge
        assert_eq!(r.observation[0], 1.0);
        assert_eq!(r.reward, -0.01);
    }

    #[test]
    fn episodes_truncate_at_max_steps() {
        let cfg = GridWorldConfig {
            max_steps: 3,
            ..GridWorldConfig::default()
        };
        let mut env = GridWorld::new(cfg).unwrap();
        env.reset(0);
        env.step(0).unwrap();
        env.step(0).unwrap();
        let r = env.step(0).unwrap();
        assert!(r.terminal);
        assert!(env.step(0).is_err());
    }

    #[test]
    fn exact_values_near_the_goal() {
        let cfg = GridWorldConfig::default();
        let solution = solve_grid(&cfg);
        // Adjacent to the goal: one move in, worth the goal reward.
        let adjacent = cfg.cell_index((3, 4));
        assert!((solution.values[adjacent] - cfg.goal_reward).abs() < 1e-12);
        // Two moves out: one step charge then the goal reward.
        let two_away = cfg.cell_index((2, 4));
        assert!(
            (solution.values[two_away] - (cfg.goal_reward + cfg.step_reward)).abs() < 1e-12
        );
        // Start of the default 5x5: 8 moves, 7 step charges.
        let start = cfg.cell_index(cfg.start);
        assert!((solution.values[start] - (1.0 - 0.07)).abs() < 1e-9);
    }

    #[test]
    fn optimal_actions_point_toward_the_goal() {
        let cfg = GridWorldConfig::default();
        let solution = solve_grid(&cfg);
        let start = cfg.cell_index(cfg.start);
        // From (0,0) with the goal at (4,4): down and right tie.
        assert_eq!(solution.optimal_actions[start], vec![1, 3]);
    }

    #[test]
    fn default_config_is_valid_and_goal_reachable() {
        assert!(GridWorldConfig::default().validate().is_ok());
    }

    #[test]
    fn unreachable_goal_is_rejected() {
        let cfg = GridWorldConfig {
            width: 3,
            height: 1,
            start: (0, 0),
            goal: (2, 0),
            walls: vec![(1, 0)],
            ..GridWorldConfig::default()
        };
        let err = cfg.validate().unwrap_err();
        assert!(err.to_string().contains("not reachable"));
    }
}
