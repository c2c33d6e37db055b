use serde::{Deserialize, Serialize};

use crate::envs::layout::{distance, SpiderLayout};
use crate::envs::spider::{DISTANCE_PENALTY, GOAL_BONUS};
use crate::envs::tabular::TabularMdp;
use crate::error::{Result, SqrlError};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum GridAction {
    Up,
    Down,
    Left,
    Right,
    Stay,
}

impl GridAction {
    pub const ALL: [GridAction; 5] = [
        GridAction::Up,
        GridAction::Down,
        GridAction::Left,
        GridAction::Right,
        GridAction::Stay,
    ];
    pub const MOVES: [GridAction; 4] = [GridAction::Up, GridAction::Down, GridAction::Left, GridAction::Right];

    pub fn index(self) -> usize {
        self as usize
    }

    fn delta(self) -> (i64, i64) {
        match self {
            GridAction::Up => (0, 1),
            GridAction::Down => (0, -1),
            GridAction::Left => (-1, 0),
            GridAction::Right => (1, 0),
            GridAction::Stay => (0, 0),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GridConfig {
    pub width: usize,
    pub height: usize,
    pub p_slip: f64,
    pub layout: SpiderLayout,
    pub horizon: usize,
    pub discount: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            width: 12,
            height: 10,
            p_slip: 0.1,
            layout: SpiderLayout::default(),
            horizon: 30,
            discount: 0.99,
        }
    }
}

/// Tabular drunk spider: the continuous arena discretized into cells.
///
/// A cell is lava iff its center lies in a lava rectangle. With probability
/// `p_slip` the realized move is drawn uniformly from the four directional
/// moves, so the intended move gets `1 - p_slip + p_slip / 4` when it is
/// directional. Moves into walls leave the spider in place.
#[derive(Clone, Debug)]
pub struct DrunkSpiderGrid {
    pub config: GridConfig,
    pub mdp: TabularMdp,
    pub start: usize,
    pub goal: usize,
}

impl DrunkSpiderGrid {
    pub fn cell(&self, x: usize, y: usize) -> usize {
        y * self.config.width + x
    }

    pub fn coords(&self, s: usize) -> (usize, usize) {
        (s % self.config.width, s / self.config.width)
    }

    pub fn center(&self, s: usize) -> [f64; 2] {
        cell_center(&self.config, s % self.config.width, s / self.config.width)
    }
}

fn cell_center(cfg: &GridConfig, x: usize, y: usize) -> [f64; 2] {
    let cw = cfg.layout.arena[0] / cfg.width as f64;
    let ch = cfg.layout.arena[1] / cfg.height as f64;
    [(x as f64 + 0.5) * cw, (y as f64 + 0.5) * ch]
}

fn cell_of(cfg: &GridConfig, p: [f64; 2]) -> usize {
    let cw = cfg.layout.arena[0] / cfg.width as f64;
    let ch = cfg.layout.arena[1] / cfg.height as f64;
    let x = ((p[0] / cw).floor() as usize).min(cfg.width - 1);
    let y = ((p[1] / ch).floor() as usize).min(cfg.height - 1);
    y * cfg.width + x
}

pub fn build_grid_mdp(config: &GridConfig) -> Result<DrunkSpiderGrid> {
    if config.width == 0 || config.height == 0 {
        return Err(SqrlError::InvalidLayout("grid dimensions must be positive".into()));
    }
    if !(0.0..1.0).contains(&config.p_slip) {
        return Err(SqrlError::InvalidLayout(format!("p_slip {} outside [0, 1)", config.p_slip)));
    }
    let (w, h) = (config.width, config.height);
    let n = w * h;
    let na = GridAction::ALL.len();
    let layout = &config.layout;

    let lava: Vec<bool> = (0..n).map(|s| layout.in_lava(cell_center(config, s % w, s / w))).collect();
    let start = cell_of(config, layout.start);
    let goal = cell_of(config, layout.goal);
    if lava[start] {
        return Err(SqrlError::InvalidLayout("start cell lies in lava".into()));
    }
    if lava[goal] {
        return Err(SqrlError::InvalidLayout("goal cell lies in lava".into()));
    }
    if start == goal {
        return Err(SqrlError::InvalidLayout("start and goal share a cell".into()));
    }

    let target = |s: usize, act: GridAction| -> usize {
        let (dx, dy) = act.delta();
        let x = (s % w) as i64 + dx;
        let y = (s / w) as i64 + dy;
        if x < 0 || y < 0 || x >= w as i64 || y >= h as i64 {
            s
        } else {
            y as usize * w + x as usize
        }
    };

    let mut p = vec![0.0; n * na * n];
    let mut r = vec![0.0; n * na];
    for s in 0..n {
        for act in GridAction::ALL {
            let a = act.index();
            let row = &mut p[(s * na + a) * n..(s * na + a + 1) * n];
            if lava[s] || s == goal {
                row[s] = 1.0;
                continue;
            }
            row[target(s, act)] += 1.0 - config.p_slip;
            for mv in GridAction::MOVES {
                row[target(s, mv)] += config.p_slip / 4.0;
            }
            r[s * na + a] = row
                .iter()
                .enumerate()
                .filter(|(_, &q)| q > 0.0)
                .map(|(next, &q)| {
                    let c = cell_center(config, next % w, next / w);
                    let bonus = if next == goal { GOAL_BONUS } else { 0.0 };
                    q * (-DISTANCE_PENALTY * distance(c, layout.goal) + bonus)
                })
                .sum();
        }
    }
    let mut mu = vec![0.0; n];
    mu[start] = 1.0;
    let mut goal_flags = vec![false; n];
    goal_flags[goal] = true;
    let mdp = TabularMdp::new(n, na, p, r, mu, lava, goal_flags)?
        .with_horizon(config.horizon)
        .with_discount(config.discount);
    Ok(DrunkSpiderGrid {
        config: config.clone(),
        mdp,
        start,
        goal,
    })
}
