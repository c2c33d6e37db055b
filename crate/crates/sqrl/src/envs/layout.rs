use serde::{Deserialize, Serialize};

/// Closed axis-aligned rectangle `[x0, x1] x [y0, y1]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
}

impl Rect {
    pub const fn new(x0: f64, x1: f64, y0: f64, y1: f64) -> Self {
        Self { x0, x1, y0, y1 }
    }

    pub fn contains(&self, p: [f64; 2]) -> bool {
        p[0] >= self.x0 && p[0] <= self.x1 && p[1] >= self.y0 && p[1] <= self.y1
    }

    /// Whether two closed rectangles share any point.
    pub fn intersects(&self, other: &Rect) -> bool {
        self.x0 <= other.x1 && other.x0 <= self.x1 && self.y0 <= other.y1 && other.y0 <= self.y1
    }
}

/// Geometry of the drunk-spider arena: two lava pits with a bridge between
/// them, a start region on the left and a goal disc on the right.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SpiderLayout {
    pub arena: [f64; 2],
    pub start: [f64; 2],
    pub start_jitter: f64,
    pub goal: [f64; 2],
    pub goal_radius: f64,
    pub lava: Vec<Rect>,
    /// Open corridor between the pits. Only used for path classification.
    pub bridge: Rect,
}

impl Default for SpiderLayout {
    fn default() -> Self {
        Self {
            arena: [10.0, 10.0],
            start: [1.0, 5.0],
            start_jitter: 0.25,
            goal: [9.0, 5.0],
            goal_radius: 0.5,
            lava: vec![Rect::new(3.5, 6.5, 5.6, 8.0), Rect::new(3.5, 6.5, 2.0, 4.4)],
            bridge: Rect::new(3.5, 6.5, 4.4, 5.6),
        }
    }
}

impl SpiderLayout {
    pub fn in_lava(&self, p: [f64; 2]) -> bool {
        self.lava.iter().any(|r| r.contains(p))
    }

    pub fn in_goal(&self, p: [f64; 2]) -> bool {
        distance(p, self.goal) <= self.goal_radius
    }

    /// Strictly inside the bridge corridor (its long edges touch the lava).
    pub fn in_bridge(&self, p: [f64; 2]) -> bool {
        let b = &self.bridge;
        p[0] >= b.x0 && p[0] <= b.x1 && p[1] > b.y0 && p[1] < b.y1
    }

    pub fn clamp(&self, p: [f64; 2]) -> [f64; 2] {
        [p[0].clamp(0.0, self.arena[0]), p[1].clamp(0.0, self.arena[1])]
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(self.arena[0] > 0.0 && self.arena[1] > 0.0) {
            return Err("arena dimensions must be positive".into());
        }
        let j = self.start_jitter;
        let start_box = Rect::new(self.start[0] - j, self.start[0] + j, self.start[1] - j, self.start[1] + j);
        let r = self.goal_radius;
        let goal_box = Rect::new(self.goal[0] - r, self.goal[0] + r, self.goal[1] - r, self.goal[1] + r);
        for (i, pit) in self.lava.iter().enumerate() {
            if pit.intersects(&start_box) {
                return Err(format!("start region overlaps lava rectangle {i}"));
            }
            if pit.intersects(&goal_box) {
                return Err(format!("goal region overlaps lava rectangle {i}"));
            }
        }
        let in_arena = |p: [f64; 2]| p[0] >= 0.0 && p[0] <= self.arena[0] && p[1] >= 0.0 && p[1] <= self.arena[1];
        if !in_arena(self.start) || !in_arena(self.goal) {
            return Err("start and goal must lie inside the arena".into());
        }
        Ok(())
    }
}

pub fn distance(a: [f64; 2], b: [f64; 2]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_layout_is_valid() {
        SpiderLayout::default().validate().unwrap();
    }

    #[test]
    fn lava_is_closed() {
        let l = SpiderLayout::default();
        assert!(l.in_lava([3.5, 5.6]));
        assert!(l.in_lava([6.5, 4.4]));
        assert!(!l.in_lava([5.0, 5.0]));
        assert!(l.in_bridge([5.0, 5.0]));
        assert!(!l.in_bridge([5.0, 4.4]));
    }

    #[test]
    fn start_in_lava_rejected() {
        let l = SpiderLayout {
            start: [5.0, 7.0],
            ..Default::default()
        };
        assert!(l.validate().is_err());
    }
}
