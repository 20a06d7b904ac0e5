//! Closed-loop navigation in a terrain-class grid world seen through a
//! synthetic pinhole camera.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use num_traits::Float;
use rand::Rng;

use crate::data::{self, ShiftSpec};
use crate::diffcore::{Scalar, Tensor};
use crate::models::CaliModel;
use crate::planner::{self, CameraModel, PlannerWeights, Pose2, Primitive};
use crate::rng::{self, streams};
use crate::{Error, Result};

/// Colour of pixels above the horizon.
pub const SKY: [f32; 3] = [0.70, 0.80, 0.95];

/// Class grid; row index grows with `y`, column index with `x`.
#[derive(Debug, Clone, PartialEq)]
pub struct World {
    pub rows: usize,
    pub cols: usize,
    /// Metres per cell.
    pub resolution: f64,
    pub cells: Vec<u8>,
    /// Terrain classes; the sky class is `classes`.
    pub classes: usize,
    /// Navigability per class, sky included.
    pub navigable: Vec<bool>,
    pub start: Pose2,
    pub goal: Pose2,
}

impl World {
    /// Class at a metric position; `None` outside the grid.
    pub fn class_at(&self, x: f64, y: f64) -> Option<u8> {
        if x < 0.0 || y < 0.0 {
            return None;
        }
        let (c, r) = ((x / self.resolution) as usize, (y / self.resolution) as usize);
        (r < self.rows && c < self.cols).then(|| self.cells[r * self.cols + c])
    }

    /// Whether the point robot may stand at `(x, y)`.
    pub fn free(&self, x: f64, y: f64) -> bool {
        self.class_at(x, y).is_some_and(|c| self.navigable[c as usize])
    }

    pub fn sky_class(&self) -> u8 {
        self.classes as u8
    }

    pub fn validate(&self) -> Result<()> {
        if self.cells.len() != self.rows * self.cols || self.navigable.len() != self.classes + 1 {
            return Err(Error::Config("world grid or navigability table has the wrong size".into()));
        }
        if !self.free(self.start.x, self.start.y) {
            return Err(Error::Config(format!("start ({}, {}) is not navigable", self.start.x, self.start.y)));
        }
        if !self.free(self.goal.x, self.goal.y) {
            return Err(Error::Config(format!("goal ({}, {}) is not navigable", self.goal.x, self.goal.y)));
        }
        Ok(())
    }

    fn fill(&mut self, x0: f64, x1: f64, y0: f64, y1: f64, class: u8) {
        for r in 0..self.rows {
            for c in 0..self.cols {
                let (x, y) = ((c as f64 + 0.5) * self.resolution, (r as f64 + 0.5) * self.resolution);
                if x >= x0 && x < x1 && y >= y0 && y < y1 {
                    self.cells[r * self.cols + c] = class;
                }
            }
        }
    }

    fn blank(width: f64, height: f64, resolution: f64, classes: usize) -> Self {
        let (rows, cols) = ((height / resolution) as usize, (width / resolution) as usize);
        let mut navigable = data::traversability(classes);
        navigable.push(true);
        Self {
            rows,
            cols,
            resolution,
            cells: vec![0; rows * cols],
            classes,
            navigable,
            start: Pose2::default(),
            goal: Pose2::default(),
        }
    }

    /// Scatters navigable patches of class 1 over the floor.
    fn patches(&mut self, r: &mut rng::Rng, count: usize) {
        let (w, h) = (self.cols as f64 * self.resolution, self.rows as f64 * self.resolution);
        for _ in 0..count {
            let (cx, cy) = (r.gen_range(0.0..w), r.gen_range(0.0..h));
            let (hw, hh) = (r.gen_range(0.2..0.8), r.gen_range(0.2..0.8));
            self.fill(cx - hw, cx + hw, cy - hh, cy + hh, 1);
        }
    }

    /// 8 m × 6 m floor with a boundary wall and one inner wall across the
    /// width, broken by a single gap.
    pub fn corridor(seed: u64) -> Self {
        let mut r = rng::item(seed, streams::WORLD, 0);
        let mut w = Self::blank(8.0, 6.0, 0.1, 3);
        w.patches(&mut r, 6);
        let gap = r.gen_range(2.2..3.8);
        let half = 0.6;
        w.fill(4.0, 4.3, 0.0, gap - half, 2);
        w.fill(4.0, 4.3, gap + half, 6.0, 2);
        w.border(0.2);
        w.start = Pose2::new(1.2, r.gen_range(2.0..4.0), 0.0);
        w.goal = Pose2::new(6.8, r.gen_range(2.0..4.0), 0.0);
        w
    }

    /// Open floor with only the boundary wall.
    pub fn open(seed: u64) -> Self {
        let mut r = rng::item(seed, streams::WORLD, 1);
        let mut w = Self::blank(8.0, 6.0, 0.1, 3);
        w.patches(&mut r, 6);
        w.border(0.2);
        w.start = Pose2::new(1.0, 3.0, 0.0);
        w.goal = Pose2::new(2.0, 3.0, 0.0);
        w
    }

    fn border(&mut self, t: f64) {
        let (w, h) = (self.cols as f64 * self.resolution, self.rows as f64 * self.resolution);
        self.fill(0.0, w, 0.0, t, 2);
        self.fill(0.0, w, h - t, h, 2);
        self.fill(0.0, t, 0.0, h, 2);
        self.fill(w - t, w, 0.0, h, 2);
    }
}

/// Renders the camera view from `robot`. Returns the `3×H×W` image and the
/// true class map (sky included). Ground outside the grid reads as an
/// obstacle.
pub fn render_camera(world: &World, robot: &Pose2, cam: &CameraModel, shift: &ShiftSpec, seed: u64, index: u64) -> (Tensor<f32>, Vec<u8>) {
    let (h, w) = (cam.rows, cam.cols);
    let sky = world.sky_class();
    let obstacle = world.navigable.iter().position(|n| !n).unwrap_or(0) as u8;
    let mut truth = vec![sky; h * w];
    for row in 0..h {
        for col in 0..w {
            if let Some((gx, gy)) = cam.ground_point(col as f64 + 0.5, row as f64 + 0.5) {
                let p = robot.compose(&Pose2::new(gx, gy, 0.0));
                truth[row * w + col] = world.class_at(p.x, p.y).unwrap_or(obstacle);
            }
        }
    }
    let ground: Vec<u8> = truth.iter().map(|&c| if c == sky { 0 } else { c }).collect();
    let mut tex = rng::item(seed, streams::RENDER, index);
    let mut noise = rng::item(shift.seed ^ seed, streams::SHIFT, index);
    let mut img = data::render(&ground, h, w, shift, &mut tex, &mut noise);
    let sky_rgb = shift.transform(SKY);
    let hw = h * w;
    for (px, &c) in truth.iter().enumerate() {
        if c == sky {
            for ch in 0..3 {
                img.data_mut()[ch * hw + px] = sky_rgb[ch].clamp(0.0, 1.0);
            }
        }
    }
    (img, truth)
}

/// Where per-step segmentations come from.
pub enum SegSource<'a, T> {
    /// The renderer's true class map.
    Oracle,
    /// A trained model; pixels above the horizon are set to sky.
    Learned(&'a CaliModel<T>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeCfg {
    pub max_steps: usize,
    /// Fraction of the selected primitive executed before re-planning.
    pub exec_fraction: f64,
    pub alpha: f64,
    pub seed: u64,
    /// Appearance of rendered images.
    pub shift: ShiftSpec,
}

impl Default for EpisodeCfg {
    fn default() -> Self {
        Self {
            max_steps: 200,
            exec_fraction: 0.25,
            alpha: 0.55,
            seed: 0,
            shift: ShiftSpec::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpisodeStep {
    pub step: usize,
    /// Pose after executing the step.
    pub pose: Pose2,
    pub prim_index: usize,
    pub coll_cost: f64,
    pub targ_cost: f64,
    pub violation: bool,
    pub done: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeLog {
    pub start: Pose2,
    pub steps: Vec<EpisodeStep>,
    pub path_length: f64,
    pub reached: bool,
    pub violation: bool,
}

/// Segments one rendered view.
pub fn segment_view<T: Scalar>(source: &SegSource<'_, T>, image: &Tensor<f32>, truth: &[u8], cam: &CameraModel, sky: u8) -> Result<Vec<u8>> {
    match source {
        SegSource::Oracle => Ok(truth.to_vec()),
        SegSource::Learned(model) => {
            let mut seg = model.segment(&image.cast())?;
            let horizon = cam.horizon_row();
            for row in 0..cam.rows {
                if cam.ground_point(cam.cx, row as f64 + 0.5).is_none() || (row as f64 + 0.5) <= horizon {
                    seg[row * cam.cols..(row + 1) * cam.cols].fill(sky);
                }
            }
            Ok(seg)
        }
    }
}

/// Render, segment, plan and execute until the goal radius is reached, the
/// robot stands on a non-navigable cell, or `max_steps` run out.
pub fn run_episode<T: Scalar>(
    world: &World,
    cam: &CameraModel,
    source: &SegSource<'_, T>,
    library: &[Primitive],
    weights: &PlannerWeights,
    cfg: &EpisodeCfg,
) -> Result<EpisodeLog> {
    world.validate()?;
    cam.validate()?;
    weights.validate()?;
    let mut log = EpisodeLog {
        start: world.start,
        steps: Vec::new(),
        path_length: 0.0,
        reached: world.start.distance(&world.goal) <= weights.goal_radius,
        violation: false,
    };
    let mut pose = world.start;
    for step in 0..cfg.max_steps {
        if log.reached || log.violation {
            break;
        }
        let (img, truth) = render_camera(world, &pose, cam, &cfg.shift, cfg.seed, step as u64);
        let seg = segment_view(source, &img, &truth, cam, world.sky_class())?;
        let mask = planner::navigability_mask(&seg, cam.rows, cam.cols, &world.navigable)?;
        let boundary = planner::obstacle_boundary(&mask);
        let field = planner::sedf(&boundary, cfg.alpha, cam.rows, cam.cols)?;
        let bearing = pose.bearing_to(world.goal.x, world.goal.y);
        let goal = Pose2::new(world.goal.x, world.goal.y, bearing);
        let plan = planner::select_primitive(library, &field, cam, &pose, &goal, weights)?;
        let prim = &library[plan.index];
        let next = pose.compose(&prim.at(prim.duration * cfg.exec_fraction));
        log.path_length += pose.distance(&next);
        pose = next;
        let violation = !world.free(pose.x, pose.y);
        let reached = !violation && pose.distance(&world.goal) <= weights.goal_radius;
        log.violation = violation;
        log.reached = reached;
        let cost = plan.costs[plan.index];
        log.steps.push(EpisodeStep {
            step,
            pose,
            prim_index: plan.index,
            coll_cost: cost.collision,
            targ_cost: cost.target,
            violation,
            done: violation || reached,
        });
    }
    Ok(log)
}

/// The default library: a 7-primitive fan at 0.3 m/s over 2 s.
pub fn default_library() -> Vec<Primitive> {
    planner::generate_primitives(0.3, &planner::fan(7, 0.8), 2.0, 9).expect("valid constants")
}

/// Recomputes the violation flag by replaying the log against the world.
pub fn replay_violation(world: &World, log: &EpisodeLog) -> bool {
    log.steps.iter().any(|s| !world.free(s.pose.x, s.pose.y))
}

/// Sum of Euclidean steps between logged poses.
pub fn replay_length(log: &EpisodeLog) -> f64 {
    let mut prev = log.start;
    let mut total = 0.0;
    for s in &log.steps {
        total += Float::hypot(s.pose.x - prev.x, s.pose.y - prev.y);
        prev = s.pose;
    }
    total
}
