//! Visual receding-horizon planning over a fixed library of unicycle
//! motion primitives.
//!
//! Primitives are projected into the camera image, where a scaled distance
//! field around the obstacle boundary gives a collision risk per pose. The
//! selected primitive minimizes `w1 * collision + w2 * target`.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use core::f64::consts::PI;
use num_traits::Float;

use crate::{Error, Result};

/// Wraps an angle to `(-π, π]`.
pub fn wrap_angle(a: f64) -> f64 {
    let mut r = a % (2.0 * PI);
    if r <= -PI {
        r += 2.0 * PI;
    } else if r > PI {
        r -= 2.0 * PI;
    }
    r
}

/// Planar pose; `psi` is kept in `(-π, π]`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Pose2 {
    pub x: f64,
    pub y: f64,
    pub psi: f64,
}

impl Pose2 {
    pub fn new(x: f64, y: f64, psi: f64) -> Self {
        Self { x, y, psi: wrap_angle(psi) }
    }

    /// `self ∘ local`: `local` expressed in this pose's frame, mapped out.
    pub fn compose(&self, local: &Pose2) -> Pose2 {
        let (s, c) = Float::sin_cos(self.psi);
        Pose2::new(
            self.x + c * local.x - s * local.y,
            self.y + s * local.x + c * local.y,
            self.psi + local.psi,
        )
    }

    pub fn distance(&self, other: &Pose2) -> f64 {
        Float::hypot(self.x - other.x, self.y - other.y)
    }

    /// Bearing from this position to `(x, y)`.
    pub fn bearing_to(&self, x: f64, y: f64) -> f64 {
        Float::atan2(y - self.y, x - self.x)
    }
}

/// Pose reached after `t` seconds of constant `(v, omega)` from the origin.
pub fn unicycle(v: f64, omega: f64, t: f64) -> Pose2 {
    if omega == 0.0 {
        return Pose2::new(v * t, 0.0, 0.0);
    }
    let r = v / omega;
    let half = Float::sin(omega * t / 2.0);
    // 1 - cos(a) written as 2 sin^2(a/2) to stay exact for tiny a
    Pose2::new(r * Float::sin(omega * t), r * 2.0 * half * half, omega * t)
}

/// A constant-control trajectory segment in the robot frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Primitive {
    pub v: f64,
    pub omega: f64,
    pub duration: f64,
    /// `m` evenly spaced poses; the first is the identity.
    pub poses: Vec<Pose2>,
}

impl Primitive {
    pub fn at(&self, t: f64) -> Pose2 {
        unicycle(self.v, self.omega, t)
    }
}

/// One primitive per `omega`, each sampled at `m` evenly spaced times.
pub fn generate_primitives(v: f64, omegas: &[f64], duration: f64, m: usize) -> Result<Vec<Primitive>> {
    if m < 2 {
        return Err(Error::Config(format!("primitives need at least 2 poses, got {m}")));
    }
    if !(v > 0.0) || !(duration > 0.0) {
        return Err(Error::Config(format!("need v > 0 and T > 0, got v={v}, T={duration}")));
    }
    Ok(omegas
        .iter()
        .map(|&omega| Primitive {
            v,
            omega,
            duration,
            poses: (0..m).map(|j| unicycle(v, omega, duration * j as f64 / (m - 1) as f64)).collect(),
        })
        .collect())
}

/// `n` turn rates evenly spread over `[-max, max]`.
pub fn fan(n: usize, max_omega: f64) -> Vec<f64> {
    if n == 1 {
        return vec![0.0];
    }
    (0..n).map(|i| -max_omega + 2.0 * max_omega * i as f64 / (n - 1) as f64).collect()
}

/// Pinhole camera at height `height` above the robot origin, looking
/// along the robot's x axis and pitched down by `pitch`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraModel {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub height: f64,
    pub pitch: f64,
    pub rows: usize,
    pub cols: usize,
}

impl Default for CameraModel {
    fn default() -> Self {
        Self {
            fx: 24.0,
            fy: 24.0,
            cx: 16.0,
            cy: 16.0,
            height: 0.5,
            pitch: 0.5,
            rows: 32,
            cols: 32,
        }
    }
}

/// Result of projecting a ground point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Projection {
    Pixel { u: f64, v: f64 },
    /// The point is not in front of the camera.
    Behind,
}

impl CameraModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.fx > 0.0 && self.fy > 0.0 && self.height > 0.0) || self.rows == 0 || self.cols == 0 {
            return Err(Error::Config(format!("invalid camera {self:?}")));
        }
        Ok(())
    }

    /// Image row of the horizon.
    pub fn horizon_row(&self) -> f64 {
        self.cy - self.fy * Float::tan(self.pitch)
    }

    /// Projects the ground point `(x, y, 0)` given in the robot frame.
    pub fn project(&self, x: f64, y: f64) -> Projection {
        let (s, c) = Float::sin_cos(self.pitch);
        let xc = -y;
        let yc = -x * s + self.height * c;
        let zc = x * c + self.height * s;
        if zc <= 1e-9 {
            return Projection::Behind;
        }
        Projection::Pixel {
            u: self.cx + self.fx * xc / zc,
            v: self.cy + self.fy * yc / zc,
        }
    }

    /// Ground point `(x, y)` in the robot frame hit by the ray through
    /// image point `(u, v)`, or `None` at or above the horizon.
    pub fn ground_point(&self, u: f64, v: f64) -> Option<(f64, f64)> {
        let (s, c) = Float::sin_cos(self.pitch);
        let (dx, dy, dz) = ((u - self.cx) / self.fx, (v - self.cy) / self.fy, 1.0);
        let forward = dz * c - dy * s;
        let down = dz * s + dy * c;
        if down <= 1e-9 {
            return None;
        }
        let t = self.height / down;
        Some((t * forward, -t * dx))
    }

    /// Nearest pixel to a projected point, clamped into the image.
    pub fn clamp_pixel(&self, u: f64, v: f64) -> (usize, usize) {
        let col = Float::floor(u).clamp(0.0, (self.cols - 1) as f64) as usize;
        let row = Float::floor(v).clamp(0.0, (self.rows - 1) as f64) as usize;
        (row, col)
    }
}

/// Row-major boolean image.
#[derive(Debug, Clone, PartialEq)]
pub struct Mask {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<bool>,
}

impl Mask {
    pub fn get(&self, r: usize, c: usize) -> bool {
        self.data[r * self.cols + c]
    }
}

/// Per-pixel navigability of a class map.
pub fn navigability_mask(seg: &[u8], rows: usize, cols: usize, table: &[bool]) -> Result<Mask> {
    if seg.len() != rows * cols {
        return Err(Error::Dimension { op: "navigability_mask", axis: "pixels", expected: rows * cols, got: seg.len() });
    }
    let data = seg
        .iter()
        .map(|&c| {
            table
                .get(c as usize)
                .copied()
                .ok_or_else(|| Error::Validation(format!("class {c} has no navigability entry")))
        })
        .collect::<Result<Vec<bool>>>()?;
    Ok(Mask { rows, cols, data })
}

/// Per column, the first non-navigable pixel met when scanning up from the
/// bottom row. Returned as `(row, col)` pairs in column order.
pub fn obstacle_boundary(mask: &Mask) -> Vec<(usize, usize)> {
    (0..mask.cols)
        .filter_map(|c| (0..mask.rows).rev().find(|&r| !mask.get(r, c)).map(|r| (r, c)))
        .collect()
}

/// 1-D squared distance transform of a sampled function (lower envelope of
/// parabolas).
fn dt_1d(f: &[f64], out: &mut [f64], v: &mut [usize], z: &mut [f64]) {
    let n = f.len();
    let mut k = 0usize;
    v[0] = 0;
    z[0] = f64::NEG_INFINITY;
    z[1] = f64::INFINITY;
    for q in 1..n {
        if f[q] == f64::INFINITY {
            continue;
        }
        loop {
            let p = v[k];
            if f[p] == f64::INFINITY {
                // a first finite sample replaces an infinite seed
                v[k] = q;
                z[k] = f64::NEG_INFINITY;
                z[k + 1] = f64::INFINITY;
                break;
            }
            let s = ((f[q] + (q * q) as f64) - (f[p] + (p * p) as f64)) / (2.0 * (q as f64 - p as f64));
            if s <= z[k] {
                if k == 0 {
                    v[0] = q;
                    z[0] = f64::NEG_INFINITY;
                    z[1] = f64::INFINITY;
                    break;
                }
                k -= 1;
            } else {
                k += 1;
                v[k] = q;
                z[k] = s;
                z[k + 1] = f64::INFINITY;
                break;
            }
        }
    }
    k = 0;
    for (q, o) in out.iter_mut().enumerate() {
        while z[k + 1] < q as f64 {
            k += 1;
        }
        let p = v[k];
        let d = q as f64 - p as f64;
        *o = if f[p] == f64::INFINITY { f64::INFINITY } else { d * d + f[p] };
    }
}

/// Exact Euclidean distance (pixels) from every pixel to the nearest seed,
/// by separable column and row passes. No seeds gives all-infinite.
pub fn distance_transform(seeds: &[(usize, usize)], rows: usize, cols: usize) -> Vec<f64> {
    let mut grid = vec![f64::INFINITY; rows * cols];
    for &(r, c) in seeds {
        grid[r * cols + c] = 0.0;
    }
    let n = rows.max(cols);
    let (mut f, mut out) = (vec![0.0; n], vec![0.0; n]);
    let (mut v, mut z) = (vec![0usize; n], vec![0.0; n + 1]);
    for c in 0..cols {
        for r in 0..rows {
            f[r] = grid[r * cols + c];
        }
        dt_1d(&f[..rows], &mut out[..rows], &mut v, &mut z);
        for r in 0..rows {
            grid[r * cols + c] = out[r];
        }
    }
    for r in 0..rows {
        f[..cols].copy_from_slice(&grid[r * cols..(r + 1) * cols]);
        dt_1d(&f[..cols], &mut out[..cols], &mut v, &mut z);
        grid[r * cols..(r + 1) * cols].copy_from_slice(&out[..cols]);
    }
    grid.iter().map(|&d| Float::sqrt(d)).collect()
}

/// Risk field in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SedfImage {
    pub rows: usize,
    pub cols: usize,
    pub alpha: f64,
    pub data: Vec<f64>,
}

impl SedfImage {
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, alpha: 1.0, data: vec![0.0; rows * cols] }
    }
}

/// `E = max(0, 1 - dist / (alpha * diagonal))` around the boundary pixels.
pub fn sedf(boundary: &[(usize, usize)], alpha: f64, rows: usize, cols: usize) -> Result<SedfImage> {
    if !(alpha > 0.0) {
        return Err(Error::Config(format!("SEDF scale must be positive, got {alpha}")));
    }
    let reach = alpha * Float::hypot(rows as f64, cols as f64);
    let dist = distance_transform(boundary, rows, cols);
    let data = dist.iter().map(|&d| (1.0 - d / reach).max(0.0)).collect();
    Ok(SedfImage { rows, cols, alpha, data })
}

/// Sum of the risk at every pose of `prim`. Poses behind the camera cost
/// 1; poses in front but outside the frame read the nearest border pixel.
pub fn collision_cost(prim: &Primitive, field: &SedfImage, cam: &CameraModel) -> f64 {
    prim.poses
        .iter()
        .map(|p| match cam.project(p.x, p.y) {
            Projection::Behind => 1.0,
            Projection::Pixel { u, v } => {
                let (r, c) = cam.clamp_pixel(u, v);
                field.get(r, c)
            }
        })
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlannerWeights {
    pub w1: f64,
    pub w2: f64,
    pub a: f64,
    pub b: f64,
    pub p: f64,
    pub goal_radius: f64,
}

impl Default for PlannerWeights {
    fn default() -> Self {
        Self {
            w1: 1.0,
            w2: 1.0,
            a: 0.25,
            b: 1.0,
            p: 2.0,
            goal_radius: 0.3,
        }
    }
}

impl PlannerWeights {
    pub fn validate(&self) -> Result<()> {
        if !(self.a > 0.0 && self.b > 0.0) {
            return Err(Error::Config("target-cost scales a and b must be positive".into()));
        }
        if !(self.w1 >= 0.0 && self.w2 >= 0.0 && self.p > 0.0) {
            return Err(Error::Config("weights must be non-negative and p positive".into()));
        }
        Ok(())
    }
}

/// `[a |Δψ|^p + b |Δt|^p]^(1/p)` with the yaw difference wrapped.
pub fn target_cost(pose: &Pose2, goal: &Pose2, w: &PlannerWeights) -> f64 {
    let dpsi = Float::abs(wrap_angle(goal.psi - pose.psi));
    let dt = pose.distance(goal);
    Float::powf(w.a * Float::powf(dpsi, w.p) + w.b * Float::powf(dt, w.p), 1.0 / w.p)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrimitiveCost {
    pub collision: f64,
    pub target: f64,
    pub total: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlanResult {
    pub index: usize,
    pub costs: Vec<PrimitiveCost>,
}

/// Evaluates every primitive and returns the cheapest (lowest index on
/// ties). `goal` is in the world frame, as is `robot`.
pub fn select_primitive(
    library: &[Primitive],
    field: &SedfImage,
    cam: &CameraModel,
    robot: &Pose2,
    goal: &Pose2,
    w: &PlannerWeights,
) -> Result<PlanResult> {
    if library.is_empty() {
        return Err(Error::Usage("empty primitive library".into()));
    }
    let costs: Vec<PrimitiveCost> = library
        .iter()
        .map(|prim| {
            let collision = collision_cost(prim, field, cam);
            let target = prim.poses.iter().map(|p| target_cost(&robot.compose(p), goal, w)).sum();
            PrimitiveCost {
                collision,
                target,
                total: w.w1 * collision + w.w2 * target,
            }
        })
        .collect();
    let mut index = 0;
    for (i, c) in costs.iter().enumerate() {
        if c.total < costs[index].total {
            index = i;
        }
    }
    Ok(PlanResult { index, costs })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn primitive_endpoints() {
        let lib = generate_primitives(0.3, &[0.0], 2.0, 5).unwrap();
        let e = lib[0].poses[4];
        assert!(close(e.x, 0.6, 1e-12) && e.y == 0.0 && e.psi == 0.0);
        let lib = generate_primitives(1.0, &[PI / 2.0], 1.0, 3).unwrap();
        let e = lib[0].poses[2];
        assert!(close(e.x, 2.0 / PI, 1e-12) && close(e.y, 2.0 / PI, 1e-12) && close(e.psi, PI / 2.0, 1e-12));
        assert_eq!(lib[0].poses[0], Pose2::default());
        let tiny = unicycle(0.3, 1e-9, 2.0);
        assert!(close(tiny.x, 0.6, 1e-6) && close(tiny.y, 0.0, 1e-6));
        assert!(matches!(generate_primitives(0.3, &[0.0], 2.0, 1), Err(Error::Config(_))));
    }

    #[test]
    fn pose_spacing_bounded() {
        let lib = generate_primitives(0.3, &fan(7, 0.8), 2.0, 9).unwrap();
        for p in &lib {
            for w in p.poses.windows(2) {
                assert!(w[0].distance(&w[1]) <= 0.3 * 2.0 / 8.0 + 1e-9);
            }
        }
    }

    #[test]
    fn projection_matches_matrix_pipeline() {
        let cam = CameraModel { fx: 100.0, fy: 100.0, cx: 50.0, cy: 50.0, height: 1.0, pitch: 0.3, rows: 100, cols: 100 };
        // world -> camera as R * (p - c) with explicit rotation matrices
        let (s, c) = (0.3f64.sin(), 0.3f64.cos());
        let axes = [[0.0, -1.0, 0.0], [0.0, 0.0, -1.0], [1.0, 0.0, 0.0]];
        let pitch = [[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]];
        let mut rot = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                rot[i][j] = (0..3).map(|k| pitch[i][k] * axes[k][j]).sum();
            }
        }
        let rel = [3.0, 0.0, -1.0];
        let pc: Vec<f64> = (0..3).map(|i| (0..3).map(|j| rot[i][j] * rel[j]).sum()).collect();
        let (u0, v0) = (50.0 + 100.0 * pc[0] / pc[2], 50.0 + 100.0 * pc[1] / pc[2]);
        match cam.project(3.0, 0.0) {
            Projection::Pixel { u, v } => assert!(close(u, u0, 0.5) && close(v, v0, 0.5) && u == 50.0),
            p => panic!("{p:?}"),
        }
        // far points approach the horizon from below
        let mut prev = f64::INFINITY;
        for x in [1.0, 10.0, 100.0, 1e4] {
            if let Projection::Pixel { v, .. } = cam.project(x, 0.0) {
                assert!(v < prev && v > cam.horizon_row());
                prev = v;
            }
        }
        assert!(close(prev, cam.horizon_row(), 0.05));
        assert_eq!(cam.project(-5.0, 0.0), Projection::Behind);
        let (gx, gy) = cam.ground_point(u0, v0).unwrap();
        assert!(close(gx, 3.0, 1e-9) && close(gy, 0.0, 1e-9));
    }

    #[test]
    fn mask_and_boundary() {
        let seg = [0u8, 2, 1, 2, 0, 0];
        let m = navigability_mask(&seg, 2, 3, &[true, true, false]).unwrap();
        assert_eq!(m.data, vec![true, false, true, false, true, true]);
        assert!(matches!(navigability_mask(&[3], 1, 1, &[true; 3]), Err(Error::Validation(_))));
        let all = navigability_mask(&seg, 2, 3, &[true; 3]).unwrap();
        assert!(obstacle_boundary(&all).is_empty());
        // wall at row 1 of a 4-row image
        let mut seg = vec![0u8; 16];
        seg[4..8].fill(2);
        let m = navigability_mask(&seg, 4, 4, &[true, true, false]).unwrap();
        assert_eq!(obstacle_boundary(&m), vec![(1, 0), (1, 1), (1, 2), (1, 3)]);
    }

    fn brute(seeds: &[(usize, usize)], rows: usize, cols: usize) -> Vec<f64> {
        let mut out = vec![f64::INFINITY; rows * cols];
        for r in 0..rows {
            for c in 0..cols {
                for &(sr, sc) in seeds {
                    let d = ((r as f64 - sr as f64).powi(2) + (c as f64 - sc as f64).powi(2)).sqrt();
                    out[r * cols + c] = out[r * cols + c].min(d);
                }
            }
        }
        out
    }

    #[test]
    fn sedf_edges() {
        let f = sedf(&[(5, 5)], 0.25, 32, 32).unwrap();
        assert_eq!(f.get(5, 5), 1.0);
        assert_eq!(f.get(31, 31), 0.0);
        assert!(sedf(&[], 0.25, 4, 4).unwrap().data.iter().all(|&v| v == 0.0));
        assert!(matches!(sedf(&[], 0.0, 4, 4), Err(Error::Config(_))));
        let wide = sedf(&[(0, 0)], 1.0, 32, 32).unwrap();
        assert!(wide.get(31, 31) > 0.0);
    }

    proptest! {
        #[test]
        fn edt_matches_all_pairs(seeds in proptest::collection::vec((0usize..32, 0usize..32), 0..12), rows in 1usize..33, cols in 1usize..33) {
            let seeds: Vec<_> = seeds.into_iter().filter(|&(r, c)| r < rows && c < cols).collect();
            let fast = distance_transform(&seeds, rows, cols);
            let slow = brute(&seeds, rows, cols);
            for (a, b) in fast.iter().zip(&slow) {
                prop_assert!(a == b || (a - b).abs() < 1e-9, "{} vs {}", a, b);
            }
        }

        #[test]
        fn sedf_in_unit_range(seeds in proptest::collection::vec((0usize..16, 0usize..16), 1..6), alpha in 0.05f64..2.0) {
            let f = sedf(&seeds, alpha, 16, 16).unwrap();
            prop_assert!(f.data.iter().all(|v| (0.0..=1.0).contains(v)));
        }

        #[test]
        fn target_cost_is_a_metric(x1 in -5.0f64..5.0, y1 in -5.0f64..5.0, p1 in -3.1f64..3.1, x2 in -5.0f64..5.0, y2 in -5.0f64..5.0, p2 in -3.1f64..3.1) {
            let w = PlannerWeights::default();
            let (a, b) = (Pose2::new(x1, y1, p1), Pose2::new(x2, y2, p2));
            prop_assert!((target_cost(&a, &b, &w) - target_cost(&b, &a, &w)).abs() < 1e-12);
            prop_assert_eq!(target_cost(&a, &a, &w), 0.0);
            if a != b {
                prop_assert!(target_cost(&a, &b, &w) > 0.0);
            }
        }

        #[test]
        fn weight_scaling_keeps_argmin(lambda in 0.01f64..100.0, gx in -2.0f64..2.0, gy in -2.0f64..2.0, seed_r in 0usize..32, seed_c in 0usize..32) {
            let lib = generate_primitives(0.3, &fan(7, 0.8), 2.0, 9).unwrap();
            let cam = CameraModel::default();
            let field = sedf(&[(seed_r, seed_c)], 0.55, 32, 32).unwrap();
            let goal = Pose2::new(gx, gy, 0.0);
            let w = PlannerWeights::default();
            let scaled = PlannerWeights { w1: w.w1 * lambda, w2: w.w2 * lambda, ..w };
            let a = select_primitive(&lib, &field, &cam, &Pose2::default(), &goal, &w).unwrap();
            let b = select_primitive(&lib, &field, &cam, &Pose2::default(), &goal, &scaled).unwrap();
            prop_assert_eq!(a.index, b.index);
        }
    }

    #[test]
    fn target_cost_hand_cases() {
        let w = PlannerWeights { a: 1.0, b: 1.0, ..PlannerWeights::default() };
        assert!(close(target_cost(&Pose2::new(0.0, 0.0, 0.0), &Pose2::new(3.0, 4.0, 0.0), &w), 5.0, 1e-12));
        assert!(close(target_cost(&Pose2::new(0.0, 0.0, 0.0), &Pose2::new(3.0, 4.0, PI / 2.0), &w), 5.24094, 1e-4));
        // wrapping takes the short way round
        let c = target_cost(&Pose2::new(0.0, 0.0, 3.0), &Pose2::new(0.0, 0.0, -3.0), &w);
        assert!(close(c, 2.0 * PI - 6.0, 1e-12));
    }

    #[test]
    fn collision_cost_rules() {
        let cam = CameraModel::default();
        let lib = generate_primitives(0.3, &[0.0], 2.0, 5).unwrap();
        assert_eq!(collision_cost(&lib[0], &SedfImage::zeros(32, 32), &cam), 0.0);
        let back = Primitive { v: 0.3, omega: 0.0, duration: 1.0, poses: vec![Pose2::new(-1.0, 0.0, 0.0); 4] };
        assert_eq!(collision_cost(&back, &SedfImage::zeros(32, 32), &cam), 4.0);
        // wall at row 10: manual per-pose lookup
        let boundary: Vec<_> = (0..32).map(|c| (10, c)).collect();
        let field = sedf(&boundary, 0.55, 32, 32).unwrap();
        let lib = generate_primitives(0.3, &[0.0], 4.0, 6).unwrap();
        let mut manual = 0.0;
        for p in &lib[0].poses {
            if let Projection::Pixel { u, v } = cam.project(p.x, p.y) {
                let r = (v.floor().max(0.0) as usize).min(31);
                let c = (u.floor().max(0.0) as usize).min(31);
                manual += field.data[r * 32 + c];
            } else {
                manual += 1.0;
            }
        }
        assert!(close(collision_cost(&lib[0], &field, &cam), manual, 1e-12));
    }

    #[test]
    fn selection_basics() {
        let cam = CameraModel::default();
        let field = SedfImage::zeros(32, 32);
        let w = PlannerWeights::default();
        let lib = generate_primitives(0.3, &fan(7, 0.8), 2.0, 9).unwrap();
        let r = select_primitive(&lib, &field, &cam, &Pose2::default(), &Pose2::new(2.0, 0.0, 0.0), &w).unwrap();
        assert_eq!(r.index, 3);
        assert_eq!(r.costs.len(), 7);
        let one = select_primitive(&lib[..1], &field, &cam, &Pose2::default(), &Pose2::new(2.0, 0.0, 0.0), &w).unwrap();
        assert_eq!(one.index, 0);
        assert!(matches!(select_primitive(&[], &field, &cam, &Pose2::default(), &Pose2::default(), &w), Err(Error::Usage(_))));
        // identical primitives tie: lowest index wins
        let twins = vec![lib[3].clone(), lib[3].clone()];
        assert_eq!(select_primitive(&twins, &field, &cam, &Pose2::default(), &Pose2::new(2.0, 0.0, 0.0), &w).unwrap().index, 0);
    }

    #[test]
    fn wrap_range() {
        assert_eq!(wrap_angle(PI), PI);
        assert!(close(wrap_angle(-PI), PI, 1e-12));
        assert!(close(wrap_angle(3.0 * PI / 2.0), -PI / 2.0, 1e-12));
    }
}
