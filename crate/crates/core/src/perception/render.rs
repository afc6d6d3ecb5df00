//! Synthetic depth and oracle-mask renderer: a per-pixel z-buffer over
//! vertical prisms (extruded 2D polygons) standing on the floor.

use crate::exec::Exec;
use crate::geometry::{self, Point2, Pose2D};
use crate::world::ObjectId;

use super::{CameraConfig, DepthImage, SegmentationMask};

/// Default extrusion height of movable/unmovable objects.
pub const OBJECT_HEIGHT: f64 = 0.4;
/// Default extrusion height of static geometry.
pub const WALL_HEIGHT: f64 = 1.0;

#[derive(Debug, Clone, PartialEq)]
pub struct Prism {
    /// `None` renders as background in the mask.
    pub label: Option<ObjectId>,
    /// World-frame polygon, any simple polygon.
    pub polygon: Vec<Point2>,
    pub height: f64,
    lo: Point2,
    hi: Point2,
}

impl Prism {
    pub fn new(label: Option<ObjectId>, polygon: Vec<Point2>, height: f64) -> Self {
        let (lo, hi) = geometry::bounds(&polygon);
        Self {
            label,
            polygon,
            height,
            lo,
            hi,
        }
    }

    /// Smallest ray parameter `t > 0` where `origin + t·dir` enters the prism.
    fn hit(&self, origin: [f64; 3], dir: [f64; 3], t_max: f64) -> Option<f64> {
        if !self.ray_meets_bounds(origin, dir, t_max) {
            return None;
        }
        let o2 = Point2::new(origin[0], origin[1]);
        let d2 = Point2::new(dir[0], dir[1]);
        let mut best: Option<f64> = None;
        let mut consider = |t: f64| {
            if t > 1e-9 && t < t_max && best.is_none_or(|b| t < b) {
                best = Some(t);
            }
        };

        let n = self.polygon.len();
        for i in 0..n {
            let a = self.polygon[i];
            let e = self.polygon[(i + 1) % n] - a;
            let denom = d2.cross(e);
            if denom.abs() < 1e-15 {
                continue;
            }
            let ao = a - o2;
            let t = ao.cross(e) / denom;
            let s = ao.cross(d2) / denom;
            if (0.0..=1.0).contains(&s) {
                let z = origin[2] + t * dir[2];
                if (0.0..=self.height).contains(&z) {
                    consider(t);
                }
            }
        }
        if dir[2].abs() > 1e-15 {
            let t = (self.height - origin[2]) / dir[2];
            let p = o2 + d2 * t;
            if t > 0.0 && geometry::point_in_polygon(p, &self.polygon) {
                consider(t);
            }
        }
        best
    }

    fn ray_meets_bounds(&self, o: [f64; 3], d: [f64; 3], t_max: f64) -> bool {
        let mut t0: f64 = 0.0;
        let mut t1 = t_max;
        let lo = [self.lo.x, self.lo.y, 0.0];
        let hi = [self.hi.x, self.hi.y, self.height];
        for k in 0..3 {
            if d[k].abs() < 1e-15 {
                if o[k] < lo[k] || o[k] > hi[k] {
                    return false;
                }
                continue;
            }
            let inv = 1.0 / d[k];
            let (mut a, mut b) = ((lo[k] - o[k]) * inv, (hi[k] - o[k]) * inv);
            if a > b {
                std::mem::swap(&mut a, &mut b);
            }
            t0 = t0.max(a);
            t1 = t1.min(b);
            if t0 > t1 {
                return false;
            }
        }
        true
    }
}

/// Ray-cast every pixel from a camera mounted on a robot at `robot_pose`.
///
/// Depth is the optical-axis coordinate of the first surface hit (floor at
/// z = 0 included); the mask carries the prism label or 0.
pub fn render(
    prisms: &[Prism],
    camera: &CameraConfig,
    robot_pose: &Pose2D,
    exec: Exec,
) -> (DepthImage, SegmentationMask) {
    let intr = &camera.intrinsics;
    let extr = &camera.extrinsics;
    let cam_xy = robot_pose.transform_point(extr.pose_in_robot.position());
    let origin = [cam_xy.x, cam_xy.y, extr.mount_height];
    let (w, h) = (intr.width as usize, intr.height as usize);

    let rows: Vec<(Vec<f64>, Vec<u32>)> = exec.map_range(h, |v| {
        let mut depth = vec![0.0; w];
        let mut labels = vec![0u32; w];
        for u in 0..w {
            // Direction with unit optical-axis component, so t is the depth.
            let dc = [(u as f64 - intr.cx) / intr.fx, (v as f64 - intr.cy) / intr.fy, 1.0];
            let [rx, ry, rz] = extr.rotate_to_robot(dc);
            let wxy = robot_pose.transform_point(Point2::new(rx, ry)) - robot_pose.position();
            let dir = [wxy.x, wxy.y, rz];

            let mut best_t = camera.max_range;
            let mut best_label = None;
            let mut any = false;
            if dir[2] < 0.0 {
                let t = -origin[2] / dir[2];
                if t < best_t {
                    best_t = t;
                    any = true;
                }
            }
            for prism in prisms {
                if let Some(t) = prism.hit(origin, dir, best_t) {
                    best_t = t;
                    best_label = prism.label;
                    any = true;
                }
            }
            if any {
                depth[u] = best_t;
                labels[u] = best_label.map_or(0, |id| id.0);
            }
        }
        (depth, labels)
    });

    let mut depth = Vec::with_capacity(w * h);
    let mut labels = Vec::with_capacity(w * h);
    for (d, l) in rows {
        depth.extend(d);
        labels.extend(l);
    }
    (
        DepthImage {
            width: intr.width,
            height: intr.height,
            depth,
        },
        SegmentationMask {
            width: intr.width,
            height: intr.height,
            labels,
        },
    )
}
