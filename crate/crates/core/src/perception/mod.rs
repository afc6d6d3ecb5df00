//! Depth + segmentation mask to labelled grid cells.
//!
//! The chain is `depth_to_cloud` (camera frame) → `cloud_to_robot_frame` →
//! `cloud_to_world` → `sor_filter` → `cloud_to_cells`. Camera frame follows
//! the optical convention (x right, y down, z forward); robot and world
//! frames are x forward, y left, z up with z = 0 on the floor.

pub mod pgm;
pub mod render;

use std::collections::BTreeMap;
use std::num::NonZeroUsize;

use kiddo::{ImmutableKdTree, SquaredEuclidean};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exec::Exec;
use crate::geometry::{Point2, Pose2D};
use crate::grid::GridIndex;
use crate::world::ObjectId;

#[derive(Debug, Error, PartialEq)]
pub enum PerceptionError {
    #[error("{what}: expected {expected_w}x{expected_h}, got {got_w}x{got_h}")]
    DimensionMismatch {
        what: &'static str,
        expected_w: u32,
        expected_h: u32,
        got_w: u32,
        got_h: u32,
    },
    #[error("{what}: buffer holds {got} values, expected {expected}")]
    BadLength {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("depth values must be finite and non-negative")]
    InvalidDepth,
    #[error("point cloud has {points} points but {labels} labels")]
    UnpairedLabels { points: usize, labels: usize },
    #[error("camera parameters: {0}")]
    BadCamera(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
}

impl CameraIntrinsics {
    /// Square-pixel camera with the principal point at the image centre and
    /// the given horizontal field of view.
    pub fn from_hfov(width: u32, height: u32, hfov: f64) -> Self {
        let f = 0.5 * width as f64 / (0.5 * hfov).tan();
        Self {
            fx: f,
            fy: f,
            cx: 0.5 * width as f64,
            cy: 0.5 * height as f64,
            width,
            height,
        }
    }

    pub fn validate(&self) -> Result<(), PerceptionError> {
        if !(self.fx > 0.0 && self.fy > 0.0) {
            return Err(PerceptionError::BadCamera("focal lengths must be positive".into()));
        }
        if !(self.cx >= 0.0 && self.cx < self.width as f64 && self.cy >= 0.0 && self.cy < self.height as f64) {
            return Err(PerceptionError::BadCamera("principal point outside the image".into()));
        }
        Ok(())
    }
}

/// Mounting of the camera on the robot. `tilt` pitches the optical axis
/// downward for positive values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraExtrinsics {
    pub mount_height: f64,
    pub tilt: f64,
    /// Planar pose of the optical centre in the robot frame.
    pub pose_in_robot: Pose2D,
}

impl CameraExtrinsics {
    pub fn validate(&self) -> Result<(), PerceptionError> {
        if self.tilt.abs() >= std::f64::consts::FRAC_PI_2 {
            return Err(PerceptionError::BadCamera("|tilt| must be below 90 degrees".into()));
        }
        Ok(())
    }

    /// Rotate a camera-frame vector into the robot frame (no translation).
    pub fn rotate_to_robot(&self, v: [f64; 3]) -> [f64; 3] {
        let (st, ct) = self.tilt.sin_cos();
        let [xc, yc, zc] = v;
        // mount frame: forward, left, up
        let fwd = -yc * st + zc * ct;
        let left = -xc;
        let up = -yc * ct - zc * st;
        let (sy, cy) = self.pose_in_robot.theta.sin_cos();
        [cy * fwd - sy * left, sy * fwd + cy * left, up]
    }

    pub fn to_robot(&self, p: [f64; 3]) -> [f64; 3] {
        let [x, y, z] = self.rotate_to_robot(p);
        [
            x + self.pose_in_robot.x,
            y + self.pose_in_robot.y,
            z + self.mount_height,
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraConfig {
    pub intrinsics: CameraIntrinsics,
    pub extrinsics: CameraExtrinsics,
    /// Returns farther than this are reported as invalid (0).
    pub max_range: f64,
}

impl Default for CameraConfig {
    /// 160×120, 87° horizontal field of view, 0.6 m high, pitched 30° down.
    fn default() -> Self {
        Self {
            intrinsics: CameraIntrinsics::from_hfov(160, 120, 87f64.to_radians()),
            extrinsics: CameraExtrinsics {
                mount_height: 0.6,
                tilt: 30f64.to_radians(),
                pose_in_robot: Pose2D::IDENTITY,
            },
            max_range: 6.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DepthImage {
    pub width: u32,
    pub height: u32,
    /// Row-major meters along the optical axis; 0 marks an invalid pixel.
    pub depth: Vec<f64>,
}

impl DepthImage {
    pub fn new(width: u32, height: u32, depth: Vec<f64>) -> Result<Self, PerceptionError> {
        let expected = width as usize * height as usize;
        if depth.len() != expected {
            return Err(PerceptionError::BadLength {
                what: "depth image",
                expected,
                got: depth.len(),
            });
        }
        if depth.iter().any(|d| !(d.is_finite() && *d >= 0.0)) {
            return Err(PerceptionError::InvalidDepth);
        }
        Ok(Self { width, height, depth })
    }

    pub fn get(&self, u: u32, v: u32) -> f64 {
        self.depth[v as usize * self.width as usize + u as usize]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SegmentationMask {
    pub width: u32,
    pub height: u32,
    /// Row-major object ids; 0 is background.
    pub labels: Vec<u32>,
}

impl SegmentationMask {
    pub fn new(width: u32, height: u32, labels: Vec<u32>) -> Result<Self, PerceptionError> {
        let expected = width as usize * height as usize;
        if labels.len() != expected {
            return Err(PerceptionError::BadLength {
                what: "segmentation mask",
                expected,
                got: labels.len(),
            });
        }
        Ok(Self { width, height, labels })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Frame {
    Camera,
    Robot,
    World,
}

/// Labelled XYZ points in a declared frame.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    frame: Frame,
    points: Vec<[f64; 3]>,
    labels: Vec<ObjectId>,
}

impl PointCloud {
    pub fn empty(frame: Frame) -> Self {
        Self {
            frame,
            points: Vec::new(),
            labels: Vec::new(),
        }
    }

    pub fn from_parts(
        frame: Frame,
        points: Vec<[f64; 3]>,
        labels: Vec<ObjectId>,
    ) -> Result<Self, PerceptionError> {
        if points.len() != labels.len() {
            return Err(PerceptionError::UnpairedLabels {
                points: points.len(),
                labels: labels.len(),
            });
        }
        Ok(Self { frame, points, labels })
    }

    pub fn frame(&self) -> Frame {
        self.frame
    }

    pub fn points(&self) -> &[[f64; 3]] {
        &self.points
    }

    pub fn labels(&self) -> &[ObjectId] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn push(&mut self, p: [f64; 3], label: ObjectId) {
        self.points.push(p);
        self.labels.push(label);
    }

    fn map_points(&self, frame: Frame, f: impl Fn([f64; 3]) -> [f64; 3]) -> PointCloud {
        PointCloud {
            frame,
            points: self.points.iter().map(|&p| f(p)).collect(),
            labels: self.labels.clone(),
        }
    }
}

/// Back-project every valid, labelled pixel through the pinhole model.
pub fn depth_to_cloud(
    depth: &DepthImage,
    mask: &SegmentationMask,
    intr: &CameraIntrinsics,
) -> Result<PointCloud, PerceptionError> {
    let check = |what, w, h| {
        if (w, h) != (intr.width, intr.height) {
            Err(PerceptionError::DimensionMismatch {
                what,
                expected_w: intr.width,
                expected_h: intr.height,
                got_w: w,
                got_h: h,
            })
        } else {
            Ok(())
        }
    };
    check("depth image", depth.width, depth.height)?;
    check("segmentation mask", mask.width, mask.height)?;

    let mut cloud = PointCloud::empty(Frame::Camera);
    let w = intr.width as usize;
    for (i, (&z, &label)) in depth.depth.iter().zip(&mask.labels).enumerate() {
        if z <= 0.0 || label == 0 {
            continue;
        }
        let (u, v) = ((i % w) as f64, (i / w) as f64);
        cloud.push(
            [(u - intr.cx) * z / intr.fx, (v - intr.cy) * z / intr.fy, z],
            ObjectId(label),
        );
    }
    Ok(cloud)
}

/// Camera frame → robot frame; z becomes height above the floor.
pub fn cloud_to_robot_frame(cloud: &PointCloud, extr: &CameraExtrinsics) -> PointCloud {
    debug_assert_eq!(cloud.frame, Frame::Camera);
    cloud.map_points(Frame::Robot, |p| extr.to_robot(p))
}

/// Robot frame → world frame using the robot's planar pose.
pub fn cloud_to_world(cloud: &PointCloud, robot: &Pose2D) -> PointCloud {
    debug_assert_eq!(cloud.frame, Frame::Robot);
    cloud.map_points(Frame::World, |[x, y, z]| {
        let p = robot.transform_point(Point2::new(x, y));
        [p.x, p.y, z]
    })
}

/// Mean distance from each point to its `k` nearest neighbours (self excluded).
pub fn mean_knn_distances(points: &[[f64; 3]], k: usize, exec: Exec) -> Vec<f64> {
    let tree: ImmutableKdTree<f64, 3> =
        ImmutableKdTree::new_from_slice(points).expect("finite point cloud");
    let want = NonZeroUsize::new(k + 1).expect("k + 1 > 0");
    exec.map_slice(points, |q| {
        let hits = tree.query(q).nearest_n::<SquaredEuclidean<f64>>(want).execute();
        // The query point itself is among the hits at distance 0.
        hits.iter().map(|h| h.distance.sqrt()).sum::<f64>() / k as f64
    })
}

/// Statistical outlier removal: drop points whose mean k-NN distance exceeds
/// `mean + alpha · stddev` over the cloud.
pub fn sor_filter(cloud: &PointCloud, k: usize, alpha: f64) -> PointCloud {
    sor_filter_with(cloud, k, alpha, Exec::default())
}

pub fn sor_filter_with(cloud: &PointCloud, k: usize, alpha: f64, exec: Exec) -> PointCloud {
    assert!(k >= 1 && alpha >= 0.0, "sor_filter needs k >= 1 and alpha >= 0");
    if cloud.len() <= k {
        return cloud.clone();
    }
    let d = mean_knn_distances(&cloud.points, k, exec);
    let n = d.len() as f64;
    let mean = d.iter().sum::<f64>() / n;
    let var = d.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    let threshold = mean + alpha * var.sqrt();

    let mut out = PointCloud::empty(cloud.frame);
    for ((p, l), di) in cloud.points.iter().zip(&cloud.labels).zip(&d) {
        if *di <= threshold {
            out.push(*p, *l);
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellProjection {
    pub resolution: f64,
    pub origin: Point2,
    /// Inclusive height band `[min, max]` of points kept.
    pub z_band: (f64, f64),
    pub min_hits: u32,
}

impl CellProjection {
    pub fn new(resolution: f64, origin: Point2) -> Self {
        Self {
            resolution,
            origin,
            z_band: (0.02, 1.5),
            min_hits: 3,
        }
    }
}

/// Project world-frame points onto grid cells and label each cell by the
/// object with the most hits (ties → smaller id). Cells with fewer than
/// `min_hits` hits of the winning id, and cells at negative indices, are
/// dropped.
pub fn cloud_to_cells(cloud: &PointCloud, proj: &CellProjection) -> BTreeMap<GridIndex, ObjectId> {
    assert!(proj.resolution > 0.0, "resolution must be positive");
    let mut hits: BTreeMap<GridIndex, BTreeMap<ObjectId, u32>> = BTreeMap::new();
    for (&[x, y, z], &label) in cloud.points.iter().zip(&cloud.labels) {
        if z < proj.z_band.0 || z > proj.z_band.1 {
            continue;
        }
        let c = ((x - proj.origin.x) / proj.resolution).floor();
        let r = ((y - proj.origin.y) / proj.resolution).floor();
        if c < 0.0 || r < 0.0 || c > u32::MAX as f64 || r > u32::MAX as f64 {
            continue;
        }
        *hits
            .entry(GridIndex::new(c as u32, r as u32))
            .or_default()
            .entry(label)
            .or_default() += 1;
    }
    hits.into_iter()
        .filter_map(|(cell, counts)| {
            // BTreeMap iterates ids ascending, so max_by_key on (count, Reverse(id)) keeps the smaller id.
            let (id, n) = counts
                .into_iter()
                .max_by_key(|&(id, n)| (n, std::cmp::Reverse(id)))?;
            (n >= proj.min_hits).then_some((cell, id))
        })
        .collect()
}

/// Outlier-filter settings used by [`perception_tick`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SorParams {
    pub k: usize,
    pub alpha: f64,
}

impl Default for SorParams {
    fn default() -> Self {
        Self { k: 10, alpha: 1.0 }
    }
}

/// One full observation: render depth and mask from `robot`, back-project,
/// move to the world frame, filter outliers and vote cells.
pub fn perception_tick(
    prisms: &[render::Prism],
    camera: &CameraConfig,
    robot: &Pose2D,
    proj: &CellProjection,
    sor: SorParams,
    exec: Exec,
) -> BTreeMap<GridIndex, ObjectId> {
    let (depth, mask) = render::render(prisms, camera, robot, exec);
    let cloud = depth_to_cloud(&depth, &mask, &camera.intrinsics).expect("renderer matches camera");
    let cloud = cloud_to_world(&cloud_to_robot_frame(&cloud, &camera.extrinsics), robot);
    let cloud = sor_filter_with(&cloud, sor.k, sor.alpha, exec);
    cloud_to_cells(&cloud, proj)
}
