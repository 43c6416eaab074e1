//! Calibrated rectified stereo camera model.
//!
//! Both cameras share focal length and principal point; the right camera is
//! displaced along the rectified x axis by the baseline. Projection and
//! triangulation are exact pinhole operations; depth from disparity is
//! `focal * baseline / disparity`.

use nalgebra::{Matrix3, Vector2, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum StereoError {
    #[error("disparity must be positive, got {0}")]
    NonPositiveDisparity(f64),
    #[error("invalid rig: {0}")]
    InvalidRig(String),
    #[error("rig file error: {0}")]
    File(String),
}

/// Which camera of the rectified pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
}

/// A rigid transform (rotation + translation).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidTransform {
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
}

impl RigidTransform {
    pub fn identity() -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
        }
    }

    pub fn apply(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * p + self.translation
    }

    pub fn inverse_apply(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation.transpose() * (p - self.translation)
    }

    fn validate(&self, name: &str) -> Result<(), StereoError> {
        let rt = self.rotation * self.rotation.transpose();
        if (rt - Matrix3::identity()).norm() > 1e-6 {
            return Err(StereoError::InvalidRig(format!(
                "{name} rotation is not orthonormal"
            )));
        }
        if (self.rotation.determinant() - 1.0).abs() > 1e-6 {
            return Err(StereoError::InvalidRig(format!(
                "{name} rotation determinant is not +1"
            )));
        }
        Ok(())
    }
}

/// Calibrated rectified stereo pair plus LiDAR extrinsics.
#[derive(Debug, Clone)]
pub struct StereoRig {
    /// Focal length, pixels (shared by both rectified cameras).
    pub focal: f64,
    /// Principal point, pixels.
    pub principal_point: Vector2<f64>,
    /// Stereo baseline, meters.
    pub baseline: f64,
    /// Image width and height, pixels.
    pub image_size: (u32, u32),
    /// Left-camera-to-global rigid transform.
    pub cam_to_global: RigidTransform,
    /// LiDAR-to-left-camera rigid transform.
    pub lidar_to_cam: RigidTransform,
}

impl StereoRig {
    pub fn validate(&self) -> Result<(), StereoError> {
        if !(self.focal > 0.0) {
            return Err(StereoError::InvalidRig("focal must be > 0".into()));
        }
        if !(self.baseline > 0.0) {
            return Err(StereoError::InvalidRig("baseline must be > 0".into()));
        }
        self.cam_to_global.validate("cam_to_global")?;
        self.lidar_to_cam.validate("lidar_to_cam")?;
        Ok(())
    }

    /// Global-frame position of the left camera center.
    pub fn camera_center(&self) -> Vector3<f64> {
        self.cam_to_global.translation
    }

    /// Global-frame position of the LiDAR sensor origin.
    pub fn lidar_origin(&self) -> Vector3<f64> {
        self.cam_to_global.apply(&self.lidar_to_cam.translation)
    }

    /// Global point into left-camera coordinates (x right, y down, z forward).
    pub fn global_to_camera(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.cam_to_global.inverse_apply(p)
    }

    /// Pinhole projection of a global-frame point into the chosen camera.
    /// The boolean is false when the point is not in front of the camera.
    pub fn project(&self, point: &Vector3<f64>, side: Side) -> (Vector2<f64>, bool) {
        let mut c = self.global_to_camera(point);
        if side == Side::Right {
            c.x -= self.baseline;
        }
        let in_front = c.z > 0.0;
        let z = if c.z.abs() < 1e-12 {
            1e-12_f64.copysign(if c.z == 0.0 { 1.0 } else { c.z })
        } else {
            c.z
        };
        let px = Vector2::new(
            self.focal * c.x / z + self.principal_point.x,
            self.focal * c.y / z + self.principal_point.y,
        );
        (px, in_front)
    }

    /// 2x3 Jacobian of the projected pixel with respect to the global point,
    /// plus the camera-frame point. Valid for points in front of the camera.
    pub fn projection_jacobian(
        &self,
        point: &Vector3<f64>,
        side: Side,
    ) -> (nalgebra::Matrix2x3<f64>, Vector3<f64>) {
        let mut c = self.global_to_camera(point);
        if side == Side::Right {
            c.x -= self.baseline;
        }
        let z = c.z;
        let f = self.focal;
        let d_cam = nalgebra::Matrix2x3::new(
            f / z,
            0.0,
            -f * c.x / (z * z),
            0.0,
            f / z,
            -f * c.y / (z * z),
        );
        (d_cam * self.cam_to_global.rotation.transpose(), c)
    }

    /// Depth along the camera axis for a positive disparity.
    pub fn depth_from_disparity(&self, disparity: f64) -> Result<f64, StereoError> {
        if !(disparity > 0.0) {
            return Err(StereoError::NonPositiveDisparity(disparity));
        }
        Ok(self.focal * self.baseline / disparity)
    }

    /// Back-projects a left-image pixel at the given disparity to a global
    /// 3D point.
    pub fn backproject_left(
        &self,
        left_px: &Vector2<f64>,
        disparity: f64,
    ) -> Result<Vector3<f64>, StereoError> {
        let depth = self.depth_from_disparity(disparity)?;
        let cam = Vector3::new(
            (left_px.x - self.principal_point.x) * depth / self.focal,
            (left_px.y - self.principal_point.y) * depth / self.focal,
            depth,
        );
        Ok(self.cam_to_global.apply(&cam))
    }

    /// Triangulates a rectified correspondence into a global 3D point.
    /// The vertical coordinate uses the mean of the two rows.
    pub fn triangulate(
        &self,
        left_px: &Vector2<f64>,
        right_px: &Vector2<f64>,
    ) -> Result<Vector3<f64>, StereoError> {
        let disparity = left_px.x - right_px.x;
        let y = 0.5 * (left_px.y + right_px.y);
        self.backproject_left(&Vector2::new(left_px.x, y), disparity)
    }
}

// ---------------------------------------------------------------------------
// Calibration file format (TOML).

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TransformFile {
    /// Row-major 3x3 rotation.
    rotation: Vec<f64>,
    translation: [f64; 3],
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RigFile {
    /// Focal length in pixels.
    focal: f64,
    /// Principal point in pixels, shared by both rectified cameras.
    principal_point: [f64; 2],
    /// Baseline in meters.
    baseline: f64,
    /// Image width and height in pixels.
    image_size: [u32; 2],
    cam_to_global: TransformFile,
    lidar_to_cam: TransformFile,
}

fn transform_to_file(t: &RigidTransform) -> TransformFile {
    TransformFile {
        rotation: t.rotation.transpose().as_slice().to_vec(), // row-major
        translation: [t.translation.x, t.translation.y, t.translation.z],
    }
}

fn transform_from_file(f: &TransformFile, name: &str) -> Result<RigidTransform, StereoError> {
    if f.rotation.len() != 9 {
        return Err(StereoError::File(format!(
            "{name}.rotation must have 9 entries (row-major 3x3)"
        )));
    }
    let r = Matrix3::from_row_slice(&f.rotation);
    Ok(RigidTransform {
        rotation: r,
        translation: Vector3::new(f.translation[0], f.translation[1], f.translation[2]),
    })
}

impl StereoRig {
    pub fn to_toml_string(&self) -> String {
        let file = RigFile {
            focal: self.focal,
            principal_point: [self.principal_point.x, self.principal_point.y],
            baseline: self.baseline,
            image_size: [self.image_size.0, self.image_size.1],
            cam_to_global: transform_to_file(&self.cam_to_global),
            lidar_to_cam: transform_to_file(&self.lidar_to_cam),
        };
        toml::to_string(&file).expect("rig serializes")
    }

    pub fn from_toml_str(s: &str) -> Result<Self, StereoError> {
        let file: RigFile =
            toml::from_str(s).map_err(|e| StereoError::File(format!("parse error: {e}")))?;
        let rig = StereoRig {
            focal: file.focal,
            principal_point: Vector2::new(file.principal_point[0], file.principal_point[1]),
            baseline: file.baseline,
            image_size: (file.image_size[0], file.image_size[1]),
            cam_to_global: transform_from_file(&file.cam_to_global, "cam_to_global")?,
            lidar_to_cam: transform_from_file(&file.lidar_to_cam, "lidar_to_cam")?,
        };
        rig.validate()?;
        Ok(rig)
    }
}

/// A rig with the camera at `center` looking along the global +x axis
/// (y up), matching the synthetic scene convention.
pub fn forward_facing_rig(
    focal: f64,
    baseline: f64,
    image_size: (u32, u32),
    center: Vector3<f64>,
) -> StereoRig {
    // Camera axes in the global frame: x_cam -> +z, y_cam -> -y, z_cam -> +x.
    let rotation = Matrix3::from_columns(&[
        Vector3::new(0.0, 0.0, 1.0),
        Vector3::new(0.0, -1.0, 0.0),
        Vector3::new(1.0, 0.0, 0.0),
    ]);
    StereoRig {
        focal,
        principal_point: Vector2::new(image_size.0 as f64 / 2.0, image_size.1 as f64 / 2.0),
        baseline,
        image_size,
        cam_to_global: RigidTransform {
            rotation,
            translation: center,
        },
        lidar_to_cam: RigidTransform::identity(),
    }
}
