//! Parametric articulated body model.
//!
//! A [`SkeletonTemplate`] defines a 24-joint kinematic tree with a linear
//! shape space: per-coefficient joint offset tables and per-bone capsule
//! radii with matching deltas. [`BodyParams`] hold the decision variables of
//! a fit — 72 axis-angle pose values (root orientation plus 23 joints), the
//! shape coefficients, and a global translation in meters.
//!
//! Forward kinematics produces a [`PosedBody`]: world joint positions,
//! capsule surface proxy points with outward normals, and the 18 annotation
//! keypoints. [`FkContext`] additionally exposes exact analytic Jacobians of
//! any keypoint or surface point with respect to all parameters, which the
//! energy terms consume.

use nalgebra::{DVector, Matrix3, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rotation::{rodrigues, rotation_derivatives};

/// Number of joints in the kinematic tree.
pub const NUM_JOINTS: usize = 24;
/// Number of bones (every joint except the root ends one).
pub const NUM_BONES: usize = NUM_JOINTS - 1;
/// Pose vector length: root orientation plus 23 joint rotations, axis-angle.
pub const POSE_DIM: usize = 3 * NUM_JOINTS;
/// Number of annotation keypoints.
pub const NUM_KEYPOINTS: usize = 18;

/// Canonical annotation keypoint order. All file formats and observation
/// arrays use this order.
pub const KEYPOINT_NAMES: [&str; NUM_KEYPOINTS] = [
    "nose", "neck", "rsho", "relb", "rwri", "lsho", "lelb", "lwri", "hip", "rknee", "rankl",
    "lknee", "lankl", "reye", "leye", "rear", "lear", "head",
];

/// The 13 joints reported by the evaluation tables, in column order.
pub const TABLE_JOINTS: [&str; 13] = [
    "rknee", "lknee", "rankl", "lankl", "rsho", "lsho", "relb", "lelb", "rwri", "lwri", "head",
    "neck", "hip",
];

/// Index of a named keypoint in [`KEYPOINT_NAMES`].
pub fn keypoint_index(name: &str) -> Option<usize> {
    KEYPOINT_NAMES.iter().position(|n| *n == name)
}

/// Torso keypoints used by single-frame initialization.
pub const TORSO_KEYPOINTS: [usize; 4] = [1, 2, 5, 8]; // neck, rsho, lsho, hip

#[derive(Debug, Error)]
pub enum BodyModelError {
    #[error("shape vector has {got} coefficients, template has {expected}")]
    ShapeDimMismatch { expected: usize, got: usize },
    #[error("pose vector has {got} entries, expected {expected}")]
    PoseDimMismatch { expected: usize, got: usize },
    #[error("body parameters contain non-finite values")]
    NonFinite,
    #[error("invalid template: {0}")]
    InvalidTemplate(String),
}

/// Attachment of one annotation keypoint to the kinematic tree: a joint index
/// plus a fixed offset in that joint's rest frame.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct KeypointAttachment {
    pub joint: usize,
    pub offset: [f64; 3],
}

/// Shape-dependent skeleton definition: joint tree, linear shape basis,
/// capsule radii, and the annotation keypoint mapping.
#[derive(Debug, Clone)]
pub struct SkeletonTemplate {
    /// Parent joint per joint; `None` exactly at the root (index 0).
    pub parents: Vec<Option<usize>>,
    /// Rest joint positions, meters, neutral pose. Root at the origin.
    pub joints: Vec<Vector3<f64>>,
    /// Per-coefficient joint offsets: `shape_basis[b][j]` is added to joint
    /// `j` scaled by shape coefficient `b`.
    pub shape_basis: Vec<Vec<Vector3<f64>>>,
    /// Capsule radius per bone, meters. Bone `b` ends at joint `b + 1`.
    pub bone_radii: Vec<f64>,
    /// Per-coefficient radius deltas, same indexing as `shape_basis`.
    pub radii_basis: Vec<Vec<f64>>,
    /// Mapping from the 18 annotation keypoints to joints with offsets.
    pub keypoint_map: Vec<KeypointAttachment>,
    /// Unit vector the body faces along in the rest pose.
    pub forward_axis: Vector3<f64>,
    /// Surface proxy samples generated per bone.
    pub samples_per_bone: usize,
}

impl SkeletonTemplate {
    /// Number of shape coefficients this template supports.
    pub fn shape_dims(&self) -> usize {
        self.shape_basis.len()
    }

    /// Child joint of bone `b`.
    pub fn bone_child(&self, bone: usize) -> usize {
        bone + 1
    }

    /// Parent joint of bone `b` (the frame the bone is rigid in).
    pub fn bone_parent(&self, bone: usize) -> usize {
        self.parents[bone + 1].expect("non-root joint has a parent")
    }

    /// Checks the structural invariants: a single root, a valid tree,
    /// consistent table sizes, and a complete keypoint map.
    pub fn validate(&self) -> Result<(), BodyModelError> {
        let err = |m: String| Err(BodyModelError::InvalidTemplate(m));
        if self.joints.len() != NUM_JOINTS || self.parents.len() != NUM_JOINTS {
            return err(format!("expected {NUM_JOINTS} joints"));
        }
        if self.parents[0].is_some() {
            return err("joint 0 must be the root".into());
        }
        for (j, p) in self.parents.iter().enumerate().skip(1) {
            match p {
                None => return err(format!("joint {j} has no parent; only joint 0 is the root")),
                Some(p) if *p >= j => {
                    return err(format!("joint {j} has parent {p}; parents must precede children"))
                }
                _ => {}
            }
        }
        if self.bone_radii.len() != NUM_BONES {
            return err(format!("expected {NUM_BONES} bone radii"));
        }
        if self.radii_basis.len() != self.shape_basis.len() {
            return err("radius basis count differs from shape basis count".into());
        }
        for (b, (sb, rb)) in self.shape_basis.iter().zip(&self.radii_basis).enumerate() {
            if sb.len() != NUM_JOINTS || rb.len() != NUM_BONES {
                return err(format!("shape basis {b} has wrong table sizes"));
            }
        }
        if self.keypoint_map.len() != NUM_KEYPOINTS {
            return err(format!("keypoint map must cover all {NUM_KEYPOINTS} keypoints"));
        }
        for (k, a) in self.keypoint_map.iter().enumerate() {
            if a.joint >= NUM_JOINTS {
                return err(format!("keypoint {k} maps to invalid joint {}", a.joint));
            }
        }
        if self.samples_per_bone == 0 {
            return err("samples_per_bone must be positive".into());
        }
        if (self.forward_axis.norm() - 1.0).abs() > 1e-9 {
            return err("forward axis must be a unit vector".into());
        }
        Ok(())
    }
}

/// Pose, shape, and global translation: the decision variables of a fit.
#[derive(Debug, Clone, PartialEq)]
pub struct BodyParams {
    /// Axis-angle rotations, `3 * NUM_JOINTS` values. The first three are the
    /// root orientation; the rest are rotations relative to each parent.
    pub pose: DVector<f64>,
    /// Shape coefficients, dimensionless.
    pub shape: DVector<f64>,
    /// Root position in the global metric frame, meters.
    pub translation: Vector3<f64>,
}

impl BodyParams {
    /// Neutral parameters: zero pose and translation, `shape_dims` zero
    /// shape coefficients.
    pub fn zeros(shape_dims: usize) -> Self {
        Self {
            pose: DVector::zeros(POSE_DIM),
            shape: DVector::zeros(shape_dims),
            translation: Vector3::zeros(),
        }
    }

    pub fn validate(&self) -> Result<(), BodyModelError> {
        if self.pose.len() != POSE_DIM {
            return Err(BodyModelError::PoseDimMismatch {
                expected: POSE_DIM,
                got: self.pose.len(),
            });
        }
        let finite = self.pose.iter().all(|v| v.is_finite())
            && self.shape.iter().all(|v| v.is_finite())
            && self.translation.iter().all(|v| v.is_finite());
        if !finite {
            return Err(BodyModelError::NonFinite);
        }
        Ok(())
    }

    /// Axis-angle root orientation.
    pub fn root_orientation(&self) -> Vector3<f64> {
        Vector3::new(self.pose[0], self.pose[1], self.pose[2])
    }

    /// Packs `[pose | shape | translation]` into one flat vector.
    pub fn pack(&self) -> DVector<f64> {
        let b = self.shape.len();
        let mut v = DVector::zeros(POSE_DIM + b + 3);
        v.rows_mut(0, POSE_DIM).copy_from(&self.pose);
        v.rows_mut(POSE_DIM, b).copy_from(&self.shape);
        v.rows_mut(POSE_DIM + b, 3).copy_from(&self.translation);
        v
    }

    /// Inverse of [`BodyParams::pack`].
    pub fn unpack(v: &DVector<f64>, shape_dims: usize) -> Self {
        assert_eq!(v.len(), POSE_DIM + shape_dims + 3, "packed vector length");
        Self {
            pose: v.rows(0, POSE_DIM).into_owned(),
            shape: v.rows(POSE_DIM, shape_dims).into_owned(),
            translation: Vector3::new(
                v[POSE_DIM + shape_dims],
                v[POSE_DIM + shape_dims + 1],
                v[POSE_DIM + shape_dims + 2],
            ),
        }
    }
}

/// Flat parameter vector layout shared by the energies and the solver.
#[derive(Debug, Clone, Copy)]
pub struct ParamLayout {
    pub shape_dims: usize,
}

impl ParamLayout {
    pub fn len(&self) -> usize {
        POSE_DIM + self.shape_dims + 3
    }
    pub fn is_empty(&self) -> bool {
        false
    }
    pub fn pose(&self) -> std::ops::Range<usize> {
        0..POSE_DIM
    }
    pub fn shape(&self) -> std::ops::Range<usize> {
        POSE_DIM..POSE_DIM + self.shape_dims
    }
    pub fn translation(&self) -> std::ops::Range<usize> {
        POSE_DIM + self.shape_dims..POSE_DIM + self.shape_dims + 3
    }
}

/// Joint table after applying shape coefficients.
#[derive(Debug, Clone)]
pub struct ShapedSkeleton {
    pub joints: Vec<Vector3<f64>>,
    pub radii: Vec<f64>,
    /// True where the 1 mm radius floor was hit (derivative of that radius
    /// with respect to shape is zero there).
    pub radius_clamped: Vec<bool>,
}

/// Minimum capsule radius after shaping, meters.
pub const MIN_RADIUS: f64 = 1e-3;

/// Applies the linear shape space: joints and radii offset by the basis
/// tables, radii floored at 1 mm.
pub fn shape_skeleton(
    template: &SkeletonTemplate,
    shape: &DVector<f64>,
) -> Result<ShapedSkeleton, BodyModelError> {
    if shape.len() != template.shape_dims() {
        return Err(BodyModelError::ShapeDimMismatch {
            expected: template.shape_dims(),
            got: shape.len(),
        });
    }
    let mut joints = template.joints.clone();
    let mut radii = template.bone_radii.clone();
    for (b, coeff) in shape.iter().enumerate() {
        for (j, off) in template.shape_basis[b].iter().enumerate() {
            joints[j] += off * *coeff;
        }
        for (r, dr) in template.radii_basis[b].iter().enumerate() {
            radii[r] += dr * coeff;
        }
    }
    let mut radius_clamped = vec![false; radii.len()];
    for (r, clamped) in radii.iter_mut().zip(&mut radius_clamped) {
        if *r < MIN_RADIUS {
            *r = MIN_RADIUS;
            *clamped = true;
        }
    }
    Ok(ShapedSkeleton {
        joints,
        radii,
        radius_clamped,
    })
}

/// World-frame result of forward kinematics.
#[derive(Debug, Clone)]
pub struct PosedBody {
    /// World joint positions, meters.
    pub joint_positions: Vec<Vector3<f64>>,
    /// Capsule surface proxy points, `(NUM_JOINTS - 1) * samples_per_bone`.
    pub surface_points: Vec<Vector3<f64>>,
    /// Outward unit normals, one per surface point.
    pub surface_normals: Vec<Vector3<f64>>,
    /// The 18 annotation keypoints in world coordinates.
    pub keypoints3d: Vec<Vector3<f64>>,
}

/// One capsule surface sample in the rest skeleton: a position along the bone
/// axis plus a radial unit direction fixed from the neutral-shape bone frame.
#[derive(Debug, Clone)]
struct SampleSpec {
    bone: usize,
    frame_joint: usize,
    child_joint: usize,
    axis_fraction: f64,
    radial_dir: Vector3<f64>,
}

/// Precomputed per-template data for fast forward kinematics and exact
/// parameter Jacobians. Build once, pose many times.
pub struct FkContext {
    template: SkeletonTemplate,
    samples: Vec<SampleSpec>,
    /// Shape derivative of each sample's rest offset from its frame joint,
    /// excluding the radius part: `samples.len() x shape_dims`.
    sample_axis_dbeta: Vec<Vector3<f64>>,
}

impl FkContext {
    pub fn new(template: &SkeletonTemplate) -> Result<Self, BodyModelError> {
        template.validate()?;
        let spb = template.samples_per_bone;
        let nrings = spb.div_ceil(4);
        let mut samples = Vec::with_capacity(NUM_BONES * spb);
        for bone in 0..NUM_BONES {
            let child = template.bone_child(bone);
            let frame = template.bone_parent(bone);
            let axis = template.joints[child] - template.joints[frame];
            let axis_dir = if axis.norm() > 1e-12 {
                axis.normalize()
            } else {
                Vector3::y()
            };
            // Radial frame perpendicular to the neutral bone axis.
            let pick = if axis_dir.y.abs() < 0.9 {
                Vector3::y()
            } else {
                Vector3::x()
            };
            let u = (pick - axis_dir * pick.dot(&axis_dir)).normalize();
            let v = axis_dir.cross(&u);
            for i in 0..spb {
                let ring = i / 4;
                let slot = i % 4;
                let axis_fraction = (ring as f64 + 0.5) / nrings as f64;
                let phi = slot as f64 * std::f64::consts::FRAC_PI_2
                    + ring as f64 * std::f64::consts::FRAC_PI_8;
                samples.push(SampleSpec {
                    bone,
                    frame_joint: frame,
                    child_joint: child,
                    axis_fraction,
                    radial_dir: u * phi.cos() + v * phi.sin(),
                });
            }
        }
        let b_dims = template.shape_dims();
        let mut sample_axis_dbeta = Vec::with_capacity(samples.len() * b_dims);
        for s in &samples {
            for basis in template.shape_basis.iter() {
                let d = basis[s.child_joint] - basis[s.frame_joint];
                sample_axis_dbeta.push(d * s.axis_fraction);
            }
        }
        Ok(Self {
            template: template.clone(),
            samples,
            sample_axis_dbeta,
        })
    }

    pub fn template(&self) -> &SkeletonTemplate {
        &self.template
    }

    pub fn layout(&self) -> ParamLayout {
        ParamLayout {
            shape_dims: self.template.shape_dims(),
        }
    }

    pub fn surface_len(&self) -> usize {
        self.samples.len()
    }

    /// Forward kinematics with all Jacobian bookkeeping.
    pub fn pose_body(&self, params: &BodyParams) -> Result<FkBody<'_>, BodyModelError> {
        params.validate()?;
        let shaped = shape_skeleton(&self.template, &params.shape)?;
        let b_dims = self.template.shape_dims();

        let mut world_rot = vec![Matrix3::identity(); NUM_JOINTS];
        let mut world_pos = vec![Vector3::zeros(); NUM_JOINTS];
        let mut pose_mats = vec![[Matrix3::zeros(); 3]; NUM_JOINTS];
        let mut joint_shape_jac = vec![Vector3::zeros(); NUM_JOINTS * b_dims];

        for j in 0..NUM_JOINTS {
            let omega = Vector3::new(params.pose[3 * j], params.pose[3 * j + 1], params.pose[3 * j + 2]);
            let local = rodrigues(&omega);
            let derivs = rotation_derivatives(&omega);
            match self.template.parents[j] {
                None => {
                    world_rot[j] = local;
                    world_pos[j] = params.translation + shaped.joints[j];
                    for i in 0..3 {
                        pose_mats[j][i] = derivs[i] * local.transpose();
                    }
                    for b in 0..b_dims {
                        joint_shape_jac[j * b_dims + b] = self.template.shape_basis[b][j];
                    }
                }
                Some(p) => {
                    let parent_rot = world_rot[p];
                    world_rot[j] = parent_rot * local;
                    world_pos[j] = world_pos[p] + parent_rot * (shaped.joints[j] - shaped.joints[p]);
                    for i in 0..3 {
                        pose_mats[j][i] =
                            parent_rot * derivs[i] * local.transpose() * parent_rot.transpose();
                    }
                    for b in 0..b_dims {
                        let d = self.template.shape_basis[b][j] - self.template.shape_basis[b][p];
                        joint_shape_jac[j * b_dims + b] =
                            joint_shape_jac[p * b_dims + b] + parent_rot * d;
                    }
                }
            }
        }

        let mut surface_points = Vec::with_capacity(self.samples.len());
        let mut surface_normals = Vec::with_capacity(self.samples.len());
        for s in &self.samples {
            let rest_offset = (shaped.joints[s.child_joint] - shaped.joints[s.frame_joint])
                * s.axis_fraction
                + s.radial_dir * shaped.radii[s.bone];
            let rot = world_rot[s.frame_joint];
            surface_points.push(world_pos[s.frame_joint] + rot * rest_offset);
            surface_normals.push(rot * s.radial_dir);
        }

        let mut keypoints3d = Vec::with_capacity(NUM_KEYPOINTS);
        for a in &self.template.keypoint_map {
            let off = Vector3::new(a.offset[0], a.offset[1], a.offset[2]);
            keypoints3d.push(world_pos[a.joint] + world_rot[a.joint] * off);
        }

        Ok(FkBody {
            ctx: self,
            posed: PosedBody {
                joint_positions: world_pos.clone(),
                surface_points,
                surface_normals,
                keypoints3d,
            },
            world_rot,
            world_pos,
            pose_mats,
            joint_shape_jac,
            radius_clamped: shaped.radius_clamped,
            shape_dims: b_dims,
        })
    }
}

/// Forward kinematics result plus the data needed to push gradients from
/// world points back to the parameters.
pub struct FkBody<'a> {
    ctx: &'a FkContext,
    pub posed: PosedBody,
    world_rot: Vec<Matrix3<f64>>,
    world_pos: Vec<Vector3<f64>>,
    /// `pose_mats[j][i]` maps `(p - world_pos[j])` to `∂p/∂pose[3j+i]` for
    /// any world point `p` rigidly downstream of joint `j`.
    pose_mats: Vec<[Matrix3<f64>; 3]>,
    /// `∂world_pos[j]/∂shape[b]` at `[j * shape_dims + b]`.
    joint_shape_jac: Vec<Vector3<f64>>,
    radius_clamped: Vec<bool>,
    shape_dims: usize,
}

impl<'a> FkBody<'a> {
    pub fn keypoint(&self, k: usize) -> Vector3<f64> {
        self.posed.keypoints3d[k]
    }

    pub fn surface_point(&self, i: usize) -> Vector3<f64> {
        self.posed.surface_points[i]
    }

    pub fn world_rotation(&self, joint: usize) -> Matrix3<f64> {
        self.world_rot[joint]
    }

    /// Accumulates `coeff · ∂p/∂x` into `grad` for a world point `p` rigidly
    /// attached to `frame_joint`, where the point's rest offset has shape
    /// derivative `rest_dbeta(b)`.
    fn accumulate_point(
        &self,
        frame_joint: usize,
        point: &Vector3<f64>,
        rest_dbeta: impl Fn(usize) -> Vector3<f64>,
        coeff: &Vector3<f64>,
        grad: &mut DVector<f64>,
    ) {
        let layout = ParamLayout {
            shape_dims: self.shape_dims,
        };
        // Pose: walk the ancestor chain.
        let mut j = Some(frame_joint);
        while let Some(a) = j {
            let rel = point - self.world_pos[a];
            for i in 0..3 {
                grad[3 * a + i] += coeff.dot(&(self.pose_mats[a][i] * rel));
            }
            j = self.ctx.template.parents[a];
        }
        // Shape.
        let rot = self.world_rot[frame_joint];
        for b in 0..self.shape_dims {
            let d = self.joint_shape_jac[frame_joint * self.shape_dims + b] + rot * rest_dbeta(b);
            grad[POSE_DIM + b] += coeff.dot(&d);
        }
        // Translation: every world point moves one-for-one.
        let t = layout.translation();
        grad[t.start] += coeff.x;
        grad[t.start + 1] += coeff.y;
        grad[t.start + 2] += coeff.z;
    }

    /// Accumulates `coeff · ∂keypoint_k/∂params` into `grad`.
    pub fn accumulate_keypoint_gradient(
        &self,
        k: usize,
        coeff: &Vector3<f64>,
        grad: &mut DVector<f64>,
    ) {
        let a = &self.ctx.template.keypoint_map[k];
        let p = self.posed.keypoints3d[k];
        self.accumulate_point(a.joint, &p, |_| Vector3::zeros(), coeff, grad);
    }

    /// Accumulates `coeff · ∂surface_point_i/∂params` into `grad`.
    pub fn accumulate_surface_gradient(
        &self,
        i: usize,
        coeff: &Vector3<f64>,
        grad: &mut DVector<f64>,
    ) {
        let s = &self.ctx.samples[i];
        let p = self.posed.surface_points[i];
        let b_dims = self.shape_dims;
        let clamped = self.radius_clamped[s.bone];
        self.accumulate_point(
            s.frame_joint,
            &p,
            |b| {
                let mut d = self.ctx.sample_axis_dbeta[i * b_dims + b];
                if !clamped {
                    d += s.radial_dir * self.ctx.template.radii_basis[b][s.bone];
                }
                d
            },
            coeff,
            grad,
        );
    }
}

/// Plain forward kinematics: pose a template and return world-space joints,
/// surface proxy points, and keypoints.
pub fn forward_kinematics(
    template: &SkeletonTemplate,
    params: &BodyParams,
) -> Result<PosedBody, BodyModelError> {
    Ok(FkContext::new(template)?.pose_body(params)?.posed)
}

/// Extracts the 18 annotation keypoints from a posed body.
///
/// The keypoints are computed during forward kinematics; this accessor exists
/// so callers holding only a [`PosedBody`] can recover them with the template
/// that produced it.
pub fn keypoints_from_body(body: &PosedBody, template: &SkeletonTemplate) -> Vec<Vector3<f64>> {
    debug_assert_eq!(body.keypoints3d.len(), template.keypoint_map.len());
    body.keypoints3d.clone()
}

/// Builds the default gender-neutral template: SMPL-style 24-joint topology,
/// proportions from published adult anthropometric averages (≈1.70 m
/// stature), a 10-coefficient procedural shape basis, and the 18-keypoint
/// annotation mapping. The root (pelvis) sits at the origin so the global
/// translation equals the root world position.
pub fn default_template() -> SkeletonTemplate {
    let j = |x: f64, y: f64, z: f64| Vector3::new(x, y, z);
    // 0 pelvis, 1 lhip, 2 rhip, 3 spine1, 4 lknee, 5 rknee, 6 spine2,
    // 7 lankle, 8 rankle, 9 spine3, 10 lfoot, 11 rfoot, 12 neck, 13 lcollar,
    // 14 rcollar, 15 head, 16 lsho, 17 rsho, 18 lelb, 19 relb, 20 lwri,
    // 21 rwri, 22 lhand, 23 rhand. y up, x forward, z left.
    let joints = vec![
        j(0.0, 0.0, 0.0),
        j(0.0, -0.04, 0.09),
        j(0.0, -0.04, -0.09),
        j(0.0, 0.10, 0.0),
        j(0.0, -0.45, 0.10),
        j(0.0, -0.45, -0.10),
        j(0.0, 0.20, 0.0),
        j(0.0, -0.86, 0.11),
        j(0.0, -0.86, -0.11),
        j(0.0, 0.30, 0.0),
        j(0.12, -0.93, 0.11),
        j(0.12, -0.93, -0.11),
        j(0.0, 0.47, 0.0),
        j(0.0, 0.43, 0.06),
        j(0.0, 0.43, -0.06),
        j(0.0, 0.63, 0.0),
        j(0.0, 0.45, 0.18),
        j(0.0, 0.45, -0.18),
        j(0.0, 0.45, 0.46),
        j(0.0, 0.45, -0.46),
        j(0.0, 0.45, 0.72),
        j(0.0, 0.45, -0.72),
        j(0.0, 0.45, 0.81),
        j(0.0, 0.45, -0.81),
    ];
    let parents = vec![
        None,
        Some(0),
        Some(0),
        Some(0),
        Some(1),
        Some(2),
        Some(3),
        Some(4),
        Some(5),
        Some(6),
        Some(7),
        Some(8),
        Some(9),
        Some(9),
        Some(9),
        Some(12),
        Some(13),
        Some(14),
        Some(16),
        Some(17),
        Some(18),
        Some(19),
        Some(20),
        Some(21),
    ];
    // Bone b ends at joint b + 1.
    let bone_radii = vec![
        0.09, 0.09, 0.11, 0.07, 0.07, 0.11, 0.05, 0.05, 0.11, 0.035, 0.035, 0.055, 0.06, 0.06,
        0.09, 0.05, 0.05, 0.042, 0.042, 0.035, 0.035, 0.028, 0.028,
    ];

    let zero_j = vec![Vector3::zeros(); NUM_JOINTS];
    let zero_r = vec![0.0; NUM_BONES];
    let mut shape_basis = vec![zero_j; 10];
    let mut radii_basis = vec![zero_r; 10];

    // 0: stature — proportional growth of everything relative to the pelvis.
    for jt in 0..NUM_JOINTS {
        shape_basis[0][jt] = joints[jt] * 0.05;
    }
    for b in 0..NUM_BONES {
        radii_basis[0][b] = bone_radii[b] * 0.05;
    }
    // 1: leg length.
    for (jt, dy) in [
        (1, -0.005),
        (2, -0.005),
        (4, -0.03),
        (5, -0.03),
        (7, -0.06),
        (8, -0.06),
        (10, -0.06),
        (11, -0.06),
    ] {
        shape_basis[1][jt].y = dy;
    }
    // 2: torso length — everything riding on the spine moves up.
    for (jt, dy) in [(3usize, 0.01), (6, 0.02), (9, 0.03)] {
        shape_basis[2][jt].y = dy;
    }
    for jt in 12..NUM_JOINTS {
        shape_basis[2][jt].y = 0.04;
    }
    // 3: shoulder width.
    for (jt, dz) in [
        (13, 0.008),
        (16, 0.015),
        (18, 0.02),
        (20, 0.02),
        (22, 0.02),
    ] {
        shape_basis[3][jt].z = dz;
        shape_basis[3][jt + 1].z = -dz;
    }
    // 4: hip width.
    for (jt, dz) in [(1, 0.012), (4, 0.012), (7, 0.012), (10, 0.012)] {
        shape_basis[4][jt].z = dz;
        shape_basis[4][jt + 1].z = -dz;
    }
    // 5: arm length (arms extend along ±z in the rest pose).
    for (jt, dz) in [(18, 0.025), (20, 0.05), (22, 0.06)] {
        shape_basis[5][jt].z = dz;
        shape_basis[5][jt + 1].z = -dz;
    }
    // 6: build — radii only, heavier on the torso.
    for b in 0..NUM_BONES {
        radii_basis[6][b] = 0.008;
    }
    for b in [2usize, 5, 8, 11, 12, 13] {
        radii_basis[6][b] = 0.015;
    }
    // 7: head size.
    shape_basis[7][15].y = 0.01;
    radii_basis[7][14] = 0.012;
    // 8: torso depth.
    for jt in [3usize, 6, 9] {
        shape_basis[8][jt].x = 0.004;
    }
    for b in [2usize, 5, 8] {
        radii_basis[8][b] = 0.01;
    }
    // 9: limb thickness.
    for b in [3usize, 4, 6, 7, 9, 10, 15, 16, 17, 18, 19, 20, 21, 22] {
        radii_basis[9][b] = 0.006;
    }

    let kp = |joint: usize, offset: [f64; 3]| KeypointAttachment { joint, offset };
    let keypoint_map = vec![
        kp(15, [0.09, 0.06, 0.0]),    // nose
        kp(12, [0.0, 0.0, 0.0]),      // neck
        kp(17, [0.0, 0.0, 0.0]),      // rsho
        kp(19, [0.0, 0.0, 0.0]),      // relb
        kp(21, [0.0, 0.0, 0.0]),      // rwri
        kp(16, [0.0, 0.0, 0.0]),      // lsho
        kp(18, [0.0, 0.0, 0.0]),      // lelb
        kp(20, [0.0, 0.0, 0.0]),      // lwri
        kp(0, [0.0, 0.0, 0.0]),       // hip
        kp(5, [0.0, 0.0, 0.0]),       // rknee
        kp(8, [0.0, 0.0, 0.0]),       // rankl
        kp(4, [0.0, 0.0, 0.0]),       // lknee
        kp(7, [0.0, 0.0, 0.0]),       // lankl
        kp(15, [0.08, 0.09, -0.033]), // reye
        kp(15, [0.08, 0.09, 0.033]),  // leye
        kp(15, [0.0, 0.08, -0.07]),   // rear
        kp(15, [0.0, 0.08, 0.07]),    // lear
        kp(15, [0.03, 0.10, 0.0]),    // head
    ];

    let t = SkeletonTemplate {
        parents,
        joints,
        shape_basis,
        bone_radii,
        radii_basis,
        keypoint_map,
        forward_axis: Vector3::x(),
        samples_per_bone: 16,
    };
    t.validate().expect("default template is valid");
    t
}

// ---------------------------------------------------------------------------
// Template file format (TOML).

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TemplateFile {
    /// Parent joint index per joint; -1 marks the root.
    parents: Vec<i64>,
    joints: Vec<[f64; 3]>,
    shape_basis: Vec<Vec<[f64; 3]>>,
    bone_radii: Vec<f64>,
    radii_basis: Vec<Vec<f64>>,
    keypoints: Vec<KeypointAttachment>,
    forward_axis: [f64; 3],
    samples_per_bone: usize,
}

impl SkeletonTemplate {
    /// Serializes the template to its TOML file format. All numbers use the
    /// shortest round-trip representation, so load(save(t)) == t bit-exactly.
    pub fn to_toml_string(&self) -> String {
        let file = TemplateFile {
            parents: self
                .parents
                .iter()
                .map(|p| p.map(|v| v as i64).unwrap_or(-1))
                .collect(),
            joints: self.joints.iter().map(|v| [v.x, v.y, v.z]).collect(),
            shape_basis: self
                .shape_basis
                .iter()
                .map(|t| t.iter().map(|v| [v.x, v.y, v.z]).collect())
                .collect(),
            bone_radii: self.bone_radii.clone(),
            radii_basis: self.radii_basis.clone(),
            keypoints: self.keypoint_map.clone(),
            forward_axis: [self.forward_axis.x, self.forward_axis.y, self.forward_axis.z],
            samples_per_bone: self.samples_per_bone,
        };
        toml::to_string(&file).expect("template serializes")
    }

    pub fn from_toml_str(s: &str) -> Result<Self, BodyModelError> {
        let file: TemplateFile = toml::from_str(s)
            .map_err(|e| BodyModelError::InvalidTemplate(format!("parse error: {e}")))?;
        let parents = file
            .parents
            .iter()
            .map(|p| if *p < 0 { None } else { Some(*p as usize) })
            .collect();
        let v3 = |a: &[f64; 3]| Vector3::new(a[0], a[1], a[2]);
        let t = SkeletonTemplate {
            parents,
            joints: file.joints.iter().map(v3).collect(),
            shape_basis: file
                .shape_basis
                .iter()
                .map(|t| t.iter().map(v3).collect())
                .collect(),
            bone_radii: file.bone_radii,
            radii_basis: file.radii_basis,
            keypoint_map: file.keypoints,
            forward_axis: v3(&file.forward_axis),
            samples_per_bone: file.samples_per_bone,
        };
        t.validate()?;
        Ok(t)
    }
}
