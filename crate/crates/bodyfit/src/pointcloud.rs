//! LiDAR point handling: instance labeling through image-space masks,
//! centroid trajectories, heading estimation, and nearest-neighbor queries
//! against model surface points.

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use nalgebra::{Vector2, Vector3};
use thiserror::Error;

use crate::stereo::{Side, StereoRig};

#[derive(Debug, Error)]
pub enum CloudError {
    #[error("cloud is empty")]
    Empty,
    #[error("trajectory needs at least 2 samples, got {0}")]
    TooShort(usize),
    #[error("instance is stationary (displacement below threshold)")]
    Stationary,
    #[error("surface point set is empty")]
    EmptySurface,
    #[error("point file error: {0}")]
    File(String),
}

/// LiDAR points assigned to one tracked instance, global frame, meters.
#[derive(Debug, Clone, Default)]
pub struct LabeledCloud {
    pub points: Vec<Vector3<f64>>,
    pub instance_id: u64,
    pub timestamp: f64,
}

impl LabeledCloud {
    pub fn len(&self) -> usize {
        self.points.len()
    }
    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Time-ordered centroid track of one instance.
#[derive(Debug, Clone, Default)]
pub struct Trajectory {
    /// `(timestamp, centroid)` pairs with strictly increasing timestamps.
    pub samples: Vec<(f64, Vector3<f64>)>,
}

impl Trajectory {
    pub fn from_clouds<'a>(clouds: impl IntoIterator<Item = &'a LabeledCloud>) -> Self {
        let mut samples: Vec<(f64, Vector3<f64>)> = clouds
            .into_iter()
            .filter(|c| !c.is_empty())
            .map(|c| (c.timestamp, centroid(c).expect("non-empty cloud")))
            .collect();
        samples.sort_by(|a, b| a.0.total_cmp(&b.0));
        Trajectory { samples }
    }
}

/// A simple polygon in image coordinates.
pub type Polygon = Vec<Vector2<f64>>;

/// Point-in-polygon by ray crossing; boundary points count as inside.
pub fn point_in_polygon(p: &Vector2<f64>, poly: &Polygon) -> bool {
    if poly.len() < 3 {
        return false;
    }
    let mut inside = false;
    let n = poly.len();
    for i in 0..n {
        let a = poly[i];
        let b = poly[(i + 1) % n];
        // On-segment test keeps boundary pixels.
        let ab = b - a;
        let ap = p - a;
        let cross = ab.x * ap.y - ab.y * ap.x;
        if cross.abs() < 1e-12
            && ap.dot(&ab) >= -1e-12
            && ap.dot(&ab) <= ab.norm_squared() + 1e-12
        {
            return true;
        }
        if (a.y > p.y) != (b.y > p.y) {
            let x = a.x + (p.y - a.y) / (b.y - a.y) * (b.x - a.x);
            if x > p.x {
                inside = !inside;
            }
        }
    }
    inside
}

/// Assigns raw LiDAR points to instances through their left-image masks.
///
/// A point belongs to an instance iff its left-camera projection lies inside
/// that instance's mask. Points inside several masks go to the instance with
/// the nearer provisional centroid (computed from unambiguous points; ties
/// and missing centroids fall back to the lowest instance id). Points behind
/// the camera or in no mask are dropped. The result holds one entry per
/// input instance, keyed by instance id.
pub fn label_points(
    cloud: &[Vector3<f64>],
    masks: &BTreeMap<u64, Polygon>,
    rig: &StereoRig,
    timestamp: f64,
) -> BTreeMap<u64, LabeledCloud> {
    let mut hits: Vec<(usize, Vec<u64>)> = Vec::new();
    for (i, p) in cloud.iter().enumerate() {
        let (px, in_front) = rig.project(p, Side::Left);
        if !in_front {
            continue;
        }
        let ids: Vec<u64> = masks
            .iter()
            .filter(|(_, poly)| point_in_polygon(&px, poly))
            .map(|(id, _)| *id)
            .collect();
        if !ids.is_empty() {
            hits.push((i, ids));
        }
    }

    let mut out: BTreeMap<u64, LabeledCloud> = masks
        .keys()
        .map(|id| {
            (
                *id,
                LabeledCloud {
                    points: Vec::new(),
                    instance_id: *id,
                    timestamp,
                },
            )
        })
        .collect();

    // Pass 1: unambiguous points define provisional centroids.
    let mut sums: BTreeMap<u64, (Vector3<f64>, usize)> = BTreeMap::new();
    for (i, ids) in &hits {
        if ids.len() == 1 {
            let e = sums.entry(ids[0]).or_insert((Vector3::zeros(), 0));
            e.0 += cloud[*i];
            e.1 += 1;
        }
    }
    let centroids: BTreeMap<u64, Vector3<f64>> = sums
        .into_iter()
        .map(|(id, (s, n))| (id, s / n as f64))
        .collect();

    // Pass 2: assign.
    for (i, ids) in hits {
        let id = if ids.len() == 1 {
            ids[0]
        } else {
            ids.iter()
                .copied()
                .min_by(|a, b| {
                    let da = centroids
                        .get(a)
                        .map(|c| (cloud[i] - c).norm_squared())
                        .unwrap_or(f64::INFINITY);
                    let db = centroids
                        .get(b)
                        .map(|c| (cloud[i] - c).norm_squared())
                        .unwrap_or(f64::INFINITY);
                    da.total_cmp(&db).then(a.cmp(b))
                })
                .expect("non-empty id list")
        };
        out.get_mut(&id).expect("mask id").points.push(cloud[i]);
    }
    out
}

/// Arithmetic mean of the cloud's points.
pub fn centroid(cloud: &LabeledCloud) -> Result<Vector3<f64>, CloudError> {
    if cloud.is_empty() {
        return Err(CloudError::Empty);
    }
    let sum: Vector3<f64> = cloud.points.iter().sum();
    Ok(sum / cloud.points.len() as f64)
}

/// Displacement below which an instance counts as stationary, meters.
pub const STATIONARY_THRESHOLD: f64 = 0.05;
/// Centroid smoothing window, frames.
const SMOOTH_WINDOW: usize = 3;

/// Horizontal unit heading of an instance at `frame_index`.
///
/// Centroids are smoothed over a 3-frame window; the direction comes from a
/// centered difference (one-sided at the ends), projected to the horizontal
/// plane and normalized. The direction is never negated. Returns
/// [`CloudError::Stationary`] when the relevant displacement is under
/// 0.05 m, so callers can fall back to single-frame initialization.
pub fn heading_direction(traj: &Trajectory, frame_index: usize) -> Result<Vector3<f64>, CloudError> {
    let n = traj.samples.len();
    if n < 2 {
        return Err(CloudError::TooShort(n));
    }
    debug_assert!(
        traj.samples.windows(2).all(|w| w[0].0 < w[1].0),
        "timestamps strictly increasing"
    );
    let idx = frame_index.min(n - 1);
    // Window shrinks symmetrically at the ends so adjacent smoothed samples
    // stay distinct and the local mean position is unbiased.
    let smoothed = |i: usize| -> Vector3<f64> {
        let half = (SMOOTH_WINDOW / 2).min(i).min(n - 1 - i);
        let mut s = Vector3::zeros();
        for k in i - half..=i + half {
            s += traj.samples[k].1;
        }
        s / (2 * half + 1) as f64
    };
    let (a, b) = if idx == 0 {
        (smoothed(0), smoothed(1))
    } else if idx == n - 1 {
        (smoothed(n - 2), smoothed(n - 1))
    } else {
        (smoothed(idx - 1), smoothed(idx + 1))
    };
    let mut d = b - a;
    d.y = 0.0;
    if d.norm() < STATIONARY_THRESHOLD {
        return Err(CloudError::Stationary);
    }
    Ok(d.normalize())
}

/// Exact nearest neighbor among `surface` points: index and squared
/// distance. Linear scan; equidistant candidates resolve to the lowest index.
pub fn nearest_model_point(
    query: &Vector3<f64>,
    surface: &[Vector3<f64>],
) -> Result<(usize, f64), CloudError> {
    if surface.is_empty() {
        return Err(CloudError::EmptySurface);
    }
    let mut best = 0usize;
    let mut best_d = f64::INFINITY;
    for (i, p) in surface.iter().enumerate() {
        let d = (query - p).norm_squared();
        if d < best_d {
            best_d = d;
            best = i;
        }
    }
    Ok((best, best_d))
}

// ---------------------------------------------------------------------------
// Point file IO: CSV (x,y,z per row) and ASCII PLY.

/// Reads points from a `.csv` (x,y,z per row, meters, optional header) or an
/// ASCII `.ply` file, chosen by extension.
pub fn read_points(path: &Path) -> Result<Vec<Vector3<f64>>, CloudError> {
    let file = std::fs::File::open(path)
        .map_err(|e| CloudError::File(format!("{}: {e}", path.display())))?;
    let reader = BufReader::new(file);
    match path.extension().and_then(|e| e.to_str()) {
        Some("ply") => read_ply(reader, path),
        _ => read_csv(reader, path),
    }
}

fn read_csv(reader: impl BufRead, path: &Path) -> Result<Vec<Vector3<f64>>, CloudError> {
    let mut points = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| CloudError::File(format!("{}: {e}", path.display())))?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let fields: Vec<&str> = trimmed.split(',').map(str::trim).collect();
        if lineno == 0 && fields.iter().any(|f| f.parse::<f64>().is_err()) {
            continue; // header row
        }
        if fields.len() != 3 {
            return Err(CloudError::File(format!(
                "{}:{}: expected 3 fields, got {}",
                path.display(),
                lineno + 1,
                fields.len()
            )));
        }
        let mut v = [0.0; 3];
        for (k, f) in fields.iter().enumerate() {
            v[k] = f.parse::<f64>().map_err(|e| {
                CloudError::File(format!("{}:{}: {e}", path.display(), lineno + 1))
            })?;
        }
        if !v.iter().all(|x| x.is_finite()) {
            return Err(CloudError::File(format!(
                "{}:{}: non-finite coordinate",
                path.display(),
                lineno + 1
            )));
        }
        points.push(Vector3::new(v[0], v[1], v[2]));
    }
    Ok(points)
}

fn read_ply(reader: impl BufRead, path: &Path) -> Result<Vec<Vector3<f64>>, CloudError> {
    let err = |m: String| CloudError::File(format!("{}: {m}", path.display()));
    let mut lines = reader.lines();
    let mut count: Option<usize> = None;
    let mut props = 0usize;
    match lines.next() {
        Some(Ok(l)) if l.trim() == "ply" => {}
        _ => return Err(err("not a PLY file".into())),
    }
    for line in lines.by_ref() {
        let line = line.map_err(|e| err(e.to_string()))?;
        let line = line.trim();
        if line == "end_header" {
            break;
        }
        if let Some(rest) = line.strip_prefix("format ") {
            if !rest.starts_with("ascii") {
                return Err(err("only ascii PLY is supported".into()));
            }
        } else if let Some(rest) = line.strip_prefix("element vertex ") {
            count = Some(
                rest.trim()
                    .parse()
                    .map_err(|e| err(format!("bad vertex count: {e}")))?,
            );
        } else if line.starts_with("property") {
            props += 1;
        }
    }
    let count = count.ok_or_else(|| err("missing element vertex".into()))?;
    if props < 3 {
        return Err(err("need at least x, y, z properties".into()));
    }
    let mut points = Vec::with_capacity(count);
    for line in lines.take(count) {
        let line = line.map_err(|e| err(e.to_string()))?;
        let f: Vec<f64> = line
            .split_whitespace()
            .map(|t| t.parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|e| err(format!("bad vertex line: {e}")))?;
        if f.len() < 3 {
            return Err(err("vertex line has fewer than 3 values".into()));
        }
        points.push(Vector3::new(f[0], f[1], f[2]));
    }
    if points.len() != count {
        return Err(err(format!(
            "expected {count} vertices, found {}",
            points.len()
        )));
    }
    Ok(points)
}

/// Writes points as CSV, one `x,y,z` row per point at full precision.
pub fn write_points_csv(path: &Path, points: &[Vector3<f64>]) -> Result<(), CloudError> {
    let mut buf = String::new();
    for p in points {
        buf.push_str(&format!("{},{},{}\n", p.x, p.y, p.z));
    }
    let mut f = std::fs::File::create(path)
        .map_err(|e| CloudError::File(format!("{}: {e}", path.display())))?;
    f.write_all(buf.as_bytes())
        .map_err(|e| CloudError::File(format!("{}: {e}", path.display())))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stereo::forward_facing_rig;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rig() -> StereoRig {
        forward_facing_rig(1000.0, 0.5, (2000, 1500), Vector3::zeros())
    }

    fn square_mask(center: Vector2<f64>, half: f64) -> Polygon {
        vec![
            Vector2::new(center.x - half, center.y - half),
            Vector2::new(center.x + half, center.y - half),
            Vector2::new(center.x + half, center.y + half),
            Vector2::new(center.x - half, center.y + half),
        ]
    }

    #[test]
    fn single_point_single_mask() {
        let r = rig();
        let p = Vector3::new(20.0, 0.0, 0.0);
        let (px, _) = r.project(&p, Side::Left);
        let mut masks = BTreeMap::new();
        masks.insert(7u64, square_mask(px, 50.0));
        let out = label_points(&[p], &masks, &r, 0.0);
        assert_eq!(out[&7].points.len(), 1);
    }

    #[test]
    fn behind_camera_dropped() {
        let r = rig();
        let mut masks = BTreeMap::new();
        masks.insert(1u64, square_mask(Vector2::new(1000.0, 750.0), 1000.0));
        let out = label_points(&[Vector3::new(-5.0, 0.0, 0.0)], &masks, &r, 0.0);
        assert!(out[&1].points.is_empty());
    }

    #[test]
    fn overlap_resolved_by_centroid() {
        let r = rig();
        // Instance A near 20 m, instance B near 25 m; both masks cover the
        // ambiguous point's projection.
        let a_pts = [Vector3::new(20.0, 0.0, -0.5), Vector3::new(20.0, 0.2, -0.6)];
        let b_pts = [Vector3::new(25.0, 0.0, 0.8), Vector3::new(25.0, 0.2, 0.9)];
        let ambiguous = Vector3::new(20.1, 0.1, 0.0);

        let mut masks = BTreeMap::new();
        // Mask A covers its own points plus the ambiguous one.
        let (pa, _) = r.project(&a_pts[0], Side::Left);
        let (pb, _) = r.project(&b_pts[0], Side::Left);
        let (pq, _) = r.project(&ambiguous, Side::Left);
        let mut mask_a = square_mask(pa, 60.0);
        mask_a.extend(square_mask(pq, 30.0)); // not simple; build a hull-ish box instead
        mask_a = square_mask((pa + pq) / 2.0, (pa - pq).norm() / 2.0 + 40.0);
        let mask_b = square_mask((pb + pq) / 2.0, (pb - pq).norm() / 2.0 + 40.0);
        masks.insert(1u64, mask_a);
        masks.insert(2u64, mask_b);

        let cloud: Vec<Vector3<f64>> = a_pts.iter().chain(&b_pts).chain([&ambiguous]).copied().collect();
        let out = label_points(&cloud, &masks, &r, 0.0);
        // Brute force over both assignments: ambiguous point is nearer A's
        // provisional centroid (20 m) than B's (25 m).
        assert!(out[&1].points.iter().any(|p| (p - ambiguous).norm() < 1e-12));
        assert!(!out[&2].points.iter().any(|p| (p - ambiguous).norm() < 1e-12));
        // Partition: no point appears twice.
        assert_eq!(out[&1].points.len() + out[&2].points.len(), cloud.len());
    }

    #[test]
    fn centroid_examples() {
        let c = LabeledCloud {
            points: vec![Vector3::zeros(), Vector3::new(2.0, 0.0, 0.0)],
            instance_id: 0,
            timestamp: 0.0,
        };
        assert_eq!(centroid(&c).unwrap(), Vector3::new(1.0, 0.0, 0.0));
        let single = LabeledCloud {
            points: vec![Vector3::new(3.0, -1.0, 2.0)],
            instance_id: 0,
            timestamp: 0.0,
        };
        assert_eq!(centroid(&single).unwrap(), Vector3::new(3.0, -1.0, 2.0));
        assert!(matches!(
            centroid(&LabeledCloud::default()),
            Err(CloudError::Empty)
        ));
    }

    #[test]
    fn centroid_matches_summation_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let points: Vec<Vector3<f64>> = (0..100)
            .map(|_| {
                Vector3::new(
                    rng.gen_range(-10.0..10.0),
                    rng.gen_range(-10.0..10.0),
                    rng.gen_range(-10.0..10.0),
                )
            })
            .collect();
        let mut oracle = Vector3::zeros();
        for p in &points {
            oracle += p;
        }
        oracle /= points.len() as f64;
        let c = centroid(&LabeledCloud {
            points,
            instance_id: 0,
            timestamp: 0.0,
        })
        .unwrap();
        assert!((c - oracle).norm() <= 1e-12);
    }

    #[test]
    fn heading_straight_line() {
        let traj = Trajectory {
            samples: vec![
                (0.0, Vector3::new(0.0, 0.0, 10.0)),
                (0.1, Vector3::new(1.0, 0.0, 10.0)),
            ],
        };
        let d = heading_direction(&traj, 0).unwrap();
        assert_relative_eq!(d, Vector3::x(), epsilon = 1e-12);
    }

    #[test]
    fn heading_stationary() {
        let traj = Trajectory {
            samples: vec![
                (0.0, Vector3::new(1.0, 0.0, 10.0)),
                (0.1, Vector3::new(1.0, 0.0, 10.0)),
            ],
        };
        assert!(matches!(
            heading_direction(&traj, 0),
            Err(CloudError::Stationary)
        ));
    }

    #[test]
    fn heading_tracks_quarter_circle_tangent() {
        // Walk a quarter circle of radius 5 m; tangents must stay within 10
        // degrees of the analytic tangent at each of 10 samples.
        let n = 10;
        let radius = 5.0;
        let samples: Vec<(f64, Vector3<f64>)> = (0..n)
            .map(|i| {
                let a = std::f64::consts::FRAC_PI_2 * i as f64 / (n - 1) as f64;
                (
                    i as f64 * 0.1,
                    Vector3::new(radius * a.cos(), 0.0, radius * a.sin()),
                )
            })
            .collect();
        let traj = Trajectory { samples };
        for i in 0..n {
            let a = std::f64::consts::FRAC_PI_2 * i as f64 / (n - 1) as f64;
            let tangent = Vector3::new(-a.sin(), 0.0, a.cos());
            let d = heading_direction(&traj, i).unwrap();
            let angle = d.dot(&tangent).clamp(-1.0, 1.0).acos();
            assert!(
                angle < 10.0_f64.to_radians(),
                "sample {i}: {} deg off tangent",
                angle.to_degrees()
            );
        }
    }

    #[test]
    fn heading_is_horizontal_unit() {
        let traj = Trajectory {
            samples: vec![
                (0.0, Vector3::new(0.0, 0.3, 0.0)),
                (0.1, Vector3::new(0.7, 0.8, 0.7)),
            ],
        };
        let d = heading_direction(&traj, 1).unwrap();
        assert_relative_eq!(d.norm(), 1.0, epsilon = 1e-12);
        assert_eq!(d.y, 0.0);
    }

    #[test]
    fn nearest_point_examples() {
        let surface = vec![
            Vector3::new(0.0, 0.0, 0.0),
            Vector3::new(1.0, 0.0, 0.0),
            Vector3::new(0.0, 1.0, 0.0),
        ];
        let (i, d) = nearest_model_point(&surface[1], &surface).unwrap();
        assert_eq!((i, d), (1, 0.0));
        // Equidistant: lowest index wins.
        let (i, _) = nearest_model_point(&Vector3::new(0.5, 0.5, 0.0), &[
            Vector3::new(0.0, 0.5, 0.0),
            Vector3::new(1.0, 0.5, 0.0),
        ])
        .unwrap();
        assert_eq!(i, 0);
        assert!(matches!(
            nearest_model_point(&Vector3::zeros(), &[]),
            Err(CloudError::EmptySurface)
        ));
    }

    #[test]
    fn nearest_matches_linear_scan_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let surface: Vec<Vector3<f64>> = (0..1000)
            .map(|_| {
                Vector3::new(
                    rng.gen_range(-1.0..1.0),
                    rng.gen_range(-1.0..1.0),
                    rng.gen_range(-1.0..1.0),
                )
            })
            .collect();
        for _ in 0..50 {
            let q = Vector3::new(
                rng.gen_range(-1.5..1.5),
                rng.gen_range(-1.5..1.5),
                rng.gen_range(-1.5..1.5),
            );
            let (i, d) = nearest_model_point(&q, &surface).unwrap();
            let mut oi = 0;
            let mut od = f64::INFINITY;
            for (k, p) in surface.iter().enumerate() {
                let dk = (q - p).norm_squared();
                if dk < od {
                    od = dk;
                    oi = k;
                }
            }
            assert_eq!(i, oi);
            assert_eq!(d, od);
        }
    }

    #[test]
    fn csv_roundtrip_and_ply() {
        let dir = tempfile::tempdir().unwrap();
        let pts = vec![
            Vector3::new(1.5, -2.25, 20.125),
            Vector3::new(0.1, 0.2, 0.3),
        ];
        let csv = dir.path().join("c.csv");
        write_points_csv(&csv, &pts).unwrap();
        let back = read_points(&csv).unwrap();
        assert_eq!(back.len(), 2);
        assert_eq!(back[0], pts[0]);

        let ply = dir.path().join("c.ply");
        std::fs::write(
            &ply,
            "ply\nformat ascii 1.0\nelement vertex 2\nproperty float x\nproperty float y\nproperty float z\nend_header\n1.5 -2.25 20.125\n0.1 0.2 0.3\n",
        )
        .unwrap();
        let back = read_points(&ply).unwrap();
        assert_eq!(back[0], pts[0]);
        assert_eq!(back[1], pts[1]);
    }
}
