//! Vehicle poses in the map frame and the pose CSV format
//! (`timestamp,x,y,z,yaw,pitch,roll`, radians).

use nalgebra::{Point3, Rotation3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Point2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub timestamp: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub yaw: f64,
    pub pitch: f64,
    pub roll: f64,
}

impl Pose {
    pub fn planar(timestamp: f64, x: f64, y: f64, yaw: f64) -> Self {
        Pose {
            timestamp,
            x,
            y,
            z: 0.0,
            yaw,
            pitch: 0.0,
            roll: 0.0,
        }
    }

    pub fn position(&self) -> Point2 {
        Point2::new(self.x, self.y)
    }

    pub fn translation(&self) -> Vector3<f64> {
        Vector3::new(self.x, self.y, self.z)
    }

    /// Vehicle-to-map rotation, `Rz(yaw) * Ry(pitch) * Rx(roll)`.
    pub fn rotation(&self) -> Rotation3<f64> {
        Rotation3::from_euler_angles(self.roll, self.pitch, self.yaw)
    }

    pub fn vehicle_to_map(&self, p: &Point3<f64>) -> Point3<f64> {
        self.rotation() * p + self.translation()
    }

    pub fn map_to_vehicle(&self, p: &Point3<f64>) -> Point3<f64> {
        self.rotation().inverse() * (p - self.translation())
    }

    pub fn is_finite(&self) -> bool {
        [self.timestamp, self.x, self.y, self.z, self.yaw, self.pitch, self.roll]
            .iter()
            .all(|v| v.is_finite())
    }
}

/// Parses a pose CSV. A header line is allowed; blank lines and `#` comments
/// are skipped. Timestamps must be strictly increasing.
pub fn parse_pose_csv(text: &str) -> Result<Vec<Pose>> {
    let mut poses: Vec<Pose> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if line.starts_with("timestamp") {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 7 {
            return Err(Error::parse(
                line_no,
                format!("expected 7 fields, found {}", fields.len()),
            ));
        }
        let mut v = [0.0f64; 7];
        for (slot, f) in v.iter_mut().zip(&fields) {
            *slot = f
                .parse()
                .map_err(|_| Error::parse(line_no, format!("invalid number {f:?}")))?;
            if !slot.is_finite() {
                return Err(Error::parse(line_no, "non-finite value"));
            }
        }
        let pose = Pose {
            timestamp: v[0],
            x: v[1],
            y: v[2],
            z: v[3],
            yaw: v[4],
            pitch: v[5],
            roll: v[6],
        };
        if let Some(prev) = poses.last() {
            if pose.timestamp <= prev.timestamp {
                return Err(Error::parse(line_no, "timestamps must be strictly increasing"));
            }
        }
        poses.push(pose);
    }
    Ok(poses)
}

pub fn write_pose_csv(poses: &[Pose]) -> String {
    let mut out = String::from("timestamp,x,y,z,yaw,pitch,roll\n");
    for p in poses {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            p.timestamp, p.x, p.y, p.z, p.yaw, p.pitch, p.roll
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rotation_is_zyx() {
        let pose = Pose {
            yaw: std::f64::consts::FRAC_PI_2,
            ..Pose::planar(0.0, 1.0, 2.0, 0.0)
        };
        let p = pose.vehicle_to_map(&Point3::new(1.0, 0.0, 0.0));
        assert!((p.x - 1.0).abs() < 1e-12 && (p.y - 3.0).abs() < 1e-12);
        let back = pose.map_to_vehicle(&p);
        assert!((back.x - 1.0).abs() < 1e-12 && back.y.abs() < 1e-12);
    }

    #[test]
    fn csv_rejects_non_increasing_timestamps() {
        let text = "timestamp,x,y,z,yaw,pitch,roll\n0,0,0,0,0,0,0\n0,1,0,0,0,0,0\n";
        assert!(matches!(parse_pose_csv(text), Err(Error::Parse { line: 3, .. })));
    }

    #[test]
    fn csv_round_trip() {
        let poses = vec![Pose::planar(0.0, 1.5, -2.0, 0.3), Pose::planar(0.1, 2.5, -2.0, 0.3)];
        assert_eq!(parse_pose_csv(&write_pose_csv(&poses)).unwrap(), poses);
    }
}
