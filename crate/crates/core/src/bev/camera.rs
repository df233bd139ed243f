//! Pinhole camera rigidly mounted on the vehicle.
//!
//! Camera axes follow the usual vision convention (x right, y down, z along
//! the optical axis). The extrinsic maps camera coordinates to the vehicle
//! frame (x forward, y left, z up).

use nalgebra::{Matrix3, Point3, Vector3};

use crate::error::{Error, Result};
use crate::pose::Pose;

#[derive(Debug, Clone, PartialEq)]
pub struct CameraModel {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    /// Camera-to-vehicle rotation.
    pub rotation: Matrix3<f64>,
    /// Camera center in the vehicle frame (meters).
    pub translation: Vector3<f64>,
}

impl CameraModel {
    pub fn new(
        fx: f64,
        fy: f64,
        cx: f64,
        cy: f64,
        rotation: Matrix3<f64>,
        translation: Vector3<f64>,
    ) -> Result<Self> {
        let cam = CameraModel {
            fx,
            fy,
            cx,
            cy,
            rotation,
            translation,
        };
        cam.validate()?;
        Ok(cam)
    }

    /// Forward-looking camera at `height` meters above the vehicle origin,
    /// optical axis along vehicle +x.
    pub fn forward_facing(fx: f64, fy: f64, cx: f64, cy: f64, height: f64) -> Self {
        #[rustfmt::skip]
        let rotation = Matrix3::new(
            0.0,  0.0, 1.0,
            -1.0, 0.0, 0.0,
            0.0, -1.0, 0.0,
        );
        CameraModel {
            fx,
            fy,
            cx,
            cy,
            rotation,
            translation: Vector3::new(0.0, 0.0, height),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.fx > 0.0 && self.fy > 0.0) || !self.fx.is_finite() || !self.fy.is_finite() {
            return Err(Error::Validation("focal lengths must be positive".into()));
        }
        if !(self.cx.is_finite() && self.cy.is_finite()) {
            return Err(Error::Validation("principal point must be finite".into()));
        }
        let gram = self.rotation.transpose() * self.rotation;
        if (gram - Matrix3::identity()).abs().max() > 1e-9 || (self.rotation.determinant() - 1.0).abs() > 1e-9 {
            return Err(Error::Validation("extrinsic rotation is not orthonormal".into()));
        }
        if !self.translation.iter().all(|v| v.is_finite()) {
            return Err(Error::Validation("extrinsic translation must be finite".into()));
        }
        Ok(())
    }

    pub fn height(&self) -> f64 {
        self.translation.z
    }

    /// Projects a map-frame point to continuous pixel coordinates; `None`
    /// when the point is not in front of the camera.
    pub fn map_to_pixel(&self, pose: &Pose, p: &Point3<f64>) -> Option<(f64, f64)> {
        let v = pose.map_to_vehicle(p);
        let c = self.rotation.transpose() * (v.coords - self.translation);
        if c.z <= 1e-6 {
            return None;
        }
        Some((self.fx * c.x / c.z + self.cx, self.fy * c.y / c.z + self.cy))
    }

    /// Ray through continuous pixel coordinates, in the map frame.
    pub fn pixel_ray(&self, pose: &Pose, u: f64, v: f64) -> (Point3<f64>, Vector3<f64>) {
        let dir_cam = Vector3::new((u - self.cx) / self.fx, (v - self.cy) / self.fy, 1.0);
        let rot = pose.rotation();
        let origin = pose.vehicle_to_map(&Point3::from(self.translation));
        let dir = rot * (self.rotation * dir_cam);
        (origin, dir.normalize())
    }

    /// Plain-text form: `fx=`, `fy=`, `cx=`, `cy=`, and `extrinsic=` with the
    /// 3x4 camera-to-vehicle matrix as 12 row-major values.
    pub fn parse(text: &str) -> Result<Self> {
        let (mut fx, mut fy, mut cx, mut cy, mut ext) = (None, None, None, None, None);
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::parse(line_no, "expected key=value"))?;
            let nums: Vec<f64> = value
                .split(|c: char| c == ',' || c.is_whitespace())
                .filter(|s| !s.is_empty())
                .map(|s| s.parse::<f64>().ok().filter(|v| v.is_finite()))
                .collect::<Option<Vec<_>>>()
                .ok_or_else(|| Error::parse(line_no, format!("invalid number in {key}")))?;
            let scalar = || {
                if nums.len() == 1 {
                    Ok(nums[0])
                } else {
                    Err(Error::parse(line_no, format!("{key} expects one value")))
                }
            };
            match key.trim() {
                "fx" => fx = Some(scalar()?),
                "fy" => fy = Some(scalar()?),
                "cx" => cx = Some(scalar()?),
                "cy" => cy = Some(scalar()?),
                "extrinsic" => {
                    if nums.len() != 12 {
                        return Err(Error::parse(line_no, "extrinsic expects 12 values"));
                    }
                    ext = Some(nums);
                }
                _ => {}
            }
        }
        let missing = |k: &str| Error::Validation(format!("camera file is missing {k}"));
        let ext = ext.ok_or_else(|| missing("extrinsic"))?;
        let rotation = Matrix3::new(
            ext[0], ext[1], ext[2], ext[4], ext[5], ext[6], ext[8], ext[9], ext[10],
        );
        let translation = Vector3::new(ext[3], ext[7], ext[11]);
        CameraModel::new(
            fx.ok_or_else(|| missing("fx"))?,
            fy.ok_or_else(|| missing("fy"))?,
            cx.ok_or_else(|| missing("cx"))?,
            cy.ok_or_else(|| missing("cy"))?,
            rotation,
            translation,
        )
    }

    pub fn to_text(&self) -> String {
        let r = &self.rotation;
        let t = &self.translation;
        format!(
            "fx={}\nfy={}\ncx={}\ncy={}\nextrinsic={} {} {} {} {} {} {} {} {} {} {} {}\n",
            self.fx,
            self.fy,
            self.cx,
            self.cy,
            r[(0, 0)],
            r[(0, 1)],
            r[(0, 2)],
            t.x,
            r[(1, 0)],
            r[(1, 1)],
            r[(1, 2)],
            t.y,
            r[(2, 0)],
            r[(2, 1)],
            r[(2, 2)],
            t.z
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn point_on_optical_axis_ground() {
        let cam = CameraModel::forward_facing(500.0, 480.0, 320.0, 240.0, 1.5);
        let pose = Pose::planar(0.0, 0.0, 0.0, 0.0);
        let (u, v) = cam.map_to_pixel(&pose, &Point3::new(10.0, 0.0, 0.0)).unwrap();
        assert!((u - 320.0).abs() < 1e-9);
        assert!((v - (240.0 + 480.0 * 1.5 / 10.0)).abs() < 1e-9);
        assert!(cam.map_to_pixel(&pose, &Point3::new(-5.0, 0.0, 0.0)).is_none());
    }

    #[test]
    fn ray_hits_projected_point() {
        let cam = CameraModel::forward_facing(400.0, 400.0, 160.0, 120.0, 1.5);
        let pose = Pose {
            pitch: 0.02,
            roll: -0.01,
            z: 0.3,
            ..Pose::planar(0.0, 5.0, -2.0, 0.7)
        };
        let target = Point3::new(15.0, 6.0, 0.1);
        let (u, v) = cam.map_to_pixel(&pose, &target).unwrap();
        let (o, d) = cam.pixel_ray(&pose, u, v);
        let t = (target - o).dot(&d);
        assert!(((o + d * t) - target).norm() < 1e-9);
    }

    #[test]
    fn text_round_trip_and_validation() {
        let cam = CameraModel::forward_facing(500.0, 500.0, 320.0, 240.0, 1.5);
        assert_eq!(CameraModel::parse(&cam.to_text()).unwrap(), cam);
        let bad = "fx=-1\nfy=1\ncx=0\ncy=0\nextrinsic=1 0 0 0 0 1 0 0 0 0 1 0\n";
        assert!(CameraModel::parse(bad).is_err());
        let skew = "fx=1\nfy=1\ncx=0\ncy=0\nextrinsic=1 0.1 0 0 0 1 0 0 0 0 1 0\n";
        assert!(CameraModel::parse(skew).is_err());
    }
}
