//! Point cloud files: `LCPC0001` magic followed by little-endian
//! `f32 x, f32 y, f32 z` records, or a CSV fallback (`x,y,z` per line).

use nalgebra::Point3;

use crate::error::{Error, Result};

pub const CLOUD_MAGIC: &[u8; 8] = b"LCPC0001";

pub fn encode_point_cloud(points: &[Point3<f64>]) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + 12 * points.len());
    out.extend_from_slice(CLOUD_MAGIC);
    for p in points {
        for v in [p.x, p.y, p.z] {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    out
}

/// Decodes either format; binary is recognized by its magic header.
pub fn decode_point_cloud(bytes: &[u8]) -> Result<Vec<Point3<f64>>> {
    if let Some(body) = bytes.strip_prefix(CLOUD_MAGIC.as_slice()) {
        if body.len() % 12 != 0 {
            return Err(Error::Validation(format!(
                "point cloud body of {} bytes is not a whole number of records",
                body.len()
            )));
        }
        return Ok(body
            .chunks_exact(12)
            .map(|r| {
                let f = |i: usize| f32::from_le_bytes([r[i], r[i + 1], r[i + 2], r[i + 3]]) as f64;
                Point3::new(f(0), f(4), f(8))
            })
            .collect());
    }
    let text = std::str::from_utf8(bytes)
        .map_err(|_| Error::Validation("point cloud is neither binary nor UTF-8 CSV".into()))?;
    let mut points = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with('x') {
            continue;
        }
        let vals: Vec<f64> = line
            .split(',')
            .map(|s| s.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::parse(i + 1, "invalid number"))?;
        if vals.len() != 3 {
            return Err(Error::parse(i + 1, "expected x,y,z"));
        }
        points.push(Point3::new(vals[0], vals[1], vals[2]));
    }
    Ok(points)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binary_and_csv() {
        let pts = vec![Point3::new(1.5, -2.25, 0.125), Point3::new(40.0, 3.0, -0.5)];
        assert_eq!(decode_point_cloud(&encode_point_cloud(&pts)).unwrap(), pts);
        let csv = "x,y,z\n1.5,-2.25,0.125\n40,3,-0.5\n";
        assert_eq!(decode_point_cloud(csv.as_bytes()).unwrap(), pts);
        assert!(decode_point_cloud(b"LCPC0001abc").is_err());
    }
}
