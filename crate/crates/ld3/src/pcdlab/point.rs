//! Point records and the ASCII PCD file format: one `x y z intensity` line
//! per point, `#` comments, whitespace-delimited decimal.

use std::path::Path;

use super::PcdError;

/// One LiDAR return: 3-D position plus reflection intensity in [0, 255].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointRecord {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub intensity: f64,
}

impl PointRecord {
    pub fn new(x: f64, y: f64, z: f64, intensity: f64) -> Self {
        Self { x, y, z, intensity }
    }

    pub fn xy_distance_to(&self, x: f64, y: f64) -> f64 {
        ((self.x - x).powi(2) + (self.y - y).powi(2)).sqrt()
    }
}

pub fn write_pcd(path: impl AsRef<Path>, points: &[PointRecord]) -> Result<(), PcdError> {
    let mut out = String::with_capacity(points.len() * 24);
    out.push_str("# x y z intensity\n");
    for p in points {
        // Display round-trips f64 exactly, keeping the format bit-exact
        out.push_str(&format!("{} {} {} {}\n", p.x, p.y, p.z, p.intensity));
    }
    std::fs::write(path, out)?;
    Ok(())
}

pub fn read_pcd(path: impl AsRef<Path>) -> Result<Vec<PointRecord>, PcdError> {
    parse_pcd(&std::fs::read_to_string(path)?)
}

pub fn parse_pcd(text: &str) -> Result<Vec<PointRecord>, PcdError> {
    let mut points = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let fields: Vec<&str> = content.split_whitespace().collect();
        if fields.len() != 4 {
            return Err(PcdError::Parse {
                line,
                msg: format!("expected 4 fields, got {}", fields.len()),
            });
        }
        let mut vals = [0.0f64; 4];
        for (i, f) in fields.iter().enumerate() {
            vals[i] = f.parse().map_err(|e| PcdError::Parse {
                line,
                msg: format!("field {}: {e}", i + 1),
            })?;
        }
        if !vals.iter().all(|v| v.is_finite()) {
            return Err(PcdError::Parse {
                line,
                msg: "non-finite coordinate".into(),
            });
        }
        points.push(PointRecord::new(vals[0], vals[1], vals[2], vals[3]));
    }
    Ok(points)
}
