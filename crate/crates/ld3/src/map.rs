//! Semantic map: lanes as centerline polylines with per-lane width and
//! intersection flags.
//!
//! The map answers four pose queries: signed deviation to the closest lane
//! centerline, the width of the closest lane, the closest centerline point
//! with interpolated heading, and whether the pose sits in an intersection.
//! Sign convention throughout: positive = left of the centerline when facing
//! along the lane heading.

use std::fmt::Write as _;
use std::path::Path;

use crate::angle::{interp_angle, mean_angle, wrap_angle};

/// Poses farther than this from every centerline are treated as off-map.
pub const MAX_QUERY_DISTANCE: f64 = 10.0;

#[derive(Debug, thiserror::Error)]
pub enum MapError {
    #[error("no lane within {MAX_QUERY_DISTANCE} m of query pose")]
    NoLaneFound,
    #[error("map parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("invalid map: {0}")]
    Invalid(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// A planar pose in the map frame. Heading is CCW from +x, wrapped to (-pi, pi].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose2D {
    pub x: f64,
    pub y: f64,
    pub heading: f64,
}

impl Pose2D {
    pub fn new(x: f64, y: f64, heading: f64) -> Self {
        Self {
            x,
            y,
            heading: wrap_angle(heading),
        }
    }
}

/// A point on a lane centerline together with the lane tangent direction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LanePoint {
    pub x: f64,
    pub y: f64,
    pub heading: f64,
}

/// One lane: an ordered centerline polyline, a constant width, and an
/// intersection flag.
#[derive(Debug, Clone, PartialEq)]
pub struct Lane {
    pub id: String,
    centerline: Vec<(f64, f64)>,
    /// Heading at each centerline vertex; interior vertices take the circular
    /// mean of the adjacent segment directions.
    vertex_headings: Vec<f64>,
    pub width: f64,
    pub is_intersection: bool,
}

impl Lane {
    pub fn new(
        id: impl Into<String>,
        centerline: Vec<(f64, f64)>,
        width: f64,
        is_intersection: bool,
    ) -> Result<Self, MapError> {
        let id = id.into();
        if centerline.len() < 2 {
            return Err(MapError::Invalid(format!(
                "lane {id}: centerline needs at least 2 points"
            )));
        }
        if !(width > 0.0) {
            return Err(MapError::Invalid(format!(
                "lane {id}: width must be positive, got {width}"
            )));
        }
        for w in centerline.windows(2) {
            if w[0] == w[1] {
                return Err(MapError::Invalid(format!(
                    "lane {id}: consecutive duplicate centerline point {:?}",
                    w[0]
                )));
            }
        }
        let seg_headings: Vec<f64> = centerline
            .windows(2)
            .map(|w| (w[1].1 - w[0].1).atan2(w[1].0 - w[0].0))
            .collect();
        let n = centerline.len();
        let mut vertex_headings = Vec::with_capacity(n);
        vertex_headings.push(seg_headings[0]);
        for i in 1..n - 1 {
            vertex_headings.push(mean_angle(seg_headings[i - 1], seg_headings[i]));
        }
        vertex_headings.push(seg_headings[n - 2]);
        Ok(Self {
            id,
            centerline,
            vertex_headings,
            width,
            is_intersection,
        })
    }

    pub fn centerline(&self) -> &[(f64, f64)] {
        &self.centerline
    }

    /// Closest point on this lane's centerline. Returns the projected point,
    /// the squared distance, and the index of the segment it lies on.
    /// Ties between segments go to the earlier segment.
    fn project(&self, x: f64, y: f64) -> (LanePoint, f64, usize) {
        let mut best: Option<(LanePoint, f64, usize)> = None;
        for (i, w) in self.centerline.windows(2).enumerate() {
            let (ax, ay) = w[0];
            let (bx, by) = w[1];
            let (dx, dy) = (bx - ax, by - ay);
            let len2 = dx * dx + dy * dy;
            let t = (((x - ax) * dx + (y - ay) * dy) / len2).clamp(0.0, 1.0);
            let (px, py) = (ax + t * dx, ay + t * dy);
            let d2 = (x - px) * (x - px) + (y - py) * (y - py);
            if best.as_ref().is_none_or(|(_, bd2, _)| d2 < *bd2) {
                let heading = interp_angle(self.vertex_headings[i], self.vertex_headings[i + 1], t);
                best = Some((
                    LanePoint {
                        x: px,
                        y: py,
                        heading,
                    },
                    d2,
                    i,
                ));
            }
        }
        best.expect("lane has at least one segment")
    }
}

/// The semantic map: a non-empty ordered list of lanes. Immutable after
/// construction, so it can be shared freely across concurrent runs.
#[derive(Debug, Clone, PartialEq)]
pub struct SemanticMap {
    lanes: Vec<Lane>,
}

impl SemanticMap {
    pub fn new(lanes: Vec<Lane>) -> Result<Self, MapError> {
        if lanes.is_empty() {
            return Err(MapError::Invalid("map has no lanes".into()));
        }
        Ok(Self { lanes })
    }

    /// One straight lane along +x from the origin.
    pub fn straight(length: f64, width: f64) -> Result<Self, MapError> {
        if !(length > 0.0) {
            return Err(MapError::Invalid(format!(
                "straight map length must be positive, got {length}"
            )));
        }
        Self::new(vec![Lane::new(
            "straight",
            vec![(0.0, 0.0), (length, 0.0)],
            width,
            false,
        )?])
    }

    /// One left-turning arc lane starting at the origin heading +x.
    /// Sampled at roughly 1 m spacing so heading interpolation stays smooth.
    pub fn arc(radius: f64, arc_length: f64, width: f64) -> Result<Self, MapError> {
        if !(radius > 0.0) || !(arc_length > 0.0) {
            return Err(MapError::Invalid(
                "arc map needs positive radius and arc length".into(),
            ));
        }
        let n = (arc_length.ceil() as usize).max(8);
        let pts = (0..=n)
            .map(|i| {
                let s = arc_length * i as f64 / n as f64;
                let a = s / radius;
                (radius * a.sin(), radius * (1.0 - a.cos()))
            })
            .collect();
        Self::new(vec![Lane::new("arc", pts, width, false)?])
    }

    pub fn lanes(&self) -> &[Lane] {
        &self.lanes
    }

    /// Closest lane to the pose with its projection. Ties across lanes go to
    /// the earlier lane in the list. No distance cap.
    fn closest(&self, pose: Pose2D) -> (&Lane, LanePoint, f64) {
        let mut best: Option<(&Lane, LanePoint, f64)> = None;
        for lane in &self.lanes {
            let (pt, d2, _) = lane.project(pose.x, pose.y);
            if best.as_ref().is_none_or(|(_, _, bd2)| d2 < *bd2) {
                best = Some((lane, pt, d2));
            }
        }
        best.expect("map is non-empty")
    }

    fn closest_bounded(&self, pose: Pose2D) -> Result<(&Lane, LanePoint), MapError> {
        let (lane, pt, d2) = self.closest(pose);
        if d2 > MAX_QUERY_DISTANCE * MAX_QUERY_DISTANCE {
            return Err(MapError::NoLaneFound);
        }
        Ok((lane, pt))
    }

    /// Signed lateral deviation from the pose to the closest lane centerline.
    /// Positive = left of the centerline.
    pub fn lane_dev(&self, pose: Pose2D) -> Result<f64, MapError> {
        let (_, pt) = self.closest_bounded(pose)?;
        Ok(signed_dev(pose, pt))
    }

    /// Width of the closest lane.
    pub fn lane_width(&self, pose: Pose2D) -> Result<f64, MapError> {
        let (lane, _) = self.closest_bounded(pose)?;
        Ok(lane.width)
    }

    /// Perpendicular projection of the pose onto the closest lane centerline,
    /// with heading interpolated between the bracketing vertices. Poses beyond
    /// the polyline ends clamp to the end point and its segment heading.
    pub fn lane_point(&self, pose: Pose2D) -> Result<LanePoint, MapError> {
        let (_, pt) = self.closest_bounded(pose)?;
        Ok(pt)
    }

    /// Whether the closest lane is flagged as an intersection.
    pub fn is_intersection(&self, pose: Pose2D) -> Result<bool, MapError> {
        let (lane, _) = self.closest_bounded(pose)?;
        Ok(lane.is_intersection)
    }

    /// Like [`lane_dev`](Self::lane_dev) but without the query-distance cap.
    /// Instrumentation only: run metrics need the true deviation even after a
    /// vehicle has been driven far off the mapped corridor.
    pub fn lane_dev_unbounded(&self, pose: Pose2D) -> f64 {
        let (_, pt, _) = self.closest(pose);
        signed_dev(pose, pt)
    }

    /// Serializes to the line-oriented map text format.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for lane in &self.lanes {
            let _ = writeln!(
                out,
                "lane {} {} {}",
                lane.id, lane.width, lane.is_intersection
            );
            for (x, y) in &lane.centerline {
                let _ = writeln!(out, "pt {x} {y}");
            }
        }
        out
    }

    /// Parses the line-oriented map format: `lane <id> <width> <is_intersection>`
    /// headers each followed by `pt <x> <y>` lines; `#` starts a comment.
    pub fn from_text(text: &str) -> Result<Self, MapError> {
        // (id, width, is_intersection, points, header line number)
        type PendingLane = (String, f64, bool, Vec<(f64, f64)>, usize);
        let mut lanes: Vec<Lane> = Vec::new();
        let mut cur: Option<PendingLane> = None;

        fn flush(cur: &mut Option<PendingLane>, lanes: &mut Vec<Lane>) -> Result<(), MapError> {
            if let Some((id, width, inter, pts, line)) = cur.take() {
                let lane = Lane::new(id, pts, width, inter).map_err(|e| MapError::Parse {
                    line,
                    msg: e.to_string(),
                })?;
                lanes.push(lane);
            }
            Ok(())
        }

        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let mut fields = content.split_whitespace();
            let tag = fields.next().unwrap();
            let parse_err = |msg: String| MapError::Parse { line, msg };
            match tag {
                "lane" => {
                    flush(&mut cur, &mut lanes)?;
                    let id = fields
                        .next()
                        .ok_or_else(|| parse_err("lane: missing id".into()))?;
                    let width: f64 = fields
                        .next()
                        .ok_or_else(|| parse_err("lane: missing width".into()))?
                        .parse()
                        .map_err(|e| parse_err(format!("lane width: {e}")))?;
                    let inter = match fields.next() {
                        Some("true") | Some("1") => true,
                        Some("false") | Some("0") => false,
                        Some(other) => {
                            return Err(parse_err(format!(
                                "lane intersection flag must be true/false/1/0, got {other}"
                            )))
                        }
                        None => return Err(parse_err("lane: missing intersection flag".into())),
                    };
                    if !(width > 0.0) {
                        return Err(parse_err(format!(
                            "lane width must be positive, got {width}"
                        )));
                    }
                    cur = Some((id.to_string(), width, inter, Vec::new(), line));
                }
                "pt" => {
                    let (_, _, _, pts, _) = cur
                        .as_mut()
                        .ok_or_else(|| parse_err("pt before any lane header".into()))?;
                    let x: f64 = fields
                        .next()
                        .ok_or_else(|| parse_err("pt: missing x".into()))?
                        .parse()
                        .map_err(|e| parse_err(format!("pt x: {e}")))?;
                    let y: f64 = fields
                        .next()
                        .ok_or_else(|| parse_err("pt: missing y".into()))?
                        .parse()
                        .map_err(|e| parse_err(format!("pt y: {e}")))?;
                    pts.push((x, y));
                }
                other => return Err(parse_err(format!("unknown directive {other}"))),
            }
        }
        flush(&mut cur, &mut lanes)?;
        Self::new(lanes)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, MapError> {
        let text = std::fs::read_to_string(path)?;
        Self::from_text(&text)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), MapError> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }
}

/// Signed deviation of `pose` from its projection `pt`: the full Euclidean
/// distance, signed by which side of the lane heading the pose falls on.
fn signed_dev(pose: Pose2D, pt: LanePoint) -> f64 {
    let (dx, dy) = (pose.x - pt.x, pose.y - pt.y);
    let dist = (dx * dx + dy * dy).sqrt();
    // left normal of the heading is (-sin h, cos h)
    let side = -pt.heading.sin() * dx + pt.heading.cos() * dy;
    if side < 0.0 {
        -dist
    } else {
        dist
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn straight() -> SemanticMap {
        SemanticMap::straight(500.0, 3.5).unwrap()
    }

    #[test]
    fn dev_on_centerline_is_zero() {
        let m = straight();
        assert_eq!(m.lane_dev(Pose2D::new(10.0, 0.0, 0.0)).unwrap(), 0.0);
    }

    #[test]
    fn dev_sign_left_positive_right_negative() {
        let m = straight();
        assert!((m.lane_dev(Pose2D::new(10.0, 0.5, 0.0)).unwrap() - 0.5).abs() < 1e-12);
        assert!((m.lane_dev(Pose2D::new(10.0, -1.0, 0.0)).unwrap() + 1.0).abs() < 1e-12);
    }

    #[test]
    fn width_of_closest_lane() {
        let m = straight();
        assert_eq!(m.lane_width(Pose2D::new(10.0, 0.2, 0.0)).unwrap(), 3.5);

        let two = SemanticMap::new(vec![
            Lane::new("a", vec![(0.0, 0.0), (100.0, 0.0)], 3.5, false).unwrap(),
            Lane::new("b", vec![(0.0, 4.0), (100.0, 4.0)], 4.0, false).unwrap(),
        ])
        .unwrap();
        assert_eq!(two.lane_width(Pose2D::new(50.0, 3.0, 0.0)).unwrap(), 4.0);
    }

    #[test]
    fn far_pose_is_off_map() {
        let m = straight();
        assert!(matches!(
            m.lane_width(Pose2D::new(10.0, 1000.0, 0.0)),
            Err(MapError::NoLaneFound)
        ));
    }

    #[test]
    fn lane_point_is_perpendicular_projection() {
        let m = straight();
        let p = m.lane_point(Pose2D::new(10.0, 0.5, 0.0)).unwrap();
        assert!((p.x - 10.0).abs() < 1e-12);
        assert!(p.y.abs() < 1e-12);
        assert_eq!(p.heading, 0.0);
    }

    #[test]
    fn lane_point_clamps_beyond_ends() {
        let m = straight();
        let p = m.lane_point(Pose2D::new(505.0, 1.0, 0.0)).unwrap();
        assert_eq!((p.x, p.y), (500.0, 0.0));
        assert_eq!(p.heading, 0.0);
    }

    #[test]
    fn l_shape_tie_goes_to_earlier_segment() {
        // L along +x then +y; pose (9, 1) is 1 m from both segments.
        let lane = Lane::new("l", vec![(0.0, 0.0), (10.0, 0.0), (10.0, 10.0)], 3.5, false).unwrap();
        let m = SemanticMap::new(vec![lane]).unwrap();
        let p = m.lane_point(Pose2D::new(9.0, 1.0, 0.0)).unwrap();

        // Independent oracle: brute-force nearest point over a dense sampling
        // of the polyline, ties resolved to the earliest sample.
        let mut best = (f64::INFINITY, (0.0f64, 0.0f64));
        let polyline = [((0.0, 0.0), (10.0, 0.0)), ((10.0, 0.0), (10.0, 10.0))];
        for (a, b) in polyline {
            let n = 200_000;
            for i in 0..=n {
                let t = i as f64 / n as f64;
                let (sx, sy) = (a.0 + t * (b.0 - a.0), a.1 + t * (b.1 - a.1));
                let d2 = (9.0 - sx) * (9.0 - sx) + (1.0 - sy) * (1.0 - sy);
                if d2 < best.0 {
                    best = (d2, (sx, sy));
                }
            }
        }
        assert!(
            (p.x - best.1 .0).abs() < 1e-4,
            "{:?} vs {:?}",
            (p.x, p.y),
            best.1
        );
        assert!((p.y - best.1 .1).abs() < 1e-4);
        // earlier-segment tie-break: projection lands on the +x segment
        assert!((p.x - 9.0).abs() < 1e-12 && p.y.abs() < 1e-12);
    }

    #[test]
    fn intersection_flag_and_tie_break() {
        let m = SemanticMap::new(vec![
            Lane::new("inter", vec![(0.0, 1.0), (10.0, 1.0)], 3.5, true).unwrap(),
            Lane::new("plain", vec![(0.0, -1.0), (10.0, -1.0)], 3.5, false).unwrap(),
        ])
        .unwrap();
        assert!(m.is_intersection(Pose2D::new(5.0, 1.0, 0.0)).unwrap());
        assert!(!m.is_intersection(Pose2D::new(5.0, -1.0, 0.0)).unwrap());
        // equidistant pose: earlier lane in the list wins
        assert!(m.is_intersection(Pose2D::new(5.0, 0.0, 0.0)).unwrap());
    }

    #[test]
    fn builder_and_text_round_trip() {
        let m = straight();
        assert_eq!(m.lanes().len(), 1);
        assert_eq!(m.lanes()[0].width, 3.5);
        let again = SemanticMap::from_text(&m.to_text()).unwrap();
        assert_eq!(m, again);

        let arc = SemanticMap::arc(200.0, 300.0, 3.5).unwrap();
        let again = SemanticMap::from_text(&arc.to_text()).unwrap();
        assert_eq!(arc, again);
    }

    #[test]
    fn parse_rejects_zero_width_with_line_number() {
        let text = "# test map\nlane a 0.0 false\npt 0 0\npt 1 0\n";
        match SemanticMap::from_text(text) {
            Err(MapError::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn parse_rejects_garbage() {
        assert!(matches!(
            SemanticMap::from_text("road a 3.5 false\n"),
            Err(MapError::Parse { line: 1, .. })
        ));
        assert!(matches!(
            SemanticMap::from_text("pt 1 2\n"),
            Err(MapError::Parse { line: 1, .. })
        ));
        // lane with a single point fails at the header line
        assert!(matches!(
            SemanticMap::from_text("lane a 3.5 false\npt 0 0\n"),
            Err(MapError::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn dev_magnitude_matches_projection_distance() {
        let m = SemanticMap::arc(80.0, 120.0, 3.5).unwrap();
        for i in 0..200 {
            let s = i as f64 * 0.6;
            let a = s / 80.0;
            // points offset laterally from the arc
            let off = ((i % 7) as f64 - 3.0) * 0.4;
            // arc point plus `off` along the left normal (-sin a, cos a)
            let pose = Pose2D::new(
                80.0 * a.sin() - off * a.sin(),
                80.0 * (1.0 - a.cos()) + off * a.cos(),
                0.0,
            );
            let dev = m.lane_dev(pose).unwrap();
            let pt = m.lane_point(pose).unwrap();
            let dist = ((pose.x - pt.x).powi(2) + (pose.y - pt.y).powi(2)).sqrt();
            assert!((dev.abs() - dist).abs() < 1e-9);
            // re-querying from the projection itself gives ~0 deviation
            let back = m.lane_dev(Pose2D::new(pt.x, pt.y, pt.heading)).unwrap();
            assert!(back.abs() < 1e-9, "back = {back}");
        }
    }

    #[test]
    fn mirror_pose_negates_dev() {
        let m = straight();
        for i in 0..50 {
            let y = (i as f64 - 25.0) * 0.1;
            let a = m.lane_dev(Pose2D::new(20.0, y, 0.0)).unwrap();
            let b = m.lane_dev(Pose2D::new(20.0, -y, 0.0)).unwrap();
            assert!((a + b).abs() < 1e-12);
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            /// |lane_dev| equals the Euclidean distance to the projected
            /// point, and re-querying from the projection gives ~zero.
            #[test]
            fn dev_magnitude_is_projection_distance(
                x in 1.0f64..299.0,
                y in -9.0f64..9.0,
                radius in 50.0f64..500.0,
            ) {
                let m = SemanticMap::arc(radius, 300.0, 3.5).unwrap();
                let pose = Pose2D::new(x, y, 0.0);
                if let (Ok(dev), Ok(pt)) = (m.lane_dev(pose), m.lane_point(pose)) {
                    prop_assert_eq!(dev, m.lane_dev_unbounded(pose));
                    let dist = ((pose.x - pt.x).powi(2) + (pose.y - pt.y).powi(2)).sqrt();
                    prop_assert!((dev.abs() - dist).abs() < 1e-9);
                    let back = m.lane_dev(Pose2D::new(pt.x, pt.y, pt.heading)).unwrap();
                    prop_assert!(back.abs() < 1e-9);
                }
            }

            /// On a straight lane the signed deviation is exactly the
            /// cross-track coordinate, and mirroring negates it.
            #[test]
            fn straight_lane_dev_is_cross_track(
                x in 0.0f64..500.0,
                y in -9.9f64..9.9,
            ) {
                let m = straight();
                let dev = m.lane_dev(Pose2D::new(x, y, 0.3)).unwrap();
                prop_assert!((dev - y).abs() < 1e-9);
                let mirrored = m.lane_dev(Pose2D::new(x, -y, 0.3)).unwrap();
                prop_assert!((dev + mirrored).abs() < 1e-9);
            }
        }
    }
}
