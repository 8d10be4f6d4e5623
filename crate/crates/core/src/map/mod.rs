//! Fixed urban map: a four-way intersection at (60, 60) and a T-junction at
//! (100, 60), with sidewalks, crosswalks and the pedestrian navigation graph.
//!
//! All coordinates are meters in a 120 x 120 m square with the origin at the
//! south-west corner. Roads are two-lane (2 x 4 m), sidewalks are 3 m wide and
//! crosswalks are 4 m wide and span the full road width.

mod nav;

pub use nav::{
    bellman_ford_costs, build_nav_graph, dijkstra_path, path_cost, NavGraph, NavNode, NodeKind,
    RouteTable,
};

use crate::geometry::{Rect, Vec2};
use serde::{Deserialize, Serialize};

/// Frozen layout tag; bump whenever a coordinate below changes.
pub const MAP_VERSION: &str = "urban-4way-tee-v2";
pub const MAP_SIZE: f64 = 120.0;
pub const MAP_HALF_EXTENT: f64 = 60.0;
pub const ROAD_WIDTH: f64 = 8.0;
pub const LANE_WIDTH: f64 = 4.0;
pub const SIDEWALK_WIDTH: f64 = 3.0;
pub const CROSSWALK_WIDTH: f64 = 4.0;
/// Tolerance band around roads the vehicle may occupy.
pub const ROAD_MARGIN: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Axis {
    /// Traffic runs along x.
    Horizontal,
    /// Traffic runs along y.
    Vertical,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Road {
    pub rect: Rect,
    pub axis: Axis,
}

impl Road {
    /// Coordinates of the two lane centerlines across the road.
    pub fn lane_centers(&self) -> [f64; 2] {
        match self.axis {
            Axis::Horizontal => [
                self.rect.min.y + 0.5 * LANE_WIDTH,
                self.rect.max.y - 0.5 * LANE_WIDTH,
            ],
            Axis::Vertical => [
                self.rect.min.x + 0.5 * LANE_WIDTH,
                self.rect.max.x - 0.5 * LANE_WIDTH,
            ],
        }
    }

    /// Lateral offset of `p` from the nearer lane centerline.
    pub fn lane_offset(&self, p: Vec2) -> f64 {
        let across = match self.axis {
            Axis::Horizontal => p.y,
            Axis::Vertical => p.x,
        };
        let [a, b] = self.lane_centers();
        (across - a).abs().min((across - b).abs())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Crosswalk {
    pub id: usize,
    pub rect: Rect,
    /// Index of the road this crosswalk spans.
    pub road: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SurfaceType {
    Road,
    Sidewalk,
    Crosswalk,
    /// Outside the map or on no walkable/drivable surface.
    OffMap,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapGeometry {
    pub version: String,
    pub bounds: Rect,
    pub roads: Vec<Road>,
    pub sidewalks: Vec<Rect>,
    pub crosswalks: Vec<Crosswalk>,
}

const ROADS: [(f64, f64, f64, f64, Axis); 3] = [
    // Main east-west road.
    (0.0, 56.0, 120.0, 64.0, Axis::Horizontal),
    // North-south road forming the four-way intersection.
    (56.0, 0.0, 64.0, 120.0, Axis::Vertical),
    // Northern branch forming the T-junction.
    (96.0, 64.0, 104.0, 120.0, Axis::Vertical),
];

const SIDEWALKS: [(f64, f64, f64, f64); 20] = [
    // south of the main road
    (0.0, 53.0, 28.0, 56.0),
    (28.0, 53.0, 56.0, 56.0),
    (64.0, 53.0, 92.0, 56.0),
    (92.0, 53.0, 120.0, 56.0),
    // north of the main road
    (0.0, 64.0, 28.0, 67.0),
    (28.0, 64.0, 56.0, 67.0),
    (64.0, 64.0, 96.0, 67.0),
    (104.0, 64.0, 120.0, 67.0),
    // west of the north-south road
    (53.0, 0.0, 56.0, 28.0),
    (53.0, 28.0, 56.0, 56.0),
    (53.0, 64.0, 56.0, 92.0),
    (53.0, 92.0, 56.0, 120.0),
    // east of the north-south road
    (64.0, 0.0, 67.0, 28.0),
    (64.0, 28.0, 67.0, 56.0),
    (64.0, 64.0, 67.0, 92.0),
    (64.0, 92.0, 67.0, 120.0),
    // either side of the northern branch
    (93.0, 64.0, 96.0, 92.0),
    (93.0, 92.0, 96.0, 120.0),
    (104.0, 64.0, 107.0, 92.0),
    (104.0, 92.0, 107.0, 120.0),
];

const CROSSWALKS: [(f64, f64, f64, f64, usize); 6] = [
    (45.0, 56.0, 49.0, 64.0, 0),
    (71.0, 56.0, 75.0, 64.0, 0),
    (56.0, 47.0, 64.0, 51.0, 1),
    (56.0, 69.0, 64.0, 73.0, 1),
    (96.0, 70.0, 104.0, 74.0, 2),
    (110.0, 56.0, 114.0, 64.0, 0),
];

/// Builds the single fixed map. Pure: every call returns the same value.
pub fn build_map() -> MapGeometry {
    MapGeometry {
        version: MAP_VERSION.to_string(),
        bounds: Rect::new(0.0, 0.0, MAP_SIZE, MAP_SIZE),
        roads: ROADS
            .iter()
            .map(|&(x0, y0, x1, y1, axis)| Road {
                rect: Rect::new(x0, y0, x1, y1),
                axis,
            })
            .collect(),
        sidewalks: SIDEWALKS
            .iter()
            .map(|&(x0, y0, x1, y1)| Rect::new(x0, y0, x1, y1))
            .collect(),
        crosswalks: CROSSWALKS
            .iter()
            .enumerate()
            .map(|(id, &(x0, y0, x1, y1, road))| Crosswalk {
                id,
                rect: Rect::new(x0, y0, x1, y1),
                road,
            })
            .collect(),
    }
}

impl MapGeometry {
    /// Total classification with precedence Crosswalk > Sidewalk > Road > OffMap.
    pub fn surface_at(&self, p: Vec2) -> SurfaceType {
        if !self.bounds.contains(p) {
            return SurfaceType::OffMap;
        }
        if self.crosswalks.iter().any(|c| c.rect.contains(p)) {
            SurfaceType::Crosswalk
        } else if self.sidewalks.iter().any(|s| s.contains(p)) {
            SurfaceType::Sidewalk
        } else if self.roads.iter().any(|r| r.rect.contains(p)) {
            SurfaceType::Road
        } else {
            SurfaceType::OffMap
        }
    }

    /// Crosswalk with the smallest point-to-rectangle distance; ties go to the
    /// smaller id.
    pub fn nearest_crosswalk(&self, p: Vec2) -> (usize, f64) {
        let mut best = (0, f64::INFINITY);
        for c in &self.crosswalks {
            let d = c.rect.distance_to(p);
            if d < best.1 {
                best = (c.id, d);
            }
        }
        best
    }

    /// Whether `p` lies on the drivable area including the tolerance margin.
    pub fn on_road(&self, p: Vec2) -> bool {
        self.roads
            .iter()
            .any(|r| r.rect.inflate(ROAD_MARGIN).contains(p))
    }

    /// Whether `p` is on the carriageway proper (road or crosswalk, no margin).
    pub fn on_carriageway(&self, p: Vec2) -> bool {
        matches!(
            self.surface_at(p),
            SurfaceType::Road | SurfaceType::Crosswalk
        )
    }

    /// Nearest point of the margin-inflated road area; ties go to the lower
    /// road index.
    pub fn project_to_road(&self, p: Vec2) -> Vec2 {
        let mut best = p;
        let mut best_d = f64::INFINITY;
        for r in &self.roads {
            let q = r.rect.inflate(ROAD_MARGIN).closest_point(p);
            let d = q.distance(p);
            if d < best_d {
                best_d = d;
                best = q;
            }
        }
        best
    }

    /// Lateral distance from the nearest lane centerline among roads whose
    /// inflated area contains `p`. Infinite when off-road.
    pub fn lane_offset(&self, p: Vec2) -> f64 {
        self.roads
            .iter()
            .filter(|r| r.rect.inflate(ROAD_MARGIN).contains(p))
            .map(|r| r.lane_offset(p))
            .fold(f64::INFINITY, f64::min)
    }

    /// Checks the structural invariants of the layout.
    pub fn validate(&self) -> crate::Result<()> {
        use crate::Error::Layout;
        if self.roads.len() != 3 || self.sidewalks.len() != 20 || self.crosswalks.len() != 6 {
            return Err(Layout(format!(
                "expected 3 roads, 20 sidewalks, 6 crosswalks; got {}, {}, {}",
                self.roads.len(),
                self.sidewalks.len(),
                self.crosswalks.len()
            )));
        }
        let all = self
            .roads
            .iter()
            .map(|r| r.rect)
            .chain(self.sidewalks.iter().copied())
            .chain(self.crosswalks.iter().map(|c| c.rect));
        for r in all {
            if !self.bounds.contains_rect(&r) {
                return Err(Layout(format!("rectangle {r:?} leaves the map bounds")));
            }
        }
        for c in &self.crosswalks {
            if !self.roads.iter().any(|r| r.rect.overlaps(&c.rect)) {
                return Err(Layout(format!("crosswalk {} overlaps no road", c.id)));
            }
            for end in self.crosswalk_ends(c) {
                if !self.sidewalks.iter().any(|s| s.contains(end)) {
                    return Err(Layout(format!(
                        "crosswalk {} does not reach a sidewalk at {end:?}",
                        c.id
                    )));
                }
            }
        }
        Ok(())
    }

    /// Midpoints of the two short edges of a crosswalk, where it meets the
    /// sidewalks.
    pub fn crosswalk_ends(&self, c: &Crosswalk) -> [Vec2; 2] {
        let mid = c.rect.center();
        match self.roads[c.road].axis {
            Axis::Horizontal => [
                Vec2::new(mid.x, c.rect.min.y),
                Vec2::new(mid.x, c.rect.max.y),
            ],
            Axis::Vertical => [
                Vec2::new(c.rect.min.x, mid.y),
                Vec2::new(c.rect.max.x, mid.y),
            ],
        }
    }
}

/// Layout plus navigation graph, as exported for plotting and debugging.
#[derive(Debug, Clone, Serialize)]
pub struct MapExport<'a> {
    pub map: &'a MapGeometry,
    pub graph: &'a NavGraph,
}

pub fn export_json(map: &MapGeometry, graph: &NavGraph) -> crate::Result<String> {
    Ok(serde_json::to_string_pretty(&MapExport { map, graph })?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout_counts_and_bounds() {
        let m = build_map();
        assert_eq!(m.roads.len(), 3);
        assert_eq!(m.sidewalks.len(), 20);
        assert_eq!(m.crosswalks.len(), 6);
        m.validate().unwrap();
        assert_eq!(m, build_map());
    }

    #[test]
    fn crosswalk_centers_classify_as_crosswalk() {
        let m = build_map();
        for c in &m.crosswalks {
            assert_eq!(m.surface_at(c.rect.center()), SurfaceType::Crosswalk);
        }
    }

    #[test]
    fn surface_probes() {
        let m = build_map();
        assert_eq!(m.surface_at(Vec2::new(-1.0, 60.0)), SurfaceType::OffMap);
        assert_eq!(m.surface_at(Vec2::new(60.0, 121.0)), SurfaceType::OffMap);
        // Middle of the main road between the west crosswalk and the map edge.
        let probe = Vec2::new(20.0, 60.0);
        assert!(m.roads[0].rect.contains(probe));
        assert!(m.sidewalks.iter().all(|s| !s.contains(probe)));
        assert!(m.crosswalks.iter().all(|c| !c.rect.contains(probe)));
        assert_eq!(m.surface_at(probe), SurfaceType::Road);
        assert_eq!(m.surface_at(Vec2::new(10.0, 54.5)), SurfaceType::Sidewalk);
        // City block.
        assert_eq!(m.surface_at(Vec2::new(20.0, 20.0)), SurfaceType::OffMap);
        // Crosswalk edge shared with the sidewalk: crosswalk wins.
        assert_eq!(m.surface_at(Vec2::new(47.0, 56.0)), SurfaceType::Crosswalk);
        // Sidewalk edge shared with the road: sidewalk wins.
        assert_eq!(m.surface_at(Vec2::new(20.0, 56.0)), SurfaceType::Sidewalk);
    }

    #[test]
    fn nearest_crosswalk_inside_and_tie() {
        let m = build_map();
        for c in &m.crosswalks {
            assert_eq!(m.nearest_crosswalk(c.rect.center()), (c.id, 0.0));
        }
        // The intersection center is 9 m from crosswalks 2 and 3 and 11 m
        // from 0 and 1.
        let p = Vec2::new(60.0, 60.0);
        assert_eq!(m.crosswalks[2].rect.distance_to(p), 9.0);
        assert_eq!(m.crosswalks[3].rect.distance_to(p), 9.0);
        assert_eq!(m.crosswalks[0].rect.distance_to(p), 11.0);
        assert_eq!(m.nearest_crosswalk(p), (2, 9.0));
    }

    #[test]
    fn projection_is_idempotent() {
        let m = build_map();
        let p = Vec2::new(20.0, 53.5);
        let q = m.project_to_road(p);
        assert_eq!(q, Vec2::new(20.0, 55.5));
        assert_eq!(m.project_to_road(q), q);
        assert!(m.on_road(q));
    }

    #[test]
    fn lane_offsets() {
        let m = build_map();
        assert_eq!(m.lane_offset(Vec2::new(10.0, 58.0)), 0.0);
        assert_eq!(m.lane_offset(Vec2::new(10.0, 60.0)), 2.0);
        assert!(m.lane_offset(Vec2::new(20.0, 20.0)).is_infinite());
    }
}
