//! Pedestrian navigation graph: 34 sidewalk waypoints and 6 crosswalk
//! midpoints, routed with Dijkstra.

use super::{Axis, MapGeometry};
use crate::geometry::Vec2;
use crate::{Error, Result};
use serde::Serialize;
use std::collections::VecDeque;

pub const SIDEWALK_NODES: usize = 34;
pub const CROSSWALK_NODES: usize = 6;
/// Distance from the road edge to the sidewalk waypoints.
pub const WAYPOINT_SETBACK: f64 = 2.5;
pub const NODE_COUNT: usize = SIDEWALK_NODES + CROSSWALK_NODES;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum NodeKind {
    Sidewalk,
    CrosswalkMid { crosswalk: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NavNode {
    pub id: usize,
    pub pos: Vec2,
    pub kind: NodeKind,
    /// Sidewalk chain the waypoint belongs to (`None` for crosswalk midpoints).
    pub chain: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NavEdge {
    pub a: usize,
    pub b: usize,
    pub weight: f64,
    /// True when the edge traverses a road.
    pub crossing: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NavGraph {
    pub nodes: Vec<NavNode>,
    pub edges: Vec<NavEdge>,
    /// `adjacency[u]` lists `(v, weight)` sorted by `v`.
    pub adjacency: Vec<Vec<(usize, f64)>>,
    /// Extent of each sidewalk chain along its direction of travel.
    pub chain_extents: Vec<ChainExtent>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChainExtent {
    pub axis: Axis,
    /// Fixed cross coordinate of the chain's centerline.
    pub across: f64,
    pub lo: f64,
    pub hi: f64,
}

/// A sidewalk chain: waypoints along one sidewalk centerline, listed in
/// travel order. Consecutive waypoints are joined by an edge.
struct Chain {
    axis: Axis,
    across: f64,
    stations: &'static [f64],
}

// Waypoints sit `WAYPOINT_SETBACK` from the road edge, so a pedestrian
// walking along a sidewalk stays out of collision range of a vehicle held at
// the road margin. Corners are shared between the chains that meet there.
const CHAINS: [Chain; 11] = [
    Chain {
        axis: Axis::Horizontal,
        across: 53.5,
        stations: &[2.0, 25.0, 47.0, 53.5],
    },
    Chain {
        axis: Axis::Horizontal,
        across: 53.5,
        stations: &[66.5, 73.0, 90.0, 112.0, 118.0],
    },
    Chain {
        axis: Axis::Horizontal,
        across: 66.5,
        stations: &[2.0, 25.0, 47.0, 53.5],
    },
    Chain {
        axis: Axis::Horizontal,
        across: 66.5,
        stations: &[66.5, 73.0, 82.0, 93.5],
    },
    Chain {
        axis: Axis::Horizontal,
        across: 66.5,
        stations: &[106.5, 112.0, 118.0],
    },
    Chain {
        axis: Axis::Vertical,
        across: 53.5,
        stations: &[2.0, 25.0, 49.0, 53.5],
    },
    Chain {
        axis: Axis::Vertical,
        across: 53.5,
        stations: &[66.5, 71.0, 118.0],
    },
    Chain {
        axis: Axis::Vertical,
        across: 66.5,
        stations: &[2.0, 49.0, 53.5],
    },
    Chain {
        axis: Axis::Vertical,
        across: 66.5,
        stations: &[66.5, 71.0, 95.0, 118.0],
    },
    Chain {
        axis: Axis::Vertical,
        across: 93.5,
        stations: &[66.5, 72.0, 118.0],
    },
    Chain {
        axis: Axis::Vertical,
        across: 106.5,
        stations: &[66.5, 72.0, 118.0],
    },
];

fn chain_point(axis: Axis, across: f64, along: f64) -> Vec2 {
    match axis {
        Axis::Horizontal => Vec2::new(along, across),
        Axis::Vertical => Vec2::new(across, along),
    }
}

/// Builds the 40-node graph for the fixed map.
///
/// Sidewalk waypoints get ids 0..34 in chain order (first occurrence of a
/// shared corner wins); crosswalk `k` has midpoint node `34 + k`.
pub fn build_nav_graph(map: &MapGeometry) -> Result<NavGraph> {
    let mut nodes: Vec<NavNode> = Vec::with_capacity(NODE_COUNT);
    let mut pairs: Vec<(usize, usize)> = Vec::new();

    let mut chain_extents = Vec::with_capacity(CHAINS.len());
    for (ci, chain) in CHAINS.iter().enumerate() {
        let mut prev: Option<usize> = None;
        for &along in chain.stations {
            let pos = chain_point(chain.axis, chain.across, along);
            let id = match nodes.iter().position(|n| n.pos == pos) {
                Some(id) => id,
                None => {
                    nodes.push(NavNode {
                        id: nodes.len(),
                        pos,
                        kind: NodeKind::Sidewalk,
                        chain: Some(ci),
                    });
                    nodes.len() - 1
                }
            };
            if let Some(p) = prev {
                pairs.push((p, id));
            }
            prev = Some(id);
        }
        chain_extents.push(ChainExtent {
            axis: chain.axis,
            across: chain.across,
            lo: chain.stations[0],
            hi: chain.stations[chain.stations.len() - 1],
        });
    }
    if nodes.len() != SIDEWALK_NODES {
        return Err(Error::Layout(format!(
            "expected {SIDEWALK_NODES} sidewalk waypoints, built {}",
            nodes.len()
        )));
    }

    for c in &map.crosswalks {
        let mid_id = nodes.len();
        nodes.push(NavNode {
            id: mid_id,
            pos: c.rect.center(),
            kind: NodeKind::CrosswalkMid { crosswalk: c.id },
            chain: None,
        });
        let [lo, hi] = map.crosswalk_ends(c);
        let half = WAYPOINT_SETBACK;
        let landings = match map.roads[c.road].axis {
            Axis::Horizontal => [lo - Vec2::new(0.0, half), hi + Vec2::new(0.0, half)],
            Axis::Vertical => [lo - Vec2::new(half, 0.0), hi + Vec2::new(half, 0.0)],
        };
        for landing in landings {
            let id = nodes.iter().position(|n| n.pos == landing).ok_or_else(|| {
                Error::Layout(format!(
                    "crosswalk {} has no sidewalk waypoint at {landing:?}",
                    c.id
                ))
            })?;
            pairs.push((id, mid_id));
        }
    }

    let edges: Vec<NavEdge> = pairs
        .iter()
        .map(|&(a, b)| {
            let (pa, pb) = (nodes[a].pos, nodes[b].pos);
            let through_mid = matches!(nodes[a].kind, NodeKind::CrosswalkMid { .. })
                || matches!(nodes[b].kind, NodeKind::CrosswalkMid { .. });
            NavEdge {
                a,
                b,
                weight: pa.distance(pb),
                crossing: through_mid
                    || map.roads.iter().any(|r| r.rect.intersects_segment(pa, pb)),
            }
        })
        .collect();

    let mut adjacency = vec![Vec::new(); nodes.len()];
    for e in &edges {
        adjacency[e.a].push((e.b, e.weight));
        adjacency[e.b].push((e.a, e.weight));
    }
    for list in &mut adjacency {
        list.sort_by_key(|&(v, _)| v);
    }

    let graph = NavGraph {
        nodes,
        edges,
        adjacency,
        chain_extents,
    };
    let reached = graph.reachable_from(0);
    if reached != NODE_COUNT {
        return Err(Error::Disconnected {
            reached,
            total: NODE_COUNT,
        });
    }
    Ok(graph)
}

impl NavGraph {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Number of nodes reached by breadth-first traversal from `src`.
    pub fn reachable_from(&self, src: usize) -> usize {
        let mut seen = vec![false; self.nodes.len()];
        let mut queue = VecDeque::from([src]);
        seen[src] = true;
        let mut count = 1;
        while let Some(u) = queue.pop_front() {
            for &(v, _) in &self.adjacency[u] {
                if !seen[v] {
                    seen[v] = true;
                    count += 1;
                    queue.push_back(v);
                }
            }
        }
        count
    }

    pub fn weight(&self, u: usize, v: usize) -> Option<f64> {
        self.adjacency
            .get(u)?
            .iter()
            .find(|&&(w, _)| w == v)
            .map(|&(_, wt)| wt)
    }

    pub fn crosswalk_of(&self, node: usize) -> Option<usize> {
        match self.nodes.get(node)?.kind {
            NodeKind::CrosswalkMid { crosswalk } => Some(crosswalk),
            NodeKind::Sidewalk => None,
        }
    }

    /// Sidewalk waypoints that are not crosswalk landings.
    pub fn interior_waypoints(&self) -> Vec<usize> {
        (0..SIDEWALK_NODES)
            .filter(|&u| {
                self.adjacency[u]
                    .iter()
                    .all(|&(v, _)| self.crosswalk_of(v).is_none())
            })
            .collect()
    }
}

/// Minimum-weight path from `src` to `dst`, both inclusive.
///
/// Nodes are settled in order of tentative distance, smaller id first on
/// ties, so the result is deterministic.
pub fn dijkstra_path(graph: &NavGraph, src: usize, dst: usize) -> Result<Vec<usize>> {
    let n = graph.nodes.len();
    for id in [src, dst] {
        if id >= n {
            return Err(Error::UnknownNode(id));
        }
    }
    let mut dist = vec![f64::INFINITY; n];
    let mut prev = vec![usize::MAX; n];
    let mut settled = vec![false; n];
    dist[src] = 0.0;
    loop {
        let mut u = usize::MAX;
        for v in 0..n {
            if !settled[v] && dist[v].is_finite() && (u == usize::MAX || dist[v] < dist[u]) {
                u = v;
            }
        }
        if u == usize::MAX || u == dst {
            break;
        }
        settled[u] = true;
        for &(v, w) in &graph.adjacency[u] {
            let alt = dist[u] + w;
            if alt < dist[v] {
                dist[v] = alt;
                prev[v] = u;
            }
        }
    }
    if !dist[dst].is_finite() {
        return Err(Error::Unreachable { src, dst });
    }
    let mut path = vec![dst];
    let mut cur = dst;
    while cur != src {
        cur = prev[cur];
        path.push(cur);
    }
    path.reverse();
    Ok(path)
}

/// Sum of edge weights along `path`, accumulated from the front.
pub fn path_cost(graph: &NavGraph, path: &[usize]) -> Option<f64> {
    path.windows(2)
        .try_fold(0.0, |acc, w| graph.weight(w[0], w[1]).map(|wt| acc + wt))
}

/// Single-source shortest distances by Bellman-Ford relaxation over the edge
/// list. Independent of [`dijkstra_path`]; used as its oracle.
pub fn bellman_ford_costs(graph: &NavGraph, src: usize) -> Vec<f64> {
    let n = graph.nodes.len();
    let mut dist = vec![f64::INFINITY; n];
    dist[src] = 0.0;
    for _ in 1..n {
        let mut changed = false;
        for e in &graph.edges {
            for (u, v) in [(e.a, e.b), (e.b, e.a)] {
                if dist[u] + e.weight < dist[v] {
                    dist[v] = dist[u] + e.weight;
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }
    dist
}

/// All-pairs shortest paths, precomputed once per map.
#[derive(Debug, Clone)]
pub struct RouteTable {
    paths: Vec<Vec<Vec<usize>>>,
}

impl RouteTable {
    pub fn new(graph: &NavGraph) -> Result<Self> {
        let n = graph.nodes.len();
        let mut paths = Vec::with_capacity(n);
        for s in 0..n {
            let row = (0..n)
                .map(|d| dijkstra_path(graph, s, d))
                .collect::<Result<Vec<_>>>()?;
            paths.push(row);
        }
        Ok(Self { paths })
    }

    pub fn path(&self, src: usize, dst: usize) -> &[usize] {
        &self.paths[src][dst]
    }
}
