use std::cmp::Reverse;
use std::collections::{BinaryHeap, VecDeque};

use crate::data::{Direction, StationId, Topology};
use crate::{Error, Result};

/// One line-contiguous stretch of a shortest path.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PathLeg {
    pub line: usize,
    pub direction: Direction,
    /// Station indices in travel order, boarding station first.
    pub stations: Vec<usize>,
}

impl PathLeg {
    pub fn board(&self) -> usize {
        *self.stations.first().expect("leg has stations")
    }

    pub fn alight(&self) -> usize {
        *self.stations.last().expect("leg has stations")
    }
}

#[derive(Debug, Clone, Copy)]
struct Edge {
    to: usize,
    line: usize,
    meters: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct StateBest {
    meters: u64,
    changes: u32,
    pred: Option<u32>,
}

/// The track network with precomputed shortest paths between all station
/// pairs. Edge lengths are held in integer metres so path comparisons are
/// exact; route ties are broken by fewer interchanges, then by station order.
#[derive(Debug, Clone)]
pub struct NetworkGraph {
    n: usize,
    n_lines: usize,
    adjacency: Vec<Vec<Edge>>,
    /// Per source: best label per state (station * (n_lines+1) + line+1).
    trees: Vec<Vec<Option<StateBest>>>,
    dist_m: Vec<Option<u64>>,
    hops: Vec<Option<u32>>,
    station_ids: Vec<StationId>,
}

impl NetworkGraph {
    pub fn build(topo: &Topology) -> Result<Self> {
        let n = topo.n_stations();
        let n_lines = topo.lines.len();
        let mut adjacency: Vec<Vec<Edge>> = vec![Vec::new(); n];
        for e in &topo.edges {
            let a = topo
                .station_idx(&e.from)
                .ok_or_else(|| Error::UnknownStation(e.from.to_string()))?;
            let b = topo
                .station_idx(&e.to)
                .ok_or_else(|| Error::UnknownStation(e.to.to_string()))?;
            let line = topo
                .line_idx(&e.line)
                .ok_or_else(|| Error::Topology(format!("unknown line {}", e.line)))?;
            let meters = (e.km * 1000.0).round() as u64;
            adjacency[a].push(Edge { to: b, line, meters });
            adjacency[b].push(Edge { to: a, line, meters });
        }
        for adj in &mut adjacency {
            adj.sort_by_key(|e| (e.to, e.line));
        }
        let station_ids: Vec<StationId> = topo.stations.iter().map(|s| s.id.clone()).collect();

        let mut graph = NetworkGraph {
            n,
            n_lines,
            adjacency,
            trees: Vec::new(),
            dist_m: vec![None; n * n],
            hops: vec![None; n * n],
            station_ids,
        };
        graph.trees = (0..n).map(|src| graph.dijkstra(src)).collect();
        for src in 0..n {
            for dst in 0..n {
                graph.dist_m[src * n + dst] = graph.best_state(src, dst).map(|s| {
                    let b = graph.trees[src][s].unwrap();
                    b.meters
                });
            }
            let hop = graph.bfs_hops(src);
            for dst in 0..n {
                graph.hops[src * n + dst] = hop[dst];
            }
        }
        Ok(graph)
    }

    fn state_id(&self, station: usize, line_in: Option<usize>) -> usize {
        station * (self.n_lines + 1) + line_in.map(|l| l + 1).unwrap_or(0)
    }

    fn state_station(&self, state: usize) -> usize {
        state / (self.n_lines + 1)
    }

    fn state_line(&self, state: usize) -> Option<usize> {
        match state % (self.n_lines + 1) {
            0 => None,
            l => Some(l - 1),
        }
    }

    /// Prefer lower cost; on exact cost ties prefer the predecessor with the
    /// smaller station id, keeping route choice deterministic.
    fn better(&self, cand: &StateBest, cur: &StateBest) -> bool {
        let ck = (cand.meters, cand.changes);
        let uk = (cur.meters, cur.changes);
        if ck != uk {
            return ck < uk;
        }
        let name = |p: Option<u32>| {
            p.map(|s| self.station_ids[self.state_station(s as usize)].as_str().to_owned())
                .unwrap_or_default()
        };
        name(cand.pred) < name(cur.pred)
    }

    fn dijkstra(&self, src: usize) -> Vec<Option<StateBest>> {
        let n_states = self.n * (self.n_lines + 1);
        let mut best: Vec<Option<StateBest>> = vec![None; n_states];
        let start = self.state_id(src, None);
        best[start] = Some(StateBest {
            meters: 0,
            changes: 0,
            pred: None,
        });
        let mut heap: BinaryHeap<Reverse<(u64, u32, usize)>> = BinaryHeap::new();
        heap.push(Reverse((0, 0, start)));
        while let Some(Reverse((meters, changes, state))) = heap.pop() {
            let Some(cur) = best[state] else { continue };
            if (meters, changes) != (cur.meters, cur.changes) {
                continue;
            }
            let station = self.state_station(state);
            let line_in = self.state_line(state);
            for e in &self.adjacency[station] {
                let changes_next = match line_in {
                    Some(l) if l != e.line => changes + 1,
                    _ => changes,
                };
                let cand = StateBest {
                    meters: meters + e.meters,
                    changes: changes_next,
                    pred: Some(state as u32),
                };
                let next = self.state_id(e.to, Some(e.line));
                let replace = match &best[next] {
                    None => true,
                    Some(cur) => self.better(&cand, cur),
                };
                if replace {
                    best[next] = Some(cand);
                    heap.push(Reverse((cand.meters, cand.changes, next)));
                }
            }
        }
        best
    }

    /// The arrival state at `dst` chosen under the tie rules.
    fn best_state(&self, src: usize, dst: usize) -> Option<usize> {
        if src == dst {
            return Some(self.state_id(dst, None));
        }
        let tree = &self.trees[src];
        let mut chosen: Option<usize> = None;
        for line_in in 0..self.n_lines {
            let s = self.state_id(dst, Some(line_in));
            let Some(b) = tree[s] else { continue };
            match chosen {
                None => chosen = Some(s),
                Some(c) => {
                    let cb = tree[c].unwrap();
                    if (b.meters, b.changes, line_in) < (cb.meters, cb.changes, self.state_line(c).unwrap()) {
                        chosen = Some(s);
                    }
                }
            }
        }
        chosen
    }

    pub fn n_stations(&self) -> usize {
        self.n
    }

    /// Shortest track distance in km. `shortest_distance(o, o) = 0`.
    pub fn shortest_distance(&self, o: usize, d: usize) -> Result<f64> {
        if o == d {
            return Ok(0.0);
        }
        self.dist_m[o * self.n + d]
            .map(|m| m as f64 / 1000.0)
            .ok_or_else(|| {
                Error::Unreachable(self.station_ids[o].to_string(), self.station_ids[d].to_string())
            })
    }

    /// Station sequence of the chosen shortest path, origin first.
    pub fn shortest_path(&self, o: usize, d: usize) -> Result<Vec<(usize, Option<usize>)>> {
        if o == d {
            return Ok(vec![(o, None)]);
        }
        let state = self.best_state(o, d).ok_or_else(|| {
            Error::Unreachable(self.station_ids[o].to_string(), self.station_ids[d].to_string())
        })?;
        let tree = &self.trees[o];
        let mut rev = Vec::new();
        let mut cur = Some(state);
        while let Some(s) = cur {
            rev.push((self.state_station(s), self.state_line(s)));
            cur = tree[s].and_then(|b| b.pred).map(|p| p as usize);
        }
        rev.reverse();
        Ok(rev)
    }

    /// Shortest path split into line-contiguous legs with travel direction.
    pub fn path_legs(&self, topo: &Topology, o: usize, d: usize) -> Result<Vec<PathLeg>> {
        let steps = self.shortest_path(o, d)?;
        let mut legs: Vec<PathLeg> = Vec::new();
        for window in steps.windows(2) {
            let (prev, _) = window[0];
            let (next, line_in) = window[1];
            let line = line_in.expect("non-source steps carry a line");
            match legs.last_mut() {
                Some(leg) if leg.line == line => leg.stations.push(next),
                _ => legs.push(PathLeg {
                    line,
                    direction: Direction::Up,
                    stations: vec![prev, next],
                }),
            }
        }
        for leg in &mut legs {
            let seq = &topo.lines[leg.line].stations;
            let pos = |st: usize| {
                seq.iter()
                    .position(|id| topo.station_idx(id) == Some(st))
                    .expect("leg station on line")
            };
            leg.direction = if pos(leg.stations[1]) > pos(leg.stations[0]) {
                Direction::Up
            } else {
                Direction::Down
            };
        }
        Ok(legs)
    }

    /// Edge-count distance, ignoring lengths and lines.
    pub fn hop_distance(&self, o: usize, d: usize) -> Option<u32> {
        self.hops[o * self.n + d]
    }

    fn bfs_hops(&self, src: usize) -> Vec<Option<u32>> {
        let mut out = vec![None; self.n];
        out[src] = Some(0);
        let mut queue = VecDeque::from([src]);
        while let Some(s) = queue.pop_front() {
            let d = out[s].unwrap();
            for e in &self.adjacency[s] {
                if out[e.to].is_none() {
                    out[e.to] = Some(d + 1);
                    queue.push_back(e.to);
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{EdgeSpec, IntervalGrid, LineSpec, RollingStock, StationSpec};

    fn topo_from(edges: Vec<(&str, &str, &str, f64)>, lines: Vec<(&str, Vec<&str>)>) -> Topology {
        let mut stations: Vec<&str> = Vec::new();
        for l in &lines {
            for s in &l.1 {
                if !stations.contains(s) {
                    stations.push(s);
                }
            }
        }
        let stations = stations
            .into_iter()
            .map(|s| StationSpec {
                id: s.into(),
                name: s.to_string(),
                lat: 0.0,
                lon: 0.0,
            })
            .collect();
        let edges = edges
            .into_iter()
            .map(|(a, b, l, km)| EdgeSpec {
                from: a.into(),
                to: b.into(),
                line: l.into(),
                km,
            })
            .collect();
        let rolling = lines
            .iter()
            .map(|(l, _)| RollingStock {
                line: (*l).into(),
                seats: 40,
                floor_area_m2: 60.0,
            })
            .collect();
        let lines = lines
            .into_iter()
            .map(|(id, seq)| LineSpec {
                id: id.into(),
                stations: seq.into_iter().map(Into::into).collect(),
            })
            .collect();
        Topology::new(stations, edges, lines, rolling, IntervalGrid::standard()).unwrap()
    }

    fn line_topo() -> Topology {
        topo_from(
            vec![("A", "B", "L1", 1.2), ("B", "C", "L1", 0.8)],
            vec![("L1", vec!["A", "B", "C"])],
        )
    }

    #[test]
    fn identity_distance_is_zero() {
        let topo = line_topo();
        let g = NetworkGraph::build(&topo).unwrap();
        assert_eq!(g.shortest_distance(0, 0).unwrap(), 0.0);
    }

    #[test]
    fn single_path_distance() {
        let topo = line_topo();
        let g = NetworkGraph::build(&topo).unwrap();
        let a = topo.station_idx(&"A".into()).unwrap();
        let c = topo.station_idx(&"C".into()).unwrap();
        assert_eq!(g.shortest_distance(a, c).unwrap(), 2.0);
        assert_eq!(g.shortest_distance(c, a).unwrap(), 2.0);
    }

    #[test]
    fn unreachable_pair_errors() {
        let topo = topo_from(
            vec![("A", "B", "L1", 1.0), ("C", "D", "L2", 1.0)],
            vec![("L1", vec!["A", "B"]), ("L2", vec!["C", "D"])],
        );
        let g = NetworkGraph::build(&topo).unwrap();
        assert!(g.shortest_distance(0, 2).is_err());
    }

    /// Two-line toy network checked against exhaustive enumeration of all
    /// simple paths.
    #[test]
    fn matches_brute_force_on_two_line_network() {
        let topo = topo_from(
            vec![
                ("A1", "A2", "L1", 2.2),
                ("A2", "A3", "L1", 1.6),
                ("A3", "A4", "L1", 2.8),
                ("A4", "A5", "L1", 2.8),
                ("A5", "A6", "L1", 3.0),
                ("B1", "B2", "L2", 1.1),
                ("B2", "A3", "L2", 1.4),
                ("A3", "B3", "L2", 1.3),
                ("B3", "B4", "L2", 1.7),
            ],
            vec![
                ("L1", vec!["A1", "A2", "A3", "A4", "A5", "A6"]),
                ("L2", vec!["B1", "B2", "A3", "B3", "B4"]),
            ],
        );
        let g = NetworkGraph::build(&topo).unwrap();
        let n = topo.n_stations();

        // Brute force: depth-first enumeration of all simple paths in metres.
        let mut adj: Vec<Vec<(usize, u64)>> = vec![Vec::new(); n];
        for e in &topo.edges {
            let a = topo.station_idx(&e.from).unwrap();
            let b = topo.station_idx(&e.to).unwrap();
            let m = (e.km * 1000.0).round() as u64;
            adj[a].push((b, m));
            adj[b].push((a, m));
        }
        fn dfs(
            adj: &[Vec<(usize, u64)>],
            cur: usize,
            dst: usize,
            seen: &mut Vec<bool>,
            acc: u64,
            best: &mut u64,
        ) {
            if cur == dst {
                *best = (*best).min(acc);
                return;
            }
            for &(next, m) in &adj[cur] {
                if !seen[next] {
                    seen[next] = true;
                    dfs(adj, next, dst, seen, acc + m, best);
                    seen[next] = false;
                }
            }
        }
        for o in 0..n {
            for d in 0..n {
                let mut best = u64::MAX;
                let mut seen = vec![false; n];
                seen[o] = true;
                dfs(&adj, o, d, &mut seen, 0, &mut best);
                let got = g.shortest_distance(o, d).unwrap();
                assert_eq!((got * 1000.0).round() as u64, if o == d { 0 } else { best });
            }
        }
    }

    #[test]
    fn symmetry_and_triangle_inequality() {
        let topo = topo_from(
            vec![
                ("A1", "A2", "L1", 2.2),
                ("A2", "A3", "L1", 1.6),
                ("B2", "A3", "L2", 1.4),
                ("A3", "B3", "L2", 1.3),
            ],
            vec![
                ("L1", vec!["A1", "A2", "A3"]),
                ("L2", vec!["B2", "A3", "B3"]),
            ],
        );
        let g = NetworkGraph::build(&topo).unwrap();
        let n = topo.n_stations();
        for o in 0..n {
            for d in 0..n {
                let od = g.shortest_distance(o, d).unwrap();
                assert_eq!(od, g.shortest_distance(d, o).unwrap());
                for k in 0..n {
                    let ok = g.shortest_distance(o, k).unwrap();
                    let kd = g.shortest_distance(k, d).unwrap();
                    assert!(od <= ok + kd + 1e-12);
                }
            }
        }
    }

    #[test]
    fn legs_split_on_line_change() {
        let topo = topo_from(
            vec![
                ("A1", "A2", "L1", 2.2),
                ("A2", "A3", "L1", 1.6),
                ("A3", "B3", "L2", 1.3),
                ("B3", "B4", "L2", 1.7),
            ],
            vec![
                ("L1", vec!["A1", "A2", "A3"]),
                ("L2", vec!["A3", "B3", "B4"]),
            ],
        );
        let g = NetworkGraph::build(&topo).unwrap();
        let o = topo.station_idx(&"A1".into()).unwrap();
        let d = topo.station_idx(&"B4".into()).unwrap();
        let legs = g.path_legs(&topo, o, d).unwrap();
        assert_eq!(legs.len(), 2);
        assert_eq!(legs[0].board(), o);
        assert_eq!(legs[0].alight(), topo.station_idx(&"A3".into()).unwrap());
        assert_eq!(legs[1].alight(), d);
        assert_eq!(legs[0].direction, Direction::Up);
        assert_eq!(g.hop_distance(o, d), Some(4));
    }
}
