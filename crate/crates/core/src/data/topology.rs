use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::grid::IntervalGrid;
use super::records::{LineId, StationId};
use crate::{Error, Result};

/// A station as declared in `topology.json`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StationSpec {
    pub id: StationId,
    pub name: String,
    pub lat: f64,
    pub lon: f64,
}

/// An undirected track segment between adjacent stations of one line.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EdgeSpec {
    pub from: StationId,
    pub to: StationId,
    pub line: LineId,
    pub km: f64,
}

/// A line: its ordered station sequence is implied by its edges.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LineSpec {
    pub id: LineId,
    /// Station ids in track order (direction `up` runs in this order).
    pub stations: Vec<StationId>,
}

/// Per-line rolling stock used by the crowding measure.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RollingStock {
    pub line: LineId,
    pub seats: u32,
    pub floor_area_m2: f64,
}

/// Grid parameters as written in `topology.json`, e.g. "06:00" / "24:00".
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridSpec {
    pub start: String,
    pub end: String,
    pub interval_min: u32,
}

fn parse_clock(s: &str) -> Result<u32> {
    let mut parts = s.split(':');
    let (h, m) = (parts.next(), parts.next());
    if let (Some(h), Some(m), None) = (h, m, parts.next()) {
        if let (Ok(h), Ok(m)) = (h.parse::<u32>(), m.parse::<u32>()) {
            if h <= 24 && m < 60 {
                return Ok(h * 3600 + m * 60);
            }
        }
    }
    Err(Error::Topology(format!("bad clock time {s:?}")))
}

fn format_clock(sec: u32) -> String {
    format!("{:02}:{:02}", sec / 3600, (sec % 3600) / 60)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct TopologyFile {
    stations: Vec<StationSpec>,
    edges: Vec<EdgeSpec>,
    lines: Vec<LineSpec>,
    rolling_stock: Vec<RollingStock>,
    grid: GridSpec,
}

/// The metro network: stations, track edges, line sequences, rolling stock
/// and the service-day interval grid. Immutable after construction.
#[derive(Debug, Clone)]
pub struct Topology {
    pub stations: Vec<StationSpec>,
    pub edges: Vec<EdgeSpec>,
    pub lines: Vec<LineSpec>,
    pub rolling_stock: Vec<RollingStock>,
    pub grid: IntervalGrid,
    station_index: BTreeMap<StationId, usize>,
    line_index: BTreeMap<LineId, usize>,
}

impl Topology {
    pub fn new(
        stations: Vec<StationSpec>,
        edges: Vec<EdgeSpec>,
        lines: Vec<LineSpec>,
        rolling_stock: Vec<RollingStock>,
        grid: IntervalGrid,
    ) -> Result<Self> {
        let mut station_index = BTreeMap::new();
        for (i, s) in stations.iter().enumerate() {
            if station_index.insert(s.id.clone(), i).is_some() {
                return Err(Error::Topology(format!("duplicate station {}", s.id)));
            }
        }
        let mut line_index = BTreeMap::new();
        for (i, l) in lines.iter().enumerate() {
            if line_index.insert(l.id.clone(), i).is_some() {
                return Err(Error::Topology(format!("duplicate line {}", l.id)));
            }
            for s in &l.stations {
                if !station_index.contains_key(s) {
                    return Err(Error::Topology(format!(
                        "line {} references unknown station {s}",
                        l.id
                    )));
                }
            }
            if l.stations.len() < 2 {
                return Err(Error::Topology(format!("line {} has fewer than 2 stations", l.id)));
            }
        }
        for e in &edges {
            if !station_index.contains_key(&e.from) || !station_index.contains_key(&e.to) {
                return Err(Error::Topology(format!(
                    "edge {}-{} references unknown station",
                    e.from, e.to
                )));
            }
            if !line_index.contains_key(&e.line) {
                return Err(Error::Topology(format!("edge on unknown line {}", e.line)));
            }
            if !(e.km > 0.0) {
                return Err(Error::Topology(format!(
                    "edge {}-{} has non-positive length {}",
                    e.from, e.to, e.km
                )));
            }
        }
        for rs in &rolling_stock {
            if !line_index.contains_key(&rs.line) {
                return Err(Error::Topology(format!(
                    "rolling stock for unknown line {}",
                    rs.line
                )));
            }
            if !(rs.floor_area_m2 > 0.0) {
                return Err(Error::Topology(format!(
                    "line {} has non-positive floor area",
                    rs.line
                )));
            }
        }
        Ok(Topology {
            stations,
            edges,
            lines,
            rolling_stock,
            grid,
            station_index,
            line_index,
        })
    }

    pub fn n_stations(&self) -> usize {
        self.stations.len()
    }

    pub fn station_idx(&self, id: &StationId) -> Option<usize> {
        self.station_index.get(id).copied()
    }

    pub fn line_idx(&self, id: &LineId) -> Option<usize> {
        self.line_index.get(id).copied()
    }

    /// Lines serving a station. Interchange stations serve two or more.
    pub fn lines_of(&self, station: &StationId) -> Vec<&LineId> {
        self.lines
            .iter()
            .filter(|l| l.stations.contains(station))
            .map(|l| &l.id)
            .collect()
    }

    pub fn is_interchange(&self, station: &StationId) -> bool {
        self.lines_of(station).len() >= 2
    }

    pub fn rolling_stock_for(&self, line: &LineId) -> Option<&RollingStock> {
        self.rolling_stock.iter().find(|rs| &rs.line == line)
    }

    /// True if `station` appears in `line`'s sequence.
    pub fn station_on_line(&self, station: &StationId, line: &LineId) -> bool {
        self.line_idx(line)
            .map(|i| self.lines[i].stations.contains(station))
            .unwrap_or(false)
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let file: TopologyFile = serde_json::from_str(s)
            .map_err(|e| Error::Topology(format!("topology.json: {e}")))?;
        let grid = IntervalGrid::new(
            parse_clock(&file.grid.start)?,
            parse_clock(&file.grid.end)?,
            file.grid.interval_min * 60,
        )?;
        Topology::new(file.stations, file.edges, file.lines, file.rolling_stock, grid)
    }

    pub fn from_json_file(path: &Path) -> Result<Self> {
        let s = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json_str(&s)
    }

    pub fn to_json_string(&self) -> String {
        let file = TopologyFile {
            stations: self.stations.clone(),
            edges: self.edges.clone(),
            lines: self.lines.clone(),
            rolling_stock: self.rolling_stock.clone(),
            grid: GridSpec {
                start: format_clock(self.grid.start_sec),
                end: format_clock(self.grid.end_sec),
                interval_min: self.grid.interval_sec / 60,
            },
        };
        serde_json::to_string_pretty(&file).expect("topology serializes")
    }
}
