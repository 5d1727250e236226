//! Raw record types and dataset ingestion.
//!
//! All tables are immutable after load. Invalid rows are rejected, not
//! repaired; every rejection is reported with its row number and reason.

mod grid;
mod load;
mod records;
mod tables;
mod topology;

pub use grid::IntervalGrid;
pub use load::{load_dataset, Manifest, RowReject, TableReport, ValidationReport};
pub use records::{
    AbandonmentRecord, AvlEvent, AvlRecord, Direction, EventKind, EventRecord, IncidentLogRecord,
    IncidentType, LineId, StationId, TripRecord, WeatherRecord,
};
pub use tables::{Calendar, DayInfo, Dataset, EventTable, WeatherTable};
pub use topology::{EdgeSpec, GridSpec, LineSpec, RollingStock, StationSpec, Topology};
