//! Metro graph, shortest track paths, and passenger-to-train assignment.

mod assign;
mod graph;

pub use assign::{
    assign_passengers, extract_runs, AssignConfig, AssignmentResult, LegAssignment, LoadSegment,
    RunStop, TrainLoad, TrainRun, TripAssignment,
};
pub use graph::{NetworkGraph, PathLeg};
