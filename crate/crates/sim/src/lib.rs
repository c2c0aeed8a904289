//! Stream simulation harness: sessions, matrices of sessions, measurement
//! ingestion, and report aggregation.

pub mod aggregate;
pub mod ingest;
pub mod matrix;
pub mod session;

pub use aggregate::{aggregate, AggregateRow, GroupBy};
pub use ingest::{ingest_measurements, IngestError, IngestSchema, MeasurementRecord};
pub use matrix::run_matrix;
pub use session::{run_session, run_with_learner, SessionReport, Simulation, Traces};
