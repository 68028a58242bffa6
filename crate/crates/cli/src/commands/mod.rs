pub mod estimate;
pub mod ingest;
pub mod montecarlo;
pub mod simulate;
pub mod theory;
