pub mod analyze;
pub mod estimate;
pub mod optimize;
pub mod simulate;
