pub mod channel;
pub mod checkpoint;
pub mod manifest;
pub mod report;
pub mod tags;
