pub mod bundle;
pub mod cli;
pub mod data;
pub mod ecoc;
pub mod error;
pub mod inf;
pub mod linreg;
pub mod metrics;
pub mod pipeline;
pub mod synth;
pub mod taxonomy;
pub mod topdown;
