pub mod ao;
pub mod beamforming;
pub mod channel;
pub mod config;
pub mod experiments;
pub mod linalg;
pub mod metrics;
pub mod position;
pub mod solver;
pub mod srcr;
