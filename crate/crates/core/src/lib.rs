//! Simulation, metrology and chip planning for multi-channel waveguide
//! superconducting nanowire single-photon detector receivers.

pub mod analysis;
pub mod dynamics;
pub mod model;
pub mod planner;
pub mod registry;
pub mod report;
pub mod sim;
pub mod tcspc;
