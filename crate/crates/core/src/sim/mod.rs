//! Discrete-event generation of detection timetags.

mod channel;
mod receiver;
mod source;

pub use channel::{simulate_channel, ChannelReport, EventStream};
pub use receiver::{
    crosstalk_arrivals, crosstalk_rate, run_channel, simulate_receiver, ChannelRun, ReceiverOutput, ReportParseError, SimReport, SIM_REPORT_HEADER,
};
pub use source::{
    generate_poisson_arrivals, poisson_arrivals, source_registry, ContinuousWave, PhotonSource, Pulsed,
};
