//! Cost-optimal EV charging schedules under segmented network tariffs and dynamic
//! energy prices, and the fleet-level peak and diversity analytics built on them.

pub mod aggregate;
pub mod cli;
pub mod dispatch;
pub mod io;
pub mod model;
