//! Spiking circuits that read the lateral direction and depth trend of an object passing a ring of
//! proximity sensors.
//!
//! Sensor readings are rate-coded into spike trains ([`world`]), fed through chains of ternary
//! direction detectors and either paired depth modules or weighted judge neurons ([`circuits`]),
//! all simulated by a discrete-time leaky integrate-and-fire engine ([`spiking`]). [`correlation`]
//! offers an analytic second route to the same depth verdict, and [`harness`] drives everything
//! from JSON scenario files.

pub mod circuits;
pub mod correlation;
pub mod exec;
pub mod harness;
pub mod spiking;
pub mod world;
