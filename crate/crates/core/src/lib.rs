//! Sensing parameter estimation for SSB-based OFDM downlink sensing with
//! direct clutter cancellation.
//!
//! The chain is: simulate P+1 burst sets ([`signal`]), cancel static clutter
//! and strip pilots ([`canceller`]), solve the row-sparse delay problem
//! ([`dictionary`], [`sbl`]), then read delay, Doppler, angle and power off
//! the detected rows ([`extract`]) and smooth them across bursts
//! ([`tracking`]).

pub mod canceller;
pub mod config;
pub mod dictionary;
pub mod error;
pub mod extract;
pub mod linalg;
pub mod sbl;
pub mod scenario;
pub mod signal;
pub mod tracking;

pub use config::{GridOrigin, SystemConfig};
pub use error::{Error, Result};
pub use linalg::CMatrix;
pub use num_complex::Complex64;
