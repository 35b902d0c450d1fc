//! Spiking audio front end with FEAST feature extraction.
//!
//! Audio goes through a CAR-FAC cochlea, leaky integrate-and-fire encoding
//! and multi-scale spatiotemporal contexts, then FEAST neurons cluster the
//! contexts into feature maps that are time-binned for a linear classifier.

pub mod classify;
pub mod cochlea;
pub mod error;
pub mod events;
pub mod feast;
pub mod features;
pub mod io;
pub mod scalar;
pub mod spikegen;

pub use error::{Error, Result};
pub use events::{AudEvent, EventStream};
pub use scalar::Scalar;

pub type CarFac = cochlea::CarFac<f64>;
pub type CochleaState = cochlea::CochleaState<f64>;
pub type SpikeEncoder = spikegen::SpikeEncoder<f64>;
pub type FeastModel = feast::FeastModel<f64>;
pub type EventContext = events::EventContext<f64>;
pub type ContextParams = events::ContextParams<f64>;
pub type FeatureVector = features::FeatureVector<f64>;

pub type LinearModel = classify::LinearModel<f64>;

pub type CarFacF32 = cochlea::CarFac<f32>;
pub type FeastModelF32 = feast::FeastModel<f32>;
