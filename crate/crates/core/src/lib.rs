//! E-scooter demand forecasting and mode-substitution modelling.
//!
//! The pipeline has two stages. A log-log trip-generation regression
//! ([`demand`]) predicts daily trips per zone from demographics; forecasts
//! can be moved between zoning systems with a population-weighted crosswalk
//! ([`ingest`]). A bounded nonlinear multifactor model ([`factor`]) then
//! splits each zone's forecast into a constant, direct substitution of
//! existing trips by mode and distance, and substitution of transit
//! access/egress legs. [`analysis`] turns the decomposition into shares and
//! fare revenue.

pub mod analysis;
pub mod demand;
pub mod error;
pub mod factor;
pub mod ingest;
pub mod solver;
pub mod stats;
pub mod synth;
pub mod types;

pub use error::{Error, Result};
pub use types::{
    validate_trip_matrix, DemandForecast, DistanceBinScheme, ModalTripMatrix, TransitAccessProfile,
    ZoneId, ZoneProfile,
};
