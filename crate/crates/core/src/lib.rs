//! Data-driven polyhedral flexibility regions for building loads.
//!
//! The pipeline clusters coarse daily data per period, fits affine
//! temperature prediction bands with a convex QP sweep, wraps them with
//! load and temperature limits into a polyhedron over whole-day load
//! profiles, and schedules fleets of such regions against wind forecast
//! errors with a two-stage stochastic LP.

pub mod data_model;
pub mod optim;
pub mod synthetic_plant;
pub mod clustering;
pub mod band_estimator;
pub mod region_builder;
pub mod model_selector;
pub mod baselines;
pub mod scheduler;
pub mod pipeline;
