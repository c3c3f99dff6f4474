//! Haptic rendering toolkit for a four-unit forearm skin-stretch display and
//! a squeeze-band baseline: scenario force models, stimulus rendering,
//! fixed-timestep device simulation, a framed wire protocol, and a
//! psychophysics harness with simulated observers.

pub mod config;
pub mod device;
pub mod model;
pub mod protocol;
pub mod psychophysics;
pub mod scenario;
pub mod squeeze;
pub mod stretch;

pub use model::{
    default_quad_params, validate_params, ForceVector, QuadDeviceParams, Side, SqueezerParams,
    StretchFrame, StretchType, TactorId,
};
