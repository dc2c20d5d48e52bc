//! Scale functions of spectrally negative Lévy processes and the local-time
//! fluctuation identities built from them.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod gen_scale;
pub mod inversion;
pub mod kv;
pub mod laws;
pub mod levy_model;
pub mod local_time_laws;
pub mod mc_oracle;
pub mod omega_scale;
pub mod permanental_loops;
pub mod quad;
pub mod scale_fn;

pub use error::{Error, Result};
pub use inversion::InversionParams;
pub use levy_model::{laplace_exponent, phi_inverse, Jumps, LevyModel, PhiPrime, PhiSolve};
pub use scale_fn::{w_scale, w_scale_dq, z_scale, Family, Method, ScaleContext, Tilt};
