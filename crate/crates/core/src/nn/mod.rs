//! Dense-network numeric core: MLP forward/backward passes over a flat
//! parameter layout, Adam, and diagonal-Gaussian log densities.
//!
//! Parameters of an `[n0, n1, …, nL]` network are stored layer by layer as the
//! `n_{i+1} × n_i` weight matrix in row-major order followed by the bias.

mod adam;
mod gaussian;
mod mlp;
mod params;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use gaussian::{gaussian_entropy, gaussian_log_density, HALF_LN_2PI};
pub use mlp::{
    backward_batch, forward_batch, forward_batch_cached, mlp_backward, mlp_forward, rows_to_array, Activation,
    ForwardCache, MlpSpec,
};
pub use params::ParamVector;
pub(crate) use params::{read_f64, read_u32, read_u64};
