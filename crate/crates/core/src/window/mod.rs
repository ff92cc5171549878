//! Uniform MPS with windows.

mod energy;
mod state;
mod tdvp;

pub use energy::{tensor_to_vector, vector_to_tensor, SiteOperator, WindowEnvironments, WindowHamiltonian};
pub use state::{max_abs_diff, Background, WindowMps};
pub use tdvp::{
    fidelity_distance, optimize_window, tangent_energy_weights, tangents, tdvp_imaginary_step, window_fidelity,
    CellTangent, Side, TangentGauge, TdvpOptions, TdvpResult, TdvpStep, ENV_FLOOR,
};
