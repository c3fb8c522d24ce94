//! One-dimensional grid quantum mechanics with `hbar = m = 1`.

pub mod decomposition;
pub mod evolution;
pub mod many_body;
pub mod wavefunction;

pub use decomposition::{
    detect_particle_decomposition, detect_with, Decomposition, DetectorOptions,
};
pub use evolution::{
    ehrenfest_residual, ehrenfest_trace, evolve, unitarity_orthogonality_check, EhrenfestSample,
    EhrenfestTrace, Hamiltonian, DEFAULT_TIME_STEP,
};
pub use many_body::{
    inner, permutation_check, reduced_density, symmetrize, DensityOperator, ManyBodyState,
    PermutationClass, Symmetry, Term,
};
pub use wavefunction::{gaussian_packet, overlap, support_overlap, Grid, WaveFunction};
