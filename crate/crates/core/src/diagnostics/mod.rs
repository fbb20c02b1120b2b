//! Dense spectra, eigenvalue-bound checks, image metrics, noise injection
//! and the Shepp-Logan phantom.

pub mod metrics;
pub mod phantom;
pub mod spectrum;
pub mod theorem;

pub use metrics::{add_noise_to_target, psnr, relative_error, snr, Decibels};
pub use phantom::shepp_logan;
pub use spectrum::{
    densify, densify_and_eig, preconditioned_spectrum, SpectralReport, DENSE_LIMIT,
};
pub use theorem::{check_theorem_instance, TheoremCheck};
