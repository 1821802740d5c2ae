//! Diagonalization and spectral statistics: density of states, unfolded
//! level spacings, RMS deviations from the Poisson and Wigner-Dyson laws, and
//! the energies where the two deviations cross.

mod dos;
mod eigen;
mod pchip;
mod spacing;
mod transition;

pub use dos::{
    dos_density, support_width, tail_exponent, DensityBin, DensityCurve, DosBinning, Moments,
    SlopeFit, SpectrumAccumulator, TailFit,
};
pub use eigen::{eigenvalues, eigenvalues_seeded};
pub use pchip::Pchip;
pub use spacing::{
    rms_deviation, unfold, window_deviations, SpacingAccumulator, SpacingLaw, Unfolding,
    UnfoldedSpacings, Window, WindowSet, SPACING_BINS, SPACING_MAX,
};
pub use transition::{transition_energies, Dominant, SideResult, TransitionResult, TransitionSettings};
