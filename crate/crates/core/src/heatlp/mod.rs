//! Heat semigroup of `-Δ` on the periodic unit interval, its square
//! functions, maximal operators and off-diagonal audits.

mod maximal;
mod offdiag;
mod spectral;
mod square;
mod timegrid;

pub use maximal::{
    grand_maximal_s_star, hl_maximal, hl_maximal_to_level, lattice_lo, weak_type_constant,
};
pub use offdiag::{
    heat_kernel, offdiag_audit, periodic_distance, OffDiagReport, KERNEL_IMAGES, OFFDIAG_C,
};
pub use spectral::{apply_multiplier, heat, Spectral};
pub use square::{
    band_violation, q_apply, reproducing_check, square_function, truncated_square_function,
    ReproducingReport, SquareEngine, SquareFunctionKind, SquareOutput, MIN_SQUARE_N,
};
pub use timegrid::TimeGrid;
