//! Ergodic optimization: maximizing values by orbit enumeration and by
//! Lax–Oleinik sub-actions, level sets of the sub-action defect, and
//! cylinder-count entropy bounds.

mod entropy;
mod orbits;
mod subaction;

pub use entropy::{entropy_upper_bound, EntropyEstimate};
pub use orbits::{
    alpha_value, beta_periodic, iterate_equivalence, lyapunov_potential, lyndon_words, periodic_orbit,
    periodic_point, BetaResult, IterateCheck, PeriodicOrbit, DEFAULT_ORBIT_TOL,
};
pub use subaction::{lax_oleinik, level_set, LevelSet, LoOptions, SubActionGrid};
