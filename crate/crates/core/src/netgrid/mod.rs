//! Discrete nets of the deformation system on uniform grids.

pub mod forms;
pub mod frame;
pub mod grid;
pub mod integrate;
pub mod io;
pub mod multiconj;
pub mod realize;
pub mod seed;

pub use forms::FormField;
pub use frame::{FrameField, FrameModel, FrameState};
pub use grid::{Field, GridSpec};
pub use integrate::{integrate_moving_frame, integrate_sweeps, MovingFrame, SweepOptions, SweepSystem};
pub use io::{read_field, write_field};
pub use multiconj::{extend_multiconjugate, riemann_diagonal, MultiConjugate, MultiOptions};
pub use realize::{christoffel_check, fundamental_system, realize_surface, FundamentalSystem, Realization};
pub use seed::{seed_diagonal, Seed, SeedConstants};
