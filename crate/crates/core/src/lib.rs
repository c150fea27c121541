//! P&L attribution of smooth functions of multi-factor paths.
//!
//! Grid decompositions (sequential updating, one-at-a-time and their
//! order-averages) are exact on the observation grid. The closed forms in
//! [`limit`] are their limits under mesh refinement, computed from first and
//! second derivatives plus jump brackets.

pub mod applications;
pub mod cli;
pub mod counterexamples;
pub mod decomposition;
pub mod error;
pub mod grid;
pub mod io;
pub mod limit;
pub mod normal;
pub mod path;
pub mod payoff;
pub mod schedule;
pub mod simulate;

pub use decomposition::{Decomposition, Method};
pub use error::{AttribError, Result};
pub use grid::{asu_decompose, asu_two_perm, oat_decompose, su_decompose};
pub use limit::{
    continuous_triple, iasu_closed_form, iasu_portfolio, iasu_two_perm, interaction_matrix, ioat_closed_form,
    isu_closed_form, isu_no_simul_jumps, InteractionMatrix,
};
pub use path::Path;
pub use payoff::{Payoff, SharedPayoff};
pub use schedule::{Permutation, UpdateSchedule};
