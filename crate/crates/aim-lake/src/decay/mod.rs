//! Energy inequalities, Fourier splitting and decay envelopes on the torus.

mod ledger;
mod split;
mod study;

pub use ledger::*;
pub use split::*;
pub use study::*;
