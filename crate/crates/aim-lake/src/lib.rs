pub mod error;
pub mod expr;
pub mod fields;
pub mod grid;
pub mod scalar;
pub mod stream;
pub mod velocity;
pub mod basis;
pub mod report;
pub mod state;
pub mod stats;
pub mod dynamics;
pub mod forcing;
pub mod aim;
pub mod oracle;
pub mod decay;
pub mod scenario;
pub mod pipeline;
