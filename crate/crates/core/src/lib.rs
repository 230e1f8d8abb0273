pub mod coupling;
pub mod fem;
pub mod harness;
pub mod numerics;
pub mod oracle;
pub mod reduction;
pub mod stabilization;
pub mod tolerances;
