pub mod error;
pub mod geom;
pub mod special;
pub mod masses;
pub mod search;
pub mod flagsolve;
pub mod transversal;
pub mod kinetic;
