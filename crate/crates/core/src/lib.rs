//! Earthmoving transport planning, lattice motion planning and a
//! closed-loop grading simulator.

pub mod cli;
pub mod gridmap;
pub mod kinem;
pub mod lp;
pub mod nodes;
pub mod sim;
pub mod transport;
pub mod triplets;
