pub mod bits;
pub mod circuit;
pub mod error;
pub mod operators;
pub mod oracle;
pub mod planner;
pub mod state;
pub mod algorithms;
pub mod noise;
pub mod depth;
pub mod distributed;
pub mod identities;
pub mod cli;
