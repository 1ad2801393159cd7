pub mod cli;
pub mod dssp;
pub mod export;
pub mod geometry;
pub mod hierarchy;
pub mod pdbio;
pub mod schull;
pub mod synth;
pub mod wlref;
