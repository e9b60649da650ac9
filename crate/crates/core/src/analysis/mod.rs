//! Structural analysis of strategies: Schmidt spectra, direct-sum
//! decomposition, the relations tied to Bob's fifth question, and descent
//! chains.

pub mod blocks;
pub mod chain;
pub mod relations;
pub mod schmidt;

pub use blocks::{strategy_block_decompose, BlockDecomposition, BlockDiagnostics};
pub use chain::{descent_chain, DescentChain};
pub use relations::{check_bijections, schmidt_partition, verify_y4_relations, BijectionReport, SchmidtPartition, Y4Report};
pub use schmidt::{
    match_multisets, schmidt, schmidt_sum_check, schmidt_unnormalized, MultisetMatch, SchmidtDecomposition,
    SchmidtSpectrum, SumCheck, ZERO_CUTOFF,
};
