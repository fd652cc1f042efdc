//! Block-structured graphical models: variables partitioned into groups, edges
//! partitioned into within- and between-group blocks, each with its own penalty.

pub mod calibrate;
pub mod structure;

pub use calibrate::{
    assemble_penalty, block_lambda_grid, block_lambda_max, calibrate_blockwise, calibrate_multiparameter, BlockCalibration,
    MultiBlockResult, MultiBlockSettings, DEFAULT_LAMBDA0, MAX_JOINT_CELLS,
};
pub use structure::BlockStructure;
