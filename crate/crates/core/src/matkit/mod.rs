//! Small dense matrix algebra and the algebraic constructions on three-matrix sets.

mod instance;
mod linalg;
mod mat;
mod reduction;

pub use instance::{
    build_instance, eigen_lambda, verify_conditions, ConditionReport, InstanceParams,
    LaminationInstance,
};
pub use linalg::{
    invariant_block_rotation, is_pairwise_rank_n, kernel_dimension, kernel_direction,
    numerical_rank, rank_of_difference, sign_normalize, singular_values, top_right_block_norm,
    DEFAULT_RANK_TOL,
};
pub use mat::{Mat, MatrixSet};
pub use reduction::{find_rank_preserving_f, normalize_triple, AffineReduction, MAX_F_ATTEMPTS};
