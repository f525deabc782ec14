//! Thermodynamic formalism on subshifts of finite type.
//!
//! Transfer operators and their Perron eigendata, Gibbs and eigen-measures,
//! pressure and entropy (spectral and variational), the Bowen equation, and
//! measure-level KMS conditions. Every deeper-range potential is reduced to a
//! two-coordinate one by higher-block recoding, so all quantities come down to
//! finite nonnegative matrices.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod kms;
pub mod spectral;
pub mod symbolic;
pub mod thermo;
pub mod transfer;

pub use error::{Error, Result};
pub use kms::{kms_measure, v_algebra_beta, KmsInstance, KmsState};
pub use nalgebra;
pub use spectral::{
    convergence_report, eigen_measure_cylinder, gibbs_measure, rpf_solve, spectral_gap, ConvergenceReport,
    GibbsMeasure, MarkovMeasure, SpectralData,
};
pub use symbolic::{higher_block_recode, CylinderFunction, CylinderPotential, Recoded, SubshiftSpec, Word};
pub use thermo::{bowen_root, entropy_oracle, entropy_variational, equilibrium_check, pressure, pressure_minmax};
pub use transfer::{CylinderMeasure, TransferOperator};
