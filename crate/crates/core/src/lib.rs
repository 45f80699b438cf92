//! Inverse-probability-weighted Dirichlet kernel density estimation on the simplex
//! for compositional responses missing at random.
//!
//! ```
//! use simplex_kde::{ipw_kde, Composition, Covariates, Dataset};
//!
//! let x = Covariates::from_rows(&[vec![0.1], vec![0.4], vec![-0.3]]).unwrap();
//! let y = vec![
//!     Some(Composition::new(&[0.2, 0.3], 1e-12).unwrap()),
//!     None,
//!     Some(Composition::new(&[0.5, 0.1], 1e-12).unwrap()),
//! ];
//! let data = Dataset::new(x, y).unwrap();
//! let f = ipw_kde(&data, &[0.8, 0.5, 0.6], 0.1).unwrap();
//! assert!(f.evaluate(&Composition::barycenter(2)).unwrap() > 0.0);
//! ```

pub mod asymptotics;
pub mod bandwidth;
pub mod data;
pub mod error;
pub mod estimators;
pub mod io;
pub mod kernel;
pub mod logratio;
pub mod propensity;
pub mod simplex;
pub mod simulation;

pub use asymptotics::{mixture_pdf_grad_hess, phi, zeta_mc, DirichletMixture, McEstimate, TheoryPoint};
pub use bandwidth::{lscv_profile, lscv_score, select_bandwidth, LooDivisor, LscvConfig, LscvPoint};
pub use data::{Covariates, Dataset};
pub use error::{Error, Result};
pub use estimators::{complete_case_kde, full_kde, ipw_kde, ipw_logratio_kde, DensityEstimate, EstimatorKind};
pub use kernel::{kappa, psi, DirichletParams, KernelSpec};
pub use logratio::{log_ratio_forward, log_ratio_inverse, log_ratio_jacobian, LogRatio};
pub use propensity::{fit_propensity, silverman_bandwidth, PropensityFit};
pub use simplex::{build_interior_grid, closure_renormalize, Composition, SimplexGrid};
pub use simulation::{mode_on_grid, run_study, sample_dataset, ModelId, SimModel, StudyConfig};
