//! Gaussian machinery shared by every model engine: multivariate normals,
//! normal-inverse-Wishart updates, GP conditioning on diagonal evidence, and
//! forward-filter backward-sample for linear dynamical systems.

pub mod gp;
pub mod lds;
pub mod mvn;
pub mod niw;

pub use gp::{gp_conditional, gp_conditional_with_gram, gp_predict_given_latent, gp_predict_marginal, GpSpec, Kernel};
pub use lds::{lds_ffbs, lds_filter, lds_log_evidence, lds_param_posterior_sample, LdsParams, LdsPriors};
pub use mvn::{cholesky_jittered, condition_diag, mvn_log_pdf, mvn_sample, MvnParams};
pub use niw::{niw_posterior_sample, sample_inverse_wishart, sample_niw, NiwParams};
