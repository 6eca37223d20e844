//! Stick-breaking correlated topic model: generation, Gibbs sampling,
//! stochastic variational inference, held-out evaluation and an LDA baseline.

pub mod corpus;
pub mod gibbs;
pub mod heldout;
pub mod lda;
pub mod svi;

pub use corpus::{build_vocab, encode_words, parse_vocab, tokenize_words, Corpus};
pub use gibbs::{ctm_generate, ctm_gibbs_sweep, sample_categorical, topic_correlation, CtmGenSpec, CtmHyper, CtmState};
pub use heldout::{heldout_predictive_ll, split_document, topics_from_counts, DocPrior, HeldoutOptions, HeldoutResult, TopicSample};
pub use lda::{lda_collapsed_gibbs, lda_sweep, LdaOptions, LdaState};
pub use svi::{ctm_svi_step, expected_omega, gauss_hermite, CtmVarState, SuffStats, SviOptions};
