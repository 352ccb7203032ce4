//! Limiting entrance/exit map at saddles and the induced law on saddle sequences.

mod dist;
mod saddle;
mod tree;

pub use dist::{Distribution, EtaLaw, EtaTerm, Gaussian, Symmetry, SymmetryTag};
pub use saddle::{
    beta_exponent, dwell_fluctuation_samples, exit_distribution, kappa_dist, split_probabilities, stable_cov,
    stable_cov_quadrature, unstable_cov, unstable_cov_quadrature, ExitCase, Split,
};
pub use tree::{
    branch_seed, classify_set, enumerate_sequences, exit_measure, path_string, psi, root_entrance, AdmissibleSequence,
    EnumerationMode, ExitAtom, ExitData, ExitMeasure, PredictConfig, PsiOutput, SetClassification, Step,
};
