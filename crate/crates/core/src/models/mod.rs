//! Continuous-density HMMs with diagonal Gaussian-mixture emissions
//! (a one-state model is a GMM), trained by EM and scored with the
//! scaled forward algorithm.

mod hmm;
mod kmeans;
mod train;

pub use hmm::{log_likelihood, CdhmmModel, GaussianComponent, Score};
pub use kmeans::{kmeans_init, KMeans, MAX_LLOYD_ITERS};
pub use train::{em_train, em_train_report, TrainOptions, TrainReport};
