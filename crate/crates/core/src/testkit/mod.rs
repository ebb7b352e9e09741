//! Independent references and seeded fixtures used to check the main code
//! paths: a portable random stream, a naive Frequent Directions oracle and
//! the golden-case format.

mod golden;
mod reference;
mod rng;

pub use golden::{
    case_archive, checksum, gaussian_matrix, generate_case, random_archive, sweep_parameters, GoldenCase, GoldenFile,
    GOLDEN_FORMAT,
};
pub use reference::{jacobi_svd, reference_fd, JacobiSvd};
pub use rng::{stream_seed, CounterRng};
