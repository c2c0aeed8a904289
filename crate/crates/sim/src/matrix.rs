use rayon::prelude::*;
use streamreg::datagen::DatasetSpec;
use streamreg::LearnerConfig;

use crate::session::{run_session, SessionReport};

/// One report per (config, dataset) pair, config-major, independent of scheduling.
pub fn run_matrix(configs: &[LearnerConfig], datasets: &[DatasetSpec], parallelism: usize, trace: bool) -> Vec<SessionReport> {
    let jobs: Vec<(usize, usize)> = (0..configs.len()).flat_map(|c| (0..datasets.len()).map(move |d| (c, d))).collect();
    let run = |&(c, d): &(usize, usize)| {
        let spec = &datasets[d];
        let config = configs[c].clone().with_seed(configs[c].seed ^ spec.seed);
        match spec.generate() {
            Ok(stream) => run_session(&config, &spec.name(), &stream, trace),
            Err(e) => SessionReport::failed(&config.codename(), &spec.name(), e),
        }
    };
    match rayon::ThreadPoolBuilder::new().num_threads(parallelism.max(1)).build() {
        Ok(pool) => pool.install(|| jobs.par_iter().map(run).collect()),
        Err(_) => jobs.iter().map(run).collect(),
    }
}
