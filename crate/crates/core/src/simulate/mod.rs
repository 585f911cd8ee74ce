//! Simulated matrix series, corruption and masking, and the Monte Carlo
//! experiments built on them.

mod dgp;
mod experiments;
mod noise;

pub use dgp::{corrupt, gen_panel, mask_random, DgpConfig, SimTruth};
pub use experiments::{
    align_loadings, loading_replication, run_clt_experiment, run_loading_experiment,
    run_selection_experiment, ExperimentMethod, LoadingRow, SelectionRow, SelectionSettings,
};
pub use noise::NoiseLaw;
