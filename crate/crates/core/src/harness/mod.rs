//! Manifests, synthetic data and the experiment workflows.

pub mod data;
pub mod experiment;
pub mod manifest;
pub mod synth;

pub use data::{load_samples, partition_tag, sigma_at_side, BfmCache, Partition, Sample};
pub use experiment::{
    evaluate_model, perturbation_curve, run_boundary_perturbation, run_experiment, run_experiment_at,
    run_experiment_cross, run_experiment_single, run_pretrain_transfer, run_sigma_sweep, ExperimentOutput,
    ExperimentSpec, PerturbationPoint, Workflow, DEFAULT_RADII, DEFAULT_SIGMA_GRID,
};
pub use manifest::{load_manifest, write_manifest, Manifest, SampleLabel, SampleRecord, Split, MANIFEST_HEADER};
pub use synth::{roughness, synth_dataset, synth_generate, synth_generate_many, synth_sample, SynthConfig, SynthSample};
