//! Shared fixtures for the stepper benchmarks.

use hisd_core::*;

/// Benchmark initial state: the first Rosenbrock experiment (index-1).
pub fn index1_fixture() -> (Rosenbrock, SaddleState) {
    let preset = ExperimentPreset::by_name(PresetName::A);
    (preset.model(), preset.initial_state())
}

/// Benchmark initial state: the first index-2 experiment.
pub fn index2_fixture() -> (Rosenbrock, SaddleState) {
    let preset = ExperimentPreset::by_name(PresetName::C);
    (preset.model(), preset.initial_state())
}
