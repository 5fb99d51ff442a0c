//! Concentrating sequences, their energy measures and the defect report.

mod constant;
mod detect;
mod energy;
mod fit;
mod report;
mod sequence;

pub use constant::{
    bubble_tail_energy, standard_radial_energy, standard_radial_parts, standard_threshold_radius, BubbleConstant,
};
pub use detect::{detect_sigma, Cluster, DetectConfig, Detection};
pub use energy::{
    ball_energy, bubble_energy_limit, bubble_energy_table, energy_in, neck_energy, rescale, scaled_measure,
    theta_estimate, BubbleEnergyRow, Density, EnergyConfig, EnergyValue, NeckEnergy, Region, Shell, ThetaEstimate,
    THETA_STABILITY,
};
pub use fit::{fit_bubble, BubbleFit, FitConfig};
pub use report::{quantization_report, DefectReport, InventoryEntry, PointReport, QuantizeConfig, Tolerances, SCHEMA};
pub use sequence::{
    make_sequence, BubbleSpec, BudgetSample, ConcentrationSequence, ScaleSchedule, SequenceFile, Thresholds,
};
