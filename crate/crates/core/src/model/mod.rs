//! Plant and predictor representations, the admissible parameter box and
//! its projection, and the minimum-phase check.

pub mod param_box;
pub mod plant;
pub mod presets;
pub mod schedule;

pub use param_box::{
    box_norm, check_assumption1, project_onto_box, Assumption1Report, Assumption1Violation,
    CoefficientBox, ParameterBox, Sign,
};
pub use plant::{
    plant_step, predictor_form, predictor_gap, predictor_step, to_predictor, wbar,
    InitialCondition, PlantParameters, PredictorForm, PredictorParameters,
};
pub use schedule::{CoefficientWave, PlantSchedule, TimeVaryingPlant};
