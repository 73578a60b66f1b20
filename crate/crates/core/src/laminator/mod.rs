//! Simple and multi-scale laminates as exact point evaluators, rasterization and
//! Monte-Carlo fraction accounting.

mod field;
mod hierarchical;
mod sampling;
mod simple;

pub use field::{Evaluator, Field, Label, LabelKind, Raster, LABEL_NONE};
pub use hierarchical::{hierarchical_laminate, LaminateSchedule, SCHEDULE_CONDITION_TOL};
pub use sampling::{
    cell_center, fraction_report, rasterize, rasterize_supersampled, rasterize_with_cap, FractionReport, LevelResidual,
    ValueFraction, DEFAULT_RASTER_CAP_BYTES, MIN_SAMPLES,
};
pub use simple::{simple_laminate, simple_laminate_slot, unchecked_laminate, SimpleLaminate, JUMP_TOL};
