//! Test data, configuration, experiment presets and result files.

pub mod bundled;
pub mod config;
pub mod io;
pub mod phantom;
pub mod presets;
pub mod summary;

pub use bundled::{bundled_image, correlation_pool};
pub use config::ConfigMap;
pub use io::{load_image, save_image};
pub use phantom::generate_phantom;
pub use presets::{run_preset, ExperimentPreset, Method, PresetName, PresetReport, Problem, Scale};
pub use summary::{emit_summary, SummaryRow};
