//! File formats, configuration, batch orchestration and reporting.

mod combine;
mod config;
mod io;
mod report;
mod synthset;

pub use combine::{
    combine, run_combine, weighted_average_baseline, Baseline, CombineOptions, CombineOutput,
    FileSource, ObservationSource,
};
pub use config::{
    parse_pairs, sidecar_path, ChannelMode, InitMode, Registration, RenderSource, RunConfig,
    SynthConfig, WeightMode, IMAGE_EXTENSIONS,
};
pub use io::{decode_image, luminance, stretch_to_u16, write_image, DecodedImage};
pub use report::{ChannelMetrics, MetricsReport};
pub use synthset::{write_synthetic_set, SynthSummary};
