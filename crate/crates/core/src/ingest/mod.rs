//! Source parsing, synthetic scenario generation and conversion into logs.

mod convert;
mod jsonl;
mod parser;
mod synthetic;
mod templates;

pub use convert::{convert, default_sync_config, fetch_source, interpolate_boxes, read_converted, ConvertOptions, MAP_FILE, SHARED_MAP_DIR};
pub use jsonl::{
    parse_jsonl_source, write_jsonl_source, FrameTag, JsonlParser, JsonlWriteOptions, LOG_FILE, PAYLOAD_DIR, SOURCE_FORMAT,
    SOURCE_VERSION,
};
pub use parser::{DatasetParser, ParsedLog, SourceMap};
pub use synthetic::{
    default_vehicle, generate_synthetic, stream_times, synthesize, Agent, AgentConfig, EgoPath, GroundTruth, MapTemplate,
    Motion, PlanarState, RigPreset, SyntheticScenarioConfig, DEFAULT_START_US, FRONT_CAMERA_ID, GROUND_TRUTH_FILE,
    TOP_LIDAR_ID,
};
pub use templates::{grid_map, straight_road, LANE_WIDTH_M, SPEED_LIMIT_MPS};
