//! Semantic bird's-eye-view construction: class taxonomy, camera model,
//! ground mesh, inverse projection and vote accumulation.

pub mod camera;
pub mod cloud;
pub mod frame;
pub mod map;
pub mod mesh;
pub mod projection;
pub mod raster;
pub mod semantic;

pub use camera::CameraModel;
pub use cloud::{decode_point_cloud, encode_point_cloud};
pub use frame::SemanticFrame;
pub use map::{BevMap, BevPatch, GridSpec, DEFAULT_CELL_SIZE};
pub use mesh::{build_ground_mesh, GroundFilter, GroundMesh, MeshLocator};
pub use projection::{project_flat, project_mesh, ProjectionConfig, ProjectionMode};
pub use raster::{decode_indexed_png, encode_indexed_png, IndexedRaster};
pub use semantic::{SemanticClass, CLASS_COUNT, PALETTE};
