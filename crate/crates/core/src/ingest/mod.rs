//! File formats for clouds and scan frames, plus the synthetic scene generator.

pub mod cloud;
pub mod frames;
pub mod scene;
pub mod synth;

pub use cloud::{decode_cloud, encode_cloud, load_cloud, load_cloud_with_dim, save_cloud, write_cloud, CLOUD_MAGIC};
pub use frames::{
    load_camera, load_frames, rle_decode, rle_encode, write_frames, FrameReader, MaskKind, ScanFrame, SegmentMask,
    CAMERA_FILE, INDEX_FILE,
};
pub use scene::{SceneObject, SceneSpec, TerrainPatch};
pub use synth::{synth_scene, EntityRef, GroundTruthObject, SynthScene};
