//! Scene ingestion, tuple selection, synthetic scenes and orchestration.

mod run;
mod scene;
mod synth;
mod tuples;

pub use run::{
    evaluate_depth_dir, fuse_depth_maps, infer_stride, load_depth_dir, run_depth, write_depth_outputs,
    DepthRun, DepthRunReport, FuseReport, PipelineConfig, TupleDepth, TupleFailure,
};
pub use scene::{
    load_frames, load_gt_depth, load_image, load_scene, save_gray16_png, write_scene, FrameEntry, Scene,
    SceneManifest, DEFAULT_DEPTH_SCALE, MANIFEST_POSE_TOLERANCE,
};
pub use synth::{
    central_frame_index, sphere_sdf, synth_scene, CameraLayout, SynthConfig, SynthKind, SPHERE_CENTER,
    SPHERE_RADIUS,
};
pub use tuples::{
    overlap_score, select_tuples_overlap, select_tuples_pose, OverlapTupleConfig, PoseTupleConfig,
    TupleSelection, TupleSpec,
};
