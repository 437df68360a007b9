//! Scene manifests and image / depth loading.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use image::{DynamicImage, ImageBuffer, Luma};
use serde::{Deserialize, Serialize};

use crate::depth::{load_depth_map, load_depth_png, save_depth_map, DepthMap};
use crate::error::{MvsError, Result};
use crate::features::ImageGrid;
use crate::geometry::{CameraFrame, Intrinsics, RigidPose};

/// Orthonormality tolerance applied to manifest poses.
pub const MANIFEST_POSE_TOLERANCE: f64 = 1e-4;

pub const DEFAULT_DEPTH_SCALE: f64 = 1000.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameEntry {
    pub id: String,
    /// Image path, relative to the manifest's directory unless absolute.
    pub image: PathBuf,
    pub intrinsics: Intrinsics,
    /// Row-major 4x4 world-from-camera matrix.
    pub world_from_camera: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gt_depth: Option<PathBuf>,
    /// Divisor applied to 16-bit depth PNGs; ignored for `.mvsd` files.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub depth_scale: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneManifest {
    #[serde(default)]
    pub units: String,
    pub frames: Vec<FrameEntry>,
}

impl SceneManifest {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| {
            let offset = line_col_offset(text, e.line(), e.column());
            MvsError::format(offset, format!("invalid scene manifest: {e}"))
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest always serializes")
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()).map_err(|e| MvsError::io(path, e))
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.frames.iter().position(|f| f.id == id)
    }
}

pub(crate) fn line_col_offset(text: &str, line: usize, column: usize) -> usize {
    let start: usize = text
        .split_inclusive('\n')
        .take(line.saturating_sub(1))
        .map(str::len)
        .sum();
    start + column.saturating_sub(1)
}

/// A manifest plus its frames, loaded and validated.
#[derive(Debug, Clone)]
pub struct Scene {
    pub manifest: SceneManifest,
    pub frames: Vec<CameraFrame>,
    pub root: PathBuf,
}

impl Scene {
    pub fn frame(&self, id: &str) -> Option<&CameraFrame> {
        self.frames.iter().find(|f| f.id == id)
    }
}

fn resolve(root: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        root.join(p)
    }
}

/// Reads an 8- or 16-bit PNG or a PGM/PPM into `[0, 1]` floats. Colour
/// images keep three channels; alpha is dropped.
pub fn load_image(path: &Path) -> Result<ImageGrid> {
    let bytes = std::fs::read(path).map_err(|e| MvsError::io(path, e))?;
    let img = image::load_from_memory(&bytes)
        .map_err(|e| MvsError::format(0, format!("{}: cannot decode image: {e}", path.display())))?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    let grid = match img {
        DynamicImage::ImageLuma8(b) => ImageGrid::new(
            w,
            h,
            1,
            b.into_raw().into_iter().map(|v| v as f32 / 255.0).collect(),
        ),
        DynamicImage::ImageLuma16(b) => ImageGrid::new(
            w,
            h,
            1,
            b.into_raw().into_iter().map(|v| v as f32 / 65535.0).collect(),
        ),
        DynamicImage::ImageLumaA8(_) => ImageGrid::new(
            w,
            h,
            1,
            img.to_luma8()
                .into_raw()
                .into_iter()
                .map(|v| v as f32 / 255.0)
                .collect(),
        ),
        other if other.color().bytes_per_pixel() / other.color().channel_count() >= 2 => ImageGrid::new(
            w,
            h,
            3,
            other
                .to_rgb16()
                .into_raw()
                .into_iter()
                .map(|v| v as f32 / 65535.0)
                .collect(),
        ),
        other => ImageGrid::new(
            w,
            h,
            3,
            other
                .to_rgb8()
                .into_raw()
                .into_iter()
                .map(|v| v as f32 / 255.0)
                .collect(),
        ),
    };
    grid.map_err(|e| MvsError::Data(format!("{}: {e}", path.display())))
}

/// Writes a single-channel image as a 16-bit grayscale PNG.
pub fn save_gray16_png(img: &ImageGrid, path: &Path) -> Result<()> {
    let gray = img.to_gray();
    let raw: Vec<u16> = gray
        .iter()
        .map(|v| (v.clamp(0.0, 1.0) * 65535.0).round() as u16)
        .collect();
    let buf: ImageBuffer<Luma<u16>, Vec<u16>> =
        ImageBuffer::from_raw(img.width as u32, img.height as u32, raw).expect("buffer size matches");
    buf.save_with_format(path, image::ImageFormat::Png)
        .map_err(|e| MvsError::Pipeline(format!("{}: cannot write PNG: {e}", path.display())))
}

/// Loads a ground-truth depth file: `.mvsd` as-is, anything else as a
/// 16-bit PNG divided by `depth_scale`.
pub fn load_gt_depth(path: &Path, depth_scale: Option<f64>) -> Result<DepthMap> {
    let is_mvsd = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("mvsd"));
    if is_mvsd {
        load_depth_map(path)
    } else {
        load_depth_png(path, depth_scale.unwrap_or(DEFAULT_DEPTH_SCALE))
    }
}

/// Reads and validates a manifest and every frame it lists.
pub fn load_scene(path: &Path) -> Result<Scene> {
    let text = std::fs::read_to_string(path).map_err(|e| MvsError::io(path, e))?;
    let manifest = SceneManifest::from_json(&text)?;
    let root = path.parent().map(Path::to_path_buf).unwrap_or_default();
    let frames = load_frames(&manifest, &root)?;
    Ok(Scene {
        manifest,
        frames,
        root,
    })
}

pub fn load_frames(manifest: &SceneManifest, root: &Path) -> Result<Vec<CameraFrame>> {
    if manifest.frames.is_empty() {
        return Err(MvsError::Data("scene manifest lists no frames".into()));
    }
    let mut seen = HashSet::new();
    for f in &manifest.frames {
        if !seen.insert(f.id.as_str()) {
            return Err(MvsError::Data(format!("duplicate frame id {:?}", f.id)));
        }
    }
    manifest
        .frames
        .iter()
        .map(|f| {
            let pose = RigidPose::from_row_major(&f.world_from_camera, MANIFEST_POSE_TOLERANCE)
                .map_err(|e| MvsError::Data(format!("frame {:?}: malformed pose: {e}", f.id)))?;
            let image = load_image(&resolve(root, &f.image))?;
            let gt = f
                .gt_depth
                .as_ref()
                .map(|p| load_gt_depth(&resolve(root, p), f.depth_scale))
                .transpose()?;
            CameraFrame::new(f.id.clone(), f.intrinsics, pose, image, gt)
                .map_err(|e| MvsError::Data(e.to_string()))
        })
        .collect()
}

/// Writes frames as 16-bit PNGs plus `.mvsd` ground truth and returns the
/// manifest describing them (paths relative to `dir`).
pub fn write_scene(frames: &[CameraFrame], dir: &Path, units: &str) -> Result<SceneManifest> {
    for sub in ["images", "gt"] {
        let d = dir.join(sub);
        std::fs::create_dir_all(&d).map_err(|e| MvsError::io(&d, e))?;
    }
    let mut entries = Vec::with_capacity(frames.len());
    for f in frames {
        let image = PathBuf::from("images").join(format!("{}.png", f.id));
        save_gray16_png(&f.image, &dir.join(&image))?;
        let gt_depth = match &f.gt_depth {
            Some(d) => {
                let p = PathBuf::from("gt").join(format!("{}.mvsd", f.id));
                save_depth_map(d, dir.join(&p))?;
                Some(p)
            }
            None => None,
        };
        entries.push(FrameEntry {
            id: f.id.clone(),
            image,
            intrinsics: f.intrinsics,
            world_from_camera: f.world_from_camera().to_row_major().to_vec(),
            gt_depth,
            depth_scale: None,
        });
    }
    let manifest = SceneManifest {
        units: units.to_string(),
        frames: entries,
    };
    manifest.save(&dir.join("scene.json"))?;
    Ok(manifest)
}
