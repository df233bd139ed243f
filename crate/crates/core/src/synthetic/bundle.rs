//! On-disk layout of a generated scenario.

use std::fs;
use std::path::Path;

use super::GroundTruthBundle;
use crate::bev::{decode_indexed_png, decode_point_cloud, encode_indexed_png, encode_point_cloud};
use crate::bev::{BevMap, CameraModel, SemanticFrame};
use crate::error::{Error, Result};
use crate::evaluation::TruthDocument;
use crate::pose::{parse_pose_csv, write_pose_csv};
use crate::skeleton::{build_skeleton, parse_network_json, write_network_json};

/// Files present in every bundle; frames and clouds are optional.
pub const BUNDLE_FILES: [&str; 5] = [
    "skeleton.json",
    "bev.png",
    "poses.csv",
    "camera.txt",
    "truth.json",
];

fn write(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn read(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub fn write_bundle(bundle: &GroundTruthBundle, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write(&dir.join("skeleton.json"), write_network_json(&bundle.network).as_bytes())?;
    write(&dir.join("bev.png"), &encode_indexed_png(&bundle.bev.to_raster())?)?;
    write(&dir.join("poses.csv"), write_pose_csv(&bundle.poses).as_bytes())?;
    write(&dir.join("camera.txt"), bundle.camera.to_text().as_bytes())?;
    write(&dir.join("truth.json"), serde_json::to_string_pretty(&bundle.truth)?.as_bytes())?;
    if !bundle.frames.is_empty() {
        let frames = dir.join("frames");
        fs::create_dir_all(&frames).map_err(|e| Error::io(&frames, e))?;
        for (i, f) in bundle.frames.iter().enumerate() {
            write(&frames.join(format!("{i:04}.png")), &f.to_png()?)?;
        }
        for (i, c) in bundle.clouds.iter().enumerate() {
            write(&dir.join(format!("cloud_{i:04}.bin")), &encode_point_cloud(c))?;
        }
    }
    Ok(())
}

/// Sorted `NNNN.png` files of a frames directory; empty when it is absent.
pub fn frame_paths(frames: &Path) -> Result<Vec<std::path::PathBuf>> {
    if !frames.is_dir() {
        return Ok(Vec::new());
    }
    let mut out: Vec<_> = fs::read_dir(frames)
        .map_err(|e| Error::io(frames, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "png"))
        .collect();
    out.sort();
    Ok(out)
}

/// Sorted `cloud_NNNN.bin` files of a directory.
pub fn cloud_paths(dir: &Path) -> Result<Vec<std::path::PathBuf>> {
    let mut out: Vec<_> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.file_name()
                .and_then(|n| n.to_str())
                .is_some_and(|n| n.starts_with("cloud_") && n.ends_with(".bin"))
        })
        .collect();
    out.sort();
    Ok(out)
}

pub fn read_bundle(dir: &Path) -> Result<GroundTruthBundle> {
    let network = parse_network_json(&read_text(&dir.join("skeleton.json"))?)?;
    let skeleton = build_skeleton(&network)?;
    let bev = BevMap::from_raster(&decode_indexed_png(&read(&dir.join("bev.png"))?)?)?;
    let poses = parse_pose_csv(&read_text(&dir.join("poses.csv"))?)?;
    let camera = CameraModel::parse(&read_text(&dir.join("camera.txt"))?)?;
    let truth: TruthDocument = serde_json::from_str(&read_text(&dir.join("truth.json"))?)?;
    let frames = frame_paths(&dir.join("frames"))?
        .iter()
        .map(|p| SemanticFrame::from_png(&read(p)?))
        .collect::<Result<Vec<_>>>()?;
    let clouds = cloud_paths(dir)?
        .iter()
        .map(|p| decode_point_cloud(&read(p)?))
        .collect::<Result<Vec<_>>>()?;
    Ok(GroundTruthBundle {
        spec: None,
        network,
        skeleton,
        bev,
        poses,
        camera,
        frames,
        clouds,
        truth,
    })
}
