use std::path::Path as FsPath;

use serde::{Deserialize, Serialize};

use super::{Landmark, Room, Scene};
use crate::error::{Error, Result};

pub const SCENE_FORMAT: &str = "seqnav-scene/1";

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SceneDoc {
    format: String,
    id: String,
    width: usize,
    height: usize,
    resolution: f64,
    /// Run-length pairs `[value, count]`, row-major from row 0.
    occupancy: Vec<(u8, usize)>,
    semantics: Vec<(u8, usize)>,
    rooms: Vec<Room>,
    landmarks: Vec<Landmark>,
}

fn rle<T: Copy + PartialEq>(values: impl IntoIterator<Item = T>) -> Vec<(T, usize)> {
    let mut out: Vec<(T, usize)> = Vec::new();
    for v in values {
        match out.last_mut() {
            Some((last, n)) if *last == v => *n += 1,
            _ => out.push((v, 1)),
        }
    }
    out
}

fn unrle(runs: &[(u8, usize)], expected: usize, what: &str) -> Result<Vec<u8>> {
    let total: usize = runs.iter().map(|r| r.1).sum();
    if total != expected {
        return Err(Error::contract(format!("{what} runs cover {total} cells, grid has {expected}")));
    }
    Ok(runs.iter().flat_map(|&(v, n)| std::iter::repeat_n(v, n)).collect())
}

pub fn scene_to_json(scene: &Scene) -> Result<String> {
    let doc = SceneDoc {
        format: SCENE_FORMAT.to_string(),
        id: scene.id.clone(),
        width: scene.width,
        height: scene.height,
        resolution: scene.resolution,
        occupancy: rle(scene.blocked.iter().map(|&b| b as u8)),
        semantics: rle(scene.semantics.iter().copied()),
        rooms: scene.rooms.clone(),
        landmarks: scene.landmarks.clone(),
    };
    Ok(serde_json::to_string(&doc)?)
}

pub fn scene_from_json(text: &str) -> Result<Scene> {
    let value: serde_json::Value = serde_json::from_str(text)?;
    let found = value.get("format").and_then(|f| f.as_str()).unwrap_or("<missing>");
    if found != SCENE_FORMAT {
        return Err(Error::Format { found: found.to_string(), expected: SCENE_FORMAT.to_string() });
    }
    let doc: SceneDoc = serde_json::from_value(value)?;
    let n = doc.width * doc.height;
    let occupancy = unrle(&doc.occupancy, n, "occupancy")?;
    if occupancy.iter().any(|&v| v > 1) {
        return Err(Error::contract("occupancy values must be 0 or 1"));
    }
    let semantics = unrle(&doc.semantics, n, "semantics")?;
    Scene::from_grid(
        doc.id,
        doc.width,
        doc.height,
        doc.resolution,
        occupancy.into_iter().map(|v| v == 1).collect(),
        semantics,
        doc.rooms,
        doc.landmarks,
    )
}

pub fn write_scene(path: impl AsRef<FsPath>, scene: &Scene) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, scene_to_json(scene)?).map_err(|e| Error::io(path, e))
}

pub fn read_scene(path: impl AsRef<FsPath>) -> Result<Scene> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    scene_from_json(&text)
}
