//! Locating paired images and manifests on disk.

use std::fs;
use std::path::{Path, PathBuf};

use specklab_core::imgprep::{DatasetManifest, Split};
use specklab_core::{Error, Result};

pub const MANIFEST: &str = "manifest.csv";
pub const PREPARED: &str = "prepared";

fn is_image(p: &Path) -> bool {
    matches!(p.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref(), Some("png" | "jpg" | "jpeg"))
}

fn read_dir_sorted(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut v: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::Io { path: dir.to_path_buf(), source: e })?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .collect();
    v.sort();
    Ok(v)
}

/// Image files in `dir` and its immediate subdirectories, sorted. A single
/// image path is returned as is. Subdirectories named in `skip` are ignored.
pub fn list_images(dir: &Path, skip: &[&str]) -> Result<Vec<PathBuf>> {
    if dir.is_file() {
        return Ok(vec![dir.to_path_buf()]);
    }
    let mut out = Vec::new();
    for p in read_dir_sorted(dir)? {
        if p.is_dir() {
            if p.file_name().and_then(|n| n.to_str()).is_some_and(|n| skip.contains(&n)) {
                continue;
            }
            out.extend(read_dir_sorted(&p)?.into_iter().filter(|q| q.is_file() && is_image(q)));
        } else if is_image(&p) {
            out.push(p);
        }
    }
    if out.is_empty() {
        return Err(Error::Decode { path: dir.to_path_buf(), reason: "no PNG or JPEG images found".into() });
    }
    Ok(out)
}

/// Group of an image: its subdirectory under `root`, else the file stem
/// up to `__`, else the whole stem.
pub fn group_of(root: &Path, path: &Path) -> String {
    if let Some(parent) = path.parent() {
        if parent != root {
            if let Some(name) = parent.file_name().and_then(|n| n.to_str()) {
                return name.to_string();
            }
        }
    }
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("image");
    stem.split_once("__").map_or(stem, |(g, _)| g).to_string()
}

/// Manifest in `dataroot` or in its `prepared` subdirectory.
pub fn find_manifest(dataroot: &Path) -> Option<PathBuf> {
    [dataroot.join(MANIFEST), dataroot.join(PREPARED).join(MANIFEST)].into_iter().find(|p| p.is_file())
}

/// Pair paths and groups for `split`. With no manifest every image under
/// `dataroot` is used regardless of split.
pub fn pair_files(dataroot: &Path, split: Option<Split>) -> Result<Vec<(PathBuf, String)>> {
    match find_manifest(dataroot) {
        Some(m) => {
            let base = m.parent().unwrap_or(Path::new("."));
            let manifest = DatasetManifest::read_csv(&m)?;
            Ok(manifest
                .entries
                .into_iter()
                .filter(|e| split.is_none_or(|s| s == e.split))
                .map(|e| (if e.path.is_absolute() { e.path } else { base.join(e.path) }, e.group_id))
                .collect())
        }
        None => Ok(list_images(dataroot, &[PREPARED])?.into_iter().map(|p| {
            let g = group_of(dataroot, &p);
            (p, g)
        }).collect()),
    }
}
