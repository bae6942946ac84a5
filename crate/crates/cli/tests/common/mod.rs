//! Helpers for driving the `lowlight` binary.
#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use lowlight_core::imgcore::save_png;

use crate::support::scene_image;

pub fn bin() -> PathBuf {
    PathBuf::from(env!("CARGO_BIN_EXE_lowlight"))
}

pub fn run<I, S>(args: I) -> Output
where
    I: IntoIterator<Item = S>,
    S: AsRef<std::ffi::OsStr>,
{
    Command::new(bin()).args(args).output().expect("spawn lowlight")
}

pub fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

pub fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

pub fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

pub fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

/// Every file under `dir`, keyed by relative path.
pub fn tree(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    fn walk(root: &Path, dir: &Path, out: &mut BTreeMap<PathBuf, Vec<u8>>) {
        for entry in std::fs::read_dir(dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                walk(root, &path, out);
            } else {
                out.insert(path.strip_prefix(root).unwrap().to_path_buf(), std::fs::read(&path).unwrap());
            }
        }
    }
    let mut out = BTreeMap::new();
    walk(dir, dir, &mut out);
    out
}

/// A few scene-like PNGs of different sizes.
pub fn source_dir(dir: &Path) {
    std::fs::create_dir_all(dir).unwrap();
    for (i, (w, h)) in [(160u32, 120u32), (128, 128), (200, 96), (96, 150)].into_iter().enumerate() {
        save_png(&scene_image(w, h, i as u64 + 1), dir.join(format!("img{i}.png"))).unwrap();
    }
}

/// Annotations with a few boxes per image of [`source_dir`].
pub fn source_annotations(path: &Path) {
    let sizes = [(160u32, 120u32), (128, 128), (200, 96), (96, 150)];
    let images: Vec<_> = sizes
        .iter()
        .enumerate()
        .map(|(i, (w, h))| serde_json::json!({"id": i + 1, "file_name": format!("img{i}.png"), "width": w, "height": h}))
        .collect();
    let mut anns = Vec::new();
    for (i, (w, h)) in sizes.iter().enumerate() {
        for (j, (fx, fy, fw, fh)) in [(0.1, 0.1, 0.5, 0.6), (0.4, 0.3, 0.5, 0.5), (0.7, 0.7, 0.4, 0.4)].into_iter().enumerate() {
            anns.push(serde_json::json!({
                "id": i * 10 + j + 1,
                "image_id": i + 1,
                "category_id": 1 + (j as u64 % 3),
                "bbox": [fx * *w as f64, fy * *h as f64, fw * *w as f64, fh * *h as f64],
                "attributes": {"extreme": j == 0, "truncated": false, "occluded": j == 2},
            }));
        }
    }
    let doc = serde_json::json!({
        "images": images,
        "annotations": anns,
        "categories": [{"id": 1, "name": "person"}, {"id": 2, "name": "bicycle"}, {"id": 3, "name": "car"}],
    });
    std::fs::write(path, serde_json::to_string_pretty(&doc).unwrap()).unwrap();
}
