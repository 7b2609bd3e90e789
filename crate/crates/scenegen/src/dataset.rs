//! On-disk dataset layout:
//!
//! ```text
//! <dir>/manifest.json
//! <dir>/img_<id>.pgm     16-bit graymap, value = sample / 65535
//! <dir>/den_<id>.pgm     16-bit graymap, density = sample * scale
//! <dir>/den_<id>.scale   decimal scale factor
//! ```
//!
//! Every file is covered by a SHA-256 checksum in the manifest. Density files
//! are only ever read through [`DatasetDir::load_density`], which records each
//! read in a process-wide tracker keyed by dataset directory; image reads are
//! counted the same way.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::{Mutex, OnceLock};

use numcore::Tensor;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{invalid, Result, SceneError};
use crate::types::{DensityMap, Domain, Orientation, Point, Scene, ScenePoints};

pub const MANIFEST_VERSION: u32 = 1;
const MANIFEST_FILE: &str = "manifest.json";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub version: u32,
    pub height: usize,
    pub width: usize,
    /// Free-form split name such as `target-train`.
    pub split: String,
    /// Set on unlabeled splits: ground truth is kept on disk for auditing
    /// but training must not read it.
    pub labels_withheld: bool,
    pub sigma: f64,
    pub entries: Vec<ManifestEntry>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestEntry {
    pub id: usize,
    pub domain: Domain,
    pub orientation: Orientation,
    pub count: usize,
    pub points: Vec<[f64; 2]>,
    pub image: String,
    pub image_sha256: String,
    pub density: String,
    pub density_sha256: String,
    pub density_scale: String,
    pub density_scale_sha256: String,
}

/// In-memory split: scenes with their ground truth density maps.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub height: usize,
    pub width: usize,
    pub split: String,
    pub labels_withheld: bool,
    pub sigma: f64,
    pub scenes: Vec<Scene>,
    pub densities: Vec<DensityMap>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.scenes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scenes.is_empty()
    }

    pub fn images(&self) -> Vec<Tensor> {
        self.scenes.iter().map(|s| s.image.clone()).collect()
    }
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> SceneError + '_ {
    move |source| SceneError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Binary 16-bit graymap (`P5`, maxval 65535), big-endian samples.
pub fn encode_pgm16(samples: &[u16], height: usize, width: usize) -> Vec<u8> {
    let mut bytes = format!("P5\n{width} {height}\n65535\n").into_bytes();
    bytes.reserve(samples.len() * 2);
    for s in samples {
        bytes.extend_from_slice(&s.to_be_bytes());
    }
    bytes
}

/// Parses a binary 16-bit graymap (`P5`, maxval 65535) of the expected size.
pub fn decode_pgm16(bytes: &[u8], path: &Path, height: usize, width: usize) -> Result<Vec<u16>> {
    let corrupt = |reason: String| SceneError::CorruptFile {
        path: path.to_path_buf(),
        reason,
    };
    let mut pos = 0;
    let mut fields = Vec::with_capacity(4);
    while fields.len() < 4 {
        while pos < bytes.len() && (bytes[pos].is_ascii_whitespace() || bytes[pos] == b'#') {
            if bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
            } else {
                pos += 1;
            }
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(corrupt("truncated header".into()));
        }
        fields.push(String::from_utf8_lossy(&bytes[start..pos]).into_owned());
    }
    // Exactly one whitespace byte separates the header from the samples.
    pos += 1;
    if fields[0] != "P5" {
        return Err(corrupt(format!("expected P5 magic, found {:?}", fields[0])));
    }
    let num = |s: &str| s.parse::<usize>().map_err(|_| corrupt(format!("bad header field {s:?}")));
    let (w, h, maxval) = (num(&fields[1])?, num(&fields[2])?, num(&fields[3])?);
    if maxval != 65535 {
        return Err(corrupt(format!("expected maxval 65535, found {maxval}")));
    }
    if h != height || w != width {
        return Err(corrupt(format!("expected {height}x{width}, found {h}x{w}")));
    }
    let body = bytes.get(pos..).unwrap_or_default();
    if body.len() != 2 * w * h {
        return Err(corrupt(format!("expected {} sample bytes, found {}", 2 * w * h, body.len())));
    }
    Ok(body.chunks_exact(2).map(|c| u16::from_be_bytes([c[0], c[1]])).collect())
}

fn quantize_unit(v: f64) -> u16 {
    (v.clamp(0.0, 1.0) * 65535.0).round() as u16
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<String> {
    fs::write(path, bytes).map_err(io_err(path))?;
    Ok(sha256_hex(bytes))
}

/// Writes `dataset` under `dir` (created if needed) and returns the manifest.
pub fn save_dataset(dataset: &Dataset, dir: &Path) -> Result<Manifest> {
    if dataset.scenes.len() != dataset.densities.len() {
        return invalid(format!(
            "{} scenes but {} density maps",
            dataset.scenes.len(),
            dataset.densities.len()
        ));
    }
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let (h, w) = (dataset.height, dataset.width);
    let mut entries = Vec::with_capacity(dataset.len());
    for (id, (scene, density)) in dataset.scenes.iter().zip(&dataset.densities).enumerate() {
        if scene.height() != h || scene.width() != w || density.height() != h || density.width() != w {
            return invalid(format!("entry {id} does not match the {h}x{w} dataset size"));
        }
        let image = format!("img_{id:05}.pgm");
        let samples: Vec<u16> = scene.image.data().iter().map(|&v| quantize_unit(v)).collect();
        let image_sha256 = write_file(&dir.join(&image), &encode_pgm16(&samples, h, w))?;

        let max = density.values().data().iter().cloned().fold(0.0, f64::max);
        let scale = if max > 0.0 { max / 65535.0 } else { 0.0 };
        let dsamples: Vec<u16> = density
            .values()
            .data()
            .iter()
            .map(|&v| if scale > 0.0 { (v / scale).round().min(65535.0) as u16 } else { 0 })
            .collect();
        let den = format!("den_{id:05}.pgm");
        let density_sha256 = write_file(&dir.join(&den), &encode_pgm16(&dsamples, h, w))?;
        let scale_file = format!("den_{id:05}.scale");
        let density_scale_sha256 = write_file(&dir.join(&scale_file), format!("{scale:?}\n").as_bytes())?;

        entries.push(ManifestEntry {
            id,
            domain: scene.domain,
            orientation: scene.orientation,
            count: scene.count(),
            points: scene.points.iter().map(|p| [p.row, p.col]).collect(),
            image,
            image_sha256,
            density: den,
            density_sha256,
            density_scale: scale_file,
            density_scale_sha256,
        });
    }
    let manifest = Manifest {
        version: MANIFEST_VERSION,
        height: h,
        width: w,
        split: dataset.split.clone(),
        labels_withheld: dataset.labels_withheld,
        sigma: dataset.sigma,
        entries,
    };
    let json = serde_json::to_vec_pretty(&manifest)
        .map_err(|e| SceneError::InvalidArgument(format!("manifest encode: {e}")))?;
    let mpath = dir.join(MANIFEST_FILE);
    fs::write(&mpath, json).map_err(io_err(&mpath))?;
    Ok(manifest)
}

/// Loads scenes and density maps. Counts as a density read for every entry.
pub fn load_dataset(dir: &Path) -> Result<Dataset> {
    let d = DatasetDir::open(dir)?;
    let scenes = d.load_scenes()?;
    let densities = (0..d.len()).map(|i| d.load_density(i)).collect::<Result<Vec<_>>>()?;
    let m = d.manifest();
    Ok(Dataset {
        height: m.height,
        width: m.width,
        split: m.split.clone(),
        labels_withheld: m.labels_withheld,
        sigma: m.sigma,
        scenes,
        densities,
    })
}

#[derive(Clone, Copy, Default)]
struct Reads {
    images: usize,
    densities: usize,
}

fn read_tracker() -> &'static Mutex<HashMap<PathBuf, Reads>> {
    static TRACKER: OnceLock<Mutex<HashMap<PathBuf, Reads>>> = OnceLock::new();
    TRACKER.get_or_init(Default::default)
}

fn record_read(dir: &Path, f: impl FnOnce(&mut Reads)) {
    f(read_tracker()
        .lock()
        .expect("tracker poisoned")
        .entry(canonical(dir))
        .or_default());
}

fn reads(dir: &Path) -> Reads {
    read_tracker()
        .lock()
        .expect("tracker poisoned")
        .get(&canonical(dir))
        .copied()
        .unwrap_or_default()
}

fn canonical(dir: &Path) -> PathBuf {
    dir.canonicalize().unwrap_or_else(|_| dir.to_path_buf())
}

/// Handle on a dataset directory with a validated manifest.
#[derive(Clone, Debug)]
pub struct DatasetDir {
    dir: PathBuf,
    manifest: Manifest,
}

impl DatasetDir {
    pub fn open(dir: &Path) -> Result<Self> {
        let mpath = dir.join(MANIFEST_FILE);
        if !mpath.is_file() {
            return Err(SceneError::MissingFile(mpath));
        }
        let bytes = fs::read(&mpath).map_err(io_err(&mpath))?;
        let malformed = |reason: String| SceneError::MalformedManifest {
            path: mpath.clone(),
            reason,
        };
        let manifest: Manifest =
            serde_json::from_slice(&bytes).map_err(|e| malformed(e.to_string()))?;
        if manifest.version != MANIFEST_VERSION {
            return Err(malformed(format!(
                "unsupported version {} (expected {MANIFEST_VERSION})",
                manifest.version
            )));
        }
        for (i, e) in manifest.entries.iter().enumerate() {
            if e.id != i || e.count != e.points.len() {
                return Err(malformed(format!("entry {i} has inconsistent id or count")));
            }
        }
        Ok(Self {
            dir: dir.to_path_buf(),
            manifest,
        })
    }

    pub fn path(&self) -> &Path {
        &self.dir
    }

    pub fn manifest(&self) -> &Manifest {
        &self.manifest
    }

    pub fn len(&self) -> usize {
        self.manifest.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.manifest.entries.is_empty()
    }

    fn read_checked(&self, name: &str, sha: &str) -> Result<(PathBuf, Vec<u8>)> {
        let path = self.dir.join(name);
        if !path.is_file() {
            return Err(SceneError::MissingFile(path));
        }
        let bytes = fs::read(&path).map_err(io_err(&path))?;
        if sha256_hex(&bytes) != sha {
            return Err(SceneError::ChecksumMismatch(path));
        }
        Ok((path, bytes))
    }

    pub fn load_image(&self, index: usize) -> Result<Tensor> {
        let e = self.entry(index)?;
        record_read(&self.dir, |r| r.images += 1);
        let (path, bytes) = self.read_checked(&e.image, &e.image_sha256)?;
        let (h, w) = (self.manifest.height, self.manifest.width);
        let samples = decode_pgm16(&bytes, &path, h, w)?;
        let data = samples.iter().map(|&s| s as f64 / 65535.0).collect();
        Ok(Tensor::new(vec![1, h, w], data)?)
    }

    /// Images only, in manifest order. Never touches density files.
    pub fn load_images(&self) -> Result<Vec<Tensor>> {
        (0..self.len()).map(|i| self.load_image(i)).collect()
    }

    /// Images with metadata and point annotations.
    pub fn load_scenes(&self) -> Result<Vec<Scene>> {
        (0..self.len())
            .map(|i| {
                let e = &self.manifest.entries[i];
                Ok(Scene {
                    image: self.load_image(i)?,
                    points: ScenePoints(
                        e.points
                            .iter()
                            .map(|&[row, col]| Point { row, col })
                            .collect(),
                    ),
                    domain: e.domain,
                    orientation: e.orientation,
                })
            })
            .collect()
    }

    pub fn load_density(&self, index: usize) -> Result<DensityMap> {
        let e = self.entry(index)?;
        record_read(&self.dir, |r| r.densities += 1);
        let (spath, sbytes) = self.read_checked(&e.density_scale, &e.density_scale_sha256)?;
        let scale: f64 = std::str::from_utf8(&sbytes)
            .ok()
            .and_then(|s| s.trim().parse().ok())
            .filter(|s: &f64| s.is_finite() && *s >= 0.0)
            .ok_or_else(|| SceneError::CorruptFile {
                path: spath,
                reason: "unparseable scale".into(),
            })?;
        let (path, bytes) = self.read_checked(&e.density, &e.density_sha256)?;
        let (h, w) = (self.manifest.height, self.manifest.width);
        let samples = decode_pgm16(&bytes, &path, h, w)?;
        let data = samples.iter().map(|&s| s as f64 * scale).collect();
        DensityMap::new(Tensor::new(vec![1, h, w], data)?)
    }

    pub fn load_densities(&self) -> Result<Vec<DensityMap>> {
        (0..self.len()).map(|i| self.load_density(i)).collect()
    }

    /// Number of density-file reads recorded for this directory in this process.
    pub fn density_reads(&self) -> usize {
        density_reads(&self.dir)
    }

    fn entry(&self, index: usize) -> Result<&ManifestEntry> {
        self.manifest
            .entries
            .get(index)
            .ok_or_else(|| SceneError::InvalidArgument(format!("no entry {index}")))
    }
}

/// Density-file reads recorded for `dir` in this process.
pub fn density_reads(dir: &Path) -> usize {
    reads(dir).densities
}

/// Image-file reads recorded for `dir` in this process.
pub fn image_reads(dir: &Path) -> usize {
    reads(dir).images
}
