//! File formats: PNG rasters, PFM depth, pose JSON and FEAT feature files.

use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::{Path, PathBuf};

use image::{DynamicImage, ImageBuffer, Luma, LumaA, Rgb, Rgba};
use nalgebra::Vector3;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::quaternion::Quaternion;
use crate::types::{CameraIntrinsics, CameraPose, CoreError, DepthMap, Raster};

pub const FEAT_MAGIC: &[u8; 4] = b"FEAT";

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    File {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Image(#[from] image::ImageError),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error("malformed file: {0}")]
    Format(String),
    #[error(transparent)]
    Core(#[from] CoreError),
}

fn open(path: &Path) -> Result<fs::File, IoError> {
    fs::File::open(path).map_err(|source| IoError::File {
        path: path.to_path_buf(),
        source,
    })
}

fn create(path: &Path) -> Result<fs::File, IoError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|source| IoError::File {
            path: dir.to_path_buf(),
            source,
        })?;
    }
    fs::File::create(path).map_err(|source| IoError::File {
        path: path.to_path_buf(),
        source,
    })
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum BitDepth {
    #[default]
    Eight,
    Sixteen,
}

/// Loads a PNG (8- or 16-bit, 1–4 channels) into a `[0, 1]` raster.
pub fn read_png(path: &Path) -> Result<Raster, IoError> {
    let img = image::ImageReader::new(BufReader::new(open(path)?))
        .with_guessed_format()?
        .decode()?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    let (channels, data): (usize, Vec<f32>) = match img {
        DynamicImage::ImageLuma8(b) => (1, b.into_raw().iter().map(|&x| x as f32 / 255.0).collect()),
        DynamicImage::ImageLumaA8(b) => (2, b.into_raw().iter().map(|&x| x as f32 / 255.0).collect()),
        DynamicImage::ImageRgb8(b) => (3, b.into_raw().iter().map(|&x| x as f32 / 255.0).collect()),
        DynamicImage::ImageRgba8(b) => (4, b.into_raw().iter().map(|&x| x as f32 / 255.0).collect()),
        DynamicImage::ImageLuma16(b) => (1, b.into_raw().iter().map(|&x| x as f32 / 65535.0).collect()),
        DynamicImage::ImageLumaA16(b) => (2, b.into_raw().iter().map(|&x| x as f32 / 65535.0).collect()),
        DynamicImage::ImageRgb16(b) => (3, b.into_raw().iter().map(|&x| x as f32 / 65535.0).collect()),
        DynamicImage::ImageRgba16(b) => (4, b.into_raw().iter().map(|&x| x as f32 / 65535.0).collect()),
        other => (3, other.to_rgb32f().into_raw()),
    };
    Ok(Raster::new(w, h, channels, data)?)
}

fn quantize<T: From<u16>>(data: &[f32], max: f32) -> Vec<T> {
    data.iter()
        .map(|&x| T::from((x.clamp(0.0, 1.0) * max).round() as u16))
        .collect()
}

pub fn write_png(path: &Path, raster: &Raster, depth: BitDepth) -> Result<(), IoError> {
    let (w, h) = (raster.width as u32, raster.height as u32);
    let bad = || IoError::Format(format!("cannot store {} channels as PNG", raster.channels));
    let img: DynamicImage = match depth {
        BitDepth::Eight => {
            let px: Vec<u8> = raster
                .data
                .iter()
                .map(|&x| (x.clamp(0.0, 1.0) * 255.0).round() as u8)
                .collect();
            match raster.channels {
                1 => ImageBuffer::<Luma<u8>, _>::from_raw(w, h, px).map(DynamicImage::from),
                2 => ImageBuffer::<LumaA<u8>, _>::from_raw(w, h, px).map(DynamicImage::from),
                3 => ImageBuffer::<Rgb<u8>, _>::from_raw(w, h, px).map(DynamicImage::from),
                4 => ImageBuffer::<Rgba<u8>, _>::from_raw(w, h, px).map(DynamicImage::from),
                _ => None,
            }
        }
        BitDepth::Sixteen => {
            let px: Vec<u16> = quantize(&raster.data, 65535.0);
            match raster.channels {
                1 => ImageBuffer::<Luma<u16>, _>::from_raw(w, h, px).map(DynamicImage::from),
                2 => ImageBuffer::<LumaA<u16>, _>::from_raw(w, h, px).map(DynamicImage::from),
                3 => ImageBuffer::<Rgb<u16>, _>::from_raw(w, h, px).map(DynamicImage::from),
                4 => ImageBuffer::<Rgba<u16>, _>::from_raw(w, h, px).map(DynamicImage::from),
                _ => None,
            }
        }
    }
    .ok_or_else(bad)?;
    let mut out = std::io::BufWriter::new(create(path)?);
    img.write_to(&mut out, image::ImageFormat::Png)?;
    Ok(())
}

/// Boolean mask as an 8-bit PNG (255 = true).
pub fn write_mask_png(path: &Path, mask: &[bool], width: usize, height: usize) -> Result<(), IoError> {
    let r = Raster::new(
        width,
        height,
        1,
        mask.iter().map(|&m| if m { 1.0 } else { 0.0 }).collect(),
    )?;
    write_png(path, &r, BitDepth::Eight)
}

pub fn read_mask_png(path: &Path) -> Result<(usize, usize, Vec<bool>), IoError> {
    let r = read_png(path)?;
    let mask = r.data.chunks_exact(r.channels).map(|p| p[0] >= 0.5).collect();
    Ok((r.width, r.height, mask))
}

/// PNG files of a directory in lexicographic name order.
pub fn list_pngs(dir: &Path) -> Result<Vec<PathBuf>, IoError> {
    let entries = fs::read_dir(dir).map_err(|source| IoError::File {
        path: dir.to_path_buf(),
        source,
    })?;
    let mut files = Vec::new();
    for e in entries {
        let p = e?.path();
        if p.extension().is_some_and(|x| x.eq_ignore_ascii_case("png")) {
            files.push(p);
        }
    }
    files.sort();
    Ok(files)
}

/// Single-channel little-endian PFM (scale −1.0), rows stored bottom-up.
pub fn write_pfm(path: &Path, width: usize, height: usize, data: &[f64]) -> Result<(), IoError> {
    if data.len() != width * height {
        return Err(IoError::Format(format!("{} samples for {width}x{height}", data.len())));
    }
    let mut out = std::io::BufWriter::new(create(path)?);
    write!(out, "Pf\n{width} {height}\n-1.0\n")?;
    for v in (0..height).rev() {
        for x in &data[v * width..(v + 1) * width] {
            out.write_all(&(*x as f32).to_le_bytes())?;
        }
    }
    out.flush()?;
    Ok(())
}

/// Reads a single-channel PFM into top-down row order.
pub fn read_pfm(path: &Path) -> Result<(usize, usize, Vec<f64>), IoError> {
    let mut r = BufReader::new(open(path)?);
    let mut header = Vec::new();
    // three whitespace-separated header lines
    let mut tokens = Vec::new();
    while tokens.len() < 4 {
        header.clear();
        if r.read_until(b'\n', &mut header)? == 0 {
            return Err(IoError::Format("truncated PFM header".into()));
        }
        tokens.extend(String::from_utf8_lossy(&header).split_whitespace().map(str::to_owned));
    }
    if tokens[0] != "Pf" {
        return Err(IoError::Format(format!("expected single-channel 'Pf', got '{}'", tokens[0])));
    }
    let parse = |s: &str| s.parse::<usize>().map_err(|_| IoError::Format(format!("bad PFM size '{s}'")));
    let (w, h) = (parse(&tokens[1])?, parse(&tokens[2])?);
    let scale: f64 = tokens[3]
        .parse()
        .map_err(|_| IoError::Format(format!("bad PFM scale '{}'", tokens[3])))?;
    let little = scale < 0.0;
    let mut bytes = vec![0u8; w * h * 4];
    r.read_exact(&mut bytes)?;
    let vals: Vec<f64> = bytes
        .chunks_exact(4)
        .map(|b| {
            let b: [u8; 4] = b.try_into().unwrap();
            (if little { f32::from_le_bytes(b) } else { f32::from_be_bytes(b) }) as f64
        })
        .collect();
    let mut data = Vec::with_capacity(w * h);
    for v in (0..h).rev() {
        data.extend_from_slice(&vals[v * w..(v + 1) * w]);
    }
    Ok((w, h, data))
}

pub fn read_depth(path: &Path, max_depth: Option<f64>) -> Result<DepthMap, IoError> {
    let (w, h, data) = read_pfm(path)?;
    Ok(match max_depth {
        Some(m) => DepthMap::new(w, h, data, m)?,
        None => DepthMap::from_samples(w, h, data)?,
    })
}

pub fn write_depth(path: &Path, depth: &DepthMap) -> Result<(), IoError> {
    write_pfm(path, depth.width, depth.height, &depth.data)
}

/// One pose file entry: world-from-camera rotation, camera centre and
/// intrinsics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoseRecord {
    pub q: [f64; 4],
    pub t: [f64; 3],
    pub intrinsics: CameraIntrinsics,
}

impl PoseRecord {
    pub fn new(pose: &CameraPose, intrinsics: CameraIntrinsics) -> Self {
        let t = pose.translation;
        Self {
            q: pose.rotation().to_array(),
            t: [t.x, t.y, t.z],
            intrinsics,
        }
    }

    pub fn pose(&self) -> Result<CameraPose, CoreError> {
        let q = Quaternion::from_array(self.q);
        if !q.is_finite() || q.norm() == 0.0 {
            return Err(CoreError::InvalidPose(format!("bad quaternion {:?}", self.q)));
        }
        CameraPose::new(q, Vector3::from(self.t))
    }
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, IoError> {
    Ok(serde_json::from_reader(BufReader::new(open(path)?))?)
}

/// Pretty JSON with a trailing newline.
pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<(), IoError> {
    let mut out = std::io::BufWriter::new(create(path)?);
    serde_json::to_writer_pretty(&mut out, value)?;
    out.write_all(b"\n")?;
    out.flush()?;
    Ok(())
}

pub fn read_poses(path: &Path) -> Result<Vec<(CameraPose, CameraIntrinsics)>, IoError> {
    let records: Vec<PoseRecord> = read_json(path)?;
    records
        .iter()
        .map(|r| {
            r.intrinsics.validate()?;
            Ok((r.pose()?, r.intrinsics))
        })
        .collect()
}

pub fn write_poses(path: &Path, poses: &[(CameraPose, CameraIntrinsics)]) -> Result<(), IoError> {
    let records: Vec<PoseRecord> = poses.iter().map(|(p, k)| PoseRecord::new(p, *k)).collect();
    write_json(path, &records)
}

/// FEAT file: magic, `u32` dim, `u32` count, then `count·dim` LE `f32`.
pub fn write_feat<W: Write>(mut out: W, features: &[Vec<f64>]) -> Result<(), IoError> {
    let dim = features.first().map_or(0, Vec::len);
    if features.iter().any(|f| f.len() != dim) {
        return Err(IoError::Format("ragged feature vectors".into()));
    }
    out.write_all(FEAT_MAGIC)?;
    out.write_all(&(dim as u32).to_le_bytes())?;
    out.write_all(&(features.len() as u32).to_le_bytes())?;
    for f in features {
        for x in f {
            out.write_all(&(*x as f32).to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn read_feat<R: Read>(mut input: R) -> Result<Vec<Vec<f64>>, IoError> {
    let mut head = [0u8; 12];
    input.read_exact(&mut head)?;
    if &head[..4] != FEAT_MAGIC {
        return Err(IoError::Format("bad FEAT magic".into()));
    }
    let dim = u32::from_le_bytes(head[4..8].try_into().unwrap()) as usize;
    let count = u32::from_le_bytes(head[8..12].try_into().unwrap()) as usize;
    let mut bytes = vec![0u8; dim * count * 4];
    input.read_exact(&mut bytes)?;
    let vals: Vec<f64> = bytes
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes(b.try_into().unwrap()) as f64)
        .collect();
    Ok(if dim == 0 {
        vec![Vec::new(); count]
    } else {
        vals.chunks_exact(dim).map(<[f64]>::to_vec).collect()
    })
}

pub fn write_feat_file(path: &Path, features: &[Vec<f64>]) -> Result<(), IoError> {
    let mut out = std::io::BufWriter::new(create(path)?);
    write_feat(&mut out, features)?;
    out.flush()?;
    Ok(())
}

pub fn read_feat_file(path: &Path) -> Result<Vec<Vec<f64>>, IoError> {
    read_feat(BufReader::new(open(path)?))
}
