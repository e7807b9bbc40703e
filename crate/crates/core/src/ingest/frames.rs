//! Frame container: a directory holding `camera.json`, a JSON-lines `index.jsonl`,
//! and binary point/mask blobs referenced from the index.
//!
//! Index line: `{"timestamp": t, "pose": [qw,qx,qy,qz,tx,ty,tz], "points": "<blob>", "masks": ["<blob>", ...]}`.
//!
//! Point blob (LE): magic `PTS1`, `u64` count, count × 3×`f64`.
//! Mask blob (LE): magic `MSK1`, `u32` width, `u32` height, `u8` kind (0 terrain, 1 object-agnostic),
//! `u32` label length + UTF-8 label, `u32` dimension + dimension×`f32` embedding,
//! `u32` run count + runs as `u32`. Runs alternate false/true over row-major pixels, starting with false.

use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Lines, Read, Write};
use std::path::{Path, PathBuf};

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{CameraModel, Embedding, Pose, Vec3};
use crate::raster::BoolRaster;

pub const INDEX_FILE: &str = "index.jsonl";
pub const CAMERA_FILE: &str = "camera.json";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "type")]
pub enum MaskKind {
    Terrain { label: String },
    ObjectAgnostic,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SegmentMask {
    pub bitmap: BoolRaster,
    pub embedding: Embedding,
    pub kind: MaskKind,
}

impl SegmentMask {
    pub fn new(bitmap: BoolRaster, embedding: Embedding, kind: MaskKind) -> Result<Self> {
        let mask = Self {
            bitmap,
            embedding,
            kind,
        };
        mask.validate()?;
        Ok(mask)
    }

    pub fn validate(&self) -> Result<()> {
        if self.bitmap.data.len() != self.bitmap.width * self.bitmap.height {
            return Err(Error::invalid("mask bitmap size disagrees with its shape"));
        }
        if self.bitmap.count() == 0 {
            return Err(Error::invalid("mask has no true pixel"));
        }
        if let MaskKind::Terrain { label } = &self.kind {
            if label.is_empty() {
                return Err(Error::invalid("terrain mask needs a label"));
            }
        }
        if self.embedding.is_null() {
            return Err(Error::NullEmbedding);
        }
        Ok(())
    }

    pub fn area(&self) -> usize {
        self.bitmap.count()
    }

    pub fn is_terrain(&self) -> bool {
        matches!(self.kind, MaskKind::Terrain { .. })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanFrame {
    pub timestamp: f64,
    pub pose: Pose,
    pub points: Vec<Vec3>,
    pub masks: Vec<SegmentMask>,
}

#[derive(Debug, Serialize, Deserialize)]
struct IndexEntry {
    timestamp: f64,
    pose: Pose,
    points: String,
    masks: Vec<String>,
}

/// Run lengths alternating false/true, starting with a (possibly empty) false run.
pub fn rle_encode(bits: &[bool]) -> Vec<u32> {
    let mut runs = Vec::new();
    let mut current = false;
    let mut len = 0u32;
    for &b in bits {
        if b == current {
            len += 1;
        } else {
            runs.push(len);
            current = b;
            len = 1;
        }
    }
    runs.push(len);
    runs
}

pub fn rle_decode(runs: &[u32], total: usize) -> Result<Vec<bool>> {
    let mut bits = Vec::with_capacity(total);
    let mut value = false;
    for &r in runs {
        bits.extend(std::iter::repeat(value).take(r as usize));
        value = !value;
    }
    if bits.len() != total {
        return Err(Error::invalid(format!(
            "mask runs cover {} pixels, expected {total}",
            bits.len()
        )));
    }
    Ok(bits)
}

fn encode_mask(mask: &SegmentMask) -> Vec<u8> {
    let mut b = Vec::new();
    b.extend_from_slice(b"MSK1");
    b.write_u32::<LittleEndian>(mask.bitmap.width as u32).unwrap();
    b.write_u32::<LittleEndian>(mask.bitmap.height as u32).unwrap();
    let label = match &mask.kind {
        MaskKind::Terrain { label } => {
            b.push(0);
            label.as_str()
        }
        MaskKind::ObjectAgnostic => {
            b.push(1);
            ""
        }
    };
    b.write_u32::<LittleEndian>(label.len() as u32).unwrap();
    b.extend_from_slice(label.as_bytes());
    b.write_u32::<LittleEndian>(mask.embedding.dim() as u32)
        .unwrap();
    for &v in mask.embedding.values() {
        b.write_f32::<LittleEndian>(v).unwrap();
    }
    let runs = rle_encode(&mask.bitmap.data);
    b.write_u32::<LittleEndian>(runs.len() as u32).unwrap();
    for r in runs {
        b.write_u32::<LittleEndian>(r).unwrap();
    }
    b
}

fn decode_mask(bytes: &[u8], path: &Path) -> Result<SegmentMask> {
    let eof = |e| Error::io(path, e);
    if bytes.len() < 4 || &bytes[..4] != b"MSK1" {
        return Err(Error::BadMagic { expected: "MSK1" });
    }
    let mut r = &bytes[4..];
    let width = r.read_u32::<LittleEndian>().map_err(eof)? as usize;
    let height = r.read_u32::<LittleEndian>().map_err(eof)? as usize;
    let kind = r.read_u8().map_err(eof)?;
    let label_len = r.read_u32::<LittleEndian>().map_err(eof)? as usize;
    if r.len() < label_len {
        return Err(Error::Truncated {
            expected: label_len as u64,
            found: r.len() as u64,
        });
    }
    let label = String::from_utf8(r[..label_len].to_vec())
        .map_err(|_| Error::invalid("mask label is not UTF-8"))?;
    r = &r[label_len..];
    let kind = match kind {
        0 => MaskKind::Terrain { label },
        1 if label.is_empty() => MaskKind::ObjectAgnostic,
        1 => return Err(Error::invalid("object-agnostic mask carries a label")),
        k => return Err(Error::invalid(format!("unknown mask kind {k}"))),
    };
    let dim = r.read_u32::<LittleEndian>().map_err(eof)? as usize;
    let mut values = vec![0.0f32; dim];
    r.read_f32_into::<LittleEndian>(&mut values).map_err(eof)?;
    let embedding = Embedding::from_stored(values)?;
    let n_runs = r.read_u32::<LittleEndian>().map_err(eof)? as usize;
    let mut runs = vec![0u32; n_runs];
    r.read_u32_into::<LittleEndian>(&mut runs).map_err(eof)?;
    if !r.is_empty() {
        return Err(Error::TrailingBytes(r.len() as u64));
    }
    let data = rle_decode(&runs, width * height)?;
    SegmentMask::new(
        BoolRaster {
            width,
            height,
            data,
        },
        embedding,
        kind,
    )
}

fn encode_points(points: &[Vec3]) -> Vec<u8> {
    let mut b = Vec::with_capacity(12 + points.len() * 24);
    b.extend_from_slice(b"PTS1");
    b.write_u64::<LittleEndian>(points.len() as u64).unwrap();
    for p in points {
        for c in p {
            b.write_f64::<LittleEndian>(*c).unwrap();
        }
    }
    b
}

fn decode_points(bytes: &[u8], path: &Path) -> Result<Vec<Vec3>> {
    if bytes.len() < 4 || &bytes[..4] != b"PTS1" {
        return Err(Error::BadMagic { expected: "PTS1" });
    }
    let mut r = &bytes[4..];
    let n = r.read_u64::<LittleEndian>().map_err(|e| Error::io(path, e))?;
    let expected = n * 24;
    if r.len() as u64 != expected {
        return Err(Error::Truncated {
            expected: expected + 12,
            found: bytes.len() as u64,
        });
    }
    let mut flat = vec![0.0f64; n as usize * 3];
    r.read_f64_into::<LittleEndian>(&mut flat)
        .map_err(|e| Error::io(path, e))?;
    Ok(flat.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect())
}

fn read_file(path: &Path) -> Result<Vec<u8>> {
    let mut bytes = Vec::new();
    File::open(path)
        .and_then(|f| BufReader::new(f).read_to_end(&mut bytes))
        .map_err(|e| Error::io(path, e))?;
    Ok(bytes)
}

/// Writes frames into `dir` (created if missing). Existing index and camera files are replaced.
pub fn write_frames<'a>(
    dir: impl AsRef<Path>,
    camera: &CameraModel,
    frames: impl IntoIterator<Item = &'a ScanFrame>,
) -> Result<usize> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let cam_path = dir.join(CAMERA_FILE);
    let cam_json = serde_json::to_string_pretty(camera).map_err(|e| Error::json("camera", e))?;
    fs::write(&cam_path, cam_json + "\n").map_err(|e| Error::io(&cam_path, e))?;

    let index_path = dir.join(INDEX_FILE);
    let mut index =
        BufWriter::new(File::create(&index_path).map_err(|e| Error::io(&index_path, e))?);
    let mut count = 0;
    for (i, frame) in frames.into_iter().enumerate() {
        let points_name = format!("frame_{i:06}.pts");
        let p = dir.join(&points_name);
        fs::write(&p, encode_points(&frame.points)).map_err(|e| Error::io(&p, e))?;
        let mut masks = Vec::with_capacity(frame.masks.len());
        for (k, mask) in frame.masks.iter().enumerate() {
            let name = format!("frame_{i:06}_mask_{k:03}.msk");
            let p = dir.join(&name);
            fs::write(&p, encode_mask(mask)).map_err(|e| Error::io(&p, e))?;
            masks.push(name);
        }
        let entry = IndexEntry {
            timestamp: frame.timestamp,
            pose: frame.pose,
            points: points_name,
            masks,
        };
        let line = serde_json::to_string(&entry).map_err(|e| Error::json("frame index", e))?;
        writeln!(index, "{line}").map_err(|e| Error::io(&index_path, e))?;
        count += 1;
    }
    index.flush().map_err(|e| Error::io(&index_path, e))?;
    Ok(count)
}

pub fn load_camera(dir: impl AsRef<Path>) -> Result<CameraModel> {
    let path = dir.as_ref().join(CAMERA_FILE);
    let bytes = read_file(&path)?;
    let cam: CameraModel =
        serde_json::from_slice(&bytes).map_err(|e| Error::json(path.display().to_string(), e))?;
    cam.validate()?;
    Ok(cam)
}

/// Streaming reader over a frame directory. Loads one frame per `next()`.
pub struct FrameReader {
    dir: PathBuf,
    lines: Option<Lines<BufReader<File>>>,
    line_no: usize,
    index: usize,
    last_timestamp: Option<f64>,
    failed: bool,
}

impl FrameReader {
    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn read_next(&mut self) -> Option<Result<ScanFrame>> {
        let lines = self.lines.as_mut()?;
        let line = loop {
            self.line_no += 1;
            match lines.next()? {
                Ok(l) if l.trim().is_empty() => continue,
                Ok(l) => break l,
                Err(e) => return Some(Err(Error::io(self.dir.join(INDEX_FILE), e))),
            }
        };
        Some(self.parse_entry(&line))
    }

    fn parse_entry(&mut self, line: &str) -> Result<ScanFrame> {
        let entry: IndexEntry = serde_json::from_str(line).map_err(|e| Error::FrameIndex {
            line: self.line_no,
            message: e.to_string(),
        })?;
        let index = self.index;
        if let Some(prev) = self.last_timestamp {
            if entry.timestamp < prev || entry.timestamp.is_nan() {
                return Err(Error::NonMonotoneTimestamps { index });
            }
        }
        self.last_timestamp = Some(entry.timestamp);
        self.index += 1;
        let pts_path = self.dir.join(&entry.points);
        let points = decode_points(&read_file(&pts_path)?, &pts_path)?;
        let masks = entry
            .masks
            .iter()
            .map(|name| {
                let p = self.dir.join(name);
                decode_mask(&read_file(&p)?, &p)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(ScanFrame {
            timestamp: entry.timestamp,
            pose: entry.pose,
            points,
            masks,
        })
    }
}

impl Iterator for FrameReader {
    type Item = Result<ScanFrame>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.failed {
            return None;
        }
        let item = self.read_next();
        if matches!(item, Some(Err(_))) {
            self.failed = true;
        }
        item
    }
}

/// Opens a frame directory for streaming. A directory without an index yields no frames.
pub fn load_frames(dir: impl AsRef<Path>) -> Result<FrameReader> {
    let dir = dir.as_ref().to_path_buf();
    if !dir.is_dir() {
        return Err(Error::io(
            &dir,
            std::io::Error::new(std::io::ErrorKind::NotFound, "frame directory not found"),
        ));
    }
    let index_path = dir.join(INDEX_FILE);
    let lines = if index_path.exists() {
        let f = File::open(&index_path).map_err(|e| Error::io(&index_path, e))?;
        Some(BufReader::new(f).lines())
    } else {
        None
    };
    Ok(FrameReader {
        dir,
        lines,
        line_no: 0,
        index: 0,
        last_timestamp: None,
        failed: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn camera() -> CameraModel {
        CameraModel {
            fx: 10.0,
            fy: 10.0,
            cx: 4.0,
            cy: 3.0,
            width: 8,
            height: 6,
            extrinsic: Pose::identity(),
        }
    }

    fn frame(t: f64) -> ScanFrame {
        let mut bitmap = BoolRaster::new(8, 6);
        bitmap.set(2, 3, true);
        bitmap.set(3, 3, true);
        ScanFrame {
            timestamp: t,
            pose: Pose::from_translation([t, 0.0, 1.0]),
            points: vec![[0.0, 0.0, 1.0], [0.5, -0.25, 2.0]],
            masks: vec![
                SegmentMask::new(
                    bitmap.clone(),
                    Embedding::basis(4, 1),
                    MaskKind::Terrain {
                        label: "grass".into(),
                    },
                )
                .unwrap(),
                SegmentMask::new(bitmap, Embedding::basis(4, 2), MaskKind::ObjectAgnostic)
                    .unwrap(),
            ],
        }
    }

    #[test]
    fn empty_directory_yields_nothing() {
        let dir = tempfile::tempdir().unwrap();
        assert_eq!(load_frames(dir.path()).unwrap().count(), 0);
        write_frames(dir.path(), &camera(), &[]).unwrap();
        assert_eq!(load_frames(dir.path()).unwrap().count(), 0);
    }

    #[test]
    fn frames_roundtrip_in_order() {
        let dir = tempfile::tempdir().unwrap();
        let frames = vec![frame(0.0), frame(0.1)];
        write_frames(dir.path(), &camera(), &frames).unwrap();
        let back: Vec<ScanFrame> = load_frames(dir.path())
            .unwrap()
            .collect::<Result<_>>()
            .unwrap();
        assert_eq!(back, frames);
        assert_eq!(load_camera(dir.path()).unwrap(), camera());
    }

    #[test]
    fn non_monotone_timestamps_name_the_index() {
        let dir = tempfile::tempdir().unwrap();
        write_frames(dir.path(), &camera(), &[frame(0.1), frame(0.0)]).unwrap();
        let mut reader = load_frames(dir.path()).unwrap();
        assert!(reader.next().unwrap().is_ok());
        match reader.next() {
            Some(Err(Error::NonMonotoneTimestamps { index })) => assert_eq!(index, 1),
            other => panic!("unexpected {other:?}"),
        }
        assert!(reader.next().is_none());
    }

    #[test]
    fn reader_is_lazy() {
        let dir = tempfile::tempdir().unwrap();
        write_frames(dir.path(), &camera(), &[frame(0.0), frame(0.1)]).unwrap();
        let mut reader = load_frames(dir.path()).unwrap();
        assert!(reader.next().unwrap().is_ok());
        // blobs of frame 1 are only touched when it is requested
        fs::remove_file(dir.path().join("frame_000001.pts")).unwrap();
        assert!(matches!(reader.next(), Some(Err(Error::Io { .. }))));
    }

    #[test]
    fn masks_validate() {
        let empty = BoolRaster::new(3, 3);
        assert!(SegmentMask::new(empty, Embedding::basis(2, 0), MaskKind::ObjectAgnostic).is_err());
        let mut one = BoolRaster::new(3, 3);
        one.set(1, 1, true);
        assert!(SegmentMask::new(
            one,
            Embedding::basis(2, 0),
            MaskKind::Terrain { label: String::new() }
        )
        .is_err());
    }

    proptest! {
        #[test]
        fn rle_roundtrip(bits in prop::collection::vec(any::<bool>(), 0..300)) {
            let runs = rle_encode(&bits);
            prop_assert_eq!(rle_decode(&runs, bits.len()).unwrap(), bits);
        }

        #[test]
        fn mask_blob_roundtrip(w in 1usize..20, h in 1usize..20, seed in any::<u64>()) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let mut bitmap = BoolRaster::new(w, h);
            for v in bitmap.data.iter_mut() { *v = rng.gen_bool(0.3); }
            bitmap.set(0, 0, true);
            let raw: Vec<f64> = (0..5).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let mask = SegmentMask::new(bitmap, Embedding::new(&raw).unwrap(), MaskKind::Terrain { label: "asphalt".into() }).unwrap();
            let back = decode_mask(&encode_mask(&mask), Path::new("m")).unwrap();
            prop_assert_eq!(back, mask);
        }
    }
}
