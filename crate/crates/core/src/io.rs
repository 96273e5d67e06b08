//! PNG and JSON file formats.
//!
//! A sequence directory holds `frame_0000.png`, `frame_0001.png`, … (16-bit
//! grayscale) plus a `meta.json` sidecar. Masks are 8-bit grayscale PNGs that
//! store the raw label values 0, 1 and 2.

use std::fs;
use std::path::{Path, PathBuf};

use image::{DynamicImage, ImageBuffer, Luma};
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::model::SequenceMeta;
use crate::{BinaryMask, DsaSequence, Error, Grid, MinIpImage, Result, TerritoryMask};

pub const META_FILE: &str = "meta.json";

pub fn frame_file_name(index: usize) -> String {
    format!("frame_{index:04}.png")
}

fn parse_frame_index(name: &str) -> Option<usize> {
    let digits = name.strip_prefix("frame_")?.strip_suffix(".png")?;
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    digits.parse().ok()
}

fn file_label(path: &Path) -> String {
    path.file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

fn open_image(path: &Path) -> Result<DynamicImage> {
    image::open(path).map_err(|source| match source {
        image::ImageError::IoError(e) => Error::io(path, e),
        source => Error::Image {
            path: path.to_path_buf(),
            source,
        },
    })
}

fn save_image<P: image::PixelWithColorType>(
    path: &Path,
    buf: &ImageBuffer<P, Vec<P::Subpixel>>,
) -> Result<()>
where
    [P::Subpixel]: image::EncodableLayout,
{
    buf.save_with_format(path, image::ImageFormat::Png)
        .map_err(|source| match source {
            image::ImageError::IoError(e) => Error::io(path, e),
            source => Error::Image {
                path: path.to_path_buf(),
                source,
            },
        })
}

/// Reads a single-channel 16-bit PNG.
pub fn load_gray16(path: impl AsRef<Path>) -> Result<Grid<u16>> {
    let path = path.as_ref();
    match open_image(path)? {
        DynamicImage::ImageLuma16(buf) => {
            let (w, h) = buf.dimensions();
            Ok(Grid::from_vec(w as usize, h as usize, buf.into_raw()))
        }
        other => Err(Error::PixelFormat {
            file: file_label(path),
            detail: format!("expected 16-bit grayscale, found {:?}", other.color()),
        }),
    }
}

pub fn save_gray16(grid: &Grid<u16>, path: impl AsRef<Path>) -> Result<()> {
    let buf: ImageBuffer<Luma<u16>, Vec<u16>> = ImageBuffer::from_raw(
        grid.width() as u32,
        grid.height() as u32,
        grid.as_slice().to_vec(),
    )
    .expect("grid buffer matches its dimensions");
    save_image(path.as_ref(), &buf)
}

/// Reads a single-channel 8-bit PNG without interpreting values.
pub fn load_gray8(path: impl AsRef<Path>) -> Result<Grid<u8>> {
    let path = path.as_ref();
    match open_image(path)? {
        DynamicImage::ImageLuma8(buf) => {
            let (w, h) = buf.dimensions();
            Ok(Grid::from_vec(w as usize, h as usize, buf.into_raw()))
        }
        other => Err(Error::PixelFormat {
            file: file_label(path),
            detail: format!("expected 8-bit grayscale, found {:?}", other.color()),
        }),
    }
}

pub fn save_gray8(grid: &Grid<u8>, path: impl AsRef<Path>) -> Result<()> {
    let buf: ImageBuffer<Luma<u8>, Vec<u8>> = ImageBuffer::from_raw(
        grid.width() as u32,
        grid.height() as u32,
        grid.as_slice().to_vec(),
    )
    .expect("grid buffer matches its dimensions");
    save_image(path.as_ref(), &buf)
}

pub fn save_mask(mask: &TerritoryMask, path: impl AsRef<Path>) -> Result<()> {
    save_gray8(mask.labels(), path)
}

/// Loads a label PNG; any value outside {0, 1, 2} is an error.
pub fn load_mask(path: impl AsRef<Path>) -> Result<TerritoryMask> {
    TerritoryMask::new(load_gray8(path)?)
}

/// Binary masks are stored as 0/1 bytes.
pub fn save_binary_mask(mask: &BinaryMask, path: impl AsRef<Path>) -> Result<()> {
    save_gray8(&mask.grid().map(|&v| v as u8), path)
}

/// Any non-zero pixel is foreground.
pub fn load_binary_mask(path: impl AsRef<Path>) -> Result<BinaryMask> {
    Ok(BinaryMask::from_grid(load_gray8(path)?.map(|&v| v != 0)))
}

pub fn save_minip(img: &MinIpImage, path: impl AsRef<Path>) -> Result<()> {
    save_gray16(img.pixels(), path)
}

/// Loads a MinIP PNG. Provenance is not stored in the file, so the result is
/// tagged as a full-phase image.
pub fn load_minip(path: impl AsRef<Path>) -> Result<MinIpImage> {
    Ok(MinIpImage::from_pixels(load_gray16(path)?))
}

pub fn read_json<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<T> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })
}

pub fn write_json<T: Serialize>(value: &T, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut text = serde_json::to_string_pretty(value).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Loads a sequence directory.
///
/// Frames are ordered by the numeric part of `frame_NNNN.png`; the indices
/// must run `0, 1, …, T-1` without gaps. Files that do not follow the naming
/// pattern are ignored.
pub fn load_sequence(dir: impl AsRef<Path>) -> Result<DsaSequence> {
    let dir = dir.as_ref();
    let entries = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut indexed: Vec<(usize, PathBuf)> = Vec::new();
    for entry in entries {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        let name = entry.file_name().to_string_lossy().into_owned();
        if let Some(i) = parse_frame_index(&name) {
            indexed.push((i, entry.path()));
        }
    }
    if indexed.is_empty() {
        return Err(Error::NoFrames(dir.to_path_buf()));
    }
    let meta_path = dir.join(META_FILE);
    if !meta_path.is_file() {
        return Err(Error::MissingSidecar(meta_path));
    }
    let meta: SequenceMeta = read_json(&meta_path)?;

    indexed.sort();
    for (expected, (index, path)) in indexed.iter().enumerate() {
        if *index != expected {
            return Err(Error::FrameGap {
                expected,
                file: file_label(path),
            });
        }
    }

    let mut frames = Vec::with_capacity(indexed.len());
    let mut shape = None;
    for (_, path) in &indexed {
        let frame = load_gray16(path)?;
        match shape {
            None => shape = Some(frame.shape()),
            Some(s) if s != frame.shape() => {
                return Err(Error::FrameShape {
                    file: file_label(path),
                    expected: s,
                    got: frame.shape(),
                })
            }
            _ => {}
        }
        frames.push(frame);
    }
    DsaSequence::new(frames, meta)
}

/// Writes `frame_NNNN.png` files and `meta.json` into `dir`, creating it.
pub fn save_sequence(seq: &DsaSequence, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for (i, frame) in seq.frames().iter().enumerate() {
        save_gray16(frame, dir.join(frame_file_name(i)))?;
    }
    write_json(seq.meta(), dir.join(META_FILE))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Occlusion, Phase, Stage, View};

    fn meta(labels: Option<Vec<Phase>>) -> SequenceMeta {
        SequenceMeta {
            view: View::Ap,
            stage: Stage::PreEvt,
            occlusion: Occlusion::M1,
            patient_id: "P001".into(),
            phase_labels: labels,
        }
    }

    fn write_frames(dir: &Path, frames: &[Grid<u16>]) {
        for (i, f) in frames.iter().enumerate() {
            save_gray16(f, dir.join(frame_file_name(i))).unwrap();
        }
    }

    #[test]
    fn loads_written_fixture() {
        let tmp = tempfile::tempdir().unwrap();
        let frame = Grid::from_fn(8, 8, |x, y| (x * 1000 + y) as u16);
        write_frames(tmp.path(), &[frame.clone(), frame.clone(), frame.clone()]);
        write_json(&meta(None), tmp.path().join(META_FILE)).unwrap();
        let seq = load_sequence(tmp.path()).unwrap();
        assert_eq!(seq.len(), 3);
        assert_eq!(seq.view(), View::Ap);
        assert_eq!(seq.frame(2), &frame);
        assert!(seq.phase_labels().is_none());
    }

    #[test]
    fn phase_label_count_mismatch() {
        let tmp = tempfile::tempdir().unwrap();
        write_frames(tmp.path(), &vec![Grid::new(4, 4, 7u16); 3]);
        write_json(
            &meta(Some(vec![Phase::Arterial, Phase::Venous])),
            tmp.path().join(META_FILE),
        )
        .unwrap();
        let err = load_sequence(tmp.path()).unwrap_err();
        assert!(err.to_string().contains("phase label count mismatch"), "{err}");
    }

    #[test]
    fn empty_directory_has_no_frames() {
        let tmp = tempfile::tempdir().unwrap();
        let err = load_sequence(tmp.path()).unwrap_err();
        assert!(err.to_string().contains("no frames found"), "{err}");
    }

    #[test]
    fn missing_sidecar() {
        let tmp = tempfile::tempdir().unwrap();
        write_frames(tmp.path(), &[Grid::new(4, 4, 1u16)]);
        assert!(matches!(
            load_sequence(tmp.path()),
            Err(Error::MissingSidecar(_))
        ));
    }

    #[test]
    fn gap_names_the_offending_file() {
        let tmp = tempfile::tempdir().unwrap();
        let f = Grid::new(4, 4, 1u16);
        save_gray16(&f, tmp.path().join("frame_0000.png")).unwrap();
        save_gray16(&f, tmp.path().join("frame_0002.png")).unwrap();
        write_json(&meta(None), tmp.path().join(META_FILE)).unwrap();
        let err = load_sequence(tmp.path()).unwrap_err();
        assert!(err.to_string().contains("frame_0002.png"), "{err}");
    }

    #[test]
    fn inconsistent_shape_names_the_offending_file() {
        let tmp = tempfile::tempdir().unwrap();
        save_gray16(&Grid::new(4, 4, 1u16), tmp.path().join("frame_0000.png")).unwrap();
        save_gray16(&Grid::new(5, 4, 1u16), tmp.path().join("frame_0001.png")).unwrap();
        write_json(&meta(None), tmp.path().join(META_FILE)).unwrap();
        let err = load_sequence(tmp.path()).unwrap_err();
        assert!(err.to_string().contains("frame_0001.png"), "{err}");
    }

    #[test]
    fn eight_bit_frame_is_rejected() {
        let tmp = tempfile::tempdir().unwrap();
        save_gray8(&Grid::new(4, 4, 1u8), tmp.path().join("frame_0000.png")).unwrap();
        write_json(&meta(None), tmp.path().join(META_FILE)).unwrap();
        assert!(matches!(
            load_sequence(tmp.path()),
            Err(Error::PixelFormat { .. })
        ));
    }

    #[test]
    fn masks_round_trip() {
        let tmp = tempfile::tempdir().unwrap();
        let zero = TerritoryMask::empty(1024, 1024);
        let p = tmp.path().join("zero.png");
        save_mask(&zero, &p).unwrap();
        assert_eq!(load_mask(&p).unwrap(), zero);

        let checker = TerritoryMask::new(Grid::from_fn(64, 48, |x, y| 1 + ((x + y) % 2) as u8))
            .unwrap();
        let p = tmp.path().join("checker.png");
        save_mask(&checker, &p).unwrap();
        assert_eq!(load_mask(&p).unwrap(), checker);
    }

    #[test]
    fn mask_with_label_three_is_rejected() {
        let tmp = tempfile::tempdir().unwrap();
        let p = tmp.path().join("bad.png");
        let mut g = Grid::new(8, 8, 0u8);
        g.set(3, 4, 3);
        save_gray8(&g, &p).unwrap();
        assert!(matches!(
            load_mask(&p),
            Err(Error::InvalidLabel { value: 3, x: 3, y: 4 })
        ));
    }

    #[test]
    fn sequence_round_trip_with_labels() {
        let tmp = tempfile::tempdir().unwrap();
        let frames: Vec<_> = (0..4)
            .map(|t| Grid::from_fn(6, 5, |x, y| (t * 10000 + x * 7 + y) as u16))
            .collect();
        let labels = vec![
            Phase::NonContrast,
            Phase::Arterial,
            Phase::Capillary,
            Phase::Venous,
        ];
        let seq = DsaSequence::new(frames, meta(Some(labels))).unwrap();
        save_sequence(&seq, tmp.path().join("seq")).unwrap();
        assert_eq!(load_sequence(tmp.path().join("seq")).unwrap(), seq);
    }
}
