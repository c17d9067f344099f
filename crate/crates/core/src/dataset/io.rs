//! Binary PGM, raw 8-bit planes, and planar YUV 4:2:0 files.

use std::fs::File;
use std::io::{Read, Seek, SeekFrom, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::tensor::Plane;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PlaneFormat {
    /// Binary PGM (`P5`) with maxval at most 255.
    Pgm,
    /// Headerless 8-bit samples, row-major.
    Raw { width: usize, height: usize },
}

/// Y, U, and V planes of one 4:2:0 frame; chroma planes are half size in each dimension.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct YuvFrame {
    pub y: Plane,
    pub u: Plane,
    pub v: Plane,
}

impl YuvFrame {
    pub fn new(y: Plane, u: Plane, v: Plane) -> Result<Self> {
        check_yuv_dims(y.width(), y.height())?;
        let (cw, ch) = (y.width() / 2, y.height() / 2);
        for (name, p) in [("U", &u), ("V", &v)] {
            if p.width() != cw || p.height() != ch {
                return Err(Error::InvalidDimensions(format!(
                    "{name} plane is {}x{}, expected {cw}x{ch} for {}x{} luma",
                    p.width(),
                    p.height(),
                    y.width(),
                    y.height()
                )));
            }
        }
        Ok(YuvFrame { y, u, v })
    }

    pub fn planes(&self) -> [&Plane; 3] {
        [&self.y, &self.u, &self.v]
    }

    pub fn width(&self) -> usize {
        self.y.width()
    }

    pub fn height(&self) -> usize {
        self.y.height()
    }

    /// Planar Y, U, V bytes.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(yuv420_frame_size(self.width(), self.height()));
        for p in self.planes() {
            out.extend_from_slice(p.samples());
        }
        out
    }
}

pub fn yuv420_frame_size(width: usize, height: usize) -> usize {
    width * height * 3 / 2
}

fn check_yuv_dims(width: usize, height: usize) -> Result<()> {
    if width == 0 || height == 0 || !width.is_multiple_of(2) || !height.is_multiple_of(2) {
        return Err(Error::InvalidDimensions(format!(
            "4:2:0 frames need positive even dimensions, got {width}x{height}"
        )));
    }
    Ok(())
}

fn read_file(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| Error::io(path, e))
}

pub fn load_plane(path: impl AsRef<Path>, format: PlaneFormat) -> Result<Plane> {
    let path = path.as_ref();
    let bytes = read_file(path)?;
    match format {
        PlaneFormat::Pgm => parse_pgm(&bytes),
        PlaneFormat::Raw { width, height } => parse_raw(&bytes, width, height),
    }
}

pub fn save_plane(path: impl AsRef<Path>, plane: &Plane, format: PlaneFormat) -> Result<()> {
    let path = path.as_ref();
    let bytes = match format {
        PlaneFormat::Pgm => encode_pgm(plane),
        PlaneFormat::Raw { .. } => plane.samples().to_vec(),
    };
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn parse_raw(bytes: &[u8], width: usize, height: usize) -> Result<Plane> {
    if width == 0 || height == 0 {
        return Err(Error::InvalidDimensions(format!(
            "raw plane {width}x{height}"
        )));
    }
    let expected = (width * height) as u64;
    let actual = bytes.len() as u64;
    if actual < expected {
        return Err(Error::Truncated { expected, actual });
    }
    if actual > expected {
        return Err(Error::TrailingData { expected, actual });
    }
    Plane::new(width, height, bytes.to_vec())
}

/// Header tokens of a PGM: magic, width, height, maxval, separated by
/// whitespace, with `#` comments running to end of line.
struct HeaderScanner<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl HeaderScanner<'_> {
    fn skip_space_and_comments(&mut self) {
        while let Some(&b) = self.bytes.get(self.pos) {
            if b == b'#' {
                while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                    self.pos += 1;
                }
            } else if b.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn number(&mut self, what: &str) -> Result<u32> {
        self.skip_space_and_comments();
        let start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::MalformedHeader(format!("PGM {what} is not a number")))
    }
}

pub fn parse_pgm(bytes: &[u8]) -> Result<Plane> {
    if bytes.len() < 2 || &bytes[..2] != b"P5" {
        return Err(Error::MalformedHeader("missing P5 magic".into()));
    }
    let mut s = HeaderScanner { bytes, pos: 2 };
    let width = s.number("width")? as usize;
    let height = s.number("height")? as usize;
    let maxval = s.number("maxval")?;
    if width == 0 || height == 0 {
        return Err(Error::MalformedHeader(format!(
            "PGM dimensions {width}x{height}"
        )));
    }
    if maxval == 0 || maxval > 255 {
        return Err(Error::UnsupportedMaxval(maxval));
    }
    match bytes.get(s.pos) {
        Some(b) if b.is_ascii_whitespace() => s.pos += 1,
        _ => return Err(Error::MalformedHeader("no whitespace after maxval".into())),
    }
    let expected = (width * height) as u64;
    let data = &bytes[s.pos..];
    if (data.len() as u64) < expected {
        return Err(Error::Truncated {
            expected,
            actual: data.len() as u64,
        });
    }
    Plane::new(width, height, data[..width * height].to_vec())
}

pub fn encode_pgm(plane: &Plane) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", plane.width(), plane.height()).into_bytes();
    out.extend_from_slice(plane.samples());
    out
}

/// Number of whole frames in a 4:2:0 file.
pub fn yuv420_frame_count(path: impl AsRef<Path>, width: usize, height: usize) -> Result<usize> {
    check_yuv_dims(width, height)?;
    let path = path.as_ref();
    let len = std::fs::metadata(path)
        .map_err(|e| Error::io(path, e))?
        .len();
    Ok((len / yuv420_frame_size(width, height) as u64) as usize)
}

pub fn load_yuv420_frame(
    path: impl AsRef<Path>,
    width: usize,
    height: usize,
    frame_index: usize,
) -> Result<YuvFrame> {
    check_yuv_dims(width, height)?;
    let path = path.as_ref();
    let mut file = File::open(path).map_err(|e| Error::io(path, e))?;
    let len = file.metadata().map_err(|e| Error::io(path, e))?.len();
    let frame = yuv420_frame_size(width, height) as u64;
    let available = (len / frame) as usize;
    if frame_index >= available {
        return Err(Error::FrameOutOfRange {
            index: frame_index,
            available,
        });
    }
    file.seek(SeekFrom::Start(frame * frame_index as u64))
        .map_err(|e| Error::io(path, e))?;
    let mut buf = vec![0u8; frame as usize];
    file.read_exact(&mut buf).map_err(|e| Error::io(path, e))?;
    split_yuv420(&buf, width, height)
}

/// Splits one frame's planar bytes into Y, U, and V.
pub fn split_yuv420(buf: &[u8], width: usize, height: usize) -> Result<YuvFrame> {
    check_yuv_dims(width, height)?;
    let expected = yuv420_frame_size(width, height);
    if buf.len() != expected {
        return Err(Error::Truncated {
            expected: expected as u64,
            actual: buf.len() as u64,
        });
    }
    let luma = width * height;
    let chroma = luma / 4;
    let (cw, ch) = (width / 2, height / 2);
    YuvFrame::new(
        Plane::new(width, height, buf[..luma].to_vec())?,
        Plane::new(cw, ch, buf[luma..luma + chroma].to_vec())?,
        Plane::new(cw, ch, buf[luma + chroma..].to_vec())?,
    )
}

pub fn save_yuv420(path: impl AsRef<Path>, frames: &[YuvFrame]) -> Result<()> {
    let path = path.as_ref();
    let mut file = File::create(path).map_err(|e| Error::io(path, e))?;
    for f in frames {
        file.write_all(&f.to_bytes())
            .map_err(|e| Error::io(path, e))?;
    }
    Ok(())
}
