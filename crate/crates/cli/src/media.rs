//! Reading and writing the pixel formats accepted on the command line.

use std::path::Path;

use anyhow::{Context, Result};
use vrcnn_core::dataset::{
    load_plane, load_yuv420_frame, save_plane, save_yuv420, yuv420_frame_count, PlaneFormat,
    YuvFrame,
};
use vrcnn_core::Plane;

use crate::args::{FormatArg, FormatOpts};
use crate::UsageError;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Layout {
    Pgm,
    Raw { width: usize, height: usize },
    Yuv { width: usize, height: usize },
}

impl Layout {
    pub fn resolve(path: &Path, opts: &FormatOpts) -> Result<Layout> {
        let format = opts.format.unwrap_or_else(|| {
            match path
                .extension()
                .and_then(|e| e.to_str())
                .map(str::to_ascii_lowercase)
                .as_deref()
            {
                Some("pgm") => FormatArg::Pgm,
                Some("yuv") => FormatArg::Yuv,
                _ => FormatArg::Raw,
            }
        });
        let dims = || match (opts.width, opts.height) {
            (Some(w), Some(h)) => Ok((w, h)),
            _ => Err(UsageError(format!(
                "{} is read as {} data and needs --width and --height",
                path.display(),
                if format == FormatArg::Yuv {
                    "YUV 4:2:0"
                } else {
                    "raw"
                }
            ))),
        };
        Ok(match format {
            FormatArg::Pgm => Layout::Pgm,
            FormatArg::Raw => {
                let (width, height) = dims()?;
                Layout::Raw { width, height }
            }
            FormatArg::Yuv => {
                let (width, height) = dims()?;
                Layout::Yuv { width, height }
            }
        })
    }
}

/// A single plane or a sequence of 4:2:0 frames.
#[derive(Clone, Debug, PartialEq)]
pub enum Media {
    Plane(Plane),
    Frames(Vec<YuvFrame>),
}

impl Media {
    pub fn read(path: &Path, layout: Layout) -> Result<Media> {
        let ctx = || format!("reading {}", path.display());
        Ok(match layout {
            Layout::Pgm => Media::Plane(load_plane(path, PlaneFormat::Pgm).with_context(ctx)?),
            Layout::Raw { width, height } => Media::Plane(
                load_plane(path, PlaneFormat::Raw { width, height }).with_context(ctx)?,
            ),
            Layout::Yuv { width, height } => {
                let n = yuv420_frame_count(path, width, height).with_context(ctx)?;
                let frames = (0..n)
                    .map(|i| load_yuv420_frame(path, width, height, i))
                    .collect::<vrcnn_core::Result<Vec<_>>>()
                    .with_context(ctx)?;
                Media::Frames(frames)
            }
        })
    }

    pub fn write(&self, path: &Path, layout: Layout) -> Result<()> {
        let ctx = || format!("writing {}", path.display());
        match (self, layout) {
            (Media::Plane(p), Layout::Pgm) => {
                save_plane(path, p, PlaneFormat::Pgm).with_context(ctx)
            }
            (Media::Plane(p), Layout::Raw { .. }) => save_plane(
                path,
                p,
                PlaneFormat::Raw {
                    width: p.width(),
                    height: p.height(),
                },
            )
            .with_context(ctx),
            (Media::Frames(f), Layout::Yuv { .. }) => save_yuv420(path, f).with_context(ctx),
            _ => unreachable!("media always written in the layout it was read with"),
        }
    }

    pub fn map_planes(&self, mut f: impl FnMut(&Plane) -> Result<Plane>) -> Result<Media> {
        Ok(match self {
            Media::Plane(p) => Media::Plane(f(p)?),
            Media::Frames(frames) => Media::Frames(
                frames
                    .iter()
                    .map(|fr| Ok(YuvFrame::new(f(&fr.y)?, f(&fr.u)?, f(&fr.v)?)?))
                    .collect::<Result<Vec<_>>>()?,
            ),
        })
    }
}
