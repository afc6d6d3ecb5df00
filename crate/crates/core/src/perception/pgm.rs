//! Fixture container for depth images and segmentation masks.
//!
//! Both are binary 16-bit PGM (`P5`, maxval 65535, big-endian samples) with a
//! single header comment naming the payload:
//!
//! ```text
//! P5
//! # namo-depth scale=0.001
//! <width> <height>
//! 65535
//! <width·height big-endian u16 samples>
//! ```
//!
//! Depth samples are `round(depth / scale)` with 0 meaning invalid; mask
//! samples (`# namo-mask`) are object ids with 0 for background. Any PGM
//! viewer can open the files.

use std::io::{self, BufRead, Write};

use thiserror::Error;

use super::{DepthImage, PerceptionError, SegmentationMask};

#[derive(Debug, Error)]
pub enum PgmError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("malformed PGM header: {0}")]
    Header(String),
    #[error("value {0} does not fit a 16-bit sample")]
    Range(f64),
    #[error(transparent)]
    Image(#[from] PerceptionError),
}

const DEPTH_TAG: &str = "namo-depth";
const MASK_TAG: &str = "namo-mask";

fn write_header(out: &mut impl Write, comment: &str, w: u32, h: u32) -> io::Result<()> {
    write!(out, "P5\n# {comment}\n{w} {h}\n65535\n")
}

pub fn write_depth(out: &mut impl Write, img: &DepthImage, scale: f64) -> Result<(), PgmError> {
    assert!(scale > 0.0);
    write_header(out, &format!("{DEPTH_TAG} scale={scale}"), img.width, img.height)?;
    let mut buf = Vec::with_capacity(img.depth.len() * 2);
    for &d in &img.depth {
        let q = (d / scale).round();
        if !(0.0..=65535.0).contains(&q) {
            return Err(PgmError::Range(d));
        }
        buf.extend_from_slice(&(q as u16).to_be_bytes());
    }
    out.write_all(&buf)?;
    Ok(())
}

pub fn write_mask(out: &mut impl Write, mask: &SegmentationMask) -> Result<(), PgmError> {
    write_header(out, MASK_TAG, mask.width, mask.height)?;
    let mut buf = Vec::with_capacity(mask.labels.len() * 2);
    for &l in &mask.labels {
        let v = u16::try_from(l).map_err(|_| PgmError::Range(l as f64))?;
        buf.extend_from_slice(&v.to_be_bytes());
    }
    out.write_all(&buf)?;
    Ok(())
}

struct Raw {
    comment: String,
    width: u32,
    height: u32,
    samples: Vec<u16>,
}

fn read_raw(input: &mut impl BufRead) -> Result<Raw, PgmError> {
    let mut tokens: Vec<String> = Vec::new();
    let mut comment = String::new();
    while tokens.len() < 4 {
        let mut line = String::new();
        if input.read_line(&mut line)? == 0 {
            return Err(PgmError::Header("unexpected end of header".into()));
        }
        let line = line.trim_end_matches(['\n', '\r']);
        if let Some(c) = line.strip_prefix('#') {
            comment = c.trim().to_string();
            continue;
        }
        tokens.extend(line.split_whitespace().map(str::to_string));
    }
    if tokens[0] != "P5" {
        return Err(PgmError::Header(format!("magic {}", tokens[0])));
    }
    let num = |s: &str| {
        s.parse::<u32>()
            .map_err(|_| PgmError::Header(format!("bad number {s}")))
    };
    let (width, height, maxval) = (num(&tokens[1])?, num(&tokens[2])?, num(&tokens[3])?);
    if maxval != 65535 {
        return Err(PgmError::Header(format!("expected maxval 65535, got {maxval}")));
    }
    let n = width as usize * height as usize;
    let mut bytes = vec![0u8; n * 2];
    input.read_exact(&mut bytes)?;
    let samples = bytes
        .chunks_exact(2)
        .map(|b| u16::from_be_bytes([b[0], b[1]]))
        .collect();
    Ok(Raw {
        comment,
        width,
        height,
        samples,
    })
}

pub fn read_depth(input: &mut impl BufRead) -> Result<DepthImage, PgmError> {
    let raw = read_raw(input)?;
    let scale = raw
        .comment
        .strip_prefix(DEPTH_TAG)
        .and_then(|rest| rest.trim().strip_prefix("scale="))
        .and_then(|s| s.parse::<f64>().ok())
        .filter(|s| *s > 0.0)
        .ok_or_else(|| PgmError::Header(format!("missing '{DEPTH_TAG} scale=' comment")))?;
    let depth = raw.samples.iter().map(|&q| q as f64 * scale).collect();
    Ok(DepthImage::new(raw.width, raw.height, depth)?)
}

pub fn read_mask(input: &mut impl BufRead) -> Result<SegmentationMask, PgmError> {
    let raw = read_raw(input)?;
    if raw.comment != MASK_TAG {
        return Err(PgmError::Header(format!("missing '{MASK_TAG}' comment")));
    }
    let labels = raw.samples.iter().map(|&l| l as u32).collect();
    Ok(SegmentationMask::new(raw.width, raw.height, labels)?)
}
