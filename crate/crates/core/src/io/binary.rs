//! `PMAP1` and `DMAP1` containers.
//!
//! Layout: 5-byte magic, then `width`, `height`, `flags` as u32, then the
//! planes. A pointmap stores `width·height` xyz triples of f32, then an
//! optional f32 confidence plane (flag bit 0), then an optional mask plane of
//! 0/1 bytes (flag bit 1). A depth map stores one f32 plane and no flags;
//! its validity is `depth > 0`.

use super::{read_bytes, write_bytes, FormatError};
use crate::geometry::{DepthMap, FrameId, GeometryError, Pointmap};
use nalgebra::Vector3;
use std::path::Path;

pub const POINTMAP_MAGIC: &[u8; 5] = b"PMAP1";
pub const DEPTH_MAGIC: &[u8; 5] = b"DMAP1";
pub const FLAG_CONFIDENCE: u32 = 1;
pub const FLAG_MASK: u32 = 2;
const HEADER_LEN: usize = 17;

/// A pointmap exactly as stored, in single precision.
#[derive(Debug, Clone, PartialEq)]
pub struct PointmapFile {
    pub width: u32,
    pub height: u32,
    pub points: Vec<[f32; 3]>,
    pub confidence: Option<Vec<f32>>,
    pub mask: Option<Vec<bool>>,
}

/// A depth map exactly as stored, in single precision.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthFile {
    pub width: u32,
    pub height: u32,
    pub depth: Vec<f32>,
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], FormatError> {
        let available = self.bytes.len() - self.pos;
        if available < n {
            return Err(FormatError::Truncated {
                offset: self.bytes.len(),
                needed: n - available,
            });
        }
        let out = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn u32(&mut self) -> Result<u32, FormatError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f32_plane(&mut self, n: usize) -> Result<Vec<f32>, FormatError> {
        let raw = self.take(n * 4)?;
        Ok(raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }

    fn finish(&self) -> Result<(), FormatError> {
        if self.pos != self.bytes.len() {
            return Err(FormatError::TrailingBytes {
                offset: self.pos,
                count: self.bytes.len() - self.pos,
            });
        }
        Ok(())
    }
}

/// Magic, dimensions and flags. Checks that the payload size is addressable
/// before anything is allocated.
fn header(
    r: &mut Reader,
    magic: &[u8; 5],
    allowed_flags: u32,
    plane_bytes: impl Fn(u32) -> usize,
) -> Result<(u32, u32, u32), FormatError> {
    let found = &r.bytes[..r.bytes.len().min(5)];
    if found != &magic[..found.len()] {
        return Err(FormatError::BadMagic {
            expected: String::from_utf8_lossy(magic).into_owned(),
            found: found.to_vec(),
        });
    }
    r.take(5)?;
    let (w, h, flags) = (r.u32()?, r.u32()?, r.u32()?);
    if flags & !allowed_flags != 0 {
        return Err(FormatError::UnknownFlags { offset: 13, flags });
    }
    let need = (w as usize)
        .checked_mul(h as usize)
        .and_then(|n| n.checked_mul(plane_bytes(flags)));
    match need {
        Some(need) if need <= r.bytes.len() - r.pos => Ok((w, h, flags)),
        Some(need) => Err(FormatError::Truncated {
            offset: r.bytes.len(),
            needed: need - (r.bytes.len() - r.pos),
        }),
        None => Err(FormatError::InvalidValue {
            offset: 5,
            reason: format!("{w}×{h} grid is too large"),
        }),
    }
}

fn push_header(out: &mut Vec<u8>, magic: &[u8; 5], w: u32, h: u32, flags: u32) {
    out.extend_from_slice(magic);
    out.extend_from_slice(&w.to_le_bytes());
    out.extend_from_slice(&h.to_le_bytes());
    out.extend_from_slice(&flags.to_le_bytes());
}

impl PointmapFile {
    pub fn len(&self) -> usize {
        self.width as usize * self.height as usize
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn flags(&self) -> u32 {
        (self.confidence.is_some() as u32) * FLAG_CONFIDENCE | (self.mask.is_some() as u32) * FLAG_MASK
    }

    pub fn from_pointmap(pm: &Pointmap) -> Self {
        Self {
            width: pm.width() as u32,
            height: pm.height() as u32,
            points: pm.points().iter().map(|p| [p.x as f32, p.y as f32, p.z as f32]).collect(),
            confidence: Some(pm.confidence().iter().map(|&c| c as f32).collect()),
            mask: Some(pm.mask().to_vec()),
        }
    }

    /// Widens to double precision. A missing confidence plane means unit
    /// confidence, a missing mask means every pixel is valid.
    pub fn to_pointmap(&self, frame: FrameId) -> Result<Pointmap, GeometryError> {
        let n = self.len();
        Pointmap::new(
            self.width as usize,
            self.height as usize,
            self.points
                .iter()
                .map(|p| Vector3::new(p[0] as f64, p[1] as f64, p[2] as f64))
                .collect(),
            self.confidence
                .as_ref()
                .map_or(vec![1.0; n], |c| c.iter().map(|&x| x as f64).collect()),
            self.mask.clone().unwrap_or_else(|| vec![true; n]),
            frame,
        )
    }

    pub fn encode(&self) -> Vec<u8> {
        let n = self.len();
        let mut out = Vec::with_capacity(HEADER_LEN + n * 17);
        push_header(&mut out, POINTMAP_MAGIC, self.width, self.height, self.flags());
        for p in &self.points {
            for c in p {
                out.extend_from_slice(&c.to_le_bytes());
            }
        }
        if let Some(conf) = &self.confidence {
            for c in conf {
                out.extend_from_slice(&c.to_le_bytes());
            }
        }
        if let Some(mask) = &self.mask {
            out.extend(mask.iter().map(|&m| m as u8));
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, FormatError> {
        let mut r = Reader { bytes, pos: 0 };
        let (width, height, flags) = header(&mut r, POINTMAP_MAGIC, FLAG_CONFIDENCE | FLAG_MASK, |f| {
            12 + 4 * (f & FLAG_CONFIDENCE != 0) as usize + (f & FLAG_MASK != 0) as usize
        })?;
        let n = width as usize * height as usize;
        let points_at = r.pos;
        let flat = r.f32_plane(3 * n)?;
        let points: Vec<[f32; 3]> = flat.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect();
        let conf_at = r.pos;
        let confidence = if flags & FLAG_CONFIDENCE != 0 {
            Some(r.f32_plane(n)?)
        } else {
            None
        };
        let mask_at = r.pos;
        let mask = if flags & FLAG_MASK != 0 {
            let raw = r.take(n)?;
            let mut m = Vec::with_capacity(n);
            for (k, &b) in raw.iter().enumerate() {
                match b {
                    0 => m.push(false),
                    1 => m.push(true),
                    _ => {
                        return Err(FormatError::InvalidValue {
                            offset: mask_at + k,
                            reason: format!("mask byte {b} is not 0 or 1"),
                        })
                    }
                }
            }
            Some(m)
        } else {
            None
        };
        r.finish()?;
        let valid = |k: usize| mask.as_ref().is_none_or(|m| m[k]);
        for (k, p) in points.iter().enumerate() {
            if valid(k) {
                if let Some(c) = p.iter().position(|x| !x.is_finite()) {
                    return Err(FormatError::InvalidValue {
                        offset: points_at + 12 * k + 4 * c,
                        reason: format!("non-finite coordinate in valid pixel {k}"),
                    });
                }
            }
        }
        if let Some(conf) = &confidence {
            if let Some(k) = conf.iter().position(|c| !(c.is_finite() && *c > 0.0)) {
                return Err(FormatError::InvalidValue {
                    offset: conf_at + 4 * k,
                    reason: format!("confidence {} is not positive and finite", conf[k]),
                });
            }
        }
        Ok(Self {
            width,
            height,
            points,
            confidence,
            mask,
        })
    }

    pub fn read(path: &Path) -> Result<Self, FormatError> {
        Self::decode(&read_bytes(path)?)
    }

    pub fn write(&self, path: &Path) -> Result<(), FormatError> {
        write_bytes(path, &self.encode())
    }
}

impl DepthFile {
    pub fn from_depth(d: &DepthMap) -> Self {
        Self {
            width: d.width() as u32,
            height: d.height() as u32,
            depth: d.depth().iter().map(|&x| x as f32).collect(),
        }
    }

    pub fn to_depth(&self) -> Result<DepthMap, GeometryError> {
        DepthMap::new(
            self.width as usize,
            self.height as usize,
            self.depth.iter().map(|&x| x as f64).collect(),
        )
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN + 4 * self.depth.len());
        push_header(&mut out, DEPTH_MAGIC, self.width, self.height, 0);
        for d in &self.depth {
            out.extend_from_slice(&d.to_le_bytes());
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, FormatError> {
        let mut r = Reader { bytes, pos: 0 };
        let (width, height, _) = header(&mut r, DEPTH_MAGIC, 0, |_| 4)?;
        let at = r.pos;
        let depth = r.f32_plane(width as usize * height as usize)?;
        r.finish()?;
        if let Some(k) = depth.iter().position(|d| !(d.is_finite() && *d >= 0.0)) {
            return Err(FormatError::InvalidValue {
                offset: at + 4 * k,
                reason: format!("depth {} must be zero or positive and finite", depth[k]),
            });
        }
        Ok(Self { width, height, depth })
    }

    pub fn read(path: &Path) -> Result<Self, FormatError> {
        Self::decode(&read_bytes(path)?)
    }

    pub fn write(&self, path: &Path) -> Result<(), FormatError> {
        write_bytes(path, &self.encode())
    }
}
