//! 8-bit raster images and binary PGM (P5) / PPM (P6) I/O.

use std::io::Write;
use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ImageError {
    #[error("io error")]
    Io(#[from] std::io::Error),
    #[error("malformed header: {0}")]
    Header(String),
    #[error("unsupported bit depth (maxval {0}, only 255 is supported)")]
    BitDepth(u32),
    #[error("truncated pixel data: expected {expected} bytes, found {found}")]
    Truncated { expected: usize, found: usize },
    #[error("buffer length {len} does not match {width}x{height}x{channels}")]
    Size { width: usize, height: usize, channels: usize, len: usize },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    pub width: usize,
    pub height: usize,
    pub data: Vec<u8>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize) -> Self {
        GrayImage { width, height, data: vec![0; width * height] }
    }

    pub fn from_raw(width: usize, height: usize, data: Vec<u8>) -> Result<Self, ImageError> {
        if data.len() != width * height {
            return Err(ImageError::Size { width, height, channels: 1, len: data.len() });
        }
        Ok(GrayImage { width, height, data })
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: u8) {
        self.data[y * self.width + x] = v;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ColorSpace {
    Bgr,
    Rgb,
    Yuv,
    Hsv,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ColorImage {
    pub width: usize,
    pub height: usize,
    /// Row-major channel triplets.
    pub data: Vec<u8>,
    pub space: ColorSpace,
}

impl ColorImage {
    pub fn new(width: usize, height: usize, space: ColorSpace) -> Self {
        ColorImage { width, height, data: vec![0; 3 * width * height], space }
    }

    pub fn from_raw(width: usize, height: usize, data: Vec<u8>, space: ColorSpace) -> Result<Self, ImageError> {
        if data.len() != 3 * width * height {
            return Err(ImageError::Size { width, height, channels: 3, len: data.len() });
        }
        Ok(ColorImage { width, height, data, space })
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> [u8; 3] {
        let i = 3 * (y * self.width + x);
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, px: [u8; 3]) {
        let i = 3 * (y * self.width + x);
        self.data[i..i + 3].copy_from_slice(&px);
    }

    pub fn pixels(&self) -> impl Iterator<Item = [u8; 3]> + '_ {
        self.data.chunks_exact(3).map(|c| [c[0], c[1], c[2]])
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Image {
    Gray(GrayImage),
    Color(ColorImage),
}

impl From<GrayImage> for Image {
    fn from(g: GrayImage) -> Self {
        Image::Gray(g)
    }
}

impl From<ColorImage> for Image {
    fn from(c: ColorImage) -> Self {
        Image::Color(c)
    }
}

impl Image {
    pub fn into_gray(self) -> Option<GrayImage> {
        match self {
            Image::Gray(g) => Some(g),
            Image::Color(_) => None,
        }
    }

    pub fn into_color(self) -> Option<ColorImage> {
        match self {
            Image::Color(c) => Some(c),
            Image::Gray(_) => None,
        }
    }
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    fn skip_space_and_comments(&mut self) {
        while self.pos < self.buf.len() {
            match self.buf[self.pos] {
                b'#' => {
                    while self.pos < self.buf.len() && self.buf[self.pos] != b'\n' {
                        self.pos += 1;
                    }
                }
                c if c.is_ascii_whitespace() => self.pos += 1,
                _ => break,
            }
        }
    }

    fn number(&mut self, what: &str) -> Result<u32, ImageError> {
        self.skip_space_and_comments();
        let start = self.pos;
        while self.pos < self.buf.len() && self.buf[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(ImageError::Header(format!("expected {what}")));
        }
        std::str::from_utf8(&self.buf[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| ImageError::Header(format!("{what} out of range")))
    }
}

/// Decodes a binary PGM or PPM held in memory.
pub fn decode_pnm(bytes: &[u8]) -> Result<Image, ImageError> {
    if bytes.len() < 2 || bytes[0] != b'P' {
        return Err(ImageError::Header("missing magic number".into()));
    }
    let channels = match bytes[1] {
        b'5' => 1,
        b'6' => 3,
        other => return Err(ImageError::Header(format!("unsupported magic P{}", other as char))),
    };
    let mut cur = Cursor { buf: bytes, pos: 2 };
    let width = cur.number("width")? as usize;
    let height = cur.number("height")? as usize;
    let maxval = cur.number("maxval")?;
    if maxval != 255 {
        return Err(ImageError::BitDepth(maxval));
    }
    match bytes.get(cur.pos) {
        Some(c) if c.is_ascii_whitespace() => cur.pos += 1,
        _ => return Err(ImageError::Header("missing whitespace after maxval".into())),
    }
    let expected = width * height * channels;
    let pixels = &bytes[cur.pos..];
    if pixels.len() < expected {
        return Err(ImageError::Truncated { expected, found: pixels.len() });
    }
    let data = pixels[..expected].to_vec();
    Ok(if channels == 1 {
        Image::Gray(GrayImage { width, height, data })
    } else {
        Image::Color(ColorImage { width, height, data, space: ColorSpace::Rgb })
    })
}

/// Encodes as P5 (gray) or P6 (color). Color channels are written as stored,
/// whatever their colorspace tag.
pub fn encode_pnm(image: &Image) -> Vec<u8> {
    let (magic, w, h, data) = match image {
        Image::Gray(g) => ("P5", g.width, g.height, &g.data),
        Image::Color(c) => ("P6", c.width, c.height, &c.data),
    };
    let mut out = format!("{magic}\n{w} {h}\n255\n").into_bytes();
    out.extend_from_slice(data);
    out
}

pub fn read_image(path: impl AsRef<Path>) -> Result<Image, ImageError> {
    decode_pnm(&std::fs::read(path)?)
}

pub fn write_image(image: &Image, path: impl AsRef<Path>) -> Result<(), ImageError> {
    let mut f = std::fs::File::create(path)?;
    f.write_all(&encode_pnm(image))?;
    Ok(())
}
