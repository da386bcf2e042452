//! Grayscale images and their PGM/PNG encodings.
//!
//! Pixels are stored in column-major order (`vec(image)`), matching the
//! column ordering of the projection matrix: pixel `(row, col)` has flat
//! index `col·height + row`.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    height: usize,
    width: usize,
    data: Vec<f64>,
}

impl GrayImage {
    /// Wraps column-major pixel data.
    pub fn from_vec(height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != height * width {
            return Err(Error::invalid(format!(
                "{} pixels cannot fill a {height}x{width} image",
                data.len()
            )));
        }
        Ok(GrayImage {
            height,
            width,
            data,
        })
    }

    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(height * width);
        for col in 0..width {
            for row in 0..height {
                data.push(f(row, col));
            }
        }
        GrayImage {
            height,
            width,
            data,
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[col * self.height + row]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, v: f64) {
        self.data[col * self.height + row] = v;
    }

    /// Pixels in column-major (vec) order.
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    /// Reads a PGM (P5, 8 or 16 bit) or PNG grayscale image, rescaled to `[0, 1]`
    /// by the largest representable value.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut reader = BufReader::new(File::open(path)?);
        let mut magic = [0u8; 2];
        reader.read_exact(&mut magic)?;
        let mut bytes = magic.to_vec();
        reader.read_to_end(&mut bytes)?;
        match &magic {
            b"P5" => decode_pgm(&bytes),
            [0x89, b'P'] => decode_png(&bytes),
            _ => Err(Error::Format {
                format: "image",
                reason: format!("{} is neither binary PGM nor PNG", path.display()),
            }),
        }
    }

    /// Writes an 8-bit binary PGM; values are clipped to `[0, 1]` first.
    pub fn write_pgm<W: Write>(&self, mut w: W) -> Result<()> {
        write!(w, "P5\n{} {}\n255\n", self.width, self.height)?;
        let mut row_bytes = Vec::with_capacity(self.width);
        for row in 0..self.height {
            row_bytes.clear();
            row_bytes.extend(
                (0..self.width)
                    .map(|col| (self.get(row, col).clamp(0.0, 1.0) * 255.0).round() as u8),
            );
            w.write_all(&row_bytes)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save_pgm(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write_pgm(BufWriter::new(File::create(path)?))
    }
}

fn pgm_error(reason: impl Into<String>) -> Error {
    Error::Format {
        format: "PGM",
        reason: reason.into(),
    }
}

pub fn decode_pgm(bytes: &[u8]) -> Result<GrayImage> {
    let mut pos = 2;
    let mut header = [0usize; 3];
    for field in &mut header {
        // whitespace and comments
        loop {
            match bytes.get(pos) {
                Some(b'#') => {
                    while bytes.get(pos).is_some_and(|&b| b != b'\n') {
                        pos += 1;
                    }
                }
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                Some(_) => break,
                None => return Err(pgm_error("truncated header")),
            }
        }
        let start = pos;
        while bytes.get(pos).is_some_and(u8::is_ascii_digit) {
            pos += 1;
        }
        *field = std::str::from_utf8(&bytes[start..pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| pgm_error("bad header field"))?;
    }
    // exactly one whitespace byte before the raster
    pos += 1;
    let [width, height, maxval] = header;
    if maxval == 0 || maxval > 65535 {
        return Err(pgm_error(format!("unsupported maxval {maxval}")));
    }
    let depth = if maxval < 256 { 1 } else { 2 };
    let raster = bytes.get(pos..).unwrap_or(&[]);
    if raster.len() < width * height * depth {
        return Err(pgm_error("truncated raster"));
    }
    let scale = 1.0 / maxval as f64;
    Ok(GrayImage::from_fn(height, width, |row, col| {
        let idx = (row * width + col) * depth;
        let v = if depth == 1 {
            raster[idx] as f64
        } else {
            u16::from_be_bytes([raster[idx], raster[idx + 1]]) as f64
        };
        (v * scale).min(1.0)
    }))
}

fn decode_png(bytes: &[u8]) -> Result<GrayImage> {
    let png_err = |e: png::DecodingError| Error::Format {
        format: "PNG",
        reason: e.to_string(),
    };
    let mut decoder = png::Decoder::new(std::io::Cursor::new(bytes));
    decoder.set_transformations(png::Transformations::EXPAND);
    let mut reader = decoder.read_info().map_err(png_err)?;
    let size = reader.output_buffer_size().ok_or_else(|| Error::Format {
        format: "PNG",
        reason: "image too large".into(),
    })?;
    let mut buf = vec![0u8; size];
    let info = reader.next_frame(&mut buf).map_err(png_err)?;
    let channels = match info.color_type {
        png::ColorType::Grayscale => 1,
        png::ColorType::GrayscaleAlpha => 2,
        other => {
            return Err(Error::Format {
                format: "PNG",
                reason: format!("expected a grayscale image, found {other:?}"),
            })
        }
    };
    let (width, height) = (info.width as usize, info.height as usize);
    let sixteen = info.bit_depth == png::BitDepth::Sixteen;
    let line = info.line_size;
    Ok(GrayImage::from_fn(height, width, |row, col| {
        if sixteen {
            let idx = row * line + col * channels * 2;
            u16::from_be_bytes([buf[idx], buf[idx + 1]]) as f64 / 65535.0
        } else {
            buf[row * line + col * channels] as f64 / 255.0
        }
    }))
}
