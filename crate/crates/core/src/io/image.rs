use std::fs;
use std::io::{Cursor, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::image::RgbImage;

const PNG_SIGNATURE: &[u8] = b"\x89PNG\r\n\x1a\n";

/// Load a binary PPM (P6, 8-bit) or PNG image, sniffing the format from
/// the file's leading bytes.
pub fn load_image(path: impl AsRef<Path>) -> Result<RgbImage> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_image(&bytes)
}

pub fn decode_image(bytes: &[u8]) -> Result<RgbImage> {
    if bytes.starts_with(PNG_SIGNATURE) {
        decode_png(bytes)
    } else if bytes.starts_with(b"P6") {
        decode_ppm(bytes)
    } else {
        Err(Error::Unsupported("expected a P6 PPM or PNG image".into()))
    }
}

/// Header tokens of a netpbm file, skipping whitespace and `#` comments.
struct HeaderReader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl HeaderReader<'_> {
    fn token(&mut self) -> Result<&[u8]> {
        loop {
            match self.bytes.get(self.pos) {
                None => return Err(Error::TruncatedPayload),
                Some(b'#') => {
                    while self.bytes.get(self.pos).is_some_and(|&b| b != b'\n') {
                        self.pos += 1;
                    }
                }
                Some(b) if b.is_ascii_whitespace() => self.pos += 1,
                Some(_) => break,
            }
        }
        let start = self.pos;
        while self.bytes.get(self.pos).is_some_and(|b| !b.is_ascii_whitespace()) {
            self.pos += 1;
        }
        Ok(&self.bytes[start..self.pos])
    }

    fn number(&mut self, what: &str) -> Result<usize> {
        let tok = self.token()?;
        std::str::from_utf8(tok)
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::Unsupported(format!("bad PPM {what}")))
    }
}

pub fn decode_ppm(bytes: &[u8]) -> Result<RgbImage> {
    let mut header = HeaderReader { bytes, pos: 0 };
    if header.token()? != b"P6" {
        return Err(Error::Unsupported("only binary P6 PPM is supported".into()));
    }
    let width = header.number("width")?;
    let height = header.number("height")?;
    let maxval = header.number("maxval")?;
    if maxval != 255 {
        return Err(Error::Unsupported(format!("PPM maxval {maxval}, only 8-bit depth is supported")));
    }
    // exactly one whitespace byte separates the header from the raster
    let start = header.pos + 1;
    let need = width
        .checked_mul(height)
        .and_then(|n| n.checked_mul(3))
        .ok_or_else(|| Error::Unsupported("PPM dimensions overflow".into()))?;
    if bytes.len() < start || bytes.len() - start < need {
        return Err(Error::TruncatedPayload);
    }
    let pixels = bytes[start..start + need]
        .chunks_exact(3)
        .map(|c| [c[0], c[1], c[2]])
        .collect();
    RgbImage::new(width, height, pixels)
}

fn png_err(e: impl std::fmt::Display) -> Error {
    let msg = e.to_string();
    if msg.contains("EOF") || msg.contains("eof") {
        Error::TruncatedPayload
    } else {
        Error::Png(msg)
    }
}

pub fn decode_png(bytes: &[u8]) -> Result<RgbImage> {
    let mut decoder = png::Decoder::new(Cursor::new(bytes));
    decoder.set_transformations(png::Transformations::EXPAND);
    let mut reader = decoder.read_info().map_err(png_err)?;
    let size = reader
        .output_buffer_size()
        .ok_or_else(|| Error::Unsupported("PNG too large".into()))?;
    let mut buf = vec![0; size];
    let info = reader.next_frame(&mut buf).map_err(png_err)?;
    if info.bit_depth != png::BitDepth::Eight {
        return Err(Error::Unsupported(format!(
            "PNG bit depth {:?}, only 8-bit is supported",
            info.bit_depth
        )));
    }
    let channels = match info.color_type {
        png::ColorType::Rgb => 3,
        png::ColorType::Rgba => 4,
        png::ColorType::Grayscale => 1,
        png::ColorType::GrayscaleAlpha => 2,
        other => return Err(Error::Unsupported(format!("PNG color type {other:?}"))),
    };
    let (w, h) = (info.width as usize, info.height as usize);
    let pixels = buf[..info.line_size * h]
        .chunks_exact(info.line_size)
        .flat_map(|line| line[..w * channels].chunks_exact(channels))
        .map(|px| match channels {
            1 | 2 => [px[0]; 3],
            _ => [px[0], px[1], px[2]],
        })
        .collect();
    RgbImage::new(w, h, pixels)
}

pub fn encode_ppm(image: &RgbImage) -> Vec<u8> {
    let mut out = format!("P6\n{} {}\n255\n", image.width(), image.height()).into_bytes();
    out.extend(image.pixels().iter().flatten());
    out
}

pub fn encode_png(image: &RgbImage) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    {
        let mut encoder = png::Encoder::new(&mut out, image.width() as u32, image.height() as u32);
        encoder.set_color(png::ColorType::Rgb);
        encoder.set_depth(png::BitDepth::Eight);
        let mut writer = encoder.write_header().map_err(png_err)?;
        let data: Vec<u8> = image.pixels().iter().flatten().copied().collect();
        writer.write_image_data(&data).map_err(png_err)?;
        writer.finish().map_err(png_err)?;
    }
    Ok(out)
}

pub(crate) fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(bytes).map_err(|e| Error::io(path, e))
}

/// Write `image` as PNG if the extension is `.png`, otherwise as P6 PPM.
pub fn save_image(image: &RgbImage, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let is_png = path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("png"));
    let bytes = if is_png { encode_png(image)? } else { encode_ppm(image) };
    write_file(path, &bytes)
}
