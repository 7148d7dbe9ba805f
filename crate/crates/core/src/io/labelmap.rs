use std::fmt::Write as _;
use std::fs;
use std::io::Cursor;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::eval::LabelMap;

use super::image::write_file;

/// Palette index written for void pixels.
pub const VOID_INDEX: u8 = 255;
const VOID_COLOR: [u8; 3] = [224, 224, 192];

/// Colors and class names for label indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Palette {
    entries: Vec<(String, [u8; 3])>,
}

impl Palette {
    pub fn new(entries: Vec<(String, [u8; 3])>) -> Result<Self> {
        if entries.len() > VOID_INDEX as usize {
            return Err(Error::InvalidParameter(format!(
                "palette has {} entries, at most {} fit beside the void index",
                entries.len(),
                VOID_INDEX
            )));
        }
        Ok(Palette { entries })
    }

    /// `labels` distinct colors from the usual bit-interleaved colormap,
    /// named `class_<i>`.
    pub fn generated(labels: usize) -> Result<Self> {
        let entries = (0..labels)
            .map(|i| {
                let mut c = [0u8; 3];
                let mut id = i;
                for bit in (0..8).rev() {
                    for (ch, v) in c.iter_mut().enumerate() {
                        *v |= (((id >> ch) & 1) as u8) << bit;
                    }
                    id >>= 3;
                }
                (format!("class_{i}"), c)
            })
            .collect();
        Self::new(entries)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn color(&self, label: usize) -> [u8; 3] {
        self.entries[label].1
    }

    pub fn name(&self, label: usize) -> &str {
        &self.entries[label].0
    }
}

/// The class-name file written next to a label map: same stem, `.txt`.
pub fn sidecar_path(path: &Path) -> PathBuf {
    path.with_extension("txt")
}

/// Encode as an 8-bit indexed PNG; void pixels get index 255.
pub fn encode_labelmap(map: &LabelMap, palette: &Palette) -> Result<Vec<u8>> {
    let need = map.label_count();
    if palette.len() < need {
        return Err(Error::PaletteTooSmall {
            have: palette.len(),
            need,
        });
    }
    let mut plte = vec![0u8; 256 * 3];
    for (i, (_, c)) in palette.entries.iter().enumerate() {
        plte[3 * i..3 * i + 3].copy_from_slice(c);
    }
    let v = VOID_INDEX as usize * 3;
    plte[v..v + 3].copy_from_slice(&VOID_COLOR);
    let data: Vec<u8> = map
        .labels()
        .iter()
        .map(|l| l.map_or(VOID_INDEX, |l| l as u8))
        .collect();

    let mut out = Vec::new();
    {
        let mut encoder = png::Encoder::new(&mut out, map.width() as u32, map.height() as u32);
        encoder.set_color(png::ColorType::Indexed);
        encoder.set_depth(png::BitDepth::Eight);
        encoder.set_palette(plte);
        let mut writer = encoder.write_header().map_err(|e| Error::Png(e.to_string()))?;
        writer
            .write_image_data(&data)
            .map_err(|e| Error::Png(e.to_string()))?;
        writer.finish().map_err(|e| Error::Png(e.to_string()))?;
    }
    Ok(out)
}

pub fn sidecar_text(palette: &Palette) -> String {
    let mut s = String::new();
    for (i, (name, _)) in palette.entries.iter().enumerate() {
        let _ = writeln!(s, "{i} {name}");
    }
    let _ = writeln!(s, "{VOID_INDEX} void");
    s
}

/// Write the indexed PNG and its class-name sidecar.
pub fn save_labelmap(map: &LabelMap, palette: &Palette, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    write_file(path, &encode_labelmap(map, palette)?)?;
    write_file(&sidecar_path(path), sidecar_text(palette).as_bytes())
}

/// Decode an 8-bit indexed or grayscale PNG of label indices.
pub fn decode_labelmap(bytes: &[u8]) -> Result<LabelMap> {
    let decoder = png::Decoder::new(Cursor::new(bytes));
    let mut reader = decoder.read_info().map_err(|e| Error::Png(e.to_string()))?;
    let size = reader
        .output_buffer_size()
        .ok_or_else(|| Error::Unsupported("PNG too large".into()))?;
    let mut buf = vec![0; size];
    let info = reader
        .next_frame(&mut buf)
        .map_err(|e| Error::Png(e.to_string()))?;
    if info.bit_depth != png::BitDepth::Eight
        || !matches!(info.color_type, png::ColorType::Indexed | png::ColorType::Grayscale)
    {
        return Err(Error::Unsupported(format!(
            "label maps must be 8-bit indexed or grayscale, got {:?} {:?}",
            info.color_type, info.bit_depth
        )));
    }
    let (w, h) = (info.width as usize, info.height as usize);
    let labels = buf[..info.line_size * h]
        .chunks_exact(info.line_size)
        .flat_map(|line| &line[..w])
        .map(|&v| (v != VOID_INDEX).then_some(v as usize))
        .collect();
    LabelMap::new(w, h, labels)
}

pub fn load_labelmap(path: impl AsRef<Path>) -> Result<LabelMap> {
    let path = path.as_ref();
    decode_labelmap(&fs::read(path).map_err(|e| Error::io(path, e))?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_tone() -> Palette {
        Palette::new(vec![("black".into(), [0, 0, 0]), ("white".into(), [255, 255, 255])]).unwrap()
    }

    fn raw_indices(bytes: &[u8]) -> Vec<u8> {
        let mut reader = png::Decoder::new(Cursor::new(bytes)).read_info().unwrap();
        let mut buf = vec![0; reader.output_buffer_size().unwrap()];
        let info = reader.next_frame(&mut buf).unwrap();
        buf.truncate(info.buffer_size());
        buf
    }

    #[test]
    fn indices_written_verbatim() {
        let map = LabelMap::from_labels(2, 1, &[0, 1]).unwrap();
        assert_eq!(raw_indices(&encode_labelmap(&map, &two_tone()).unwrap()), vec![0, 1]);
    }

    #[test]
    fn void_is_255() {
        let map = LabelMap::new(3, 1, vec![Some(1), None, Some(0)]).unwrap();
        let bytes = encode_labelmap(&map, &two_tone()).unwrap();
        assert_eq!(raw_indices(&bytes), vec![1, 255, 0]);
        assert_eq!(decode_labelmap(&bytes).unwrap(), map);
    }

    #[test]
    fn palette_too_small() {
        let map = LabelMap::from_labels(3, 1, &[0, 1, 2]).unwrap();
        assert!(matches!(
            encode_labelmap(&map, &two_tone()),
            Err(Error::PaletteTooSmall { have: 2, need: 3 })
        ));
    }

    #[test]
    fn generated_palette_is_distinct() {
        let p = Palette::generated(21).unwrap();
        let mut colors: Vec<_> = (0..21).map(|i| p.color(i)).collect();
        assert_eq!(colors[0], [0, 0, 0]);
        assert_eq!(colors[1], [128, 0, 0]);
        colors.sort();
        colors.dedup();
        assert_eq!(colors.len(), 21);
        assert!(Palette::generated(256).is_err());
    }

    #[test]
    fn sidecar_lists_classes_and_void() {
        assert_eq!(sidecar_text(&two_tone()), "0 black\n1 white\n255 void\n");
        assert_eq!(sidecar_path(Path::new("out/a.png")), Path::new("out/a.txt"));
    }
}
