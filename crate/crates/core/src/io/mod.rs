//! File formats: images, unary containers, label maps and text configs.

mod config;
mod image;
mod labelmap;
mod text;
mod unary;

pub use config::{CompatSource, RunConfig};
pub use image::{decode_image, decode_png, decode_ppm, encode_png, encode_ppm, load_image, save_image};
pub use labelmap::{
    decode_labelmap, encode_labelmap, load_labelmap, save_labelmap, sidecar_path, sidecar_text,
    Palette, VOID_INDEX,
};
pub use text::{
    format_compatibility, load_compatibility, load_grid, load_manifest, parse_compatibility,
    parse_grid, parse_manifest, save_compatibility, ManifestEntry,
};
pub use unary::{decode_unary, encode_unary, load_unary, read_unary, save_unary, write_unary, UNARY_MAGIC};

use std::path::Path;

use crate::learning::LabeledImage;

/// Load an image, its unary costs and its ground truth, checking that
/// their dimensions agree.
pub fn load_labeled_image(
    image: impl AsRef<Path>,
    unary: impl AsRef<Path>,
    truth: impl AsRef<Path>,
) -> crate::Result<LabeledImage> {
    LabeledImage::new(load_image(image)?, load_unary(unary)?, load_labelmap(truth)?)
}

pub fn load_manifest_images(path: impl AsRef<Path>) -> crate::Result<Vec<LabeledImage>> {
    load_manifest(path)?
        .iter()
        .map(|e| load_labeled_image(&e.image, &e.unary, &e.truth))
        .collect()
}
