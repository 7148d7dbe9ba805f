use std::fs;
use std::path::{Path, PathBuf};

use crate::crf::CompatibilityMatrix;
use crate::error::{Error, Result};
use crate::learning::GridSpec;
use crate::matrix::Matrix;

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// Lines with comments (`#` to end of line) stripped, blank lines dropped,
/// paired with 1-based line numbers.
fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines().enumerate().filter_map(|(i, line)| {
        let line = line.split('#').next().unwrap_or("").trim();
        (!line.is_empty()).then_some((i + 1, line))
    })
}

fn parse_err(path: &Path, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        msg: msg.into(),
    }
}

/// One `image unary ground-truth` line of a training manifest.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    pub image: PathBuf,
    pub unary: PathBuf,
    pub truth: PathBuf,
}

/// Parse manifest text; relative paths are resolved against `base`.
pub fn parse_manifest(text: &str, base: &Path, origin: &Path) -> Result<Vec<ManifestEntry>> {
    let mut entries = Vec::new();
    for (n, line) in content_lines(text) {
        let fields: Vec<&str> = line.split_whitespace().collect();
        let [image, unary, truth] = fields[..] else {
            return Err(parse_err(
                origin,
                format!("line {n}: expected 3 paths, found {}", fields.len()),
            ));
        };
        entries.push(ManifestEntry {
            image: base.join(image),
            unary: base.join(unary),
            truth: base.join(truth),
        });
    }
    if entries.is_empty() {
        return Err(parse_err(origin, "manifest lists no images"));
    }
    Ok(entries)
}

pub fn load_manifest(path: impl AsRef<Path>) -> Result<Vec<ManifestEntry>> {
    let path = path.as_ref();
    let base = path.parent().unwrap_or(Path::new(""));
    parse_manifest(&read_text(path)?, base, path)
}

/// One row of whitespace-separated numbers per label.
pub fn parse_compatibility(text: &str, origin: &Path) -> Result<CompatibilityMatrix> {
    let mut rows = Vec::new();
    for (n, line) in content_lines(text) {
        let row = line
            .split_whitespace()
            .map(|t| t.parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| parse_err(origin, format!("line {n}: {e}")))?;
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(parse_err(origin, "no matrix rows"));
    }
    if rows.iter().any(|r| r.len() != rows.len()) {
        return Err(parse_err(origin, format!("matrix with {} rows is not square", rows.len())));
    }
    CompatibilityMatrix::new(Matrix::from_rows(&rows)?)
}

pub fn format_compatibility(mu: &CompatibilityMatrix) -> String {
    let mut s = String::new();
    for row in mu.as_matrix().iter_rows() {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
        s.push_str(&cells.join(" "));
        s.push('\n');
    }
    s
}

pub fn load_compatibility(path: impl AsRef<Path>) -> Result<CompatibilityMatrix> {
    let path = path.as_ref();
    parse_compatibility(&read_text(path)?, path)
}

pub fn save_compatibility(mu: &CompatibilityMatrix, path: impl AsRef<Path>) -> Result<()> {
    super::image::write_file(path.as_ref(), format_compatibility(mu).as_bytes())
}

/// Grid file: lines `w1 = …`, `theta_alpha = …`, `theta_beta = …`, each
/// followed by comma- or space-separated candidates.
pub fn parse_grid(text: &str, origin: &Path) -> Result<GridSpec> {
    let mut lists: [Option<Vec<f64>>; 3] = [None, None, None];
    for (n, line) in content_lines(text) {
        let (key, rest) = line
            .split_once(['=', ':'])
            .ok_or_else(|| parse_err(origin, format!("line {n}: expected `key = values`")))?;
        let slot = match key.trim() {
            "w1" => 0,
            "theta_alpha" => 1,
            "theta_beta" => 2,
            other => return Err(parse_err(origin, format!("line {n}: unknown key `{other}`"))),
        };
        if lists[slot].is_some() {
            return Err(parse_err(origin, format!("line {n}: `{}` given twice", key.trim())));
        }
        let values = rest
            .split([',', ' ', '\t'])
            .filter(|t| !t.is_empty())
            .map(|t| t.parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| parse_err(origin, format!("line {n}: {e}")))?;
        lists[slot] = Some(values);
    }
    let [Some(w1), Some(alpha), Some(beta)] = lists else {
        return Err(parse_err(origin, "grid needs w1, theta_alpha and theta_beta"));
    };
    GridSpec::new(w1, alpha, beta)
}

pub fn load_grid(path: impl AsRef<Path>) -> Result<GridSpec> {
    let path = path.as_ref();
    parse_grid(&read_text(path)?, path)
}
