use std::io::Cursor;
use std::path::Path;

use image::{ImageFormat, Rgb, RgbImage};

use super::ReportError;
use crate::io::sha256_hex;
use crate::probes::ConfusionMatrix;

/// Side of one matrix cell in pixels.
pub const CELL: u32 = 12;

const EMPTY_ROW: Rgb<u8> = Rgb([232, 232, 232]);
const LOW: [f64; 3] = [255.0, 255.0, 255.0];
const HIGH: [f64; 3] = [8.0, 48.0, 107.0];

fn shade(v: f64) -> Rgb<u8> {
    let v = v.clamp(0.0, 1.0);
    let c = |i: usize| (LOW[i] + (HIGH[i] - LOW[i]) * v).round() as u8;
    Rgb([c(0), c(1), c(2)])
}

/// Row-normalised heatmap: each row is scaled by its own total, so a row that always
/// predicts one column lights exactly that cell. Rows and columns keep the matrix order
/// (targets grouped by category, then `not`, then OTHER); rows without observations are
/// grey.
pub fn render_heatmap(m: &ConfusionMatrix) -> Result<RgbImage, ReportError> {
    if m.is_empty() {
        return Err(ReportError::EmptyConfusion);
    }
    let (w, h) = (m.columns.len() as u32 * CELL, m.rows.len() as u32 * CELL);
    let mut img = RgbImage::new(w, h);
    for (r, row) in m.counts.iter().enumerate() {
        let total = m.row_total(r);
        for (c, &n) in row.iter().enumerate() {
            let px = if total == 0 {
                EMPTY_ROW
            } else {
                shade(n as f64 / total as f64)
            };
            for dy in 0..CELL {
                for dx in 0..CELL {
                    img.put_pixel(c as u32 * CELL + dx, r as u32 * CELL + dy, px);
                }
            }
        }
    }
    Ok(img)
}

/// Hash over dimensions and raw pixels, independent of PNG encoder settings.
pub fn pixel_hash(img: &RgbImage) -> String {
    let mut bytes = Vec::with_capacity(8 + img.as_raw().len());
    bytes.extend_from_slice(&img.width().to_le_bytes());
    bytes.extend_from_slice(&img.height().to_le_bytes());
    bytes.extend_from_slice(img.as_raw());
    sha256_hex(&bytes)
}

pub fn png_bytes(img: &RgbImage) -> Result<Vec<u8>, ReportError> {
    let mut buf = Cursor::new(Vec::new());
    img.write_to(&mut buf, ImageFormat::Png)
        .map_err(|e| ReportError::Image(e.to_string()))?;
    Ok(buf.into_inner())
}

pub fn save_heatmap(m: &ConfusionMatrix, path: &Path) -> crate::Result<String> {
    let img = render_heatmap(m)?;
    crate::io::write_bytes(path, &png_bytes(&img)?)?;
    Ok(pixel_hash(&img))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Lexicon;

    fn cell(img: &RgbImage, r: usize, c: usize) -> Rgb<u8> {
        *img.get_pixel(c as u32 * CELL + CELL / 2, r as u32 * CELL + CELL / 2)
    }

    #[test]
    fn identity_gives_dark_diagonal() {
        let lex = Lexicon::builtin();
        let mut m = ConfusionMatrix::new(&lex);
        for t in m.rows.clone() {
            m.add(&t, &t);
        }
        let img = render_heatmap(&m).unwrap();
        assert_eq!(img.width(), 26 * CELL);
        for r in 0..m.rows.len() {
            for c in 0..m.columns.len() {
                let expect = if r == c { shade(1.0) } else { shade(0.0) };
                assert_eq!(cell(&img, r, c), expect);
            }
        }
    }

    #[test]
    fn all_very_lights_one_column() {
        let lex = Lexicon::builtin();
        let mut m = ConfusionMatrix::new(&lex);
        for t in m.rows.clone() {
            m.add(&t, "very");
        }
        let col = m.columns.iter().position(|c| c == "very").unwrap();
        let img = render_heatmap(&m).unwrap();
        for r in 0..m.rows.len() {
            for c in 0..m.columns.len() {
                assert_eq!(cell(&img, r, c) == shade(1.0), c == col);
            }
        }
    }

    #[test]
    fn empty_rows_are_grey_and_empty_matrix_errors() {
        let lex = Lexicon::builtin();
        let mut m = ConfusionMatrix::new(&lex);
        assert!(render_heatmap(&m).is_err());
        m.add("very", "not");
        let img = render_heatmap(&m).unwrap();
        assert_eq!(cell(&img, 0, 0), EMPTY_ROW);
        assert_eq!(pixel_hash(&img), pixel_hash(&render_heatmap(&m).unwrap()));
        assert!(png_bytes(&img).unwrap().starts_with(b"\x89PNG"));
    }
}
