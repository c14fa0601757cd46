//! Binary PGM (P5) map rendering with a plain-text metadata sidecar.

use super::OccupancyGrid;
use std::io::Write;
use std::path::Path;
use thiserror::Error;

/// Gray level used for never-observed cells (map-server convention).
const UNKNOWN_GRAY: u8 = 205;

#[derive(Debug, Error)]
pub enum PgmError {
    #[error("map is empty, nothing to export")]
    EmptyMap,
    #[error("writing {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

/// Render the grid's observed bounding box as a P5 PGM (maxval 255).
///
/// Pixel values: never-observed cells map to 205, observed cells to
/// `round(254 * (1 - p))` so occupied is dark and free is light. Row 0 of the
/// image is the maximum-cy row (image y grows downward). A sidecar at
/// `<path>.meta` records the world pose of the map: `origin_x`, `origin_y`,
/// `resolution`, `width`, `height`, one `key value` pair per line, where the
/// origin is the world position of the minimum-index cell.
pub fn export_pgm(map: &OccupancyGrid, path: &Path) -> Result<(), PgmError> {
    let (min_cx, min_cy, max_cx, max_cy) = map.observed_bounds().ok_or(PgmError::EmptyMap)?;
    let width = (max_cx - min_cx + 1) as usize;
    let height = (max_cy - min_cy + 1) as usize;

    let mut data = Vec::with_capacity(width * height + 32);
    data.extend_from_slice(format!("P5\n{width} {height}\n255\n").as_bytes());
    for row in 0..height {
        let cy = max_cy - row as i32;
        for col in 0..width {
            let cx = min_cx + col as i32;
            let gray = match map.probability(super::CellIndex::new(cx, cy)) {
                None => UNKNOWN_GRAY,
                Some(p) => (254.0 * (1.0 - p)).round() as u8,
            };
            data.push(gray);
        }
    }

    let io_err = |source: std::io::Error, p: &Path| PgmError::Io {
        path: p.display().to_string(),
        source,
    };
    let mut file = std::fs::File::create(path).map_err(|e| io_err(e, path))?;
    file.write_all(&data).map_err(|e| io_err(e, path))?;

    let (origin_x, origin_y) = map.cell_to_world(super::CellIndex::new(min_cx, min_cy));
    let sidecar_path = sidecar_path(path);
    let sidecar = format!(
        "origin_x {origin_x}\norigin_y {origin_y}\nresolution {}\nwidth {width}\nheight {height}\n",
        map.resolution()
    );
    std::fs::write(&sidecar_path, sidecar).map_err(|e| io_err(e, &sidecar_path))?;
    Ok(())
}

/// Path of the metadata sidecar written next to a PGM export.
pub fn sidecar_path(pgm_path: &Path) -> std::path::PathBuf {
    let mut os = pgm_path.as_os_str().to_owned();
    os.push(".meta");
    std::path::PathBuf::from(os)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{CellIndex, LOG_ODDS_MAX, LOG_ODDS_MIN};

    #[test]
    fn empty_map_is_an_error() {
        let map = OccupancyGrid::new((0.0, 0.0), 0.05);
        let dir = tempfile::tempdir().unwrap();
        let err = export_pgm(&map, &dir.path().join("empty.pgm")).unwrap_err();
        assert!(matches!(err, PgmError::EmptyMap));
    }

    #[test]
    fn extreme_cells_render_black_and_white() {
        let mut map = OccupancyGrid::new((0.0, 0.0), 0.05);
        map.update_cell(CellIndex::new(0, 0), LOG_ODDS_MAX); // p ≈ 1 → pixel 0
        map.update_cell(CellIndex::new(1, 0), LOG_ODDS_MIN); // p ≈ 0 → pixel 254
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("map.pgm");
        export_pgm(&map, &path).unwrap();

        let bytes = std::fs::read(&path).unwrap();
        let header = b"P5\n2 1\n255\n";
        assert_eq!(&bytes[..header.len()], header);
        assert_eq!(&bytes[header.len()..], &[0u8, 254u8]);

        let meta = std::fs::read_to_string(sidecar_path(&path)).unwrap();
        assert!(meta.contains("origin_x 0"));
        assert!(meta.contains("resolution 0.05"));
        assert!(meta.contains("width 2"));
        assert!(meta.contains("height 1"));
    }

    #[test]
    fn unknown_cells_render_gray_and_rows_flip() {
        let mut map = OccupancyGrid::new((0.0, 0.0), 0.05);
        map.update_cell(CellIndex::new(0, 0), LOG_ODDS_MAX);
        map.update_cell(CellIndex::new(1, 1), LOG_ODDS_MIN);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("map.pgm");
        export_pgm(&map, &path).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        let header = b"P5\n2 2\n255\n";
        assert_eq!(&bytes[..header.len()], header);
        // row 0 = cy max: [unknown, free], row 1 = cy min: [occupied, unknown]
        assert_eq!(&bytes[header.len()..], &[205u8, 254u8, 0u8, 205u8]);
    }
}
