//! Occupancy grids with an exact Euclidean distance transform, synthetic
//! doorway and corridor maps, and the ASCII map format.
//!
//! Cell `(ix, iy)` covers `[x₀ + ix·r, x₀ + (ix+1)·r) × [y₀ + iy·r, y₀ + (iy+1)·r)`
//! where `(x₀, y₀)` is the map origin and `r` the resolution, so `iy = 0` is
//! the bottom row. Files list rows top first.

use std::fmt;
use std::fs;
use std::path::Path;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metrics::ClearanceField;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}, column {column}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub message: String,
}

#[derive(Debug, Error)]
pub enum MapError {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("map i/o: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Clone, PartialEq)]
pub struct GridMap {
    width: usize,
    height: usize,
    resolution: f64,
    origin: [f64; 2],
    occupied: Vec<bool>,
    /// Nearest occupied cell of every cell, by cell-centre distance.
    feature: Vec<Option<usize>>,
    /// Cell-centre distance to `feature`, metres.
    cell_clearance: Vec<f64>,
}

impl fmt::Debug for GridMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GridMap")
            .field("width", &self.width)
            .field("height", &self.height)
            .field("resolution", &self.resolution)
            .field("origin", &self.origin)
            .finish_non_exhaustive()
    }
}

impl GridMap {
    /// `occupied` is indexed `iy·width + ix`. Panics on a size mismatch or a
    /// nonpositive resolution.
    pub fn new(width: usize, height: usize, resolution: f64, origin: [f64; 2], occupied: Vec<bool>) -> Self {
        assert!(resolution > 0.0 && resolution.is_finite(), "resolution must be positive");
        assert_eq!(occupied.len(), width * height, "occupancy size");
        let feature = feature_transform(width, height, &occupied);
        let cell_clearance = (0..width * height)
            .map(|i| match feature[i] {
                Some(f) => {
                    let dx = (i % width) as f64 - (f % width) as f64;
                    let dy = (i / width) as f64 - (f / width) as f64;
                    (dx * dx + dy * dy).sqrt() * resolution
                }
                None => f64::INFINITY,
            })
            .collect();
        Self { width, height, resolution, origin, occupied, feature, cell_clearance }
    }

    /// Builds from rows listed top first.
    pub fn from_rows(rows: &[Vec<bool>], resolution: f64, origin: [f64; 2]) -> Self {
        let height = rows.len();
        let width = rows.first().map_or(0, Vec::len);
        let mut occ = vec![false; width * height];
        for (r, row) in rows.iter().enumerate() {
            assert_eq!(row.len(), width, "ragged rows");
            let iy = height - 1 - r;
            occ[iy * width..(iy + 1) * width].copy_from_slice(row);
        }
        Self::new(width, height, resolution, origin, occ)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    pub fn origin(&self) -> [f64; 2] {
        self.origin
    }

    /// World extent `([x_min, x_max], [y_min, y_max])`.
    pub fn extent(&self) -> ([f64; 2], [f64; 2]) {
        let r = self.resolution;
        (
            [self.origin[0], self.origin[0] + self.width as f64 * r],
            [self.origin[1], self.origin[1] + self.height as f64 * r],
        )
    }

    pub fn is_occupied(&self, ix: usize, iy: usize) -> bool {
        self.occupied[iy * self.width + ix]
    }

    pub fn free_cells(&self) -> usize {
        self.occupied.iter().filter(|o| !**o).count()
    }

    /// Cell-centre distance to the nearest occupied cell centre, metres;
    /// zero on occupied cells and infinite on maps without obstacles.
    pub fn cell_clearance(&self, ix: usize, iy: usize) -> f64 {
        self.cell_clearance[iy * self.width + ix]
    }

    pub fn cell_center(&self, ix: usize, iy: usize) -> [f64; 2] {
        [self.origin[0] + (ix as f64 + 0.5) * self.resolution, self.origin[1] + (iy as f64 + 0.5) * self.resolution]
    }

    pub fn world_to_cell(&self, x: f64, y: f64) -> Option<(usize, usize)> {
        let fx = (x - self.origin[0]) / self.resolution;
        let fy = (y - self.origin[1]) / self.resolution;
        if !(fx >= 0.0 && fy >= 0.0) {
            return None;
        }
        let (ix, iy) = (fx.floor() as usize, fy.floor() as usize);
        (ix < self.width && iy < self.height).then_some((ix, iy))
    }

    /// Distance from `(x, y)` to the occupied region: zero inside an
    /// occupied cell or outside the map.
    ///
    /// Uses the nearest occupied cells of the containing cell and its eight
    /// neighbours, measured to the cell squares rather than their centres.
    pub fn clearance(&self, x: f64, y: f64) -> f64 {
        let Some((ix, iy)) = self.world_to_cell(x, y) else {
            return 0.0;
        };
        if self.is_occupied(ix, iy) {
            return 0.0;
        }
        let half = 0.5 * self.resolution;
        let mut best = f64::INFINITY;
        for ny in iy.saturating_sub(1)..=(iy + 1).min(self.height - 1) {
            for nx in ix.saturating_sub(1)..=(ix + 1).min(self.width - 1) {
                if let Some(f) = self.feature[ny * self.width + nx] {
                    let c = self.cell_center(f % self.width, f / self.width);
                    let dx = ((x - c[0]).abs() - half).max(0.0);
                    let dy = ((y - c[1]).abs() - half).max(0.0);
                    best = best.min((dx * dx + dy * dy).sqrt());
                }
            }
        }
        best
    }

    /// Disk footprint test: outside the map, centre in an occupied cell, or
    /// clearance below the radius.
    pub fn disk_in_collision(&self, x: f64, y: f64, radius: f64) -> bool {
        match self.world_to_cell(x, y) {
            None => true,
            Some((ix, iy)) => self.is_occupied(ix, iy) || self.clearance(x, y) < radius,
        }
    }

    pub fn parse(text: &str) -> Result<Self, ParseError> {
        let mut lines = text.lines().enumerate();
        let err =
            |line: usize, column: usize, message: &str| ParseError { line: line + 1, column, message: message.into() };
        let (hl, header) = lines.next().ok_or_else(|| err(0, 1, "empty map file"))?;
        let tokens: Vec<(usize, &str)> =
            header.split_whitespace().map(|t| (t.as_ptr() as usize - header.as_ptr() as usize + 1, t)).collect();
        if tokens.len() != 5 || tokens[0].1 != "resolution" || tokens[2].1 != "origin" {
            return Err(err(hl, 1, "expected `resolution <f> origin <f> <f>`"));
        }
        let num = |i: usize| -> Result<f64, ParseError> {
            let (col, t) = tokens[i];
            t.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| err(hl, col, &format!("invalid number `{t}`")))
        };
        let resolution = num(1)?;
        if !(resolution > 0.0) {
            return Err(err(hl, tokens[1].0, "resolution must be positive"));
        }
        let origin = [num(3)?, num(4)?];
        let mut rows: Vec<Vec<bool>> = Vec::new();
        for (ln, line) in lines {
            let line = line.strip_suffix('\r').unwrap_or(line);
            if line.is_empty() && rows.is_empty() {
                continue;
            }
            let mut row = Vec::with_capacity(line.len());
            for (col, ch) in line.chars().enumerate() {
                match ch {
                    '#' => row.push(true),
                    '.' => row.push(false),
                    _ => return Err(err(ln, col + 1, &format!("unexpected character `{ch}`"))),
                }
            }
            if let Some(first) = rows.first() {
                if row.len() != first.len() {
                    return Err(err(ln, row.len().min(first.len()) + 1, "row length differs from the first row"));
                }
            } else if row.is_empty() {
                return Err(err(ln, 1, "empty row"));
            }
            rows.push(row);
        }
        if rows.is_empty() {
            return Err(err(hl + 1, 1, "map has no rows"));
        }
        Ok(Self::from_rows(&rows, resolution, origin))
    }

    pub fn to_ascii(&self) -> String {
        let mut s = format!("resolution {} origin {} {}\n", self.resolution, self.origin[0], self.origin[1]);
        for iy in (0..self.height).rev() {
            for ix in 0..self.width {
                s.push(if self.is_occupied(ix, iy) { '#' } else { '.' });
            }
            s.push('\n');
        }
        s
    }
}

impl ClearanceField for GridMap {
    fn clearance(&self, q: &DVector<f64>) -> f64 {
        GridMap::clearance(self, q[0], q[1])
    }
}

pub fn load_map(path: impl AsRef<Path>) -> Result<GridMap, MapError> {
    Ok(GridMap::parse(&fs::read_to_string(path)?)?)
}

pub fn save_map(map: &GridMap, path: impl AsRef<Path>) -> Result<(), MapError> {
    Ok(fs::write(path, map.to_ascii())?)
}

/// Nearest occupied cell of every cell: exact squared-distance transform
/// by lower envelopes of parabolas, columns then rows.
fn feature_transform(width: usize, height: usize, occ: &[bool]) -> Vec<Option<usize>> {
    // per column: nearest occupied row
    let mut col_near: Vec<Option<usize>> = vec![None; width * height];
    for x in 0..width {
        let mut last = None;
        for y in 0..height {
            if occ[y * width + x] {
                last = Some(y);
            }
            col_near[y * width + x] = last;
        }
        let mut next = None;
        for y in (0..height).rev() {
            if occ[y * width + x] {
                next = Some(y);
            }
            let i = y * width + x;
            col_near[i] = match (col_near[i], next) {
                (Some(a), Some(b)) => Some(if y - a <= b - y { a } else { b }),
                (a, b) => a.or(b),
            };
        }
    }
    let mut out = vec![None; width * height];
    let mut v = vec![0usize; width];
    let mut z = vec![0f64; width + 1];
    for y in 0..height {
        let f = |x: usize| -> Option<f64> {
            col_near[y * width + x].map(|r| {
                let d = r as f64 - y as f64;
                d * d
            })
        };
        let mut k: isize = -1;
        for q in 0..width {
            let Some(fq) = f(q) else { continue };
            loop {
                if k < 0 {
                    k = 0;
                    v[0] = q;
                    z[0] = f64::NEG_INFINITY;
                    z[1] = f64::INFINITY;
                    break;
                }
                let p = v[k as usize];
                let fp = f(p).expect("envelope holds finite parabolas");
                let s = ((fq + (q * q) as f64) - (fp + (p * p) as f64)) / (2.0 * (q as f64 - p as f64));
                if s <= z[k as usize] {
                    k -= 1;
                } else {
                    k += 1;
                    v[k as usize] = q;
                    z[k as usize] = s;
                    z[k as usize + 1] = f64::INFINITY;
                    break;
                }
            }
        }
        if k < 0 {
            continue;
        }
        let mut j = 0usize;
        for x in 0..width {
            while z[j + 1] < x as f64 {
                j += 1;
            }
            let src = v[j];
            let r = col_near[y * width + src].expect("finite parabola");
            out[y * width + x] = Some(r * width + src);
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DoorwayParams {
    /// Interior size of each of the two rooms, metres.
    pub room_width: f64,
    pub room_height: f64,
    pub wall_thickness: f64,
    pub opening_width: f64,
    /// Height of the opening centre above the interior floor, metres.
    pub opening_center: f64,
    pub resolution: f64,
}

impl Default for DoorwayParams {
    fn default() -> Self {
        Self {
            room_width: 6.0,
            room_height: 8.0,
            wall_thickness: 0.2,
            opening_width: 1.0,
            opening_center: 4.0,
            resolution: 0.05,
        }
    }
}

fn cells(len: f64, res: f64) -> usize {
    (len / res).round().max(1.0) as usize
}

/// Two rooms side by side, joined by a single opening in the shared wall,
/// enclosed by boundary walls. The origin is the outer lower-left corner.
pub fn make_doorway_map(p: &DoorwayParams) -> GridMap {
    let r = p.resolution;
    let t = cells(p.wall_thickness, r);
    let rw = cells(p.room_width, r);
    let rh = cells(p.room_height, r);
    let width = 2 * rw + 3 * t;
    let height = rh + 2 * t;
    let open = cells(p.opening_width, r);
    let open_lo = t + (cells(p.opening_center, r)).saturating_sub(open / 2);
    let mut occ = vec![false; width * height];
    for iy in 0..height {
        for ix in 0..width {
            let boundary = ix < t || ix >= width - t || iy < t || iy >= height - t;
            let middle = ix >= t + rw && ix < 2 * t + rw && !(iy >= open_lo && iy < open_lo + open);
            occ[iy * width + ix] = boundary || middle;
        }
    }
    GridMap::new(width, height, r, [0.0, 0.0], occ)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CorridorParams {
    pub corridor_width: f64,
    /// Lengths of the three legs along their centre lines, metres.
    pub first_leg: f64,
    pub second_leg: f64,
    pub third_leg: f64,
    pub wall_thickness: f64,
    pub resolution: f64,
}

impl Default for CorridorParams {
    fn default() -> Self {
        Self {
            corridor_width: 1.2,
            first_leg: 6.0,
            second_leg: 5.0,
            third_leg: 6.0,
            wall_thickness: 0.2,
            resolution: 0.05,
        }
    }
}

/// A Z-shaped passage: east along the bottom, north, then east again, with
/// everything outside the passage occupied.
pub fn make_corridor_map(p: &CorridorParams) -> GridMap {
    let r = p.resolution;
    let t = cells(p.wall_thickness, r);
    let w = cells(p.corridor_width, r);
    let l1 = cells(p.first_leg, r);
    let l2 = cells(p.second_leg, r);
    let l3 = cells(p.third_leg, r);
    let width = 2 * t + l1 + l3 + w;
    let height = 2 * t + l2 + w;
    let x_turn = t + l1; // left edge of the vertical leg
    let mut occ = vec![true; width * height];
    let mut carve = |x0: usize, x1: usize, y0: usize, y1: usize| {
        for iy in y0..y1 {
            for ix in x0..x1 {
                occ[iy * width + ix] = false;
            }
        }
    };
    carve(t, x_turn + w, t, t + w);
    carve(x_turn, x_turn + w, t, t + l2 + w);
    carve(x_turn, width - t, t + l2, t + l2 + w);
    GridMap::new(width, height, r, [0.0, 0.0], occ)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute(map: &GridMap, ix: usize, iy: usize) -> f64 {
        let mut best = f64::INFINITY;
        for y in 0..map.height() {
            for x in 0..map.width() {
                if map.is_occupied(x, y) {
                    let dx = x as f64 - ix as f64;
                    let dy = y as f64 - iy as f64;
                    best = best.min((dx * dx + dy * dy).sqrt());
                }
            }
        }
        best * map.resolution()
    }

    fn framed(n: usize, res: f64) -> GridMap {
        let mut rows = vec![vec![false; n]; n];
        for i in 0..n {
            rows[0][i] = true;
            rows[n - 1][i] = true;
            rows[i][0] = true;
            rows[i][n - 1] = true;
        }
        GridMap::from_rows(&rows, res, [0.0, 0.0])
    }

    #[test]
    fn all_free_map() {
        let m = GridMap::parse("resolution 1 origin 0 0\n...\n...\n...\n").unwrap();
        assert_eq!(m.free_cells(), 9);
        assert_eq!(m.cell_clearance(1, 1), f64::INFINITY);
    }

    #[test]
    fn border_is_occupied() {
        let m = framed(5, 1.0);
        for i in 0..5 {
            assert!(m.is_occupied(i, 0) && m.is_occupied(i, 4) && m.is_occupied(0, i) && m.is_occupied(4, i));
        }
        assert!(!m.is_occupied(2, 2));
    }

    #[test]
    fn centre_clearance_of_framed_map() {
        let m = framed(21, 1.0);
        assert_eq!(m.cell_clearance(10, 10), 10.0);
        let c = m.clearance(10.5, 10.5);
        assert!((c - 10.0).abs() <= 2f64.sqrt(), "{c}");
        assert_eq!(m.clearance(0.5, 0.5), 0.0);
    }

    #[test]
    fn transform_matches_brute_force_on_random_maps() {
        let mut state = 12345u64;
        let mut next = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (state >> 33) as f64 / (1u64 << 31) as f64
        };
        for (w, h, density) in [(17, 23, 0.05), (64, 64, 0.02), (31, 9, 0.3), (40, 40, 0.002)] {
            let occ: Vec<bool> = (0..w * h).map(|_| next() < density).collect();
            let m = GridMap::new(w, h, 0.1, [0.0, 0.0], occ);
            for iy in 0..h {
                for ix in 0..w {
                    let b = brute(&m, ix, iy);
                    let c = m.cell_clearance(ix, iy);
                    if b.is_infinite() {
                        assert!(c.is_infinite());
                    } else {
                        assert!((c - b).abs() <= 1e-12, "({ix},{iy}) {c} vs {b}");
                    }
                    let p = m.cell_center(ix, iy);
                    let pc = m.clearance(p[0], p[1]);
                    if b.is_finite() {
                        assert!((pc - b).abs() <= 0.1 * 2f64.sqrt() + 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn doorway_geometry() {
        let m = make_doorway_map(&DoorwayParams::default());
        let (ex, ey) = m.extent();
        assert!((ex[1] - 12.6).abs() < 1e-9 && (ey[1] - 8.4).abs() < 1e-9);
        let mid_x = 6.3;
        let ix = m.world_to_cell(mid_x, 1.0).unwrap().0;
        let free: usize = (0..m.height()).filter(|&iy| !m.is_occupied(ix, iy)).count();
        assert_eq!(free, 20);
        let yc = 0.2 + 4.0;
        assert_eq!(m.disk_in_collision(mid_x, yc, 0.45), false);
        assert!(m.disk_in_collision(mid_x, yc + 0.06, 0.45));
        assert!(m.disk_in_collision(mid_x, yc - 0.06, 0.45));
        assert!(m.disk_in_collision(mid_x, 1.0, 0.0));
        assert!(!m.disk_in_collision(3.0, 4.0, 0.3));
    }

    #[test]
    fn corridor_centreline_clearance() {
        let m = make_corridor_map(&CorridorParams::default());
        // middle of the first leg
        let c = m.clearance(3.0, 0.2 + 0.6);
        assert!((c - 0.6).abs() < 1e-9, "{c}");
        let (ex, ey) = m.extent();
        let mut max = 0.0f64;
        for iy in 0..m.height() {
            for ix in 0..m.width() {
                let p = m.cell_center(ix, iy);
                max = max.max(m.clearance(p[0], p[1]));
            }
        }
        assert!(max <= 0.6 * 2f64.sqrt() + 1e-9);
        assert!(ex[1] > 12.0 && ey[1] > 6.0);
    }

    #[test]
    fn ascii_round_trip() {
        let m = make_doorway_map(&DoorwayParams { resolution: 0.2, ..DoorwayParams::default() });
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("door.map");
        save_map(&m, &path).unwrap();
        let back = load_map(&path).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn parse_errors_carry_position() {
        let e = GridMap::parse("resolution 1 origin 0 0\n..#\n.x.\n").unwrap_err();
        assert_eq!((e.line, e.column), (3, 2));
        let e = GridMap::parse("resolution 1 origin 0 0\n...\n..\n").unwrap_err();
        assert_eq!(e.line, 3);
        let e = GridMap::parse("resolution -1 origin 0 0\n.\n").unwrap_err();
        assert_eq!((e.line, e.column), (1, 12));
        let e = GridMap::parse("resolution 1 origin zero 0\n.\n").unwrap_err();
        assert_eq!((e.line, e.column), (1, 21));
        assert!(GridMap::parse("").is_err());
        assert!(GridMap::parse("resolution 1 origin 0 0\n").is_err());
    }
}
