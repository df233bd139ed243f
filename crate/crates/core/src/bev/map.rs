//! Georeferenced semantic vote grid. Storage is tiled so the map can grow in
//! any direction without reallocating cell data.

use serde::{Deserialize, Serialize};

use super::raster::IndexedRaster;
use super::semantic::{SemanticClass, CLASS_COUNT};
use crate::error::{Error, Result};
use crate::geometry::Point2;

const TILE: i64 = 64;
const TILE_CELLS: usize = (TILE * TILE) as usize;

pub const DEFAULT_CELL_SIZE: f64 = 0.1;

/// Cell `(ix, iy)` covers `[origin + ix*cell, origin + (ix+1)*cell)` in x
/// (likewise y).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub origin: Point2,
    pub cell_size: f64,
}

impl GridSpec {
    pub fn new(origin: Point2, cell_size: f64) -> Self {
        GridSpec { origin, cell_size }
    }

    pub fn cell_of(&self, p: Point2) -> (i64, i64) {
        (
            ((p.x - self.origin.x) / self.cell_size).floor() as i64,
            ((p.y - self.origin.y) / self.cell_size).floor() as i64,
        )
    }

    pub fn center(&self, ix: i64, iy: i64) -> Point2 {
        Point2::new(
            self.origin.x + (ix as f64 + 0.5) * self.cell_size,
            self.origin.y + (iy as f64 + 0.5) * self.cell_size,
        )
    }
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec::new(Point2::new(0.0, 0.0), DEFAULT_CELL_SIZE)
    }
}

/// Cells attributed by one projected frame.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct BevPatch {
    pub cells: Vec<((i64, i64), SemanticClass)>,
}

impl BevPatch {
    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }
}

#[derive(Debug, Clone)]
struct Tile {
    votes: Vec<[u32; CLASS_COUNT]>,
    labels: Vec<u8>,
}

impl Tile {
    fn new() -> Self {
        Tile {
            votes: vec![[0; CLASS_COUNT]; TILE_CELLS],
            labels: vec![0; TILE_CELLS],
        }
    }
}

#[derive(Debug, Clone)]
pub struct BevMap {
    grid: GridSpec,
    tile_x0: i64,
    tile_y0: i64,
    tiles_w: i64,
    tiles_h: i64,
    tiles: Vec<Option<Box<Tile>>>,
}

fn split(i: i64) -> (i64, usize) {
    (i.div_euclid(TILE), i.rem_euclid(TILE) as usize)
}

impl BevMap {
    pub fn new(grid: GridSpec) -> Self {
        BevMap {
            grid,
            tile_x0: 0,
            tile_y0: 0,
            tiles_w: 0,
            tiles_h: 0,
            tiles: Vec::new(),
        }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn cell_size(&self) -> f64 {
        self.grid.cell_size
    }

    fn tile_slot(&self, tx: i64, ty: i64) -> Option<usize> {
        let (dx, dy) = (tx - self.tile_x0, ty - self.tile_y0);
        if dx < 0 || dy < 0 || dx >= self.tiles_w || dy >= self.tiles_h {
            None
        } else {
            Some((dy * self.tiles_w + dx) as usize)
        }
    }

    fn grow_to(&mut self, tx: i64, ty: i64) {
        if self.tile_slot(tx, ty).is_some() {
            return;
        }
        let (x0, y0, x1, y1) = if self.tiles_w == 0 {
            (tx, ty, tx + 1, ty + 1)
        } else {
            (
                self.tile_x0.min(tx),
                self.tile_y0.min(ty),
                (self.tile_x0 + self.tiles_w).max(tx + 1),
                (self.tile_y0 + self.tiles_h).max(ty + 1),
            )
        };
        let (w, h) = (x1 - x0, y1 - y0);
        let mut tiles: Vec<Option<Box<Tile>>> = (0..w * h).map(|_| None).collect();
        for ty_old in 0..self.tiles_h {
            for tx_old in 0..self.tiles_w {
                let old = (ty_old * self.tiles_w + tx_old) as usize;
                let gx = self.tile_x0 + tx_old - x0;
                let gy = self.tile_y0 + ty_old - y0;
                tiles[(gy * w + gx) as usize] = self.tiles[old].take();
            }
        }
        self.tile_x0 = x0;
        self.tile_y0 = y0;
        self.tiles_w = w;
        self.tiles_h = h;
        self.tiles = tiles;
    }

    fn tile_mut(&mut self, ix: i64, iy: i64) -> (&mut Tile, usize) {
        let (tx, cx) = split(ix);
        let (ty, cy) = split(iy);
        self.grow_to(tx, ty);
        let slot = self.tile_slot(tx, ty).unwrap();
        let tile = self.tiles[slot].get_or_insert_with(|| Box::new(Tile::new()));
        (tile, cy * TILE as usize + cx)
    }

    fn tile(&self, ix: i64, iy: i64) -> Option<(&Tile, usize)> {
        let (tx, cx) = split(ix);
        let (ty, cy) = split(iy);
        let slot = self.tile_slot(tx, ty)?;
        self.tiles[slot]
            .as_deref()
            .map(|t| (t, cy * TILE as usize + cx))
    }

    /// Adds one vote; the resolved label is maintained incrementally since a
    /// single increment can only promote the voted class.
    pub fn add_vote(&mut self, ix: i64, iy: i64, class: SemanticClass) {
        let (tile, i) = self.tile_mut(ix, iy);
        let c = class as usize;
        tile.votes[i][c] += 1;
        let l = tile.labels[i] as usize;
        let (vc, vl) = (tile.votes[i][c], tile.votes[i][l]);
        if vc > vl || (vc == vl && c > l) {
            tile.labels[i] = c as u8;
        }
    }

    /// Replaces a cell's votes by a single vote (or none for `Unknown`).
    pub fn set_cell(&mut self, ix: i64, iy: i64, class: SemanticClass) {
        if class == SemanticClass::Unknown && self.tile(ix, iy).is_none() {
            return;
        }
        let (tile, i) = self.tile_mut(ix, iy);
        tile.votes[i] = [0; CLASS_COUNT];
        if class != SemanticClass::Unknown {
            tile.votes[i][class as usize] = 1;
        }
        tile.labels[i] = class as u8;
    }

    pub fn accumulate(&mut self, patch: &BevPatch) {
        for &((ix, iy), class) in &patch.cells {
            self.add_vote(ix, iy, class);
        }
    }

    pub fn votes(&self, ix: i64, iy: i64) -> [u32; CLASS_COUNT] {
        self.tile(ix, iy)
            .map_or([0; CLASS_COUNT], |(t, i)| t.votes[i])
    }

    pub fn label_at_cell(&self, ix: i64, iy: i64) -> SemanticClass {
        self.tile(ix, iy)
            .map_or(SemanticClass::Unknown, |(t, i)| SemanticClass::ALL[t.labels[i] as usize])
    }

    pub fn label_at(&self, p: Point2) -> SemanticClass {
        let (ix, iy) = self.grid.cell_of(p);
        self.label_at_cell(ix, iy)
    }

    /// Whether the point falls in an allocated tile.
    pub fn covers(&self, p: Point2) -> bool {
        let (ix, iy) = self.grid.cell_of(p);
        self.tile(ix, iy).is_some()
    }

    pub fn total_votes(&self) -> u64 {
        self.tiles
            .iter()
            .flatten()
            .flat_map(|t| t.votes.iter())
            .map(|v| v.iter().map(|&c| c as u64).sum::<u64>())
            .sum()
    }

    /// Inclusive cell-index bounds of the allocated tiles.
    pub fn extent(&self) -> Option<(i64, i64, i64, i64)> {
        let mut bounds: Option<(i64, i64, i64, i64)> = None;
        for ty in 0..self.tiles_h {
            for tx in 0..self.tiles_w {
                if self.tiles[(ty * self.tiles_w + tx) as usize].is_none() {
                    continue;
                }
                let (x0, y0) = ((self.tile_x0 + tx) * TILE, (self.tile_y0 + ty) * TILE);
                let (x1, y1) = (x0 + TILE - 1, y0 + TILE - 1);
                bounds = Some(match bounds {
                    None => (x0, y0, x1, y1),
                    Some((a, b, c, d)) => (a.min(x0), b.min(y0), c.max(x1), d.max(y1)),
                });
            }
        }
        bounds
    }

    /// All cells of allocated tiles with their resolved label, in row-major
    /// order of tiles then cells.
    pub fn cells(&self) -> impl Iterator<Item = ((i64, i64), SemanticClass)> + '_ {
        (0..self.tiles_h).flat_map(move |ty| {
            (0..self.tiles_w).flat_map(move |tx| {
                let tile = self.tiles[(ty * self.tiles_w + tx) as usize].as_deref();
                let (bx, by) = ((self.tile_x0 + tx) * TILE, (self.tile_y0 + ty) * TILE);
                tile.into_iter().flat_map(move |t| {
                    t.labels.iter().enumerate().map(move |(i, &l)| {
                        let (cx, cy) = ((i % TILE as usize) as i64, (i / TILE as usize) as i64);
                        ((bx + cx, by + cy), SemanticClass::ALL[l as usize])
                    })
                })
            })
        })
    }

    /// Resolved labels as an indexed raster over the allocated extent
    /// (row 0 = largest y). The georeference travels in text chunks.
    pub fn to_raster(&self) -> IndexedRaster {
        let Some((x0, y0, x1, y1)) = self.extent() else {
            return IndexedRaster {
                width: 0,
                height: 0,
                codes: Vec::new(),
                text: self.geo_text(0, 0),
            };
        };
        let (w, h) = ((x1 - x0 + 1) as usize, (y1 - y0 + 1) as usize);
        let mut codes = vec![0u8; w * h];
        for ((ix, iy), class) in self.cells() {
            let col = (ix - x0) as usize;
            let row = (y1 - iy) as usize;
            codes[row * w + col] = class.code();
        }
        IndexedRaster {
            width: w as u32,
            height: h as u32,
            codes,
            text: self.geo_text(x0, y0),
        }
    }

    fn geo_text(&self, x0: i64, y0: i64) -> Vec<(String, String)> {
        let corner = self.grid.center(x0, y0) - Point2::new(0.5, 0.5) * self.grid.cell_size;
        vec![
            ("lanecarto:origin_x".into(), format!("{}", corner.x)),
            ("lanecarto:origin_y".into(), format!("{}", corner.y)),
            ("lanecarto:cell_size".into(), format!("{}", self.grid.cell_size)),
        ]
    }

    /// Builds a map with one vote per non-`Unknown` pixel.
    pub fn from_raster(raster: &IndexedRaster) -> Result<Self> {
        let num = |key: &str| -> Result<f64> {
            raster
                .text_value(key)
                .and_then(|v| v.parse::<f64>().ok())
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::Validation(format!("raster lacks georeference {key}")))
        };
        let cell = num("lanecarto:cell_size")?;
        if cell <= 0.0 {
            return Err(Error::Validation("cell size must be positive".into()));
        }
        let origin = Point2::new(num("lanecarto:origin_x")?, num("lanecarto:origin_y")?);
        let mut map = BevMap::new(GridSpec::new(origin, cell));
        let (w, h) = (raster.width as usize, raster.height as usize);
        for row in 0..h {
            for col in 0..w {
                let code = raster.codes[row * w + col];
                if code != 0 {
                    let class = SemanticClass::from_code(code)?;
                    map.add_vote(col as i64, (h - 1 - row) as i64, class);
                }
            }
        }
        Ok(map)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use SemanticClass::*;

    #[test]
    fn single_patch_sets_labels() {
        let mut map = BevMap::new(GridSpec::default());
        let patch = BevPatch {
            cells: vec![((0, 0), DaCenter), ((-70, 3), LmSolid), ((200, -90), Curb)],
        };
        map.accumulate(&patch);
        for &((ix, iy), c) in &patch.cells {
            assert_eq!(map.label_at_cell(ix, iy), c);
        }
        assert_eq!(map.label_at_cell(1, 1), Unknown);
        assert_eq!(map.total_votes(), 3);
    }

    #[test]
    fn majority_and_tie_break() {
        let mut map = BevMap::new(GridSpec::default());
        for c in [DaCenter, DaLeft, DaCenter, DaLeft, DaCenter] {
            map.add_vote(5, 5, c);
        }
        assert_eq!(map.label_at_cell(5, 5), DaCenter);
        for c in [LmSolid, DaCenter, LmSolid, DaCenter] {
            map.add_vote(6, 6, c);
        }
        assert_eq!(map.label_at_cell(6, 6), LmSolid);
    }

    #[test]
    fn raster_round_trip_preserves_labels_and_georef() {
        let mut map = BevMap::new(GridSpec::new(Point2::new(-3.0, 7.0), 0.1));
        map.add_vote(-5, 2, DaCenter);
        map.add_vote(100, 70, StopLine);
        let back = BevMap::from_raster(&map.to_raster()).unwrap();
        for p in [map.grid().center(-5, 2), map.grid().center(100, 70), Point2::new(0.0, 0.0)] {
            assert_eq!(back.label_at(p), map.label_at(p));
        }
    }

    proptest! {
        #[test]
        fn votes_are_conserved(cells in prop::collection::vec((-200i64..200, -200i64..200, 1u8..11), 0..300)) {
            let mut map = BevMap::new(GridSpec::default());
            let patch = BevPatch {
                cells: cells.iter().map(|&(x, y, c)| ((x, y), SemanticClass::ALL[c as usize])).collect(),
            };
            map.accumulate(&patch);
            map.accumulate(&patch);
            prop_assert_eq!(map.total_votes(), 2 * cells.len() as u64);
        }

        #[test]
        fn label_is_argmax_with_high_code_ties(votes in prop::collection::vec(1u8..11, 1..40)) {
            let mut map = BevMap::new(GridSpec::default());
            for &c in &votes {
                map.add_vote(0, 0, SemanticClass::ALL[c as usize]);
            }
            let counts = map.votes(0, 0);
            let best = (0..CLASS_COUNT).max_by_key(|&c| (counts[c], c)).unwrap();
            prop_assert_eq!(map.label_at_cell(0, 0) as usize, best);
        }
    }
}
