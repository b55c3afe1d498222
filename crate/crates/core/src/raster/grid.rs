use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Dimensions and pixel scale of a uniform, already-projected raster.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub height: usize,
    pub width: usize,
    /// Area covered by one pixel, km².
    pub pixel_area: f64,
}

impl GridSpec {
    pub fn new(height: usize, width: usize, pixel_area: f64) -> Result<Self> {
        let spec = GridSpec {
            height,
            width,
            pixel_area,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.height == 0 || self.width == 0 {
            return Err(Error::InvalidGrid(format!(
                "dimensions must be positive, got {}x{}",
                self.height, self.width
            )));
        }
        if !(self.pixel_area.is_finite() && self.pixel_area > 0.0) {
            return Err(Error::InvalidGrid(format!(
                "pixel_area must be finite and > 0, got {}",
                self.pixel_area
            )));
        }
        Ok(())
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.height * self.width
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    /// Side length of one pixel in metres, assuming square pixels.
    pub fn cell_size_m(&self) -> f64 {
        self.pixel_area.sqrt() * 1000.0
    }

    /// The same footprint sampled at `height`×`width` pixels.
    pub fn resized(&self, height: usize, width: usize) -> Result<Self> {
        let area = self.pixel_area * self.len() as f64 / (height * width).max(1) as f64;
        GridSpec::new(height, width, area)
    }

    /// Spec after a quarter-turn count `k` (height and width swap on odd `k`).
    pub fn rotated(&self, k: u8) -> Self {
        if k % 2 == 1 {
            GridSpec {
                height: self.width,
                width: self.height,
                pixel_area: self.pixel_area,
            }
        } else {
            *self
        }
    }
}

/// Row-major 2-D grid of values with top-left origin.
#[derive(Clone, Debug, PartialEq)]
pub struct Field<T> {
    height: usize,
    width: usize,
    data: Vec<T>,
}

impl<T: Copy> Field<T> {
    pub fn from_vec(height: usize, width: usize, data: Vec<T>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::InvalidGrid(format!(
                "dimensions must be positive, got {height}x{width}"
            )));
        }
        if data.len() != height * width {
            return Err(Error::InvalidGrid(format!(
                "{height}x{width} grid needs {} values, got {}",
                height * width,
                data.len()
            )));
        }
        Ok(Field { height, width, data })
    }

    pub fn filled(height: usize, width: usize, value: T) -> Self {
        assert!(height > 0 && width > 0, "empty field");
        Field {
            height,
            width,
            data: vec![value; height * width],
        }
    }

    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        assert!(height > 0 && width > 0, "empty field");
        let mut data = Vec::with_capacity(height * width);
        for r in 0..height {
            for c in 0..width {
                data.push(f(r, c));
            }
        }
        Field { height, width, data }
    }

    /// Builds a field from nested rows; every row must have the same length.
    pub fn from_rows<R: AsRef<[T]>>(rows: &[R]) -> Result<Self> {
        let height = rows.len();
        let width = rows.first().map(|r| r.as_ref().len()).unwrap_or(0);
        let mut data = Vec::with_capacity(height * width);
        for row in rows {
            let row = row.as_ref();
            if row.len() != width {
                return Err(Error::InvalidGrid("ragged rows".into()));
            }
            data.extend_from_slice(row);
        }
        Field::from_vec(height, width, data)
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> T {
        self.data[row * self.width + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: T) {
        self.data[row * self.width + col] = value;
    }

    #[inline]
    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    pub fn map<U: Copy>(&self, f: impl FnMut(T) -> U) -> Field<U> {
        Field {
            height: self.height,
            width: self.width,
            data: self.data.iter().copied().map(f).collect(),
        }
    }

    /// Rotates by `k` quarter turns counter-clockwise.
    pub fn rotate_ccw(&self, k: u8) -> Field<T> {
        let mut out = self.clone();
        for _ in 0..(k % 4) {
            out = out.rotate_ccw_once();
        }
        out
    }

    fn rotate_ccw_once(&self) -> Field<T> {
        // new(r, c) = old(c, W - 1 - r); output is W x H.
        let (h, w) = (self.height, self.width);
        Field::from_fn(w, h, |r, c| self.get(c, w - 1 - r))
    }
}

/// Binary burnt status on a grid: `true` for burnt.
#[derive(Clone, Debug, PartialEq)]
pub struct BurntMask {
    spec: GridSpec,
    cells: Vec<bool>,
}

impl BurntMask {
    pub fn empty(spec: GridSpec) -> Self {
        BurntMask {
            spec,
            cells: vec![false; spec.len()],
        }
    }

    pub fn from_cells(spec: GridSpec, cells: Vec<bool>) -> Result<Self> {
        spec.validate()?;
        if cells.len() != spec.len() {
            return Err(Error::InvalidGrid(format!(
                "mask needs {} cells, got {}",
                spec.len(),
                cells.len()
            )));
        }
        Ok(BurntMask { spec, cells })
    }

    /// Builds a mask from 0/1 rows, mostly useful in tests.
    pub fn from_rows<R: AsRef<[u8]>>(rows: &[R], pixel_area: f64) -> Result<Self> {
        let f = Field::from_rows(rows)?;
        let spec = GridSpec::new(f.height(), f.width(), pixel_area)?;
        let mut cells = Vec::with_capacity(spec.len());
        for &v in f.as_slice() {
            match v {
                0 => cells.push(false),
                1 => cells.push(true),
                other => return Err(Error::InvalidGrid(format!("mask cell must be 0 or 1, got {other}"))),
            }
        }
        BurntMask::from_cells(spec, cells)
    }

    #[inline]
    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> bool {
        self.cells[row * self.spec.width + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, burnt: bool) {
        self.cells[row * self.spec.width + col] = burnt;
    }

    #[inline]
    pub fn cells(&self) -> &[bool] {
        &self.cells
    }

    pub fn count(&self) -> usize {
        self.cells.iter().filter(|&&c| c).count()
    }

    pub fn is_empty_mask(&self) -> bool {
        !self.cells.iter().any(|&c| c)
    }

    /// Burnt area in km².
    pub fn burnt_area_km2(&self) -> f64 {
        self.count() as f64 * self.spec.pixel_area
    }

    /// `true` when every burnt cell of `self` is also burnt in `other`.
    pub fn is_subset_of(&self, other: &BurntMask) -> bool {
        self.spec.dims() == other.spec.dims() && self.cells.iter().zip(&other.cells).all(|(&a, &b)| !a || b)
    }

    pub fn union(&self, other: &BurntMask) -> Result<BurntMask> {
        check_dims(self.spec.dims(), other.spec.dims())?;
        let cells = self.cells.iter().zip(&other.cells).map(|(&a, &b)| a || b).collect();
        Ok(BurntMask { spec: self.spec, cells })
    }

    pub fn to_field<T: crate::Scalar>(&self) -> Field<T> {
        let data = self
            .cells
            .iter()
            .map(|&c| if c { T::one() } else { T::zero() })
            .collect();
        Field {
            height: self.spec.height,
            width: self.spec.width,
            data,
        }
    }

    pub fn rotate_ccw(&self, k: u8) -> BurntMask {
        let f = Field {
            height: self.spec.height,
            width: self.spec.width,
            data: self.cells.clone(),
        }
        .rotate_ccw(k);
        BurntMask {
            spec: self.spec.rotated(k),
            cells: f.into_vec(),
        }
    }
}

pub(crate) fn check_dims(expected: (usize, usize), actual: (usize, usize)) -> Result<()> {
    if expected != actual {
        return Err(Error::DimensionMismatch { expected, actual });
    }
    Ok(())
}
