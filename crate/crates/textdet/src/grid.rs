//! Row-major 2-D grids used for score maps, geometry maps, and label maps.

/// A dense `height x width` grid stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid<E> {
    width: usize,
    height: usize,
    data: Vec<E>,
}

impl<E: Clone> Grid<E> {
    pub fn filled(width: usize, height: usize, value: E) -> Self {
        Self {
            width,
            height,
            data: vec![value; width * height],
        }
    }
}

impl<E> Grid<E> {
    /// Builds a grid from row-major data; `data.len()` must equal `width * height`.
    pub fn from_vec(width: usize, height: usize, data: Vec<E>) -> crate::Result<Self> {
        if data.len() != width * height {
            return Err(crate::Error::InvalidInput(format!(
                "grid data length {} does not match {width}x{height}",
                data.len()
            )));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> &E {
        &self.data[row * self.width + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: E) {
        self.data[row * self.width + col] = value;
    }

    pub fn as_slice(&self) -> &[E] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<E> {
        self.data
    }

    /// Same grid shape as `self`?
    pub fn same_shape<F>(&self, other: &Grid<F>) -> bool {
        self.width == other.width && self.height == other.height
    }

    /// Iterates `(row, col, &value)` in row-major order.
    pub fn iter_cells(&self) -> impl Iterator<Item = (usize, usize, &E)> {
        self.data
            .iter()
            .enumerate()
            .map(move |(i, v)| (i / self.width, i % self.width, v))
    }
}
