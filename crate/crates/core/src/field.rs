//! Dense 2D storage addressed by signed `(i, j)` indices.
//!
//! Block fields carry halo cells at negative indices, so every array
//! remembers its own lower bound. Storage is row-major with `i` (the
//! x direction) varying fastest.

use std::ops::{Index, IndexMut};

#[derive(Clone, Debug, PartialEq)]
pub struct Grid2<T> {
    lo_i: isize,
    lo_j: isize,
    ni: usize,
    nj: usize,
    data: Vec<T>,
}

impl<T: Clone> Grid2<T> {
    /// Array covering `i in lo.0 .. lo.0 + dims.0`, `j in lo.1 .. lo.1 + dims.1`.
    pub fn new(lo: (isize, isize), dims: (usize, usize), fill: T) -> Self {
        Self {
            lo_i: lo.0,
            lo_j: lo.1,
            ni: dims.0,
            nj: dims.1,
            data: vec![fill; dims.0 * dims.1],
        }
    }

    pub fn fill(&mut self, value: T) {
        self.data.iter_mut().for_each(|v| *v = value.clone());
    }
}

impl<T> Grid2<T> {
    #[inline]
    pub fn lo(&self) -> (isize, isize) {
        (self.lo_i, self.lo_j)
    }

    /// Exclusive upper bound.
    #[inline]
    pub fn hi(&self) -> (isize, isize) {
        (self.lo_i + self.ni as isize, self.lo_j + self.nj as isize)
    }

    #[inline]
    pub fn dims(&self) -> (usize, usize) {
        (self.ni, self.nj)
    }

    #[inline]
    pub fn contains(&self, i: isize, j: isize) -> bool {
        let (hi_i, hi_j) = self.hi();
        i >= self.lo_i && i < hi_i && j >= self.lo_j && j < hi_j
    }

    #[inline]
    pub fn offset(&self, i: isize, j: isize) -> usize {
        debug_assert!(
            self.contains(i, j),
            "({i}, {j}) outside [{:?}, {:?})",
            self.lo(),
            self.hi()
        );
        (j - self.lo_j) as usize * self.ni + (i - self.lo_i) as usize
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    /// Copy the full contents of `other`, which must have the same shape.
    pub fn copy_from(&mut self, other: &Grid2<T>)
    where
        T: Copy,
    {
        assert_eq!(self.lo(), other.lo());
        assert_eq!(self.dims(), other.dims());
        self.data.copy_from_slice(&other.data);
    }
}

impl<T> Index<(isize, isize)> for Grid2<T> {
    type Output = T;

    #[inline]
    fn index(&self, (i, j): (isize, isize)) -> &T {
        &self.data[self.offset(i, j)]
    }
}

impl<T> IndexMut<(isize, isize)> for Grid2<T> {
    #[inline]
    fn index_mut(&mut self, (i, j): (isize, isize)) -> &mut T {
        let k = self.offset(i, j);
        &mut self.data[k]
    }
}
