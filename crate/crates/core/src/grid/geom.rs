/// Half-open integer rectangle `[x0, x1) x [y0, y1)` in level index space.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct IRect {
    pub x0: isize,
    pub y0: isize,
    pub x1: isize,
    pub y1: isize,
}

impl IRect {
    pub const fn new(x0: isize, y0: isize, x1: isize, y1: isize) -> Self {
        Self { x0, y0, x1, y1 }
    }

    pub fn from_origin(origin: (isize, isize), ni: usize, nj: usize) -> Self {
        Self::new(origin.0, origin.1, origin.0 + ni as isize, origin.1 + nj as isize)
    }

    pub fn width(&self) -> usize {
        (self.x1 - self.x0).max(0) as usize
    }

    pub fn height(&self) -> usize {
        (self.y1 - self.y0).max(0) as usize
    }

    pub fn area(&self) -> usize {
        self.width() * self.height()
    }

    pub fn is_empty(&self) -> bool {
        self.x1 <= self.x0 || self.y1 <= self.y0
    }

    pub fn contains(&self, x: isize, y: isize) -> bool {
        x >= self.x0 && x < self.x1 && y >= self.y0 && y < self.y1
    }

    pub fn contains_rect(&self, other: &IRect) -> bool {
        other.is_empty() || (other.x0 >= self.x0 && other.x1 <= self.x1 && other.y0 >= self.y0 && other.y1 <= self.y1)
    }

    pub fn intersect(&self, other: &IRect) -> IRect {
        IRect::new(
            self.x0.max(other.x0),
            self.y0.max(other.y0),
            self.x1.min(other.x1),
            self.y1.min(other.y1),
        )
    }

    pub fn overlaps(&self, other: &IRect) -> bool {
        !self.intersect(other).is_empty()
    }

    pub fn expand(&self, by: isize) -> IRect {
        IRect::new(self.x0 - by, self.y0 - by, self.x1 + by, self.y1 + by)
    }

    pub fn translate(&self, dx: isize, dy: isize) -> IRect {
        IRect::new(self.x0 + dx, self.y0 + dy, self.x1 + dx, self.y1 + dy)
    }

    pub fn scale(&self, factor: isize) -> IRect {
        IRect::new(self.x0 * factor, self.y0 * factor, self.x1 * factor, self.y1 * factor)
    }

    /// Pieces of `self` not covered by `other`, at most four, in a fixed
    /// order (bottom band, top band, left, right).
    pub fn subtract(&self, other: &IRect) -> Vec<IRect> {
        let cut = self.intersect(other);
        if cut.is_empty() {
            return if self.is_empty() { vec![] } else { vec![*self] };
        }
        let pieces = [
            IRect::new(self.x0, self.y0, self.x1, cut.y0),
            IRect::new(self.x0, cut.y1, self.x1, self.y1),
            IRect::new(self.x0, cut.y0, cut.x0, cut.y1),
            IRect::new(cut.x1, cut.y0, self.x1, cut.y1),
        ];
        pieces.into_iter().filter(|r| !r.is_empty()).collect()
    }

    /// Bounding box of both rectangles.
    pub fn union_bounds(&self, other: &IRect) -> IRect {
        if self.is_empty() {
            return *other;
        }
        if other.is_empty() {
            return *self;
        }
        IRect::new(
            self.x0.min(other.x0),
            self.y0.min(other.y0),
            self.x1.max(other.x1),
            self.y1.max(other.y1),
        )
    }

    pub fn cells(&self) -> impl Iterator<Item = (isize, isize)> + '_ {
        (self.y0..self.y1).flat_map(move |y| (self.x0..self.x1).map(move |x| (x, y)))
    }
}

/// Remove every rectangle in `cuts` from every rectangle in `pieces`.
pub fn subtract_all(pieces: Vec<IRect>, cuts: &[IRect]) -> Vec<IRect> {
    cuts.iter().fold(pieces, |acc, cut| {
        acc.into_iter().flat_map(|p| p.subtract(cut)).collect()
    })
}
