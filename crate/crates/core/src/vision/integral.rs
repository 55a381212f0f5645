use super::GrayImage;

/// Summed-area table with a zero top row and left column.
///
/// `sum(y, x)` holds the total of all pixels strictly above and left of
/// `(x, y)`, so the table is `(width + 1) x (height + 1)` and
/// `sum(height, width)` is the whole-image total. The squared table is only
/// built on request; the detector needs it for window variance.
#[derive(Clone, Debug)]
pub struct IntegralImage {
    width: u32,
    height: u32,
    sums: Vec<u64>,
    squares: Option<Vec<u64>>,
}

impl IntegralImage {
    pub fn new(gray: &GrayImage) -> Self {
        Self::build(gray, false)
    }

    pub fn with_squares(gray: &GrayImage) -> Self {
        Self::build(gray, true)
    }

    fn build(gray: &GrayImage, squares: bool) -> Self {
        let (w, h) = (gray.width() as usize, gray.height() as usize);
        let stride = w + 1;
        let mut sums = vec![0u64; stride * (h + 1)];
        let mut sq = squares.then(|| vec![0u64; stride * (h + 1)]);
        let px = gray.pixels();
        for y in 0..h {
            let mut row = 0u64;
            let mut row_sq = 0u64;
            for x in 0..w {
                let v = px[y * w + x] as u64;
                row += v;
                let idx = (y + 1) * stride + x + 1;
                sums[idx] = sums[idx - stride] + row;
                if let Some(sq) = sq.as_mut() {
                    row_sq += v * v;
                    sq[idx] = sq[idx - stride] + row_sq;
                }
            }
        }
        IntegralImage {
            width: gray.width(),
            height: gray.height(),
            sums,
            squares: sq,
        }
    }

    /// Width of the source image (the table is one wider).
    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn has_squares(&self) -> bool {
        self.squares.is_some()
    }

    /// Table entry at row `y`, column `x`, both in `0..=height` / `0..=width`.
    #[inline]
    pub fn at(&self, y: u32, x: u32) -> u64 {
        self.sums[y as usize * (self.width as usize + 1) + x as usize]
    }

    #[inline]
    fn rect(table: &[u64], stride: usize, x: u32, y: u32, w: u32, h: u32) -> u64 {
        let (x0, y0) = (x as usize, y as usize);
        let (x1, y1) = (x0 + w as usize, y0 + h as usize);
        table[y1 * stride + x1] + table[y0 * stride + x0]
            - table[y0 * stride + x1]
            - table[y1 * stride + x0]
    }

    /// Sum of pixels in `[x, x+w) x [y, y+h)`. The rectangle must be inside.
    #[inline]
    pub fn rect_sum(&self, x: u32, y: u32, w: u32, h: u32) -> u64 {
        debug_assert!(x + w <= self.width && y + h <= self.height);
        Self::rect(&self.sums, self.width as usize + 1, x, y, w, h)
    }

    /// Sum of squared pixels; panics when built without the squared table.
    #[inline]
    pub fn rect_sq_sum(&self, x: u32, y: u32, w: u32, h: u32) -> u64 {
        let sq = self
            .squares
            .as_ref()
            .expect("integral image built without squared sums");
        Self::rect(sq, self.width as usize + 1, x, y, w, h)
    }
}
