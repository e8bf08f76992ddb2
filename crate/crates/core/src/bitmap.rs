//! Binary pixel masks stored as tight bounding-box crops, with a
//! run-length encoded wire form.
//!
//! Pixel coordinates are `(x, y)` = `(column, row)` in image space. A mask is
//! always kept tight (its bounding box touches a set pixel on every side), so
//! two masks with the same pixel set compare equal and serialize to the same
//! bytes.

use serde::{Deserialize, Deserializer, Serialize, Serializer};

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Mask {
    x0: i32,
    y0: i32,
    w: u32,
    h: u32,
    bits: Vec<bool>,
}

/// Run-length encoded mask: `runs` alternate unset/set counts over the
/// `w x h` box in row-major order, starting with an unset run (possibly 0).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RleMask {
    pub x: i32,
    pub y: i32,
    pub w: u32,
    pub h: u32,
    pub runs: Vec<u32>,
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum RleError {
    #[error("run lengths sum to {got}, expected {expected}")]
    LengthMismatch { got: u64, expected: u64 },
}

impl Mask {
    pub fn empty() -> Self {
        Self::default()
    }

    /// Build from an arbitrary set of pixel coordinates.
    pub fn from_pixels<I: IntoIterator<Item = (i32, i32)>>(pixels: I) -> Self {
        let pts: Vec<(i32, i32)> = pixels.into_iter().collect();
        if pts.is_empty() {
            return Self::empty();
        }
        let (mut minx, mut miny, mut maxx, mut maxy) = (i32::MAX, i32::MAX, i32::MIN, i32::MIN);
        for &(x, y) in &pts {
            minx = minx.min(x);
            miny = miny.min(y);
            maxx = maxx.max(x);
            maxy = maxy.max(y);
        }
        let w = (maxx - minx + 1) as u32;
        let h = (maxy - miny + 1) as u32;
        let mut bits = vec![false; (w * h) as usize];
        for (x, y) in pts {
            bits[((y - miny) as u32 * w + (x - minx) as u32) as usize] = true;
        }
        Self { x0: minx, y0: miny, w, h, bits }
    }

    /// Pixels of `labels` (row-major, `width` wide) equal to `label`.
    pub fn from_labels(labels: &[u32], width: u32, label: u32) -> Self {
        let pts = labels
            .iter()
            .enumerate()
            .filter(|(_, &l)| l == label)
            .map(|(i, _)| ((i as u32 % width) as i32, (i as u32 / width) as i32));
        Self::from_pixels(pts)
    }

    /// Build from a dense box; the result is tightened.
    pub fn from_box(x0: i32, y0: i32, w: u32, h: u32, bits: Vec<bool>) -> Self {
        assert_eq!(bits.len(), (w * h) as usize);
        Self { x0, y0, w, h, bits }.tighten()
    }

    fn tighten(self) -> Self {
        if self.bits.iter().all(|b| !b) {
            return Self::empty();
        }
        if self.is_tight() {
            return self;
        }
        Self::from_pixels(self.pixels())
    }

    fn is_tight(&self) -> bool {
        if self.w == 0 || self.h == 0 {
            return false;
        }
        let row_has = |r: u32| (0..self.w).any(|c| self.bits[(r * self.w + c) as usize]);
        let col_has = |c: u32| (0..self.h).any(|r| self.bits[(r * self.w + c) as usize]);
        row_has(0) && row_has(self.h - 1) && col_has(0) && col_has(self.w - 1)
    }

    pub fn is_empty(&self) -> bool {
        self.w == 0
    }

    pub fn count(&self) -> u64 {
        self.bits.iter().filter(|&&b| b).count() as u64
    }

    /// `(x_min, y_min, x_max, y_max)`, inclusive.
    pub fn bbox(&self) -> Option<(i32, i32, i32, i32)> {
        if self.is_empty() {
            None
        } else {
            Some((self.x0, self.y0, self.x0 + self.w as i32 - 1, self.y0 + self.h as i32 - 1))
        }
    }

    pub fn get(&self, x: i32, y: i32) -> bool {
        if self.is_empty() || x < self.x0 || y < self.y0 {
            return false;
        }
        let (cx, cy) = ((x - self.x0) as u32, (y - self.y0) as u32);
        cx < self.w && cy < self.h && self.bits[(cy * self.w + cx) as usize]
    }

    pub fn pixels(&self) -> impl Iterator<Item = (i32, i32)> + '_ {
        let (x0, y0, w) = (self.x0, self.y0, self.w);
        self.bits
            .iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .map(move |(i, _)| (x0 + (i as u32 % w) as i32, y0 + (i as u32 / w) as i32))
    }

    /// Center of mass in pixel coordinates.
    pub fn centroid(&self) -> Option<(f64, f64)> {
        let mut n = 0i64;
        let (mut sx, mut sy) = (0i64, 0i64);
        for (x, y) in self.pixels() {
            n += 1;
            sx += i64::from(x);
            sy += i64::from(y);
        }
        (n > 0).then(|| (sx as f64 / n as f64, sy as f64 / n as f64))
    }

    pub fn translate(&self, dx: i32, dy: i32) -> Self {
        Self { x0: self.x0 + dx, y0: self.y0 + dy, ..self.clone() }
    }

    /// Drop pixels outside `[0, width) x [0, height)`.
    pub fn clip(&self, width: u32, height: u32) -> Self {
        Self::from_pixels(
            self.pixels()
                .filter(|&(x, y)| x >= 0 && y >= 0 && (x as u32) < width && (y as u32) < height),
        )
    }

    pub fn intersection_count(&self, other: &Mask) -> u64 {
        if self.count() <= other.count() {
            self.pixels().filter(|&(x, y)| other.get(x, y)).count() as u64
        } else {
            other.intersection_count(self)
        }
    }

    pub fn union(&self, other: &Mask) -> Self {
        if self.is_empty() {
            return other.clone();
        }
        if other.is_empty() {
            return self.clone();
        }
        Self::from_pixels(self.pixels().chain(other.pixels()))
    }

    pub fn iou(&self, other: &Mask) -> f64 {
        let inter = self.intersection_count(other);
        let uni = self.count() + other.count() - inter;
        if uni == 0 {
            0.0
        } else {
            inter as f64 / uni as f64
        }
    }

    /// Dilation by a disk of radius `r` pixels.
    pub fn dilate(&self, r: i32) -> Self {
        if self.is_empty() || r <= 0 {
            return self.clone();
        }
        let offsets: Vec<(i32, i32)> = (-r..=r)
            .flat_map(|dy| (-r..=r).map(move |dx| (dx, dy)))
            .filter(|(dx, dy)| dx * dx + dy * dy <= r * r)
            .collect();
        let w = self.w + 2 * r as u32;
        let h = self.h + 2 * r as u32;
        let mut bits = vec![false; (w * h) as usize];
        for (x, y) in self.pixels() {
            let (lx, ly) = (x - self.x0 + r, y - self.y0 + r);
            for &(dx, dy) in &offsets {
                bits[((ly + dy) as u32 * w + (lx + dx) as u32) as usize] = true;
            }
        }
        Self::from_box(self.x0 - r, self.y0 - r, w, h, bits)
    }

    /// Fill enclosed background regions (4-connectivity for background).
    pub fn fill_holes(&self) -> Self {
        if self.is_empty() {
            return self.clone();
        }
        // Pad by one so the outside is a single connected region.
        let w = self.w + 2;
        let h = self.h + 2;
        let idx = |x: u32, y: u32| (y * w + x) as usize;
        let mut solid = vec![false; (w * h) as usize];
        for (x, y) in self.pixels() {
            solid[idx((x - self.x0 + 1) as u32, (y - self.y0 + 1) as u32)] = true;
        }
        let mut outside = vec![false; (w * h) as usize];
        let mut stack = vec![(0u32, 0u32)];
        outside[0] = true;
        while let Some((x, y)) = stack.pop() {
            let mut visit = |nx: u32, ny: u32, stack: &mut Vec<(u32, u32)>| {
                let i = idx(nx, ny);
                if !solid[i] && !outside[i] {
                    outside[i] = true;
                    stack.push((nx, ny));
                }
            };
            if x > 0 {
                visit(x - 1, y, &mut stack);
            }
            if x + 1 < w {
                visit(x + 1, y, &mut stack);
            }
            if y > 0 {
                visit(x, y - 1, &mut stack);
            }
            if y + 1 < h {
                visit(x, y + 1, &mut stack);
            }
        }
        let bits: Vec<bool> = outside.iter().map(|o| !o).collect();
        Self::from_box(self.x0 - 1, self.y0 - 1, w, h, bits)
    }

    pub fn to_rle(&self) -> RleMask {
        let mut runs = Vec::new();
        let mut current = false;
        let mut len = 0u32;
        for &b in &self.bits {
            if b == current {
                len += 1;
            } else {
                runs.push(len);
                current = b;
                len = 1;
            }
        }
        if !self.bits.is_empty() {
            runs.push(len);
        }
        RleMask { x: self.x0, y: self.y0, w: self.w, h: self.h, runs }
    }

    pub fn from_rle(rle: &RleMask) -> Result<Self, RleError> {
        let expected = u64::from(rle.w) * u64::from(rle.h);
        let got: u64 = rle.runs.iter().map(|&r| u64::from(r)).sum();
        if got != expected {
            return Err(RleError::LengthMismatch { got, expected });
        }
        let mut bits = Vec::with_capacity(expected as usize);
        let mut value = false;
        for &r in &rle.runs {
            bits.extend(std::iter::repeat_n(value, r as usize));
            value = !value;
        }
        if expected == 0 {
            return Ok(Self::empty());
        }
        Ok(Self::from_box(rle.x, rle.y, rle.w, rle.h, bits))
    }
}

impl Serialize for Mask {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.to_rle().serialize(s)
    }
}

impl<'de> Deserialize<'de> for Mask {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let rle = RleMask::deserialize(d)?;
        Mask::from_rle(&rle).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn square(x0: i32, y0: i32, side: i32) -> Mask {
        Mask::from_pixels((0..side).flat_map(move |dy| (0..side).map(move |dx| (x0 + dx, y0 + dy))))
    }

    #[test]
    fn centroid_of_square() {
        let m = square(10, 20, 4);
        assert_eq!(m.count(), 16);
        assert_eq!(m.centroid(), Some((11.5, 21.5)));
    }

    #[test]
    fn fill_ring() {
        let ring = Mask::from_pixels(
            square(0, 0, 5).pixels().filter(|&(x, y)| !(x == 2 && y == 2)).collect::<Vec<_>>(),
        );
        assert_eq!(ring.count(), 24);
        assert_eq!(ring.fill_holes(), square(0, 0, 5));
    }

    #[test]
    fn open_crescent_is_not_filled() {
        // A "C" shape: the gap touches the outside so nothing is filled.
        let c = Mask::from_pixels(square(0, 0, 5).pixels().filter(|&(x, y)| !(x >= 2 && y == 2)));
        assert_eq!(c.fill_holes(), c);
    }

    #[test]
    fn dilate_point_is_disk() {
        let p = Mask::from_pixels([(5, 5)]);
        assert_eq!(p.dilate(2).count(), 13);
    }

    #[test]
    fn iou_half_overlap() {
        let a = square(0, 0, 4);
        let b = square(2, 0, 4);
        assert!((a.iou(&b) - 8.0 / 24.0).abs() < 1e-12);
    }

    #[test]
    fn empty_rle() {
        let e = Mask::empty();
        let rle = e.to_rle();
        assert_eq!(Mask::from_rle(&rle).unwrap(), e);
    }

    #[test]
    fn bad_rle_rejected() {
        let rle = RleMask { x: 0, y: 0, w: 2, h: 2, runs: vec![1, 2] };
        assert!(Mask::from_rle(&rle).is_err());
    }

    proptest! {
        #[test]
        fn rle_roundtrip(pts in proptest::collection::vec((-20i32..60, -20i32..60), 0..200)) {
            let m = Mask::from_pixels(pts);
            let json = serde_json::to_string(&m).unwrap();
            let back: Mask = serde_json::from_str(&json).unwrap();
            prop_assert_eq!(back, m);
        }

        #[test]
        fn union_is_superset(
            a in proptest::collection::vec((0i32..30, 0i32..30), 0..60),
            b in proptest::collection::vec((0i32..30, 0i32..30), 0..60),
        ) {
            let (ma, mb) = (Mask::from_pixels(a), Mask::from_pixels(b));
            let u = ma.union(&mb);
            prop_assert_eq!(u.intersection_count(&ma), ma.count());
            prop_assert_eq!(u.intersection_count(&mb), mb.count());
            prop_assert_eq!(u.count(), ma.count() + mb.count() - ma.intersection_count(&mb));
        }
    }
}
