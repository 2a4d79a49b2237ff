use crate::io::InstanceMaskRaster;

/// One bit per pixel, row-major.
#[derive(Clone, PartialEq, Eq)]
pub struct DynamicMask {
    pub width: usize,
    pub height: usize,
    words: Vec<u64>,
}

impl std::fmt::Debug for DynamicMask {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "DynamicMask({}x{}, {} set)", self.width, self.height, self.count())
    }
}

impl DynamicMask {
    pub fn new(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            words: vec![0; (width * height).div_ceil(64)],
        }
    }

    pub fn filled(width: usize, height: usize) -> Self {
        let mut m = Self::new(width, height);
        for y in 0..height {
            m.fill_row(y, 0, width);
        }
        m
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        let i = y * self.width + x;
        (self.words[i / 64] >> (i % 64)) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, on: bool) {
        let i = y * self.width + x;
        if on {
            self.words[i / 64] |= 1 << (i % 64);
        } else {
            self.words[i / 64] &= !(1 << (i % 64));
        }
    }

    /// Sets `[x0, x1)` in row `y`.
    fn fill_row(&mut self, y: usize, x0: usize, x1: usize) {
        for x in x0..x1 {
            self.set(x, y, true);
        }
    }

    pub fn count(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    pub fn union(&self, other: &DynamicMask) -> DynamicMask {
        assert_eq!((self.width, self.height), (other.width, other.height));
        DynamicMask {
            width: self.width,
            height: self.height,
            words: self.words.iter().zip(&other.words).map(|(a, b)| a | b).collect(),
        }
    }

    pub fn is_subset_of(&self, other: &DynamicMask) -> bool {
        self.words.iter().zip(&other.words).all(|(a, b)| a & !b == 0)
    }

    /// Maximal runs `[start, end)` of set bits in row `y`.
    fn runs(&self, y: usize) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        let mut start = None;
        for x in 0..self.width {
            match (self.get(x, y), start) {
                (true, None) => start = Some(x),
                (false, Some(s)) => {
                    out.push((s, x));
                    start = None;
                }
                _ => {}
            }
        }
        if let Some(s) = start {
            out.push((s, self.width));
        }
        out
    }
}

/// Half-widths of the discrete disk `dx^2 + dy^2 <= r^2`, indexed by `|dy|`.
pub fn disk_half_widths(radius: u32) -> Vec<usize> {
    let r = radius as i64;
    (0..=r)
        .map(|dy| {
            let mut w = 0i64;
            while (w + 1) * (w + 1) + dy * dy <= r * r {
                w += 1;
            }
            w as usize
        })
        .collect()
}

/// Bit set iff the pixel's instance has a class in `dynamic_classes`.
pub fn build_dynamic_mask(masks: &InstanceMaskRaster, dynamic_classes: &[u16]) -> DynamicMask {
    let mut out = DynamicMask::new(masks.width, masks.height);
    let dynamic_ids: Vec<u16> = masks
        .instances
        .iter()
        .filter(|i| dynamic_classes.contains(&i.class_id))
        .map(|i| i.id)
        .collect();
    if dynamic_ids.is_empty() {
        return out;
    }
    for y in 0..masks.height {
        for x in 0..masks.width {
            let id = masks.get(x, y);
            if id != 0 && dynamic_ids.contains(&id) {
                out.set(x, y, true);
            }
        }
    }
    out
}

/// Morphological dilation with the circular element of radius `radius_px`.
///
/// Each output row is the union, over source rows within the radius, of the
/// source runs widened by the disk half-width for that row offset; unions are
/// accumulated with a difference array so the cost is linear in runs.
pub fn dilate(mask: &DynamicMask, radius_px: u32) -> DynamicMask {
    if radius_px == 0 || mask.is_empty() {
        return mask.clone();
    }
    let (w, h) = (mask.width, mask.height);
    let half = disk_half_widths(radius_px);
    let r = radius_px as usize;
    let runs: Vec<Vec<(usize, usize)>> = (0..h).map(|y| mask.runs(y)).collect();
    let mut out = DynamicMask::new(w, h);
    let mut diff = vec![0i32; w + 1];
    for y in 0..h {
        let lo = y.saturating_sub(r);
        let hi = (y + r).min(h - 1);
        let mut any = false;
        for (sy, row_runs) in runs.iter().enumerate().take(hi + 1).skip(lo) {
            if row_runs.is_empty() {
                continue;
            }
            let hw = half[sy.abs_diff(y)];
            for &(a, b) in row_runs {
                diff[a.saturating_sub(hw)] += 1;
                diff[(b + hw).min(w)] -= 1;
                any = true;
            }
        }
        if !any {
            continue;
        }
        let mut acc = 0;
        for (x, d) in diff.iter_mut().enumerate().take(w) {
            acc += *d;
            *d = 0;
            if acc > 0 {
                out.set(x, y, true);
            }
        }
        diff[w] = 0;
    }
    out
}

/// Morphological erosion with the same circular element; pixels outside the
/// image count as unset.
pub fn erode(mask: &DynamicMask, radius_px: u32) -> DynamicMask {
    if radius_px == 0 {
        return mask.clone();
    }
    let (w, h) = (mask.width, mask.height);
    // erode(A) = complement(dilate(complement(A))) with an unset border.
    let mut comp = DynamicMask::new(w + 2, h + 2);
    for y in 0..h + 2 {
        for x in 0..w + 2 {
            let inside = x >= 1 && y >= 1 && x <= w && y <= h && mask.get(x - 1, y - 1);
            comp.set(x, y, !inside);
        }
    }
    let grown = dilate(&comp, radius_px);
    let mut out = DynamicMask::new(w, h);
    for y in 0..h {
        for x in 0..w {
            if !grown.get(x + 1, y + 1) {
                out.set(x, y, true);
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::io::InstanceInfo;
    use proptest::prelude::*;

    /// Brute-force dilation straight from the definition.
    fn dilate_oracle(m: &DynamicMask, r: u32) -> DynamicMask {
        let r = r as i64;
        let mut out = DynamicMask::new(m.width, m.height);
        for y in 0..m.height as i64 {
            for x in 0..m.width as i64 {
                let mut hit = false;
                for dy in -r..=r {
                    for dx in -r..=r {
                        let (sx, sy) = (x + dx, y + dy);
                        if dx * dx + dy * dy <= r * r
                            && sx >= 0
                            && sy >= 0
                            && sx < m.width as i64
                            && sy < m.height as i64
                            && m.get(sx as usize, sy as usize)
                        {
                            hit = true;
                        }
                    }
                }
                out.set(x as usize, y as usize, hit);
            }
        }
        out
    }

    #[test]
    fn single_pixel_radius_two_sets_thirteen() {
        let mut m = DynamicMask::new(9, 9);
        m.set(4, 4, true);
        let d = dilate(&m, 2);
        assert_eq!(d.count(), 13);
        assert!(d.get(4, 2) && d.get(6, 4) && d.get(5, 5) && !d.get(6, 6));
    }

    #[test]
    fn radius_zero_is_identity() {
        let mut m = DynamicMask::new(5, 4);
        m.set(1, 1, true);
        m.set(4, 3, true);
        assert_eq!(dilate(&m, 0), m);
    }

    #[test]
    fn border_clamps() {
        let mut m = DynamicMask::new(5, 5);
        m.set(0, 0, true);
        let d = dilate(&m, 2);
        // Quarter disk: offsets with dx, dy >= 0 and dx^2 + dy^2 <= 4.
        assert_eq!(d.count(), 6);
    }

    #[test]
    fn dynamic_mask_examples() {
        let mut masks = InstanceMaskRaster::empty(4, 4);
        masks.instances = vec![
            InstanceInfo { id: 1, class_id: 0 },
            InstanceInfo { id: 2, class_id: 3 },
        ];
        masks.ids[0] = 1;
        masks.ids[1] = 1;
        masks.ids[2] = 1;
        masks.ids[10] = 2;
        assert!(build_dynamic_mask(&masks, &[]).is_empty());
        let d = build_dynamic_mask(&masks, &[0]);
        assert_eq!(d.count(), 3);
        assert!(d.get(0, 0) && d.get(1, 0) && d.get(2, 0));
        assert!(build_dynamic_mask(&masks, &[9]).is_empty());
    }

    #[test]
    fn erosion_shrinks_disk() {
        let mut m = DynamicMask::new(21, 21);
        for y in 0..21i64 {
            for x in 0..21i64 {
                if (x - 10).pow(2) + (y - 10).pow(2) <= 25 {
                    m.set(x as usize, y as usize, true);
                }
            }
        }
        let e = erode(&m, 2);
        assert!(e.count() < m.count());
        assert!(e.is_subset_of(&m));
        assert!(e.get(10, 10));
    }

    fn arb_mask() -> impl Strategy<Value = DynamicMask> {
        (2usize..24, 2usize..24, prop::collection::vec(any::<bool>(), 24 * 24), 0.0f64..1.0)
            .prop_map(|(w, h, bits, density)| {
                let mut m = DynamicMask::new(w, h);
                for y in 0..h {
                    for x in 0..w {
                        let b = bits[y * 24 + x];
                        if b && ((x * 7 + y * 13) % 100) as f64 / 100.0 < density {
                            m.set(x, y, true);
                        }
                    }
                }
                m
            })
    }

    proptest! {
        #[test]
        fn dilation_matches_oracle(m in arb_mask(), r in 0u32..6) {
            prop_assert_eq!(dilate(&m, r), dilate_oracle(&m, r));
        }

        #[test]
        fn dilation_laws(a in arb_mask(), r in 0u32..5, seed in any::<u64>()) {
            prop_assert!(a.is_subset_of(&dilate(&a, r)));
            let mut b = DynamicMask::new(a.width, a.height);
            let mut s = seed;
            for y in 0..a.height { for x in 0..a.width {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1);
                if s >> 61 == 0 { b.set(x, y, true); }
            }}
            prop_assert_eq!(dilate(&a.union(&b), r), dilate(&a, r).union(&dilate(&b, r)));
        }
    }
}
