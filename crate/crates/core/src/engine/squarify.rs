use crate::scene::Rect;

/// Worst aspect ratio of a row of areas laid along a side of length `side`.
fn worst(row: &[f64], side: f64) -> f64 {
    let s: f64 = row.iter().sum();
    let (lo, hi) = row.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &a| {
        (lo.min(a), hi.max(a))
    });
    let s2 = s * s;
    let w2 = side * side;
    (w2 * hi / s2).max(s2 / (w2 * lo))
}

/// Row-packing squarified layout of `weights` (sorted descending) in a
/// `width` x `height` rectangle with origin at its lower-left corner.
/// Rects come back in input order; zero weights get empty rects at the origin.
pub fn squarify(weights: &[f64], width: f64, height: f64) -> Vec<Rect> {
    let zero = Rect::new(0.0, 0.0, 0.0, 0.0);
    let mut out = vec![zero; weights.len()];
    let total: f64 = weights.iter().filter(|w| **w > 0.0).sum();
    if !(total > 0.0 && width > 0.0 && height > 0.0) {
        return out;
    }
    let scale = width * height / total;
    let items: Vec<(usize, f64)> = weights
        .iter()
        .enumerate()
        .filter(|(_, w)| **w > 0.0)
        .map(|(i, w)| (i, w * scale))
        .collect();
    let (mut fx, mut fy, mut fw, mut fh) = (0.0, 0.0, width, height);
    let mut i = 0;
    while i < items.len() {
        let side = fw.min(fh);
        let mut row = vec![items[i].1];
        let mut j = i + 1;
        while j < items.len() {
            let mut next = row.clone();
            next.push(items[j].1);
            if worst(&next, side) > worst(&row, side) {
                break;
            }
            row = next;
            j += 1;
        }
        let s: f64 = row.iter().sum();
        let last = j == items.len();
        if fw >= fh {
            // Column along the left edge, stacked upward.
            let thick = if last { fw } else { s / fh };
            let mut y = fy;
            for (k, &(idx, a)) in items[i..j].iter().enumerate() {
                let h = if k + 1 == row.len() {
                    fy + fh - y
                } else {
                    a / thick
                };
                out[idx] = Rect::new(fx, y, thick, h);
                y += h;
            }
            fx += thick;
            fw -= thick;
        } else {
            // Strip along the bottom edge, left to right.
            let thick = if last { fh } else { s / fw };
            let mut x = fx;
            for (k, &(idx, a)) in items[i..j].iter().enumerate() {
                let w = if k + 1 == row.len() {
                    fx + fw - x
                } else {
                    a / thick
                };
                out[idx] = Rect::new(x, fy, w, thick);
                x += w;
            }
            fy += thick;
            fh -= thick;
        }
        i = j;
    }
    out
}

/// Largest long-side/short-side ratio among rects with positive area.
pub fn worst_aspect(rects: &[Rect]) -> f64 {
    rects
        .iter()
        .filter(|r| r.width > 0.0 && r.height > 0.0)
        .map(|r| (r.width / r.height).max(r.height / r.width))
        .fold(1.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn classic_example_areas() {
        // Weights from the usual 6x4 illustration; areas must be preserved.
        let w = [6.0, 6.0, 4.0, 3.0, 2.0, 2.0, 1.0];
        let r = squarify(&w, 6.0, 4.0);
        for (rect, w) in r.iter().zip(w) {
            assert!((rect.width * rect.height - w).abs() < 1e-9, "{rect:?}");
        }
        let area: f64 = r.iter().map(|r| r.width * r.height).sum();
        assert!((area - 24.0).abs() < 1e-9);
        assert!(worst_aspect(&r) < 3.0);
    }

    #[test]
    fn tiles_are_disjoint_and_inside() {
        let w = [9.0, 7.0, 5.0, 5.0, 3.0, 1.0, 0.5];
        let r = squarify(&w, 3.0, 2.0);
        for (i, a) in r.iter().enumerate() {
            assert!(a.x >= -1e-12 && a.y >= -1e-12);
            assert!(a.x + a.width <= 3.0 + 1e-9 && a.y + a.height <= 2.0 + 1e-9);
            for b in &r[i + 1..] {
                let ox = (a.x + a.width).min(b.x + b.width) - a.x.max(b.x);
                let oy = (a.y + a.height).min(b.y + b.height) - a.y.max(b.y);
                assert!(ox <= 1e-9 || oy <= 1e-9, "{a:?} overlaps {b:?}");
            }
        }
    }

    #[test]
    fn degenerate_inputs() {
        assert_eq!(squarify(&[], 1.0, 1.0), vec![]);
        let r = squarify(&[0.0, 0.0], 1.0, 1.0);
        assert!(r.iter().all(|r| r.width == 0.0 && r.height == 0.0));
        let r = squarify(&[1.0, 0.0], 2.0, 1.0);
        assert_eq!(r[0], Rect::new(0.0, 0.0, 2.0, 1.0));
        assert_eq!(r[1].width * r[1].height, 0.0);
    }
}
