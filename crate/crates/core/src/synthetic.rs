//! Piecewise-affine test image.
//!
//! Convex polygons on the unit square, later ones drawn on top of earlier
//! ones, each carrying its own affine intensity `a + bx x + by y` with
//! `x = (j + 0.5) / N`, `y = (i + 0.5) / M`.

use crate::error::{Error, Result};
use crate::field::ScalarField;

pub const MIN_SYNTHETIC_SIZE: usize = 64;

struct Region {
    /// Counter-clockwise in (x, y) with y pointing down, i.e. clockwise on screen.
    vertices: &'static [(f64, f64)],
    a: f64,
    bx: f64,
    by: f64,
}

const BACKGROUND: (f64, f64, f64) = (0.0, 150.0, 100.0);

const REGIONS: &[Region] = &[
    Region {
        vertices: &[(0.08, 0.10), (0.48, 0.06), (0.22, 0.52)],
        a: 250.0,
        bx: -250.0,
        by: -200.0,
    },
    Region {
        vertices: &[(0.56, 0.10), (0.92, 0.16), (0.88, 0.50), (0.52, 0.42)],
        a: -100.0,
        bx: 250.0,
        by: 200.0,
    },
    Region {
        vertices: &[(0.15, 0.62), (0.40, 0.58), (0.50, 0.80), (0.32, 0.94), (0.10, 0.84)],
        a: 0.0,
        bx: -150.0,
        by: 300.0,
    },
    Region {
        vertices: &[(0.60, 0.60), (0.90, 0.66), (0.86, 0.90), (0.56, 0.84)],
        a: 500.0,
        bx: -150.0,
        by: -380.0,
    },
    Region {
        vertices: &[(0.64, 0.22), (0.80, 0.26), (0.70, 0.38)],
        a: 15.0,
        bx: 0.0,
        by: 0.0,
    },
];

fn inside(vertices: &[(f64, f64)], x: f64, y: f64) -> bool {
    let n = vertices.len();
    (0..n).all(|k| {
        let (x0, y0) = vertices[k];
        let (x1, y1) = vertices[(k + 1) % n];
        (x1 - x0) * (y - y0) - (y1 - y0) * (x - x0) >= 0.0
    })
}

/// Index of the region owning pixel `(i, j)`; 0 is the background.
pub fn synthetic_region(i: usize, j: usize, rows: usize, cols: usize) -> usize {
    let x = (j as f64 + 0.5) / cols as f64;
    let y = (i as f64 + 0.5) / rows as f64;
    REGIONS
        .iter()
        .enumerate()
        .rev()
        .find(|(_, r)| inside(r.vertices, x, y))
        .map_or(0, |(k, _)| k + 1)
}

pub fn generate_synthetic(rows: usize, cols: usize) -> Result<ScalarField> {
    if rows < MIN_SYNTHETIC_SIZE || cols < MIN_SYNTHETIC_SIZE {
        return Err(Error::InvalidShape {
            rows,
            cols,
            reason: "synthetic image needs at least 64x64 pixels",
        });
    }
    Ok(ScalarField::from_fn(rows, cols, |i, j| {
        let x = (j as f64 + 0.5) / cols as f64;
        let y = (i as f64 + 0.5) / rows as f64;
        let (a, bx, by) = match synthetic_region(i, j, rows, cols) {
            0 => BACKGROUND,
            k => {
                let r = &REGIONS[k - 1];
                (r.a, r.bx, r.by)
            }
        };
        a + bx * x + by * y
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffops::GridSpacing;
    use crate::regularisers::tv;

    #[test]
    fn range_and_determinism() {
        let u = generate_synthetic(256, 256).unwrap();
        assert!(u.min() >= 0.0 && u.max() <= 255.0, "{} {}", u.min(), u.max());
        assert_eq!(u, generate_synthetic(256, 256).unwrap());
        assert!(tv(&u, GridSpacing::UNIT) > 0.0);
        assert!(generate_synthetic(63, 128).is_err());
    }

    #[test]
    fn every_region_present() {
        let mut seen = [false; 6];
        for i in 0..256 {
            for j in 0..256 {
                seen[synthetic_region(i, j, 256, 256)] = true;
            }
        }
        assert!(seen.iter().all(|&s| s));
    }

    #[test]
    fn affine_inside_regions() {
        let (m, n) = (256, 200);
        let u = generate_synthetic(m, n).unwrap();
        let mut checked = 0;
        for i in 1..m - 1 {
            for j in 1..n - 1 {
                let r = synthetic_region(i, j, m, n);
                let same = (0..3).all(|di| (0..3).all(|dj| synthetic_region(i + di - 1, j + dj - 1, m, n) == r));
                if !same {
                    continue;
                }
                checked += 1;
                let dxx = u.get(i, j + 1) - 2.0 * u.get(i, j) + u.get(i, j - 1);
                let dyy = u.get(i + 1, j) - 2.0 * u.get(i, j) + u.get(i - 1, j);
                let dxy = u.get(i + 1, j + 1) - u.get(i + 1, j) - u.get(i, j + 1) + u.get(i, j);
                assert!(dxx.abs() < 1e-10 && dyy.abs() < 1e-10 && dxy.abs() < 1e-10);
            }
        }
        assert!(checked > m * n / 2);
    }

    #[test]
    fn jumps_between_regions() {
        let u = generate_synthetic(128, 128).unwrap();
        let mut big_jumps = 0;
        for i in 0..127 {
            for j in 0..128 {
                if synthetic_region(i, j, 128, 128) != synthetic_region(i + 1, j, 128, 128)
                    && (u.get(i + 1, j) - u.get(i, j)).abs() > 20.0
                {
                    big_jumps += 1;
                }
            }
        }
        assert!(big_jumps > 50);
    }
}
