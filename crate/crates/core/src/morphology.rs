//! Binary morphology with Euclidean disk structuring elements, connected
//! component labeling and hole filling.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::edt::squared_distance_to;
use crate::{BinaryMask, Grid};

/// Pixel adjacency used for component labeling.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum Connectivity {
    #[serde(rename = "4")]
    Four,
    #[default]
    #[serde(rename = "8")]
    Eight,
}

impl Connectivity {
    fn offsets(self) -> &'static [(isize, isize)] {
        const FOUR: [(isize, isize); 4] = [(1, 0), (-1, 0), (0, 1), (0, -1)];
        const EIGHT: [(isize, isize); 8] = [
            (1, 0),
            (-1, 0),
            (0, 1),
            (0, -1),
            (1, 1),
            (1, -1),
            (-1, 1),
            (-1, -1),
        ];
        match self {
            Connectivity::Four => &FOUR,
            Connectivity::Eight => &EIGHT,
        }
    }
}

/// Dilation by the disk `{(dx, dy) : dx² + dy² ≤ r²}`.
pub fn dilate_disk(mask: &BinaryMask, radius: u32) -> BinaryMask {
    if radius == 0 {
        return mask.clone();
    }
    let r2 = (radius as f64).powi(2);
    let d = squared_distance_to(mask.grid());
    BinaryMask::from_grid(d.map(|&v| v <= r2))
}

/// Erosion by the same disk. Pixels outside the image count as background.
pub fn erode_disk(mask: &BinaryMask, radius: u32) -> BinaryMask {
    if radius == 0 {
        return mask.clone();
    }
    let (w, h) = mask.shape();
    let padded = Grid::from_fn(w + 2, h + 2, |x, y| {
        x == 0 || y == 0 || x == w + 1 || y == h + 1 || !mask.get(x - 1, y - 1)
    });
    let d = squared_distance_to(&padded);
    let r2 = (radius as f64).powi(2);
    BinaryMask::from_fn(w, h, |x, y| *d.get(x + 1, y + 1) > r2)
}

pub fn open_disk(mask: &BinaryMask, radius: u32) -> BinaryMask {
    dilate_disk(&erode_disk(mask, radius), radius)
}

/// Closing. The image is padded by `radius` during the operation so that
/// foreground near the border is not clipped by the erosion step.
pub fn close_disk(mask: &BinaryMask, radius: u32) -> BinaryMask {
    if radius == 0 {
        return mask.clone();
    }
    let (w, h) = mask.shape();
    let r = radius as usize;
    let padded = BinaryMask::from_fn(w + 2 * r, h + 2 * r, |x, y| {
        x >= r && y >= r && x < w + r && y < h + r && mask.get(x - r, y - r)
    });
    let closed = erode_disk(&dilate_disk(&padded, radius), radius);
    BinaryMask::from_fn(w, h, |x, y| closed.get(x + r, y + r))
}

/// Connected component labeling.
#[derive(Clone, Debug)]
pub struct Components {
    /// 0 for background, `1..=sizes.len()` for components in raster order of
    /// their first pixel.
    pub labels: Grid<u32>,
    /// Pixel count of component `i + 1`.
    pub sizes: Vec<usize>,
}

impl Components {
    pub fn len(&self) -> usize {
        self.sizes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sizes.is_empty()
    }

    /// Label of the largest component; ties go to the lower label.
    pub fn largest(&self) -> Option<u32> {
        let mut best: Option<(usize, u32)> = None;
        for (i, &s) in self.sizes.iter().enumerate() {
            if best.is_none_or(|(bs, _)| s > bs) {
                best = Some((s, i as u32 + 1));
            }
        }
        best.map(|(_, l)| l)
    }

    pub fn mask_of(&self, label: u32) -> BinaryMask {
        BinaryMask::from_grid(self.labels.map(|&l| l == label))
    }
}

pub fn label_components(mask: &BinaryMask, connectivity: Connectivity) -> Components {
    let (w, h) = mask.shape();
    let mut labels = Grid::new(w, h, 0u32);
    let mut sizes = Vec::new();
    let mut queue = VecDeque::new();
    for y in 0..h {
        for x in 0..w {
            if !mask.get(x, y) || *labels.get(x, y) != 0 {
                continue;
            }
            let label = sizes.len() as u32 + 1;
            let mut size = 0;
            labels.set(x, y, label);
            queue.push_back((x, y));
            while let Some((cx, cy)) = queue.pop_front() {
                size += 1;
                for &(dx, dy) in connectivity.offsets() {
                    let nx = cx as isize + dx;
                    let ny = cy as isize + dy;
                    if nx < 0 || ny < 0 || nx as usize >= w || ny as usize >= h {
                        continue;
                    }
                    let (nx, ny) = (nx as usize, ny as usize);
                    if mask.get(nx, ny) && *labels.get(nx, ny) == 0 {
                        labels.set(nx, ny, label);
                        queue.push_back((nx, ny));
                    }
                }
            }
            sizes.push(size);
        }
    }
    Components { labels, sizes }
}

/// Keeps only the largest connected component (empty stays empty).
pub fn largest_component(mask: &BinaryMask, connectivity: Connectivity) -> BinaryMask {
    let comps = label_components(mask, connectivity);
    match comps.largest() {
        Some(l) => comps.mask_of(l),
        None => mask.clone(),
    }
}

/// Fills background regions that are not 4-connected to the image border.
pub fn fill_holes(mask: &BinaryMask) -> BinaryMask {
    let (w, h) = mask.shape();
    let mut outside = Grid::new(w, h, false);
    let mut queue = VecDeque::new();
    for y in 0..h {
        for x in 0..w {
            let border = x == 0 || y == 0 || x + 1 == w || y + 1 == h;
            if border && !mask.get(x, y) {
                outside.set(x, y, true);
                queue.push_back((x, y));
            }
        }
    }
    while let Some((cx, cy)) = queue.pop_front() {
        for &(dx, dy) in Connectivity::Four.offsets() {
            let nx = cx as isize + dx;
            let ny = cy as isize + dy;
            if nx < 0 || ny < 0 || nx as usize >= w || ny as usize >= h {
                continue;
            }
            let (nx, ny) = (nx as usize, ny as usize);
            if !mask.get(nx, ny) && !*outside.get(nx, ny) {
                outside.set(nx, ny, true);
                queue.push_back((nx, ny));
            }
        }
    }
    BinaryMask::from_grid(outside.map(|&o| !o))
}
