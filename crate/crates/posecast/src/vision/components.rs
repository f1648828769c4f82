//! 8-connected component labeling over binary masks.

use super::Mask;

/// Label image: 0 is background, components are numbered from 1.
#[derive(Debug, Clone)]
pub struct ComponentMap {
    width: u32,
    height: u32,
    labels: Vec<u32>,
    stats: Vec<ComponentStats>,
}

/// Pixel-count and extent summary of one component.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComponentStats {
    pub label: u32,
    pub size: usize,
    pub min_x: u32,
    pub min_y: u32,
    pub max_x: u32,
    pub max_y: u32,
    pub sum_x: u64,
    pub sum_y: u64,
}

impl ComponentStats {
    pub fn centroid(&self) -> (f64, f64) {
        (
            self.sum_x as f64 / self.size as f64,
            self.sum_y as f64 / self.size as f64,
        )
    }
}

impl ComponentMap {
    pub fn count(&self) -> usize {
        self.stats.len()
    }

    #[inline]
    pub fn label_at(&self, x: u32, y: u32) -> u32 {
        self.labels[y as usize * self.width as usize + x as usize]
    }

    /// In-bounds and labeled `label`.
    #[inline]
    pub fn is(&self, x: i64, y: i64, label: u32) -> bool {
        x >= 0
            && y >= 0
            && (x as u32) < self.width
            && (y as u32) < self.height
            && self.label_at(x as u32, y as u32) == label
    }

    pub fn stats(&self) -> &[ComponentStats] {
        &self.stats
    }

    pub fn stats_of(&self, label: u32) -> &ComponentStats {
        &self.stats[(label - 1) as usize]
    }

    /// Label of the largest component (ties to the lower label).
    pub fn largest(&self) -> Option<u32> {
        self.stats
            .iter()
            .max_by(|a, b| a.size.cmp(&b.size).then(b.label.cmp(&a.label)))
            .map(|s| s.label)
    }

    /// Component whose topmost pixel is highest in the image.
    pub fn topmost(&self) -> Option<u32> {
        self.stats
            .iter()
            .min_by(|a, b| a.min_y.cmp(&b.min_y).then(a.label.cmp(&b.label)))
            .map(|s| s.label)
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }
}

/// Label the set pixels of `mask` with 8-connectivity (BFS flood fill,
/// row-major seed order, so labels are deterministic).
pub fn connected_components(mask: &Mask) -> ComponentMap {
    let w = mask.width() as usize;
    let h = mask.height() as usize;
    let mut labels = vec![0u32; w * h];
    let mut stats: Vec<ComponentStats> = Vec::new();
    let mut queue: Vec<(u32, u32)> = Vec::new();

    for sy in 0..h {
        for sx in 0..w {
            if !mask.get(sx as u32, sy as u32) || labels[sy * w + sx] != 0 {
                continue;
            }
            let label = stats.len() as u32 + 1;
            let mut st = ComponentStats {
                label,
                size: 0,
                min_x: sx as u32,
                min_y: sy as u32,
                max_x: sx as u32,
                max_y: sy as u32,
                sum_x: 0,
                sum_y: 0,
            };
            queue.clear();
            queue.push((sx as u32, sy as u32));
            labels[sy * w + sx] = label;
            while let Some((x, y)) = queue.pop() {
                st.size += 1;
                st.min_x = st.min_x.min(x);
                st.min_y = st.min_y.min(y);
                st.max_x = st.max_x.max(x);
                st.max_y = st.max_y.max(y);
                st.sum_x += x as u64;
                st.sum_y += y as u64;
                for dy in -1i64..=1 {
                    for dx in -1i64..=1 {
                        if dx == 0 && dy == 0 {
                            continue;
                        }
                        let (nx, ny) = (x as i64 + dx, y as i64 + dy);
                        if nx < 0 || ny < 0 || nx >= w as i64 || ny >= h as i64 {
                            continue;
                        }
                        let idx = ny as usize * w + nx as usize;
                        if labels[idx] == 0 && mask.get(nx as u32, ny as u32) {
                            labels[idx] = label;
                            queue.push((nx as u32, ny as u32));
                        }
                    }
                }
            }
            stats.push(st);
        }
    }

    ComponentMap {
        width: mask.width(),
        height: mask.height(),
        labels,
        stats,
    }
}
