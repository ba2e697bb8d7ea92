use std::cmp::{Ordering, Reverse};
use std::collections::{BinaryHeap, VecDeque};
use std::f64::consts::SQRT_2;

use super::TerrainError;
use crate::raster::RasterGrid;

/// D8 neighbor offsets `(drow, dcol)` in tie-break order: E, SE, S, SW, W, NW, N, NE.
pub(crate) const D8: [(isize, isize); 8] = [(0, 1), (1, 1), (1, 0), (1, -1), (0, -1), (-1, -1), (-1, 0), (-1, 1)];

const D8_DIST: [f64; 8] = [1.0, SQRT_2, 1.0, SQRT_2, 1.0, SQRT_2, 1.0, SQRT_2];

#[derive(Debug, Clone, Copy, PartialEq)]
struct Elev(f64);

impl Eq for Elev {}

impl PartialOrd for Elev {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Elev {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0)
    }
}

#[derive(Debug, Clone)]
pub struct Filled {
    pub filled: RasterGrid,
    /// `filled − dem`; exactly 0 outside closed depressions.
    pub depressions: RasterGrid,
}

/// Priority-flood depression filling (8-connected).
///
/// Seeds are valid cells on the grid edge or next to a NODATA cell; every
/// other cell is raised to the lowest level at which it can spill out.
pub fn fill_depressions(dem: &RasterGrid) -> Filled {
    let geo = *dem.geometry();
    let (nrows, ncols) = (geo.nrows, geo.ncols);
    let mut filled: Vec<Option<f64>> = (0..geo.len()).map(|i| dem.get_index(i)).collect();
    let mut closed = vec![false; geo.len()];
    let mut heap: BinaryHeap<Reverse<(Elev, usize)>> = BinaryHeap::new();

    for r in 0..nrows {
        for c in 0..ncols {
            let i = geo.index(r, c);
            let Some(z) = filled[i] else { continue };
            let edge = r == 0 || c == 0 || r + 1 == nrows || c + 1 == ncols;
            let by_nodata = D8.iter().any(|&(dr, dc)| {
                let (rr, cc) = (r as isize + dr, c as isize + dc);
                geo.contains(rr, cc) && filled[geo.index(rr as usize, cc as usize)].is_none()
            });
            if edge || by_nodata {
                closed[i] = true;
                heap.push(Reverse((Elev(z), i)));
            }
        }
    }

    while let Some(Reverse((Elev(level), i))) = heap.pop() {
        let (r, c) = (i / ncols, i % ncols);
        for &(dr, dc) in &D8 {
            let (rr, cc) = (r as isize + dr, c as isize + dc);
            if !geo.contains(rr, cc) {
                continue;
            }
            let j = geo.index(rr as usize, cc as usize);
            if closed[j] {
                continue;
            }
            let Some(z) = filled[j] else { continue };
            closed[j] = true;
            let raised = z.max(level);
            filled[j] = Some(raised);
            heap.push(Reverse((Elev(raised), j)));
        }
    }

    let filled = RasterGrid::from_fn(geo, |r, c| filled[geo.index(r, c)]);
    let depressions = RasterGrid::from_fn(geo, |r, c| Some(filled.get(r, c)? - dem.get(r, c)?));
    Filled { filled, depressions }
}

/// Steepest-descent D8 receiver of every valid cell, `None` for cells with no
/// strictly lower valid neighbor (outlets and flats).
pub fn d8_receivers(dem: &RasterGrid) -> Vec<Option<usize>> {
    let geo = *dem.geometry();
    let mut recv = vec![None; geo.len()];
    for r in 0..geo.nrows {
        for c in 0..geo.ncols {
            let Some(z) = dem.get(r, c) else { continue };
            let mut best = 0.0;
            for (k, &(dr, dc)) in D8.iter().enumerate() {
                let (rr, cc) = (r as isize + dr, c as isize + dc);
                if !geo.contains(rr, cc) {
                    continue;
                }
                let Some(zn) = dem.get(rr as usize, cc as usize) else { continue };
                let drop = (z - zn) / D8_DIST[k];
                if drop > best {
                    best = drop;
                    recv[geo.index(r, c)] = Some(geo.index(rr as usize, cc as usize));
                }
            }
        }
    }
    recv
}

/// D8 flow accumulation in upstream cell counts (each cell counts itself).
///
/// Expects a depression-filled DEM. Cells are resolved in topological order
/// of the receiver graph; cells left unresolved indicate a drainage cycle.
pub fn flow_accumulation(dem: &RasterGrid) -> Result<RasterGrid, TerrainError> {
    let geo = *dem.geometry();
    let recv = d8_receivers(dem);
    let valid: Vec<bool> = (0..geo.len()).map(|i| dem.get_index(i).is_some()).collect();
    let mut indegree = vec![0u32; geo.len()];
    for &j in recv.iter().flatten() {
        indegree[j] += 1;
    }
    let mut acc: Vec<f64> = valid.iter().map(|&v| if v { 1.0 } else { 0.0 }).collect();
    let mut queue: VecDeque<usize> = (0..geo.len()).filter(|&i| valid[i] && indegree[i] == 0).collect();
    let mut resolved = 0usize;
    while let Some(i) = queue.pop_front() {
        resolved += 1;
        if let Some(j) = recv[i] {
            acc[j] += acc[i];
            indegree[j] -= 1;
            if indegree[j] == 0 {
                queue.push_back(j);
            }
        }
    }
    let total = valid.iter().filter(|&&v| v).count();
    if resolved != total {
        return Err(TerrainError::CycleDetected { unresolved: total - resolved });
    }
    Ok(RasterGrid::from_fn(geo, |r, c| valid[geo.index(r, c)].then(|| acc[geo.index(r, c)])))
}
