//! Shared fixtures for the benchmarks.

use priorseg_core::{LabelMap, NiftiHeader};

/// Solid axis-aligned ellipsoid, centre and radii in voxels.
pub fn ellipsoid(header: &NiftiHeader, c: [f64; 3], r: [f64; 3]) -> LabelMap {
    let mut m = LabelMap::empty(header.clone());
    let [nx, ny, nz] = header.dims;
    for z in 0..nz {
        for y in 0..ny {
            for x in 0..nx {
                let d = [(x as f64 - c[0]) / r[0], (y as f64 - c[1]) / r[1], (z as f64 - c[2]) / r[2]];
                if d[0] * d[0] + d[1] * d[1] + d[2] * d[2] <= 1.0 {
                    m.data[x + nx * (y + ny * z)] = 1;
                }
            }
        }
    }
    m
}

/// A ground-truth / prediction pair on an `n`×`n`×`nz` grid, offset by a few
/// voxels with slightly different radii.
pub fn mask_pair(n: usize, nz: usize) -> (LabelMap, LabelMap) {
    let h = NiftiHeader::new([n, n, nz], [0.98, 0.98, 2.5]);
    let (c, cz) = (n as f64 / 2.0, nz as f64 / 2.0);
    let r = n as f64 * 0.38;
    let rz = nz as f64 * 0.42;
    let gt = ellipsoid(&h, [c, c, cz], [r, r * 0.75, rz]);
    let pred = ellipsoid(&h, [c + 2.0, c - 1.0, cz + 1.0], [r * 0.98, r * 0.77, rz * 0.97]);
    (gt, pred)
}
