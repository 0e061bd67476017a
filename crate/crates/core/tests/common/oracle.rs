//! Brute-force reference implementations, kept independent of the library's
//! distance transform and quantile code.

#![allow(dead_code)]

use priorseg_core::nifti::{LabelMap, NiftiHeader};
use rand::Rng;

pub fn foreground(mask: &LabelMap) -> Vec<[usize; 3]> {
    let [nx, ny, nz] = mask.header.dims;
    let mut out = Vec::new();
    for z in 0..nz {
        for y in 0..ny {
            for x in 0..nx {
                if mask.data[x + nx * (y + ny * z)] != 0 {
                    out.push([x, y, z]);
                }
            }
        }
    }
    out
}

/// Voxel counting: (|X|, |Y|, |X∩Y|).
pub fn counts(a: &LabelMap, b: &LabelMap) -> (usize, usize, usize) {
    let fa = foreground(a);
    let fb = foreground(b);
    let inter = fa.iter().filter(|v| fb.contains(v)).count();
    (fa.len(), fb.len(), inter)
}

pub fn dice(a: &LabelMap, b: &LabelMap) -> f64 {
    let (x, y, i) = counts(a, b);
    if x + y == 0 {
        1.0
    } else {
        2.0 * i as f64 / (x + y) as f64
    }
}

/// Foreground voxels with a face neighbour that is background or off-grid.
pub fn surface(mask: &LabelMap) -> Vec<[usize; 3]> {
    let dims = mask.header.dims.map(|d| d as i64);
    let on = |p: [i64; 3]| {
        (0..3).all(|a| p[a] >= 0 && p[a] < dims[a])
            && mask.data[(p[0] + dims[0] * (p[1] + dims[1] * p[2])) as usize] != 0
    };
    foreground(mask)
        .into_iter()
        .filter(|v| {
            let p = v.map(|c| c as i64);
            [[1, 0, 0], [-1, 0, 0], [0, 1, 0], [0, -1, 0], [0, 0, 1], [0, 0, -1]]
                .iter()
                .any(|d| !on([p[0] + d[0], p[1] + d[1], p[2] + d[2]]))
        })
        .collect()
}

pub fn distance(a: [usize; 3], b: [usize; 3], spacing: [f64; 3]) -> f64 {
    let w = spacing.map(|s| s * s);
    let d = [0, 1, 2].map(|k| a[k] as f64 - b[k] as f64);
    (((w[0] * (d[0] * d[0])) + w[1] * (d[1] * d[1])) + w[2] * (d[2] * d[2])).sqrt()
}

/// Exhaustive nearest distances from each point of `from` to `to`.
pub fn directed(from: &[[usize; 3]], to: &[[usize; 3]], spacing: [f64; 3]) -> Vec<f64> {
    from.iter()
        .map(|&a| to.iter().map(|&b| distance(a, b, spacing)).fold(f64::INFINITY, f64::min))
        .collect()
}

/// Linear-interpolation percentile at zero-based rank (p/100)(n−1).
pub fn percentile(values: &[f64], p: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let rank = p / 100.0 * (v.len() - 1) as f64;
    let below = rank.floor() as usize;
    let above = rank.ceil() as usize;
    v[below] + (rank - below as f64) * (v[above] - v[below])
}

pub fn hausdorff(a: &LabelMap, b: &LabelMap, p: f64) -> Option<f64> {
    let (sa, sb) = (surface(a), surface(b));
    if sa.is_empty() || sb.is_empty() {
        return None;
    }
    let spacing = a.header.spacing();
    let ab = percentile(&directed(&sa, &sb, spacing), p);
    let ba = percentile(&directed(&sb, &sa, spacing), p);
    Some(ab.max(ba))
}

/// All-pairs EDT: distance from every voxel to the nearest foreground voxel.
pub fn edt(mask: &LabelMap) -> Vec<f64> {
    let fg = foreground(mask);
    let [nx, ny, nz] = mask.header.dims;
    let spacing = mask.header.spacing();
    let mut out = Vec::with_capacity(nx * ny * nz);
    for z in 0..nz {
        for y in 0..ny {
            for x in 0..nx {
                out.push(
                    fg.iter()
                        .map(|&f| distance([x, y, z], f, spacing))
                        .fold(f64::INFINITY, f64::min),
                );
            }
        }
    }
    out
}

/// A few random boxes and ellipsoids plus scattered voxels.
pub fn random_blobs(rng: &mut impl Rng, header: &NiftiHeader) -> LabelMap {
    let mut m = LabelMap::empty(header.clone());
    let dims = header.dims;
    for _ in 0..rng.gen_range(0..=3) {
        let c = dims.map(|d| rng.gen_range(0..d) as f64);
        let r = dims.map(|d| rng.gen_range(0.5..(d as f64 / 2.0).max(1.0)));
        let ellipsoid = rng.gen_bool(0.5);
        for z in 0..dims[2] {
            for y in 0..dims[1] {
                for x in 0..dims[0] {
                    let d = [x as f64 - c[0], y as f64 - c[1], z as f64 - c[2]];
                    let inside = if ellipsoid {
                        (0..3).map(|a| (d[a] / r[a]).powi(2)).sum::<f64>() <= 1.0
                    } else {
                        (0..3).all(|a| d[a].abs() <= r[a])
                    };
                    if inside {
                        m.set(x, y, z, 1);
                    }
                }
            }
        }
    }
    let n = m.data.len();
    for _ in 0..rng.gen_range(0..6) {
        let i = rng.gen_range(0..n);
        m.data[i] = 1;
    }
    m
}

pub fn random_header(rng: &mut impl Rng, max_dim: usize) -> NiftiHeader {
    let dims = [0; 3].map(|_| rng.gen_range(2..=max_dim));
    let spacing = [0; 3].map(|_| rng.gen_range(0.3f32..5.0));
    NiftiHeader::new(dims, spacing)
}
