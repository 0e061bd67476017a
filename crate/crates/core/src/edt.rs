//! Exact Euclidean distance transform on anisotropic grids.
//!
//! Separable lower-envelope construction: one pass of 1D squared-distance
//! transforms per axis, each O(n) in the line length, with the squared voxel
//! spacing as the parabola weight. Distances are between voxel centres in mm.
//!
//! Squared distances are accumulated as `((wx·dx²) + wy·dy²) + wz·dz²` so the
//! result matches a brute-force search that sums in the same order.

use rayon::prelude::*;

use crate::nifti::{Grid, LabelMap, NiftiHeader, Volume3D};

/// Half-open box `[lo, hi)` of voxel coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BoundingBox {
    pub lo: [usize; 3],
    pub hi: [usize; 3],
}

impl BoundingBox {
    pub fn full(dims: [usize; 3]) -> Self {
        BoundingBox { lo: [0; 3], hi: dims }
    }

    pub fn shape(&self) -> [usize; 3] {
        [0, 1, 2].map(|a| self.hi[a] - self.lo[a])
    }

    pub fn len(&self) -> usize {
        self.shape().iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn union(&self, other: &BoundingBox) -> BoundingBox {
        BoundingBox {
            lo: [0, 1, 2].map(|a| self.lo[a].min(other.lo[a])),
            hi: [0, 1, 2].map(|a| self.hi[a].max(other.hi[a])),
        }
    }

    /// Local index of a global coordinate inside the box.
    #[inline]
    pub fn local_index(&self, [x, y, z]: [usize; 3]) -> usize {
        let [sx, sy, _] = self.shape();
        (x - self.lo[0]) + sx * ((y - self.lo[1]) + sy * (z - self.lo[2]))
    }

    /// Tight box around the non-zero voxels, `None` when there are none.
    pub fn of_mask(mask: &LabelMap) -> Option<Self> {
        let h = &mask.header;
        let [nx, ny, nz] = h.dims;
        let mut lo = [usize::MAX; 3];
        let mut hi = [0usize; 3];
        for z in 0..nz {
            for y in 0..ny {
                let row = &mask.data[h.index(0, y, z)..h.index(0, y, z) + nx];
                let Some(first) = row.iter().position(|&v| v != 0) else {
                    continue;
                };
                let last = row.iter().rposition(|&v| v != 0).unwrap();
                lo = [lo[0].min(first), lo[1].min(y), lo[2].min(z)];
                hi = [hi[0].max(last + 1), hi[1].max(y + 1), hi[2].max(z + 1)];
            }
        }
        (lo[0] != usize::MAX).then_some(BoundingBox { lo, hi })
    }
}

/// 1D squared-distance transform of a sampled function `f` under parabolas
/// of weight `w`: `out[q] = min_p f[p] + w·(q − p)²`. Infinite samples are
/// not sites. `sites` and `bounds` are scratch of length `f.len()` and
/// `f.len() + 1`.
pub fn lower_envelope(f: &[f64], w: f64, out: &mut [f64], sites: &mut [usize], bounds: &mut [f64]) {
    let n = f.len();
    let mut k: isize = -1;
    for q in 0..n {
        let fq = f[q];
        if fq == f64::INFINITY {
            continue;
        }
        let qf = q as f64;
        let mut s = f64::NEG_INFINITY;
        while k >= 0 {
            let v = sites[k as usize];
            let vf = v as f64;
            s = ((fq + w * qf * qf) - (f[v] + w * vf * vf)) / (2.0 * w * (qf - vf));
            if s <= bounds[k as usize] {
                k -= 1;
            } else {
                break;
            }
        }
        if k < 0 {
            s = f64::NEG_INFINITY;
        }
        k += 1;
        sites[k as usize] = q;
        bounds[k as usize] = s;
        bounds[k as usize + 1] = f64::INFINITY;
    }
    if k < 0 {
        out.fill(f64::INFINITY);
        return;
    }
    let mut j = 0usize;
    for (q, o) in out.iter_mut().enumerate() {
        let qf = q as f64;
        while bounds[j + 1] < qf {
            j += 1;
        }
        let v = sites[j];
        let d = qf - v as f64;
        *o = f[v] + w * (d * d);
    }
}

struct Scratch {
    f: Vec<f64>,
    out: Vec<f64>,
    sites: Vec<usize>,
    bounds: Vec<f64>,
}

impl Scratch {
    fn new(n: usize) -> Self {
        Scratch {
            f: vec![0.0; n],
            out: vec![0.0; n],
            sites: vec![0; n],
            bounds: vec![0.0; n + 1],
        }
    }

    fn run(&mut self, w: f64) {
        lower_envelope(&self.f, w, &mut self.out, &mut self.sites, &mut self.bounds);
    }
}

/// Squared distances (mm²) inside `bbox` to the nearest site. `sq` holds the
/// box in x-fastest order and must be initialised to 0 at sites and +∞
/// elsewhere; it is transformed in place.
pub fn squared_edt_in_place(sq: &mut [f64], shape: [usize; 3], spacing: [f64; 3]) {
    let [sx, sy, sz] = shape;
    assert_eq!(sq.len(), sx * sy * sz);
    if sq.is_empty() {
        return;
    }
    let w = spacing.map(|s| s * s);
    let plane = sx * sy;

    // x and y passes stay inside one z-plane
    sq.par_chunks_mut(plane).for_each_init(
        || (Scratch::new(sx), Scratch::new(sy)),
        |(xs, ys), slab| {
            for row in slab.chunks_exact_mut(sx) {
                xs.f.copy_from_slice(row);
                xs.run(w[0]);
                row.copy_from_slice(&xs.out);
            }
            if sy > 1 {
                for x in 0..sx {
                    for y in 0..sy {
                        ys.f[y] = slab[x + sx * y];
                    }
                    ys.run(w[1]);
                    for y in 0..sy {
                        slab[x + sx * y] = ys.out[y];
                    }
                }
            }
        },
    );

    if sz > 1 {
        // z pass: one (x, z) sheet per y, computed from a read-only view
        let view: &[f64] = sq;
        let sheets: Vec<Vec<f64>> = (0..sy)
            .into_par_iter()
            .map_init(
                || Scratch::new(sz),
                |zs, y| {
                    let mut sheet = vec![0.0; sx * sz];
                    for x in 0..sx {
                        for z in 0..sz {
                            zs.f[z] = view[x + sx * y + plane * z];
                        }
                        zs.run(w[2]);
                        sheet[x * sz..(x + 1) * sz].copy_from_slice(&zs.out);
                    }
                    sheet
                },
            )
            .collect();
        for (y, sheet) in sheets.into_iter().enumerate() {
            for x in 0..sx {
                for z in 0..sz {
                    sq[x + sx * y + plane * z] = sheet[x * sz + z];
                }
            }
        }
    }
}

/// Squared distance map over `bbox` to the voxels for which `is_site`
/// (given a global voxel index) holds.
pub fn squared_edt_box(
    header: &NiftiHeader,
    bbox: BoundingBox,
    is_site: impl Fn(usize) -> bool + Sync,
) -> Vec<f64> {
    let [sx, sy, sz] = bbox.shape();
    let mut sq = vec![f64::INFINITY; bbox.len()];
    sq.par_chunks_mut((sx * sy).max(1))
        .enumerate()
        .for_each(|(lz, slab)| {
            let z = bbox.lo[2] + lz;
            for ly in 0..sy {
                let y = bbox.lo[1] + ly;
                let base = header.index(bbox.lo[0], y, z);
                for lx in 0..sx {
                    if is_site(base + lx) {
                        slab[lx + sx * ly] = 0.0;
                    }
                }
            }
        });
    if sz > 0 {
        squared_edt_in_place(&mut sq, [sx, sy, sz], header.spacing());
    }
    sq
}

/// Distance in mm from every voxel to the nearest foreground voxel centre.
/// An all-background mask yields +∞ everywhere.
pub fn edt(mask: &LabelMap) -> Volume3D {
    let h = mask.header();
    let sq = squared_edt_box(h, BoundingBox::full(h.dims), |i| mask.data[i] != 0);
    let mut header = h.clone();
    header.datatype = crate::nifti::Datatype::Float32;
    Volume3D {
        header,
        data: sq.into_iter().map(f64::sqrt).collect(),
    }
}

/// Voxels within `radius` voxels (unit spacing) of the foreground.
pub fn dilate(mask: &LabelMap, radius: u32) -> LabelMap {
    if radius == 0 {
        return binarized(mask);
    }
    let h = &mask.header;
    let sq = squared_edt_in_unit_grid(h.dims, |i| mask.data[i] != 0);
    let r2 = f64::from(radius * radius);
    LabelMap {
        header: h.clone(),
        data: sq.iter().map(|&d| u8::from(d <= r2)).collect(),
    }
}

/// Foreground voxels farther than `radius` voxels (unit spacing) from any
/// background voxel; everything outside the grid counts as background.
pub fn erode(mask: &LabelMap, radius: u32) -> LabelMap {
    if radius == 0 {
        return binarized(mask);
    }
    let [nx, ny, nz] = mask.header.dims;
    let padded = [nx + 2, ny + 2, nz + 2];
    let mut sq = vec![0.0; padded.iter().product()];
    for z in 0..nz {
        for y in 0..ny {
            for x in 0..nx {
                if mask.is_set(x, y, z) {
                    sq[(x + 1) + padded[0] * ((y + 1) + padded[1] * (z + 1))] = f64::INFINITY;
                }
            }
        }
    }
    squared_edt_in_place(&mut sq, padded, [1.0; 3]);
    let r2 = f64::from(radius * radius);
    let mut out = LabelMap::empty_like(mask);
    for z in 0..nz {
        for y in 0..ny {
            for x in 0..nx {
                let d = sq[(x + 1) + padded[0] * ((y + 1) + padded[1] * (z + 1))];
                if d > r2 {
                    out.set(x, y, z, 1);
                }
            }
        }
    }
    out
}

fn squared_edt_in_unit_grid(dims: [usize; 3], is_site: impl Fn(usize) -> bool) -> Vec<f64> {
    let mut sq: Vec<f64> = (0..dims.iter().product())
        .map(|i| if is_site(i) { 0.0 } else { f64::INFINITY })
        .collect();
    squared_edt_in_place(&mut sq, dims, [1.0; 3]);
    sq
}

fn binarized(mask: &LabelMap) -> LabelMap {
    LabelMap {
        header: mask.header.clone(),
        data: mask.data.iter().map(|&v| u8::from(v != 0)).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn brute_1d(f: &[f64], w: f64) -> Vec<f64> {
        (0..f.len())
            .map(|q| {
                f.iter()
                    .enumerate()
                    .filter(|(_, v)| v.is_finite())
                    .map(|(p, &v)| {
                        let d = q as f64 - p as f64;
                        v + w * (d * d)
                    })
                    .fold(f64::INFINITY, f64::min)
            })
            .collect()
    }

    fn brute_3d(mask: &LabelMap) -> Vec<f64> {
        let h = &mask.header;
        let w = h.spacing().map(|s| s * s);
        let sites: Vec<[usize; 3]> = (0..mask.data.len())
            .filter(|&i| mask.data[i] != 0)
            .map(|i| h.coords(i))
            .collect();
        (0..mask.data.len())
            .map(|i| {
                let c = h.coords(i);
                sites
                    .iter()
                    .map(|s| {
                        let d = [0, 1, 2].map(|a| c[a] as f64 - s[a] as f64);
                        ((w[0] * (d[0] * d[0])) + w[1] * (d[1] * d[1])) + w[2] * (d[2] * d[2])
                    })
                    .fold(f64::INFINITY, f64::min)
                    .sqrt()
            })
            .collect()
    }

    #[test]
    fn single_site_distances() {
        let mut m = LabelMap::empty(NiftiHeader::new([5, 1, 1], [1.0, 1.0, 1.0]));
        m.set(0, 0, 0, 1);
        assert_eq!(edt(&m).get(3, 0, 0), 3.0);

        let mut m = LabelMap::empty(NiftiHeader::new([1, 1, 3], [1.0, 1.0, 5.0]));
        m.set(0, 0, 0, 1);
        let d = edt(&m);
        assert_eq!(d.get(0, 0, 0), 0.0);
        assert_eq!(d.get(0, 0, 1), 5.0);
    }

    #[test]
    fn empty_mask_is_infinite() {
        let m = LabelMap::empty(NiftiHeader::new([3, 3, 3], [1.0; 3]));
        assert!(edt(&m).data.iter().all(|d| d.is_infinite()));
    }

    #[test]
    fn erosion_and_dilation_of_a_cube() {
        let mut m = LabelMap::empty(NiftiHeader::new([7, 7, 7], [1.0; 3]));
        for z in 1..6 {
            for y in 1..6 {
                for x in 1..6 {
                    m.set(x, y, z, 1);
                }
            }
        }
        assert_eq!(erode(&m, 1).count(), 27);
        assert_eq!(erode(&m, 2).count(), 1);
        // 5³ cube + 6 faces of 5×5 one voxel out
        assert_eq!(dilate(&m, 1).count(), 125 + 6 * 25);
        assert_eq!(erode(&m, 0), m);
    }

    #[test]
    fn erosion_treats_outside_as_background() {
        let mut m = LabelMap::empty(NiftiHeader::new([3, 3, 3], [1.0; 3]));
        m.data.fill(1);
        assert_eq!(erode(&m, 1).count(), 1);
    }

    proptest! {
        #[test]
        fn envelope_matches_brute_force(
            f in prop::collection::vec(prop_oneof![Just(f64::INFINITY), 0.0..50.0f64], 1..40),
            w in 0.01..30.0f64,
        ) {
            let n = f.len();
            let mut out = vec![0.0; n];
            lower_envelope(&f, w, &mut out, &mut vec![0; n], &mut vec![0.0; n + 1]);
            let expect = brute_1d(&f, w);
            for (a, b) in out.iter().zip(&expect) {
                prop_assert!(a == b || (a - b).abs() <= 1e-9 * b.max(1.0), "{a} vs {b}");
            }
        }

        #[test]
        fn edt_matches_brute_force(
            dims in [1usize..9, 1usize..9, 1usize..9],
            spacing in [0.3f32..4.0, 0.3f32..4.0, 0.3f32..6.0],
            density in 0.0..0.3f64,
            seed in any::<u64>(),
        ) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let mut m = LabelMap::empty(NiftiHeader::new(dims, spacing));
            for v in m.data.iter_mut() {
                *v = u8::from(rng.gen_bool(density));
            }
            let got = edt(&m);
            for (a, b) in got.data.iter().zip(brute_3d(&m)) {
                prop_assert!(*a == b || (a - b).abs() <= 1e-9, "{a} vs {b}");
            }
        }
    }
}
