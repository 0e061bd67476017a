use priorseg_core::cohort::SuperiorAxis;
use priorseg_core::encoding::{encode, encode_volumes, EncodingStrategy, StrategyKind};
use priorseg_core::phantom::{build_patient, LandmarkTemplate};
use priorseg_core::regions::{compute_bounds, crop_to_region, LandmarkSet, Region};
use priorseg_core::{generate_cohort, load_manifest, stratify, LabelMap, PhantomSpec, Sex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_spec(rng: &mut ChaCha8Rng) -> PhantomSpec {
    loop {
        let mut cuts: Vec<f64> = (0..6).map(|_| rng.gen_range(0.05..0.95)).collect();
        cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let spec = PhantomSpec {
            dims: [32, 32, rng.gen_range(40..160)],
            landmarks: LandmarkTemplate {
                vertebra_l4: [cuts[0], cuts[1]],
                stomach: [cuts[2], cuts[3]],
                vertebra_t1: [cuts[4], cuts[5]],
            },
            ..PhantomSpec::default()
        };
        if spec.validate().is_ok() {
            return spec;
        }
    }
}

fn flip(m: &LabelMap) -> LabelMap {
    let [nx, ny, nz] = m.header.dims;
    let plane = nx * ny;
    let mut out = m.clone();
    for z in 0..nz {
        out.data[z * plane..(z + 1) * plane].copy_from_slice(&m.data[(nz - 1 - z) * plane..(nz - z) * plane]);
    }
    out
}

#[test]
fn regions_partition_slices_on_50_random_phantoms() {
    let mut rng = ChaCha8Rng::seed_from_u64(50);
    for trial in 0..50 {
        let spec = random_spec(&mut rng);
        let p = build_patient(&spec, Sex::Male, trial).unwrap();
        let nz = spec.dims[2];
        let b = compute_bounds(&p.landmarks, SuperiorAxis::PlusZ).unwrap();
        assert!(b.b3 <= b.b2 && b.b2 <= b.b1, "trial {trial}: {b:?}");
        let total: usize = Region::ALL.iter().map(|&r| b.range(r).len()).sum();
        assert_eq!(total, nz);
        for z in 0..nz {
            let hits = Region::ALL.iter().filter(|&&r| b.range(r).contains(z)).count();
            assert_eq!(hits, 1, "trial {trial} slice {z}");
        }
        // cropped masks recombine to the original
        let mut sum = vec![0u8; p.gt_ctv.data.len()];
        for r in Region::ALL {
            let c = crop_to_region(&p.gt_ctv, &b, r).unwrap();
            for (s, v) in sum.iter_mut().zip(&c.data) {
                *s += v;
            }
        }
        assert_eq!(sum, p.gt_ctv.data);

        // same anatomy stored upside down gives mirrored ranges
        let flipped = LandmarkSet {
            vertebra_t1: flip(&p.landmarks.vertebra_t1),
            stomach: flip(&p.landmarks.stomach),
            vertebra_l4: flip(&p.landmarks.vertebra_l4),
        };
        let fb = compute_bounds(&flipped, SuperiorAxis::MinusZ).unwrap();
        for r in Region::ALL {
            let (a, f) = (b.range(r), fb.range(r));
            assert_eq!((f.lo, f.hi), (nz - a.hi, nz - a.lo));
        }
    }
}

#[test]
fn encodings_of_a_phantom_satisfy_invariants() {
    let spec = PhantomSpec {
        dims: [40, 40, 48],
        ..PhantomSpec::default()
    };
    let p = build_patient(&spec, Sex::Female, 0).unwrap();
    let vocab: Vec<String> = p.structures.iter().map(|(n, _)| n.clone()).collect();
    let masks_for = |s: &EncodingStrategy| -> Vec<LabelMap> {
        s.structure_set
            .iter()
            .map(|n| p.structures.iter().find(|(m, _)| m == n).unwrap().1.clone())
            .collect()
    };

    for kind in [StrategyKind::Mi, StrategyKind::MiTs, StrategyKind::MiZ] {
        let s = EncodingStrategy::for_vocabulary(kind, &vocab).unwrap();
        let e = encode_volumes(&s, &p.ct, &masks_for(&s)).unwrap();
        let code = e.code.unwrap();
        let mut values: Vec<u8> = code.assignments.iter().map(|a| a.1).collect();
        let n = values.len();
        values.sort();
        values.dedup();
        assert_eq!(values.len(), n, "{kind:?} codes collide");
        assert_eq!(*values.last().unwrap(), 255);
        let ch = &e.channels[0];
        if kind == StrategyKind::MiZ {
            let v = &ch.volume.data;
            let mean = v.iter().sum::<f64>() / v.len() as f64;
            let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / v.len() as f64;
            assert!(mean.abs() < 1e-9 && (var - 1.0).abs() < 1e-9);
        } else {
            // disjoint structures: every foreground voxel carries its own code
            for ((name, value), m) in code.assignments.iter().zip(masks_for(&s)) {
                for (i, &on) in m.data.iter().enumerate() {
                    if on != 0 {
                        assert_eq!(ch.volume.data[i], f64::from(*value), "{name}");
                    }
                }
            }
        }
    }

    let s = EncodingStrategy::for_vocabulary(StrategyKind::EqZ, &vocab).unwrap();
    let e = encode_volumes(&s, &p.ct, &masks_for(&s)).unwrap();
    let mut distinct: Vec<f64> = e.channels[0].volume.data.clone();
    distinct.sort_by(|a, b| a.partial_cmp(b).unwrap());
    distinct.dedup();
    assert_eq!(distinct.len(), 2);

    let s = EncodingStrategy::for_vocabulary(StrategyKind::CropZ, &vocab).unwrap();
    let masks = masks_for(&s);
    let e = encode_volumes(&s, &p.ct, &masks).unwrap();
    assert_eq!(e.channels.len(), 2);
    let outside = (0..p.ct.data.len()).find(|&i| masks.iter().all(|m| m.data[i] == 0)).unwrap();
    let inside = (0..p.ct.data.len()).filter(|&i| masks.iter().any(|m| m.data[i] != 0));
    for ch in &e.channels {
        let st = ch.stats.unwrap();
        let raw_out = ch.volume.data[outside] * st.std + st.mean;
        assert!(raw_out.abs() < 1e-6 || (raw_out - 255.0).abs() < 1e-6);
    }
    for i in inside.take(500) {
        for ch in &e.channels {
            let st = ch.stats.unwrap();
            assert!((ch.volume.data[i] * st.std + st.mean - p.ct.data[i]).abs() < 1e-6);
        }
    }
}

#[test]
fn generated_cohort_loads_and_encodes_from_disk() {
    let dir = tempfile::tempdir().unwrap();
    let spec = PhantomSpec {
        dims: [32, 32, 40],
        n_female: 2,
        n_male: 1,
        ..PhantomSpec::default()
    };
    let (manifest, path) = generate_cohort(&spec, dir.path()).unwrap();
    let loaded = load_manifest(&path).unwrap();
    assert_eq!(loaded.records.len(), 3);
    assert_eq!(loaded.structure_vocabulary, manifest.structure_vocabulary);
    let groups = stratify(&loaded);
    assert_eq!(groups[&Sex::Female], ["F000", "F001"]);
    assert_eq!(groups[&Sex::Male], ["M000"]);

    let record = loaded.record("F001").unwrap();
    let s = EncodingStrategy::for_vocabulary(StrategyKind::Mi, &loaded.structure_vocabulary).unwrap();
    let from_disk = encode(&s, record).unwrap();
    let p = build_patient(&spec, Sex::Female, 1).unwrap();
    let masks: Vec<LabelMap> = s
        .structure_set
        .iter()
        .map(|n| p.structures.iter().find(|(m, _)| m == n).unwrap().1.clone())
        .collect();
    let in_memory = encode_volumes(&s, &p.ct, &masks).unwrap();
    assert_eq!(from_disk.channels[0].volume.data, in_memory.channels[0].volume.data);
}
