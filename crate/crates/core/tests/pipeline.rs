use std::sync::OnceLock;

use cgpt_core::cgpt::{from_real_blocks, to_real_blocks, transform_cgpt, CgptPair};
use cgpt_core::experiment::{letter_scenario, match_errors, reconstruction_study, split_seed, Algorithm, Scenario};
use cgpt_core::geometry::{ShapeSpec, SimilarityTransform};
use cgpt_core::io::{read_dictionary_json, read_msr_csv, write_dictionary_json, write_msr_csv, MsrHeader};
use cgpt_core::matching::Dictionary;
use cgpt_core::msr::{reconstruct_cgpt, truncation_residual, ArrayConfig};
use nalgebra::Vector2;
use num_complex::Complex;
use proptest::prelude::*;

fn disk_scenario(radius: f64) -> Scenario {
    Scenario {
        shape: ShapeSpec::Ellipse { a: 0.5, b: 0.5 },
        nodes: 256,
        normalize: false,
        kappa: 4.0 / 3.0,
        transform: SimilarityTransform { z: Complex::new(0.25, 0.0), s: 1.0, theta: 0.0 },
        array: ArrayConfig::new(51, radius, Vector2::zeros()).unwrap(),
    }
}

fn slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

#[test]
fn truncation_residual_decays_like_eps_to_k_plus_2() {
    let radii = [2.0, 4.0, 8.0, 16.0];
    for k in 1..=3 {
        let (mut xs, mut ys) = (Vec::new(), Vec::new());
        for r in radii {
            let scn = disk_scenario(r);
            let exact = to_real_blocks(&scn.oracle_cgpt(k).unwrap());
            let res = truncation_residual(&scn.simulate().unwrap(), &exact, k).unwrap();
            xs.push(scn.epsilon().unwrap().ln());
            ys.push(res.ln());
        }
        let s = slope(&xs, &ys);
        assert!((s - (k as f64 + 2.0)).abs() <= 0.5, "K={k}: slope {s}");
    }
}

fn letters() -> &'static Dictionary<f64> {
    static DICT: OnceLock<Dictionary<f64>> = OnceLock::new();
    DICT.get_or_init(|| {
        let shapes: Vec<ShapeSpec> = "BFPR".chars().map(ShapeSpec::Letter).collect();
        Dictionary::from_shapes(&shapes, 4, 3.5, None).unwrap()
    })
}

#[test]
fn moved_letter_survives_files_and_is_identified() {
    let dir = tempfile::tempdir().unwrap();
    let scn = letter_scenario('P').unwrap();
    let v = scn.simulate().unwrap();
    let msr_path = dir.path().join("p.csv");
    write_msr_csv(std::fs::File::create(&msr_path).unwrap(), &v, &MsrHeader::for_scenario(&scn, &v, 0.0, 0)).unwrap();
    let dict_path = dir.path().join("dict.json");
    write_dictionary_json(std::fs::File::create(&dict_path).unwrap(), letters()).unwrap();

    let (v, header) = read_msr_csv(std::fs::File::open(&msr_path).unwrap()).unwrap();
    let dict = read_dictionary_json(std::fs::File::open(&dict_path).unwrap()).unwrap();
    assert_eq!(header.scenario().unwrap(), scn);
    let blocks = reconstruct_cgpt(&v, 8).unwrap().truncate(4).unwrap();
    let query = from_real_blocks(&blocks, scn.lambda().unwrap()).unwrap();
    for algo in [Algorithm::Cgpt, Algorithm::Descriptor] {
        let errors = match_errors(&query, &dict, algo, 4).unwrap();
        let best = (0..errors.len()).min_by(|&a, &b| errors[a].total_cmp(&errors[b])).unwrap();
        assert_eq!(dict.entries[best].name, "P", "{algo:?}: {errors:?}");
        assert!(errors[best] < 1e-4, "{algo:?}: {errors:?}");
    }
}

#[test]
fn studies_do_not_depend_on_the_thread_count() {
    let scn = disk_scenario(2.0);
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| reconstruction_study(&scn, &[0.05], 12, 0.1, 3, None, 11).unwrap())
    };
    assert_eq!(run(1), run(4));
}

fn transform() -> impl Strategy<Value = SimilarityTransform<f64>> {
    (-5.0..5.0f64, -5.0..5.0f64, 0.3..3.0f64, 0.0..std::f64::consts::TAU)
        .prop_map(|(x, y, s, theta)| SimilarityTransform { z: Complex::new(x, y), s, theta })
}

fn winner(query: &CgptPair<f64>, algo: Algorithm) -> String {
    let errors = match_errors(query, letters(), algo, 3).unwrap();
    let best = (0..errors.len()).min_by(|&a, &b| errors[a].total_cmp(&errors[b])).unwrap();
    letters().entries[best].name.clone()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn winners_are_transform_invariant(t in transform(), which in 0usize..4) {
        let entry = &letters().entries[which];
        let query = transform_cgpt(&entry.cgpt, &t);
        prop_assert_eq!(winner(&query, Algorithm::Descriptor), entry.name.clone());
        prop_assert_eq!(winner(&query, Algorithm::Cgpt), entry.name.clone());
    }

    #[test]
    fn split_seeds_differ_between_streams(master in any::<u64>(), a in 0u64..1000, b in 0u64..1000) {
        prop_assume!(a != b);
        prop_assert_ne!(split_seed(master, a), split_seed(master, b));
    }
}
