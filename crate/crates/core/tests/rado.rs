use blindrado::linalg::dot;
use blindrado::paillier::keygen;
use blindrado::rado::{
    all_signatures, encrypt_examples, encrypt_signature, encrypted_rado, make_rado, read_rados_csv, sample_signatures,
    write_rados_csv, Dataset, Label, LiftMap, PlainSigmaRados, Rado, Signature,
};
use blindrado::secmath::{KeyHolder, SecureContext, SecureWorker};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

const F: u32 = 32;

fn random_dataset(m: usize, d: usize, rng: &mut ChaCha20Rng) -> Dataset<f64> {
    let rows = (0..m)
        .map(|_| (0..d).map(|_| rng.gen_range(-5.0..5.0)).collect())
        .collect();
    let labels = (0..m)
        .map(|_| if rng.gen() { Label::Positive } else { Label::Negative })
        .collect();
    Dataset::from_rows(rows, labels).unwrap()
}

fn setup(seed: u64) -> (SecureContext, KeyHolder, ChaCha20Rng) {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let (_, sk) = keygen(256, &mut rng).unwrap();
    let holder = KeyHolder::new(sk, F, seed ^ 0xabc).unwrap();
    (holder.context().clone(), holder, rng)
}

#[test]
fn encrypted_rados_match_plaintext_rados() {
    let (ctx, mut holder, mut rng) = setup(1);
    let sk = holder.secret_key().clone();
    let mut wrng = ChaCha20Rng::seed_from_u64(2);
    let mut worker = SecureWorker::new(&ctx, &mut holder, &mut wrng);
    let tol = 2f64.powi(-(F as i32) + 2);
    for _ in 0..50 {
        let m = rng.gen_range(1..=20);
        let d = rng.gen_range(1..=8);
        let ds = random_dataset(m, d, &mut rng);
        let ex = encrypt_examples(&ctx, &ds, &mut rng).unwrap();
        let sigma = &sample_signatures(m, 1, &mut rng).unwrap()[0];
        let es = encrypt_signature(&ctx, sigma, &mut rng).unwrap();
        let enc = encrypted_rado(&mut worker, &ex, &es).unwrap();
        assert!(enc.iter().all(|c| c.scale() == F + 1));
        let got: Vec<f64> = ctx.codec().decrypt_vector(&sk, &enc).unwrap();
        let want = make_rado(&ds, sigma).unwrap().pi;
        for (g, w) in got.iter().zip(&want) {
            assert!((g - w).abs() <= tol, "{g} vs {w}");
        }
    }
}

#[test]
fn plaintext_signature_path_matches_encrypted_path() {
    let (ctx, mut holder, mut rng) = setup(3);
    let sk = holder.secret_key().clone();
    let mut wrng = ChaCha20Rng::seed_from_u64(4);
    let mut worker = SecureWorker::new(&ctx, &mut holder, &mut wrng);
    let ds = random_dataset(12, 5, &mut rng);
    let ex = encrypt_examples(&ctx, &ds, &mut rng).unwrap();
    let fast = PlainSigmaRados::new(&mut worker, &ex).unwrap();
    for sigma in sample_signatures(12, 10, &mut rng).unwrap() {
        let a: Vec<f64> = ctx
            .codec()
            .decrypt_vector(&sk, &fast.rado(&ctx, &sigma).unwrap())
            .unwrap();
        let es = encrypt_signature(&ctx, &sigma, &mut rng).unwrap();
        let b: Vec<f64> = ctx
            .codec()
            .decrypt_vector(&sk, &encrypted_rado(&mut worker, &ex, &es).unwrap())
            .unwrap();
        assert_eq!(a, b);
    }
}

#[test]
fn zero_features_and_opposing_signature_give_zero_rados() {
    let (ctx, mut holder, mut rng) = setup(5);
    let sk = holder.secret_key().clone();
    let mut wrng = ChaCha20Rng::seed_from_u64(6);
    let mut worker = SecureWorker::new(&ctx, &mut holder, &mut wrng);

    let zeros = Dataset::from_rows(vec![vec![0.0; 3]; 4], vec![Label::Positive; 4]).unwrap();
    let ex = encrypt_examples(&ctx, &zeros, &mut rng).unwrap();
    let sigma = Signature::agreeing(&zeros.labels());
    let es = encrypt_signature(&ctx, &sigma, &mut rng).unwrap();
    let got: Vec<f64> = ctx
        .codec()
        .decrypt_vector(&sk, &encrypted_rado(&mut worker, &ex, &es).unwrap())
        .unwrap();
    assert_eq!(got, vec![0.0; 3]);

    let ds = random_dataset(6, 3, &mut rng);
    let ex = encrypt_examples(&ctx, &ds, &mut rng).unwrap();
    let es = encrypt_signature(&ctx, &Signature::opposing(&ds.labels()), &mut rng).unwrap();
    let got: Vec<f64> = ctx
        .codec()
        .decrypt_vector(&sk, &encrypted_rado(&mut worker, &ex, &es).unwrap())
        .unwrap();
    assert_eq!(got, vec![0.0; 3]);
}

#[test]
fn sampled_signatures_are_uniform() {
    let mut rng = ChaCha20Rng::seed_from_u64(7);
    let mut counts = [0usize; 8];
    for _ in 0..8000 {
        let s = &sample_signatures(3, 1, &mut rng).unwrap()[0];
        let idx = s.as_slice().iter().fold(0, |acc, &v| acc * 2 + usize::from(v == 1));
        counts[idx] += 1;
    }
    let stat: f64 = counts.iter().map(|&c| (c as f64 - 1000.0).powi(2) / 1000.0).sum();
    let p = 1.0 - ChiSquared::new(7.0).unwrap().cdf(stat);
    assert!(p > 0.01, "p = {p}");
    let single = sample_signatures(1, 50, &mut rng).unwrap();
    assert!(single.iter().all(|s| s.as_slice() == [1] || s.as_slice() == [-1]));
}

#[test]
fn all_signatures_counts() {
    assert_eq!(all_signatures(2).unwrap().len(), 4);
    let three = all_signatures(3).unwrap();
    let mut distinct = three.clone();
    distinct.dedup();
    assert_eq!(distinct.len(), 8);
    assert!(all_signatures(0).is_err());
    assert!(all_signatures(17).is_err());
}

#[test]
fn mean_over_all_signatures_is_half_the_edge_vector() {
    let mut rng = ChaCha20Rng::seed_from_u64(8);
    for m in 1..=10 {
        let ds = random_dataset(m, 3, &mut rng);
        let sigs = all_signatures(m).unwrap();
        let mut mean = [0.0; 3];
        for s in &sigs {
            for (acc, v) in mean.iter_mut().zip(make_rado(&ds, s).unwrap().pi) {
                *acc += v / sigs.len() as f64;
            }
        }
        let mut edge = vec![0.0; 3];
        for e in ds.examples() {
            for (acc, v) in edge.iter_mut().zip(&e.x) {
                *acc += 0.5 * e.y.value::<f64>() * v;
            }
        }
        for (a, b) in mean.iter().zip(&edge) {
            assert!((a - b).abs() < 1e-9);
        }
    }
}

#[test]
fn rado_csv_file_roundtrip() {
    let mut rng = ChaCha20Rng::seed_from_u64(9);
    let ds = random_dataset(5, 4, &mut rng);
    let rados: Vec<Rado<f64>> = sample_signatures(5, 6, &mut rng)
        .unwrap()
        .iter()
        .enumerate()
        .map(|(i, s)| make_rado(&ds, s).unwrap().with_origin(Some(0), Some(i)))
        .collect();
    let dir = std::env::temp_dir().join(format!("rados-{}.csv", std::process::id()));
    write_rados_csv(std::fs::File::create(&dir).unwrap(), &rados).unwrap();
    let back: Vec<Rado<f64>> = read_rados_csv(std::io::BufReader::new(std::fs::File::open(&dir).unwrap())).unwrap();
    std::fs::remove_file(&dir).ok();
    assert_eq!(back, rados);
}

fn lift_map() -> impl Strategy<Value = LiftMap> {
    (1usize..12).prop_flat_map(|global| {
        proptest::sample::subsequence((0..global).collect::<Vec<_>>(), 0..=global)
            .prop_map(move |positions| LiftMap::new(positions, global).unwrap())
    })
}

proptest! {
    #[test]
    fn lift_then_restrict_is_identity(map in lift_map(), seed in any::<u64>()) {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let z: Vec<f64> = (0..map.local_dim()).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let lifted = map.lift(&z).unwrap();
        prop_assert_eq!(lifted.len(), map.global_dim());
        prop_assert_eq!(map.restrict(&lifted).unwrap(), z);
    }

    #[test]
    fn lift_preserves_inner_products(map in lift_map(), seed in any::<u64>()) {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let z: Vec<f64> = (0..map.local_dim()).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let w: Vec<f64> = (0..map.local_dim()).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let lifted = dot(&map.lift(&z).unwrap(), &map.lift(&w).unwrap());
        prop_assert!((lifted - dot(&z, &w)).abs() < 1e-12);
    }

    #[test]
    fn rados_are_linear_in_the_features(seed in any::<u64>(), c in -4.0f64..4.0) {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let ds = random_dataset(6, 3, &mut rng);
        let sigma = &sample_signatures(6, 1, &mut rng).unwrap()[0];
        let scaled = make_rado(&ds.scale_features(&c), sigma).unwrap().pi;
        let base = make_rado(&ds, sigma).unwrap().pi;
        for (a, b) in scaled.iter().zip(&base) {
            prop_assert!((a - c * b).abs() < 1e-9);
        }
    }
}
