use blindrado::linalg::{inverse_residual, Matrix};
use blindrado::paillier::{keygen, Ciphertext, SecretKey};
use blindrado::secmath::{
    local_inner_prod, sm_add, sm_add_finish, sm_add_fold, sm_add_start_with_mask, HolderReply, HolderRequest,
    InverseParams, KeyHolder, ObservationKind, SecError, SecureContext, SecureWorker,
};
use num_bigint::{BigInt, BigUint};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

const F: u32 = 32;

fn setup(seed: u64) -> (SecureContext, KeyHolder, ChaCha20Rng) {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let (_, sk) = keygen(256, &mut rng).unwrap();
    let holder = KeyHolder::new(sk, F, seed + 1).unwrap();
    (holder.context().clone(), holder, rng)
}

fn enc(ctx: &SecureContext, v: &[f64], rng: &mut ChaCha20Rng) -> Vec<Ciphertext> {
    ctx.codec().encrypt_vector(ctx.pk(), v, rng).unwrap()
}

fn enc_matrix(ctx: &SecureContext, m: &Matrix<f64>, rng: &mut ChaCha20Rng) -> Matrix<Ciphertext> {
    m.map(|v| ctx.codec().encrypt(ctx.pk(), v, rng).unwrap())
}

fn dec(ctx: &SecureContext, sk: &SecretKey, cs: &[Ciphertext]) -> Vec<f64> {
    ctx.codec().decrypt_vector(sk, cs).unwrap()
}

fn dec_matrix(ctx: &SecureContext, sk: &SecretKey, m: &Matrix<Ciphertext>) -> Matrix<f64> {
    m.map(|c| ctx.codec().decrypt(sk, c).unwrap())
}

fn random_matrix(rows: usize, cols: usize, rng: &mut ChaCha20Rng) -> Matrix<f64> {
    Matrix::from_fn(rows, cols, |_, _| rng.gen_range(-10.0..10.0))
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

#[test]
fn elementwise_product_small_example() {
    let (ctx, mut holder, mut rng) = setup(1);
    let x = enc(&ctx, &[2.0, 3.0], &mut rng);
    let y = enc(&ctx, &[4.0, 5.0], &mut rng);
    let sk = holder.secret_key().clone();
    let mut wrng = ChaCha20Rng::seed_from_u64(9);
    let z = SecureWorker::new(&ctx, &mut holder, &mut wrng)
        .sec_elem_prod(&x, &y)
        .unwrap();
    assert!(z.iter().all(|c| c.scale() == 2 * F));
    assert_eq!(dec(&ctx, &sk, &z), vec![8.0, 15.0]);
}

#[test]
fn elementwise_product_with_zero_vanishes() {
    let (ctx, mut holder, mut rng) = setup(2);
    let x = enc(&ctx, &[1.25, -7.5, 3.0], &mut rng);
    let zero = enc(&ctx, &[0.0; 3], &mut rng);
    let sk = holder.secret_key().clone();
    let mut wrng = ChaCha20Rng::seed_from_u64(9);
    let z = SecureWorker::new(&ctx, &mut holder, &mut wrng)
        .sec_elem_prod(&x, &zero)
        .unwrap();
    assert_eq!(dec(&ctx, &sk, &z), vec![0.0; 3]);
}

#[test]
fn secure_products_match_plaintext_on_random_instances() {
    let (ctx, mut holder, mut rng) = setup(3);
    let sk = holder.secret_key().clone();
    let mut wrng = ChaCha20Rng::seed_from_u64(4);
    let mut worker = SecureWorker::new(&ctx, &mut holder, &mut wrng);
    for _ in 0..100 {
        let x: Vec<f64> = (0..4).map(|_| rng.gen_range(-10.0..10.0)).collect();
        let y: Vec<f64> = (0..4).map(|_| rng.gen_range(-10.0..10.0)).collect();
        let (ex, ey) = (enc(&ctx, &x, &mut rng), enc(&ctx, &y, &mut rng));

        let elem = dec(&ctx, &sk, &worker.sec_elem_prod(&ex, &ey).unwrap());
        let want: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a * b).collect();
        assert!(max_diff(&elem, &want) <= 1e-4);

        let inner = dec(&ctx, &sk, &[worker.sec_inner_prod(&ex, &ey).unwrap()])[0];
        let want: f64 = x.iter().zip(&y).map(|(a, b)| a * b).sum();
        assert!((inner - want).abs() <= 1e-4);

        let outer = dec_matrix(&ctx, &sk, &worker.sec_outer_prod(&ex, &ey).unwrap());
        let want = blindrado::linalg::outer(&x, &y);
        assert!(max_diff(outer.as_slice(), want.as_slice()) <= 1e-4);
    }
}

#[test]
fn matrix_products_match_plaintext_on_random_instances() {
    let (ctx, mut holder, mut rng) = setup(5);
    let sk = holder.secret_key().clone();
    let mut wrng = ChaCha20Rng::seed_from_u64(6);
    let mut worker = SecureWorker::new(&ctx, &mut holder, &mut wrng);
    for _ in 0..100 {
        let a = random_matrix(4, 4, &mut rng);
        let b = random_matrix(4, 4, &mut rng);
        let (ea, eb) = (enc_matrix(&ctx, &a, &mut rng), enc_matrix(&ctx, &b, &mut rng));
        let got = dec_matrix(&ctx, &sk, &worker.sec_mat_prod(&ea, &eb).unwrap());
        let want = a.matmul(&b).unwrap();
        assert!(max_diff(got.as_slice(), want.as_slice()) <= 1e-4);
    }
}

#[test]
fn batched_and_entrywise_products_agree() {
    let (ctx, mut holder, mut rng) = setup(7);
    let sk = holder.secret_key().clone();
    let mut wrng = ChaCha20Rng::seed_from_u64(8);
    let mut worker = SecureWorker::new(&ctx, &mut holder, &mut wrng);
    let a = random_matrix(3, 4, &mut rng);
    let b = random_matrix(4, 2, &mut rng);
    let (ea, eb) = (enc_matrix(&ctx, &a, &mut rng), enc_matrix(&ctx, &b, &mut rng));
    let batched = dec_matrix(&ctx, &sk, &worker.sec_mat_prod(&ea, &eb).unwrap());
    let entrywise = dec_matrix(&ctx, &sk, &worker.sec_mat_prod_entrywise(&ea, &eb).unwrap());
    assert_eq!(batched.shape(), (3, 2));
    assert_eq!(batched, entrywise);
}

#[test]
fn symmetric_product_fills_both_triangles() {
    let (ctx, mut holder, mut rng) = setup(10);
    let sk = holder.secret_key().clone();
    let mut wrng = ChaCha20Rng::seed_from_u64(11);
    let mut worker = SecureWorker::new(&ctx, &mut holder, &mut wrng);
    let a = random_matrix(4, 3, &mut rng);
    let ea = enc_matrix(&ctx, &a, &mut rng);
    let got = dec_matrix(&ctx, &sk, &worker.sec_mat_prod_symmetric(&ea, &ea.transpose()).unwrap());
    let want = a.matmul(&a.transpose()).unwrap();
    assert!(max_diff(got.as_slice(), want.as_slice()) <= 1e-4);
    assert!(got.is_symmetric());
}

#[test]
fn identity_and_zero_products() {
    let (ctx, mut holder, mut rng) = setup(12);
    let sk = holder.secret_key().clone();
    let mut wrng = ChaCha20Rng::seed_from_u64(13);
    let mut worker = SecureWorker::new(&ctx, &mut holder, &mut wrng);
    let x = Matrix::from_rows(&[vec![1.5, -2.0], vec![0.25, 4.0]]).unwrap();
    let ex = enc_matrix(&ctx, &x, &mut rng);
    let ei = enc_matrix(&ctx, &Matrix::identity(2), &mut rng);
    let ez = enc_matrix(&ctx, &Matrix::zeros(2, 2), &mut rng);
    assert_eq!(dec_matrix(&ctx, &sk, &worker.sec_mat_prod(&ex, &ei).unwrap()), x);
    assert_eq!(
        dec_matrix(&ctx, &sk, &worker.sec_mat_prod(&ez, &ex).unwrap()),
        Matrix::zeros(2, 2)
    );
}

#[test]
fn outer_product_examples() {
    let (ctx, mut holder, mut rng) = setup(14);
    let sk = holder.secret_key().clone();
    let mut wrng = ChaCha20Rng::seed_from_u64(15);
    let mut worker = SecureWorker::new(&ctx, &mut holder, &mut wrng);
    let u = enc(&ctx, &[2.0, 3.0], &mut rng);
    let got = dec_matrix(&ctx, &sk, &worker.sec_outer_prod(&u, &u).unwrap());
    assert_eq!(got, Matrix::from_rows(&[vec![4.0, 6.0], vec![6.0, 9.0]]).unwrap());
    let e1 = enc(&ctx, &[1.0, 0.0], &mut rng);
    let got = dec_matrix(&ctx, &sk, &worker.sec_outer_prod(&e1, &e1).unwrap());
    assert_eq!(got, Matrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 0.0]]).unwrap());
    for _ in 0..20 {
        let v: Vec<f64> = (0..3).map(|_| rng.gen_range(-5.0..5.0)).collect();
        let ev = enc(&ctx, &v, &mut rng);
        assert!(dec_matrix(&ctx, &sk, &worker.sec_outer_prod(&ev, &ev).unwrap()).is_symmetric());
    }
}

#[test]
fn inner_product_examples() {
    let (ctx, mut holder, mut rng) = setup(16);
    let sk = holder.secret_key().clone();
    let mut wrng = ChaCha20Rng::seed_from_u64(17);
    let mut worker = SecureWorker::new(&ctx, &mut holder, &mut wrng);
    let ones = enc(&ctx, &[1.0, 1.0], &mut rng);
    let ab = enc(&ctx, &[2.5, -0.75], &mut rng);
    assert_eq!(
        dec(&ctx, &sk, &[worker.sec_inner_prod(&ones, &ab).unwrap()]),
        vec![1.75]
    );
    let (e1, e2) = (enc(&ctx, &[1.0, 0.0], &mut rng), enc(&ctx, &[0.0, 1.0], &mut rng));
    assert_eq!(dec(&ctx, &sk, &[worker.sec_inner_prod(&e1, &e2).unwrap()]), vec![0.0]);
}

#[test]
fn product_beyond_maximum_depth_is_rejected() {
    let (ctx, mut holder, mut rng) = setup(18);
    let mut wrng = ChaCha20Rng::seed_from_u64(19);
    let mut worker = SecureWorker::new(&ctx, &mut holder, &mut wrng);
    let x = enc(&ctx, &[1.0], &mut rng);
    let deep = worker.sec_elem_prod(&x, &x).unwrap();
    let err = worker.sec_elem_prod(&deep, &deep).unwrap_err();
    assert!(matches!(err, SecError::ScaleOverflow { scale: 128, max: 96 }), "{err}");
}

#[test]
fn rescale_is_exact_on_dyadic_values() {
    let (ctx, mut holder, mut rng) = setup(20);
    let sk = holder.secret_key().clone();
    let mut wrng = ChaCha20Rng::seed_from_u64(21);
    let mut worker = SecureWorker::new(&ctx, &mut holder, &mut wrng);
    let one = ctx.codec().encrypt_at(ctx.pk(), &1.0, 64, &mut rng).unwrap();
    let neg = ctx.codec().encrypt_at(ctx.pk(), &-2.5, 64, &mut rng).unwrap();
    let out = worker.rescale(&[one, neg], 32).unwrap();
    assert!(out.iter().all(|c| c.scale() == 32));
    assert_eq!(dec(&ctx, &sk, &out), vec![1.0, -2.5]);
}

#[test]
fn rescale_error_is_below_one_unit_of_the_target_scale() {
    let (ctx, mut holder, mut rng) = setup(22);
    let sk = holder.secret_key().clone();
    let mut wrng = ChaCha20Rng::seed_from_u64(23);
    let mut worker = SecureWorker::new(&ctx, &mut holder, &mut wrng);
    let values: Vec<f64> = (0..1000).map(|_| rng.gen_range(-1e3..1e3)).collect();
    let cs: Vec<Ciphertext> = values
        .iter()
        .map(|v| ctx.codec().encrypt_at(ctx.pk(), v, 64, &mut rng).unwrap())
        .collect();
    let exact: Vec<f64> = dec(&ctx, &sk, &cs);
    let out = dec(&ctx, &sk, &worker.rescale(&cs, 32).unwrap());
    assert!(max_diff(&out, &exact) <= 2f64.powi(-32));
}

#[test]
fn rescale_must_lower_the_scale() {
    let (ctx, mut holder, mut rng) = setup(24);
    let mut wrng = ChaCha20Rng::seed_from_u64(25);
    let mut worker = SecureWorker::new(&ctx, &mut holder, &mut wrng);
    let c = enc(&ctx, &[1.0], &mut rng);
    assert!(matches!(
        worker.rescale(&c, 32),
        Err(SecError::BadRescale { from: 32, to: 32 })
    ));
    assert!(matches!(worker.rescale(&c, 40), Err(SecError::BadRescale { .. })));
}

/// Chi-square of `values / n` over equal-width bins.
fn uniformity_p_value(values: &[BigUint], n: &BigUint, bins: usize) -> f64 {
    let mut counts = vec![0usize; bins];
    for v in values {
        let b = (v * BigUint::from(bins) / n)
            .to_u64_digits()
            .first()
            .copied()
            .unwrap_or(0) as usize;
        counts[b] += 1;
    }
    let expected = values.len() as f64 / bins as f64;
    let stat: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
    1.0 - ChiSquared::new((bins - 1) as f64).unwrap().cdf(stat)
}

#[test]
fn key_holder_view_of_elementwise_product_is_uniform() {
    let (ctx, holder, mut rng) = setup(26);
    let mut holder = holder.capture_values(true);
    let x = enc(&ctx, &[3.0], &mut rng);
    let y = enc(&ctx, &[-1.0], &mut rng);
    let mut wrng = ChaCha20Rng::seed_from_u64(27);
    {
        let mut worker = SecureWorker::new(&ctx, &mut holder, &mut wrng);
        for _ in 0..1000 {
            worker.sec_elem_prod(&x, &y).unwrap();
        }
    }
    let obs = holder.observations();
    assert_eq!(obs.len(), 1000);
    assert!(obs
        .iter()
        .all(|o| o.kind == ObservationKind::Masked && o.step == "elemprod.mask"));
    let first: Vec<BigUint> = obs.iter().map(|o| o.values[0].clone()).collect();
    let second: Vec<BigUint> = obs.iter().map(|o| o.values[1].clone()).collect();
    let n = ctx.pk().n();
    for sample in [&first, &second] {
        let p = uniformity_p_value(sample, n, 20);
        assert!(p > 0.01, "uniformity rejected, p = {p}");
    }
    // Low-order residues are uniform too.
    let low: Vec<BigUint> = first.iter().map(|v| v % BigUint::from(16u32)).collect();
    let p = uniformity_p_value(&low, &BigUint::from(16u32), 16);
    assert!(p > 0.01, "low bits not uniform, p = {p}");
}

#[test]
fn key_holder_view_of_rescale_hides_low_bits() {
    let (ctx, holder, mut rng) = setup(28);
    let mut holder = holder.capture_values(true);
    let c = ctx.codec().encrypt_at(ctx.pk(), &1.0, 64, &mut rng).unwrap();
    let mut wrng = ChaCha20Rng::seed_from_u64(29);
    {
        let mut worker = SecureWorker::new(&ctx, &mut holder, &mut wrng);
        for _ in 0..1000 {
            worker.rescale(std::slice::from_ref(&c), 32).unwrap();
        }
    }
    let modulus = BigUint::from(1u64 << 32);
    let low: Vec<BigUint> = holder.observations().iter().map(|o| &o.values[0] % &modulus).collect();
    let p = uniformity_p_value(&low, &modulus, 16);
    assert!(p > 0.01, "p = {p}");
}

#[test]
fn blind_sum_small_example() {
    let (ctx, mut holder, mut rng) = setup(30);
    let pk = ctx.pk();
    let vals: Vec<Ciphertext> = [1u32, 2, 3]
        .iter()
        .map(|&v| pk.encrypt(&BigUint::from(v), &mut rng).unwrap())
        .collect();
    let (seed, mut running) = sm_add_start_with_mask(&ctx, BigUint::from(10u32), 0, &mut rng).unwrap();
    for v in &vals {
        running = sm_add_fold(&ctx, &running, v, &mut rng).unwrap();
    }
    let sk = holder.secret_key().clone();
    assert_eq!(sk.decrypt(&running).unwrap(), BigUint::from(16u32));
    let total = sm_add_finish(&ctx, &seed, &running).unwrap();
    assert_eq!(sk.decrypt(&total).unwrap(), BigUint::from(6u32));
    let single = sm_add(&ctx, &vals[1..2], &mut rng).unwrap();
    assert_eq!(
        holder
            .decrypt_logged("t", ObservationKind::FinalOutput, &single)
            .unwrap(),
        BigUint::from(2u32)
    );
}

#[test]
fn blind_sum_is_exact_for_five_parties() {
    let (ctx, holder, mut rng) = setup(31);
    let sk = holder.secret_key();
    for _ in 0..10 {
        let values: Vec<Vec<f64>> = (0..5)
            .map(|_| (0..4).map(|_| rng.gen_range(-100.0..100.0)).collect())
            .collect();
        for j in 0..4 {
            let column: Vec<Ciphertext> = values
                .iter()
                .map(|v| ctx.codec().encrypt(ctx.pk(), &v[j], &mut rng).unwrap())
                .collect();
            let total = sm_add(&ctx, &column, &mut rng).unwrap();
            let got = ctx.codec().signed(&sk.decrypt(&total).unwrap());
            let want: BigInt = column.iter().map(|c| ctx.codec().signed(&sk.decrypt(c).unwrap())).sum();
            assert_eq!(got, want);
        }
    }
}

#[test]
fn local_inner_product_matches_plaintext() {
    let (ctx, holder, mut rng) = setup(32);
    let sk = holder.secret_key();
    let theta = enc(&ctx, &[2.5, -1.0], &mut rng);
    let sel = local_inner_prod(&ctx, &[1.0, 0.0], &theta).unwrap();
    assert_eq!(dec(&ctx, sk, &[sel]), vec![2.5]);
    let zero = local_inner_prod(&ctx, &[0.0, 0.0], &theta).unwrap();
    assert_eq!(dec(&ctx, sk, &[zero]), vec![0.0]);
    for _ in 0..100 {
        let x: Vec<f64> = (0..5).map(|_| rng.gen_range(-10.0..10.0)).collect();
        let t: Vec<f64> = (0..5).map(|_| rng.gen_range(-10.0..10.0)).collect();
        let et = enc(&ctx, &t, &mut rng);
        let got = dec(&ctx, sk, &[local_inner_prod(&ctx, &x, &et).unwrap()])[0];
        let want: f64 = x.iter().zip(&t).map(|(a, b)| a * b).sum();
        assert!((got - want).abs() <= 2f64.powi(-(F as i32) + 4));
    }
}

#[test]
fn encrypted_inverse_of_a_small_spd_matrix() {
    let (ctx, mut holder, mut rng) = setup(33);
    let sk = holder.secret_key().clone();
    let a = Matrix::from_rows(&[vec![4.0, 1.0, 0.5], vec![1.0, 3.0, 0.25], vec![0.5, 0.25, 2.0]]).unwrap();
    let ea = enc_matrix(&ctx, &a, &mut rng);
    let mut wrng = ChaCha20Rng::seed_from_u64(34);
    let v = {
        let mut worker = SecureWorker::new(&ctx, &mut holder, &mut wrng);
        worker.sec_inv(&ea, &InverseParams::default()).unwrap()
    };
    assert_eq!(v.as_slice()[0].scale(), InverseParams::default().inverse_scale(F));
    let v = dec_matrix(&ctx, &sk, &v);
    let residual = inverse_residual(&v, &a).unwrap();
    assert!(residual <= 1e-2, "residual {residual}");
    // The norm exponent is the only aggregate the key holder decrypts.
    let aggregates: Vec<_> = holder
        .observations()
        .iter()
        .filter(|o| o.kind != ObservationKind::Masked)
        .collect();
    assert_eq!(aggregates.len(), 1);
    assert_eq!(aggregates[0].step, "inv.norm");
}

#[test]
fn symmetric_inverse_matches_general_inverse() {
    let (ctx, mut holder, mut rng) = setup(35);
    let sk = holder.secret_key().clone();
    let a = Matrix::from_rows(&[vec![2.0, 0.5], vec![0.5, 1.0]]).unwrap();
    let ea = enc_matrix(&ctx, &a, &mut rng);
    let mut wrng = ChaCha20Rng::seed_from_u64(36);
    let mut worker = SecureWorker::new(&ctx, &mut holder, &mut wrng);
    let v = dec_matrix(&ctx, &sk, &worker.sec_inv(&ea, &InverseParams::symmetric(32)).unwrap());
    let want = a.inverse().unwrap();
    assert!(max_diff(v.as_slice(), want.as_slice()) <= 1e-6);
}

#[test]
fn holder_messages_roundtrip_through_bytes() {
    let (ctx, _, mut rng) = setup(37);
    let c = enc(&ctx, &[1.0, 2.0], &mut rng);
    let m = Matrix::from_vec(1, 2, c.clone()).unwrap();
    let requests = [
        HolderRequest::ElemProd {
            left: c.clone(),
            right: c.clone(),
        },
        HolderRequest::MatProd {
            left: m.clone(),
            right: m.transpose(),
            upper_only: false,
        },
        HolderRequest::Rescale {
            to_scale: 7,
            values: c.clone(),
        },
        HolderRequest::NormExponent { value: c[0].clone() },
    ];
    for r in requests {
        assert_eq!(HolderRequest::from_bytes(&r.to_bytes()).unwrap(), r);
    }
    for r in [
        HolderReply::Ciphertexts(c.clone()),
        HolderReply::Exponent(-3),
        HolderReply::Refused("no".into()),
    ] {
        assert_eq!(HolderReply::from_bytes(&r.to_bytes()).unwrap(), r);
    }
}

#[derive(Clone, Debug)]
enum Op {
    Elem,
    Rescale(u32),
    Upscale(u32),
    Add,
}

fn op() -> impl Strategy<Value = Op> {
    prop_oneof![
        Just(Op::Elem),
        (1u32..40).prop_map(Op::Rescale),
        (1u32..40).prop_map(Op::Upscale),
        Just(Op::Add),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn random_op_chains_follow_the_scale_rules(ops in proptest::collection::vec(op(), 1..6), v in -4.0f64..4.0) {
        let (ctx, mut holder, mut rng) = setup(38);
        let sk = holder.secret_key().clone();
        let mut wrng = ChaCha20Rng::seed_from_u64(39);
        let mut worker = SecureWorker::new(&ctx, &mut holder, &mut wrng);
        let mut c = enc(&ctx, &[v], &mut rng).remove(0);
        let mut expected_value = ctx.codec().decrypt::<f64>(&sk, &c).unwrap();
        let max = ctx.codec().max_scale();
        for op in ops {
            let s = c.scale();
            match op {
                Op::Elem => {
                    let one = ctx.codec().encrypt(ctx.pk(), &1.0, &mut rng).unwrap();
                    match worker.sec_elem_prod(&[c.clone()], &[one]) {
                        Ok(out) => { prop_assert_eq!(out[0].scale(), s + F); c = out[0].clone(); }
                        Err(SecError::ScaleOverflow { .. }) => prop_assert!(s + F > max),
                        Err(e) => return Err(TestCaseError::fail(e.to_string())),
                    }
                }
                Op::Rescale(k) => {
                    if k < s {
                        c = worker.rescale(&[c.clone()], s - k).unwrap().remove(0);
                        prop_assert_eq!(c.scale(), s - k);
                    }
                }
                Op::Upscale(k) => {
                    if s + k <= max {
                        c = ctx.pk().upscale(&c, k);
                        prop_assert_eq!(c.scale(), s + k);
                    }
                }
                Op::Add => {
                    c = ctx.pk().hom_add(&c, &c).unwrap();
                    prop_assert_eq!(c.scale(), s);
                    expected_value *= 2.0;
                }
            }
            let got = ctx.codec().decrypt::<f64>(&sk, &c).unwrap();
            // Rescaling perturbs by at most one unit of the new scale.
            prop_assert!((got - expected_value).abs() <= 64.0 * 2f64.powi(-(c.scale().min(F) as i32)) + 1e-9);
            expected_value = got;
        }
    }
}
