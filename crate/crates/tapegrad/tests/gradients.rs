//! Finite-difference verification of every primitive operation, plus
//! softmax invariants and composite-graph checks.

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tapegrad::{grad_check, Tape, Tensor, Var};

fn rand_tensor(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor {
    let n: usize = shape.iter().product();
    let data: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
    Tensor::param(shape, data).unwrap()
}

/// Positive-ish tensor kept away from the relu/log kinks so central
/// differences stay valid.
fn rand_positive_tensor(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor {
    let n: usize = shape.iter().product();
    let data: Vec<f64> = (0..n).map(|_| rng.gen_range(0.2..2.0)).collect();
    Tensor::param(shape, data).unwrap()
}

fn check<F>(f: F, params: &[Tensor]) -> f64
where
    F: FnMut(&mut Tape) -> Result<Var, tapegrad::Error>,
{
    grad_check(f, params, 1e-5).expect("grad_check failed")
}

#[test]
fn every_primitive_matches_finite_differences_over_100_seeds() {
    for seed in 0..100u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = rng.gen_range(1..4usize);
        let k = rng.gen_range(1..4usize);
        let n = rng.gen_range(1..4usize);

        // matmul
        let a = rand_tensor(&mut rng, &[m, k]);
        let b = rand_tensor(&mut rng, &[k, n]);
        let e = check(
            |t| {
                let (va, vb) = (t.leaf(&a), t.leaf(&b));
                let mm = t.matmul(va, vb)?;
                t.sum(mm)
            },
            &[a.clone(), b.clone()],
        );
        assert!(e < 1e-4, "matmul seed {seed}: {e}");

        // add / sub / mul, weighted so the loss is not linear in the inputs
        let x = rand_tensor(&mut rng, &[m, n]);
        let y = rand_tensor(&mut rng, &[m, n]);
        let e = check(
            |t| {
                let (vx, vy) = (t.leaf(&x), t.leaf(&y));
                let s = t.add(vx, vy)?;
                let d = t.sub(vx, vy)?;
                let p = t.mul(s, d)?;
                t.sum(p)
            },
            &[x.clone(), y.clone()],
        );
        assert!(e < 1e-4, "add/sub/mul seed {seed}: {e}");

        // add_row / mul_col
        let mat = rand_tensor(&mut rng, &[m, n]);
        let row = rand_tensor(&mut rng, &[n]);
        let col = rand_tensor(&mut rng, &[m, 1]);
        let e = check(
            |t| {
                let (vm, vr, vc) = (t.leaf(&mat), t.leaf(&row), t.leaf(&col));
                let ar = t.add_row(vm, vr)?;
                let mc = t.mul_col(ar, vc)?;
                let sq = t.mul(mc, mc)?;
                t.sum(sq)
            },
            &[mat.clone(), row.clone(), col.clone()],
        );
        assert!(e < 1e-4, "add_row/mul_col seed {seed}: {e}");

        // sigmoid / tanh
        let x = rand_tensor(&mut rng, &[m, n]);
        let e = check(
            |t| {
                let vx = t.leaf(&x);
                let s = t.sigmoid(vx)?;
                let h = t.tanh(s)?;
                t.sum(h)
            },
            &[x.clone()],
        );
        assert!(e < 1e-4, "sigmoid/tanh seed {seed}: {e}");

        // relu away from the kink
        let x = rand_positive_tensor(&mut rng, &[m, n]);
        let shift = Tensor::new(&[m, n], vec![-1.0; m * n]).unwrap();
        let e = check(
            |t| {
                let vx = t.leaf(&x);
                let vs = t.leaf(&shift);
                let moved = t.add(vx, vs)?;
                let r = t.relu(moved)?;
                let sq = t.mul(r, r)?;
                t.sum(sq)
            },
            &[x.clone()],
        );
        assert!(e < 1e-4, "relu seed {seed}: {e}");

        // log_floor above the floor
        let x = rand_positive_tensor(&mut rng, &[m, n]);
        let e = check(
            |t| {
                let vx = t.leaf(&x);
                let l = t.log_floor(vx, 1e-12)?;
                t.sum(l)
            },
            &[x.clone()],
        );
        assert!(e < 1e-4, "log_floor seed {seed}: {e}");

        // scale / transpose / reshape
        let x = rand_tensor(&mut rng, &[m, n]);
        let e = check(
            |t| {
                let vx = t.leaf(&x);
                let tr = t.transpose(vx)?;
                let sc = t.scale(tr, -1.7)?;
                let rs = t.reshape(sc, &[m * n])?;
                let sq = t.mul(rs, rs)?;
                t.sum(sq)
            },
            &[x.clone()],
        );
        assert!(e < 1e-4, "scale/transpose/reshape seed {seed}: {e}");

        // softmax_rows
        let x = rand_tensor(&mut rng, &[m, n]);
        let w = rand_tensor(&mut rng, &[m, n]);
        let e = check(
            |t| {
                let (vx, vw) = (t.leaf(&x), t.leaf(&w));
                let sm = t.softmax_rows(vx)?;
                let weighted = t.mul(sm, vw)?;
                t.sum(weighted)
            },
            &[x.clone(), w.clone()],
        );
        assert!(e < 1e-4, "softmax seed {seed}: {e}");

        // concat both axes + gather
        let a = rand_tensor(&mut rng, &[m, n]);
        let b = rand_tensor(&mut rng, &[m, k]);
        let c = rand_tensor(&mut rng, &[2, n + k]);
        let ids: Vec<usize> = (0..3).map(|_| rng.gen_range(0..m + 2)).collect();
        let e = check(
            |t| {
                let (va, vb, vc) = (t.leaf(&a), t.leaf(&b), t.leaf(&c));
                let wide = t.concat(&[va, vb], 1)?;
                let tall = t.concat(&[wide, vc], 0)?;
                let picked = t.gather_rows(tall, &ids)?;
                let sq = t.mul(picked, picked)?;
                t.sum(sq)
            },
            &[a.clone(), b.clone(), c.clone()],
        );
        assert!(e < 1e-4, "concat/gather seed {seed}: {e}");
    }
}

#[test]
fn composite_graph_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let w1 = rand_tensor(&mut rng, &[3, 4]);
    let w2 = rand_tensor(&mut rng, &[4, 2]);
    let bias = rand_tensor(&mut rng, &[2]);
    let x = rand_tensor(&mut rng, &[2, 3]);
    let params = [w1.clone(), w2.clone(), bias.clone(), x.clone()];
    let e = check(
        |t| {
            let (vw1, vw2, vb, vx) = (t.leaf(&w1), t.leaf(&w2), t.leaf(&bias), t.leaf(&x));
            let h = t.matmul(vx, vw1)?;
            let h = t.tanh(h)?;
            let o = t.matmul(h, vw2)?;
            let o = t.add_row(o, vb)?;
            let p = t.softmax_rows(o)?;
            let lp = t.log_floor(p, 1e-12)?;
            let s = t.sum(lp)?;
            t.scale(s, -1.0)
        },
        &params,
    );
    assert!(e < 1e-4, "composite graph: {e}");
}

#[test]
fn full_gradient_flows_through_repeated_leaf_use() {
    // The same tensor used twice must receive the sum of both paths.
    let x = Tensor::param(&[2], vec![1.0, 2.0]).unwrap();
    let mut tape = Tape::new();
    let v = tape.leaf(&x);
    let doubled = tape.add(v, v).unwrap();
    let loss = tape.sum(doubled).unwrap();
    tape.backward(loss).unwrap();
    assert_eq!(x.grad().unwrap(), vec![2.0, 2.0]);
}

proptest! {
    #[test]
    fn softmax_rows_sum_to_one_and_shift_invariant(
        rows in 1usize..5,
        cols in 1usize..6,
        seed in 0u64..1000,
        shift in -50.0f64..50.0,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data: Vec<f64> = (0..rows * cols).map(|_| rng.gen_range(-10.0..10.0)).collect();
        let shifted: Vec<f64> = data.iter().map(|x| x + shift).collect();

        let mut tape = Tape::new();
        let a = tape.constant(&[rows, cols], data).unwrap();
        let b = tape.constant(&[rows, cols], shifted).unwrap();
        let sa = tape.softmax_rows(a).unwrap();
        let sb = tape.softmax_rows(b).unwrap();

        for r in 0..rows {
            let row = &tape.data(sa)[r * cols..(r + 1) * cols];
            let total: f64 = row.iter().sum();
            prop_assert!((total - 1.0).abs() < 1e-9);
            prop_assert!(row.iter().all(|&v| v >= 0.0));
        }
        for (x, y) in tape.data(sa).iter().zip(tape.data(sb)) {
            prop_assert!((x - y).abs() < 1e-9);
        }
    }

    #[test]
    fn concat_then_split_gradient_is_identity(
        la in 1usize..5,
        lb in 1usize..5,
        seed in 0u64..1000,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = rand_tensor(&mut rng, &[la]);
        let b = rand_tensor(&mut rng, &[lb]);
        let mut tape = Tape::new();
        let (va, vb) = (tape.leaf(&a), tape.leaf(&b));
        let cat = tape.concat(&[va, vb], 0).unwrap();
        let loss = tape.sum(cat).unwrap();
        tape.backward(loss).unwrap();
        prop_assert_eq!(a.grad().unwrap(), vec![1.0; la]);
        prop_assert_eq!(b.grad().unwrap(), vec![1.0; lb]);
    }
}
