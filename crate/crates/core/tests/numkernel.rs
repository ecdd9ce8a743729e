use contrafraud::numkernel::{gradcheck, Tape, Tensor};
use contrafraud::Result;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const H: f64 = 1e-5;
const TOL: f64 = 1e-4;
const INSTANCES: u64 = 20;

fn uniform(rng: &mut ChaCha8Rng, r: usize, c: usize, lo: f64, hi: f64) -> Tensor {
    Tensor::matrix(r, c, (0..r * c).map(|_| rng.random_range(lo..hi)).collect()).unwrap()
}

/// Projects a node onto a fixed random direction to get a scalar.
fn reduce(tape: &mut Tape, y: usize, seed: u64) -> Result<usize> {
    let shape = tape.value(y).shape().to_vec();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let w = uniform(&mut rng, shape[0], shape[1], -1.0, 1.0);
    let p = tape.mul_const(y, w)?;
    tape.sum(p)
}

fn check<F>(name: &str, shapes: &[(usize, usize)], lo: f64, hi: f64, f: F)
where
    F: Fn(&mut Tape, &[usize]) -> Result<usize>,
{
    for seed in 0..INSTANCES {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let inputs: Vec<Tensor> = shapes.iter().map(|&(r, c)| uniform(&mut rng, r, c, lo, hi)).collect();
        let err = gradcheck(&inputs, H, |t, x| {
            let y = f(t, x)?;
            if t.value(y).len() == 1 {
                Ok(y)
            } else {
                reduce(t, y, seed)
            }
        })
        .unwrap();
        assert!(err < TOL, "{name} seed {seed}: relative error {err}");
    }
}

#[test]
fn matmul_gradient() {
    check("matmul", &[(3, 4), (4, 2)], -2.0, 2.0, |t, x| t.matmul(x[0], x[1]));
}

#[test]
fn elementwise_binary_gradients() {
    check("add", &[(2, 3), (2, 3)], -2.0, 2.0, |t, x| t.add(x[0], x[1]));
    check("sub", &[(2, 3), (2, 3)], -2.0, 2.0, |t, x| t.sub(x[0], x[1]));
    check("mul", &[(2, 3), (2, 3)], -2.0, 2.0, |t, x| t.mul(x[0], x[1]));
    check("add_row", &[(4, 3), (1, 3)], -2.0, 2.0, |t, x| t.add_row(x[0], x[1]));
}

#[test]
fn scalar_multiply_and_constants() {
    check("scale", &[(3, 3)], -2.0, 2.0, |t, x| t.scale(x[0], -1.7));
    check("mul_const", &[(2, 2)], -2.0, 2.0, |t, x| {
        t.mul_const(x[0], Tensor::matrix(2, 2, vec![0.0, 2.0, -1.0, 0.5]).unwrap())
    });
    check("add_const", &[(2, 2)], -2.0, 2.0, |t, x| {
        let y = t.add_const(x[0], Tensor::matrix(2, 2, vec![0.0, 2.0, -1.0, 0.5]).unwrap())?;
        t.mul(y, y)
    });
}

#[test]
fn softmax_gradient_and_rows() {
    check("softmax_rows", &[(3, 5)], -2.0, 2.0, |t, x| t.softmax_rows(x[0]));
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut tape = Tape::new();
    let x = tape.input("x", uniform(&mut rng, 6, 9, -30.0, 30.0));
    let y = tape.softmax_rows(x).unwrap();
    for r in 0..6 {
        let row = tape.value(y).row_slice(r);
        assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(row.iter().all(|&p| p > 0.0));
    }
}

#[test]
fn layer_norm_gradient() {
    check("layer_norm_rows", &[(3, 6), (1, 6), (1, 6)], -2.0, 2.0, |t, x| {
        t.layer_norm_rows(x[0], x[1], x[2], 1e-5)
    });
}

#[test]
fn activation_gradients() {
    check("gelu", &[(3, 4)], -2.0, 2.0, |t, x| t.gelu(x[0]));
    check("relu", &[(3, 4)], -2.0, 2.0, |t, x| t.relu(x[0]));
    check("sigmoid", &[(3, 4)], -2.0, 2.0, |t, x| t.sigmoid(x[0]));
    check("exp", &[(3, 4)], -2.0, 2.0, |t, x| t.exp(x[0]));
    // log is only defined on positive inputs
    check("log", &[(3, 4)], 0.1, 2.0, |t, x| t.log(x[0]));
}

#[test]
fn gather_and_pool_gradients() {
    check("gather", &[(5, 3)], -2.0, 2.0, |t, x| t.gather(x[0], vec![4, 0, 4, 2]));
    check("masked_mean_rows", &[(5, 3)], -2.0, 2.0, |t, x| {
        t.masked_mean_rows(x[0], vec![true, false, true, true, false])
    });
}

#[test]
fn cosine_gradient() {
    check("cosine_sim", &[(1, 6), (1, 6)], -2.0, 2.0, |t, x| {
        t.cosine_sim(x[0], x[1])
    });
}

#[test]
fn structural_gradients() {
    check("transpose", &[(2, 5)], -2.0, 2.0, |t, x| t.transpose(x[0]));
    check("slice_cols", &[(3, 6)], -2.0, 2.0, |t, x| t.slice_cols(x[0], 2, 3));
    check("concat_cols", &[(3, 2), (3, 4)], -2.0, 2.0, |t, x| {
        t.concat_cols(vec![x[0], x[1]])
    });
}

#[test]
fn reduction_gradients() {
    check("sum", &[(3, 3)], -2.0, 2.0, |t, x| {
        let y = t.mul(x[0], x[0])?;
        t.sum(y)
    });
    check("mean", &[(3, 3)], -2.0, 2.0, |t, x| {
        let y = t.mul(x[0], x[0])?;
        t.mean(y)
    });
    check("logsumexp", &[(1, 7)], -2.0, 2.0, |t, x| t.logsumexp(x[0]));
    check("bce_with_logits", &[(5, 1)], -2.0, 2.0, |t, x| {
        t.bce_with_logits(x[0], Tensor::matrix(5, 1, vec![1.0, 0.0, 0.0, 1.0, 1.0]).unwrap())
    });
}

#[test]
fn eval_replays_bit_exactly() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let a = uniform(&mut rng, 4, 5, -2.0, 2.0);
    let mut tape = Tape::new();
    let x = tape.input("x", a.clone());
    let w = tape.param("w", uniform(&mut rng, 5, 5, -1.0, 1.0));
    let h = tape.matmul(x, w).unwrap();
    let s = tape.softmax_rows(h).unwrap();
    let g = tape.gelu(s).unwrap();
    tape.mark_output("g", g);
    let recorded = tape.value(g).clone();
    let bindings = [("x".to_string(), a)].into_iter().collect();
    let first = tape.eval(&bindings).unwrap();
    let second = tape.eval(&bindings).unwrap();
    assert_eq!(first["g"], recorded);
    assert_eq!(first["g"], second["g"]);
}

proptest! {
    #[test]
    fn softmax_rows_are_distributions(v in proptest::collection::vec(-50.0f64..50.0, 1..12)) {
        let mut tape = Tape::new();
        let x = tape.input("x", Tensor::row(&v).unwrap());
        let y = tape.softmax_rows(x).unwrap();
        let row = tape.value(y).data();
        prop_assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(row.iter().all(|&p| p > 0.0));
    }
}
