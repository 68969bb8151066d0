use hitnet_core::autograd::check::gradcheck;
use hitnet_core::autograd::*;
use hitnet_core::rng::Rng;

const EPS: f64 = 1e-5;
const FLOOR: f64 = 1e-6;
const TOL: f64 = 1e-4;

fn rand_mat(r: &mut Rng, rows: usize, cols: usize, lo: f64, hi: f64) -> Mat {
    Mat::from_vec(rows, cols, (0..rows * cols).map(|_| r.uniform(lo, hi)).collect())
}

/// Project the op output onto a fixed random weight so every entry matters.
fn weighted(g: &mut Graph<'_>, y: Var, seed: u64) -> Var {
    let v = g.value(y).clone();
    let mut r = Rng::new(seed);
    let w = g.constant(rand_mat(&mut r, v.rows, v.cols, -1.0, 1.0));
    let p = g.mul(y, w);
    g.sum(p)
}

/// Five random draws of the inputs, each checked against central differences.
fn check_op(name: &str, shapes: &[(usize, usize)], range: (f64, f64), op: impl Fn(&mut Graph<'_>, &[Var]) -> Var) {
    for draw in 0..5u64 {
        let mut r = Rng::new(1000 + draw);
        let mut store = ParamStore::new();
        let ids: Vec<ParamId> = shapes
            .iter()
            .enumerate()
            .map(|(i, &(a, b))| store.add(format!("x{i}"), rand_mat(&mut r, a, b, range.0, range.1)))
            .collect();
        let rep = gradcheck(
            &store,
            |g| {
                let xs: Vec<Var> = ids.iter().map(|&i| g.param(i)).collect();
                let y = op(g, &xs);
                weighted(g, y, 77 + draw)
            },
            EPS,
            FLOOR,
            64,
            &mut r,
        );
        assert!(rep.max_rel_err < TOL, "{name}: draw {draw} rel err {}", rep.max_rel_err);
    }
}

#[test]
fn primitive_gradients() {
    let pm = (-1.5, 1.5);
    check_op("matmul", &[(3, 4), (4, 2)], pm, |g, x| g.matmul(x[0], x[1]));
    check_op("transpose", &[(3, 4)], pm, |g, x| g.transpose(x[0]));
    check_op("add", &[(3, 4), (3, 4)], pm, |g, x| g.add(x[0], x[1]));
    check_op("sub", &[(3, 4), (3, 4)], pm, |g, x| g.sub(x[0], x[1]));
    check_op("mul", &[(3, 4), (3, 4)], pm, |g, x| g.mul(x[0], x[1]));
    check_op("add_row", &[(3, 4), (1, 4)], pm, |g, x| g.add_row(x[0], x[1]));
    check_op("mul_row", &[(3, 4), (1, 4)], pm, |g, x| g.mul_row(x[0], x[1]));
    check_op("add_scalar_var", &[(3, 4), (1, 1)], pm, |g, x| g.add_scalar_var(x[0], x[1]));
    check_op("mul_scalar_var", &[(3, 4), (1, 1)], pm, |g, x| g.mul_scalar_var(x[0], x[1]));
    check_op("scale", &[(3, 4)], pm, |g, x| g.scale(x[0], -2.5));
    check_op("offset", &[(3, 4)], pm, |g, x| g.offset(x[0], 0.7));
    check_op("recip", &[(3, 4)], (0.5, 2.0), |g, x| g.recip(x[0]));
    check_op("tanh", &[(3, 4)], pm, |g, x| g.tanh(x[0]));
    check_op("sigmoid", &[(3, 4)], pm, |g, x| g.sigmoid(x[0]));
    check_op("gelu", &[(3, 4)], (-3.0, 3.0), |g, x| g.gelu(x[0]));
    check_op("softplus", &[(3, 4)], (-3.0, 3.0), |g, x| g.softplus(x[0]));
    check_op("sin", &[(3, 4)], (-4.0, 4.0), |g, x| g.sin(x[0]));
    check_op("cos", &[(3, 4)], (-4.0, 4.0), |g, x| g.cos(x[0]));
    check_op("softmax_rows", &[(3, 5)], (-2.0, 2.0), |g, x| g.softmax_rows(x[0]));
    check_op("layer_norm_rows", &[(3, 6)], (-2.0, 2.0), |g, x| g.layer_norm_rows(x[0]));
    check_op("slice_rows", &[(5, 3)], pm, |g, x| g.slice_rows(x[0], 1, 4));
    check_op("slice_cols", &[(3, 5)], pm, |g, x| g.slice_cols(x[0], 2, 5));
    check_op("concat_rows", &[(2, 3), (4, 3)], pm, |g, x| g.concat_rows(&[x[0], x[1], x[0]]));
    check_op("concat_cols", &[(3, 2), (3, 1)], pm, |g, x| g.concat_cols(&[x[1], x[0]]));
    check_op("reverse_rows", &[(4, 3)], pm, |g, x| g.reverse_rows(x[0]));
    check_op("reshape", &[(4, 3)], pm, |g, x| g.reshape(x[0], 2, 6));
    check_op("sum", &[(4, 3)], pm, |g, x| g.sum(x[0]));
    check_op("mean", &[(4, 3)], pm, |g, x| g.mean(x[0]));
    check_op("cumsum_rows", &[(5, 2)], pm, |g, x| g.cumsum_rows(x[0]));
    check_op("rope", &[(4, 6), (4, 3)], (-3.0, 3.0), |g, x| g.rope(x[0], x[1]));
}

#[test]
fn chamfer_gradient() {
    for draw in 0..5u64 {
        let mut r = Rng::new(50 + draw);
        let targets: Vec<Mat> = (0..3).map(|_| rand_mat(&mut r, 9, 3, -1.0, 1.0)).collect();
        let mut store = ParamStore::new();
        let p = store.add("p", rand_mat(&mut r, 7, 3, -1.0, 1.0));
        let rep = gradcheck(
            &store,
            |g| {
                let x = g.param(p);
                g.chamfer(x, &targets)
            },
            EPS,
            FLOOR,
            64,
            &mut r,
        );
        assert!(rep.max_rel_err < TOL, "chamfer draw {draw}: {}", rep.max_rel_err);
    }
}

#[test]
fn resample_gradient() {
    for draw in 0..5u64 {
        let mut r = Rng::new(90 + draw);
        let mut store = ParamStore::new();
        // A wobbly open curve; resampled both up and down.
        let pts: Vec<f64> = (0..12)
            .flat_map(|k| {
                let t = k as f64 * 0.5;
                [t.cos() + 0.1 * r.normal(), t.sin() + 0.1 * r.normal(), 0.2 * t + 0.1 * r.normal()]
            })
            .collect();
        let p = store.add("p", Mat::from_vec(12, 3, pts));
        for n in [7, 20] {
            let rep = gradcheck(
                &store,
                |g| {
                    let x = g.param(p);
                    let y = g.resample(x, n);
                    weighted(g, y, draw)
                },
                EPS,
                FLOOR,
                64,
                &mut r,
            );
            assert!(rep.max_rel_err < TOL, "resample n={n} draw {draw}: {}", rep.max_rel_err);
        }
    }
}

#[test]
fn backward_examples() {
    // loss = sum(W x): row i of grad(W) is x^T.
    let mut store = ParamStore::new();
    let w = store.add("w", Mat::from_vec(2, 3, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]));
    let mut g = Graph::new(&store);
    let wv = g.param(w);
    let x = g.constant(Mat::col(&[0.5, -1.0, 2.0]));
    let y = g.matmul(wv, x);
    let l = g.sum(y);
    let gr = g.backward(l).unwrap();
    assert_eq!(gr[0].data, vec![0.5, -1.0, 2.0, 0.5, -1.0, 2.0]);

    // sum(tanh(p)) at p = 0 -> ones.
    let mut store = ParamStore::new();
    let p = store.add("p", Mat::zeros(2, 2));
    let mut g = Graph::new(&store);
    let pv = g.param(p);
    let t = g.tanh(pv);
    let l = g.sum(t);
    assert_eq!(g.backward(l).unwrap()[0].data, vec![1.0; 4]);

    // Non-scalar loss is an error.
    assert!(matches!(g.backward(t), Err(GradError::NotScalar { .. })));
}

#[test]
fn param_reuse_accumulates() {
    let mut store = ParamStore::new();
    let p = store.add("p", Mat::scalar(3.0));
    let mut g = Graph::new(&store);
    let a = g.param(p);
    let b = g.param(p);
    assert_eq!(a, b);
    let y = g.mul(a, b);
    assert_eq!(g.backward(y).unwrap()[0].data, vec![6.0]);
}

#[test]
fn softmax_rows_sum_to_one_and_positive() {
    let mut r = Rng::new(3);
    let store = ParamStore::new();
    let mut g = Graph::new(&store);
    let x = g.constant(rand_mat(&mut r, 6, 9, -30.0, 30.0));
    let s = g.softmax_rows(x);
    let m = g.value(s);
    for i in 0..m.rows {
        let row = m.row(i);
        assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(row.iter().all(|&v| v > 0.0));
    }
}

#[test]
fn resample_matches_geometry() {
    let mut r = Rng::new(4);
    let m = rand_mat(&mut r, 10, 4, -1.0, 1.0);
    let store = ParamStore::new();
    let mut g = Graph::new(&store);
    let x = g.constant(m.clone());
    let y = g.resample(x, 17);
    let c = hitnet_core::geometry::PointCloud::new(4, m.data.clone());
    assert_eq!(g.value(y).data, hitnet_core::geometry::resample(&c, 17).unwrap().data);
}
