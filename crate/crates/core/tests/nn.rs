use hitnet_core::autograd::check::gradcheck;
use hitnet_core::autograd::*;
use hitnet_core::nn::*;
use hitnet_core::optim::*;
use hitnet_core::rng::Rng;

fn zero_all(store: &mut ParamStore) {
    for t in store.tensors_mut() {
        t.data.iter_mut().for_each(|x| *x = 0.0);
    }
}

#[test]
fn mlp_zero_and_identity() {
    let mut r = Rng::new(1);
    let mut store = ParamStore::new();
    let mlp = Mlp::new(&mut store, "m", &[3, 8, 2], &mut r);
    zero_all(&mut store);
    let mut g = Graph::new(&store);
    let x = g.constant(Mat::from_vec(2, 3, vec![1.0, -2.0, 0.5, 3.0, 0.1, -0.4]));
    let y = mlp.apply(&mut g, x);
    assert!(g.value(y).data.iter().all(|&v| v == 0.0));

    let mut store = ParamStore::new();
    let mlp = Mlp::new(&mut store, "m", &[1, 1, 1], &mut r);
    zero_all(&mut store);
    store.get_mut(mlp.layers[0].w).data[0] = 1.0;
    store.get_mut(mlp.layers[1].w).data[0] = 1.0;
    let xs = [-2.0, -0.3, 0.0, 0.7, 4.0];
    let mut g = Graph::new(&store);
    let x = g.constant(Mat::col(&xs));
    let y = mlp.apply(&mut g, x);
    for (a, b) in g.value(y).data.iter().zip(xs) {
        assert!((a - b.tanh()).abs() <= 4.0 * f64::EPSILON * b.tanh().abs().max(1e-300));
    }
}

#[test]
fn mlp_param_count_closed_form() {
    let mut r = Rng::new(2);
    let mut store = ParamStore::new();
    let mlp = Mlp::new(&mut store, "m", &[1, 128, 128, 3], &mut r);
    let expect = (128 + 128) + (128 * 128 + 128) + (128 * 3 + 3);
    assert_eq!(mlp.param_count(), expect);
    assert_eq!(store.count(), expect);
}

#[test]
fn gru_identities() {
    let mut r = Rng::new(3);
    let mut store = ParamStore::new();
    let gru = Gru::new(&mut store, "g", 4, 6, &mut r);
    assert_eq!(store.count(), gru.param_count());
    zero_all(&mut store);
    let mut g = Graph::new(&store);
    let h = g.constant(Mat::zeros(1, 6));
    let x = g.constant(Mat::from_vec(1, 4, vec![0.3, -1.0, 2.0, 0.5]));
    let h2 = gru.apply(&mut g, h, x);
    assert!(g.value(h2).data.iter().all(|&v| v == 0.0));

    // Saturated update gate keeps the state.
    let mut store = ParamStore::new();
    let gru = Gru::new(&mut store, "g", 4, 6, &mut r);
    store.get_mut(gru.wz.b).data.iter_mut().for_each(|b| *b = 50.0);
    let hv = Mat::from_vec(1, 6, vec![0.1, -0.2, 0.3, 0.9, -0.5, 0.0]);
    let mut g = Graph::new(&store);
    let h = g.constant(hv.clone());
    let x = g.constant(Mat::from_vec(1, 4, vec![0.3, -1.0, 2.0, 0.5]));
    let h2 = gru.apply(&mut g, h, x);
    for (a, b) in g.value(h2).data.iter().zip(&hv.data) {
        assert!((a - b).abs() < 1e-12);
    }
}

#[test]
fn layer_gradients() {
    for draw in 0..5u64 {
        let mut r = Rng::new(10 + draw);
        let mut store = ParamStore::new();
        let mlp = Mlp::new(&mut store, "m", &[2, 5, 5, 3], &mut r);
        let gru = Gru::new(&mut store, "g", 3, 4, &mut r);
        let block = Block::new(&mut store, "b", 8, 2, 12, &mut r).unwrap();
        let x = store.add("x", uniform_mat(&mut r, 4, 2, 1.0));
        let th = store.add("th", uniform_mat(&mut r, 4, 4, 3.0));
        let rep = gradcheck(
            &store,
            |g| {
                let xv = g.param(x);
                let y = mlp.apply(g, xv); // 4 x 3
                let mut h = g.constant(Mat::zeros(1, 4));
                for i in 0..4 {
                    let row = g.slice_rows(y, i, i + 1);
                    h = gru.apply(g, h, row);
                }
                let y2 = g.concat_cols(&[y, y, y]); // 4 x 9
                let y2 = g.slice_cols(y2, 0, 8);
                let rot = g.param(th);
                let z = block.apply(g, y2, Some(rot));
                let s1 = g.mean(z);
                let s2 = g.sum(h);
                let s = g.add(s1, s2);
                let sq = g.mul(s, s);
                g.add(sq, s)
            },
            1e-5,
            1e-6,
            24,
            &mut r,
        );
        assert!(rep.max_rel_err < 1e-4, "draw {draw}: {}", rep.max_rel_err);
    }
}

#[test]
fn attention_singleton_and_symmetry() {
    let mut r = Rng::new(4);
    let mut store = ParamStore::new();
    let att = Attention::new(&mut store, "a", 8, 2, &mut r).unwrap();
    assert!(Attention::new(&mut store, "bad", 8, 3, &mut r).is_err());
    assert_eq!(att.param_count(), 4 * (64 + 8));

    // n = 1: alpha is exactly 1, output = h + O(V h).
    let mut g = Graph::new(&store);
    let h = g.constant(uniform_mat(&mut r, 1, 8, 1.0));
    let (y, alphas) = att.attend(&mut g, h, None);
    for a in &alphas {
        assert_eq!(g.value(*a).data, vec![1.0]);
    }
    let v = att.v.apply(&mut g, h);
    let ov = att.o.apply(&mut g, v);
    assert_eq!(g.value(y).data, g.value(ov).data);
    let res = att.apply(&mut g, h, None);
    let expect: Vec<f64> = g.value(h).data.iter().zip(&g.value(ov).data).map(|(a, b)| a + b).collect();
    assert_eq!(g.value(res).data, expect);

    // Identical tokens: uniform weights.
    let row = uniform_mat(&mut r, 1, 8, 1.0);
    let mut g = Graph::new(&store);
    let x = g.constant(Mat::from_vec(5, 8, row.data.repeat(5)));
    let (_, alphas) = att.attend(&mut g, x, None);
    for a in alphas {
        for &v in &g.value(a).data {
            assert!((v - 0.2).abs() < 1e-12);
        }
    }
}

#[test]
fn attention_strictly_positive() {
    for seed in 0..20 {
        let mut r = Rng::new(100 + seed);
        let mut store = ParamStore::new();
        let att = Attention::new(&mut store, "a", 16, 4, &mut r).unwrap();
        let mut g = Graph::new(&store);
        let x = g.constant(uniform_mat(&mut r, 4, 16, 2.0));
        let (_, alphas) = att.attend(&mut g, x, None);
        for a in alphas {
            assert!(g.value(a).data.iter().all(|&v| v > 0.0));
        }
    }
}

#[test]
fn adamw_decay_only() {
    let mut store = ParamStore::new();
    store.add("p", Mat::from_vec(1, 3, vec![1.0, -2.0, 0.5]));
    let mut opt = AdamW::new(&store, 1e-3, 1e-4);
    let before = store.tensors()[0].clone();
    opt.step(&mut store, &[Mat::zeros(1, 3)]);
    let k = 1.0 - 1e-3 * 1e-4;
    for (a, b) in store.tensors()[0].data.iter().zip(&before.data) {
        assert_eq!(*a, b * k);
    }

    let mut opt = AdamW::new(&store, 0.0, 0.0);
    let before = store.tensors()[0].clone();
    opt.step(&mut store, &[Mat::from_vec(1, 3, vec![5.0, -1.0, 2.0])]);
    assert_eq!(store.tensors()[0], before);
}

/// Reference AdamW written out per scalar, independent of the Mat code.
fn reference_adamw(p0: [f64; 3], g: [f64; 3], steps: usize, lr: f64, wd: f64) -> [f64; 3] {
    let (b1, b2, eps) = (0.9f64, 0.999f64, 1e-8);
    let mut p = p0;
    let mut m = [0.0; 3];
    let mut v = [0.0; 3];
    for t in 1..=steps {
        for i in 0..3 {
            p[i] -= lr * wd * p[i];
            m[i] = b1 * m[i] + (1.0 - b1) * g[i];
            v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
            let mh = m[i] / (1.0 - b1.powi(t as i32));
            let vh = v[i] / (1.0 - b2.powi(t as i32));
            p[i] -= lr * mh / (vh.sqrt() + eps);
        }
    }
    p
}

#[test]
fn adamw_matches_reference() {
    let p0 = [0.3, -1.2, 2.0];
    let g = [0.5, -3.0, 1e-3];
    let mut store = ParamStore::new();
    store.add("p", Mat::from_vec(1, 3, p0.to_vec()));
    let mut opt = AdamW::new(&store, 1e-2, 1e-2);
    for _ in 0..200 {
        opt.step(&mut store, &[Mat::from_vec(1, 3, g.to_vec())]);
    }
    let want = reference_adamw(p0, g, 200, 1e-2, 1e-2);
    for (a, b) in store.tensors()[0].data.iter().zip(want) {
        assert!((a - b).abs() < 1e-12, "{a} vs {b}");
    }
    // Constant gradients give sign-like steps of size about lr.
    let mut store = ParamStore::new();
    store.add("p", Mat::from_vec(1, 3, vec![0.0; 3]));
    let mut opt = AdamW::new(&store, 1e-2, 0.0);
    for _ in 0..50 {
        let before = store.tensors()[0].clone();
        opt.step(&mut store, &[Mat::from_vec(1, 3, g.to_vec())]);
        for (i, (a, b)) in store.tensors()[0].data.iter().zip(&before.data).enumerate() {
            let d = a - b;
            assert!(d.abs() <= 1e-2 * 1.0001);
            assert_eq!(d.signum(), -g[i].signum());
        }
    }
}

#[test]
fn cosine_schedule() {
    let s = LrSchedule { base_lr: 1e-3, warmup_epochs: 20, total_epochs: 500 };
    assert_eq!(cosine_lr(&s, 20), 1e-3);
    assert_eq!(cosine_lr(&s, 19), 1e-3);
    assert_eq!(cosine_lr(&s, 0), 1e-3 / 20.0);
    assert_eq!(cosine_lr(&s, 500), 0.0);
    assert!((cosine_lr(&s, 260) - 0.5e-3).abs() < 1e-15);
    let mut prev = f64::INFINITY;
    for e in 20..=500 {
        let lr = cosine_lr(&s, e);
        assert!(lr <= prev);
        prev = lr;
    }
}
