use std::f64::consts::PI;

use hitnet_core::geometry::*;
use hitnet_core::hit_spec::{parse_hit_spec, HitSpec, Word};
use hitnet_core::rng::Rng;

fn spec(name: &str) -> HitSpec {
    let src = match name {
        "torus" => include_str!("../../../specs/torus.hit"),
        "wedge" => include_str!("../../../specs/wedge.hit"),
        _ => include_str!("../../../specs/klein.hit"),
    };
    parse_hit_spec(src).unwrap()
}

fn space(name: &str) -> (HitSpec, Space) {
    let s = spec(name);
    let sp = Space::from_spec(&s).unwrap();
    (s, sp)
}

fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
}

#[test]
fn embedding_examples() {
    assert!(close(&torus_point(0.0, 0.0), &[2.8, 0.0, 0.0], 1e-12));
    assert!(close(&torus_point(PI, 0.0), &[-2.8, 0.0, 0.0], 1e-12));
    assert!(close(&torus_point(0.0, PI), &[1.2, 0.0, 0.0], 1e-12));
    assert!(close(&wedge_point(Circle::A, 0.0), &[0.0; 3], 0.0));
    assert!(close(&wedge_point(Circle::A, PI), &[-2.0, 0.0, 0.0], 1e-12));
    assert!(close(&wedge_point(Circle::B, 0.0), &[0.0; 3], 0.0));
    assert!(close(&klein_point(0.0, 0.0), &[3.0, 0.0, 0.0, 0.0], 0.0));
    assert!(close(&klein_point(0.0, PI), &[1.0, 0.0, 0.0, 0.0], 1e-12));
}

#[test]
fn klein_identification() {
    let mut r = Rng::new(5);
    for _ in 0..100 {
        let v = r.uniform(-PI, PI);
        let u = r.uniform(-PI, PI);
        assert!(close(&klein_point(2.0 * PI, v), &klein_point(0.0, -v), 1e-12));
        assert!(close(&klein_point(u + 2.0 * PI, v), &klein_point(u, -v), 1e-12));
    }
}

#[test]
fn ground_truth_examples() {
    let (t, ts) = space("torus");
    let mut r = Rng::new(0);
    let a = ground_truth_loop(&ts, &t.parse_word("a").unwrap(), 32, 0.0, 0.0, &mut r);
    assert_eq!(a.cloud.len(), 32);
    assert!(close(a.cloud.point(0), &[2.8, 0.0, 0.0], 0.0));
    for p in a.cloud.points() {
        assert!(p[2].abs() < 1e-12); // v = 0 throughout
    }

    let (w, ws) = space("wedge");
    let ab = ground_truth_loop(&ws, &w.parse_word("ab").unwrap(), 32, 0.0, 0.0, &mut r);
    assert_eq!(ab.cloud.len(), 64);
    assert_eq!(ab.cloud.segment_count(), Some(2));
    assert!(close(ab.cloud.point(0), &[0.0; 3], 1e-12));
    assert!(close(ab.cloud.point(32), &[0.0; 3], 1e-12));
    for i in 0..32 {
        assert!(ab.cloud.point(i)[2].abs() < 1e-12); // circle A: z = 0
        assert!(ab.cloud.point(32 + i)[0].abs() < 1e-12); // circle B: x = 0
    }

    let noisy = ground_truth_loop(&ts, &t.parse_word("a").unwrap(), 32, 0.0, 0.02, &mut r);
    for (x, y) in noisy.cloud.data.iter().zip(&a.cloud.data) {
        assert!((x - y).abs() < 6.0 * 0.02);
    }
    assert_ne!(noisy.cloud.data, a.cloud.data);

    let e = ground_truth_loop(&ts, &Word::identity(), 32, 0.0, 0.0, &mut r);
    assert_eq!(e.cloud.len(), 1);
    assert_eq!(e.cloud.segment_count(), None);
}

#[test]
fn loops_close_and_lie_on_surface() {
    let mut r = Rng::new(1);
    for name in ["torus", "wedge", "klein"] {
        let (s, sp) = space(name);
        for w in hitnet_core::hit_spec::enumerate_words(&s, 3, true).unwrap() {
            let g = ground_truth_loop(&sp, &w, 32, 0.0, 0.0, &mut r).cloud;
            let b = g.bounds.clone().unwrap();
            for i in 1..b.len() - 1 {
                assert!(close(g.point(b[i] - 1), g.point(b[i]), 1e-9));
            }
            assert!(close(g.point(0), g.point(g.len() - 1), 1e-9));
            assert!(close(g.point(0), &sp.basepoint(), 1e-9));
            if name == "torus" {
                for p in g.points() {
                    let rho = (p[0] * p[0] + p[1] * p[1]).sqrt();
                    assert!(((rho - 2.0).powi(2) + p[2] * p[2] - 0.64).abs() < 1e-9);
                }
            }
        }
    }
}

#[test]
fn inverse_is_reversal() {
    let mut r = Rng::new(2);
    for name in ["torus", "wedge", "klein"] {
        let (s, sp) = space(name);
        for g in ["a", "b"] {
            let fwd = ground_truth_loop(&sp, &s.parse_word(g).unwrap(), 32, 0.0, 0.0, &mut r).cloud;
            let inv = ground_truth_loop(&sp, &s.parse_word(&format!("{g}^-1")).unwrap(), 32, 0.0, 0.0, &mut r).cloud;
            assert_eq!(inv.data, fwd.reversed().data);
        }
    }
}

#[test]
fn klein_flip_lands_on_identified_points() {
    // Going once around b (u: 0 -> 2 pi) and then tracing a at v is the same
    // point set as tracing a at -v from the start.
    let mut r = Rng::new(3);
    for _ in 0..20 {
        let v = r.uniform(0.0, 2.0 * PI);
        assert!(close(&klein_point(2.0 * PI, v), &klein_point(0.0, -v), 1e-12));
    }
}

#[test]
fn phase_shifts_start() {
    let (s, sp) = space("torus");
    let mut r = Rng::new(0);
    let g = ground_truth_loop(&sp, &s.parse_word("a").unwrap(), 32, PI, 0.0, &mut r).cloud;
    assert!(close(g.point(0), &[-2.8, 0.0, 0.0], 1e-12));
}

#[test]
fn resample_examples() {
    let c = PointCloud::new(3, vec![0.0, 0.0, 0.0, 1.0, 0.0, 0.0]);
    let r = resample(&c, 3).unwrap();
    assert!(close(&r.data, &[0.0, 0.0, 0.0, 0.5, 0.0, 0.0, 1.0, 0.0, 0.0], 1e-15));

    // Uniform polyline resampled to its own size is the identity.
    let pts: Vec<f64> = (0..10).flat_map(|i| [i as f64 * 0.3, 1.0, -2.0]).collect();
    let c = PointCloud::new(3, pts);
    assert!(close(&resample(&c, 10).unwrap().data, &c.data, 1e-9));

    // Circle with 64 samples -> 32: points stay within the sagitta bound.
    let circ: Vec<f64> = (0..64)
        .flat_map(|k| {
            let t = 2.0 * PI * k as f64 / 63.0;
            [t.cos(), t.sin(), 0.0]
        })
        .collect();
    let r = resample(&PointCloud::new(3, circ.clone()), 32).unwrap();
    for p in r.points() {
        assert!((1.0 - (p[0] * p[0] + p[1] * p[1]).sqrt()).abs() < 0.01);
    }
    assert_eq!(r.point(0), &circ[0..3]);
    assert_eq!(r.point(31), &circ[63 * 3..]);

    // Degenerate cloud.
    let d = PointCloud::new(3, vec![1.0, 2.0, 3.0, 1.0, 2.0, 3.0]);
    let r = resample(&d, 4).unwrap();
    assert_eq!(r.data, [1.0, 2.0, 3.0].repeat(4));
    assert!(resample(&PointCloud::new(3, vec![0.0; 3]), 4).is_err());
}

#[test]
fn resample_skips_zero_length_steps() {
    let c = PointCloud::new(3, vec![0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 1.0, 0.0, 0.0]);
    let r = resample(&c, 5).unwrap();
    let xs: Vec<f64> = r.points().map(|p| p[0]).collect();
    assert!(close(&xs, &[0.0, 0.25, 0.5, 0.75, 1.0], 1e-15));
}

#[test]
fn split_examples() {
    let c = PointCloud::new(3, (0..64 * 3).map(|x| x as f64).collect());
    let s = split_segments(&c, 2).unwrap();
    assert_eq!(s.len(), 2);
    assert_eq!(s[0].len(), 32);
    assert_eq!(s[1].point(0), c.point(32));
    assert_eq!(split_segments(&c, 1).unwrap()[0].data, c.data);
    assert!(split_segments(&c, 5).is_err());

    let (w, ws) = space("wedge");
    let mut r = Rng::new(9);
    let segs: Vec<PointCloud> = w
        .parse_word("a b b a^-1")
        .unwrap()
        .letters
        .iter()
        .map(|&l| ws.letter_segment(l, &inclusive_grid(7), 0.3))
        .collect();
    let cat = PointCloud::concat(&segs);
    assert_eq!(split_segments(&cat, 4).unwrap(), segs);
    let _ = &mut r;

    let uneven = PointCloud::new(3, vec![0.0; 64 * 3]).with_bounds(even_bounds(64, 10));
    let parts = split_segments(&uneven, 10).unwrap();
    assert_eq!(parts.iter().map(|p| p.len()).sum::<usize>(), 64);
}

#[test]
fn space_from_spec_channels() {
    let (_, k) = space("klein");
    // a is the flipped generator on the v channel, b drives u.
    assert_eq!(k.channel_of, vec![1, 0]);
    let (_, t) = space("torus");
    assert_eq!(t.channel_of, vec![0, 1]);
    let bad = parse_hit_spec("space t dim 4\ngenerator a b\nembedding torus\n").unwrap();
    assert!(Space::from_spec(&bad).is_err());
}
