//! Operators against explicit dense matrices built from their definitions.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use steerdip::grid::dot;
use steerdip::operators::{ConvKernel, LinearOperator, Measurement, RadonGeometry};
use steerdip::ImageGrid;

mod common;

use common::{operators_at, random_vec};

#[test]
fn dense_oracles_at_8x8() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    for (op, dense) in operators_at(8, &mut rng) {
        let dense = dense.unwrap();
        assert_eq!((dense.rows, dense.cols), (op.range_len(), op.domain_len()));
        for _ in 0..5 {
            let x = random_vec(&mut rng, op.domain_len());
            let y = random_vec(&mut rng, op.range_len());
            let mut hx = vec![0.0; op.range_len()];
            op.apply_slice(&x, &mut hx);
            let mut hty = vec![0.0; op.domain_len()];
            op.adjoint_slice(&y, &mut hty);
            for (a, b) in hx.iter().zip(dense.mul(&x)) {
                assert!((a - b).abs() < 1e-12, "{:?} forward", op.kind());
            }
            for (a, b) in hty.iter().zip(dense.mul_t(&y)) {
                assert!((a - b).abs() < 1e-12, "{:?} adjoint", op.kind());
            }
        }
    }
}

#[test]
fn dot_product_identity_100_trials() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for n in [8, 16] {
        for (op, _) in operators_at(n, &mut rng) {
            for _ in 0..100 {
                let x = random_vec(&mut rng, op.domain_len());
                let y = random_vec(&mut rng, op.range_len());
                let mut hx = vec![0.0; op.range_len()];
                op.apply_slice(&x, &mut hx);
                let mut hty = vec![0.0; op.domain_len()];
                op.adjoint_slice(&y, &mut hty);
                let (lhs, rhs) = (dot(&hx, &y), dot(&x, &hty));
                let scale = lhs.abs().max(rhs.abs()).max(1e-300);
                assert!((lhs - rhs).abs() / scale <= 1e-8, "{:?} n={n}: {lhs} vs {rhs}", op.kind());
            }
        }
    }
}

#[test]
fn linearity() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for (op, _) in operators_at(8, &mut rng) {
        let x = random_vec(&mut rng, 64);
        let z = random_vec(&mut rng, 64);
        let (a, b) = (rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
        let combo: Vec<f64> = x.iter().zip(&z).map(|(p, q)| a * p + b * q).collect();
        let run = |v: &[f64]| {
            let mut out = vec![0.0; op.range_len()];
            op.apply_slice(v, &mut out);
            out
        };
        let (hx, hz, hc) = (run(&x), run(&z), run(&combo));
        for i in 0..hc.len() {
            assert!((hc[i] - (a * hx[i] + b * hz[i])).abs() <= 1e-10);
        }
    }
}

#[test]
fn radon_scales_and_identity_roundtrip() {
    let geometry = RadonGeometry::angular_range(0.0, 180.0, 15.0, 12).unwrap();
    let op = LinearOperator::radon(geometry);
    let x = ImageGrid::from_fn(12, 12, |r, c| ((r * 3 + c) % 5) as f64 * 0.2);
    let y = op.apply(&x).unwrap();
    let y3 = op.apply(&x.scaled(3.0)).unwrap();
    for (a, b) in y.values().iter().zip(y3.values()) {
        assert!((3.0 * a - b).abs() <= 1e-12 * b.abs().max(1.0));
    }
    let ident = LinearOperator::identity(12, 12);
    assert_eq!(ident.adjoint(&ident.apply(&x).unwrap()).unwrap(), x);
}

/// Bilinear interpolant of the pixel samples, zero beyond the outermost pixel centers' neighbours.
fn bilinear(image: &ImageGrid, x: f64, y: f64) -> f64 {
    let n = image.height() as f64;
    // continuous column / row coordinates of the sample grid
    let cf = x + (n - 1.0) / 2.0;
    let rf = (n - 1.0) / 2.0 - y;
    let (c0, r0) = (cf.floor(), rf.floor());
    let (tc, tr) = (cf - c0, rf - r0);
    let px = |r: f64, c: f64| {
        if r < 0.0 || c < 0.0 || r >= n || c >= n {
            0.0
        } else {
            image.get(r as usize, c as usize)
        }
    };
    (1.0 - tr) * ((1.0 - tc) * px(r0, c0) + tc * px(r0, c0 + 1.0))
        + tr * ((1.0 - tc) * px(r0 + 1.0, c0) + tc * px(r0 + 1.0, c0 + 1.0))
}

/// Line integral along the ray `{(x, y) : x cos t + y sin t = s}` by fine uniform sampling.
fn ray_march(image: &ImageGrid, deg: f64, s: f64) -> f64 {
    let t = deg.to_radians();
    let (c, si) = (t.cos(), t.sin());
    let reach = image.height() as f64;
    let step = 1e-3;
    let mut total = 0.0;
    let mut l = -reach;
    while l < reach {
        total += bilinear(image, s * c - l * si, s * si + l * c) * step;
        l += step;
    }
    total
}

#[test]
fn radon_matches_ray_marching_on_a_smooth_object() {
    let n = 16;
    let sigma: f64 = 4.0;
    let image = ImageGrid::from_fn(n, n, |row, col| {
        let x = col as f64 - (n as f64 - 1.0) / 2.0;
        let y = (n as f64 - 1.0) / 2.0 - row as f64;
        (-(x * x + y * y) / (2.0 * sigma * sigma)).exp()
    });
    let angles: Vec<f64> = (0..8).map(|k| k as f64 * 22.5).collect();
    let geometry = RadonGeometry::new(angles.clone(), n).unwrap();
    let d = geometry.detector_count();
    let op = LinearOperator::radon(geometry);
    let sino: Measurement = op.apply(&image).unwrap();
    let peak = sino.values().iter().cloned().fold(0.0, f64::max);
    let mut checked = 0;
    for (v, &deg) in angles.iter().enumerate() {
        for bin in 0..d {
            let s = bin as f64 - (d as f64 - 1.0) / 2.0;
            let oracle = ray_march(&image, deg, s);
            let got = sino.values()[v * d + bin];
            // rays grazing the object carry almost no mass; their relative error is meaningless
            if oracle < 0.05 * peak {
                continue;
            }
            checked += 1;
            let rel = (got - oracle).abs() / oracle;
            assert!(rel <= 0.02, "angle {deg} bin {bin}: {got} vs {oracle} ({rel})");
        }
    }
    assert!(checked >= 8 * 8, "only {checked} rays checked");
}

#[test]
fn unit_impulse_blur_spreads_kernel() {
    let op = LinearOperator::blur(ConvKernel::uniform(3).unwrap(), (9, 9)).unwrap();
    let mut x = ImageGrid::zeros(9, 9);
    x.set(4, 4, 1.0);
    let y = op.apply(&x).unwrap().to_image().unwrap();
    for r in 0..9 {
        for c in 0..9 {
            let inside = (3..=5).contains(&r) && (3..=5).contains(&c);
            let expected = if inside { 1.0 / 9.0 } else { 0.0 };
            assert!((y.get(r, c) - expected).abs() < 1e-15);
        }
    }
}
