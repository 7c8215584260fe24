//! Every kernel checked against an independent naive-loop implementation on
//! random small inputs.

use ispforge_tensor::{
    avg_pool2d, conv2d, dense, fixed_filter, global_avg_pool, transpose_conv2d, ConvSpec,
    FilterKind, Pad, Shape, Tensor,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const TOL: f32 = 1e-5;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Straight seven-loop convolution over zero-padded input.
#[allow(clippy::too_many_arguments)]
fn conv_oracle(input: &Tensor, spec: &ConvSpec) -> Tensor {
    let s = input.shape();
    let (kh, kw) = spec.kernel;
    let (oh, ow) = spec.out_spatial(s.h, s.w).unwrap();
    let icg = spec.in_channels / spec.groups;
    let ocg = spec.out_channels / spec.groups;
    let mut out = Tensor::zeros(Shape::new(s.n, spec.out_channels, oh, ow));
    for n in 0..s.n {
        for oc in 0..spec.out_channels {
            let g = oc / ocg;
            for oy in 0..oh {
                for ox in 0..ow {
                    let mut sum = 0.0f32;
                    for icl in 0..icg {
                        let ic = g * icg + icl;
                        for ky in 0..kh {
                            for kx in 0..kw {
                                let iy = (oy * spec.stride + ky) as isize - spec.pad.top as isize;
                                let ix = (ox * spec.stride + kx) as isize - spec.pad.left as isize;
                                if iy < 0 || ix < 0 || iy >= s.h as isize || ix >= s.w as isize {
                                    continue;
                                }
                                sum += input.at(n, ic, iy as usize, ix as usize)
                                    * spec.weight.at(oc, icl, ky, kx);
                            }
                        }
                    }
                    if let Some(b) = &spec.bias {
                        sum += b[oc];
                    }
                    *out.at_mut(n, oc, oy, ox) = sum;
                }
            }
        }
    }
    out
}

#[test]
fn conv2d_matches_loop_oracle() {
    let mut r = rng(100);
    let cases = [
        // (cin, cout, k, stride, pad, groups)
        (1, 1, (3, 3), 1, Pad::uniform(1), 1),
        (3, 5, (3, 3), 1, Pad::uniform(1), 1),
        (4, 4, (1, 1), 1, Pad::ZERO, 1),
        (4, 8, (5, 5), 1, Pad::uniform(2), 1),
        (4, 8, (3, 3), 2, Pad::uniform(1), 1),
        (6, 6, (3, 3), 1, Pad::uniform(1), 6),
        (4, 6, (3, 3), 1, Pad::uniform(1), 2),
        (2, 2, (2, 2), 1, Pad::same(2, 2), 1),
        (3, 3, (4, 4), 1, Pad::same(4, 4), 1),
        (2, 3, (3, 5), 1, Pad::same(3, 5), 1),
        (3, 2, (3, 3), 3, Pad::ZERO, 1),
    ];
    for (cin, cout, k, stride, pad, groups) in cases {
        for _ in 0..3 {
            let n = r.random_range(1..=2);
            let h = r.random_range(5..=8);
            let w = r.random_range(5..=8);
            let input = Tensor::random_uniform(Shape::new(n, cin, h, w), &mut r);
            let weight = Tensor::random_uniform(Shape::new(cout, cin / groups, k.0, k.1), &mut r)
                .map(|v| v - 0.5);
            let bias = if r.random::<bool>() {
                Some((0..cout).map(|_| r.random::<f32>() - 0.5).collect())
            } else {
                None
            };
            let spec = ConvSpec::new(cin, cout, k, stride, pad, groups, weight, bias).unwrap();
            let fast = conv2d(&input, &spec).unwrap();
            let slow = conv_oracle(&input, &spec);
            assert_eq!(fast.shape(), slow.shape());
            assert!(
                fast.max_abs_diff(&slow) <= TOL,
                "conv2d deviates for case cin={cin} cout={cout} k={k:?} stride={stride} groups={groups}"
            );
        }
    }
}

#[test]
fn gap_matches_double_loop_mean() {
    let mut r = rng(101);
    let t = Tensor::random_uniform(Shape::new(2, 5, 8, 8), &mut r);
    let out = global_avg_pool(&t);
    for n in 0..2 {
        for c in 0..5 {
            let mut sum = 0.0f64;
            for y in 0..8 {
                for x in 0..8 {
                    sum += t.at(n, c, y, x) as f64;
                }
            }
            let expected = (sum / 64.0) as f32;
            assert!((out.at(n, c, 0, 0) - expected).abs() < 1e-6);
        }
    }
}

#[test]
fn dense_matches_loop_oracle() {
    let mut r = rng(102);
    let x = Tensor::random_uniform(Shape::new(2, 6, 1, 1), &mut r);
    let w = Tensor::random_uniform(Shape::new(4, 6, 1, 1), &mut r).map(|v| v - 0.5);
    let b = Tensor::random_uniform(Shape::new(1, 4, 1, 1), &mut r);
    let out = dense(&x, &w, Some(&b)).unwrap();
    for n in 0..2 {
        for o in 0..4 {
            let mut acc = 0.0f32;
            for i in 0..6 {
                acc += w.at(o, i, 0, 0) * x.at(n, i, 0, 0);
            }
            acc += b.at(0, o, 0, 0);
            assert!((out.at(n, o, 0, 0) - acc).abs() <= TOL);
        }
    }
}

#[test]
fn avg_pool_matches_loop_oracle() {
    let mut r = rng(103);
    let t = Tensor::random_uniform(Shape::new(1, 3, 8, 8), &mut r);
    let out = avg_pool2d(&t, 2, 2).unwrap();
    for c in 0..3 {
        for oy in 0..4 {
            for ox in 0..4 {
                let mut sum = 0.0;
                for ky in 0..2 {
                    for kx in 0..2 {
                        sum += t.at(0, c, 2 * oy + ky, 2 * ox + kx);
                    }
                }
                assert!((out.at(0, c, oy, ox) - sum / 4.0).abs() <= TOL);
            }
        }
    }
}

#[test]
fn transpose_conv_matches_scatter_oracle() {
    let mut r = rng(104);
    let input = Tensor::random_uniform(Shape::new(2, 3, 5, 4), &mut r);
    let weight = Tensor::random_uniform(Shape::new(4, 3, 2, 2), &mut r).map(|v| v - 0.5);
    let bias: Vec<f32> = (0..4).map(|_| r.random::<f32>()).collect();
    let out = transpose_conv2d(&input, &weight, Some(&bias)).unwrap();
    let mut expect = Tensor::zeros(Shape::new(2, 4, 10, 8));
    for n in 0..2 {
        for oc in 0..4 {
            for y in 0..10 {
                for x in 0..8 {
                    *expect.at_mut(n, oc, y, x) = bias[oc];
                }
            }
        }
        for ic in 0..3 {
            for y in 0..5 {
                for x in 0..4 {
                    for ky in 0..2 {
                        for kx in 0..2 {
                            for oc in 0..4 {
                                *expect.at_mut(n, oc, 2 * y + ky, 2 * x + kx) +=
                                    weight.at(oc, ic, ky, kx) * input.at(n, ic, y, x);
                            }
                        }
                    }
                }
            }
        }
    }
    assert!(out.max_abs_diff(&expect) <= TOL);
}

#[test]
fn fixed_filter_matches_loop_oracle() {
    let mut r = rng(105);
    let t = Tensor::random_uniform(Shape::new(1, 2, 7, 7), &mut r);
    for kind in [FilterKind::Gauss, FilterKind::SobelX, FilterKind::SobelY] {
        let k = kind.kernel();
        let out = fixed_filter(&t, kind).unwrap();
        for c in 0..2 {
            for y in 0..7 {
                for x in 0..7 {
                    let mut sum = 0.0f32;
                    for ky in 0..3usize {
                        for kx in 0..3usize {
                            let iy = y as isize + ky as isize - 1;
                            let ix = x as isize + kx as isize - 1;
                            if iy < 0 || ix < 0 || iy >= 7 || ix >= 7 {
                                continue;
                            }
                            sum += t.at(0, c, iy as usize, ix as usize) * k[ky * 3 + kx];
                        }
                    }
                    assert!((out.at(0, c, y, x) - sum).abs() <= TOL);
                }
            }
        }
    }
}

#[test]
fn ops_are_deterministic_across_runs() {
    let mut r = rng(106);
    let input = Tensor::random_uniform(Shape::new(1, 4, 8, 8), &mut r);
    let weight = Tensor::random_uniform(Shape::new(6, 4, 3, 3), &mut r);
    let spec = ConvSpec::new(4, 6, (3, 3), 1, Pad::uniform(1), 1, weight, None).unwrap();
    let a = conv2d(&input, &spec).unwrap();
    let b = conv2d(&input, &spec).unwrap();
    assert!(a.bits_eq(&b));
}
