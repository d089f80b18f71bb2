mod common;

use common::gradcheck::{self, NETWORK_TOLERANCE, OP_TOLERANCE};
use common::{conv_oracle, random_tensor, rng};
use skelres_core::nn::{conv2d_backward, conv2d_forward, softmax, softmax_cross_entropy, Tensor};

#[test]
fn conv_matches_loop_oracle() {
    let mut r = rng(11);
    let x = random_tensor(&mut r, &[1, 2, 4, 4]);
    let w = random_tensor(&mut r, &[3, 2, 3, 3]);
    let got = conv2d_forward(&x, &w, 1).unwrap();
    let want = conv_oracle(&x, &w, 1);
    for (a, b) in got.data().iter().zip(want.data()) {
        assert!((a - b).abs() < 1e-12);
    }
    let x = random_tensor(&mut r, &[2, 3, 6, 6]);
    let w = random_tensor(&mut r, &[2, 3, 3, 3]);
    let got = conv2d_forward(&x, &w, 2).unwrap();
    assert_eq!(got.shape(), &[2, 2, 3, 3]);
    for (a, b) in got.data().iter().zip(conv_oracle(&x, &w, 2).data()) {
        assert!((a - b).abs() < 1e-12);
    }
}

#[test]
fn conv_single_pixel_gradient_is_input_patch() {
    let mut r = rng(12);
    let x = random_tensor(&mut r, &[1, 1, 4, 4]);
    let w = random_tensor(&mut r, &[1, 1, 3, 3]);
    let mut g = Tensor::zeros(&[1, 1, 4, 4]);
    g.data_mut()[4 + 1] = 1.0; // output pixel (1, 1)
    let (_, gw) = conv2d_backward(&x, &w, 1, &g).unwrap();
    for di in 0..3 {
        for dj in 0..3 {
            assert_eq!(gw.data()[di * 3 + dj], x.data()[di * 4 + dj]);
        }
    }
    let (gx, gw) = conv2d_backward(&x, &w, 1, &Tensor::zeros(&[1, 1, 4, 4])).unwrap();
    assert!(gx.data().iter().chain(gw.data()).all(|&v| v == 0.0));
}

#[test]
fn conv_rejects_bad_shapes_naming_both() {
    let err = conv2d_forward(&Tensor::zeros(&[1, 2, 4, 4]), &Tensor::zeros(&[1, 3, 3, 3]), 1)
        .unwrap_err()
        .to_string();
    assert!(err.contains("[1, 2, 4, 4]") && err.contains("[1, 3, 3, 3]"), "{err}");
    assert!(conv2d_forward(&Tensor::zeros(&[1, 1, 5, 5]), &Tensor::zeros(&[1, 1, 3, 3]), 2).is_err());
}

#[test]
fn conv_gradients() {
    let e = gradcheck::conv(1);
    assert!(e <= OP_TOLERANCE, "{e}");
}

#[test]
fn batch_norm_gradients() {
    let e = gradcheck::batch_norm(2);
    assert!(e <= OP_TOLERANCE, "{e}");
}

#[test]
fn relu_gradients() {
    let e = gradcheck::relu_op(3);
    assert!(e <= OP_TOLERANCE, "{e}");
}

#[test]
fn pool_gradients() {
    let e = gradcheck::pool(4);
    assert!(e <= OP_TOLERANCE, "{e}");
}

#[test]
fn linear_gradients() {
    let e = gradcheck::linear_op(5);
    assert!(e <= OP_TOLERANCE, "{e}");
}

#[test]
fn cross_entropy_gradients() {
    let e = gradcheck::cross_entropy(6);
    assert!(e <= OP_TOLERANCE, "{e}");
}

#[test]
fn residual_block_gradients() {
    let e = gradcheck::residual_blocks(7);
    assert!(e <= OP_TOLERANCE, "{e}");
}

#[test]
fn network_gradients() {
    let e = gradcheck::network(8);
    assert!(e <= NETWORK_TOLERANCE, "{e}");
}

#[test]
fn softmax_recovered_from_loss_gradient_sums_to_one() {
    let mut r = rng(9);
    let logits = random_tensor(&mut r, &[4, 6]);
    let labels = [0, 5, 2, 2];
    let (_, g) = softmax_cross_entropy(&logits, &labels).unwrap();
    for (row, &l) in g.data().chunks_exact(6).zip(&labels) {
        let mut p: Vec<f64> = row.iter().map(|v| v * 4.0).collect();
        p[l] += 1.0;
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
    let p = softmax(&logits).unwrap();
    assert!(p.data().iter().all(|&v| v > 0.0 && v < 1.0));
}
