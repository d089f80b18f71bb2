//! 3x3 convolution with unit padding, lowered to matrix products.

use super::Tensor;
use crate::error::{Error, Result};

pub const KERNEL: usize = 3;
const PAD: usize = 1;

/// `c = alpha * a * b + beta * c` with explicit strides, via `matrixmultiply`.
#[allow(clippy::too_many_arguments)]
fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    (rsa, csa): (usize, usize),
    b: &[f64],
    (rsb, csb): (usize, usize),
    beta: f64,
    c: &mut [f64],
) {
    // Bounds for the last element each operand touches.
    assert!(m == 0 || k == 0 || (m - 1) * rsa + (k - 1) * csa < a.len());
    assert!(k == 0 || n == 0 || (k - 1) * rsb + (n - 1) * csb < b.len());
    assert!(c.len() >= m * n);
    // SAFETY: the assertions above keep every access inside the slices, and
    // `c` does not alias `a` or `b` because it is borrowed mutably.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa as isize,
            csa as isize,
            b.as_ptr(),
            rsb as isize,
            csb as isize,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

pub fn output_size(size: usize, stride: usize) -> usize {
    (size + 2 * PAD - KERNEL) / stride + 1
}

struct Geometry {
    batch: usize,
    c_in: usize,
    h: usize,
    w: usize,
    c_out: usize,
    ho: usize,
    wo: usize,
    stride: usize,
}

impl Geometry {
    fn new(input: &[usize], weights: &[usize], stride: usize) -> Result<Self> {
        let mismatch = || {
            Error::Shape(format!(
                "conv2d: input {input:?} incompatible with weights {weights:?} at stride {stride}"
            ))
        };
        let [batch, c_in, h, w] = input[..] else {
            return Err(mismatch());
        };
        let [c_out, wc_in, kh, kw] = weights[..] else {
            return Err(mismatch());
        };
        if wc_in != c_in || kh != KERNEL || kw != KERNEL || !(stride == 1 || stride == 2) {
            return Err(mismatch());
        }
        if stride == 2 && (h % 2 != 0 || w % 2 != 0) {
            return Err(mismatch());
        }
        Ok(Self {
            batch,
            c_in,
            h,
            w,
            c_out,
            ho: output_size(h, stride),
            wo: output_size(w, stride),
            stride,
        })
    }

    fn patch_len(&self) -> usize {
        self.c_in * KERNEL * KERNEL
    }

    fn out_plane(&self) -> usize {
        self.ho * self.wo
    }

    /// Source coordinate for output index `o` and kernel tap `k`, if inside
    /// the unpadded input.
    #[inline]
    fn source(&self, o: usize, k: usize, len: usize) -> Option<usize> {
        (o * self.stride + k).checked_sub(PAD).filter(|&s| s < len)
    }

    /// Unfolds one sample into a `[c_in*9, ho*wo]` patch matrix.
    fn im2col(&self, sample: &[f64], col: &mut [f64]) {
        let plane = self.out_plane();
        for ci in 0..self.c_in {
            let chan = &sample[ci * self.h * self.w..(ci + 1) * self.h * self.w];
            for ky in 0..KERNEL {
                for kx in 0..KERNEL {
                    let row = &mut col[((ci * KERNEL + ky) * KERNEL + kx) * plane..][..plane];
                    for oy in 0..self.ho {
                        let dst = &mut row[oy * self.wo..(oy + 1) * self.wo];
                        match self.source(oy, ky, self.h) {
                            None => dst.fill(0.0),
                            Some(iy) => {
                                let src = &chan[iy * self.w..(iy + 1) * self.w];
                                for (ox, d) in dst.iter_mut().enumerate() {
                                    *d = self.source(ox, kx, self.w).map_or(0.0, |ix| src[ix]);
                                }
                            }
                        }
                    }
                }
            }
        }
    }

    /// Adjoint of [`Self::im2col`]: scatters patch gradients back onto the
    /// input grid, accumulating overlaps.
    fn col2im(&self, col: &[f64], sample: &mut [f64]) {
        let plane = self.out_plane();
        for ci in 0..self.c_in {
            let chan = &mut sample[ci * self.h * self.w..(ci + 1) * self.h * self.w];
            for ky in 0..KERNEL {
                for kx in 0..KERNEL {
                    let row = &col[((ci * KERNEL + ky) * KERNEL + kx) * plane..][..plane];
                    for oy in 0..self.ho {
                        let Some(iy) = self.source(oy, ky, self.h) else { continue };
                        for ox in 0..self.wo {
                            if let Some(ix) = self.source(ox, kx, self.w) {
                                chan[iy * self.w + ix] += row[oy * self.wo + ox];
                            }
                        }
                    }
                }
            }
        }
    }
}

/// Cross-correlation of `input [B, C_in, H, W]` with `weights [C_out, C_in, 3, 3]`,
/// padding 1, no bias.
pub fn conv2d_forward(input: &Tensor, weights: &Tensor, stride: usize) -> Result<Tensor> {
    let g = Geometry::new(input.shape(), weights.shape(), stride)?;
    let in_len = g.c_in * g.h * g.w;
    let out_len = g.c_out * g.out_plane();
    let mut out = vec![0.0; g.batch * out_len];
    let mut col = vec![0.0; g.patch_len() * g.out_plane()];
    for b in 0..g.batch {
        g.im2col(&input.data()[b * in_len..(b + 1) * in_len], &mut col);
        gemm(
            g.c_out,
            g.patch_len(),
            g.out_plane(),
            weights.data(),
            (g.patch_len(), 1),
            &col,
            (g.out_plane(), 1),
            0.0,
            &mut out[b * out_len..(b + 1) * out_len],
        );
    }
    Tensor::new(&[g.batch, g.c_out, g.ho, g.wo], out)
}

/// Gradients of the convolution with respect to its input and weights.
pub fn conv2d_backward(
    input: &Tensor,
    weights: &Tensor,
    stride: usize,
    grad_out: &Tensor,
) -> Result<(Tensor, Tensor)> {
    let g = Geometry::new(input.shape(), weights.shape(), stride)?;
    let expected = [g.batch, g.c_out, g.ho, g.wo];
    if grad_out.shape() != expected {
        return Err(Error::Shape(format!(
            "conv2d backward: upstream gradient {:?}, expected {expected:?}",
            grad_out.shape()
        )));
    }
    let in_len = g.c_in * g.h * g.w;
    let out_len = g.c_out * g.out_plane();
    let plane = g.out_plane();
    let patch = g.patch_len();

    let mut grad_in = vec![0.0; input.len()];
    let mut grad_w = vec![0.0; weights.len()];
    let mut col = vec![0.0; patch * plane];
    let mut grad_col = vec![0.0; patch * plane];
    for b in 0..g.batch {
        let gout = &grad_out.data()[b * out_len..(b + 1) * out_len];
        g.im2col(&input.data()[b * in_len..(b + 1) * in_len], &mut col);
        // dW += dY * col^T
        gemm(g.c_out, plane, patch, gout, (plane, 1), &col, (1, plane), 1.0, &mut grad_w);
        // dcol = W^T * dY
        gemm(patch, g.c_out, plane, weights.data(), (1, patch), gout, (plane, 1), 0.0, &mut grad_col);
        g.col2im(&grad_col, &mut grad_in[b * in_len..(b + 1) * in_len]);
    }
    Ok((
        Tensor::new(input.shape(), grad_in)?,
        Tensor::new(weights.shape(), grad_w)?,
    ))
}
