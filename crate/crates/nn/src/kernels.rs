//! Forward and backward kernels on flat NCHW buffers.
//!
//! Convolutions lower to im2col + GEMM; every reduction runs in a fixed
//! order so repeated calls are bit-identical.

use serde::{Deserialize, Serialize};

use crate::real::gemm;
use crate::{NnError, Real, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Padding {
    /// Output spatial size `ceil(in / stride)`; any odd padding goes to the
    /// bottom/right edge.
    Same,
    /// No padding.
    Valid,
}

/// Resolved geometry of one convolution.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ConvGeom {
    pub n: usize,
    pub c: usize,
    pub h: usize,
    pub w: usize,
    pub o: usize,
    pub kh: usize,
    pub kw: usize,
    pub stride: usize,
    pub pad_t: usize,
    pub pad_l: usize,
    pub ho: usize,
    pub wo: usize,
}

fn out_dim(len: usize, k: usize, stride: usize, padding: Padding) -> Option<(usize, usize)> {
    match padding {
        Padding::Same => {
            let out = len.div_ceil(stride);
            let total = ((out - 1) * stride + k).saturating_sub(len);
            Some((out, total / 2))
        }
        Padding::Valid => (len >= k).then(|| ((len - k) / stride + 1, 0)),
    }
}

impl ConvGeom {
    pub fn new(x: [usize; 4], w: [usize; 4], stride: usize, padding: Padding) -> Result<Self> {
        let [n, c, h, wd] = x;
        let [o, wc, kh, kw] = w;
        if stride == 0 {
            return Err(NnError::shape("conv2d", "stride must be >= 1"));
        }
        if wc != c {
            return Err(NnError::shape(
                "conv2d",
                format!("input has {c} channels, kernel expects {wc}"),
            ));
        }
        if kh == 0 || kw == 0 || h == 0 || wd == 0 {
            return Err(NnError::shape("conv2d", "empty kernel or input"));
        }
        let too_small = || NnError::shape("conv2d", format!("{h}x{wd} input smaller than {kh}x{kw} kernel"));
        let (ho, pad_t) = out_dim(h, kh, stride, padding).ok_or_else(too_small)?;
        let (wo, pad_l) = out_dim(wd, kw, stride, padding).ok_or_else(too_small)?;
        Ok(ConvGeom {
            n,
            c,
            h,
            w: wd,
            o,
            kh,
            kw,
            stride,
            pad_t,
            pad_l,
            ho,
            wo,
        })
    }

    pub fn out_shape(&self) -> [usize; 4] {
        [self.n, self.o, self.ho, self.wo]
    }

    /// A 1x1 stride-1 convolution reads the input directly as its column matrix.
    fn is_pointwise(&self) -> bool {
        self.kh == 1 && self.kw == 1 && self.stride == 1 && self.pad_t == 0 && self.pad_l == 0
    }

    fn rows(&self) -> usize {
        self.c * self.kh * self.kw
    }

    fn cols(&self) -> usize {
        self.ho * self.wo
    }
}

/// Output columns `ox` whose input column `ox * stride + j - pad` is inside
/// `0..len`.
fn valid_range(out: usize, len: usize, stride: usize, j: usize, pad: usize) -> (usize, usize) {
    // ox * stride + j >= pad  and  ox * stride + j < len + pad
    let lo = pad.saturating_sub(j).div_ceil(stride);
    let hi = if len + pad > j {
        (len + pad - j).div_ceil(stride)
    } else {
        0
    };
    (lo.min(out), hi.min(out).max(lo.min(out)))
}

fn im2col<T: Real>(g: &ConvGeom, x: &[T], cols: &mut [T]) {
    let (npix, plane) = (g.cols(), g.h * g.w);
    for c in 0..g.c {
        for i in 0..g.kh {
            for j in 0..g.kw {
                let row = ((c * g.kh + i) * g.kw + j) * npix;
                let (lo, hi) = valid_range(g.wo, g.w, g.stride, j, g.pad_l);
                for oy in 0..g.ho {
                    let iy = (oy * g.stride + i) as isize - g.pad_t as isize;
                    let dst = &mut cols[row + oy * g.wo..row + (oy + 1) * g.wo];
                    if iy < 0 || iy >= g.h as isize {
                        dst.fill(T::zero());
                        continue;
                    }
                    let src = &x[c * plane + iy as usize * g.w..][..g.w];
                    dst[..lo].fill(T::zero());
                    dst[hi..].fill(T::zero());
                    if hi > lo {
                        let first = lo * g.stride + j - g.pad_l;
                        if g.stride == 1 {
                            dst[lo..hi].copy_from_slice(&src[first..first + hi - lo]);
                        } else {
                            for (k, d) in dst[lo..hi].iter_mut().enumerate() {
                                *d = src[first + k * g.stride];
                            }
                        }
                    }
                }
            }
        }
    }
}

fn col2im<T: Real>(g: &ConvGeom, cols: &[T], dx: &mut [T]) {
    let (npix, plane) = (g.cols(), g.h * g.w);
    for c in 0..g.c {
        for i in 0..g.kh {
            for j in 0..g.kw {
                let row = ((c * g.kh + i) * g.kw + j) * npix;
                let (lo, hi) = valid_range(g.wo, g.w, g.stride, j, g.pad_l);
                if hi <= lo {
                    continue;
                }
                let first = lo * g.stride + j - g.pad_l;
                for oy in 0..g.ho {
                    let iy = (oy * g.stride + i) as isize - g.pad_t as isize;
                    if iy < 0 || iy >= g.h as isize {
                        continue;
                    }
                    let dst = &mut dx[c * plane + iy as usize * g.w..][..g.w];
                    let src = &cols[row + oy * g.wo + lo..row + oy * g.wo + hi];
                    for (k, &v) in src.iter().enumerate() {
                        dst[first + k * g.stride] += v;
                    }
                }
            }
        }
    }
}

/// Cross-correlation of `x` with kernels `w` (`o x c x kh x kw`) plus an
/// optional per-output-channel bias.
pub fn conv2d_forward<T: Real>(g: &ConvGeom, x: &[T], w: &[T], bias: Option<&[T]>) -> Vec<T> {
    let (rows, npix) = (g.rows(), g.cols());
    let in_len = g.c * g.h * g.w;
    let out_len = g.o * npix;
    let mut out = vec![T::zero(); g.n * out_len];
    let mut cols = if g.is_pointwise() {
        Vec::new()
    } else {
        vec![T::zero(); rows * npix]
    };
    for n in 0..g.n {
        let xn = &x[n * in_len..(n + 1) * in_len];
        let src: &[T] = if g.is_pointwise() {
            xn
        } else {
            im2col(g, xn, &mut cols);
            &cols
        };
        let yn = &mut out[n * out_len..(n + 1) * out_len];
        gemm(g.o, rows, npix, (w, rows, 1), (src, npix, 1), T::zero(), (yn, npix, 1));
        if let Some(b) = bias {
            for (o, chunk) in yn.chunks_mut(npix).enumerate() {
                chunk.iter_mut().for_each(|v| *v += b[o]);
            }
        }
    }
    out
}

/// Gradients of [`conv2d_forward`]: `(dx, dw, dbias)`; `dx` only when asked.
pub fn conv2d_backward<T: Real>(
    g: &ConvGeom,
    x: &[T],
    w: &[T],
    dy: &[T],
    need_dx: bool,
) -> (Option<Vec<T>>, Vec<T>, Vec<T>) {
    let (rows, npix) = (g.rows(), g.cols());
    let in_len = g.c * g.h * g.w;
    let out_len = g.o * npix;
    let mut dw = vec![T::zero(); g.o * rows];
    let mut db = vec![T::zero(); g.o];
    let mut dx = need_dx.then(|| vec![T::zero(); g.n * in_len]);
    let mut cols = if g.is_pointwise() {
        Vec::new()
    } else {
        vec![T::zero(); rows * npix]
    };
    let mut dcols = vec![T::zero(); rows * npix];
    for n in 0..g.n {
        let xn = &x[n * in_len..(n + 1) * in_len];
        let dyn_ = &dy[n * out_len..(n + 1) * out_len];
        for (o, chunk) in dyn_.chunks(npix).enumerate() {
            let mut s = T::zero();
            for &v in chunk {
                s += v;
            }
            db[o] += s;
        }
        let src: &[T] = if g.is_pointwise() {
            xn
        } else {
            im2col(g, xn, &mut cols);
            &cols
        };
        // dw += dy_n * cols^T
        gemm(
            g.o,
            npix,
            rows,
            (dyn_, npix, 1),
            (src, 1, npix),
            T::one(),
            (&mut dw, rows, 1),
        );
        if let Some(dx) = dx.as_mut() {
            let dxn = &mut dx[n * in_len..(n + 1) * in_len];
            if g.is_pointwise() {
                gemm(
                    rows,
                    g.o,
                    npix,
                    (w, 1, rows),
                    (dyn_, npix, 1),
                    T::zero(),
                    (dxn, npix, 1),
                );
            } else {
                gemm(
                    rows,
                    g.o,
                    npix,
                    (w, 1, rows),
                    (dyn_, npix, 1),
                    T::zero(),
                    (&mut dcols, npix, 1),
                );
                col2im(g, &dcols, dxn);
            }
        }
    }
    (dx, dw, db)
}

/// Transposed convolution with a 2x2 kernel and stride 2; `w` is
/// `o x c x 2 x 2` and each input pixel scatters into its own 2x2 block.
pub fn conv_transpose2_forward<T: Real>(x: [usize; 4], o: usize, xd: &[T], w: &[T], bias: Option<&[T]>) -> Vec<T> {
    let [n, c, h, wd] = x;
    let (plane, out_w) = (h * wd, 2 * wd);
    let out_len = o * 4 * plane;
    let mut out = vec![T::zero(); n * out_len];
    let mut tmp = vec![T::zero(); o * plane];
    for i in 0..n {
        let xn = &xd[i * c * plane..(i + 1) * c * plane];
        let yn = &mut out[i * out_len..(i + 1) * out_len];
        for ab in 0..4 {
            let (a, b) = (ab / 2, ab % 2);
            gemm(
                o,
                c,
                plane,
                (&w[ab..], 4 * c, 4),
                (xn, plane, 1),
                T::zero(),
                (&mut tmp, plane, 1),
            );
            for oc in 0..o {
                let bv = bias.map_or(T::zero(), |bs| bs[oc]);
                for y in 0..h {
                    for xx in 0..wd {
                        yn[(oc * 2 * h + 2 * y + a) * out_w + 2 * xx + b] = tmp[oc * plane + y * wd + xx] + bv;
                    }
                }
            }
        }
    }
    out
}

/// Gradients of [`conv_transpose2_forward`]: `(dx, dw, dbias)`.
pub fn conv_transpose2_backward<T: Real>(
    x: [usize; 4],
    o: usize,
    xd: &[T],
    w: &[T],
    dy: &[T],
    need_dx: bool,
) -> (Option<Vec<T>>, Vec<T>, Vec<T>) {
    let [n, c, h, wd] = x;
    let (plane, out_w) = (h * wd, 2 * wd);
    let out_len = o * 4 * plane;
    let mut dx = need_dx.then(|| vec![T::zero(); n * c * plane]);
    let mut dw = vec![T::zero(); o * c * 4];
    let mut db = vec![T::zero(); o];
    let mut tmp = vec![T::zero(); o * plane];
    for i in 0..n {
        let xn = &xd[i * c * plane..(i + 1) * c * plane];
        let dyn_ = &dy[i * out_len..(i + 1) * out_len];
        for (oc, chunk) in dyn_.chunks(4 * plane).enumerate() {
            let mut s = T::zero();
            for &v in chunk {
                s += v;
            }
            db[oc] += s;
        }
        for ab in 0..4 {
            let (a, b) = (ab / 2, ab % 2);
            for oc in 0..o {
                for y in 0..h {
                    for xx in 0..wd {
                        tmp[oc * plane + y * wd + xx] = dyn_[(oc * 2 * h + 2 * y + a) * out_w + 2 * xx + b];
                    }
                }
            }
            gemm(
                o,
                plane,
                c,
                (&tmp, plane, 1),
                (xn, 1, plane),
                T::one(),
                (&mut dw[ab..], 4 * c, 4),
            );
            if let Some(dx) = dx.as_mut() {
                let dxn = &mut dx[i * c * plane..(i + 1) * c * plane];
                gemm(
                    c,
                    o,
                    plane,
                    (&w[ab..], 4, 4 * c),
                    (&tmp, plane, 1),
                    T::one(),
                    (dxn, plane, 1),
                );
            }
        }
    }
    (dx, dw, db)
}

pub fn avg_pool2_forward<T: Real>(x: [usize; 4], xd: &[T]) -> Vec<T> {
    let [n, c, h, w] = x;
    let (ho, wo) = (h / 2, w / 2);
    let quarter = T::of(0.25);
    let mut out = Vec::with_capacity(n * c * ho * wo);
    for p in 0..n * c {
        let src = &xd[p * h * w..(p + 1) * h * w];
        for y in 0..ho {
            for xx in 0..wo {
                let r0 = 2 * y * w + 2 * xx;
                let s = src[r0] + src[r0 + 1] + src[r0 + w] + src[r0 + w + 1];
                out.push(s * quarter);
            }
        }
    }
    out
}

pub fn avg_pool2_backward<T: Real>(x: [usize; 4], dy: &[T]) -> Vec<T> {
    let [n, c, h, w] = x;
    let (ho, wo) = (h / 2, w / 2);
    let quarter = T::of(0.25);
    let mut dx = vec![T::zero(); n * c * h * w];
    for p in 0..n * c {
        let dst = &mut dx[p * h * w..(p + 1) * h * w];
        for y in 0..ho {
            for xx in 0..wo {
                let g = dy[(p * ho + y) * wo + xx] * quarter;
                let r0 = 2 * y * w + 2 * xx;
                dst[r0] = g;
                dst[r0 + 1] = g;
                dst[r0 + w] = g;
                dst[r0 + w + 1] = g;
            }
        }
    }
    dx
}

/// Per-channel batch statistics `(mean, biased variance)` over N, H, W.
pub fn channel_stats<T: Real>(x: [usize; 4], xd: &[T]) -> (Vec<T>, Vec<T>) {
    let [n, c, h, w] = x;
    let plane = h * w;
    let count = T::of((n * plane) as f64);
    let mut mean = vec![T::zero(); c];
    let mut var = vec![T::zero(); c];
    for ch in 0..c {
        let mut s = T::zero();
        for i in 0..n {
            for &v in &xd[(i * c + ch) * plane..][..plane] {
                s += v;
            }
        }
        let m = s / count;
        let mut q = T::zero();
        for i in 0..n {
            for &v in &xd[(i * c + ch) * plane..][..plane] {
                q += (v - m) * (v - m);
            }
        }
        mean[ch] = m;
        var[ch] = q / count;
    }
    (mean, var)
}
