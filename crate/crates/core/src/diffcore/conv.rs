//! Direct 2-D cross-correlation kernels over `N×C×H×W` buffers.

use super::Scalar;

#[derive(Debug, Clone, Copy)]
pub(crate) struct ConvGeom {
    pub n: usize,
    pub c_in: usize,
    pub h: usize,
    pub w: usize,
    pub c_out: usize,
    pub k: usize,
    pub stride: usize,
    pub pad: usize,
    pub oh: usize,
    pub ow: usize,
}

impl ConvGeom {
    /// Output index range `lo..hi` along one axis for kernel tap `tap`, such
    /// that `o * stride + tap - pad` stays inside `0..len`.
    #[inline]
    fn valid_range(&self, tap: usize, len: usize, out_len: usize) -> (usize, usize) {
        let s = self.stride;
        let lo = if self.pad > tap {
            (self.pad - tap).div_ceil(s)
        } else {
            0
        };
        // largest o with o*s + tap - pad <= len - 1
        let top = len - 1 + self.pad;
        let hi = if top < tap { 0 } else { ((top - tap) / s + 1).min(out_len) };
        (lo.min(hi), hi)
    }
}

pub(crate) fn forward<T: Scalar>(g: &ConvGeom, input: &[T], kernel: &[T], bias: &[T], out: &mut [T]) {
    let in_plane = g.h * g.w;
    let out_plane = g.oh * g.ow;
    let k = g.k;
    for n in 0..g.n {
        for o in 0..g.c_out {
            let out_off = (n * g.c_out + o) * out_plane;
            let dst = &mut out[out_off..out_off + out_plane];
            dst.iter_mut().for_each(|v| *v = bias[o]);
            for c in 0..g.c_in {
                let src = &input[(n * g.c_in + c) * in_plane..][..in_plane];
                let kbase = (o * g.c_in + c) * k * k;
                for ky in 0..k {
                    let (oy_lo, oy_hi) = g.valid_range(ky, g.h, g.oh);
                    for kx in 0..k {
                        let wv = kernel[kbase + ky * k + kx];
                        let (ox_lo, ox_hi) = g.valid_range(kx, g.w, g.ow);
                        for oy in oy_lo..oy_hi {
                            let iy = oy * g.stride + ky - g.pad;
                            let row = &src[iy * g.w..(iy + 1) * g.w];
                            let orow = &mut dst[oy * g.ow..(oy + 1) * g.ow];
                            for ox in ox_lo..ox_hi {
                                orow[ox] += wv * row[ox * g.stride + kx - g.pad];
                            }
                        }
                    }
                }
            }
        }
    }
}

/// Accumulates input, kernel and bias gradients given the output gradient.
/// Any of the three targets may be skipped.
pub(crate) fn backward<T: Scalar>(
    g: &ConvGeom,
    input: &[T],
    kernel: &[T],
    gout: &[T],
    mut gin: Option<&mut [T]>,
    mut gk: Option<&mut [T]>,
    gb: Option<&mut [T]>,
) {
    let in_plane = g.h * g.w;
    let out_plane = g.oh * g.ow;
    let k = g.k;
    if let Some(gb) = gb {
        for n in 0..g.n {
            for o in 0..g.c_out {
                let off = (n * g.c_out + o) * out_plane;
                let s = gout[off..off + out_plane]
                    .iter()
                    .fold(T::zero(), |a, &b| a + b);
                gb[o] += s;
            }
        }
    }
    if gin.is_none() && gk.is_none() {
        return;
    }
    for n in 0..g.n {
        for o in 0..g.c_out {
            let go = &gout[(n * g.c_out + o) * out_plane..][..out_plane];
            for c in 0..g.c_in {
                let in_off = (n * g.c_in + c) * in_plane;
                let kbase = (o * g.c_in + c) * k * k;
                for ky in 0..k {
                    let (oy_lo, oy_hi) = g.valid_range(ky, g.h, g.oh);
                    for kx in 0..k {
                        let (ox_lo, ox_hi) = g.valid_range(kx, g.w, g.ow);
                        if let Some(gk) = gk.as_deref_mut() {
                            let src = &input[in_off..in_off + in_plane];
                            let mut acc = T::zero();
                            for oy in oy_lo..oy_hi {
                                let iy = oy * g.stride + ky - g.pad;
                                let row = &src[iy * g.w..(iy + 1) * g.w];
                                let grow = &go[oy * g.ow..(oy + 1) * g.ow];
                                for ox in ox_lo..ox_hi {
                                    acc += grow[ox] * row[ox * g.stride + kx - g.pad];
                                }
                            }
                            gk[kbase + ky * k + kx] += acc;
                        }
                        if let Some(gin) = gin.as_deref_mut() {
                            let wv = kernel[kbase + ky * k + kx];
                            let dst = &mut gin[in_off..in_off + in_plane];
                            for oy in oy_lo..oy_hi {
                                let iy = oy * g.stride + ky - g.pad;
                                let row = &mut dst[iy * g.w..(iy + 1) * g.w];
                                let grow = &go[oy * g.ow..(oy + 1) * g.ow];
                                for ox in ox_lo..ox_hi {
                                    row[ox * g.stride + kx - g.pad] += wv * grow[ox];
                                }
                            }
                        }
                    }
                }
            }
        }
    }
}
