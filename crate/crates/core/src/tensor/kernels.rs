//! Dense kernels shared by the tape ops.

use super::Real;

/// Row-major `c = alpha * op(a) · op(b) + beta * c` where `op(a)` is `m×k`
/// and `op(b)` is `k×n`. A transposed operand is stored in its untransposed
/// layout (`k×m` for `a`, `n×k` for `b`).
#[allow(clippy::too_many_arguments)]
pub fn gemm<T: Real>(
    trans_a: bool,
    trans_b: bool,
    m: usize,
    n: usize,
    k: usize,
    alpha: T,
    a: &[T],
    b: &[T],
    beta: T,
    c: &mut [T],
) {
    assert!(a.len() >= m * k, "gemm: lhs too short");
    assert!(b.len() >= k * n, "gemm: rhs too short");
    assert!(c.len() >= m * n, "gemm: output too short");
    if m == 0 || n == 0 {
        return;
    }
    let (rsa, csa) = if trans_a { (1, m as isize) } else { (k as isize, 1) };
    let (rsb, csb) = if trans_b { (1, k as isize) } else { (n as isize, 1) };
    // SAFETY: lengths are checked above and the three slices cannot alias
    // because `c` is borrowed mutably.
    unsafe {
        T::raw_gemm(
            m,
            k,
            n,
            alpha,
            a.as_ptr(),
            rsa,
            csa,
            b.as_ptr(),
            rsb,
            csb,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

/// Unfolds one `[C,H,W]` sample into `[C*kh*kw, H*W]` columns with zero
/// same-padding.
pub(crate) fn im2col<T: Real>(
    input: &[T],
    channels: usize,
    height: usize,
    width: usize,
    kh: usize,
    kw: usize,
    cols: &mut [T],
) {
    let (ph, pw) = (kh / 2, kw / 2);
    let hw = height * width;
    for c in 0..channels {
        let plane = &input[c * hw..(c + 1) * hw];
        for u in 0..kh {
            for v in 0..kw {
                let row = ((c * kh + u) * kw + v) * hw;
                let out = &mut cols[row..row + hw];
                for i in 0..height {
                    let si = i as isize + u as isize - ph as isize;
                    let dst = &mut out[i * width..(i + 1) * width];
                    if si < 0 || si >= height as isize {
                        dst.fill(T::zero());
                        continue;
                    }
                    let src = &plane[si as usize * width..(si as usize + 1) * width];
                    for (j, d) in dst.iter_mut().enumerate() {
                        let sj = j as isize + v as isize - pw as isize;
                        *d = if sj < 0 || sj >= width as isize {
                            T::zero()
                        } else {
                            src[sj as usize]
                        };
                    }
                }
            }
        }
    }
}

/// Adjoint of [`im2col`]: scatters column gradients back onto a sample.
pub(crate) fn col2im_add<T: Real>(
    cols: &[T],
    channels: usize,
    height: usize,
    width: usize,
    kh: usize,
    kw: usize,
    input_grad: &mut [T],
) {
    let (ph, pw) = (kh / 2, kw / 2);
    let hw = height * width;
    for c in 0..channels {
        let plane = &mut input_grad[c * hw..(c + 1) * hw];
        for u in 0..kh {
            for v in 0..kw {
                let row = ((c * kh + u) * kw + v) * hw;
                let col = &cols[row..row + hw];
                for i in 0..height {
                    let si = i as isize + u as isize - ph as isize;
                    if si < 0 || si >= height as isize {
                        continue;
                    }
                    let dst = &mut plane[si as usize * width..(si as usize + 1) * width];
                    let src = &col[i * width..(i + 1) * width];
                    for (j, &g) in src.iter().enumerate() {
                        let sj = j as isize + v as isize - pw as isize;
                        if sj >= 0 && sj < width as isize {
                            dst[sj as usize] = dst[sj as usize] + g;
                        }
                    }
                }
            }
        }
    }
}
