//! Multidimensional FFT convolution on the node lattice.

use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::scalar::Real;

/// Forward or inverse FFT over every axis of an `m^n` array (axis 0 slowest).
pub(crate) fn fft_nd<T: Real>(data: &mut [Complex<T>], m: usize, n: usize, fft: &Arc<dyn Fft<T>>) {
    let total = data.len();
    let mut buf = vec![Complex::new(T::zero(), T::zero()); total];
    for axis in 0..n {
        let stride = m.pow((n - 1 - axis) as u32);
        if stride == 1 {
            fft.process(data);
            continue;
        }
        let lines = total / m;
        for l in 0..lines {
            let low = l % stride;
            let high = l / stride;
            let start = high * stride * m + low;
            for k in 0..m {
                buf[l * m + k] = data[start + k * stride];
            }
        }
        fft.process(&mut buf);
        for l in 0..lines {
            let low = l % stride;
            let high = l / stride;
            let start = high * stride * m + low;
            for k in 0..m {
                data[start + k * stride] = buf[l * m + k];
            }
        }
    }
}

/// Discrete convolution `(k * u)_i = Σ_j k(i − j) u_j` over an `N^n` lattice.
///
/// With `big = 2N` the convolution is linear (zero padding); with `big = N`
/// it is circular and the kernel must already be periodised.
pub struct Convolver<T: Real> {
    n: usize,
    small: usize,
    big: usize,
    kernel_hat: Vec<Complex<T>>,
    fwd: Arc<dyn Fft<T>>,
    inv: Arc<dyn Fft<T>>,
}

impl<T: Real> Convolver<T> {
    /// `kernel` receives the offset `d` with components in `(-big/2, big/2]`.
    pub fn new(n: usize, small: usize, big: usize, kernel: impl Fn(&[isize]) -> T) -> Self {
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(big);
        let inv = planner.plan_fft_inverse(big);
        let total = big.pow(n as u32);
        let mut kh = vec![Complex::new(T::zero(), T::zero()); total];
        let half = big as isize / 2;
        let mut d = [0isize; 3];
        for (idx, slot) in kh.iter_mut().enumerate() {
            let mut r = idx;
            for a in (0..n).rev() {
                let k = (r % big) as isize;
                r /= big;
                d[a] = if k > half { k - big as isize } else { k };
            }
            let linear_gap = big != small && d[..n].iter().any(|v| v.abs() >= small as isize);
            if !linear_gap {
                slot.re = kernel(&d[..n]);
            }
        }
        fft_nd(&mut kh, big, n, &fwd);
        Convolver {
            n,
            small,
            big,
            kernel_hat: kh,
            fwd,
            inv,
        }
    }

    pub fn is_circular(&self) -> bool {
        self.big == self.small
    }

    /// Fourier multipliers of the kernel (meaningful for circular convolvers).
    pub fn multipliers(&self) -> Vec<T> {
        self.kernel_hat.iter().map(|c| c.re).collect()
    }

    fn embed(&self, re: &[T], im: Option<&[T]>) -> Vec<Complex<T>> {
        let total = self.big.pow(self.n as u32);
        let mut buf = vec![Complex::new(T::zero(), T::zero()); total];
        let m = self.small;
        for idx in 0..m.pow(self.n as u32) {
            let mut r = idx;
            let mut big_idx = 0;
            let mut mult = 1;
            for _ in 0..self.n {
                big_idx += (r % m) * mult;
                r /= m;
                mult *= self.big;
            }
            buf[big_idx] = Complex::new(re[idx], im.map_or(T::zero(), |v| v[idx]));
        }
        buf
    }

    fn extract(&self, buf: &[Complex<T>], re: &mut [T], im: Option<&mut [T]>) {
        let m = self.small;
        let scale = T::one() / T::of(self.big.pow(self.n as u32));
        let mut im = im;
        for idx in 0..m.pow(self.n as u32) {
            let mut r = idx;
            let mut big_idx = 0;
            let mut mult = 1;
            for _ in 0..self.n {
                big_idx += (r % m) * mult;
                r /= m;
                mult *= self.big;
            }
            re[idx] = buf[big_idx].re * scale;
            if let Some(v) = im.as_deref_mut() {
                v[idx] = buf[big_idx].im * scale;
            }
        }
    }

    fn run(&self, re: &[T], im: Option<&[T]>) -> (Vec<T>, Option<Vec<T>>) {
        let mut buf = self.embed(re, im);
        fft_nd(&mut buf, self.big, self.n, &self.fwd);
        for (b, k) in buf.iter_mut().zip(&self.kernel_hat) {
            *b = *b * *k;
        }
        fft_nd(&mut buf, self.big, self.n, &self.inv);
        let len = self.small.pow(self.n as u32);
        let mut a = vec![T::zero(); len];
        match im {
            Some(_) => {
                let mut b = vec![T::zero(); len];
                self.extract(&buf, &mut a, Some(&mut b));
                (a, Some(b))
            }
            None => {
                self.extract(&buf, &mut a, None);
                (a, None)
            }
        }
    }

    pub fn apply(&self, u: &[T]) -> Vec<T> {
        self.run(u, None).0
    }

    /// Convolves several inputs, two per complex transform.
    pub fn apply_many(&self, inputs: &[&[T]]) -> Vec<Vec<T>> {
        let mut out = Vec::with_capacity(inputs.len());
        for pair in inputs.chunks(2) {
            if pair.len() == 2 {
                let (a, b) = self.run(pair[0], Some(pair[1]));
                out.push(a);
                out.push(b.unwrap());
            } else {
                out.push(self.run(pair[0], None).0);
            }
        }
        out
    }
}

/// Applies a real Fourier multiplier `m(k)` to a periodic `N^n` array.
pub(crate) fn apply_multiplier<T: Real>(
    u: &[T],
    m: usize,
    n: usize,
    multiplier: &[T],
    planner: &mut FftPlanner<T>,
) -> Vec<T> {
    let fwd = planner.plan_fft_forward(m);
    let inv = planner.plan_fft_inverse(m);
    let mut buf: Vec<Complex<T>> = u.iter().map(|v| Complex::new(*v, T::zero())).collect();
    fft_nd(&mut buf, m, n, &fwd);
    for (b, k) in buf.iter_mut().zip(multiplier) {
        *b = *b * *k;
    }
    fft_nd(&mut buf, m, n, &inv);
    let scale = T::one() / T::of(buf.len());
    buf.iter().map(|c| c.re * scale).collect()
}

/// Signed frequency index of FFT bin `k` on `m` points.
#[inline]
pub(crate) fn freq_index(k: usize, m: usize) -> isize {
    if k > m / 2 {
        k as isize - m as isize
    } else {
        k as isize
    }
}
