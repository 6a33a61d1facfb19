//! Small dense complex linear algebra used by the beamformer update.

use num_complex::Complex;

use crate::{CVector, Error, Result, Scalar};

/// `a^H b`.
#[inline]
pub fn inner<T: Scalar>(a: &[Complex<T>], b: &[Complex<T>]) -> Complex<T> {
    a.iter()
        .zip(b)
        .fold(Complex::new(T::zero(), T::zero()), |acc, (x, y)| acc + x.conj() * y)
}

#[inline]
pub fn norm_sqr<T: Scalar>(a: &[Complex<T>]) -> T {
    a.iter().map(|x| x.norm_sqr()).sum()
}

pub fn is_zero<T: Scalar>(a: &[Complex<T>]) -> bool {
    a.iter().all(|x| x.re == T::zero() && x.im == T::zero())
}

pub fn all_finite<T: Scalar>(a: &[Complex<T>]) -> bool {
    a.iter().all(|x| x.re.is_finite() && x.im.is_finite())
}

/// Row-major `n x n` Hermitian matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianMatrix<T> {
    n: usize,
    data: Vec<Complex<T>>,
}

impl<T: Scalar> HermitianMatrix<T> {
    pub fn scaled_identity(n: usize, diag: T) -> Self {
        let mut data = vec![Complex::new(T::zero(), T::zero()); n * n];
        for i in 0..n {
            data[i * n + i] = Complex::new(diag, T::zero());
        }
        Self { n, data }
    }

    /// Gram matrix `G[i][j] = v_iᴴ v_j`.
    pub fn gram(vectors: &[CVector<T>]) -> Self {
        let n = vectors.len();
        let mut data = vec![Complex::new(T::zero(), T::zero()); n * n];
        for i in 0..n {
            for j in i..n {
                let x = inner(&vectors[i], &vectors[j]);
                data[i * n + j] = x;
                data[j * n + i] = x.conj();
            }
            data[i * n + i].im = T::zero();
        }
        Self { n, data }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> Complex<T> {
        self.data[i * self.n + j]
    }

    pub fn add_to_diagonal(&mut self, value: T) {
        for i in 0..self.n {
            self.data[i * self.n + i].re += value;
        }
    }

    /// `self[i][j] += f(i, j)`; `f` must itself be Hermitian.
    pub fn add_from_fn(&mut self, f: impl Fn(usize, usize) -> Complex<T>) {
        let n = self.n;
        for i in 0..n {
            for j in 0..n {
                self.data[i * n + j] += f(i, j);
            }
        }
    }

    /// `self += scale * v v^H`.
    pub fn add_outer(&mut self, v: &[Complex<T>], scale: T) {
        let n = self.n;
        for i in 0..n {
            let vi = v[i] * scale;
            for j in 0..=i {
                let x = vi * v[j].conj();
                self.data[i * n + j] += x;
                if i != j {
                    self.data[j * n + i] += x.conj();
                }
            }
        }
    }

    pub fn mul_vec(&self, x: &[Complex<T>]) -> CVector<T> {
        let n = self.n;
        (0..n)
            .map(|i| {
                self.data[i * n..(i + 1) * n]
                    .iter()
                    .zip(x)
                    .fold(Complex::new(T::zero(), T::zero()), |acc, (a, b)| acc + a * b)
            })
            .collect()
    }

    /// Factorises `A = L Lᴴ`.
    pub fn cholesky(&self) -> Result<Cholesky<T>> {
        let n = self.n;
        if !all_finite(&self.data) {
            return Err(Error::NonFinite { field: "linear system" });
        }
        let mut l = vec![Complex::new(T::zero(), T::zero()); n * n];
        for j in 0..n {
            let mut d = self.data[j * n + j].re;
            for k in 0..j {
                d -= l[j * n + k].norm_sqr();
            }
            if !(d > T::zero()) {
                return Err(Error::NotPositiveDefinite);
            }
            let d = d.sqrt();
            l[j * n + j] = Complex::new(d, T::zero());
            for i in j + 1..n {
                let mut s = self.data[i * n + j];
                for k in 0..j {
                    s -= l[i * n + k] * l[j * n + k].conj();
                }
                l[i * n + j] = s.unscale(d);
            }
        }
        Ok(Cholesky { n, l })
    }

    /// Solves `A x = b` for positive definite `A`.
    pub fn solve_pd(&self, b: &[Complex<T>]) -> Result<CVector<T>> {
        if b.len() != self.n {
            return Err(Error::DimensionMismatch {
                field: "rhs",
                expected: self.n,
                found: b.len(),
            });
        }
        if !all_finite(b) {
            return Err(Error::NonFinite { field: "linear system" });
        }
        let c = self.cholesky()?;
        Ok(c.solve_upper(&c.solve_lower(b)))
    }
}

/// Lower-triangular Cholesky factor, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Cholesky<T> {
    n: usize,
    l: Vec<Complex<T>>,
}

impl<T: Scalar> Cholesky<T> {
    #[inline]
    pub fn get(&self, i: usize, j: usize) -> Complex<T> {
        self.l[i * self.n + j]
    }

    /// `L⁻¹ b`.
    pub fn solve_lower(&self, b: &[Complex<T>]) -> CVector<T> {
        let n = self.n;
        let mut y = b.to_vec();
        for i in 0..n {
            let mut s = y[i];
            for k in 0..i {
                s -= self.l[i * n + k] * y[k];
            }
            y[i] = s.unscale(self.l[i * n + i].re);
        }
        y
    }

    /// `L⁻ᴴ y`.
    pub fn solve_upper(&self, y: &[Complex<T>]) -> CVector<T> {
        let n = self.n;
        let mut x = y.to_vec();
        for i in (0..n).rev() {
            let mut s = x[i];
            for k in i + 1..n {
                s -= self.l[k * n + i].conj() * x[k];
            }
            x[i] = s.unscale(self.l[i * n + i].re);
        }
        x
    }
}

/// Coordinates in the span of `K` linearly independent vectors in `C^N`.
///
/// With `H = [v_1 … v_K]` and Gram matrix `HᴴH = L Lᴴ`, the map
/// `y ↦ H L⁻ᴴ y` is an isometry from `C^K` onto the span, and the
/// coordinates of `v_k` are the columns `r_k` of `Lᴴ`. Inner products with
/// the `v_k` are preserved: `(H L⁻ᴴ y)ᴴ v_k = yᴴ r_k`.
#[derive(Debug, Clone)]
pub struct ChannelSpan<T> {
    vectors: Vec<CVector<T>>,
    factor: Cholesky<T>,
    coords: Vec<CVector<T>>,
}

impl<T: Scalar> ChannelSpan<T> {
    /// `None` if the vectors are numerically dependent.
    pub fn new(vectors: &[CVector<T>]) -> Option<Self> {
        let factor = HermitianMatrix::gram(vectors).cholesky().ok()?;
        let k = vectors.len();
        let zero = Complex::new(T::zero(), T::zero());
        let coords = (0..k)
            .map(|j| {
                (0..k)
                    .map(|i| if i <= j { factor.get(j, i).conj() } else { zero })
                    .collect()
            })
            .collect();
        Some(Self {
            vectors: vectors.to_vec(),
            factor,
            coords,
        })
    }

    /// Coordinates `r_k` of the spanning vectors.
    pub fn coords(&self) -> &[CVector<T>] {
        &self.coords
    }

    /// Coordinates of the orthogonal projection of `w` onto the span.
    pub fn project(&self, w: &[Complex<T>]) -> CVector<T> {
        let hw: CVector<T> = self.vectors.iter().map(|v| inner(v, w)).collect();
        self.factor.solve_lower(&hw)
    }

    pub fn lift(&self, y: &[Complex<T>]) -> CVector<T> {
        let x = self.factor.solve_upper(y);
        let n = self.vectors.first().map_or(0, Vec::len);
        let mut w = vec![Complex::new(T::zero(), T::zero()); n];
        for (v, xk) in self.vectors.iter().zip(&x) {
            for (wi, vi) in w.iter_mut().zip(v) {
                *wi += vi * xk;
            }
        }
        w
    }
}
