//! Truncated multivariate power series in the boundary-adapted coordinates
//! `(x_1, ..., x_n, t)`, plus square matrices of such series.
//!
//! Coefficients are stored densely against a shared [`Layout`] that lists every
//! exponent multi-index of total degree `<= degree_bound` in lexicographic
//! order. A zero slot means the term is absent; [`MultiSeries::terms`] only ever
//! yields non-zero coefficients. All loops run in layout order, so float
//! results are reproducible bit for bit on a given platform.

use std::collections::HashMap;
use std::fmt;
use std::sync::{Arc, Mutex, OnceLock};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Exponent bookkeeping shared by every series with the same shape.
pub struct Layout {
    n_vars: usize,
    degree_bound: usize,
    exponents: Vec<Vec<u8>>,
    degrees: Vec<usize>,
    index: HashMap<Vec<u8>, usize>,
    products: OnceLock<Vec<(u32, u32, u32)>>,
    derivatives: OnceLock<Vec<Vec<Option<(usize, u8)>>>>,
}

impl fmt::Debug for Layout {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Layout")
            .field("n_vars", &self.n_vars)
            .field("degree_bound", &self.degree_bound)
            .field("len", &self.exponents.len())
            .finish()
    }
}

impl Layout {
    /// Shared layout for the given shape; repeated calls return the same `Arc`.
    pub fn get(n_vars: usize, degree_bound: usize) -> Arc<Layout> {
        static CACHE: OnceLock<Mutex<HashMap<(usize, usize), Arc<Layout>>>> = OnceLock::new();
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        let mut guard = cache.lock().expect("layout cache poisoned");
        guard
            .entry((n_vars, degree_bound))
            .or_insert_with(|| Arc::new(Layout::build(n_vars, degree_bound)))
            .clone()
    }

    fn build(n_vars: usize, degree_bound: usize) -> Layout {
        let mut exponents = Vec::new();
        let mut current = vec![0u8; n_vars];
        fn rec(pos: usize, left: usize, cur: &mut Vec<u8>, out: &mut Vec<Vec<u8>>) {
            if pos == cur.len() {
                out.push(cur.clone());
                return;
            }
            for e in 0..=left {
                cur[pos] = e as u8;
                rec(pos + 1, left - e, cur, out);
            }
            cur[pos] = 0;
        }
        rec(0, degree_bound, &mut current, &mut exponents);
        exponents.sort();
        let degrees = exponents
            .iter()
            .map(|e| e.iter().map(|&v| v as usize).sum())
            .collect();
        let index = exponents
            .iter()
            .enumerate()
            .map(|(i, e)| (e.clone(), i))
            .collect();
        Layout {
            n_vars,
            degree_bound,
            exponents,
            degrees,
            index,
            products: OnceLock::new(),
            derivatives: OnceLock::new(),
        }
    }

    pub fn n_vars(&self) -> usize {
        self.n_vars
    }

    pub fn degree_bound(&self) -> usize {
        self.degree_bound
    }

    pub fn len(&self) -> usize {
        self.exponents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.exponents.is_empty()
    }

    pub fn exponent(&self, slot: usize) -> &[u8] {
        &self.exponents[slot]
    }

    pub fn degree(&self, slot: usize) -> usize {
        self.degrees[slot]
    }

    pub fn slot(&self, exponent: &[u8]) -> Option<usize> {
        self.index.get(exponent).copied()
    }

    /// `(i, j, k)` with `exp[i] + exp[j] = exp[k]`, degree-truncated, in layout order.
    fn products(&self) -> &[(u32, u32, u32)] {
        self.products.get_or_init(|| {
            let mut out = Vec::new();
            let mut sum = vec![0u8; self.n_vars];
            for (i, a) in self.exponents.iter().enumerate() {
                for (j, b) in self.exponents.iter().enumerate() {
                    if self.degrees[i] + self.degrees[j] > self.degree_bound {
                        continue;
                    }
                    for v in 0..self.n_vars {
                        sum[v] = a[v] + b[v];
                    }
                    let k = self.index[&sum];
                    out.push((i as u32, j as u32, k as u32));
                }
            }
            out
        })
    }

    /// For each variable and slot, the slot of the lowered exponent and the factor.
    fn derivatives(&self) -> &[Vec<Option<(usize, u8)>>] {
        self.derivatives.get_or_init(|| {
            (0..self.n_vars)
                .map(|v| {
                    self.exponents
                        .iter()
                        .map(|e| {
                            if e[v] == 0 {
                                None
                            } else {
                                let mut lowered = e.clone();
                                lowered[v] -= 1;
                                Some((self.index[&lowered], e[v]))
                            }
                        })
                        .collect()
                })
                .collect()
        })
    }
}

/// A truncated power series (polynomial) in `n_vars` variables.
#[derive(Clone)]
pub struct MultiSeries<T: Scalar> {
    layout: Arc<Layout>,
    coeffs: Vec<T>,
}

impl<T: Scalar> fmt::Debug for MultiSeries<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut list = f.debug_map();
        for (e, c) in self.terms() {
            list.entry(&e, c);
        }
        list.finish()
    }
}

impl<T: Scalar> PartialEq for MultiSeries<T> {
    fn eq(&self, other: &Self) -> bool {
        self.same_shape(other) && self.coeffs == other.coeffs
    }
}

impl<T: Scalar> MultiSeries<T> {
    pub fn zero(n_vars: usize, degree_bound: usize) -> Self {
        let layout = Layout::get(n_vars, degree_bound);
        let coeffs = vec![T::zero(); layout.len()];
        MultiSeries { layout, coeffs }
    }

    pub fn constant(n_vars: usize, degree_bound: usize, c: T) -> Self {
        let mut s = Self::zero(n_vars, degree_bound);
        s.coeffs[0] = c;
        s
    }

    pub fn one(n_vars: usize, degree_bound: usize) -> Self {
        Self::constant(n_vars, degree_bound, T::one())
    }

    /// The coordinate function `x_var`.
    pub fn variable(n_vars: usize, degree_bound: usize, var: usize) -> Result<Self> {
        let mut e = vec![0u8; n_vars];
        if var >= n_vars {
            return Err(Error::Shape(format!("variable {var} out of range for {n_vars} variables")));
        }
        e[var] = 1;
        let mut s = Self::zero(n_vars, degree_bound);
        s.add_term(&e, T::one())?;
        Ok(s)
    }

    /// Builds a series from `(exponent, coefficient)` pairs; repeated exponents add up.
    pub fn from_terms<'a, I>(n_vars: usize, degree_bound: usize, terms: I) -> Result<Self>
    where
        I: IntoIterator<Item = (&'a [u8], T)>,
    {
        let mut s = Self::zero(n_vars, degree_bound);
        for (e, c) in terms {
            s.add_term(e, c)?;
        }
        Ok(s)
    }

    pub fn layout(&self) -> &Arc<Layout> {
        &self.layout
    }

    pub fn n_vars(&self) -> usize {
        self.layout.n_vars
    }

    pub fn degree_bound(&self) -> usize {
        self.layout.degree_bound
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.layout, &other.layout)
    }

    fn check_shape(&self, other: &Self) -> Result<()> {
        if self.same_shape(other) {
            Ok(())
        } else {
            Err(Error::Shape(format!(
                "series shapes differ: ({} vars, degree {}) vs ({} vars, degree {})",
                self.n_vars(),
                self.degree_bound(),
                other.n_vars(),
                other.degree_bound()
            )))
        }
    }

    /// Adds `c` to the coefficient of `exponent`; terms above the degree bound are dropped.
    pub fn add_term(&mut self, exponent: &[u8], c: T) -> Result<()> {
        if exponent.len() != self.n_vars() {
            return Err(Error::Shape(format!(
                "exponent of length {} for {} variables",
                exponent.len(),
                self.n_vars()
            )));
        }
        let deg: usize = exponent.iter().map(|&e| e as usize).sum();
        if deg > self.degree_bound() {
            return Ok(());
        }
        let slot = self.layout.index[exponent];
        let cur = std::mem::replace(&mut self.coeffs[slot], T::zero());
        self.coeffs[slot] = cur + c;
        Ok(())
    }

    /// Coefficient of `exponent` (zero when absent or above the bound).
    pub fn coeff(&self, exponent: &[u8]) -> T {
        self.layout
            .slot(exponent)
            .map(|s| self.coeffs[s].clone())
            .unwrap_or_else(T::zero)
    }

    pub fn coeff_slot(&self, slot: usize) -> &T {
        &self.coeffs[slot]
    }

    pub fn coeff_slot_mut(&mut self, slot: usize) -> &mut T {
        &mut self.coeffs[slot]
    }

    /// Non-zero terms in lexicographic exponent order.
    pub fn terms(&self) -> impl Iterator<Item = (&[u8], &T)> + '_ {
        self.coeffs
            .iter()
            .enumerate()
            .filter(|(_, c)| !c.is_zero())
            .map(move |(i, c)| (self.layout.exponent(i), c))
    }

    pub fn is_zero_series(&self) -> bool {
        self.coeffs.iter().all(|c| c.is_zero())
    }

    /// Highest total degree carrying a non-zero coefficient.
    pub fn max_degree(&self) -> Option<usize> {
        self.coeffs
            .iter()
            .enumerate()
            .filter(|(_, c)| !c.is_zero())
            .map(|(i, _)| self.layout.degree(i))
            .max()
    }

    /// Part of total degree exactly `k`.
    pub fn homogeneous_part(&self, k: usize) -> Self {
        let mut out = Self::zero(self.n_vars(), self.degree_bound());
        for (i, c) in self.coeffs.iter().enumerate() {
            if self.layout.degree(i) == k {
                out.coeffs[i] = c.clone();
            }
        }
        out
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_shape(other)?;
        let coeffs = self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| a.clone() + b.clone())
            .collect();
        Ok(MultiSeries { layout: self.layout.clone(), coeffs })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check_shape(other)?;
        let coeffs = self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| a.clone() - b.clone())
            .collect();
        Ok(MultiSeries { layout: self.layout.clone(), coeffs })
    }

    pub fn neg(&self) -> Self {
        MultiSeries {
            layout: self.layout.clone(),
            coeffs: self.coeffs.iter().map(|c| -c.clone()).collect(),
        }
    }

    pub fn scale(&self, k: &T) -> Self {
        MultiSeries {
            layout: self.layout.clone(),
            coeffs: self.coeffs.iter().map(|c| c.clone() * k.clone()).collect(),
        }
    }

    /// `self += k * other`.
    pub fn axpy(&mut self, k: &T, other: &Self) -> Result<()> {
        self.check_shape(other)?;
        for (a, b) in self.coeffs.iter_mut().zip(&other.coeffs) {
            a.mul_add_assign(k, b);
        }
        Ok(())
    }

    /// Truncated product.
    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.check_shape(other)?;
        let mut coeffs = vec![T::zero(); self.layout.len()];
        for &(i, j, k) in self.layout.products() {
            let a = &self.coeffs[i as usize];
            if a.is_zero() {
                continue;
            }
            let b = &other.coeffs[j as usize];
            if b.is_zero() {
                continue;
            }
            coeffs[k as usize].mul_add_assign(a, b);
        }
        Ok(MultiSeries { layout: self.layout.clone(), coeffs })
    }

    /// Formal partial derivative; the degree bound is kept, so the top-degree
    /// slots of the result are simply empty.
    pub fn derive(&self, var: usize) -> Result<Self> {
        if var >= self.n_vars() {
            return Err(Error::Shape(format!(
                "derivative in variable {var} of a series in {} variables",
                self.n_vars()
            )));
        }
        let table = &self.layout.derivatives()[var];
        let mut coeffs = vec![T::zero(); self.layout.len()];
        for (slot, entry) in table.iter().enumerate() {
            if let Some((target, factor)) = entry {
                let c = &self.coeffs[slot];
                if !c.is_zero() {
                    coeffs[*target] = c.clone() * T::from_ratio(*factor as i64, 1);
                }
            }
        }
        Ok(MultiSeries { layout: self.layout.clone(), coeffs })
    }

    /// Substitutes every variable `v -> r v`: a degree-k term picks up `r^k`.
    pub fn dilate(&self, r: &T) -> Result<Self> {
        if r.to_f64() <= 0.0 {
            return Err(Error::Domain(format!("dilation factor must be positive, got {r:?}")));
        }
        Ok(self.dilate_unchecked(r))
    }

    pub(crate) fn dilate_unchecked(&self, r: &T) -> Self {
        let mut powers = vec![T::one()];
        for k in 1..=self.degree_bound() {
            let next = powers[k - 1].clone() * r.clone();
            powers.push(next);
        }
        MultiSeries {
            layout: self.layout.clone(),
            coeffs: self
                .coeffs
                .iter()
                .enumerate()
                .map(|(i, c)| c.clone() * powers[self.layout.degree(i)].clone())
                .collect(),
        }
    }

    pub fn map_coeffs<U: Scalar>(&self, f: impl Fn(&T) -> U) -> MultiSeries<U> {
        MultiSeries {
            layout: self.layout.clone(),
            coeffs: self.coeffs.iter().map(f).collect(),
        }
    }

    /// One-way conversion to floating point.
    pub fn to_f64(&self) -> MultiSeries<f64> {
        self.map_coeffs(|c| c.to_f64())
    }

    /// Evaluation at `point` (length `n_vars`), summing terms in layout order.
    pub fn eval(&self, point: &[T]) -> Result<T> {
        if point.len() != self.n_vars() {
            return Err(Error::Shape(format!(
                "point of length {} for {} variables",
                point.len(),
                self.n_vars()
            )));
        }
        let powers = power_table(point, self.degree_bound());
        let mut acc = T::zero();
        for (slot, c) in self.coeffs.iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            let mut m = c.clone();
            for (v, &e) in self.layout.exponent(slot).iter().enumerate() {
                if e > 0 {
                    m = m * powers[v][e as usize].clone();
                }
            }
            acc = acc + m;
        }
        Ok(acc)
    }
}

fn power_table<T: Scalar>(point: &[T], degree: usize) -> Vec<Vec<T>> {
    point
        .iter()
        .map(|p| {
            let mut row = Vec::with_capacity(degree + 1);
            row.push(T::one());
            for k in 1..=degree {
                let next = row[k - 1].clone() * p.clone();
                row.push(next);
            }
            row
        })
        .collect()
}

impl MultiSeries<f64> {
    /// Float evaluation without the generic overhead; same summation order as [`MultiSeries::eval`].
    pub fn eval_f64(&self, point: &[f64]) -> f64 {
        debug_assert_eq!(point.len(), self.n_vars());
        let d = self.degree_bound();
        let mut powers = [[1.0f64; 16]; 8];
        let use_stack = point.len() <= 8 && d < 16;
        if !use_stack {
            return self.eval(point).unwrap_or(f64::NAN);
        }
        for (v, &p) in point.iter().enumerate() {
            for k in 1..=d {
                powers[v][k] = powers[v][k - 1] * p;
            }
        }
        let mut acc = 0.0;
        for (slot, &c) in self.coeffs.iter().enumerate() {
            if c == 0.0 {
                continue;
            }
            let mut m = c;
            for (v, &e) in self.layout.exponent(slot).iter().enumerate() {
                if e > 0 {
                    m *= powers[v][e as usize];
                }
            }
            acc += m;
        }
        acc
    }

    pub fn max_abs_coeff(&self) -> f64 {
        self.coeffs.iter().fold(0.0, |m, c| m.max(c.abs()))
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }
}

/// Square matrix of series sharing one shape.
#[derive(Clone, Debug, PartialEq)]
pub struct SeriesMatrix<T: Scalar> {
    dim: usize,
    entries: Vec<MultiSeries<T>>,
    symmetric: bool,
}

impl<T: Scalar> SeriesMatrix<T> {
    pub fn from_entries(dim: usize, entries: Vec<MultiSeries<T>>, symmetric: bool) -> Result<Self> {
        if entries.len() != dim * dim || dim == 0 {
            return Err(Error::Shape(format!("{} entries for a {dim}x{dim} matrix", entries.len())));
        }
        if entries.iter().any(|e| !e.same_shape(&entries[0])) {
            return Err(Error::Shape("matrix entries have different series shapes".into()));
        }
        let m = SeriesMatrix { dim, entries, symmetric };
        if symmetric {
            for i in 0..dim {
                for j in (i + 1)..dim {
                    if m.get(i, j) != m.get(j, i) {
                        return Err(Error::Validation(format!(
                            "matrix flagged symmetric but entries ({i},{j}) and ({j},{i}) differ"
                        )));
                    }
                }
            }
        }
        Ok(m)
    }

    pub fn identity(dim: usize, n_vars: usize, degree_bound: usize) -> Self {
        let entries = (0..dim * dim)
            .map(|k| {
                if k / dim == k % dim {
                    MultiSeries::one(n_vars, degree_bound)
                } else {
                    MultiSeries::zero(n_vars, degree_bound)
                }
            })
            .collect();
        SeriesMatrix { dim, entries, symmetric: true }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    pub fn n_vars(&self) -> usize {
        self.entries[0].n_vars()
    }

    pub fn degree_bound(&self) -> usize {
        self.entries[0].degree_bound()
    }

    pub fn get(&self, i: usize, j: usize) -> &MultiSeries<T> {
        &self.entries[i * self.dim + j]
    }

    pub fn entries(&self) -> &[MultiSeries<T>] {
        &self.entries
    }

    fn check_shape(&self, other: &Self) -> Result<()> {
        if self.dim != other.dim || !self.entries[0].same_shape(&other.entries[0]) {
            return Err(Error::Shape("series matrices of different shapes".into()));
        }
        Ok(())
    }

    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.check_shape(other)?;
        let d = self.dim;
        let mut entries = Vec::with_capacity(d * d);
        for i in 0..d {
            for j in 0..d {
                let mut acc = MultiSeries::zero(self.n_vars(), self.degree_bound());
                for k in 0..d {
                    let a = self.get(i, k);
                    let b = other.get(k, j);
                    if a.is_zero_series() || b.is_zero_series() {
                        continue;
                    }
                    acc = acc.add(&a.mul(b)?)?;
                }
                entries.push(acc);
            }
        }
        Ok(SeriesMatrix { dim: d, entries, symmetric: false })
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_shape(other)?;
        let entries = self
            .entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| a.add(b))
            .collect::<Result<_>>()?;
        Ok(SeriesMatrix { dim: self.dim, entries, symmetric: self.symmetric && other.symmetric })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check_shape(other)?;
        let entries = self
            .entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| a.sub(b))
            .collect::<Result<_>>()?;
        Ok(SeriesMatrix { dim: self.dim, entries, symmetric: self.symmetric && other.symmetric })
    }

    pub fn map_entries(&self, f: impl Fn(&MultiSeries<T>) -> Result<MultiSeries<T>>) -> Result<Self> {
        let entries = self.entries.iter().map(f).collect::<Result<_>>()?;
        Ok(SeriesMatrix { dim: self.dim, entries, symmetric: self.symmetric })
    }

    pub fn dilate(&self, r: &T) -> Result<Self> {
        self.map_entries(|e| e.dilate(r))
    }

    pub fn derive(&self, var: usize) -> Result<Self> {
        self.map_entries(|e| e.derive(var))
    }

    /// Checks whether the degree-0 part equals the identity matrix.
    pub fn degree_zero_is_identity(&self) -> bool {
        (0..self.dim).all(|i| {
            (0..self.dim).all(|j| {
                let c = self.get(i, j).coeff_slot(0);
                if i == j {
                    c.is_one()
                } else {
                    c.is_zero()
                }
            })
        })
    }

    /// Two-sided inverse modulo terms above the degree bound, via the truncated
    /// Neumann sum `sum_j (-1)^j (M - I)^j`. Only `j <= degree_bound` contribute
    /// because `M - I` has no constant part.
    pub fn invert(&self) -> Result<Self> {
        if !self.degree_zero_is_identity() {
            return Err(Error::Precondition(
                "series matrix inversion needs an identity degree-0 part".into(),
            ));
        }
        let id = SeriesMatrix::identity(self.dim, self.n_vars(), self.degree_bound());
        let excess = self.sub(&id)?;
        let mut term = id.clone();
        let mut sum = id;
        for _ in 0..self.degree_bound() {
            term = term.mul(&excess)?;
            term = term.map_entries(|e| Ok(e.neg()))?;
            sum = sum.add(&term)?;
        }
        sum.symmetric = self.symmetric;
        if self.symmetric {
            sum.symmetrize();
        }
        Ok(sum)
    }

    /// Replaces `(i,j)` and `(j,i)` with their average and sets the symmetry flag.
    pub fn symmetrize(&mut self) {
        let half = T::from_ratio(1, 2);
        for i in 0..self.dim {
            for j in (i + 1)..self.dim {
                let avg = self.get(i, j).add(self.get(j, i)).expect("same shape").scale(&half);
                self.entries[i * self.dim + j] = avg.clone();
                self.entries[j * self.dim + i] = avg;
            }
        }
        self.symmetric = true;
    }

    pub fn to_f64(&self) -> SeriesMatrix<f64> {
        SeriesMatrix {
            dim: self.dim,
            entries: self.entries.iter().map(|e| e.to_f64()).collect(),
            symmetric: self.symmetric,
        }
    }

    /// True when every coefficient of degree `<= degree_bound` of `self - I` vanishes.
    pub fn is_identity(&self) -> bool {
        self.degree_zero_is_identity()
            && self.entries.iter().all(|e| (1..e.layout().len()).all(|s| e.coeff_slot(s).is_zero()))
    }
}

impl SeriesMatrix<f64> {
    pub fn eval_f64(&self, point: &[f64]) -> Vec<f64> {
        self.entries.iter().map(|e| e.eval_f64(point)).collect()
    }
}
