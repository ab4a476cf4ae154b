//! Second-fundamental-form and curvature coefficients at one boundary point.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Dense tensor with every index ranging over `0..n`, stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor<T> {
    n: usize,
    rank: usize,
    data: Vec<T>,
}

impl<T: Scalar> Tensor<T> {
    pub fn zeros(n: usize, rank: usize) -> Self {
        Tensor { n, rank, data: vec![T::zero(); n.pow(rank as u32)] }
    }

    pub fn from_vec(n: usize, rank: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != n.pow(rank as u32) {
            return Err(Error::Shape(format!(
                "rank-{rank} tensor over {n} indices needs {} entries, got {}",
                n.pow(rank as u32),
                data.len()
            )));
        }
        Ok(Tensor { n, rank, data })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    #[inline]
    fn offset(&self, idx: &[usize]) -> usize {
        debug_assert_eq!(idx.len(), self.rank);
        idx.iter().fold(0, |acc, &i| acc * self.n + i)
    }

    #[inline]
    pub fn at(&self, idx: &[usize]) -> &T {
        &self.data[self.offset(idx)]
    }

    pub fn set(&mut self, idx: &[usize], v: T) {
        let o = self.offset(idx);
        self.data[o] = v;
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|v| v.is_zero())
    }

    pub fn map<U: Scalar>(&self, f: impl Fn(&T) -> U) -> Tensor<U> {
        Tensor { n: self.n, rank: self.rank, data: self.data.iter().map(f).collect() }
    }

    /// All index tuples in row-major order.
    pub fn indices(&self) -> impl Iterator<Item = Vec<usize>> {
        let (n, rank) = (self.n, self.rank);
        (0..n.pow(rank as u32)).map(move |mut flat| {
            let mut idx = vec![0; rank];
            for slot in (0..rank).rev() {
                idx[slot] = flat % n;
                flat /= n;
            }
            idx
        })
    }

    /// Averages over the swap of index positions `a` and `b`.
    pub fn symmetrize(&mut self, a: usize, b: usize) {
        let half = T::from_ratio(1, 2);
        let snapshot = self.clone();
        for idx in snapshot.indices() {
            let mut sw = idx.clone();
            sw.swap(a, b);
            let v = (snapshot.at(&idx).clone() + snapshot.at(&sw).clone()) * half.clone();
            self.set(&idx, v);
        }
    }

    fn check_swap(&self, name: &str, a: usize, b: usize, sign: i64, tol: f64) -> Result<()> {
        for idx in self.indices() {
            let mut sw = idx.clone();
            sw.swap(a, b);
            let lhs = self.at(&idx).clone();
            let rhs = self.at(&sw).clone() * T::from_ratio(sign, 1);
            if !lhs.near(&rhs, tol) {
                let kind = if sign > 0 { "symmetry" } else { "antisymmetry" };
                return Err(Error::Validation(format!(
                    "{name}: {kind} in index positions ({a},{b}) violated at {idx:?}"
                )));
            }
        }
        Ok(())
    }

    fn check_pair_exchange(&self, name: &str, tol: f64) -> Result<()> {
        for idx in self.indices() {
            let mut sw = idx.clone();
            sw.swap(0, 2);
            sw.swap(1, 3);
            if !self.at(&idx).near(self.at(&sw), tol) {
                return Err(Error::Validation(format!(
                    "{name}: pair-exchange symmetry (i,k)<->(j,l) violated at {idx:?}"
                )));
            }
        }
        Ok(())
    }
}

/// All coefficients entering the fourth-order inverse-metric expansion in
/// boundary-adapted coordinates, evaluated at one boundary point.
///
/// Index conventions (indices after the first two are covariant boundary
/// derivatives, `t` marks a normal derivative):
/// `h[i,j]`, `h1[i,j,k]`, `h2[i,j,k,l]`, `h3[i,j,k,l,m]`;
/// `rtt[i,j] = R_{titj}`, `rtt_k[i,j,k]`, `rtt_t[i,j]`, `rtt_kl[i,j,k,l]`,
/// `rtt_tk[i,j,k]`, `rtt_tt[i,j]`;
/// `rb[i,k,j,l]` the boundary curvature, `rb_m[i,k,j,l,m]`, `rb_mp[i,k,j,l,m,p]`.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundaryJet<T> {
    pub n: usize,
    pub h: Tensor<T>,
    pub h1: Tensor<T>,
    pub h2: Tensor<T>,
    pub h3: Tensor<T>,
    pub rtt: Tensor<T>,
    pub rtt_k: Tensor<T>,
    pub rtt_t: Tensor<T>,
    pub rtt_kl: Tensor<T>,
    pub rtt_tk: Tensor<T>,
    pub rtt_tt: Tensor<T>,
    pub rb: Tensor<T>,
    pub rb_m: Tensor<T>,
    pub rb_mp: Tensor<T>,
}

/// Slot names with their ranks, in a fixed order shared by the JSON format.
pub const SLOTS: [(&str, usize); 13] = [
    ("h", 2),
    ("h1", 3),
    ("h2", 4),
    ("h3", 5),
    ("rtt", 2),
    ("rtt_k", 3),
    ("rtt_t", 2),
    ("rtt_kl", 4),
    ("rtt_tk", 3),
    ("rtt_tt", 2),
    ("rb", 4),
    ("rb_m", 5),
    ("rb_mp", 6),
];

impl<T: Scalar> BoundaryJet<T> {
    pub fn zero(n: usize) -> Self {
        BoundaryJet {
            n,
            h: Tensor::zeros(n, 2),
            h1: Tensor::zeros(n, 3),
            h2: Tensor::zeros(n, 4),
            h3: Tensor::zeros(n, 5),
            rtt: Tensor::zeros(n, 2),
            rtt_k: Tensor::zeros(n, 3),
            rtt_t: Tensor::zeros(n, 2),
            rtt_kl: Tensor::zeros(n, 4),
            rtt_tk: Tensor::zeros(n, 3),
            rtt_tt: Tensor::zeros(n, 2),
            rb: Tensor::zeros(n, 4),
            rb_m: Tensor::zeros(n, 5),
            rb_mp: Tensor::zeros(n, 6),
        }
    }

    /// Boundary with `h = kappa * I` and nothing else.
    pub fn umbilic(n: usize, kappa: T) -> Self {
        let mut jet = Self::zero(n);
        for i in 0..n {
            jet.h.set(&[i, i], kappa.clone());
        }
        jet
    }

    pub fn slots(&self) -> [(&'static str, &Tensor<T>); 13] {
        [
            ("h", &self.h),
            ("h1", &self.h1),
            ("h2", &self.h2),
            ("h3", &self.h3),
            ("rtt", &self.rtt),
            ("rtt_k", &self.rtt_k),
            ("rtt_t", &self.rtt_t),
            ("rtt_kl", &self.rtt_kl),
            ("rtt_tk", &self.rtt_tk),
            ("rtt_tt", &self.rtt_tt),
            ("rb", &self.rb),
            ("rb_m", &self.rb_m),
            ("rb_mp", &self.rb_mp),
        ]
    }

    fn slots_mut(&mut self) -> [&mut Tensor<T>; 13] {
        [
            &mut self.h,
            &mut self.h1,
            &mut self.h2,
            &mut self.h3,
            &mut self.rtt,
            &mut self.rtt_k,
            &mut self.rtt_t,
            &mut self.rtt_kl,
            &mut self.rtt_tk,
            &mut self.rtt_tt,
            &mut self.rb,
            &mut self.rb_m,
            &mut self.rb_mp,
        ]
    }

    pub fn map<U: Scalar>(&self, f: impl Fn(&T) -> U + Copy) -> BoundaryJet<U> {
        BoundaryJet {
            n: self.n,
            h: self.h.map(f),
            h1: self.h1.map(f),
            h2: self.h2.map(f),
            h3: self.h3.map(f),
            rtt: self.rtt.map(f),
            rtt_k: self.rtt_k.map(f),
            rtt_t: self.rtt_t.map(f),
            rtt_kl: self.rtt_kl.map(f),
            rtt_tk: self.rtt_tk.map(f),
            rtt_tt: self.rtt_tt.map(f),
            rb: self.rb.map(f),
            rb_m: self.rb_m.map(f),
            rb_mp: self.rb_mp.map(f),
        }
    }

    pub fn to_f64(&self) -> BoundaryJet<f64> {
        self.map(|v| v.to_f64())
    }

    /// Checks shapes, finiteness and the index symmetries the expansion assumes.
    pub fn validate(&self) -> Result<()> {
        let tol = 1e-12;
        for ((name, tensor), (_, rank)) in self.slots().iter().zip(SLOTS.iter()) {
            if tensor.n() != self.n || tensor.rank() != *rank {
                return Err(Error::Shape(format!(
                    "{name}: expected rank {rank} over {} indices",
                    self.n
                )));
            }
            if let Some(idx) = tensor.indices().find(|i| !tensor.at(i).is_finite_value()) {
                return Err(Error::Validation(format!("{name}: non-finite entry at {idx:?}")));
            }
        }
        for (name, tensor) in [
            ("h", &self.h),
            ("h1", &self.h1),
            ("h2", &self.h2),
            ("h3", &self.h3),
            ("rtt", &self.rtt),
            ("rtt_k", &self.rtt_k),
            ("rtt_t", &self.rtt_t),
            ("rtt_kl", &self.rtt_kl),
            ("rtt_tk", &self.rtt_tk),
            ("rtt_tt", &self.rtt_tt),
        ] {
            tensor.check_swap(name, 0, 1, 1, tol)?;
        }
        for (name, tensor) in [("rb", &self.rb), ("rb_m", &self.rb_m), ("rb_mp", &self.rb_mp)] {
            tensor.check_swap(name, 0, 1, -1, tol)?;
            tensor.check_swap(name, 2, 3, -1, tol)?;
            tensor.check_pair_exchange(name, tol)?;
        }
        Ok(())
    }

    /// Trace `h_{ii}`.
    pub fn mean_curvature(&self) -> T {
        (0..self.n).fold(T::zero(), |acc, i| acc + self.h.at(&[i, i]).clone())
    }
}

fn random_entry<T: Scalar, R: Rng>(rng: &mut R, denominator: i64) -> T {
    let num = rng.gen_range(-4..=4);
    T::from_ratio(num, 4 * denominator)
}

fn random_tensor<T: Scalar, R: Rng>(rng: &mut R, n: usize, rank: usize, den: i64) -> Tensor<T> {
    let len = n.pow(rank as u32);
    let data = (0..len).map(|_| random_entry(rng, den)).collect();
    Tensor { n, rank, data }
}

fn random_sym_base<T: Scalar, R: Rng>(rng: &mut R, n: usize, rank: usize, den: i64) -> Tensor<T> {
    let mut t = random_tensor(rng, n, rank, den);
    t.symmetrize(0, 1);
    t
}

/// Random tensor with the algebraic symmetries of a curvature tensor in its
/// first four slots, built as `sum_s S_ij S_kl - S_il S_kj` from symmetric `S`.
fn random_curvature<T: Scalar, R: Rng>(rng: &mut R, n: usize, rank: usize, den: i64) -> Tensor<T> {
    let mut out: Tensor<T> = Tensor::zeros(n, rank);
    let extra = rank - 4;
    let tail_count = n.pow(extra as u32);
    for tail in 0..tail_count {
        for _ in 0..2 {
            let s: Tensor<T> = random_sym_base(rng, n, 2, den);
            for i in 0..n {
                for k in 0..n {
                    for j in 0..n {
                        for l in 0..n {
                            let v = s.at(&[i, j]).clone() * s.at(&[k, l]).clone()
                                - s.at(&[i, l]).clone() * s.at(&[k, j]).clone();
                            let o = (((i * n + k) * n + j) * n + l) * tail_count + tail;
                            out.data[o] = out.data[o].clone() + v;
                        }
                    }
                }
            }
        }
    }
    out
}

/// Random jet satisfying every invariant checked by [`BoundaryJet::validate`].
/// Entries are multiples of `1/(4*denominator)` bounded by `1/denominator`, so
/// they are exact in both coefficient modes.
pub fn random_jet<T: Scalar, R: Rng>(rng: &mut R, n: usize, denominator: i64) -> BoundaryJet<T> {
    let d = denominator;
    BoundaryJet {
        n,
        h: random_sym_base(rng, n, 2, d),
        h1: random_sym_base(rng, n, 3, d),
        h2: random_sym_base(rng, n, 4, d),
        h3: random_sym_base(rng, n, 5, d),
        rtt: random_sym_base(rng, n, 2, d),
        rtt_k: random_sym_base(rng, n, 3, d),
        rtt_t: random_sym_base(rng, n, 2, d),
        rtt_kl: random_sym_base(rng, n, 4, d),
        rtt_tk: random_sym_base(rng, n, 3, d),
        rtt_tt: random_sym_base(rng, n, 2, d),
        rb: random_curvature(rng, n, 4, 2 * d),
        rb_m: random_curvature(rng, n, 5, 2 * d),
        rb_mp: random_curvature(rng, n, 6, 2 * d),
    }
}

/// JSON form of a jet: each slot is a flat row-major array; missing slots are zero.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JetRecord {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h1: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h2: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h3: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rtt: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rtt_k: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rtt_t: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rtt_kl: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rtt_tk: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rtt_tt: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rb: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rb_m: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rb_mp: Option<Vec<f64>>,
}

impl JetRecord {
    fn fields(&self) -> [&Option<Vec<f64>>; 13] {
        [
            &self.h,
            &self.h1,
            &self.h2,
            &self.h3,
            &self.rtt,
            &self.rtt_k,
            &self.rtt_t,
            &self.rtt_kl,
            &self.rtt_tk,
            &self.rtt_tt,
            &self.rb,
            &self.rb_m,
            &self.rb_mp,
        ]
    }

    /// Builds and validates the jet.
    pub fn to_jet(&self, n: usize) -> Result<BoundaryJet<f64>> {
        let mut jet = BoundaryJet::zero(n);
        for ((field, slot), (name, rank)) in self.fields().into_iter().zip(jet.slots_mut()).zip(SLOTS) {
            if let Some(values) = field {
                *slot = Tensor::from_vec(n, rank, values.clone())
                    .map_err(|e| Error::Validation(format!("jet slot {name}: {e}")))?;
            }
        }
        jet.validate()?;
        Ok(jet)
    }

    pub fn from_jet(jet: &BoundaryJet<f64>) -> Self {
        let mut rec = JetRecord::default();
        let targets: [&mut Option<Vec<f64>>; 13] = [
            &mut rec.h,
            &mut rec.h1,
            &mut rec.h2,
            &mut rec.h3,
            &mut rec.rtt,
            &mut rec.rtt_k,
            &mut rec.rtt_t,
            &mut rec.rtt_kl,
            &mut rec.rtt_tk,
            &mut rec.rtt_tt,
            &mut rec.rb,
            &mut rec.rb_m,
            &mut rec.rb_mp,
        ];
        for (target, (_, tensor)) in targets.into_iter().zip(jet.slots()) {
            if !tensor.is_zero() {
                *target = Some(tensor.data().to_vec());
            }
        }
        rec
    }
}
