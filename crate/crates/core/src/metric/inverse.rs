//! Fourth-order inverse-metric polynomial in boundary-adapted coordinates and
//! the direct metric recovered from it by series inversion.

use crate::error::{Error, Result};
use crate::metric::jet::BoundaryJet;
use crate::scalar::Scalar;
use crate::series::{MultiSeries, SeriesMatrix};

/// Degree bound of the expansion.
pub const EXPANSION_DEGREE: usize = 4;

/// Names and default values `(numerator, denominator)` of every numeric
/// coefficient in the expansion. Names read as "tensor factors : monomial".
pub const COEFFICIENT_TABLE: [(&str, i64, i64); 41] = [
    ("h : t", 2, 1),
    ("rb : xx", 1, 3),
    ("h1 : tx", 2, 1),
    ("rtt : t2", 1, 1),
    ("hh : t2", 3, 1),
    ("rb_m : xxx", 1, 6),
    ("rb.h : txx", 2, 3),
    ("h2 : txx", 1, 1),
    ("rtt_k : t2x", 1, 1),
    ("h1.h : t2x", 6, 1),
    ("rtt_t : t3", 1, 3),
    ("rtt.h : t3", 8, 3),
    ("hhh : t3", 4, 1),
    ("rb_mp : xxxx", 1, 20),
    ("rb.rb : xxxx", 1, 15),
    ("rb_m.h : txxx", 1, 3),
    ("rb.h1 : txxx", 2, 3),
    ("h3 : txxx", 1, 3),
    ("rtt_kl : t2xx", 1, 2),
    ("rb.rtt : t2xx", 1, 3),
    ("rb.h.h inner : t2xx", 7, 3),
    ("rb.h.h left : t2xx", -4, 3),
    ("rb.h.h right : t2xx", -4, 3),
    ("rb.h.h outer : t2xx", 4, 3),
    ("h2.h : t2xx", 4, 1),
    ("(hh)_kl : t2xx", -1, 2),
    ("h1.h1 : t2xx", 4, 1),
    ("rtt_tk : t3x", 1, 3),
    ("rtt_k.h : t3x", 8, 3),
    ("rtt.h1 : t3x", 8, 3),
    ("h1.h.h right : t3x", 8, 1),
    ("h1.h.h middle : t3x", 4, 1),
    ("rtt_tt : t4", 1, 12),
    ("rtt_t.rtt_t : t4", -1, 3),
    ("rtt.rtt : t4", 1, 1),
    ("rtt.h.h inner : t4", 6, 1),
    ("rtt_t.h : t4", 5, 6),
    ("rtt.h.h left : t4", -8, 3),
    ("rtt.h.h right : t4", -8, 3),
    ("rtt.h.h outer : t4", 13, 3),
    ("hhhh : t4", 5, 1),
];

/// Numeric coefficients of the expansion. The default is the correct table;
/// [`ExpansionCoefficients::set`] exists so self-tests can verify that the
/// oracles notice a corrupted entry.
#[derive(Clone, Debug, PartialEq)]
pub struct ExpansionCoefficients {
    values: Vec<(i64, i64)>,
}

impl Default for ExpansionCoefficients {
    fn default() -> Self {
        ExpansionCoefficients { values: COEFFICIENT_TABLE.iter().map(|&(_, p, q)| (p, q)).collect() }
    }
}

impl ExpansionCoefficients {
    pub fn set(&mut self, name: &str, num: i64, den: i64) -> Result<()> {
        let pos = COEFFICIENT_TABLE
            .iter()
            .position(|(n, _, _)| *n == name)
            .ok_or_else(|| Error::Configuration(format!("unknown expansion coefficient {name:?}")))?;
        if den == 0 {
            return Err(Error::Configuration("zero denominator".into()));
        }
        self.values[pos] = (num, den);
        Ok(())
    }

    fn get<T: Scalar>(&self, id: usize) -> T {
        let (p, q) = self.values[id];
        T::from_ratio(p, q)
    }
}

/// The `(n+1) x (n+1)` inverse metric through total degree 4; the last index is `t`.
pub fn inverse_metric_series<T: Scalar>(jet: &BoundaryJet<T>) -> Result<SeriesMatrix<T>> {
    inverse_metric_series_with(jet, &ExpansionCoefficients::default())
}

pub fn inverse_metric_series_with<T: Scalar>(
    jet: &BoundaryJet<T>,
    coeffs: &ExpansionCoefficients,
) -> Result<SeriesMatrix<T>> {
    jet.validate()?;
    let n = jet.n;
    let d = n + 1;
    let c = |id: usize| -> T { coeffs.get(id) };
    let half = T::from_ratio(1, 2);

    let h = |i: usize, j: usize| jet.h.at(&[i, j]).clone();
    let h1 = |i: usize, j: usize, k: usize| jet.h1.at(&[i, j, k]).clone();
    let h2 = |i: usize, j: usize, k: usize, l: usize| jet.h2.at(&[i, j, k, l]).clone();
    let rtt = |i: usize, j: usize| jet.rtt.at(&[i, j]).clone();
    let rtt_t = |i: usize, j: usize| jet.rtt_t.at(&[i, j]).clone();
    let rb = |i: usize, k: usize, j: usize, l: usize| jet.rb.at(&[i, k, j, l]).clone();
    let sum = |range: usize, f: &dyn Fn(usize) -> T| (0..range).fold(T::zero(), |acc, m| acc + f(m));

    let hh = |i: usize, j: usize| sum(n, &|k| h(i, k) * h(k, j));
    let hhh = |i: usize, j: usize| sum(n, &|k| h(i, k) * hh(k, j));
    let hhhh = |i: usize, j: usize| sum(n, &|k| hh(i, k) * hh(k, j));

    let exponent = |xs: &[usize], tpow: u8| {
        let mut e = vec![0u8; d];
        for &x in xs {
            e[x] += 1;
        }
        e[n] = tpow;
        e
    };

    let mut entries = Vec::with_capacity(d * d);
    for i in 0..d {
        for j in 0..d {
            let mut s = MultiSeries::zero(d, EXPANSION_DEGREE);
            if i == n || j == n {
                if i == j {
                    s.add_term(&exponent(&[], 0), T::one())?;
                }
                entries.push(s);
                continue;
            }
            let mut add = |xs: &[usize], tpow: u8, v: T| -> Result<()> {
                if !v.is_zero() {
                    s.add_term(&exponent(xs, tpow), v)?;
                }
                Ok(())
            };

            if i == j {
                add(&[], 0, T::one())?;
            }
            add(&[], 1, c(0) * h(i, j))?;

            for k in 0..n {
                add(&[k], 1, c(2) * h1(i, j, k))?;
                for l in 0..n {
                    add(&[k, l], 0, c(1) * rb(i, k, j, l))?;
                }
            }
            add(&[], 2, c(3) * rtt(i, j) + c(4) * hh(i, j))?;

            for k in 0..n {
                for l in 0..n {
                    for m in 0..n {
                        add(&[k, l, m], 0, c(5) * jet.rb_m.at(&[i, k, j, l, m]).clone())?;
                    }
                    let rbh = sum(n, &|m| rb(i, k, m, l) * h(m, j));
                    add(&[k, l], 1, c(6) * rbh + c(7) * h2(i, j, k, l))?;
                }
                let h1h = sum(n, &|l| h1(i, l, k) * h(l, j));
                add(&[k], 2, c(8) * jet.rtt_k.at(&[i, j, k]).clone() + c(9) * h1h)?;
            }
            let rtth = sum(n, &|k| rtt(i, k) * h(k, j));
            add(&[], 3, c(10) * rtt_t(i, j) + c(11) * rtth + c(12) * hhh(i, j))?;

            for k in 0..n {
                for l in 0..n {
                    for m in 0..n {
                        for p in 0..n {
                            let rbrb = sum(n, &|q| rb(i, k, q, l) * rb(j, m, q, p));
                            add(
                                &[k, l, m, p],
                                0,
                                c(13) * jet.rb_mp.at(&[i, k, j, l, m, p]).clone() + c(14) * rbrb,
                            )?;
                        }
                        let a = sum(n, &|p| jet.rb_m.at(&[i, l, p, m, k]).clone() * h(p, j));
                        let b = sum(n, &|p| rb(i, k, p, l) * h1(p, j, m));
                        let h3 = jet.h3.at(&[i, j, k, l, m]).clone();
                        add(&[k, l, m], 1, c(15) * a + c(16) * b + c(17) * h3)?;
                    }

                    let double = |f: &dyn Fn(usize, usize) -> T| sum(n, &|m| sum(n, &|p| f(m, p)));
                    let mut v = c(18) * jet.rtt_kl.at(&[i, j, k, l]).clone();
                    v = v + c(19) * sum(n, &|m| rb(i, k, m, l) * rtt(m, j));
                    v = v + c(20) * double(&|m, p| rb(i, k, m, l) * h(p, j) * h(m, p));
                    v = v + c(21)
                        * half.clone()
                        * double(&|m, p| {
                            (rb(p, k, m, l) * h(m, j) + rb(j, k, m, l) * h(m, p)) * h(i, p)
                        });
                    v = v + c(22)
                        * half.clone()
                        * double(&|m, p| {
                            (rb(i, k, m, l) * h(m, p) + rb(p, k, m, l) * h(m, i)) * h(p, j)
                        });
                    v = v + c(23) * double(&|m, p| rb(m, k, p, l) * h(i, m) * h(p, j));
                    v = v + c(24) * sum(n, &|m| h2(i, m, k, l) * h(m, j));
                    v = v + c(25)
                        * sum(n, &|m| {
                            h2(i, m, k, l) * h(m, j)
                                + h1(i, m, k) * h1(m, j, l)
                                + h1(i, m, l) * h1(m, j, k)
                                + h(i, m) * h2(m, j, k, l)
                        });
                    v = v + c(26) * sum(n, &|m| h1(i, m, k) * h1(m, j, l));
                    add(&[k, l], 2, v)?;
                }

                let mut v = c(27) * jet.rtt_tk.at(&[i, j, k]).clone();
                v = v + c(28) * sum(n, &|l| jet.rtt_k.at(&[i, l, k]).clone() * h(l, j));
                v = v + c(29) * sum(n, &|l| rtt(i, l) * h1(l, j, k));
                v = v + c(30) * sum(n, &|l| sum(n, &|m| h1(j, l, k) * h(l, m) * h(i, m)));
                v = v + c(31) * sum(n, &|l| sum(n, &|m| h1(m, l, k) * h(l, j) * h(i, m)));
                add(&[k], 3, v)?;
            }

            let double = |f: &dyn Fn(usize, usize) -> T| sum(n, &|k| sum(n, &|l| f(k, l)));
            let mut v = c(32) * jet.rtt_tt.at(&[i, j]).clone();
            v = v + c(33) * sum(n, &|k| rtt_t(i, k) * rtt_t(k, j));
            v = v + c(34) * sum(n, &|k| rtt(i, k) * rtt(k, j));
            v = v + c(35) * double(&|k, l| rtt(i, k) * h(l, j) * h(k, l));
            v = v + c(36) * sum(n, &|k| rtt_t(i, k) * h(k, j));
            v = v + c(37)
                * half.clone()
                * double(&|k, l| (rtt(k, j) * h(l, k) + rtt(k, l) * h(j, k)) * h(i, l));
            v = v + c(38)
                * half.clone()
                * double(&|k, l| (rtt(k, l) * h(i, k) + rtt(k, i) * h(l, k)) * h(l, j));
            v = v + c(39) * double(&|k, l| rtt(k, l) * h(i, k) * h(l, j));
            v = v + c(40) * hhhh(i, j);
            add(&[], 4, v)?;

            entries.push(s);
        }
    }
    let mut m = SeriesMatrix::from_entries(d, entries, false)?;
    // Terms written with a named symmetrization and the few unsymmetric
    // products are all brought to the symmetric part in one step.
    m.symmetrize();
    Ok(m)
}

/// Metric coefficients `g_ab` through degree 4, by truncated Neumann inversion.
pub fn direct_metric_series<T: Scalar>(jet: &BoundaryJet<T>) -> Result<SeriesMatrix<T>> {
    inverse_metric_series(jet)?.invert()
}

/// `g^{ab}(r x, r t)` as a polynomial in `(x, t)`; the identity at `r = 0`.
pub fn rescaled_inverse_metric<T: Scalar>(jet: &BoundaryJet<T>, r: &T) -> Result<SeriesMatrix<T>> {
    let rf = r.to_f64();
    if !(rf >= 0.0) {
        return Err(Error::Domain(format!("rescaling radius must be >= 0, got {rf}")));
    }
    let m = inverse_metric_series(jet)?;
    m.map_entries(|e| Ok(e.dilate_unchecked(r)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::jet::random_jet;
    use num_rational::BigRational;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn q(p: i64, d: i64) -> BigRational {
        BigRational::from_ratio(p, d)
    }

    #[test]
    fn zero_jet_is_identity() {
        for n in 2..=3 {
            let m = inverse_metric_series(&BoundaryJet::<BigRational>::zero(n)).unwrap();
            assert!(m.is_identity());
            assert!(direct_metric_series(&BoundaryJet::<BigRational>::zero(n)).unwrap().is_identity());
        }
    }

    #[test]
    fn umbilic_jet_geometric_coefficients() {
        let k = q(3, 7);
        let jet = BoundaryJet::umbilic(2, k.clone());
        let m = inverse_metric_series(&jet).unwrap();
        for i in 0..2 {
            let e = m.get(i, i);
            let mut pow = q(1, 1);
            for deg in 0..=4u8 {
                assert_eq!(e.coeff(&[0, 0, deg]), q(deg as i64 + 1, 1) * pow.clone());
                pow = pow * k.clone();
            }
            assert_eq!(e.terms().count(), 5);
        }
        assert!(m.get(0, 1).is_zero_series());
        // direct metric is (1 - k t)^2 exactly through degree 4
        let g = direct_metric_series(&jet).unwrap();
        let e = g.get(0, 0);
        assert_eq!(e.coeff(&[0, 0, 0]), q(1, 1));
        assert_eq!(e.coeff(&[0, 0, 1]), q(-2, 1) * k.clone());
        assert_eq!(e.coeff(&[0, 0, 2]), k.clone() * k.clone());
        assert_eq!(e.coeff(&[0, 0, 3]), q(0, 1));
        assert_eq!(e.coeff(&[0, 0, 4]), q(0, 1));
    }

    #[test]
    fn normal_row_is_trivial_and_matrix_symmetric() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let jet = random_jet::<BigRational, _>(&mut rng, 3, 1);
        let m = inverse_metric_series(&jet).unwrap();
        assert!(m.is_symmetric());
        assert!(m.degree_zero_is_identity());
        for a in 0..4 {
            for b in 0..4 {
                if a != b {
                    assert_eq!(m.get(a, b), m.get(b, a));
                }
            }
            if a < 3 {
                assert!(m.get(3, a).is_zero_series());
            }
        }
        assert!(m.get(3, 3).terms().eq(MultiSeries::one(4, 4).terms()));
    }

    #[test]
    fn exact_two_sided_inverse() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for n in 2..=3 {
            let jet = random_jet::<BigRational, _>(&mut rng, n, 1);
            let m = inverse_metric_series(&jet).unwrap();
            let g = direct_metric_series(&jet).unwrap();
            assert!(m.mul(&g).unwrap().is_identity());
            assert!(g.mul(&m).unwrap().is_identity());
        }
    }

    #[test]
    fn corrupted_coefficient_breaks_umbilic_identity() {
        let mut c = ExpansionCoefficients::default();
        c.set("hhh : t3", 5, 1).unwrap();
        let jet = BoundaryJet::umbilic(2, q(1, 2));
        let g = inverse_metric_series_with(&jet, &c).unwrap().invert().unwrap();
        assert_ne!(g.get(0, 0).coeff(&[0, 0, 3]), q(0, 1));
        assert!(c.set("no such term", 1, 1).is_err());
    }

    #[test]
    fn rescaling() {
        let jet = BoundaryJet::umbilic(2, 1.5f64);
        let id = rescaled_inverse_metric(&jet, &0.0).unwrap();
        assert!(id.is_identity());
        let one = rescaled_inverse_metric(&jet, &1.0).unwrap();
        assert_eq!(one, inverse_metric_series(&jet).unwrap());
        assert!(matches!(rescaled_inverse_metric(&jet, &-0.1), Err(Error::Domain(_))));
        // t = 0.1 substituted into the graded umbilic terms
        let m = rescaled_inverse_metric(&jet, &0.1).unwrap();
        let k: f64 = 1.5;
        let expect = 1.0 + 0.2 * k + 0.03 * k * k + 0.004 * k.powi(3) + 0.0005 * k.powi(4);
        assert!((m.get(0, 0).eval_f64(&[0.0, 0.0, 1.0]) - expect).abs() < 1e-15);
    }

    #[test]
    fn invalid_jet_rejected() {
        let mut jet = BoundaryJet::<f64>::zero(2);
        jet.rb.set(&[0, 1, 0, 1], 1.0);
        assert!(matches!(inverse_metric_series(&jet), Err(Error::Validation(_))));
    }
}
