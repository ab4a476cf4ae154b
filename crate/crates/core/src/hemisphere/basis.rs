//! Harmonic polynomials in `(x, t)` that are even in `t`, orthonormalized on
//! the upper hemisphere.

use crate::error::Result;
use crate::series::MultiSeries;

/// Homogeneous harmonic polynomial of degree `|alpha|` in `n + 1` variables,
/// even in `t`, whose restriction to `t = 0` is `x^alpha`.
///
/// Built as `sum_j t^{2j} q_j` with `q_0 = x^alpha` and
/// `q_{j+1} = -Delta_x q_j / ((2j + 1)(2j + 2))`.
pub fn even_harmonic(alpha: &[u8], degree_bound: usize) -> Result<MultiSeries<f64>> {
    let n = alpha.len();
    let d = n + 1;
    let mut exp = alpha.to_vec();
    exp.push(0);
    let mut q = MultiSeries::from_terms(d, degree_bound, [(&exp[..], 1.0)])?;
    let mut total = q.clone();
    let t = MultiSeries::variable(d, degree_bound, n)?;
    let t2 = t.mul(&t)?;
    let mut tpow = MultiSeries::one(d, degree_bound);
    let mut j = 0usize;
    loop {
        let mut lap = MultiSeries::zero(d, degree_bound);
        for i in 0..n {
            lap = lap.add(&q.derive(i)?.derive(i)?)?;
        }
        if lap.is_zero_series() {
            break;
        }
        let factor = -1.0 / (((2 * j + 1) * (2 * j + 2)) as f64);
        q = lap.scale(&factor);
        tpow = tpow.mul(&t2)?;
        total = total.add(&tpow.mul(&q)?)?;
        j += 1;
    }
    Ok(total)
}

/// Exponents `alpha` of total degree `k` in `n` variables, `x_1`-heavy first.
pub fn degree_exponents(n: usize, k: usize) -> Vec<Vec<u8>> {
    fn rec(pos: usize, left: usize, cur: &mut Vec<u8>, out: &mut Vec<Vec<u8>>) {
        if pos + 1 == cur.len() {
            cur[pos] = left as u8;
            out.push(cur.clone());
            return;
        }
        for e in (0..=left).rev() {
            cur[pos] = e as u8;
            rec(pos + 1, left - e, cur, out);
        }
    }
    let mut out = Vec::new();
    rec(0, k, &mut vec![0u8; n], &mut out);
    out
}

/// Number of even harmonics of degree `k`: `C(k + n - 1, n - 1)`.
pub fn even_multiplicity(n: usize, k: usize) -> usize {
    let mut c = 1usize;
    for i in 1..n {
        c = c * (k + i) / i;
    }
    c
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn harmonicity() {
        for alpha in [vec![3u8, 0], vec![1, 2], vec![2, 1, 1], vec![4, 0, 0]] {
            let k: usize = alpha.iter().map(|&a| a as usize).sum();
            let y = even_harmonic(&alpha, 8).unwrap();
            let d = alpha.len() + 1;
            let mut lap = MultiSeries::zero(d, 8);
            for v in 0..d {
                lap = lap.add(&y.derive(v).unwrap().derive(v).unwrap()).unwrap();
            }
            assert!(lap.is_zero_series(), "{alpha:?}");
            assert_eq!(y.max_degree(), Some(k));
            assert!(y.terms().all(|(e, _)| e[d - 1] % 2 == 0));
        }
    }

    #[test]
    fn cubic_example() {
        // x^3 -> x^3 - 3 x t^2
        let y = even_harmonic(&[3, 0], 4).unwrap();
        assert_eq!(y.coeff(&[3, 0, 0]), 1.0);
        assert_eq!(y.coeff(&[1, 0, 2]), -3.0);
        assert_eq!(y.terms().count(), 2);
    }

    #[test]
    fn multiplicities() {
        assert_eq!(even_multiplicity(2, 4), 5);
        assert_eq!(even_multiplicity(3, 2), 6);
        assert_eq!((0..=8).map(|k| even_multiplicity(2, k)).sum::<usize>(), 45);
        assert_eq!((0..=8).map(|k| even_multiplicity(3, k)).sum::<usize>(), 165);
        for n in 2..=4 {
            for k in 0..6 {
                assert_eq!(degree_exponents(n, k).len(), even_multiplicity(n, k));
            }
        }
        assert_eq!(degree_exponents(3, 1), vec![vec![1, 0, 0], vec![0, 1, 0], vec![0, 0, 1]]);
    }
}
