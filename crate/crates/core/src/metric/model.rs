//! Fields of boundary jets over the boundary-offset parameter `tau`.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metric::jet::{BoundaryJet, JetRecord, Tensor};

/// Relative eigenvalue threshold below which a Hessian counts as singular.
pub const SINGULAR_THRESHOLD: f64 = 1e-10;

/// One sample of a tabulated jet field.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TableEntry {
    pub tau: Vec<f64>,
    pub jet: JetRecord,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hmean: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hmean_grad: Option<Vec<f64>>,
}

/// File format of a tabulated model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JetTable {
    pub n: usize,
    /// Largest admissible `|tau|`.
    #[serde(default = "default_table_radius")]
    pub radius: f64,
    pub entries: Vec<TableEntry>,
}

fn default_table_radius() -> f64 {
    0.25
}

/// Model selector as it appears in run configurations.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum ModelSpec {
    Euclidean,
    Bump { a: f64, q: Vec<Vec<f64>> },
    Table { path: String },
}

#[derive(Clone, Debug)]
struct TablePoint {
    tau: Vec<f64>,
    jet: BoundaryJet<f64>,
}

#[derive(Clone, Debug)]
enum Kind {
    Euclidean,
    Bump { a: f64, q: DMatrix<f64> },
    Table { points: Vec<TablePoint> },
}

/// A smooth field `tau -> BoundaryJet` together with the boundary mean
/// curvature `tr h`, its gradient and Hessian.
#[derive(Clone, Debug)]
pub struct MetricModel {
    n: usize,
    domain_radius: f64,
    kind: Kind,
}

impl MetricModel {
    pub fn euclidean(n: usize) -> Result<Self> {
        check_dimension(n)?;
        Ok(MetricModel { n, domain_radius: f64::INFINITY, kind: Kind::Euclidean })
    }

    /// `h_ij(tau) = (a + tau.Q.tau / 2) / n * delta_ij`, every curvature slot zero.
    /// Only shape and symmetry of `Q` are checked here; [`make_model`] also
    /// demands non-degeneracy.
    pub fn bump(n: usize, a: f64, q: DMatrix<f64>) -> Result<Self> {
        check_dimension(n)?;
        if q.nrows() != n || q.ncols() != n {
            return Err(Error::Shape(format!("Q must be {n}x{n}, got {}x{}", q.nrows(), q.ncols())));
        }
        if !a.is_finite() || q.iter().any(|v| !v.is_finite()) {
            return Err(Error::Validation("bump parameters must be finite".into()));
        }
        if (&q - q.transpose()).amax() > 1e-14 * (1.0 + q.amax()) {
            return Err(Error::Validation("bump Hessian Q must be symmetric".into()));
        }
        Ok(MetricModel { n, domain_radius: f64::INFINITY, kind: Kind::Bump { a, q } })
    }

    /// Taylor-transported table: the jet at `tau` is expanded from the nearest entry.
    pub fn table(table: &JetTable) -> Result<Self> {
        check_dimension(table.n)?;
        let n = table.n;
        if table.entries.is_empty() {
            return Err(Error::Validation("jet table has no entries".into()));
        }
        if !(table.radius > 0.0) {
            return Err(Error::Validation("jet table radius must be positive".into()));
        }
        let mut points = Vec::with_capacity(table.entries.len());
        for (idx, e) in table.entries.iter().enumerate() {
            if e.tau.len() != n {
                return Err(Error::Validation(format!("entry {idx}: tau has length {}", e.tau.len())));
            }
            let jet = e.jet.to_jet(n).map_err(|err| match err {
                Error::Validation(m) => Error::Validation(format!("entry {idx}: {m}")),
                other => other,
            })?;
            check_derivative_symmetry(&jet.h2, 2, 3, "h2").and_then(|_| {
                check_derivative_symmetry(&jet.h3, 2, 3, "h3")?;
                check_derivative_symmetry(&jet.h3, 3, 4, "h3")?;
                check_derivative_symmetry(&jet.rtt_kl, 2, 3, "rtt_kl")?;
                check_derivative_symmetry(&jet.rb_mp, 4, 5, "rb_mp")
            })
            .map_err(|err| Error::Validation(format!("entry {idx}: {err}")))?;
            points.push(TablePoint { tau: e.tau.clone(), jet });
        }
        let model = MetricModel { n, domain_radius: table.radius, kind: Kind::Table { points } };
        for (idx, e) in table.entries.iter().enumerate() {
            let tr = model.hmean(&e.tau)?;
            if let Some(h) = e.hmean {
                if (h - tr).abs() > 1e-9 * (1.0 + tr.abs()) {
                    return Err(Error::Validation(format!(
                        "entry {idx}: supplied hmean {h} differs from trace of h {tr}"
                    )));
                }
            }
            if let Some(g) = &e.hmean_grad {
                let grad = model.hmean_grad(&e.tau)?;
                if g.len() != n || g.iter().zip(&grad).any(|(a, b)| (a - b).abs() > 1e-9 * (1.0 + b.abs())) {
                    return Err(Error::Validation(format!(
                        "entry {idx}: supplied hmean_grad {g:?} differs from the trace of h1 {grad:?}"
                    )));
                }
            }
        }
        Ok(model)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn domain_radius(&self) -> f64 {
        self.domain_radius
    }

    pub fn is_euclidean(&self) -> bool {
        matches!(self.kind, Kind::Euclidean)
    }

    fn check_tau(&self, tau: &[f64]) -> Result<()> {
        if tau.len() != self.n {
            return Err(Error::Shape(format!("tau of length {} for n = {}", tau.len(), self.n)));
        }
        let norm = tau.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !(norm <= self.domain_radius) {
            return Err(Error::Domain(format!(
                "|tau| = {norm} exceeds the model domain radius {}",
                self.domain_radius
            )));
        }
        Ok(())
    }

    pub fn jet_at(&self, tau: &[f64]) -> Result<BoundaryJet<f64>> {
        self.check_tau(tau)?;
        let n = self.n;
        match &self.kind {
            Kind::Euclidean => Ok(BoundaryJet::zero(n)),
            Kind::Bump { a, q } => {
                let t = nalgebra::DVector::from_column_slice(tau);
                let qt = q * &t;
                let value = (a + 0.5 * t.dot(&qt)) / n as f64;
                let mut jet = BoundaryJet::zero(n);
                for i in 0..n {
                    jet.h.set(&[i, i], value);
                    for k in 0..n {
                        jet.h1.set(&[i, i, k], qt[k] / n as f64);
                        for l in 0..n {
                            jet.h2.set(&[i, i, k, l], q[(k, l)] / n as f64);
                        }
                    }
                }
                Ok(jet)
            }
            Kind::Table { points } => {
                let nearest = points
                    .iter()
                    .min_by(|a, b| dist2(&a.tau, tau).total_cmp(&dist2(&b.tau, tau)))
                    .expect("table is non-empty");
                let delta: Vec<f64> = tau.iter().zip(&nearest.tau).map(|(a, b)| a - b).collect();
                Ok(transport(&nearest.jet, &delta))
            }
        }
    }

    pub fn hmean(&self, tau: &[f64]) -> Result<f64> {
        match &self.kind {
            Kind::Bump { a, q } => {
                self.check_tau(tau)?;
                let t = nalgebra::DVector::from_column_slice(tau);
                Ok(a + 0.5 * t.dot(&(q * &t)))
            }
            _ => Ok(self.jet_at(tau)?.mean_curvature()),
        }
    }

    pub fn hmean_grad(&self, tau: &[f64]) -> Result<Vec<f64>> {
        match &self.kind {
            Kind::Bump { q, .. } => {
                self.check_tau(tau)?;
                Ok((q * nalgebra::DVector::from_column_slice(tau)).iter().copied().collect())
            }
            _ => {
                let jet = self.jet_at(tau)?;
                Ok((0..self.n).map(|i| (0..self.n).map(|j| jet.h1.at(&[j, j, i])).sum()).collect())
            }
        }
    }

    pub fn hmean_hess(&self, tau: &[f64]) -> Result<DMatrix<f64>> {
        match &self.kind {
            Kind::Bump { q, .. } => {
                self.check_tau(tau)?;
                Ok(q.clone())
            }
            _ => {
                let jet = self.jet_at(tau)?;
                let n = self.n;
                let mut m = DMatrix::zeros(n, n);
                for k in 0..n {
                    for l in 0..n {
                        m[(k, l)] = (0..n)
                            .map(|j| 0.5 * (jet.h2.at(&[j, j, k, l]) + jet.h2.at(&[j, j, l, k])))
                            .sum();
                    }
                }
                Ok(m)
            }
        }
    }
}

fn check_dimension(n: usize) -> Result<()> {
    if n < 2 {
        return Err(Error::Configuration(format!("boundary dimension must be >= 2, got {n}")));
    }
    if n > 6 {
        return Err(Error::Configuration(format!("boundary dimension {n} is beyond the supported range 2..=6")));
    }
    Ok(())
}

fn check_derivative_symmetry(t: &Tensor<f64>, a: usize, b: usize, name: &str) -> Result<()> {
    for idx in t.indices() {
        let mut sw = idx.clone();
        sw.swap(a, b);
        let (u, v) = (t.at(&idx), t.at(&sw));
        if (u - v).abs() > 1e-12 * (1.0 + u.abs().max(v.abs())) {
            return Err(Error::Validation(format!(
                "{name}: tabulated derivative indices ({a},{b}) must commute, violated at {idx:?}"
            )));
        }
    }
    Ok(())
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Contracts the trailing `count` indices of `t` with `delta` and returns the
/// resulting lower-rank tensor.
fn contract_tail(t: &Tensor<f64>, delta: &[f64], count: usize) -> Vec<f64> {
    let n = t.n();
    let tail = n.pow(count as u32);
    let head = t.data().len() / tail;
    let weights: Vec<f64> = (0..tail)
        .map(|mut flat| {
            let mut w = 1.0;
            for _ in 0..count {
                w *= delta[flat % n];
                flat /= n;
            }
            w
        })
        .collect();
    (0..head)
        .map(|hidx| (0..tail).map(|tidx| t.data()[hidx * tail + tidx] * weights[tidx]).sum())
        .collect()
}

/// `sum_k c_k / k! * T^{(k)}[delta^k]` over the derivative chain `slots[0], slots[1], ...`.
fn taylor(slots: &[&Tensor<f64>], delta: &[f64]) -> Tensor<f64> {
    let base = slots[0];
    let mut out = base.data().to_vec();
    let mut factorial = 1.0;
    for (k, slot) in slots.iter().enumerate().skip(1) {
        factorial *= k as f64;
        for (o, v) in out.iter_mut().zip(contract_tail(slot, delta, k)) {
            *o += v / factorial;
        }
    }
    Tensor::from_vec(base.n(), base.rank(), out).expect("contraction preserves shape")
}

/// Jet at offset `delta` from a tabulated one, treating derivative slots as
/// Taylor coefficients of a smooth field.
fn transport(jet: &BoundaryJet<f64>, delta: &[f64]) -> BoundaryJet<f64> {
    BoundaryJet {
        n: jet.n,
        h: taylor(&[&jet.h, &jet.h1, &jet.h2, &jet.h3], delta),
        h1: taylor(&[&jet.h1, &jet.h2, &jet.h3], delta),
        h2: taylor(&[&jet.h2, &jet.h3], delta),
        h3: jet.h3.clone(),
        rtt: taylor(&[&jet.rtt, &jet.rtt_k, &jet.rtt_kl], delta),
        rtt_k: taylor(&[&jet.rtt_k, &jet.rtt_kl], delta),
        rtt_t: taylor(&[&jet.rtt_t, &jet.rtt_tk], delta),
        rtt_kl: jet.rtt_kl.clone(),
        rtt_tk: jet.rtt_tk.clone(),
        rtt_tt: jet.rtt_tt.clone(),
        rb: taylor(&[&jet.rb, &jet.rb_m, &jet.rb_mp], delta),
        rb_m: taylor(&[&jet.rb_m, &jet.rb_mp], delta),
        rb_mp: jet.rb_mp.clone(),
    }
}

/// Smallest absolute eigenvalue relative to the largest, or 0 for the zero matrix.
pub fn relative_min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    let eig = SymmetricEigen::new(m.clone());
    let max = eig.eigenvalues.amax();
    if max == 0.0 {
        return 0.0;
    }
    eig.eigenvalues.iter().fold(f64::INFINITY, |acc, v| acc.min(v.abs())) / max
}

/// Builds a model from its configuration form. Table paths are resolved
/// against `base_dir`. Bump models with a singular `Q` are rejected.
pub fn make_model(n: usize, spec: &ModelSpec, base_dir: &std::path::Path) -> Result<MetricModel> {
    match spec {
        ModelSpec::Euclidean => MetricModel::euclidean(n),
        ModelSpec::Bump { a, q } => {
            if q.len() != n || q.iter().any(|row| row.len() != n) {
                return Err(Error::Configuration(format!("bump Q must be an {n}x{n} array")));
            }
            let m = DMatrix::from_fn(n, n, |i, j| q[i][j]);
            let model = MetricModel::bump(n, *a, m.clone())?;
            if relative_min_eigenvalue(&m) <= SINGULAR_THRESHOLD {
                return Err(Error::Nondegeneracy(format!(
                    "bump Hessian Q is singular (relative smallest eigenvalue {:e})",
                    relative_min_eigenvalue(&m)
                )));
            }
            Ok(model)
        }
        ModelSpec::Table { path } => {
            let full = base_dir.join(path);
            let text = std::fs::read_to_string(&full).map_err(|e| {
                Error::Configuration(format!("cannot read jet table {}: {e}", full.display()))
            })?;
            let table: JetTable = serde_json::from_str(&text)
                .map_err(|e| Error::Configuration(format!("jet table {}: {e}", full.display())))?;
            if table.n != n {
                return Err(Error::Configuration(format!(
                    "jet table has n = {} but the run uses n = {n}",
                    table.n
                )));
            }
            MetricModel::table(&table)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn euclidean_is_flat() {
        let m = MetricModel::euclidean(3).unwrap();
        assert_eq!(m.hmean(&[0.1, 0.0, 0.2]).unwrap(), 0.0);
        assert_eq!(m.jet_at(&[0.3, 0.1, 0.0]).unwrap(), BoundaryJet::zero(3));
    }

    #[test]
    fn bump_formulas() {
        let m = MetricModel::bump(2, 1.0, DMatrix::identity(2, 2)).unwrap();
        assert_eq!(m.hmean(&[0.0, 0.0]).unwrap(), 1.0);
        assert_eq!(m.hmean_grad(&[0.0, 0.0]).unwrap(), vec![0.0, 0.0]);
        assert_eq!(m.hmean_hess(&[0.0, 0.0]).unwrap(), DMatrix::identity(2, 2));

        let q = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, -1.0]);
        let m = MetricModel::bump(2, 1.0, q).unwrap();
        let g = m.hmean_grad(&[0.1, 0.2]).unwrap();
        assert!((g[0] - 0.2).abs() < 1e-15 && (g[1] + 0.2).abs() < 1e-15);
        let jet = m.jet_at(&[0.1, 0.2]).unwrap();
        assert!((jet.mean_curvature() - m.hmean(&[0.1, 0.2]).unwrap()).abs() < 1e-15);
    }

    #[test]
    fn make_model_rejects_singular_q() {
        let spec = ModelSpec::Bump { a: 1.0, q: vec![vec![1.0, 0.0], vec![0.0, 0.0]] };
        let err = make_model(2, &spec, std::path::Path::new(".")).unwrap_err();
        assert!(matches!(err, Error::Nondegeneracy(_)));
    }

    fn quadratic_table() -> JetTable {
        // h = (1/2 + tau.Q.tau/4) I with Q = diag(1, 3), plus a cubic part
        let n = 2;
        let mut h = vec![0.0; 4];
        h[0] = 0.5;
        h[3] = 0.5;
        let mut h2 = vec![0.0; 16];
        let q = [1.0, 3.0];
        for i in 0..2 {
            for k in 0..2 {
                h2[((i * n + i) * n + k) * n + k] = q[k] / 2.0;
            }
        }
        let mut h3 = vec![0.0; 32];
        for i in 0..2 {
            h3[(((i * n + i) * n) * n) * n] = 0.3;
        }
        JetTable {
            n,
            radius: 0.3,
            entries: vec![TableEntry {
                tau: vec![0.0, 0.0],
                jet: JetRecord { h: Some(h), h2: Some(h2), h3: Some(h3), ..Default::default() },
                hmean: Some(1.0),
                hmean_grad: Some(vec![0.0, 0.0]),
            }],
        }
    }

    #[test]
    fn table_derivatives_consistent_with_finite_differences() {
        let m = MetricModel::table(&quadratic_table()).unwrap();
        let tau = [0.05, -0.08];
        let grad = m.hmean_grad(&tau).unwrap();
        let hess = m.hmean_hess(&tau).unwrap();
        for step in [1e-3, 5e-4] {
            for k in 0..2 {
                let mut p = tau;
                let mut q = tau;
                p[k] += step;
                q[k] -= step;
                let fd = (m.hmean(&p).unwrap() - m.hmean(&q).unwrap()) / (2.0 * step);
                assert!((fd - grad[k]).abs() < 10.0 * step * step, "{fd} vs {}", grad[k]);
                let gp = m.hmean_grad(&p).unwrap();
                let gq = m.hmean_grad(&q).unwrap();
                for l in 0..2 {
                    let fd = (gp[l] - gq[l]) / (2.0 * step);
                    assert!((fd - hess[(l, k)]).abs() < 10.0 * step * step);
                }
            }
        }
    }

    #[test]
    fn table_inconsistent_gradient_rejected() {
        let mut t = quadratic_table();
        t.entries[0].hmean_grad = Some(vec![0.1, 0.0]);
        assert!(matches!(MetricModel::table(&t), Err(Error::Validation(_))));
        let mut t = quadratic_table();
        t.entries[0].hmean = Some(1.5);
        assert!(matches!(MetricModel::table(&t), Err(Error::Validation(_))));
    }

    #[test]
    fn table_domain() {
        let m = MetricModel::table(&quadratic_table()).unwrap();
        assert!(matches!(m.jet_at(&[0.4, 0.0]), Err(Error::Domain(_))));
        assert!(matches!(m.jet_at(&[0.1]), Err(Error::Shape(_))));
    }
}
