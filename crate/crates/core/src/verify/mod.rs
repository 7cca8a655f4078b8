//! Executable checks of the pooling map's geometry and of every layer's
//! backward pass, with the measured worst-case error of each.

mod layers;

pub use layers::layer_gradient_checks;

use std::collections::BTreeMap;
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{expm_i_hermitian, Matrix};
use crate::nn::gradcheck::{central_difference, relative_error};
use crate::supool::{assemble_hamiltonian, jacobian, numerical_rank, pool_backward, pool_forward, GeneratorBasis};

/// Random inputs per randomized property.
pub const TRIALS: usize = 200;
/// Relative threshold for counting singular values.
pub const RANK_TOL: f64 = 1e-8;
/// Step of the central finite differences.
pub const FD_STEP: f64 = 1e-5;

pub const SUITE_MIN_DIM: usize = 2;
pub const SUITE_MAX_DIM: usize = 8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum VerifyError {
    #[error("suite dimension {0} outside 2..=8")]
    UnsupportedDimension(usize),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PropertyResult {
    pub name: String,
    /// Dimension checked, for pooling properties.
    pub d: Option<usize>,
    pub trials: usize,
    pub failures: usize,
    pub worst_error: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl fmt::Display for PropertyResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let d = self.d.map_or_else(String::new, |d| format!(" d={d}"));
        write!(
            f,
            "{} {}{}: trials={} failures={} worst={:.3e} tol={:.1e}",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            d,
            self.trials,
            self.failures,
            self.worst_error,
            self.tolerance
        )
    }
}

/// Accumulates per-trial errors against one tolerance.
pub(crate) struct Tally {
    name: &'static str,
    d: Option<usize>,
    tolerance: f64,
    trials: usize,
    failures: usize,
    worst: f64,
}

impl Tally {
    pub(crate) fn new(name: &'static str, d: Option<usize>, tolerance: f64) -> Self {
        Self {
            name,
            d,
            tolerance,
            trials: 0,
            failures: 0,
            worst: 0.0,
        }
    }

    pub(crate) fn record(&mut self, error: f64) {
        self.trials += 1;
        // NaN counts as a failure with infinite error.
        let error = if error.is_nan() { f64::INFINITY } else { error };
        if error > self.tolerance {
            self.failures += 1;
        }
        self.worst = self.worst.max(error);
    }

    /// An evaluation that could not run at all.
    pub(crate) fn record_error(&mut self) {
        self.record(f64::INFINITY);
    }

    pub(crate) fn finish(self) -> PropertyResult {
        PropertyResult {
            name: self.name.to_string(),
            d: self.d,
            trials: self.trials,
            failures: self.failures,
            worst_error: self.worst,
            tolerance: self.tolerance,
            passed: self.failures == 0 && self.worst <= self.tolerance,
        }
    }
}

/// Measured Jacobian ranks for one dimension.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankReport {
    pub d: usize,
    pub at_zero: usize,
    /// rank → number of random inputs with that rank.
    pub distribution: BTreeMap<usize, usize>,
    /// The forced bound `2d − 1`.
    pub forced_bound: usize,
    /// The `2d − 2` figure claimed for the quotient, reported only.
    pub claimed_bound: usize,
}

impl fmt::Display for RankReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let dist: Vec<String> = self.distribution.iter().map(|(r, n)| format!("{r}:{n}")).collect();
        write!(
            f,
            "rank d={}: at x=0 {}, random {{{}}}, forced bound {}, claimed 2d-2 = {}",
            self.d,
            self.at_zero,
            dist.join(", "),
            self.forced_bound,
            self.claimed_bound
        )
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub seed: u64,
    pub results: Vec<PropertyResult>,
    pub ranks: Vec<RankReport>,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.results.iter().all(|r| r.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &PropertyResult> {
        self.results.iter().filter(|r| !r.passed)
    }

    /// Results with the given name, in dimension order.
    pub fn named<'a>(&'a self, name: &'a str) -> impl Iterator<Item = &'a PropertyResult> + 'a {
        self.results.iter().filter(move |r| r.name == name)
    }

    pub fn to_text(&self) -> String {
        let mut lines: Vec<String> = self.results.iter().map(|r| r.to_string()).collect();
        lines.extend(self.ranks.iter().map(|r| r.to_string()));
        lines.push(format!(
            "{}: {} of {} properties passed",
            if self.passed() { "PASS" } else { "FAIL" },
            self.results.iter().filter(|r| r.passed).count(),
            self.results.len()
        ));
        lines.join("\n") + "\n"
    }
}

fn random_x(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

fn max_abs(values: impl IntoIterator<Item = f64>) -> f64 {
    values.into_iter().fold(0.0, |m, v| if v.is_nan() { f64::INFINITY } else { m.max(v.abs()) })
}

fn phi(x: &[f64], basis: &GeneratorBasis<f64>) -> Option<Vec<f64>> {
    pool_forward(x, basis).ok().map(|(out, _)| out.phi)
}

fn basis_checks(basis: &GeneratorBasis<f64>, d: usize, out: &mut Vec<PropertyResult>) {
    let mut orth = Tally::new("generator_orthogonality", Some(d), 1e-12);
    let mut herm = Tally::new("generator_hermitian_traceless", Some(d), 1e-14);
    for (j, gj) in basis.generators().iter().enumerate() {
        herm.record(gj.hermitian_defect().max(gj.trace().norm()));
        for (k, gk) in basis.generators().iter().enumerate() {
            let target = if j == k { 2.0 } else { 0.0 };
            match gj.matmul(gk) {
                Ok(p) => {
                    let t = p.trace();
                    orth.record((t.re - target).abs().max(t.im.abs()));
                }
                Err(_) => orth.record_error(),
            }
        }
    }
    out.push(orth.finish());
    out.push(herm.finish());
}

fn zero_point_checks(basis: &GeneratorBasis<f64>, d: usize, out: &mut Vec<PropertyResult>) -> Option<usize> {
    let n = basis.len();
    let mut stab = Tally::new("stabilizer_columns_zero_at_origin", Some(d), 1e-12);
    let mut diag = Tally::new("diagonal_columns_rank_one_at_origin", Some(d), 0.0);
    let j0 = jacobian(&vec![0.0; n], basis).ok();
    let rank0 = j0.as_ref().and_then(|j| numerical_rank(j, RANK_TOL).ok());
    match &j0 {
        Some(j) => {
            for k in basis.stabilizer_indices() {
                stab.record(max_abs(j.column(k)));
            }
            let idx = basis.diagonal_indices();
            let sub = Matrix::from_fn(2 * d, idx.len(), |r, c| j[(r, idx[c])]);
            match numerical_rank(&sub, RANK_TOL) {
                Ok(r) => diag.record((r as f64 - 1.0).abs()),
                Err(_) => diag.record_error(),
            }
        }
        None => {
            stab.record_error();
            diag.record_error();
        }
    }
    out.push(stab.finish());
    out.push(diag.finish());
    rank0
}

fn collapse_check(basis: &GeneratorBasis<f64>, d: usize, rng: &mut ChaCha8Rng, out: &mut Vec<PropertyResult>) {
    let mut tally = Tally::new("collapse_witness", Some(d), 1e-10);
    let stab = basis.stabilizer_indices();
    if !stab.is_empty() {
        let origin = phi(&vec![0.0; basis.len()], basis);
        for _ in 0..TRIALS {
            let mut x = vec![0.0; basis.len()];
            for &k in &stab {
                x[k] = rng.random_range(-1.0..1.0);
            }
            let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
            let radius = rng.random_range(0.0..=2.0);
            if norm > 0.0 {
                x.iter_mut().for_each(|v| *v *= radius / norm);
            }
            match (phi(&x, basis), &origin) {
                (Some(p), Some(o)) => tally.record(max_abs(p.iter().zip(o).map(|(a, b)| a - b))),
                _ => tally.record_error(),
            }
        }
    }
    out.push(tally.finish());
}

/// All pooling properties for one dimension, plus its rank report.
fn dimension_suite(d: usize, seed: u64) -> (Vec<PropertyResult>, RankReport) {
    let basis = GeneratorBasis::<f64>::new(d).expect("dimension validated");
    let n = basis.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(d as u64);
    let mut out = Vec::new();

    basis_checks(&basis, d, &mut out);

    let mut unitarity = Tally::new("unitarity", Some(d), 1e-12);
    let mut norm = Tally::new("phi_unit_norm", Some(d), 1e-10);
    let mut subgroup = Tally::new("one_parameter_subgroup", Some(d), 1e-10);
    let mut tangent = Tally::new("phi_orthogonal_to_jacobian", Some(d), 1e-9);
    let mut rank_bound = Tally::new("rank_at_most_2d_minus_1", Some(d), 0.0);
    let mut vjp = Tally::new("backward_equals_jacobian_transpose", Some(d), 1e-10);
    let mut grad_fd = Tally::new("backward_vs_finite_difference", Some(d), 1e-6);
    let mut jac_fd = Tally::new("jacobian_vs_finite_difference", Some(d), 1e-6);
    let mut distribution = BTreeMap::new();

    for _ in 0..TRIALS {
        let x = random_x(&mut rng, n);
        let upstream = random_x(&mut rng, 2 * d);
        let (s, t) = (rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));

        let Ok(h) = assemble_hamiltonian(&x, &basis) else {
            unitarity.record_error();
            continue;
        };
        match expm_i_hermitian(&h) {
            Ok(u) => unitarity.record(u.unitarity_defect()),
            Err(_) => unitarity.record_error(),
        }
        let scaled = |c: f64| expm_i_hermitian(&h.scale_real(c));
        match (scaled(s + t), scaled(s), scaled(t)) {
            (Ok(a), Ok(b), Ok(c)) => match b.matmul(&c) {
                Ok(bc) => subgroup.record(a.distance(&bc)),
                Err(_) => subgroup.record_error(),
            },
            _ => subgroup.record_error(),
        }

        let Ok((out_x, cache)) = pool_forward(&x, &basis) else {
            for t in [&mut norm, &mut tangent, &mut rank_bound, &mut vjp, &mut grad_fd, &mut jac_fd] {
                t.record_error();
            }
            continue;
        };
        norm.record((out_x.norm() - 1.0).abs());

        let j = jacobian(&x, &basis).expect("forward succeeded");
        tangent.record(max_abs(j.transpose_mul_vec(&out_x.phi)));
        match numerical_rank(&j, RANK_TOL) {
            Ok(r) => {
                *distribution.entry(r).or_insert(0) += 1;
                rank_bound.record(r.saturating_sub(2 * d - 1) as f64);
            }
            Err(_) => rank_bound.record_error(),
        }

        match pool_backward(&cache, &upstream, &basis) {
            Ok(g) => {
                let jt_u: Vec<f64> = (0..n)
                    .map(|k| j.column(k).iter().zip(&upstream).map(|(a, b)| a * b).sum())
                    .collect();
                vjp.record(max_abs(g.iter().zip(&jt_u).map(|(a, b)| a - b)));
                let fd = central_difference(
                    |y| phi(y, &basis).map_or(f64::NAN, |p| p.iter().zip(&upstream).map(|(a, b)| a * b).sum()),
                    &x,
                    FD_STEP,
                );
                grad_fd.record(relative_error(&g, &fd, 1e-12));
            }
            Err(_) => {
                vjp.record_error();
                grad_fd.record_error();
            }
        }

        let mut analytic = Vec::with_capacity(2 * d * n);
        let mut numeric = Vec::with_capacity(2 * d * n);
        for k in 0..n {
            analytic.extend(j.column(k));
            let mut plus = x.clone();
            let mut minus = x.clone();
            plus[k] += FD_STEP;
            minus[k] -= FD_STEP;
            match (phi(&plus, &basis), phi(&minus, &basis)) {
                (Some(p), Some(m)) => numeric.extend(p.iter().zip(&m).map(|(a, b)| (a - b) / (2.0 * FD_STEP))),
                _ => numeric.extend(std::iter::repeat_n(f64::NAN, 2 * d)),
            }
        }
        jac_fd.record(relative_error(&analytic, &numeric, 1e-12));
    }

    for t in [unitarity, norm, subgroup, tangent, rank_bound, vjp, grad_fd, jac_fd] {
        out.push(t.finish());
    }
    let at_zero = zero_point_checks(&basis, d, &mut out).unwrap_or(0);
    collapse_check(&basis, d, &mut rng, &mut out);

    let report = RankReport {
        d,
        at_zero,
        distribution,
        forced_bound: 2 * d - 1,
        claimed_bound: 2 * d - 2,
    };
    (out, report)
}

/// Runs every pooling property for each `d` in `dims` (sorted,
/// deduplicated). Deterministic in `seed`.
pub fn run_suite(seed: u64, dims: &[usize]) -> Result<SuiteReport, VerifyError> {
    let mut dims = dims.to_vec();
    dims.sort_unstable();
    dims.dedup();
    if let Some(&bad) = dims.iter().find(|d| !(SUITE_MIN_DIM..=SUITE_MAX_DIM).contains(*d)) {
        return Err(VerifyError::UnsupportedDimension(bad));
    }
    let mut results = Vec::new();
    let mut ranks = Vec::new();
    for d in dims {
        let (r, rank) = dimension_suite(d, seed);
        results.extend(r);
        ranks.push(rank);
    }
    Ok(SuiteReport { seed, results, ranks })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn d2_suite_passes() {
        let report = run_suite(7, &[2]).unwrap();
        assert!(report.passed(), "{}", report.to_text());
        // No strict stabilizer exists for d = 2; the witness is vacuous.
        assert_eq!(report.named("collapse_witness").next().unwrap().trials, 0);
        assert_eq!(report.ranks[0].at_zero, 3);
    }

    #[test]
    fn d3_rank_at_origin_is_five() {
        let report = run_suite(1, &[3]).unwrap();
        assert_eq!(report.ranks[0].at_zero, 5);
        let orth = report.named("generator_orthogonality").next().unwrap();
        assert!(orth.worst_error <= 1e-12);
        assert_eq!(report.named("stabilizer_columns_zero_at_origin").next().unwrap().trials, 2);
    }

    #[test]
    fn rejects_out_of_range_dims() {
        assert_eq!(run_suite(0, &[1]), Err(VerifyError::UnsupportedDimension(1)));
        assert_eq!(run_suite(0, &[9]), Err(VerifyError::UnsupportedDimension(9)));
    }

    #[test]
    fn tally_semantics() {
        let mut t = Tally::new("x", None, 1.0);
        t.record(0.5);
        assert!(t.finish().passed);
        let mut t = Tally::new("x", None, 1.0);
        t.record(f64::NAN);
        let r = t.finish();
        assert!(!r.passed && r.failures == 1 && r.worst_error.is_infinite());
    }
}
