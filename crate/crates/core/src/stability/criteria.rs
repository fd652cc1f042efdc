use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::graph::Adjacency;
use crate::solvers::{glasso_path, CovarianceMatrix, GlassoOptions, Penalty};

/// Default EBIC hyper-parameter.
pub const DEFAULT_EBIC_GAMMA: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Criterion {
    Aic,
    Bic,
    Ebic,
}

/// Information criteria along a graphical LASSO path. Cells whose estimate is not
/// positive definite are invalid and hold +∞.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InformationCriteria {
    pub lambdas: Vec<f64>,
    pub log_likelihood: Vec<f64>,
    pub n_edges: Vec<usize>,
    pub aic: Vec<f64>,
    pub bic: Vec<f64>,
    pub ebic: Vec<f64>,
    pub valid: Vec<bool>,
    pub gamma: f64,
    pub supports: Vec<Adjacency>,
}

impl InformationCriteria {
    pub fn values(&self, c: Criterion) -> &[f64] {
        match c {
            Criterion::Aic => &self.aic,
            Criterion::Bic => &self.bic,
            Criterion::Ebic => &self.ebic,
        }
    }

    /// Index of the smallest valid value; the larger penalty wins ties.
    pub fn argmin(&self, c: Criterion) -> Option<usize> {
        let v = self.values(c);
        (0..v.len()).filter(|&i| self.valid[i]).fold(None, |best: Option<usize>, i| match best {
            Some(b) if v[b] <= v[i] => Some(b),
            _ => Some(i),
        })
    }

    pub fn support(&self, c: Criterion) -> Option<&Adjacency> {
        self.argmin(c).map(|i| &self.supports[i])
    }
}

/// ℓ = (n/2) log det Ω − tr(ΩS); AIC = −2ℓ + 2|E|; BIC = −2ℓ + |E| log n;
/// EBIC = BIC + 4γ|E| log p.
pub fn information_criteria(
    s: &CovarianceMatrix,
    lambdas: &[f64],
    n: usize,
    gamma: f64,
    opts: &GlassoOptions,
) -> Result<InformationCriteria> {
    if n < 2 {
        return invalid("need at least 2 observations");
    }
    if !(gamma >= 0.0 && gamma.is_finite()) {
        return invalid(format!("EBIC gamma must be finite and nonnegative, got {gamma}"));
    }
    let penalties: Vec<Penalty> = lambdas.iter().map(|&l| Penalty::Scalar(l)).collect();
    let path = glasso_path(s, &penalties, opts)?;
    let (nf, pf) = (n as f64, s.p() as f64);
    let mut out = InformationCriteria {
        lambdas: lambdas.to_vec(),
        log_likelihood: Vec::new(),
        n_edges: Vec::new(),
        aic: Vec::new(),
        bic: Vec::new(),
        ebic: Vec::new(),
        valid: Vec::new(),
        gamma,
        supports: Vec::new(),
    };
    for est in path {
        let e = est.n_edges();
        let ll = est.omega.clone().cholesky().map(|c| {
            let logdet = 2.0 * c.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>();
            let trace = est.omega.component_mul(s.values()).sum();
            0.5 * nf * logdet - trace
        });
        let ok = ll.as_ref().is_some_and(|v| v.is_finite());
        let ll = ll.unwrap_or(f64::NAN);
        let ef = e as f64;
        let inf = f64::INFINITY;
        out.aic.push(if ok { -2.0 * ll + 2.0 * ef } else { inf });
        out.bic.push(if ok { -2.0 * ll + nf.ln() * ef } else { inf });
        out.ebic.push(if ok { -2.0 * ll + nf.ln() * ef + 4.0 * gamma * ef * pf.ln() } else { inf });
        out.log_likelihood.push(ll);
        out.n_edges.push(e);
        out.valid.push(ok);
        out.supports.push(est.support);
    }
    Ok(out)
}
