use serde::{Deserialize, Serialize};

use super::grid::CalibrationGrid;
use super::pfer::{pfer, PferMethod};
use super::score::{binomial_log_pmf, category_log_probs, category_sizes, score_from_counts, Category, Threshold};
use crate::error::{invalid, Error, Result};
use crate::resampling::SelectionProportionArray;

/// Score and PFER bound of every (λ, π) cell, row-major by λ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityScoreSurface {
    pub lambdas: Vec<f64>,
    pub pis: Vec<f64>,
    pub q: Vec<f64>,
    pub score: Vec<f64>,
    pub pfer: Vec<f64>,
    pub feasible: Vec<bool>,
    pub pfer_method: PferMethod,
    pub eta: Option<f64>,
}

impl StabilityScoreSurface {
    pub fn n_lambdas(&self) -> usize {
        self.lambdas.len()
    }

    pub fn n_pis(&self) -> usize {
        self.pis.len()
    }

    pub fn cell(&self, l: usize, m: usize) -> usize {
        l * self.pis.len() + m
    }

    /// Best feasible cell with a finite score: ties go to the larger λ, then the
    /// larger π.
    pub fn argmax(&self) -> Option<(usize, usize)> {
        let mut best: Option<(usize, usize, f64)> = None;
        for l in 0..self.n_lambdas() {
            for m in (0..self.n_pis()).rev() {
                let c = self.cell(l, m);
                let s = self.score[c];
                if self.feasible[c] && s.is_finite() && best.is_none_or(|b| s > b.2) {
                    best = Some((l, m, s));
                }
            }
        }
        best.map(|(l, m, _)| (l, m))
    }
}

pub(crate) struct ScoreRow {
    pub score: Vec<f64>,
    pub pfer: Vec<f64>,
    pub feasible: Vec<bool>,
}

/// Scores and bounds of one penalty over all thresholds.
pub(crate) fn score_row(
    counts: &[u32],
    k: usize,
    q: f64,
    pis: &[f64],
    thresholds: &[Threshold],
    method: PferMethod,
    eta: Option<f64>,
) -> ScoreRow {
    let n = counts.len();
    let q = q.min(n as f64);
    let mut hist = vec![0usize; k + 1];
    for &c in counts {
        hist[c as usize] += 1;
    }
    let lp = binomial_log_pmf(k, q / n as f64);
    let mut row = ScoreRow { score: Vec::new(), pfer: Vec::new(), feasible: Vec::new() };
    for (t, &pi) in thresholds.iter().zip(pis) {
        row.score.push(score_from_counts(category_sizes(&hist, t), category_log_probs(&lp, t)));
        let b = pfer(method, q, n, pi, k).unwrap_or(f64::INFINITY);
        row.feasible.push(eta.is_none_or(|e| b <= e));
        row.pfer.push(b);
    }
    row
}

pub(crate) fn check_eta(eta: Option<f64>) -> Result<()> {
    if let Some(e) = eta {
        if e.is_nan() || e < 0.0 {
            return invalid(format!("PFER threshold must be nonnegative, got {e}"));
        }
    }
    Ok(())
}

fn check_consistent(props: &SelectionProportionArray, grid: &CalibrationGrid) -> Result<()> {
    if props.n_lambdas() != grid.n_lambdas() || props.lambdas != grid.lambdas {
        return invalid("calibration grid does not match the selection proportions");
    }
    Ok(())
}

/// Scores every cell; with `eta` a cell is feasible when its PFER bound is at most
/// `eta`, otherwise all cells are. Cells where the bound is undefined get +∞.
pub fn score_surface(
    props: &SelectionProportionArray,
    grid: &CalibrationGrid,
    method: PferMethod,
    eta: Option<f64>,
) -> Result<StabilityScoreSurface> {
    check_consistent(props, grid)?;
    check_eta(eta)?;
    let thresholds = grid.pis.iter().map(|&p| Threshold::new(p)).collect::<Result<Vec<_>>>()?;
    let cells = grid.n_lambdas() * grid.n_pis();
    let (mut score, mut bound, mut feasible) = (Vec::with_capacity(cells), Vec::with_capacity(cells), Vec::with_capacity(cells));
    for l in 0..grid.n_lambdas() {
        let row = score_row(props.counts_at(l), props.k_effective, grid.q[l], &grid.pis, &thresholds, method, eta);
        score.extend(row.score);
        bound.extend(row.pfer);
        feasible.extend(row.feasible);
    }
    Ok(StabilityScoreSurface {
        lambdas: grid.lambdas.clone(),
        pis: grid.pis.clone(),
        q: grid.q.clone(),
        score,
        pfer: bound,
        feasible,
        pfer_method: method,
        eta,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationResult {
    pub lambda_index: usize,
    pub pi_index: usize,
    pub lambda_hat: f64,
    pub pi_hat: f64,
    pub score: f64,
    pub pfer_bound: f64,
    pub q: f64,
    /// Features with proportion at least `pi_hat`, ascending.
    pub selected: Vec<usize>,
    pub proportions: Vec<f64>,
    pub categories: Vec<Category>,
}

pub(crate) fn result_at(
    surface: &StabilityScoreSurface,
    props: &SelectionProportionArray,
    l: usize,
    m: usize,
) -> Result<CalibrationResult> {
    let k = props.k_effective;
    let pi = surface.pis[m];
    let t = Threshold::new(pi)?;
    let counts = props.counts_at(l);
    let categories: Vec<Category> = counts.iter().map(|&c| t.category(c as usize, k)).collect();
    let selected = (0..counts.len()).filter(|&j| categories[j] == Category::StableIn).collect();
    let c = surface.cell(l, m);
    Ok(CalibrationResult {
        lambda_index: l,
        pi_index: m,
        lambda_hat: surface.lambdas[l],
        pi_hat: pi,
        score: surface.score[c],
        pfer_bound: surface.pfer[c],
        q: surface.q[l],
        selected,
        proportions: props.proportions_at(l),
        categories,
    })
}

/// Maximizes the score over feasible cells.
pub fn calibrate(
    surface: &StabilityScoreSurface,
    grid: &CalibrationGrid,
    props: &SelectionProportionArray,
) -> Result<CalibrationResult> {
    check_consistent(props, grid)?;
    if surface.lambdas != grid.lambdas || surface.pis != grid.pis {
        return invalid("surface does not match the calibration grid");
    }
    let (l, m) = surface.argmax().ok_or(Error::NoFeasibleCell)?;
    result_at(surface, props, l, m)
}

/// Error-control calibration: fixed threshold `pi`, smallest penalty whose PFER bound
/// is at most `eta`.
pub fn calibrate_error_control(
    props: &SelectionProportionArray,
    grid: &CalibrationGrid,
    pi: f64,
    method: PferMethod,
    eta: f64,
) -> Result<CalibrationResult> {
    let fixed = CalibrationGrid::new(grid.lambdas.clone(), vec![pi], grid.q_raw.clone())?;
    let surface = score_surface(props, &fixed, method, Some(eta))?;
    let l = (0..fixed.n_lambdas()).rev().find(|&l| surface.feasible[l]).ok_or(Error::NoFeasibleCell)?;
    result_at(&surface, props, l, 0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::resampling::FeatureKind;

    fn props(counts: Vec<u32>, n: usize, k: usize, lambdas: Vec<f64>, q: Vec<f64>) -> SelectionProportionArray {
        SelectionProportionArray { lambdas, n_features: n, k_effective: k, kind: FeatureKind::Variable, counts, q }
    }

    fn example() -> (SelectionProportionArray, CalibrationGrid) {
        // three penalties over 6 features, K = 20
        let counts = vec![
            0, 0, 0, 0, 0, 0, //
            20, 19, 2, 1, 0, 0, //
            20, 20, 12, 10, 9, 8,
        ];
        let p = props(counts, 6, 20, vec![1.0, 0.5, 0.25], vec![0.0, 2.1, 4.0]);
        let g = CalibrationGrid::new(p.lambdas.clone(), vec![0.6, 0.75, 0.9], p.q.clone()).unwrap();
        (p, g)
    }

    #[test]
    fn unconstrained_picks_the_clean_split() {
        let (p, g) = example();
        let s = score_surface(&p, &g, PferMethod::Mb, None).unwrap();
        assert!(s.feasible.iter().all(|&f| f));
        let r = calibrate(&s, &g, &p).unwrap();
        assert_eq!(r.lambda_index, 1);
        assert_eq!(r.selected, vec![0, 1]);
        for (j, &pr) in r.proportions.iter().enumerate() {
            assert_eq!(r.selected.contains(&j), pr >= r.pi_hat);
        }
    }

    #[test]
    fn constraint_is_respected() {
        let (p, g) = example();
        let s = score_surface(&p, &g, PferMethod::Mb, Some(0.5)).unwrap();
        let r = calibrate(&s, &g, &p).unwrap();
        assert!(r.pfer_bound <= 0.5);
        let zero = score_surface(&p, &g, PferMethod::Mb, Some(0.0)).unwrap();
        for l in 1..3 {
            assert!((0..3).all(|m| !zero.feasible[zero.cell(l, m)]));
        }
        // only the empty row is feasible and its score is 0 (finite)
        assert_eq!(calibrate(&zero, &g, &p).unwrap().lambda_index, 0);
        let loose = score_surface(&p, &g, PferMethod::Mb, Some(1e9)).unwrap();
        let free = score_surface(&p, &g, PferMethod::Mb, None).unwrap();
        assert_eq!(calibrate(&loose, &g, &p).unwrap(), calibrate(&free, &g, &p).unwrap());
    }

    #[test]
    fn no_feasible_cell() {
        let p = props(vec![3, 0], 2, 4, vec![1.0], vec![1.0]);
        let g = CalibrationGrid::new(vec![1.0], vec![0.6], vec![1.0]).unwrap();
        let s = score_surface(&p, &g, PferMethod::Ss, Some(0.0)).unwrap();
        assert!(matches!(calibrate(&s, &g, &p), Err(Error::NoFeasibleCell)));
    }

    #[test]
    fn ties_prefer_sparser_and_stricter() {
        let p = props(vec![0, 0, 0, 0], 2, 10, vec![2.0, 1.0], vec![0.0, 0.0]);
        let g = CalibrationGrid::new(vec![2.0, 1.0], vec![0.6, 0.7], vec![0.0, 0.0]).unwrap();
        let s = score_surface(&p, &g, PferMethod::Mb, None).unwrap();
        let r = calibrate(&s, &g, &p).unwrap();
        assert_eq!((r.lambda_index, r.pi_index), (0, 1));
    }

    #[test]
    fn single_cell() {
        let p = props(vec![5, 1], 2, 5, vec![1.0], vec![1.0]);
        let g = CalibrationGrid::new(vec![1.0], vec![0.8], vec![1.0]).unwrap();
        let s = score_surface(&p, &g, PferMethod::Mb, None).unwrap();
        assert_eq!(calibrate(&s, &g, &p).unwrap().selected, vec![0]);
    }

    #[test]
    fn error_control_takes_smallest_admissible_penalty() {
        let (p, g) = example();
        let r = calibrate_error_control(&p, &g, 0.9, PferMethod::Mb, 1.0).unwrap();
        // q² / (0.8 · 6) ≤ 1 ⇔ q ≤ 2.19
        assert_eq!(r.lambda_index, 1);
        assert!(calibrate_error_control(&p, &g, 0.9, PferMethod::Mb, -1.0).is_err());
    }
}
