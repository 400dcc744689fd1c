//! REML estimation for up to two crossed random intercepts.
//!
//! The model is `y = X beta + Z_a u_a + Z_b u_b + e` with
//! `u_k ~ N(0, sigma2_eps * gamma_k * I)` and `e ~ N(0, sigma2_eps * I)`.
//! The residual variance is profiled out, leaving the restricted likelihood
//! as a function of the variance ratios `gamma` alone. For each candidate
//! `gamma`, fixed effects and predicted group effects come from the mixed
//! model equations
//!
//! ```text
//! [ X'X      X'Z          ] [beta]   [X'y]
//! [ Z'X  Z'Z + diag(1/g)  ] [ u  ] = [Z'y]
//! ```
//!
//! whose Cholesky factor also yields the two log-determinants of the
//! restricted likelihood. `gamma` is optimized by cyclic golden-section
//! descent on `log gamma` within [-12, 12]; a ratio that lands on the lower
//! bound is clamped to an exactly-zero variance component by refitting
//! without that factor (the criterion is continuous there, so the clamped
//! fit is the boundary limit). With no random factors the fit reduces to
//! ordinary least squares with the REML `n - p` variance denominator.

use nalgebra::{Cholesky, DMatrix, DVector};

use super::{conditional_r2, Design, FactorIndex, LmeError};

const LOG_GAMMA_LO: f64 = -12.0;
const LOG_GAMMA_HI: f64 = 12.0;
const GOLDEN_TOL: f64 = 1e-8;
const MAX_CYCLES: usize = 100;
const CYCLE_TOL: f64 = 1e-10;

/// A fitted score model.
#[derive(Debug, Clone)]
pub struct LmeFit {
    /// Fixed-effect estimates, in design column order.
    pub beta: Vec<(String, f64)>,
    /// Standard errors of the fixed effects.
    pub beta_se: Vec<f64>,
    pub sigma2_eps: f64,
    /// Variance of the first random intercept (0 when absent).
    pub sigma2_a: f64,
    /// Variance of the second random intercept (0 when absent).
    pub sigma2_b: f64,
    pub marginal_r2: f64,
    pub conditional_r2: f64,
    /// -2 times the restricted log-likelihood at the optimum.
    pub reml_deviance: f64,
    pub n_obs: usize,
    pub converged: bool,
}

impl LmeFit {
    pub fn coef(&self, name: &str) -> Option<f64> {
        self.beta
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, b)| *b)
    }

    pub fn coef_se(&self, name: &str) -> Option<f64> {
        self.beta
            .iter()
            .position(|(n, _)| n == name)
            .map(|i| self.beta_se[i])
    }
}

/// Cross products shared by every criterion evaluation of one fit.
struct CrossProducts {
    xtx: DMatrix<f64>,
    xtz: DMatrix<f64>,
    ztz: DMatrix<f64>,
    xty: DVector<f64>,
    zty: DVector<f64>,
    yty: f64,
    n: usize,
    p: usize,
    /// Level counts of the active factors, in order.
    q: Vec<usize>,
}

fn build_cross_products(design: &Design, factors: &[&FactorIndex]) -> CrossProducts {
    let n = design.fixed.nrows();
    let p = design.fixed.ncols();
    let q: Vec<usize> = factors.iter().map(|f| f.levels.len()).collect();
    let q_total: usize = q.iter().sum();
    let offsets: Vec<usize> = q
        .iter()
        .scan(0, |acc, &len| {
            let off = *acc;
            *acc += len;
            Some(off)
        })
        .collect();

    let xtx = design.fixed.transpose() * &design.fixed;
    let xty = design.fixed.transpose() * &design.response;
    let yty = design.response.dot(&design.response);

    let mut xtz = DMatrix::zeros(p, q_total);
    let mut ztz = DMatrix::zeros(q_total, q_total);
    let mut zty = DVector::zeros(q_total);
    for row in 0..n {
        let cols: Vec<usize> = factors
            .iter()
            .zip(&offsets)
            .map(|(f, off)| off + f.index[row])
            .collect();
        for &c in &cols {
            for j in 0..p {
                xtz[(j, c)] += design.fixed[(row, j)];
            }
            zty[c] += design.response[row];
            ztz[(c, c)] += 1.0;
        }
        // Cross-factor count (each row touches one level per factor).
        if cols.len() == 2 {
            ztz[(cols[0], cols[1])] += 1.0;
            ztz[(cols[1], cols[0])] += 1.0;
        }
    }
    CrossProducts {
        xtx,
        xtz,
        ztz,
        xty,
        zty,
        yty,
        n,
        p,
        q,
    }
}

struct Solved {
    deviance: f64,
    beta: DVector<f64>,
    sigma2_eps: f64,
    /// sigma2 of each active factor, in order.
    sigma2: Vec<f64>,
    /// Diagonal of the (p x p) covariance block, scaled by sigma2_eps.
    beta_var: Vec<f64>,
}

const TWO_PI: f64 = 2.0 * std::f64::consts::PI;

/// Solve the mixed model equations at fixed variance ratios and evaluate
/// -2 times the restricted log-likelihood.
fn solve_at(cp: &CrossProducts, log_gamma: &[f64]) -> Result<Solved, LmeError> {
    let q_total: usize = cp.q.iter().sum();
    let dim = cp.p + q_total;
    let mut c = DMatrix::zeros(dim, dim);
    c.view_mut((0, 0), (cp.p, cp.p)).copy_from(&cp.xtx);
    if q_total > 0 {
        c.view_mut((0, cp.p), (cp.p, q_total)).copy_from(&cp.xtz);
        c.view_mut((cp.p, 0), (q_total, cp.p))
            .copy_from(&cp.xtz.transpose());
        c.view_mut((cp.p, cp.p), (q_total, q_total))
            .copy_from(&cp.ztz);
        let mut at = cp.p;
        for (k, &qk) in cp.q.iter().enumerate() {
            let lambda = (-log_gamma[k]).exp();
            for i in 0..qk {
                c[(at + i, at + i)] += lambda;
            }
            at += qk;
        }
    }

    let chol = Cholesky::new(c).ok_or(LmeError::RankDeficient)?;
    let log_det_c: f64 = chol.l().diagonal().iter().map(|d| 2.0 * d.ln()).sum();

    let mut rhs = DVector::zeros(dim);
    rhs.rows_mut(0, cp.p).copy_from(&cp.xty);
    if q_total > 0 {
        rhs.rows_mut(cp.p, q_total).copy_from(&cp.zty);
    }
    let solution = chol.solve(&rhs);

    // Generalized residual sum of squares through the solved effects.
    let mut ypy = cp.yty;
    for i in 0..dim {
        ypy -= solution[i] * rhs[i];
    }
    // Guard against cancellation on exactly-fitting data.
    let ypy = ypy.max(1e-300);

    let df = (cp.n - cp.p) as f64;
    let sigma2_eps = ypy / df;
    let mut deviance = df * (1.0 + (TWO_PI * sigma2_eps).ln()) + log_det_c;
    for (k, &qk) in cp.q.iter().enumerate() {
        deviance += qk as f64 * log_gamma[k];
    }

    let cov = chol.inverse();
    let beta_var: Vec<f64> = (0..cp.p).map(|i| cov[(i, i)] * sigma2_eps).collect();
    Ok(Solved {
        deviance,
        beta: solution.rows(0, cp.p).into_owned(),
        sigma2_eps,
        sigma2: log_gamma
            .iter()
            .map(|&lg| lg.exp() * sigma2_eps)
            .collect(),
        beta_var,
    })
}

/// Golden-section minimization over a closed interval; returns the argmin.
fn golden_min(mut f: impl FnMut(f64) -> f64, lo: f64, hi: f64, tol: f64) -> (f64, f64) {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut a = lo;
    let mut b = hi;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while (b - a).abs() > tol {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    if fc < fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

/// Evaluate the REML deviance of a design at explicit variance ratios
/// (one `log gamma` per active factor, natural log). Exposed so tests can
/// certify local optimality of a fit.
pub fn reml_deviance_at(design: &Design, log_gamma: &[f64]) -> Result<f64, LmeError> {
    let factors: Vec<&FactorIndex> = [design.factor_a.as_ref(), design.factor_b.as_ref()]
        .into_iter()
        .flatten()
        .collect();
    assert_eq!(factors.len(), log_gamma.len(), "one ratio per active factor");
    let cp = build_cross_products(design, &factors);
    Ok(solve_at(&cp, log_gamma)?.deviance)
}

fn validate(design: &Design) -> Result<(), LmeError> {
    let n = design.fixed.nrows();
    let p = design.fixed.ncols();
    if n <= p {
        return Err(LmeError::TooFewObservations(n, p));
    }
    for f in [design.factor_a.as_ref(), design.factor_b.as_ref()]
        .into_iter()
        .flatten()
    {
        if f.levels.len() < 2 {
            return Err(LmeError::DegenerateFactor(f.name));
        }
    }
    Ok(())
}

/// Maximize the restricted likelihood over the active variance ratios and
/// return the fitted model.
///
/// Non-convergence is flagged (`converged = false`) with the best iterate
/// returned. A rank-deficient fixed matrix is an error.
pub fn fit_reml(design: &Design) -> Result<LmeFit, LmeError> {
    validate(design)?;
    fit_reml_inner(design, design.factor_a.as_ref(), design.factor_b.as_ref())
}

fn fit_reml_inner(
    design: &Design,
    factor_a: Option<&FactorIndex>,
    factor_b: Option<&FactorIndex>,
) -> Result<LmeFit, LmeError> {
    // Which of (a, b) is active, preserving report slots.
    let slots: Vec<(usize, &FactorIndex)> = [factor_a, factor_b]
        .into_iter()
        .enumerate()
        .filter_map(|(slot, f)| f.map(|f| (slot, f)))
        .collect();
    let factors: Vec<&FactorIndex> = slots.iter().map(|(_, f)| *f).collect();
    let cp = build_cross_products(design, &factors);

    let k = factors.len();
    let mut log_gamma = vec![0.0f64; k];
    let mut converged = true;
    if k > 0 {
        let mut best = solve_at(&cp, &log_gamma)?.deviance;
        converged = false;
        for _ in 0..MAX_CYCLES {
            let before = best;
            for axis in 0..k {
                let mut trial = log_gamma.clone();
                let (arg, val) = golden_min(
                    |lg| {
                        trial[axis] = lg;
                        solve_at(&cp, &trial).map(|s| s.deviance).unwrap_or(f64::INFINITY)
                    },
                    LOG_GAMMA_LO,
                    LOG_GAMMA_HI,
                    GOLDEN_TOL,
                );
                if val <= best {
                    log_gamma[axis] = arg;
                    best = val;
                }
            }
            if before - best < CYCLE_TOL {
                converged = true;
                break;
            }
        }
        // Flat-deviance ties resolve toward the smaller ratio.
        for axis in 0..k {
            let mut trial = log_gamma.clone();
            trial[axis] = LOG_GAMMA_LO;
            if let Ok(s) = solve_at(&cp, &trial) {
                if s.deviance <= best + CYCLE_TOL {
                    log_gamma[axis] = LOG_GAMMA_LO;
                    best = best.min(s.deviance);
                }
            }
        }
        // A ratio on the lower bound means a zero variance component: refit
        // without that factor (the criterion is continuous at the boundary).
        let at_bound: Vec<bool> = log_gamma
            .iter()
            .map(|&lg| lg <= LOG_GAMMA_LO + 1e-6)
            .collect();
        if at_bound.iter().any(|&b| b) {
            let keep = |want_slot: usize| -> Option<&FactorIndex> {
                slots
                    .iter()
                    .zip(&at_bound)
                    .find(|((slot, _), &bound)| *slot == want_slot && !bound)
                    .map(|((_, f), _)| *f)
            };
            let mut fit = fit_reml_inner(design, keep(0), keep(1))?;
            fit.converged = fit.converged && converged;
            return Ok(fit);
        }
    }

    let solved = solve_at(&cp, &log_gamma)?;
    let mut sigma2_slot = [0.0f64; 2];
    for ((slot, _), sigma2) in slots.iter().zip(&solved.sigma2) {
        sigma2_slot[*slot] = *sigma2;
    }
    let mut fit = LmeFit {
        beta: design
            .fixed_names
            .iter()
            .cloned()
            .zip(solved.beta.iter().cloned())
            .collect(),
        beta_se: solved.beta_var.iter().map(|v| v.max(0.0).sqrt()).collect(),
        sigma2_eps: solved.sigma2_eps,
        sigma2_a: sigma2_slot[0],
        sigma2_b: sigma2_slot[1],
        marginal_r2: 0.0,
        conditional_r2: 0.0,
        reml_deviance: solved.deviance,
        n_obs: cp.n,
        converged,
    };
    let (marginal, conditional) = conditional_r2(&fit, design);
    fit.marginal_r2 = marginal;
    fit.conditional_r2 = conditional;
    Ok(fit)
}

#[cfg(test)]
mod tests {
    use super::super::{build_design, ModelFormula, ScoreRow, ScoreTable};
    use super::*;
    use rand::Rng;
    use rand_distr::{Distribution, Normal};

    fn ols_design(values: &[f64]) -> Design {
        let table = ScoreTable {
            rows: values
                .iter()
                .enumerate()
                .map(|(i, &v)| ScoreRow::new(format!("r{i}"), v, (i % 2) as u8))
                .collect(),
        };
        // Intercept-only: strip the class column by hand.
        let mut design = build_design(
            &table,
            &ModelFormula {
                fixed: vec![super::super::FixedTerm::Intercept],
                random_a: false,
                random_b: false,
            },
        )
        .unwrap();
        design.fixed_names = vec!["mu".into()];
        design
    }

    #[test]
    fn intercept_only_reduces_to_sample_mean_and_variance() {
        let design = ols_design(&[1.0, 2.0, 3.0]);
        let fit = fit_reml(&design).unwrap();
        assert!((fit.coef("mu").unwrap() - 2.0).abs() < 1e-12);
        assert!((fit.sigma2_eps - 1.0).abs() < 1e-12);
        assert!(fit.converged);
        assert_eq!(fit.sigma2_a, 0.0);
        assert_eq!(fit.sigma2_b, 0.0);
    }

    #[test]
    fn no_random_factor_fit_equals_closed_form_ols() {
        let mut rng = crate::seeding::rng_from_seed(2);
        let noise = Normal::new(0.0, 0.7).unwrap();
        let rows: Vec<ScoreRow> = (0..200)
            .map(|i| {
                let y = (i % 2) as u8;
                let dp = ((i / 2) % 2) as f64;
                let dn = ((i / 4) % 2) as f64;
                let score =
                    -0.3 + 1.1 * y as f64 + 0.4 * dp - 0.6 * dn + noise.sample(&mut rng);
                ScoreRow::new(format!("r{i}"), score, y)
                    .with_covariate("delta_pos", dp)
                    .with_covariate("delta_neg", dn)
            })
            .collect();
        let design = build_design(&ScoreTable { rows }, &ModelFormula::interventional()).unwrap();
        let fit = fit_reml(&design).unwrap();

        // Closed-form OLS via the normal equations.
        let xtx = design.fixed.transpose() * &design.fixed;
        let xty = design.fixed.transpose() * &design.response;
        let beta = xtx.clone().try_inverse().unwrap() * &xty;
        for (j, (_, b)) in fit.beta.iter().enumerate() {
            assert!((b - beta[j]).abs() < 1e-8, "coef {j}");
        }
        let resid = &design.response - &design.fixed * &beta;
        let rss: f64 = resid.iter().map(|r| r * r).sum();
        let sigma2 = rss / (design.fixed.nrows() - design.fixed.ncols()) as f64;
        assert!((fit.sigma2_eps - sigma2).abs() < 1e-8);
    }

    #[test]
    fn balanced_one_way_matches_anova_estimators() {
        let groups = 12usize;
        let reps = 8usize;
        let sigma_a = 0.9;
        let sigma_e = 0.5;
        let mut rng = crate::seeding::rng_from_seed(31);
        let ga = Normal::new(0.0, sigma_a).unwrap();
        let ge = Normal::new(0.0, sigma_e).unwrap();
        let mut rows = Vec::new();
        for g in 0..groups {
            let a = ga.sample(&mut rng);
            for r in 0..reps {
                let mut row =
                    ScoreRow::new(format!("g{g}r{r}"), 1.5 + a + ge.sample(&mut rng), (r % 2) as u8);
                row.group_a = Some(format!("g{g}"));
                rows.push(row);
            }
        }
        let formula = ModelFormula {
            fixed: vec![super::super::FixedTerm::Intercept],
            random_a: true,
            random_b: false,
        };
        let design = build_design(&ScoreTable { rows: rows.clone() }, &formula).unwrap();
        let fit = fit_reml(&design).unwrap();

        // ANOVA oracle on the balanced layout.
        let n = (groups * reps) as f64;
        let grand = rows.iter().map(|r| r.score).sum::<f64>() / n;
        let mut ss_between = 0.0;
        let mut ss_within = 0.0;
        for g in 0..groups {
            let vals: Vec<f64> = rows
                .iter()
                .filter(|r| r.group_a.as_deref() == Some(&format!("g{g}")))
                .map(|r| r.score)
                .collect();
            let m = vals.iter().sum::<f64>() / vals.len() as f64;
            ss_between += vals.len() as f64 * (m - grand).powi(2);
            ss_within += vals.iter().map(|v| (v - m).powi(2)).sum::<f64>();
        }
        let msb = ss_between / (groups as f64 - 1.0);
        let msw = ss_within / (n - groups as f64);
        let anova_sigma_a = ((msb - msw) / reps as f64).max(0.0);

        assert!(
            (fit.sigma2_a - anova_sigma_a).abs() < 1e-5,
            "{} vs {}",
            fit.sigma2_a,
            anova_sigma_a
        );
        assert!((fit.sigma2_eps - msw).abs() < 1e-5);
        assert!((fit.coef("mu").unwrap() - grand).abs() < 1e-6);
    }

    #[test]
    fn zero_group_variance_clamps_to_zero() {
        // Every group holds the same value multiset, so the between-group
        // mean square is exactly zero: the ratio must hit the boundary and
        // report an exactly-zero component.
        let rows: Vec<ScoreRow> = (0..300)
            .map(|i| {
                let value = [(-1.4), (-0.3), 0.2, 0.6, 0.9][i % 5];
                let mut row = ScoreRow::new(format!("r{i}"), value, (i % 2) as u8);
                row.group_a = Some(format!("g{}", (i / 5) % 10));
                row
            })
            .collect();
        let formula = ModelFormula {
            fixed: vec![super::super::FixedTerm::Intercept, super::super::FixedTerm::Class],
            random_a: true,
            random_b: false,
        };
        let design = build_design(&ScoreTable { rows }, &formula).unwrap();
        let fit = fit_reml(&design).unwrap();
        assert_eq!(fit.sigma2_a, 0.0);
        assert!(fit.converged);
    }

    fn simulate_crossed(
        n: usize,
        n_a: usize,
        n_b: usize,
        sigma_a: f64,
        sigma_b: f64,
        sigma_e: f64,
        d: f64,
        seed: u64,
    ) -> ScoreTable {
        let mut rng = crate::seeding::rng_from_seed(seed);
        let normal = Normal::new(0.0, 1.0).unwrap();
        let a_effects: Vec<f64> = (0..n_a).map(|_| sigma_a * normal.sample(&mut rng)).collect();
        let b_effects: Vec<f64> = (0..n_b).map(|_| sigma_b * normal.sample(&mut rng)).collect();
        let rows = (0..n)
            .map(|i| {
                let ai = rng.gen_range(0..n_a);
                let bi = rng.gen_range(0..n_b);
                let y = (i % 2) as u8;
                let score = -0.1
                    + d * y as f64
                    + a_effects[ai]
                    + b_effects[bi]
                    + sigma_e * normal.sample(&mut rng);
                let mut row = ScoreRow::new(format!("r{i}"), score, y);
                row.group_a = Some(format!("a{ai}"));
                row.group_b = Some(format!("b{bi}"));
                row
            })
            .collect();
        ScoreTable { rows }
    }

    #[test]
    fn crossed_intercepts_recover_simulated_components() {
        // Speaker-scale and attack-scale variances: the attack factor is
        // larger and must stay larger in the estimates. Fixed seed.
        let table = simulate_crossed(20_000, 40, 15, 0.3, 1.5, 1.0, 1.0, 424_242);
        let formula = ModelFormula {
            fixed: vec![super::super::FixedTerm::Intercept, super::super::FixedTerm::Class],
            random_a: true,
            random_b: true,
        };
        let design = build_design(&table, &formula).unwrap();
        let fit = fit_reml(&design).unwrap();
        assert!(fit.converged);
        assert!(fit.sigma2_b > fit.sigma2_a, "{} {}", fit.sigma2_b, fit.sigma2_a);
        assert!((fit.sigma2_a - 0.09).abs() / 0.09 < 0.2, "sigma2_a {}", fit.sigma2_a);
        assert!((fit.sigma2_b - 2.25).abs() / 2.25 < 0.2, "sigma2_b {}", fit.sigma2_b);
        assert!((fit.sigma2_eps - 1.0).abs() < 0.05);
        assert!((fit.coef("d").unwrap() - 1.0).abs() < 0.1);
    }

    #[test]
    fn optimum_certifies_against_coordinate_endpoints() {
        let table = simulate_crossed(2_000, 12, 6, 0.5, 0.8, 1.0, 0.7, 99);
        let formula = ModelFormula {
            fixed: vec![super::super::FixedTerm::Intercept, super::super::FixedTerm::Class],
            random_a: true,
            random_b: true,
        };
        let design = build_design(&table, &formula).unwrap();
        let fit = fit_reml(&design).unwrap();
        let lg_a = (fit.sigma2_a / fit.sigma2_eps).ln();
        let lg_b = (fit.sigma2_b / fit.sigma2_eps).ln();
        let at = |a: f64, b: f64| reml_deviance_at(&design, &[a, b]).unwrap();
        let best = at(lg_a, lg_b);
        assert!((best - fit.reml_deviance).abs() < 1e-6);
        for (a, b) in [
            (LOG_GAMMA_LO, lg_b),
            (LOG_GAMMA_HI, lg_b),
            (lg_a, LOG_GAMMA_LO),
            (lg_a, LOG_GAMMA_HI),
        ] {
            assert!(at(a, b) >= best - 1e-7, "endpoint ({a}, {b}) beats optimum");
        }
    }

    #[test]
    fn shift_moves_only_the_intercept() {
        let table = simulate_crossed(1_000, 10, 5, 0.4, 0.6, 1.0, 1.2, 7);
        let formula = ModelFormula {
            fixed: vec![super::super::FixedTerm::Intercept, super::super::FixedTerm::Class],
            random_a: true,
            random_b: true,
        };
        let design = build_design(&table, &formula).unwrap();
        let base = fit_reml(&design).unwrap();

        let mut shifted_table = table.clone();
        for row in &mut shifted_table.rows {
            row.score += 5.0;
        }
        let shifted = fit_reml(&build_design(&shifted_table, &formula).unwrap()).unwrap();
        assert!((shifted.coef("mu").unwrap() - base.coef("mu").unwrap() - 5.0).abs() < 1e-8);
        assert!((shifted.coef("d").unwrap() - base.coef("d").unwrap()).abs() < 1e-8);
        assert!((shifted.sigma2_eps - base.sigma2_eps).abs() < 1e-8);
        assert!((shifted.sigma2_a - base.sigma2_a).abs() < 1e-7);
        assert!((shifted.sigma2_b - base.sigma2_b).abs() < 1e-7);
    }

    #[test]
    fn scaling_scales_effects_linearly_and_variances_quadratically() {
        let table = simulate_crossed(1_000, 10, 5, 0.4, 0.6, 1.0, 1.2, 13);
        let formula = ModelFormula {
            fixed: vec![super::super::FixedTerm::Intercept, super::super::FixedTerm::Class],
            random_a: true,
            random_b: true,
        };
        let base = fit_reml(&build_design(&table, &formula).unwrap()).unwrap();
        let k = 3.5;
        let mut scaled_table = table.clone();
        for row in &mut scaled_table.rows {
            row.score *= k;
        }
        let scaled = fit_reml(&build_design(&scaled_table, &formula).unwrap()).unwrap();
        assert!((scaled.coef("d").unwrap() - k * base.coef("d").unwrap()).abs() < 1e-7);
        assert!((scaled.sigma2_eps - k * k * base.sigma2_eps).abs() < 1e-6);
        assert!((scaled.sigma2_a - k * k * base.sigma2_a).abs() < 1e-5);
        assert!((scaled.sigma2_b - k * k * base.sigma2_b).abs() < 1e-5);
    }

    #[test]
    fn r2_bounds_hold() {
        let table = simulate_crossed(1_500, 8, 4, 0.5, 0.9, 1.0, 1.0, 21);
        let formula = ModelFormula {
            fixed: vec![super::super::FixedTerm::Intercept, super::super::FixedTerm::Class],
            random_a: true,
            random_b: true,
        };
        let design = build_design(&table, &formula).unwrap();
        let fit = fit_reml(&design).unwrap();
        assert!(fit.marginal_r2 >= 0.0);
        assert!(fit.marginal_r2 <= fit.conditional_r2);
        assert!(fit.conditional_r2 <= 1.0);
    }

    #[test]
    fn too_few_observations_is_an_error() {
        let design = ols_design(&[1.0]);
        assert!(matches!(
            fit_reml(&design),
            Err(LmeError::TooFewObservations(1, 1))
        ));
    }

    #[test]
    fn rank_deficient_fixed_matrix_is_an_error() {
        // delta_pos duplicated into delta_neg: two identical columns.
        let rows: Vec<ScoreRow> = (0..30)
            .map(|i| {
                ScoreRow::new(format!("r{i}"), i as f64, (i % 2) as u8)
                    .with_covariate("delta_pos", 1.0)
                    .with_covariate("delta_neg", 1.0)
            })
            .collect();
        let design = build_design(&ScoreTable { rows }, &ModelFormula::interventional()).unwrap();
        assert!(matches!(fit_reml(&design), Err(LmeError::RankDeficient)));
    }
}
