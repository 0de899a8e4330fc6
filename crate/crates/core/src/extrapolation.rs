//! Projection of ride-sharing savings from population samples to larger
//! populations by fitting the saturating curve `s(n) = a - b * n^(-c)`.

use std::io::{Read, Write};

use nalgebra::{Matrix3, Vector3};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::endpoints::{
    solve_endpoints, success_ratio, LocalSearchParams, MatchConstraints, MatchError, MatchingInstance,
    ABSOLUTE_UPPER_BOUND,
};
use crate::enroute::{enroute_solve, EnrouteError, EnrouteParams, RouteGrid};
use crate::population::Commuter;

#[derive(Debug, Error)]
pub enum ExtrapolationError {
    #[error("sample fraction {0} outside (0, 1]")]
    Fraction(f64),
    #[error("fractions must be sorted ascending")]
    Unsorted,
    #[error("repeats must be at least 1")]
    Repeats,
    #[error("fit needs at least 3 points with distinct fractions, got {0}")]
    TooFewPoints(usize),
    #[error("fit did not converge after {iterations} iterations (residual sum of squares {rss:.3e})")]
    NoConvergence { iterations: usize, rss: f64, residuals: Vec<f64> },
    #[error(transparent)]
    Match(#[from] MatchError),
    #[error(transparent)]
    Enroute(#[from] EnrouteError),
    #[error("curve csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("curve csv line {line}: {message}")]
    Row { line: u64, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverKind {
    Endpoints,
    Enroute,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub fraction: f64,
    pub savings_percent: f64,
}

/// Settings for the solves behind each curve point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurveSolver {
    pub kind: SolverKind,
    pub local_search: LocalSearchParams,
    pub enroute: EnrouteParams,
    pub route_cell_km: f64,
}

impl CurveSolver {
    pub fn new(kind: SolverKind) -> Self {
        Self {
            kind,
            local_search: LocalSearchParams::default(),
            enroute: EnrouteParams::default(),
            route_cell_km: crate::enroute::DEFAULT_ROUTE_CELL_KM,
        }
    }

    /// Savings percent of one population: every commuter starts in their own car.
    pub fn savings(&self, people: &[Commuter], c: &MatchConstraints, seed: u64) -> Result<f64, ExtrapolationError> {
        if people.is_empty() {
            return Ok(0.0);
        }
        let inst = MatchingInstance::new(people, c)?;
        let params = LocalSearchParams { seed, ..self.local_search };
        let mut a = solve_endpoints(&inst, &params).assignment;
        if self.kind == SolverKind::Enroute {
            let grid = RouteGrid::covering(people, self.route_cell_km)?;
            a = enroute_solve(&a, people, c, &grid, &self.enroute)?.assignment;
        }
        Ok(success_ratio(people.len(), a.car_count())?)
    }
}

/// Mean savings over `repeats` uniform subsamples for each fraction.
pub fn sample_curve(
    all: &[Commuter],
    fractions: &[f64],
    solver: &CurveSolver,
    c: &MatchConstraints,
    repeats: usize,
    seed: u64,
) -> Result<Vec<CurvePoint>, ExtrapolationError> {
    if let Some(&f) = fractions.iter().find(|&&f| !(f > 0.0 && f <= 1.0)) {
        return Err(ExtrapolationError::Fraction(f));
    }
    if fractions.windows(2).any(|w| w[0] > w[1]) {
        return Err(ExtrapolationError::Unsorted);
    }
    if repeats == 0 {
        return Err(ExtrapolationError::Repeats);
    }
    let jobs: Vec<(usize, usize)> = (0..fractions.len()).flat_map(|i| (0..repeats).map(move |r| (i, r))).collect();
    let results: Vec<f64> = jobs
        .par_iter()
        .map(|&(i, r)| {
            let job_seed = seed.wrapping_add(((i as u64) << 32) | r as u64);
            let k = ((fractions[i] * all.len() as f64).round() as usize).min(all.len());
            let sample: Vec<Commuter> = if k == all.len() {
                all.to_vec()
            } else {
                let mut rng = ChaCha8Rng::seed_from_u64(job_seed);
                all.choose_multiple(&mut rng, k).cloned().collect()
            };
            solver.savings(&sample, c, job_seed)
        })
        .collect::<Result<_, _>>()?;
    Ok(fractions
        .iter()
        .enumerate()
        .map(|(i, &fraction)| CurvePoint {
            fraction,
            savings_percent: results[i * repeats..(i + 1) * repeats].iter().sum::<f64>() / repeats as f64,
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurveParams {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl CurveParams {
    pub fn eval(&self, n: f64) -> f64 {
        self.a - self.b * n.powf(-self.c)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    pub a_max: f64,
    pub c_max: f64,
    pub tolerance: f64,
    pub max_iters: usize,
    /// Starting point; derived from the data when absent.
    pub initial: Option<CurveParams>,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self { a_max: ABSOLUTE_UPPER_BOUND, c_max: 5.0, tolerance: 1e-10, max_iters: 500, initial: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveFit {
    pub params: CurveParams,
    pub residuals: Vec<f64>,
    pub rss: f64,
    pub iterations: usize,
    /// Parameters that ended on a bound of the box.
    pub at_bounds: Vec<String>,
}

// c must stay strictly positive.
const C_MIN: f64 = 1e-9;

fn clamp_params(p: Vector3<f64>, o: &FitOptions) -> Vector3<f64> {
    Vector3::new(p[0].clamp(0.0, o.a_max), p[1].max(0.0), p[2].clamp(C_MIN, o.c_max))
}

fn pinned(p: &Vector3<f64>, o: &FitOptions) -> Vec<String> {
    let mut out = Vec::new();
    if p[0] <= 0.0 || p[0] >= o.a_max {
        out.push("a".to_string());
    }
    if p[1] <= 0.0 {
        out.push("b".to_string());
    }
    if p[2] <= C_MIN || p[2] >= o.c_max {
        out.push("c".to_string());
    }
    out
}

fn residuals(points: &[CurvePoint], p: &Vector3<f64>) -> Vec<f64> {
    let params = CurveParams { a: p[0], b: p[1], c: p[2] };
    points.iter().map(|q| params.eval(q.fraction) - q.savings_percent).collect()
}

fn sum_sq(r: &[f64]) -> f64 {
    r.iter().map(|x| x * x).sum()
}

/// Box-constrained Levenberg–Marquardt least squares.
///
/// A point where no damped step lowers the residual is accepted even when
/// parameters sit on the box; running out of iterations is an error.
pub fn fit_curve(points: &[CurvePoint], options: &FitOptions) -> Result<CurveFit, ExtrapolationError> {
    let mut distinct: Vec<f64> = points.iter().map(|p| p.fraction).collect();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    if distinct.len() < 3 {
        return Err(ExtrapolationError::TooFewPoints(distinct.len()));
    }
    if let Some(p) = points.iter().find(|p| p.fraction.is_nan() || p.fraction <= 0.0) {
        return Err(ExtrapolationError::Fraction(p.fraction));
    }
    let max_s = points.iter().map(|p| p.savings_percent).fold(f64::NEG_INFINITY, f64::max);
    let min_s = points.iter().map(|p| p.savings_percent).fold(f64::INFINITY, f64::min);
    let start = options.initial.unwrap_or_else(|| {
        let a = max_s + 5.0;
        CurveParams { a, b: a - min_s, c: 0.5 }
    });
    let mut p = clamp_params(Vector3::new(start.a, start.b, start.c), options);
    let mut r = residuals(points, &p);
    let mut rss = sum_sq(&r);
    let scale = 1.0 + points.iter().map(|q| q.savings_percent.powi(2)).sum::<f64>();
    let mut lambda = 1e-3;
    let mut iterations = 0;
    let mut converged = rss <= 1e-28 * scale;
    while !converged && iterations < options.max_iters {
        iterations += 1;
        let mut jtj = Matrix3::zeros();
        let mut jtr = Vector3::zeros();
        for (q, &ri) in points.iter().zip(&r) {
            let pow = q.fraction.powf(-p[2]);
            let j = Vector3::new(1.0, -pow, p[1] * pow * q.fraction.ln());
            jtj += j * j.transpose();
            jtr += j * ri;
        }
        // Parameters on a bound whose descent direction points outside stay fixed.
        let fixed: [bool; 3] = std::array::from_fn(|k| {
            let descent = -jtr[k];
            let lower = [0.0, 0.0, C_MIN][k];
            let upper = [options.a_max, f64::INFINITY, options.c_max][k];
            (p[k] <= lower && descent < 0.0) || (p[k] >= upper && descent > 0.0)
        });
        let mut improved = false;
        while lambda < 1e16 {
            let mut damped = jtj;
            let mut rhs = -jtr;
            for k in 0..3 {
                damped[(k, k)] += lambda * jtj[(k, k)].max(1e-12);
                if fixed[k] {
                    for m in 0..3 {
                        damped[(k, m)] = 0.0;
                        damped[(m, k)] = 0.0;
                    }
                    damped[(k, k)] = 1.0;
                    rhs[k] = 0.0;
                }
            }
            let Some(step) = damped.lu().solve(&rhs) else {
                lambda *= 10.0;
                continue;
            };
            let candidate = clamp_params(p + step, options);
            let cr = residuals(points, &candidate);
            let crss = sum_sq(&cr);
            if crss < rss {
                let gain = (rss - crss) / rss.max(f64::MIN_POSITIVE);
                let moved = (candidate - p).amax() / (1.0 + p.amax());
                p = candidate;
                r = cr;
                rss = crss;
                lambda = (lambda / 10.0).max(1e-12);
                improved = true;
                converged = rss <= 1e-28 * scale || (gain < options.tolerance && moved < options.tolerance);
                break;
            }
            lambda *= 10.0;
        }
        // No damped step reduces the residual: stationary within the box.
        converged |= !improved;
    }
    if !converged {
        return Err(ExtrapolationError::NoConvergence { iterations, rss, residuals: r });
    }
    Ok(CurveFit { params: CurveParams { a: p[0], b: p[1], c: p[2] }, residuals: r, rss, iterations, at_bounds: pinned(&p, options) })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Projection {
    pub target_multiple: f64,
    pub params: CurveParams,
    /// Curve value at the target before clamping.
    pub raw_projection: f64,
    /// Clamped to [largest observed savings, 75].
    pub projected_savings_percent: f64,
    pub residuals: Vec<f64>,
    pub rss: f64,
    pub iterations: usize,
    pub at_bounds: Vec<String>,
}

pub fn fit_and_project(points: &[CurvePoint], target_multiple: f64) -> Result<Projection, ExtrapolationError> {
    fit_and_project_with(points, target_multiple, &FitOptions::default())
}

pub fn fit_and_project_with(
    points: &[CurvePoint],
    target_multiple: f64,
    options: &FitOptions,
) -> Result<Projection, ExtrapolationError> {
    let fit = fit_curve(points, options)?;
    let max_s = points.iter().map(|p| p.savings_percent).fold(f64::NEG_INFINITY, f64::max);
    let raw = fit.params.eval(target_multiple);
    let upper = options.a_max.max(max_s);
    Ok(Projection {
        target_multiple,
        params: fit.params,
        raw_projection: raw,
        projected_savings_percent: raw.clamp(max_s, upper),
        residuals: fit.residuals,
        rss: fit.rss,
        iterations: fit.iterations,
        at_bounds: fit.at_bounds,
    })
}

pub fn read_curve<R: Read>(reader: R) -> Result<Vec<CurvePoint>, ExtrapolationError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    if headers.iter().ne(["fraction", "savings_percent"]) {
        return Err(ExtrapolationError::Row { line: 1, message: "expected header fraction,savings_percent".into() });
    }
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        let num = |i: usize| {
            rec.get(i)
                .and_then(|s| s.parse::<f64>().ok())
                .filter(|x| x.is_finite())
                .ok_or_else(|| ExtrapolationError::Row { line, message: format!("bad number in column {}", i + 1) })
        };
        out.push(CurvePoint { fraction: num(0)?, savings_percent: num(1)? });
    }
    Ok(out)
}

pub fn write_curve<W: Write>(points: &[CurvePoint], writer: W) -> Result<(), ExtrapolationError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["fraction", "savings_percent"])?;
    for p in points {
        w.write_record([p.fraction.to_string(), format!("{:.6}", p.savings_percent)])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}
