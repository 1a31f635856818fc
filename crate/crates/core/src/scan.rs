//! Threshold bisection, warm-started continuation and curve diagnostics
//! shared by every model in the crate.

use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::table::Table;

/// Which side of a threshold a control value falls on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Classification {
    /// Only the trivial / unique solution survives.
    Below,
    /// A nontrivial solution survives.
    Above,
}

impl Classification {
    pub fn as_str(self) -> &'static str {
        match self {
            Classification::Below => "below",
            Classification::Above => "above",
        }
    }

    pub fn from_above(above: bool) -> Self {
        if above {
            Classification::Above
        } else {
            Classification::Below
        }
    }
}

impl std::fmt::Display for Classification {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Outcome of one classifier call. Stochastic classifiers fill `replicates`
/// with the individual votes that produced the majority.
#[derive(Clone, Debug, PartialEq)]
pub struct Verdict {
    pub classification: Classification,
    pub diagnostic: f64,
    pub replicates: Vec<(Classification, f64)>,
}

impl Verdict {
    pub fn new(classification: Classification, diagnostic: f64) -> Self {
        Verdict {
            classification,
            diagnostic,
            replicates: Vec::new(),
        }
    }
}

impl From<(Classification, f64)> for Verdict {
    fn from((classification, diagnostic): (Classification, f64)) -> Self {
        Verdict::new(classification, diagnostic)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Evaluation {
    pub control: f64,
    pub verdict: Verdict,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ThresholdScanResult {
    pub lower: f64,
    pub upper: f64,
    /// Midpoint of the final bracket.
    pub estimate: f64,
    /// Every classifier call in order, endpoints first.
    pub evaluations: Vec<Evaluation>,
    pub resolution: f64,
    /// Number of midpoint evaluations (endpoints excluded).
    pub bisection_steps: usize,
    /// False when `max_evals` ran out before the bracket shrank to `resolution`.
    pub resolved: bool,
}

impl ThresholdScanResult {
    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }

    /// One row per evaluation with columns `control, classification,
    /// diagnostic, above_fraction`; the bracket goes in the header.
    /// `above_fraction` is the share of replicates voting `Above`.
    pub fn to_table(&self) -> Table {
        let mut t = Table::new(["control", "classification", "diagnostic", "above_fraction"])
            .param("lower", self.lower)
            .param("upper", self.upper)
            .param("estimate", self.estimate)
            .param("resolution", self.resolution)
            .param("bisection_steps", self.bisection_steps)
            .param("resolved", self.resolved);
        for e in &self.evaluations {
            let v = &e.verdict;
            let fraction = if v.replicates.is_empty() {
                (v.classification == Classification::Above) as u8 as f64
            } else {
                let above = v.replicates.iter().filter(|r| r.0 == Classification::Above).count();
                above as f64 / v.replicates.len() as f64
            };
            t.push_row([
                e.control.to_string(),
                v.classification.to_string(),
                v.diagnostic.to_string(),
                fraction.to_string(),
            ]);
        }
        t
    }
}

/// Bisection on a monotone classifier.
///
/// Both endpoints are classified first; the lower end must be `Below` and the
/// upper end `Above`. Afterwards at most `max_evals` midpoints are evaluated,
/// so the total number of classifier calls is at most
/// `ceil(log2(width / resolution)) + 2`.
pub fn bisect_threshold<F>(
    mut classifier: F,
    bracket: (f64, f64),
    resolution: f64,
    max_evals: usize,
) -> Result<ThresholdScanResult>
where
    F: FnMut(f64) -> Result<Verdict>,
{
    let (mut lower, mut upper) = bracket;
    if !(lower.is_finite() && upper.is_finite() && lower < upper) {
        return Err(invalid("bracket", format!("need lower < upper, got [{lower}, {upper}]")));
    }
    if !(resolution > 0.0) {
        return Err(invalid("resolution", "must be positive"));
    }

    let mut evaluations = Vec::new();
    let lo = classifier(lower)?;
    let hi = classifier(upper)?;
    let (lo_class, hi_class) = (lo.classification, hi.classification);
    evaluations.push(Evaluation { control: lower, verdict: lo });
    evaluations.push(Evaluation { control: upper, verdict: hi });
    if lo_class == hi_class {
        return Err(Error::BracketNotStraddling {
            lower,
            upper,
            classification: lo_class.as_str(),
        });
    }
    if lo_class == Classification::Above {
        return Err(Error::Contract(format!(
            "classifier is decreasing on [{lower}, {upper}]: lower end is above, upper end below"
        )));
    }

    let mut steps = 0;
    while upper - lower > resolution && steps < max_evals {
        let mid = 0.5 * (lower + upper);
        let verdict = classifier(mid)?;
        match verdict.classification {
            Classification::Below => lower = mid,
            Classification::Above => upper = mid,
        }
        evaluations.push(Evaluation { control: mid, verdict });
        steps += 1;
    }

    Ok(ThresholdScanResult {
        lower,
        upper,
        estimate: 0.5 * (lower + upper),
        evaluations,
        resolution,
        bisection_steps: steps,
        resolved: upper - lower <= resolution,
    })
}

/// Runs a stochastic classifier `replicates` times in parallel and returns the
/// strict-majority verdict; ties go to `Below`. The diagnostic is the mean of
/// the replicate diagnostics.
pub fn majority_vote<F>(replicates: usize, classify: F) -> Result<Verdict>
where
    F: Fn(usize) -> Result<(Classification, f64)> + Sync + Send,
{
    if replicates == 0 {
        return Err(invalid("replicates", "must be at least 1"));
    }
    let votes: Vec<(Classification, f64)> = (0..replicates)
        .into_par_iter()
        .map(&classify)
        .collect::<Result<_>>()?;
    let above = votes
        .iter()
        .filter(|(c, _)| *c == Classification::Above)
        .count();
    let diagnostic = votes.iter().map(|(_, d)| d).sum::<f64>() / replicates as f64;
    Ok(Verdict {
        classification: Classification::from_above(2 * above > replicates),
        diagnostic,
        replicates: votes,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct ContinuationFailure {
    /// Grid value that could not be reached.
    pub control: f64,
    /// Last control value with a converged solution.
    pub last_good: f64,
    pub reason: String,
}

#[derive(Clone, Debug)]
pub struct Continuation<S> {
    /// Solutions at the grid values that were reached, in grid order.
    pub solutions: Vec<(f64, S)>,
    pub failure: Option<ContinuationFailure>,
}

/// Natural-parameter continuation along a monotone grid.
///
/// `initial` is a known solution together with the control value it belongs
/// to. Every step is warm-started from the previous solution; a failed step is
/// split in half recursively, at most `max_depth` levels deep. Intermediate
/// solutions are only used as warm starts and are not returned.
pub fn continuation<S, F>(
    mut solve_at: F,
    grid: &[f64],
    initial: (f64, S),
    max_depth: usize,
) -> Result<Continuation<S>>
where
    S: Clone,
    F: FnMut(f64, &S) -> Result<S>,
{
    let increasing = grid.windows(2).all(|p| p[1] > p[0]);
    let decreasing = grid.windows(2).all(|p| p[1] < p[0]);
    if !(increasing || decreasing) {
        return Err(invalid("grid", "must be strictly monotone"));
    }

    let (mut control, mut state) = initial;
    let mut solutions = Vec::with_capacity(grid.len());
    for &target in grid {
        match reach(&mut solve_at, control, &state, target, max_depth) {
            Ok(next) => {
                state = next;
                control = target;
                solutions.push((target, state.clone()));
            }
            Err(err) => {
                return Ok(Continuation {
                    solutions,
                    failure: Some(ContinuationFailure {
                        control: target,
                        last_good: control,
                        reason: err.to_string(),
                    }),
                })
            }
        }
    }
    Ok(Continuation {
        solutions,
        failure: None,
    })
}

fn reach<S, F>(solve_at: &mut F, from: f64, state: &S, to: f64, depth: usize) -> Result<S>
where
    F: FnMut(f64, &S) -> Result<S>,
{
    match solve_at(to, state) {
        Ok(s) => Ok(s),
        Err(err) if depth == 0 => Err(err),
        Err(_) => {
            let mid = 0.5 * (from + to);
            let halfway = reach(solve_at, from, state, mid, depth - 1)?;
            reach(solve_at, mid, &halfway, to, depth - 1)
        }
    }
}

/// Oscillation summary of a sampled curve.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WiggleStats {
    pub maxima: usize,
    pub minima: usize,
    /// Half of the largest swing between consecutive turning points; zero when
    /// fewer than two turning points exist.
    pub amplitude: f64,
}

/// Counts turning points of `values`, ignoring reversals smaller than `floor`.
pub fn wiggle_stats(values: &[f64], floor: f64) -> WiggleStats {
    let mut stats = WiggleStats {
        maxima: 0,
        minima: 0,
        amplitude: 0.0,
    };
    let Some(&first) = values.first() else {
        return stats;
    };
    // 0 = undecided, 1 = rising, -1 = falling
    let mut direction = 0i8;
    let mut extreme = first;
    let mut last_turn: Option<f64> = None;
    let anchor = first;

    let turn = |value: f64, stats: &mut WiggleStats, last_turn: &mut Option<f64>| {
        if let Some(prev) = *last_turn {
            stats.amplitude = stats.amplitude.max(0.5 * (value - prev).abs());
        }
        *last_turn = Some(value);
    };

    for &v in &values[1..] {
        match direction {
            0 => {
                if v - anchor > floor {
                    direction = 1;
                    extreme = v;
                } else if anchor - v > floor {
                    direction = -1;
                    extreme = v;
                }
            }
            1 => {
                if v > extreme {
                    extreme = v;
                } else if extreme - v > floor {
                    stats.maxima += 1;
                    turn(extreme, &mut stats, &mut last_turn);
                    direction = -1;
                    extreme = v;
                }
            }
            _ => {
                if v < extreme {
                    extreme = v;
                } else if v - extreme > floor {
                    stats.minima += 1;
                    turn(extreme, &mut stats, &mut last_turn);
                    direction = 1;
                    extreme = v;
                }
            }
        }
    }
    stats
}
