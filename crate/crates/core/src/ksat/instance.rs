//! Explicit coupled K-SAT instances and survey propagation on them.

use std::io::{BufRead, Write};

use rand::Rng;

use super::message::{check_unit, clause_factor, eta_to_phi};
use crate::error::{invalid, Error, Result};
use crate::rng;

/// One clause: `k` distinct variables with signs `J ∈ {+1, −1}`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Clause {
    pub position: i64,
    pub vars: Vec<usize>,
    pub signs: Vec<i8>,
}

/// Parameters of the coupled ensemble.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InstanceParams {
    pub k: usize,
    pub alpha: f64,
    pub half_length: usize,
    pub width: usize,
    /// Variables per position.
    pub n: usize,
    pub seed: u64,
}

impl InstanceParams {
    pub fn validate(&self) -> Result<()> {
        if self.k < 2 {
            return Err(invalid("k", "clauses need at least two variables"));
        }
        if !(self.alpha.is_finite() && self.alpha > 0.0) {
            return Err(invalid("alpha", format!("{} must be positive", self.alpha)));
        }
        if self.width == 0 {
            return Err(invalid("width", "must be at least 1"));
        }
        if self.n < self.k {
            return Err(invalid("n", format!("{} variables per position cannot fill a clause of size {}", self.n, self.k)));
        }
        Ok(())
    }

    /// Leftmost position `−L−w+1`.
    pub fn first_position(&self) -> i64 {
        -(self.half_length as i64) - self.width as i64 + 1
    }

    /// Variable positions `−L−w+1 ..= L+w−1`.
    pub fn variable_positions(&self) -> std::ops::RangeInclusive<i64> {
        self.first_position()..=(self.half_length + self.width - 1) as i64
    }

    /// Clause positions `−L−w+1 ..= L`, so every edge lands on an existing
    /// variable position.
    pub fn clause_positions(&self) -> std::ops::RangeInclusive<i64> {
        self.first_position()..=self.half_length as i64
    }

    pub fn clauses_per_position(&self) -> usize {
        (self.alpha * self.n as f64).round() as usize
    }
}

/// A coupled factor graph. Edge `e = a·k + slot` joins clause `a` to
/// `clauses[a].vars[slot]`.
#[derive(Clone, Debug, PartialEq)]
pub struct CoupledFactorGraph {
    pub params: InstanceParams,
    pub variable_positions: Vec<i64>,
    pub clauses: Vec<Clause>,
    /// Edges incident to each variable.
    pub var_edges: Vec<Vec<usize>>,
}

impl CoupledFactorGraph {
    pub fn k(&self) -> usize {
        self.params.k
    }

    pub fn num_vars(&self) -> usize {
        self.variable_positions.len()
    }

    pub fn num_edges(&self) -> usize {
        self.clauses.len() * self.params.k
    }

    pub fn edge_var(&self, e: usize) -> usize {
        self.clauses[e / self.params.k].vars[e % self.params.k]
    }

    pub fn edge_sign(&self, e: usize) -> i8 {
        self.clauses[e / self.params.k].signs[e % self.params.k]
    }

    pub fn degree(&self, var: usize) -> usize {
        self.var_edges[var].len()
    }

    /// Rebuilds `var_edges` and checks the structural invariants.
    fn from_parts(params: InstanceParams, variable_positions: Vec<i64>, clauses: Vec<Clause>) -> Result<Self> {
        let k = params.k;
        let mut var_edges = vec![Vec::new(); variable_positions.len()];
        for (a, c) in clauses.iter().enumerate() {
            if c.vars.len() != k || c.signs.len() != k {
                return Err(Error::Contract(format!("clause {a} does not have {k} edges")));
            }
            for (slot, (&v, &s)) in c.vars.iter().zip(&c.signs).enumerate() {
                let vp = *variable_positions
                    .get(v)
                    .ok_or_else(|| Error::Contract(format!("clause {a} names unknown variable {v}")))?;
                let off = vp - c.position;
                if off < 0 || off >= params.width as i64 {
                    return Err(Error::Contract(format!(
                        "clause {a} at {} reaches variable at {vp}, outside its window",
                        c.position
                    )));
                }
                if s != 1 && s != -1 {
                    return Err(Error::Contract(format!("clause {a} has sign {s}")));
                }
                var_edges[v].push(a * k + slot);
            }
        }
        Ok(CoupledFactorGraph {
            params,
            variable_positions,
            clauses,
            var_edges,
        })
    }

    /// Writes the instance as a DIMACS-like file.
    ///
    /// ```text
    /// c coupled k-sat
    /// c params k=3 alpha=4.1 half_length=2 width=3 n=100 seed=7
    /// p cnf <variables> <clauses>
    /// v <variable> <position>      one line per variable, 1-based
    /// <position> <literal>... 0    one line per clause
    /// ```
    pub fn write<W: Write>(&self, mut out: W) -> Result<()> {
        let p = &self.params;
        writeln!(out, "c coupled k-sat")?;
        writeln!(
            out,
            "c params k={} alpha={} half_length={} width={} n={} seed={}",
            p.k, p.alpha, p.half_length, p.width, p.n, p.seed
        )?;
        writeln!(out, "p cnf {} {}", self.num_vars(), self.clauses.len())?;
        for (v, z) in self.variable_positions.iter().enumerate() {
            writeln!(out, "v {} {}", v + 1, z)?;
        }
        for c in &self.clauses {
            write!(out, "{}", c.position)?;
            for (&v, &s) in c.vars.iter().zip(&c.signs) {
                write!(out, " {}", (v as i64 + 1) * s as i64)?;
            }
            writeln!(out, " 0")?;
        }
        Ok(())
    }

    /// Reads a file produced by [`CoupledFactorGraph::write`].
    pub fn read<R: BufRead>(input: R) -> Result<Self> {
        let mut params: Option<InstanceParams> = None;
        let mut counts: Option<(usize, usize)> = None;
        let mut positions: Vec<Option<i64>> = Vec::new();
        let mut clauses = Vec::new();
        for (i, line) in input.lines().enumerate() {
            let line = line?;
            let lineno = i + 1;
            let perr = |message: String| Error::Parse { line: lineno, message };
            let mut tok = line.split_whitespace();
            let Some(first) = tok.next() else { continue };
            match first {
                "c" => {
                    if tok.next() == Some("params") {
                        params = Some(parse_params(tok).map_err(perr)?);
                    }
                }
                "p" => {
                    let rest: Vec<&str> = tok.collect();
                    if rest.len() != 3 || rest[0] != "cnf" {
                        return Err(perr(format!("malformed problem line `{line}`")));
                    }
                    let nv = rest[1].parse().map_err(|e| perr(format!("{e}")))?;
                    let nc = rest[2].parse().map_err(|e| perr(format!("{e}")))?;
                    positions = vec![None; nv];
                    counts = Some((nv, nc));
                }
                "v" => {
                    let id: usize = parse_tok(tok.next()).map_err(perr)?;
                    let z: i64 = parse_tok(tok.next()).map_err(perr)?;
                    let slot = id
                        .checked_sub(1)
                        .and_then(|j| positions.get_mut(j))
                        .ok_or_else(|| perr(format!("variable {id} out of range")))?;
                    *slot = Some(z);
                }
                _ => {
                    let position: i64 = first.parse().map_err(|e| perr(format!("bad position: {e}")))?;
                    let mut vars = Vec::new();
                    let mut signs = Vec::new();
                    for t in tok {
                        let lit: i64 = t.parse().map_err(|e| perr(format!("bad literal: {e}")))?;
                        if lit == 0 {
                            break;
                        }
                        vars.push(lit.unsigned_abs() as usize - 1);
                        signs.push(lit.signum() as i8);
                    }
                    clauses.push(Clause { position, vars, signs });
                }
            }
        }
        let params = params.ok_or(Error::Parse {
            line: 0,
            message: "missing `c params` line".into(),
        })?;
        params.validate()?;
        let (_, nc) = counts.ok_or(Error::Parse {
            line: 0,
            message: "missing problem line".into(),
        })?;
        if nc != clauses.len() {
            return Err(Error::Parse {
                line: 0,
                message: format!("header announces {nc} clauses, found {}", clauses.len()),
            });
        }
        let variable_positions = positions
            .into_iter()
            .enumerate()
            .map(|(v, z)| {
                z.ok_or(Error::Parse {
                    line: 0,
                    message: format!("variable {} has no position", v + 1),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_parts(params, variable_positions, clauses)
    }
}

fn parse_tok<T: std::str::FromStr>(t: Option<&str>) -> std::result::Result<T, String>
where
    T::Err: std::fmt::Display,
{
    let t = t.ok_or_else(|| "missing field".to_string())?;
    t.parse().map_err(|e| format!("`{t}`: {e}"))
}

fn parse_params<'a>(tok: impl Iterator<Item = &'a str>) -> std::result::Result<InstanceParams, String> {
    let mut p = InstanceParams {
        k: 0,
        alpha: 0.0,
        half_length: 0,
        width: 0,
        n: 0,
        seed: 0,
    };
    for kv in tok {
        let (key, value) = kv.split_once('=').ok_or_else(|| format!("expected key=value, got `{kv}`"))?;
        let v = Some(value);
        match key {
            "k" => p.k = parse_tok(v)?,
            "alpha" => p.alpha = parse_tok(v)?,
            "half_length" => p.half_length = parse_tok(v)?,
            "width" => p.width = parse_tok(v)?,
            "n" => p.n = parse_tok(v)?,
            "seed" => p.seed = parse_tok(v)?,
            _ => return Err(format!("unknown parameter `{key}`")),
        }
    }
    Ok(p)
}

/// Samples an instance of the coupled ensemble. Each clause edge picks an
/// offset `k` uniformly in `0..w`, a variable uniformly at position `z+k` and
/// a sign with probability ½. Variables within a clause are distinct.
pub fn generate_coupled_instance(params: InstanceParams) -> Result<CoupledFactorGraph> {
    params.validate()?;
    let n = params.n;
    let first = params.first_position();
    let variable_positions: Vec<i64> = params
        .variable_positions()
        .flat_map(|z| std::iter::repeat_n(z, n))
        .collect();
    let m = params.clauses_per_position();
    let mut clauses = Vec::with_capacity(m * params.clause_positions().count());
    for z in params.clause_positions() {
        let mut rng = rng::stream(params.seed, &[(z - first) as u64]);
        for _ in 0..m {
            let mut vars = Vec::with_capacity(params.k);
            let mut signs = Vec::with_capacity(params.k);
            while vars.len() < params.k {
                let off = rng.random_range(0..params.width) as i64;
                let v = (z + off - first) as usize * n + rng.random_range(0..n);
                if vars.contains(&v) {
                    continue;
                }
                vars.push(v);
                signs.push(if rng.random_bool(0.5) { 1 } else { -1 });
            }
            clauses.push(Clause { position: z, vars, signs });
        }
    }
    CoupledFactorGraph::from_parts(params, variable_positions, clauses)
}

/// Messages on every edge. `eta[e]` flows clause to variable; `pi_plus[e]`
/// and `pi_minus[e]` flow variable to clause.
#[derive(Clone, Debug, PartialEq)]
pub struct SpMessages {
    pub eta: Vec<f64>,
    pub pi_plus: Vec<f64>,
    pub pi_minus: Vec<f64>,
}

impl SpMessages {
    pub fn constant(graph: &CoupledFactorGraph, eta: f64) -> Result<Self> {
        check_unit("eta", eta)?;
        let e = graph.num_edges();
        Ok(SpMessages {
            eta: vec![eta; e],
            pi_plus: vec![1.0; e],
            pi_minus: vec![1.0; e],
        })
    }

    /// Warnings drawn uniformly in (0, 1).
    pub fn random(graph: &CoupledFactorGraph, seed: u64) -> Self {
        let mut rng = rng::stream(seed, &[u64::MAX]);
        let e = graph.num_edges();
        SpMessages {
            eta: (0..e).map(|_| rng.random::<f64>()).collect(),
            pi_plus: vec![1.0; e],
            pi_minus: vec![1.0; e],
        }
    }

    /// Mean of `φ = −ln(1−η)` over all edges.
    pub fn mean_phi(&self) -> f64 {
        if self.eta.is_empty() {
            return 0.0;
        }
        self.eta.iter().map(|&e| eta_to_phi(e)).sum::<f64>() / self.eta.len() as f64
    }

    /// Mean `φ` over clauses located at each position.
    pub fn phi_by_position(&self, graph: &CoupledFactorGraph) -> Vec<(i64, f64)> {
        let k = graph.k();
        let mut out: Vec<(i64, f64, usize)> = Vec::new();
        for (a, c) in graph.clauses.iter().enumerate() {
            let s: f64 = self.eta[a * k..(a + 1) * k].iter().map(|&e| eta_to_phi(e)).sum();
            match out.last_mut() {
                Some(last) if last.0 == c.position => {
                    last.1 += s;
                    last.2 += k;
                }
                _ => out.push((c.position, s, k)),
            }
        }
        out.into_iter().map(|(z, s, n)| (z, s / n as f64)).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpRunOptions {
    /// Weight of the old message in the damped update.
    pub damping: f64,
    pub tol: f64,
    pub max_iters: usize,
}

impl Default for SpRunOptions {
    fn default() -> Self {
        SpRunOptions {
            damping: 0.0,
            tol: 1e-8,
            max_iters: 1000,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SpRun {
    pub messages: SpMessages,
    pub converged: bool,
    pub iterations: usize,
    /// Largest edge-wise change of `η` in the last sweep.
    pub max_change: f64,
    /// Degenerate clause factors met in the last sweep.
    pub degenerate: usize,
}

/// Product of `1−η` over a set, tracking exact zeros so that single
/// factors can be divided out.
#[derive(Clone, Copy)]
struct Product {
    value: f64,
    zeros: usize,
}

impl Product {
    fn new() -> Self {
        Product { value: 1.0, zeros: 0 }
    }

    fn push(&mut self, f: f64) {
        if f == 0.0 {
            self.zeros += 1;
        } else {
            self.value *= f;
        }
    }

    fn without(&self, f: f64) -> f64 {
        if f == 0.0 {
            if self.zeros > 1 {
                0.0
            } else {
                self.value
            }
        } else if self.zeros > 0 {
            0.0
        } else {
            (self.value / f).min(1.0)
        }
    }
}

fn variable_sweep(graph: &CoupledFactorGraph, msg: &mut SpMessages) {
    for edges in &graph.var_edges {
        let mut pos = Product::new();
        let mut neg = Product::new();
        for &e in edges {
            let f = 1.0 - msg.eta[e];
            if graph.edge_sign(e) > 0 {
                pos.push(f);
            } else {
                neg.push(f);
            }
        }
        for &e in edges {
            let f = 1.0 - msg.eta[e];
            let (same, other) = if graph.edge_sign(e) > 0 { (&pos, &neg) } else { (&neg, &pos) };
            msg.pi_plus[e] = same.without(f);
            msg.pi_minus[e] = other.without(1.0);
        }
    }
}

/// Runs alternating variable and clause sweeps until the largest change of
/// any warning falls below `tol`.
pub fn run_sp_on_instance(graph: &CoupledFactorGraph, init: SpMessages, opts: SpRunOptions) -> Result<SpRun> {
    let e = graph.num_edges();
    if init.eta.len() != e || init.pi_plus.len() != e || init.pi_minus.len() != e {
        return Err(Error::Contract(format!("messages do not match the {e} edges of the graph")));
    }
    for &x in init.eta.iter().chain(&init.pi_plus).chain(&init.pi_minus) {
        check_unit("message", x)?;
    }
    if !(0.0..1.0).contains(&opts.damping) {
        return Err(invalid("damping", format!("{} is outside [0, 1)", opts.damping)));
    }
    let k = graph.k();
    let mut msg = init;
    let mut max_change = f64::INFINITY;
    let mut degenerate = 0;
    for it in 1..=opts.max_iters {
        variable_sweep(graph, &mut msg);
        max_change = 0.0;
        degenerate = 0;
        for a in 0..graph.clauses.len() {
            for slot in 0..k {
                let mut eta = 1.0;
                for j in 0..k {
                    if j != slot {
                        let (f, d) = clause_factor(msg.pi_plus[a * k + j], msg.pi_minus[a * k + j]);
                        eta *= f;
                        degenerate += d as usize;
                    }
                }
                let old = msg.eta[a * k + slot];
                let new = (1.0 - opts.damping) * eta + opts.damping * old;
                max_change = max_change.max((new - old).abs());
                msg.eta[a * k + slot] = new;
            }
        }
        if max_change < opts.tol {
            variable_sweep(graph, &mut msg);
            return Ok(SpRun {
                messages: msg,
                converged: true,
                iterations: it,
                max_change,
                degenerate,
            });
        }
    }
    Ok(SpRun {
        messages: msg,
        converged: false,
        iterations: opts.max_iters,
        max_change,
        degenerate,
    })
}
