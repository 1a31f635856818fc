//! Chain-coupled Erdős–Rényi graphs.

use std::io::{BufRead, Write};

use rand::Rng;

use crate::error::{invalid, Error, Result};
use crate::rng;

/// Which position pairs may be joined by an edge.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Window {
    /// `|z₁ − z₂| ≤ w`, giving bulk mean degree `c`.
    Narrow,
    /// `|z₁ − z₂| ≤ 2w` with the same edge probability, giving bulk mean
    /// degree `c(4w+1)/(2w+1)`.
    Wide,
}

impl Window {
    pub fn as_str(self) -> &'static str {
        match self {
            Window::Narrow => "w",
            Window::Wide => "2w",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "w" => Some(Window::Narrow),
            "2w" => Some(Window::Wide),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QcolEnsembleParams {
    /// Number of colors.
    pub q: usize,
    /// Mean degree.
    pub c: f64,
    pub half_length: usize,
    pub width: usize,
    /// Vertices per position.
    pub n: usize,
    pub seed: u64,
    pub window: Window,
}

impl QcolEnsembleParams {
    pub fn validate(&self) -> Result<()> {
        if !(3..=12).contains(&self.q) {
            return Err(invalid("q", format!("{} colors; supported range is 3..=12", self.q)));
        }
        if !(self.c.is_finite() && self.c > 0.0) {
            return Err(invalid("c", format!("{} must be positive", self.c)));
        }
        if self.n < 2 {
            return Err(invalid("n", "need at least two vertices per position"));
        }
        let p = self.edge_probability();
        if !(p > 0.0 && p < 1.0) {
            return Err(invalid("c", format!("edge probability {p} is outside (0, 1)")));
        }
        Ok(())
    }

    /// `c / ((2w+1) N)`.
    pub fn edge_probability(&self) -> f64 {
        self.c / ((2 * self.width + 1) as f64 * self.n as f64)
    }

    /// Largest admissible position difference for an edge.
    pub fn reach(&self) -> usize {
        match self.window {
            Window::Narrow => self.width,
            Window::Wide => 2 * self.width,
        }
    }

    /// Vertex positions `−L−w ..= L+w`. Positions with `|z| > L` form the
    /// boundary regions.
    pub fn positions(&self) -> std::ops::RangeInclusive<i64> {
        let e = (self.half_length + self.width) as i64;
        -e..=e
    }
}

/// Undirected graph with vertex positions. Edges are stored with `u < v`.
#[derive(Clone, Debug, PartialEq)]
pub struct QcolGraph {
    pub params: QcolEnsembleParams,
    pub positions: Vec<i64>,
    pub edges: Vec<(usize, usize)>,
}

impl QcolGraph {
    pub fn num_vertices(&self) -> usize {
        self.positions.len()
    }

    /// Graph with explicit structure, checked for loops, duplicates and the
    /// window constraint.
    pub fn from_edges(params: QcolEnsembleParams, positions: Vec<i64>, edges: Vec<(usize, usize)>) -> Result<Self> {
        let mut seen = std::collections::HashSet::with_capacity(edges.len());
        let mut norm = Vec::with_capacity(edges.len());
        for (u, v) in edges {
            let (a, b) = (u.min(v), u.max(v));
            if a == b {
                return Err(Error::Contract(format!("self-loop at vertex {a}")));
            }
            if b >= positions.len() {
                return Err(Error::Contract(format!("edge names unknown vertex {b}")));
            }
            if positions[a].abs_diff(positions[b]) as usize > params.reach() {
                return Err(Error::Contract(format!("edge ({a}, {b}) spans more than the window")));
            }
            if !seen.insert((a, b)) {
                return Err(Error::Contract(format!("duplicate edge ({a}, {b})")));
            }
            norm.push((a, b));
        }
        Ok(QcolGraph {
            params,
            positions,
            edges: norm,
        })
    }

    pub fn degrees(&self) -> Vec<usize> {
        let mut d = vec![0; self.num_vertices()];
        for &(u, v) in &self.edges {
            d[u] += 1;
            d[v] += 1;
        }
        d
    }

    /// Writes an edge list:
    ///
    /// ```text
    /// c coupled coloring
    /// c params q=3 c=4.5 half_length=2 width=1 n=100 seed=7 window=w
    /// p edge <vertices> <edges>
    /// v <vertex> <position>     one line per vertex, 1-based
    /// e <u> <v>                 one line per edge
    /// ```
    pub fn write<W: Write>(&self, mut out: W) -> Result<()> {
        let p = &self.params;
        writeln!(out, "c coupled coloring")?;
        writeln!(
            out,
            "c params q={} c={} half_length={} width={} n={} seed={} window={}",
            p.q,
            p.c,
            p.half_length,
            p.width,
            p.n,
            p.seed,
            p.window.as_str()
        )?;
        writeln!(out, "p edge {} {}", self.num_vertices(), self.edges.len())?;
        for (i, z) in self.positions.iter().enumerate() {
            writeln!(out, "v {} {}", i + 1, z)?;
        }
        for &(u, v) in &self.edges {
            writeln!(out, "e {} {}", u + 1, v + 1)?;
        }
        Ok(())
    }

    /// Reads a file produced by [`QcolGraph::write`].
    pub fn read<R: BufRead>(input: R) -> Result<Self> {
        let mut params = None;
        let mut positions: Vec<Option<i64>> = Vec::new();
        let mut edges = Vec::new();
        let mut announced = None;
        for (i, line) in input.lines().enumerate() {
            let line = line?;
            let lineno = i + 1;
            let perr = |message: String| Error::Parse { line: lineno, message };
            let tok: Vec<&str> = line.split_whitespace().collect();
            match tok.as_slice() {
                [] => {}
                ["c", "params", rest @ ..] => params = Some(parse_params(rest).map_err(perr)?),
                ["c", ..] => {}
                ["p", "edge", nv, ne] => {
                    let nv: usize = nv.parse().map_err(|e| perr(format!("{e}")))?;
                    let ne: usize = ne.parse().map_err(|e| perr(format!("{e}")))?;
                    positions = vec![None; nv];
                    announced = Some(ne);
                }
                ["v", id, z] => {
                    let id: usize = id.parse().map_err(|e| perr(format!("{e}")))?;
                    let z: i64 = z.parse().map_err(|e| perr(format!("{e}")))?;
                    let slot = id
                        .checked_sub(1)
                        .and_then(|j| positions.get_mut(j))
                        .ok_or_else(|| perr(format!("vertex {id} out of range")))?;
                    *slot = Some(z);
                }
                ["e", u, v] => {
                    let u: usize = u.parse().map_err(|e| perr(format!("{e}")))?;
                    let v: usize = v.parse().map_err(|e| perr(format!("{e}")))?;
                    if u == 0 || v == 0 {
                        return Err(perr("vertices are numbered from 1".into()));
                    }
                    edges.push((u - 1, v - 1));
                }
                _ => return Err(perr(format!("unrecognized line `{line}`"))),
            }
        }
        let params = params.ok_or(Error::Parse {
            line: 0,
            message: "missing `c params` line".into(),
        })?;
        params.validate()?;
        if announced != Some(edges.len()) {
            return Err(Error::Parse {
                line: 0,
                message: format!("header announces {announced:?} edges, found {}", edges.len()),
            });
        }
        let positions = positions
            .into_iter()
            .enumerate()
            .map(|(i, z)| {
                z.ok_or(Error::Parse {
                    line: 0,
                    message: format!("vertex {} has no position", i + 1),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_edges(params, positions, edges)
    }
}

fn parse_params(tok: &[&str]) -> std::result::Result<QcolEnsembleParams, String> {
    let mut p = QcolEnsembleParams {
        q: 0,
        c: 0.0,
        half_length: 0,
        width: 0,
        n: 0,
        seed: 0,
        window: Window::Narrow,
    };
    for kv in tok {
        let (key, value) = kv.split_once('=').ok_or_else(|| format!("expected key=value, got `{kv}`"))?;
        let bad = |e: &dyn std::fmt::Display| format!("`{kv}`: {e}");
        match key {
            "q" => p.q = value.parse().map_err(|e| bad(&e))?,
            "c" => p.c = value.parse().map_err(|e| bad(&e))?,
            "half_length" => p.half_length = value.parse().map_err(|e| bad(&e))?,
            "width" => p.width = value.parse().map_err(|e| bad(&e))?,
            "n" => p.n = value.parse().map_err(|e| bad(&e))?,
            "seed" => p.seed = value.parse().map_err(|e| bad(&e))?,
            "window" => p.window = Window::parse(value).ok_or_else(|| bad(&"expected `w` or `2w`"))?,
            _ => return Err(format!("unknown parameter `{key}`")),
        }
    }
    Ok(p)
}

/// Visits the indices of a Bernoulli(p) subset of `0..total` by geometric
/// gaps.
fn bernoulli_indices<R: Rng>(total: u64, p: f64, rng: &mut R, mut visit: impl FnMut(u64)) {
    let log_q = (-p).ln_1p();
    let mut i: u64 = 0;
    loop {
        let u: f64 = 1.0 - rng.random::<f64>();
        let gap = (u.ln() / log_q).floor();
        if gap >= (total - i) as f64 {
            return;
        }
        i += gap as u64;
        visit(i);
        i += 1;
        if i >= total {
            return;
        }
    }
}

/// Samples the coupled ensemble: every pair of distinct vertices at
/// positions within the window is joined with probability `c/((2w+1)N)`.
pub fn generate_qcol_instance(params: QcolEnsembleParams) -> Result<QcolGraph> {
    params.validate()?;
    let n = params.n;
    let zs: Vec<i64> = params.positions().collect();
    let positions: Vec<i64> = zs.iter().flat_map(|&z| std::iter::repeat_n(z, n)).collect();
    let p = params.edge_probability();
    let reach = params.reach();
    let mut edges = Vec::new();
    for a in 0..zs.len() {
        for b in a..zs.len().min(a + reach + 1) {
            let mut rng = rng::stream(params.seed, &[a as u64, b as u64]);
            let (base_a, base_b) = (a * n, b * n);
            if a == b {
                let total = (n * (n - 1) / 2) as u64;
                bernoulli_indices(total, p, &mut rng, |idx| {
                    let (i, j) = unrank_pair(n, idx as usize);
                    edges.push((base_a + i, base_a + j));
                });
            } else {
                bernoulli_indices((n * n) as u64, p, &mut rng, |idx| {
                    let idx = idx as usize;
                    edges.push((base_a + idx / n, base_b + idx % n));
                });
            }
        }
    }
    Ok(QcolGraph {
        params,
        positions,
        edges,
    })
}

/// The `idx`-th pair `(i, j)`, `i < j < n`, in row-major order.
fn unrank_pair(n: usize, idx: usize) -> (usize, usize) {
    let disc = ((2 * n - 1) * (2 * n - 1) - 8 * idx) as f64;
    let mut i = (((2 * n - 1) as f64 - disc.sqrt()) / 2.0).max(0.0) as usize;
    while i > 0 && row_start(n, i) > idx {
        i -= 1;
    }
    while row_start(n, i + 1) <= idx {
        i += 1;
    }
    (i, i + 1 + idx - row_start(n, i))
}

/// Index of the first pair `(i, i+1)` in the row-major list of pairs.
fn row_start(n: usize, i: usize) -> usize {
    i * (2 * n - i - 1) / 2
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn params(c: f64, l: usize, w: usize, n: usize, seed: u64) -> QcolEnsembleParams {
        QcolEnsembleParams {
            q: 3,
            c,
            half_length: l,
            width: w,
            n,
            seed,
            window: Window::Narrow,
        }
    }

    #[test]
    fn pair_unranking_is_exhaustive() {
        for n in [2usize, 3, 7, 20] {
            let pairs: Vec<_> = (0..n * (n - 1) / 2).map(|idx| unrank_pair(n, idx)).collect();
            let mut expect = Vec::new();
            for i in 0..n {
                for j in i + 1..n {
                    expect.push((i, j));
                }
            }
            assert_eq!(pairs, expect);
        }
    }

    #[test]
    fn dense_case_includes_every_pair() {
        // p close to 1 keeps nearly every pair; a structural sanity check.
        let p = QcolEnsembleParams {
            c: 2.999,
            ..params(1.0, 0, 0, 3, 1)
        };
        let g = generate_qcol_instance(p).unwrap();
        assert!(g.edges.iter().all(|&(u, v)| u < v && v < 3));
        QcolGraph::from_edges(p, g.positions.clone(), g.edges.clone()).unwrap();
    }

    #[test]
    fn uncoupled_graph_is_local() {
        let g = generate_qcol_instance(params(4.0, 2, 0, 300, 3)).unwrap();
        assert_eq!(g.num_vertices(), 5 * 300);
        assert!(g.edges.iter().all(|&(u, v)| g.positions[u] == g.positions[v]));
    }

    #[test]
    fn bulk_degree_is_poisson_mean() {
        let g = generate_qcol_instance(params(5.0, 3, 2, 2000, 4)).unwrap();
        let d = g.degrees();
        let bulk: Vec<usize> = (0..g.num_vertices()).filter(|&v| g.positions[v] == 0).collect();
        let mean = bulk.iter().map(|&v| d[v]).sum::<usize>() as f64 / bulk.len() as f64;
        assert!((mean - 5.0).abs() < 3.0 * (5.0f64 / 2000.0).sqrt(), "mean {mean}");
        assert!(g.edges.iter().all(|&(u, v)| g.positions[u].abs_diff(g.positions[v]) <= 2));
    }

    #[test]
    fn wide_window_degree() {
        let p = QcolEnsembleParams {
            window: Window::Wide,
            ..params(5.0, 4, 1, 2000, 4)
        };
        let g = generate_qcol_instance(p).unwrap();
        let d = g.degrees();
        let bulk: Vec<usize> = (0..g.num_vertices()).filter(|&v| g.positions[v] == 0).collect();
        let mean = bulk.iter().map(|&v| d[v]).sum::<usize>() as f64 / bulk.len() as f64;
        let expect = 5.0 * 5.0 / 3.0;
        assert!((mean - expect).abs() < 3.0 * (expect / 2000.0).sqrt(), "mean {mean}");
    }

    #[test]
    fn generation_is_deterministic_and_round_trips() {
        let p = params(4.0, 1, 1, 50, 9);
        let g = generate_qcol_instance(p).unwrap();
        assert_eq!(g, generate_qcol_instance(p).unwrap());
        assert_ne!(g, generate_qcol_instance(QcolEnsembleParams { seed: 10, ..p }).unwrap());
        let mut buf = Vec::new();
        g.write(&mut buf).unwrap();
        assert_eq!(QcolGraph::read(&buf[..]).unwrap(), g);
    }

    #[test]
    fn invalid_structures_are_rejected() {
        let p = params(1.0, 0, 0, 3, 0);
        assert!(QcolGraph::from_edges(p, vec![0; 3], vec![(1, 1)]).is_err());
        assert!(QcolGraph::from_edges(p, vec![0; 3], vec![(0, 1), (1, 0)]).is_err());
        assert!(QcolGraph::from_edges(p, vec![0, 0, 1], vec![(0, 2)]).is_err());
        assert!(generate_qcol_instance(QcolEnsembleParams { q: 2, ..p }).is_err());
        assert!(QcolGraph::read("c params q=3 c=1 half_length=0 width=0 n=3 seed=0\np edge 2 0\nx\n".as_bytes()).is_err());
    }
}
