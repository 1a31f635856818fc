//! Zero-temperature survey propagation for graph coloring.

use rand::Rng;

use super::graph::QcolGraph;
use crate::error::{invalid, Error, Result};
use crate::ksat::Seeding;
use crate::rng;

/// Message representation.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SpMode {
    /// One total warning probability per directed edge, spread uniformly
    /// over the colors.
    Symmetric,
    /// One warning probability per directed edge and color.
    Vector,
}

impl SpMode {
    pub fn as_str(self) -> &'static str {
        match self {
            SpMode::Symmetric => "symmetric",
            SpMode::Vector => "vector",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "symmetric" => Some(SpMode::Symmetric),
            "vector" => Some(SpMode::Vector),
            _ => None,
        }
    }
}

/// Warnings on directed edges. Directed edge `2e` runs `u → v` and `2e+1`
/// runs `v → u` for the undirected edge `e = (u, v)`. In vector mode the
/// entry `d·q + t` is the probability that the source is frozen to color `t`;
/// the probability of no warning is one minus the row sum.
#[derive(Clone, Debug, PartialEq)]
pub struct QcolMessages {
    pub q: usize,
    pub mode: SpMode,
    pub eta: Vec<f64>,
}

impl QcolMessages {
    fn stride(&self) -> usize {
        match self.mode {
            SpMode::Symmetric => 1,
            SpMode::Vector => self.q,
        }
    }

    pub fn zeros(graph: &QcolGraph, mode: SpMode) -> Self {
        let q = graph.params.q;
        let stride = if mode == SpMode::Vector { q } else { 1 };
        QcolMessages {
            q,
            mode,
            eta: vec![0.0; 2 * graph.edges.len() * stride],
        }
    }

    /// Random warnings on edges leaving chain vertices and seeded boundary
    /// vertices; edges leaving unseeded boundary vertices start at zero.
    pub fn warning_rich(graph: &QcolGraph, mode: SpMode, seeding: Seeding, seed: u64) -> Self {
        let mut m = Self::zeros(graph, mode);
        let mut rng = rng::stream(seed, &[u64::MAX]);
        let l = graph.params.half_length as i64;
        let q = m.q;
        for d in 0..2 * graph.edges.len() {
            let (src, _) = endpoints(graph, d);
            let z = graph.positions[src];
            let rich = z.abs() <= l || (z < -l && seeding == Seeding::OneSided);
            let total: f64 = rng.random();
            match mode {
                SpMode::Symmetric => m.eta[d] = if rich { total } else { 0.0 },
                SpMode::Vector => {
                    let w: Vec<f64> = (0..q).map(|_| rng.random::<f64>()).collect();
                    let s: f64 = w.iter().sum();
                    for t in 0..q {
                        m.eta[d * q + t] = if rich { total * w[t] / s } else { 0.0 };
                    }
                }
            }
        }
        m
    }

    /// Total warning probability on directed edge `d`.
    pub fn total(&self, d: usize) -> f64 {
        let s = self.stride();
        self.eta[d * s..(d + 1) * s].iter().sum()
    }

    /// Mean total warning over directed edges whose source lies at `|z| ≤ L/2`.
    pub fn bulk_mean(&self, graph: &QcolGraph) -> f64 {
        let h = (graph.params.half_length / 2) as i64;
        let (mut sum, mut count) = (0.0, 0usize);
        for d in 0..2 * graph.edges.len() {
            if graph.positions[endpoints(graph, d).0].abs() <= h {
                sum += self.total(d);
                count += 1;
            }
        }
        if count == 0 {
            0.0
        } else {
            sum / count as f64
        }
    }

    /// Applies a color relabeling `t → perm[t]` to vector messages.
    pub fn permute_colors(&self, perm: &[usize]) -> Self {
        let mut out = self.clone();
        if self.mode == SpMode::Vector {
            let q = self.q;
            for d in 0..self.eta.len() / q {
                for t in 0..q {
                    out.eta[d * q + perm[t]] = self.eta[d * q + t];
                }
            }
        }
        out
    }
}

#[inline]
fn endpoints(graph: &QcolGraph, d: usize) -> (usize, usize) {
    let (u, v) = graph.edges[d / 2];
    if d.is_multiple_of(2) {
        (u, v)
    } else {
        (v, u)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QcolSpOptions {
    /// Weight of the old message in the damped update.
    pub damping: f64,
    pub tol: f64,
    pub max_iters: usize,
}

impl Default for QcolSpOptions {
    fn default() -> Self {
        QcolSpOptions {
            damping: 0.0,
            tol: 1e-8,
            max_iters: 1000,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct QcolRun {
    pub messages: QcolMessages,
    pub converged: bool,
    pub iterations: usize,
    pub max_change: f64,
    /// Updates skipped in the last sweep because every color was forbidden
    /// with certainty.
    pub contradictions: usize,
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Symmetric update from the total warnings of the other neighbors. Returns
/// `None` when all colors are surely forbidden.
pub fn symmetric_update(q: usize, incoming: &[f64]) -> Option<f64> {
    let qf = q as f64;
    let (mut forced, mut norm) = (0.0, 0.0);
    for m in 1..=q {
        let g: f64 = incoming.iter().map(|&e| 1.0 - m as f64 * e / qf).product();
        let sign = if m % 2 == 1 { 1.0 } else { -1.0 };
        forced += sign * binomial(q - 1, m - 1) * g;
        norm += sign * binomial(q, m) * g;
    }
    if norm <= 1e-300 {
        return None;
    }
    Some((qf * forced / norm).clamp(0.0, 1.0))
}

/// Vector update by inclusion–exclusion over color subsets. `incoming` holds
/// one row of `q` warnings per other neighbor; the result is written to `out`.
pub fn vector_update(q: usize, incoming: &[&[f64]], out: &mut [f64]) -> bool {
    let full = 1usize << q;
    let mut f = vec![1.0f64; full];
    let mut sums = vec![0.0f64; full];
    for row in incoming {
        for t in 1..full {
            let low = t.trailing_zeros() as usize;
            sums[t] = sums[t & (t - 1)] + row[low];
            f[t] *= 1.0 - sums[t];
        }
    }
    let mut norm = 0.0;
    for c in out.iter_mut() {
        *c = 0.0;
    }
    for t in 1..full {
        let sign = if t.count_ones() % 2 == 1 { 1.0 } else { -1.0 };
        norm += sign * f[t];
        for (c, o) in out.iter_mut().enumerate() {
            if t & (1 << c) != 0 {
                *o += sign * f[t];
            }
        }
    }
    if norm <= 1e-300 {
        return false;
    }
    for o in out.iter_mut() {
        *o = (*o / norm).clamp(0.0, 1.0);
    }
    true
}

/// Incoming directed edges of every vertex, as `(edge, source)`.
fn incoming_lists(graph: &QcolGraph) -> Vec<Vec<usize>> {
    let mut inc = vec![Vec::new(); graph.num_vertices()];
    for d in 0..2 * graph.edges.len() {
        inc[endpoints(graph, d).1].push(d);
    }
    inc
}

/// Iterates in-place sweeps over vertices until the largest change of any
/// warning falls below `tol`.
pub fn run_qcol_sp(graph: &QcolGraph, init: QcolMessages, opts: QcolSpOptions) -> Result<QcolRun> {
    let q = graph.params.q;
    if init.q != q || init.eta.len() != 2 * graph.edges.len() * init.stride() {
        return Err(Error::Contract("messages do not match the graph".into()));
    }
    for d in 0..2 * graph.edges.len() {
        let s = init.stride();
        let row = &init.eta[d * s..(d + 1) * s];
        if row.iter().any(|x| !(0.0..=1.0).contains(x)) || init.total(d) > 1.0 + 1e-12 {
            return Err(Error::Contract(format!("warnings on edge {d} are not a sub-probability")));
        }
    }
    if !(0.0..1.0).contains(&opts.damping) {
        return Err(invalid("damping", format!("{} is outside [0, 1)", opts.damping)));
    }
    let inc = incoming_lists(graph);
    let mut msg = init;
    let stride = msg.stride();
    let mut max_change = f64::INFINITY;
    let mut contradictions = 0;
    let mut buf = vec![0.0; q];
    for it in 1..=opts.max_iters {
        max_change = 0.0;
        contradictions = 0;
        for i in 0..graph.num_vertices() {
            for &d_in in &inc[i] {
                // Outgoing edge i → j is the reverse of j → i.
                let d_out = d_in ^ 1;
                let ok = match msg.mode {
                    SpMode::Symmetric => {
                        let others: Vec<f64> = inc[i].iter().filter(|&&d| d != d_in).map(|&d| msg.eta[d]).collect();
                        symmetric_update(q, &others).map(|v| buf[0] = v).is_some()
                    }
                    SpMode::Vector => {
                        let others: Vec<&[f64]> = inc[i]
                            .iter()
                            .filter(|&&d| d != d_in)
                            .map(|&d| &msg.eta[d * q..(d + 1) * q])
                            .collect();
                        vector_update(q, &others, &mut buf)
                    }
                };
                if !ok {
                    contradictions += 1;
                    continue;
                }
                for t in 0..stride {
                    let old = msg.eta[d_out * stride + t];
                    let new = (1.0 - opts.damping) * buf[t] + opts.damping * old;
                    max_change = max_change.max((new - old).abs());
                    msg.eta[d_out * stride + t] = new;
                }
            }
        }
        if max_change < opts.tol {
            return Ok(QcolRun {
                messages: msg,
                converged: true,
                iterations: it,
                max_change,
                contradictions,
            });
        }
    }
    Ok(QcolRun {
        messages: msg,
        converged: false,
        iterations: opts.max_iters,
        max_change,
        contradictions,
    })
}

#[cfg(test)]
mod tests {
    use super::super::graph::{generate_qcol_instance, QcolEnsembleParams, Window};
    use super::*;
    use proptest::prelude::{prop_assert, proptest, ProptestConfig};

    fn params(q: usize, n: usize) -> QcolEnsembleParams {
        QcolEnsembleParams {
            q,
            c: 1.0,
            half_length: 0,
            width: 0,
            n,
            seed: 0,
            window: Window::Narrow,
        }
    }

    fn graph(q: usize, n: usize, edges: Vec<(usize, usize)>) -> QcolGraph {
        QcolGraph::from_edges(params(q, n.max(2)), vec![0; n], edges).unwrap()
    }

    /// Random tree on `n` vertices from a parent array.
    fn tree(q: usize, n: usize, seed: u64) -> QcolGraph {
        let mut r = rng::stream(seed, &[]);
        let edges = (1..n).map(|v| (r.random_range(0..v), v)).collect();
        graph(q, n, edges)
    }

    /// Colors each vertex takes over all proper colorings.
    fn colors_taken(g: &QcolGraph) -> Vec<u32> {
        let n = g.num_vertices();
        let q = g.params.q;
        let mut adj = vec![Vec::new(); n];
        for &(u, v) in &g.edges {
            adj[u].push(v);
            adj[v].push(u);
        }
        let mut col = vec![usize::MAX; n];
        let mut taken = vec![0u32; n];
        fn go(i: usize, q: usize, adj: &[Vec<usize>], col: &mut [usize], taken: &mut [u32]) {
            if i == col.len() {
                for (v, &c) in col.iter().enumerate() {
                    taken[v] |= 1 << c;
                }
                return;
            }
            for c in 0..q {
                if adj[i].iter().all(|&j| col[j] != c) {
                    col[i] = c;
                    go(i + 1, q, adj, col, taken);
                    col[i] = usize::MAX;
                }
            }
        }
        go(0, q, &adj, &mut col, &mut taken);
        taken
    }

    #[test]
    fn symmetric_update_examples() {
        assert_eq!(symmetric_update(3, &[]), Some(0.0));
        assert_eq!(symmetric_update(3, &[0.0, 0.0]), Some(0.0));
        // Two surely frozen neighbors pick distinct colors with probability 2/3.
        let two = symmetric_update(3, &[1.0, 1.0]).unwrap();
        assert!((two - 2.0 / 3.0).abs() < 1e-12, "{two}");
        assert!(symmetric_update(3, &[1.0]).unwrap() < 1e-12);
    }

    #[test]
    fn vector_update_examples() {
        let mut out = [0.0; 3];
        assert!(vector_update(3, &[&[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0]], &mut out));
        assert_eq!(out, [0.0, 0.0, 1.0]);
        assert!(!vector_update(3, &[&[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0], &[0.0, 0.0, 1.0]], &mut out));
        assert!(vector_update(3, &[], &mut out));
        assert_eq!(out, [0.0; 3]);
    }

    #[test]
    fn symmetric_matches_vector_on_uniform_rows() {
        let totals = [0.3, 0.7, 0.5, 0.9];
        let rows: Vec<Vec<f64>> = totals.iter().map(|&t| vec![t / 4.0; 4]).collect();
        let refs: Vec<&[f64]> = rows.iter().map(|r| &r[..]).collect();
        let mut out = [0.0; 4];
        assert!(vector_update(4, &refs, &mut out));
        let s = symmetric_update(4, &totals).unwrap();
        assert!((out.iter().sum::<f64>() - s).abs() < 1e-12);
    }

    #[test]
    fn isolated_vertex_and_zero_state() {
        let g = graph(3, 3, vec![(0, 1)]);
        let run = run_qcol_sp(&g, QcolMessages::zeros(&g, SpMode::Symmetric), QcolSpOptions::default()).unwrap();
        assert!(run.converged);
        assert!(run.messages.eta.iter().all(|&e| e == 0.0));
        let big = generate_qcol_instance(QcolEnsembleParams { c: 5.0, n: 300, ..params(3, 300) }).unwrap();
        for mode in [SpMode::Symmetric, SpMode::Vector] {
            let run = run_qcol_sp(&big, QcolMessages::zeros(&big, mode), QcolSpOptions::default()).unwrap();
            assert!(run.messages.eta.iter().all(|&e| e == 0.0));
        }
    }

    #[test]
    fn trees_have_no_frozen_vertices() {
        for seed in 0..20 {
            let n = 5 + (seed as usize % 11);
            let g = tree(3, n, seed);
            let taken = colors_taken(&g);
            assert!(taken.iter().all(|&t| t == 0b111), "oracle found a frozen vertex");
            for mode in [SpMode::Symmetric, SpMode::Vector] {
                let init = QcolMessages::warning_rich(&g, mode, Seeding::OneSided, seed);
                let run = run_qcol_sp(&g, init, QcolSpOptions::default()).unwrap();
                assert!(run.converged);
                assert!(run.messages.eta.iter().all(|&e| e == 0.0), "seed {seed} {mode:?}");
            }
        }
    }

    #[test]
    fn five_clique_yields_contradictions() {
        let edges = (0..5).flat_map(|u| (u + 1..5).map(move |v| (u, v))).collect();
        let g = graph(3, 5, edges);
        assert!(colors_taken(&g).iter().all(|&t| t == 0));
        let mut init = QcolMessages::zeros(&g, SpMode::Vector);
        for d in 0..20 {
            let (src, _) = endpoints(&g, d);
            init.eta[d * 3 + src % 3] = 1.0;
        }
        let run = run_qcol_sp(&g, init, QcolSpOptions { max_iters: 5, ..Default::default() }).unwrap();
        assert!(run.contradictions > 0);
    }

    #[test]
    fn color_relabeling_commutes_with_sp() {
        let g = generate_qcol_instance(QcolEnsembleParams { c: 4.8, n: 200, seed: 3, ..params(3, 200) }).unwrap();
        let init = QcolMessages::warning_rich(&g, SpMode::Vector, Seeding::OneSided, 5);
        let opts = QcolSpOptions { max_iters: 30, ..Default::default() };
        let perm = [2, 0, 1];
        let a = run_qcol_sp(&g, init.clone(), opts).unwrap().messages.permute_colors(&perm);
        let b = run_qcol_sp(&g, init.permute_colors(&perm), opts).unwrap().messages;
        for (x, y) in a.eta.iter().zip(&b.eta) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]

        #[test]
        fn warnings_stay_normalized(seed in 0u64..1000, c in 2.0f64..7.0, vector in proptest::bool::ANY, damping in 0.0f64..0.8) {
            let mode = if vector { SpMode::Vector } else { SpMode::Symmetric };
            let g = generate_qcol_instance(QcolEnsembleParams { c, n: 60, seed, half_length: 1, width: 1, ..params(3, 60) }).unwrap();
            let init = QcolMessages::warning_rich(&g, mode, Seeding::OneSided, seed);
            let run = run_qcol_sp(&g, init, QcolSpOptions { damping, tol: 1e-8, max_iters: 15 }).unwrap();
            let m = &run.messages;
            prop_assert!(m.eta.iter().all(|x| (0.0..=1.0).contains(x)));
            for d in 0..2 * g.edges.len() {
                prop_assert!(m.total(d) <= 1.0 + 1e-9);
            }
        }
    }
}
