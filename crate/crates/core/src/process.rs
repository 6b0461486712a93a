//! Process graphs, counted Markov matrices, and their composition.
//!
//! Matrices follow the column convention: entry `(i, j)` is the weight of the
//! edge leading from node `j` to node `i`. Index 0 is the start node and
//! terminal columns are identically zero.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::poly::CounterPoly;

/// Column-sum tolerance for stochasticity checks.
pub const STOCHASTIC_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraphEdge {
    pub from: String,
    pub to: String,
    pub prob: f64,
    #[serde(default)]
    pub counters: BTreeMap<String, u32>,
}

/// Directed graph description of a process, as read from JSON.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProcessGraph {
    pub nodes: Vec<String>,
    pub edges: Vec<GraphEdge>,
    pub terminals: Vec<String>,
}

impl ProcessGraph {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::InvalidGraph(e.to_string()))
    }

    fn index_of(&self) -> Result<HashMap<&str, usize>> {
        let mut map = HashMap::new();
        for (i, n) in self.nodes.iter().enumerate() {
            if map.insert(n.as_str(), i).is_some() {
                return Err(Error::InvalidGraph(format!("duplicate node id `{n}`")));
            }
        }
        Ok(map)
    }
}

/// Square column-substochastic matrix with counter-polynomial entries.
#[derive(Clone, Debug, PartialEq)]
pub struct CountedMatrix {
    dim: usize,
    entries: BTreeMap<(usize, usize), CounterPoly>,
    terminal: Vec<bool>,
    counters: Vec<String>,
    composite: bool,
}

impl CountedMatrix {
    pub fn new(dim: usize, terminals: &[usize]) -> Self {
        let mut terminal = vec![false; dim];
        for &t in terminals {
            terminal[t] = true;
        }
        Self {
            dim,
            entries: BTreeMap::new(),
            terminal,
            counters: Vec::new(),
            composite: false,
        }
    }

    /// Plain probability matrix from dense column-major-by-index data `rows[i][j]`.
    pub fn from_dense(rows: &[Vec<f64>], terminals: &[usize]) -> Self {
        let mut m = Self::new(rows.len(), terminals);
        for (i, row) in rows.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                if v != 0.0 {
                    m.set(i, j, CounterPoly::constant(v));
                }
            }
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn counters(&self) -> &[String] {
        &self.counters
    }

    pub fn counter_index(&self, name: &str) -> Option<usize> {
        self.counters.iter().position(|c| c == name)
    }

    /// Register a counter name, returning its index.
    pub fn add_counter(&mut self, name: &str) -> usize {
        match self.counter_index(name) {
            Some(i) => i,
            None => {
                self.counters.push(name.to_string());
                self.counters.len() - 1
            }
        }
    }

    pub fn is_terminal(&self, i: usize) -> bool {
        self.terminal[i]
    }

    pub fn terminal_mask(&self) -> &[bool] {
        &self.terminal
    }

    pub fn terminals(&self) -> Vec<usize> {
        (0..self.dim).filter(|&i| self.terminal[i]).collect()
    }

    /// Same entries and counters with a different terminal set.
    pub fn with_terminals(&self, terminals: &[usize]) -> Self {
        let mut out = self.clone();
        out.terminal = vec![false; self.dim];
        for &t in terminals {
            out.terminal[t] = true;
        }
        out
    }

    /// True once the matrix has been produced by a tensor or sequential composition.
    pub fn is_composite(&self) -> bool {
        self.composite
    }

    pub fn get(&self, i: usize, j: usize) -> Option<&CounterPoly> {
        self.entries.get(&(i, j))
    }

    pub fn set(&mut self, i: usize, j: usize, p: CounterPoly) {
        if p.is_zero() {
            self.entries.remove(&(i, j));
        } else {
            self.entries.insert((i, j), p);
        }
    }

    fn accumulate(&mut self, i: usize, j: usize, p: &CounterPoly) {
        let next = match self.entries.get(&(i, j)) {
            Some(old) => old.add(p),
            None => p.clone(),
        };
        self.set(i, j, next);
    }

    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, &CounterPoly)> {
        self.entries.iter().map(|(&(i, j), p)| (i, j, p))
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    /// Column sums with every counter at one.
    pub fn column_sums(&self) -> Vec<f64> {
        let mut sums = vec![0.0; self.dim];
        for (&(_, j), p) in &self.entries {
            sums[j] += p.at_ones();
        }
        sums
    }

    /// Check the process-matrix invariants.
    pub fn validate(&self) -> Result<()> {
        for (&(i, j), p) in &self.entries {
            if p.min_coefficient() < 0.0 {
                return Err(Error::InvalidGraph(format!(
                    "entry ({i}, {j}) has a negative coefficient"
                )));
            }
        }
        for (j, s) in self.column_sums().into_iter().enumerate() {
            if self.terminal[j] {
                if s != 0.0 {
                    return Err(Error::SelfLoopOnTerminal { node: j });
                }
            } else if (s - 1.0).abs() > STOCHASTIC_TOL {
                return Err(Error::NonStochasticGraph { column: j, sum: s });
            }
        }
        Ok(())
    }

    /// Maximum exponent of a counter over all entries.
    pub fn degree_in(&self, var: usize) -> u32 {
        self.entries.values().map(|p| p.degree_in(var)).max().unwrap_or(0)
    }

    /// Maximum total counter degree over all entries.
    pub fn max_total_degree(&self) -> u32 {
        self.entries.values().map(|p| p.total_degree()).max().unwrap_or(0)
    }

    /// Substitute a real value for a named counter and drop it from the registry.
    pub fn bind_counter(&self, name: &str, value: f64) -> Result<Self> {
        let var = self
            .counter_index(name)
            .ok_or_else(|| Error::UnknownCounter(name.to_string()))?;
        let keep: Vec<usize> = (0..self.counters.len()).filter(|&i| i != var).collect();
        let mut map = vec![0; self.counters.len()];
        for (new, &old) in keep.iter().enumerate() {
            map[old] = new;
        }
        let mut out = Self {
            dim: self.dim,
            entries: BTreeMap::new(),
            terminal: self.terminal.clone(),
            counters: keep.iter().map(|&i| self.counters[i].clone()).collect(),
            composite: self.composite,
        };
        for (&(i, j), p) in &self.entries {
            out.set(i, j, p.bind(var, value).remap(&map));
        }
        Ok(out)
    }

    /// Copy of this matrix re-expressed over a larger counter registry.
    fn with_registry(&self, registry: &[String]) -> Self {
        let map: Vec<usize> = self
            .counters
            .iter()
            .map(|c| registry.iter().position(|r| r == c).expect("registry superset"))
            .collect();
        let mut out = self.clone();
        out.counters = registry.to_vec();
        out.entries = self
            .entries
            .iter()
            .map(|(&k, p)| (k, p.remap(&map)))
            .collect();
        out
    }

    /// Re-express two matrices over the union of their counter registries.
    pub fn align(a: &Self, b: &Self) -> (Self, Self) {
        let mut registry = a.counters.clone();
        for c in &b.counters {
            if !registry.contains(c) {
                registry.push(c.clone());
            }
        }
        (a.with_registry(&registry), b.with_registry(&registry))
    }

    /// Polynomial matrix product `self * other` (terminal flags taken from `self`).
    pub fn matmul(&self, other: &Self) -> Self {
        let (a, b) = Self::align(self, other);
        let mut by_row: BTreeMap<usize, Vec<(usize, &CounterPoly)>> = BTreeMap::new();
        for (&(k, j), p) in &b.entries {
            by_row.entry(k).or_default().push((j, p));
        }
        let mut out = Self {
            dim: a.dim,
            entries: BTreeMap::new(),
            terminal: a.terminal.clone(),
            counters: a.counters.clone(),
            composite: a.composite || b.composite,
        };
        for (&(i, k), pa) in &a.entries {
            if let Some(row) = by_row.get(&k) {
                for &(j, pb) in row {
                    out.accumulate(i, j, &pa.mul(pb));
                }
            }
        }
        out
    }

    /// Multiply selected entries by a counting variable, registering it if new.
    pub fn attach_counter(&self, edges: &[(usize, usize)], var: &str) -> Result<Self> {
        let mut out = self.clone();
        let idx = out.add_counter(var);
        let w = CounterPoly::var(idx);
        for &(i, j) in edges {
            let p = out
                .entries
                .get(&(i, j))
                .ok_or(Error::UnknownEdge { row: i, col: j })?
                .mul(&w);
            out.set(i, j, p);
        }
        Ok(out)
    }

    /// Bind every counter to a complex value (missing values default to one).
    pub fn evaluate(&self, values: &[Complex64]) -> EvaluatedMatrix {
        let mut cols = vec![Vec::new(); self.dim];
        for (&(i, j), p) in &self.entries {
            let v = p.eval(values);
            if v != Complex64::new(0.0, 0.0) {
                cols[j].push((i, v));
            }
        }
        EvaluatedMatrix {
            dim: self.dim,
            cols,
            terminal: self.terminal.clone(),
        }
    }

    /// Bind counters by name; unnamed counters are set to one.
    pub fn evaluate_named(&self, values: &[(&str, Complex64)]) -> Result<EvaluatedMatrix> {
        let mut vals = vec![Complex64::new(1.0, 0.0); self.counters.len()];
        for &(name, v) in values {
            let i = self
                .counter_index(name)
                .ok_or_else(|| Error::UnknownCounter(name.to_string()))?;
            vals[i] = v;
        }
        Ok(self.evaluate(&vals))
    }

    pub fn evaluate_at_ones(&self) -> EvaluatedMatrix {
        self.evaluate(&[])
    }
}

/// A counted matrix with all counters bound to complex constants.
#[derive(Clone, Debug)]
pub struct EvaluatedMatrix {
    dim: usize,
    cols: Vec<Vec<(usize, Complex64)>>,
    terminal: Vec<bool>,
}

impl EvaluatedMatrix {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_terminal(&self, i: usize) -> bool {
        self.terminal[i]
    }

    pub fn column(&self, j: usize) -> &[(usize, Complex64)] {
        &self.cols[j]
    }

    /// `out = M x`.
    pub fn apply(&self, x: &[Complex64], out: &mut [Complex64]) {
        out.iter_mut().for_each(|v| *v = Complex64::new(0.0, 0.0));
        for (j, col) in self.cols.iter().enumerate() {
            let xj = x[j];
            if xj == Complex64::new(0.0, 0.0) {
                continue;
            }
            for &(i, v) in col {
                out[i] += v * xj;
            }
        }
    }

    fn terminal_mass(&self, x: &[Complex64]) -> Complex64 {
        x.iter()
            .zip(&self.terminal)
            .filter(|(_, &t)| t)
            .map(|(v, _)| *v)
            .sum()
    }

    /// `[p_0, ..., p_{t_max}]` from iterated products on the start column.
    pub fn pmf_series(&self, t_max: usize) -> Vec<Complex64> {
        let mut x = vec![Complex64::new(0.0, 0.0); self.dim];
        x[0] = Complex64::new(1.0, 0.0);
        let mut next = x.clone();
        let mut out = Vec::with_capacity(t_max + 1);
        out.push(self.terminal_mass(&x));
        for _ in 0..t_max {
            self.apply(&x, &mut next);
            std::mem::swap(&mut x, &mut next);
            out.push(self.terminal_mass(&x));
        }
        out
    }

    /// Probability of completing at exactly step `t`.
    pub fn pmf_at(&self, t: usize) -> Complex64 {
        self.pmf_series(t)[t]
    }
}

/// Completion pmf `p_t` by matrix powers, counters bound to `values`.
pub fn pmf_by_power(m: &CountedMatrix, t: usize, values: &[Complex64]) -> Complex64 {
    m.evaluate(values).pmf_at(t)
}

/// Real pmf `p_0..=p_{t_max}` with every counter at one.
pub fn pmf_series(m: &CountedMatrix, t_max: usize) -> Vec<f64> {
    m.evaluate_at_ones().pmf_series(t_max).into_iter().map(|c| c.re).collect()
}

/// Build the counted matrix of a validated process graph.
pub fn build_process(g: &ProcessGraph) -> Result<CountedMatrix> {
    if g.nodes.is_empty() {
        return Err(Error::InvalidGraph("graph has no nodes".into()));
    }
    if g.terminals.is_empty() {
        return Err(Error::InvalidGraph("graph has no terminal nodes".into()));
    }
    let index = g.index_of()?;
    let lookup = |id: &str| {
        index
            .get(id)
            .copied()
            .ok_or_else(|| Error::InvalidGraph(format!("unknown node id `{id}`")))
    };
    let terminals: BTreeSet<usize> = g
        .terminals
        .iter()
        .map(|t| lookup(t))
        .collect::<Result<_>>()?;
    let terminals: Vec<usize> = terminals.into_iter().collect();
    let mut m = CountedMatrix::new(g.nodes.len(), &terminals);
    for e in &g.edges {
        if !(0.0..=1.0).contains(&e.prob) {
            return Err(Error::InvalidProbability(e.prob));
        }
        let from = lookup(&e.from)?;
        let to = lookup(&e.to)?;
        if m.terminal[from] {
            return Err(Error::SelfLoopOnTerminal { node: from });
        }
        let mut weight = CounterPoly::constant(e.prob);
        for (name, &exp) in &e.counters {
            if exp > 0 {
                let v = m.add_counter(name);
                weight = weight.mul(&CounterPoly::monomial(v, exp, 1.0));
            }
        }
        m.accumulate(to, from, &weight);
    }
    m.validate()?;
    Ok(m)
}

fn kron(a: &CountedMatrix, b: &CountedMatrix, terminal: Vec<bool>) -> CountedMatrix {
    let (a, b) = CountedMatrix::align(a, b);
    let db = b.dim;
    let mut out = CountedMatrix {
        dim: a.dim * db,
        entries: BTreeMap::new(),
        terminal,
        counters: a.counters.clone(),
        composite: true,
    };
    for (&(ia, ja), pa) in &a.entries {
        for (&(ib, jb), pb) in &b.entries {
            out.set(ia * db + ib, ja * db + jb, pa.mul(pb));
        }
    }
    out
}

/// Run both processes independently; finish when either finishes.
pub fn compose_or(a: &CountedMatrix, b: &CountedMatrix) -> CountedMatrix {
    let terminal = (0..a.dim * b.dim)
        .map(|k| a.terminal[k / b.dim] || b.terminal[k % b.dim])
        .collect();
    kron(a, b, terminal)
}

/// Run both processes independently; finish when both have finished.
pub fn compose_and(a: &CountedMatrix, b: &CountedMatrix) -> CountedMatrix {
    compose_and_held(a, b, None, None)
}

/// AND-composition where the terminal hold of either factor may be weighted
/// by a counting variable, counting the steps that factor waits for the other.
pub fn compose_and_held(
    a: &CountedMatrix,
    b: &CountedMatrix,
    hold_a: Option<&str>,
    hold_b: Option<&str>,
) -> CountedMatrix {
    let held = |m: &CountedMatrix, counter: Option<&str>| {
        let mut m = m.clone();
        let weight = match counter {
            Some(name) => CounterPoly::var(m.add_counter(name)),
            None => CounterPoly::constant(1.0),
        };
        for t in m.terminals() {
            m.accumulate(t, t, &weight);
        }
        m
    };
    let terminal: Vec<bool> = (0..a.dim * b.dim)
        .map(|k| a.terminal[k / b.dim] && b.terminal[k % b.dim])
        .collect();
    let mut out = kron(&held(a, hold_a), &held(b, hold_b), terminal.clone());
    let weight = |counter: Option<&str>| match counter {
        Some(name) => CounterPoly::var(out.counter_index(name).expect("registered")),
        None => CounterPoly::constant(1.0),
    };
    // Both factors terminal: drop the joint hold.
    let joint = weight(hold_a).mul(&weight(hold_b));
    for (k, &t) in terminal.iter().enumerate() {
        if t {
            let next = out.get(k, k).cloned().unwrap_or_default().sub(&joint);
            out.set(k, k, next);
        }
    }
    out
}

/// `a` followed by `b`: each terminal of `a` steps to the start of `b`.
pub fn compose_seq(a: &CountedMatrix, b: &CountedMatrix) -> CountedMatrix {
    let (a, b) = CountedMatrix::align(a, b);
    let off = a.dim;
    let mut terminal = vec![false; a.dim + b.dim];
    for (k, &t) in b.terminal.iter().enumerate() {
        terminal[off + k] = t;
    }
    let mut out = CountedMatrix {
        dim: a.dim + b.dim,
        entries: BTreeMap::new(),
        terminal,
        counters: a.counters.clone(),
        composite: true,
    };
    for (&(i, j), p) in &a.entries {
        out.set(i, j, p.clone());
    }
    for (&(i, j), p) in &b.entries {
        out.set(off + i, off + j, p.clone());
    }
    for t in a.terminals() {
        out.set(off, t, CounterPoly::constant(1.0));
    }
    out
}

/// Combine a fast part (events of duration `k1`) and a slow part (duration
/// `k2 >= k1`) into one matrix whose step is one application of the slow part.
///
/// Within a step the slow part acts first, keeping in place any mass it does
/// not move; the fast part is then applied `ceil(k2/k1)` times with terminals
/// holding and unmoved mass staying on its node. Terminal columns of the
/// result are zero.
pub fn rescale_timing(
    fast: &CountedMatrix,
    slow: &CountedMatrix,
    k1: f64,
    k2: f64,
) -> Result<CountedMatrix> {
    if !(k1 > 0.0 && k2 >= k1) {
        return Err(Error::InvalidSplit(format!("need k2 >= k1 > 0, got k1 = {k1}, k2 = {k2}")));
    }
    if fast.dim != slow.dim || fast.terminal != slow.terminal {
        return Err(Error::InvalidSplit("parts differ in dimension or terminals".into()));
    }
    if fast.composite || slow.composite {
        return Err(Error::InvalidSplit(
            "timing must be rescaled before composing matrices".into(),
        ));
    }
    let (fast, slow) = CountedMatrix::align(fast, slow);
    let fs = fast.column_sums();
    let ss = slow.column_sums();
    for j in 0..fast.dim {
        let total = fs[j] + ss[j];
        let expect = if fast.terminal[j] { 0.0 } else { 1.0 };
        if (total - expect).abs() > STOCHASTIC_TOL {
            return Err(Error::InvalidSplit(format!("column {j} sums to {total}")));
        }
    }
    let one = CounterPoly::constant(1.0);
    let hold_terminals = |m: &CountedMatrix| {
        let mut m = m.clone();
        for t in m.terminals() {
            m.accumulate(t, t, &one);
        }
        m
    };
    let repeats = (k2 / k1 - 1e-12).ceil().max(1.0) as usize;
    let step = hold_terminals(&fast);
    let mut fast_block = step.clone();
    for _ in 1..repeats {
        fast_block = step.matmul(&fast_block);
    }
    let sums = fast_block.column_sums();
    for (j, s) in sums.into_iter().enumerate() {
        let leftover = 1.0 - s;
        if leftover.abs() > STOCHASTIC_TOL {
            fast_block.accumulate(j, j, &CounterPoly::constant(leftover));
        }
    }
    let mut slow_block = hold_terminals(&slow);
    for (j, s) in slow.column_sums().into_iter().enumerate() {
        if !slow.terminal[j] {
            let leftover = 1.0 - s;
            if leftover.abs() > STOCHASTIC_TOL {
                slow_block.accumulate(j, j, &CounterPoly::constant(leftover));
            }
        }
    }
    let mut out = fast_block.matmul(&slow_block);
    out.terminal = fast.terminal.clone();
    out.composite = false;
    let terminal_cols: Vec<(usize, usize)> = out
        .entries
        .keys()
        .filter(|&&(_, j)| out.terminal[j])
        .copied()
        .collect();
    for k in terminal_cols {
        out.entries.remove(&k);
    }
    Ok(out)
}
