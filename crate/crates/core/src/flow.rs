//! Integral min-cost flow at free flow value, with exact rational costs.
//!
//! Successive shortest paths: repeatedly find a cheapest source-sink path in the
//! residual graph (label-correcting, so negative arc costs are fine) and augment
//! along it while its cost is negative. Positive-cost paths are never used.

use std::collections::VecDeque;
use std::fmt::Write as _;

use num_traits::{Signed, Zero};

use crate::error::{Error, Result};
use crate::policy::PolicyMatrix;
use crate::prob::{fmt_rational, Rational};
use crate::secret::SecretPartition;

#[derive(Clone, Debug, PartialEq)]
pub struct FlowArc {
    pub tail: usize,
    pub head: usize,
    pub cap: u64,
    pub cost: Rational,
}

#[derive(Clone, Debug)]
pub struct FlowNetwork {
    names: Vec<String>,
    source: usize,
    sink: usize,
    arcs: Vec<FlowArc>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FlowResult {
    /// Flow on each arc, indexed like `FlowNetwork::arcs`.
    pub flow: Vec<u64>,
    pub total_cost: Rational,
    pub value: u64,
}

impl FlowNetwork {
    /// A network with just a source (node 0) and a sink (node 1).
    pub fn new() -> Self {
        FlowNetwork { names: vec!["source".into(), "sink".into()], source: 0, sink: 1, arcs: Vec::new() }
    }

    pub fn add_node(&mut self, name: impl Into<String>) -> usize {
        self.names.push(name.into());
        self.names.len() - 1
    }

    pub fn add_arc(&mut self, tail: usize, head: usize, cap: u64, cost: Rational) -> Result<usize> {
        let n = self.names.len();
        if tail >= n || head >= n {
            return Err(Error::InvalidNetwork(format!("arc {tail}->{head} names a missing node")));
        }
        if head == self.source || tail == self.sink {
            return Err(Error::InvalidNetwork("arcs may not enter the source or leave the sink".into()));
        }
        if tail == head {
            return Err(Error::InvalidNetwork(format!("self-loop at node {tail}")));
        }
        self.arcs.push(FlowArc { tail, head, cap, cost });
        Ok(self.arcs.len() - 1)
    }

    pub fn source(&self) -> usize {
        self.source
    }

    pub fn sink(&self) -> usize {
        self.sink
    }

    pub fn n_nodes(&self) -> usize {
        self.names.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn arcs(&self) -> &[FlowArc] {
        &self.arcs
    }

    /// Graphviz rendering; arcs annotated `capacity (cost)`, with flow when given.
    pub fn to_dot(&self, flow: Option<&FlowResult>) -> String {
        let mut s = String::from("digraph flow {\n  rankdir=LR;\n");
        for (i, n) in self.names.iter().enumerate() {
            let _ = writeln!(s, "  n{i} [label=\"{}\"];", n.replace('"', "'"));
        }
        for (k, a) in self.arcs.iter().enumerate() {
            let f = flow.map(|r| format!(" f={}", r.flow[k])).unwrap_or_default();
            let bold = flow.is_some_and(|r| r.flow[k] > 0);
            let _ = writeln!(
                s,
                "  n{} -> n{} [label=\"{} ({}){f}\"{}];",
                a.tail,
                a.head,
                a.cap,
                fmt_rational(&a.cost),
                if bold { ", style=bold" } else { "" }
            );
        }
        s.push_str("}\n");
        s
    }
}

impl Default for FlowNetwork {
    fn default() -> Self {
        Self::new()
    }
}

struct Residual {
    head: Vec<usize>,
    cap: Vec<u64>,
    cost: Vec<Rational>,
    adj: Vec<Vec<usize>>,
}


/// Distance and incoming residual edge per node.
type Labels = (Vec<Option<Rational>>, Vec<Option<usize>>);

impl Residual {
    fn new(net: &FlowNetwork) -> Self {
        let m = net.arcs.len();
        let mut r = Residual {
            head: Vec::with_capacity(2 * m),
            cap: Vec::with_capacity(2 * m),
            cost: Vec::with_capacity(2 * m),
            adj: vec![Vec::new(); net.n_nodes()],
        };
        for a in &net.arcs {
            r.adj[a.tail].push(r.head.len());
            r.head.push(a.head);
            r.cap.push(a.cap);
            r.cost.push(a.cost.clone());
            r.adj[a.head].push(r.head.len());
            r.head.push(a.tail);
            r.cap.push(0);
            r.cost.push(-a.cost.clone());
        }
        r
    }

    /// Label-correcting shortest paths from `starts` (all at distance 0). Returns
    /// distances and the residual edge used to reach each node.
    fn shortest(&self, starts: &[usize]) -> Result<Labels> {
        let n = self.adj.len();
        let mut dist: Vec<Option<Rational>> = vec![None; n];
        let mut pred = vec![None; n];
        let mut hops = vec![0usize; n];
        let mut queued = vec![false; n];
        let mut q = VecDeque::new();
        for &s in starts {
            dist[s] = Some(Rational::zero());
            queued[s] = true;
            q.push_back(s);
        }
        while let Some(u) = q.pop_front() {
            queued[u] = false;
            let du = dist[u].clone().expect("queued nodes have labels");
            for &e in &self.adj[u] {
                if self.cap[e] == 0 {
                    continue;
                }
                let v = self.head[e];
                let nd = &du + &self.cost[e];
                if dist[v].as_ref().is_none_or(|dv| nd < *dv) {
                    dist[v] = Some(nd);
                    pred[v] = Some(e);
                    hops[v] = hops[u] + 1;
                    if hops[v] >= n {
                        return Err(Error::NegativeCycle(v.to_string()));
                    }
                    if !queued[v] {
                        queued[v] = true;
                        q.push_back(v);
                    }
                }
            }
        }
        Ok((dist, pred))
    }
}

/// Minimum-cost integral flow over all flow values.
pub fn min_cost_flow(net: &FlowNetwork) -> Result<FlowResult> {
    let mut res = Residual::new(net);
    // Any negative cycle, reachable from the source or not, makes the problem unbounded
    // or circulation-dominated; reject it up front.
    let all: Vec<usize> = (0..net.n_nodes()).collect();
    res.shortest(&all)?;

    let (s, t) = (net.source, net.sink);
    let mut value = 0u64;
    loop {
        let (dist, pred) = res.shortest(&[s])?;
        match &dist[t] {
            Some(d) if d.is_negative() => {}
            _ => break,
        }
        let mut push = u64::MAX;
        let mut v = t;
        while v != s {
            let e = pred[v].expect("path to sink");
            push = push.min(res.cap[e]);
            v = res.head[e ^ 1];
        }
        let mut v = t;
        while v != s {
            let e = pred[v].unwrap();
            res.cap[e] -= push;
            res.cap[e ^ 1] += push;
            v = res.head[e ^ 1];
        }
        value += push;
    }
    let flow: Vec<u64> = (0..net.arcs.len()).map(|k| res.cap[2 * k + 1]).collect();
    let total_cost = net
        .arcs
        .iter()
        .zip(&flow)
        .filter(|(_, &f)| f > 0)
        .map(|(a, &f)| &a.cost * Rational::from_integer(f.into()))
        .sum();
    Ok(FlowResult { flow, total_cost, value })
}

/// Node and arc layout of the SML network, so flows can be read back.
///
/// Nodes: source, sink, then one per secret, one per input, one per output.
/// Arcs: source→g for each secret, g→θ for each class member (class order),
/// θ→θ′ for every pair (row-major), θ′→sink for each output.
#[derive(Clone, Debug)]
pub struct SmlNetwork {
    pub net: FlowNetwork,
    pub s: usize,
    pub n_inputs: usize,
    pub n_outputs: usize,
    /// For each g→θ arc, the (class, input) it connects.
    pub member_arcs: Vec<(usize, usize)>,
}

impl SmlNetwork {
    pub fn secret_node(&self, k: usize) -> usize {
        2 + k
    }

    pub fn input_node(&self, i: usize) -> usize {
        2 + self.s + i
    }

    pub fn output_node(&self, j: usize) -> usize {
        2 + self.s + self.n_inputs + j
    }

    /// Index of the first g→θ arc.
    pub fn member_arc_base(&self) -> usize {
        self.s
    }
}

/// The network on which −(min cost) equals the SML raw sum of a deterministic policy.
pub fn build_sml_network(policy: &PolicyMatrix, partition: &SecretPartition) -> Result<SmlNetwork> {
    if !policy.is_deterministic() {
        return Err(Error::NotDeterministic("the flow network needs a deterministic policy".into()));
    }
    if partition.n_inputs() != policy.n_inputs() {
        return Err(Error::InvalidArgument(format!(
            "partition covers {} inputs, policy has {}",
            partition.n_inputs(),
            policy.n_inputs()
        )));
    }
    let mut net = FlowNetwork::new();
    for g in partition.secrets() {
        net.add_node(format!("g:{}", g.id));
    }
    for x in policy.inputs() {
        net.add_node(format!("in:{x}"));
    }
    for y in policy.outputs() {
        net.add_node(format!("out:{y}"));
    }
    let (s, n, m) = (partition.s(), policy.n_inputs(), policy.n_outputs());
    let mut layout = SmlNetwork { net: FlowNetwork::new(), s, n_inputs: n, n_outputs: m, member_arcs: Vec::new() };
    let zero = Rational::zero;
    for k in 0..s {
        net.add_arc(net.source, layout.secret_node(k), 1, zero())?;
    }
    for k in 0..s {
        for &i in partition.class(k) {
            net.add_arc(layout.secret_node(k), layout.input_node(i), 1, zero())?;
            layout.member_arcs.push((k, i));
        }
    }
    for i in 0..n {
        for j in 0..m {
            net.add_arc(layout.input_node(i), layout.output_node(j), 1, -policy.entry(i, j).clone())?;
        }
    }
    for j in 0..m {
        net.add_arc(layout.output_node(j), net.sink, 1, zero())?;
    }
    layout.net = net;
    Ok(layout)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::label::Label;
    use crate::prob::int;

    #[test]
    fn single_arc_negative_cost_is_used() {
        let mut net = FlowNetwork::new();
        net.add_arc(0, 1, 1, -int(1)).unwrap();
        let r = min_cost_flow(&net).unwrap();
        assert_eq!((r.value, r.total_cost), (1, -int(1)));
    }

    #[test]
    fn single_arc_positive_cost_is_skipped() {
        let mut net = FlowNetwork::new();
        net.add_arc(0, 1, 1, int(1)).unwrap();
        let r = min_cost_flow(&net).unwrap();
        assert_eq!((r.value, r.total_cost), (0, int(0)));
    }

    #[test]
    fn split_node_gadget() {
        // two source-sink routes of cost -1 that share a unit-capacity middle arc
        let mut net = FlowNetwork::new();
        let a = net.add_node("a");
        let b = net.add_node("b");
        let c = net.add_node("c");
        let d = net.add_node("d");
        net.add_arc(0, a, 1, -int(1)).unwrap();
        net.add_arc(0, b, 1, -int(1)).unwrap();
        net.add_arc(a, c, 2, int(0)).unwrap();
        net.add_arc(b, c, 2, int(0)).unwrap();
        net.add_arc(c, d, 1, int(0)).unwrap();
        net.add_arc(d, 1, 2, int(0)).unwrap();
        let r = min_cost_flow(&net).unwrap();
        assert_eq!(r.total_cost, -int(1));
        assert_eq!(r.value, 1);
    }

    #[test]
    fn rejects_bad_arcs_and_negative_cycles() {
        let mut net = FlowNetwork::new();
        assert!(net.add_arc(1, 0, 1, int(0)).is_err());
        let a = net.add_node("a");
        let b = net.add_node("b");
        net.add_arc(a, b, 1, -int(1)).unwrap();
        net.add_arc(b, a, 1, int(0)).unwrap();
        assert_eq!(min_cost_flow(&net).unwrap_err().code(), "negative_cycle");
    }

    #[test]
    fn sml_network_shape_on_three_by_two() {
        let ins: Vec<Label> = ["a", "b", "c"].iter().map(|s| Label::name(*s)).collect();
        let outs: Vec<Label> = ["x", "y"].iter().map(|s| Label::name(*s)).collect();
        let p = PolicyMatrix::from_map(ins, outs, &[0, 1, 1]).unwrap();
        let part = SecretPartition::from_assignment(vec![0, 0, 1]).unwrap();
        let sn = build_sml_network(&p, &part).unwrap();
        assert_eq!(sn.net.n_nodes() - 2, 2 + 3 + 2);
        assert_eq!(sn.net.arcs().len(), 2 + 3 + 6 + 2);
        for a in &sn.net.arcs()[5..11] {
            let (i, j) = (a.tail - sn.input_node(0), a.head - sn.output_node(0));
            let expect = if p.entry(i, j) == &int(1) { -int(1) } else { int(0) };
            assert_eq!(a.cost, expect);
        }
        let r = min_cost_flow(&sn.net).unwrap();
        assert_eq!(r.total_cost, -int(2));
        assert!(r.flow.iter().all(|&f| f <= 1));
        assert!(sn.net.to_dot(Some(&r)).contains("style=bold"));
    }

    #[test]
    fn chain_network() {
        let p = PolicyMatrix::identity(vec![Label::name("a")]).unwrap();
        let part = SecretPartition::from_assignment(vec![0]).unwrap();
        let sn = build_sml_network(&p, &part).unwrap();
        assert_eq!(sn.net.n_nodes(), 5);
        assert_eq!(sn.net.arcs().len(), 4);
        assert_eq!(min_cost_flow(&sn.net).unwrap().total_cost, -int(1));
    }

    #[test]
    fn stochastic_policy_rejected() {
        let p = PolicyMatrix::new(
            vec![Label::name("a")],
            vec![Label::name("x"), Label::name("y")],
            vec![vec![crate::prob::ratio(1, 2), crate::prob::ratio(1, 2)]],
        )
        .unwrap();
        let part = SecretPartition::from_assignment(vec![0]).unwrap();
        assert_eq!(build_sml_network(&p, &part).unwrap_err().code(), "not_deterministic");
    }
}
