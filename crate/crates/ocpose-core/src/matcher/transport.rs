//! Min-cost flow via successive shortest paths.
//!
//! Capacities are integers, so every augmentation is integral and the final
//! flow is an integral optimum. Costs are non-negative f64; Dijkstra runs on
//! Johnson-reduced costs, clamping the tiny negatives that float rounding
//! can leave behind (a few ulps per step, far below the 1e-9 tolerance the
//! solver is verified against).

use std::cmp::Ordering;
use std::collections::BinaryHeap;

pub(crate) struct MinCostFlow {
    graph: Vec<Vec<usize>>,
    to: Vec<usize>,
    cap: Vec<i64>,
    cost: Vec<f64>,
}

struct HeapEntry {
    dist: f64,
    node: usize,
}

impl PartialEq for HeapEntry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for HeapEntry {}
impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for HeapEntry {
    // min-heap on (dist, node) through BinaryHeap's max ordering
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .dist
            .total_cmp(&self.dist)
            .then_with(|| other.node.cmp(&self.node))
    }
}

impl MinCostFlow {
    pub fn new(n: usize) -> Self {
        MinCostFlow {
            graph: vec![Vec::new(); n],
            to: Vec::new(),
            cap: Vec::new(),
            cost: Vec::new(),
        }
    }

    /// Add a directed edge; returns its id. The paired reverse edge is id^1.
    pub fn add_edge(&mut self, from: usize, to: usize, cap: i64, cost: f64) -> usize {
        debug_assert!(cost >= 0.0 && cost.is_finite());
        let id = self.to.len();
        self.graph[from].push(id);
        self.to.push(to);
        self.cap.push(cap);
        self.cost.push(cost);
        self.graph[to].push(id + 1);
        self.to.push(from);
        self.cap.push(0);
        self.cost.push(-cost);
        id
    }

    /// Units actually sent along a forward edge.
    pub fn flow_on(&self, edge_id: usize) -> i64 {
        self.cap[edge_id ^ 1]
    }

    /// Push max flow from `source` to `sink` at minimum cost; returns the
    /// total flow.
    pub fn solve(&mut self, source: usize, sink: usize) -> i64 {
        let n = self.graph.len();
        let mut phi = vec![0.0f64; n];
        let mut dist = vec![f64::INFINITY; n];
        let mut prev_edge = vec![usize::MAX; n];
        let mut total_flow = 0i64;

        loop {
            dist.fill(f64::INFINITY);
            prev_edge.fill(usize::MAX);
            dist[source] = 0.0;
            let mut heap = BinaryHeap::new();
            heap.push(HeapEntry {
                dist: 0.0,
                node: source,
            });
            while let Some(HeapEntry { dist: d, node: u }) = heap.pop() {
                if d > dist[u] {
                    continue;
                }
                for &e in &self.graph[u] {
                    if self.cap[e] <= 0 {
                        continue;
                    }
                    let v = self.to[e];
                    let reduced = (self.cost[e] + phi[u] - phi[v]).max(0.0);
                    let nd = d + reduced;
                    if nd < dist[v] {
                        dist[v] = nd;
                        prev_edge[v] = e;
                        heap.push(HeapEntry { dist: nd, node: v });
                    }
                }
            }
            if prev_edge[sink] == usize::MAX {
                break;
            }
            for v in 0..n {
                if dist[v].is_finite() {
                    phi[v] += dist[v];
                }
            }
            let mut bottleneck = i64::MAX;
            let mut v = sink;
            while v != source {
                let e = prev_edge[v];
                bottleneck = bottleneck.min(self.cap[e]);
                v = self.to[e ^ 1];
            }
            let mut v = sink;
            while v != source {
                let e = prev_edge[v];
                self.cap[e] -= bottleneck;
                self.cap[e ^ 1] += bottleneck;
                v = self.to[e ^ 1];
            }
            total_flow += bottleneck;
        }
        total_flow
    }
}
