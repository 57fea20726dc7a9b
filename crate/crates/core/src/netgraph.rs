//! Random directed network deployments and shortest routes to the gateway.
//!
//! Nodes are zero-based internally (`NodeId(0)` .. `NodeId(n-1)`); the
//! plain-text edge-list format in [`crate::io`] is one-based.

use std::cmp::Reverse;
use std::collections::BinaryHeap;
use std::fmt;

use rand::Rng;

use crate::error::{QncError, Result};
use crate::seed;

/// Number of regeneration attempts before a deployment is declared failed.
pub const RETRY_BUDGET: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(pub usize);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0 + 1)
    }
}

/// Position of an edge in [`NetworkGraph::edges`]; smaller ids win routing ties.
pub type EdgeId = usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Edge {
    pub tail: NodeId,
    pub head: NodeId,
    /// Bits per channel use.
    pub capacity: u32,
}

/// Directed multigraph with a designated gateway node.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NetworkGraph {
    n: usize,
    edges: Vec<Edge>,
    gateway: NodeId,
    in_adj: Vec<Vec<EdgeId>>,
    out_adj: Vec<Vec<EdgeId>>,
}

impl NetworkGraph {
    pub fn new(n: usize, edges: Vec<Edge>, gateway: NodeId) -> Result<Self> {
        if n < 2 {
            return Err(QncError::InvalidParameter(format!("need n >= 2 nodes, got {n}")));
        }
        if gateway.0 >= n {
            return Err(QncError::InvalidParameter(format!("gateway {gateway} outside 1..={n}")));
        }
        let mut in_adj = vec![Vec::new(); n];
        let mut out_adj = vec![Vec::new(); n];
        for (id, e) in edges.iter().enumerate() {
            if e.tail.0 >= n || e.head.0 >= n {
                return Err(QncError::InvalidParameter(format!("edge {id} references a node outside 1..={n}")));
            }
            if e.tail == e.head {
                return Err(QncError::InvalidParameter(format!("edge {id} is a self-loop at node {}", e.tail)));
            }
            if e.capacity < 1 {
                return Err(QncError::InvalidParameter(format!("edge {id} has zero capacity")));
            }
            out_adj[e.tail.0].push(id);
            in_adj[e.head.0].push(id);
        }
        Ok(Self { n, edges, gateway, in_adj, out_adj })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edge(&self, id: EdgeId) -> &Edge {
        &self.edges[id]
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn gateway(&self) -> NodeId {
        self.gateway
    }

    pub fn nodes(&self) -> impl Iterator<Item = NodeId> {
        (0..self.n).map(NodeId)
    }

    /// Ids of the edges with `head(e) = v`, in increasing order.
    pub fn in_edges(&self, v: NodeId) -> &[EdgeId] {
        &self.in_adj[v.0]
    }

    /// Ids of the edges with `tail(e) = v`, in increasing order.
    pub fn out_edges(&self, v: NodeId) -> &[EdgeId] {
        &self.out_adj[v.0]
    }

    /// Hop-minimal routes from every node to the gateway.
    ///
    /// Dijkstra with unit weights runs on the reversed graph from the
    /// gateway; each node then takes the smallest-id outgoing edge whose head
    /// is one hop closer, so the next-hop choices form a shortest-path tree.
    pub fn shortest_routes(&self) -> Result<RouteTable> {
        let mut dist = vec![usize::MAX; self.n];
        let mut heap = BinaryHeap::new();
        dist[self.gateway.0] = 0;
        heap.push(Reverse((0usize, self.gateway.0)));
        while let Some(Reverse((d, v))) = heap.pop() {
            if d > dist[v] {
                continue;
            }
            for &e in &self.in_adj[v] {
                let u = self.edges[e].tail.0;
                let cand = d + 1;
                if cand < dist[u] {
                    dist[u] = cand;
                    heap.push(Reverse((cand, u)));
                }
            }
        }
        if let Some(node) = dist.iter().position(|&d| d == usize::MAX) {
            return Err(QncError::Disconnected { node: node + 1 });
        }
        let next_hop = (0..self.n)
            .map(|v| {
                if v == self.gateway.0 {
                    return None;
                }
                self.out_adj[v]
                    .iter()
                    .copied()
                    .find(|&e| dist[self.edges[e].head.0] + 1 == dist[v])
            })
            .collect();
        Ok(RouteTable { next_hop, hops: dist })
    }

    /// True when every node has a directed path to the gateway.
    pub fn reaches_gateway(&self) -> bool {
        let mut seen = vec![false; self.n];
        let mut stack = vec![self.gateway.0];
        seen[self.gateway.0] = true;
        while let Some(v) = stack.pop() {
            for &e in &self.in_adj[v] {
                let u = self.edges[e].tail.0;
                if !seen[u] {
                    seen[u] = true;
                    stack.push(u);
                }
            }
        }
        seen.into_iter().all(|s| s)
    }
}

/// Next-hop edge and hop count for every node.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RouteTable {
    next_hop: Vec<Option<EdgeId>>,
    hops: Vec<usize>,
}

impl RouteTable {
    pub fn hops(&self, v: NodeId) -> usize {
        self.hops[v.0]
    }

    pub fn next_hop(&self, v: NodeId) -> Option<EdgeId> {
        self.next_hop[v.0]
    }

    /// Edge sequence from `v` to the gateway (empty for the gateway itself).
    pub fn path(&self, g: &NetworkGraph, v: NodeId) -> Vec<EdgeId> {
        let mut path = Vec::with_capacity(self.hops[v.0]);
        let mut cur = v;
        while let Some(e) = self.next_hop[cur.0] {
            path.push(e);
            cur = g.edge(e).head;
        }
        path
    }
}

/// A connected network together with its routes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Deployment {
    pub graph: NetworkGraph,
    pub routes: RouteTable,
}

impl Deployment {
    pub fn from_graph(graph: NetworkGraph) -> Result<Self> {
        let routes = graph.shortest_routes()?;
        Ok(Self { graph, routes })
    }
}

fn check_sizes(n: usize, num_edges: usize, capacity: u32) -> Result<()> {
    if n < 2 {
        return Err(QncError::InvalidParameter(format!("need n >= 2 nodes, got {n}")));
    }
    if num_edges < 1 {
        return Err(QncError::InvalidParameter("need at least one edge".into()));
    }
    if capacity < 1 {
        return Err(QncError::InvalidParameter("edge capacity must be >= 1 bit per use".into()));
    }
    Ok(())
}

/// One unconditioned draw: each edge's ordered pair is i.i.d. uniform over
/// the `n(n-1)` pairs without self-loops, and the gateway is uniform.
pub fn sample_graph<R: Rng + ?Sized>(n: usize, num_edges: usize, capacity: u32, rng: &mut R) -> Result<NetworkGraph> {
    check_sizes(n, num_edges, capacity)?;
    let edges = (0..num_edges)
        .map(|_| {
            let tail = rng.random_range(0..n);
            // Skip over `tail` so the head is uniform on the other n-1 nodes.
            let mut head = rng.random_range(0..n - 1);
            if head >= tail {
                head += 1;
            }
            Edge { tail: NodeId(tail), head: NodeId(head), capacity }
        })
        .collect();
    let gateway = NodeId(rng.random_range(0..n));
    NetworkGraph::new(n, edges, gateway)
}

/// Draw deployments until every node reaches the gateway (at most
/// [`RETRY_BUDGET`] attempts).
pub fn generate_network(n: usize, num_edges: usize, capacity: u32, seed: u64) -> Result<Deployment> {
    check_sizes(n, num_edges, capacity)?;
    for attempt in 0..RETRY_BUDGET {
        let mut rng = seed::rng(seed::derive(seed, &[seed::GRAPH, attempt as u64]));
        let graph = sample_graph(n, num_edges, capacity, &mut rng)?;
        if graph.reaches_gateway() {
            return Deployment::from_graph(graph);
        }
    }
    Err(QncError::DeploymentFailed { retries: RETRY_BUDGET })
}
