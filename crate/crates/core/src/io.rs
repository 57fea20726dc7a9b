//! Plain-text formats: edge lists, dense matrices, and CSV tables for
//! ensembles, measurement systems and forwarding schedules.

use std::io::{BufRead, Write};

use nalgebra::{DMatrix, DVector};

use crate::error::{QncError, Result};
use crate::forwarding::DeliverySchedule;
use crate::messages::MessageEnsemble;
use crate::netgraph::{Deployment, Edge, NetworkGraph, NodeId};
use crate::qnc::MeasurementSystem;

fn parse_err(line: usize, msg: impl Into<String>) -> QncError {
    QncError::Parse { line, msg: msg.into() }
}

/// Header `n m gateway`, then `tail head capacity` per edge; node ids are 1-based.
pub fn write_edge_list<W: Write>(g: &NetworkGraph, mut w: W) -> Result<()> {
    writeln!(w, "{} {} {}", g.n(), g.num_edges(), g.gateway().0 + 1)?;
    for e in g.edges() {
        writeln!(w, "{} {} {}", e.tail.0 + 1, e.head.0 + 1, e.capacity)?;
    }
    Ok(())
}

fn fields<T: std::str::FromStr>(line: &str, lineno: usize, count: usize) -> Result<Vec<T>> {
    let out: Vec<T> = line
        .split_whitespace()
        .map(|tok| tok.parse().map_err(|_| parse_err(lineno, format!("bad number '{tok}'"))))
        .collect::<Result<_>>()?;
    if out.len() != count {
        return Err(parse_err(lineno, format!("expected {count} fields, got {}", out.len())));
    }
    Ok(out)
}

fn node(id: usize, lineno: usize) -> Result<NodeId> {
    id.checked_sub(1).map(NodeId).ok_or_else(|| parse_err(lineno, "node ids are 1-based"))
}

pub fn read_edge_list<R: BufRead>(r: R) -> Result<NetworkGraph> {
    let mut lines = r.lines().enumerate().filter(|(_, l)| l.as_ref().map_or(true, |s| !s.trim().is_empty()));
    let (_, header) = lines.next().ok_or_else(|| parse_err(1, "empty edge list"))?;
    let h: Vec<usize> = fields(&header?, 1, 3)?;
    let (n, m) = (h[0], h[1]);
    let gateway = node(h[2], 1)?;
    let mut edges = Vec::with_capacity(m);
    for (idx, line) in lines {
        let f: Vec<usize> = fields(&line?, idx + 1, 3)?;
        let capacity = u32::try_from(f[2]).map_err(|_| parse_err(idx + 1, "capacity out of range"))?;
        edges.push(Edge { tail: node(f[0], idx + 1)?, head: node(f[1], idx + 1)?, capacity });
    }
    if edges.len() != m {
        return Err(parse_err(0, format!("header declares {m} edges, found {}", edges.len())));
    }
    NetworkGraph::new(n, edges, gateway)
}

pub fn read_deployment<R: BufRead>(r: R) -> Result<Deployment> {
    Deployment::from_graph(read_edge_list(r)?)
}

/// Dense matrix, one row per line, whitespace separated, full precision.
pub fn write_matrix<W: Write>(a: &DMatrix<f64>, mut w: W) -> Result<()> {
    for row in a.row_iter() {
        let line: Vec<String> = row.iter().map(|v| format!("{v:e}")).collect();
        writeln!(w, "{}", line.join(" "))?;
    }
    Ok(())
}

pub fn read_matrix<R: BufRead>(r: R) -> Result<DMatrix<f64>> {
    let mut data = Vec::new();
    let mut cols = None;
    let mut rows = 0;
    for (idx, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let row: Vec<f64> = line
            .split_whitespace()
            .map(|tok| tok.parse().map_err(|_| parse_err(idx + 1, format!("bad number '{tok}'"))))
            .collect::<Result<_>>()?;
        match cols {
            None => cols = Some(row.len()),
            Some(c) if c != row.len() => return Err(parse_err(idx + 1, format!("expected {c} columns, got {}", row.len()))),
            _ => {}
        }
        data.extend(row);
        rows += 1;
    }
    Ok(DMatrix::from_row_slice(rows, cols.unwrap_or(0), &data))
}

/// Columns `v,Q_v,S_v,X_v` with 1-based `v`.
pub fn write_ensemble<W: Write>(e: &MessageEnsemble, w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["v", "Q_v", "S_v", "X_v"])?;
    for v in 0..e.n() {
        out.write_record([(v + 1).to_string(), u8::from(e.states[v]).to_string(), e.s[v].to_string(), e.x[v].to_string()])?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_ensemble<R: std::io::Read>(r: R) -> Result<MessageEnsemble> {
    let mut states = Vec::new();
    let mut s = Vec::new();
    let mut x = Vec::new();
    for (idx, rec) in csv::Reader::from_reader(r).records().enumerate() {
        let rec = rec?;
        let get = |i: usize| -> Result<f64> {
            rec.get(i)
                .and_then(|f| f.parse().ok())
                .ok_or_else(|| parse_err(idx + 2, format!("bad field {i}")))
        };
        states.push(get(1)? != 0.0);
        s.push(get(2)?);
        x.push(get(3)?);
    }
    Ok(MessageEnsemble { states, s: DVector::from_vec(s), x: DVector::from_vec(x) })
}

pub const MEASUREMENT_HEADER: [&str; 6] = ["row", "node", "z", "n_eff", "noise_var", "delay"];

/// One row per received packet; `Ψ` goes to a separate matrix file.
pub fn write_measurements<W: Write>(sys: &MeasurementSystem, w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(MEASUREMENT_HEADER)?;
    for i in 0..sys.m() {
        out.write_record([
            (i + 1).to_string(),
            (sys.row_node[i].0 + 1).to_string(),
            sys.z[i].to_string(),
            sys.n_eff[i].to_string(),
            sys.row_noise_var[i].to_string(),
            sys.delays[i].to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_measurements<R: std::io::Read>(table: R, psi: DMatrix<f64>) -> Result<MeasurementSystem> {
    let (mut z, mut n_eff, mut row_node, mut row_noise_var, mut delays) = (Vec::new(), Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for (idx, rec) in csv::Reader::from_reader(table).records().enumerate() {
        let rec = rec?;
        let line = idx + 2;
        let field = |i: usize| rec.get(i).ok_or_else(|| parse_err(line, format!("missing field {i}")));
        let num = |i: usize| -> Result<f64> { field(i)?.parse().map_err(|_| parse_err(line, format!("bad field {i}"))) };
        let int = |i: usize| -> Result<usize> { field(i)?.parse().map_err(|_| parse_err(line, format!("bad field {i}"))) };
        row_node.push(node(int(1)?, line)?);
        z.push(num(2)?);
        n_eff.push(num(3)?);
        row_noise_var.push(num(4)?);
        delays.push(int(5)?);
    }
    if psi.nrows() != z.len() {
        return Err(QncError::InconsistentRowMap(format!("Ψ has {} rows but the table has {}", psi.nrows(), z.len())));
    }
    Ok(MeasurementSystem { psi, z: DVector::from_vec(z), n_eff: DVector::from_vec(n_eff), row_node, row_noise_var, delays })
}

/// Columns `v,arrival_slot,value`.
pub fn write_schedule<W: Write>(s: &DeliverySchedule, w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["v", "arrival_slot", "value"])?;
    for (v, (slot, value)) in s.arrival_slot.iter().zip(&s.delivered_value).enumerate() {
        out.write_record([(v + 1).to_string(), slot.to_string(), value.to_string()])?;
    }
    out.flush()?;
    Ok(())
}
