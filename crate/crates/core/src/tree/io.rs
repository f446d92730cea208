//! On-disk formats: one JSON document per instance set and JSON Lines for
//! records. Floats are written in shortest round-trip form, so parsing a
//! written file reproduces every gate bit for bit.

use super::{build_instance, MeasurementRecord, TreeInstance};
use crate::error::{Error, Location, Result};
use crate::qmath::{NodeGates, Unitary2};
use crate::rng::{derive_seed, Purpose};
use serde_json::{json, Map, Value};
use std::io::Write;

pub const FORMAT_VERSION: u64 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct CircuitEntry {
    pub id: u64,
    pub instance: TreeInstance,
}

/// A batch of circuits sharing depth and strength.
#[derive(Debug, Clone, PartialEq)]
pub struct InstanceSet {
    pub t: u32,
    pub theta: f64,
    pub seed: u64,
    /// Free-form description of the producing run.
    pub producer: Option<Value>,
    pub circuits: Vec<CircuitEntry>,
}

impl InstanceSet {
    /// Circuit `id` is built from the seed `derive_seed(seed, CircuitSeed, [id])`.
    pub fn generate(t: u32, theta: f64, seed: u64, n_circuits: u64) -> Result<Self> {
        let circuits = (0..n_circuits)
            .map(|id| {
                let instance = build_instance(t, theta, circuit_seed(seed, id))?;
                Ok(CircuitEntry { id, instance })
            })
            .collect::<Result<Vec<_>>>()?;
        let theta = circuits.first().map_or(theta, |c| c.instance.theta);
        Ok(InstanceSet { t, theta, seed, producer: None, circuits })
    }

    pub fn get(&self, id: u64) -> Option<&TreeInstance> {
        self.circuits.iter().find(|c| c.id == id).map(|c| &c.instance)
    }
}

pub fn circuit_seed(seed: u64, id: u64) -> u64 {
    derive_seed(seed, Purpose::CircuitSeed, &[id])
}

/// One shot of one circuit.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RecordLine {
    pub circuit_id: u64,
    pub shot: u64,
    pub record: MeasurementRecord,
}

fn gates_json(g: &NodeGates) -> Value {
    Value::Array(g.as_array().iter().map(|u| json!(u.to_row_major())).collect())
}

pub fn write_instances<W: Write>(w: &mut W, set: &InstanceSet) -> Result<()> {
    writeln!(w, "{{")?;
    writeln!(w, "  \"format_version\": {FORMAT_VERSION},")?;
    if let Some(p) = &set.producer {
        writeln!(w, "  \"producer\": {},", serde_json::to_string(p).map_err(io_err)?)?;
    }
    writeln!(w, "  \"t\": {},", set.t)?;
    writeln!(w, "  \"theta\": {},", json!(set.theta))?;
    writeln!(w, "  \"seed\": {},", set.seed)?;
    writeln!(w, "  \"circuits\": [")?;
    for (i, c) in set.circuits.iter().enumerate() {
        let gates = Value::Array(c.instance.gates.iter().map(gates_json).collect());
        let sep = if i + 1 < set.circuits.len() { "," } else { "" };
        writeln!(w, "    {{\"id\": {}, \"gates\": {}}}{sep}", c.id, gates)?;
    }
    writeln!(w, "  ]")?;
    writeln!(w, "}}")?;
    Ok(())
}

fn io_err(e: serde_json::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

fn syntax(e: serde_json::Error, line_offset: usize) -> Error {
    Error::Parse {
        location: Location::Text { line: e.line() + line_offset, column: e.column() },
        message: e.to_string(),
    }
}

/// Field-level accessors that report the dotted path on failure.
struct Ctx {
    line: Option<usize>,
}

impl Ctx {
    fn err(&self, path: &str, message: impl Into<String>) -> Error {
        Error::Parse { location: Location::Field { line: self.line, path: path.to_string() }, message: message.into() }
    }

    fn field<'a>(&self, obj: &'a Map<String, Value>, key: &str, path: &str) -> Result<&'a Value> {
        let p = join(path, key);
        obj.get(key).ok_or_else(|| self.err(&p, format!("missing field `{key}`")))
    }

    fn object<'a>(&self, v: &'a Value, path: &str) -> Result<&'a Map<String, Value>> {
        v.as_object().ok_or_else(|| self.err(path, "expected an object"))
    }

    fn array<'a>(&self, v: &'a Value, path: &str) -> Result<&'a Vec<Value>> {
        v.as_array().ok_or_else(|| self.err(path, "expected an array"))
    }

    fn u64(&self, v: &Value, path: &str) -> Result<u64> {
        v.as_u64().ok_or_else(|| self.err(path, "expected a non-negative integer"))
    }

    fn f64(&self, v: &Value, path: &str) -> Result<f64> {
        v.as_f64().ok_or_else(|| self.err(path, "expected a number"))
    }

    fn version(&self, obj: &Map<String, Value>, path: &str) -> Result<()> {
        let v = self.u64(self.field(obj, "format_version", path)?, &join(path, "format_version"))?;
        if v != FORMAT_VERSION {
            return Err(Error::Version { found: v, expected: FORMAT_VERSION });
        }
        Ok(())
    }
}

fn join(path: &str, key: &str) -> String {
    if path.is_empty() { key.to_string() } else { format!("{path}.{key}") }
}

fn parse_gates(ctx: &Ctx, v: &Value, path: &str, t: u32) -> Result<Vec<NodeGates>> {
    let nodes = ctx.array(v, path)?;
    let want = super::n_nodes(t);
    if nodes.len() != want {
        return Err(ctx.err(path, format!("expected {want} nodes for depth {t}, found {}", nodes.len())));
    }
    nodes
        .iter()
        .enumerate()
        .map(|(k, node)| {
            let np = format!("{path}[{k}]");
            let us = ctx.array(node, &np)?;
            if us.len() != 4 {
                return Err(ctx.err(&np, format!("expected 4 unitaries, found {}", us.len())));
            }
            let mut out = [Unitary2::identity(); 4];
            for (j, u) in us.iter().enumerate() {
                let up = format!("{np}[{j}]");
                let xs = ctx.array(u, &up)?;
                if xs.len() != 8 {
                    return Err(ctx.err(&up, format!("expected 8 numbers, found {}", xs.len())));
                }
                let mut a = [0.0; 8];
                for (i, x) in xs.iter().enumerate() {
                    a[i] = ctx.f64(x, &format!("{up}[{i}]"))?;
                }
                out[j] = Unitary2::from_row_major(&a).map_err(|e| ctx.err(&up, e.to_string()))?;
            }
            Ok(NodeGates { u1: out[0], u2: out[1], u3: out[2], u4: out[3] })
        })
        .collect()
}

pub fn parse_instances(text: &str) -> Result<InstanceSet> {
    let doc: Value = serde_json::from_str(text).map_err(|e| syntax(e, 0))?;
    let ctx = Ctx { line: None };
    let root = ctx.object(&doc, "")?;
    ctx.version(root, "")?;
    let t64 = ctx.u64(ctx.field(root, "t", "")?, "t")?;
    let t = u32::try_from(t64).ok().filter(|&t| (1..=super::MAX_DEPTH).contains(&t)).ok_or_else(|| ctx.err("t", format!("depth {t64} out of range")))?;
    let theta = ctx.f64(ctx.field(root, "theta", "")?, "theta")?;
    let seed = ctx.u64(ctx.field(root, "seed", "")?, "seed")?;
    let producer = root.get("producer").cloned();
    let list = ctx.array(ctx.field(root, "circuits", "")?, "circuits")?;
    let mut circuits = Vec::with_capacity(list.len());
    for (i, c) in list.iter().enumerate() {
        let cp = format!("circuits[{i}]");
        let obj = ctx.object(c, &cp)?;
        let id = ctx.u64(ctx.field(obj, "id", &cp)?, &join(&cp, "id"))?;
        let gp = join(&cp, "gates");
        let gates = parse_gates(&ctx, ctx.field(obj, "gates", &cp)?, &gp, t)?;
        let instance = TreeInstance::new(t, theta, gates, circuit_seed(seed, id)).map_err(|e| ctx.err("theta", e.to_string()))?;
        circuits.push(CircuitEntry { id, instance });
    }
    Ok(InstanceSet { t, theta: circuits.first().map_or(theta, |c| c.instance.theta), seed, producer, circuits })
}

/// Writes an optional header line followed by one line per shot.
pub fn write_records<W: Write>(w: &mut W, producer: Option<&Value>, lines: &[RecordLine]) -> Result<()> {
    if let Some(p) = producer {
        writeln!(w, "{}", json!({"format_version": FORMAT_VERSION, "producer": p}))?;
    }
    for l in lines {
        writeln!(w, "{}", json!({"circuit_id": l.circuit_id, "shot": l.shot, "bits": l.record.bits}))?;
    }
    Ok(())
}

/// Parses a records stream. A first line carrying `format_version` and no
/// `bits` is a header; its producer object is returned.
pub fn parse_records(text: &str) -> Result<(Option<Value>, Vec<RecordLine>)> {
    let mut header = None;
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let v: Value = serde_json::from_str(raw).map_err(|e| syntax(e, i))?;
        let ctx = Ctx { line: Some(line) };
        let obj = ctx.object(&v, "")?;
        if out.is_empty() && header.is_none() && obj.contains_key("format_version") && !obj.contains_key("bits") {
            ctx.version(obj, "")?;
            header = Some(obj.get("producer").cloned().unwrap_or(Value::Null));
            continue;
        }
        let circuit_id = ctx.u64(ctx.field(obj, "circuit_id", "")?, "circuit_id")?;
        let shot = ctx.u64(ctx.field(obj, "shot", "")?, "shot")?;
        let bits_v = ctx.array(ctx.field(obj, "bits", "")?, "bits")?;
        let mut bits = Vec::with_capacity(bits_v.len());
        for (j, b) in bits_v.iter().enumerate() {
            match b.as_u64() {
                Some(x @ (0 | 1)) => bits.push(x as u8),
                _ => return Err(ctx.err(&format!("bits[{j}]"), format!("expected 0 or 1, found {b}"))),
            }
        }
        let record = MeasurementRecord::new(bits).map_err(|e| ctx.err("bits", e.to_string()))?;
        out.push(RecordLine { circuit_id, shot, record });
    }
    Ok((header, out))
}
