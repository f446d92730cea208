//! OpenQASM 2.0 emitter and a reader for the emitted subset.

use super::{CircuitMeta, Gate, GateCircuit, Op, Variant};
use crate::error::{Error, Location, Result};
use std::fmt::Write;

/// `{seed}_{t}_{theta_millirad}.qasm`.
pub fn qasm_file_name(meta: &CircuitMeta) -> String {
    format!("{}_{}_{}.qasm", meta.seed, meta.t, (meta.theta * 1000.0).round() as i64)
}

fn args(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x}")).collect::<Vec<_>>().join(",")
}

/// Renders the circuit. Floats use shortest round-trip decimals, so the
/// output is byte-identical for identical inputs and re-imports exactly.
pub fn export_qasm(c: &GateCircuit) -> String {
    let m = &c.meta;
    let mut s = String::new();
    s.push_str("OPENQASM 2.0;\ninclude \"qelib1.inc\";\n");
    let _ = writeln!(s, "// qtree t={} theta={} seed={} variant={} l={}", m.t, m.theta, m.seed, m.variant, m.l);
    let _ = writeln!(s, "qreg q[{}];", c.n_qubits);
    let _ = writeln!(s, "creg c[{}];", c.n_clbits());
    for op in &c.ops {
        let q = |i: usize| format!("q[{}]", op.qubits[i]);
        let _ = match op.gate {
            Gate::H => writeln!(s, "h {};", q(0)),
            Gate::U3 { theta, phi, lambda } => writeln!(s, "u3({}) {};", args(&[theta, phi, lambda]), q(0)),
            Gate::Rx(a) => writeln!(s, "rx({}) {};", args(&[a]), q(0)),
            Gate::Ry(a) => writeln!(s, "ry({}) {};", args(&[a]), q(0)),
            Gate::Rzz(a) => writeln!(s, "rzz({}) {},{};", args(&[a]), q(0), q(1)),
            Gate::Cx => writeln!(s, "cx {},{};", q(0), q(1)),
            Gate::Reset => writeln!(s, "reset {};", q(0)),
            Gate::Measure => writeln!(s, "measure {} -> c[{}];", q(0), op.clbit.unwrap_or(0)),
        };
    }
    s
}

fn perr(line: usize, message: impl Into<String>) -> Error {
    Error::Parse { location: Location::Text { line, column: 1 }, message: message.into() }
}

fn index(tok: &str, reg: &str, line: usize) -> Result<usize> {
    tok.trim()
        .strip_prefix(reg)
        .and_then(|r| r.strip_prefix('['))
        .and_then(|r| r.strip_suffix(']'))
        .and_then(|r| r.parse().ok())
        .ok_or_else(|| perr(line, format!("expected {reg}[n], found `{tok}`")))
}

fn parse_meta(line: &str, n: usize) -> Result<CircuitMeta> {
    let mut t = None;
    let mut theta = None;
    let mut seed = None;
    let mut variant = None;
    let mut l = None;
    for kv in line.split_whitespace().skip(2) {
        let (k, v) = kv.split_once('=').ok_or_else(|| perr(n, format!("bad header entry `{kv}`")))?;
        let bad = || perr(n, format!("bad header value `{kv}`"));
        match k {
            "t" => t = Some(v.parse().map_err(|_| bad())?),
            "theta" => theta = Some(v.parse().map_err(|_| bad())?),
            "seed" => seed = Some(v.parse().map_err(|_| bad())?),
            "variant" => variant = Some(v.parse::<Variant>().map_err(|_| bad())?),
            "l" => l = Some(v.parse().map_err(|_| bad())?),
            _ => {}
        }
    }
    let miss = |f: &str| perr(n, format!("header lacks `{f}`"));
    Ok(CircuitMeta {
        t: t.ok_or_else(|| miss("t"))?,
        theta: theta.ok_or_else(|| miss("theta"))?,
        seed: seed.ok_or_else(|| miss("seed"))?,
        variant: variant.ok_or_else(|| miss("variant"))?,
        l: l.ok_or_else(|| miss("l"))?,
    })
}

/// Reads text produced by [`export_qasm`] back into a circuit.
pub fn parse_qasm(text: &str) -> Result<GateCircuit> {
    let mut meta = None;
    let mut n_qubits = None;
    let mut n_clbits = None;
    let mut ops = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let n = i + 1;
        let line = raw.trim();
        if line.starts_with("// qtree ") {
            meta = Some(parse_meta(line, n)?);
            continue;
        }
        if line.is_empty() || line.starts_with("//") || line.starts_with("OPENQASM") || line.starts_with("include") {
            continue;
        }
        let stmt = line.strip_suffix(';').ok_or_else(|| perr(n, "missing `;`"))?;
        let (head, rest) = match stmt.find(|c: char| c == ' ' || c == '(') {
            Some(p) => stmt.split_at(p),
            None => return Err(perr(n, format!("cannot parse `{stmt}`"))),
        };
        let (params, operands) = if let Some(r) = rest.strip_prefix('(') {
            let close = r.find(')').ok_or_else(|| perr(n, "unclosed parameter list"))?;
            let ps = r[..close]
                .split(',')
                .map(|p| p.trim().parse::<f64>().map_err(|_| perr(n, format!("bad parameter `{p}`"))))
                .collect::<Result<Vec<_>>>()?;
            (ps, r[close + 1..].trim())
        } else {
            (Vec::new(), rest.trim())
        };
        let want = |k: usize| if params.len() == k { Ok(()) } else { Err(perr(n, format!("`{head}` takes {k} parameters"))) };
        match head {
            "qreg" => n_qubits = Some(index(operands, "q", n)?),
            "creg" => n_clbits = Some(index(operands, "c", n)?),
            "measure" => {
                let (q, c) = operands.split_once("->").ok_or_else(|| perr(n, "measure lacks `->`"))?;
                ops.push(Op { gate: Gate::Measure, qubits: vec![index(q, "q", n)?], clbit: Some(index(c, "c", n)?) });
            }
            _ => {
                let gate = match head {
                    "h" => want(0).map(|_| Gate::H),
                    "u3" => want(3).map(|_| Gate::U3 { theta: params[0], phi: params[1], lambda: params[2] }),
                    "rx" => want(1).map(|_| Gate::Rx(params[0])),
                    "ry" => want(1).map(|_| Gate::Ry(params[0])),
                    "rzz" => want(1).map(|_| Gate::Rzz(params[0])),
                    "cx" => want(0).map(|_| Gate::Cx),
                    "reset" => want(0).map(|_| Gate::Reset),
                    _ => Err(perr(n, format!("unsupported statement `{head}`"))),
                }?;
                let qubits = operands.split(',').map(|q| index(q, "q", n)).collect::<Result<Vec<_>>>()?;
                if qubits.len() != gate.arity() {
                    return Err(perr(n, format!("`{head}` acts on {} qubits", gate.arity())));
                }
                ops.push(Op { gate, qubits, clbit: None });
            }
        }
    }
    let n_qubits = n_qubits.ok_or_else(|| perr(0, "missing qreg"))?;
    let n_clbits = n_clbits.ok_or_else(|| perr(0, "missing creg"))?;
    let meta = meta.ok_or_else(|| perr(0, "missing `// qtree` header comment"))?;
    Ok(GateCircuit { n_qubits, ops, clbit_order: (0..n_clbits).collect(), meta })
}
