//! Plain-text network checkpoints.
//!
//! ```text
//! network
//! head dueling_q_values
//! dropout none                  (or: dropout <rate> <layer index>...)
//! layer trunk 100 128 relu      (one line per layer, canonical order)
//! layer value 128 64 relu
//! ...
//! params
//! <out_dim rows of in_dim floats, then one row of out_dim biases, per layer>
//! end
//! ```
//!
//! Floats are written with 17 significant digits, so a write/read cycle
//! reproduces every parameter bit for bit.

use std::fmt::Write as _;

use super::layer::{Activation, DenseLayer};
use super::network::{DropoutSpec, HeadKind, Network};
use crate::error::{Error, Result};

pub(crate) fn fmt_f64(out: &mut String, x: f64) {
    write!(out, "{x:.16e}").unwrap();
}

fn push_row(out: &mut String, row: &[f64]) {
    for (i, &x) in row.iter().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        fmt_f64(out, x);
    }
    out.push('\n');
}

/// Serializes a network.
pub fn network_to_string(net: &Network) -> String {
    let mut out = String::new();
    out.push_str("network\n");
    writeln!(out, "head {}", net.head().name()).unwrap();
    match net.dropout() {
        None => out.push_str("dropout none\n"),
        Some(d) => {
            out.push_str("dropout ");
            fmt_f64(&mut out, d.rate);
            for i in &d.placement {
                write!(out, " {i}").unwrap();
            }
            out.push('\n');
        }
    }
    let groups = [
        ("trunk", net.trunk()),
        ("value", net.value_stream()),
        ("advantage", net.advantage_stream()),
    ];
    for (name, layers) in groups {
        for l in layers {
            writeln!(
                out,
                "layer {name} {} {} {}",
                l.in_dim(),
                l.out_dim(),
                l.activation().name()
            )
            .unwrap();
        }
    }
    out.push_str("params\n");
    for l in net.layers() {
        let rows = l.weight_rows();
        for row in rows.chunks(l.in_dim().max(1)) {
            push_row(&mut out, row);
        }
        push_row(&mut out, l.bias());
    }
    out.push_str("end\n");
    out
}

/// Cursor over numbered, non-empty lines.
pub(crate) struct Lines<'a> {
    inner: std::iter::Peekable<std::iter::Enumerate<std::str::Lines<'a>>>,
}

impl<'a> Lines<'a> {
    pub(crate) fn new(text: &'a str) -> Self {
        Self {
            inner: text.lines().enumerate().peekable(),
        }
    }

    pub(crate) fn next_line(&mut self) -> Result<(usize, &'a str)> {
        for (i, line) in self.inner.by_ref() {
            let t = line.trim();
            if !t.is_empty() && !t.starts_with('#') {
                return Ok((i + 1, t));
            }
        }
        Err(Error::Parse {
            line: 0,
            msg: "unexpected end of input".into(),
        })
    }

    pub(crate) fn expect(&mut self, word: &str) -> Result<()> {
        let (n, line) = self.next_line()?;
        if line != word {
            return Err(Error::Parse {
                line: n,
                msg: format!("expected `{word}`, found `{line}`"),
            });
        }
        Ok(())
    }
}

fn parse_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        line,
        msg: msg.into(),
    }
}

fn parse_floats(line: usize, text: &str, expected: usize) -> Result<Vec<f64>> {
    let vals = text
        .split_whitespace()
        .map(|t| t.parse::<f64>())
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| parse_err(line, e.to_string()))?;
    if vals.len() != expected {
        return Err(parse_err(
            line,
            format!("expected {expected} values, found {}", vals.len()),
        ));
    }
    Ok(vals)
}

pub(crate) fn read_network(lines: &mut Lines<'_>) -> Result<Network> {
    lines.expect("network")?;
    let (n, head_line) = lines.next_line()?;
    let head = head_line
        .strip_prefix("head ")
        .and_then(HeadKind::parse)
        .ok_or_else(|| parse_err(n, format!("bad head line `{head_line}`")))?;

    let (n, dropout_line) = lines.next_line()?;
    let mut words = dropout_line.split_whitespace();
    if words.next() != Some("dropout") {
        return Err(parse_err(n, "expected dropout line"));
    }
    let dropout = match words.next() {
        Some("none") => None,
        Some(rate) => {
            let rate = rate.parse().map_err(|_| parse_err(n, "bad dropout rate"))?;
            let placement = words
                .map(|w| w.parse::<usize>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(|_| parse_err(n, "bad dropout placement"))?;
            Some(DropoutSpec { rate, placement })
        }
        None => return Err(parse_err(n, "empty dropout line")),
    };

    let mut shapes = Vec::new();
    loop {
        let (n, line) = lines.next_line()?;
        if line == "params" {
            break;
        }
        let parts: Vec<&str> = line.split_whitespace().collect();
        if parts.len() != 5 || parts[0] != "layer" {
            return Err(parse_err(n, format!("bad layer line `{line}`")));
        }
        let group = match parts[1] {
            g @ ("trunk" | "value" | "advantage") => g,
            other => return Err(parse_err(n, format!("unknown layer group `{other}`"))),
        };
        let in_dim: usize = parts[2].parse().map_err(|_| parse_err(n, "bad in_dim"))?;
        let out_dim: usize = parts[3].parse().map_err(|_| parse_err(n, "bad out_dim"))?;
        let act = Activation::parse(parts[4])
            .ok_or_else(|| parse_err(n, format!("unknown activation `{}`", parts[4])))?;
        shapes.push((group, in_dim, out_dim, act));
    }

    let (mut trunk, mut value, mut advantage) = (Vec::new(), Vec::new(), Vec::new());
    for (group, in_dim, out_dim, act) in shapes {
        let mut rows = Vec::with_capacity(in_dim * out_dim);
        for _ in 0..out_dim {
            let (n, line) = lines.next_line()?;
            rows.extend(parse_floats(n, line, in_dim)?);
        }
        let (n, line) = lines.next_line()?;
        let bias = parse_floats(n, line, out_dim)?;
        let layer = DenseLayer::from_rows(in_dim, out_dim, act, &rows, bias)?;
        match group {
            "trunk" => trunk.push(layer),
            "value" => value.push(layer),
            _ => advantage.push(layer),
        }
    }
    lines.expect("end")?;
    Network::from_layers(head, trunk, value, advantage, dropout)
}

/// Parses a network written by [`network_to_string`].
pub fn network_from_str(text: &str) -> Result<Network> {
    read_network(&mut Lines::new(text))
}
