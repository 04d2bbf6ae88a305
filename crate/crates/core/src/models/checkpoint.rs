//! Plain-text parameter checkpoints.
//!
//! ```text
//! biser-checkpoint v1
//! model biser
//! ae user 300 100
//! tensor encoder_weights 300 100
//! <300 lines of 100 values>
//! ...
//! ```
//!
//! Values use the shortest decimal form that parses back to the same
//! `f64`, so a write/read cycle is bit-exact.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{AeParams, MfParams, Model, Orientation};
use crate::error::{Error, Result};

pub const CHECKPOINT_MAGIC: &str = "biser-checkpoint v1";

fn push_tensor(out: &mut String, name: &str, rows: usize, cols: usize, values: &[f64]) {
    let _ = writeln!(out, "tensor {name} {rows} {cols}");
    for r in 0..rows {
        let row = &values[r * cols..(r + 1) * cols];
        let mut first = true;
        for v in row {
            if !first {
                out.push(' ');
            }
            first = false;
            let _ = write!(out, "{v:?}");
        }
        out.push('\n');
    }
}

fn push_ae(out: &mut String, p: &AeParams) {
    let (n, d) = (p.input_dim, p.hidden_dim);
    let _ = writeln!(out, "ae {} {n} {d}", p.orientation.as_str());
    push_tensor(out, "encoder_weights", n, d, &p.encoder_weights);
    push_tensor(out, "encoder_bias", 1, d, &p.encoder_bias);
    push_tensor(out, "decoder_weights", d, n, &p.decoder_weights);
    push_tensor(out, "decoder_bias", 1, n, &p.decoder_bias);
}

pub fn checkpoint_text(model: &Model) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{CHECKPOINT_MAGIC}");
    let _ = writeln!(out, "model {}", model.kind());
    match model {
        Model::Mf(p) => {
            let _ = writeln!(out, "mf {} {} {}", p.num_users, p.num_items, p.dim);
            push_tensor(&mut out, "user_factors", p.num_users, p.dim, &p.user_factors);
            push_tensor(&mut out, "item_factors", p.num_items, p.dim, &p.item_factors);
        }
        Model::Ae(p) => push_ae(&mut out, p),
        Model::Bilateral { uae, iae } => {
            push_ae(&mut out, uae);
            push_ae(&mut out, iae);
        }
    }
    out
}

pub fn write_checkpoint(path: &Path, model: &Model) -> Result<()> {
    fs::write(path, checkpoint_text(model)).map_err(|e| Error::io(path, e))
}

struct Reader<'a> {
    lines: std::iter::Enumerate<std::str::Lines<'a>>,
    origin: &'a str,
    last: usize,
}

impl<'a> Reader<'a> {
    fn next_line(&mut self) -> Result<&'a str> {
        match self.lines.next() {
            Some((i, l)) => {
                self.last = i + 1;
                Ok(l)
            }
            None => Err(Error::parse(self.origin, self.last + 1, "unexpected end of checkpoint")),
        }
    }

    fn err(&self, msg: impl Into<String>) -> Error {
        Error::parse(self.origin, self.last, msg)
    }

    fn header(&mut self, keyword: &str, arity: usize) -> Result<Vec<&'a str>> {
        let line = self.next_line()?;
        let parts: Vec<&str> = line.split_whitespace().collect();
        if parts.first() != Some(&keyword) || parts.len() != arity + 1 {
            return Err(self.err(format!("expected `{keyword}` header with {arity} fields")));
        }
        Ok(parts[1..].to_vec())
    }

    fn usize_field(&self, s: &str) -> Result<usize> {
        s.parse().map_err(|_| self.err(format!("`{s}` is not a count")))
    }

    fn tensor(&mut self, name: &str, rows: usize, cols: usize) -> Result<Vec<f64>> {
        let h = self.header("tensor", 3)?;
        if h[0] != name || self.usize_field(h[1])? != rows || self.usize_field(h[2])? != cols {
            return Err(self.err(format!(
                "expected tensor {name} {rows} {cols}, found {}",
                h.join(" ")
            )));
        }
        let mut values = Vec::with_capacity(rows * cols);
        for _ in 0..rows {
            let line = self.next_line()?;
            let before = values.len();
            for tok in line.split_whitespace() {
                let v: f64 = tok
                    .parse()
                    .map_err(|_| self.err(format!("`{tok}` is not a number")))?;
                values.push(v);
            }
            if values.len() - before != cols {
                return Err(self.err(format!("expected {cols} values")));
            }
        }
        Ok(values)
    }

    fn ae(&mut self) -> Result<AeParams> {
        let h = self.header("ae", 3)?;
        let orientation = Orientation::parse(h[0])?;
        let (n, d) = (self.usize_field(h[1])?, self.usize_field(h[2])?);
        let p = AeParams {
            orientation,
            input_dim: n,
            hidden_dim: d,
            encoder_weights: self.tensor("encoder_weights", n, d)?,
            encoder_bias: self.tensor("encoder_bias", 1, d)?,
            decoder_weights: self.tensor("decoder_weights", d, n)?,
            decoder_bias: self.tensor("decoder_bias", 1, n)?,
        };
        p.validate()?;
        Ok(p)
    }
}

pub fn parse_checkpoint(text: &str, origin: &str) -> Result<Model> {
    let mut r = Reader {
        lines: text.lines().enumerate(),
        origin,
        last: 0,
    };
    if r.next_line()? != CHECKPOINT_MAGIC {
        return Err(r.err("not a checkpoint (bad magic line)"));
    }
    let kind = r.header("model", 1)?[0];
    let model = match kind {
        "mf" => {
            let h = r.header("mf", 3)?;
            let (m, n, k) = (r.usize_field(h[0])?, r.usize_field(h[1])?, r.usize_field(h[2])?);
            let p = MfParams {
                num_users: m,
                num_items: n,
                dim: k,
                user_factors: r.tensor("user_factors", m, k)?,
                item_factors: r.tensor("item_factors", n, k)?,
            };
            p.validate()?;
            Model::Mf(p)
        }
        "uae" | "iae" => Model::Ae(r.ae()?),
        "biser" => Model::Bilateral {
            uae: r.ae()?,
            iae: r.ae()?,
        },
        other => return Err(r.err(format!("unknown model kind `{other}`"))),
    };
    Ok(model)
}

pub fn read_checkpoint(path: &Path) -> Result<Model> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_checkpoint(&text, &path.display().to_string())
}
